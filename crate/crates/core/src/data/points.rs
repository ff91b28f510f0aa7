//! Two-moons point clouds, rotations and k-means reduction.

use rand::Rng;
use rand_distr::{Distribution as _, Normal};

use super::distributions::seeded_rng;
use crate::error::{PotError, Result};

/// 2-D points with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 2]>,
    pub labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 2]>, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(PotError::Shape(format!("{} labels for {} points", l.len(), points.len())));
            }
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.points.len().max(1) as f64;
        let (sx, sy) = self.points.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [sx / n, sy / n]
    }
}

pub fn squared_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

/// Two interleaving half circles. Class 0 holds `n/2` points on the upper arc
/// `(cos t, sin t)`, class 1 the rest on `(1 - cos t, 1/2 - sin t)`, with `t`
/// evenly spaced over `[0, pi]`; isotropic Gaussian noise is then added.
pub fn make_moons(n_samples: usize, noise: f64, seed: u64) -> Result<PointCloud> {
    if n_samples < 2 {
        return Err(PotError::Parameter("make_moons needs at least 2 samples".into()));
    }
    if !(noise >= 0.0) {
        return Err(PotError::Parameter(format!("noise must be nonnegative, got {noise}")));
    }
    let n_out = n_samples / 2;
    let n_in = n_samples - n_out;
    let arc = |k: usize, m: usize| if m > 1 { std::f64::consts::PI * k as f64 / (m - 1) as f64 } else { 0.0 };
    let mut points = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for k in 0..n_out {
        let t = arc(k, n_out);
        points.push([t.cos(), t.sin()]);
        labels.push(0);
    }
    for k in 0..n_in {
        let t = arc(k, n_in);
        points.push([1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    if noise > 0.0 {
        let mut rng = seeded_rng(seed);
        let normal = Normal::new(0.0, noise).map_err(|e| PotError::Parameter(e.to_string()))?;
        for p in &mut points {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
    }
    PointCloud::new(points, Some(labels))
}

/// Rotates every point about the cloud's centroid (counterclockwise degrees).
pub fn rotate_cloud(cloud: &PointCloud, degrees: f64) -> PointCloud {
    if degrees == 0.0 {
        return cloud.clone();
    }
    let [cx, cy] = cloud.centroid();
    let (s, c) = degrees.to_radians().sin_cos();
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let (x, y) = (p[0] - cx, p[1] - cy);
            [cx + c * x - s * y, cy + s * x + c * y]
        })
        .collect();
    PointCloud { points, labels: cloud.labels.clone() }
}

/// Outcome of a k-means run.
#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<[f64; 2]>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITERATIONS: usize = 300;

fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, &c) in centroids.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans(cloud: &PointCloud, k: usize, seed: u64) -> Result<KMeans> {
    let pts = &cloud.points;
    let n = pts.len();
    if k == 0 || k > n {
        return Err(PotError::Parameter(format!("k = {k} must lie in 1..={n}")));
    }
    let mut rng = seeded_rng(seed);

    let mut centroids = Vec::with_capacity(k);
    centroids.push(pts[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = pts.iter().map(|&p| squared_distance(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // Round-off can leave `pick` on a zero-weight point; move to the last positive one.
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = pts[idx];
        centroids.push(c);
        for (d, &p) in d2.iter_mut().zip(pts) {
            *d = d.min(squared_distance(p, c));
        }
    }

    let mut assignments = vec![usize::MAX; n];
    let mut wcss_history = Vec::new();
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        let mut wcss = 0.0;
        for (a, &p) in assignments.iter_mut().zip(pts) {
            let (best, d) = nearest(p, &centroids);
            wcss += d;
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        wcss_history.push(wcss);
        if !changed {
            break;
        }
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignments.iter().zip(pts) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed at the point farthest from its nearest centroid.
                let mut far = (0, -1.0);
                for (i, &p) in pts.iter().enumerate() {
                    let d = nearest(p, &centroids).1;
                    if d > far.1 {
                        far = (i, d);
                    }
                }
                centroids[c] = pts[far.0];
            }
        }
    }
    Ok(KMeans { centroids, assignments, wcss_history, iterations })
}

/// Replaces a cloud by its `k` k-means centroids (unlabeled).
pub fn kmeans_reduce(cloud: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    let km = kmeans(cloud, k, seed)?;
    PointCloud::new(km.centroids, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moons_have_balanced_classes() {
        let m = make_moons(300, 0.1, 1).unwrap();
        let labels = m.labels.unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 150);
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 150);
        assert_eq!(make_moons(400, 0.1, 1).unwrap().len(), 400);
    }

    #[test]
    fn noise_free_moons_lie_on_arcs() {
        let m = make_moons(4, 0.0, 0).unwrap();
        let labels = m.labels.as_ref().unwrap();
        for (p, &l) in m.points.iter().zip(labels) {
            let r = if l == 0 {
                (p[0] * p[0] + p[1] * p[1]).sqrt()
            } else {
                ((1.0 - p[0]).powi(2) + (0.5 - p[1]).powi(2)).sqrt()
            };
            assert!((r - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rotations_compose_to_identity() {
        let m = make_moons(50, 0.1, 3).unwrap();
        assert_eq!(rotate_cloud(&m, 0.0).points, m.points);
        let full = rotate_cloud(&m, 360.0);
        let back = rotate_cloud(&rotate_cloud(&m, 50.0), -50.0);
        for ((a, b), c) in m.points.iter().zip(&full.points).zip(&back.points) {
            assert!(squared_distance(*a, *b).sqrt() < 1e-12);
            assert!(squared_distance(*a, *c).sqrt() < 1e-12);
        }
    }

    #[test]
    fn rotation_is_an_isometry() {
        let m = make_moons(40, 0.1, 5).unwrap();
        let r = rotate_cloud(&m, 50.0);
        for i in 0..40 {
            for j in 0..40 {
                let a = squared_distance(m.points[i], m.points[j]).sqrt();
                let b = squared_distance(r.points[i], r.points[j]).sqrt();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kmeans_edge_cases() {
        let m = make_moons(30, 0.1, 2).unwrap();
        let all = kmeans_reduce(&m, 30, 9).unwrap();
        let mut a = all.points.clone();
        let mut b = m.points.clone();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
        let one = kmeans_reduce(&m, 1, 9).unwrap();
        let c = m.centroid();
        assert!(squared_distance(one.points[0], c).sqrt() < 1e-12);
    }

    #[test]
    fn wcss_is_nonincreasing() {
        let m = make_moons(400, 0.1, 4).unwrap();
        let km = kmeans(&m, 300, 4).unwrap();
        assert_eq!(km.centroids.len(), 300);
        for w in km.wcss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", w);
        }
    }
}
