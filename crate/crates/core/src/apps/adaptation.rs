//! Domain adaptation on the two-moons problem: transport labels from a source
//! cloud to a rotated target cloud, then check them with a kernel classifier.

use nalgebra::{DMatrix, DVector};

use crate::data::points::{kmeans_reduce, make_moons, rotate_cloud, squared_distance, PointCloud};
use crate::error::{PotError, Result};
use crate::problem::{sparsity, CostMatrix, MassVector, PotProblem, Regularizer, TransportPlan, SPARSITY_THRESHOLD};
use crate::qpot::{DualCertificate, SolverConfig};
use crate::solve::solve;

/// Columns receiving less than this fraction of the plan's mass count as
/// unreached by the transport.
pub const ZERO_MASS_FRACTION: f64 = 1e-10;

/// Labels each target column by the class sending it the most mass (ties go
/// to the lower class id). Columns the plan does not reach take the label of
/// the nearest reached target point.
pub fn propagate_labels(plan: &TransportPlan, source_labels: &[usize], target_points: &[[f64; 2]]) -> Result<Vec<usize>> {
    let n = plan.n();
    if source_labels.len() != n || target_points.len() != n {
        return Err(PotError::Shape(format!(
            "plan is {n}x{n} but got {} source labels and {} target points",
            source_labels.len(),
            target_points.len()
        )));
    }
    let total = plan.total();
    if !(total > 0.0) {
        return Err(PotError::Propagation("plan carries no mass".into()));
    }
    let classes = source_labels.iter().copied().max().unwrap_or(0) + 1;
    let cols = plan.col_sums();
    let cutoff = ZERO_MASS_FRACTION * total;
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for j in 0..n {
        if cols[j] <= cutoff {
            continue;
        }
        let mut score = vec![0.0; classes];
        for i in 0..n {
            score[source_labels[i]] += plan.get(i, j);
        }
        let mut best = 0;
        for k in 1..classes {
            if score[k] > score[best] {
                best = k;
            }
        }
        labels[j] = Some(best);
    }
    let reached: Vec<usize> = (0..n).filter(|&j| labels[j].is_some()).collect();
    if reached.is_empty() {
        return Err(PotError::Propagation("no target column receives mass".into()));
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        out.push(match labels[j] {
            Some(l) => l,
            None => {
                let mut best = (reached[0], f64::INFINITY);
                for &k in &reached {
                    let d = squared_distance(target_points[j], target_points[k]);
                    if d < best.1 {
                        best = (k, d);
                    }
                }
                labels[best.0].expect("reached column is labeled")
            }
        });
    }
    Ok(out)
}

/// Binary kernel ridge classifier with a Gaussian kernel
/// `k(x, y) = exp(-|x - y|^2 / (2 w^2))`; class 1 is the positive side.
#[derive(Debug, Clone)]
pub struct KernelRidgeClassifier {
    points: Vec<[f64; 2]>,
    alpha: Vec<f64>,
    width: f64,
}

fn rbf(a: [f64; 2], b: [f64; 2], width: f64) -> f64 {
    (-squared_distance(a, b) / (2.0 * width * width)).exp()
}

/// Median of all pairwise distances.
pub fn median_pairwise_distance(points: &[[f64; 2]]) -> f64 {
    let mut d = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(squared_distance(points[i], points[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        0.5 * (d[m - 1] + d[m])
    }
}

/// Fits `(K + ridge I) alpha = y` with `y = -1` for class 0 and `+1` for class 1.
pub fn train_classifier(cloud: &PointCloud, rbf_width: f64, ridge: f64) -> Result<KernelRidgeClassifier> {
    let labels = cloud
        .labels
        .as_ref()
        .ok_or_else(|| PotError::Parameter("training cloud has no labels".into()))?;
    if labels.iter().any(|&l| l > 1) {
        return Err(PotError::Parameter("only classes 0 and 1 are supported".into()));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(PotError::Parameter("training set needs points of both classes".into()));
    }
    if !(ridge > 0.0) || !(rbf_width > 0.0) {
        return Err(PotError::Parameter("ridge and rbf_width must be positive".into()));
    }
    let pts = &cloud.points;
    let n = pts.len();
    let gram = DMatrix::from_fn(n, n, |i, j| rbf(pts[i], pts[j], rbf_width) + if i == j { ridge } else { 0.0 });
    let y = DVector::from_iterator(n, labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }));
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| PotError::Numerical("regularized Gram matrix is not positive definite".into()))?;
    let mut alpha = chol.solve(&y);
    // One step of iterative refinement keeps the residual at round-off level.
    let resid = &y - &gram * &alpha;
    alpha += chol.solve(&resid);
    let resid = (&y - &gram * &alpha).amax();
    if resid > 1e-8 {
        return Err(PotError::Numerical(format!("training solve residual {resid:e} exceeds 1e-8")));
    }
    Ok(KernelRidgeClassifier { points: pts.clone(), alpha: alpha.iter().copied().collect(), width: rbf_width })
}

impl KernelRidgeClassifier {
    pub fn decision_function(&self, x: [f64; 2]) -> f64 {
        self.points.iter().zip(&self.alpha).map(|(&p, a)| a * rbf(p, x, self.width)).sum()
    }

    pub fn predict(&self, x: [f64; 2]) -> usize {
        usize::from(self.decision_function(x) > 0.0)
    }

    pub fn accuracy(&self, cloud: &PointCloud) -> Result<f64> {
        let labels = cloud.labels.as_ref().ok_or_else(|| PotError::Parameter("test cloud has no labels".into()))?;
        let hits = cloud.points.iter().zip(labels).filter(|(&p, &l)| self.predict(p) == l).count();
        Ok(hits as f64 / cloud.len().max(1) as f64)
    }

    pub fn width(&self) -> f64 {
        self.width
    }
}

/// Ground cost between point clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    SqEuclidean,
    Euclidean,
}

impl std::str::FromStr for CostKind {
    type Err = PotError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sqeuclidean" => Ok(CostKind::SqEuclidean),
            "euclidean" => Ok(CostKind::Euclidean),
            other => Err(PotError::Parameter(format!("unknown cost {other:?}; expected euclidean or sqeuclidean"))),
        }
    }
}

impl std::fmt::Display for CostKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CostKind::SqEuclidean => "sqeuclidean",
            CostKind::Euclidean => "euclidean",
        })
    }
}

/// Max-normalized pairwise cost between two clouds of equal size.
pub fn cloud_cost(a: &[[f64; 2]], b: &[[f64; 2]], kind: CostKind) -> Result<CostMatrix> {
    if a.len() != b.len() || a.is_empty() {
        return Err(PotError::Shape(format!("clouds have {} and {} points", a.len(), b.len())));
    }
    let cost = CostMatrix::from_fn(a.len(), |i, j| {
        let d = squared_distance(a[i], b[j]);
        match kind {
            CostKind::SqEuclidean => d,
            CostKind::Euclidean => d.sqrt(),
        }
    })?;
    Ok(cost.normalized())
}

#[derive(Debug, Clone)]
pub struct AdaptationConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub method: Regularizer,
    /// Source moons use `seed`, target moons `seed + 1`, k-means `seed + 2`.
    pub seed: u64,
    pub n_source: usize,
    pub n_target: usize,
    pub n_clusters: usize,
    pub noise: f64,
    pub rotation_degrees: f64,
    pub cost: CostKind,
    /// `None` selects the median pairwise distance of the training points.
    pub rbf_width: Option<f64>,
    pub ridge: f64,
    pub solver: SolverConfig,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            lambda: 0.7,
            epsilon: 1e-4,
            method: Regularizer::Quadratic,
            seed: 0,
            n_source: 300,
            n_target: 400,
            n_clusters: 300,
            noise: 0.1,
            rotation_degrees: 50.0,
            cost: CostKind::SqEuclidean,
            rbf_width: None,
            ridge: 1e-3,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptationResult {
    pub propagated_labels: Vec<usize>,
    pub accuracy: f64,
    pub plan: TransportPlan,
    pub certificate: Option<DualCertificate>,
    pub sparsity: f64,
    pub problem: PotProblem,
    pub rbf_width: f64,
    /// Set when every target point received the same label.
    pub warning: Option<String>,
}

/// The source and reduced target clouds used by the experiment.
pub fn adaptation_clouds(config: &AdaptationConfig) -> Result<(PointCloud, PointCloud)> {
    let source = make_moons(config.n_source, config.noise, config.seed)?;
    let target = rotate_cloud(&make_moons(config.n_target, config.noise, config.seed.wrapping_add(1))?, config.rotation_degrees);
    let reduced = kmeans_reduce(&target, config.n_clusters, config.seed.wrapping_add(2))?;
    Ok((source, reduced))
}

pub fn domain_adaptation_experiment(config: &AdaptationConfig) -> Result<AdaptationResult> {
    let (source, target) = adaptation_clouds(config)?;
    if source.len() != target.len() {
        return Err(PotError::Parameter(format!(
            "source has {} points but the target is reduced to {}",
            source.len(),
            target.len()
        )));
    }
    let n = source.len();
    let cost = cloud_cost(&source.points, &target.points, config.cost)?;
    let mass = MassVector::uniform(n, 1.0)?;
    let problem = PotProblem::with_lambda(mass.clone(), mass, cost, config.lambda, config.epsilon, config.method)?;
    let solution = solve(&problem, &config.solver)?;
    let source_labels = source.labels.clone().expect("moons are labeled");
    let propagated = propagate_labels(&solution.plan, &source_labels, &target.points)?;

    let degenerate = propagated.iter().all(|&l| l == propagated[0]);
    let width = config.rbf_width.unwrap_or_else(|| median_pairwise_distance(&target.points));
    let (accuracy, warning) = if degenerate {
        let only = propagated[0];
        let hits = source_labels.iter().filter(|&&l| l == only).count();
        (hits as f64 / n as f64, Some(format!("all target points received label {only}")))
    } else {
        let train = PointCloud::new(target.points.clone(), Some(propagated.clone()))?;
        let clf = train_classifier(&train, width, config.ridge)?;
        (clf.accuracy(&source)?, None)
    };
    Ok(AdaptationResult {
        propagated_labels: propagated,
        accuracy,
        sparsity: sparsity(&solution.plan, SPARSITY_THRESHOLD),
        plan: solution.plan,
        certificate: solution.certificate,
        problem,
        rbf_width: width,
        warning,
    })
}
