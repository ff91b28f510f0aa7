//! Seeded sampling of the toy distributions and equal-width histogram binning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution as _, Gamma, Normal, Poisson};

use crate::error::{PotError, Result};
use crate::problem::MassVector;

/// Generator used for every seeded draw in the toolkit.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A one-dimensional sampling distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// Shape `alpha`, rate `beta`.
    Gamma { alpha: f64, beta: f64 },
    Poisson { lambda: f64 },
    Binomial { n: u64, p: f64 },
    Beta { alpha: f64, beta: f64 },
    /// Equal-weight mixture of `N(mu1, sigma1^2)` and `N(mu2, sigma2^2)`.
    MixedGaussian { mu1: f64, sigma1: f64, mu2: f64, sigma2: f64 },
}

impl Distribution {
    pub const GAMMA: Distribution = Distribution::Gamma { alpha: 7.0, beta: 1.0 };
    pub const POISSON: Distribution = Distribution::Poisson { lambda: 5.0 };
    pub const BINOMIAL: Distribution = Distribution::Binomial { n: 10, p: 0.4 };
    pub const BETA: Distribution = Distribution::Beta { alpha: 2.0, beta: 2.0 };
    pub const MIXED_GAUSSIAN: Distribution = Distribution::MixedGaussian { mu1: 1.0, sigma1: 2.0, mu2: 10.0, sigma2: 1.5 };

    /// Looks up the default-parameter distribution by its short code
    /// (`G`, `P`, `Bi`, `Be`, `MG`).
    pub fn from_code(code: &str) -> Option<Distribution> {
        match code.to_ascii_uppercase().as_str() {
            "G" => Some(Self::GAMMA),
            "P" => Some(Self::POISSON),
            "BI" => Some(Self::BINOMIAL),
            "BE" => Some(Self::BETA),
            "MG" => Some(Self::MIXED_GAUSSIAN),
            _ => None,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Distribution::Gamma { .. } => "G",
            Distribution::Poisson { .. } => "P",
            Distribution::Binomial { .. } => "Bi",
            Distribution::Beta { .. } => "Be",
            Distribution::MixedGaussian { .. } => "MG",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Gamma { alpha, beta } => alpha > 0.0 && beta > 0.0,
            Distribution::Poisson { lambda } => lambda > 0.0 && lambda.is_finite(),
            Distribution::Binomial { p, .. } => (0.0..=1.0).contains(&p),
            Distribution::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0,
            Distribution::MixedGaussian { mu1, sigma1, mu2, sigma2 } => {
                mu1.is_finite() && mu2.is_finite() && sigma1 > 0.0 && sigma2 > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(PotError::Parameter(format!("invalid distribution parameters: {self:?}")))
        }
    }
}

/// What to sample and how to bin it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    pub kind: Distribution,
    pub sample_count: usize,
    pub bin_count: usize,
}

impl DistributionSpec {
    /// `10^5` samples in 100 bins.
    pub fn new(kind: Distribution) -> Self {
        Self { kind, sample_count: 100_000, bin_count: 100 }
    }

    fn validate(&self) -> Result<()> {
        if self.sample_count == 0 || self.bin_count == 0 {
            return Err(PotError::Parameter("sample_count and bin_count must be at least 1".into()));
        }
        self.kind.validate()
    }
}

/// Draws `spec.sample_count` values.
pub fn sample_values(spec: &DistributionSpec, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = seeded_rng(seed);
    let n = spec.sample_count;
    let bad = |e: &dyn std::fmt::Display| PotError::Parameter(e.to_string());
    let values = match spec.kind {
        Distribution::Gamma { alpha, beta } => {
            let d = Gamma::new(alpha, 1.0 / beta).map_err(|e| bad(&e))?;
            (0..n).map(|_| d.sample(&mut rng)).collect()
        }
        Distribution::Poisson { lambda } => {
            let d = Poisson::new(lambda).map_err(|e| bad(&e))?;
            (0..n).map(|_| d.sample(&mut rng)).collect()
        }
        Distribution::Binomial { n: trials, p } => {
            let d = Binomial::new(trials, p).map_err(|e| bad(&e))?;
            (0..n).map(|_| d.sample(&mut rng) as f64).collect()
        }
        Distribution::Beta { alpha, beta } => {
            let d = Beta::new(alpha, beta).map_err(|e| bad(&e))?;
            (0..n).map(|_| d.sample(&mut rng)).collect()
        }
        Distribution::MixedGaussian { mu1, sigma1, mu2, sigma2 } => {
            let a = Normal::new(mu1, sigma1).map_err(|e| bad(&e))?;
            let b = Normal::new(mu2, sigma2).map_err(|e| bad(&e))?;
            (0..n)
                .map(|_| if rng.random_bool(0.5) { a.sample(&mut rng) } else { b.sample(&mut rng) })
                .collect()
        }
    };
    Ok(values)
}

/// Equal-width histogram of `values` over `[lo, hi]`, normalized by the number
/// of values. A zero-width range puts everything into the first bin.
pub fn bin_values(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<MassVector> {
    if values.is_empty() || bins == 0 {
        return Err(PotError::Parameter("need at least one value and one bin".into()));
    }
    let mut counts = vec![0usize; bins];
    let width = hi - lo;
    for &x in values {
        let idx = if width > 0.0 {
            (((x - lo) / width * bins as f64).floor().max(0.0) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    let total = values.len() as f64;
    MassVector::new(counts.into_iter().map(|c| c as f64 / total).collect())
}

fn range(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Centers of `bins` equal-width bins over `[lo, hi]`.
pub fn bin_centers(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let w = (hi - lo) / bins as f64;
    (0..bins).map(|k| lo + (k as f64 + 0.5) * w).collect()
}

/// Samples and bins over the sample's own `[min, max]` range.
pub fn sample_histogram(spec: &DistributionSpec, seed: u64) -> Result<MassVector> {
    let values = sample_values(spec, seed)?;
    let (lo, hi) = range(&values);
    bin_values(&values, lo, hi, spec.bin_count)
}

/// A source/target histogram pair binned on a common grid.
#[derive(Debug, Clone)]
pub struct HistogramPair {
    pub source: MassVector,
    pub target: MassVector,
    /// Value at the center of each shared bin.
    pub centers: Vec<f64>,
}

/// Samples both distributions and bins them onto the union of their sample
/// ranges, so bin `i` means the same value on both sides. The target stream
/// uses `seed + 1`.
pub fn sample_histogram_pair(
    source: Distribution,
    target: Distribution,
    sample_count: usize,
    bin_count: usize,
    seed: u64,
) -> Result<HistogramPair> {
    let spec_s = DistributionSpec { kind: source, sample_count, bin_count };
    let spec_t = DistributionSpec { kind: target, sample_count, bin_count };
    let xs = sample_values(&spec_s, seed)?;
    let ys = sample_values(&spec_t, seed.wrapping_add(1))?;
    let (lo_s, hi_s) = range(&xs);
    let (lo_t, hi_t) = range(&ys);
    let (lo, hi) = (lo_s.min(lo_t), hi_s.max(hi_t));
    Ok(HistogramPair {
        source: bin_values(&xs, lo, hi, bin_count)?,
        target: bin_values(&ys, lo, hi, bin_count)?,
        centers: bin_centers(lo, hi, bin_count),
    })
}

/// Adds `floor` to every bin and rescales to unit mass.
pub fn smooth_and_normalize(h: &MassVector, floor: f64) -> Result<MassVector> {
    if !(floor >= 0.0) || !floor.is_finite() {
        return Err(PotError::Parameter(format!("floor must be a finite nonnegative number, got {floor}")));
    }
    let shifted: Vec<f64> = h.values().iter().map(|&x| x + floor).collect();
    let total = crate::numeric::sum_compensated(&shifted);
    if total <= 0.0 {
        return Err(PotError::DegenerateHistogram("histogram has no mass and no smoothing floor".into()));
    }
    MassVector::new(shifted.into_iter().map(|x| x / total).collect())
}
