//! Sweep configuration: per-experiment defaults, key=value files and overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use potkit_core::apps::CostKind;
use potkit_core::data::Distribution;
use potkit_core::{Regularizer, SolverConfig, SPARSITY_THRESHOLD};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    ToyPairs,
    ToyMass,
    ToyEps,
    ImageHist,
    ColorTransfer,
    DomainAdaptation,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::ToyPairs,
        Experiment::ToyMass,
        Experiment::ToyEps,
        Experiment::ImageHist,
        Experiment::ColorTransfer,
        Experiment::DomainAdaptation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ToyPairs => "toy-pairs",
            Experiment::ToyMass => "toy-mass",
            Experiment::ToyEps => "toy-eps",
            Experiment::ImageHist => "image-hist",
            Experiment::ColorTransfer => "color-transfer",
            Experiment::DomainAdaptation => "domain-adaptation",
        }
    }

    pub fn is_toy(self) -> bool {
        matches!(self, Experiment::ToyPairs | Experiment::ToyMass | Experiment::ToyEps)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Qpot,
    Epot,
    Both,
}

impl MethodChoice {
    /// Quadratic first, so rows of a grid point come out in a fixed order.
    pub fn regularizers(self) -> &'static [Regularizer] {
        match self {
            MethodChoice::Qpot => &[Regularizer::Quadratic],
            MethodChoice::Epot => &[Regularizer::Entropic],
            MethodChoice::Both => &[Regularizer::Quadratic, Regularizer::Entropic],
        }
    }
}

impl FromStr for MethodChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpot" => Ok(MethodChoice::Qpot),
            "epot" => Ok(MethodChoice::Epot),
            "both" => Ok(MethodChoice::Both),
            _ => Err(CliError::Config(format!("unknown method {s:?}; expected qpot, epot or both"))),
        }
    }
}

pub fn method_name(r: Regularizer) -> &'static str {
    match r {
        Regularizer::Quadratic => "qpot",
        Regularizer::Entropic => "epot",
    }
}

/// Regularization levels of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsilonGrid {
    /// `10^start, 10^(start+step), …` up to and including `10^stop`.
    Exponents { start: f64, stop: f64, step: f64 },
    /// Explicit values.
    Values(Vec<f64>),
}

/// Rounds grid exponents so that accumulated steps print cleanly.
pub fn round_exponent(x: f64) -> f64 {
    let r = (x * 1e10).round() / 1e10;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl EpsilonGrid {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EpsilonGrid::Exponents { start, stop, step } => {
                if ![start, stop, step].iter().all(|x| x.is_finite()) {
                    return Err(CliError::Config("epsilon exponents must be finite".into()));
                }
                if start != stop && (step == 0.0 || (stop - start).signum() != step.signum()) {
                    return Err(CliError::Config(format!(
                        "epsilon step {step} does not lead from {start} to {stop}"
                    )));
                }
                Ok(())
            }
            EpsilonGrid::Values(ref v) => {
                if v.is_empty() || v.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
                    return Err(CliError::Config("epsilon values must be positive and finite".into()));
                }
                Ok(())
            }
        }
    }

    /// `(exponent, epsilon)` pairs in grid order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        match *self {
            EpsilonGrid::Exponents { start, stop, step } => {
                let count = if start == stop { 1 } else { ((stop - start) / step + 1e-9).floor() as usize + 1 };
                (0..count)
                    .map(|k| {
                        let e = round_exponent(start + k as f64 * step);
                        (e, 10f64.powf(e))
                    })
                    .collect()
            }
            EpsilonGrid::Values(ref v) => v.iter().map(|&e| (round_exponent(e.log10()), e)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub lambdas: Vec<f64>,
    pub epsilon_exponents: EpsilonGrid,
    pub method: MethodChoice,
    pub seed: u64,
    pub threshold: f64,
    pub output_dir: PathBuf,
    pub dump_plans: bool,
    pub cost: CostKind,
    /// Source/target pairs of the toy experiments.
    pub pairs: Vec<(Distribution, Distribution)>,
    /// Image inputs; `None` selects the bundled images.
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    /// Histogram bins (toy), grid side (image-hist) or bins per axis (color-transfer).
    pub bins: usize,
    pub samples: usize,
    pub solver: SolverConfig,
    /// Worker count; `None` reads `POTKIT_THREADS`, then uses all cores.
    pub threads: Option<usize>,
    /// Fills the `wall_ms` column. Off by default so that CSV files are reproducible.
    pub timing: bool,
    pub write_files: bool,
}

fn pair(a: &str, b: &str) -> (Distribution, Distribution) {
    (Distribution::from_code(a).expect("known code"), Distribution::from_code(b).expect("known code"))
}

impl SweepConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let exps = |start, stop, step| EpsilonGrid::Exponents { start, stop, step };
        let (lambdas, grid, pairs, bins) = match experiment {
            Experiment::ToyPairs => (
                vec![0.7],
                EpsilonGrid::Values(vec![1e-6]),
                vec![pair("MG", "G"), pair("MG", "Be"), pair("P", "Be"), pair("G", "Bi")],
                100,
            ),
            Experiment::ToyMass => (
                vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99],
                EpsilonGrid::Values(vec![1e-6]),
                vec![pair("Bi", "MG")],
                100,
            ),
            Experiment::ToyEps => (vec![0.7, 0.99], exps(-0.5, -6.0, -0.5), vec![pair("P", "Be")], 100),
            Experiment::ImageHist => (vec![0.7], EpsilonGrid::Values(vec![2e-7]), Vec::new(), 10),
            Experiment::ColorTransfer => (vec![0.7], exps(-0.2, -6.0, -0.2), Vec::new(), 32),
            Experiment::DomainAdaptation => (vec![0.7], exps(-0.3, -15.0, -1.05), Vec::new(), 0),
        };
        Self {
            experiment,
            lambdas,
            epsilon_exponents: grid,
            method: MethodChoice::Both,
            seed: 0,
            threshold: SPARSITY_THRESHOLD,
            output_dir: PathBuf::from("."),
            dump_plans: false,
            cost: CostKind::SqEuclidean,
            pairs,
            source: None,
            target: None,
            bins,
            samples: 100_000,
            solver: SolverConfig::default(),
            threads: None,
            timing: false,
            write_files: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(CliError::Config("at least one lambda is required".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(CliError::Config(format!("lambda {l} outside [0, 1]")));
        }
        self.epsilon_exponents.validate()?;
        if !(self.threshold > 0.0) {
            return Err(CliError::Config("threshold must be positive".into()));
        }
        if self.experiment.is_toy() && self.pairs.is_empty() {
            return Err(CliError::Config("toy experiments need at least one pair".into()));
        }
        if self.experiment != Experiment::DomainAdaptation && self.bins == 0 {
            return Err(CliError::Config("bins must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        self.solver.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// Applies one `key=value` setting. Keys match the long flag names;
    /// `_` and `-` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let bad = |what: &str| CliError::Config(format!("invalid {what} {value:?}"));
        match key.as_str() {
            "experiment" => {}
            "lambdas" => self.lambdas = parse_list(value).map_err(|_| bad("lambda list"))?,
            "eps-start" | "eps-stop" | "eps-step" => {
                let x: f64 = value.parse().map_err(|_| bad(&key))?;
                let (mut start, mut stop, mut step) = match self.epsilon_exponents {
                    EpsilonGrid::Exponents { start, stop, step } => (start, stop, step),
                    EpsilonGrid::Values(_) => (-0.5, -6.0, -0.5),
                };
                match key.as_str() {
                    "eps-start" => start = x,
                    "eps-stop" => stop = x,
                    _ => step = x,
                }
                self.epsilon_exponents = EpsilonGrid::Exponents { start, stop, step };
            }
            "eps" => self.epsilon_exponents = EpsilonGrid::Values(parse_list(value).map_err(|_| bad("epsilon list"))?),
            "method" => self.method = value.parse()?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "threshold" => self.threshold = value.parse().map_err(|_| bad("threshold"))?,
            "out" => self.output_dir = PathBuf::from(value),
            "dump-plans" => self.dump_plans = parse_bool(value).ok_or_else(|| bad("boolean"))?,
            "timing" => self.timing = parse_bool(value).ok_or_else(|| bad("boolean"))?,
            "cost" => self.cost = value.parse().map_err(|e: potkit_core::PotError| CliError::Config(e.to_string()))?,
            "pair" => {
                self.pairs = value
                    .split(',')
                    .map(|p| parse_pair(p.trim()))
                    .collect::<Result<_>>()?;
            }
            "source" => self.source = Some(PathBuf::from(value)),
            "target" => self.target = Some(PathBuf::from(value)),
            "bins" => self.bins = value.parse().map_err(|_| bad("bin count"))?,
            "samples" => self.samples = value.parse().map_err(|_| bad("sample count"))?,
            "max-iter" => self.solver.max_iterations = value.parse().map_err(|_| bad("iteration count"))?,
            "tol" => self.solver.kkt_tolerance = value.parse().map_err(|_| bad("tolerance"))?,
            "threads" => self.threads = Some(value.parse().map_err(|_| bad("thread count"))?),
            _ => return Err(CliError::Config(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Applies every setting of a key=value file. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_config_text(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }
}

/// Splits a key=value file into pairs, in file order.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',').map(|x| x.trim().parse()).collect()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Parses `MG-G` style pair codes.
pub fn parse_pair(s: &str) -> Result<(Distribution, Distribution)> {
    let (a, b) = s
        .split_once(['-', ':'])
        .ok_or_else(|| CliError::Config(format!("pair {s:?} should look like MG-G")))?;
    let look = |c: &str| Distribution::from_code(c).ok_or_else(|| CliError::Config(format!("unknown distribution code {c:?}")));
    Ok((look(a)?, look(b)?))
}
