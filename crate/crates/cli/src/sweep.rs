//! Sweep execution: builds the problems of an experiment, solves every grid
//! point on a worker pool and writes the artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use potkit_core::apps::{color_transfer_with, domain_adaptation_experiment, AdaptationConfig};
use potkit_core::data::{
    decode_netpbm, image_to_histogram, read_netpbm, sample_histogram_pair, write_ppm, Distribution, GrayImage, Image,
    RgbImage,
};
use potkit_core::{
    check_feasibility, cost_matrix_from_positions, objective, solve, sparsity, CostMatrix, DualCertificate, MassVector,
    PotProblem, Regularizer, TransportPlan,
};

use crate::config::{method_name, Experiment, SweepConfig};
use crate::error::{CliError, Result};
use crate::output::{emit_heatmap, write_plan_dump, write_table, SweepRow};

const BUNDLED_GRAY: [&[u8]; 2] = [include_bytes!("../assets/blob.pgm"), include_bytes!("../assets/bar.pgm")];
const BUNDLED_RGB: [&[u8]; 2] = [include_bytes!("../assets/sunset.ppm"), include_bytes!("../assets/seaside.ppm")];

/// A fixed pair of histograms with their ground cost.
#[derive(Debug, Clone)]
pub struct HistogramInstance {
    pub label: String,
    pub r: MassVector,
    pub c: MassVector,
    pub cost: CostMatrix,
}

impl HistogramInstance {
    pub fn problem(&self, lambda: f64, epsilon: f64, method: Regularizer) -> Result<PotProblem> {
        Ok(PotProblem::with_lambda(self.r.clone(), self.c.clone(), self.cost.clone(), lambda, epsilon, method)?)
    }
}

/// Sampled toy histograms on a shared grid with max-normalized squared distance cost.
pub fn toy_instance(
    experiment: Experiment,
    source: Distribution,
    target: Distribution,
    samples: usize,
    bins: usize,
    seed: u64,
) -> Result<HistogramInstance> {
    let pair = sample_histogram_pair(source, target, samples, bins, seed)?;
    let pos: Vec<[f64; 1]> = pair.centers.iter().map(|&x| [x]).collect();
    let cost = cost_matrix_from_positions(&pos, &pos, true)?;
    Ok(HistogramInstance {
        label: format!("{}-{}-{}", experiment.name(), source.code(), target.code()),
        r: pair.source,
        c: pair.target,
        cost,
    })
}

/// Downscaled image histograms on a `side x side` grid with max-normalized
/// squared pixel distance cost.
pub fn image_instance(source: &GrayImage, target: &GrayImage, side: usize) -> Result<HistogramInstance> {
    let (r, pos) = image_to_histogram(source, side)?;
    let (c, _) = image_to_histogram(target, side)?;
    let cost = cost_matrix_from_positions(&pos, &pos, true)?;
    Ok(HistogramInstance { label: Experiment::ImageHist.name().into(), r, c, cost })
}

fn load_image(path: Option<&Path>, bundled: &[u8]) -> Result<Image> {
    Ok(match path {
        Some(p) => read_netpbm(p)?,
        None => decode_netpbm(bundled)?,
    })
}

pub fn bundled_gray_pair() -> (GrayImage, GrayImage) {
    let load = |b| decode_netpbm(b).expect("bundled image").to_gray();
    (load(BUNDLED_GRAY[0]), load(BUNDLED_GRAY[1]))
}

pub fn bundled_rgb_pair() -> (RgbImage, RgbImage) {
    let load = |b| decode_netpbm(b).expect("bundled image").to_rgb();
    (load(BUNDLED_RGB[0]), load(BUNDLED_RGB[1]))
}

enum Inputs {
    Histograms(Vec<HistogramInstance>),
    Color(RgbImage, RgbImage),
    Adaptation,
}

fn prepare(config: &SweepConfig) -> Result<Inputs> {
    Ok(match config.experiment {
        e if e.is_toy() => Inputs::Histograms(
            config
                .pairs
                .iter()
                .map(|&(s, t)| toy_instance(e, s, t, config.samples, config.bins, config.seed))
                .collect::<Result<_>>()?,
        ),
        Experiment::ImageHist => {
            let s = load_image(config.source.as_deref(), BUNDLED_GRAY[0])?.to_gray();
            let t = load_image(config.target.as_deref(), BUNDLED_GRAY[1])?.to_gray();
            Inputs::Histograms(vec![image_instance(&s, &t, config.bins)?])
        }
        Experiment::ColorTransfer => Inputs::Color(
            load_image(config.source.as_deref(), BUNDLED_RGB[0])?.to_rgb(),
            load_image(config.target.as_deref(), BUNDLED_RGB[1])?.to_rgb(),
        ),
        _ => Inputs::Adaptation,
    })
}

/// One solved grid point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub row: SweepRow,
    pub problem: Option<PotProblem>,
    pub plan: Option<TransportPlan>,
    pub certificate: Option<DualCertificate>,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    instance: usize,
    lambda: f64,
    exponent: f64,
    epsilon: f64,
    method: Regularizer,
}

fn jobs(config: &SweepConfig, instances: usize) -> Vec<Job> {
    let grid = config.epsilon_exponents.points();
    let mut out = Vec::new();
    for instance in 0..instances {
        for &lambda in &config.lambdas {
            for &(exponent, epsilon) in &grid {
                for &method in config.method.regularizers() {
                    out.push(Job { instance, lambda, exponent, epsilon, method });
                }
            }
        }
    }
    out
}

struct Solved {
    problem: PotProblem,
    plan: TransportPlan,
    certificate: Option<DualCertificate>,
    accuracy: Option<f64>,
    image: Option<RgbImage>,
}

fn solve_job(inputs: &Inputs, config: &SweepConfig, job: &Job) -> potkit_core::Result<Solved> {
    match inputs {
        Inputs::Histograms(list) => {
            let h = &list[job.instance];
            let problem = PotProblem::with_lambda(h.r.clone(), h.c.clone(), h.cost.clone(), job.lambda, job.epsilon, job.method)?;
            let sol = solve(&problem, &config.solver)?;
            Ok(Solved { problem, plan: sol.plan, certificate: sol.certificate, accuracy: None, image: None })
        }
        Inputs::Color(source, target) => {
            let res = color_transfer_with(source, target, job.lambda, job.epsilon, job.method, config.bins, &config.solver)?;
            Ok(Solved {
                problem: res.problem,
                plan: res.plan,
                certificate: res.certificate,
                accuracy: None,
                image: Some(res.output_image),
            })
        }
        Inputs::Adaptation => {
            let cfg = AdaptationConfig {
                lambda: job.lambda,
                epsilon: job.epsilon,
                method: job.method,
                seed: config.seed,
                cost: config.cost,
                solver: config.solver.clone(),
                ..AdaptationConfig::default()
            };
            let res = domain_adaptation_experiment(&cfg)?;
            Ok(Solved {
                problem: res.problem,
                plan: res.plan,
                certificate: res.certificate,
                accuracy: Some(res.accuracy),
                image: None,
            })
        }
    }
}

fn label(inputs: &Inputs, config: &SweepConfig, job: &Job) -> String {
    match inputs {
        Inputs::Histograms(list) => list[job.instance].label.clone(),
        _ => config.experiment.name().to_string(),
    }
}

fn run_job(inputs: &Inputs, config: &SweepConfig, job: &Job, retain: bool) -> Result<PointResult> {
    let start = Instant::now();
    let outcome = solve_job(inputs, config, job);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = SweepRow {
        experiment: label(inputs, config, job),
        lambda: job.lambda,
        epsilon: job.epsilon,
        exponent: job.exponent,
        method: method_name(job.method),
        sparsity: None,
        objective: None,
        feasibility_max_violation: None,
        duality_gap: None,
        iterations: None,
        converged: false,
        wall_ms: config.timing.then_some(wall_ms),
        seed: config.seed,
        accuracy: None,
        error: None,
    };
    let solved = match outcome {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            if config.write_files {
                write_table(&config.output_dir.join(format!("{}.csv", row.file_stem())), [&row])?;
            }
            return Ok(PointResult { row, problem: None, plan: None, certificate: None });
        }
    };
    row.sparsity = Some(sparsity(&solved.plan, config.threshold));
    row.objective = objective(&solved.problem, &solved.plan).ok();
    row.feasibility_max_violation = Some(check_feasibility(&solved.problem, &solved.plan, 0.0).max_violation());
    row.duality_gap = solved.certificate.as_ref().map(DualCertificate::duality_gap);
    row.iterations = Some(solved.plan.iterations);
    row.converged = solved.plan.converged;
    row.accuracy = solved.accuracy;

    if config.write_files {
        let stem = config.output_dir.join(row.file_stem());
        let with_ext = |ext: &str| PathBuf::from(format!("{}.{ext}", stem.display()));
        write_table(&with_ext("csv"), [&row])?;
        emit_heatmap(&solved.plan, config.threshold, &with_ext("pgm"))?;
        if config.dump_plans {
            write_plan_dump(&solved.plan, &with_ext("bin"))?;
        }
        if let Some(img) = &solved.image {
            write_ppm(img, with_ext("ppm"))?;
        }
    }
    Ok(if retain {
        PointResult { row, problem: Some(solved.problem), plan: Some(solved.plan), certificate: solved.certificate }
    } else {
        PointResult { row, problem: None, plan: None, certificate: None }
    })
}

fn worker_count(config: &SweepConfig) -> usize {
    config
        .threads
        .or_else(|| std::env::var("POTKIT_THREADS").ok()?.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0)
}

/// Solves every grid point, in parallel, and returns results in grid order
/// (pair, λ, ε, method). With `retain` the plans are kept in memory.
pub fn run_points(config: &SweepConfig, retain: bool) -> Result<Vec<PointResult>> {
    config.validate()?;
    if config.write_files {
        std::fs::create_dir_all(&config.output_dir)?;
    }
    let inputs = prepare(config)?;
    let count = match &inputs {
        Inputs::Histograms(list) => list.len(),
        _ => 1,
    };
    let jobs = jobs(config, count);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(config))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|job| run_job(&inputs, config, job, retain)).collect())
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// The combined `<experiment>.csv`, when files are written.
    pub table: Option<PathBuf>,
}

/// Runs the sweep and writes `<experiment>.csv` with one row per grid point.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    let rows: Vec<SweepRow> = run_points(config, false)?.into_iter().map(|p| p.row).collect();
    let table = if config.write_files {
        let path = config.output_dir.join(format!("{}.csv", config.experiment.name()));
        write_table(&path, &rows)?;
        Some(path)
    } else {
        None
    };
    Ok(SweepReport { rows, table })
}
