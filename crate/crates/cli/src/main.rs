use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use potkit_cli::config::parse_config_text;
use potkit_cli::{run_sweep, CliError, Experiment, SweepConfig};

/// Runs a regularized partial transport experiment as a parameter sweep.
///
/// Experiments: toy-pairs, toy-mass, toy-eps, image-hist, color-transfer,
/// domain-adaptation.
#[derive(Debug, Parser)]
#[command(name = "potkit", version)]
struct Args {
    /// Experiment to run; may instead be given as `experiment=` in the config file.
    experiment: Option<String>,
    /// Comma-separated mass fractions in [0, 1].
    #[arg(long, allow_hyphen_values = true)]
    lambdas: Option<String>,
    /// First base-10 exponent of the epsilon grid.
    #[arg(long, allow_hyphen_values = true)]
    eps_start: Option<String>,
    /// Last base-10 exponent of the epsilon grid (inclusive).
    #[arg(long, allow_hyphen_values = true)]
    eps_stop: Option<String>,
    /// Exponent increment; its sign must lead from start to stop.
    #[arg(long, allow_hyphen_values = true)]
    eps_step: Option<String>,
    /// Comma-separated explicit epsilon values, replacing the exponent grid.
    #[arg(long)]
    eps: Option<String>,
    /// qpot, epot or both.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Entries below this magnitude count as zero.
    #[arg(long)]
    threshold: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// key=value settings file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write each plan as a binary dump (`.bin`).
    #[arg(long)]
    dump_plans: bool,
    /// Ground cost for domain adaptation: euclidean or sqeuclidean.
    #[arg(long)]
    cost: Option<String>,
    /// Distribution pairs for the toy experiments, e.g. MG-G,P-Be.
    #[arg(long)]
    pair: Option<String>,
    /// Source image (PGM for image-hist, PPM for color-transfer).
    #[arg(long)]
    source: Option<String>,
    /// Target image.
    #[arg(long)]
    target: Option<String>,
    /// Histogram bins, image grid side or color bins per axis.
    #[arg(long)]
    bins: Option<String>,
    /// Samples per toy distribution.
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    /// Solver stopping tolerance.
    #[arg(long)]
    tol: Option<String>,
    /// Worker threads (default: POTKIT_THREADS, then all cores).
    #[arg(long)]
    threads: Option<String>,
    /// Record wall-clock time per point in the wall_ms column.
    #[arg(long)]
    timing: bool,
}

impl Args {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k, v.clone()));
            }
        };
        push("lambdas", &self.lambdas);
        push("eps", &self.eps);
        push("eps-start", &self.eps_start);
        push("eps-stop", &self.eps_stop);
        push("eps-step", &self.eps_step);
        push("method", &self.method);
        push("seed", &self.seed);
        push("threshold", &self.threshold);
        push("out", &self.out);
        push("cost", &self.cost);
        push("pair", &self.pair);
        push("source", &self.source);
        push("target", &self.target);
        push("bins", &self.bins);
        push("samples", &self.samples);
        push("max-iter", &self.max_iter);
        push("tol", &self.tol);
        push("threads", &self.threads);
        if self.dump_plans {
            out.push(("dump-plans", "true".into()));
        }
        if self.timing {
            out.push(("timing", "true".into()));
        }
        out
    }
}

fn build_config(args: &Args) -> Result<SweepConfig, CliError> {
    let file = match &args.config {
        Some(p) => parse_config_text(&std::fs::read_to_string(p)?)?,
        None => Vec::new(),
    };
    let name = args
        .experiment
        .clone()
        .or_else(|| file.iter().rev().find(|(k, _)| k == "experiment").map(|(_, v)| v.clone()))
        .ok_or_else(|| CliError::Config("no experiment given".into()))?;
    let mut cfg = SweepConfig::defaults(name.parse::<Experiment>()?);
    for (k, v) in &file {
        cfg.set(k, v)?;
    }
    for (k, v) in args.overrides() {
        cfg.set(k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match build_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("potkit: {e}");
            return ExitCode::from(2);
        }
    };
    match run_sweep(&cfg) {
        Ok(report) => {
            for row in report.rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("potkit: {} failed: {}", row.file_stem(), row.error.as_deref().unwrap_or_default());
            }
            if let Some(path) = report.table {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("potkit: {e}");
            ExitCode::FAILURE
        }
    }
}
