use std::path::Path;
use std::process::Command;

use potkit_cli::output::CSV_HEADER;
use potkit_cli::{read_plan_dump, run_sweep, EpsilonGrid, Experiment, MethodChoice, SweepConfig};
use potkit_core::sparsity;

fn small(out: &Path) -> SweepConfig {
    let mut cfg = SweepConfig::defaults(Experiment::ToyEps);
    cfg.lambdas = vec![0.0, 0.7];
    cfg.epsilon_exponents = EpsilonGrid::Exponents { start: -0.5, stop: -2.0, step: -0.5 };
    cfg.samples = 5_000;
    cfg.bins = 20;
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    rdr.records().map(|r| r.unwrap()).collect()
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_sweep(&small(dir.path())).unwrap();
    let table = report.table.unwrap();
    assert_eq!(table, dir.path().join("toy-eps.csv"));
    let rows = read_rows(&table);
    // 2 lambdas x 4 epsilons x 2 methods, in grid order.
    assert_eq!(rows.len(), 16);
    assert_eq!(&rows[0][3], "qpot");
    assert_eq!(&rows[1][3], "epot");
    assert_eq!(&rows[1][7], "", "entropic rows carry no duality gap");
    for (row, rep) in rows.iter().zip(&report.rows) {
        let stem = rep.file_stem();
        let single = read_rows(&dir.path().join(format!("{stem}.csv")));
        assert_eq!(single, vec![row.clone()]);
        assert!(dir.path().join(format!("{stem}.pgm")).exists());
        assert_eq!(&row[10], "", "wall time is only recorded on request");
    }
    assert!(dir.path().join("toy-eps-P-Be_qpot_l0.7_e-1.5.pgm").exists());
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg_b = small(b.path());
    cfg_b.threads = Some(2);
    run_sweep(&small(a.path())).unwrap();
    run_sweep(&cfg_b).unwrap();
    let read = |d: &Path| std::fs::read(d.join("toy-eps.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn zero_lambda_rows_are_empty_plans() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_sweep(&small(dir.path())).unwrap();
    let zero: Vec<_> = report.rows.iter().filter(|r| r.lambda == 0.0).collect();
    assert_eq!(zero.len(), 8);
    for row in zero {
        assert_eq!(row.sparsity, Some(1.0));
        assert_eq!(row.objective, Some(0.0));
        assert!(row.converged);
    }
}

#[test]
fn heatmaps_match_plan_size_and_dumps_match_sparsity() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.dump_plans = true;
    cfg.method = MethodChoice::Both;
    let report = run_sweep(&cfg).unwrap();
    for row in &report.rows {
        let file = |ext: &str| dir.path().join(format!("{}.{ext}", row.file_stem()));
        let pgm = std::fs::read(file("pgm")).unwrap();
        assert!(pgm.starts_with(b"P5\n20 20\n255\n"));
        assert_eq!(pgm.len(), b"P5\n20 20\n255\n".len() + 400);
        let plan = read_plan_dump(&file("bin")).unwrap();
        assert_eq!(plan.n(), 20);
        assert_eq!(row.sparsity, Some(sparsity(&plan, cfg.threshold)));
        let white = pgm.iter().rev().take(400).filter(|&&b| b == 255).count();
        assert_eq!(white as f64 / 400.0, sparsity(&plan, cfg.threshold));
    }
}

#[test]
fn binary_runs_a_sweep_from_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# small toy run\nexperiment = toy-pairs\npair = MG-G\nsamples = 2000\nbins = 15\nlambdas = 0.5\n").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_potkit"))
        .args(["--config", conf.to_str().unwrap(), "--lambdas", "0.6", "--method", "qpot", "--timing"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let rows = read_rows(&dir.path().join("toy-pairs.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "toy-pairs-MG-G");
    assert_eq!(&rows[0][1], "0.6");
    assert_eq!(&rows[0][3], "qpot");
    assert!(rows[0][10].parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn binary_rejects_bad_configuration() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["no-such-experiment"],
        vec!["toy-eps", "--lambdas", "1.5"],
        vec!["toy-eps", "--eps-start", "-1", "--eps-stop", "-3", "--eps-step", "0.5"],
        vec!["toy-eps", "--method", "sinkhorn"],
    ] {
        let out = Command::new(env!("CARGO_BIN_EXE_potkit")).args(&args).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn binary_reports_unwritable_output() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, b"").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_potkit"))
        .args(["toy-pairs", "--pair", "MG-G", "--samples", "500", "--bins", "5", "--out"])
        .arg(&file)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
