//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any failure.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use barycenter::Execution;
use barycenter_cli::registry::Registry;
use barycenter_cli::validate::{run_suite, Check};

/// Tolerances and sizes fixed by the acceptance criteria. A registry edit that
/// loosens any of them fails here before a single check runs.
fn pin(reg: &Registry) {
    let b = &reg.batch_recursive;
    assert_eq!((b.instances, b.max_records, b.max_dim), (500, 200, 8));
    assert_eq!((b.nu_range, b.rel_tol), ([0.1, 10.0], 1e-10));
    let m = &reg.merge_algebra;
    assert_eq!((m.splits, m.algebra_tol, m.union_tol), (200, 1e-12, 1e-10));
    let h = &reg.convex_hull;
    assert_eq!((h.batches, h.slack), (1000, 1e-12));
    let e = &reg.expected_step;
    assert_eq!(e.hessian_diag, [4.0, 1.0]);
    assert_eq!((e.nu, e.curiosity_variance, e.simulations), (1.0, 0.01, 20_000));
    assert_eq!((e.se_multiplier, e.momentum_xi), (3.0, 0.5));
    let v = &reg.step_variance;
    assert_eq!(v.hessian_diag, [4.0, 1.0]);
    assert_eq!((v.nu, v.curiosity_variance, v.rel_tol), (1.0, 0.01, 0.25));
    assert_eq!(v.center, [0.0, 0.0]);
    let i = &reg.interference;
    assert_eq!((i.nu, i.phase_multiple), ([1.0, 3.0], 1));
    assert_eq!((i.expected_discount, i.rel_tol, i.closed_form_tol), (0.1, 0.1, 1e-12));
    let n = &reg.noise;
    assert_eq!((n.points, n.nu, n.draws), (20, 1.0, 50_000));
    assert_eq!(n.sigmas, [0.01, 0.02, 0.04, 0.05]);
    assert_eq!((n.bias_sigma, n.se_multiplier), (0.05, 3.0));
    assert_eq!((n.slope, n.slope_tol), (2.0, 0.1));
    let q = &reg.quotient_lemma;
    assert_eq!((q.instances, q.draws), (100, 1_000_000));
    assert_eq!((q.se_multiplier, q.variance_rel_tol, q.identity_tol), (3.0, 0.1, 1e-10));
    let t = &reg.end_to_end;
    assert_eq!((t.seeds, t.required, t.radius), (50, 45, 0.15));
    assert_eq!((t.nu, t.curiosity_variance, t.budget), (2.0, 0.25, 400));
    let a = &reg.asymmetry;
    assert_eq!((a.cubic, a.nus.as_slice()), (0.3, [1.0, 2.0, 4.0, 8.0].as_slice()));
}

const CRITERIA: [(&str, &str); 10] = [
    ("batch-recursive", "batch/recursive equivalence"),
    ("merge-algebra", "merge algebra"),
    ("convex-hull", "convex hull"),
    ("expected-step", "expected step"),
    ("step-variance", "step variance"),
    ("interference", "complex interference"),
    ("noise", "noise bias and variance"),
    ("quotient-lemma", "quotient moments"),
    ("end-to-end", "end-to-end sphere"),
    ("asymmetry", "asymmetry bias trend"),
];

const DETERMINISM_CONFIG: &str = r#"{
    "oracle": {"name": "rosenbrock"},
    "nu": {"re": 1.5},
    "curiosity": {"mean": [0.0, 0.0], "covariance": [[0.05, 0.01], [0.01, 0.05]]},
    "momentum": 0.3,
    "budget": 200,
    "seed": 11,
    "initial_point": [-1.0, 1.0],
    "noise_sigma": 0.01,
    "workers": 3,
    "repetitions": 2
}"#;

fn run_binary(config: &Path, out: &Path, sequential: bool) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_barycenter"));
    cmd.arg("run").arg(config).arg("--out").arg(out);
    if sequential {
        cmd.arg("--sequential");
    }
    let status = cmd.output().map_err(|e| e.to_string())?.status;
    if status.success() {
        Ok(())
    } else {
        Err(format!("run exited with {status}"))
    }
}

fn csv_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            std::fs::read(&p).map(|b| (name, b)).map_err(|e| e.to_string())
        })
        .collect()
}

/// Two runs of one config, plus a sequential run, must write identical CSVs.
fn determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("config.json");
    std::fs::write(&config, DETERMINISM_CONFIG).map_err(|e| e.to_string())?;
    let dirs = ["a", "b", "seq"].map(|d| tmp.path().join(d));
    run_binary(&config, &dirs[0], false)?;
    run_binary(&config, &dirs[1], false)?;
    run_binary(&config, &dirs[2], true)?;
    let first = csv_files(&dirs[0])?;
    if first.len() != 6 {
        return Err(format!("expected 6 trace files, found {}", first.len()));
    }
    for dir in &dirs[1..] {
        if csv_files(dir)? != first {
            return Err(format!("{} differs from {}", dir.display(), dirs[0].display()));
        }
    }
    let bytes: usize = first.iter().map(|f| f.1.len()).sum();
    Ok(format!("{} files, {bytes} bytes identical across 3 runs", first.len()))
}

fn summarize(checks: &[Check]) -> String {
    match checks.iter().find(|c| !c.pass) {
        Some(c) => format!("{} failed: predicted {:e}, empirical {:e}", c.id, c.predicted, c.empirical),
        None => format!("{} checks", checks.len()),
    }
}

fn main() -> ExitCode {
    let reg = Registry::builtin();
    pin(&reg);
    let mut failures = 0;
    for (k, (suite, title)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run_suite(suite, &reg, Execution::Parallel) {
            Ok(checks) => (checks.iter().all(|c| c.pass), summarize(&checks)),
            Err(e) => (false, e.to_string()),
        };
        failures += usize::from(!pass);
        println!(
            "{} {:>2}. {title} ({detail}, {:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    let start = Instant::now();
    let (pass, detail) = match determinism() {
        Ok(d) => (true, d),
        Err(e) => (false, e),
    };
    failures += usize::from(!pass);
    println!(
        "{} 11. run determinism ({detail}, {:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    if failures == 0 {
        println!("acceptance: all 11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
