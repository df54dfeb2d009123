//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion
//! and exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p fdlsr --test acceptance`.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use clap::Parser;
use fdlsr::cli::{Cli, Command as Sub};
use fdlsr::dataset::{normalize_columns, synth_blobs, Dataset, LabelMatrix};
use fdlsr::eval::{self, GridSpec, TrialOptions, DEFAULT_GRID};
use fdlsr::fisher::{fisher_gradient, Partition};
use fdlsr::model::Model;
use fdlsr::oracles;
use fdlsr::par::Parallelism;
use fdlsr::solvers::{self, FdlsrState, Method, SolverConfig};
use fdlsr::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

/// Noise level used for "moderate overlap" blobs throughout the suite.
const OVERLAP_SPREAD: f64 = 1.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Labels covering every class, the rest drawn at random.
fn random_labels(rng: &mut ChaCha8Rng, n: usize, c: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..c).collect();
    labels.extend((c..n).map(|_| rng.random_range(0..c)));
    labels
}

fn blobs(seed: u64) -> Dataset {
    normalize_columns(&synth_blobs(10, 20, 50, OVERLAP_SPREAD, seed).expect("blobs"))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let c = rng.random_range(1..=5);
        let n = rng.random_range(c..=20);
        let labels = random_labels(&mut rng, n, c);
        let t = random_matrix(&mut rng, c, n);
        let partition = Partition::new(&labels, c).unwrap();
        let fd = oracles::fd_gradient(|m| oracles::scalar_fisher(m, &labels), &t, Default::default()).unwrap();
        let g = fisher_gradient(&t, &partition);
        for (a, b) in g.iter().zip(fd.iter()) {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 10.0,
        format!("max relative deviation {worst:.2e} over 50 instances, {secs:.2}s"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 10_000;
    let h = Matrix::from_fn(1, n, |_, _| f64::from(rng.random_bool(0.5)));
    let b = Matrix::from_fn(1, n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    // Keep |t − h| ≤ 2 so the minimizer lies inside the search grid.
    let t = Matrix::from_fn(1, n, |_, j| h[(0, j)] + rng.random_range(-2.0..2.0));
    let s = solvers::update_s(&t, &h, &b);
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let brute = oracles::brute_s_entry(t[(0, j)], h[(0, j)], b[(0, j)], 2.0, 1e-3);
        worst = worst.max((s[(0, j)] - brute).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-3 && secs < 5.0,
        format!("max gap to grid minimizer {worst:.2e} over {n} triples, {secs:.2}s"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sub_objective = |q: &Matrix, x: &Matrix, t: &Matrix, beta: f64| {
        let r = oracles::scalar_matmul(q, x) - t;
        r.norm_squared() + beta * q.norm_squared()
    };
    let mut worst_ratio: f64 = 0.0;
    let mut beaten = 0usize;
    for _ in 0..50 {
        let d = rng.random_range(2..=12);
        let c = rng.random_range(2..=5);
        let n = rng.random_range(c..=20);
        let beta = 10f64.powf(rng.random_range(-3.0..0.0));
        let x = random_matrix(&mut rng, d, n);
        let t = random_matrix(&mut rng, c, n);
        let kernel = solvers::ridge_kernel(&x, beta).unwrap();
        let q = solvers::update_q(&t, &kernel);

        let residual = (&q * &x * x.transpose() - &t * x.transpose() + &q * beta).norm();
        let bound = 1e-8 * (1.0 + t.norm() * x.norm());
        worst_ratio = worst_ratio.max(residual / bound);

        let base = sub_objective(&q, &x, &t, beta);
        for p in 0..1000 {
            let eps = [1e-1, 1e-2, 1e-3][p % 3];
            let delta = Matrix::from_fn(c, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            if sub_objective(&(&q + delta * eps), &x, &t, beta) <= base {
                beaten += 1;
            }
        }
    }
    outcome(
        worst_ratio <= 1.0 && beaten == 0,
        format!("worst residual/bound {worst_ratio:.2e}, {beaten} of 50000 perturbations not worse"),
    )
}

fn criterion_4() -> Outcome {
    let ds = normalize_columns(&synth_blobs(4, 6, 9, 1.0, 4).unwrap());
    let (x, labels) = (ds.features(), ds.labels());
    let h = LabelMatrix::from_labels(labels, 4);
    let partition = Partition::new(labels, 4).unwrap();
    let cfg = SolverConfig {
        tol: 1e9,
        ..SolverConfig::default()
    };

    let fit = solvers::fit_fdlsr(x, &h, &partition, &cfg, None).unwrap();
    let one_sweep = fit.trace.iterations_run == 1 && fit.trace.converged;

    let kernel = solvers::ridge_kernel(x, cfg.beta).unwrap();
    let state = FdlsrState::new(x, &h, &partition, &kernel, cfg).unwrap();
    let reference_q = oracles::scalar_matmul(h.as_matrix(), &oracles::reference_ridge_kernel(x, cfg.beta).unwrap());
    let q_gap = state
        .q
        .iter()
        .zip(reference_q.iter())
        .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
        .fold(0.0, f64::max);
    let hm = h.as_matrix();
    let s_zero = state.targets.s.iter().all(|&v| v == 0.0);
    let t_is_h = &state.targets.t == hm;
    let b_ok = state
        .targets
        .b
        .iter()
        .zip(hm.iter())
        .all(|(&b, &h)| b == 2.0 * h - 1.0);

    let cli = Cli::try_parse_from(["fdlsr", "train", "--data", "x.csv"]).unwrap();
    let cli_tol = match cli.command {
        Sub::Train(a) => a.solver.tol,
        _ => f64::NAN,
    };
    let tol_default = SolverConfig::default().tol == 1e-4 && cli_tol == 1e-4;

    let pass = one_sweep && q_gap <= 1e-10 && s_zero && t_is_h && b_ok && tol_default;
    outcome(
        pass,
        format!(
            "sweeps with tol=1e9: {}, init Q gap {q_gap:.1e}, S=0 {s_zero}, T=H {t_is_h}, B=2H-1 {b_ok}, default tol 1e-4 {tol_default}",
            fit.trace.iterations_run
        ),
    )
}

struct ConvergenceRuns {
    outcome: Outcome,
    /// `(min inter-class distance of H + B⊙S, converged)` per fit.
    margins: Vec<(f64, bool)>,
}

fn relaxed_margin(ds: &Dataset, fit: &solvers::FdlsrFit) -> f64 {
    let h = LabelMatrix::from_labels(ds.labels(), ds.n_classes());
    let m = eval::margin_stats(&fit.targets.relaxed_labels(&h), ds.labels()).unwrap();
    m.min_inter.unwrap()
}

fn fit_blobs(ds: &Dataset, cfg: &SolverConfig) -> solvers::FdlsrFit {
    let h = LabelMatrix::from_labels(ds.labels(), ds.n_classes());
    let partition = Partition::new(ds.labels(), ds.n_classes()).unwrap();
    solvers::fit_fdlsr(ds.features(), &h, &partition, cfg, None).unwrap()
}

fn criterion_5() -> ConvergenceRuns {
    let start = Instant::now();
    let base = SolverConfig {
        alpha: 1.0,
        beta: 1e-2,
        lambda: 1.0,
        ..SolverConfig::default()
    };
    let mut decreased = 0;
    let mut converged = 0;
    let mut margins = Vec::new();
    for seed in 0..10 {
        let ds = blobs(seed);
        let fixed = fit_blobs(
            &ds,
            &SolverConfig {
                report_iter: Some(30),
                ..base
            },
        );
        let obj: Vec<f64> = fixed.trace.objectives().collect();
        if obj.len() == 30 && obj[29] <= obj[0] {
            decreased += 1;
        }
        let run = fit_blobs(
            &ds,
            &SolverConfig {
                max_iter: 50,
                tol: 1e-4,
                ..base
            },
        );
        if run.trace.converged {
            converged += 1;
        }
        margins.push((relaxed_margin(&ds, &run), run.trace.converged));
    }
    let secs = start.elapsed().as_secs_f64();
    ConvergenceRuns {
        outcome: outcome(
            decreased == 10 && converged >= 9 && secs < 30.0,
            format!("obj[30] <= obj[1] in {decreased}/10, converged within 50 in {converged}/10, {secs:.2}s"),
        ),
        margins,
    }
}

fn criterion_6(mut margins: Vec<(f64, bool)>) -> Outcome {
    let base = SolverConfig {
        alpha: 1.0,
        beta: 1e-2,
        max_iter: 50,
        tol: 1e-4,
        ..SolverConfig::default()
    };
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..10 {
        let ds = blobs(200 + seed);
        let with = fit_blobs(&ds, &SolverConfig { lambda: 0.1, ..base });
        let without = fit_blobs(&ds, &SolverConfig { lambda: 0.0, ..base });
        let inter = |f: &solvers::FdlsrFit| eval::margin_stats(&f.targets.t, ds.labels()).unwrap().min_inter.unwrap();
        let (a, b) = (inter(&with), inter(&without));
        if a > b {
            wins += 1;
        }
        pairs.push(format!("{a:.3}/{b:.3}"));
        margins.push((relaxed_margin(&ds, &with), with.trace.converged));
        margins.push((relaxed_margin(&ds, &without), without.trace.converged));
    }
    let converged: Vec<f64> = margins.iter().filter(|m| m.1).map(|m| m.0).collect();
    let min_relaxed = converged.iter().copied().fold(f64::INFINITY, f64::min);
    let relaxed_ok = converged.iter().all(|&m| m >= 2f64.sqrt() - 1e-9);
    outcome(
        relaxed_ok && wins >= 7,
        format!(
            "min inter distance of H+B*S over {} converged fits {min_relaxed:.4} (>= sqrt 2: {relaxed_ok}); \
             lambda=0.1 beats lambda=0 on T margin in {wins}/10 [{}]",
            converged.len(),
            pairs.join(" ")
        ),
    )
}

/// Per-method parameter choice on validation datasets, then mean accuracy
/// over ten fresh datasets with ten random k=3 splits each.
fn criterion_7() -> Outcome {
    let opts = TrialOptions {
        parallelism: Parallelism::Threads(0),
        ..TrialOptions::default()
    };
    let mut means = Vec::new();
    let mut chosen = Vec::new();
    for method in [Method::Lsr, Method::Dlsr, Method::Fdlsr] {
        let grid = match method {
            Method::Fdlsr => GridSpec::default(),
            // α and λ play no role in the baselines.
            _ => GridSpec {
                alphas: vec![1.0],
                betas: DEFAULT_GRID.to_vec(),
                lambdas: vec![1.0],
            },
        };
        let cells = grid.cells();
        let mut scores = vec![0.0; cells.len()];
        for v in 0..3 {
            let ds = synth_blobs(10, 20, 50, OVERLAP_SPREAD, 1000 + v).unwrap();
            let r = eval::grid_search(&ds, 3, 3, v, &grid, method, &SolverConfig::default(), opts).unwrap();
            for (score, cell) in scores.iter_mut().zip(&r.cells) {
                *score += cell.report.mean;
            }
        }
        let best = (0..cells.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        let (alpha, beta, lambda) = cells[best];
        let cfg = SolverConfig {
            alpha,
            beta,
            lambda,
            ..SolverConfig::default()
        };
        let mut total = 0.0;
        for seed in 0..10 {
            let ds = synth_blobs(10, 20, 50, OVERLAP_SPREAD, 100 + seed).unwrap();
            total += eval::run_trials(&ds, 3, 10, seed, method, &cfg, opts).unwrap().mean;
        }
        means.push(total / 10.0);
        chosen.push(format!("{}@({alpha:e},{beta:e},{lambda:e})", method.name()));
    }
    let (lsr, dlsr, fdlsr) = (means[0], means[1], means[2]);
    let ordered = fdlsr >= dlsr && dlsr >= lsr;
    let gap = fdlsr - lsr;
    outcome(
        ordered && gap >= 0.01,
        format!(
            "mean accuracy LSR {lsr:.4}, DLSR {dlsr:.4}, FDLSR {fdlsr:.4}; ordering holds {ordered}; \
             FDLSR-LSR gap {:.2} points (need >= 1) [{}]",
            gap * 100.0,
            chosen.join(" ")
        ),
    )
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fdlsr"))
}

fn run_bin(args: &[&str]) {
    let out = bin().args(args).output().expect("spawn fdlsr");
    assert!(
        out.status.success(),
        "fdlsr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn accuracy_list(v: &Value) -> Vec<f64> {
    v["accuracies"].as_array().unwrap().iter().map(|a| a.as_f64().unwrap()).collect()
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.csv");
    let out = dir.path().join("eval.json");
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    run_bin(&["synth", "--classes", "5", "--per-class", "12", "--dim", "20", "--spread", "1.5", "--out", &s(&data)]);
    run_bin(&["eval", "--data", &s(&data), "--out", &s(&out)]);
    let report = read_json(&out);
    let acc = accuracy_list(&report);
    let n = acc.len() as f64;
    let mean = acc.iter().sum::<f64>() / n;
    let std = (acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt();
    let mean_gap = (mean - report["mean"].as_f64().unwrap()).abs();
    let std_gap = (std - report["std"].as_f64().unwrap()).abs();

    let candidates: BTreeSet<u64> = DEFAULT_GRID.iter().map(|v| v.to_bits()).collect();
    let candidate_set: BTreeSet<u64> = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0].iter().map(|v: &f64| v.to_bits()).collect();
    let cli = Cli::try_parse_from(["fdlsr", "gridsearch", "--data", "x.csv"]).unwrap();
    let cells = match cli.command {
        Sub::Gridsearch(g) => g.spec().cells(),
        _ => Vec::new(),
    };
    let distinct: BTreeSet<[u64; 3]> = cells.iter().map(|&(a, b, l)| [a.to_bits(), b.to_bits(), l.to_bits()]).collect();
    let covers = distinct.len() == 216
        && cells.len() == 216
        && cells
            .iter()
            .all(|&(a, b, l)| [a, b, l].iter().all(|v| candidate_set.contains(&v.to_bits())));

    let pass = acc.len() == 10 && mean_gap <= 1e-12 && std_gap <= 1e-12 && covers && candidates == candidate_set;
    outcome(
        pass,
        format!(
            "eval repeats {}, mean gap {mean_gap:.1e}, std gap {std_gap:.1e}; default grid {} cells over the candidate set: {covers}",
            acc.len(),
            cells.len()
        ),
    )
}

fn projection_bits(path: &Path) -> Vec<u64> {
    Model::load(path).unwrap().projection.matrix().iter().map(|v| v.to_bits()).collect()
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let synth = |out: &str| {
        run_bin(&["synth", "--classes", "6", "--per-class", "10", "--dim", "30", "--spread", "1.5", "--seed", "7", "--out", out]);
    };
    synth(&p("a.csv"));
    synth(&p("b.csv"));
    let synth_same = std::fs::read(p("a.csv")).unwrap() == std::fs::read(p("b.csv")).unwrap();

    let data = p("a.csv");
    let train = |tag: &str| {
        run_bin(&[
            "train", "--data", &data, "--seed", "3", "--project-dim", "20",
            "--model", &p(&format!("{tag}.fdlsr")), "--trace", &p(&format!("{tag}.trace.csv")),
        ]);
    };
    train("m1");
    train("m2");
    let q_same = projection_bits(Path::new(&p("m1.fdlsr"))) == projection_bits(Path::new(&p("m2.fdlsr")));
    let trace_same = std::fs::read(p("m1.trace.csv")).unwrap() == std::fs::read(p("m2.trace.csv")).unwrap();

    let eval = |tag: &str, jobs: &str| {
        run_bin(&["eval", "--data", &data, "--seed", "11", "--jobs", jobs, "--out", &p(tag)]);
        accuracy_list(&read_json(Path::new(&p(tag))))
    };
    let e1 = eval("e1.json", "1");
    let eval_same = e1 == eval("e2.json", "1") && e1 == eval("e3.json", "4");

    let grid = |tag: &str| {
        run_bin(&["gridsearch", "--data", &data, "--grid", "1e-2,1", "--repeats", "3", "--jobs", "0", "--out", &p(tag)]);
        let v = read_json(Path::new(&p(tag)));
        v["cells"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| accuracy_list(&c["report"]))
            .collect::<Vec<_>>()
    };
    let grid_same = grid("g1.json") == grid("g2.json");

    outcome(
        synth_same && q_same && trace_same && eval_same && grid_same,
        format!(
            "synth bytes {synth_same}, train Q bits {q_same}, trace {trace_same}, eval accuracies {eval_same} (jobs 1 and 4), grid accuracies {grid_same}"
        ),
    )
}

fn guarded<F: FnOnce() -> Outcome>(f: F) -> Outcome {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    let mut results: Vec<(u32, Outcome)> = vec![
        (1, guarded(criterion_1)),
        (2, guarded(criterion_2)),
        (3, guarded(criterion_3)),
        (4, guarded(criterion_4)),
    ];
    let mut margins = Vec::new();
    results.push((
        5,
        guarded(|| {
            let runs = criterion_5();
            margins = runs.margins;
            runs.outcome
        }),
    ));
    results.push((6, guarded(|| criterion_6(margins))));
    results.push((7, guarded(criterion_7)));
    results.push((8, guarded(criterion_8)));
    results.push((9, guarded(criterion_9)));

    let mut failed = 0;
    for (n, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n}: {tag}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
