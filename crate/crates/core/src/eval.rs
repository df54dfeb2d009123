//! Experimental protocol: repeated random per-class splits with mean ± std
//! accuracy, grid search over `(α, β, λ)`, and target-margin diagnostics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classify::{self, ProjectedGallery};
use crate::dataset::{split_per_class, Dataset, Normalization};
use crate::par::{self, Parallelism};
use crate::solvers::{self, Method, SolverConfig};
use crate::{Error, Matrix, Result};

/// Candidate values used for every parameter by the default grid.
pub const DEFAULT_GRID: [f64; 6] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, Copy, Default)]
pub struct TrialOptions {
    pub normalization: Normalization,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub method: Method,
    pub k_per_class: usize,
    pub repeats: usize,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation (divides by `repeats`).
    pub std: f64,
    pub std_kind: String,
    /// Summed over repeats; includes normalization and the ridge kernel.
    pub train_time_s: f64,
    /// Summed over repeats; projection plus NN search.
    pub test_time_s: f64,
    pub config: SolverConfig,
    pub normalization: Normalization,
    pub seed: u64,
}

/// `(mean, population std)` of `values`.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Split seed for repeat `repeat`; depends only on `(seed, repeat)` so adding
/// repeats leaves earlier splits alone.
pub fn split_seed(seed: u64, repeat: usize) -> u64 {
    // splitmix64 finalizer over a Weyl step.
    let mut z = seed.wrapping_add((repeat as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct RepeatOutcome {
    accuracy: f64,
    train_s: f64,
    test_s: f64,
}

fn run_repeat(
    ds: &Dataset,
    k_per_class: usize,
    seed: u64,
    method: Method,
    cfg: &SolverConfig,
    normalization: Normalization,
) -> Result<RepeatOutcome> {
    let (train, test) = split_per_class(ds, k_per_class, seed)?;
    if test.n_samples() == 0 {
        return Err(Error::InvalidParameter(format!(
            "{k_per_class} samples per class leaves nothing to test on"
        )));
    }

    let start = Instant::now();
    let normalizer = normalization.fit(train.features());
    let x = normalizer.apply(train.features());
    let fit = solvers::fit(method, &x, train.labels(), train.n_classes(), cfg, None)?;
    let gallery = ProjectedGallery::from_training(&fit.projection, &x, train.labels())?;
    let train_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let probes = classify::project(&fit.projection, &normalizer.apply(test.features()))?;
    let pred = classify::nn_predict(&gallery, &probes)?;
    let test_s = start.elapsed().as_secs_f64();

    Ok(RepeatOutcome {
        accuracy: classify::accuracy(&pred, test.labels())?,
        train_s,
        test_s,
    })
}

/// Trains on `k_per_class` random samples per class and scores the NN head
/// on the rest, `repeats` times. Repeats may run in parallel; the report is
/// identical for any thread count (timings aside).
pub fn run_trials(
    ds: &Dataset,
    k_per_class: usize,
    repeats: usize,
    seed: u64,
    method: Method,
    cfg: &SolverConfig,
    opts: TrialOptions,
) -> Result<TrialReport> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    cfg.validate()?;
    let outcomes = par::map_indexed(repeats, opts.parallelism, |r| {
        run_repeat(ds, k_per_class, split_seed(seed, r), method, cfg, opts.normalization).map_err(|e| {
            Error::Trial {
                repeat: r,
                source: Box::new(e),
            }
        })
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let accuracies: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let (mean, std) = mean_std(&accuracies);
    Ok(TrialReport {
        method,
        k_per_class,
        repeats,
        mean,
        std,
        std_kind: "population".into(),
        train_time_s: outcomes.iter().map(|o| o.train_s).sum(),
        test_time_s: outcomes.iter().map(|o| o.test_s).sum(),
        accuracies,
        config: *cfg,
        normalization: opts.normalization,
        seed,
    })
}

/// Candidate values per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::uniform(&DEFAULT_GRID)
    }
}

impl GridSpec {
    /// The same candidates for all three parameters.
    pub fn uniform(values: &[f64]) -> Self {
        GridSpec {
            alphas: values.to_vec(),
            betas: values.to_vec(),
            lambdas: values.to_vec(),
        }
    }

    /// Cartesian product in lexicographic `(α, β, λ)` order over sorted,
    /// de-duplicated values.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (alphas, betas, lambdas) = (sorted(&self.alphas), sorted(&self.betas), sorted(&self.lambdas));
        let mut out = Vec::with_capacity(alphas.len() * betas.len() * lambdas.len());
        for &a in &alphas {
            for &b in &betas {
                for &l in &lambdas {
                    out.push((a, b, l));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub report: TrialReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    pub best_index: usize,
    pub best: GridCell,
}

/// Runs [`run_trials`] for every grid cell; the best cell has the highest
/// mean accuracy, ties going to the earliest cell. Cells are distributed over
/// workers, repeats within a cell run sequentially.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    ds: &Dataset,
    k_per_class: usize,
    repeats: usize,
    seed: u64,
    grid: &GridSpec,
    method: Method,
    base: &SolverConfig,
    opts: TrialOptions,
) -> Result<GridResult> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::InvalidParameter("grid has no cells".into()));
    }
    let inner = TrialOptions {
        parallelism: Parallelism::Sequential,
        ..opts
    };
    let reports = par::map_indexed(cells.len(), opts.parallelism, |i| {
        let (alpha, beta, lambda) = cells[i];
        let cfg = SolverConfig {
            alpha,
            beta,
            lambda,
            ..*base
        };
        run_trials(ds, k_per_class, repeats, seed, method, &cfg, inner).map(|report| GridCell {
            alpha,
            beta,
            lambda,
            report,
        })
    });
    let cells = reports.into_iter().collect::<Result<Vec<_>>>()?;

    let mut best_index = 0;
    for (i, cell) in cells.iter().enumerate() {
        if cell.report.mean > cells[best_index].report.mean {
            best_index = i;
        }
    }
    Ok(GridResult {
        best: cells[best_index].clone(),
        best_index,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginStats {
    /// Smallest distance between columns of different classes; `None` with
    /// fewer than two classes present.
    pub min_inter: Option<f64>,
    /// Largest distance between columns of the same class.
    pub max_intra: f64,
}

/// Pairwise column distances of a target matrix, split by class agreement.
pub fn margin_stats(t: &Matrix, labels: &[usize]) -> Result<MarginStats> {
    if t.ncols() != labels.len() {
        return Err(Error::Shape(format!("{} columns, {} labels", t.ncols(), labels.len())));
    }
    let mut min_inter = f64::INFINITY;
    let mut max_intra: f64 = 0.0;
    for a in 0..t.ncols() {
        let ca = t.column(a);
        for b in a + 1..t.ncols() {
            let dist = (t.column(b) - ca).norm();
            if labels[a] == labels[b] {
                max_intra = max_intra.max(dist);
            } else {
                min_inter = min_inter.min(dist);
            }
        }
    }
    Ok(MarginStats {
        min_inter: min_inter.is_finite().then_some(min_inter),
        max_intra,
    })
}
