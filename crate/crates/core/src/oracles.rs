//! Reference implementations for tests and acceptance runs.
//!
//! Everything here is written with explicit scalar loops and calls nothing in
//! the `fisher`, `solvers` or `classify` modules, so agreement between an
//! oracle and the production path is independent evidence. None of it is
//! meant to be fast.

use crate::solvers::SolverConfig;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiffSpec {
    pub step: f64,
}

impl Default for FiniteDiffSpec {
    fn default() -> Self {
        FiniteDiffSpec { step: 1e-5 }
    }
}

/// Central-difference gradient of a scalar function of a matrix.
pub fn fd_gradient<F>(f: F, t: &Matrix, spec: FiniteDiffSpec) -> Result<Matrix>
where
    F: Fn(&Matrix) -> f64,
{
    if !(spec.step > 0.0) {
        return Err(Error::InvalidParameter("finite-difference step must be positive".into()));
    }
    let h = spec.step;
    let mut probe = t.clone();
    let mut grad = Matrix::zeros(t.nrows(), t.ncols());
    for j in 0..t.ncols() {
        for i in 0..t.nrows() {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let plus = f(&probe);
            probe[(i, j)] = orig - h;
            let minus = f(&probe);
            probe[(i, j)] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite {
                    iteration: j * t.nrows() + i,
                    what: "finite-difference evaluation",
                });
            }
            grad[(i, j)] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// Grid minimizer of `(t − h − b·s)²` over `s ∈ {0, step, 2·step, …, grid_max}`.
/// Ties keep the smaller `s`.
pub fn brute_s_entry(t: f64, h: f64, b: f64, grid_max: f64, grid_step: f64) -> f64 {
    assert!(grid_step > 0.0);
    let steps = (grid_max / grid_step).round() as usize;
    let mut best_s = 0.0;
    let mut best_j = f64::INFINITY;
    for k in 0..=steps {
        let s = k as f64 * grid_step;
        let r = t - h - b * s;
        let j = r * r;
        if j < best_j {
            best_j = j;
            best_s = s;
        }
    }
    best_s
}

/// Fisher criterion by direct summation over columns.
pub fn scalar_fisher(t: &Matrix, labels: &[usize]) -> f64 {
    let rows = t.nrows();
    let n = t.ncols();
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);

    let mut global = vec![0.0; rows];
    for j in 0..n {
        for r in 0..rows {
            global[r] += t[(r, j)];
        }
    }
    for g in &mut global {
        *g /= n as f64;
    }

    let mut total = 0.0;
    for class in 0..classes {
        let members: Vec<usize> = (0..n).filter(|&j| labels[j] == class).collect();
        if members.is_empty() {
            continue;
        }
        let mut mean = vec![0.0; rows];
        for &j in &members {
            for r in 0..rows {
                mean[r] += t[(r, j)];
            }
        }
        for m in &mut mean {
            *m /= members.len() as f64;
        }
        for &j in &members {
            for r in 0..rows {
                let w = t[(r, j)] - mean[r];
                let b = mean[r] - global[r];
                total += w * w - b * b;
            }
        }
    }
    for j in 0..n {
        for r in 0..rows {
            total += t[(r, j)] * t[(r, j)];
        }
    }
    total
}

/// `a · b` with a triple loop.
pub fn scalar_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = Matrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut acc = 0.0;
            for k in 0..a.ncols() {
                acc += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

fn sq_frobenius(m: &Matrix) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)] * m[(i, j)];
        }
    }
    acc
}

/// Four-term FDLSR objective with scalar loops:
/// `‖QX − T‖² + α‖T − (H + B⊙S)‖² + β‖Q‖² + λ·Fisher(T)`.
#[allow(clippy::too_many_arguments)]
pub fn scalar_objective(
    q: &Matrix,
    x: &Matrix,
    t: &Matrix,
    h: &Matrix,
    b: &Matrix,
    s: &Matrix,
    labels: &[usize],
    cfg: &SolverConfig,
) -> f64 {
    let qx = scalar_matmul(q, x);
    let mut fit = 0.0;
    let mut relax = 0.0;
    for j in 0..t.ncols() {
        for i in 0..t.nrows() {
            let r = qx[(i, j)] - t[(i, j)];
            fit += r * r;
            let u = t[(i, j)] - (h[(i, j)] + b[(i, j)] * s[(i, j)]);
            relax += u * u;
        }
    }
    let fisher = if cfg.lambda == 0.0 { 0.0 } else { scalar_fisher(t, labels) };
    fit + cfg.alpha * relax + cfg.beta * sq_frobenius(q) + cfg.lambda * fisher
}

/// Solves `a · x = rhs` column by column with Gaussian elimination and
/// partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn dense_solve(a: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(rhs.nrows(), n);
    let mut out = Matrix::zeros(n, rhs.ncols());
    for col in 0..rhs.ncols() {
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n).map(|j| a[(i, j)]).collect();
                row.push(rhs[(i, col)]);
                row
            })
            .collect();
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&p, &q| m[p][k].abs().total_cmp(&m[q][k].abs()))
                .unwrap();
            if m[pivot][k] == 0.0 {
                return Err(Error::Numerical("singular system in reference solve".into()));
            }
            m.swap(k, pivot);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..=n {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = m[i][n];
            for j in i + 1..n {
                acc -= m[i][j] * out[(j, col)];
            }
            out[(i, col)] = acc / m[i][i];
        }
    }
    Ok(out)
}

/// `Xᵀ(XXᵀ + βI)⁻¹` through [`dense_solve`].
pub fn reference_ridge_kernel(x: &Matrix, beta: f64) -> Result<Matrix> {
    let d = x.nrows();
    let mut gram = scalar_matmul(x, &x.transpose());
    for i in 0..d {
        gram[(i, i)] += beta;
    }
    // (XXᵀ+βI) Kᵀ = X
    Ok(dense_solve(&gram, x)?.transpose())
}

/// Nearest gallery column by exhaustive scan; ties keep the earliest column.
pub fn brute_nn(gallery: &Matrix, gallery_labels: &[usize], probes: &Matrix) -> Vec<usize> {
    let mut out = Vec::with_capacity(probes.ncols());
    for p in 0..probes.ncols() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for g in 0..gallery.ncols() {
            let mut d = 0.0;
            for r in 0..gallery.nrows() {
                let diff = gallery[(r, g)] - probes[(r, p)];
                d += diff * diff;
            }
            if d < best_d {
                best_d = d;
                best = g;
            }
        }
        out.push(gallery_labels[best]);
    }
    out
}

/// `(min inter-class distance, max intra-class distance)` over all column pairs.
pub fn brute_margins(t: &Matrix, labels: &[usize]) -> (Option<f64>, f64) {
    let mut min_inter: Option<f64> = None;
    let mut max_intra: f64 = 0.0;
    for a in 0..t.ncols() {
        for b in a + 1..t.ncols() {
            let mut d = 0.0;
            for r in 0..t.nrows() {
                d += (t[(r, a)] - t[(r, b)]).powi(2);
            }
            let d = d.sqrt();
            if labels[a] == labels[b] {
                max_intra = max_intra.max(d);
            } else {
                min_inter = Some(min_inter.map_or(d, |m| m.min(d)));
            }
        }
    }
    (min_inter, max_intra)
}
