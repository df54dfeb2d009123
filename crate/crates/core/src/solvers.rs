//! Least squares regression classifiers: plain ridge LSR, DLSR with
//! ε-dragging, and FDLSR, which adds a transition variable `T` regularized by
//! the Fisher criterion.
//!
//! FDLSR minimizes
//!
//! ```text
//! ‖QX − T‖² + α‖T − (H + B⊙S)‖² + β‖Q‖² + λ·Fisher(T),   S ≥ 0
//! ```
//!
//! by alternating three closed-form updates (T, then Q, then S). The only
//! expensive factor, the ridge kernel `K = Xᵀ(XXᵀ + βI)⁻¹`, is computed once
//! per fit and can be shared between fits with the same `(X, β)`.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::classify::{self, ProjectedGallery};
use crate::dataset::LabelMatrix;
use crate::fisher::{self, MeanMatrices, Partition};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once `‖Q − Q₀‖²_F` drops below this.
    pub tol: f64,
    /// Run exactly this many sweeps and ignore `tol` and `max_iter`.
    pub report_iter: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 1.0,
            beta: 1e-2,
            lambda: 1.0,
            max_iter: 30,
            tol: 1e-4,
            report_iter: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.report_iter == Some(0) {
            return bad("report_iter must be at least 1".into());
        }
        Ok(())
    }

    fn sweep_budget(&self) -> usize {
        self.report_iter.unwrap_or(self.max_iter)
    }
}

/// Learned `c × d` projection from features to label space.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection(Matrix);

impl Projection {
    pub fn new(q: Matrix) -> Result<Self> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: 0,
                what: "projection",
            });
        }
        Ok(Projection(q))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

/// Transition targets `T`, relaxation `S ≥ 0` and dragging directions `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedTargets {
    pub t: Matrix,
    pub s: Matrix,
    pub b: Matrix,
}

impl RelaxedTargets {
    /// `H + B⊙S`, the ε-dragged labels.
    pub fn relaxed_labels(&self, h: &LabelMatrix) -> Matrix {
        h.as_matrix() + self.b.component_mul(&self.s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub q_delta: f64,
    pub heldout_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl SolverTrace {
    fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
        self.iterations_run = self.records.len();
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }
}

/// Held-out samples scored with the NN head after every sweep.
#[derive(Debug, Clone, Copy)]
pub struct Heldout<'a> {
    pub x: &'a Matrix,
    pub labels: &'a [usize],
}

impl Heldout<'_> {
    fn accuracy(&self, q: &Matrix, train_x: &Matrix, train_labels: &[usize]) -> Result<f64> {
        let gallery = ProjectedGallery::new(q * train_x, train_labels.to_vec())?;
        let pred = classify::nn_predict(&gallery, &(q * self.x))?;
        classify::accuracy(&pred, self.labels)
    }
}

/// The precomputed factor `K = Xᵀ(XXᵀ + βI)⁻¹` (`n × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeKernel {
    k: Matrix,
    beta: f64,
}

impl RidgeKernel {
    pub fn matrix(&self) -> &Matrix {
        &self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Solves `(XXᵀ + βI)·Kᵀ = X` by Cholesky, with one step of iterative
/// refinement if the residual bound `1e-8·(1 + ‖X‖)` is not met.
pub fn ridge_kernel(x: &Matrix, beta: f64) -> Result<RidgeKernel> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let d = x.nrows();
    let mut gram = x * x.transpose();
    for i in 0..d {
        gram[(i, i)] += beta;
    }
    let chol = Cholesky::new(gram.clone())
        .ok_or_else(|| Error::Numerical("XXᵀ + βI is not positive definite".into()))?;

    let bound = 1e-8 * (1.0 + x.norm());
    let mut kt = chol.solve(x);
    let mut residual = x - &gram * &kt;
    if !(residual.norm() <= bound) {
        kt += chol.solve(&residual);
        residual = x - &gram * &kt;
    }
    let err = residual.norm();
    if !(err <= bound) {
        return Err(Error::Numerical(format!(
            "ridge kernel residual {err:e} exceeds {bound:e}"
        )));
    }
    Ok(RidgeKernel {
        k: kt.transpose(),
        beta,
    })
}

/// `B = 2H − 1`.
pub fn build_direction_matrix(h: &LabelMatrix) -> Matrix {
    h.as_matrix().map(|v| 2.0 * v - 1.0)
}

/// Closed-form T step with the means held fixed:
/// `T = (QX + α(H + B⊙S) − λM + 2λM̂) / (1 + α + 2λ)`.
#[allow(clippy::too_many_arguments)]
pub fn update_t(
    q: &Matrix,
    x: &Matrix,
    h: &Matrix,
    b: &Matrix,
    s: &Matrix,
    means: &MeanMatrices,
    alpha: f64,
    lambda: f64,
) -> Matrix {
    let relaxed = h + b.component_mul(s);
    let numer = q * x + relaxed * alpha - &means.global_mean * lambda + &means.class_means * (2.0 * lambda);
    numer / (1.0 + alpha + 2.0 * lambda)
}

/// `Q = T·K`, the ridge minimizer of `‖QX − T‖² + β‖Q‖²`.
pub fn update_q(t: &Matrix, kernel: &RidgeKernel) -> Matrix {
    t * &kernel.k
}

/// `S = max(B⊙(T − H), 0)`.
pub fn update_s(t: &Matrix, h: &Matrix, b: &Matrix) -> Matrix {
    (t - h).component_mul(b).map(|v| v.max(0.0))
}

/// `‖QX − T‖² + α‖T − (H + B⊙S)‖² + β‖Q‖² + λ·Fisher(T)`.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    q: &Matrix,
    x: &Matrix,
    t: &Matrix,
    h: &Matrix,
    b: &Matrix,
    s: &Matrix,
    partition: &Partition,
    cfg: &SolverConfig,
) -> f64 {
    let fit = (q * x - t).norm_squared();
    let relax = (t - (h + b.component_mul(s))).norm_squared();
    let fisher = if cfg.lambda == 0.0 {
        0.0
    } else {
        fisher::fisher_value(t, partition)
    };
    fit + cfg.alpha * relax + cfg.beta * q.norm_squared() + cfg.lambda * fisher
}

/// `‖QX − (H + B⊙S)‖² + β‖Q‖²`; with `S = 0` this is the plain LSR loss.
pub fn dlsr_objective(q: &Matrix, x: &Matrix, h: &Matrix, b: &Matrix, s: &Matrix, beta: f64) -> f64 {
    (q * x - (h + b.component_mul(s))).norm_squared() + beta * q.norm_squared()
}

fn check_inputs(x: &Matrix, h: &LabelMatrix, partition: &Partition) -> Result<()> {
    let h = h.as_matrix();
    if h.ncols() != x.ncols() || partition.len() != x.ncols() {
        return Err(Error::Shape(format!(
            "X has {} samples, H has {}, partition has {}",
            x.ncols(),
            h.ncols(),
            partition.len()
        )));
    }
    if h.nrows() != partition.n_classes() {
        return Err(Error::Shape(format!(
            "H has {} rows for {} classes",
            h.nrows(),
            partition.n_classes()
        )));
    }
    Ok(())
}

fn check_kernel(kernel: &RidgeKernel, x: &Matrix) -> Result<()> {
    if kernel.k.nrows() != x.ncols() || kernel.k.ncols() != x.nrows() {
        return Err(Error::Shape("ridge kernel does not match X".into()));
    }
    Ok(())
}

fn ensure_finite(m: &Matrix, iteration: usize, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, what })
    }
}

/// Mutable FDLSR iterate. [`FdlsrState::new`] performs the initialization
/// `Q = H·K`, `S = 0`, `T = H`, `B = 2H − 1`; every [`FdlsrState::sweep`]
/// applies the T, Q and S updates in that order.
#[derive(Debug, Clone)]
pub struct FdlsrState<'a> {
    x: &'a Matrix,
    h: &'a Matrix,
    partition: &'a Partition,
    kernel: &'a RidgeKernel,
    cfg: SolverConfig,
    pub q: Matrix,
    pub targets: RelaxedTargets,
}

impl<'a> FdlsrState<'a> {
    pub fn new(
        x: &'a Matrix,
        h: &'a LabelMatrix,
        partition: &'a Partition,
        kernel: &'a RidgeKernel,
        cfg: SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        check_inputs(x, h, partition)?;
        check_kernel(kernel, x)?;
        let hm = h.as_matrix();
        Ok(FdlsrState {
            x,
            h: hm,
            partition,
            kernel,
            cfg,
            q: update_q(hm, kernel),
            targets: RelaxedTargets {
                t: hm.clone(),
                s: Matrix::zeros(hm.nrows(), hm.ncols()),
                b: build_direction_matrix(h),
            },
        })
    }

    /// One T → Q → S pass; the means in the T step come from the incoming T.
    /// Returns `‖Q_new − Q_old‖²_F`.
    pub fn sweep(&mut self, iteration: usize) -> Result<f64> {
        let means = fisher::mean_matrices(&self.targets.t, self.partition);
        let t = update_t(
            &self.q,
            self.x,
            self.h,
            &self.targets.b,
            &self.targets.s,
            &means,
            self.cfg.alpha,
            self.cfg.lambda,
        );
        ensure_finite(&t, iteration, "T")?;
        let q = update_q(&t, self.kernel);
        ensure_finite(&q, iteration, "Q")?;
        let s = update_s(&t, self.h, &self.targets.b);

        let delta = (&q - &self.q).norm_squared();
        self.q = q;
        self.targets.t = t;
        self.targets.s = s;
        Ok(delta)
    }

    pub fn objective(&self) -> f64 {
        let RelaxedTargets { t, s, b } = &self.targets;
        objective(&self.q, self.x, t, self.h, b, s, self.partition, &self.cfg)
    }
}

#[derive(Debug, Clone)]
pub struct FdlsrFit {
    pub projection: Projection,
    pub targets: RelaxedTargets,
    pub trace: SolverTrace,
}

pub fn fit_fdlsr(
    x: &Matrix,
    h: &LabelMatrix,
    partition: &Partition,
    cfg: &SolverConfig,
    heldout: Option<Heldout<'_>>,
) -> Result<FdlsrFit> {
    cfg.validate()?;
    let kernel = ridge_kernel(x, cfg.beta)?;
    fit_fdlsr_with_kernel(&kernel, x, h, partition, cfg, heldout)
}

/// [`fit_fdlsr`] with a precomputed kernel; `kernel.beta()` overrides `cfg.beta`
/// in the objective.
pub fn fit_fdlsr_with_kernel(
    kernel: &RidgeKernel,
    x: &Matrix,
    h: &LabelMatrix,
    partition: &Partition,
    cfg: &SolverConfig,
    heldout: Option<Heldout<'_>>,
) -> Result<FdlsrFit> {
    let cfg = SolverConfig {
        beta: kernel.beta,
        ..*cfg
    };
    let mut state = FdlsrState::new(x, h, partition, kernel, cfg)?;
    let mut trace = SolverTrace::default();
    for iter in 1..=cfg.sweep_budget() {
        let q_delta = state.sweep(iter)?;
        let objective = state.objective();
        if !objective.is_finite() {
            return Err(Error::NonFinite {
                iteration: iter,
                what: "objective",
            });
        }
        let heldout_accuracy = heldout
            .map(|ho| ho.accuracy(&state.q, x, partition.labels()))
            .transpose()?;
        trace.push(TraceRecord {
            iter,
            objective,
            q_delta,
            heldout_accuracy,
        });
        trace.converged = q_delta < cfg.tol;
        if trace.converged && cfg.report_iter.is_none() {
            break;
        }
    }
    Ok(FdlsrFit {
        projection: Projection::new(state.q)?,
        targets: state.targets,
        trace,
    })
}

/// Ridge regression onto the one-hot labels: `Q = H·K`.
pub fn fit_lsr(x: &Matrix, h: &LabelMatrix, beta: f64) -> Result<Projection> {
    let kernel = ridge_kernel(x, beta)?;
    fit_lsr_with_kernel(&kernel, x, h)
}

pub fn fit_lsr_with_kernel(kernel: &RidgeKernel, x: &Matrix, h: &LabelMatrix) -> Result<Projection> {
    check_kernel(kernel, x)?;
    if h.as_matrix().ncols() != x.ncols() {
        return Err(Error::Shape("H and X disagree on sample count".into()));
    }
    Projection::new(update_q(h.as_matrix(), kernel))
}

#[derive(Debug, Clone)]
pub struct DlsrFit {
    pub projection: Projection,
    /// Final relaxation matrix `S`.
    pub relaxation: Matrix,
    pub trace: SolverTrace,
}

/// DLSR by exact block-coordinate descent: starting from the LSR solution,
/// each sweep sets `S = max(B⊙(QX − H), 0)` then `Q = (H + B⊙S)·K`.
pub fn fit_dlsr(x: &Matrix, h: &LabelMatrix, beta: f64, max_iter: usize, tol: f64) -> Result<(Projection, SolverTrace)> {
    let cfg = SolverConfig {
        beta,
        max_iter,
        tol,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    let kernel = ridge_kernel(x, beta)?;
    let fit = fit_dlsr_with_kernel(&kernel, x, h, &cfg, None, &[])?;
    Ok((fit.projection, fit.trace))
}

/// Uses `beta`, `max_iter`, `tol` and `report_iter` from `cfg`. `train_labels`
/// is only needed when `heldout` is given.
pub fn fit_dlsr_with_kernel(
    kernel: &RidgeKernel,
    x: &Matrix,
    h: &LabelMatrix,
    cfg: &SolverConfig,
    heldout: Option<Heldout<'_>>,
    train_labels: &[usize],
) -> Result<DlsrFit> {
    check_kernel(kernel, x)?;
    let hm = h.as_matrix();
    if hm.ncols() != x.ncols() {
        return Err(Error::Shape("H and X disagree on sample count".into()));
    }
    let beta = kernel.beta;
    let b = build_direction_matrix(h);
    let mut q = update_q(hm, kernel);
    let mut s = Matrix::zeros(hm.nrows(), hm.ncols());
    let mut trace = SolverTrace::default();
    for iter in 1..=cfg.sweep_budget() {
        s = update_s(&(&q * x), hm, &b);
        let next = update_q(&(hm + b.component_mul(&s)), kernel);
        ensure_finite(&next, iter, "Q")?;
        let q_delta = (&next - &q).norm_squared();
        q = next;
        let heldout_accuracy = heldout.map(|ho| ho.accuracy(&q, x, train_labels)).transpose()?;
        trace.push(TraceRecord {
            iter,
            objective: dlsr_objective(&q, x, hm, &b, &s, beta),
            q_delta,
            heldout_accuracy,
        });
        trace.converged = q_delta < cfg.tol;
        if trace.converged && cfg.report_iter.is_none() {
            break;
        }
    }
    Ok(DlsrFit {
        projection: Projection::new(q)?,
        relaxation: s,
        trace,
    })
}

/// Which regression model to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lsr,
    Dlsr,
    Fdlsr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lsr => "lsr",
            Method::Dlsr => "dlsr",
            Method::Fdlsr => "fdlsr",
        }
    }
}

/// Result of [`fit`], whatever the method.
#[derive(Debug, Clone)]
pub struct Fit {
    pub projection: Projection,
    pub trace: SolverTrace,
    /// FDLSR targets; `None` for the baselines.
    pub targets: Option<RelaxedTargets>,
}

/// Fits `method` on samples `x` (`d × n`) with class `labels`.
///
/// LSR is single-shot: its trace has one record holding the ridge loss and
/// a `q_delta` of 0.
pub fn fit(
    method: Method,
    x: &Matrix,
    labels: &[usize],
    n_classes: usize,
    cfg: &SolverConfig,
    heldout: Option<Heldout<'_>>,
) -> Result<Fit> {
    cfg.validate()?;
    let partition = Partition::new(labels, n_classes)?;
    let h = LabelMatrix::from_labels(labels, n_classes);
    check_inputs(x, &h, &partition)?;
    let kernel = ridge_kernel(x, cfg.beta)?;
    match method {
        Method::Lsr => {
            let projection = fit_lsr_with_kernel(&kernel, x, &h)?;
            let hm = h.as_matrix();
            let zeros = Matrix::zeros(hm.nrows(), hm.ncols());
            let objective = dlsr_objective(projection.matrix(), x, hm, hm, &zeros, cfg.beta);
            let heldout_accuracy = heldout
                .map(|ho| ho.accuracy(projection.matrix(), x, labels))
                .transpose()?;
            let mut trace = SolverTrace {
                converged: true,
                ..SolverTrace::default()
            };
            trace.push(TraceRecord {
                iter: 1,
                objective,
                q_delta: 0.0,
                heldout_accuracy,
            });
            Ok(Fit {
                projection,
                trace,
                targets: None,
            })
        }
        Method::Dlsr => {
            let f = fit_dlsr_with_kernel(&kernel, x, &h, cfg, heldout, labels)?;
            Ok(Fit {
                projection: f.projection,
                trace: f.trace,
                targets: None,
            })
        }
        Method::Fdlsr => {
            let f = fit_fdlsr_with_kernel(&kernel, x, &h, &partition, cfg, heldout)?;
            Ok(Fit {
                projection: f.projection,
                trace: f.trace,
                targets: Some(f.targets),
            })
        }
    }
}
