use faer::Mat;

use crate::error::{check_len, Error, Result};
use crate::grid::Image;
use crate::operator::{axpy, LinearOperator};

use super::cg::cg_spd;
use super::history::{HistoryRecorder, SolveHistory};

/// Circular forward differences on an `n×n` image stored with `x` fastest.
///
/// `(D f)_i = f_{i+1 mod n} − f_i`; `D_s = I⊗D` differences along `x`,
/// `D_t = D⊗I` along `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DifferenceOperators {
    n: usize,
}

impl DifferenceOperators {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The one-dimensional `n×n` matrix `D`.
    pub fn matrix(&self) -> Mat<f64> {
        let n = self.n;
        let mut d = Mat::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = -1.0;
            d[(i, (i + 1) % n)] += 1.0;
        }
        d
    }

    pub fn apply_s(&self, f: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (row_in, row_out) in f.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for i in 0..n {
                row_out[i] = row_in[(i + 1) % n] - row_in[i];
            }
        }
    }

    pub fn apply_s_adjoint(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (row_in, row_out) in w.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for i in 0..n {
                row_out[i] = row_in[(i + n - 1) % n] - row_in[i];
            }
        }
    }

    pub fn apply_t(&self, f: &[f64], out: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let up = ((j + 1) % n) * n;
            for i in 0..n {
                out[j * n + i] = f[up + i] - f[j * n + i];
            }
        }
    }

    pub fn apply_t_adjoint(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let down = ((j + n - 1) % n) * n;
            for i in 0..n {
                out[j * n + i] = w[down + i] - w[j * n + i];
            }
        }
    }
}

/// `Λ(f)_i = 1/√((D_s f)_i² + (D_t f)_i² + β)`.
pub fn igmrf_weights(f: &Image, beta: f64, ops: &DifferenceOperators) -> Result<Vec<f64>> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "beta must be > 0, got {beta}"
        )));
    }
    check_len(ops.n() * ops.n(), f.values().len())?;
    let len = f.values().len();
    let mut ds = vec![0.0; len];
    let mut dt = vec![0.0; len];
    ops.apply_s(f.values(), &mut ds);
    ops.apply_t(f.values(), &mut dt);
    Ok(ds
        .iter()
        .zip(&dt)
        .map(|(s, t)| 1.0 / (s * s + t * t + beta).sqrt())
        .collect())
}

/// `L = D_sᵀ Λ D_s + D_tᵀ Λ D_t`, with `Λ = I` when no weights are given.
pub struct PrecisionOperator<'a> {
    ops: DifferenceOperators,
    weights: Option<&'a [f64]>,
}

impl<'a> PrecisionOperator<'a> {
    pub fn new(ops: DifferenceOperators, weights: Option<&'a [f64]>) -> Self {
        Self { ops, weights }
    }
}

impl LinearOperator for PrecisionOperator<'_> {
    fn nrows(&self) -> usize {
        self.ops.n * self.ops.n
    }

    fn ncols(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let len = x.len();
        let mut d = vec![0.0; len];
        let mut back = vec![0.0; len];
        self.ops.apply_s(x, &mut d);
        if let Some(w) = self.weights {
            d.iter_mut().zip(w).for_each(|(v, w)| *v *= w);
        }
        self.ops.apply_s_adjoint(&d, y);
        self.ops.apply_t(x, &mut d);
        if let Some(w) = self.weights {
            d.iter_mut().zip(w).for_each(|(v, w)| *v *= w);
        }
        self.ops.apply_t_adjoint(&d, &mut back);
        axpy(1.0, &back, y);
    }

    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.apply_into(y, x)
    }
}

/// `AᵀA + λL`
struct Regularized<'a, A: ?Sized> {
    a: &'a A,
    lambda: f64,
    precision: PrecisionOperator<'a>,
}

impl<A: LinearOperator + ?Sized> LinearOperator for Regularized<'_, A> {
    fn nrows(&self) -> usize {
        self.a.ncols()
    }

    fn ncols(&self) -> usize {
        self.a.ncols()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let ax = self.a.apply(x);
        self.a.apply_adjoint_into(&ax, y);
        let lx = self.precision.apply(x);
        axpy(self.lambda, &lx, y);
    }

    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.apply_into(y, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSchedule {
    /// `λ_k = e^k`, `k = 1, 2, …`
    Exponential,
    Explicit(Vec<f64>),
}

impl LambdaSchedule {
    /// `λ_k` for 1-based `k`.
    pub fn lambda(&self, k: usize) -> Result<f64> {
        let v = match self {
            LambdaSchedule::Exponential => (k as f64).exp(),
            LambdaSchedule::Explicit(v) => *v.get(k - 1).ok_or_else(|| {
                Error::InvalidArgument(format!("lambda schedule has {} entries, need {k}", v.len()))
            })?,
        };
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidArgument(format!(
                "lambda_{k} must be > 0, got {v}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgePreservingConfig {
    pub outer_iters: usize,
    pub schedule: LambdaSchedule,
    pub beta: f64,
    pub cg_max: usize,
    pub cg_tol: f64,
    pub keep_iterates: bool,
}

impl Default for EdgePreservingConfig {
    fn default() -> Self {
        Self {
            outer_iters: 5,
            schedule: LambdaSchedule::Exponential,
            beta: 1e-3,
            cg_max: 100,
            cg_tol: 1e-8,
            keep_iterates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterStep {
    pub lambda: f64,
    pub cg_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgePreservingResult {
    /// One entry per outer iterate `f⁽ᵏ⁾`.
    pub history: SolveHistory,
    pub outer: Vec<OuterStep>,
}

/// Iteratively reweighted Tikhonov with an IGMRF prior.
///
/// `f⁽¹⁾` solves `(AᵀA + λ₁L₁)f = Aᵀb` with unit weights; each later `f⁽ᵏ⁾`
/// uses `L_k` built from `Λ(f⁽ᵏ⁻¹⁾)`. Inner solves are matrix-free CG from
/// zero. CG hitting its cap is logged, not fatal.
pub fn edge_preserving_reconstruct<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    config: &EdgePreservingConfig,
    ftrue: Option<&[f64]>,
) -> Result<EdgePreservingResult> {
    let (m, npix) = (op.nrows(), op.ncols());
    check_len(m, b.len())?;
    if let Some(f) = ftrue {
        check_len(npix, f.len())?;
    }
    if config.outer_iters == 0 {
        return Err(Error::InvalidArgument("outer_iters must be >= 1".into()));
    }
    let n = (npix as f64).sqrt().round() as usize;
    if n * n != npix {
        return Err(Error::InvalidArgument(format!(
            "{npix} unknowns do not form a square image"
        )));
    }
    let ops = DifferenceOperators::new(n);
    let rhs = op.apply_adjoint(b);

    let mut rec = HistoryRecorder::new(b, ftrue, config.keep_iterates);
    let mut outer = Vec::with_capacity(config.outer_iters);
    let mut f = vec![0.0; npix];
    let mut weights: Option<Vec<f64>> = None;

    for k in 1..=config.outer_iters {
        let lambda = config.schedule.lambda(k)?;
        let sys = Regularized {
            a: op,
            lambda,
            precision: PrecisionOperator::new(ops, weights.as_deref()),
        };
        let cg = cg_spd(&sys, &rhs, config.cg_max, config.cg_tol, |_, _| {})?;
        if !cg.converged {
            log::warn!(
                "igmrf outer {k}: CG stopped after {} iterations at relative residual {:e}",
                cg.iterations,
                cg.residual_norms.last().copied().unwrap_or(1.0)
            );
        }
        f = cg.solution;
        let mut r = op.apply(&f);
        axpy(-1.0, b, &mut r);
        rec.record(&f, crate::operator::norm(&r));
        outer.push(OuterStep {
            lambda,
            cg_iterations: cg.iterations,
            converged: cg.converged,
        });
        if k < config.outer_iters {
            let img = Image::square(n, f.clone())?;
            weights = Some(igmrf_weights(&img, config.beta, &ops)?);
        }
    }
    Ok(EdgePreservingResult {
        history: rec.finish(f),
        outer,
    })
}
