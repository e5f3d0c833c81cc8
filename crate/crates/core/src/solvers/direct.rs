use faer::linalg::solvers::SolveLstsq;
use faer::{Mat, Side};

use crate::error::{check_len, Error, Result};
use crate::linalg::{assemble, gram, to_col, MemoryBudget};
use crate::operator::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsMethod {
    /// Householder QR of the assembled matrix; used at full column rank.
    Qr,
    /// Truncated SVD of the assembled matrix; minimum-norm solution.
    SvdMinNorm,
    /// Eigendecomposition of `AᵀA`; minimum-norm solution of the normal
    /// equations. Used when `A` itself exceeds the budget.
    NormalEigen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub solution: Vec<f64>,
    pub method: LsMethod,
    /// Numerical rank detected by the chosen factorization.
    pub rank: usize,
}

/// Minimizer of `‖Af − b‖²`, minimum-norm when `A` is rank deficient.
///
/// `A` is assembled when `m·n` doubles fit the budget. Otherwise the `n×n`
/// Gram matrix is formed instead; if that too exceeds the budget the call
/// fails and an iterative solver should be used.
pub fn solve_ls_direct<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    budget: MemoryBudget,
) -> Result<LsSolution> {
    let (m, n) = (op.nrows(), op.ncols());
    check_len(m, b.len())?;
    let dyn_op: &dyn LinearOperator = &Wrap(op);
    if budget.fits(m, n) {
        let a = assemble(dyn_op, budget)?;
        return solve_dense(&a, b);
    }
    if budget.fits(n, n) {
        log::info!("direct LS: {m}x{n} exceeds budget, using normal equations");
        let g = gram(dyn_op, budget)?;
        let atb = op.apply_adjoint(b);
        return solve_normal_equations(&g, &atb);
    }
    log::error!("direct LS: neither A ({m}x{n}) nor AᵀA fits the memory budget; use lsqr");
    Err(Error::BudgetExceeded {
        rows: n,
        cols: n,
        bytes: n.saturating_mul(n).saturating_mul(8),
        budget: budget.0,
    })
}

struct Wrap<'a, A: ?Sized>(&'a A);

impl<A: LinearOperator + ?Sized> LinearOperator for Wrap<'_, A> {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_into(x, y)
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.0.apply_adjoint_into(y, x)
    }
}

/// Least squares on an assembled matrix.
pub fn solve_dense(a: &Mat<f64>, b: &[f64]) -> Result<LsSolution> {
    let (m, n) = (a.nrows(), a.ncols());
    check_len(m, b.len())?;
    let rhs = to_col(b);
    let tol_factor = m.max(n) as f64 * f64::EPSILON;
    if m >= n {
        let qr = a.qr();
        let r = qr.thin_R();
        let diag: Vec<f64> = (0..n).map(|i| r[(i, i)].abs()).collect();
        let rmax = diag.iter().copied().fold(0.0, f64::max);
        let rmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
        if rmax > 0.0 && rmin > tol_factor * rmax {
            let x = qr.solve_lstsq(&rhs);
            return Ok(LsSolution {
                solution: x.col(0).iter().copied().collect(),
                method: LsMethod::Qr,
                rank: n,
            });
        }
    }
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let cut = tol_factor * smax;
    let utb = svd.U().transpose() * &rhs;
    let mut x = vec![0.0; n];
    let mut rank = 0;
    for (k, &sk) in s.iter().enumerate() {
        if sk <= cut || sk == 0.0 {
            continue;
        }
        rank += 1;
        let c = utb[(k, 0)] / sk;
        for (xi, v) in x.iter_mut().zip(svd.V().col(k).iter()) {
            *xi += c * v;
        }
    }
    Ok(LsSolution {
        solution: x,
        method: LsMethod::SvdMinNorm,
        rank,
    })
}

/// Minimum-norm solution of `G f = Aᵀb` for a Gram matrix `G = AᵀA`.
///
/// Eigenvalues below `n·ε·λ_max` are treated as zero.
pub fn solve_normal_equations(g: &Mat<f64>, atb: &[f64]) -> Result<LsSolution> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(Error::InvalidArgument("gram matrix must be square".into()));
    }
    check_len(n, atb.len())?;
    let evd = g
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let lam: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let lmax = lam.iter().copied().fold(0.0, f64::max);
    let cut = n as f64 * f64::EPSILON * lmax;
    let u = evd.U();
    let coef = u.transpose() * to_col(atb);
    let mut x = vec![0.0; n];
    let mut rank = 0;
    for (k, &l) in lam.iter().enumerate() {
        if l <= cut {
            continue;
        }
        rank += 1;
        let c = coef[(k, 0)] / l;
        for (xi, v) in x.iter_mut().zip(u.col(k).iter()) {
            *xi += c * v;
        }
    }
    Ok(LsSolution {
        solution: x,
        method: LsMethod::NormalEigen,
        rank,
    })
}
