use crate::error::{check_len, Result};
use crate::operator::{axpy, norm, scale, LinearOperator};

use super::history::{HistoryRecorder, SolveHistory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqrConfig {
    pub max_iters: usize,
    pub keep_iterates: bool,
}

impl Default for LsqrConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            keep_iterates: false,
        }
    }
}

/// Golub–Kahan bidiagonalization least squares, started from zero.
///
/// Residual norms are the recurrence values `φ̄_k`, which equal
/// `‖A f⁽ᵏ⁾ − b‖` in exact arithmetic and never increase. A zero
/// bidiagonalization vector means the current iterate already solves the
/// least-squares problem; the history then ends early.
pub fn lsqr<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    config: &LsqrConfig,
    ftrue: Option<&[f64]>,
) -> Result<SolveHistory> {
    let (m, n) = (op.nrows(), op.ncols());
    check_len(m, b.len())?;
    if let Some(f) = ftrue {
        check_len(n, f.len())?;
    }
    let mut rec = HistoryRecorder::new(b, ftrue, config.keep_iterates);
    let mut x = vec![0.0; n];

    let mut u = b.to_vec();
    let mut beta = norm(&u);
    if beta == 0.0 {
        return Ok(rec.finish(x));
    }
    scale(1.0 / beta, &mut u);
    let mut v = op.apply_adjoint(&u);
    let mut alpha = norm(&v);
    if alpha == 0.0 {
        return Ok(rec.finish(x));
    }
    scale(1.0 / alpha, &mut v);

    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut av = vec![0.0; m];
    let mut atu = vec![0.0; n];

    for _ in 0..config.max_iters {
        op.apply_into(&v, &mut av);
        for (ui, a) in u.iter_mut().zip(&av) {
            *ui = a - alpha * *ui;
        }
        beta = norm(&u);
        if beta > 0.0 {
            scale(1.0 / beta, &mut u);
            op.apply_adjoint_into(&u, &mut atu);
            for (vi, a) in v.iter_mut().zip(&atu) {
                *vi = a - beta * *vi;
            }
            alpha = norm(&v);
            if alpha > 0.0 {
                scale(1.0 / alpha, &mut v);
            }
        } else {
            alpha = 0.0;
        }

        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;

        axpy(phi / rho, &w, &mut x);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = vi - (theta / rho) * *wi;
        }
        rec.record(&x, phibar.abs());

        if beta == 0.0 || alpha == 0.0 {
            log::debug!("lsqr: bidiagonalization terminated, beta={beta:e} alpha={alpha:e}");
            break;
        }
    }
    Ok(rec.finish(x))
}
