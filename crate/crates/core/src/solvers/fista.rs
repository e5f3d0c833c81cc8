use crate::error::{check_len, Error, Result};
use crate::operator::{dot, norm, LinearOperator};

use super::history::{HistoryRecorder, SolveHistory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FistaConfig {
    /// Weight of `‖f‖₁` in `‖Af − b‖² + λ‖f‖₁`.
    pub lambda: f64,
    pub max_iters: usize,
    pub keep_iterates: bool,
}

/// Componentwise `sign(x)·max(|x| − t, 0)`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// FISTA with backtracking for `min ‖Af − b‖² + λ‖f‖₁`, started from zero.
///
/// The smooth part has gradient `2Aᵀ(Af − b)`; a step with Lipschitz
/// estimate `L` soft-thresholds at `λ/L`. `L` starts from one power
/// iteration on `2AᵀA` and is doubled until the quadratic upper bound holds,
/// so it never decreases.
pub fn fista_l1<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    config: &FistaConfig,
    ftrue: Option<&[f64]>,
) -> Result<SolveHistory> {
    let (m, n) = (op.nrows(), op.ncols());
    check_len(m, b.len())?;
    if let Some(f) = ftrue {
        check_len(n, f.len())?;
    }
    let lambda = config.lambda;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let mut rec = HistoryRecorder::new(b, ftrue, config.keep_iterates);

    let mut lip = initial_lipschitz(op, b);

    // x, A x for the current and previous iterate; y, A y for the extrapolation
    let mut x = vec![0.0; n];
    let mut ax = vec![0.0; m];
    let mut x_prev = x.clone();
    let mut ax_prev = ax.clone();
    let mut y = x.clone();
    let mut ay = ax.clone();
    let mut t = 1.0_f64;

    let mut ry = vec![0.0; m];
    let mut grad = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; m];

    for _ in 0..config.max_iters {
        for ((r, a), bi) in ry.iter_mut().zip(&ay).zip(b) {
            *r = a - bi;
        }
        let gy = dot(&ry, &ry);
        op.apply_adjoint_into(&ry, &mut grad);
        for g in grad.iter_mut() {
            *g *= 2.0;
        }

        let y_sq = dot(&y, &y);
        let mut accepted = false;
        for _ in 0..200 {
            for ((pi, yi), gi) in p.iter_mut().zip(&y).zip(&grad) {
                *pi = soft_threshold(yi - gi / lip, lambda / lip);
            }
            op.apply_into(&p, &mut ap);
            let gp: f64 = ap.iter().zip(b).map(|(a, bi)| (a - bi) * (a - bi)).sum();
            let mut lin = 0.0;
            let mut quad = 0.0;
            for ((pi, yi), gi) in p.iter().zip(&y).zip(&grad) {
                let d = pi - yi;
                lin += d * gi;
                quad += d * d;
            }
            // relative slack absorbs rounding once the step has stagnated;
            // p == y to rounding is a fixed point, where the tracked A y may
            // differ from A p by more than that slack
            let bound = gy + lin + 0.5 * lip * quad;
            if gp <= bound + 1e-14 * gy.max(gp) || quad <= f64::EPSILON * f64::EPSILON * y_sq {
                accepted = true;
                break;
            }
            lip *= 2.0;
        }
        if !accepted {
            return Err(Error::Numerical(
                "fista: backtracking failed to find a step".into(),
            ));
        }

        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut ax_prev, &mut ax);
        x.copy_from_slice(&p);
        ax.copy_from_slice(&ap);

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        t = t_next;
        for i in 0..n {
            y[i] = x[i] + mom * (x[i] - x_prev[i]);
        }
        for i in 0..m {
            ay[i] = ax[i] + mom * (ax[i] - ax_prev[i]);
        }

        let res2: f64 = ax.iter().zip(b).map(|(a, bi)| (a - bi) * (a - bi)).sum();
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        rec.record(&x, res2.sqrt());
        rec.record_objective(res2 + lambda * l1);
    }
    Ok(rec.finish(x))
}

/// Rayleigh quotient of `2AᵀA` at `Aᵀb` (or at the all-ones vector when
/// `Aᵀb = 0`); never below the true constant's lower bound, refined later by
/// backtracking.
fn initial_lipschitz<A: LinearOperator + ?Sized>(op: &A, b: &[f64]) -> f64 {
    let mut v = op.apply_adjoint(b);
    if norm(&v) == 0.0 {
        v.fill(1.0);
    }
    let vn = norm(&v);
    if vn == 0.0 {
        return 1.0;
    }
    let av = op.apply(&v);
    let l = 2.0 * dot(&av, &av) / (vn * vn);
    if l > 0.0 && l.is_finite() {
        l
    } else {
        1.0
    }
}
