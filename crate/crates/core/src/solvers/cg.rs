use crate::error::{check_len, Error, Result};
use crate::operator::{axpy, dot, norm, LinearOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `‖r_k‖ / ‖rhs‖` after each iteration.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
}

/// Conjugate gradients for a symmetric positive semi-definite operator,
/// started from zero. Stops once `‖r‖ ≤ tol·‖rhs‖` or after `max_iters`.
///
/// `observer` sees every iterate. Debug builds reject operators that fail a
/// symmetry probe.
pub fn cg_spd<A, F>(
    op: &A,
    rhs: &[f64],
    max_iters: usize,
    tol: f64,
    mut observer: F,
) -> Result<CgOutcome>
where
    A: LinearOperator + ?Sized,
    F: FnMut(usize, &[f64]),
{
    let n = op.ncols();
    if op.nrows() != n {
        return Err(Error::InvalidArgument(format!(
            "cg needs a square operator, got {}x{n}",
            op.nrows()
        )));
    }
    check_len(n, rhs.len())?;
    #[cfg(debug_assertions)]
    symmetry_probe(op)?;

    let mut x = vec![0.0; n];
    let rhs_norm = norm(rhs);
    let mut out = CgOutcome {
        solution: Vec::new(),
        iterations: 0,
        residual_norms: Vec::new(),
        converged: true,
    };
    if rhs_norm == 0.0 {
        out.solution = x;
        return Ok(out);
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    out.converged = false;

    for k in 1..=max_iters {
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            // p lies in the null space; nothing more to gain
            log::debug!("cg: non-positive curvature {pap:e} at iteration {k}");
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_next = dot(&r, &r);
        let rel = rr_next.sqrt() / rhs_norm;
        out.iterations = k;
        out.residual_norms.push(rel);
        observer(k, &x);
        if rel <= tol {
            out.converged = true;
            break;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    out.solution = x;
    Ok(out)
}

#[cfg(debug_assertions)]
fn symmetry_probe<A: LinearOperator + ?Sized>(op: &A) -> Result<()> {
    let n = op.ncols();
    let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
    let y: Vec<f64> = (0..n).map(|i| ((i * 5 + 1) % 13) as f64 - 6.0).collect();
    let ax = op.apply(&x);
    let ay = op.apply(&y);
    let lhs = dot(&ax, &y);
    let rhs = dot(&x, &ay);
    let scale = norm(&ax) * norm(&y) + norm(&x) * norm(&ay);
    let rel = if scale > 0.0 {
        (lhs - rhs).abs() / scale
    } else {
        0.0
    };
    if rel > 1e-10 {
        return Err(Error::NotSymmetric(rel));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::linalg::solvers::Solve;
    use faer::Mat;

    fn spd5() -> Mat<f64> {
        let b = Mat::from_fn(5, 5, |i, j| ((i * 3 + j * 5) % 7) as f64 / 7.0 - 0.4);
        let mut a = b.transpose() * &b;
        for i in 0..5 {
            a[(i, i)] += 1.0;
        }
        a
    }

    #[test]
    fn zero_rhs() {
        let out = cg_spd(&spd5(), &[0.0; 5], 10, 1e-12, |_, _| {}).unwrap();
        assert_eq!(out.solution, vec![0.0; 5]);
        assert!(out.converged);
    }

    #[test]
    fn matches_direct_solve() {
        let a = spd5();
        let rhs = [1.0, -2.0, 0.5, 3.0, 0.0];
        let out = cg_spd(&a, &rhs, 5, 1e-14, |_, _| {}).unwrap();
        let sol = a
            .llt(faer::Side::Lower)
            .unwrap()
            .solve(crate::linalg::to_col(&rhs));
        for i in 0..5 {
            assert!((out.solution[i] - sol[(i, 0)]).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_error_decreases() {
        let a = spd5();
        let rhs = [1.0, 1.0, -1.0, 2.0, 0.3];
        let exact = a
            .llt(faer::Side::Lower)
            .unwrap()
            .solve(crate::linalg::to_col(&rhs));
        let mut energies = Vec::new();
        cg_spd(&a, &rhs, 5, 0.0, |_, x| {
            let e: Vec<f64> = (0..5).map(|i| x[i] - exact[(i, 0)]).collect();
            energies.push(dot(&e, &a.apply(&e)));
        })
        .unwrap();
        assert!(!energies.is_empty());
        let first = dot(&rhs, &exact.col(0).iter().copied().collect::<Vec<_>>());
        assert!(energies[0] <= first);
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[cfg(debug_assertions)]
    #[test]
    fn rejects_non_symmetric() {
        let a = Mat::from_fn(3, 3, |i, j| {
            if j == i + 1 {
                1.0
            } else if i == j {
                2.0
            } else {
                0.0
            }
        });
        assert!(matches!(
            cg_spd(&a, &[1.0; 3], 3, 1e-10, |_, _| {}),
            Err(Error::NotSymmetric(_))
        ));
    }
}
