//! Dense assembly of matrix-free operators under a memory budget.

use faer::Mat;

use crate::error::{Error, Result};
use crate::operator::LinearOperator;

/// Upper bound on the bytes a dense assembly may allocate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryBudget(pub usize);

impl Default for MemoryBudget {
    fn default() -> Self {
        // 1 GiB
        Self(1 << 30)
    }
}

impl MemoryBudget {
    pub fn check(&self, rows: usize, cols: usize) -> Result<()> {
        let bytes = rows
            .saturating_mul(cols)
            .saturating_mul(std::mem::size_of::<f64>());
        if bytes > self.0 {
            Err(Error::BudgetExceeded {
                rows,
                cols,
                bytes,
                budget: self.0,
            })
        } else {
            Ok(())
        }
    }

    pub fn fits(&self, rows: usize, cols: usize) -> bool {
        self.check(rows, cols).is_ok()
    }
}

/// Dense `A`, built one column at a time from unit vectors.
pub fn assemble(op: &dyn LinearOperator, budget: MemoryBudget) -> Result<Mat<f64>> {
    let (m, n) = (op.nrows(), op.ncols());
    budget.check(m, n)?;
    let mut a = Mat::<f64>::zeros(m, n);
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        unit[j] = 1.0;
        op.apply_into(&unit, &mut col);
        unit[j] = 0.0;
        for (i, v) in col.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    Ok(a)
}

/// Gram matrix `AᵀA`, column `j` computed as `Aᵀ(A e_j)` and then
/// symmetrized.
pub fn gram(op: &dyn LinearOperator, budget: MemoryBudget) -> Result<Mat<f64>> {
    let (m, n) = (op.nrows(), op.ncols());
    budget.check(n, n)?;
    let mut g = Mat::<f64>::zeros(n, n);
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; m];
    let mut back = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        op.apply_into(&unit, &mut col);
        unit[j] = 0.0;
        op.apply_adjoint_into(&col, &mut back);
        for (i, v) in back.iter().enumerate() {
            g[(i, j)] = *v;
        }
    }
    symmetrize(&mut g);
    Ok(g)
}

pub(crate) fn symmetrize(g: &mut Mat<f64>) {
    let n = g.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let avg = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = avg;
            g[(j, i)] = avg;
        }
    }
}

pub(crate) fn to_col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}
