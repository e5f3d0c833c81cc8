//! Spectral diagnostics of the discrete forward operator and the geometric
//! visible set of a detector configuration.

use faer::{Mat, Side};

use crate::error::{check_len, Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{gram, to_col, MemoryBudget};
use crate::operator::LinearOperator;
use crate::raytrace::{ring_offsets, shift, DetectorMask};

/// Default relative threshold below which a singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumData {
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
    pub rank_tolerance: f64,
    /// `σ_max/σ_min`, or `+∞` when `σ_min ≤ rank_tolerance·σ_max`.
    pub kappa: f64,
}

impl SpectrumData {
    fn from_sorted(singular_values: Vec<f64>, rank_tolerance: f64) -> Self {
        let smax = singular_values.first().copied().unwrap_or(0.0);
        let smin = singular_values.last().copied().unwrap_or(0.0);
        let kappa = if smax > 0.0 && smin > rank_tolerance * smax {
            smax / smin
        } else {
            f64::INFINITY
        };
        Self {
            singular_values,
            rank_tolerance,
            kappa,
        }
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.kappa.is_infinite()
    }

    /// Number of singular values above `rank_tolerance·σ_max`.
    pub fn numerical_rank(&self) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&s| s > self.rank_tolerance * smax && s > 0.0)
            .count()
    }
}

/// Singular values of an `m×n` matrix from the eigenvalues of its Gram
/// matrix `G = AᵀA`.
///
/// Negative rounding residue is clamped to zero, and since the rank is at
/// most `min(m, n)` the trailing `n − m` values are exactly zero when
/// `m < n`.
pub fn spectrum_from_gram(g: &Mat<f64>, nrows: usize, rank_tolerance: f64) -> Result<SpectrumData> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(Error::InvalidArgument("gram matrix must be square".into()));
    }
    let eig = g
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigenvalue solve failed: {e:?}")))?;
    let mut s: Vec<f64> = eig.iter().rev().map(|&l| l.max(0.0).sqrt()).collect();
    for v in s.iter_mut().skip(nrows.min(n)) {
        *v = 0.0;
    }
    Ok(SpectrumData::from_sorted(s, rank_tolerance))
}

/// Full singular spectrum of an assembled matrix through `AᵀA`.
pub fn singular_spectrum(a: &Mat<f64>) -> Result<SpectrumData> {
    let g = a.transpose() * a;
    spectrum_from_gram(&g, a.nrows(), RANK_TOLERANCE)
}

/// As [`singular_spectrum`], forming `AᵀA` matrix-free. Only the `n×n`
/// Gram matrix is held in memory.
pub fn operator_spectrum(op: &dyn LinearOperator, budget: MemoryBudget) -> Result<SpectrumData> {
    let g = gram(op, budget)?;
    spectrum_from_gram(&g, op.nrows(), RANK_TOLERANCE)
}

/// Singular values straight from an SVD of `A`, for cross-checking the Gram
/// route.
pub fn svd_spectrum(a: &Mat<f64>) -> Result<SpectrumData> {
    let mut s = a
        .singular_values()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    s.sort_by(|x, y| y.total_cmp(x));
    s.resize(a.ncols(), 0.0);
    Ok(SpectrumData::from_sorted(s, RANK_TOLERANCE))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardTriple {
    pub sigma: f64,
    /// `|u_iᵀ b|`
    pub coef: f64,
    /// `|u_iᵀ b| / σ_i`
    pub solcoef: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardData {
    /// Ordered by descending `sigma`; only `σ_i > rank_tolerance·σ_max`.
    pub triples: Vec<PicardTriple>,
    pub rank_tolerance: f64,
}

/// SVD coefficients of `b` against the left singular vectors of `A`.
pub fn picard_data(a: &Mat<f64>, b: &[f64]) -> Result<PicardData> {
    check_len(a.nrows(), b.len())?;
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let utb = svd.U().transpose() * to_col(b);
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let smax = order.first().map_or(0.0, |&i| s[i]);
    let triples = order
        .into_iter()
        .filter(|&i| s[i] > RANK_TOLERANCE * smax && s[i] > 0.0)
        .map(|i| {
            let coef = utb[(i, 0)].abs();
            PicardTriple {
                sigma: s[i],
                coef,
                solcoef: coef / s[i],
            }
        })
        .collect();
    Ok(PicardData {
        triples,
        rank_tolerance: RANK_TOLERANCE,
    })
}

/// Nodes lying on some detector's backward light cone at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleMask {
    n: usize,
    visible: Vec<bool>,
    tolerance: f64,
}

impl VisibleMask {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn visible(&self) -> &[bool] {
        &self.visible
    }

    pub fn is_visible(&self, idx: usize) -> bool {
        self.visible[idx]
    }

    pub fn count(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }
}

/// Marks node `x` when `| |x − d| − t_final | ≤ tolerance` for an active
/// detector `d`.
///
/// Uses the same lattice ring as ray pairing, so a node is visible exactly
/// when some ray starts there.
pub fn visible_mask(spec: &GridSpec, mask: &DetectorMask, tolerance: f64) -> Result<VisibleMask> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be > 0, got {tolerance}"
        )));
    }
    check_len(spec.node_count(), mask.active().len())?;
    let ring = ring_offsets(spec, spec.t_final(), tolerance);
    let mut visible = vec![false; spec.node_count()];
    for d in (0..spec.node_count()).filter(|&d| mask.is_active(d)) {
        for &off in &ring {
            if let Some(x) = shift(spec, d, off) {
                visible[x] = true;
            }
        }
    }
    Ok(VisibleMask {
        n: spec.n(),
        visible,
        tolerance,
    })
}

/// Relative errors restricted to the visible and the invisible nodes.
///
/// A region where `ftrue` vanishes yields `None`.
pub fn masked_relative_error(
    fhat: &[f64],
    ftrue: &[f64],
    vmask: &VisibleMask,
) -> Result<(Option<f64>, Option<f64>)> {
    check_len(ftrue.len(), fhat.len())?;
    check_len(vmask.visible.len(), ftrue.len())?;
    // [diff², true²] for outside and inside
    let mut acc = [[0.0f64; 2]; 2];
    for ((a, t), &v) in fhat.iter().zip(ftrue).zip(&vmask.visible) {
        let slot = &mut acc[v as usize];
        slot[0] += (a - t) * (a - t);
        slot[1] += t * t;
    }
    let rel = |[d, t]: [f64; 2]| (t > 0.0).then(|| (d / t).sqrt());
    Ok((rel(acc[1]), rel(acc[0])))
}
