//! Leapfrog solution operator `S` of the 2D wave equation with zero initial
//! velocity and zero Dirichlet lateral boundary.
//!
//! One step uses `T = I + (σ²/2)(I ⊗ T_x) + (σ²/2)(T_y ⊗ I)` where `T_x`,
//! `T_y` are the `tridiag(1, -2, 1)` Poisson matrices, i.e. a 5-point
//! stencil with out-of-grid neighbours read as zero. States follow
//! `u⁰ = f`, `u¹ = T f`, `u^τ = 2 T u^{τ-1} - u^{τ-2}`, and the stored slice
//! `τ = 1..=n_slices` is the midpoint average `(u^{τ-1} + u^τ) / 2`.

use faer::Mat;

use crate::error::{check_len, Result};
use crate::grid::{GridSpec, Image, SpaceTimeField};
use crate::operator::LinearOperator;

/// Largest `n` for which dense assembly of `S` is considered routine.
const ASSEMBLY_SOFT_LIMIT: usize = 64;

#[derive(Debug, Clone)]
pub struct WavePropagator {
    spec: GridSpec,
    /// `σ²/2`, the off-diagonal stencil weight.
    coupling: f64,
}

impl WavePropagator {
    pub fn new(spec: GridSpec) -> Self {
        let s = spec.courant();
        Self {
            spec,
            coupling: 0.5 * s * s,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// `T u` for an image.
    pub fn propagator_apply(&self, u: &Image) -> Result<Image> {
        u.check(&self.spec)?;
        let mut out = Image::zeros(&self.spec);
        self.step(u.values(), out.values_mut());
        Ok(out)
    }

    /// `S f`: the stacked midpoint slices of the leapfrog evolution of `f`.
    pub fn solve_forward(&self, f: &Image) -> Result<SpaceTimeField> {
        f.check(&self.spec)?;
        let mut out = vec![0.0; self.spec.voxel_count()];
        self.forward_into(f.values(), &mut out);
        SpaceTimeField::from_values(&self.spec, out)
    }

    /// `Sᵀ r`.
    pub fn solve_adjoint(&self, r: &SpaceTimeField) -> Result<Image> {
        r.check(&self.spec)?;
        let mut out = vec![0.0; self.spec.node_count()];
        self.adjoint_into(r.values(), &mut out);
        Image::from_values(&self.spec, out)
    }

    /// Integer-step states `u⁰ ..= u^{n_slices}`.
    pub fn leapfrog_states(&self, f: &Image) -> Result<Vec<Vec<f64>>> {
        f.check(&self.spec)?;
        let len = self.spec.node_count();
        let mut states = Vec::with_capacity(self.spec.n_slices() + 1);
        states.push(f.values().to_vec());
        let mut next = vec![0.0; len];
        self.step(&states[0], &mut next);
        states.push(next);
        for tau in 2..=self.spec.n_slices() {
            let mut next = vec![0.0; len];
            self.step(&states[tau - 1], &mut next);
            for (x, prev) in next.iter_mut().zip(&states[tau - 2]) {
                *x = 2.0 * *x - prev;
            }
            states.push(next);
        }
        Ok(states)
    }

    /// Dense `S`, column `j` being the forward solve of the `j`-th unit
    /// image. Intended for oracle checks on small grids.
    pub fn assemble_solution_matrix(&self) -> Mat<f64> {
        if self.spec.n() > ASSEMBLY_SOFT_LIMIT {
            log::warn!(
                "assembling a dense {}x{} solution matrix",
                self.spec.voxel_count(),
                self.spec.node_count()
            );
        }
        let cols = self.spec.node_count();
        let mut s = Mat::<f64>::zeros(self.spec.voxel_count(), cols);
        let mut unit = vec![0.0; cols];
        let mut col = vec![0.0; self.spec.voxel_count()];
        for j in 0..cols {
            unit[j] = 1.0;
            self.forward_into(&unit, &mut col);
            unit[j] = 0.0;
            for (i, v) in col.iter().enumerate() {
                s[(i, j)] = *v;
            }
        }
        s
    }

    /// `out = T u` on raw node vectors.
    pub(crate) fn step(&self, u: &[f64], out: &mut [f64]) {
        let n = self.spec.n();
        let c = self.coupling;
        let diag = 1.0 - 4.0 * c;
        for j in 0..n {
            let row = j * n;
            for i in 0..n {
                let k = row + i;
                let mut nb = 0.0;
                if i > 0 {
                    nb += u[k - 1];
                }
                if i + 1 < n {
                    nb += u[k + 1];
                }
                if j > 0 {
                    nb += u[k - n];
                }
                if j + 1 < n {
                    nb += u[k + n];
                }
                out[k] = diag * u[k] + c * nb;
            }
        }
    }

    pub(crate) fn forward_into(&self, f: &[f64], out: &mut [f64]) {
        let len = self.spec.node_count();
        let slices = self.spec.n_slices();
        debug_assert_eq!(f.len(), len);
        debug_assert_eq!(out.len(), len * slices);

        let mut prev = f.to_vec();
        let mut cur = vec![0.0; len];
        let mut next = vec![0.0; len];
        self.step(&prev, &mut cur);
        for (o, (a, b)) in out[..len].iter_mut().zip(prev.iter().zip(&cur)) {
            *o = 0.5 * (a + b);
        }
        for tau in 2..=slices {
            self.step(&cur, &mut next);
            for (x, p) in next.iter_mut().zip(&prev) {
                *x = 2.0 * *x - p;
            }
            let block = &mut out[(tau - 1) * len..tau * len];
            for (o, (a, b)) in block.iter_mut().zip(cur.iter().zip(&next)) {
                *o = 0.5 * (a + b);
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
    }

    /// Reverse sweep of the recursion. With `c_τ = (r_τ + r_{τ+1})/2` the
    /// direct sensitivity of state `u^τ`, the adjoint states satisfy
    /// `λ_τ = c_τ + 2Tλ_{τ+1} - λ_{τ+2}` for `τ ≥ 1` and
    /// `λ_0 = c_0 + Tλ_1 - λ_2`, and `Sᵀ r = λ_0` (`T` is symmetric).
    pub(crate) fn adjoint_into(&self, r: &[f64], out: &mut [f64]) {
        let len = self.spec.node_count();
        let slices = self.spec.n_slices();
        debug_assert_eq!(r.len(), len * slices);
        debug_assert_eq!(out.len(), len);

        let block = |tau: usize| -> Option<&[f64]> {
            (1..=slices)
                .contains(&tau)
                .then(|| &r[(tau - 1) * len..tau * len])
        };
        // λ_{τ+1}, λ_{τ+2}
        let mut l1 = vec![0.0; len];
        let mut l2 = vec![0.0; len];
        let mut tl = vec![0.0; len];
        for tau in (1..=slices).rev() {
            self.step(&l1, &mut tl);
            let mut lam = vec![0.0; len];
            for k in 0..len {
                lam[k] = 2.0 * tl[k] - l2[k];
            }
            for src in [block(tau), block(tau + 1)].into_iter().flatten() {
                for (l, v) in lam.iter_mut().zip(src) {
                    *l += 0.5 * v;
                }
            }
            l2 = std::mem::replace(&mut l1, lam);
        }
        self.step(&l1, &mut tl);
        let first = block(1).expect("at least one slice");
        for k in 0..len {
            out[k] = 0.5 * first[k] + tl[k] - l2[k];
        }
    }
}

impl LinearOperator for WavePropagator {
    fn nrows(&self) -> usize {
        self.spec.voxel_count()
    }

    fn ncols(&self) -> usize {
        self.spec.node_count()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        check_len(self.ncols(), x.len()).expect("wave operator input");
        self.forward_into(x, y);
    }

    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        check_len(self.nrows(), y.len()).expect("wave operator adjoint input");
        self.adjoint_into(y, x);
    }
}
