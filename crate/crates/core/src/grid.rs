//! Space-time mesh, flat index maps and bilinear interpolation.
//!
//! Nodes are flattened row-major with `x` varying fastest: node `(i, j)` at
//! `(x_i, y_j)` has flat index `j * n + i`. A Kronecker factor `I ⊗ M` then
//! acts along `x` and `M ⊗ I` along `y`.

use arrayvec::ArrayVec;

use crate::error::{check_len, Error, Result};

/// Distance (in units of the grid spacing) under which a coordinate is
/// snapped onto the nearest grid line.
const SNAP: f64 = 1e-9;

/// Up to four `(flat index, weight)` pairs with nonzero weight.
pub type Weights = ArrayVec<(usize, f64), 4>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    extent: f64,
    t_final: f64,
    n_slices: usize,
    dx: f64,
    dt: f64,
    courant: f64,
}

impl GridSpec {
    /// Builds the mesh `[-extent, extent]² × [0, t_final]` with `n` nodes per
    /// axis and `n_slices` time steps.
    ///
    /// Fails when the leapfrog scheme would be unstable, i.e. `σ·√2 > 1`
    /// with `σ = dt/dx`.
    pub fn new(n: usize, extent: f64, t_final: f64, n_slices: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need n >= 3, got {n}")));
        }
        if n_slices < 1 {
            return Err(Error::InvalidGrid("need at least one time slice".into()));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "extent must be positive, got {extent}"
            )));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "t_final must be positive, got {t_final}"
            )));
        }
        let dx = 2.0 * extent / (n - 1) as f64;
        let dt = t_final / n_slices as f64;
        let courant = dt / dx;
        let value = courant * std::f64::consts::SQRT_2;
        if value > 1.0 {
            return Err(Error::Cfl { courant, value });
        }
        Ok(Self {
            n,
            extent,
            t_final,
            n_slices,
            dx,
            dt,
            courant,
        })
    }

    /// The 51×51, `[-7, 7]²`, `t ∈ [0, 2]`, 40-slice configuration.
    pub fn reference() -> Self {
        Self::new(51, 7.0, 2.0, 40).expect("reference grid satisfies CFL")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `σ = γ = dt/dx`.
    pub fn courant(&self) -> f64 {
        self.courant
    }

    /// Number of spatial nodes, `n²`.
    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    /// Number of space-time voxels, `n²·n_slices`.
    pub fn voxel_count(&self) -> usize {
        self.node_count() * self.n_slices
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.dx
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        j * self.n + i
    }

    pub fn node(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    pub fn position(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.node(idx);
        [self.coord(i), self.coord(j)]
    }

    /// Time of stored slice `tau` (1-based): the midpoint `(tau - 1/2)·dt`.
    pub fn slice_time(&self, tau: usize) -> f64 {
        (tau as f64 - 0.5) * self.dt
    }

    /// Bilinear interpolation weights of `point` on the node lattice.
    ///
    /// Inside the hull `[-extent, extent]²` the weights are nonnegative and
    /// sum to one; zero weights are omitted so a point on a node yields a
    /// single pair. Outside the hull the result is empty.
    pub fn bilinear_weights(&self, point: [f64; 2]) -> Weights {
        let mut out = Weights::new();
        let (Some((i0, fx)), Some((j0, fy))) = (self.locate(point[0]), self.locate(point[1]))
        else {
            return out;
        };
        let corners = [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ];
        for (di, dj, w) in corners {
            if w > 0.0 {
                out.push((self.index(i0 + di, j0 + dj), w));
            }
        }
        out
    }

    /// Cell index and fractional offset along one axis, or `None` when the
    /// coordinate lies outside the grid.
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let mut g = (x + self.extent) / self.dx;
        let nearest = g.round();
        if (g - nearest).abs() < SNAP {
            g = nearest;
        }
        let last = (self.n - 1) as f64;
        if !(0.0..=last).contains(&g) {
            return None;
        }
        let cell = (g.floor() as usize).min(self.n - 2);
        Some((cell, g - cell as f64))
    }
}

/// An initial-state image: `n²` values in flat node order.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    n: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn zeros(spec: &GridSpec) -> Self {
        Self {
            n: spec.n(),
            values: vec![0.0; spec.node_count()],
        }
    }

    pub fn from_values(spec: &GridSpec, values: Vec<f64>) -> Result<Self> {
        check_len(spec.node_count(), values.len())?;
        Ok(Self {
            n: spec.n(),
            values,
        })
    }

    /// An `n×n` image without a full grid description.
    pub fn square(n: usize, values: Vec<f64>) -> Result<Self> {
        check_len(n * n, values.len())?;
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub(crate) fn check(&self, spec: &GridSpec) -> Result<()> {
        check_len(spec.node_count(), self.values.len())
    }
}

/// Evolved field: `n_slices` stacked images, slice-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    n: usize,
    n_slices: usize,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(spec: &GridSpec) -> Self {
        Self {
            n: spec.n(),
            n_slices: spec.n_slices(),
            values: vec![0.0; spec.voxel_count()],
        }
    }

    pub fn from_values(spec: &GridSpec, values: Vec<f64>) -> Result<Self> {
        check_len(spec.voxel_count(), values.len())?;
        Ok(Self {
            n: spec.n(),
            n_slices: spec.n_slices(),
            values,
        })
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Slice `tau`, 1-based to match slice times `(tau - 1/2)·dt`.
    pub fn slice(&self, tau: usize) -> &[f64] {
        let len = self.n * self.n;
        &self.values[(tau - 1) * len..tau * len]
    }

    pub(crate) fn check(&self, spec: &GridSpec) -> Result<()> {
        check_len(spec.voxel_count(), self.values.len())
    }
}
