//! The composed forward model `A = H S`, phantoms, noise and error metrics.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::grid::{GridSpec, Image};
use crate::operator::{norm, LinearOperator};
use crate::raytrace::{DetectorMask, RaySystem};
use crate::wave::WavePropagator;

/// Coordinates within this distance of a box edge count as inside.
const BOX_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ForwardModel {
    propagator: WavePropagator,
    rays: RaySystem,
}

impl ForwardModel {
    pub fn new(spec: GridSpec, mask: &DetectorMask) -> Self {
        Self {
            propagator: WavePropagator::new(spec),
            rays: RaySystem::new(&spec, mask),
        }
    }

    pub fn from_parts(propagator: WavePropagator, rays: RaySystem) -> Result<Self> {
        check_len(propagator.spec().voxel_count(), rays.ncols())?;
        Ok(Self { propagator, rays })
    }

    pub fn spec(&self) -> &GridSpec {
        self.propagator.spec()
    }

    pub fn propagator(&self) -> &WavePropagator {
        &self.propagator
    }

    pub fn rays(&self) -> &RaySystem {
        &self.rays
    }

    /// `(m, n²)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.rays.m(), self.spec().node_count())
    }

    /// `A f = H (S f)`.
    pub fn forward_apply(&self, f: &Image) -> Result<Vec<f64>> {
        f.check(self.spec())?;
        Ok(self.apply(f.values()))
    }

    /// `Aᵀ b = Sᵀ (Hᵀ b)`.
    pub fn forward_adjoint(&self, b: &[f64]) -> Result<Image> {
        check_len(self.rays.m(), b.len())?;
        Image::from_values(self.spec(), self.apply_adjoint(b))
    }
}

impl LinearOperator for ForwardModel {
    fn nrows(&self) -> usize {
        self.rays.m()
    }

    fn ncols(&self) -> usize {
        self.spec().node_count()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut u = vec![0.0; self.spec().voxel_count()];
        self.propagator.forward_into(x, &mut u);
        self.rays.apply_into(&u, y);
    }

    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        let mut u = vec![0.0; self.spec().voxel_count()];
        self.rays.apply_adjoint_into(y, &mut u);
        self.propagator.adjoint_into(&u, x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Target `‖e‖ / ‖b_clean‖`.
    pub level: f64,
    pub seed: u64,
}

/// Adds Gaussian noise scaled to an exact relative level:
/// `e = level · ‖b_clean‖ · g / ‖g‖` with `g` i.i.d. standard normal.
/// Returns `(b_clean + e, e)`.
pub fn add_noise(b_clean: &[f64], spec: &NoiseSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(spec.level >= 0.0 && spec.level.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be >= 0, got {}",
            spec.level
        )));
    }
    if spec.level == 0.0 {
        return Ok((b_clean.to_vec(), vec![0.0; b_clean.len()]));
    }
    let bnorm = norm(b_clean);
    if bnorm == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot scale noise to a relative level of zero data".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let g: Vec<f64> = (0..b_clean.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let scale = spec.level * bnorm / norm(&g);
    let e: Vec<f64> = g.iter().map(|v| v * scale).collect();
    let b = b_clean.iter().zip(&e).map(|(x, y)| x + y).collect();
    Ok((b, e))
}

/// `‖f̂ − f_true‖ / ‖f_true‖`.
pub fn relative_error(fhat: &[f64], ftrue: &[f64]) -> Result<f64> {
    check_len(ftrue.len(), fhat.len())?;
    let denom = norm(ftrue);
    if denom == 0.0 {
        return Err(Error::InvalidArgument(
            "relative error against a zero image".into(),
        ));
    }
    let diff: f64 = fhat
        .iter()
        .zip(ftrue)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    /// Isolated single-pixel spikes.
    Dots,
    /// Axis-aligned one-pixel-wide lines spanning the support box.
    Lines,
}

/// Axis-aligned rectangle in spatial coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl SupportBox {
    pub fn square(half_width: f64) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }

    fn contains_x(&self, x: f64) -> bool {
        x >= self.x_min - BOX_SLACK && x <= self.x_max + BOX_SLACK
    }

    fn contains_y(&self, y: f64) -> bool {
        y >= self.y_min - BOX_SLACK && y <= self.y_max + BOX_SLACK
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.contains_x(p[0]) && self.contains_y(p[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub count: usize,
    pub support: SupportBox,
    pub amplitude: f64,
    pub seed: u64,
}

/// Random dots or lines inside the support box; deterministic in the seed.
///
/// Dots occupy `count` distinct nodes. Lines are `count` distinct rows or
/// columns of the box (orientation drawn per line), each clipped to the box.
pub fn make_phantom(spec: &PhantomSpec, grid: &GridSpec) -> Result<Image> {
    let e = grid.extent() + BOX_SLACK;
    let b = &spec.support;
    if b.x_min > b.x_max || b.y_min > b.y_max {
        return Err(Error::InvalidArgument("empty phantom support box".into()));
    }
    if b.x_min < -e || b.x_max > e || b.y_min < -e || b.y_max > e {
        return Err(Error::InvalidArgument(
            "phantom support box exceeds the domain".into(),
        ));
    }
    let mut img = Image::zeros(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cols: Vec<usize> = (0..grid.n())
        .filter(|&i| b.contains_x(grid.coord(i)))
        .collect();
    let rows: Vec<usize> = (0..grid.n())
        .filter(|&j| b.contains_y(grid.coord(j)))
        .collect();
    match spec.kind {
        PhantomKind::Dots => {
            let nodes: Vec<usize> = rows
                .iter()
                .flat_map(|&j| cols.iter().map(move |&i| (i, j)))
                .map(|(i, j)| grid.index(i, j))
                .collect();
            if spec.count > nodes.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} dots requested but the support holds {} nodes",
                    spec.count,
                    nodes.len()
                )));
            }
            for k in sample(&mut rng, nodes.len(), spec.count) {
                img.values_mut()[nodes[k]] = spec.amplitude;
            }
        }
        PhantomKind::Lines => {
            let available = rows.len() + cols.len();
            if spec.count > available {
                return Err(Error::InvalidArgument(format!(
                    "{} lines requested but the support holds {available}",
                    spec.count
                )));
            }
            let mut used_rows = vec![false; rows.len()];
            let mut used_cols = vec![false; cols.len()];
            let mut placed = 0;
            while placed < spec.count {
                let horizontal: bool = rng.random();
                let (pool, used) = if horizontal {
                    (&rows, &mut used_rows)
                } else {
                    (&cols, &mut used_cols)
                };
                let free: Vec<usize> = (0..pool.len()).filter(|&k| !used[k]).collect();
                if free.is_empty() {
                    continue;
                }
                let k = free[rng.random_range(0..free.len())];
                used[k] = true;
                let line = pool[k];
                let values = img.values_mut();
                if horizontal {
                    for &i in &cols {
                        values[grid.index(i, line)] = spec.amplitude;
                    }
                } else {
                    for &j in &rows {
                        values[grid.index(line, j)] = spec.amplitude;
                    }
                }
                placed += 1;
            }
        }
    }
    Ok(img)
}
