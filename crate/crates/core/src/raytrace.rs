//! Cone-beam discretization of the light ray transform.
//!
//! Every node of the `t = 0` plane is a point source and every active node
//! of the `t = t_final` plane a receiver. A source and receiver are joined by
//! a null ray when their spatial distance is within `dx/2` of `t_final`. The
//! ray `x_s + t·v` is sampled at the slice midpoint times and each sample is
//! deposited bilinearly with quadrature weight `dt`, so row `r` of `H`
//! approximates `∫₀ᵀ u(t, x_s + t v) dt`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{check_len, Error, Result};
use crate::grid::{GridSpec, SpaceTimeField, Weights};
use crate::operator::LinearOperator;

/// Active receivers on the detector plane.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorMask {
    active: Vec<bool>,
    label: String,
}

impl DetectorMask {
    /// Every node of the detector plane.
    pub fn full(spec: &GridSpec) -> Self {
        Self {
            active: vec![true; spec.node_count()],
            label: "full".into(),
        }
    }

    /// The centered `k × k` block of nodes; `k` must be odd and at most `n`.
    pub fn centered(spec: &GridSpec, k: usize) -> Result<Self> {
        let n = spec.n();
        if n % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "centered detector blocks need an odd grid size, got n = {n}"
            )));
        }
        if k == 0 || k % 2 == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "detector block must be odd and at most {n}, got {k}"
            )));
        }
        let c = n / 2;
        let h = k / 2;
        let mut active = vec![false; spec.node_count()];
        for j in c - h..=c + h {
            for i in c - h..=c + h {
                active[spec.index(i, j)] = true;
            }
        }
        Ok(Self {
            active,
            label: format!("{k}x{k}"),
        })
    }

    /// Parses `full` or `KxK`.
    pub fn from_label(spec: &GridSpec, label: &str) -> Result<Self> {
        let label = label.trim();
        if label.eq_ignore_ascii_case("full") {
            return Ok(Self::full(spec));
        }
        let parsed = label.split_once(['x', 'X']).and_then(|(a, b)| {
            Some((
                a.trim().parse::<usize>().ok()?,
                b.trim().parse::<usize>().ok()?,
            ))
        });
        match parsed {
            Some((a, b)) if a == b => {
                if a == spec.n() {
                    let mut m = Self::full(spec);
                    m.label = label.to_string();
                    Ok(m)
                } else {
                    Self::centered(spec, a)
                }
            }
            _ => Err(Error::InvalidArgument(format!(
                "unknown detector mask `{label}` (expected `full` or `KxK`)"
            ))),
        }
    }

    /// Arbitrary mask; at least one node must be active.
    pub fn from_active(
        spec: &GridSpec,
        active: Vec<bool>,
        label: impl Into<String>,
    ) -> Result<Self> {
        check_len(spec.node_count(), active.len())?;
        if !active.iter().any(|&a| a) {
            return Err(Error::InvalidArgument(
                "detector mask has no active node".into(),
            ));
        }
        Ok(Self {
            active,
            label: label.into(),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.active[idx]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Lattice offsets `(di, dj)` whose length is within `tol` of `radius`,
/// ordered so that adding them to a source visits receivers in increasing
/// flat index.
pub(crate) fn ring_offsets(spec: &GridSpec, radius: f64, tol: f64) -> Vec<(isize, isize)> {
    let reach = ((radius + tol) / spec.dx()).ceil() as isize;
    let mut out = Vec::new();
    for dj in -reach..=reach {
        for di in -reach..=reach {
            let d = spec.dx() * ((di * di + dj * dj) as f64).sqrt();
            if (d - radius).abs() <= tol {
                out.push((di, dj));
            }
        }
    }
    out
}

pub(crate) fn shift(spec: &GridSpec, idx: usize, (di, dj): (isize, isize)) -> Option<usize> {
    let n = spec.n() as isize;
    let (i, j) = spec.node(idx);
    let (i2, j2) = (i as isize + di, j as isize + dj);
    ((0..n).contains(&i2) && (0..n).contains(&j2)).then(|| spec.index(i2 as usize, j2 as usize))
}

/// One sample of a ray: the slice it falls in and its bilinear weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSample {
    /// 1-based slice index.
    pub slice: usize,
    pub weights: Weights,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub source_index: usize,
    pub detector_index: usize,
    /// Unit spatial direction `(x_d - x_s) / |x_d - x_s|`.
    pub direction: [f64; 2],
}

impl Ray {
    pub fn new(spec: &GridSpec, source_index: usize, detector_index: usize) -> Self {
        let s = spec.position(source_index);
        let d = spec.position(detector_index);
        let (dx, dy) = (d[0] - s[0], d[1] - s[1]);
        let len = dx.hypot(dy);
        Self {
            source_index,
            detector_index,
            direction: [dx / len, dy / len],
        }
    }

    pub fn position(&self, spec: &GridSpec, t: f64) -> [f64; 2] {
        let s = spec.position(self.source_index);
        [s[0] + t * self.direction[0], s[1] + t * self.direction[1]]
    }

    /// Samples at the slice midpoint times; samples falling outside the
    /// grid are dropped.
    pub fn samples(&self, spec: &GridSpec) -> Vec<SliceSample> {
        (1..=spec.n_slices())
            .filter_map(|tau| {
                let w = spec.bilinear_weights(self.position(spec, spec.slice_time(tau)));
                (!w.is_empty()).then_some(SliceSample {
                    slice: tau,
                    weights: w,
                })
            })
            .collect()
    }

    /// True when no sample of the ray leaves the grid.
    pub fn is_interior(&self, spec: &GridSpec) -> bool {
        (1..=spec.n_slices()).all(|tau| {
            !spec
                .bilinear_weights(self.position(spec, spec.slice_time(tau)))
                .is_empty()
        })
    }
}

/// Rays for every (source, active detector) pair at null distance, grouped
/// by source in flat order and, within a source, by detector index.
pub fn enumerate_rays(spec: &GridSpec, mask: &DetectorMask) -> Vec<Ray> {
    check_len(spec.node_count(), mask.active.len()).expect("detector mask on a different grid");
    let offsets = ring_offsets(spec, spec.t_final(), 0.5 * spec.dx());
    let mut rays = Vec::new();
    for source in 0..spec.node_count() {
        for &off in &offsets {
            if let Some(det) = shift(spec, source, off) {
                if mask.active[det] {
                    rays.push(Ray::new(spec, source, det));
                }
            }
        }
    }
    rays
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn empty(ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            debug_assert!(c < self.ncols);
            self.cols.push(c as u32);
            self.vals.push(v);
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.vals[self.row_ptr[r]..self.row_ptr[r + 1]].iter().sum()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = 0.0;
            for k in a..b {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yr = acc;
        }
    }

    pub fn mul_transpose_vec(&self, y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                x[self.cols[k] as usize] += self.vals[k] * yr;
            }
        }
    }

    /// Plain-text triples: a `m n_cols nnz` header then `row col value`
    /// lines with 17 significant digits.
    pub fn write_triples<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.nrows(), self.ncols, self.nnz())?;
        let mut line = String::new();
        for r in 0..self.nrows() {
            for (c, v) in self.row(r) {
                line.clear();
                let _ = writeln!(line, "{r} {c} {v:.16e}");
                w.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads the triple format. Entries must be ordered by row.
    pub fn read_triples<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty triple file".into()))??;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad header `{header}`")))
            })
            .collect::<Result<_>>()?;
        let [m, ncols, nnz] = head[..] else {
            return Err(Error::Parse(format!("bad header `{header}`")));
        };
        let mut out = Self::empty(ncols);
        out.cols.reserve(nnz);
        out.vals.reserve(nnz);
        out.row_ptr = vec![0; m + 1];
        let mut current = 0usize;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let bad = || Error::Parse(format!("bad triple `{line}`"));
            let row: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let col: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let val: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            if row < current || row >= m || col >= ncols {
                return Err(bad());
            }
            while current < row {
                current += 1;
                out.row_ptr[current] = out.cols.len();
            }
            out.cols.push(col as u32);
            out.vals.push(val);
        }
        while current < m {
            current += 1;
            out.row_ptr[current] = out.cols.len();
        }
        if out.nnz() != nnz {
            return Err(Error::Parse(format!(
                "header promised {nnz} entries, found {}",
                out.nnz()
            )));
        }
        Ok(out)
    }
}

/// Enumerated rays together with the observation matrix `H`.
#[derive(Debug, Clone)]
pub struct RaySystem {
    rays: Vec<Ray>,
    matrix: CsrMatrix,
    /// Rays per source, `m_i`, over all `N` sources.
    per_source: Vec<usize>,
}

/// Assembles `H`: row `r` carries `dt · w` at column `(τ-1)·n² + k` for every
/// bilinear weight `w` of node `k` in slice `τ` of `rays[r]`.
pub fn build_ray_matrix(spec: &GridSpec, rays: Vec<Ray>) -> RaySystem {
    let n2 = spec.node_count();
    let mut matrix = CsrMatrix::empty(spec.voxel_count());
    let mut per_source = vec![0usize; n2];
    for ray in &rays {
        per_source[ray.source_index] += 1;
        let samples = ray.samples(spec);
        matrix.push_row(samples.iter().flat_map(|s| {
            let base = (s.slice - 1) * n2;
            let mut w = s.weights.clone();
            w.sort_unstable_by_key(|p| p.0);
            w.into_iter().map(move |(k, wt)| (base + k, spec.dt() * wt))
        }));
    }
    RaySystem {
        rays,
        matrix,
        per_source,
    }
}

impl RaySystem {
    pub fn new(spec: &GridSpec, mask: &DetectorMask) -> Self {
        build_ray_matrix(spec, enumerate_rays(spec, mask))
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Total number of observations `m = Σ m_i`.
    pub fn m(&self) -> usize {
        self.rays.len()
    }

    pub fn per_source(&self) -> &[usize] {
        &self.per_source
    }

    pub fn ray_apply(&self, u: &SpaceTimeField) -> Result<Vec<f64>> {
        check_len(self.matrix.ncols(), u.values().len())?;
        Ok(self.apply(u.values()))
    }

    pub fn ray_apply_adjoint(&self, spec: &GridSpec, b: &[f64]) -> Result<SpaceTimeField> {
        check_len(self.m(), b.len())?;
        check_len(self.matrix.ncols(), spec.voxel_count())?;
        SpaceTimeField::from_values(spec, self.apply_adjoint(b))
    }
}

impl LinearOperator for RaySystem {
    fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.mul_vec(x, y)
    }

    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.matrix.mul_transpose_vec(y, x)
    }
}
