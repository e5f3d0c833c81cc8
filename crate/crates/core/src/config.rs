//! Experiment configuration: a flat `key = value` file, `#` starts a comment.
//!
//! ```text
//! n = 51
//! extent = 7
//! t_final = 2
//! n_slices = 40
//! mask = 7x7            # full | KxK
//! phantom = dots        # dots | lines
//! phantom_count = 20
//! phantom_box = -3,3,-3,3
//! noise_level = 0.02
//! method = lsqr         # ls | lsqr | fista | igmrf
//! lambda_schedule = exp # exp | comma-separated list
//! ```
//!
//! Every key is optional; unknown keys are rejected. [`ExperimentConfig::to_text`]
//! writes every key, and parsing its output gives back the same config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::MemoryBudget;
use crate::model::{NoiseSpec, PhantomKind, PhantomSpec, SupportBox};
use crate::raytrace::DetectorMask;
use crate::solvers::LambdaSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ls,
    Lsqr,
    Fista,
    Igmrf,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ls => "ls",
            Method::Lsqr => "lsqr",
            Method::Fista => "fista",
            Method::Igmrf => "igmrf",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" => Ok(Method::Ls),
            "lsqr" => Ok(Method::Lsqr),
            "fista" => Ok(Method::Fista),
            "igmrf" => Ok(Method::Igmrf),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iters: usize,
    /// FISTA weight on `‖f‖₁`.
    pub lambda: f64,
    pub lambda_schedule: LambdaSchedule,
    pub beta: f64,
    pub outer_iters: usize,
    pub cg_max: usize,
    /// Relative residual at which inner CG stops.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub extent: f64,
    pub t_final: f64,
    pub n_slices: usize,
    pub mask: String,
    pub phantom: PhantomSpec,
    pub noise: NoiseSpec,
    pub solver: SolverConfig,
    pub out_dir: PathBuf,
    pub keep_iterates: bool,
    pub write_ray_matrix: bool,
    pub memory_budget_mb: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 51,
            extent: 7.0,
            t_final: 2.0,
            n_slices: 40,
            mask: "full".into(),
            phantom: PhantomSpec {
                kind: PhantomKind::Dots,
                count: 20,
                support: SupportBox::square(3.0),
                amplitude: 1.0,
                seed: 1,
            },
            noise: NoiseSpec {
                level: 0.02,
                seed: 2,
            },
            solver: SolverConfig {
                method: Method::Lsqr,
                max_iters: 100,
                lambda: 6.6e-5,
                lambda_schedule: LambdaSchedule::Exponential,
                beta: 1e-3,
                outer_iters: 5,
                cg_max: 100,
                tol: 1e-8,
            },
            out_dir: PathBuf::from("out"),
            keep_iterates: false,
            write_ray_matrix: false,
            memory_budget_mb: 1024,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|t| parse(key, t.trim())).collect()
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.extent, self.t_final, self.n_slices)
    }

    pub fn detector_mask(&self, grid: &GridSpec) -> Result<DetectorMask> {
        DetectorMask::from_label(grid, &self.mask)
    }

    pub fn budget(&self) -> MemoryBudget {
        MemoryBudget(self.memory_budget_mb.saturating_mul(1 << 20))
    }

    /// Checks every derived object can be built.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid().map_err(|e| Error::Config(e.to_string()))?;
        self.detector_mask(&grid)
            .map_err(|e| Error::Config(e.to_string()))?;
        let s = &self.solver;
        let positive = [
            ("lambda", s.lambda >= 0.0),
            ("beta", s.beta > 0.0),
            ("tol", s.tol > 0.0),
        ];
        for (key, ok) in positive {
            if !ok {
                return Err(Error::Config(format!("{key} out of range")));
            }
        }
        if s.outer_iters == 0 {
            return Err(Error::Config("outer_iters must be >= 1".into()));
        }
        if let LambdaSchedule::Explicit(v) = &s.lambda_schedule {
            if v.len() < s.outer_iters || v.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Config(format!(
                    "lambda_schedule needs {} positive entries",
                    s.outer_iters
                )));
            }
        }
        if !(self.noise.level >= 0.0) {
            return Err(Error::Config("noise_level must be >= 0".into()));
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse(key, value)?,
            "extent" => self.extent = parse(key, value)?,
            "t_final" => self.t_final = parse(key, value)?,
            "n_slices" => self.n_slices = parse(key, value)?,
            "mask" => self.mask = value.to_string(),
            "phantom" => {
                self.phantom.kind = match value {
                    "dots" => PhantomKind::Dots,
                    "lines" => PhantomKind::Lines,
                    _ => return Err(Error::Config(format!("unknown phantom {value:?}"))),
                }
            }
            "phantom_count" => self.phantom.count = parse(key, value)?,
            "phantom_box" => {
                let v = parse_list(key, value)?;
                let [x_min, x_max, y_min, y_max] = v[..] else {
                    return Err(Error::Config(
                        "phantom_box needs x_min,x_max,y_min,y_max".into(),
                    ));
                };
                self.phantom.support = SupportBox {
                    x_min,
                    x_max,
                    y_min,
                    y_max,
                };
            }
            "phantom_amplitude" => self.phantom.amplitude = parse(key, value)?,
            "phantom_seed" => self.phantom.seed = parse(key, value)?,
            "noise_level" => self.noise.level = parse(key, value)?,
            "noise_seed" => self.noise.seed = parse(key, value)?,
            "method" => self.solver.method = value.parse()?,
            "max_iters" => self.solver.max_iters = parse(key, value)?,
            "lambda" => self.solver.lambda = parse(key, value)?,
            "lambda_schedule" => {
                self.solver.lambda_schedule = if value == "exp" {
                    LambdaSchedule::Exponential
                } else {
                    LambdaSchedule::Explicit(parse_list(key, value)?)
                }
            }
            "beta" => self.solver.beta = parse(key, value)?,
            "outer_iters" => self.solver.outer_iters = parse(key, value)?,
            "cg_max" => self.solver.cg_max = parse(key, value)?,
            "tol" => self.solver.tol = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "keep_iterates" => self.keep_iterates = parse_bool(key, value)?,
            "write_ray_matrix" => self.write_ray_matrix = parse_bool(key, value)?,
            "memory_budget_mb" => self.memory_budget_mb = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.phantom;
        let v = &self.solver;
        let b = &p.support;
        let kind = match p.kind {
            PhantomKind::Dots => "dots",
            PhantomKind::Lines => "lines",
        };
        let schedule = match &v.lambda_schedule {
            LambdaSchedule::Exponential => "exp".to_string(),
            LambdaSchedule::Explicit(l) => join(l),
        };
        let lines = [
            ("n", self.n.to_string()),
            ("extent", self.extent.to_string()),
            ("t_final", self.t_final.to_string()),
            ("n_slices", self.n_slices.to_string()),
            ("mask", self.mask.clone()),
            ("phantom", kind.to_string()),
            ("phantom_count", p.count.to_string()),
            ("phantom_box", join(&[b.x_min, b.x_max, b.y_min, b.y_max])),
            ("phantom_amplitude", p.amplitude.to_string()),
            ("phantom_seed", p.seed.to_string()),
            ("noise_level", self.noise.level.to_string()),
            ("noise_seed", self.noise.seed.to_string()),
            ("method", v.method.as_str().to_string()),
            ("max_iters", v.max_iters.to_string()),
            ("lambda", v.lambda.to_string()),
            ("lambda_schedule", schedule),
            ("beta", v.beta.to_string()),
            ("outer_iters", v.outer_iters.to_string()),
            ("cg_max", v.cg_max.to_string()),
            ("tol", v.tol.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("keep_iterates", self.keep_iterates.to_string()),
            ("write_ray_matrix", self.write_ray_matrix.to_string()),
            ("memory_budget_mb", self.memory_budget_mb.to_string()),
        ];
        for (k, val) in lines {
            let _ = writeln!(s, "{k} = {val}");
        }
        s
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", k + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", k + 1)))?;
        }
        Ok(cfg)
    }
}
