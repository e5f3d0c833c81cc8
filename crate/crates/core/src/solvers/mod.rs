//! Reconstruction algorithms. Every iterative solver starts from the zero
//! image and reports a [`SolveHistory`].

mod cg;
mod direct;
mod fista;
mod history;
mod igmrf;
mod lsqr;

pub use cg::{cg_spd, CgOutcome};
pub use direct::{solve_dense, solve_ls_direct, solve_normal_equations, LsMethod, LsSolution};
pub use fista::{fista_l1, soft_threshold, FistaConfig};
pub use history::{HistoryRecorder, SolveHistory};
pub use igmrf::{
    edge_preserving_reconstruct, igmrf_weights, DifferenceOperators, EdgePreservingConfig,
    EdgePreservingResult, LambdaSchedule, OuterStep, PrecisionOperator,
};
pub use lsqr::{lsqr, LsqrConfig};
