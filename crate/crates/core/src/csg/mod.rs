//! 2D and 3D constructive solid geometry: expressions, the rendering REPL,
//! IoU scoring and the MDP domain adapter.

mod domain;
mod expr;
mod grid;
mod render;

pub use domain::{action_space_size, csg_repl, satisfies, CsgConfig, CsgDomain, CsgEntry, CsgScope};
pub use expr::{Angle, CsgExpr, Dim};
pub use grid::{iou, BitGrid};
pub use render::{render, render2d, render3d, render_primitive};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsgError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("grid dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("value {value} is not on the {slot} lattice")]
    OffLattice { slot: String, value: u8 },
}
