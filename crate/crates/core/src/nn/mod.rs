//! Minimal neural-network toolkit: parameters, Adam, checkpoints and a
//! reverse-mode tape.

mod params;
mod tape;

pub use params::*;
pub use tape::*;
