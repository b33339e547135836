//! Warped time-frequency systems.

pub mod admissibility;
pub mod coeffspaces;
pub mod covering;
pub mod kernels;
pub mod io;
pub mod presets;
pub mod signals;
pub mod error;
pub mod quad;
pub mod transform;
pub mod util;
pub mod warpcore;

pub use error::{Error, Result};
pub use warpcore::{ControlWeight, Domain, Mollifier, RadialComponent, SigmaFamily, Warp, WarpKind};
