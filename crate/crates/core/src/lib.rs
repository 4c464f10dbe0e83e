//! Time-stepping for nonlinear time-fractional differential equations.
//!
//! Fractional linear multistep weights, starting and correction weights,
//! contour-quadrature fast convolution of the history sum, linear stability
//! tools, scalar and system solvers, and a 2D finite-volume front end.

pub mod cases;
pub mod contour;
pub mod corrections;
pub mod error;
pub mod fastconv;
pub mod history;
pub mod linalg;
pub mod mittag_leffler;
pub mod odesolve;
pub mod pde2d;
pub mod stability;
pub mod weights;

pub use error::{Error, Result};
pub use weights::{Family, GeneratingFunction, WeightTable};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
