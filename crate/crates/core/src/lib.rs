//! Numerical laboratory for phantom relaxation of average purity in
//! staircase random circuits.

pub mod asymptotics;
pub mod error;
pub mod exact;
pub mod haar;
pub mod kernel;
pub mod lognum;
pub mod model;
pub mod mp;
pub mod pseudospectrum;
pub mod real;
pub mod spectral;

pub use error::{Error, Result};
pub use lognum::LogNum;
pub use model::{make_params, ArithMode, ModelParams};
pub use mp::{with_precision, Mp};
pub use real::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
