//! Age-structured SEQIR epidemic model with separable mixing: transient
//! dynamics, steady states, the basic reproduction number, Lyapunov checks
//! and optimal age-targeted vaccination.

pub mod demography;
pub mod error;
pub mod format;
pub mod grid;
pub mod lyapunov;
mod march;
pub mod scenario;
pub mod steady;
pub mod transient;
pub mod vaccination;

pub use demography::Demography;
pub use error::{Error, Result};
pub use grid::{integrate, AgeGrid, Profile};
pub use steady::{R0Breakdown, SteadyState};
pub use transient::{EpiParams, EpiState, Trajectory};
