//! Solution-graph analysis of ground-state sampling bias in quantum annealing.
//!
//! The pipeline is: an [`IsingModel`] and a stoquastic [`DriverSpec`] give a
//! degenerate [`GroundManifold`]; [`perturb::resolve`] builds the first- or
//! second-order [`SolutionGraph`]; [`metrics`] turns its Perron vectors into
//! predicted sampling probabilities; [`oracle`] checks them against exact
//! small-system dynamics.

pub mod dot;
pub mod driver;
pub mod error;
pub mod fixtures;
pub mod groundset;
pub mod metrics;
pub mod model;
pub mod nqueens;
pub mod oracle;
pub mod perturb;
pub mod spin;
pub mod sqa;
pub mod transforms;

pub use driver::DriverSpec;
pub use error::{Error, ErrorClass, Result};
pub use groundset::{GroundManifold, ManifoldSource};
pub use metrics::FairnessReport;
pub use model::{Coeff, IsingModel};
pub use perturb::{Order, OrderPolicy, SolutionGraph};
pub use spin::SpinConfig;
