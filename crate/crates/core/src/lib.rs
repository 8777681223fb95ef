//! Facility location with congestion: cost families, flows, equilibrium
//! routing, the sparse and merge solvers, exact oracles and generators.

pub mod costfn;
pub mod equilibrium;
pub mod error;
pub mod flow;
pub mod generate;
pub mod graph;
pub mod instance;
pub mod merge;
pub mod oracle;
pub mod reduction;
pub mod rng;
pub mod sparse;

pub use costfn::{CostFn, FnClass};
pub use error::{Error, Result};
pub use flow::{EdgeFlow, PathAssignment, PathFlow, Solution};
pub use graph::Path;
pub use instance::{Edge, FacilityCosts, Instance, Source};
