//! Exact simulation of the SIR epidemic with infection-age dependent random
//! infectivity, its deterministic large-population limit, and the Gaussian
//! fluctuation limit around it.
//!
//! * [`model`]: duration laws, infectivity laws, initial conditions.
//! * [`agepop`]: the finite measure of infection ages.
//! * [`abm`]: event-driven individual-based simulation.
//! * [`lln`]: Volterra solver for the limit and the limit age measure.
//! * [`clt`]: Gaussian drivers and the linear fluctuation equations.
//! * [`harness`]: configuration, replication sweeps and the acceptance suite.

pub mod abm;
pub mod agepop;
pub mod clt;
pub mod error;
pub mod harness;
pub mod lln;
pub mod model;
pub mod quad;
pub mod rng;

pub use error::{Error, Result};
