//! Infectious-period laws, random infectivity functions and initial conditions.

mod duration;
mod infectivity;
mod initial;
mod moments;

pub use duration::DurationDistribution;
pub use infectivity::{InfectivityLaw, InfectivityRealization, InfectivityShape, Profile};
pub use initial::{AgeCell, AgeLaw, AgeQuadrature, Coupling, InitialCondition, InitialIndividual};
pub use moments::MomentTable;
