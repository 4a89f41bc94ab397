//! Imitation dynamics for population games.
//!
//! Populations are points of the unit simplex. Revision protocols built from
//! a selection step and an adoption step generate vector fields through the
//! mean dynamic, which are integrated and then inspected by the checkers in
//! [`analysis`].

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod games;
pub mod integrate;
pub mod protocols;
pub mod simplex;
pub mod trajectory;
pub mod unilateral;

pub use error::{Error, Result};
pub use games::{HypnodiskParams, MatrixGame, PayoffFunction};
pub use protocols::{AdoptionRule, RevisionProtocol, SelectionRule};
pub use simplex::PopulationState;
pub use trajectory::Trajectory;
pub use dynamics::{FieldKind, VectorField};
pub use integrate::{Controller, IntegratorConfig, Method};
pub use analysis::{ConditionReport, Verdict};
