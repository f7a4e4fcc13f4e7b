//! Simulation and certification toolkit for one-sided device-independent
//! self-testing with a trusted Alice and an untrusted Bob.
//!
//! * [`qmath`]: dense complex linear algebra, states, observables, measurement.
//! * [`selftest`]: condition norms, closeness bounds, the extraction isometry.
//! * [`steergame`]: K-round steering games, adversarial provers, count formulas.
//! * [`rigidity`]: sequential-game strategies, strategy distance, guessing strategies.
//! * [`steerability`]: total-steerability checks and the maximally entangled family.
//! * [`vdqcprep`]: verified state preparation with abort logic and blindness audit.

pub mod error;
pub mod qmath;
pub mod selftest;
pub mod rigidity;
pub mod steerability;
pub mod steergame;
pub mod vdqcprep;

pub use error::{Error, Result};
