//! Simulation engine for counterdiabatic quantum computing.
//!
//! The crate builds adiabatic interpolations `H_ad(λ) = (1−λ) H_I + λ H_F`
//! for several optimization families, adds approximate counterdiabatic
//! terms from the nested-commutator expansion of the adiabatic gauge
//! potential, propagates the Schrödinger equation exactly on dense
//! state vectors and measures coherence, energy fluctuation, speed-limit
//! time and success probability along the way.

pub mod agp;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod pauli;
pub mod problems;
pub mod schedule;

#[cfg(test)]
mod properties;

pub use num_complex::Complex64 as C64;

pub use agp::{AgpExpansion, DenseCd, LambdaPoly};
pub use error::{CdqcError, Result};
pub use experiment::{run_experiment, ExperimentConfig, ResultRow};
pub use pauli::{PauliLetter, PauliOperator, PauliString};
pub use problems::{Family, ProblemInstance, ProblemParams};
pub use schedule::{Regime, RegimeReport, Schedule};
