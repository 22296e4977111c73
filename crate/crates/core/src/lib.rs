//! Quantum imaginary time evolution on a dense statevector.
//!
//! Two engines are provided: standard QITE, which fits a unitary over an
//! operator domain by least squares at every Trotter step, and Fast QITE,
//! which removes one qubit of the acting Pauli string per reduction using
//! single-site three-parameter fits. Dense exact oracles, a cost ledger, a
//! diagonal-element sampler and a thermal Monte Carlo layer sit on top.
//!
//! Pauli strings are written leftmost character = qubit 0, and qubit 0 is the
//! least significant bit of a basis index.

pub mod cli;
pub mod error;
pub mod evolve;
pub mod fast;
pub mod ledger;
pub(crate) mod measure;
pub mod oracle;
pub mod pauli;
pub mod sampler;
pub mod standard;
pub mod state;
pub mod thermal;

pub use error::{QiteError, Result};
pub use evolve::{evolve, EvolutionConfig, EvolutionResult, Method, NormalizationMode, TrotterStepSolution};
pub use fast::{fast_qite_evolve, fast_trotter_step, reduce_once, solve_site, FastStepResult, SiteOrder};
pub use ledger::{scaling_fit, CostLedger, GrowthModel, ScalingFit};
pub use measure::ExpectationMode;
pub use pauli::{Pauli, PauliString, PauliTerm, Phase, WeightedPauliSum};
pub use sampler::{estimate_diagonal, estimate_diagonal_at, DiagonalEstimate, ProjectionMode};
pub use standard::{qite_evolve, DomainPolicy, OperatorDomain};
pub use state::StateVector;
