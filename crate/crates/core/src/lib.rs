//! Periodically driven resonant-level Otto engine.
//!
//! The dot and two discretized wideband leads are propagated at the level of
//! the one-particle correlator under the driven Liouville–von-Neumann
//! equation, and each cycle is reduced to a thermodynamic ledger: work,
//! heats, the 𝒜-term that closes the first law, efficiencies and entropy
//! production.

pub mod config;
pub mod correlator;
pub mod error;
pub mod io;
pub mod ledger;
pub mod model;
pub mod propagate;
pub mod protocol;
pub mod regime;
pub mod study;

pub use config::RunConfig;
pub use correlator::Correlator;
pub use error::{Error, Result};
pub use ledger::CycleRecord;
pub use model::{BlockHamiltonian, CrossLead, LeadSpec, Model};
pub use propagate::{run_cycles, RunOptions, Trajectory};
pub use protocol::{Lead, OttoProtocol, RampShape, Stroke};
pub use regime::{engine_region_map, equilibrium_occupation, limit_cycle_work_estimate, RegimeGrid};
