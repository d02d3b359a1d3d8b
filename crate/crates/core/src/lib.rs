//! No-ancilla error detection with bit-flip codes: state-vector simulation,
//! logical gate synthesis, noise and post-selection analysis.

pub mod analysis;
pub mod circuits;
pub mod code;
pub mod error;
pub mod experiment;
pub mod logical;
pub mod noise;
pub mod rng;
pub mod statevec;
pub mod verify;

pub use analysis::{metrics, similarity, tally, Metrics, Tally};
pub use circuits::{build_ghz, build_ghz_with, ghz_logical, ideal_pdf, parse_dsl, LogicalCircuit, LogicalGate};
pub use code::{default_experiment_set, BitFlipCode, BlockOutcome, ShotClassification};
pub use error::{NaedError, Result};
pub use logical::{lower, simplify, PhysicalCircuit, PhysicalGate};
pub use noise::{inject, simulate_noisy, InjectedError, InjectionSpec, StochasticModel};
pub use statevec::{simulate, BitString, Pdf, StateVector, C64};
pub use experiment::{inject_study, run_sweep, SweepConfig, SweepResult, SweepRow};
