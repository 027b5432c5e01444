//! Pulsed balanced-homodyne detection with a train of short local-oscillator
//! pulses, and reconstruction of two-time moments and correlations of the
//! signal pulse from the measured field-strength statistics.
//!
//! - [`fock`]: truncated multimode Fock spaces, states and operators.
//! - [`pulse`]: LO envelopes, overlaps and the mode-independence gate.
//! - [`measurement`]: sampling of the summed field strength, with detection
//!   efficiency.
//! - [`oracle`]: exact correlations by operator algebra.
//! - [`lab`]: moment estimation, q-system inversion, efficiency correction and
//!   extraction of physical quantities.
//! - [`runner`]: config-driven experiments writing CSV/JSON outputs.

pub mod efficiency;
pub mod error;
pub mod fock;
pub mod lab;
pub mod measurement;
pub mod oracle;
pub mod pulse;
pub mod runner;
pub mod zoo;

pub use error::{Error, Result};
pub use fock::{make_state, quadrature, FockSpace, FockState, ModeOperator, Operator, StateKind};
pub use measurement::{MeasurementSetting, PhaseMode, SampleBatch};
pub use pulse::{LoTrain, PulseEnvelope};
