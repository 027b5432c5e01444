//! Reconstruction of two-time correlations from measured moments.

pub mod correct;
pub mod linear;
pub mod moments;
pub mod physics;
pub mod qsystem;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::PhaseMode;
use crate::oracle::parity_allowed;

pub use correct::decontaminate;
pub use linear::{BlockCovariance, ComplexEstimate, Estimate, Linear};
pub use moments::{estimate_moments, moment_row, synthetic_table, BootstrapConfig, MomentRow, MomentTable};
pub use physics::{double_slit_difference, extract_physics, PhysicalQuantities};
pub use qsystem::{chebyshev_q_grid, invert_q_system, uniform_q_grid, QSolve};

/// Correlations at one phase setting, keyed by exponents `(a, b)` of
/// `⟨F1^a F2^b⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSlice {
    pub phi: f64,
    pub delta_phi: f64,
    pub entries: BTreeMap<(usize, usize), Linear>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSet {
    pub phase_mode: PhaseMode,
    pub eta: f64,
    pub n_max: usize,
    pub corrected: bool,
    pub slices: Vec<CorrelationSlice>,
    pub covariance: Arc<BlockCovariance>,
    pub solves: Vec<QSolve>,
    pub warnings: Vec<String>,
}

/// Flat, serializable view of one correlation entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub phi: f64,
    pub delta_phi: f64,
    pub a: usize,
    pub b: usize,
    pub value: f64,
    pub se: f64,
}

impl CorrelationSet {
    pub fn averaged(&self) -> bool {
        self.phase_mode == PhaseMode::Averaged
    }

    pub fn n_vars(&self) -> usize {
        self.covariance.n_vars()
    }

    /// Entry `(a, b)` of slice `slice`; parity-forbidden entries are zero.
    pub fn entry(&self, slice: usize, a: usize, b: usize) -> Result<Linear> {
        if !parity_allowed(a, b, self.averaged()) {
            return Ok(Linear::constant(0.0, self.n_vars()));
        }
        self.slices[slice]
            .entries
            .get(&(a, b))
            .cloned()
            .ok_or(Error::MissingEntry(a, b))
    }

    pub fn estimate(&self, slice: usize, a: usize, b: usize) -> Result<Estimate> {
        Ok(self.covariance.estimate(&self.entry(slice, a, b)?))
    }

    pub fn records(&self) -> Vec<CorrelationRecord> {
        self.slices
            .iter()
            .flat_map(|s| {
                s.entries.iter().map(move |(&(a, b), l)| CorrelationRecord {
                    phi: s.phi,
                    delta_phi: s.delta_phi,
                    a,
                    b,
                    value: l.value,
                    se: self.covariance.se(l),
                })
            })
            .collect()
    }
}
