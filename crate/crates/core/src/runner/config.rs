//! Experiment configuration (TOML).
//!
//! ```toml
//! schema_version = 1
//!
//! [state]
//! cutoff = 16
//! modes = [{ kind = "coherent", re = 1.0, im = 0.0 }, { kind = "coherent", re = 0.0, im = 1.0 }]
//!
//! [train]
//! centers = [0.0, 10.0]
//! widths = [1.0, 1.0]
//! carrier = 6.283185307179586
//! overlap_tolerance = 0.0001
//!
//! [measurement]
//! eta = 0.7
//! phase_mode = "averaged"
//! phi = 0.0
//! shots = 1000000
//! n_max = 4
//!
//! [grid]
//! q_points = 5
//! q_max = 2.0
//! q_spacing = "chebyshev"
//! delta_phi_points = 8
//!
//! [seeds]
//! sampling = 1
//! bootstrap = 2
//! resamples = 200
//!
//! [output]
//! dir = "out"
//! ```
//!
//! `grid.q_values` and `grid.delta_phi_values` replace the generated grids
//! when present. `state.modes` holds either one two-mode kind or one kind per
//! mode.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock::{FockState, StateKind, DEFAULT_CUTOFF};
use crate::lab::moments::DEFAULT_RESAMPLES;
use crate::lab::{chebyshev_q_grid, uniform_q_grid, BootstrapConfig};
use crate::measurement::{MeasurementSetting, PhaseMode};
use crate::oracle::max_trusted_order;
use crate::pulse::{LoTrain, PulseEnvelope, DEFAULT_OVERLAP_TOLERANCE};
use crate::zoo;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub state: StateConfig,
    pub train: TrainConfig,
    pub measurement: MeasurementConfig,
    pub grid: GridConfig,
    pub seeds: SeedConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub cutoff: usize,
    pub modes: Vec<StateKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub carrier: f64,
    pub overlap_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub eta: f64,
    pub phase_mode: PhaseMode,
    #[serde(default)]
    pub phi: f64,
    pub shots: usize,
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QSpacing {
    Chebyshev,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub q_points: usize,
    pub q_max: f64,
    pub q_spacing: QSpacing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_values: Option<Vec<f64>>,
    pub delta_phi_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_phi_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub sampling: u64,
    pub bootstrap: u64,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<usize>,
    pub out: Option<PathBuf>,
    pub n_max: Option<usize>,
}

impl ExperimentConfig {
    /// Default grid (5 Chebyshev q values on `[0, 2]`, 8 Δφ values) around
    /// the given signal.
    pub fn new(modes: Vec<StateKind>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            state: StateConfig {
                cutoff: DEFAULT_CUTOFF,
                modes,
                tail_tolerance: None,
            },
            train: TrainConfig {
                centers: vec![0.0, 10.0],
                widths: vec![1.0, 1.0],
                carrier: TAU,
                overlap_tolerance: DEFAULT_OVERLAP_TOLERANCE,
            },
            measurement: MeasurementConfig {
                eta: 1.0,
                phase_mode: PhaseMode::Averaged,
                phi: 0.0,
                shots: 100_000,
                n_max: 4,
            },
            grid: GridConfig {
                q_points: 5,
                q_max: 2.0,
                q_spacing: QSpacing::Chebyshev,
                q_values: None,
                delta_phi_points: 8,
                delta_phi_values: None,
            },
            seeds: SeedConfig {
                sampling: 1,
                bootstrap: 2,
                resamples: DEFAULT_RESAMPLES,
            },
            output: OutputConfig { dir: "out".into() },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Canonical serialization; the config hash is taken over these bytes.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Hex SHA-256 of the canonical TOML.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seeds.sampling = seed;
        }
        if let Some(shots) = o.shots {
            self.measurement.shots = shots;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(n) = o.n_max {
            self.measurement.n_max = n;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.state.modes.is_empty() {
            return bad("state.modes is empty".into());
        }
        let t = &self.train;
        if t.centers.len() != 2 || t.widths.len() != 2 {
            return bad("train needs exactly two centers and two widths".into());
        }
        if t.overlap_tolerance.is_nan() || t.overlap_tolerance <= 0.0 {
            return bad("train.overlap_tolerance must be positive".into());
        }
        let m = &self.measurement;
        if !(m.eta > 0.0 && m.eta <= 1.0) {
            return Err(Error::InvalidEfficiency(m.eta));
        }
        if m.shots == 0 {
            return bad("measurement.shots must be >= 1".into());
        }
        let max = max_trusted_order(self.state.cutoff).min(crate::lab::moments::MAX_ORDER);
        if m.n_max == 0 || m.n_max > max {
            return Err(Error::OrderTooHigh {
                order: m.n_max,
                max,
                cutoff: self.state.cutoff,
            });
        }
        if m.phase_mode == PhaseMode::Averaged && m.n_max % 2 == 1 {
            return bad(format!("phase-averaged runs need an even n_max, got {}", m.n_max));
        }
        if self.q_grid().is_empty() {
            return bad("q grid is empty".into());
        }
        if self.q_grid().iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return bad("q values must be finite and non-negative".into());
        }
        if self.delta_phi_grid().is_empty() {
            return bad("Δφ grid is empty".into());
        }
        // TOML integers are signed 64-bit
        if self.seeds.sampling > i64::MAX as u64 || self.seeds.bootstrap > i64::MAX as u64 {
            return bad("seeds must be below 2^63".into());
        }
        if self.seeds.resamples < 2 {
            return bad("seeds.resamples must be >= 2".into());
        }
        Ok(())
    }

    pub fn q_grid(&self) -> Vec<f64> {
        let g = &self.grid;
        match (&g.q_values, g.q_spacing) {
            (Some(v), _) => v.clone(),
            (None, QSpacing::Chebyshev) => chebyshev_q_grid(g.q_points, 0.0, g.q_max),
            (None, QSpacing::Uniform) => uniform_q_grid(g.q_points, 0.0, g.q_max),
        }
    }

    pub fn delta_phi_grid(&self) -> Vec<f64> {
        match &self.grid.delta_phi_values {
            Some(v) => v.clone(),
            None => {
                let m = self.grid.delta_phi_points;
                (0..m).map(|j| TAU * j as f64 / m as f64).collect()
            }
        }
    }

    pub fn build_state(&self) -> Result<FockState> {
        zoo::build_state(
            &self.state.modes,
            self.state.cutoff,
            Some(self.state.tail_tolerance.unwrap_or(crate::fock::DEFAULT_TAIL_TOLERANCE)),
        )
    }

    /// LO train for one setting: `γ1 = 1`, `γ2 = q e^{iΔφ}`.
    pub fn train_for(&self, q: f64, delta_phi: f64) -> Result<LoTrain> {
        let t = &self.train;
        let pulses = t
            .centers
            .iter()
            .zip(&t.widths)
            .map(|(&c, &w)| PulseEnvelope::gaussian(c, w, t.carrier))
            .collect::<Result<Vec<_>>>()?;
        LoTrain::new(
            pulses,
            vec![Complex64::new(1.0, 0.0), Complex64::from_polar(q, delta_phi)],
        )
    }

    /// Settings in `(Δφ, q)` order, each with its own sampling seed drawn from
    /// the master sampling seed.
    pub fn settings(&self) -> Vec<GridPoint> {
        let mut master = ChaCha8Rng::seed_from_u64(self.seeds.sampling);
        let qs = self.q_grid();
        let mut out = Vec::new();
        for (jd, &delta_phi) in self.delta_phi_grid().iter().enumerate() {
            for (jq, &q) in qs.iter().enumerate() {
                out.push(GridPoint {
                    q_index: jq,
                    delta_phi_index: jd,
                    setting: MeasurementSetting {
                        q,
                        phi: self.measurement.phi,
                        delta_phi,
                        eta: self.measurement.eta,
                        phase_mode: self.measurement.phase_mode,
                        shots: self.measurement.shots,
                        seed: master.next_u64(),
                    },
                });
            }
        }
        out
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            resamples: self.seeds.resamples,
            seed: self.seeds.bootstrap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub q_index: usize,
    pub delta_phi_index: usize,
    pub setting: MeasurementSetting,
}

impl GridPoint {
    pub fn file_name(&self) -> String {
        format!("batch_d{:02}_q{:02}.csv", self.delta_phi_index, self.q_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(vec![
            StateKind::Coherent { re: 1.0, im: 0.0 },
            StateKind::Coherent { re: 0.0, im: 1.0 },
        ]);
        c.measurement.eta = 0.7;
        c
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let c = sample_config();
        let text = c.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn default_grid_has_forty_settings() {
        let c = sample_config();
        let s = c.settings();
        assert_eq!(s.len(), 40);
        assert_eq!(c.q_grid()[0], 0.0);
        assert_eq!(c.q_grid()[4], 2.0);
        let seeds: std::collections::BTreeSet<u64> = s.iter().map(|p| p.setting.seed).collect();
        assert_eq!(seeds.len(), 40);
        assert_eq!(s, c.settings());
    }

    #[test]
    fn validation() {
        let mut c = sample_config();
        c.measurement.n_max = 3;
        assert!(c.validate().is_err());
        let mut c = sample_config();
        c.grid.q_values = Some(vec![]);
        assert!(c.validate().is_err());
        let mut c = sample_config();
        c.grid.delta_phi_values = Some(vec![]);
        assert!(c.validate().is_err());
        let mut c = sample_config();
        c.schema_version = 2;
        assert!(c.validate().is_err());
        let mut c = sample_config();
        c.measurement.eta = 0.0;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml("schema_version = 1").is_err());
    }

    #[test]
    fn overrides_change_the_hash() {
        let mut c = sample_config();
        let h = c.hash().unwrap();
        c.apply(&Overrides {
            seed: Some(99),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(c.seeds.sampling, 99);
        assert_ne!(c.hash().unwrap(), h);
    }

    proptest! {
        #[test]
        fn arbitrary_floats_round_trip(eta in 1e-6f64..=1.0, q_max in 1e-3f64..10.0, phi in -10.0f64..10.0, seed in 0..=i64::MAX as u64) {
            let mut c = sample_config();
            c.measurement.eta = eta;
            c.measurement.phi = phi;
            c.grid.q_max = q_max;
            c.seeds.sampling = seed;
            let text = c.to_toml().unwrap();
            let back = ExperimentConfig::from_toml(&text).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_toml().unwrap(), text);
        }
    }
}
