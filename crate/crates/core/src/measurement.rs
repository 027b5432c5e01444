//! Forward simulation of the time-integrated difference counts.
//!
//! For two LO pulses the measured variable is `F = F_1(φ) + q F_2(φ + Δφ)`.
//! Imperfect detection replaces each `a_k` by `η a_k + √(η(1-η)) c_k` with the
//! noise modes `c_k` in vacuum. Because the noise quadratures are Gaussian with
//! variance 1/2 and independent of the signal, the measured outcome is
//! `η X + G` where `X` follows the ideal spectral measure of `F` and `G` is a
//! centered Gaussian of variance `(1 + q²) η (1 - η) / 2`. The literal
//! construction with explicit noise modes is kept in [`explicit_noise`] and
//! the two are checked against each other in the test suites.

use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{local, FockSpace, FockState, Operator, Representation};
use crate::pulse::{validate_train, LoTrain};

/// Eigenvalues closer than this are merged into one spectral line.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Shots per independently seeded RNG stream.
pub const DEFAULT_CHUNK_SHOTS: usize = 1 << 16;

const HERMITIAN_TOL: f64 = 1e-10;
const PROBABILITY_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    Locked,
    Averaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub q: f64,
    pub phi: f64,
    pub delta_phi: f64,
    pub eta: f64,
    pub phase_mode: PhaseMode,
    pub shots: usize,
    pub seed: u64,
}

impl MeasurementSetting {
    pub fn validate(&self) -> Result<()> {
        if !(self.q.is_finite() && self.q >= 0.0) {
            return Err(Error::InvalidSetting(format!("q = {} must be >= 0", self.q)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidEfficiency(self.eta));
        }
        if !(self.phi.is_finite() && self.delta_phi.is_finite()) {
            return Err(Error::InvalidSetting("non-finite phase".into()));
        }
        if self.shots == 0 {
            return Err(Error::InvalidSetting("shots must be >= 1".into()));
        }
        Ok(())
    }

    /// Variance of the Gaussian noise term added to `η X`.
    pub fn noise_variance(&self) -> f64 {
        (1.0 + self.q * self.q) * self.eta * (1.0 - self.eta) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub setting: MeasurementSetting,
    pub chunk_shots: usize,
    pub outcomes: Vec<f64>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn raw_moment(&self, order: usize) -> f64 {
        self.outcomes.iter().map(|x| x.powi(order as i32)).sum::<f64>() / self.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub value: f64,
    pub probability: f64,
}

/// Moments of a discrete outcome distribution.
pub fn spectral_moment(lines: &[SpectralLine], order: usize) -> f64 {
    lines
        .iter()
        .map(|l| l.probability * l.value.powi(order as i32))
        .sum()
}

/// `Σ_k q_k F_k(φ_k)` on the multimode space of `space`.
pub fn sum_field_operator(space: FockSpace, weights: &[f64], phases: &[f64]) -> Result<Operator> {
    if weights.len() != space.n_modes || phases.len() != space.n_modes {
        return Err(Error::DimensionMismatch {
            expected: space.n_modes,
            found: if weights.len() != space.n_modes {
                weights.len()
            } else {
                phases.len()
            },
        });
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidSetting(format!("weight {w} must be >= 0")));
    }
    let d = space.dim();
    let mut matrix = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for (mode, (&q, &phi)) in weights.iter().zip(phases).enumerate() {
        if q == 0.0 {
            continue;
        }
        let f = local::quadrature(space.levels(), phi);
        let term = Operator::product_of_local(space, &[(mode, &f)])?;
        matrix += term.matrix * Complex64::new(q, 0.0);
    }
    Operator::from_matrix(space, matrix)
}

fn aggregate(mut lines: Vec<SpectralLine>) -> Vec<SpectralLine> {
    lines.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut out: Vec<SpectralLine> = Vec::with_capacity(lines.len());
    let mut last_value = f64::NEG_INFINITY;
    for line in lines {
        match out.last_mut() {
            Some(prev) if line.value - last_value <= DEGENERACY_TOL => {
                prev.probability += line.probability;
            }
            _ => out.push(line),
        }
        last_value = line.value;
    }
    let total: f64 = out.iter().map(|l| l.probability).sum();
    for l in &mut out {
        l.probability /= total;
    }
    out
}

fn clip(p: f64) -> Result<f64> {
    if p < PROBABILITY_FLOOR {
        return Err(Error::InvalidDensity(format!("negative outcome probability {p:.3e}")));
    }
    Ok(p.max(0.0))
}

/// Exact outcome distribution of measuring Hermitian `op` on `state`.
pub fn spectral_measure(op: &Operator, state: &FockState) -> Result<Vec<SpectralLine>> {
    if op.space.dim() != state.space().dim() {
        return Err(Error::DimensionMismatch {
            expected: state.space().dim(),
            found: op.space.dim(),
        });
    }
    let defect = op.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let eig = SymmetricEigen::new(op.matrix.clone());
    let v = &eig.eigenvectors;
    let probs: Vec<f64> = match state.representation() {
        Representation::Pure(psi) => {
            let amps = v.adjoint() * psi;
            amps.iter().map(|a| a.norm_sqr()).collect()
        }
        Representation::Mixed(rho) => {
            let m = v.adjoint() * rho * v;
            (0..m.nrows()).map(|j| m[(j, j)].re).collect()
        }
    };
    let lines = eig
        .eigenvalues
        .iter()
        .zip(probs)
        .map(|(&value, p)| Ok(SpectralLine { value, probability: clip(p)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(lines))
}

type Eigen = SymmetricEigen<f64, Dyn>;

/// Two-pulse measurement on a fixed two-mode signal state.
///
/// Uses `F_1(φ) + q F_2(φ+Δφ) = U (F_1(0) + q F_2(0)) U†` with
/// `U = exp(i φ n_1 + i (φ+Δφ) n_2)`: one real symmetric eigendecomposition
/// per `q`, applied to a phase-rotated copy of the state. Phase-averaged
/// settings use the state averaged over a common rotation, which is the
/// marginal outcome distribution of a uniformly random `φ` per shot.
pub struct TwoPulseSampler<'a> {
    state: &'a FockState,
    eigen: Mutex<Vec<(u64, Arc<Eigen>)>>,
}

impl<'a> TwoPulseSampler<'a> {
    pub fn new(state: &'a FockState) -> Result<Self> {
        if state.space().n_modes != 2 {
            return Err(Error::InvalidSetting(format!(
                "two-pulse sampling needs a two-mode state, got {} modes",
                state.space().n_modes
            )));
        }
        Ok(Self {
            state,
            eigen: Mutex::new(Vec::new()),
        })
    }

    /// Eigendecomposition of `F_1(0) + q F_2(0)`, computed once per `q`.
    fn eigen(&self, q: f64) -> Arc<Eigen> {
        let key = q.to_bits();
        if let Some((_, e)) = self.eigen.lock().expect("eigen cache").iter().find(|(k, _)| *k == key) {
            return e.clone();
        }
        let e = Arc::new(SymmetricEigen::new(self.real_field(q)));
        self.eigen.lock().expect("eigen cache").push((key, e.clone()));
        e
    }

    fn real_field(&self, q: f64) -> DMatrix<f64> {
        let levels = self.state.space().levels();
        let mut f = DMatrix::<f64>::zeros(levels, levels);
        for n in 1..levels {
            let v = (n as f64 / 2.0).sqrt();
            f[(n - 1, n)] = v;
            f[(n, n - 1)] = v;
        }
        let id = DMatrix::<f64>::identity(levels, levels);
        f.kronecker(&id) + id.kronecker(&f) * q
    }

    /// Exact distribution of the ideal (η = 1) outcome for this setting.
    pub fn outcome_distribution(&self, setting: &MeasurementSetting) -> Result<Vec<SpectralLine>> {
        setting.validate()?;
        let eig = self.eigen(setting.q);
        let phi = match setting.phase_mode {
            PhaseMode::Locked => setting.phi,
            PhaseMode::Averaged => 0.0,
        };
        let rotated = self.state.rotated(&[phi, phi + setting.delta_phi])?;
        let view = match setting.phase_mode {
            PhaseMode::Locked => rotated,
            PhaseMode::Averaged => rotated.dephased(),
        };
        let v = &eig.eigenvectors;
        let probs: Vec<f64> = match view.representation() {
            Representation::Pure(psi) => {
                let re = v.transpose() * DVector::from_iterator(psi.len(), psi.iter().map(|c| c.re));
                let im = v.transpose() * DVector::from_iterator(psi.len(), psi.iter().map(|c| c.im));
                re.iter().zip(im.iter()).map(|(a, b)| a * a + b * b).collect()
            }
            Representation::Mixed(rho) => {
                let re_rho = rho.map(|c| c.re);
                let m = v.transpose() * re_rho * v;
                (0..m.nrows()).map(|j| m[(j, j)]).collect()
            }
        };
        let lines = eig
            .eigenvalues
            .iter()
            .zip(probs)
            .map(|(&value, p)| Ok(SpectralLine { value, probability: clip(p)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(aggregate(lines))
    }

    pub fn sample(&self, setting: &MeasurementSetting) -> Result<SampleBatch> {
        let lines = self.outcome_distribution(setting)?;
        draw(&lines, setting, DEFAULT_CHUNK_SHOTS)
    }
}

/// Draws `setting.shots` outcomes `η X + G` with `X` from `lines`.
///
/// Shots are split into chunks of `chunk_shots`; chunk `c` uses the ChaCha8
/// stream `c` of `setting.seed`, so the result does not depend on how chunks
/// are scheduled across threads.
pub fn draw(lines: &[SpectralLine], setting: &MeasurementSetting, chunk_shots: usize) -> Result<SampleBatch> {
    setting.validate()?;
    if chunk_shots == 0 {
        return Err(Error::InvalidSetting("chunk size must be >= 1".into()));
    }
    let weights = WeightedIndex::new(lines.iter().map(|l| l.probability))
        .map_err(|e| Error::InvalidDensity(format!("outcome weights: {e}")))?;
    let values: Vec<f64> = lines.iter().map(|l| l.value).collect();
    let eta = setting.eta;
    let noise_sd = setting.noise_variance().sqrt();
    let noise = Normal::new(0.0, noise_sd).expect("finite non-negative standard deviation");
    let n_chunks = setting.shots.div_ceil(chunk_shots);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(setting.seed);
            rng.set_stream(c as u64);
            let len = chunk_shots.min(setting.shots - c * chunk_shots);
            (0..len)
                .map(|_| {
                    let x = values[weights.sample(&mut rng)];
                    if noise_sd > 0.0 {
                        eta * x + noise.sample(&mut rng)
                    } else {
                        eta * x
                    }
                })
                .collect()
        })
        .collect();
    Ok(SampleBatch {
        setting: setting.clone(),
        chunk_shots,
        outcomes: chunks.concat(),
    })
}

/// Samples the two-pulse measurement with the η·X + G shortcut.
pub fn sample(state: &FockState, setting: &MeasurementSetting) -> Result<SampleBatch> {
    TwoPulseSampler::new(state)?.sample(setting)
}

/// Like [`sample`], but first requires the LO train to pass the
/// mode-independence gate at `tolerance`.
pub fn sample_with_train(
    state: &FockState,
    setting: &MeasurementSetting,
    train: &LoTrain,
    tolerance: f64,
) -> Result<SampleBatch> {
    let report = validate_train(train, tolerance)?;
    if !report.pass {
        return Err(Error::OverlapGate {
            max_overlap: report.max_overlap,
            tolerance,
        });
    }
    sample(state, setting)
}

/// Literal noise-mode construction of imperfect detection.
pub mod explicit_noise {
    use super::*;
    use crate::fock::{make_state, StateKind};

    /// Operator `Σ_k q_k [η F_k(φ_k) + √(η(1-η)) F_{c_k}(φ_k)]` on the space of
    /// two signal modes (0, 1) followed by their two noise modes (2, 3).
    pub fn noisy_field_operator(cutoff: usize, setting: &MeasurementSetting) -> Result<Operator> {
        setting.validate()?;
        let space = FockSpace::new(4, cutoff)?;
        let eta = setting.eta;
        let s = (eta * (1.0 - eta)).sqrt();
        let phi = match setting.phase_mode {
            PhaseMode::Locked => setting.phi,
            PhaseMode::Averaged => 0.0,
        };
        let phases = [phi, phi + setting.delta_phi, phi, phi + setting.delta_phi];
        let weights = [eta, eta * setting.q, s, s * setting.q];
        sum_field_operator(space, &weights, &phases)
    }

    /// Signal state extended by two vacuum noise modes.
    pub fn extended_state(state: &FockState) -> Result<FockState> {
        let cutoff = state.space().cutoff;
        let noise = make_state(&StateKind::Vacuum, cutoff, 2)?;
        FockState::product(&[state.clone(), noise])
    }

    pub fn outcome_distribution(state: &FockState, setting: &MeasurementSetting) -> Result<Vec<SpectralLine>> {
        if state.space().n_modes != 2 {
            return Err(Error::InvalidSetting("explicit-noise sampling needs a two-mode state".into()));
        }
        let op = noisy_field_operator(state.space().cutoff, setting)?;
        let extended = extended_state(state)?;
        let view = match setting.phase_mode {
            PhaseMode::Locked => extended,
            PhaseMode::Averaged => extended.dephased(),
        };
        spectral_measure(&op, &view)
    }

    /// Samples the noisy measurement directly; no Gaussian shortcut.
    pub fn sample(state: &FockState, setting: &MeasurementSetting) -> Result<SampleBatch> {
        let lines = outcome_distribution(state, setting)?;
        let ideal = MeasurementSetting {
            eta: 1.0,
            ..setting.clone()
        };
        let mut batch = draw(&lines, &ideal, DEFAULT_CHUNK_SHOTS)?;
        batch.setting = setting.clone();
        Ok(batch)
    }
}

/// Uniform random phase, used by tests that draw `φ` shot by shot.
pub fn uniform_phase<R: Rng>(rng: &mut R) -> f64 {
    rng.random::<f64>() * std::f64::consts::TAU
}
