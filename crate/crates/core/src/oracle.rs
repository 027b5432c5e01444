//! Exact moments and correlations by operator algebra on the truncated space.
//!
//! This is the ground truth for every reconstruction check. Phase averages are
//! evaluated with an `n + 2` point uniform rule in `φ`, which is exact for the
//! trigonometric polynomials of degree `n` that order-`n` moments are.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::efficiency;
use crate::error::{Error, Result};
use crate::fock::{expect, expect_local_product, local, FockState, Operator};

const IMAG_TOL: f64 = 1e-10;

/// `⟨F1^a(φ) F2^b(φ+Δφ)⟩` at efficiency `eta`, optionally averaged over `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub a: usize,
    pub b: usize,
    pub phi: f64,
    pub delta_phi: f64,
    pub phase_averaged: bool,
    pub eta: f64,
}

impl MomentSpec {
    pub fn averaged(a: usize, b: usize, delta_phi: f64) -> Self {
        Self {
            a,
            b,
            phi: 0.0,
            delta_phi,
            phase_averaged: true,
            eta: 1.0,
        }
    }

    pub fn locked(a: usize, b: usize, phi: f64, delta_phi: f64) -> Self {
        Self {
            a,
            b,
            phi,
            delta_phi,
            phase_averaged: false,
            eta: 1.0,
        }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    pub fn order(&self) -> usize {
        self.a + self.b
    }
}

/// Highest moment order trusted at a given cutoff: 6 up to cutoff 16, then
/// one more order per extra level.
pub fn max_trusted_order(cutoff: usize) -> usize {
    6.max(cutoff.saturating_sub(10))
}

pub fn parity_allowed(a: usize, b: usize, phase_averaged: bool) -> bool {
    !phase_averaged || (a + b).is_multiple_of(2)
}

/// All `(a, b)` with `a + b <= n_max` that can be nonzero, by increasing order.
pub fn table_keys(n_max: usize, phase_averaged: bool) -> Vec<(usize, usize)> {
    (0..=n_max)
        .flat_map(|n| (0..=n).map(move |k| (n - k, k)))
        .filter(|&(a, b)| parity_allowed(a, b, phase_averaged))
        .collect()
}

fn check_two_mode(state: &FockState) -> Result<()> {
    if state.space().n_modes != 2 {
        return Err(Error::InvalidSetting(format!(
            "correlations need a two-mode state, got {} modes",
            state.space().n_modes
        )));
    }
    Ok(())
}

fn locked_ideal(state: &FockState, a: usize, b: usize, phi: f64, delta_phi: f64) -> Result<f64> {
    let levels = state.space().levels();
    let f1 = local::power(&local::quadrature(levels, phi), a);
    let f2 = local::power(&local::quadrature(levels, phi + delta_phi), b);
    let v = expect_local_product(state, &[(0, &f1), (1, &f2)])?;
    if v.im.abs() > IMAG_TOL {
        return Err(Error::NotHermitian(v.im));
    }
    Ok(v.re)
}

fn ideal_moment(state: &FockState, spec: &MomentSpec) -> Result<f64> {
    let n = spec.order();
    if !spec.phase_averaged {
        return locked_ideal(state, spec.a, spec.b, spec.phi, spec.delta_phi);
    }
    if n % 2 == 1 {
        return Ok(0.0);
    }
    let points = n + 2;
    let mut acc = 0.0;
    for j in 0..points {
        let phi = std::f64::consts::TAU * j as f64 / points as f64;
        acc += locked_ideal(state, spec.a, spec.b, phi, spec.delta_phi)?;
    }
    Ok(acc / points as f64)
}

/// Vacuum moment of the truncated single-mode field strength, by matrix powers.
fn truncated_vacuum_moment(levels: usize, m: usize) -> f64 {
    let f = local::power(&local::quadrature(levels, 0.0), m);
    f[(0, 0)].re
}

/// Exact `⟨F1^a F2^b⟩` for `spec`.
///
/// For `eta < 1` each field strength is expanded binomially into signal and
/// vacuum-noise parts, and noise moments are taken from the truncated noise
/// mode itself.
pub fn exact_moment(state: &FockState, spec: &MomentSpec) -> Result<f64> {
    check_two_mode(state)?;
    let n = spec.order();
    if n == 0 {
        return Err(Error::InvalidSetting("moment order must be >= 1".into()));
    }
    let cap = max_trusted_order(state.space().cutoff);
    if n > cap {
        return Err(Error::OrderTooHigh {
            order: n,
            max: cap,
            cutoff: state.space().cutoff,
        });
    }
    if !(spec.eta > 0.0 && spec.eta <= 1.0) {
        return Err(Error::InvalidEfficiency(spec.eta));
    }
    if spec.phase_averaged && n % 2 == 1 {
        return Ok(0.0);
    }
    if spec.eta == 1.0 {
        return ideal_moment(state, spec);
    }
    let levels = state.space().levels();
    let eta = spec.eta;
    let s = (eta * (1.0 - eta)).sqrt();
    let mut acc = 0.0;
    for l in 0..=spec.a {
        for m in 0..=spec.b {
            let noise = truncated_vacuum_moment(levels, spec.a - l)
                * truncated_vacuum_moment(levels, spec.b - m);
            if noise == 0.0 {
                continue;
            }
            let signal = if l + m == 0 {
                1.0
            } else {
                ideal_moment(state, &MomentSpec { a: l, b: m, eta: 1.0, ..*spec })?
            };
            acc += efficiency::binomial(spec.a, l)
                * efficiency::binomial(spec.b, m)
                * eta.powi((l + m) as i32)
                * s.powi((n - l - m) as i32)
                * noise
                * signal;
        }
    }
    Ok(acc)
}

/// Correlations `⟨F1^a F2^b⟩` for every parity-allowed `a + b <= n_max` at one
/// phase setting. `(0, 0)` is stored as 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    pub phi: f64,
    pub delta_phi: f64,
    pub phase_averaged: bool,
    pub eta: f64,
    pub n_max: usize,
    pub values: BTreeMap<(usize, usize), f64>,
}

impl CorrelationTable {
    pub fn get(&self, a: usize, b: usize) -> Result<f64> {
        if !parity_allowed(a, b, self.phase_averaged) {
            return Ok(0.0);
        }
        self.values.get(&(a, b)).copied().ok_or(Error::MissingEntry(a, b))
    }

    /// Forward sum-field moment `⟨(F1 + q F2)^n⟩ = Σ_k C(n,k) q^k ⟨F1^{n-k} F2^k⟩`.
    pub fn sum_moment(&self, q: f64, n: usize) -> Result<f64> {
        (0..=n).try_fold(0.0, |acc, k| {
            Ok(acc + efficiency::binomial(n, k) * q.powi(k as i32) * self.get(n - k, k)?)
        })
    }
}

pub fn exact_table(
    state: &FockState,
    n_max: usize,
    phi: f64,
    delta_phi: f64,
    phase_averaged: bool,
    eta: f64,
) -> Result<CorrelationTable> {
    let mut values = BTreeMap::new();
    for (a, b) in table_keys(n_max, phase_averaged) {
        let v = if a + b == 0 {
            1.0
        } else {
            exact_moment(
                state,
                &MomentSpec {
                    a,
                    b,
                    phi,
                    delta_phi,
                    phase_averaged,
                    eta,
                },
            )?
        };
        values.insert((a, b), v);
    }
    Ok(CorrelationTable {
        phi,
        delta_phi,
        phase_averaged,
        eta,
        n_max,
        values,
    })
}

/// Maps ideal correlations to what detection at efficiency `eta` measures.
pub fn contaminate(ideal: &CorrelationTable, eta: f64) -> Result<CorrelationTable> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidEfficiency(eta));
    }
    if ideal.eta != 1.0 {
        return Err(Error::Mismatch(format!(
            "input table already taken at eta = {}",
            ideal.eta
        )));
    }
    let mut values = BTreeMap::new();
    for &(a, b) in ideal.values.keys() {
        let mut acc = 0.0;
        for (l, m) in efficiency::sources(a, b) {
            let lower = if l + m == 0 { 1.0 } else { ideal.get(l, m)? };
            acc += efficiency::coefficient(a, b, l, m, eta) * lower;
        }
        values.insert((a, b), acc);
    }
    Ok(CorrelationTable {
        eta,
        values,
        ..ideal.clone()
    })
}

/// Two-mode normally ordered quantities the reconstruction targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactPhysics {
    pub mean_n1: f64,
    pub mean_n2: f64,
    /// `⟨a1† a2⟩`
    pub coherence: Complex64,
    /// `⟨a1†² a1 a2⟩`
    pub third_order_12: Complex64,
    /// `⟨a2†² a2 a1⟩`
    pub third_order_21: Complex64,
    /// `⟨a1†² a2²⟩`
    pub pair_amplitude: Complex64,
    /// `⟨n1 n2⟩`
    pub number_correlation: f64,
}

pub fn exact_physics(state: &FockState) -> Result<ExactPhysics> {
    check_two_mode(state)?;
    let space = state.space();
    let levels = space.levels();
    let a = local::annihilation(levels);
    let ad = local::creation(levels);
    let n = local::number(levels);
    let ad2 = &ad * &ad;
    let a2 = &a * &a;
    let ad2a = &ad2 * &a;
    let e = |factors: &[(usize, &nalgebra::DMatrix<Complex64>)]| expect_local_product(state, factors);
    let real = |v: Complex64| -> Result<f64> {
        if v.im.abs() > IMAG_TOL {
            Err(Error::NotHermitian(v.im))
        } else {
            Ok(v.re)
        }
    };
    Ok(ExactPhysics {
        mean_n1: real(e(&[(0, &n)])?)?,
        mean_n2: real(e(&[(1, &n)])?)?,
        coherence: e(&[(0, &ad), (1, &a)])?,
        third_order_12: e(&[(0, &ad2a), (1, &a)])?,
        third_order_21: e(&[(1, &ad2a), (0, &a)])?,
        pair_amplitude: e(&[(0, &ad2), (1, &a2)])?,
        number_correlation: real(e(&[(0, &n), (1, &n)])?)?,
    })
}

/// `⟨O⟩` for a full operator; re-exported here for oracle users.
pub fn exact_expectation(state: &FockState, op: &Operator) -> Result<Complex64> {
    expect(state, op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_state, ModeOperator, StateKind};
    use crate::zoo;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn vacuum_second_moment() {
        let vac = make_state(&StateKind::Vacuum, 16, 2).unwrap();
        let v = exact_moment(&vac, &MomentSpec::averaged(2, 0, 0.0)).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn coherent_cross_term_traces_sine() {
        let s = zoo::coherent_pair(c(1.0, 0.0), c(0.0, 1.0), 16).unwrap();
        for dphi in [0.0, 0.4, PI / 2.0, 2.0, 5.5] {
            let v = exact_moment(&s, &MomentSpec::averaged(1, 1, dphi)).unwrap();
            assert!((v - dphi.sin()).abs() < 1e-10, "{dphi}: {v}");
        }
    }

    #[test]
    fn fock_pair_symmetric_cross_term() {
        let s = make_state(&StateKind::Fock { n: 1 }, 16, 2).unwrap();
        for dphi in [0.0, 1.0, 2.5] {
            let v = exact_moment(&s, &MomentSpec::averaged(2, 2, dphi)).unwrap();
            assert!((v - 2.25).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_averaged_moments_are_exactly_zero() {
        let s = zoo::coherent_pair(c(1.0, 0.3), c(-0.2, 0.6), 16).unwrap();
        for (a, b) in [(1, 0), (0, 1), (2, 1), (3, 0), (1, 2)] {
            assert_eq!(exact_moment(&s, &MomentSpec::averaged(a, b, 0.3)).unwrap(), 0.0);
        }
        // the locked value is not zero
        assert!(exact_moment(&s, &MomentSpec::locked(1, 0, 0.0, 0.0)).unwrap().abs() > 0.1);
    }

    #[test]
    fn order_cap() {
        let s = make_state(&StateKind::Vacuum, 16, 2).unwrap();
        assert!(exact_moment(&s, &MomentSpec::averaged(4, 2, 0.0)).is_ok());
        assert!(matches!(
            exact_moment(&s, &MomentSpec::averaged(4, 4, 0.0)),
            Err(Error::OrderTooHigh { order: 8, .. })
        ));
        let big = make_state(&StateKind::Vacuum, 18, 2).unwrap();
        assert!(exact_moment(&big, &MomentSpec::averaged(4, 4, 0.0)).is_ok());
    }

    #[test]
    fn quadrature_rule_matches_dense_phase_average() {
        let s = zoo::coherent_pair(c(0.7, 0.2), c(0.1, -0.5), 12).unwrap();
        for (a, b) in [(2, 0), (1, 1), (3, 1), (2, 2), (1, 3), (0, 4)] {
            let exact = exact_moment(&s, &MomentSpec::averaged(a, b, 0.9)).unwrap();
            let m = 64;
            let dense: f64 = (0..m)
                .map(|j| {
                    let phi = 2.0 * PI * j as f64 / m as f64;
                    exact_moment(&s, &MomentSpec::locked(a, b, phi, 0.9)).unwrap()
                })
                .sum::<f64>()
                / m as f64;
            assert!((exact - dense).abs() < 1e-12, "({a},{b})");
        }
    }

    #[test]
    fn contamination_examples() {
        let vac = make_state(&StateKind::Vacuum, 16, 2).unwrap();
        let ideal = exact_table(&vac, 4, 0.0, 0.0, true, 1.0).unwrap();
        let same = contaminate(&ideal, 1.0).unwrap();
        for (k, v) in &ideal.values {
            assert!((same.values[k] - v).abs() < 1e-15);
        }
        let half = contaminate(&ideal, 0.5).unwrap();
        assert!((half.get(2, 0).unwrap() - 0.25).abs() < 1e-14);
        assert!((half.get(4, 0).unwrap() - 0.1875).abs() < 1e-14);
    }

    #[test]
    fn contamination_formula_matches_binomial_noise_expansion() {
        for (_, state) in zoo::standard_zoo(16).unwrap() {
            let ideal = exact_table(&state, 4, 0.0, 0.7, true, 1.0).unwrap();
            for eta in [0.3, 0.6, 0.9] {
                let formula = contaminate(&ideal, eta).unwrap();
                let direct = exact_table(&state, 4, 0.0, 0.7, true, eta).unwrap();
                for (k, v) in &direct.values {
                    assert!((formula.values[k] - v).abs() < 1e-12, "{k:?} at {eta}");
                }
            }
        }
    }

    #[test]
    fn mean_photon_identity_on_zoo() {
        for (name, state) in zoo::standard_zoo(16).unwrap() {
            let phys = exact_physics(&state).unwrap();
            let f2 = exact_moment(&state, &MomentSpec::averaged(2, 0, 0.0)).unwrap();
            assert!((f2 - 0.5 - phys.mean_n1).abs() < 1e-8, "{name}");
            let n1 = ModeOperator::number(state.space(), 0).unwrap().embed();
            let direct = crate::fock::expect_real(&state, &n1).unwrap();
            assert!((direct - phys.mean_n1).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_cross_term_dc_for_product_states() {
        for (name, state) in zoo::standard_zoo(16).unwrap() {
            if name == "two_mode_squeezed" {
                continue;
            }
            let phys = exact_physics(&state).unwrap();
            // DC part: mean over a grid that cancels harmonics 1 and 2
            let m = 8;
            let dc: f64 = (0..m)
                .map(|j| exact_moment(&state, &MomentSpec::averaged(2, 2, 2.0 * PI * j as f64 / m as f64)).unwrap())
                .sum::<f64>()
                / m as f64;
            let expected = (phys.mean_n1 + 0.5) * (phys.mean_n2 + 0.5);
            assert!((dc - expected).abs() < 1e-8, "{name}: {dc} vs {expected}");
        }
    }

    #[test]
    fn sum_moment_of_two_vacua() {
        let vac = make_state(&StateKind::Vacuum, 16, 2).unwrap();
        let t = exact_table(&vac, 2, 0.0, 0.0, true, 1.0).unwrap();
        assert!((t.sum_moment(2.0, 2).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn table_key_sets() {
        assert_eq!(table_keys(2, true), vec![(0, 0), (2, 0), (1, 1), (0, 2)]);
        assert_eq!(table_keys(1, false), vec![(0, 0), (1, 0), (0, 1)]);
        assert_eq!(table_keys(4, true).len(), 1 + 3 + 5);
    }

    #[test]
    fn exact_physics_of_coherent_pair() {
        let (al, be) = (c(1.0, 0.0), c(0.0, 1.0));
        let s = zoo::coherent_pair(al, be, 16).unwrap();
        let p = exact_physics(&s).unwrap();
        assert!((p.coherence - al.conj() * be).norm() < 1e-10);
        assert!((p.mean_n1 - 1.0).abs() < 1e-10);
        assert!((p.number_correlation - 1.0).abs() < 1e-10);
        assert!((p.third_order_12 - al.conj() * al.conj() * al * be).norm() < 1e-10);
        assert!((p.pair_amplitude - al.conj().powi(2) * be.powi(2)).norm() < 1e-10);
    }

    #[test]
    fn two_mode_squeezed_number_correlation() {
        let s = make_state(&StateKind::TwoModeSqueezed { r: 0.5 }, 16, 2).unwrap();
        let p = exact_physics(&s).unwrap();
        let nbar = 0.5f64.sinh().powi(2);
        assert!((p.number_correlation - (2.0 * nbar * nbar + nbar)).abs() < 1e-8);
        assert!((p.number_correlation - 0.4190).abs() < 1e-4);
    }
}
