//! Physical two-time quantities from the Δφ dependence of the phase-averaged
//! correlations.
//!
//! Each channel `⟨F1^a F2^b⟩(Δφ)` is a trigonometric polynomial of degree
//! at most 2 in `Δφ`; it is fitted by least squares on
//! `{1, cos Δφ, sin Δφ, cos 2Δφ, sin 2Δφ}`. With `C = ⟨a1† a2⟩`:
//!
//! - `⟨F1²⟩ = n̄1 + 1/2`, `⟨F2²⟩ = n̄2 + 1/2`
//! - `⟨F1 F2⟩ = Re C cos Δφ + Im C sin Δφ`
//! - `⟨F1³ F2⟩ - 3/2 ⟨F1 F2⟩ = 3/2 Re(⟨a1†² a1 a2⟩ e^{-iΔφ})`
//! - `⟨F1 F2³⟩ - 3/2 ⟨F1 F2⟩ = 3/2 Re(⟨a2†² a2 a1⟩ e^{iΔφ})`
//! - `⟨F1² F2²⟩ = 1/2 Re(⟨a1†² a2²⟩ e^{-2iΔφ}) + ⟨(n1 + 1/2)(n2 + 1/2)⟩`

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::linear::{ComplexEstimate, Estimate, Linear};
use crate::lab::moments::MomentRow;
use crate::lab::CorrelationSet;

pub const MIN_GRID_POINTS: usize = 5;
const GRID_TOL: f64 = 1e-9;
const RESIDUAL_FLOOR: f64 = 1e-9;
const ALIASING_SIGMAS: f64 = 5.0;
const NEGATIVE_FLAG_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    pub a: usize,
    pub b: usize,
    /// Coefficients of `1, cos, sin, cos 2, sin 2`.
    pub coefficients: Vec<Estimate>,
    /// Largest `|residual| / SE` over the grid (0 when the fit is exact).
    pub max_residual_ratio: f64,
    pub max_abs_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalQuantities {
    pub corrected: bool,
    pub eta: f64,
    pub mean_n1: Estimate,
    pub mean_n2: Estimate,
    /// `⟨a1† a2⟩`
    pub coherence: ComplexEstimate,
    /// `⟨a1†² a1 a2⟩`
    pub third_order_12: Option<ComplexEstimate>,
    /// `⟨a2†² a2 a1⟩`
    pub third_order_21: Option<ComplexEstimate>,
    /// `⟨a1†² a2²⟩`
    pub pair_amplitude: Option<ComplexEstimate>,
    /// `⟨n1 n2⟩`
    pub number_correlation: Option<Estimate>,
    pub fits: Vec<ChannelFit>,
    pub flags: Vec<String>,
}

impl PhysicalQuantities {
    /// `(name, estimate)` pairs of every real component, for reports.
    pub fn named_estimates(&self) -> Vec<(String, Estimate)> {
        let mut out = vec![
            ("mean_n1".to_string(), self.mean_n1),
            ("mean_n2".to_string(), self.mean_n2),
            ("coherence_re".to_string(), self.coherence.re),
            ("coherence_im".to_string(), self.coherence.im),
        ];
        let complex = [
            ("third_order_12", self.third_order_12),
            ("third_order_21", self.third_order_21),
            ("pair_amplitude", self.pair_amplitude),
        ];
        for (name, c) in complex {
            if let Some(c) = c {
                out.push((format!("{name}_re"), c.re));
                out.push((format!("{name}_im"), c.im));
            }
        }
        if let Some(e) = self.number_correlation {
            out.push(("number_correlation".to_string(), e));
        }
        out
    }
}

fn basis(delta_phi: f64) -> [f64; 5] {
    [
        1.0,
        delta_phi.cos(),
        delta_phi.sin(),
        (2.0 * delta_phi).cos(),
        (2.0 * delta_phi).sin(),
    ]
}

fn check_grid(set: &CorrelationSet) -> Result<()> {
    let m = set.slices.len();
    if m < MIN_GRID_POINTS {
        return Err(Error::GridTooCoarse {
            needed: MIN_GRID_POINTS,
            got: m,
        });
    }
    let mut angles: Vec<f64> = set
        .slices
        .iter()
        .map(|s| s.delta_phi.rem_euclid(std::f64::consts::TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    let step = std::f64::consts::TAU / m as f64;
    let uniform = angles
        .windows(2)
        .all(|w| (w[1] - w[0] - step).abs() < GRID_TOL)
        && (angles[0] + std::f64::consts::TAU - angles[m - 1] - step).abs() < GRID_TOL;
    if !uniform {
        return Err(Error::GridTooCoarse {
            needed: MIN_GRID_POINTS,
            got: 0,
        });
    }
    Ok(())
}

struct Fitter<'a> {
    set: &'a CorrelationSet,
    design: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl<'a> Fitter<'a> {
    fn new(set: &'a CorrelationSet) -> Result<Self> {
        let m = set.slices.len();
        let design = DMatrix::from_fn(m, 5, |j, i| basis(set.slices[j].delta_phi)[i]);
        let pinv = SVD::new(design.clone(), true, true)
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Mismatch(e.to_string()))?;
        Ok(Self { set, design, pinv })
    }

    fn channel(&self, a: usize, b: usize) -> Result<Vec<Linear>> {
        (0..self.set.slices.len())
            .map(|s| self.set.entry(s, a, b))
            .collect()
    }

    /// Coefficients of the fit of `values`, with an aliasing check on residuals.
    fn fit(&self, a: usize, b: usize, values: &[Linear]) -> Result<(Vec<Linear>, ChannelFit)> {
        let n_vars = self.set.n_vars();
        let coeffs: Vec<Linear> = (0..5)
            .map(|i| {
                let mut c = Linear::constant(0.0, n_vars);
                for (j, v) in values.iter().enumerate() {
                    c.add_scaled(v, self.pinv[(i, j)]);
                }
                c
            })
            .collect();
        let cov = &self.set.covariance;
        let mut max_ratio: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for (j, v) in values.iter().enumerate() {
            let mut r = v.clone();
            for (i, c) in coeffs.iter().enumerate() {
                r.add_scaled(c, -self.design[(j, i)]);
            }
            let se = cov.se(&r);
            let abs = r.value.abs();
            max_abs = max_abs.max(abs);
            if abs > RESIDUAL_FLOOR {
                max_ratio = max_ratio.max(if se > 0.0 { abs / se } else { f64::INFINITY });
            }
            if abs > ALIASING_SIGMAS * se + RESIDUAL_FLOOR {
                return Err(Error::Aliasing {
                    a,
                    b,
                    residual: r.value,
                    se,
                });
            }
        }
        let report = ChannelFit {
            a,
            b,
            coefficients: coeffs.iter().map(|c| cov.estimate(c)).collect(),
            max_residual_ratio: max_ratio,
            max_abs_residual: max_abs,
        };
        Ok((coeffs, report))
    }
}

fn complex(cov: &crate::lab::BlockCovariance, re: &Linear, im: &Linear) -> ComplexEstimate {
    ComplexEstimate {
        re: cov.estimate(re),
        im: cov.estimate(im),
    }
}

/// Extracts mean photon numbers, the two-time coherence and, when fourth
/// orders are present, the third-order amplitudes, the pair amplitude and the
/// photon-number correlation.
pub fn extract_physics(set: &CorrelationSet) -> Result<PhysicalQuantities> {
    if !set.averaged() {
        return Err(Error::Mismatch(
            "harmonic extraction needs phase-averaged correlations".into(),
        ));
    }
    if set.n_max < 2 {
        return Err(Error::IncompleteGrid("need correlations up to order 2".into()));
    }
    check_grid(set)?;
    let fitter = Fitter::new(set)?;
    let cov = &set.covariance;
    let mut fits = Vec::new();
    let mut flags = Vec::new();

    let (c20, f) = fitter.fit(2, 0, &fitter.channel(2, 0)?)?;
    fits.push(f);
    let (c02, f) = fitter.fit(0, 2, &fitter.channel(0, 2)?)?;
    fits.push(f);
    let cross = fitter.channel(1, 1)?;
    let (c11, f) = fitter.fit(1, 1, &cross)?;
    fits.push(f);

    let n1 = c20[0].shifted(-0.5);
    let n2 = c02[0].shifted(-0.5);
    let mean_n1 = cov.estimate(&n1);
    let mean_n2 = cov.estimate(&n2);
    for (name, e) in [("mean_n1", mean_n1), ("mean_n2", mean_n2)] {
        if e.value < -NEGATIVE_FLAG_SIGMAS * e.se {
            flags.push(format!("{name} = {:.6} is negative beyond 3 SE ({:.3e})", e.value, e.se));
        }
    }
    let coherence = complex(cov, &c11[1], &c11[2]);

    let (mut third_12, mut third_21, mut pair, mut number) = (None, None, None, None);
    if set.n_max >= 4 {
        let residue = |a: usize, b: usize| -> Result<Vec<Linear>> {
            Ok(fitter
                .channel(a, b)?
                .into_iter()
                .zip(&cross)
                .map(|(mut v, x)| {
                    v.add_scaled(x, -1.5);
                    v
                })
                .collect())
        };
        let (c31, f) = fitter.fit(3, 1, &residue(3, 1)?)?;
        fits.push(f);
        third_12 = Some(complex(cov, &c31[1].scaled(2.0 / 3.0), &c31[2].scaled(2.0 / 3.0)));
        let (c13, f) = fitter.fit(1, 3, &residue(1, 3)?)?;
        fits.push(f);
        third_21 = Some(complex(cov, &c13[1].scaled(2.0 / 3.0), &c13[2].scaled(-2.0 / 3.0)));

        let (c22, f) = fitter.fit(2, 2, &fitter.channel(2, 2)?)?;
        fits.push(f);
        pair = Some(complex(cov, &c22[3].scaled(2.0), &c22[4].scaled(2.0)));
        // ⟨n1 n2⟩ = DC(2,2) - n̄1/2 - n̄2/2 - 1/4
        let n_vars = set.n_vars();
        let nn = Linear::combination(&[(1.0, &c22[0]), (-0.5, &n1), (-0.5, &n2)], n_vars).shifted(-0.25);
        number = Some(cov.estimate(&nn));
    }

    Ok(PhysicalQuantities {
        corrected: set.corrected,
        eta: set.eta,
        mean_n1,
        mean_n2,
        coherence,
        third_order_12: third_12,
        third_order_21: third_21,
        pair_amplitude: pair,
        number_correlation: number,
        fits,
        flags,
    })
}

/// Interference term `⟨F1 F2⟩(Δφ)` from two `q = 1` measurements at `Δφ`
/// and `Δφ + π`: `(⟨F²⟩_Δφ - ⟨F²⟩_{Δφ+π}) / 4`.
///
/// This is the term as measured, i.e. attenuated by `η²`; divide by `η²` for
/// the ideal-detection value.
pub fn double_slit_difference(at: &MomentRow, opposite: &MomentRow) -> Result<Estimate> {
    for r in [at, opposite] {
        if (r.q - 1.0).abs() > 1e-12 {
            return Err(Error::Mismatch(format!("double-slit rows need q = 1, got {}", r.q)));
        }
        if r.moments.len() < 2 {
            return Err(Error::IncompleteGrid("second moments missing".into()));
        }
    }
    if at.eta != opposite.eta {
        return Err(Error::Mismatch("rows taken at different efficiencies".into()));
    }
    let shift = (opposite.delta_phi - at.delta_phi - std::f64::consts::PI).rem_euclid(std::f64::consts::TAU);
    if shift.min(std::f64::consts::TAU - shift) > GRID_TOL {
        return Err(Error::Mismatch("rows are not half a period apart in Δφ".into()));
    }
    let scale = 4.0;
    Ok(Estimate {
        value: (at.moment(2) - opposite.moment(2)) / scale,
        se: at.moment_se(2).hypot(opposite.moment_se(2)) / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{decontaminate, invert_q_system, synthetic_table};
    use crate::oracle::{contaminate, exact_physics, exact_table};
    use crate::zoo;
    use std::f64::consts::{PI, TAU};

    fn exact_set(state: &crate::fock::FockState, grid: usize, eta: f64) -> CorrelationSet {
        let tables: Vec<_> = (0..grid)
            .map(|j| {
                let ideal = exact_table(state, 4, 0.0, TAU * j as f64 / grid as f64, true, 1.0).unwrap();
                contaminate(&ideal, eta).unwrap()
            })
            .collect();
        let table = synthetic_table(&tables, &chebyshevq(), 4).unwrap();
        decontaminate(&invert_q_system(&table, 4).unwrap(), eta).unwrap()
    }

    fn chebyshevq() -> Vec<f64> {
        crate::lab::chebyshev_q_grid(5, 0.0, 2.0)
    }

    #[test]
    fn exact_extraction_on_zoo() {
        for (name, state) in zoo::standard_zoo(16).unwrap() {
            let truth = exact_physics(&state).unwrap();
            let p = extract_physics(&exact_set(&state, 8, 0.6)).unwrap();
            let tol = 1e-8;
            assert!((p.mean_n1.value - truth.mean_n1).abs() < tol, "{name}");
            assert!((p.mean_n2.value - truth.mean_n2).abs() < tol, "{name}");
            assert!((p.coherence.re.value - truth.coherence.re).abs() < tol, "{name}");
            assert!((p.coherence.im.value - truth.coherence.im).abs() < tol, "{name}");
            let t12 = p.third_order_12.unwrap();
            assert!((t12.re.value - truth.third_order_12.re).abs() < tol, "{name}");
            assert!((t12.im.value - truth.third_order_12.im).abs() < tol, "{name}");
            let t21 = p.third_order_21.unwrap();
            assert!((t21.re.value - truth.third_order_21.re).abs() < tol, "{name}");
            assert!((t21.im.value - truth.third_order_21.im).abs() < tol, "{name}");
            let pa = p.pair_amplitude.unwrap();
            assert!((pa.re.value - truth.pair_amplitude.re).abs() < tol, "{name}");
            assert!((pa.im.value - truth.pair_amplitude.im).abs() < tol, "{name}");
            assert!((p.number_correlation.unwrap().value - truth.number_correlation).abs() < tol, "{name}");
            assert!(p.flags.is_empty());
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let s = zoo::coherent_pair(num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 1.0), 16).unwrap();
        assert!(matches!(
            extract_physics(&exact_set(&s, 4, 1.0)),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn non_uniform_grid_is_rejected() {
        let s = zoo::coherent_pair(num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 1.0), 16).unwrap();
        let mut set = exact_set(&s, 6, 1.0);
        set.slices[2].delta_phi += 0.1;
        assert!(extract_physics(&set).is_err());
    }

    #[test]
    fn aliasing_is_detected() {
        let s = zoo::coherent_pair(num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 1.0), 16).unwrap();
        let mut set = exact_set(&s, 8, 1.0);
        // inject a third harmonic into the cross channel
        for slice in &mut set.slices {
            let e = slice.entries.get_mut(&(1, 1)).unwrap();
            e.value += 0.3 * (3.0 * slice.delta_phi).cos();
        }
        assert!(matches!(
            extract_physics(&set),
            Err(Error::Aliasing { a: 1, b: 1, .. })
        ));
    }

    fn row(q: f64, delta_phi: f64, m2: f64, se: f64, eta: f64) -> MomentRow {
        MomentRow {
            q,
            phi: 0.0,
            delta_phi,
            eta,
            shots: 100,
            moments: vec![0.0, m2],
            se: vec![0.0, se],
            covariance: vec![vec![0.0, 0.0], vec![0.0, se * se]],
        }
    }

    #[test]
    fn double_slit_arithmetic() {
        let d = double_slit_difference(&row(1.0, 0.3, 3.0, 0.03, 1.0), &row(1.0, 0.3 + PI, 1.0, 0.04, 1.0)).unwrap();
        assert!((d.value - 0.5).abs() < 1e-15);
        assert!((d.se - 0.05 / 4.0).abs() < 1e-15);
        assert!(double_slit_difference(&row(1.0, 0.0, 3.0, 0.0, 0.5), &row(1.0, PI, 1.0, 0.0, 0.6)).is_err());
        assert!(double_slit_difference(&row(2.0, 0.0, 3.0, 0.0, 1.0), &row(1.0, PI, 1.0, 0.0, 1.0)).is_err());
        assert!(double_slit_difference(&row(1.0, 0.0, 3.0, 0.0, 1.0), &row(1.0, 1.0, 1.0, 0.0, 1.0)).is_err());
    }
}
