//! Local-oscillator pulse envelopes and the mode-independence gate.
//!
//! An envelope `g(t) = (2πσ²)^{-1/4} exp(-(t - t_c)² / (4σ²)) e^{-iω₀t}` is
//! normalized in L², so `|g|²` is a Gaussian of standard deviation `σ`. The
//! carrier is common to all pulses of a train and cancels in overlaps.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_OVERLAP_TOLERANCE: f64 = 1e-4;
const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeShape {
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    pub center: f64,
    pub width: f64,
    pub carrier: f64,
    pub shape: EnvelopeShape,
}

impl PulseEnvelope {
    pub fn gaussian(center: f64, width: f64, carrier: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidTrain(format!("width {width} must be positive")));
        }
        if !(center.is_finite() && carrier.is_finite()) {
            return Err(Error::InvalidTrain("non-finite center or carrier".into()));
        }
        Ok(Self {
            center,
            width,
            carrier,
            shape: EnvelopeShape::Gaussian,
        })
    }

    pub fn value(&self, t: f64) -> Complex64 {
        match self.shape {
            EnvelopeShape::Gaussian => {
                let s = self.width;
                let amp = (2.0 * std::f64::consts::PI * s * s).powf(-0.25)
                    * (-(t - self.center).powi(2) / (4.0 * s * s)).exp();
                Complex64::from_polar(amp, -self.carrier * t)
            }
        }
    }

    /// Interval outside of which the envelope magnitude is below `e^{-100}`.
    fn support(&self) -> (f64, f64) {
        (self.center - 20.0 * self.width, self.center + 20.0 * self.width)
    }
}

fn check_comparable(a: &PulseEnvelope, b: &PulseEnvelope) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::IncomparableEnvelopes("different shape families".into()));
    }
    if a.carrier != b.carrier {
        return Err(Error::IncomparableEnvelopes(format!(
            "carrier frequencies {} and {} differ",
            a.carrier, b.carrier
        )));
    }
    Ok(())
}

/// `∫ g_a*(t) g_b(t) dt`, closed form for Gaussians.
pub fn overlap(a: &PulseEnvelope, b: &PulseEnvelope) -> Result<Complex64> {
    check_comparable(a, b)?;
    match a.shape {
        EnvelopeShape::Gaussian => {
            let (sa2, sb2) = (a.width * a.width, b.width * b.width);
            let dt = a.center - b.center;
            let value = (2.0 * a.width * b.width / (sa2 + sb2)).sqrt()
                * (-dt * dt / (4.0 * (sa2 + sb2))).exp();
            Ok(Complex64::new(value, 0.0))
        }
    }
}

/// Overlap by adaptive Simpson quadrature of the envelope product.
pub fn overlap_numerical(a: &PulseEnvelope, b: &PulseEnvelope) -> Result<Complex64> {
    check_comparable(a, b)?;
    let (lo_a, hi_a) = a.support();
    let (lo_b, hi_b) = b.support();
    let (lo, hi) = (lo_a.max(lo_b), hi_a.min(hi_b));
    if lo >= hi {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let f = |t: f64| a.value(t).conj() * b.value(t);
    // pre-split so narrow peaks are never skipped by the first coarse estimate
    let panels = 64;
    let h = (hi - lo) / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let x0 = lo + p as f64 * h;
        total += adaptive_simpson(&f, x0, x0 + h, QUADRATURE_TOL / panels as f64, 40);
    }
    Ok(total)
}

fn adaptive_simpson<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> Complex64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// LO pulse train: envelopes and complex LO amplitudes `γ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoTrain {
    pub pulses: Vec<PulseEnvelope>,
    pub amplitudes: Vec<Complex64>,
}

impl LoTrain {
    pub fn new(pulses: Vec<PulseEnvelope>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if pulses.is_empty() {
            return Err(Error::InvalidTrain("train has no pulses".into()));
        }
        if pulses.len() != amplitudes.len() {
            return Err(Error::InvalidTrain(format!(
                "{} pulses but {} amplitudes",
                pulses.len(),
                amplitudes.len()
            )));
        }
        if amplitudes[0].norm() == 0.0 || amplitudes.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(Error::InvalidTrain(
                "first amplitude must be nonzero and all amplitudes finite".into(),
            ));
        }
        Ok(Self { pulses, amplitudes })
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Relative amplitudes `|γ_k| / |γ_1|`.
    pub fn relative_amplitudes(&self) -> Vec<f64> {
        let g1 = self.amplitudes[0].norm();
        self.amplitudes.iter().map(|g| g.norm() / g1).collect()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|g| g.arg()).collect()
    }

    /// Delays the whole train by `dt`; every LO phase advances by `ω₀ dt`.
    pub fn shift_phases(&self, dt: f64) -> LoTrain {
        let pulses = self
            .pulses
            .iter()
            .map(|p| PulseEnvelope {
                center: p.center + dt,
                ..p.clone()
            })
            .collect();
        let amplitudes = self
            .amplitudes
            .iter()
            .zip(&self.pulses)
            .map(|(g, p)| g * Complex64::from_polar(1.0, p.carrier * dt))
            .collect();
        LoTrain { pulses, amplitudes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub gram: DMatrix<Complex64>,
    pub max_overlap: f64,
    /// Pulse pair attaining `max_overlap`, if there is more than one pulse.
    pub worst_pair: Option<(usize, usize)>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Gram matrix of the train; passes when every off-diagonal overlap is
/// below `tolerance` in magnitude.
pub fn validate_train(train: &LoTrain, tolerance: f64) -> Result<TrainReport> {
    let n = train.len();
    let mut gram = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut max_overlap = 0.0;
    let mut worst_pair = None;
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = overlap(&train.pulses[i], &train.pulses[j])?;
            if i < j && (worst_pair.is_none() || gram[(i, j)].norm() > max_overlap) {
                max_overlap = gram[(i, j)].norm();
                worst_pair = Some((i, j));
            }
        }
    }
    Ok(TrainReport {
        gram,
        max_overlap,
        worst_pair,
        tolerance,
        pass: max_overlap < tolerance,
    })
}
