//! Temporal double slit: two pulses summed with equal weight, with the LO
//! phase difference swept. The fringe is the difference of second moments
//! at Δφ and Δφ + π.
//!
//!     cargo run --release --example double_slit

use std::f64::consts::PI;

use homodyne::lab::{double_slit_difference, estimate_moments, BootstrapConfig};
use homodyne::measurement::{sample, MeasurementSetting, PhaseMode};
use homodyne::oracle::exact_table;
use homodyne::zoo;
use num_complex::Complex64;

fn main() -> homodyne::Result<()> {
    let eta = 0.9;
    let state = zoo::coherent_pair(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), 16)?;
    let boot = BootstrapConfig::default();
    let row = |dphi: f64, seed: u64| {
        let s = MeasurementSetting {
            q: 1.0,
            phi: 0.0,
            delta_phi: dphi,
            eta,
            phase_mode: PhaseMode::Averaged,
            shots: 200_000,
            seed,
        };
        estimate_moments(&[sample(&state, &s)?], 2, &boot).map(|mut t| t.rows.remove(0))
    };
    // The fringe is the measured cross correlation ⟨F1 F2⟩, attenuated by η².
    println!("  Δφ      fringe            expected");
    for k in 0..8 {
        let dphi = k as f64 * PI / 4.0;
        let d = double_slit_difference(&row(dphi, 2 * k)?, &row(dphi + PI, 2 * k + 1)?)?;
        println!("{dphi:>5.2}   {:>7.4} ± {:.4}   {:>7.4}", d.value, d.se, exact_table(&state, 2, 0.0, dphi, true, eta)?.get(1, 1)?);
    }
    Ok(())
}
