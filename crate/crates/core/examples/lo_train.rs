//! Local-oscillator pulse overlaps and the mode-independence gate.
//!
//!     cargo run --example lo_train

use std::f64::consts::TAU;

use homodyne::pulse::{overlap, overlap_numerical, validate_train, LoTrain, PulseEnvelope};
use num_complex::Complex64;

fn main() -> homodyne::Result<()> {
    let sigma = 1.0;
    println!("separation   |overlap|      quadrature     gate (tol 1e-4)");
    for dt in [0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0] {
        let a = PulseEnvelope::gaussian(0.0, sigma, TAU)?;
        let b = PulseEnvelope::gaussian(dt * sigma, sigma, TAU)?;
        let exact = overlap(&a, &b)?.norm();
        let numeric = overlap_numerical(&a, &b)?.norm();
        let train = LoTrain::new(vec![a, b], vec![Complex64::new(1.0, 0.0), Complex64::new(0.7, 0.0)])?;
        let report = validate_train(&train, 1e-4)?;
        println!(
            "{dt:>6.1} σ   {exact:.6e}   {numeric:.6e}   {}",
            if report.pass { "pass" } else { "FAIL" }
        );
    }

    // Delaying the whole train advances every LO phase by ω0·dt.
    let train = LoTrain::new(
        vec![PulseEnvelope::gaussian(0.0, 1.0, TAU)?, PulseEnvelope::gaussian(10.0, 1.0, TAU)?],
        vec![Complex64::new(1.0, 0.0), Complex64::from_polar(0.5, 0.3)],
    )?;
    let shifted = train.shift_phases(0.125);
    println!("phases {:?} -> {:?}", train.phases(), shifted.phases());
    Ok(())
}
