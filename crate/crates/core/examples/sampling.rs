//! Sampling the summed field strength `F1 + q F2` with finite detection
//! efficiency, and estimating its moments with bootstrap errors.
//!
//!     cargo run --release --example sampling

use homodyne::fock::{make_state_with_tolerance, FockState, StateKind};
use homodyne::lab::{estimate_moments, BootstrapConfig};
use homodyne::measurement::{explicit_noise, sample, MeasurementSetting, PhaseMode};
use homodyne::oracle::exact_table;
use homodyne::zoo;
use num_complex::Complex64;

fn main() -> homodyne::Result<()> {
    let state = zoo::coherent_pair(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), 16)?;
    let setting = MeasurementSetting {
        q: 0.8,
        phi: 0.0,
        delta_phi: 1.2,
        eta: 0.7,
        phase_mode: PhaseMode::Averaged,
        shots: 500_000,
        seed: 42,
    };
    let batch = sample(&state, &setting)?;
    let table = estimate_moments(&[batch], 4, &BootstrapConfig::default())?;
    let exact = exact_table(&state, 4, 0.0, setting.delta_phi, true, setting.eta)?;
    println!("order   sampled               exact");
    for n in 1..=4 {
        let row = &table.rows[0];
        println!("{n:>5}   {:>8.4} ± {:.4}     {:>8.4}", row.moment(n), row.moment_se(n), exact.sum_moment(setting.q, n)?);
    }

    // The Gaussian-noise shortcut against explicit vacuum noise modes.
    let a = make_state_with_tolerance(&StateKind::coherent(Complex64::new(0.5, 0.2)), 3, 1, Some(0.05))?;
    let b = make_state_with_tolerance(&StateKind::Vacuum, 3, 1, None)?;
    let small = FockState::product(&[a, b])?;
    let s = MeasurementSetting {
        shots: 100_000,
        phase_mode: PhaseMode::Locked,
        ..setting
    };
    let cfg = BootstrapConfig::default();
    let shortcut = estimate_moments(&[sample(&small, &s)?], 4, &cfg)?;
    let explicit = estimate_moments(&[explicit_noise::sample(&small, &MeasurementSetting { seed: 7, ..s.clone() })?], 4, &cfg)?;
    println!("\ncutoff 3, shortcut vs explicit noise modes:");
    for n in 1..=4 {
        let (x, y) = (&shortcut.rows[0], &explicit.rows[0]);
        let z = (x.moment(n) - y.moment(n)) / x.moment_se(n).hypot(y.moment_se(n));
        println!("{n:>5}   {:>8.4}   {:>8.4}   z = {z:+.2}", x.moment(n), y.moment(n));
    }
    Ok(())
}
