//! The full statistical pipeline in memory: sample every (q, Δφ) setting,
//! estimate moments, invert the q system, correct for efficiency and fit the
//! Δφ harmonics. Each quantity is printed next to its exact value.
//!
//!     cargo run --release --example reconstruction

use homodyne::fock::StateKind;
use homodyne::lab::extract_physics;
use homodyne::oracle::exact_physics;
use homodyne::runner::{measure, reconstruct_table, ExperimentConfig};

fn main() -> homodyne::Result<()> {
    let mut cfg = ExperimentConfig::new(vec![StateKind::TwoModeSqueezed { r: 0.5 }]);
    cfg.measurement.eta = 0.8;
    cfg.measurement.shots = 300_000;

    let truth = exact_physics(&cfg.build_state()?)?;
    let table = measure(&cfg)?;
    let (_, corrected) = reconstruct_table(&table, cfg.measurement.n_max, cfg.measurement.eta)?;
    let p = extract_physics(&corrected)?;

    let exact = [
        truth.mean_n1,
        truth.mean_n2,
        truth.coherence.re,
        truth.coherence.im,
        truth.third_order_12.re,
        truth.third_order_12.im,
        truth.third_order_21.re,
        truth.third_order_21.im,
        truth.pair_amplitude.re,
        truth.pair_amplitude.im,
        truth.number_correlation,
    ];
    println!("two-mode squeezed r = 0.5, eta = 0.8, {} settings", table.rows.len());
    println!("{:>20}   {:>20}   {:>9}   {:>6}", "quantity", "estimate", "exact", "z");
    for ((name, e), t) in p.named_estimates().into_iter().zip(exact) {
        let z = if e.se > 0.0 { (e.value - t) / e.se } else { 0.0 };
        println!("{name:>20}   {:>9.5} ± {:.5}   {t:>9.5}   {z:>+6.2}", e.value, e.se);
    }
    for f in &p.flags {
        println!("flag: {f}");
    }
    Ok(())
}
