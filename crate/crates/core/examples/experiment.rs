//! A file-based experiment: simulate a config into a run directory,
//! reconstruct it, write the exact reference and compare the two.
//!
//!     cargo run --release --example experiment [config.toml] [out_dir]

use std::path::PathBuf;

use homodyne::fock::StateKind;
use homodyne::runner::{run_compare, run_oracle, run_reconstruct, run_simulate, ExperimentConfig};

fn main() -> homodyne::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = match args.next() {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => {
            let mut cfg = ExperimentConfig::new(vec![
                StateKind::Coherent { re: 0.8, im: 0.0 },
                StateKind::Squeezed { r: 0.3, theta: 0.0 },
            ]);
            cfg.measurement.eta = 0.7;
            cfg.measurement.shots = 100_000;
            cfg
        }
    };
    cfg.output.dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("homodyne-experiment"));
    let dir = cfg.output.dir.clone();

    let sim = run_simulate(&cfg, false)?;
    println!("{} batches in {} (config {})", sim.batches, dir.display(), sim.config_hash);

    let rec = run_reconstruct(&dir, None)?;
    for note in &rec.notes {
        println!("note: {note}");
    }

    run_oracle(&cfg, &dir)?;
    let report = run_compare(&dir, &dir.join("oracle.json"))?;
    for r in &report.rows {
        println!("{:>48}   z = {:>+6.2}", r.quantity, r.z);
    }
    println!("max |z| = {:.2}: {}", report.max_abs_z, if report.pass { "pass" } else { "FAIL" });
    Ok(())
}
