use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use homodyne::runner::{self, io, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "homodyne", version, about = "Pulsed homodyne simulation and two-time moment reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML)
    config: PathBuf,
    /// Master sampling seed
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per setting
    #[arg(long)]
    shots: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Highest moment order
    #[arg(long)]
    n_max: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> homodyne::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            shots: self.shots,
            out: self.out.clone(),
            n_max: self.n_max,
        })?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample every (q, Δφ) setting and write batches, moments and a manifest
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Sample even if the LO pulses overlap
        #[arg(long)]
        override_overlap_check: bool,
    },
    /// Reconstruct correlations and physical quantities from a run
    Reconstruct {
        /// Run directory or manifest
        run: PathBuf,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Write exact correlations and quantities for a config
    Oracle {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// z-scores of a run (or oracle dump) against a reference
    Compare {
        candidate: PathBuf,
        reference: PathBuf,
        /// Where to write the report (JSON; a CSV is written alongside)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the full pipeline over detection efficiencies
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.6,0.9,1.0")]
        etas: Vec<f64>,
        #[arg(long)]
        override_overlap_check: bool,
    },
    /// Check the LO pulses for mode independence
    ValidateTrain {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn run(cli: Cli) -> homodyne::Result<bool> {
    match cli.command {
        Command::Simulate {
            cfg,
            override_overlap_check,
        } => {
            let s = runner::run_simulate(&cfg.load()?, override_overlap_check)?;
            if s.overlap_check_overridden {
                eprintln!("warning: overlap check overridden (max overlap {:.3e})", s.train.max_overlap);
            }
            println!("{} batches written to {} (config {})", s.batches, s.dir.display(), s.config_hash);
            Ok(true)
        }
        Command::Reconstruct { run, n_max } => {
            let r = runner::run_reconstruct(&run, n_max)?;
            for w in r.corrected.warnings.iter().chain(&r.notes) {
                eprintln!("warning: {w}");
            }
            if let Some(p) = &r.physics {
                for (name, e) in p.named_estimates() {
                    println!("{name:>20} = {:>12.6} ± {:.6}", e.value, e.se);
                }
                for f in &p.flags {
                    eprintln!("flag: {f}");
                }
            }
            Ok(true)
        }
        Command::Oracle { cfg } => {
            let cfg = cfg.load()?;
            let dump = runner::run_oracle(&cfg, &cfg.output.dir)?;
            println!("oracle for config {} written to {}", dump.config_hash, cfg.output.dir.display());
            Ok(true)
        }
        Command::Compare {
            candidate,
            reference,
            out,
        } => {
            let report = runner::run_compare(&candidate, &reference)?;
            if let Some(out) = out {
                io::write_json(&out, &report)?;
                report.csv().write(&out.with_extension("csv"))?;
            }
            for r in report.rows.iter().filter(|r| r.z.abs() > report.threshold) {
                println!("{}: z = {:.2}", r.quantity, r.z);
            }
            println!(
                "{} quantities, max |z| = {:.3} ({})",
                report.rows.len(),
                report.max_abs_z,
                if report.pass { "pass" } else { "FAIL" }
            );
            Ok(report.pass)
        }
        Command::Sweep {
            cfg,
            etas,
            override_overlap_check,
        } => {
            let rows = runner::run_sweep(&cfg.load()?, &etas, override_overlap_check)?;
            for r in &rows {
                println!("eta = {:.3}: max |z| = {:.3} {}", r.eta, r.max_abs_z, if r.pass { "pass" } else { "FAIL" });
            }
            Ok(rows.iter().all(|r| r.pass))
        }
        Command::ValidateTrain { cfg } => {
            let report = runner::run_validate_train(&cfg.load()?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
