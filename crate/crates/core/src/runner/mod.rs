//! Config-driven experiments: sampling sweeps over `(q, Δφ)`, reconstruction,
//! exact reference values and comparison reports.
//!
//! A run directory holds `config.toml`, `train_report.json`, one CSV per
//! setting under `batches/`, `moments.{json,csv}` and, after
//! reconstruction, `correlations_{contaminated,corrected}.{json,csv}` and
//! `physics_{contaminated,corrected}.{json,csv}`. `manifest.json` lists every
//! file with its SHA-256 and is written last.

pub mod config;
pub mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::{
    decontaminate, extract_physics, invert_q_system, moment_row, CorrelationRecord, CorrelationSet, Estimate,
    MomentTable, PhysicalQuantities, QSolve,
};
use crate::measurement::{PhaseMode, TwoPulseSampler};
use crate::oracle::{exact_physics, exact_table, ExactPhysics};
use crate::pulse::{validate_train, TrainReport};

pub use config::{ExperimentConfig, Overrides};
use io::{read_batch, read_json, render_batch, sig6, CsvTable, FileLog, Manifest, Seeds, BATCH_DIR, CONFIG_FILE, MANIFEST_FILE};

/// Comparisons fail when any `|z|` exceeds this.
pub const Z_THRESHOLD: f64 = 5.0;

fn seeds_of(cfg: &ExperimentConfig) -> Seeds {
    Seeds {
        sampling: cfg.seeds.sampling,
        bootstrap: cfg.seeds.bootstrap,
        resamples: cfg.seeds.resamples,
    }
}

fn provenance(hash: &str, seeds: &Seeds) -> Vec<String> {
    vec![
        format!("config_hash = {hash}"),
        format!(
            "seeds = sampling {}, bootstrap {}, resamples {}",
            seeds.sampling, seeds.bootstrap, seeds.resamples
        ),
    ]
}

/// Gram report of the configured LO train; the overlap does not depend on
/// the amplitudes, so one report covers every setting.
pub fn run_validate_train(cfg: &ExperimentConfig) -> Result<TrainReport> {
    validate_train(&cfg.train_for(1.0, 0.0)?, cfg.train.overlap_tolerance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub dir: PathBuf,
    pub config_hash: String,
    pub batches: usize,
    pub train: TrainReport,
    pub overlap_check_overridden: bool,
}

fn moments_csv(table: &MomentTable, hash: &str, seeds: &Seeds) -> CsvTable {
    let mut csv = CsvTable::new(provenance(hash, seeds), &["q", "phi", "delta_phi", "eta", "shots", "order", "moment", "se"]);
    for r in &table.rows {
        for n in 1..=table.n_max {
            csv.push(vec![
                sig6(r.q),
                sig6(r.phi),
                sig6(r.delta_phi),
                sig6(r.eta),
                r.shots.to_string(),
                n.to_string(),
                sig6(r.moment(n)),
                sig6(r.moment_se(n)),
            ]);
        }
    }
    csv
}

/// Samples every setting of the config in memory and estimates its moments;
/// the table equals the one `run_simulate` writes for the same config.
pub fn measure(cfg: &ExperimentConfig) -> Result<MomentTable> {
    cfg.validate()?;
    let state = cfg.build_state()?;
    let sampler = TwoPulseSampler::new(&state)?;
    let boot = cfg.bootstrap();
    let n_max = cfg.measurement.n_max;
    let rows = cfg
        .settings()
        .par_iter()
        .enumerate()
        .map(|(i, p)| moment_row(&sampler.sample(&p.setting)?, i, n_max, &boot))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentTable {
        phase_mode: cfg.measurement.phase_mode,
        n_max,
        bootstrap: boot,
        rows,
    })
}

/// Contaminated and efficiency-corrected correlations of a moment table.
pub fn reconstruct_table(table: &MomentTable, n_max: usize, eta: f64) -> Result<(CorrelationSet, CorrelationSet)> {
    check_grid(table, n_max)?;
    let contaminated = invert_q_system(table, n_max)?;
    let corrected = decontaminate(&contaminated, eta)?;
    Ok((contaminated, corrected))
}

/// Samples every `(q, Δφ)` setting of the config into `cfg.output.dir`.
pub fn run_simulate(cfg: &ExperimentConfig, override_overlap_check: bool) -> Result<SimulateSummary> {
    cfg.validate()?;
    let train = run_validate_train(cfg)?;
    if !train.pass && !override_overlap_check {
        return Err(Error::OverlapGate {
            max_overlap: train.max_overlap,
            tolerance: train.tolerance,
        });
    }
    let state = cfg.build_state()?;
    let sampler = TwoPulseSampler::new(&state)?;
    let hash = cfg.hash()?;
    let seeds = seeds_of(cfg);
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)?;
    let mut log = FileLog::default();
    log.record(&dir, CONFIG_FILE, "config", cfg.to_toml()?.as_bytes())?;
    log.record_json(&dir, "train_report.json", "train", &train)?;

    let points = cfg.settings();
    let boot = cfg.bootstrap();
    let n_max = cfg.measurement.n_max;
    let results: Vec<_> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<_> {
            let batch = sampler.sample(&p.setting)?;
            let text = render_batch(&batch, &hash)?;
            let rel = format!("{BATCH_DIR}/{}", p.file_name());
            io::write_atomic(&dir.join(&rel), text.as_bytes())?;
            let entry = io::ManifestEntry {
                path: rel,
                kind: "batch".into(),
                sha256: io::sha256_hex(text.as_bytes()),
            };
            Ok((entry, moment_row(&batch, i, n_max, &boot)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(results.len());
    for (entry, row) in results {
        log.push(entry);
        rows.push(row);
    }
    let table = MomentTable {
        phase_mode: cfg.measurement.phase_mode,
        n_max,
        bootstrap: boot,
        rows,
    };
    log.record_json(&dir, "moments.json", "moments", &table)?;
    log.record(&dir, "moments.csv", "moments", moments_csv(&table, &hash, &seeds).render().as_bytes())?;
    let manifest = Manifest {
        schema_version: config::SCHEMA_VERSION,
        config_hash: hash.clone(),
        seeds,
        files: log.into_entries(),
    };
    io::write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(SimulateSummary {
        dir,
        config_hash: hash,
        batches: points.len(),
        overlap_check_overridden: !train.pass,
        train,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFile {
    pub config_hash: String,
    pub seeds: Seeds,
    pub phase_mode: PhaseMode,
    pub eta: f64,
    pub n_max: usize,
    pub corrected: bool,
    pub warnings: Vec<String>,
    pub solves: Vec<QSolve>,
    pub correlations: Vec<CorrelationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsFile {
    pub config_hash: String,
    pub seeds: Seeds,
    pub corrected: bool,
    pub quantities: Option<PhysicalQuantities>,
    /// Why `quantities` is missing, if it is.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructSummary {
    pub dir: PathBuf,
    pub contaminated: CorrelationSet,
    pub corrected: CorrelationSet,
    pub physics: Option<PhysicalQuantities>,
    pub notes: Vec<String>,
}

fn load_run(path: &Path) -> Result<(Manifest, PathBuf, ExperimentConfig)> {
    let (manifest, dir) = Manifest::load(path)?;
    manifest.verify(&dir)?;
    let cfg = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let hash = cfg.hash()?;
    if hash != manifest.config_hash {
        return Err(Error::ConfigHashMismatch(manifest.config_hash, hash));
    }
    Ok((manifest, dir, cfg))
}

fn check_grid(table: &MomentTable, n_max: usize) -> Result<()> {
    let mut per_phase: BTreeMap<(u64, u64), BTreeSet<u64>> = BTreeMap::new();
    for r in &table.rows {
        let phi = if table.phase_mode == PhaseMode::Locked { r.phi } else { 0.0 };
        per_phase
            .entry((phi.to_bits(), r.delta_phi.to_bits()))
            .or_default()
            .insert(r.q.to_bits());
    }
    let needed = match table.phase_mode {
        PhaseMode::Averaged => n_max - n_max % 2 + 1,
        PhaseMode::Locked => n_max + 1,
    };
    for ((_, dphi), qs) in &per_phase {
        if qs.len() < needed {
            return Err(Error::IncompleteGrid(format!(
                "Δφ = {} has {} distinct q values; order {n_max} needs {needed}",
                f64::from_bits(*dphi),
                qs.len()
            )));
        }
    }
    Ok(())
}

fn correlation_file(set: &CorrelationSet, hash: &str, seeds: &Seeds) -> CorrelationFile {
    CorrelationFile {
        config_hash: hash.to_string(),
        seeds: seeds.clone(),
        phase_mode: set.phase_mode,
        eta: set.eta,
        n_max: set.n_max,
        corrected: set.corrected,
        warnings: set.warnings.clone(),
        solves: set.solves.clone(),
        correlations: set.records(),
    }
}

fn correlation_csv(file: &CorrelationFile) -> CsvTable {
    let mut comments = provenance(&file.config_hash, &file.seeds);
    comments.push(format!("corrected = {}, eta = {}", file.corrected, file.eta));
    let mut csv = CsvTable::new(comments, &["phi", "delta_phi", "a", "b", "value", "se"]);
    for r in &file.correlations {
        csv.push(vec![
            sig6(r.phi),
            sig6(r.delta_phi),
            r.a.to_string(),
            r.b.to_string(),
            sig6(r.value),
            sig6(r.se),
        ]);
    }
    csv
}

fn physics_csv(file: &PhysicsFile) -> CsvTable {
    let mut comments = provenance(&file.config_hash, &file.seeds);
    comments.push(format!("corrected = {}", file.corrected));
    if let Some(note) = &file.note {
        comments.push(format!("note = {note}"));
    }
    let mut csv = CsvTable::new(comments, &["quantity", "value", "se"]);
    if let Some(q) = &file.quantities {
        for (name, e) in q.named_estimates() {
            csv.push(vec![name, sig6(e.value), sig6(e.se)]);
        }
    }
    csv
}

/// Rebuilds the moment table from the batch files when a higher order than
/// the stored one is requested.
fn table_for(manifest: &Manifest, dir: &Path, cfg: &ExperimentConfig, n_max: usize) -> Result<MomentTable> {
    let stored: MomentTable = read_json(&dir.join("moments.json"))?;
    if stored.n_max >= n_max {
        return Ok(stored);
    }
    let boot = cfg.bootstrap();
    let entries: Vec<_> = manifest.files_of_kind("batch").collect();
    let rows = entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let file = read_batch(&dir.join(&e.path))?;
            if file.config_hash != manifest.config_hash {
                return Err(Error::ConfigHashMismatch(manifest.config_hash.clone(), file.config_hash));
            }
            moment_row(&file.batch, i, n_max, &boot)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentTable {
        phase_mode: stored.phase_mode,
        n_max,
        bootstrap: boot,
        rows,
    })
}

/// Inverts the q systems of a simulated run and writes contaminated and
/// efficiency-corrected correlations and physical quantities next to it.
pub fn run_reconstruct(path: &Path, n_max: Option<usize>) -> Result<ReconstructSummary> {
    let (mut manifest, dir, cfg) = load_run(path)?;
    let n_max = n_max.unwrap_or(cfg.measurement.n_max);
    if n_max == 0 || n_max > crate::lab::moments::MAX_ORDER {
        return Err(Error::OrderTooHigh {
            order: n_max,
            max: crate::lab::moments::MAX_ORDER,
            cutoff: cfg.state.cutoff,
        });
    }
    let expected = cfg.settings().len();
    let found = manifest.files_of_kind("batch").count();
    if found != expected {
        return Err(Error::IncompleteGrid(format!("{found} batch files for {expected} settings")));
    }
    let table = table_for(&manifest, &dir, &cfg, n_max)?;
    let (contaminated, corrected) = reconstruct_table(&table, n_max, cfg.measurement.eta)?;

    let hash = manifest.config_hash.clone();
    let seeds = manifest.seeds.clone();
    let mut log = FileLog::default();
    let mut notes = Vec::new();
    let mut physics = None;
    for (tag, set) in [("contaminated", &contaminated), ("corrected", &corrected)] {
        let cf = correlation_file(set, &hash, &seeds);
        log.record_json(&dir, &format!("correlations_{tag}.json"), "correlations", &cf)?;
        log.record(&dir, &format!("correlations_{tag}.csv"), "correlations", correlation_csv(&cf).render().as_bytes())?;
        let (quantities, note) = match extract_physics(set) {
            Ok(q) => (Some(q), None),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(n) = &note {
            notes.push(format!("{tag}: {n}"));
        }
        let pf = PhysicsFile {
            config_hash: hash.clone(),
            seeds: seeds.clone(),
            corrected: set.corrected,
            quantities,
            note,
        };
        log.record_json(&dir, &format!("physics_{tag}.json"), "physics", &pf)?;
        log.record(&dir, &format!("physics_{tag}.csv"), "physics", physics_csv(&pf).render().as_bytes())?;
        if set.corrected {
            physics = pf.quantities;
        }
    }
    manifest.files.retain(|e| e.kind != "correlations" && e.kind != "physics");
    manifest.files.extend(log.into_entries());
    io::write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(ReconstructSummary {
        dir,
        contaminated,
        corrected,
        physics,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub phi: f64,
    pub delta_phi: f64,
    pub a: usize,
    pub b: usize,
    /// Ideal detection.
    pub ideal: f64,
    /// At the configured efficiency.
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDump {
    pub kind: String,
    pub config_hash: String,
    pub seeds: Seeds,
    pub eta: f64,
    pub phase_mode: PhaseMode,
    pub n_max: usize,
    pub physics: ExactPhysics,
    pub correlations: Vec<OracleRecord>,
}

impl OracleDump {
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let p = &self.physics;
        let mut out = vec![
            ("mean_n1".to_string(), p.mean_n1),
            ("mean_n2".to_string(), p.mean_n2),
            ("coherence_re".to_string(), p.coherence.re),
            ("coherence_im".to_string(), p.coherence.im),
        ];
        if self.n_max >= 4 {
            for (name, c) in [
                ("third_order_12", p.third_order_12),
                ("third_order_21", p.third_order_21),
                ("pair_amplitude", p.pair_amplitude),
            ] {
                out.push((format!("{name}_re"), c.re));
                out.push((format!("{name}_im"), c.im));
            }
            out.push(("number_correlation".to_string(), p.number_correlation));
        }
        for r in &self.correlations {
            out.push((correlation_name(r.phi, r.delta_phi, r.a, r.b), r.ideal));
        }
        out
    }
}

fn correlation_name(phi: f64, delta_phi: f64, a: usize, b: usize) -> String {
    format!("corr_{a}_{b}@phi={phi:.9},dphi={delta_phi:.9}")
}

/// Exact correlations on the config's Δφ grid (ideal and at the configured
/// η) and the exact physical quantities; writes `oracle.{json,csv}` into `out`.
pub fn run_oracle(cfg: &ExperimentConfig, out: &Path) -> Result<OracleDump> {
    cfg.validate()?;
    let state = cfg.build_state()?;
    let averaged = cfg.measurement.phase_mode == PhaseMode::Averaged;
    let phi = if averaged { 0.0 } else { cfg.measurement.phi };
    let n_max = cfg.measurement.n_max;
    let eta = cfg.measurement.eta;
    let mut correlations = Vec::new();
    for dphi in cfg.delta_phi_grid() {
        let ideal = exact_table(&state, n_max, phi, dphi, averaged, 1.0)?;
        let measured = if eta == 1.0 {
            ideal.clone()
        } else {
            exact_table(&state, n_max, phi, dphi, averaged, eta)?
        };
        for (&(a, b), &v) in &ideal.values {
            correlations.push(OracleRecord {
                phi,
                delta_phi: dphi,
                a,
                b,
                ideal: v,
                measured: measured.values[&(a, b)],
            });
        }
    }
    let seeds = seeds_of(cfg);
    let dump = OracleDump {
        kind: "oracle".into(),
        config_hash: cfg.hash()?,
        seeds: seeds.clone(),
        eta,
        phase_mode: cfg.measurement.phase_mode,
        n_max,
        physics: exact_physics(&state)?,
        correlations,
    };
    io::write_json(&out.join("oracle.json"), &dump)?;
    let mut csv = CsvTable::new(provenance(&dump.config_hash, &seeds), &["quantity", "value"]);
    for (name, v) in dump.named_values() {
        csv.push(vec![format!("\"{name}\""), sig6(v)]);
    }
    csv.write(&out.join("oracle.csv"))?;
    Ok(dump)
}

/// Estimates and exact values flattened to named quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantitySet {
    pub config_hash: String,
    pub values: BTreeMap<String, Estimate>,
}

impl QuantitySet {
    /// Reads a run directory / manifest (corrected results) or an oracle dump.
    pub fn load(path: &Path) -> Result<Self> {
        let manifest_path = Manifest::locate(path);
        if let Ok((manifest, dir)) = Manifest::load(&manifest_path) {
            manifest.verify(&dir)?;
            let pf: PhysicsFile = read_json(&dir.join("physics_corrected.json"))?;
            let cf: CorrelationFile = read_json(&dir.join("correlations_corrected.json"))?;
            let mut values = BTreeMap::new();
            if let Some(q) = &pf.quantities {
                values.extend(q.named_estimates());
            }
            for r in &cf.correlations {
                values.insert(
                    correlation_name(r.phi, r.delta_phi, r.a, r.b),
                    Estimate {
                        value: r.value,
                        se: r.se,
                    },
                );
            }
            return Ok(Self {
                config_hash: manifest.config_hash,
                values,
            });
        }
        let dump: OracleDump = read_json(path)?;
        Ok(Self {
            config_hash: dump.config_hash.clone(),
            values: dump
                .named_values()
                .into_iter()
                .map(|(n, v)| (n, Estimate { value: v, se: 0.0 }))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub candidate: f64,
    pub candidate_se: f64,
    pub reference: f64,
    pub reference_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub config_hash: String,
    pub threshold: f64,
    pub max_abs_z: f64,
    pub pass: bool,
    pub rows: Vec<ComparisonRow>,
}

impl CompareReport {
    pub fn csv(&self) -> CsvTable {
        let mut csv = CsvTable::new(
            vec![
                format!("config_hash = {}", self.config_hash),
                format!("max_abs_z = {}, pass = {}", sig6(self.max_abs_z), self.pass),
            ],
            &["quantity", "candidate", "candidate_se", "reference", "reference_se", "z"],
        );
        for r in &self.rows {
            csv.push(vec![
                format!("\"{}\"", r.quantity),
                sig6(r.candidate),
                sig6(r.candidate_se),
                sig6(r.reference),
                sig6(r.reference_se),
                sig6(r.z),
            ]);
        }
        csv
    }
}

/// z-scores of every quantity present in both sets.
pub fn compare_sets(candidate: &QuantitySet, reference: &QuantitySet) -> Result<CompareReport> {
    if candidate.config_hash != reference.config_hash {
        return Err(Error::ConfigHashMismatch(
            candidate.config_hash.clone(),
            reference.config_hash.clone(),
        ));
    }
    let mut rows = Vec::new();
    for (name, c) in &candidate.values {
        let Some(r) = reference.values.get(name) else {
            continue;
        };
        let d = c.value - r.value;
        let se = c.se.hypot(r.se);
        let z = if d == 0.0 { 0.0 } else { d / se };
        rows.push(ComparisonRow {
            quantity: name.clone(),
            candidate: c.value,
            candidate_se: c.se,
            reference: r.value,
            reference_se: r.se,
            z,
        });
    }
    if rows.is_empty() {
        return Err(Error::Mismatch("no quantities in common".into()));
    }
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(CompareReport {
        config_hash: candidate.config_hash.clone(),
        threshold: Z_THRESHOLD,
        max_abs_z,
        pass: max_abs_z <= Z_THRESHOLD,
        rows,
    })
}

pub fn run_compare(candidate: &Path, reference: &Path) -> Result<CompareReport> {
    compare_sets(&QuantitySet::load(candidate)?, &QuantitySet::load(reference)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub dir: PathBuf,
    pub config_hash: String,
    pub max_abs_z: f64,
    pub pass: bool,
    pub quantities: Option<PhysicalQuantities>,
}

/// Repeats simulate → reconstruct → oracle → compare at each efficiency, in
/// subdirectories `eta_00`, `eta_01`, … of the configured output directory.
pub fn run_sweep(cfg: &ExperimentConfig, etas: &[f64], override_overlap_check: bool) -> Result<Vec<SweepRow>> {
    if etas.is_empty() {
        return Err(Error::Config("η sweep needs at least one value".into()));
    }
    let base = cfg.output.dir.clone();
    let mut rows = Vec::new();
    for (i, &eta) in etas.iter().enumerate() {
        let mut c = cfg.clone();
        c.measurement.eta = eta;
        c.output.dir = base.join(format!("eta_{i:02}"));
        c.validate()?;
        let sim = run_simulate(&c, override_overlap_check)?;
        let rec = run_reconstruct(&sim.dir, None)?;
        run_oracle(&c, &sim.dir)?;
        let report = run_compare(&sim.dir, &sim.dir.join("oracle.json"))?;
        io::write_json(&sim.dir.join("compare_report.json"), &report)?;
        rows.push(SweepRow {
            eta,
            dir: sim.dir,
            config_hash: sim.config_hash,
            max_abs_z: report.max_abs_z,
            pass: report.pass,
            quantities: rec.physics,
        });
    }
    io::write_json(&base.join("sweep.json"), &rows)?;
    let mut csv = CsvTable::new(vec![format!("base config_hash = {}", cfg.hash()?)], &["eta", "dir", "max_abs_z", "pass"]);
    for r in &rows {
        csv.push(vec![sig6(r.eta), r.dir.display().to_string(), sig6(r.max_abs_z), r.pass.to_string()]);
    }
    csv.write(&base.join("sweep.csv"))?;
    Ok(rows)
}
