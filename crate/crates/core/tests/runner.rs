use std::fs;
use std::path::Path;
use std::process::Command;

use homodyne::fock::StateKind;
use homodyne::runner::io::{Manifest, MANIFEST_FILE};
use homodyne::runner::{
    run_compare, run_oracle, run_reconstruct, run_simulate, run_sweep, ExperimentConfig,
};
use homodyne::Error;

fn config(modes: Vec<StateKind>, dir: &Path, shots: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(modes);
    cfg.measurement.shots = shots;
    cfg.output.dir = dir.to_path_buf();
    cfg
}

fn minimal(dir: &Path) -> ExperimentConfig {
    let mut cfg = config(vec![StateKind::Vacuum, StateKind::Vacuum], dir, 100);
    cfg.grid.q_values = Some(vec![1.0]);
    cfg.grid.delta_phi_values = Some(vec![0.0]);
    cfg.measurement.n_max = 2;
    cfg
}

fn all_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn minimal_run_writes_one_batch_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let s = run_simulate(&minimal(tmp.path()), false).unwrap();
    assert_eq!(s.batches, 1);
    let (m, dir) = Manifest::load(tmp.path()).unwrap();
    assert_eq!(m.files_of_kind("batch").count(), 1);
    m.verify(&dir).unwrap();
    assert!(tmp.path().join(MANIFEST_FILE).exists());
}

#[test]
fn default_grid_writes_forty_batches() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(vec![StateKind::Vacuum, StateKind::Vacuum], tmp.path(), 50);
    assert_eq!(run_simulate(&cfg, false).unwrap().batches, 40);
    assert_eq!(fs::read_dir(tmp.path().join("batches")).unwrap().count(), 40);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let modes = vec![StateKind::Thermal { mean: 0.3 }, StateKind::Coherent { re: 0.5, im: 0.0 }];
    let cfg = config(modes, tmp.path(), 2000);
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        run_simulate(&cfg, false).unwrap();
        run_reconstruct(tmp.path(), None).unwrap();
        snapshots.push(all_files(tmp.path()));
        fs::remove_dir_all(tmp.path()).unwrap();
    }
    assert!(snapshots[0].len() > 40);
    assert!(snapshots[0] == snapshots[1]);
}

#[test]
fn seed_changes_the_samples() {
    let a = tempfile::tempdir().unwrap();
    let mut cfg = minimal(a.path());
    run_simulate(&cfg, false).unwrap();
    let first = fs::read(a.path().join("batches/batch_d00_q00.csv")).unwrap();
    cfg.seeds.sampling = 77;
    run_simulate(&cfg, false).unwrap();
    assert_ne!(first, fs::read(a.path().join("batches/batch_d00_q00.csv")).unwrap());
}

fn reconstructed(modes: Vec<StateKind>, eta: f64) -> (tempfile::TempDir, homodyne::lab::PhysicalQuantities, ExperimentConfig) {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(modes, tmp.path(), 200_000);
    cfg.measurement.eta = eta;
    run_simulate(&cfg, false).unwrap();
    let r = run_reconstruct(tmp.path(), None).unwrap();
    assert!(r.notes.is_empty(), "{:?}", r.notes);
    (tmp, r.physics.unwrap(), cfg)
}

#[test]
fn reconstruct_vacuum() {
    let (_t, p, _) = reconstructed(vec![StateKind::Vacuum, StateKind::Vacuum], 0.9);
    assert!(p.mean_n1.within(0.0, 5.0));
    assert!(p.mean_n2.within(0.0, 5.0));
}

#[test]
fn reconstruct_coherent_pair_and_compare_with_oracle() {
    let (t, p, cfg) = reconstructed(
        vec![StateKind::Coherent { re: 1.0, im: 0.0 }, StateKind::Coherent { re: 0.0, im: 1.0 }],
        0.7,
    );
    // α* β = i
    assert!(p.coherence.re.within(0.0, 5.0));
    assert!(p.coherence.im.within(1.0, 5.0));
    let dump = run_oracle(&cfg, t.path()).unwrap();
    assert_eq!(dump.config_hash, cfg.hash().unwrap());
    let report = run_compare(t.path(), &t.path().join("oracle.json")).unwrap();
    assert!(report.pass, "max |z| = {}", report.max_abs_z);
    assert!(report.rows.len() > 11);
}

#[test]
fn reconstruct_two_mode_squeezed() {
    let (_t, p, cfg) = reconstructed(vec![StateKind::TwoModeSqueezed { r: 0.5 }], 1.0);
    let truth = homodyne::oracle::exact_physics(&cfg.build_state().unwrap()).unwrap();
    assert!(p.number_correlation.unwrap().within(truth.number_correlation, 5.0));
}

#[test]
fn oracle_self_comparison_has_zero_z() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = minimal(tmp.path());
    run_oracle(&cfg, tmp.path()).unwrap();
    let oracle = tmp.path().join("oracle.json");
    let report = run_compare(&oracle, &oracle).unwrap();
    assert!(report.pass);
    assert!(report.rows.iter().all(|r| r.z == 0.0));
}

#[test]
fn corrupted_batch_is_a_hash_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    run_simulate(&minimal(tmp.path()), false).unwrap();
    let path = tmp.path().join("batches/batch_d00_q00.csv");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("0.0\n");
    fs::write(&path, text).unwrap();
    assert!(matches!(run_reconstruct(tmp.path(), None), Err(Error::HashMismatch { .. })));
}

#[test]
fn comparing_different_configs_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let cfg = minimal(&a);
    run_oracle(&cfg, &a).unwrap();
    let mut other = cfg.clone();
    other.measurement.eta = 0.5;
    run_oracle(&other, &b).unwrap();
    assert!(matches!(
        run_compare(&a.join("oracle.json"), &b.join("oracle.json")),
        Err(Error::ConfigHashMismatch(..))
    ));
}

#[test]
fn too_few_q_values_is_an_incomplete_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(vec![StateKind::Vacuum, StateKind::Vacuum], tmp.path(), 100);
    cfg.grid.q_points = 3;
    cfg.measurement.n_max = 2;
    run_simulate(&cfg, false).unwrap();
    assert!(matches!(run_reconstruct(tmp.path(), Some(4)), Err(Error::IncompleteGrid(_))));
    run_reconstruct(tmp.path(), Some(2)).unwrap();
}

#[test]
fn overlapping_train_needs_override() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = minimal(tmp.path());
    cfg.train.centers = vec![0.0, 2.0];
    assert!(matches!(run_simulate(&cfg, false), Err(Error::OverlapGate { .. })));
    let s = run_simulate(&cfg, true).unwrap();
    assert!(s.overlap_check_overridden);
}

#[test]
fn eta_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(vec![StateKind::Coherent { re: 0.5, im: 0.5 }, StateKind::Vacuum], tmp.path(), 20_000);
    cfg.grid.delta_phi_points = 5;
    let rows = run_sweep(&cfg, &[0.5, 1.0], false).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.pass));
    assert!(tmp.path().join("sweep.json").exists());
    assert!(tmp.path().join("eta_01/physics_corrected.csv").exists());
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homodyne"))
}

#[test]
fn command_line_round() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("exp.toml");
    let mut cfg = minimal(&tmp.path().join("unused"));
    cfg.grid.q_values = Some(vec![0.0, 1.0, 2.0]);
    cfg.grid.delta_phi_values = None;
    cfg.grid.delta_phi_points = 6;
    fs::write(&cfg_path, cfg.to_toml().unwrap()).unwrap();
    let run = tmp.path().join("run");

    let ok = |args: &[&str]| {
        let out = bin().args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let c = cfg_path.to_str().unwrap();
    let r = run.to_str().unwrap();
    assert!(ok(&["validate-train", c]).contains("\"pass\": true"));
    assert!(ok(&["simulate", c, "--out", r, "--seed", "5", "--shots", "3000"]).contains("18 batches"));
    assert!(ok(&["reconstruct", r]).contains("mean_n1"));
    ok(&["oracle", c, "--out", r, "--seed", "5", "--shots", "3000"]);
    let report = run.join("report.json");
    assert!(ok(&["compare", r, run.join("oracle.json").to_str().unwrap(), "--out", report.to_str().unwrap()]).contains("pass"));
    assert!(report.exists() && run.join("report.csv").exists());

    // oracle for the unmodified config has a different hash
    ok(&["oracle", c, "--out", tmp.path().join("plain").to_str().unwrap()]);
    let out = bin()
        .args(["compare", r, tmp.path().join("plain/oracle.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let mut close = cfg.clone();
    close.train.centers = vec![0.0, 2.0];
    let close_path = tmp.path().join("close.toml");
    fs::write(&close_path, close.to_toml().unwrap()).unwrap();
    let out = bin().args(["validate-train", close_path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["simulate", close_path.to_str().unwrap(), "--out", r]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 3);
}
