use std::f64::consts::{FRAC_PI_2, PI};

use homodyne::fock::StateKind;
use homodyne::lab::{
    double_slit_difference, estimate_moments, extract_physics, invert_q_system, BootstrapConfig, Estimate, MomentRow,
};
use homodyne::measurement::{sample, MeasurementSetting, PhaseMode};
use homodyne::oracle::{exact_physics, exact_table};
use homodyne::runner::{measure, reconstruct_table, ExperimentConfig};
use homodyne::zoo::{self, build_state, standard_kinds};
use homodyne::FockState;
use num_complex::Complex64;

fn setting(q: f64, delta_phi: f64, eta: f64, shots: usize, seed: u64) -> MeasurementSetting {
    MeasurementSetting {
        q,
        phi: 0.0,
        delta_phi,
        eta,
        phase_mode: PhaseMode::Averaged,
        shots,
        seed,
    }
}

fn boot() -> BootstrapConfig {
    BootstrapConfig { resamples: 200, seed: 3 }
}

fn assert_within(e: Estimate, truth: f64, what: &str) {
    assert!(e.within(truth, 5.0), "{what}: {} ± {} vs {truth}", e.value, e.se);
}

fn vacua() -> FockState {
    build_state(&[StateKind::Vacuum, StateKind::Vacuum], 16, None).unwrap()
}

#[test]
fn vacuum_second_moment() {
    let b = sample(&vacua(), &setting(0.0, 0.0, 1.0, 200_000, 1)).unwrap();
    let row = &estimate_moments(&[b], 2, &boot()).unwrap().rows[0];
    assert!((row.moment(2) - 0.5).abs() <= 5.0 * row.moment_se(2));
}

#[test]
fn coherent_signal_in_one_pulse() {
    let s = build_state(&[StateKind::Coherent { re: 1.0, im: 0.0 }, StateKind::Vacuum], 16, None).unwrap();
    let b = sample(&s, &setting(1.0, 0.0, 1.0, 200_000, 2)).unwrap();
    let row = &estimate_moments(&[b], 2, &boot()).unwrap().rows[0];
    assert!((row.moment(2) - 2.0).abs() <= 5.0 * row.moment_se(2), "{}", row.moment(2));
}

#[test]
fn vacuum_cross_term_vanishes() {
    let state = vacua();
    let batches: Vec<_> = [0.0, 1.0, 2.0]
        .iter()
        .enumerate()
        .map(|(i, &q)| sample(&state, &setting(q, 0.4, 1.0, 100_000, 10 + i as u64)).unwrap())
        .collect();
    let set = invert_q_system(&estimate_moments(&batches, 2, &boot()).unwrap(), 2).unwrap();
    assert_within(set.estimate(0, 1, 1).unwrap(), 0.0, "cross term");
}

#[test]
fn fourth_order_entries_of_coherent_pair() {
    let state = zoo::coherent_pair(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), 16).unwrap();
    let dphi = 0.7;
    let batches: Vec<_> = [0.0, 0.5, 1.0, 1.5, 2.0]
        .iter()
        .enumerate()
        .map(|(i, &q)| sample(&state, &setting(q, dphi, 1.0, 400_000, 20 + i as u64)).unwrap())
        .collect();
    let set = invert_q_system(&estimate_moments(&batches, 4, &boot()).unwrap(), 4).unwrap();
    let oracle = exact_table(&state, 4, 0.0, dphi, true, 1.0).unwrap();
    for k in 0..=4 {
        assert_within(set.estimate(0, 4 - k, k).unwrap(), oracle.get(4 - k, k).unwrap(), &format!("(4,{k})"));
    }
}

fn row(state: &FockState, dphi: f64, seed: u64) -> MomentRow {
    let b = sample(state, &setting(1.0, dphi, 1.0, 200_000, seed)).unwrap();
    estimate_moments(&[b], 2, &boot()).unwrap().rows.remove(0)
}

#[test]
fn double_slit_examples() {
    let v = vacua();
    assert_within(double_slit_difference(&row(&v, 0.0, 1), &row(&v, PI, 2)).unwrap(), 0.0, "vacua");
    let same = zoo::coherent_pair(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), 16).unwrap();
    assert_within(double_slit_difference(&row(&same, 0.0, 3), &row(&same, PI, 4)).unwrap(), 1.0, "in phase");
    let quad = zoo::coherent_pair(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), 16).unwrap();
    assert_within(
        double_slit_difference(&row(&quad, FRAC_PI_2, 5), &row(&quad, FRAC_PI_2 + PI, 6)).unwrap(),
        1.0,
        "quadrature",
    );
}

#[test]
fn fock_pair_physics() {
    let mut cfg = ExperimentConfig::new(vec![StateKind::Fock { n: 1 }, StateKind::Fock { n: 1 }]);
    cfg.measurement.shots = 300_000;
    let (_, corrected) = reconstruct_table(&measure(&cfg).unwrap(), 4, 1.0).unwrap();
    let p = extract_physics(&corrected).unwrap();
    assert_within(p.number_correlation.unwrap(), 1.0, "<n1 n2>");
    let pair = p.pair_amplitude.unwrap();
    assert_within(pair.re, 0.0, "pair re");
    assert_within(pair.im, 0.0, "pair im");
}

/// Every extracted quantity of every reference state, at 10⁶ shots per
/// setting, lies within 5 propagated standard errors of the exact value.
#[test]
fn full_statistical_pipeline_on_zoo() {
    for (k, (name, kinds)) in standard_kinds().into_iter().enumerate() {
        let mut cfg = ExperimentConfig::new(kinds);
        cfg.measurement.eta = 0.8;
        cfg.measurement.shots = 1_000_000;
        cfg.seeds.sampling = 100 + k as u64;
        let truth = exact_physics(&cfg.build_state().unwrap()).unwrap();
        let (_, corrected) = reconstruct_table(&measure(&cfg).unwrap(), 4, 0.8).unwrap();
        let p = extract_physics(&corrected).unwrap();
        let expected = [
            ("mean_n1", truth.mean_n1),
            ("mean_n2", truth.mean_n2),
            ("coherence_re", truth.coherence.re),
            ("coherence_im", truth.coherence.im),
            ("third_order_12_re", truth.third_order_12.re),
            ("third_order_12_im", truth.third_order_12.im),
            ("third_order_21_re", truth.third_order_21.re),
            ("third_order_21_im", truth.third_order_21.im),
            ("pair_amplitude_re", truth.pair_amplitude.re),
            ("pair_amplitude_im", truth.pair_amplitude.im),
            ("number_correlation", truth.number_correlation),
        ];
        let got = p.named_estimates();
        assert_eq!(got.len(), expected.len());
        for ((gname, e), (ename, t)) in got.into_iter().zip(expected) {
            assert_eq!(gname, ename);
            assert_within(e, t, &format!("{name}: {gname}"));
        }
    }
}

/// Sampled moments of orders 1–4 match the oracle's contaminated moments.
#[test]
fn sampled_moments_match_contaminated_oracle() {
    let eta = 0.6;
    let (q, dphi) = (0.8, 1.3);
    for (k, (name, state)) in zoo::standard_zoo(16).unwrap().into_iter().enumerate() {
        let b = sample(&state, &setting(q, dphi, eta, 1_000_000, 500 + k as u64)).unwrap();
        let row = &estimate_moments(&[b], 4, &boot()).unwrap().rows[0];
        let measured = exact_table(&state, 4, 0.0, dphi, true, eta).unwrap();
        for n in 1..=4 {
            let truth = measured.sum_moment(q, n).unwrap();
            let z = (row.moment(n) - truth) / row.moment_se(n);
            assert!(z.abs() <= 5.0 || row.moment(n) == truth, "{name} order {n}: z = {z}");
        }
    }
}
