use std::f64::consts::TAU;

use homodyne::fock::{make_state, FockState, StateKind};
use homodyne::lab::{chebyshev_q_grid, decontaminate, invert_q_system, synthetic_table, uniform_q_grid};
use homodyne::lab::qsystem::{condition_number, q_system_matrix, solve_q_system};
use homodyne::measurement::{sample, MeasurementSetting, PhaseMode, TwoPulseSampler};
use homodyne::oracle::{contaminate, exact_moment, exact_physics, exact_table, MomentSpec};
use homodyne::zoo::build_state;
use proptest::prelude::*;

const CUTOFF: usize = 12;

fn single_mode_kind() -> impl Strategy<Value = StateKind> {
    prop_oneof![
        Just(StateKind::Vacuum),
        (0usize..4).prop_map(|n| StateKind::Fock { n }),
        (-0.8..0.8f64, -0.8..0.8f64).prop_map(|(re, im)| StateKind::Coherent { re, im }),
        (0.0..0.3f64, 0.0..TAU).prop_map(|(r, theta)| StateKind::Squeezed { r, theta }),
        (0.0..0.25f64).prop_map(|mean| StateKind::Thermal { mean }),
    ]
}

fn two_mode_state() -> impl Strategy<Value = FockState> {
    prop_oneof![
        3 => (single_mode_kind(), single_mode_kind())
            .prop_map(|(a, b)| build_state(&[a, b], CUTOFF, Some(1e-6)).unwrap()),
        1 => (0.0..0.4f64).prop_map(|r| build_state(&[StateKind::TwoModeSqueezed { r }], CUTOFF, Some(1e-6)).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn states_are_normalized(kind in single_mode_kind()) {
        let s = make_state(&kind, CUTOFF, 1).unwrap();
        prop_assert!((s.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn averaged_odd_moments_vanish(state in two_mode_state(), a in 0usize..4, b in 0usize..4, dphi in 0.0..TAU) {
        prop_assume!((a + b) % 2 == 1);
        let m = exact_moment(&state, &MomentSpec::averaged(a, b, dphi)).unwrap();
        prop_assert!(m.abs() < 1e-10);
    }

    #[test]
    fn second_moment_is_mean_photon_number_plus_half(state in two_mode_state()) {
        let p = exact_physics(&state).unwrap();
        let f1 = exact_moment(&state, &MomentSpec::averaged(2, 0, 0.0)).unwrap();
        let f2 = exact_moment(&state, &MomentSpec::averaged(0, 2, 0.0)).unwrap();
        // the top Fock level contributes c/2 instead of (2c+1)/2
        let tails = state.tail_occupancies();
        let bound = |m: usize| (CUTOFF as f64 + 1.0) / 2.0 * tails[m] + 1e-12;
        prop_assert!((f1 - 0.5 - p.mean_n1).abs() <= bound(0));
        prop_assert!((f2 - 0.5 - p.mean_n2).abs() <= bound(1));
    }

    #[test]
    fn decontamination_inverts_contamination(
        state in two_mode_state(),
        eta in 0.05..=1.0f64,
        averaged in any::<bool>(),
        phi in 0.0..TAU,
        dphi in 0.0..TAU,
    ) {
        let ideal = exact_table(&state, 4, if averaged { 0.0 } else { phi }, dphi, averaged, 1.0).unwrap();
        let table = synthetic_table(&[contaminate(&ideal, eta).unwrap()], &chebyshev_q_grid(5, 0.0, 2.0), 4).unwrap();
        let corrected = decontaminate(&invert_q_system(&table, 4).unwrap(), eta).unwrap();
        for (&(a, b), v) in &ideal.values {
            prop_assert!((corrected.slices[0].entries[&(a, b)].value - v).abs() < 1e-9, "({}, {})", a, b);
        }
    }

    #[test]
    fn interference_channel_is_only_attenuated(state in two_mode_state(), eta in 0.01..=1.0f64, dphi in 0.0..TAU, averaged in any::<bool>()) {
        let ideal = exact_table(&state, 2, 0.2, dphi, averaged, 1.0).unwrap();
        let measured = contaminate(&ideal, eta).unwrap();
        prop_assert!((measured.get(1, 1).unwrap() - eta * eta * ideal.get(1, 1).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn contamination_matches_direct_noisy_moments(state in two_mode_state(), eta in 0.1..=1.0f64, dphi in 0.0..TAU) {
        let ideal = exact_table(&state, 4, 0.0, dphi, true, 1.0).unwrap();
        let via_formula = contaminate(&ideal, eta).unwrap();
        let direct = exact_table(&state, 4, 0.0, dphi, true, eta).unwrap();
        for (k, v) in &direct.values {
            prop_assert!((via_formula.values[k] - v).abs() < 1e-9);
        }
    }

    #[test]
    fn q_solve_recovers_any_correlations(
        truth in proptest::collection::vec(-2.0..2.0f64, 5),
        extra in proptest::collection::vec(0.05..3.0f64, 0..3),
    ) {
        let mut qs = chebyshev_q_grid(5, 0.0, 2.0);
        qs.extend(extra.iter().map(|e| e + 2.0));
        let y: Vec<f64> = qs
            .iter()
            .map(|q| (0..=4).map(|k| homodyne::efficiency::binomial(4, k) * q.powi(k as i32) * truth[k]).sum())
            .collect();
        let x = solve_q_system(&qs, &y, 4).unwrap();
        for (g, w) in x.iter().zip(&truth) {
            prop_assert!((g - w).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), q in 0.0..2.0f64, eta in 0.1..=1.0f64, averaged in any::<bool>()) {
        let state = build_state(&[StateKind::Thermal { mean: 0.2 }, StateKind::Coherent { re: 0.3, im: 0.1 }], 8, Some(1e-4)).unwrap();
        let s = MeasurementSetting {
            q,
            phi: 0.3,
            delta_phi: 1.0,
            eta,
            phase_mode: if averaged { PhaseMode::Averaged } else { PhaseMode::Locked },
            shots: 500,
            seed,
        };
        prop_assert_eq!(sample(&state, &s).unwrap(), sample(&state, &s).unwrap());
    }

    #[test]
    fn unit_efficiency_outcomes_are_eigenvalues(seed in any::<u64>(), q in 0.0..2.0f64) {
        let state = build_state(&[StateKind::Fock { n: 1 }, StateKind::Vacuum], 4, None).unwrap();
        let s = MeasurementSetting {
            q,
            phi: 0.0,
            delta_phi: 0.5,
            eta: 1.0,
            phase_mode: PhaseMode::Locked,
            shots: 200,
            seed,
        };
        let lines = TwoPulseSampler::new(&state).unwrap().outcome_distribution(&s).unwrap();
        for x in sample(&state, &s).unwrap().outcomes {
            prop_assert!(lines.iter().any(|l| l.value == x));
        }
    }
}

#[test]
fn chebyshev_conditioning_never_worse_than_uniform() {
    for n in 1..=5 {
        let c = condition_number(&q_system_matrix(&chebyshev_q_grid(n + 1, 0.0, 2.0), n));
        let u = condition_number(&q_system_matrix(&uniform_q_grid(n + 1, 0.0, 2.0), n));
        assert!(c <= u * (1.0 + 1e-12), "n = {n}: {c:.1} vs {u:.1}");
    }
}
