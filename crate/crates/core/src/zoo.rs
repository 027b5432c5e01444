//! Reference two-mode signal states.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{make_state_with_tolerance, FockState, StateKind, DEFAULT_TAIL_TOLERANCE};

/// Builds a two-mode signal from a list of kinds: either a single two-mode
/// kind, or one single-mode kind per mode.
pub fn build_state(kinds: &[StateKind], cutoff: usize, tail_tolerance: Option<f64>) -> Result<FockState> {
    match kinds {
        [joint] if joint.is_two_mode() => make_state_with_tolerance(joint, cutoff, 2, tail_tolerance),
        [first, second] => {
            let factors = [first, second]
                .iter()
                .map(|k| {
                    if k.is_two_mode() {
                        Err(Error::InvalidStateParameter(
                            "two-mode kind cannot be a single-mode factor".into(),
                        ))
                    } else {
                        make_state_with_tolerance(k, cutoff, 1, tail_tolerance)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            FockState::product(&factors)
        }
        _ => Err(Error::InvalidStateParameter(format!(
            "expected one two-mode kind or two single-mode kinds, got {} entries",
            kinds.len()
        ))),
    }
}

pub fn coherent_pair(alpha: Complex64, beta: Complex64, cutoff: usize) -> Result<FockState> {
    build_state(
        &[StateKind::coherent(alpha), StateKind::coherent(beta)],
        cutoff,
        Some(DEFAULT_TAIL_TOLERANCE),
    )
}

/// Kinds of the six reference states, one per constructor family.
pub fn standard_kinds() -> Vec<(&'static str, Vec<StateKind>)> {
    vec![
        ("vacuum", vec![StateKind::Vacuum, StateKind::Vacuum]),
        ("fock", vec![StateKind::Fock { n: 1 }, StateKind::Fock { n: 1 }]),
        (
            "coherent",
            vec![
                StateKind::Coherent { re: 1.0, im: 0.0 },
                StateKind::Coherent { re: 0.0, im: 1.0 },
            ],
        ),
        (
            "squeezed",
            vec![
                StateKind::Squeezed { r: 0.3, theta: 0.0 },
                StateKind::Squeezed { r: 0.2, theta: 1.0 },
            ],
        ),
        (
            "thermal",
            vec![StateKind::Thermal { mean: 0.3 }, StateKind::Thermal { mean: 0.2 }],
        ),
        ("two_mode_squeezed", vec![StateKind::TwoModeSqueezed { r: 0.5 }]),
    ]
}

pub fn standard_zoo(cutoff: usize) -> Result<Vec<(&'static str, FockState)>> {
    standard_kinds()
        .into_iter()
        .map(|(name, kinds)| Ok((name, build_state(&kinds, cutoff, Some(DEFAULT_TAIL_TOLERANCE))?)))
        .collect()
}
