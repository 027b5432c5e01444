//! Inversion of `⟨F^n⟩(q) = Σ_k C(n,k) q^k ⟨F1^{n-k} F2^k⟩` over the LO
//! amplitude ratio `q`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::efficiency::binomial;
use crate::error::{Error, Result};
use crate::lab::linear::Linear;
use crate::lab::moments::MomentTable;
use crate::lab::{CorrelationSet, CorrelationSlice};
use crate::measurement::PhaseMode;

/// Systems with a larger 2-norm condition number are flagged.
pub const CONDITION_WARNING: f64 = 1e8;
const SAME_VALUE_TOL: f64 = 1e-12;

/// Chebyshev extrema (Gauss–Lobatto points) on `[lo, hi]`, ascending.
pub fn chebyshev_q_grid(points: usize, lo: f64, hi: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let n = (points - 1) as f64;
            (0..points)
                .map(|j| {
                    let x = 0.5 * (lo + hi) - 0.5 * (hi - lo) * (std::f64::consts::PI * j as f64 / n).cos();
                    // pin the endpoints exactly
                    if j == 0 {
                        lo
                    } else if j == points - 1 {
                        hi
                    } else {
                        x
                    }
                })
                .collect()
        }
    }
}

pub fn uniform_q_grid(points: usize, lo: f64, hi: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|j| lo + (hi - lo) * j as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Rows `C(n,k) q_i^k`, `k = 0..=n`.
pub fn q_system_matrix(qs: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(qs.len(), n + 1, |i, k| binomial(n, k) * qs[i].powi(k as i32))
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn distinct_count(qs: &[f64]) -> usize {
    let mut sorted = qs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup_by(|a, b| (*a - *b).abs() <= SAME_VALUE_TOL);
    sorted.len()
}

/// Least-squares solution operator for order `n`; the exact inverse when
/// there are `n + 1` values of `q`.
fn solution_operator(qs: &[f64], n: usize) -> Result<(DMatrix<f64>, f64)> {
    let distinct = distinct_count(qs);
    if distinct < n + 1 || qs.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
        return Err(Error::SingularQSystem {
            needed: n + 1,
            got: distinct,
        });
    }
    let a = q_system_matrix(qs, n);
    let cond = condition_number(&a);
    let pinv = SVD::new(a, true, true)
        .pseudo_inverse(0.0)
        .map_err(|e| Error::Mismatch(e.to_string()))?;
    Ok((pinv, cond))
}

/// Solves for `⟨F1^{n-k} F2^k⟩`, `k = 0..=n`, from sum-field moments at `qs`.
pub fn solve_q_system(qs: &[f64], moments: &[f64], n: usize) -> Result<Vec<f64>> {
    if qs.len() != moments.len() {
        return Err(Error::DimensionMismatch {
            expected: qs.len(),
            found: moments.len(),
        });
    }
    let (p, _) = solution_operator(qs, n)?;
    Ok((p * DVector::from_column_slice(moments)).iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSolve {
    pub phi: f64,
    pub delta_phi: f64,
    pub order: usize,
    pub qs: Vec<f64>,
    pub condition: f64,
}

/// Groups table rows into phase settings (Δφ, plus φ when locked), in order
/// of first appearance.
pub(crate) fn group_rows(table: &MomentTable) -> Vec<((f64, f64), Vec<usize>)> {
    let mut groups: Vec<((f64, f64), Vec<usize>)> = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let phi = match table.phase_mode {
            PhaseMode::Locked => row.phi,
            PhaseMode::Averaged => 0.0,
        };
        match groups.iter_mut().find(|((p, d), _)| {
            (p - phi).abs() <= SAME_VALUE_TOL && (d - row.delta_phi).abs() <= SAME_VALUE_TOL
        }) {
            Some((_, idx)) => idx.push(i),
            None => groups.push(((phi, row.delta_phi), vec![i])),
        }
    }
    groups
}

/// Reconstructs `⟨F1^{n-k} F2^k⟩` for every order up to `n_max` (even orders
/// only when phase-averaged) at every phase setting of the table. The result
/// still carries the detection-efficiency contamination.
pub fn invert_q_system(table: &MomentTable, n_max: usize) -> Result<CorrelationSet> {
    if table.rows.is_empty() {
        return Err(Error::EmptyBatches);
    }
    if n_max > table.n_max {
        return Err(Error::IncompleteGrid(format!(
            "table holds moments up to order {}, {} requested",
            table.n_max, n_max
        )));
    }
    let eta = table.rows[0].eta;
    if table.rows.iter().any(|r| r.eta != eta) {
        return Err(Error::Mismatch("rows taken at different efficiencies".into()));
    }
    let averaged = table.phase_mode == PhaseMode::Averaged;
    let n_vars = table.n_vars();
    let mut slices = Vec::new();
    let mut solves = Vec::new();
    let mut warnings = Vec::new();
    for ((phi, delta_phi), idx) in group_rows(table) {
        let qs: Vec<f64> = idx.iter().map(|&i| table.rows[i].q).collect();
        let mut entries = BTreeMap::new();
        entries.insert((0, 0), Linear::constant(1.0, n_vars));
        for n in 1..=n_max {
            if averaged && n % 2 == 1 {
                continue;
            }
            let (p, condition) = solution_operator(&qs, n)?;
            if condition > CONDITION_WARNING {
                warnings.push(format!(
                    "q system of order {n} at Δφ = {delta_phi} has condition number {condition:.3e}"
                ));
            }
            for k in 0..=n {
                let mut value = Linear::constant(0.0, n_vars);
                for (col, &row) in idx.iter().enumerate() {
                    let var = Linear::variable(
                        table.var_index(row, n),
                        table.rows[row].moment(n),
                        n_vars,
                    );
                    value.add_scaled(&var, p[(k, col)]);
                }
                entries.insert((n - k, k), value);
            }
            solves.push(QSolve {
                phi,
                delta_phi,
                order: n,
                qs: qs.clone(),
                condition,
            });
        }
        slices.push(CorrelationSlice {
            phi,
            delta_phi,
            entries,
        });
    }
    Ok(CorrelationSet {
        phase_mode: table.phase_mode,
        eta,
        n_max,
        corrected: false,
        slices,
        covariance: Arc::new(table.covariance()),
        solves,
        warnings,
    })
}
