//! Empirical moments of the measured field strength with bootstrap errors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::linear::BlockCovariance;
use crate::measurement::{PhaseMode, SampleBatch};
use crate::oracle::CorrelationTable;

pub const MAX_ORDER: usize = 6;
pub const DEFAULT_RESAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

/// Estimates of `⟨F^n⟩`, `n = 1..=n_max`, for one measurement setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub q: f64,
    pub phi: f64,
    pub delta_phi: f64,
    pub eta: f64,
    pub shots: usize,
    pub moments: Vec<f64>,
    pub se: Vec<f64>,
    /// Bootstrap covariance between the moment estimates, row-major.
    pub covariance: Vec<Vec<f64>>,
}

impl MomentRow {
    pub fn moment(&self, order: usize) -> f64 {
        self.moments[order - 1]
    }

    pub fn moment_se(&self, order: usize) -> f64 {
        self.se[order - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub phase_mode: PhaseMode,
    pub n_max: usize,
    pub bootstrap: BootstrapConfig,
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    /// Index of the estimate of `⟨F^order⟩` in row `row` among all variables.
    pub fn var_index(&self, row: usize, order: usize) -> usize {
        row * self.n_max + order - 1
    }

    pub fn n_vars(&self) -> usize {
        self.rows.len() * self.n_max
    }

    pub fn covariance(&self) -> BlockCovariance {
        BlockCovariance {
            block: self.n_max,
            blocks: self
                .rows
                .iter()
                .map(|r| {
                    DMatrix::from_fn(self.n_max, self.n_max, |i, j| r.covariance[i][j])
                })
                .collect(),
        }
    }
}

fn check_order(n_max: usize, phase_mode: PhaseMode) -> Result<()> {
    if n_max == 0 || n_max > MAX_ORDER {
        return Err(Error::OrderTooHigh {
            order: n_max,
            max: MAX_ORDER,
            cutoff: 0,
        });
    }
    if phase_mode == PhaseMode::Averaged && n_max % 2 == 1 {
        return Err(Error::InvalidSetting(format!(
            "phase-averaged tables need an even n_max, got {n_max}"
        )));
    }
    Ok(())
}

fn power_sums(xs: impl Iterator<Item = f64>, n_max: usize) -> Vec<f64> {
    let mut sums = vec![0.0; n_max];
    for x in xs {
        let mut p = 1.0;
        for s in sums.iter_mut() {
            p *= x;
            *s += p;
        }
    }
    sums
}

/// Upper bound on bootstrap units; larger samples are grouped into this many
/// contiguous blocks of (nearly) equal size.
pub const MAX_BOOTSTRAP_BLOCKS: usize = 4096;

/// Bootstrap covariance of the sample power means of `xs`.
///
/// Shots are iid, so resampling contiguous blocks is as valid as resampling
/// single shots and costs `resamples × blocks` instead of `resamples × n`.
/// With at most `MAX_BOOTSTRAP_BLOCKS` shots every block is one shot.
fn bootstrap_covariance(xs: &[f64], n_max: usize, cfg: &BootstrapConfig, stream_base: u64) -> DMatrix<f64> {
    let n = xs.len();
    let n_blocks = n.min(MAX_BOOTSTRAP_BLOCKS);
    let blocks: Vec<(f64, Vec<f64>)> = (0..n_blocks)
        .map(|k| {
            let (lo, hi) = (k * n / n_blocks, (k + 1) * n / n_blocks);
            ((hi - lo) as f64, power_sums(xs[lo..hi].iter().copied(), n_max))
        })
        .collect();
    let replicas: Vec<Vec<f64>> = (0..cfg.resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream_base + r as u64);
            let mut count = 0.0;
            let mut sums = vec![0.0; n_max];
            for _ in 0..n_blocks {
                let (c, s) = &blocks[rng.random_range(0..n_blocks)];
                count += c;
                for (acc, v) in sums.iter_mut().zip(s) {
                    *acc += v;
                }
            }
            sums.into_iter().map(|s| s / count).collect()
        })
        .collect();
    let b = cfg.resamples as f64;
    let mean: Vec<f64> = (0..n_max)
        .map(|i| replicas.iter().map(|r| r[i]).sum::<f64>() / b)
        .collect();
    DMatrix::from_fn(n_max, n_max, |i, j| {
        replicas
            .iter()
            .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
            .sum::<f64>()
            / (b - 1.0)
    })
}

/// Moment estimates for one batch; `position` selects the bootstrap streams
/// and must be the row index the batch will have in its table.
pub fn moment_row(batch: &SampleBatch, position: usize, n_max: usize, cfg: &BootstrapConfig) -> Result<MomentRow> {
    check_order(n_max, batch.setting.phase_mode)?;
    if batch.is_empty() {
        return Err(Error::EmptyBatches);
    }
    let n = batch.len() as f64;
    let moments: Vec<f64> = power_sums(batch.outcomes.iter().copied(), n_max)
        .into_iter()
        .map(|s| s / n)
        .collect();
    let cov = bootstrap_covariance(&batch.outcomes, n_max, cfg, (position as u64) << 32);
    Ok(MomentRow {
        q: batch.setting.q,
        phi: batch.setting.phi,
        delta_phi: batch.setting.delta_phi,
        eta: batch.setting.eta,
        shots: batch.len(),
        moments,
        se: (0..n_max).map(|k| cov[(k, k)].max(0.0).sqrt()).collect(),
        covariance: (0..n_max)
            .map(|r| (0..n_max).map(|c| cov[(r, c)]).collect())
            .collect(),
    })
}

/// One row per batch; bootstrap streams are keyed by batch position so the
/// table is reproducible from `cfg.seed`.
pub fn estimate_moments(batches: &[SampleBatch], n_max: usize, cfg: &BootstrapConfig) -> Result<MomentTable> {
    let first = batches.first().ok_or(Error::EmptyBatches)?;
    let phase_mode = first.setting.phase_mode;
    check_order(n_max, phase_mode)?;
    if cfg.resamples < 2 {
        return Err(Error::InvalidSetting("bootstrap needs at least 2 resamples".into()));
    }
    if let Some(b) = batches.iter().find(|b| b.setting.phase_mode != phase_mode) {
        return Err(Error::InconsistentBatches(format!(
            "phase modes {:?} and {:?} mixed",
            phase_mode, b.setting.phase_mode
        )));
    }
    if batches.iter().any(|b| b.is_empty()) {
        return Err(Error::EmptyBatches);
    }
    let rows = batches
        .iter()
        .enumerate()
        .map(|(i, batch)| moment_row(batch, i, n_max, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentTable {
        phase_mode,
        n_max,
        bootstrap: *cfg,
        rows,
    })
}

/// Noise-free moment table synthesized from exact correlation tables (one per
/// phase setting) at the given `q` values.
pub fn synthetic_table(tables: &[CorrelationTable], qs: &[f64], n_max: usize) -> Result<MomentTable> {
    let first = tables.first().ok_or(Error::EmptyBatches)?;
    let phase_mode = if first.phase_averaged {
        PhaseMode::Averaged
    } else {
        PhaseMode::Locked
    };
    check_order(n_max, phase_mode)?;
    let mut rows = Vec::new();
    for t in tables {
        if t.phase_averaged != first.phase_averaged || t.eta != first.eta {
            return Err(Error::Mismatch("tables differ in phase mode or eta".into()));
        }
        for &q in qs {
            let moments = (1..=n_max)
                .map(|n| t.sum_moment(q, n))
                .collect::<Result<Vec<_>>>()?;
            rows.push(MomentRow {
                q,
                phi: t.phi,
                delta_phi: t.delta_phi,
                eta: t.eta,
                shots: 0,
                moments,
                se: vec![0.0; n_max],
                covariance: vec![vec![0.0; n_max]; n_max],
            });
        }
    }
    Ok(MomentTable {
        phase_mode,
        n_max,
        bootstrap: BootstrapConfig::default(),
        rows,
    })
}
