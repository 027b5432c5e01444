//! Truncated multimode Fock spaces.
//!
//! Basis ordering is mode-major: for modes `0..M` with `d = cutoff + 1` levels
//! each, the basis index of `|n_0, n_1, ..., n_{M-1}⟩` is
//! `Σ_k n_k · d^(M-1-k)`. For two modes this is `n_1 · d + n_2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CUTOFF: usize = 16;
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const NEGATIVE_EIGEN_TOL: f64 = 1e-10;
const EXPECT_IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    pub n_modes: usize,
    pub cutoff: usize,
}

impl FockSpace {
    pub fn new(n_modes: usize, cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::CutoffTooSmall {
                cutoff,
                reason: "need at least one excited level".into(),
            });
        }
        if n_modes == 0 {
            return Err(Error::InvalidStateParameter("zero modes".into()));
        }
        Ok(Self { n_modes, cutoff })
    }

    pub fn levels(&self) -> usize {
        self.cutoff + 1
    }

    pub fn dim(&self) -> usize {
        self.levels().pow(self.n_modes as u32)
    }

    /// Occupation numbers of basis vector `index`.
    pub fn occupations(&self, index: usize) -> Vec<usize> {
        let d = self.levels();
        let mut occ = vec![0; self.n_modes];
        let mut rest = index;
        for k in (0..self.n_modes).rev() {
            occ[k] = rest % d;
            rest /= d;
        }
        occ
    }

    pub fn index(&self, occupations: &[usize]) -> usize {
        occupations
            .iter()
            .fold(0, |acc, &n| acc * self.levels() + n)
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.n_modes {
            Ok(())
        } else {
            Err(Error::ModeIndex {
                index: mode,
                n_modes: self.n_modes,
            })
        }
    }

    /// Total photon number of every basis vector.
    pub fn total_numbers(&self) -> Vec<usize> {
        (0..self.dim())
            .map(|i| self.occupations(i).iter().sum())
            .collect()
    }
}

/// Single-mode matrices on `levels` Fock levels.
pub mod local {
    use super::*;

    pub fn annihilation(levels: usize) -> DMatrix<Complex64> {
        let mut a = DMatrix::zeros(levels, levels);
        for n in 1..levels {
            a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        a
    }

    pub fn creation(levels: usize) -> DMatrix<Complex64> {
        annihilation(levels).adjoint()
    }

    pub fn number(levels: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(levels, levels, |i, j| {
            if i == j {
                Complex64::new(i as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// `(a e^{-iφ} + a† e^{iφ}) / √2`
    pub fn quadrature(levels: usize, phi: f64) -> DMatrix<Complex64> {
        let a = annihilation(levels);
        let phase = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, -phi);
        let mut f = &a * phase;
        f += a.adjoint() * phase.conj();
        f
    }

    pub fn power(m: &DMatrix<Complex64>, exponent: usize) -> DMatrix<Complex64> {
        let mut out = DMatrix::identity(m.nrows(), m.ncols());
        for _ in 0..exponent {
            out = &out * m;
        }
        out
    }
}

/// Dense operator on the full multimode space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub space: FockSpace,
    pub matrix: DMatrix<Complex64>,
}

impl Operator {
    pub fn identity(space: FockSpace) -> Self {
        let d = space.dim();
        Self {
            space,
            matrix: DMatrix::identity(d, d),
        }
    }

    pub fn from_matrix(space: FockSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    /// Tensor product of single-mode factors; modes not listed carry the identity.
    pub fn product_of_local(
        space: FockSpace,
        factors: &[(usize, &DMatrix<Complex64>)],
    ) -> Result<Self> {
        let d = space.levels();
        let mut per_mode: Vec<DMatrix<Complex64>> =
            (0..space.n_modes).map(|_| DMatrix::identity(d, d)).collect();
        for &(mode, m) in factors {
            space.check_mode(mode)?;
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.nrows(),
                });
            }
            per_mode[mode] = &per_mode[mode] * m;
        }
        let mut iter = per_mode.into_iter();
        let first = iter.next().expect("at least one mode");
        let matrix = iter.fold(first, |acc, m| acc.kronecker(&m));
        Ok(Self { space, matrix })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).camax()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn compose(&self, rhs: &Operator) -> Self {
        Self {
            space: self.space,
            matrix: &self.matrix * &rhs.matrix,
        }
    }

    pub fn plus(&self, rhs: &Operator) -> Self {
        Self {
            space: self.space,
            matrix: &self.matrix + &rhs.matrix,
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            space: self.space,
            matrix: &self.matrix * factor,
        }
    }

    pub fn commutator(&self, rhs: &Operator) -> Self {
        Self {
            space: self.space,
            matrix: &self.matrix * &rhs.matrix - &rhs.matrix * &self.matrix,
        }
    }
}

/// A single-mode operator acting on one mode of a multimode space.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    pub space: FockSpace,
    pub mode: usize,
    pub local: DMatrix<Complex64>,
}

impl ModeOperator {
    fn new(space: FockSpace, mode: usize, local: DMatrix<Complex64>) -> Result<Self> {
        space.check_mode(mode)?;
        Ok(Self { space, mode, local })
    }

    pub fn annihilation(space: FockSpace, mode: usize) -> Result<Self> {
        Self::new(space, mode, local::annihilation(space.levels()))
    }

    pub fn creation(space: FockSpace, mode: usize) -> Result<Self> {
        Self::new(space, mode, local::creation(space.levels()))
    }

    pub fn number(space: FockSpace, mode: usize) -> Result<Self> {
        Self::new(space, mode, local::number(space.levels()))
    }

    pub fn pow(&self, exponent: usize) -> Self {
        Self {
            space: self.space,
            mode: self.mode,
            local: local::power(&self.local, exponent),
        }
    }

    pub fn embed(&self) -> Operator {
        Operator::product_of_local(self.space, &[(self.mode, &self.local)])
            .expect("mode index validated at construction")
    }
}

/// Field strength `F_k(φ)` of mode `mode`.
pub fn quadrature(space: FockSpace, mode: usize, phi: f64) -> Result<ModeOperator> {
    ModeOperator::new(space, mode, local::quadrature(space.levels(), phi))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Pure(DVector<Complex64>),
    Mixed(DMatrix<Complex64>),
}

/// Built-in states used throughout the tests and the experiment runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateKind {
    Vacuum,
    Fock { n: usize },
    Coherent { re: f64, im: f64 },
    Squeezed { r: f64, theta: f64 },
    Thermal { mean: f64 },
    TwoModeSqueezed { r: f64 },
}

impl StateKind {
    pub fn coherent(alpha: Complex64) -> Self {
        StateKind::Coherent {
            re: alpha.re,
            im: alpha.im,
        }
    }

    pub fn is_two_mode(&self) -> bool {
        matches!(self, StateKind::TwoModeSqueezed { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    space: FockSpace,
    repr: Representation,
    tails: Vec<f64>,
}

fn finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidStateParameter(format!("{name} = {value}")))
    }
}

fn single_mode_amplitudes(kind: &StateKind, levels: usize) -> Result<Representation> {
    let zero = Complex64::new(0.0, 0.0);
    let cutoff = levels - 1;
    let repr = match *kind {
        StateKind::Vacuum => {
            let mut v = DVector::from_element(levels, zero);
            v[0] = Complex64::new(1.0, 0.0);
            Representation::Pure(v)
        }
        StateKind::Fock { n } => {
            if n > cutoff {
                return Err(Error::CutoffTooSmall {
                    cutoff,
                    reason: format!("Fock level {n} requested"),
                });
            }
            let mut v = DVector::from_element(levels, zero);
            v[n] = Complex64::new(1.0, 0.0);
            Representation::Pure(v)
        }
        StateKind::Coherent { re, im } => {
            let alpha = Complex64::new(finite("alpha.re", re)?, finite("alpha.im", im)?);
            let mut v = DVector::from_element(levels, zero);
            v[0] = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
            for n in 1..levels {
                v[n] = v[n - 1] * alpha / (n as f64).sqrt();
            }
            Representation::Pure(v)
        }
        StateKind::Squeezed { r, theta } => {
            let r = finite("r", r)?;
            let theta = finite("theta", theta)?;
            if r < 0.0 {
                return Err(Error::InvalidStateParameter(format!("squeezing r = {r} < 0")));
            }
            let ratio = -Complex64::from_polar(r.tanh(), theta);
            let mut v = DVector::from_element(levels, zero);
            v[0] = Complex64::new(1.0 / r.cosh().sqrt(), 0.0);
            let mut n = 2;
            while n < levels {
                let m = (n / 2) as f64;
                v[n] = v[n - 2] * ratio * ((2.0 * m - 1.0) / (2.0 * m)).sqrt();
                n += 2;
            }
            Representation::Pure(v)
        }
        StateKind::Thermal { mean } => {
            let mean = finite("mean", mean)?;
            if mean < 0.0 {
                return Err(Error::InvalidStateParameter(format!("thermal mean {mean} < 0")));
            }
            let ratio = mean / (1.0 + mean);
            let mut rho = DMatrix::from_element(levels, levels, zero);
            let mut p = 1.0 / (1.0 + mean);
            for n in 0..levels {
                rho[(n, n)] = Complex64::new(p, 0.0);
                p *= ratio;
            }
            Representation::Mixed(rho)
        }
        StateKind::TwoModeSqueezed { .. } => {
            return Err(Error::InvalidStateParameter(
                "two-mode squeezed state is not a single-mode factor".into(),
            ))
        }
    };
    Ok(repr)
}

/// Builds a state of `n_modes` modes: single-mode kinds are repeated on every
/// mode, the two-mode squeezed vacuum requires `n_modes == 2`. Rejects states
/// whose top-level occupancy exceeds [`DEFAULT_TAIL_TOLERANCE`].
pub fn make_state(kind: &StateKind, cutoff: usize, n_modes: usize) -> Result<FockState> {
    make_state_with_tolerance(kind, cutoff, n_modes, Some(DEFAULT_TAIL_TOLERANCE))
}

/// Like [`make_state`]; `tail_tolerance = None` disables the truncation check.
pub fn make_state_with_tolerance(
    kind: &StateKind,
    cutoff: usize,
    n_modes: usize,
    tail_tolerance: Option<f64>,
) -> Result<FockState> {
    let space = FockSpace::new(n_modes, cutoff)?;
    let state = if let StateKind::TwoModeSqueezed { r } = *kind {
        if n_modes != 2 {
            return Err(Error::InvalidStateParameter(format!(
                "two-mode squeezed state needs 2 modes, got {n_modes}"
            )));
        }
        let r = finite("r", r)?;
        if r < 0.0 {
            return Err(Error::InvalidStateParameter(format!("squeezing r = {r} < 0")));
        }
        let mut v = DVector::from_element(space.dim(), Complex64::new(0.0, 0.0));
        let mut c = 1.0 / r.cosh();
        for n in 0..space.levels() {
            v[space.index(&[n, n])] = Complex64::new(c, 0.0);
            c *= -r.tanh();
        }
        FockState::from_representation(space, Representation::Pure(v))?
    } else {
        let factor = single_mode_amplitudes(kind, space.levels())?;
        let single = FockState::from_representation(FockSpace::new(1, cutoff)?, factor)?;
        let copies = vec![single; n_modes];
        FockState::product(&copies)?
    };
    if let Some(tol) = tail_tolerance {
        state.check_tail(tol)?;
    }
    Ok(state)
}

impl FockState {
    /// Normalizes the given representation and records tail occupancies.
    pub fn from_representation(space: FockSpace, repr: Representation) -> Result<Self> {
        let repr = match repr {
            Representation::Pure(v) => {
                if v.len() != space.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: space.dim(),
                        found: v.len(),
                    });
                }
                let norm = v.norm();
                if !(norm.is_finite() && norm > 0.0) {
                    return Err(Error::InvalidStateParameter(format!(
                        "amplitude vector has norm {norm}"
                    )));
                }
                Representation::Pure(v / Complex64::new(norm, 0.0))
            }
            Representation::Mixed(rho) => {
                if rho.nrows() != space.dim() || rho.ncols() != space.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: space.dim(),
                        found: rho.nrows(),
                    });
                }
                let defect = (&rho - rho.adjoint()).camax();
                if defect > HERMITIAN_TOL {
                    return Err(Error::InvalidDensity(format!(
                        "Hermiticity defect {defect:.3e}"
                    )));
                }
                let trace = rho.trace();
                if !(trace.re.is_finite() && trace.re > 0.0) {
                    return Err(Error::InvalidDensity(format!("trace {trace}")));
                }
                let rho = rho / trace;
                let min_eig = rho
                    .clone()
                    .symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                if min_eig < -NEGATIVE_EIGEN_TOL {
                    return Err(Error::InvalidDensity(format!(
                        "negative eigenvalue {min_eig:.3e}"
                    )));
                }
                Representation::Mixed(rho)
            }
        };
        let mut state = Self {
            space,
            repr,
            tails: Vec::new(),
        };
        state.tails = state.compute_tails();
        debug_assert!((state.trace() - 1.0).abs() < NORM_TOL);
        Ok(state)
    }

    pub fn pure(space: FockSpace, amplitudes: DVector<Complex64>) -> Result<Self> {
        Self::from_representation(space, Representation::Pure(amplitudes))
    }

    pub fn mixed(space: FockSpace, density: DMatrix<Complex64>) -> Result<Self> {
        Self::from_representation(space, Representation::Mixed(density))
    }

    /// Tensor product of states with equal cutoffs, in mode order.
    pub fn product(factors: &[FockState]) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidStateParameter("empty product".into()))?;
        let cutoff = first.space.cutoff;
        if let Some(bad) = factors.iter().find(|f| f.space.cutoff != cutoff) {
            return Err(Error::DimensionMismatch {
                expected: cutoff,
                found: bad.space.cutoff,
            });
        }
        let n_modes = factors.iter().map(|f| f.space.n_modes).sum();
        let space = FockSpace::new(n_modes, cutoff)?;
        let repr = if factors.iter().all(FockState::is_pure) {
            let mut iter = factors.iter().map(|f| match &f.repr {
                Representation::Pure(v) => v.clone(),
                Representation::Mixed(_) => unreachable!(),
            });
            let first = iter.next().unwrap();
            Representation::Pure(iter.fold(first, |acc, v| acc.kronecker(&v)))
        } else {
            let mut iter = factors.iter().map(FockState::density);
            let first = iter.next().unwrap();
            Representation::Mixed(iter.fold(first, |acc, m| acc.kronecker(&m)))
        };
        Self::from_representation(space, repr)
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Representation::Pure(_))
    }

    pub fn density(&self) -> DMatrix<Complex64> {
        match &self.repr {
            Representation::Pure(v) => v * v.adjoint(),
            Representation::Mixed(rho) => rho.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Representation::Pure(v) => v.norm_squared(),
            Representation::Mixed(rho) => rho.trace().re,
        }
    }

    /// Diagonal of the density operator in the Fock basis.
    pub fn populations(&self) -> Vec<f64> {
        match &self.repr {
            Representation::Pure(v) => v.iter().map(|c| c.norm_sqr()).collect(),
            Representation::Mixed(rho) => (0..rho.nrows()).map(|i| rho[(i, i)].re).collect(),
        }
    }

    fn compute_tails(&self) -> Vec<f64> {
        let pops = self.populations();
        let mut tails = vec![0.0; self.space.n_modes];
        for (i, p) in pops.iter().enumerate() {
            for (mode, &n) in self.space.occupations(i).iter().enumerate() {
                if n == self.space.cutoff {
                    tails[mode] += p;
                }
            }
        }
        tails
    }

    /// Probability of each mode's top Fock level.
    pub fn tail_occupancies(&self) -> &[f64] {
        &self.tails
    }

    pub fn max_tail(&self) -> f64 {
        self.tails.iter().cloned().fold(0.0, f64::max)
    }

    pub fn check_tail(&self, tolerance: f64) -> Result<()> {
        match self
            .tails
            .iter()
            .enumerate()
            .find(|(_, &t)| t > tolerance)
        {
            Some((mode, &tail)) => Err(Error::TruncationTail {
                mode,
                tail,
                tolerance,
            }),
            None => Ok(()),
        }
    }

    /// Applies `exp(-i Σ_k θ_k n_k)`, i.e. the state seen by quadratures whose
    /// phases are shifted by `θ_k`.
    pub fn rotated(&self, angles: &[f64]) -> Result<Self> {
        if angles.len() != self.space.n_modes {
            return Err(Error::DimensionMismatch {
                expected: self.space.n_modes,
                found: angles.len(),
            });
        }
        let phases: Vec<Complex64> = (0..self.space.dim())
            .map(|i| {
                let theta: f64 = self
                    .space
                    .occupations(i)
                    .iter()
                    .zip(angles)
                    .map(|(&n, &a)| n as f64 * a)
                    .sum();
                Complex64::from_polar(1.0, -theta)
            })
            .collect();
        let repr = match &self.repr {
            Representation::Pure(v) => {
                Representation::Pure(DVector::from_fn(v.len(), |i, _| v[i] * phases[i]))
            }
            Representation::Mixed(rho) => Representation::Mixed(DMatrix::from_fn(
                rho.nrows(),
                rho.ncols(),
                |i, j| phases[i] * rho[(i, j)] * phases[j].conj(),
            )),
        };
        Ok(Self {
            space: self.space,
            repr,
            tails: self.tails.clone(),
        })
    }

    /// Average of the state over a common phase rotation of all modes: removes
    /// every coherence between different total photon numbers.
    pub fn dephased(&self) -> Self {
        let totals = self.space.total_numbers();
        let rho = self.density();
        let dephased = DMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| {
            if totals[i] == totals[j] {
                rho[(i, j)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self {
            space: self.space,
            repr: Representation::Mixed(dephased),
            tails: self.tails.clone(),
        }
    }
}

/// `⟨O⟩ = tr(ρ O)`.
pub fn expect(state: &FockState, op: &Operator) -> Result<Complex64> {
    if op.space.dim() != state.space.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.space.dim(),
            found: op.space.dim(),
        });
    }
    let value = match &state.repr {
        Representation::Pure(v) => v.dotc(&(&op.matrix * v)),
        Representation::Mixed(rho) => {
            // tr(ρ O) = Σ_ij ρ_ji O_ij
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..rho.ncols() {
                for i in 0..rho.nrows() {
                    acc += rho[(j, i)] * op.matrix[(i, j)];
                }
            }
            acc
        }
    };
    Ok(value)
}

/// Expectation of an operator expected to be Hermitian; fails when the
/// imaginary part exceeds `1e-10`.
pub fn expect_real(state: &FockState, op: &Operator) -> Result<f64> {
    let value = expect(state, op)?;
    if value.im.abs() > EXPECT_IMAG_TOL {
        return Err(Error::NotHermitian(value.im));
    }
    Ok(value.re)
}

pub fn expect_mode(state: &FockState, op: &ModeOperator) -> Result<Complex64> {
    expect(state, &op.embed())
}

/// Expectation of a tensor product of single-mode factors.
pub fn expect_local_product(
    state: &FockState,
    factors: &[(usize, &DMatrix<Complex64>)],
) -> Result<Complex64> {
    let op = Operator::product_of_local(state.space, factors)?;
    expect(state, &op)
}
