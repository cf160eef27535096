//! Phase-type laws `PH(pi, T)`: absorption times of a finite Markov jump
//! process with initial law `pi` and transient subgenerator `T`.
//!
//! Density `f(u) = pi exp(Tu) t` with exit vector `t = -T 1`. The family is
//! closed under positive scaling (`T / c` is the law of `cX`) and under
//! convolution, which is what makes partition mixtures of sums explicit.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{domain, CdpError, Result};
use crate::expm::{expm_capped, DEFAULT_MATRIX_CAP};
use crate::partitions::PartitionMultiplicity;

const TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhaseTypeSpec", into = "PhaseTypeSpec")]
pub struct PhaseType {
    pi: DVector<f64>,
    t: DMatrix<f64>,
    exit: DVector<f64>,
}

/// Serialized form: dimension, initial vector, subgenerator in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseTypeSpec {
    pub dimension: usize,
    pub pi: Vec<f64>,
    pub t: Vec<f64>,
}

impl TryFrom<PhaseTypeSpec> for PhaseType {
    type Error = CdpError;
    fn try_from(s: PhaseTypeSpec) -> Result<Self> {
        PhaseType::from_row_major(s.dimension, s.pi, &s.t)
    }
}

impl From<PhaseType> for PhaseTypeSpec {
    fn from(ph: PhaseType) -> Self {
        let p = ph.dim();
        let mut t = Vec::with_capacity(p * p);
        for i in 0..p {
            for j in 0..p {
                t.push(ph.t[(i, j)]);
            }
        }
        PhaseTypeSpec {
            dimension: p,
            pi: ph.pi.iter().copied().collect(),
            t,
        }
    }
}

impl PhaseType {
    pub fn new(pi: Vec<f64>, t: DMatrix<f64>) -> Result<Self> {
        let p = pi.len();
        if p == 0 {
            return domain("phase-type dimension must be at least 1");
        }
        if t.shape() != (p, p) {
            return domain(format!(
                "subgenerator is {:?} but the initial vector has length {p}",
                t.shape()
            ));
        }
        if pi.iter().chain(t.iter()).any(|x| !x.is_finite()) {
            return domain("phase-type parameters must be finite");
        }
        if pi.iter().any(|&x| x < -TOL) {
            return domain("initial vector has a negative entry");
        }
        let mass: f64 = pi.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return domain(format!("initial vector sums to {mass}, expected 1"));
        }
        for i in 0..p {
            if !(t[(i, i)] < 0.0) {
                return domain(format!("diagonal entry T[{i},{i}] must be negative"));
            }
            for j in 0..p {
                if i != j && t[(i, j)] < 0.0 {
                    return domain(format!("off-diagonal entry T[{i},{j}] is negative"));
                }
            }
        }
        let exit = -(&t * DVector::from_element(p, 1.0));
        let scale = t.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if exit.iter().any(|&e| e < -TOL * scale) {
            return domain("subgenerator has a positive row sum");
        }
        if !exit.iter().any(|&e| e > TOL * scale) {
            return domain("exit vector is identically zero; absorption never happens");
        }
        let exit = exit.map(|e| e.max(0.0));
        if !absorbing_from_everywhere(&t, &exit) {
            return domain("some phases can never reach absorption");
        }
        Ok(Self {
            pi: DVector::from_vec(pi.into_iter().map(|x| x.max(0.0)).collect()),
            t,
            exit,
        })
    }

    pub fn from_row_major(dimension: usize, pi: Vec<f64>, t: &[f64]) -> Result<Self> {
        if t.len() != dimension * dimension || pi.len() != dimension {
            return domain(format!(
                "phase-type of dimension {dimension} needs {} generator entries and {dimension} initial probabilities",
                dimension * dimension
            ));
        }
        Self::new(pi, DMatrix::from_row_slice(dimension, dimension, t))
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return domain(format!("exponential rate must be positive, got {rate}"));
        }
        Self::new(vec![1.0], DMatrix::from_element(1, 1, -rate))
    }

    /// Sum of `k` independent exponentials with a common rate.
    pub fn erlang(k: usize, rate: f64) -> Result<Self> {
        if k == 0 {
            return domain("Erlang shape must be at least 1");
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return domain(format!("Erlang rate must be positive, got {rate}"));
        }
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = -rate;
            if i + 1 < k {
                t[(i, i + 1)] = rate;
            }
        }
        let mut pi = vec![0.0; k];
        pi[0] = 1.0;
        Self::new(pi, t)
    }

    pub fn dim(&self) -> usize {
        self.pi.len()
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn exit_vector(&self) -> &DVector<f64> {
        &self.exit
    }

    /// `exp(T u)`, the transient transition matrix over a span `u`.
    pub fn transient_kernel(&self, u: f64) -> Result<DMatrix<f64>> {
        expm_capped(&(&self.t * u), DEFAULT_MATRIX_CAP.max(self.dim()))
    }

    /// `pi exp(Tu) t`; zero for negative `u`.
    pub fn density(&self, u: f64) -> Result<f64> {
        if u < 0.0 {
            return Ok(0.0);
        }
        let k = self.transient_kernel(u)?;
        Ok(self.pi.dot(&(k * &self.exit)).max(0.0))
    }

    /// `pi exp(Tu) 1`.
    pub fn survival(&self, u: f64) -> Result<f64> {
        if u <= 0.0 {
            return Ok(1.0);
        }
        let k = self.transient_kernel(u)?;
        let ones = DVector::from_element(self.dim(), 1.0);
        Ok(self.pi.dot(&(k * ones)).clamp(0.0, 1.0))
    }

    pub fn cdf(&self, u: f64) -> Result<f64> {
        Ok(1.0 - self.survival(u)?)
    }

    /// `E[X^k] = k! pi (-T)^{-k} 1`.
    pub fn moment(&self, k: u32) -> f64 {
        let p = self.dim();
        let neg_inv = (-&self.t)
            .try_inverse()
            .expect("validated subgenerator is invertible");
        let mut v = DVector::from_element(p, 1.0);
        let mut fact = 1.0;
        for i in 1..=k {
            v = &neg_inv * v;
            fact *= i as f64;
        }
        fact * self.pi.dot(&v)
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// `E[exp(sX)] = pi (-sI - T)^{-1} t`, or `None` when `s` is at or beyond
    /// the decay rate of the slowest phase (the expectation diverges).
    pub fn mgf(&self, s: f64) -> Option<f64> {
        let p = self.dim();
        let a = -(&self.t) - DMatrix::identity(p, p) * s;
        // a is a Z-matrix; it is a non-singular M-matrix (finite MGF) iff its inverse is entrywise >= 0
        let inv = a.try_inverse()?;
        let scale = inv.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if !scale.is_finite() || inv.iter().any(|&x| x < -1e-12 * scale) {
            return None;
        }
        let m = self.pi.dot(&(inv * &self.exit));
        (m.is_finite() && m > 0.0).then_some(m)
    }

    /// Law of `c X` for `c > 0`: `PH(pi, T / c)`.
    pub fn scale_by(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return domain(format!("scale factor must be positive, got {c}"));
        }
        Ok(Self {
            pi: self.pi.clone(),
            t: &self.t / c,
            exit: &self.exit / c,
        })
    }

    /// `H_j`: the law of `j X`.
    pub fn scale(&self, j: usize) -> Result<Self> {
        if j == 0 {
            return domain("scale index must be at least 1");
        }
        self.scale_by(j as f64)
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`:
    /// `PH((pi_a, 0), [[T_a, t_a pi_b], [0, T_b]])`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.convolve_capped(other, DEFAULT_MATRIX_CAP)
    }

    pub fn convolve_capped(&self, other: &Self, cap: usize) -> Result<Self> {
        let (pa, pb) = (self.dim(), other.dim());
        let p = pa + pb;
        if p > cap {
            return Err(CdpError::Resource(format!(
                "convolution dimension {p} exceeds the cap of {cap}"
            )));
        }
        let mut t = DMatrix::zeros(p, p);
        t.view_mut((0, 0), (pa, pa)).copy_from(&self.t);
        t.view_mut((pa, pa), (pb, pb)).copy_from(&other.t);
        let coupling = &self.exit * other.pi.transpose();
        t.view_mut((0, pa), (pa, pb)).copy_from(&coupling);
        let mut pi = DVector::zeros(p);
        pi.rows_mut(0, pa).copy_from(&self.pi);
        let mut exit = DVector::zeros(p);
        exit.rows_mut(pa, pb).copy_from(&other.exit);
        Ok(Self { pi, t, exit })
    }

    /// Draws an absorption time by running the jump chain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = self.dim();
        let mut state = pick(self.pi.as_slice(), rng);
        let mut elapsed = 0.0;
        loop {
            let rate = -self.t[(state, state)];
            elapsed += Exp::new(rate).expect("positive rate").sample(rng);
            let u: f64 = rng.random::<f64>() * rate;
            let mut acc = self.exit[state];
            if u < acc {
                return elapsed;
            }
            let mut next = None;
            for j in 0..p {
                if j == state {
                    continue;
                }
                acc += self.t[(state, j)];
                if u < acc {
                    next = Some(j);
                    break;
                }
            }
            match next {
                Some(j) => state = j,
                // rounding left u beyond the last bucket; absorb
                None => return elapsed,
            }
        }
    }
}

fn pick<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn absorbing_from_everywhere(t: &DMatrix<f64>, exit: &DVector<f64>) -> bool {
    let p = exit.len();
    let mut reach: Vec<bool> = exit.iter().map(|&e| e > 0.0).collect();
    loop {
        let mut changed = false;
        for i in 0..p {
            if reach[i] {
                continue;
            }
            if (0..p).any(|j| j != i && t[(i, j)] > 0.0 && reach[j]) {
                reach[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    reach.into_iter().all(|r| r)
}

/// A phase-type law assembled for one partition pattern `v`: the sum of
/// `v_j` independent copies of `j X` for every block size `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPhaseType {
    pub ph: PhaseType,
    pub partition: PartitionMultiplicity,
    /// `(block size j, multiplicity v_j)` in the order the blocks are chained.
    pub groups: Vec<(usize, u32)>,
    pub base_dim: usize,
}

/// Builds `PH((pi, 0, ..., 0), T^v)` for the base law and partition `v`.
///
/// Group `j` is `v_j` copies of `T / j` chained by `t pi / j`; consecutive
/// non-empty groups are chained by the exit rates of the group being left,
/// i.e. `t pi / j` out of group `j`. Groups with `v_j = 0` are skipped.
pub fn ph_partition_block(base: &PhaseType, v: &PartitionMultiplicity) -> Result<BlockPhaseType> {
    ph_partition_block_capped(base, v, DEFAULT_MATRIX_CAP)
}

pub fn ph_partition_block_capped(
    base: &PhaseType,
    v: &PartitionMultiplicity,
    cap: usize,
) -> Result<BlockPhaseType> {
    let p = base.dim();
    let groups: Vec<(usize, u32)> = v.groups().collect();
    let copies = v.blocks();
    let dim = p * copies;
    if dim > cap {
        return Err(CdpError::Resource(format!(
            "partition block dimension {dim} (= {p} phases x {copies} blocks) exceeds the cap of {cap}"
        )));
    }
    let coupling = base.exit_vector() * base.initial().transpose();
    let mut t = DMatrix::zeros(dim, dim);
    let mut slot = 0usize;
    let mut last_scale = 1.0;
    for &(j, count) in &groups {
        let jf = j as f64;
        for _ in 0..count {
            let at = slot * p;
            t.view_mut((at, at), (p, p)).copy_from(&(base.generator() / jf));
            if slot > 0 {
                let prev = at - p;
                t.view_mut((prev, at), (p, p))
                    .copy_from(&(&coupling / last_scale));
            }
            last_scale = jf;
            slot += 1;
        }
    }
    let mut pi = DVector::zeros(dim);
    pi.rows_mut(0, p).copy_from(base.initial());
    let mut exit = DVector::zeros(dim);
    exit.rows_mut(dim - p, p).copy_from(&(base.exit_vector() / last_scale));
    Ok(BlockPhaseType {
        ph: PhaseType { pi, t, exit },
        partition: v.clone(),
        groups,
        base_dim: p,
    })
}
