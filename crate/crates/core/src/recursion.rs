//! Partition-free laws of urn sums for large `n`.
//!
//! Removing the block that holds a fixed item from an Ewens partition of `m`
//! items leaves an Ewens partition of the rest, so
//! `S_m = j X + S_{m-j}` in law with `j ~ block_size_law(alpha, m)` and the
//! three pieces independent. Both engines below iterate that identity and
//! never enumerate partitions.

use nalgebra::DMatrix;

use crate::error::{domain, CdpError, Result};
use crate::partitions::{block_size_law, check_alpha};
use crate::phase_type::PhaseType;
use crate::special::{normal_cdf, normal_pdf, poisson_weights};

/// Largest `n` for which [`SquareSizeLaw`] tables are built.
pub const DEFAULT_SQUARE_LAW_CAP: usize = 320;

/// Poisson mass neglected by the uniformization series.
const POISSON_TAIL: f64 = 1e-16;

/// `P(S_n <= x)` and the density of `S_n` at `x`, for `n = 0..=max_n`, with
/// phase-type draws.
#[derive(Clone, Debug, PartialEq)]
pub struct SumCdfs {
    pub values: Vec<f64>,
    /// Densities at `x`; entry 0 is zero (`S_0 = 0` is an atom).
    pub densities: Vec<f64>,
    /// Every entry of `values` may fall short of the exact value by at most this much.
    pub error: f64,
    /// Same for `densities`.
    pub density_error: f64,
}

/// Cumulative distribution functions and densities of urn sums of a
/// phase-type base at `x`, for every `n <= max_n` at once.
///
/// `S_n` is itself the absorption time of a chain on states
/// `(items left m, current block size j, phase)`, which is evaluated by
/// uniformization at rate `max_i |T_ii|`; all arithmetic is on non-negative
/// numbers so small probabilities keep their relative accuracy.
pub fn ph_sum_cdfs(alpha: f64, base: &PhaseType, x: f64, max_n: usize) -> Result<SumCdfs> {
    check_alpha(alpha)?;
    if !x.is_finite() {
        return domain(format!("evaluation point must be finite, got {x}"));
    }
    let mut values = vec![0.0; max_n + 1];
    let mut densities = vec![0.0; max_n + 1];
    let p = base.dim();
    let gen = base.generator();
    let rate = (0..p).map(|i| -gen[(i, i)]).fold(0.0, f64::max);
    if x < 0.0 {
        return Ok(SumCdfs {
            values,
            densities,
            error: 0.0,
            density_error: 0.0,
        });
    }
    values[0] = 1.0;
    if max_n == 0 {
        return Ok(SumCdfs {
            values,
            densities,
            error: 0.0,
            density_error: 0.0,
        });
    }
    let (pois, tail) = poisson_weights(rate * x, POISSON_TAIL);

    let step: Vec<DMatrix<f64>> = (1..=max_n)
        .map(|j| DMatrix::identity(p, p) + gen / (j as f64 * rate))
        .collect();
    let exit: Vec<Vec<f64>> = (1..=max_n)
        .map(|j| {
            base.exit_vector()
                .iter()
                .map(|e| e / (j as f64 * rate))
                .collect()
        })
        .collect();
    let weights: Vec<Vec<f64>> = (1..=max_n).map(|m| block_size_law(alpha, m)).collect();
    let pi = base.initial();

    // a[(m, j)] holds, per phase, the probability of absorption within k steps
    let offset = |m: usize, j: usize| ((m * (m - 1)) / 2 + (j - 1)) * p;
    let total = offset(max_n, max_n) + p;
    let mut a = vec![0.0; total];
    let mut next = vec![0.0; total];
    // absorbed[m] = P(absorbed within k steps | start with m items)
    let mut absorbed = vec![0.0; max_n + 1];
    absorbed[0] = 1.0;
    let mut fresh = vec![0.0; max_n + 1];
    let mut advance = |a: &mut Vec<f64>, next: &mut Vec<f64>, absorbed: &mut Vec<f64>| {
        for m in 1..=max_n {
            let mut acc = 0.0;
            for j in 1..=m {
                let at = offset(m, j);
                let s = &step[j - 1];
                let below = absorbed[m - j];
                for r in 0..p {
                    let mut v = exit[j - 1][r] * below;
                    for c in 0..p {
                        v += s[(r, c)] * a[at + c];
                    }
                    next[at + r] = v;
                }
                let start: f64 = (0..p).map(|r| pi[r] * next[at + r]).sum();
                acc += weights[m - 1][j - 1] * start;
            }
            fresh[m] = acc;
        }
        std::mem::swap(a, next);
        absorbed[1..].copy_from_slice(&fresh[1..]);
    };
    let mut before = vec![0.0; max_n + 1];
    for &pk in &pois {
        // the density is rate * sum_k P(K = k) P(absorbed at step k + 1)
        before.copy_from_slice(&absorbed);
        for m in 1..=max_n {
            values[m] += pk * before[m];
        }
        advance(&mut a, &mut next, &mut absorbed);
        for m in 1..=max_n {
            densities[m] += pk * rate * (absorbed[m] - before[m]).max(0.0);
        }
    }
    for v in values.iter_mut() {
        *v = v.min(1.0);
    }
    Ok(SumCdfs {
        values,
        densities,
        error: tail,
        density_error: rate * tail,
    })
}

/// Laws of `Q_n = sum_j j^2 v_j` for `n = 0..=max_n`, where `v` is the Ewens
/// partition of `n` items. With a Gaussian base `N(mu, sigma2)` the urn sum
/// given the partition is `N(n mu, sigma2 Q_n)`.
#[derive(Clone, Debug)]
pub struct SquareSizeLaw {
    pub alpha: f64,
    /// `pmfs[n][q] = P(Q_n = q)`, dense over `q = 0..=n^2`.
    pub pmfs: Vec<Vec<f64>>,
}

impl SquareSizeLaw {
    pub fn new(alpha: f64, max_n: usize) -> Result<Self> {
        Self::with_cap(alpha, max_n, DEFAULT_SQUARE_LAW_CAP)
    }

    pub fn with_cap(alpha: f64, max_n: usize, cap: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if max_n > cap {
            return Err(CdpError::Resource(format!(
                "square-size law for n = {max_n} exceeds the cap of {cap}"
            )));
        }
        let mut pmfs: Vec<Vec<f64>> = Vec::with_capacity(max_n + 1);
        pmfs.push(vec![1.0]);
        for n in 1..=max_n {
            let w = block_size_law(alpha, n);
            let mut pmf = vec![0.0; n * n + 1];
            for j in 1..=n {
                let shift = j * j;
                let wj = w[j - 1];
                for (q, &pr) in pmfs[n - j].iter().enumerate() {
                    if pr > 0.0 {
                        pmf[q + shift] += wj * pr;
                    }
                }
            }
            pmfs.push(pmf);
        }
        Ok(Self { alpha, pmfs })
    }

    pub fn max_n(&self) -> usize {
        self.pmfs.len() - 1
    }
}

/// A group of adjacent `q` values evaluated as one.
#[derive(Clone, Copy, Debug, PartialEq)]
struct QBin {
    lo: f64,
    hi: f64,
    mean: f64,
    mass: f64,
}

/// Conditional laws `P(S_n <= s | n)` for a Gaussian base, with adjacent
/// variance levels pooled for large `n`. Every evaluation returns a value
/// and a rigorous bound on the pooling error.
#[derive(Clone, Debug)]
pub struct GaussianSumLaw {
    pub mu: f64,
    pub sigma2: f64,
    bins: Vec<Vec<QBin>>,
}

/// Largest `n` evaluated without pooling.
const EXACT_LEVELS: usize = 64;
/// Ratio of `sqrt(q)` across one pooled bin.
const BIN_RATIO: f64 = 1.01;

impl GaussianSumLaw {
    pub fn new(law: &SquareSizeLaw, mu: f64, sigma2: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma2 > 0.0) || !sigma2.is_finite() {
            return domain("gaussian base needs a finite mean and positive variance");
        }
        let mut bins = Vec::with_capacity(law.pmfs.len());
        for (n, pmf) in law.pmfs.iter().enumerate() {
            let mut out: Vec<QBin> = Vec::new();
            for (q, &pr) in pmf.iter().enumerate() {
                if pr <= 0.0 {
                    continue;
                }
                let qf = q as f64;
                let merge = n > EXACT_LEVELS
                    && out
                        .last()
                        .is_some_and(|b| (qf / b.lo).sqrt() <= BIN_RATIO);
                if merge {
                    let b = out.last_mut().expect("checked");
                    b.mean = (b.mean * b.mass + qf * pr) / (b.mass + pr);
                    b.mass += pr;
                    b.hi = qf;
                } else {
                    out.push(QBin {
                        lo: qf,
                        hi: qf,
                        mean: qf,
                        mass: pr,
                    });
                }
            }
            bins.push(out);
        }
        Ok(Self { mu, sigma2, bins })
    }

    pub fn max_n(&self) -> usize {
        self.bins.len() - 1
    }

    /// `(P(S_n <= s), bound)`. `S_0 = 0`.
    pub fn cdf(&self, n: usize, s: f64) -> (f64, f64) {
        if n == 0 {
            return (if s >= 0.0 { 1.0 } else { 0.0 }, 0.0);
        }
        let m = n as f64 * self.mu;
        let mut value = 0.0;
        let mut bound = 0.0;
        for b in &self.bins[n] {
            let c = normal_cdf(s, m, self.sigma2 * b.mean);
            value += b.mass * c;
            if b.hi > b.lo {
                let lo = normal_cdf(s, m, self.sigma2 * b.lo);
                let hi = normal_cdf(s, m, self.sigma2 * b.hi);
                bound += b.mass * (c - lo).abs().max((c - hi).abs());
            }
        }
        (value, bound)
    }

    /// `(density of S_n at s, bound)` for `n >= 1`.
    pub fn density(&self, n: usize, s: f64) -> (f64, f64) {
        if n == 0 {
            return (0.0, 0.0);
        }
        let m = n as f64 * self.mu;
        let d2 = (s - m) * (s - m);
        let mut value = 0.0;
        let mut bound = 0.0;
        for b in &self.bins[n] {
            let f = normal_pdf(s, m, self.sigma2 * b.mean);
            value += b.mass * f;
            if b.hi > b.lo {
                // unimodal in the variance with its peak at variance = (s - m)^2
                let (vlo, vhi) = (self.sigma2 * b.lo, self.sigma2 * b.hi);
                let flo = normal_pdf(s, m, vlo);
                let fhi = normal_pdf(s, m, vhi);
                let mut top = flo.max(fhi);
                if d2 > vlo && d2 < vhi {
                    top = top.max(normal_pdf(s, m, d2));
                }
                let bottom = flo.min(fhi);
                bound += b.mass * (top - f).max(f - bottom);
            }
        }
        (value, bound)
    }
}
