//! Law of `S_n = X_1 + ... + X_n` for urn draws `X_i`: an explicit mixture
//! over partition patterns, its moments and its moment generating function.

use serde::{Deserialize, Serialize};

use crate::dp::{BaseDistribution, DirichletPrior};
use crate::error::{domain, CdpError, Result};
use crate::expm::DEFAULT_MATRIX_CAP;
use crate::par;
use crate::partitions::{
    check_alpha, enumerate_partitions_capped, ewens_log_prob, keep_mask, log_factorial,
    log_rising_factorial, PartitionMultiplicity, Truncation, DEFAULT_PARTITION_CAP,
};
use crate::phase_type::{ph_partition_block_capped, BlockPhaseType, PhaseType};
use crate::process::Bounded;
use crate::recursion::{ph_sum_cdfs, GaussianSumLaw, SquareSizeLaw};
use crate::special::{log_sum_exp, normal_cdf, normal_pdf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Gaussian,
    PhaseType,
}

/// The conditional law of `S_n` given one partition pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Gaussian { mean: f64, variance: f64 },
    PhaseType(BlockPhaseType),
}

impl Component {
    pub fn cdf(&self, s: f64) -> Result<f64> {
        match self {
            Self::Gaussian { mean, variance } => Ok(normal_cdf(s, *mean, *variance)),
            Self::PhaseType(b) => b.ph.cdf(s),
        }
    }

    pub fn density(&self, s: f64) -> Result<f64> {
        match self {
            Self::Gaussian { mean, variance } => Ok(normal_pdf(s, *mean, *variance)),
            Self::PhaseType(b) => b.ph.density(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnComponent {
    pub log_weight: f64,
    pub partition: PartitionMultiplicity,
    pub component: Component,
}

/// Finite mixture representing the law of `S_n`. When the mixture was
/// truncated the kept weights sum to `1 - discarded_mass`; they are not
/// renormalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnMixture {
    pub n: usize,
    pub alpha: f64,
    pub base_kind: BaseKind,
    pub components: Vec<SnComponent>,
    pub discarded_mass: f64,
}

impl SnMixture {
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.components.iter().map(|c| c.log_weight.exp())
    }

    pub fn log_total_weight(&self) -> f64 {
        let lw: Vec<f64> = self.components.iter().map(|c| c.log_weight).collect();
        log_sum_exp(&lw)
    }

    /// Checks a mixture read from outside: weights plus discarded mass sum
    /// to one and the components match the declared base kind.
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.components.is_empty() {
            return domain("mixture has no components");
        }
        let kept = self.log_total_weight().exp();
        if (kept + self.discarded_mass - 1.0).abs() > 1e-10 {
            return domain(format!(
                "mixture weights sum to {kept} with discarded mass {}, expected 1",
                self.discarded_mass
            ));
        }
        for c in &self.components {
            if c.partition.n() != self.n {
                return domain(format!("component partition {} is not a partition of {}", c.partition, self.n));
            }
            let ok = matches!(
                (&c.component, self.base_kind),
                (Component::Gaussian { .. }, BaseKind::Gaussian)
                    | (Component::PhaseType(_), BaseKind::PhaseType)
            );
            if !ok {
                return domain("mixture component does not match the base kind");
            }
        }
        Ok(())
    }

    /// `sum_v w_v P(S_n <= s | v)` over the kept components.
    pub fn cdf(&self, s: f64) -> Result<f64> {
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.log_weight.exp() * c.component.cdf(s)?;
        }
        Ok(acc.clamp(0.0, 1.0))
    }

    pub fn density(&self, s: f64) -> Result<f64> {
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.log_weight.exp() * c.component.density(s)?;
        }
        Ok(acc)
    }

    pub fn cdf_grid(&self, points: &[f64]) -> Result<Vec<f64>> {
        par::map(points, |&s| self.cdf(s)).into_iter().collect()
    }

    pub fn density_grid(&self, points: &[f64]) -> Result<Vec<f64>> {
        par::map(points, |&s| self.density(s)).into_iter().collect()
    }
}

pub fn sn_cdf(mix: &SnMixture, s: f64) -> Result<f64> {
    mix.cdf(s)
}

fn weighted_partitions(
    n: usize,
    alpha: f64,
    truncation: Truncation,
    cap: usize,
) -> Result<(Vec<(PartitionMultiplicity, f64)>, f64)> {
    check_alpha(alpha)?;
    let parts = enumerate_partitions_capped(n, cap)?;
    let logw = parts
        .iter()
        .map(|p| ewens_log_prob(p, alpha).map(|w| w.log_prob))
        .collect::<Result<Vec<_>>>()?;
    let keep = keep_mask(&logw, truncation)?;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for ((p, lw), k) in parts.into_iter().zip(logw).zip(keep) {
        if k {
            kept.push((p, lw));
        } else {
            dropped.push(lw);
        }
    }
    let discarded = if dropped.is_empty() {
        0.0
    } else {
        log_sum_exp(&dropped).exp()
    };
    Ok((kept, discarded))
}

/// `S_n` for a `N(mu, sigma2)` base: one component `N(n mu, sigma2 sum_j j^2 v_j)` per partition.
pub fn sn_mixture_gaussian(n: usize, alpha: f64, mu: f64, sigma2: f64) -> Result<SnMixture> {
    sn_mixture_gaussian_with(n, alpha, mu, sigma2, Truncation::Full, DEFAULT_PARTITION_CAP)
}

pub fn sn_mixture_gaussian_with(
    n: usize,
    alpha: f64,
    mu: f64,
    sigma2: f64,
    truncation: Truncation,
    partition_cap: usize,
) -> Result<SnMixture> {
    if !mu.is_finite() || !(sigma2 > 0.0) || !sigma2.is_finite() {
        return domain("gaussian base needs a finite mean and positive variance");
    }
    let (kept, discarded_mass) = weighted_partitions(n, alpha, truncation, partition_cap)?;
    let components = kept
        .into_iter()
        .map(|(v, log_weight)| SnComponent {
            log_weight,
            component: Component::Gaussian {
                mean: n as f64 * mu,
                variance: sigma2 * v.sum_squared_sizes() as f64,
            },
            partition: v,
        })
        .collect();
    Ok(SnMixture {
        n,
        alpha,
        base_kind: BaseKind::Gaussian,
        components,
        discarded_mass,
    })
}

/// `S_n` for a phase-type base: one [`BlockPhaseType`] per partition.
pub fn sn_mixture_phasetype(n: usize, alpha: f64, base: &PhaseType) -> Result<SnMixture> {
    sn_mixture_phasetype_with(
        n,
        alpha,
        base,
        Truncation::Full,
        DEFAULT_PARTITION_CAP,
        DEFAULT_MATRIX_CAP,
    )
}

pub fn sn_mixture_phasetype_with(
    n: usize,
    alpha: f64,
    base: &PhaseType,
    truncation: Truncation,
    partition_cap: usize,
    matrix_cap: usize,
) -> Result<SnMixture> {
    let (kept, discarded_mass) = weighted_partitions(n, alpha, truncation, partition_cap)?;
    let components = kept
        .into_iter()
        .map(|(v, log_weight)| {
            Ok(SnComponent {
                log_weight,
                component: Component::PhaseType(ph_partition_block_capped(base, &v, matrix_cap)?),
                partition: v,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SnMixture {
        n,
        alpha,
        base_kind: BaseKind::PhaseType,
        components,
        discarded_mass,
    })
}

/// `P(N_t = n) = P(S_n <= t) - P(S_{n+1} <= t)` for urn interarrivals with
/// a phase-type base, `S_0 = 0`.
pub fn counting_pmf(alpha: f64, interarrival: &PhaseType, t: f64, n: usize) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("horizon must be positive, got {t}"));
    }
    let c = ph_sum_cdfs(alpha, interarrival, t, n + 1)?;
    Ok((c.values[n] - c.values[n + 1]).max(0.0))
}

/// `M_{S_n}(t) = n!/(alpha)_n sum_v prod_j (alpha M_X(tj)/j)^{v_j} / v_j!`,
/// summed in log space.
pub fn mgf_sn<F>(n: usize, alpha: f64, base_mgf: F, t: f64) -> Result<f64>
where
    F: Fn(f64) -> Option<f64>,
{
    check_alpha(alpha)?;
    let parts = enumerate_partitions_capped(n, DEFAULT_PARTITION_CAP)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    let mut ln_term = Vec::with_capacity(n);
    for j in 1..=n {
        let arg = t * j as f64;
        match base_mgf(arg) {
            Some(m) if m > 0.0 && m.is_finite() => {
                ln_term.push(alpha.ln() + m.ln() - (j as f64).ln());
            }
            _ => {
                return domain(format!(
                    "base MGF diverges at t*j = {arg} (block size j = {j})"
                ))
            }
        }
    }
    let prefactor = log_factorial(n) - log_rising_factorial(alpha, n);
    let terms: Vec<f64> = parts
        .iter()
        .map(|v| {
            v.groups()
                .map(|(j, c)| c as f64 * ln_term[j - 1] - log_factorial(c as usize))
                .sum::<f64>()
        })
        .collect();
    Ok((prefactor + log_sum_exp(&terms)).exp())
}

/// Raw moments of a random sum of `N` urn draws from the moments of the
/// count `(E N, E N^2, E N^3)` and of one draw `(E X, E X^2, E X^3)`.
///
/// Index pairs coincide in value with probability `1/(alpha+1)`; a triple
/// has all three equal with probability `2/((alpha+1)(alpha+2))` and exactly
/// one coincident pair with probability `3 alpha/((alpha+1)(alpha+2))`.
pub fn compound_moments(count: [f64; 3], alpha: f64, mark: [f64; 3]) -> [f64; 3] {
    let [n1, n2, n3] = count;
    let [m1, m2, m3] = mark;
    let a = alpha;
    let pairs = n2 - n1;
    let triples = n3 - 3.0 * n2 + 2.0 * n1;
    let second = pairs * (a * m1 * m1 + m2) / (a + 1.0) + n1 * m2;
    let third = triples * (a * a * m1.powi(3) + 3.0 * a * m2 * m1 + 2.0 * m3)
        / ((a + 1.0) * (a + 2.0))
        + 3.0 * pairs * (a * m1 * m2 + m3) / (a + 1.0)
        + n1 * m3;
    [n1 * m1, second, third]
}

/// `(E S_n, E S_n^2, E S_n^3)` from the base moments.
pub fn moments_sn(n: usize, alpha: f64, base_moments: [f64; 3]) -> Result<[f64; 3]> {
    check_alpha(alpha)?;
    if n == 0 {
        return domain("n must be at least 1");
    }
    if base_moments.iter().any(|m| !m.is_finite()) {
        return domain("base moments must be finite");
    }
    let nf = n as f64;
    Ok(compound_moments([nf, nf * nf, nf * nf * nf], alpha, base_moments))
}

/// Largest `n` for which a phase-type `S_n` is evaluated as an explicit
/// mixture; beyond it the block recursion is cheaper.
pub const PH_MIXTURE_MAX_N: usize = 8;

enum SnEngine {
    Mixture(SnMixture),
    Gaussian(GaussianSumLaw),
    PhaseType { alpha: f64, ph: PhaseType },
}

/// The law of `S_n` for a Gaussian or phase-type base: the partition
/// mixture for small `n`, the recursions of [`crate::recursion`] beyond.
pub struct SnLaw {
    pub n: usize,
    engine: SnEngine,
}

impl SnLaw {
    pub fn new(n: usize, prior: &DirichletPrior) -> Result<Self> {
        prior.validate()?;
        if n == 0 {
            return domain("n must be at least 1");
        }
        let alpha = prior.alpha;
        let engine = match &prior.base {
            BaseDistribution::Gaussian { mu, sigma2 } if n <= DEFAULT_PARTITION_CAP => {
                SnEngine::Mixture(sn_mixture_gaussian(n, alpha, *mu, *sigma2)?)
            }
            BaseDistribution::Gaussian { mu, sigma2 } => {
                SnEngine::Gaussian(GaussianSumLaw::new(&SquareSizeLaw::new(alpha, n)?, *mu, *sigma2)?)
            }
            b => {
                let ph = b.as_phase_type().ok_or_else(|| {
                    CdpError::Capability(format!(
                        "the law of S_n needs a gaussian or phase-type base, got {}",
                        b.kind()
                    ))
                })?;
                if n <= PH_MIXTURE_MAX_N {
                    SnEngine::Mixture(sn_mixture_phasetype(n, alpha, &ph)?)
                } else {
                    SnEngine::PhaseType { alpha, ph }
                }
            }
        };
        Ok(Self { n, engine })
    }

    /// The explicit mixture, when that is the engine in use.
    pub fn mixture(&self) -> Option<&SnMixture> {
        match &self.engine {
            SnEngine::Mixture(m) => Some(m),
            _ => None,
        }
    }

    pub fn cdf(&self, s: f64) -> Result<Bounded> {
        let (value, bound) = match &self.engine {
            SnEngine::Mixture(m) => (m.cdf(s)?, m.discarded_mass),
            SnEngine::Gaussian(g) => g.cdf(self.n, s),
            SnEngine::PhaseType { alpha, ph } => {
                let c = ph_sum_cdfs(*alpha, ph, s, self.n)?;
                (c.values[self.n], c.error)
            }
        };
        Ok(Bounded {
            value,
            bound,
            mc_se: None,
        })
    }

    pub fn density(&self, s: f64) -> Result<Bounded> {
        let (value, bound) = match &self.engine {
            SnEngine::Mixture(m) => {
                let sup = match m.base_kind {
                    BaseKind::PhaseType => f64::INFINITY,
                    BaseKind::Gaussian => m
                        .components
                        .iter()
                        .map(|c| match c.component {
                            Component::Gaussian { variance, .. } => normal_pdf(0.0, 0.0, variance),
                            Component::PhaseType(_) => f64::INFINITY,
                        })
                        .fold(0.0, f64::max),
                };
                let bound = if m.discarded_mass > 0.0 { m.discarded_mass * sup } else { 0.0 };
                (m.density(s)?, bound)
            }
            SnEngine::Gaussian(g) => g.density(self.n, s),
            SnEngine::PhaseType { alpha, ph } => {
                let c = ph_sum_cdfs(*alpha, ph, s, self.n)?;
                (c.densities[self.n], c.density_error)
            }
        };
        Ok(Bounded {
            value,
            bound,
            mc_se: None,
        })
    }
}
