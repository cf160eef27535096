//! Dirichlet-process priors: base distributions, the generalized Pólya urn
//! and the conjugate posterior update.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, CdpError, Result};
use crate::partitions::{check_alpha, PartitionMultiplicity};
use crate::phase_type::PhaseType;
use crate::special::normal_cdf;

/// Largest integer Gamma shape rewritten as an Erlang phase-type law.
const MAX_ERLANG_SHAPE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// An observed value carried by a posterior base measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorAtom {
    pub value: f64,
    pub count: u64,
    /// `count / (alpha_0 + n)`.
    pub weight: f64,
}

/// The base measure `G_0` of a Dirichlet process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseDistribution {
    Gaussian { mu: f64, sigma2: f64 },
    PhaseType(PhaseType),
    Gamma { shape: f64, rate: f64 },
    Exponential { rate: f64 },
    Empirical { atoms: Vec<Atom> },
    /// `alpha_0/(alpha_0+n) G_0 + sum_i count_i/(alpha_0+n) delta_{x_i}`.
    Posterior {
        prior: Box<BaseDistribution>,
        prior_precision: f64,
        prior_weight: f64,
        atoms: Vec<PosteriorAtom>,
    },
}

fn positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("{name} must be positive and finite, got {x}"));
    }
    Ok(())
}

impl BaseDistribution {
    pub fn gaussian(mu: f64, sigma2: f64) -> Result<Self> {
        let b = Self::Gaussian { mu, sigma2 };
        b.validate()?;
        Ok(b)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let b = Self::Exponential { rate };
        b.validate()?;
        Ok(b)
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        let b = Self::Gamma { shape, rate };
        b.validate()?;
        Ok(b)
    }

    pub fn empirical(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let b = Self::Empirical {
            atoms: atoms
                .into_iter()
                .map(|(value, weight)| Atom { value, weight })
                .collect(),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { mu, sigma2 } => {
                if !mu.is_finite() {
                    return domain("gaussian mean must be finite");
                }
                positive("gaussian sigma2", *sigma2)
            }
            Self::PhaseType(_) => Ok(()),
            Self::Gamma { shape, rate } => {
                positive("gamma shape", *shape)?;
                positive("gamma rate", *rate)
            }
            Self::Exponential { rate } => positive("exponential rate", *rate),
            Self::Empirical { atoms } => {
                if atoms.is_empty() {
                    return domain("empirical base needs at least one atom");
                }
                if atoms
                    .iter()
                    .any(|a| !a.value.is_finite() || !(a.weight >= 0.0))
                {
                    return domain("empirical atoms need finite values and non-negative weights");
                }
                let s: f64 = atoms.iter().map(|a| a.weight).sum();
                if (s - 1.0).abs() > 1e-9 {
                    return domain(format!("empirical weights sum to {s}, expected 1"));
                }
                Ok(())
            }
            Self::Posterior {
                prior,
                prior_precision,
                prior_weight,
                atoms,
            } => {
                prior.validate()?;
                if matches!(**prior, Self::Posterior { .. }) {
                    return domain("posterior base must wrap a prior base, not another posterior");
                }
                positive("posterior prior_precision", *prior_precision)?;
                let n: u64 = atoms.iter().map(|a| a.count).sum();
                let denom = prior_precision + n as f64;
                if atoms.is_empty() || atoms.iter().any(|a| a.count == 0 || !a.value.is_finite()) {
                    return domain("posterior atoms need positive counts and finite values");
                }
                if (prior_weight - prior_precision / denom).abs() > 1e-12 {
                    return domain("posterior prior_weight is inconsistent with the counts");
                }
                for a in atoms {
                    if (a.weight - a.count as f64 / denom).abs() > 1e-12 {
                        return domain(format!(
                            "posterior atom at {} has weight {} but count {} implies {}",
                            a.value,
                            a.weight,
                            a.count,
                            a.count as f64 / denom
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::PhaseType(_) => "phase_type",
            Self::Gamma { .. } => "gamma",
            Self::Exponential { .. } => "exponential",
            Self::Empirical { .. } => "empirical",
            Self::Posterior { .. } => "posterior",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian { mu, sigma2 } => Normal::new(*mu, sigma2.sqrt())
                .expect("validated")
                .sample(rng),
            Self::PhaseType(ph) => ph.sample(rng),
            Self::Gamma { shape, rate } => Gamma::new(*shape, 1.0 / rate)
                .expect("validated")
                .sample(rng),
            Self::Exponential { rate } => Exp::new(*rate).expect("validated").sample(rng),
            Self::Empirical { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        return a.value;
                    }
                }
                atoms.last().expect("non-empty").value
            }
            Self::Posterior {
                prior,
                prior_weight,
                atoms,
                ..
            } => {
                let u: f64 = rng.random();
                if u < *prior_weight {
                    return prior.sample(rng);
                }
                let mut acc = *prior_weight;
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        return a.value;
                    }
                }
                atoms.last().expect("non-empty").value
            }
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(match self {
            Self::Gaussian { mu, sigma2 } => normal_cdf(x, *mu, *sigma2),
            Self::PhaseType(ph) => ph.cdf(x)?,
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    statrs::function::gamma::gamma_lr(*shape, rate * x)
                }
            }
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::Empirical { atoms } => atoms
                .iter()
                .filter(|a| a.value <= x)
                .map(|a| a.weight)
                .sum(),
            Self::Posterior {
                prior,
                prior_weight,
                atoms,
                ..
            } => {
                prior_weight * prior.cdf(x)?
                    + atoms
                        .iter()
                        .filter(|a| a.value <= x)
                        .map(|a| a.weight)
                        .sum::<f64>()
            }
        })
    }

    /// Raw moments `E[X], E[X^2], E[X^3]`.
    pub fn raw_moments(&self) -> [f64; 3] {
        match self {
            Self::Gaussian { mu, sigma2 } => [
                *mu,
                mu * mu + sigma2,
                mu.powi(3) + 3.0 * mu * sigma2,
            ],
            Self::PhaseType(ph) => [ph.moment(1), ph.moment(2), ph.moment(3)],
            Self::Gamma { shape, rate } => [
                shape / rate,
                shape * (shape + 1.0) / rate.powi(2),
                shape * (shape + 1.0) * (shape + 2.0) / rate.powi(3),
            ],
            Self::Exponential { rate } => [1.0 / rate, 2.0 / rate.powi(2), 6.0 / rate.powi(3)],
            Self::Empirical { atoms } => {
                let mut m = [0.0; 3];
                for a in atoms {
                    m[0] += a.weight * a.value;
                    m[1] += a.weight * a.value.powi(2);
                    m[2] += a.weight * a.value.powi(3);
                }
                m
            }
            Self::Posterior {
                prior,
                prior_weight,
                atoms,
                ..
            } => {
                let pm = prior.raw_moments();
                let mut m = [0.0; 3];
                for k in 0..3 {
                    m[k] = prior_weight * pm[k];
                }
                for a in atoms {
                    m[0] += a.weight * a.value;
                    m[1] += a.weight * a.value.powi(2);
                    m[2] += a.weight * a.value.powi(3);
                }
                m
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moments()[0]
    }

    /// `E[exp(tX)]`, `None` where it diverges.
    pub fn mgf(&self, t: f64) -> Option<f64> {
        match self {
            Self::Gaussian { mu, sigma2 } => Some((mu * t + 0.5 * sigma2 * t * t).exp()),
            Self::PhaseType(ph) => ph.mgf(t),
            Self::Gamma { shape, rate } => (t < *rate).then(|| (rate / (rate - t)).powf(*shape)),
            Self::Exponential { rate } => (t < *rate).then(|| rate / (rate - t)),
            Self::Empirical { atoms } => {
                Some(atoms.iter().map(|a| a.weight * (t * a.value).exp()).sum())
            }
            Self::Posterior {
                prior,
                prior_weight,
                atoms,
                ..
            } => {
                let p = prior.mgf(t)?;
                Some(
                    prior_weight * p
                        + atoms
                            .iter()
                            .map(|a| a.weight * (t * a.value).exp())
                            .sum::<f64>(),
                )
            }
        }
    }

    /// True when every draw is strictly positive.
    pub fn positive_support(&self) -> bool {
        match self {
            Self::Gaussian { .. } => false,
            Self::PhaseType(_) | Self::Gamma { .. } | Self::Exponential { .. } => true,
            Self::Empirical { atoms } => atoms.iter().all(|a| a.value > 0.0 || a.weight == 0.0),
            Self::Posterior { prior, atoms, .. } => {
                prior.positive_support() && atoms.iter().all(|a| a.value > 0.0)
            }
        }
    }

    /// The base as a phase-type law when one exists exactly (exponential,
    /// integer-shape gamma, phase-type).
    pub fn as_phase_type(&self) -> Option<PhaseType> {
        match self {
            Self::PhaseType(ph) => Some(ph.clone()),
            Self::Exponential { rate } => PhaseType::exponential(*rate).ok(),
            Self::Gamma { shape, rate } => {
                let k = shape.round();
                if (shape - k).abs() < 1e-12 && k >= 1.0 && k as usize <= MAX_ERLANG_SHAPE {
                    PhaseType::erlang(k as usize, *rate).ok()
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletPrior {
    pub alpha: f64,
    pub base: BaseDistribution,
}

impl DirichletPrior {
    pub fn new(alpha: f64, base: BaseDistribution) -> Result<Self> {
        let p = Self { alpha, base };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        self.base.validate()?;
        if let BaseDistribution::Posterior {
            prior_precision,
            atoms,
            ..
        } = &self.base
        {
            let n: u64 = atoms.iter().map(|a| a.count).sum();
            if (prior_precision + n as f64 - self.alpha).abs() > 1e-9 * self.alpha.max(1.0) {
                return domain("posterior precision must equal prior precision plus the observation count");
            }
        }
        Ok(())
    }

    /// An urn over this prior.
    pub fn urn(&self) -> PolyaUrn<'_> {
        PolyaUrn::new(self)
    }
}

/// A DP posterior; structurally another [`DirichletPrior`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorDp {
    pub alpha_post: f64,
    pub base_post: BaseDistribution,
}

impl PosteriorDp {
    pub fn into_prior(self) -> DirichletPrior {
        DirichletPrior {
            alpha: self.alpha_post,
            base: self.base_post,
        }
    }

    pub fn predictive_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.base_post.sample(rng)
    }
}

/// Conjugate update: `DP(alpha + n, alpha/(alpha+n) G_0 + sum 1/(alpha+n) delta_{x_i})`.
///
/// Updating a posterior again folds the new observations into the same atom
/// list, so sequential and one-shot updates give identical weights.
pub fn posterior_update(prior: &DirichletPrior, observations: &[f64]) -> Result<PosteriorDp> {
    prior.validate()?;
    if observations.is_empty() {
        return domain("posterior update needs at least one observation");
    }
    if let Some(x) = observations.iter().find(|x| !x.is_finite()) {
        return domain(format!("observation {x} is not finite"));
    }
    let (root, alpha0, mut counts) = match &prior.base {
        BaseDistribution::Posterior {
            prior: root,
            prior_precision,
            atoms,
            ..
        } => (
            (**root).clone(),
            *prior_precision,
            atoms.iter().map(|a| (a.value, a.count)).collect::<Vec<_>>(),
        ),
        other => (other.clone(), prior.alpha, Vec::new()),
    };
    for &x in observations {
        match counts.iter_mut().find(|(v, _)| *v == x) {
            Some((_, c)) => *c += 1,
            None => counts.push((x, 1)),
        }
    }
    counts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n: u64 = counts.iter().map(|c| c.1).sum();
    let denom = alpha0 + n as f64;
    let atoms = counts
        .into_iter()
        .map(|(value, count)| PosteriorAtom {
            value,
            count,
            weight: count as f64 / denom,
        })
        .collect();
    Ok(PosteriorDp {
        alpha_post: denom,
        base_post: BaseDistribution::Posterior {
            prior: Box::new(root),
            prior_precision: alpha0,
            prior_weight: alpha0 / denom,
            atoms,
        },
    })
}

/// Sequential generalized Pólya urn. Ties are tracked by the label of the
/// draw that created a value, never by floating-point equality.
#[derive(Clone, Debug)]
pub struct PolyaUrn<'a> {
    prior: &'a DirichletPrior,
    values: Vec<f64>,
    labels: Vec<usize>,
    distinct: Vec<f64>,
}

impl<'a> PolyaUrn<'a> {
    pub fn new(prior: &'a DirichletPrior) -> Self {
        Self {
            prior,
            values: Vec::new(),
            labels: Vec::new(),
            distinct: Vec::new(),
        }
    }

    /// Draws `X_{k}`: fresh from the base with probability
    /// `alpha/(alpha+k-1)`, otherwise a uniformly chosen earlier draw.
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (f64, usize) {
        let k = self.values.len();
        let alpha = self.prior.alpha;
        let fresh = k == 0 || rng.random::<f64>() * (alpha + k as f64) < alpha;
        let (value, label) = if fresh {
            let v = self.prior.base.sample(rng);
            self.distinct.push(v);
            (v, self.distinct.len() - 1)
        } else {
            let i = rng.random_range(0..k);
            (self.values[i], self.labels[i])
        };
        self.values.push(value);
        self.labels.push(label);
        (value, label)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn distinct(&self) -> usize {
        self.distinct.len()
    }

    pub fn into_sample(self) -> UrnSample {
        let partition = PartitionMultiplicity::from_labels(&self.labels)
            .unwrap_or_else(|_| PartitionMultiplicity::singletons(1));
        UrnSample {
            values: self.values,
            labels: self.labels,
            partition,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UrnSample {
    pub values: Vec<f64>,
    /// Label of the fresh draw each value was copied from.
    pub labels: Vec<usize>,
    pub partition: PartitionMultiplicity,
}

pub fn polya_urn_sample<R: Rng + ?Sized>(
    prior: &DirichletPrior,
    n: usize,
    rng: &mut R,
) -> Result<UrnSample> {
    prior.validate()?;
    if n == 0 {
        return domain("urn sample length must be at least 1");
    }
    let mut urn = PolyaUrn::new(prior);
    for _ in 0..n {
        urn.draw(rng);
    }
    Ok(urn.into_sample())
}

/// Expected number of distinct values among `n` urn draws: `sum_{i<n} alpha/(alpha+i)`.
pub fn expected_distinct(alpha: f64, n: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(CdpError::Domain("n must be at least 1".into()));
    }
    Ok((0..n).map(|i| alpha / (alpha + i as f64)).sum())
}
