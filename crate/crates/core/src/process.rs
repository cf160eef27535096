//! Compound Dirichlet processes `S_t = X_1 + ... + X_{N_t}`: models, path
//! simulation, the law of `S_t`, its moments and posterior updating.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::dp::{posterior_update, BaseDistribution, DirichletPrior};
use crate::error::{domain, CdpError, Result};
use crate::par;
use crate::partitions::check_alpha;
use crate::phase_type::PhaseType;
use crate::recursion::{ph_sum_cdfs, GaussianSumLaw, SquareSizeLaw};
use crate::sums::compound_moments;

/// Events simulated on one path before giving up.
pub const MAX_EVENTS_PER_PATH: usize = 10_000_000;

/// Paths used when a counting law has to be simulated.
pub const DEFAULT_MC_PATHS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdpModel {
    pub time_prior: DirichletPrior,
    pub mark_prior: DirichletPrior,
}

impl CdpModel {
    pub fn new(time_prior: DirichletPrior, mark_prior: DirichletPrior) -> Result<Self> {
        let m = Self {
            time_prior,
            mark_prior,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.time_prior.validate()?;
        self.mark_prior.validate()?;
        if !self.time_prior.base.positive_support() {
            return domain(format!(
                "time base must be supported on the positive reals, got {}",
                self.time_prior.base.kind()
            ));
        }
        Ok(())
    }
}

/// Interarrival side of a kernel-mixed process: `T | lambda ~ Exp(lambda)`
/// with `lambda ~ DP(alpha, Gamma(shape, rate))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialGammaDp {
    pub alpha: f64,
    pub shape: f64,
    pub rate: f64,
}

/// Mark side of a kernel-mixed process: `X | (m, s2) ~ N(m, s2)` with
/// `(m, s2) ~ DP(alpha, NIG(m0, kappa0, a0, b0))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianNigDp {
    pub alpha: f64,
    pub m0: f64,
    pub kappa0: f64,
    pub a0: f64,
    pub b0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdpmModel {
    pub time: ExponentialGammaDp,
    pub mark: GaussianNigDp,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("{name} must be positive and finite, got {x}"));
    }
    Ok(())
}

impl CdpmModel {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.time.alpha)?;
        positive("time.shape", self.time.shape)?;
        positive("time.rate", self.time.rate)?;
        check_alpha(self.mark.alpha)?;
        if !self.mark.m0.is_finite() {
            return domain("mark.m0 must be finite");
        }
        positive("mark.kappa0", self.mark.kappa0)?;
        positive("mark.a0", self.mark.a0)?;
        positive("mark.b0", self.mark.b0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Cdp(CdpModel),
    Cdpm(CdpmModel),
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Cdp(m) => m.validate(),
            Self::Cdpm(m) => m.validate(),
        }
    }
}

/// One simulated path up to the horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalPath {
    /// `T_1, ..., T_{N_t + 1}`: the last one carries the partial sum past the horizon.
    pub interarrivals: Vec<f64>,
    /// `X_1, ..., X_{N_t}`.
    pub marks: Vec<f64>,
    pub horizon: f64,
    pub n_t: usize,
    pub s_t: f64,
}

/// Sequential urn over arbitrary parameter values, tracked by label.
struct LabelUrn<T> {
    alpha: f64,
    labels: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy> LabelUrn<T> {
    fn new(alpha: f64) -> Self {
        Self {
            alpha,
            labels: Vec::new(),
            values: Vec::new(),
        }
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, fresh: impl FnOnce(&mut R) -> T) -> T {
        let k = self.labels.len();
        let new = k == 0 || rng.random::<f64>() * (self.alpha + k as f64) < self.alpha;
        let label = if new {
            self.values.push(fresh(rng));
            self.values.len() - 1
        } else {
            self.labels[rng.random_range(0..k)]
        };
        self.labels.push(label);
        self.values[label]
    }
}

fn time_urn<R: Rng + ?Sized>(
    model: &Model,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut total = 0.0;
    match model {
        Model::Cdp(m) => {
            let mut urn = LabelUrn::new(m.time_prior.alpha);
            let base = &m.time_prior.base;
            while total < horizon {
                let t = urn.draw(rng, |r| base.sample(r));
                if !(t > 0.0) {
                    return domain(format!("time base produced a non-positive interarrival {t}"));
                }
                total += t;
                out.push(t);
                if out.len() > MAX_EVENTS_PER_PATH {
                    return Err(CdpError::Resource(format!(
                        "path exceeded {MAX_EVENTS_PER_PATH} events before the horizon"
                    )));
                }
            }
        }
        Model::Cdpm(m) => {
            let mut urn = LabelUrn::new(m.time.alpha);
            let prior = Gamma::new(m.time.shape, 1.0 / m.time.rate)
                .map_err(|e| CdpError::Domain(e.to_string()))?;
            while total < horizon {
                let lambda = urn.draw(rng, |r| prior.sample(r));
                let t = Exp::new(lambda)
                    .map_err(|e| CdpError::Domain(e.to_string()))?
                    .sample(rng);
                if !(t > 0.0) {
                    return domain(format!("kernel produced a non-positive interarrival {t}"));
                }
                total += t;
                out.push(t);
                if out.len() > MAX_EVENTS_PER_PATH {
                    return Err(CdpError::Resource(format!(
                        "path exceeded {MAX_EVENTS_PER_PATH} events before the horizon"
                    )));
                }
            }
        }
    }
    Ok(out)
}

fn mark_urn<R: Rng + ?Sized>(model: &Model, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    match model {
        Model::Cdp(m) => {
            let mut urn = LabelUrn::new(m.mark_prior.alpha);
            let base = &m.mark_prior.base;
            for _ in 0..n {
                out.push(urn.draw(rng, |r| base.sample(r)));
            }
        }
        Model::Cdpm(m) => {
            let k = &m.mark;
            let mut urn = LabelUrn::new(k.alpha);
            let precision = Gamma::new(k.a0, 1.0 / k.b0).map_err(|e| CdpError::Domain(e.to_string()))?;
            for _ in 0..n {
                let (mean, var) = urn.draw(rng, |r| {
                    let var = 1.0 / precision.sample(r);
                    let mean = k.m0 + (var / k.kappa0).sqrt() * r.sample::<f64, _>(rand_distr::StandardNormal);
                    (mean, var)
                });
                out.push(
                    Normal::new(mean, var.sqrt())
                        .map_err(|e| CdpError::Domain(e.to_string()))?
                        .sample(rng),
                );
            }
        }
    }
    Ok(out)
}

/// Simulates interarrivals by the time urn until the partial sum reaches
/// `horizon`, then `N_t` marks from an independent mark urn.
pub fn simulate_path<R: Rng + ?Sized>(model: &Model, horizon: f64, rng: &mut R) -> Result<RenewalPath> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return domain(format!("horizon must be positive and finite, got {horizon}"));
    }
    let interarrivals = time_urn(model, horizon, rng)?;
    let n_t = interarrivals.len() - 1;
    let marks = mark_urn(model, n_t, rng)?;
    let s_t = marks.iter().sum();
    Ok(RenewalPath {
        interarrivals,
        marks,
        horizon,
        n_t,
        s_t,
    })
}

/// The random source for path `index` of a run seeded with `seed`; results
/// do not depend on how paths are spread over workers.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn simulate_paths(model: &Model, horizon: f64, paths: usize, seed: u64) -> Result<Vec<RenewalPath>> {
    model.validate()?;
    par::map_range(paths, |i| simulate_path(model, horizon, &mut path_rng(seed, i as u64)))
        .into_iter()
        .collect()
}

/// `(N_t, S_t)` for each of `paths` simulated paths.
pub fn simulate_summaries(model: &Model, horizon: f64, paths: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    model.validate()?;
    par::map_range(paths, |i| {
        simulate_path(model, horizon, &mut path_rng(seed, i as u64)).map(|p| (p.n_t, p.s_t))
    })
    .into_iter()
    .collect()
}

/// The two truncation rules for the outer sum over `n`: stop after `max_n`
/// and skip terms with `P(N_t = n) <= epsilon0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationPolicy {
    pub max_n: usize,
    pub epsilon0: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            max_n: 64,
            epsilon0: 1e-8,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_n == 0 {
            return domain("truncation max_n must be at least 1");
        }
        if !(0.0..1.0).contains(&self.epsilon0) {
            return domain(format!("truncation epsilon0 must lie in [0, 1), got {}", self.epsilon0));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSettings {
    pub paths: usize,
    pub seed: u64,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self {
            paths: DEFAULT_MC_PATHS,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingMethod {
    /// Phase-type interarrivals: exact up to the reported error.
    Analytic,
    /// A single interarrival value: `N_t` is constant.
    Deterministic,
    MonteCarlo {
        paths: usize,
        /// Sample raw moments of `N_t`.
        sample_moments: [f64; 3],
    },
}

/// `P(N_t = n)` for `n = 0..=max_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingLaw {
    pub horizon: f64,
    pub pmf: Vec<f64>,
    /// `P(N_t > max_n)` (an upper bound for the analytic method).
    pub tail: f64,
    /// Bound on the numerical error of each analytic `pmf` entry.
    pub entry_error: f64,
    pub method: CountingMethod,
}

impl CountingLaw {
    pub fn max_n(&self) -> usize {
        self.pmf.len() - 1
    }

    /// Monte Carlo standard error of entry `n`, zero for exact methods.
    pub fn standard_error(&self, n: usize) -> f64 {
        match self.method {
            CountingMethod::MonteCarlo { paths, .. } => {
                let p = self.pmf[n];
                (p * (1.0 - p) / paths as f64).sqrt()
            }
            _ => 0.0,
        }
    }
}

fn single_value(base: &BaseDistribution) -> Option<f64> {
    match base {
        BaseDistribution::Empirical { atoms } => {
            let support: Vec<f64> = atoms.iter().filter(|a| a.weight > 0.0).map(|a| a.value).collect();
            support.iter().all(|&v| v == support[0]).then(|| support[0])
        }
        _ => None,
    }
}

/// Law of the renewal counter `N_t = sup{j : T_1 + ... + T_j < t}`.
pub fn counting_law(
    time_prior: &DirichletPrior,
    horizon: f64,
    max_n: usize,
    mc: &MonteCarloSettings,
) -> Result<CountingLaw> {
    time_prior.validate()?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return domain(format!("horizon must be positive and finite, got {horizon}"));
    }
    if !time_prior.base.positive_support() {
        return domain("time base must be supported on the positive reals");
    }
    if let Some(ph) = time_prior.base.as_phase_type() {
        let c = ph_sum_cdfs(time_prior.alpha, &ph, horizon, max_n + 1)?;
        let pmf = (0..=max_n)
            .map(|n| (c.values[n] - c.values[n + 1]).max(0.0))
            .collect();
        return Ok(CountingLaw {
            horizon,
            pmf,
            tail: (c.values[max_n + 1] + c.error).min(1.0),
            entry_error: c.error,
            method: CountingMethod::Analytic,
        });
    }
    if let Some(step) = single_value(&time_prior.base) {
        // every interarrival equals `step`, so N_t counts j with j * step < t
        let mut n = (horizon / step).ceil() as usize;
        while n > 0 && n as f64 * step >= horizon {
            n -= 1;
        }
        while (n + 1) as f64 * step < horizon {
            n += 1;
        }
        let mut pmf = vec![0.0; max_n + 1];
        let tail = if n <= max_n {
            pmf[n] = 1.0;
            0.0
        } else {
            1.0
        };
        return Ok(CountingLaw {
            horizon,
            pmf,
            tail,
            entry_error: 0.0,
            method: CountingMethod::Deterministic,
        });
    }
    if mc.paths == 0 {
        return domain("Monte Carlo counting law needs at least one path");
    }
    let model = Model::Cdp(CdpModel {
        time_prior: time_prior.clone(),
        mark_prior: DirichletPrior {
            alpha: 1.0,
            base: BaseDistribution::Exponential { rate: 1.0 },
        },
    });
    let counts = par::map_range(mc.paths, |i| {
        time_urn(&model, horizon, &mut path_rng(mc.seed, i as u64)).map(|t| t.len() - 1)
    })
    .into_iter()
    .collect::<Result<Vec<usize>>>()?;
    let mut pmf = vec![0.0; max_n + 1];
    let mut beyond = 0usize;
    let mut moments = [0.0; 3];
    for &n in &counts {
        if n <= max_n {
            pmf[n] += 1.0;
        } else {
            beyond += 1;
        }
        let nf = n as f64;
        moments[0] += nf;
        moments[1] += nf * nf;
        moments[2] += nf * nf * nf;
    }
    let total = mc.paths as f64;
    for p in pmf.iter_mut() {
        *p /= total;
    }
    for m in moments.iter_mut() {
        *m /= total;
    }
    Ok(CountingLaw {
        horizon,
        pmf,
        tail: beyond as f64 / total,
        entry_error: 0.0,
        method: CountingMethod::MonteCarlo {
            paths: mc.paths,
            sample_moments: moments,
        },
    })
}

/// A probability with its truncation bound and, when part of the
/// computation was simulated, a Monte Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounded {
    pub value: f64,
    pub bound: f64,
    pub mc_se: Option<f64>,
}

enum MarkEngine {
    Gaussian(GaussianSumLaw),
    PhaseType { alpha: f64, ph: PhaseType },
}

/// The law of `S_t` at a fixed horizon, prepared once for evaluation at
/// many points.
pub struct StLaw {
    pub counting: CountingLaw,
    /// Counts `n >= 1` kept in the outer sum.
    pub kept: Vec<usize>,
    /// Mass of the counts left out (`P(N_t > max_n)` plus skipped terms plus numerical error).
    pub truncation_bound: f64,
    mark: MarkEngine,
}

impl StLaw {
    pub fn new(model: &CdpModel, horizon: f64, policy: &TruncationPolicy, mc: &MonteCarloSettings) -> Result<Self> {
        model.validate()?;
        policy.validate()?;
        let mark = match &model.mark_prior.base {
            BaseDistribution::Gaussian { .. } => None,
            b => Some(b.as_phase_type().ok_or_else(|| {
                CdpError::Capability(format!(
                    "the law of S_t needs a gaussian or phase-type mark base, got {}",
                    b.kind()
                ))
            })?),
        };
        let counting = counting_law(&model.time_prior, horizon, policy.max_n, mc)?;
        let mut kept = Vec::new();
        let mut skipped = 0.0;
        for n in 1..=policy.max_n {
            if counting.pmf[n] > policy.epsilon0 {
                kept.push(n);
            } else {
                skipped += counting.pmf[n];
            }
        }
        let truncation_bound =
            (skipped + counting.tail + counting.entry_error * (policy.max_n + 1) as f64).min(1.0);
        let top = kept.last().copied().unwrap_or(0);
        let mark = match (mark, &model.mark_prior.base) {
            (None, BaseDistribution::Gaussian { mu, sigma2 }) => {
                let law = SquareSizeLaw::new(model.mark_prior.alpha, top)?;
                MarkEngine::Gaussian(GaussianSumLaw::new(&law, *mu, *sigma2)?)
            }
            (Some(ph), _) => MarkEngine::PhaseType {
                alpha: model.mark_prior.alpha,
                ph,
            },
            _ => unreachable!("mark base checked above"),
        };
        Ok(Self {
            counting,
            kept,
            truncation_bound,
            mark,
        })
    }

    fn mc_se(&self, per_n: &[(usize, f64)], zero: f64) -> Option<f64> {
        let CountingMethod::MonteCarlo { paths, .. } = self.counting.method else {
            return None;
        };
        let p0 = self.counting.pmf[0];
        let mut m1 = p0 * zero;
        let mut m2 = p0 * zero * zero;
        for &(n, f) in per_n {
            m1 += self.counting.pmf[n] * f;
            m2 += self.counting.pmf[n] * f * f;
        }
        Some(((m2 - m1 * m1).max(0.0) / paths as f64).sqrt())
    }

    /// `P(S_t <= s)`, including the atom `P(N_t = 0)` at zero.
    pub fn cdf(&self, s: f64) -> Result<Bounded> {
        if !s.is_finite() {
            return domain(format!("evaluation point must be finite, got {s}"));
        }
        let zero = if s >= 0.0 { 1.0 } else { 0.0 };
        let mut value = self.counting.pmf[0] * zero;
        let mut bound = self.truncation_bound;
        let mut per_n = Vec::with_capacity(self.kept.len());
        match &self.mark {
            MarkEngine::Gaussian(g) => {
                for &n in &self.kept {
                    let (f, b) = g.cdf(n, s);
                    value += self.counting.pmf[n] * f;
                    bound += self.counting.pmf[n] * b;
                    per_n.push((n, f));
                }
            }
            MarkEngine::PhaseType { alpha, ph } => {
                let top = self.kept.last().copied().unwrap_or(0);
                let c = ph_sum_cdfs(*alpha, ph, s, top)?;
                for &n in &self.kept {
                    value += self.counting.pmf[n] * c.values[n];
                    per_n.push((n, c.values[n]));
                }
                bound += c.error;
            }
        }
        Ok(Bounded {
            value: value.clamp(0.0, 1.0),
            bound,
            mc_se: self.mc_se(&per_n, zero),
        })
    }

    /// Density of the continuous part of `S_t` at `s`; the atom at zero has
    /// mass [`StLaw::atom_at_zero`].
    pub fn density(&self, s: f64) -> Result<Bounded> {
        if !s.is_finite() {
            return domain(format!("evaluation point must be finite, got {s}"));
        }
        let mut value = 0.0;
        let mut bound = 0.0;
        let mut per_n = Vec::with_capacity(self.kept.len());
        let sup = match &self.mark {
            MarkEngine::Gaussian(g) => {
                for &n in &self.kept {
                    let (f, b) = g.density(n, s);
                    value += self.counting.pmf[n] * f;
                    bound += self.counting.pmf[n] * b;
                    per_n.push((n, f));
                }
                // a dropped term contributes at most its mass times the largest component density
                let sigma2 = g.sigma2;
                1.0 / (2.0 * std::f64::consts::PI * sigma2).sqrt()
            }
            MarkEngine::PhaseType { alpha, ph } => {
                let top = self.kept.last().copied().unwrap_or(0);
                let c = ph_sum_cdfs(*alpha, ph, s, top)?;
                for &n in &self.kept {
                    value += self.counting.pmf[n] * c.densities[n];
                    per_n.push((n, c.densities[n]));
                }
                bound += c.density_error;
                f64::INFINITY
            }
        };
        // the truncated counts bound the density only through the sup of the conditional densities
        bound += if self.truncation_bound > 0.0 {
            self.truncation_bound * sup
        } else {
            0.0
        };
        Ok(Bounded {
            value,
            bound,
            mc_se: self.mc_se(&per_n, 0.0),
        })
    }

    pub fn atom_at_zero(&self) -> f64 {
        self.counting.pmf[0]
    }

    pub fn cdf_grid(&self, points: &[f64]) -> Result<Vec<Bounded>> {
        par::map(points, |&s| self.cdf(s)).into_iter().collect()
    }

    pub fn density_grid(&self, points: &[f64]) -> Result<Vec<Bounded>> {
        par::map(points, |&s| self.density(s)).into_iter().collect()
    }
}

/// `P(S_t <= s)` with its truncation bound.
pub fn st_cdf(model: &CdpModel, horizon: f64, s: f64, policy: &TruncationPolicy) -> Result<Bounded> {
    StLaw::new(model, horizon, policy, &MonteCarloSettings::default())?.cdf(s)
}

/// Empirical law of `S_t` from simulated paths, for models without a
/// closed-form route.
pub struct SimulatedStLaw {
    pub sorted: Vec<f64>,
}

impl SimulatedStLaw {
    pub fn new(model: &Model, horizon: f64, mc: &MonteCarloSettings) -> Result<Self> {
        if mc.paths == 0 {
            return domain("simulation needs at least one path");
        }
        let mut sorted: Vec<f64> = simulate_summaries(model, horizon, mc.paths, mc.seed)?
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn cdf(&self, s: f64) -> Bounded {
        let k = self.sorted.partition_point(|&x| x <= s);
        let m = self.sorted.len() as f64;
        let p = k as f64 / m;
        Bounded {
            value: p,
            bound: 0.0,
            mc_se: Some((p * (1.0 - p) / m).sqrt()),
        }
    }
}

/// Moments of `S_t`. `None` marks a moment that is infinite or undefined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StMoments {
    pub values: [Option<f64>; 3],
    /// `E N_t^k`.
    pub counting: [Option<f64>; 3],
    /// Estimated contribution of `n > max_n` included in `counting` (zero when exact).
    pub counting_tail_estimate: [f64; 3],
    /// Exponent `beta` with `P(N_t >= n) ~ n^(-beta)`, when the counts are unbounded.
    pub tail_exponent: Option<f64>,
    /// Monte Carlo standard errors of `counting`, when simulated.
    pub counting_se: Option<[f64; 3]>,
}

/// Exponent `r` of `P(T <= x) ~ c x^r` as `x -> 0`, `None` if the base keeps
/// away from zero.
fn small_time_exponent(base: &BaseDistribution) -> Option<f64> {
    match base {
        BaseDistribution::Exponential { .. } => Some(1.0),
        BaseDistribution::Gamma { shape, .. } => Some(*shape),
        BaseDistribution::PhaseType(ph) => {
            // smallest r with pi T^(r-1) t > 0
            let mut row = ph.initial().transpose();
            let scale = ph.exit_vector().amax();
            for r in 1..=ph.dim() {
                let v = (&row * ph.exit_vector())[(0, 0)];
                if v > 1e-12 * scale {
                    return Some(r as f64);
                }
                row = &row * ph.generator();
            }
            Some(ph.dim() as f64)
        }
        BaseDistribution::Posterior { prior, .. } => small_time_exponent(prior),
        BaseDistribution::Empirical { .. } | BaseDistribution::Gaussian { .. } => None,
    }
}

/// `(E S_t, E S_t^2, E S_t^3)` from the counting law and the mark moments.
///
/// With urn interarrivals `P(N_t >= n)` decays like `n^-(alpha^T + r)`,
/// where `r` is the small-time exponent of the time base, so `E N_t^k` is
/// finite only for `k < alpha^T + r`. Orders at or beyond that are reported
/// as `None`.
pub fn st_moments(
    model: &CdpModel,
    horizon: f64,
    policy: &TruncationPolicy,
    mc: &MonteCarloSettings,
) -> Result<StMoments> {
    model.validate()?;
    policy.validate()?;
    let law = counting_law(&model.time_prior, horizon, policy.max_n, mc)?;
    let beta = small_time_exponent(&model.time_prior.base).map(|r| model.time_prior.alpha + r);
    let mut counting = [0.0; 3];
    let mut tail_est = [0.0; 3];
    let mut counting_se = None;
    match &law.method {
        CountingMethod::MonteCarlo {
            paths,
            sample_moments,
        } => {
            counting = *sample_moments;
            // standard errors from the retained pmf (exact when max_n covers the sample)
            let mut se = [0.0; 3];
            for k in 0..3 {
                let m2: f64 = law
                    .pmf
                    .iter()
                    .enumerate()
                    .map(|(n, p)| p * (n as f64).powi(2 * (k as i32 + 1)))
                    .sum();
                se[k] = ((m2 - counting[k].powi(2)).max(0.0) / *paths as f64).sqrt();
            }
            counting_se = Some(se);
        }
        _ => {
            for (n, p) in law.pmf.iter().enumerate() {
                let nf = n as f64;
                counting[0] += p * nf;
                counting[1] += p * nf * nf;
                counting[2] += p * nf * nf * nf;
            }
            if let (Some(b), true) = (beta, law.tail > 0.0) {
                // P(N_t >= n) ~ tail ((M + 1)/n)^b beyond M = max_n
                let m = law.max_n() as f64;
                for k in 0..3 {
                    let kf = (k + 1) as f64;
                    if kf < b {
                        tail_est[k] = law.tail * (m.powf(kf) + kf * (m + 1.0).powf(b) * m.powf(kf - b) / (b - kf));
                        counting[k] += tail_est[k];
                    }
                }
            }
        }
    }
    let finite: Vec<bool> = (1..=3)
        .map(|k| match (&law.method, beta) {
            (CountingMethod::Deterministic, _) | (_, None) => true,
            (_, Some(b)) => (k as f64) < b,
        })
        .collect();
    let counting_opt = [0, 1, 2].map(|k| finite[k].then_some(counting[k]));
    let mark = model.mark_prior.base.raw_moments();
    let all = compound_moments(
        [0, 1, 2].map(|k| if finite[k] { counting[k] } else { f64::INFINITY }),
        model.mark_prior.alpha,
        mark,
    );
    let values = [0, 1, 2].map(|k| (finite[..=k].iter().all(|&f| f) && all[k].is_finite()).then_some(all[k]));
    Ok(StMoments {
        values,
        counting: counting_opt,
        counting_tail_estimate: tail_est,
        tail_exponent: if law.method == CountingMethod::Deterministic { None } else { beta },
        counting_se,
    })
}

/// Updates the time and mark priors independently on observed
/// `(mark, interarrival)` pairs.
pub fn posterior_model(model: &CdpModel, sample: &[(f64, f64)]) -> Result<CdpModel> {
    model.validate()?;
    if sample.is_empty() {
        return domain("posterior update needs at least one (mark, interarrival) pair");
    }
    if let Some((_, t)) = sample.iter().find(|(_, t)| !(*t > 0.0)) {
        return domain(format!("interarrival {t} is not positive"));
    }
    let marks: Vec<f64> = sample.iter().map(|p| p.0).collect();
    let times: Vec<f64> = sample.iter().map(|p| p.1).collect();
    let mark_post = posterior_update(&model.mark_prior, &marks)?;
    let time_post = posterior_update(&model.time_prior, &times)?;
    CdpModel::new(time_post.into_prior(), mark_post.into_prior())
}
