//! Dirichlet-process mixtures fitted by collapsed Gibbs sampling over
//! cluster assignments (cluster parameters integrated out).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, CdpError, Result};
use crate::par;
use crate::partitions::check_alpha;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    /// `x | lambda ~ Exp(lambda)`, `lambda ~ Gamma(shape, rate)`.
    ExponentialGamma { shape: f64, rate: f64 },
    /// Independent per dimension: `x_d | m, s2 ~ N(m, s2)`,
    /// `s2 ~ InvGamma(a0, b0)`, `m | s2 ~ N(m0, s2 / kappa0)`.
    GaussianNig {
        m0: Vec<f64>,
        kappa0: Vec<f64>,
        a0: Vec<f64>,
        b0: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpmSpec {
    pub alpha: f64,
    pub kernel: Kernel,
    pub dims: usize,
}

/// Per-cluster sufficient statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub count: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl ClusterStats {
    fn empty(dims: usize) -> Self {
        Self {
            count: 0,
            sum: vec![0.0; dims],
            sum_sq: vec![0.0; dims],
        }
    }

    fn add(&mut self, x: &[f64]) {
        self.count += 1;
        for (d, &v) in x.iter().enumerate() {
            self.sum[d] += v;
            self.sum_sq[d] += v * v;
        }
    }

    fn remove(&mut self, x: &[f64]) {
        self.count -= 1;
        if self.count == 0 {
            self.sum.iter_mut().for_each(|s| *s = 0.0);
            self.sum_sq.iter_mut().for_each(|s| *s = 0.0);
            return;
        }
        for (d, &v) in x.iter().enumerate() {
            self.sum[d] -= v;
            self.sum_sq[d] -= v * v;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    /// Cluster label of each observation, in `0..K`.
    pub assignments: Vec<usize>,
    pub clusters: Vec<ClusterStats>,
    pub iteration: usize,
}

impl ClusterState {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Statistics recomputed from the assignments.
    pub fn recompute(&self, data: &[Vec<f64>], dims: usize) -> Vec<ClusterStats> {
        let mut out = vec![ClusterStats::empty(dims); self.clusters.len()];
        for (x, &c) in data.iter().zip(&self.assignments) {
            out[c].add(x);
        }
        out
    }
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

impl DpmSpec {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        let pos = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                return domain(format!("{name} must be positive and finite, got {v}"));
            }
            Ok(())
        };
        match &self.kernel {
            Kernel::ExponentialGamma { shape, rate } => {
                if self.dims != 1 {
                    return domain("the exponential kernel is one-dimensional");
                }
                pos("shape", *shape)?;
                pos("rate", *rate)
            }
            Kernel::GaussianNig { m0, kappa0, a0, b0 } => {
                if !(1..=2).contains(&self.dims) {
                    return domain(format!("dims must be 1 or 2, got {}", self.dims));
                }
                for (name, v) in [("m0", m0), ("kappa0", kappa0), ("a0", a0), ("b0", b0)] {
                    if v.len() != self.dims {
                        return domain(format!("{name} needs {} entries, got {}", self.dims, v.len()));
                    }
                }
                if m0.iter().any(|m| !m.is_finite()) {
                    return domain("m0 must be finite");
                }
                for d in 0..self.dims {
                    pos("kappa0", kappa0[d])?;
                    pos("a0", a0[d])?;
                    pos("b0", b0[d])?;
                }
                Ok(())
            }
        }
    }

    fn check_data(&self, data: &[Vec<f64>]) -> Result<()> {
        if data.is_empty() {
            return Err(CdpError::Data("no observations".into()));
        }
        for (i, x) in data.iter().enumerate() {
            if x.len() != self.dims {
                return Err(CdpError::Data(format!(
                    "row {}: expected {} values, got {}",
                    i + 1,
                    self.dims,
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(CdpError::Data(format!("row {}: non-finite value", i + 1)));
            }
            if matches!(self.kernel, Kernel::ExponentialGamma { .. }) && !(x[0] > 0.0) {
                return Err(CdpError::Data(format!(
                    "row {}: the exponential kernel needs positive data, got {}",
                    i + 1,
                    x[0]
                )));
            }
        }
        Ok(())
    }

    /// Log posterior-predictive density of `x` for a cluster with the given
    /// statistics (the prior marginal when the cluster is empty).
    pub fn log_predictive(&self, x: &[f64], stats: &ClusterStats) -> f64 {
        match &self.kernel {
            Kernel::ExponentialGamma { shape, rate } => {
                // Lomax: a b^a / (b + x)^(a + 1)
                let a = shape + stats.count as f64;
                let b = rate + stats.sum[0];
                if x[0] < 0.0 {
                    return f64::NEG_INFINITY;
                }
                a.ln() + a * b.ln() - (a + 1.0) * (b + x[0]).ln()
            }
            Kernel::GaussianNig { m0, kappa0, a0, b0 } => {
                let c = stats.count as f64;
                let mut out = 0.0;
                for d in 0..self.dims {
                    let kn = kappa0[d] + c;
                    let (mn, bn) = if stats.count == 0 {
                        (m0[d], b0[d])
                    } else {
                        let mean = stats.sum[d] / c;
                        let sse = (stats.sum_sq[d] - c * mean * mean).max(0.0);
                        let mn = (kappa0[d] * m0[d] + stats.sum[d]) / kn;
                        let bn = b0[d] + 0.5 * sse + kappa0[d] * c * (mean - m0[d]).powi(2) / (2.0 * kn);
                        (mn, bn)
                    };
                    let an = a0[d] + 0.5 * c;
                    let nu = 2.0 * an;
                    let scale2 = bn * (kn + 1.0) / (an * kn);
                    let z2 = (x[d] - mn).powi(2) / scale2;
                    out += ln_gamma(0.5 * (nu + 1.0))
                        - ln_gamma(0.5 * nu)
                        - 0.5 * (nu * std::f64::consts::PI * scale2).ln()
                        - 0.5 * (nu + 1.0) * (z2 / nu).ln_1p();
                }
                out
            }
        }
    }

    /// `count` observations sharing one kernel parameter drawn from the base.
    fn sample_cluster_data<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        match &self.kernel {
            Kernel::ExponentialGamma { shape, rate } => {
                let lambda = Gamma::new(*shape, 1.0 / rate).expect("validated").sample(rng);
                let e = Exp::new(lambda).expect("positive rate");
                (0..count).map(|_| vec![e.sample(rng)]).collect()
            }
            Kernel::GaussianNig { m0, kappa0, a0, b0 } => {
                let params: Vec<(f64, f64)> = (0..self.dims)
                    .map(|d| {
                        let s2 = 1.0 / Gamma::new(a0[d], 1.0 / b0[d]).expect("validated").sample(rng);
                        let m = Normal::new(m0[d], (s2 / kappa0[d]).sqrt()).expect("validated").sample(rng);
                        (m, s2)
                    })
                    .collect();
                (0..count)
                    .map(|_| {
                        params
                            .iter()
                            .map(|&(m, s2)| Normal::new(m, s2.sqrt()).expect("validated").sample(rng))
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

/// Iteration counts; the chain runs `burn_in + samples * thin` sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsSettings {
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
}

impl Default for GibbsSettings {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            samples: 2000,
            thin: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsRun {
    /// Retained states.
    pub states: Vec<ClusterState>,
    /// Number of clusters after every sweep, burn-in included.
    pub k_trace: Vec<usize>,
}

fn initial_state(data: &[Vec<f64>], dims: usize) -> ClusterState {
    let mut all = ClusterStats::empty(dims);
    for x in data {
        all.add(x);
    }
    ClusterState {
        assignments: vec![0; data.len()],
        clusters: vec![all],
        iteration: 0,
    }
}

/// One full sweep of assignment updates.
fn sweep<R: Rng + ?Sized>(state: &mut ClusterState, data: &[Vec<f64>], spec: &DpmSpec, rng: &mut R, logw: &mut Vec<f64>) {
    let empty = ClusterStats::empty(spec.dims);
    let ln_alpha = spec.alpha.ln();
    for (i, x) in data.iter().enumerate() {
        let c = state.assignments[i];
        state.clusters[c].remove(x);
        if state.clusters[c].count == 0 {
            // keep labels contiguous: move the last cluster into the hole
            let last = state.clusters.len() - 1;
            state.clusters.swap_remove(c);
            if c != last {
                for a in state.assignments.iter_mut() {
                    if *a == last {
                        *a = c;
                    }
                }
            }
        }
        logw.clear();
        for stats in &state.clusters {
            logw.push((stats.count as f64).ln() + spec.log_predictive(x, stats));
        }
        logw.push(ln_alpha + spec.log_predictive(x, &empty));
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logw.iter().map(|w| (w - max).exp()).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = logw.len() - 1;
        for (k, w) in logw.iter().enumerate() {
            u -= (w - max).exp();
            if u <= 0.0 {
                pick = k;
                break;
            }
        }
        if pick == state.clusters.len() {
            state.clusters.push(ClusterStats::empty(spec.dims));
        }
        state.clusters[pick].add(x);
        state.assignments[i] = pick;
    }
}

/// Collapsed Gibbs sampler: each observation is reassigned to an existing
/// cluster with probability proportional to its size times the posterior
/// predictive, or to a new cluster proportional to `alpha` times the prior
/// marginal.
pub fn gibbs_run<R: Rng + ?Sized>(
    data: &[Vec<f64>],
    spec: &DpmSpec,
    settings: &GibbsSettings,
    rng: &mut R,
) -> Result<GibbsRun> {
    spec.validate()?;
    spec.check_data(data)?;
    if settings.thin == 0 {
        return domain("thin must be at least 1");
    }
    let mut state = initial_state(data, spec.dims);
    let total = settings.burn_in + settings.samples * settings.thin;
    let mut states = Vec::with_capacity(settings.samples);
    let mut k_trace = Vec::with_capacity(total);
    let mut logw = Vec::new();
    for it in 1..=total {
        sweep(&mut state, data, spec, rng, &mut logw);
        state.iteration = it;
        k_trace.push(state.clusters.len());
        if it > settings.burn_in && (it - settings.burn_in).is_multiple_of(settings.thin) {
            states.push(state.clone());
        }
    }
    Ok(GibbsRun { states, k_trace })
}

/// Independent chains, one per seed, run concurrently.
pub fn gibbs_chains(data: &[Vec<f64>], spec: &DpmSpec, settings: &GibbsSettings, seeds: &[u64]) -> Result<Vec<GibbsRun>> {
    par::map(seeds, |&s| gibbs_run(data, spec, settings, &mut ChaCha8Rng::seed_from_u64(s)))
        .into_iter()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveCurve {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Number of clusters in each state used.
    pub k_counts: Vec<usize>,
    /// False when fewer than 30 states back the percentile band.
    pub band_reliable: bool,
}

/// Minimum number of states for a meaningful 95% band.
pub const MIN_BAND_STATES: usize = 30;

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior predictive density of a one-dimensional DPM on `grid`: for each
/// state `sum_c n_c/(alpha+n) p(x | c) + alpha/(alpha+n) p(x)`, averaged over
/// states, with pointwise 2.5% and 97.5% percentiles.
pub fn predictive_density(states: &[ClusterState], spec: &DpmSpec, grid: &[f64]) -> Result<PredictiveCurve> {
    spec.validate()?;
    if states.is_empty() {
        return domain("predictive density needs at least one state");
    }
    if spec.dims != 1 {
        return Err(CdpError::Capability("predictive curves are one-dimensional".into()));
    }
    let empty = ClusterStats::empty(1);
    let per_state: Vec<Vec<f64>> = par::map(states, |st| {
        let n: usize = st.clusters.iter().map(|c| c.count).sum();
        let denom = spec.alpha + n as f64;
        grid.iter()
            .map(|&x| {
                let p = [x];
                let mut f = spec.alpha / denom * spec.log_predictive(&p, &empty).exp();
                for c in &st.clusters {
                    f += c.count as f64 / denom * spec.log_predictive(&p, c).exp();
                }
                f
            })
            .collect()
    });
    let m = states.len() as f64;
    let mut mean = Vec::with_capacity(grid.len());
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    let mut column = Vec::with_capacity(states.len());
    for g in 0..grid.len() {
        column.clear();
        column.extend(per_state.iter().map(|row| row[g]));
        let avg = column.iter().sum::<f64>() / m;
        column.sort_by(f64::total_cmp);
        // widened to contain the mean when the state distribution is very skewed
        lower.push(percentile(&column, 0.025).min(avg));
        upper.push(percentile(&column, 0.975).max(avg));
        mean.push(avg);
    }
    Ok(PredictiveCurve {
        grid: grid.to_vec(),
        mean,
        lower,
        upper,
        k_counts: states.iter().map(|s| s.num_clusters()).collect(),
        band_reliable: states.len() >= MIN_BAND_STATES,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    /// `coclustering[i][j]`: fraction of states with `i` and `j` together.
    pub coclustering: Vec<Vec<f64>>,
    /// Visited partition closest to the co-clustering matrix in squared
    /// error, relabeled by first appearance.
    pub point_partition: Vec<usize>,
    pub point_state: usize,
}

pub fn cluster_summary(states: &[ClusterState]) -> Result<ClusterSummary> {
    let Some(first) = states.first() else {
        return domain("cluster summary needs at least one state");
    };
    let n = first.assignments.len();
    if states.iter().any(|s| s.assignments.len() != n) {
        return domain("states disagree on the number of observations");
    }
    let mut co = vec![vec![0.0; n]; n];
    for st in states {
        for i in 0..n {
            for j in i..n {
                if st.assignments[i] == st.assignments[j] {
                    co[i][j] += 1.0;
                }
            }
        }
    }
    let m = states.len() as f64;
    for i in 0..n {
        for j in i..n {
            co[i][j] /= m;
            co[j][i] = co[i][j];
        }
    }
    let losses = par::map(states, |st| {
        let mut loss = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let same = if st.assignments[i] == st.assignments[j] { 1.0 } else { 0.0 };
                loss += (same - co[i][j]).powi(2);
            }
        }
        loss
    });
    let best = losses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty");
    Ok(ClusterSummary {
        coclustering: co,
        point_partition: canonical_labels(&states[best].assignments),
        point_state: best,
    })
}

/// Relabels so clusters are numbered in order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Rand index between two labelings of the same items.
pub fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            total += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        agree as f64 / total as f64
    }
}

/// Successive-conditional simulator for checking the sampler: alternately a
/// Gibbs sweep of assignments given data and a fresh draw of data given
/// assignments. If both steps are correct the assignments keep the prior
/// (Chinese restaurant) law, so the returned trace of `K` is a draw from a
/// stationary chain whose marginal mean is `expected_distinct(alpha, n)`.
pub fn prior_invariance_trace<R: Rng + ?Sized>(spec: &DpmSpec, n: usize, iterations: usize, rng: &mut R) -> Result<Vec<usize>> {
    spec.validate()?;
    if n == 0 {
        return domain("need at least one observation");
    }
    // exact prior draw of (assignments, data) to start in stationarity
    let mut assignments = Vec::with_capacity(n);
    let mut sizes: Vec<usize> = Vec::new();
    for i in 0..n {
        let u = rng.random::<f64>() * (spec.alpha + i as f64);
        let mut acc = 0.0;
        let mut pick = sizes.len();
        for (c, &s) in sizes.iter().enumerate() {
            acc += s as f64;
            if u < acc {
                pick = c;
                break;
            }
        }
        if pick == sizes.len() {
            sizes.push(0);
        }
        sizes[pick] += 1;
        assignments.push(pick);
    }
    let mut data = vec![Vec::new(); n];
    let redraw = |assignments: &[usize], k: usize, data: &mut Vec<Vec<f64>>, rng: &mut R| {
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| assignments[i] == c).collect();
            let xs = spec.sample_cluster_data(members.len(), rng);
            for (i, x) in members.into_iter().zip(xs) {
                data[i] = x;
            }
        }
    };
    redraw(&assignments, sizes.len(), &mut data, rng);
    let mut state = ClusterState {
        clusters: {
            let mut cl = vec![ClusterStats::empty(spec.dims); sizes.len()];
            for (x, &c) in data.iter().zip(&assignments) {
                cl[c].add(x);
            }
            cl
        },
        assignments,
        iteration: 0,
    };
    let mut trace = Vec::with_capacity(iterations);
    let mut logw = Vec::new();
    for _ in 0..iterations {
        sweep(&mut state, &data, spec, rng, &mut logw);
        let k = state.clusters.len();
        redraw(&state.assignments, k, &mut data, rng);
        state.clusters = state.recompute(&data, spec.dims);
        trace.push(k);
    }
    Ok(trace)
}
