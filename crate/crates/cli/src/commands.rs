//! One function per subcommand, each returning the finished report.

use std::collections::BTreeMap;

use cdp_core::dp::{polya_urn_sample, DirichletPrior};
use cdp_core::dpm::{cluster_summary, gibbs_chains, predictive_density, GibbsRun};
use cdp_core::error::{CdpError, Result};
use cdp_core::ingest::{interarrivals, read_events, Dataset};
use cdp_core::process::{
    path_rng, posterior_model, simulate_paths, st_moments, Bounded, CdpModel, CountingMethod, Model, SimulatedStLaw,
    StLaw,
};
use cdp_core::sums::{mgf_sn, moments_sn, SnLaw};
use serde_json::json;

use crate::config::{DataConfig, RunConfig};
use crate::report::{Cell, Metadata, Report, Table};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    /// Closed-form laws with truncation bounds.
    #[default]
    Analytic,
    /// Empirical CDF of simulated replicates.
    Mc,
}

fn cdp(model: &Model, what: &str) -> Result<CdpModel> {
    match model {
        Model::Cdp(m) => Ok(m.clone()),
        Model::Cdpm(_) => Err(CdpError::Capability(format!(
            "{what} has no closed form for the kernel-mixed (cdpm) model; use simulate or cdf --method mc"
        ))),
    }
}

fn mark_prior(cfg: &RunConfig, what: &str) -> Result<DirichletPrior> {
    Ok(cdp(cfg.model()?, what)?.mark_prior)
}

fn bounded_table(name: &str, grid: &[f64], values: &[Bounded]) -> Table {
    let with_se = values.iter().any(|b| b.mc_se.is_some());
    let mut cols = vec!["point", "value", "bound"];
    if with_se {
        cols.push("mc_se");
    }
    let mut t = Table::new(name, &cols);
    for (&x, b) in grid.iter().zip(values) {
        let mut row = vec![x.into(), b.value.into(), b.bound.into()];
        if with_se {
            row.push(b.mc_se.into());
        }
        t.push(row);
    }
    t
}

fn st_law(cfg: &RunConfig, what: &str) -> Result<(StLaw, Metadata)> {
    let model = cdp(cfg.model()?, what)?;
    let horizon = cfg.horizon()?;
    let law = StLaw::new(&model, horizon, &cfg.truncation, &cfg.monte_carlo())?;
    let mut meta = Metadata::default();
    meta.set("target", json!("S_t"));
    meta.set("horizon", json!(horizon));
    meta.set("atom_at_zero", json!(law.atom_at_zero()));
    meta.set("truncation_bound", json!(law.truncation_bound));
    meta.set("counts_kept", json!(law.kept.len()));
    meta.set("counting_method", json!(method_name(&law.counting.method)));
    Ok((law, meta))
}

fn method_name(m: &CountingMethod) -> &'static str {
    match m {
        CountingMethod::Analytic => "analytic",
        CountingMethod::Deterministic => "deterministic",
        CountingMethod::MonteCarlo { .. } => "monte_carlo",
    }
}

fn merge(into: &mut Metadata, from: Metadata) {
    for (k, v) in from.0 {
        into.set(&k, v);
    }
}

pub fn density(cfg: &RunConfig, method: Method, mut meta: Metadata) -> Result<Report> {
    if method == Method::Mc {
        return Err(CdpError::Capability(
            "density has no Monte Carlo estimator without smoothing; use cdf --method mc".into(),
        ));
    }
    let grid = cfg.grid()?;
    let values = if let Some(n) = cfg.n {
        let law = SnLaw::new(n, &mark_prior(cfg, "the density of S_n")?)?;
        meta.set("target", json!("S_n"));
        meta.set("n", json!(n));
        grid.iter().map(|&s| law.density(s)).collect::<Result<Vec<_>>>()?
    } else {
        let (law, m) = st_law(cfg, "the density of S_t")?;
        merge(&mut meta, m);
        meta.set("note", json!("density of the continuous part; the atom at zero is listed separately"));
        law.density_grid(&grid)?
    };
    Ok(Report::single(meta, bounded_table("density", &grid, &values)))
}

pub fn cdf(cfg: &RunConfig, method: Method, mut meta: Metadata) -> Result<Report> {
    let grid = cfg.grid()?;
    meta.set("method", json!(format!("{method:?}").to_lowercase()));
    let values = match (cfg.n, method) {
        (Some(n), Method::Analytic) => {
            let law = SnLaw::new(n, &mark_prior(cfg, "the cdf of S_n")?)?;
            meta.set("target", json!("S_n"));
            meta.set("n", json!(n));
            grid.iter().map(|&s| law.cdf(s)).collect::<Result<Vec<_>>>()?
        }
        (Some(n), Method::Mc) => {
            let prior = mark_prior(cfg, "the urn sum S_n")?;
            let mc = cfg.monte_carlo();
            if mc.paths == 0 {
                return Err(CdpError::Config("simulation.paths must be at least 1".into()));
            }
            let mut sums = (0..mc.paths)
                .map(|i| Ok(polya_urn_sample(&prior, n, &mut path_rng(mc.seed, i as u64))?.values.iter().sum()))
                .collect::<Result<Vec<f64>>>()?;
            sums.sort_by(f64::total_cmp);
            meta.set("target", json!("S_n"));
            meta.set("n", json!(n));
            meta.set("paths", json!(mc.paths));
            meta.set("seed", json!(mc.seed));
            let m = sums.len() as f64;
            grid.iter()
                .map(|&s| {
                    let p = sums.partition_point(|&x| x <= s) as f64 / m;
                    Bounded {
                        value: p,
                        bound: 0.0,
                        mc_se: Some((p * (1.0 - p) / m).sqrt()),
                    }
                })
                .collect()
        }
        (None, Method::Analytic) => {
            let (law, m) = st_law(cfg, "the cdf of S_t")?;
            merge(&mut meta, m);
            law.cdf_grid(&grid)?
        }
        (None, Method::Mc) => {
            let horizon = cfg.horizon()?;
            let mc = cfg.monte_carlo();
            let law = SimulatedStLaw::new(cfg.model()?, horizon, &mc)?;
            meta.set("target", json!("S_t"));
            meta.set("horizon", json!(horizon));
            meta.set("paths", json!(mc.paths));
            meta.set("seed", json!(mc.seed));
            grid.iter().map(|&s| law.cdf(s)).collect()
        }
    };
    Ok(Report::single(meta, bounded_table("cdf", &grid, &values)))
}

pub fn moments(cfg: &RunConfig, mut meta: Metadata) -> Result<Report> {
    if let Some(n) = cfg.n {
        let prior = mark_prior(cfg, "moments of S_n")?;
        let m = moments_sn(n, prior.alpha, prior.base.raw_moments())?;
        meta.set("target", json!("S_n"));
        meta.set("n", json!(n));
        let mut t = Table::new("moments", &["order", "value"]);
        for (k, v) in m.iter().enumerate() {
            t.push(vec![(k + 1).into(), (*v).into()]);
        }
        return Ok(Report::single(meta, t));
    }
    let model = cdp(cfg.model()?, "moments of S_t")?;
    let horizon = cfg.horizon()?;
    let m = st_moments(&model, horizon, &cfg.truncation, &cfg.monte_carlo())?;
    meta.set("target", json!("S_t"));
    meta.set("horizon", json!(horizon));
    meta.set("tail_exponent", json!(m.tail_exponent));
    meta.set("note", json!("NA marks a moment that is infinite"));
    let mut t = Table::new(
        "moments",
        &["order", "value", "counting_moment", "counting_tail_estimate", "counting_se"],
    );
    for k in 0..3 {
        t.push(vec![
            (k + 1).into(),
            m.values[k].into(),
            m.counting[k].into(),
            m.counting_tail_estimate[k].into(),
            m.counting_se.map(|se| se[k]).into(),
        ]);
    }
    Ok(Report::single(meta, t))
}

pub fn mgf(cfg: &RunConfig, mut meta: Metadata) -> Result<Report> {
    let Some(n) = cfg.n else {
        return Err(CdpError::Capability(
            "the MGF is available for fixed-size sums S_n only (set 'n'); for S_t it need not exist".into(),
        ));
    };
    let prior = mark_prior(cfg, "the MGF of S_n")?;
    let grid = cfg.grid()?;
    meta.set("target", json!("S_n"));
    meta.set("n", json!(n));
    let mut t = Table::new("mgf", &["t", "value"]);
    for &s in &grid {
        t.push(vec![s.into(), mgf_sn(n, prior.alpha, |u| prior.base.mgf(u), s)?.into()]);
    }
    Ok(Report::single(meta, t))
}

pub fn simulate(cfg: &RunConfig, mut meta: Metadata) -> Result<Report> {
    let model = cfg.model()?;
    let horizon = cfg.horizon()?;
    let mc = cfg.monte_carlo();
    if mc.paths == 0 {
        return Err(CdpError::Config("simulation.paths must be at least 1".into()));
    }
    let paths = simulate_paths(model, horizon, mc.paths, mc.seed)?;
    let mut events = Table::new(
        "events",
        &["replicate", "event", "arrival_time", "interarrival", "mark", "cumulative"],
    );
    let mut summary = Table::new("summary", &["replicate", "n_t", "s_t"]);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for (r, p) in paths.iter().enumerate() {
        let (mut clock, mut acc) = (0.0, 0.0);
        for (i, &x) in p.marks.iter().enumerate() {
            clock += p.interarrivals[i];
            acc += x;
            events.push(vec![r.into(), (i + 1).into(), clock.into(), p.interarrivals[i].into(), x.into(), acc.into()]);
        }
        summary.push(vec![r.into(), p.n_t.into(), p.s_t.into()]);
        sum += p.s_t;
        sum_sq += p.s_t * p.s_t;
    }
    let m = paths.len() as f64;
    let mean = sum / m;
    meta.set("horizon", json!(horizon));
    meta.set("paths", json!(mc.paths));
    meta.set("seed", json!(mc.seed));
    meta.set("mean_s_t", json!(mean));
    meta.set("se_mean_s_t", json!(((sum_sq / m - mean * mean).max(0.0) / m).sqrt()));
    Ok(Report {
        metadata: meta,
        tables: vec![summary, events],
    })
}

/// `(mark, interarrival)` pairs from a delimited file.
fn read_pairs(data: &DataConfig) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(data.delimiter_byte()?)
        .trim(csv::Trim::All)
        .from_path(&data.path)
        .map_err(|e| CdpError::Data(format!("{}: {e}", data.path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CdpError::Data(format!("{}: {e}", data.path.display())))?
        .clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CdpError::Data(format!("{}: no column '{name}' in header", data.path.display()))
        })
    };
    let (ti, mi) = (col(&data.time_col)?, col(&data.mark_col)?);
    let mut pairs = Vec::new();
    let mut bad = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CdpError::Data(format!("{}: {e}", data.path.display())))?;
        let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());
        match (num(mi), num(ti)) {
            (Some(x), Some(t)) if t > 0.0 => pairs.push((x, t)),
            _ => bad.push(format!("row {}: need a finite mark and a positive interarrival", row + 1)),
        }
    }
    if !bad.is_empty() {
        return Err(CdpError::Data(format!("{}: {}", data.path.display(), bad.join("; "))));
    }
    if pairs.is_empty() {
        return Err(CdpError::Data(format!("{}: no observations", data.path.display())));
    }
    Ok(pairs)
}

/// The posterior model as a configuration that every other subcommand accepts.
pub fn posterior(cfg: &RunConfig, meta: Metadata) -> Result<RunConfig> {
    let model = cdp(cfg.model()?, "the conjugate posterior")?;
    let data = cfg.data()?;
    let pairs = read_pairs(data)?;
    let post = posterior_model(&model, &pairs)?;
    let mut out = cfg.clone();
    out.model = Some(Model::Cdp(post));
    out.data = None;
    out.output = Default::default();
    let mut m = meta;
    m.set("observations", json!(pairs.len()));
    m.set("data", json!(data.path.display().to_string()));
    out.metadata = Some(serde_json::Value::Object(m.0.into_iter().collect()));
    Ok(out)
}

fn load_events(data: &DataConfig) -> Result<Dataset> {
    let ds = read_events(&data.path, &data.read_options()?)?;
    for d in &ds.rejected {
        eprintln!("{}: {d}", data.path.display());
    }
    Ok(ds)
}

fn modal(counts: impl Iterator<Item = usize>) -> usize {
    let mut freq = BTreeMap::new();
    for k in counts {
        *freq.entry(k).or_insert(0usize) += 1;
    }
    // ties go to the smaller K
    freq.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&k, _)| k).unwrap_or(0)
}

pub fn fit_dpm(cfg: &RunConfig, mut meta: Metadata) -> Result<Report> {
    let dpm = cfg.dpm.clone().unwrap_or_default();
    if dpm.chains == 0 {
        return Err(CdpError::Config("dpm.chains must be at least 1".into()));
    }
    let data = cfg.data()?;
    let ds = load_events(data)?;
    let gaps = interarrivals(&ds)?;
    let rows: Vec<Vec<f64>> = gaps.days.iter().map(|&d| vec![d]).collect();
    let seeds: Vec<u64> = (0..dpm.chains as u64).map(|c| cfg.seed.wrapping_add(c)).collect();
    let time_runs = gibbs_chains(&rows, &dpm.time, &dpm.gibbs, &seeds)?;
    let time_states: Vec<_> = time_runs.iter().flat_map(|r| r.states.iter().cloned()).collect();
    let grid = match &cfg.grid {
        Some(g) => g.points()?,
        None => {
            let top = gaps.days.iter().cloned().fold(0.0, f64::max) * 1.5;
            (0..=400).map(|i| top * i as f64 / 400.0).collect()
        }
    };
    let curve = predictive_density(&time_states, &dpm.time, &grid)?;
    let mut predictive = Table::new("predictive", &["x", "mean", "lower", "upper"]);
    for (i, &x) in grid.iter().enumerate() {
        predictive.push(vec![x.into(), curve.mean[i].into(), curve.lower[i].into(), curve.upper[i].into()]);
    }

    let located: Vec<(usize, &cdp_core::ingest::Event)> =
        ds.events.iter().enumerate().filter(|(_, e)| e.location.is_some()).collect();
    let space_runs: Option<Vec<GibbsRun>> = match &dpm.space {
        Some(spec) if located.len() >= 2 => {
            let pts = ds.spatial_points();
            Some(gibbs_chains(&pts, spec, &dpm.gibbs, &seeds)?)
        }
        Some(_) => {
            return Err(CdpError::Data(format!(
                "spatial mixture needs at least 2 located events, got {}",
                located.len()
            )))
        }
        None => None,
    };

    let mut k_cols = vec!["chain", "sweep", "k_time"];
    if space_runs.is_some() {
        k_cols.push("k_space");
    }
    let mut k_trace = Table::new("k_trace", &k_cols);
    let mut chains = Table::new("chains", &["chain", "seed", "retained", "k_time_mean", "k_time_mode"]);
    for (c, run) in time_runs.iter().enumerate() {
        for (s, &k) in run.k_trace.iter().enumerate() {
            let mut row = vec![c.into(), (s + 1).into(), k.into()];
            if let Some(sr) = &space_runs {
                row.push(sr[c].k_trace[s].into());
            }
            k_trace.push(row);
        }
        let ks: Vec<usize> = run.states.iter().map(|s| s.num_clusters()).collect();
        let mean = ks.iter().sum::<usize>() as f64 / ks.len().max(1) as f64;
        chains.push(vec![
            c.into(),
            Cell::Int(seeds[c] as i64),
            run.states.len().into(),
            mean.into(),
            modal(ks.into_iter()).into(),
        ]);
    }

    meta.set("events", json!(ds.events.len()));
    meta.set("rejected_rows", json!(ds.rejected.len()));
    meta.set("zero_gaps_adjusted", json!(gaps.zero_gaps_adjusted));
    meta.set("chains", json!(dpm.chains));
    meta.set("seed", json!(cfg.seed));
    meta.set("band_reliable", json!(curve.band_reliable));
    meta.set("modal_k_time", json!(modal(curve.k_counts.iter().cloned())));
    let mut tables = vec![predictive, chains, k_trace];

    if let Some(runs) = &space_runs {
        let states: Vec<_> = runs.iter().flat_map(|r| r.states.iter().cloned()).collect();
        let summary = cluster_summary(&states)?;
        meta.set("modal_k_space", json!(modal(states.iter().map(|s| s.num_clusters()))));
        let mut clusters = Table::new("clusters", &["event", "id", "x", "y", "cluster"]);
        for (p, (i, e)) in located.iter().enumerate() {
            let (x, y) = e.location.expect("located");
            clusters.push(vec![
                (i + 1).into(),
                e.id.clone().map_or(Cell::Missing, Cell::Text),
                x.into(),
                y.into(),
                summary.point_partition[p].into(),
            ]);
        }
        let names: Vec<String> = (0..located.len()).map(|j| format!("p{}", located[j].0 + 1)).collect();
        let mut cols = vec!["event"];
        cols.extend(names.iter().map(String::as_str));
        let mut co = Table::new("coclustering", &cols);
        for (p, row) in summary.coclustering.iter().enumerate() {
            let mut cells = vec![(located[p].0 + 1).into()];
            cells.extend(row.iter().map(|&v| Cell::Num(v)));
            co.push(cells);
        }
        tables.push(clusters);
        tables.push(co);
    }
    Ok(Report { metadata: meta, tables })
}
