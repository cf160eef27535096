//! Browser bindings for the demo page in `www/`. Each export has a plain
//! Rust counterpart so the numbers can be checked natively.

use cdp_core::dp::{BaseDistribution, DirichletPrior};
use cdp_core::process::{path_rng, simulate_path, CdpModel, Model, MonteCarloSettings, StLaw, TruncationPolicy};
use cdp_core::sums::SnLaw;
use wasm_bindgen::prelude::*;

/// Evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 || hi <= lo || !lo.is_finite() || !hi.is_finite() {
        return Err(format!("need lo < hi and at least 2 points, got [{lo}, {hi}] with {points}"));
    }
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

fn gaussian_prior(alpha: f64, mu: f64, sigma2: f64) -> Result<DirichletPrior, String> {
    let base = BaseDistribution::gaussian(mu, sigma2).map_err(|e| e.to_string())?;
    DirichletPrior::new(alpha, base).map_err(|e| e.to_string())
}

fn model(alpha_t: f64, rate: f64, alpha_x: f64, mu: f64, sigma2: f64) -> Result<CdpModel, String> {
    let base = BaseDistribution::exponential(rate).map_err(|e| e.to_string())?;
    let time = DirichletPrior::new(alpha_t, base).map_err(|e| e.to_string())?;
    CdpModel::new(time, gaussian_prior(alpha_x, mu, sigma2)?).map_err(|e| e.to_string())
}

/// A curve with one error bound for every point.
#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
    bound: f64,
    atom: f64,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    /// Largest error bound over the points.
    #[wasm_bindgen(getter)]
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Probability of the atom at zero (no events before the horizon).
    #[wasm_bindgen(getter)]
    pub fn atom(&self) -> f64 {
        self.atom
    }
}

/// Density of the sum of `n` urn draws with a Gaussian base.
pub fn sn_density_curve(n: usize, alpha: f64, mu: f64, sigma2: f64, lo: f64, hi: f64, points: usize) -> Result<Curve, String> {
    let law = SnLaw::new(n, &gaussian_prior(alpha, mu, sigma2)?).map_err(|e| e.to_string())?;
    let x = linspace(lo, hi, points)?;
    let mut y = Vec::with_capacity(x.len());
    let mut bound: f64 = 0.0;
    for &s in &x {
        let b = law.density(s).map_err(|e| e.to_string())?;
        y.push(b.value);
        bound = bound.max(b.bound);
    }
    Ok(Curve { x, y, bound, atom: 0.0 })
}

/// Distribution function of `S_t` with exponential interarrival base and
/// Gaussian mark base.
#[allow(clippy::too_many_arguments)]
pub fn st_cdf_curve(
    alpha_t: f64,
    rate: f64,
    alpha_x: f64,
    mu: f64,
    sigma2: f64,
    horizon: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Curve, String> {
    let m = model(alpha_t, rate, alpha_x, mu, sigma2)?;
    let law = StLaw::new(&m, horizon, &TruncationPolicy::default(), &MonteCarloSettings::default())
        .map_err(|e| e.to_string())?;
    let x = linspace(lo, hi, points)?;
    let vals = law.cdf_grid(&x).map_err(|e| e.to_string())?;
    Ok(Curve {
        x,
        bound: vals.iter().map(|b| b.bound).fold(0.0, f64::max),
        y: vals.into_iter().map(|b| b.value).collect(),
        atom: law.atom_at_zero(),
    })
}

/// Simulated paths as step functions: path `p` has arrival times
/// `times[offsets[p]..offsets[p+1]]` and running sums at the same indices.
#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct Paths {
    times: Vec<f64>,
    sums: Vec<f64>,
    offsets: Vec<u32>,
}

#[wasm_bindgen]
impl Paths {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn sums(&self) -> Vec<f64> {
        self.sums.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn offsets(&self) -> Vec<u32> {
        self.offsets.clone()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn sample_paths(
    alpha_t: f64,
    rate: f64,
    alpha_x: f64,
    mu: f64,
    sigma2: f64,
    horizon: f64,
    paths: usize,
    seed: u64,
) -> Result<Paths, String> {
    let m = Model::Cdp(model(alpha_t, rate, alpha_x, mu, sigma2)?);
    let mut out = Paths {
        times: Vec::new(),
        sums: Vec::new(),
        offsets: vec![0],
    };
    for i in 0..paths {
        let p = simulate_path(&m, horizon, &mut path_rng(seed, i as u64)).map_err(|e| e.to_string())?;
        let (mut clock, mut acc) = (0.0, 0.0);
        for (t, x) in p.interarrivals.iter().zip(&p.marks) {
            clock += t;
            acc += x;
            out.times.push(clock);
            out.sums.push(acc);
        }
        out.offsets.push(out.times.len() as u32);
    }
    Ok(out)
}

fn js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

#[wasm_bindgen(js_name = snDensity)]
pub fn sn_density_js(n: usize, alpha: f64, mu: f64, sigma2: f64, lo: f64, hi: f64, points: usize) -> Result<Curve, JsValue> {
    sn_density_curve(n, alpha, mu, sigma2, lo, hi, points).map_err(js)
}

#[wasm_bindgen(js_name = stCdf)]
#[allow(clippy::too_many_arguments)]
pub fn st_cdf_js(
    alpha_t: f64,
    rate: f64,
    alpha_x: f64,
    mu: f64,
    sigma2: f64,
    horizon: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Curve, JsValue> {
    st_cdf_curve(alpha_t, rate, alpha_x, mu, sigma2, horizon, lo, hi, points).map_err(js)
}

#[wasm_bindgen(js_name = samplePaths)]
#[allow(clippy::too_many_arguments)]
pub fn sample_paths_js(
    alpha_t: f64,
    rate: f64,
    alpha_x: f64,
    mu: f64,
    sigma2: f64,
    horizon: f64,
    paths: usize,
    seed: u32,
) -> Result<Paths, JsValue> {
    sample_paths(alpha_t, rate, alpha_x, mu, sigma2, horizon, paths, seed as u64).map_err(js)
}
