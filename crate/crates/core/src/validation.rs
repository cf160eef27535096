//! Comparing analytic distribution functions with simulated samples.

/// Half-width of the Dvoretzky–Kiefer–Wolfowitz band for an empirical CDF
/// of `n` points at the given confidence: `sqrt(ln(2 / (1 - c)) / (2 n))`.
pub fn dkw_epsilon(n: usize, confidence: f64) -> f64 {
    ((2.0 / (1.0 - confidence)).ln() / (2.0 * n as f64)).sqrt()
}

#[derive(Clone, Debug)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut sample: Vec<f64>) -> Self {
        sample.sort_by(f64::total_cmp);
        Self { sorted: sample }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `F_n(x) = #{X_i <= x} / n`.
    pub fn at(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// `F_n(x-) = #{X_i < x} / n`.
    pub fn before(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v < x) as f64 / self.len() as f64
    }

    /// `p`-quantile of the sample (lower order statistic).
    pub fn quantile(&self, p: f64) -> f64 {
        let k = ((p * self.len() as f64).ceil() as usize).clamp(1, self.len());
        self.sorted[k - 1]
    }

    /// Exact Kolmogorov–Smirnov distance to a continuous CDF.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in self.sorted.iter().enumerate() {
            let f = cdf(x);
            d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
        }
        d
    }

    /// Upper bound on `sup_x |F_n(x) - F(x)|` over the whole line from the
    /// values of a non-decreasing `F` on an increasing grid, using only
    /// monotonicity between grid points. `f_left[i]` is the left limit
    /// `F(grid[i]-)`, equal to `f[i]` wherever `F` has no atom.
    pub fn sup_distance_on_grid(&self, grid: &[f64], f_left: &[f64], f: &[f64]) -> f64 {
        assert!(grid.len() == f.len() && grid.len() == f_left.len());
        let mut d: f64 = 0.0;
        if let (Some(&g0), Some(&f0)) = (grid.first(), f_left.first()) {
            d = d.max(self.before(g0)).max(f0);
        }
        for i in 0..grid.len() {
            d = d
                .max((self.at(grid[i]) - f[i]).abs())
                .max((self.before(grid[i]) - f_left[i]).abs());
            if i + 1 < grid.len() {
                d = d
                    .max(self.before(grid[i + 1]) - f[i])
                    .max(f_left[i + 1] - self.at(grid[i]));
            }
        }
        if let (Some(&gl), Some(&fl)) = (grid.last(), f.last()) {
            d = d.max(1.0 - self.at(gl)).max(1.0 - fl);
        }
        d
    }
}

/// Total variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Mean and batch-means standard error of an autocorrelated trace.
pub fn batch_means(trace: &[f64], batches: usize) -> (f64, f64) {
    let n = trace.len();
    let size = n / batches;
    assert!(size >= 1, "trace shorter than the number of batches");
    let means: Vec<f64> = (0..batches)
        .map(|b| trace[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let v = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (m, (v / batches as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dkw_value() {
        let e = dkw_epsilon(1_000_000, 0.99);
        assert!((e - (200f64.ln() / 2e6).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ecdf_steps() {
        let e = Ecdf::new(vec![3.0, 1.0, 2.0, 2.0]);
        assert_eq!(e.at(2.0), 0.75);
        assert_eq!(e.before(2.0), 0.25);
        assert_eq!(e.quantile(0.5), 2.0);
    }

    #[test]
    fn grid_bound_dominates_exact_distance() {
        let sample: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 + 0.0003).collect();
        let e = Ecdf::new(sample);
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        let exact = e.ks_distance(uniform);
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let f: Vec<f64> = grid.iter().map(|&g| uniform(g)).collect();
        let bound = e.sup_distance_on_grid(&grid, &f, &f);
        assert!(bound >= exact - 1e-15);
        assert!(bound < exact + 0.021);
    }

    #[test]
    fn grid_bound_with_atom() {
        // half the mass at zero, half uniform on (0, 1]
        let sample: Vec<f64> = (0..2000)
            .map(|i| if i % 2 == 0 { 0.0 } else { (i as f64 + 0.5) / 2000.0 })
            .collect();
        let e = Ecdf::new(sample);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let f: Vec<f64> = grid.iter().map(|&g| 0.5 + 0.5 * g).collect();
        let mut left = f.clone();
        left[0] = 0.0;
        assert!(e.sup_distance_on_grid(&grid, &left, &f) < 0.01);
    }
}
