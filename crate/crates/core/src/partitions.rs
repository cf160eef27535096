//! Integer partitions in multiplicity form and their Ewens sampling weights.
//!
//! A partition of `n` is stored as the vector `v` where `v[i-1]` counts the
//! blocks of size `i`, so that `sum(i * v_i) == n`. Weights are kept in
//! natural-log space throughout; the rising factorial `alpha^(n)` overflows
//! long before the enumeration cap is reached.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, CdpError, Result};
use crate::special::log_sum_exp;

/// Largest `n` enumerated unless the caller raises the cap (`p(40) = 37338`).
pub const DEFAULT_PARTITION_CAP: usize = 40;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct PartitionMultiplicity {
    v: Vec<u32>,
}

impl PartitionMultiplicity {
    /// Builds from a multiplicity vector whose length is `n`.
    pub fn new(v: Vec<u32>) -> Result<Self> {
        let n = v.len();
        if n == 0 {
            return domain("partition multiplicity vector must be non-empty");
        }
        let total: usize = v
            .iter()
            .enumerate()
            .map(|(i, &c)| (i + 1) * c as usize)
            .sum();
        if total != n {
            return domain(format!(
                "multiplicities sum to {total} but the vector length is {n}"
            ));
        }
        Ok(Self { v })
    }

    /// Builds from a list of block sizes in any order.
    pub fn from_block_sizes(sizes: &[usize]) -> Result<Self> {
        let n: usize = sizes.iter().sum();
        if n == 0 || sizes.contains(&0) {
            return domain("block sizes must be positive and non-empty");
        }
        let mut v = vec![0u32; n];
        for &s in sizes {
            v[s - 1] += 1;
        }
        Ok(Self { v })
    }

    /// The partition induced by cluster labels (items with equal label share a block).
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut counts = std::collections::HashMap::new();
        for &l in labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        let sizes: Vec<usize> = counts.into_values().collect();
        Self::from_block_sizes(&sizes)
    }

    pub fn singletons(n: usize) -> Self {
        let mut v = vec![0; n];
        v[0] = n as u32;
        Self { v }
    }

    pub fn single_block(n: usize) -> Self {
        let mut v = vec![0; n];
        v[n - 1] = 1;
        Self { v }
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    /// Number of blocks `k = sum(v_i)`.
    pub fn blocks(&self) -> usize {
        self.v.iter().map(|&c| c as usize).sum()
    }

    /// Number of blocks of the given size (`v_size`).
    pub fn multiplicity(&self, size: usize) -> u32 {
        if size == 0 || size > self.v.len() {
            0
        } else {
            self.v[size - 1]
        }
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.v
    }

    /// `(block size, multiplicity)` pairs with non-zero multiplicity, ascending in size.
    pub fn groups(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.v
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i + 1, c))
    }

    /// Block sizes in non-increasing order.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.blocks());
        for (size, count) in self.groups().collect::<Vec<_>>().into_iter().rev() {
            out.extend(std::iter::repeat_n(size, count as usize));
        }
        out
    }

    /// `sum(j^2 v_j)`: the variance multiplier of a sum whose repeated values
    /// come in blocks.
    pub fn sum_squared_sizes(&self) -> u64 {
        self.groups()
            .map(|(j, c)| (j * j) as u64 * c as u64)
            .sum()
    }
}

impl TryFrom<Vec<u32>> for PartitionMultiplicity {
    type Error = CdpError;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PartitionMultiplicity> for Vec<u32> {
    fn from(p: PartitionMultiplicity) -> Self {
        p.v
    }
}

impl fmt::Display for PartitionMultiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.block_sizes().iter().map(|s| s.to_string()).collect();
        write!(f, "[{}]", sizes.join("+"))
    }
}

/// All partitions of `n`, largest part first in descending-lexicographic
/// order: `[n]`, `[n-1, 1]`, `[n-2, 2]`, ..., `[1, 1, ..., 1]`.
pub fn enumerate_partitions(n: usize) -> Result<Vec<PartitionMultiplicity>> {
    enumerate_partitions_capped(n, DEFAULT_PARTITION_CAP)
}

pub fn enumerate_partitions_capped(n: usize, cap: usize) -> Result<Vec<PartitionMultiplicity>> {
    if n == 0 {
        return domain("cannot enumerate partitions of 0");
    }
    if n > cap {
        return Err(CdpError::Domain(format!(
            "n = {n} exceeds the partition enumeration cap of {cap}"
        )));
    }
    let mut out = Vec::new();
    let mut parts = Vec::with_capacity(n);
    descend(n, n, &mut parts, &mut out);
    Ok(out)
}

fn descend(
    remaining: usize,
    max_part: usize,
    parts: &mut Vec<usize>,
    out: &mut Vec<PartitionMultiplicity>,
) {
    if remaining == 0 {
        let n: usize = parts.iter().sum();
        let mut v = vec![0u32; n];
        for &p in parts.iter() {
            v[p - 1] += 1;
        }
        out.push(PartitionMultiplicity { v });
        return;
    }
    for first in (1..=max_part.min(remaining)).rev() {
        parts.push(first);
        descend(remaining - first, first, parts, out);
        parts.pop();
    }
}

/// `ln(alpha (alpha+1) ... (alpha+n-1))`, summed term by term so large
/// `alpha` keeps full relative precision.
pub fn log_rising_factorial(alpha: f64, n: usize) -> f64 {
    (0..n).map(|i| (alpha + i as f64).ln()).sum()
}

pub(crate) fn log_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwensWeight {
    pub log_prob: f64,
    pub partition: PartitionMultiplicity,
    pub alpha: f64,
}

impl EwensWeight {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return domain(format!("precision alpha must be positive and finite, got {alpha}"));
    }
    Ok(())
}

/// Log-probability of the multiplicity pattern `v` under the Ewens sampling
/// formula with precision `alpha`.
pub fn ewens_log_prob(v: &PartitionMultiplicity, alpha: f64) -> Result<EwensWeight> {
    check_alpha(alpha)?;
    let n = v.n();
    let ln_alpha = alpha.ln();
    let mut lp = log_factorial(n) - log_rising_factorial(alpha, n);
    for (j, c) in v.groups() {
        let c_usize = c as usize;
        lp += c as f64 * (ln_alpha - (j as f64).ln()) - log_factorial(c_usize);
    }
    Ok(EwensWeight {
        log_prob: lp.min(0.0),
        partition: v.clone(),
        alpha,
    })
}

/// How to prune a partition mixture. Discarded mass is always reported, never renormalized away.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    #[default]
    Full,
    /// Keep weights `>= epsilon * max weight`.
    Epsilon(f64),
    /// Keep the `k` heaviest partitions.
    TopK(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub n: usize,
    pub alpha: f64,
    /// Kept partitions with their (linear-scale) weights, in enumeration order.
    pub entries: Vec<(PartitionMultiplicity, f64)>,
    pub discarded_mass: f64,
}

impl WeightTable {
    pub fn kept_mass(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }
}

/// Ewens weights for every partition of `n`, keeping those with weight at
/// least `epsilon` times the largest one.
pub fn ewens_weight_table(n: usize, alpha: f64, epsilon: f64) -> Result<WeightTable> {
    if !(0.0..1.0).contains(&epsilon) {
        return domain(format!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    truncated_weight_table(n, alpha, Truncation::Epsilon(epsilon), DEFAULT_PARTITION_CAP)
}

pub fn truncated_weight_table(
    n: usize,
    alpha: f64,
    truncation: Truncation,
    cap: usize,
) -> Result<WeightTable> {
    check_alpha(alpha)?;
    let parts = enumerate_partitions_capped(n, cap)?;
    let mut logw = Vec::with_capacity(parts.len());
    for p in &parts {
        logw.push(ewens_log_prob(p, alpha)?.log_prob);
    }
    let keep = keep_mask(&logw, truncation)?;
    let mut entries = Vec::new();
    let mut dropped = Vec::new();
    for ((p, lw), k) in parts.into_iter().zip(logw).zip(keep) {
        if k {
            entries.push((p, lw.exp()));
        } else {
            dropped.push(lw);
        }
    }
    let discarded_mass = if dropped.is_empty() {
        0.0
    } else {
        log_sum_exp(&dropped).exp()
    };
    Ok(WeightTable {
        n,
        alpha,
        entries,
        discarded_mass,
    })
}

/// Which of the given log-weights survive the truncation rule.
pub(crate) fn keep_mask(logw: &[f64], truncation: Truncation) -> Result<Vec<bool>> {
    Ok(match truncation {
        Truncation::Full => vec![true; logw.len()],
        Truncation::Epsilon(eps) => {
            if !(0.0..1.0).contains(&eps) {
                return domain(format!("epsilon must lie in [0, 1), got {eps}"));
            }
            if eps == 0.0 {
                vec![true; logw.len()]
            } else {
                let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let cut = max + eps.ln();
                logw.iter().map(|&w| w >= cut).collect()
            }
        }
        Truncation::TopK(k) => {
            if k == 0 {
                return domain("top-k truncation needs k >= 1");
            }
            let mut idx: Vec<usize> = (0..logw.len()).collect();
            idx.sort_by(|&a, &b| logw[b].total_cmp(&logw[a]).then(a.cmp(&b)));
            let mut mask = vec![false; logw.len()];
            for &i in idx.iter().take(k) {
                mask[i] = true;
            }
            mask
        }
    })
}

/// Law of the size of the block containing one fixed item among `m`
/// exchangeable items: entry `j-1` is
/// `P(size = j) = alpha (m-1)!/(m-j)! * alpha^(m-j) / alpha^(m)`.
///
/// Deleting that block leaves an Ewens partition of the remaining `m - j`
/// items, which gives a recursion over `m` that never enumerates partitions.
pub fn block_size_law(alpha: f64, m: usize) -> Vec<f64> {
    let ln_alpha = alpha.ln();
    // running sums: ln (m-1)!/(m-j)!  and  ln alpha^(m)/alpha^(m-j)
    let mut ln_fall = 0.0;
    let mut ln_rise = 0.0;
    let mut out = Vec::with_capacity(m);
    for j in 1..=m {
        if j > 1 {
            ln_fall += ((m - j + 1) as f64).ln();
        }
        ln_rise += (alpha + (m - j) as f64).ln();
        out.push((ln_alpha + ln_fall - ln_rise).exp());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_one() {
        let p = enumerate_partitions(1).unwrap();
        assert_eq!(p, vec![PartitionMultiplicity::singletons(1)]);
    }

    #[test]
    fn order_is_descending_lex() {
        let p = enumerate_partitions(4).unwrap();
        let sizes: Vec<Vec<usize>> = p.iter().map(|v| v.block_sizes()).collect();
        assert_eq!(
            sizes,
            vec![vec![4], vec![3, 1], vec![2, 2], vec![2, 1, 1], vec![1, 1, 1, 1]]
        );
    }

    #[test]
    fn rejects_zero_and_cap() {
        assert!(enumerate_partitions(0).is_err());
        let err = enumerate_partitions(41).unwrap_err().to_string();
        assert!(err.contains("40"), "{err}");
        assert_eq!(enumerate_partitions_capped(41, 45).unwrap().len(), 44583);
    }

    #[test]
    fn n2_weights() {
        for alpha in [0.3, 1.0, 7.5] {
            let split = PartitionMultiplicity::new(vec![2, 0]).unwrap();
            let tie = PartitionMultiplicity::new(vec![0, 1]).unwrap();
            let a = ewens_log_prob(&split, alpha).unwrap().log_prob;
            let b = ewens_log_prob(&tie, alpha).unwrap().log_prob;
            assert!((a - (alpha / (alpha + 1.0)).ln()).abs() < 1e-14);
            assert!((b - (1.0 / (alpha + 1.0)).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        let v = PartitionMultiplicity::singletons(3);
        assert!(ewens_log_prob(&v, 0.0).is_err());
        assert!(ewens_log_prob(&v, -1.0).is_err());
        assert!(ewens_log_prob(&v, f64::NAN).is_err());
    }

    #[test]
    fn invalid_multiplicity_rejected() {
        assert!(PartitionMultiplicity::new(vec![1, 1]).is_err());
        assert!(PartitionMultiplicity::new(vec![]).is_err());
        assert!(PartitionMultiplicity::new(vec![1, 1, 0]).is_ok());
    }

    #[test]
    fn table_small_cases() {
        let t = ewens_weight_table(3, 1.0, 0.0).unwrap();
        assert_eq!(t.entries.len(), 3);
        assert!((t.kept_mass() - 1.0).abs() < 1e-14);
        assert_eq!(t.discarded_mass, 0.0);
        let t = ewens_weight_table(1, 3.3, 0.5).unwrap();
        assert_eq!(t.entries.len(), 1);
        assert!((t.entries[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn table_epsilon_discards_little() {
        let full = ewens_weight_table(8, 0.5, 0.0).unwrap();
        let cut = ewens_weight_table(8, 0.5, 1e-6).unwrap();
        assert!(cut.entries.len() <= full.entries.len());
        assert!(cut.discarded_mass < 1e-4);
        assert!((cut.kept_mass() + cut.discarded_mass - 1.0).abs() < 1e-10);
        assert!(ewens_weight_table(8, 0.5, 1.0).is_err());
    }

    #[test]
    fn top_k_keeps_heaviest() {
        let t = truncated_weight_table(6, 2.0, Truncation::TopK(3), 40).unwrap();
        assert_eq!(t.entries.len(), 3);
        let full = ewens_weight_table(6, 2.0, 0.0).unwrap();
        let mut ws: Vec<f64> = full.entries.iter().map(|e| e.1).collect();
        ws.sort_by(|a, b| b.total_cmp(a));
        let kept: f64 = t.kept_mass();
        assert!((kept - ws[..3].iter().sum::<f64>()).abs() < 1e-14);
        assert!((kept + t.discarded_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_size_law_sums_to_one() {
        for alpha in [0.01, 1.0, 25.0] {
            for m in [1, 2, 5, 33, 200] {
                let s: f64 = block_size_law(alpha, m).iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "alpha={alpha} m={m} sum={s}");
            }
        }
        let w = block_size_law(2.0, 2);
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn labels_to_partition() {
        let p = PartitionMultiplicity::from_labels(&[4, 4, 1, 9, 1, 4]).unwrap();
        assert_eq!(p.as_slice(), &[1, 1, 1, 0, 0, 0]);
        assert_eq!(p.sum_squared_sizes(), 1 + 4 + 9);
        assert_eq!(p.to_string(), "[3+2+1]");
    }
}
