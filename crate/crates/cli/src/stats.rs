//! One-sided Mann-Whitney U test with the normal approximation.

use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTest {
    /// U statistic of the first sample.
    pub u: f64,
    pub z: f64,
    /// p-value for "the first sample tends to be smaller".
    pub p_less: f64,
}

/// Tie-corrected normal approximation with continuity correction.
pub fn mann_whitney_less(a: &[f64], b: &[f64]) -> Option<RankTest> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = pooled.len();
    let mut rank_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_a += mid * pooled[i..=j].iter().filter(|p| p.1).count() as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let (na, nb, nf) = (a.len() as f64, b.len() as f64, n as f64);
    let u = rank_a - na * (na + 1.0) / 2.0;
    let mean = na * nb / 2.0;
    let var = na * nb / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var.is_nan() || var <= 0.0 {
        return Some(RankTest { u, z: 0.0, p_less: 1.0 });
    }
    let z = (u - mean + 0.5) / var.sqrt();
    let p_less = Normal::standard().cdf(z);
    Some(RankTest { u, z, p_less })
}
