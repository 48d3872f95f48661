//! Weber-fraction fit of Gaussian number words to listener posteriors.

use std::str::FromStr;

use crate::domain::NumberLine;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Grid of candidate Weber fractions, 0.05 to 2.00 in steps of 0.01.
pub fn weber_grid<T: Real>() -> Vec<T> {
    (5..=200).map(|k| T::count(k) / T::count(100)).collect()
}

/// Shape of the Gaussian model row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exponent {
    /// `-(|n - mu| / (2 nu mu))^2`
    #[default]
    DoubledSpread,
    /// `-(n - mu)^2 / (2 (nu mu)^2)`
    Standard,
}

impl FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doubled" => Ok(Exponent::DoubledSpread),
            "standard" => Ok(Exponent::Standard),
            other => Err(Error::Parse(format!("unknown exponent `{other}` (doubled|standard)"))),
        }
    }
}

pub fn expected_number<T: Real>(row: &[T], line: NumberLine) -> Result<T> {
    if row.len() != line.size() {
        return Err(Error::Shape { expected: line.size(), got: row.len() });
    }
    let sum: T = row.iter().copied().sum();
    if (sum - T::one()).abs() > T::norm_tol() || row.iter().any(|&p| p < T::zero()) {
        return Err(Error::NotNormalized(format!("posterior row sums to {sum}")));
    }
    Ok(line.numbers().zip(row).map(|(n, &p)| T::count(n as usize) * p).sum())
}

pub fn gaussian_model_row<T: Real>(mu: T, nu: T, line: NumberLine, shape: Exponent) -> Result<Vec<T>> {
    if !(mu > T::zero()) || !(nu > T::zero()) {
        return Err(Error::Domain(format!("mean {mu} and Weber fraction {nu} must be positive")));
    }
    let spread = nu * mu;
    let logs: Vec<T> = line
        .numbers()
        .map(|n| {
            let d = T::count(n as usize) - mu;
            match shape {
                Exponent::DoubledSpread => {
                    let z = d.abs() / (T::lit(2.0) * spread);
                    -(z * z)
                }
                Exponent::Standard => -(d * d) / (T::lit(2.0) * spread * spread),
            }
        })
        .collect();
    let top = logs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut row: Vec<T> = logs.into_iter().map(|l| (l - top).exp()).collect();
    crate::domain::normalize(&mut row)?;
    Ok(row)
}

/// Reachable-word posterior rows of one pair together with each word's mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPosterior<T = f64> {
    rows: Vec<Vec<T>>,
    mus: Vec<T>,
}

impl<T: Real> PairPosterior<T> {
    /// Means taken as the posterior expectation of each row.
    pub fn from_rows(rows: Vec<Vec<T>>, line: NumberLine) -> Result<Self> {
        let mus = rows.iter().map(|r| expected_number(r, line)).collect::<Result<_>>()?;
        Ok(Self { rows, mus })
    }

    /// Explicit means, e.g. the generating means of synthetic rows.
    pub fn with_means(rows: Vec<Vec<T>>, mus: Vec<T>, line: NumberLine) -> Result<Self> {
        if mus.len() != rows.len() {
            return Err(Error::Shape { expected: rows.len(), got: mus.len() });
        }
        for r in &rows {
            expected_number(r, line)?;
        }
        Ok(Self { rows, mus })
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn mus(&self) -> &[T] {
        &self.mus
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeberFit<T = f64> {
    pub nu: T,
    pub mse: T,
    pub per_word_mu: Vec<T>,
}

/// MSE at every grid point, averaged over words and numbers with words
/// weighted equally.
pub fn mse_curve<T: Real>(pair: &PairPosterior<T>, line: NumberLine, shape: Exponent) -> Result<Vec<T>> {
    if pair.is_empty() {
        return Err(Error::Empty("posterior rows"));
    }
    let cells = T::count(pair.rows.len() * line.size());
    weber_grid::<T>()
        .into_iter()
        .map(|nu| {
            let mut total = T::zero();
            for (row, &mu) in pair.rows.iter().zip(&pair.mus) {
                let model = gaussian_model_row(mu, nu, line, shape)?;
                total = total + model.iter().zip(row).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
            }
            Ok(total / cells)
        })
        .collect()
}

/// First index of the minimum, so ties go to the smaller Weber fraction.
fn argmin<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeberReport<T = f64> {
    /// One entry per input pair; `None` for pairs without reachable words.
    pub per_pair: Vec<Option<WeberFit<T>>>,
    pub skipped: Vec<usize>,
    pub pooled_nu: T,
    /// Mean and standard deviation over fitted pairs of the MSE at `pooled_nu`.
    pub pooled_mse: T,
    pub pooled_mse_sd: T,
}

pub fn fit_weber<T: Real>(pairs: &[PairPosterior<T>], line: NumberLine, shape: Exponent) -> Result<WeberReport<T>> {
    let grid = weber_grid::<T>();
    let mut per_pair = Vec::with_capacity(pairs.len());
    let mut skipped = Vec::new();
    let mut curves = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        if pair.is_empty() {
            skipped.push(i);
            per_pair.push(None);
            continue;
        }
        let curve = mse_curve(pair, line, shape)?;
        let k = argmin(&curve);
        per_pair.push(Some(WeberFit { nu: grid[k], mse: curve[k], per_word_mu: pair.mus.clone() }));
        curves.push(curve);
    }
    if curves.is_empty() {
        return Err(Error::Empty("pairs with reachable words"));
    }
    let m = T::count(curves.len());
    let pooled: Vec<T> = (0..grid.len()).map(|k| curves.iter().map(|c| c[k]).sum::<T>() / m).collect();
    let k = argmin(&pooled);
    let var = curves.iter().map(|c| (c[k] - pooled[k]) * (c[k] - pooled[k])).sum::<T>() / m;
    Ok(WeberReport { per_pair, skipped, pooled_nu: grid[k], pooled_mse: pooled[k], pooled_mse_sd: var.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line() -> NumberLine {
        NumberLine::default()
    }

    fn point(n: u32) -> Vec<f64> {
        let mut r = vec![0.0; 20];
        r[n as usize - 1] = 1.0;
        r
    }

    #[test]
    fn grid_shape() {
        let g: Vec<f64> = weber_grid();
        assert_eq!(g.len(), 196);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[26], 0.31);
        assert_eq!(g[195], 2.0);
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(expected_number(&point(7), line()).unwrap(), 7.0);
        let mut r = vec![0.0; 20];
        r[3] = 0.5;
        r[5] = 0.5;
        assert_eq!(expected_number(&r, line()).unwrap(), 5.0);
        assert!((expected_number(&[0.05f64; 20], line()).unwrap() - 10.5).abs() < 1e-12);
        assert!(expected_number(&[0.1; 20], line()).is_err());
        assert!(expected_number(&[0.5, 0.5], line()).is_err());
    }

    #[test]
    fn model_row_matches_formula() {
        let row: Vec<f64> = gaussian_model_row(5.0, 0.31, line(), Exponent::DoubledSpread).unwrap();
        let raw: Vec<f64> = (1..=20).map(|n| (-((n as f64 - 5.0).abs() / (2.0 * 0.31 * 5.0)).powi(2)).exp()).collect();
        let z: f64 = raw.iter().sum();
        for (a, b) in row.iter().zip(&raw) {
            assert!((a - b / z).abs() < 1e-14);
        }
        let std: Vec<f64> = gaussian_model_row(5.0, 0.31, line(), Exponent::Standard).unwrap();
        let raw: Vec<f64> = (1..=20).map(|n| (-(n as f64 - 5.0).powi(2) / (2.0 * 1.55f64.powi(2))).exp()).collect();
        let z: f64 = raw.iter().sum();
        for (a, b) in std.iter().zip(&raw) {
            assert!((a - b / z).abs() < 1e-14);
        }
        assert!(gaussian_model_row(0.0, 0.3, line(), Exponent::DoubledSpread).is_err());
        assert!(gaussian_model_row(3.0, 0.0, line(), Exponent::DoubledSpread).is_err());
    }

    #[test]
    fn wide_model_tends_to_uniform() {
        let row: Vec<f64> = gaussian_model_row(10.0, 1e4, line(), Exponent::DoubledSpread).unwrap();
        assert!(row.iter().all(|&p| (p - 0.05).abs() < 1e-8));
    }

    #[test]
    fn point_masses_fit_sharpest() {
        let rows: Vec<Vec<f64>> = [3, 8, 15].iter().map(|&n| point(n)).collect();
        let pair = PairPosterior::from_rows(rows.clone(), line()).unwrap();
        let rep = fit_weber(&[pair], line(), Exponent::DoubledSpread).unwrap();
        let fit = rep.per_pair[0].as_ref().unwrap();
        assert_eq!(fit.nu, 0.05);
        // Residual of the sharpest model, evaluated directly.
        let mut total = 0.0;
        for (r, n) in rows.iter().zip([3.0, 8.0, 15.0]) {
            let m: Vec<f64> = gaussian_model_row(n, 0.05, line(), Exponent::DoubledSpread).unwrap();
            total += m.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        assert!((fit.mse - total / 60.0).abs() < 1e-15);
    }

    #[test]
    fn skips_empty_pairs() {
        let full = PairPosterior::from_rows(vec![point(4)], line()).unwrap();
        let empty = PairPosterior::from_rows(vec![], line()).unwrap();
        let rep = fit_weber(&[empty.clone(), full], line(), Exponent::DoubledSpread).unwrap();
        assert_eq!(rep.skipped, vec![0]);
        assert!(rep.per_pair[0].is_none());
        assert!(fit_weber(&[empty], line(), Exponent::DoubledSpread).is_err());
    }

    #[test]
    fn pooled_averages_curves() {
        let a = PairPosterior::from_rows(vec![point(4)], line()).unwrap();
        let b = PairPosterior::from_rows(vec![vec![0.05; 20]], line()).unwrap();
        let rep = fit_weber(&[a.clone(), b.clone()], line(), Exponent::DoubledSpread).unwrap();
        let ca = mse_curve(&a, line(), Exponent::DoubledSpread).unwrap();
        let cb = mse_curve(&b, line(), Exponent::DoubledSpread).unwrap();
        let pooled: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| (x + y) / 2.0).collect();
        let k = argmin(&pooled);
        assert_eq!(rep.pooled_nu, weber_grid::<f64>()[k]);
        assert!((rep.pooled_mse - pooled[k]).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn recovers_generating_nu(k in 5usize..=200, mus in proptest::collection::vec(2u32..=19, 1..6)) {
            let nu = k as f64 / 100.0;
            let mus: Vec<f64> = mus.into_iter().map(f64::from).collect();
            let rows = mus.iter().map(|&mu| gaussian_model_row(mu, nu, line(), Exponent::DoubledSpread).unwrap()).collect();
            let pair = PairPosterior::with_means(rows, mus, line()).unwrap();
            let rep = fit_weber(&[pair], line(), Exponent::DoubledSpread).unwrap();
            let fit = rep.per_pair[0].clone().unwrap();
            prop_assert_eq!(fit.nu, nu);
            prop_assert!(fit.mse <= 1e-12);
            prop_assert_eq!(rep.pooled_nu, nu);
        }

        #[test]
        fn expectation_is_linear(a in 0.0f64..=1.0, i in 1u32..=20, j in 1u32..=20) {
            let p = point(i);
            let q: Vec<f64> = gaussian_model_row(f64::from(j), 0.3, line(), Exponent::DoubledSpread).unwrap();
            let mix: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + (1.0 - a) * y).collect();
            let lhs = expected_number(&mix, line()).unwrap();
            let rhs = a * expected_number(&p, line()).unwrap() + (1.0 - a) * expected_number(&q, line()).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn mode_at_rounded_mean(mu in 1.0f64..=20.0, k in 5usize..=200) {
            let row: Vec<f64> = gaussian_model_row(mu, k as f64 / 100.0, line(), Exponent::DoubledSpread).unwrap();
            let mode = crate::scalar::argmax_lowest(&row) as f64 + 1.0;
            prop_assert!((mode - mu).abs() <= 0.5);
        }
    }
}
