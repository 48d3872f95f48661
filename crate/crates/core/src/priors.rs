//! Need priors: uniform, power-law smoothed corpus frequencies,
//! capacity-achieving priors of naming channels and maximum-entropy priors
//! consistent with observed word frequencies.

use crate::domain::{normalize, NamingDistribution, NeedPrior, NumberLine};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn uniform_prior<T: Real>(line: NumberLine) -> NeedPrior<T> {
    let n = line.size();
    NeedPrior::new(vec![T::one() / T::count(n); n]).expect("uniform prior is normalized")
}

/// Raw corpus counts per number.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable<T = f64> {
    entries: Vec<(u32, T)>,
}

impl<T: Real> FrequencyTable<T> {
    pub fn new(mut entries: Vec<(u32, T)>, line: NumberLine) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Domain(format!("number {} listed twice", pair[0].0)));
            }
        }
        for &(n, c) in &entries {
            line.index_of(n)?;
            if !(c >= T::zero()) || !c.is_finite() {
                return Err(Error::Domain(format!("count for {n} must be a non-negative real, got {c}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(u32, T)] {
        &self.entries
    }

    /// Parse CSV with header `n,count`.
    pub fn from_csv(text: &str, line: NumberLine) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or(Error::Empty("frequency table"))?;
        if header.replace(' ', "") != "n,count" {
            return Err(Error::Parse(format!("expected header `n,count`, found `{header}`")));
        }
        let entries = lines
            .map(|l| {
                let (n, c) = l.split_once(',').ok_or_else(|| Error::Parse(format!("bad row `{l}`")))?;
                let n: u32 = n.trim().parse().map_err(|_| Error::Parse(format!("bad number `{n}`")))?;
                let c: f64 = c.trim().parse().map_err(|_| Error::Parse(format!("bad count `{c}`")))?;
                Ok((n, T::lit(c)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, line)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit<T = f64> {
    /// Exponent of `p(n) ∝ n^(-alpha)`.
    pub alpha: T,
    /// Intercept of the log-log regression line (natural log).
    pub intercept: T,
    pub prior: NeedPrior<T>,
}

/// Ordinary least squares of log normalized frequency on log n over the
/// positive counts, then `n^(-alpha)` normalized over the whole line.
pub fn fit_power_law<T: Real>(freqs: &FrequencyTable<T>, line: NumberLine) -> Result<PowerLawFit<T>> {
    let positive: Vec<(u32, T)> = freqs.entries().iter().copied().filter(|e| e.1 > T::zero()).collect();
    if positive.len() < 2 {
        return Err(Error::Fit(positive.len()));
    }
    let total: T = positive.iter().map(|e| e.1).sum();
    let xs: Vec<T> = positive.iter().map(|e| T::count(e.0 as usize).ln()).collect();
    let ys: Vec<T> = positive.iter().map(|e| (e.1 / total).ln()).collect();
    let m = T::count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / m;
    let my = ys.iter().copied().sum::<T>() / m;
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: T = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    if !(sxx > T::zero()) {
        return Err(Error::Fit(1));
    }
    let slope = sxy / sxx;
    let alpha = -slope;
    let intercept = my - slope * mx;
    let weights = line.numbers().map(|n| T::count(n as usize).powf(-alpha)).collect();
    Ok(PowerLawFit { alpha, intercept, prior: NeedPrior::from_weights(weights)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapResult<T = f64> {
    pub prior: NeedPrior<T>,
    /// Mutual information `I(N;W)` under the returned prior, in bits.
    pub capacity_bits: T,
    /// Final gap between the upper and lower capacity bounds.
    pub gap: T,
    pub iterations: usize,
    pub converged: bool,
    /// `I(N;W)` before each update, for monitoring.
    pub history: Vec<T>,
}

/// Mutual information `I(N;W)` in bits.
pub fn mutual_information<T: Real>(channel: &NamingDistribution<T>, prior: &NeedPrior<T>) -> Result<T> {
    let q = channel.word_marginal(prior)?;
    let mut info = T::zero();
    for (row, &p) in channel.rows().iter().zip(prior.probs()) {
        if p > T::zero() {
            info = info + p * divergence_bits(row, &q);
        }
    }
    Ok(info.max(T::zero()))
}

/// `D(row || q)` in bits.
fn divergence_bits<T: Real>(row: &[T], q: &[T]) -> T {
    row.iter()
        .zip(q)
        .filter(|(&w, _)| w > T::zero())
        .map(|(&w, &qw)| w * (w / qw).log2())
        .sum()
}

/// Capacity-achieving input distribution of the channel `p(w|n)` by
/// Blahut-Arimoto, started from the uniform prior.
pub fn blahut_arimoto_cap<T: Real>(channel: &NamingDistribution<T>, tol: T, max_iter: usize) -> Result<CapResult<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let n = channel.num_numbers();
    let mut p = vec![T::one() / T::count(n); n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut gap;
    loop {
        let prior = NeedPrior::from_weights(p.clone())?;
        let q = channel.word_marginal(&prior)?;
        let d: Vec<T> = channel.rows().iter().map(|row| divergence_bits(row, &q)).collect();
        let info: T = p.iter().zip(&d).map(|(&pi, &di)| pi * di).sum();
        history.push(info);
        let upper = d.iter().copied().fold(T::neg_infinity(), T::max);
        let lower = p.iter().zip(&d).map(|(&pi, &di)| pi * di.exp2()).sum::<T>().log2();
        gap = upper - lower;
        if gap < tol || iterations >= max_iter {
            let converged = gap < tol;
            return Ok(CapResult { capacity_bits: info.max(T::zero()), prior, gap, iterations, converged, history });
        }
        for (pi, &di) in p.iter_mut().zip(&d) {
            *pi = *pi * di.exp2();
        }
        normalize(&mut p)?;
        iterations += 1;
    }
}

/// Entrywise mean of several priors, renormalized.
pub fn average_caps<T: Real>(caps: &[NeedPrior<T>]) -> Result<NeedPrior<T>> {
    let first = caps.first().ok_or(Error::Empty("prior list"))?;
    let mut acc = vec![T::zero(); first.len()];
    for cap in caps {
        if cap.len() != acc.len() {
            return Err(Error::Shape { expected: acc.len(), got: cap.len() });
        }
        for (a, &p) in acc.iter_mut().zip(cap.probs()) {
            *a = *a + p;
        }
    }
    NeedPrior::from_weights(acc)
}

/// Relative word frequencies `p(w)` of one naming system.
#[derive(Debug, Clone, PartialEq)]
pub struct WordFrequency<T = f64> {
    probs: Vec<T>,
}

impl<T: Real> WordFrequency<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        Ok(Self { probs: NeedPrior::new(probs)?.into_inner() })
    }

    pub fn from_counts(counts: Vec<T>) -> Result<Self> {
        Ok(Self { probs: NeedPrior::from_weights(counts)?.into_inner() })
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntResult<T = f64> {
    pub prior: NeedPrior<T>,
    /// Dual variables, one per word (zero for words with zero frequency).
    pub lambda: Vec<T>,
    pub max_residual: T,
    pub iterations: usize,
}

const MAXENT_MAX_ITER: usize = 500;

/// Maximum-entropy prior subject to `sum_n p(n) p(w|n) = p(w)` for every
/// word. Solved in the dual: `p(n) ∝ exp(sum_w lambda_w p(w|n))`, with
/// damped Newton ascent and step halving on the dual objective.
///
/// Numbers that can produce a word of zero frequency are forced to zero mass
/// before solving.
pub fn maxent_prior<T: Real>(naming: &NamingDistribution<T>, word_freq: &WordFrequency<T>, tol: T) -> Result<MaxEntResult<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let k = naming.num_words();
    let target = word_freq.probs();
    if target.len() != k {
        return Err(Error::Shape { expected: k, got: target.len() });
    }
    let active: Vec<usize> = (0..k).filter(|&w| target[w] > T::zero()).collect();
    let support: Vec<usize> = (0..naming.num_numbers())
        .filter(|&n| (0..k).all(|w| target[w] > T::zero() || naming.get(n, w) == T::zero()))
        .collect();
    if support.is_empty() {
        return Err(Error::Infeasible { residual: 1.0 });
    }
    // Feature vectors restricted to active words.
    let feats: Vec<Vec<T>> = support.iter().map(|&n| active.iter().map(|&w| naming.get(n, w)).collect()).collect();
    let goal: Vec<T> = active.iter().map(|&w| target[w]).collect();
    let d = active.len();

    let dual = |lambda: &[T]| -> (T, Vec<T>) {
        // f(lambda) = log sum_n exp(a_n . lambda) - lambda . goal  (minimized)
        let scores: Vec<T> = feats.iter().map(|a| a.iter().zip(lambda).map(|(&x, &l)| x * l).sum()).collect();
        let top = scores.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = scores.iter().map(|&s| (s - top).exp()).collect();
        let z: T = e.iter().copied().sum();
        let f = top + z.ln() - lambda.iter().zip(&goal).map(|(&l, &g)| l * g).sum::<T>();
        (f, e.into_iter().map(|x| x / z).collect())
    };

    let mut lambda = vec![T::zero(); d];
    let (mut f, mut p) = dual(&lambda);
    let mut iterations = 0;
    loop {
        let mean: Vec<T> = (0..d).map(|j| feats.iter().zip(&p).map(|(a, &pn)| a[j] * pn).sum()).collect();
        let grad: Vec<T> = mean.iter().zip(&goal).map(|(&m, &g)| m - g).collect();
        let residual = grad.iter().fold(T::zero(), |acc, g| acc.max(g.abs()));
        if residual < tol || iterations >= MAXENT_MAX_ITER {
            if residual >= tol {
                return Err(Error::Infeasible { residual: residual.as_f64() });
            }
            let mut probs = vec![T::zero(); naming.num_numbers()];
            for (&n, &pn) in support.iter().zip(&p) {
                probs[n] = pn;
            }
            let mut full_lambda = vec![T::zero(); k];
            for (&w, &l) in active.iter().zip(&lambda) {
                full_lambda[w] = l;
            }
            return Ok(MaxEntResult { prior: NeedPrior::from_weights(probs)?, lambda: full_lambda, max_residual: residual, iterations });
        }
        // Hessian of the log-partition: covariance of features under p.
        let mut hess = vec![vec![T::zero(); d]; d];
        for (a, &pn) in feats.iter().zip(&p) {
            for i in 0..d {
                let ai = a[i] - mean[i];
                for j in 0..d {
                    hess[i][j] = hess[i][j] + pn * ai * (a[j] - mean[j]);
                }
            }
        }
        let trace: T = (0..d).map(|i| hess[i][i]).sum();
        let ridge = T::lit(1e-10) * (T::one() + trace);
        for (i, row) in hess.iter_mut().enumerate() {
            row[i] = row[i] + ridge;
        }
        let neg_grad: Vec<T> = grad.iter().map(|&g| -g).collect();
        let dir = solve_spd(hess, neg_grad).unwrap_or_else(|| grad.iter().map(|&g| -g).collect());
        let slope: T = dir.iter().zip(&grad).map(|(&x, &g)| x * g).sum();
        let mut step = T::one();
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<T> = lambda.iter().zip(&dir).map(|(&l, &x)| l + step * x).collect();
            let (ft, pt) = dual(&trial);
            if ft <= f + T::lit(1e-4) * step * slope {
                lambda = trial;
                f = ft;
                p = pt;
                moved = true;
                break;
            }
            step = step * T::lit(0.5);
        }
        iterations += 1;
        if !moved {
            // Stalled: the constraint set is not reachable from this support.
            return Err(Error::Infeasible { residual: residual.as_f64() });
        }
    }
}

/// Cholesky solve of a small symmetric positive-definite system.
fn solve_spd<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for j in 0..n {
        let mut s = a[j][j];
        for k in 0..j {
            s = s - a[j][k] * a[j][k];
        }
        if !(s > T::zero()) {
            return None;
        }
        let l = s.sqrt();
        a[j][j] = l;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - a[i][k] * a[j][k];
            }
            a[i][j] = s / l;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    Some(b)
}

/// Normalized Gaussian row over the line: `p(n) ∝ exp(-(n-mu)^2 / (2 sigma^2))`
/// with `sigma = weber * mu`.
pub fn gaussian_word_row<T: Real>(mu: T, weber: T, line: NumberLine) -> Result<Vec<T>> {
    if !(mu > T::zero()) || !(weber > T::zero()) {
        return Err(Error::Domain(format!("Gaussian mean {mu} and Weber fraction {weber} must be positive")));
    }
    let sigma = weber * mu;
    let two = T::lit(2.0);
    let logs: Vec<T> = line
        .numbers()
        .map(|n| {
            let z = T::count(n as usize) - mu;
            -(z * z) / (two * sigma * sigma)
        })
        .collect();
    let top = logs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut row: Vec<T> = logs.into_iter().map(|l| (l - top).exp()).collect();
    normalize(&mut row)?;
    Ok(row)
}
