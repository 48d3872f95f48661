//! From trained senders to numeral systems and their communication cost.

use rand::Rng;

use crate::domain::{NamingDistribution, NeedPrior, NumeralSystem};
use crate::error::{Error, Result};
use crate::neural::AgentNet;
use crate::scalar::{argmax_lowest, Real};

/// Row-peak threshold separating exact from approximate systems.
pub const EXACT_THRESHOLD: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    Exact,
    Approximate,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Exact => "exact",
            SystemKind::Approximate => "approximate",
        }
    }
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(SystemKind::Exact),
            "approximate" | "approx" => Ok(SystemKind::Approximate),
            other => Err(Error::Parse(format!("unknown system kind `{other}`"))),
        }
    }
}

/// Monte-Carlo estimate of `p(w|n)`: for every number, `m` greedy decisions
/// of the sender under fresh dropout masks, without learning.
pub fn estimate_naming<T: Real, R: Rng + ?Sized>(sender: &AgentNet<T>, m: usize, rng: &mut R) -> Result<NamingDistribution<T>> {
    if m == 0 {
        return Err(Error::Domain("need at least one Monte-Carlo round per number".into()));
    }
    let words = sender.outputs();
    let inv = T::one() / T::count(m);
    let mut rows = Vec::with_capacity(sender.inputs());
    for n_idx in 0..sender.inputs() {
        let mut counts = vec![0usize; words];
        for _ in 0..m {
            let mask = sender.sample_mask(rng);
            counts[sender.act(n_idx, Some(&mask))?] += 1;
        }
        rows.push(counts.into_iter().map(|c| T::count(c) * inv).collect());
    }
    NamingDistribution::new(rows)
}

/// Exact when every number puts more than `threshold` mass on one word.
pub fn classify_with<T: Real>(naming: &NamingDistribution<T>, threshold: T) -> SystemKind {
    let exact = naming
        .rows()
        .iter()
        .all(|row| row.iter().copied().fold(T::zero(), T::max) > threshold);
    if exact {
        SystemKind::Exact
    } else {
        SystemKind::Approximate
    }
}

pub fn classify<T: Real>(naming: &NamingDistribution<T>) -> SystemKind {
    classify_with(naming, T::lit(EXACT_THRESHOLD))
}

/// Per-number most likely word, lowest index on ties.
pub fn mode_system<T: Real>(naming: &NamingDistribution<T>) -> NumeralSystem {
    let assignment = naming.rows().iter().map(|row| argmax_lowest(row)).collect();
    NumeralSystem::new(assignment).expect("naming has at least one row")
}

/// Bayesian listener `L_w(n) = p(w|n) p(n) / sum_n' p(w|n') p(n')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ListenerPosterior<T = f64> {
    rows: Vec<Vec<T>>,
    marginal: Vec<T>,
}

impl<T: Real> ListenerPosterior<T> {
    /// Posterior over numbers for word `w`; `None` when `w` is never used.
    pub fn row(&self, w: usize) -> Option<&[T]> {
        self.is_reachable(w).then(|| self.rows[w].as_slice())
    }

    pub fn is_reachable(&self, w: usize) -> bool {
        self.marginal[w] > T::zero()
    }

    pub fn num_words(&self) -> usize {
        self.rows.len()
    }

    /// Word marginal `p(w)`.
    pub fn marginal(&self) -> &[T] {
        &self.marginal
    }

    /// Rows of all reachable words.
    pub fn reachable_rows(&self) -> impl Iterator<Item = (usize, &[T])> {
        (0..self.rows.len()).filter_map(move |w| self.row(w).map(|r| (w, r)))
    }
}

pub fn listener_posterior<T: Real>(naming: &NamingDistribution<T>, prior: &NeedPrior<T>) -> Result<ListenerPosterior<T>> {
    let marginal = naming.word_marginal(prior)?;
    let rows = (0..naming.num_words())
        .map(|w| {
            let mw = marginal[w];
            (0..naming.num_numbers())
                .map(|n| if mw > T::zero() { naming.get(n, w) * prior.probs()[n] / mw } else { T::zero() })
                .collect()
        })
        .collect();
    Ok(ListenerPosterior { rows, marginal })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport<T = f64> {
    pub cost_bits: T,
    pub term_count: usize,
    pub kind: SystemKind,
}

/// Expected surprisal `-sum p(w|n) p(n) log L_w(n)` in the given log base.
pub fn expected_surprisal<T: Real>(naming: &NamingDistribution<T>, prior: &NeedPrior<T>, base: T) -> Result<T> {
    let post = listener_posterior(naming, prior)?;
    let mut cost = T::zero();
    for (n, (row, &p)) in naming.rows().iter().zip(prior.probs()).enumerate() {
        for (w, &q) in row.iter().enumerate() {
            let joint = q * p;
            if joint > T::zero() {
                cost = cost - joint * post.rows[w][n].log(base);
            }
        }
    }
    // Rounding can leave -0.0 or a hair below zero for perfect systems.
    Ok(cost.max(T::zero()))
}

/// Communication cost in bits, with term count and system kind.
pub fn comm_cost<T: Real>(naming: &NamingDistribution<T>, prior: &NeedPrior<T>) -> Result<CostReport<T>> {
    let cost_bits = expected_surprisal(naming, prior, T::lit(2.0))?;
    let term_count = naming.word_marginal(prior)?.iter().filter(|&&m| m > T::zero()).count();
    Ok(CostReport { cost_bits, term_count, kind: classify(naming) })
}

/// Cost of an exact system: `sum_cells mass(c) * H(prior | c)`.
pub fn partition_cost<T: Real>(system: &NumeralSystem, prior: &NeedPrior<T>) -> Result<T> {
    if system.len() != prior.len() {
        return Err(Error::Shape { expected: prior.len(), got: system.len() });
    }
    let p = prior.probs();
    let mut cost = T::zero();
    for cell in system.cells() {
        let mass: T = cell.iter().map(|&i| p[i]).sum();
        if mass > T::zero() {
            for &i in &cell {
                if p[i] > T::zero() {
                    cost = cost - p[i] * (p[i] / mass).log2();
                }
            }
        }
    }
    Ok(cost.max(T::zero()))
}
