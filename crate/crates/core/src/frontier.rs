//! Best- and worst-case hypothetical numeral systems per term count.
//!
//! Exact systems are arbitrary surjective assignments of numbers to `k`
//! words, improved by moving one number at a time. Approximate systems place
//! `k` Gaussian words (spread proportional to their mean) on a half-integer
//! grid and move one mean at a time. Both searches are repeated from random
//! starts and the extreme local optimum is kept.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{NeedPrior, NumeralSystem};
use crate::error::{Error, Result};
use crate::scalar::{xlog2x, Real};

/// Improvement threshold for accepting a local move.
pub const MOVE_DELTA: f64 = 1e-12;

/// Weber fraction used for hypothetical approximate words.
pub const DEFAULT_WEBER: f64 = 0.31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Extreme {
    Best,
    Worst,
}

impl Extreme {
    /// Does `candidate` beat `incumbent` by more than `delta`?
    fn improves<T: Real>(self, candidate: T, incumbent: T, delta: T) -> bool {
        match self {
            Extreme::Best => candidate < incumbent - delta,
            Extreme::Worst => candidate > incumbent + delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrontierSystem {
    Exact(NumeralSystem),
    /// Word means of a Gaussian system.
    Approximate(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint<T = f64> {
    pub terms: usize,
    pub cost_bits: T,
    pub system: FrontierSystem,
    pub mode: Extreme,
}

fn check_terms(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("term count {k} outside 1..={n}")));
    }
    Ok(())
}

/// Draw one seed per restart up front so the result does not depend on how
/// restarts are scheduled across threads.
fn restart_seeds<R: Rng + ?Sized>(restarts: usize, rng: &mut R) -> Vec<u64> {
    (0..restarts.max(1)).map(|_| rng.random()).collect()
}

fn pick_extreme<T: Real, S>(mode: Extreme, results: Vec<(T, S)>) -> (T, S) {
    let mut it = results.into_iter();
    let mut best = it.next().expect("at least one restart");
    for cand in it {
        if mode.improves(cand.0, best.0, T::zero()) {
            best = cand;
        }
    }
    best
}

/// Incremental cost bookkeeping for an exact partition:
/// `cost = H(prior) + sum_c m_c log2 m_c`.
struct ExactState<'a, T> {
    probs: &'a [T],
    entropy: T,
    assignment: Vec<usize>,
    mass: Vec<T>,
    size: Vec<usize>,
}

impl<'a, T: Real> ExactState<'a, T> {
    fn new(probs: &'a [T], assignment: Vec<usize>, k: usize) -> Self {
        let mut mass = vec![T::zero(); k];
        let mut size = vec![0; k];
        for (&w, &p) in assignment.iter().zip(probs) {
            mass[w] = mass[w] + p;
            size[w] += 1;
        }
        let entropy = crate::scalar::entropy_bits(probs);
        Self { probs, entropy, assignment, mass, size }
    }

    fn cost(&self) -> T {
        (self.entropy + self.mass.iter().map(|&m| xlog2x(m)).sum::<T>()).max(T::zero())
    }

    fn move_delta(&self, n: usize, to: usize) -> T {
        let from = self.assignment[n];
        let p = self.probs[n];
        let (ma, mb) = (self.mass[from], self.mass[to]);
        xlog2x(ma - p) + xlog2x(mb + p) - xlog2x(ma) - xlog2x(mb)
    }

    fn apply(&mut self, n: usize, to: usize) {
        let from = self.assignment[n];
        let p = self.probs[n];
        self.mass[from] = self.mass[from] - p;
        self.mass[to] = self.mass[to] + p;
        self.size[from] -= 1;
        self.size[to] += 1;
        self.assignment[n] = to;
    }

    /// Apply the steepest single-number move improving by more than
    /// `MOVE_DELTA`; moves never empty a word, so surjectivity is kept.
    fn step(&mut self, mode: Extreme) -> bool {
        let delta = T::lit(MOVE_DELTA);
        let k = self.mass.len();
        let mut best: Option<(usize, usize, T)> = None;
        for n in 0..self.assignment.len() {
            let from = self.assignment[n];
            if self.size[from] < 2 {
                continue;
            }
            for to in (0..k).filter(|&w| w != from) {
                let d = self.move_delta(n, to);
                let incumbent = best.map_or(T::zero(), |b| b.2);
                if mode.improves(d, incumbent, delta) {
                    best = Some((n, to, d));
                }
            }
        }
        match best {
            Some((n, to, _)) => {
                self.apply(n, to);
                true
            }
            None => false,
        }
    }

    /// Step until a local optimum; returns the number of moves.
    fn climb(&mut self, mode: Extreme) -> usize {
        let mut steps = 0;
        while self.step(mode) {
            steps += 1;
        }
        steps
    }
}

fn random_surjection<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = if pos < k { pos } else { rng.random_range(0..k) };
    }
    assignment
}

/// Hill-climb an exact system from `start`; returns (cost, system).
pub fn climb_exact<T: Real>(prior: &NeedPrior<T>, start: &NumeralSystem, mode: Extreme) -> Result<(T, NumeralSystem)> {
    if start.len() != prior.len() {
        return Err(Error::Shape { expected: prior.len(), got: start.len() });
    }
    let canon = start.canonical();
    let k = canon.term_count();
    let mut state = ExactState::new(prior.probs(), canon.assignment().to_vec(), k);
    state.climb(mode);
    Ok((state.cost(), NumeralSystem::new(state.assignment)?.canonical()))
}

/// Extreme local optimum over `restarts` random exact systems with `k` words.
pub fn optimize_exact<T: Real, R: Rng + ?Sized>(
    k: usize,
    prior: &NeedPrior<T>,
    mode: Extreme,
    restarts: usize,
    rng: &mut R,
) -> Result<FrontierPoint<T>> {
    let n = prior.len();
    check_terms(k, n)?;
    let results: Vec<(T, Vec<usize>)> = restart_seeds(restarts, rng)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = ExactState::new(prior.probs(), random_surjection(n, k, &mut rng), k);
            state.climb(mode);
            (state.cost(), state.assignment)
        })
        .collect();
    let (cost_bits, assignment) = pick_extreme(mode, results);
    Ok(FrontierPoint { terms: k, cost_bits, system: FrontierSystem::Exact(NumeralSystem::new(assignment)?.canonical()), mode })
}

/// Exact frontier for `k = 1..=max_k`. In `Best` mode each `k` is also
/// seeded with the `k - 1` optimum plus its best single-number split, so the
/// returned best costs never increase with `k`.
pub fn exact_frontier<T: Real, R: Rng + ?Sized>(
    prior: &NeedPrior<T>,
    max_k: usize,
    mode: Extreme,
    restarts: usize,
    rng: &mut R,
) -> Result<Vec<FrontierPoint<T>>> {
    check_terms(max_k, prior.len())?;
    let mut points: Vec<FrontierPoint<T>> = Vec::with_capacity(max_k);
    for k in 1..=max_k {
        let mut point = optimize_exact(k, prior, mode, restarts, rng)?;
        if let (Extreme::Best, Some(prev)) = (mode, points.last()) {
            if let FrontierSystem::Exact(sys) = &prev.system {
                if let Some(split) = best_split(sys, prior) {
                    let (cost, climbed) = climb_exact(prior, &split, mode)?;
                    if cost < point.cost_bits {
                        point.cost_bits = cost;
                        point.system = FrontierSystem::Exact(climbed);
                    }
                }
            }
        }
        points.push(point);
    }
    Ok(points)
}

/// Cheapest way to give one number its own new word.
fn best_split<T: Real>(system: &NumeralSystem, prior: &NeedPrior<T>) -> Option<NumeralSystem> {
    let canon = system.canonical();
    let k = canon.term_count();
    let mut state = ExactState::new(prior.probs(), canon.assignment().to_vec(), k + 1);
    let mut best: Option<(usize, T)> = None;
    for n in 0..canon.len() {
        if state.size[state.assignment[n]] < 2 {
            continue;
        }
        let d = state.move_delta(n, k);
        if best.is_none_or(|b| d < b.1) {
            best = Some((n, d));
        }
    }
    best.map(|(n, _)| {
        state.apply(n, k);
        NumeralSystem::new(state.assignment).expect("non-empty")
    })
}

/// Grid of admissible Gaussian word means: `1.0, 1.5, ..., hi`.
pub fn mean_grid(hi: u32) -> Vec<f64> {
    (0..=(2 * (hi - 1))).map(|i| 1.0 + 0.5 * i as f64).collect()
}

/// Gaussian density of `n` for a word with mean `mu` and spread `weber * mu`.
pub fn gaussian_density(n: f64, mu: f64, weber: f64) -> f64 {
    gaussian_log_density(n, mu, weber).exp()
}

pub fn gaussian_log_density(n: f64, mu: f64, weber: f64) -> f64 {
    let sigma = weber * mu;
    let z = (n - mu) / sigma;
    -0.5 * z * z - (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
}

/// `p(w|n)` for Gaussian words, normalized per number in log space so that
/// far tails do not underflow to an all-zero row.
pub fn gaussian_naming_rows(means: &[f64], weber: f64, numbers: usize) -> Vec<Vec<f64>> {
    (1..=numbers)
        .map(|n| {
            let logs: Vec<f64> = means.iter().map(|&mu| gaussian_log_density(n as f64, mu, weber)).collect();
            softmax(&logs)
        })
        .collect()
}

fn softmax(logs: &[f64]) -> Vec<f64> {
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logs.iter().map(|&l| (l - top).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Communication cost of the Gaussian system with the given word means.
/// `p(w|n)` is proportional to each word's density at `n`.
pub fn approx_cost<T: Real>(means: &[f64], weber: f64, prior: &NeedPrior<T>) -> Result<T> {
    if means.is_empty() {
        return Err(Error::Empty("approximate system"));
    }
    if means.iter().any(|&m| !(m > 0.0)) || !(weber > 0.0) {
        return Err(Error::Domain("Gaussian means and Weber fraction must be positive".into()));
    }
    let table: Vec<Vec<f64>> = means
        .iter()
        .map(|&mu| (1..=prior.len()).map(|n| gaussian_log_density(n as f64, mu, weber)).collect())
        .collect();
    let cols: Vec<&[f64]> = table.iter().map(Vec::as_slice).collect();
    Ok(soft_cost(&cols, prior.probs()))
}

/// Cost of the soft system whose word log-likelihoods are the columns
/// `log_dens`.
fn soft_cost<T: Real>(log_dens: &[&[f64]], p: &[T]) -> T {
    let k = log_dens.len();
    let mut joint = vec![T::zero(); k * p.len()];
    let mut marginal = vec![T::zero(); k];
    let mut logs = vec![0.0; k];
    for (n, &pn) in p.iter().enumerate() {
        for (l, d) in logs.iter_mut().zip(log_dens) {
            *l = d[n];
        }
        for (w, q) in softmax(&logs).into_iter().enumerate() {
            let j = T::lit(q) * pn;
            joint[w * p.len() + n] = j;
            marginal[w] = marginal[w] + j;
        }
    }
    // C = -sum_{w,n} j log2(j / m_w) = -sum j log2 j + sum_w m_w log2 m_w
    let mut cost = T::zero();
    for w in 0..k {
        cost = cost + xlog2x(marginal[w]);
        for n in 0..p.len() {
            cost = cost - xlog2x(joint[w * p.len() + n]);
        }
    }
    cost.max(T::zero())
}

/// Extreme local optimum over `restarts` random Gaussian systems with `k`
/// distinct means on the half-integer grid.
pub fn optimize_approx<T: Real, R: Rng + ?Sized>(
    k: usize,
    prior: &NeedPrior<T>,
    mode: Extreme,
    restarts: usize,
    weber: f64,
    rng: &mut R,
) -> Result<FrontierPoint<T>> {
    let n = prior.len();
    check_terms(k, n)?;
    if !(weber > 0.0) {
        return Err(Error::Domain(format!("Weber fraction {weber} must be positive")));
    }
    let grid = mean_grid(n as u32);
    let table: Vec<Vec<f64>> = grid
        .iter()
        .map(|&mu| (1..=n).map(|x| gaussian_log_density(x as f64, mu, weber)).collect())
        .collect();
    let p = prior.probs();
    let delta = T::lit(MOVE_DELTA);
    let results: Vec<(T, Vec<usize>)> = restart_seeds(restarts, rng)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut slots: Vec<usize> = rand::seq::index::sample(&mut rng, grid.len(), k).into_vec();
            let eval = |slots: &[usize]| {
                let cols: Vec<&[f64]> = slots.iter().map(|&g| table[g].as_slice()).collect();
                soft_cost(&cols, p)
            };
            let mut cost = eval(&slots);
            loop {
                let mut best: Option<(usize, usize, T)> = None;
                for w in 0..k {
                    for g in 0..grid.len() {
                        if slots.contains(&g) {
                            continue;
                        }
                        let old = slots[w];
                        slots[w] = g;
                        let c = eval(&slots);
                        slots[w] = old;
                        let incumbent = best.map_or(cost, |b| b.2);
                        if mode.improves(c, incumbent, delta) {
                            best = Some((w, g, c));
                        }
                    }
                }
                match best {
                    Some((w, g, c)) => {
                        slots[w] = g;
                        cost = c;
                    }
                    None => break,
                }
            }
            slots.sort_unstable();
            (cost, slots)
        })
        .collect();
    let (cost_bits, slots) = pick_extreme(mode, results);
    let means = slots.into_iter().map(|g| grid[g]).collect();
    Ok(FrontierPoint { terms: k, cost_bits, system: FrontierSystem::Approximate(means), mode })
}

/// Best and worst cost per term count.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeRow<T = f64> {
    pub terms: usize,
    pub best: Option<T>,
    pub worst: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Envelope<T = f64> {
    rows: Vec<EnvelopeRow<T>>,
}

impl<T: Real> Envelope<T> {
    pub fn rows(&self) -> &[EnvelopeRow<T>] {
        &self.rows
    }

    pub fn get(&self, terms: usize) -> Option<&EnvelopeRow<T>> {
        self.rows.iter().find(|r| r.terms == terms)
    }

    /// Best curve made non-increasing: a system with fewer words can always
    /// be refined into one with more words at no extra cost.
    pub fn monotone(mut self) -> Self {
        let mut running: Option<T> = None;
        for row in self.rows.iter_mut() {
            if let Some(b) = row.best {
                let m = running.map_or(b, |r| r.min(b));
                row.best = Some(m);
                running = Some(m);
            } else if running.is_some() {
                row.best = running;
            }
        }
        self
    }
}

/// Per-term-count minimum over `Best` points and maximum over `Worst` points.
pub fn build_envelope<T: Real>(points: &[FrontierPoint<T>]) -> Result<Envelope<T>> {
    if points.is_empty() {
        return Err(Error::Empty("frontier points"));
    }
    let mut table: BTreeMap<usize, EnvelopeRow<T>> = BTreeMap::new();
    for p in points {
        let row = table.entry(p.terms).or_insert(EnvelopeRow { terms: p.terms, best: None, worst: None });
        match p.mode {
            Extreme::Best => row.best = Some(row.best.map_or(p.cost_bits, |b| b.min(p.cost_bits))),
            Extreme::Worst => row.worst = Some(row.worst.map_or(p.cost_bits, |w| w.max(p.cost_bits))),
        }
    }
    Ok(Envelope { rows: table.into_values().collect() })
}
