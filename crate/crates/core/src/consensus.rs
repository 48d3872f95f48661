//! Consensus partition of many exact systems by correlation clustering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::NumeralSystem;
use crate::error::{Error, Result};

/// Signed co-naming counts: +1 for every system that gives `i` and `j` the
/// same word, -1 for every system that does not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementMatrix {
    size: usize,
    systems: usize,
    cells: Vec<i64>,
}

impl AgreementMatrix {
    pub fn new(size: usize) -> Self {
        Self { size, systems: 0, cells: vec![0; size * size] }
    }

    /// Build from explicit entries; the matrix must be square and symmetric.
    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::Empty("agreement matrix"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::Shape { expected: size, got: row.len() });
            }
            for j in 0..i {
                if row[j] != rows[j][i] {
                    return Err(Error::Domain(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        let systems = rows[0][0].max(0) as usize;
        Ok(Self { size, systems, cells: rows.into_iter().flatten().collect() })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn systems(&self) -> usize {
        self.systems
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.cells[i * self.size + j]
    }

    pub fn accumulate(&mut self, system: &NumeralSystem) -> Result<()> {
        if system.len() != self.size {
            return Err(Error::Shape { expected: self.size, got: system.len() });
        }
        let a = system.assignment();
        for i in 0..self.size {
            for j in 0..self.size {
                self.cells[i * self.size + j] += if a[i] == a[j] { 1 } else { -1 };
            }
        }
        self.systems += 1;
        Ok(())
    }

    /// Agreement of a labelling: within-cluster weight minus between-cluster
    /// weight over unordered pairs.
    pub fn objective(&self, labels: &[usize]) -> i64 {
        let mut total = 0;
        for i in 0..self.size {
            for j in i + 1..self.size {
                let m = self.get(i, j);
                total += if labels[i] == labels[j] { m } else { -m };
            }
        }
        total
    }

    fn weight_to(&self, i: usize, members: &[usize]) -> i64 {
        members.iter().filter(|&&j| j != i).map(|&j| self.get(i, j)).sum()
    }

    fn cross(&self, a: &[usize], b: &[usize]) -> i64 {
        a.iter().map(|&i| self.weight_to(i, b)).sum()
    }
}

fn clusters_of(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut slot: Vec<Option<usize>> = vec![None; labels.len().max(labels.iter().max().map_or(0, |m| m + 1))];
    for (i, &l) in labels.iter().enumerate() {
        let c = *slot[l].get_or_insert_with(|| {
            out.push(Vec::new());
            out.len() - 1
        });
        out[c].push(i);
    }
    out
}

enum Move {
    Relocate(usize, Option<usize>),
    Merge(usize, usize),
    /// Move these members to a fresh cluster.
    Split(Vec<usize>),
}

/// Split a cluster around its most negative internal pair; every other
/// member joins whichever endpoint it agrees with more (ties to the first).
fn weakest_split(m: &AgreementMatrix, cluster: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut tie = (cluster[0], cluster[1]);
    for (x, &i) in cluster.iter().enumerate() {
        for &j in &cluster[x + 1..] {
            if m.get(i, j) < m.get(tie.0, tie.1) {
                tie = (i, j);
            }
        }
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for &x in cluster {
        if x == tie.0 || (x != tie.1 && m.get(x, tie.0) >= m.get(x, tie.1)) {
            a.push(x);
        } else {
            b.push(x);
        }
    }
    (a, b)
}

/// Best single improving move, or `None` at a local optimum. Gains are in
/// objective units (twice the weight moved across the cut).
fn best_move(m: &AgreementMatrix, labels: &[usize]) -> Option<Move> {
    let clusters = clusters_of(labels);
    let home: Vec<usize> = {
        let mut h = vec![0; labels.len()];
        for (c, members) in clusters.iter().enumerate() {
            for &i in members {
                h[i] = c;
            }
        }
        h
    };
    let mut cands: Vec<(i64, Move)> = Vec::new();
    let mut offer = |gain: i64, mv: Move| cands.push((gain, mv));
    for i in 0..labels.len() {
        let own = m.weight_to(i, &clusters[home[i]]);
        for (c, members) in clusters.iter().enumerate() {
            if c != home[i] {
                offer(2 * (m.weight_to(i, members) - own), Move::Relocate(i, Some(c)));
            }
        }
        if clusters[home[i]].len() > 1 {
            offer(-2 * own, Move::Relocate(i, None));
        }
    }
    for a in 0..clusters.len() {
        for b in a + 1..clusters.len() {
            offer(2 * m.cross(&clusters[a], &clusters[b]), Move::Merge(a, b));
        }
    }
    for members in clusters.iter().filter(|c| c.len() > 1) {
        let (a, b) = weakest_split(m, members);
        offer(-2 * m.cross(&a, &b), Move::Split(b));
    }
    let mut best: Option<(i64, Move)> = None;
    for (gain, mv) in cands {
        if gain > 0 && best.as_ref().is_none_or(|b| gain > b.0) {
            best = Some((gain, mv));
        }
    }
    // Translate cluster slots back to the caller's labels.
    best.map(|b| match b.1 {
        Move::Relocate(i, Some(c)) => Move::Relocate(i, Some(labels[clusters[c][0]])),
        Move::Merge(a, b) => Move::Merge(labels[clusters[a][0]], labels[clusters[b][0]]),
        other => other,
    })
}

fn apply(labels: &mut [usize], mv: Move) {
    let fresh = labels.iter().max().map_or(0, |x| x + 1);
    match mv {
        Move::Relocate(i, target) => labels[i] = target.unwrap_or(fresh),
        Move::Merge(a, b) => labels.iter_mut().filter(|l| **l == b).for_each(|l| *l = a),
        Move::Split(b) => b.iter().for_each(|&i| labels[i] = fresh),
    }
}

/// Steepest-ascent local search from `labels`; returns the local optimum.
pub fn local_search(m: &AgreementMatrix, mut labels: Vec<usize>) -> Vec<usize> {
    while let Some(mv) = best_move(m, &labels) {
        apply(&mut labels, mv);
    }
    labels
}

/// Best local optimum over `restarts` random starts, each with a uniformly
/// drawn cluster count in `1..=size`. Labels are canonical.
pub fn correlation_cluster<R: Rng + ?Sized>(m: &AgreementMatrix, restarts: usize, rng: &mut R) -> Result<NumeralSystem> {
    let n = m.size();
    if n == 0 {
        return Err(Error::Empty("agreement matrix"));
    }
    let seeds: Vec<u64> = (0..restarts.max(1)).map(|_| rng.random()).collect();
    let results: Vec<(i64, Vec<usize>)> = seeds
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.random_range(1..=n);
            let start = (0..n).map(|_| rng.random_range(0..k)).collect();
            let labels = local_search(m, start);
            (m.objective(&labels), labels)
        })
        .collect();
    let mut best = &results[0];
    for r in &results[1..] {
        if r.0 > best.0 {
            best = r;
        }
    }
    Ok(NumeralSystem::new(best.1.clone())?.canonical())
}
