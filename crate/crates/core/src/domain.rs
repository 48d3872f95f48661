//! Shared domain types: the number line, vocabulary, rewards, need priors,
//! naming distributions and exact numeral systems.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// The interval of integers `[lo, hi]` the agents talk about. `lo` is always 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NumberLine {
    hi: u32,
}

impl NumberLine {
    pub const LO: u32 = 1;

    pub fn new(hi: u32) -> Result<Self> {
        if hi < Self::LO {
            return Err(Error::Domain(format!("number line upper bound {hi} < 1")));
        }
        Ok(Self { hi })
    }

    pub fn lo(&self) -> u32 {
        Self::LO
    }

    pub fn hi(&self) -> u32 {
        self.hi
    }

    /// Number of integers on the line, `|N|`.
    pub fn size(&self) -> usize {
        (self.hi - Self::LO + 1) as usize
    }

    pub fn contains(&self, n: u32) -> bool {
        (Self::LO..=self.hi).contains(&n)
    }

    /// Zero-based position of `n`.
    pub fn index_of(&self, n: u32) -> Result<usize> {
        if self.contains(n) {
            Ok((n - Self::LO) as usize)
        } else {
            Err(Error::NumberOutOfRange { n: n as i64, lo: Self::LO as i64, hi: self.hi as i64 })
        }
    }

    /// The number at zero-based position `idx`.
    pub fn number_at(&self, idx: usize) -> u32 {
        debug_assert!(idx < self.size());
        Self::LO + idx as u32
    }

    pub fn numbers(&self) -> impl Iterator<Item = u32> {
        Self::LO..=self.hi
    }
}

impl Default for NumberLine {
    fn default() -> Self {
        Self { hi: 20 }
    }
}

/// The sender's word inventory. Words are plain indices `0..size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vocabulary {
    size: usize,
}

impl Vocabulary {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Domain("vocabulary must contain at least one word".into()));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self { size: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardKind {
    Linear,
    Inverse,
    Exponential,
}

impl RewardKind {
    pub const ALL: [RewardKind; 3] = [RewardKind::Linear, RewardKind::Inverse, RewardKind::Exponential];

    /// Reward as a function of the guess distance `|n - n_hat|`.
    #[inline]
    pub fn of_distance<T: Real>(self, distance: u32, line_size: usize) -> T {
        let d = T::count(distance as usize);
        match self {
            RewardKind::Linear => T::one() - d / T::count(line_size),
            RewardKind::Inverse => T::one() / (T::one() + d),
            RewardKind::Exponential => (-d).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Linear => "linear",
            RewardKind::Inverse => "inverse",
            RewardKind::Exponential => "exp",
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(RewardKind::Linear),
            "inverse" => Ok(RewardKind::Inverse),
            "exp" | "exponential" => Ok(RewardKind::Exponential),
            other => Err(Error::Parse(format!("unknown reward kind `{other}`"))),
        }
    }
}

/// Shared reward for a sender holding `n` and a listener guessing `n_hat`.
pub fn reward<T: Real>(kind: RewardKind, n: u32, n_hat: u32, line: NumberLine) -> Result<T> {
    line.index_of(n)?;
    line.index_of(n_hat)?;
    Ok(kind.of_distance(n.abs_diff(n_hat), line.size()))
}

fn check_distribution<T: Real>(p: &[T], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::NotNormalized(format!("{what} is empty")));
    }
    if let Some(x) = p.iter().find(|x| !(**x >= T::zero()) || !x.is_finite()) {
        return Err(Error::NotNormalized(format!("{what} has invalid entry {x}")));
    }
    let sum: T = p.iter().copied().sum();
    if (sum - T::one()).abs() > T::norm_tol() {
        return Err(Error::NotNormalized(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// Rescale a non-negative vector to sum to one.
pub fn normalize<T: Real>(v: &mut [T]) -> Result<()> {
    let sum: T = v.iter().copied().sum();
    if !(sum > T::zero()) || !sum.is_finite() {
        return Err(Error::NotNormalized(format!("cannot normalize vector with sum {sum}")));
    }
    v.iter_mut().for_each(|x| *x = *x / sum);
    Ok(())
}

/// Need probability `p(n)` over the number line.
#[derive(Debug, Clone, PartialEq)]
pub struct NeedPrior<T = f64> {
    probs: Vec<T>,
}

impl<T: Real> NeedPrior<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        check_distribution(&probs, "need prior")?;
        Ok(Self { probs })
    }

    /// Normalize arbitrary non-negative weights into a prior.
    pub fn from_weights(mut weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= T::zero())) {
            return Err(Error::Domain("prior weights must be non-negative".into()));
        }
        normalize(&mut weights)?;
        Self::new(weights)
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy_bits(&self) -> T {
        crate::scalar::entropy_bits(&self.probs)
    }

    pub fn into_inner(self) -> Vec<T> {
        self.probs
    }
}

/// Sender lexicon `p(w|n)`: one row per number, one column per word.
#[derive(Debug, Clone, PartialEq)]
pub struct NamingDistribution<T = f64> {
    words: usize,
    rows: Vec<Vec<T>>,
}

impl<T: Real> NamingDistribution<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let words = rows.first().map(Vec::len).ok_or(Error::Empty("naming distribution"))?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != words {
                return Err(Error::Shape { expected: words, got: row.len() });
            }
            check_distribution(row, &format!("naming row {i}"))?;
        }
        Ok(Self { words, rows })
    }

    /// Normalize each row of non-negative weights.
    pub fn from_weights(mut rows: Vec<Vec<T>>) -> Result<Self> {
        for row in rows.iter_mut() {
            normalize(row)?;
        }
        Self::new(rows)
    }

    pub fn num_numbers(&self) -> usize {
        self.rows.len()
    }

    pub fn num_words(&self) -> usize {
        self.words
    }

    pub fn row(&self, n_idx: usize) -> &[T] {
        &self.rows[n_idx]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    /// `p(w|n)`.
    #[inline]
    pub fn get(&self, n_idx: usize, w: usize) -> T {
        self.rows[n_idx][w]
    }

    /// Word marginal `p(w) = sum_n p(w|n) p(n)`.
    pub fn word_marginal(&self, prior: &NeedPrior<T>) -> Result<Vec<T>> {
        if prior.len() != self.num_numbers() {
            return Err(Error::Shape { expected: self.num_numbers(), got: prior.len() });
        }
        let mut m = vec![T::zero(); self.words];
        for (row, &p) in self.rows.iter().zip(prior.probs()) {
            for (acc, &q) in m.iter_mut().zip(row) {
                *acc = *acc + q * p;
            }
        }
        Ok(m)
    }

    /// Serialize as CSV with header `n,w0,...,w{K-1}`.
    pub fn to_csv(&self, line: NumberLine) -> String {
        let mut out = String::from("n");
        for w in 0..self.words {
            out.push_str(&format!(",w{w}"));
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&line.number_at(i).to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::Empty("naming csv"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"n") || cols.len() < 2 {
            return Err(Error::Parse(format!("bad naming header `{header}`")));
        }
        for (w, c) in cols[1..].iter().enumerate() {
            if *c != format!("w{w}") {
                return Err(Error::Parse(format!("bad naming column `{c}`")));
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let n: u32 = fields[0].parse().map_err(|_| Error::Parse(format!("bad number `{}`", fields[0])))?;
            if n as usize != i + 1 {
                return Err(Error::Parse(format!("naming rows out of order at n={n}")));
            }
            let row = fields[1..]
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| Error::Parse(format!("bad probability `{s}`")))
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }
}

/// An exact numeral system: each number is named by exactly one word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NumeralSystem {
    assignment: Vec<usize>,
}

impl NumeralSystem {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::Empty("numeral system"));
        }
        Ok(Self { assignment })
    }

    /// Check that every word index is below `words`.
    pub fn with_vocabulary(assignment: Vec<usize>, words: usize) -> Result<Self> {
        if let Some(&w) = assignment.iter().find(|&&w| w >= words) {
            return Err(Error::IndexOutOfRange { index: w, len: words });
        }
        Self::new(assignment)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn word_of(&self, n_idx: usize) -> usize {
        self.assignment[n_idx]
    }

    /// Number of distinct words in use.
    pub fn term_count(&self) -> usize {
        let mut seen: Vec<usize> = self.assignment.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Relabel words `0, 1, ...` in order of first appearance along the line.
    pub fn canonical(&self) -> NumeralSystem {
        let mut map: Vec<Option<usize>> = vec![None; self.assignment.iter().max().map_or(0, |m| m + 1)];
        let mut next = 0;
        let assignment = self
            .assignment
            .iter()
            .map(|&w| {
                *map[w].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        NumeralSystem { assignment }
    }

    /// Cells of the partition, each a sorted list of number indices, in
    /// canonical order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let canon = self.canonical();
        let mut cells = vec![Vec::new(); canon.term_count()];
        for (i, &w) in canon.assignment.iter().enumerate() {
            cells[w].push(i);
        }
        cells
    }

    /// Deterministic naming distribution with `words` columns.
    pub fn to_naming<T: Real>(&self, words: usize) -> Result<NamingDistribution<T>> {
        let rows = self
            .assignment
            .iter()
            .map(|&w| {
                if w >= words {
                    return Err(Error::IndexOutOfRange { index: w, len: words });
                }
                let mut row = vec![T::zero(); words];
                row[w] = T::one();
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        NamingDistribution::new(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> NumberLine {
        NumberLine::default()
    }

    #[test]
    fn reward_examples() {
        let r: f64 = reward(RewardKind::Linear, 4, 4, line()).unwrap();
        assert_eq!(r, 1.0);
        let r: f64 = reward(RewardKind::Linear, 1, 20, line()).unwrap();
        assert!((r - 0.05).abs() < 1e-15);
        let r: f64 = reward(RewardKind::Inverse, 3, 5, line()).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
        let r: f64 = reward(RewardKind::Exponential, 7, 7, line()).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn reward_rejects_out_of_range() {
        assert!(matches!(
            reward::<f64>(RewardKind::Linear, 0, 3, line()),
            Err(Error::NumberOutOfRange { .. })
        ));
        assert!(reward::<f64>(RewardKind::Exponential, 3, 21, line()).is_err());
    }

    #[test]
    fn reward_kind_parses() {
        assert_eq!("exp".parse::<RewardKind>().unwrap(), RewardKind::Exponential);
        assert_eq!("Linear".parse::<RewardKind>().unwrap(), RewardKind::Linear);
        assert!("quadratic".parse::<RewardKind>().is_err());
    }

    #[test]
    fn prior_validation() {
        assert!(NeedPrior::new(vec![0.5, 0.5]).is_ok());
        assert!(NeedPrior::new(vec![0.5, 0.6]).is_err());
        assert!(NeedPrior::new(vec![-0.5, 1.5]).is_err());
        let p = NeedPrior::from_weights(vec![1.0, 3.0]).unwrap();
        assert_eq!(p.probs(), &[0.25, 0.75]);
    }

    #[test]
    fn naming_rows_must_be_distributions() {
        assert!(NamingDistribution::new(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).is_ok());
        assert!(NamingDistribution::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(NamingDistribution::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
    }

    #[test]
    fn naming_csv_round_trip() {
        let line = NumberLine::new(3).unwrap();
        let naming = NamingDistribution::new(vec![vec![0.25, 0.75], vec![1.0, 0.0], vec![0.1, 0.9]]).unwrap();
        let csv = naming.to_csv(line);
        assert!(csv.starts_with("n,w0,w1\n1,0.25,0.75\n"));
        assert_eq!(NamingDistribution::<f64>::from_csv(&csv).unwrap(), naming);
    }

    #[test]
    fn system_term_count_and_canonical() {
        let s = NumeralSystem::new(vec![3, 3, 1, 1, 7]).unwrap();
        assert_eq!(s.term_count(), 3);
        assert_eq!(s.canonical().assignment(), &[0, 0, 1, 1, 2]);
        assert_eq!(s.cells(), vec![vec![0, 1], vec![2, 3], vec![4]]);
        assert!(NumeralSystem::with_vocabulary(vec![0, 5], 3).is_err());
    }
}
