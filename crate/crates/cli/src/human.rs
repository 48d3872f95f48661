//! Human numeral systems: parsing and conversion to naming distributions.
//!
//! A system is a list of terms, each either an exact set of numbers or a
//! Gaussian word. Meanings are combined per number: an exact term has
//! meaning 1 on its members, a Gaussian term the normal density with
//! spread `weber * mu`, and `p(w|n)` is the meaning normalized over words.
//! Numbers covered by no term are collected into one residual term.

use std::fmt;

use anyhow::{bail, Context, Result};
use numsig_core::analysis::{comm_cost, SystemKind};
use numsig_core::frontier::gaussian_log_density;
use numsig_core::{NamingDistribution, NeedPrior, NumberLine};

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Exact(Vec<u32>),
    Gauss(f64),
}

impl Term {
    fn log_meaning(&self, n: u32, weber: f64) -> f64 {
        match self {
            Term::Exact(set) if set.contains(&n) => 0.0,
            Term::Exact(_) => f64::NEG_INFINITY,
            Term::Gauss(mu) => gaussian_log_density(f64::from(n), *mu, weber),
        }
    }
}

impl std::str::FromStr for Term {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
            let mut set = Vec::new();
            for item in inner.split(',').map(str::trim).filter(|x| !x.is_empty()) {
                // `a-b` is accepted as shorthand for a contiguous run.
                match item.split_once('-') {
                    Some((a, b)) => {
                        let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().parse()?);
                        if a > b {
                            bail!("empty range `{item}`");
                        }
                        set.extend(a..=b);
                    }
                    None => set.push(item.parse().with_context(|| format!("bad number `{item}`"))?),
                }
            }
            if set.is_empty() {
                bail!("empty term `{s}`");
            }
            set.sort_unstable();
            if set.windows(2).any(|w| w[0] == w[1]) {
                bail!("repeated number in `{s}`");
            }
            return Ok(Term::Exact(set));
        }
        if let Some(inner) = s.strip_prefix("gauss(").and_then(|r| r.strip_suffix(')')) {
            let mu: f64 = inner.trim().parse().with_context(|| format!("bad Gaussian mean `{inner}`"))?;
            if mu.is_nan() || mu <= 0.0 {
                bail!("Gaussian mean must be positive in `{s}`");
            }
            return Ok(Term::Gauss(mu));
        }
        bail!("unrecognized term `{s}` (expected `{{1,2,3}}` or `gauss(5)`)")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Exact(set) => {
                let items: Vec<String> = set.iter().map(u32::to_string).collect();
                write!(f, "{{{}}}", items.join(","))
            }
            Term::Gauss(mu) => write!(f, "gauss({mu})"),
        }
    }
}

/// Exact terms plus, when some numbers are uncovered, the residual term.
pub fn complete_terms(terms: &[Term], line: NumberLine) -> Result<Vec<Term>> {
    let mut owner: Vec<Option<usize>> = vec![None; line.size()];
    for (t, term) in terms.iter().enumerate() {
        if let Term::Exact(set) = term {
            for &n in set {
                let i = line.index_of(n)?;
                if let Some(prev) = owner[i] {
                    bail!("number {n} is claimed by terms {prev} and {t}");
                }
                owner[i] = Some(t);
            }
        }
    }
    let has_gauss = terms.iter().any(|t| matches!(t, Term::Gauss(_)));
    let rest: Vec<u32> = line.numbers().zip(&owner).filter(|(_, o)| o.is_none()).map(|(n, _)| n).collect();
    let mut out = terms.to_vec();
    if !has_gauss && !rest.is_empty() {
        out.push(Term::Exact(rest));
    }
    Ok(out)
}

/// `p(w|n)` for the completed terms, normalized per number in log space.
pub fn naming_from_terms(terms: &[Term], line: NumberLine, weber: f64) -> Result<NamingDistribution> {
    if terms.is_empty() {
        bail!("a system needs at least one term");
    }
    let terms = complete_terms(terms, line)?;
    let mut rows = Vec::with_capacity(line.size());
    for n in line.numbers() {
        let logs: Vec<f64> = terms.iter().map(|t| t.log_meaning(n, weber)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            bail!("number {n} has no term");
        }
        let e: Vec<f64> = logs.iter().map(|&l| (l - top).exp()).collect();
        let z: f64 = e.iter().sum();
        rows.push(e.into_iter().map(|x| x / z).collect());
    }
    Ok(NamingDistribution::new(rows)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanSystem {
    pub language: String,
    pub kind: SystemKind,
    pub terms: Vec<Term>,
}

impl HumanSystem {
    pub fn parse_line(line: &str) -> Result<Self> {
        let mut parts = line.splitn(3, ',');
        let (Some(language), Some(kind), Some(spec)) = (parts.next(), parts.next(), parts.next()) else {
            bail!("expected `language,kind,term;term;...`, got `{line}`");
        };
        let kind: SystemKind = kind.trim().parse()?;
        let terms = spec.split(';').map(str::parse).collect::<Result<Vec<Term>>>()?;
        Ok(Self { language: language.trim().to_string(), kind, terms })
    }

    pub fn naming(&self, line: NumberLine, weber: f64) -> Result<NamingDistribution> {
        naming_from_terms(&self.terms, line, weber).with_context(|| format!("system {}", self.language))
    }

    /// Terms after residual completion.
    pub fn term_count(&self, line: NumberLine) -> Result<usize> {
        Ok(complete_terms(&self.terms, line)?.len())
    }
}

pub fn parse_systems(text: &str) -> Result<Vec<HumanSystem>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| HumanSystem::parse_line(l).with_context(|| format!("line {}", i + 1)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HumanCost {
    pub language: String,
    pub kind: String,
    pub terms: usize,
    pub cost_bits: f64,
}

impl crate::tables::Table for HumanCost {
    const HEADER: &'static str = "language,kind,terms,cost_bits";
}

pub fn human_costs(systems: &[HumanSystem], prior: &NeedPrior, line: NumberLine, weber: f64) -> Result<Vec<HumanCost>> {
    systems
        .iter()
        .map(|s| {
            let naming = s.naming(line, weber)?;
            Ok(HumanCost {
                language: s.language.clone(),
                kind: s.kind.name().to_string(),
                terms: s.term_count(line)?,
                cost_bits: comm_cost(&naming, prior)?.cost_bits,
            })
        })
        .collect()
}
