//! Bundled data files and construction of the need priors.

use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use numsig_core::analysis::SystemKind;
use numsig_core::priors::{average_caps, blahut_arimoto_cap, fit_power_law, maxent_prior, uniform_prior};
use numsig_core::{FrequencyTable, NeedPrior, NumberLine, WordFrequency};

use crate::config::{PriorSource, Tolerances};
use crate::human::{naming_from_terms, parse_systems, HumanSystem, Term};

pub const ENGLISH_COUNTS: &str = include_str!("../data/english_numeral_counts.csv");
pub const HUMAN_SYSTEMS: &str = include_str!("../data/human_systems.txt");
pub const GOONIYANDI_COUNTS: &str = include_str!("../data/gooniyandi_word_counts.csv");

fn read_or(path: Option<&Path>, bundled: &'static str) -> Result<String> {
    match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(bundled.to_string()),
    }
}

pub fn load_systems(path: Option<&Path>) -> Result<Vec<HumanSystem>> {
    parse_systems(&read_or(path, HUMAN_SYSTEMS)?)
}

/// Word-count file with header `term,count`; each term uses the
/// human-systems syntax, so braces may contain commas.
pub fn parse_word_counts(text: &str) -> Result<(Vec<Term>, Vec<f64>)> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(h) if h.replace(' ', "") == "term,count" => {}
        other => bail!("expected header `term,count`, found {other:?}"),
    }
    let mut terms = Vec::new();
    let mut counts = Vec::new();
    for l in lines {
        let (t, c) = l.rsplit_once(',').with_context(|| format!("bad row `{l}`"))?;
        terms.push(t.parse()?);
        counts.push(c.trim().parse::<f64>().with_context(|| format!("bad count in `{l}`"))?);
    }
    Ok((terms, counts))
}

#[derive(Debug, Clone)]
pub struct PowerLawPrior {
    pub alpha: f64,
    pub prior: NeedPrior,
}

pub fn powerlaw_prior(path: Option<&Path>, line: NumberLine) -> Result<PowerLawPrior> {
    let table = FrequencyTable::from_csv(&read_or(path, ENGLISH_COUNTS)?, line)?;
    let fit = fit_power_law(&table, line)?;
    Ok(PowerLawPrior { alpha: fit.alpha, prior: fit.prior })
}

/// Mean of the capacity-achieving priors of every exact system, each used
/// as a deterministic channel.
pub fn cap_prior(path: Option<&Path>, line: NumberLine, tol: &Tolerances) -> Result<NeedPrior> {
    let systems = load_systems(path)?;
    let mut caps = Vec::new();
    for s in systems.iter().filter(|s| s.kind == SystemKind::Exact) {
        let res = blahut_arimoto_cap(&s.naming(line, tol.weber)?, tol.cap_tol, tol.cap_max_iter)?;
        if !res.converged {
            warn!("capacity iteration for {} stopped with gap {}", s.language, res.gap);
        }
        caps.push(res.prior);
    }
    if caps.is_empty() {
        bail!("no exact systems to build a capacity-achieving prior from");
    }
    Ok(average_caps(&caps)?)
}

pub fn maxent_from_counts(path: Option<&Path>, line: NumberLine, tol: &Tolerances) -> Result<NeedPrior> {
    let (terms, counts) = parse_word_counts(&read_or(path, GOONIYANDI_COUNTS)?)?;
    let naming = naming_from_terms(&terms, line, tol.weber)?;
    if naming.num_words() != counts.len() {
        bail!("word counts must cover the whole number line (a residual term would have no count)");
    }
    let freq = WordFrequency::from_counts(counts)?;
    Ok(maxent_prior(&naming, &freq, tol.maxent_tol)?.prior)
}

pub fn build_prior(source: &PriorSource, line: NumberLine, tol: &Tolerances) -> Result<NeedPrior> {
    Ok(match source {
        PriorSource::Uniform => uniform_prior(line),
        PriorSource::PowerLaw(p) => {
            let fit = powerlaw_prior(p.as_deref(), line)?;
            info!("power-law exponent {:.4}", fit.alpha);
            fit.prior
        }
        PriorSource::Cap(p) => cap_prior(p.as_deref(), line, tol)?,
        PriorSource::MaxEnt(p) => maxent_from_counts(p.as_deref(), line, tol)?,
        PriorSource::Explicit(v) => {
            if v.len() != line.size() {
                bail!("explicit prior has {} entries for a line of {}", v.len(), line.size());
            }
            NeedPrior::new(v.clone())?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> NumberLine {
        NumberLine::default()
    }

    #[test]
    fn bundled_powerlaw_matches_regression_oracle() {
        // Closed-form OLS slope over the bundled counts, computed here
        // independently of the library fit.
        let rows: Vec<(f64, f64)> = ENGLISH_COUNTS
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('n'))
            .map(|l| {
                let (n, c) = l.split_once(',').unwrap();
                (n.parse().unwrap(), c.parse().unwrap())
            })
            .collect();
        let total: f64 = rows.iter().map(|r| r.1).sum();
        let m = rows.len() as f64;
        let (sx, sy, sxx, sxy) = rows.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(n, c)| {
            let (x, y) = (f64::ln(n), f64::ln(c / total));
            (acc.0 + x, acc.1 + y, acc.2 + x * x, acc.3 + x * y)
        });
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        let fit = powerlaw_prior(None, line()).unwrap();
        assert!((fit.alpha + slope).abs() < 1e-9);
        assert!((fit.alpha - 2.0).abs() < 0.05);
    }

    #[test]
    fn cap_prior_of_singleton_systems() {
        let tol = Tolerances::default();
        let prior = cap_prior(None, line(), &tol).unwrap();
        let p = prior.probs();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // Every exact system names 1 and 2 with singletons, so p(1) = p(2).
        assert!((p[0] - p[1]).abs() < 1e-12);
        assert!(p[0] > p[19]);
    }

    #[test]
    fn gooniyandi_maxent_is_feasible() {
        let tol = Tolerances::default();
        let prior = maxent_from_counts(None, line(), &tol).unwrap();
        let (terms, counts) = parse_word_counts(GOONIYANDI_COUNTS).unwrap();
        let naming = naming_from_terms(&terms, line(), tol.weber).unwrap();
        let total: f64 = counts.iter().sum();
        let marginal = naming.word_marginal(&prior).unwrap();
        for (m, c) in marginal.iter().zip(&counts) {
            assert!((m - c / total).abs() < 1e-9);
        }
        // Word k < 3 is only used for number k + 1, which fixes those masses;
        // numbers from 4 on only say "many" and share the rest equally.
        let p = prior.probs();
        for k in 0..3 {
            assert!((p[k] - counts[k] / total / naming.get(k, k)).abs() < 1e-9);
        }
        assert!(p[3..].windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
    }

    #[test]
    fn explicit_prior_length_checked() {
        let tol = Tolerances::default();
        assert!(build_prior(&PriorSource::Explicit(vec![0.5, 0.5]), line(), &tol).is_err());
        let p = build_prior(&PriorSource::Explicit(vec![0.05; 20]), line(), &tol).unwrap();
        assert_eq!(p.len(), 20);
    }
}
