//! Subcommand pipelines. Every stage reads and writes plain files under
//! the experiment's output directory, so stages can be rerun on their own.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use numsig_core::analysis::{classify_with, comm_cost, estimate_naming, listener_posterior, mode_system};
use numsig_core::consensus::correlation_cluster;
use numsig_core::frontier::{build_envelope, exact_frontier, optimize_approx, Extreme};
use numsig_core::game::train_pair;
use numsig_core::priors::uniform_prior;
use numsig_core::weber::fit_weber;
use numsig_core::{AgreementMatrix, GameConfig, NamingDistribution, NeedPrior, NumberLine, PairPosterior, RewardKind, Vocabulary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentSpec, GameSettings, PriorSource};
use crate::data::{build_prior, load_systems};
use crate::human::{human_costs, HumanCost};
use crate::seed::{mix, STREAM_CONSENSUS, STREAM_FRONTIER, STREAM_NAMING};
use crate::tables::*;

/// Slack allowed when testing whether a cost lies inside the envelope band.
pub const BAND_SLACK: f64 = 1e-9;

pub fn number_line(spec: &ExperimentSpec) -> Result<NumberLine> {
    Ok(NumberLine::new(spec.game.numbers)?)
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

/// Everything produced by one trained pair.
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub pair_id: usize,
    pub seed: u64,
    pub reward: RewardKind,
    pub naming: NamingDistribution,
    pub cost_bits: f64,
    pub terms: usize,
    pub kind: String,
    pub trace: Vec<TraceRow>,
    /// Mean batch reward over the last `trace_every` updates.
    pub final_reward: f64,
    pub sender: String,
    pub listener: String,
}

pub fn game_config(spec: &ExperimentSpec, prior: &NeedPrior, reward: RewardKind, seed: u64) -> Result<GameConfig> {
    let mut cfg = GameConfig::new(number_line(spec)?, reward, prior.clone(), seed);
    cfg.vocab = Vocabulary::new(spec.game.words)?;
    cfg.batch_size = spec.game.batch;
    cfg.updates = spec.game.updates;
    cfg.dropout = spec.game.dropout;
    cfg.lr = spec.game.lr;
    cfg.hidden = spec.game.hidden;
    cfg.init = spec.init()?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn train_one(spec: &ExperimentSpec, prior: &NeedPrior, reward: RewardKind, pair_id: usize) -> Result<PairOutcome> {
    let seed = mix(spec.seed, pair_id as u64);
    let pair = train_pair(&game_config(spec, prior, reward, seed)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, STREAM_NAMING));
    let naming = estimate_naming(&pair.sender, spec.game.mc_samples, &mut rng)?;
    let report = comm_cost(&naming, prior)?;
    let kind = classify_with(&naming, spec.tolerances.exact_threshold).name().to_string();
    let every = spec.game.trace_every;
    let trace = pair
        .reward_trace
        .chunks(every)
        .enumerate()
        .map(|(i, c)| TraceRow { update: i * every + c.len(), mean_reward: c.iter().sum::<f64>() / c.len() as f64 })
        .collect();
    Ok(PairOutcome {
        pair_id,
        seed,
        reward,
        naming,
        cost_bits: report.cost_bits,
        terms: report.term_count,
        kind,
        trace,
        final_reward: pair.trailing_mean_reward(every),
        sender: pair.sender.to_checkpoint(),
        listener: pair.listener.to_checkpoint(),
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub results: Vec<ResultRow>,
    pub failures: Vec<FailureRow>,
}

fn write_prior(out: &Path, prior: &NeedPrior, line: NumberLine) -> Result<()> {
    let rows: Vec<PriorRow> = line.numbers().zip(prior.probs()).map(|(n, &p)| PriorRow { n, p }).collect();
    write_rows(&out.join(PRIOR), &rows)
}

pub fn load_prior(out: &Path) -> Result<NeedPrior> {
    let rows: Vec<PriorRow> = read_rows(&out.join(PRIOR))?;
    Ok(NeedPrior::new(rows.into_iter().map(|r| r.p).collect())?)
}

/// Resolve the spec's prior. `prior.csv` in the output directory wins so
/// that later stages see exactly the prior the pairs were trained on.
pub fn resolve_prior(spec: &ExperimentSpec) -> Result<NeedPrior> {
    let saved = spec.out.join(PRIOR);
    if saved.exists() {
        return load_prior(&spec.out);
    }
    build_prior(&spec.prior_source()?, number_line(spec)?, &spec.tolerances)
}

/// Train `pairs` pairs per reward kind, in parallel on `workers` threads,
/// and write the per-pair files plus the aggregate tables.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunSummary> {
    spec.validate()?;
    let line = number_line(spec)?;
    let source = spec.prior_source()?;
    let prior = build_prior(&source, line, &spec.tolerances)?;
    let rewards = spec.rewards()?;
    let out = &spec.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join(MANIFEST), spec.to_toml()?)?;
    write_prior(out, &prior, line)?;

    let jobs: Vec<(usize, RewardKind)> =
        rewards.iter().enumerate().flat_map(|(r, &kind)| (0..spec.pairs).map(move |j| (r * spec.pairs + j, kind))).collect();
    info!("training {} pairs on {} workers", jobs.len(), spec.workers);
    let outcomes: Vec<(usize, RewardKind, Result<PairOutcome>)> = thread_pool(spec.workers)?
        .install(|| jobs.par_iter().map(|&(id, kind)| (id, kind, train_one(spec, &prior, kind, id))).collect());

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (id, kind, outcome) in outcomes {
        match outcome.and_then(|o| write_pair(spec, &o, line).map(|_| o)) {
            Ok(o) => results.push(ResultRow {
                pair_id: id,
                reward: kind.name().to_string(),
                prior: source.label().to_string(),
                terms: o.terms,
                kind: o.kind,
                cost_bits: o.cost_bits,
            }),
            Err(e) => {
                warn!("pair {id} failed: {e:#}");
                failures.push(FailureRow { pair_id: id, error: format!("{e:#}") });
            }
        }
    }
    write_rows(&out.join(RESULTS), &results)?;
    write_rows(&out.join(FAILURES), &failures)?;
    write_rows(&out.join(HISTOGRAM), &term_histogram(&results, spec.game.words))?;
    Ok(RunSummary { results, failures })
}

/// Per-pair `manifest.toml`: everything needed to retrain the pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub pair_id: usize,
    pub seed: u64,
    pub reward: String,
    pub prior: String,
    pub terms: usize,
    pub kind: String,
    pub cost_bits: f64,
    pub final_reward: f64,
    pub game: GameSettings,
}

fn write_pair(spec: &ExperimentSpec, o: &PairOutcome, line: NumberLine) -> Result<()> {
    let dir = pair_dir(&spec.out, o.pair_id);
    fs::create_dir_all(&dir)?;
    let manifest = PairManifest {
        pair_id: o.pair_id,
        seed: o.seed,
        reward: o.reward.name().to_string(),
        prior: spec.prior_source()?.to_string(),
        terms: o.terms,
        kind: o.kind.clone(),
        cost_bits: o.cost_bits,
        final_reward: o.final_reward,
        game: spec.game.clone(),
    };
    fs::write(dir.join(MANIFEST), toml::to_string(&manifest)?)?;
    fs::write(dir.join("naming.csv"), o.naming.to_csv(line))?;
    write_rows(&dir.join("trace.csv"), &o.trace)?;
    fs::write(dir.join("sender.ckpt"), &o.sender)?;
    fs::write(dir.join("listener.ckpt"), &o.listener)?;
    Ok(())
}

pub fn term_histogram(results: &[ResultRow], words: usize) -> Vec<HistogramRow> {
    (1..=words).map(|k| HistogramRow { terms: k, count: results.iter().filter(|r| r.terms == k).count() }).collect()
}

pub fn load_naming(out: &Path, pair_id: usize) -> Result<NamingDistribution> {
    let path = pair_dir(out, pair_id).join("naming.csv");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(NamingDistribution::from_csv(&text)?)
}

/// Best and worst hypothetical systems for `1..=words` terms, exact and
/// approximate.
pub fn run_frontier(spec: &ExperimentSpec, prior: &NeedPrior) -> Result<Vec<EnvelopeCsvRow>> {
    let max_k = spec.game.words.min(prior.len());
    let restarts = spec.search.frontier_restarts;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, STREAM_FRONTIER));
    let rows = thread_pool(spec.workers)?.install(|| -> Result<Vec<EnvelopeCsvRow>> {
        let mut points = exact_frontier(prior, max_k, Extreme::Best, restarts, &mut rng)?;
        points.extend(exact_frontier(prior, max_k, Extreme::Worst, restarts, &mut rng)?);
        let exact = build_envelope(&points)?;
        let mut approx = Vec::new();
        for k in 1..=max_k {
            for mode in [Extreme::Best, Extreme::Worst] {
                approx.push(optimize_approx(k, prior, mode, restarts, spec.tolerances.weber, &mut rng)?);
            }
        }
        let approx = build_envelope(&approx)?;
        let mut rows = Vec::new();
        for (env, kind) in [(exact, "exact"), (approx, "approximate")] {
            rows.extend(env.rows().iter().map(|r| EnvelopeCsvRow { terms: r.terms, best_cost: r.best, worst_cost: r.worst, kind: kind.into() }));
        }
        Ok(rows)
    })?;
    write_rows(&spec.out.join(ENVELOPE), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorsRow {
    pub n: u32,
    pub uniform: f64,
    pub powerlaw: f64,
    pub cap: f64,
    pub maxent: f64,
}

impl Table for PriorsRow {
    const HEADER: &'static str = "n,uniform,powerlaw,cap,maxent";
}

/// The four need priors side by side, from the bundled data.
pub fn run_priors(spec: &ExperimentSpec) -> Result<Vec<PriorsRow>> {
    let line = number_line(spec)?;
    let tol = &spec.tolerances;
    let humans = spec.humans.clone();
    let uniform: NeedPrior = uniform_prior(line);
    let power = build_prior(&PriorSource::PowerLaw(None), line, tol)?;
    let cap = build_prior(&PriorSource::Cap(humans), line, tol)?;
    let maxent = build_prior(&PriorSource::MaxEnt(None), line, tol)?;
    let rows: Vec<PriorsRow> = line
        .numbers()
        .enumerate()
        .map(|(i, n)| PriorsRow { n, uniform: uniform.probs()[i], powerlaw: power.probs()[i], cap: cap.probs()[i], maxent: maxent.probs()[i] })
        .collect();
    write_rows(&spec.out.join(PRIORS), &rows)?;
    Ok(rows)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Position of each pair against the exact envelope at its term count.
pub fn band_rows(results: &[ResultRow], envelope: &[EnvelopeCsvRow]) -> Result<Vec<BandRow>> {
    results
        .iter()
        .map(|r| {
            let env = envelope
                .iter()
                .find(|e| e.kind == "exact" && e.terms == r.terms)
                .with_context(|| format!("no exact envelope row for {} terms", r.terms))?;
            let (Some(best), Some(worst)) = (env.best_cost, env.worst_cost) else {
                bail!("incomplete exact envelope row for {} terms", r.terms);
            };
            Ok(BandRow {
                pair_id: r.pair_id,
                reward: r.reward.clone(),
                terms: r.terms,
                cost_bits: r.cost_bits,
                best_cost: best,
                worst_cost: worst,
                excess_bits: r.cost_bits - best,
                in_band: r.cost_bits >= best - BAND_SLACK && r.cost_bits <= worst + BAND_SLACK,
            })
        })
        .collect()
}

/// Per-reward and pooled (`all`) band statistics.
pub fn band_summary(rows: &[BandRow]) -> Vec<BandSummaryRow> {
    let mut groups: Vec<(String, Vec<&BandRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| g.0 == r.reward) {
            Some(g) => g.1.push(r),
            None => groups.push((r.reward.clone(), vec![r])),
        }
    }
    groups.push(("all".into(), rows.iter().collect()));
    groups
        .into_iter()
        .filter(|g| !g.1.is_empty())
        .map(|(reward, g)| {
            let excess: Vec<f64> = g.iter().map(|r| r.excess_bits).collect();
            BandSummaryRow {
                reward,
                pairs: g.len(),
                in_band_fraction: g.iter().filter(|r| r.in_band).count() as f64 / g.len() as f64,
                median_excess_bits: median(&excess).unwrap_or(f64::NAN),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub band: Vec<BandRow>,
    pub summary: Vec<BandSummaryRow>,
    pub humans: Vec<HumanCost>,
}

/// Band statistics against `envelope.csv` and human-system costs under the
/// run's prior.
pub fn run_analyze(spec: &ExperimentSpec) -> Result<Analysis> {
    let out = &spec.out;
    let line = number_line(spec)?;
    let prior = resolve_prior(spec)?;
    let results: Vec<ResultRow> = read_rows(&out.join(RESULTS))?;
    let envelope: Vec<EnvelopeCsvRow> = read_rows(&out.join(ENVELOPE))?;
    let band = band_rows(&results, &envelope)?;
    let summary = band_summary(&band);
    for s in &summary {
        info!("{}: {} pairs, {:.3} in band, median excess {:.4} bits", s.reward, s.pairs, s.in_band_fraction, s.median_excess_bits);
    }
    let humans = human_costs(&load_systems(spec.humans.as_deref())?, &prior, line, spec.tolerances.weber)?;
    write_rows(&out.join(BAND), &band)?;
    write_rows(&out.join(BAND_SUMMARY), &summary)?;
    write_rows(&out.join(HUMANS), &humans)?;
    Ok(Analysis { band, summary, humans })
}

#[derive(Debug, Clone)]
pub struct ConsensusOutcome {
    pub rows: Vec<ConsensusRow>,
    pub summary: Vec<ConsensusSummaryRow>,
}

/// One consensus partition per reward kind and mode-system term count.
pub fn run_consensus(spec: &ExperimentSpec) -> Result<ConsensusOutcome> {
    let out = &spec.out;
    let line = number_line(spec)?;
    let results: Vec<ResultRow> = read_rows(&out.join(RESULTS))?;
    let mut groups: BTreeMap<(String, usize), (AgreementMatrix, usize)> = BTreeMap::new();
    for r in &results {
        let system = mode_system(&load_naming(out, r.pair_id)?);
        let entry = groups.entry((r.reward.clone(), system.term_count())).or_insert_with(|| (AgreementMatrix::new(line.size()), 0));
        entry.0.accumulate(&system)?;
        entry.1 += 1;
    }
    let pool = thread_pool(spec.workers)?;
    let base = mix(spec.seed, STREAM_CONSENSUS);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for ((reward, k), (matrix, pairs)) in &groups {
        let kind: RewardKind = reward.parse()?;
        let stream = RewardKind::ALL.iter().position(|&x| x == kind).unwrap_or(0) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(base, stream), *k as u64));
        let system = pool.install(|| correlation_cluster(matrix, spec.search.consensus_restarts, &mut rng))?;
        rows.extend(line.numbers().zip(system.assignment()).map(|(n, &w)| ConsensusRow { reward: reward.clone(), terms: *k, n, word: w }));
        summary.push(ConsensusSummaryRow {
            reward: reward.clone(),
            terms: *k,
            pairs: *pairs,
            consensus_terms: system.term_count(),
            objective: matrix.objective(system.assignment()),
        });
    }
    write_rows(&out.join(CONSENSUS), &rows)?;
    write_rows(&out.join(CONSENSUS_SUMMARY), &summary)?;
    Ok(ConsensusOutcome { rows, summary })
}

#[derive(Debug, Clone)]
pub struct WeberOutcome {
    pub per_pair: Vec<WeberRow>,
    pub pooled: Vec<WeberPooledRow>,
}

/// Weber-fraction fit of every pair's Bayes listener, pooled per reward.
pub fn run_weber(spec: &ExperimentSpec) -> Result<WeberOutcome> {
    let out = &spec.out;
    let line = number_line(spec)?;
    let prior = resolve_prior(spec)?;
    let shape = spec.weber_exponent()?;
    let results: Vec<ResultRow> = read_rows(&out.join(RESULTS))?;
    let mut groups: Vec<(String, Vec<usize>, Vec<PairPosterior>)> = Vec::new();
    for r in &results {
        let posterior = listener_posterior(&load_naming(out, r.pair_id)?, &prior)?;
        let rows: Vec<Vec<f64>> = posterior.reachable_rows().map(|(_, row)| row.to_vec()).collect();
        let pair = PairPosterior::from_rows(rows, line)?;
        match groups.iter_mut().find(|g| g.0 == r.reward) {
            Some(g) => {
                g.1.push(r.pair_id);
                g.2.push(pair);
            }
            None => groups.push((r.reward.clone(), vec![r.pair_id], vec![pair])),
        }
    }
    let mut per_pair = Vec::new();
    let mut pooled = Vec::new();
    for (reward, ids, pairs) in &groups {
        let report = fit_weber(pairs, line, shape)?;
        for &i in &report.skipped {
            warn!("pair {} has no reachable words; skipped", ids[i]);
        }
        for (id, fit) in ids.iter().zip(&report.per_pair) {
            if let Some(fit) = fit {
                per_pair.push(WeberRow { pair_id: *id, reward: reward.clone(), nu: fit.nu, mse: fit.mse });
            }
        }
        info!("{reward}: pooled Weber fraction {:.2}, MSE {:.5} ± {:.5}", report.pooled_nu, report.pooled_mse, report.pooled_mse_sd);
        pooled.push(WeberPooledRow {
            reward: reward.clone(),
            nu: report.pooled_nu,
            mse_mean: report.pooled_mse,
            mse_sd: report.pooled_mse_sd,
            pairs: pairs.len() - report.skipped.len(),
            skipped: report.skipped.len(),
        });
    }
    write_rows(&out.join(WEBER), &per_pair)?;
    write_rows(&out.join(WEBER_POOLED), &pooled)?;
    Ok(WeberOutcome { per_pair, pooled })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: usize, reward: &str, terms: usize, cost: f64) -> ResultRow {
        ResultRow { pair_id: id, reward: reward.into(), prior: "uniform".into(), terms, kind: "exact".into(), cost_bits: cost }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn band_statistics() {
        let env = vec![
            EnvelopeCsvRow { terms: 2, best_cost: Some(1.0), worst_cost: Some(2.0), kind: "exact".into() },
            EnvelopeCsvRow { terms: 2, best_cost: Some(0.5), worst_cost: Some(3.0), kind: "approximate".into() },
        ];
        let results = vec![row(0, "linear", 2, 1.5), row(1, "linear", 2, 2.5), row(2, "exp", 2, 1.0)];
        let band = band_rows(&results, &env).unwrap();
        assert_eq!(band.iter().map(|b| b.in_band).collect::<Vec<_>>(), vec![true, false, true]);
        let summary = band_summary(&band);
        assert_eq!(summary.len(), 3);
        assert_eq!(summary[0].reward, "linear");
        assert_eq!(summary[0].median_excess_bits, 1.0);
        assert_eq!(summary[2].reward, "all");
        assert!((summary[2].in_band_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert!(band_rows(&[row(3, "linear", 5, 1.0)], &env).is_err());
    }

    #[test]
    fn histogram_counts_every_term_count() {
        let results = vec![row(0, "linear", 2, 1.0), row(1, "linear", 2, 1.0), row(2, "linear", 4, 1.0)];
        let h = term_histogram(&results, 5);
        assert_eq!(h.iter().map(|r| r.count).collect::<Vec<_>>(), vec![0, 2, 0, 1, 0]);
    }
}
