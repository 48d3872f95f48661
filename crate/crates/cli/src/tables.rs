//! CSV record types and file helpers shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const RESULTS: &str = "results.csv";
pub const HISTOGRAM: &str = "term_histogram.csv";
pub const PRIOR: &str = "prior.csv";
pub const FAILURES: &str = "failures.csv";
pub const MANIFEST: &str = "manifest.toml";
pub const ENVELOPE: &str = "envelope.csv";
pub const HUMANS: &str = "human.csv";
pub const BAND: &str = "band.csv";
pub const BAND_SUMMARY: &str = "band_summary.csv";
pub const CONSENSUS: &str = "consensus.csv";
pub const CONSENSUS_SUMMARY: &str = "consensus_summary.csv";
pub const WEBER: &str = "weber.csv";
pub const WEBER_POOLED: &str = "weber_pooled.csv";
pub const PRIORS: &str = "priors.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub pair_id: usize,
    pub reward: String,
    pub prior: String,
    pub terms: usize,
    pub kind: String,
    pub cost_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub terms: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRow {
    pub n: u32,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub pair_id: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub update: usize,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCsvRow {
    pub terms: usize,
    pub best_cost: Option<f64>,
    pub worst_cost: Option<f64>,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub pair_id: usize,
    pub reward: String,
    pub terms: usize,
    pub cost_bits: f64,
    pub best_cost: f64,
    pub worst_cost: f64,
    pub excess_bits: f64,
    pub in_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummaryRow {
    pub reward: String,
    pub pairs: usize,
    pub in_band_fraction: f64,
    pub median_excess_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRow {
    pub reward: String,
    pub terms: usize,
    pub n: u32,
    pub word: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSummaryRow {
    pub reward: String,
    pub terms: usize,
    pub pairs: usize,
    pub consensus_terms: usize,
    pub objective: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeberRow {
    pub pair_id: usize,
    pub reward: String,
    pub nu: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeberPooledRow {
    pub reward: String,
    pub nu: f64,
    pub mse_mean: f64,
    pub mse_sd: f64,
    pub pairs: usize,
    pub skipped: usize,
}

/// Row type of a CSV table; the header is written even when empty.
pub trait Table: Serialize + DeserializeOwned {
    const HEADER: &'static str;
}

macro_rules! table {
    ($($t:ty => $h:literal),* $(,)?) => {
        $(impl Table for $t {
            const HEADER: &'static str = $h;
        })*
    };
}

table! {
    ResultRow => "pair_id,reward,prior,terms,kind,cost_bits",
    HistogramRow => "terms,count",
    PriorRow => "n,p",
    FailureRow => "pair_id,error",
    TraceRow => "update,mean_reward",
    EnvelopeCsvRow => "terms,best_cost,worst_cost,kind",
    BandRow => "pair_id,reward,terms,cost_bits,best_cost,worst_cost,excess_bits,in_band",
    BandSummaryRow => "reward,pairs,in_band_fraction,median_excess_bits",
    ConsensusRow => "reward,terms,n,word",
    ConsensusSummaryRow => "reward,terms,pairs,consensus_terms,objective",
    WeberRow => "pair_id,reward,nu,mse",
    WeberPooledRow => "reward,nu,mse_mean,mse_sd,pairs,skipped",
}

pub fn write_rows<T: Table>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    if rows.is_empty() {
        return fs::write(path, format!("{}\n", T::HEADER)).with_context(|| format!("writing {}", path.display()));
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: Table>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        anyhow::bail!("missing table {}", path.display());
    }
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().map(|row| row.with_context(|| format!("parsing {}", path.display()))).collect()
}

pub fn pair_dir(out: &Path, pair_id: usize) -> PathBuf {
    out.join("pairs").join(format!("{pair_id:04}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_match_serialized_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let row = ResultRow { pair_id: 1, reward: "linear".into(), prior: "uniform".into(), terms: 3, kind: "exact".into(), cost_bits: 0.5 };
        write_rows(&path, std::slice::from_ref(&row)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), ResultRow::HEADER);
        assert_eq!(read_rows::<ResultRow>(&path).unwrap(), vec![row]);
        write_rows::<ResultRow>(&path, &[]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), format!("{}\n", ResultRow::HEADER));
        assert!(read_rows::<ResultRow>(&path).unwrap().is_empty());
        assert!(read_rows::<ResultRow>(&dir.path().join("absent.csv")).is_err());
    }
}
