//! Experiment specification: a TOML file whose every field can be
//! overridden from the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use numsig_core::neural::Init;
use numsig_core::weber::Exponent;
use numsig_core::RewardKind;
use serde::{Deserialize, Serialize};

/// Where the need prior comes from. Sources without a file use the bundled
/// data.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSource {
    Uniform,
    PowerLaw(Option<PathBuf>),
    Cap(Option<PathBuf>),
    MaxEnt(Option<PathBuf>),
    Explicit(Vec<f64>),
}

impl PriorSource {
    pub fn label(&self) -> &'static str {
        match self {
            PriorSource::Uniform => "uniform",
            PriorSource::PowerLaw(_) => "powerlaw",
            PriorSource::Cap(_) => "cap",
            PriorSource::MaxEnt(_) => "maxent",
            PriorSource::Explicit(_) => "explicit",
        }
    }

    fn file(&self) -> Option<&Path> {
        match self {
            PriorSource::PowerLaw(f) | PriorSource::Cap(f) | PriorSource::MaxEnt(f) => f.as_deref(),
            _ => None,
        }
    }
}

impl FromStr for PriorSource {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let file = arg.map(PathBuf::from);
        Ok(match (head, arg) {
            ("uniform", None) => PriorSource::Uniform,
            ("powerlaw", _) => PriorSource::PowerLaw(file),
            ("cap", _) => PriorSource::Cap(file),
            ("maxent", _) => PriorSource::MaxEnt(file),
            ("explicit", Some(v)) => PriorSource::Explicit(
                v.split(',').map(|x| x.trim().parse::<f64>().with_context(|| format!("bad prior entry `{x}`"))).collect::<Result<_>>()?,
            ),
            _ => bail!("unknown prior `{s}` (uniform | powerlaw[:FILE] | cap[:FILE] | maxent[:FILE] | explicit:P1,P2,...)"),
        })
    }
}

impl fmt::Display for PriorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSource::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "explicit:{}", parts.join(","))
            }
            other => match other.file() {
                Some(p) => write!(f, "{}:{}", other.label(), p.display()),
                None => f.write_str(other.label()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameSettings {
    pub numbers: u32,
    pub words: usize,
    pub updates: usize,
    pub batch: usize,
    pub dropout: f64,
    pub lr: f64,
    pub hidden: usize,
    /// `glorot` or `zeros`.
    pub init: String,
    /// Monte-Carlo rounds per number when estimating the naming distribution.
    pub mc_samples: usize,
    /// Updates averaged into one reward-trace row.
    pub trace_every: usize,
}

impl Default for GameSettings {
    fn default() -> Self {
        Self {
            numbers: 20,
            words: 10,
            updates: 10_000,
            batch: 100,
            dropout: 0.3,
            lr: 1e-3,
            hidden: 50,
            init: "glorot".into(),
            mc_samples: 1000,
            trace_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub exact_threshold: f64,
    pub cap_tol: f64,
    pub cap_max_iter: usize,
    pub maxent_tol: f64,
    /// Weber fraction of hypothetical and human approximate words.
    pub weber: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exact_threshold: numsig_core::analysis::EXACT_THRESHOLD,
            cap_tol: 1e-9,
            cap_max_iter: 10_000,
            maxent_tol: 1e-10,
            weber: numsig_core::frontier::DEFAULT_WEBER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub frontier_restarts: usize,
    pub consensus_restarts: usize,
    /// `doubled` or `standard`; shape of the Weber model row.
    pub weber_exponent: String,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self { frontier_restarts: 100, consensus_restarts: 50, weber_exponent: "doubled".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Comma-separated reward kinds; `pairs` pairs are trained for each.
    pub reward: String,
    pub prior: String,
    pub pairs: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    /// Human-systems file; the bundled reconstruction when absent.
    pub humans: Option<PathBuf>,
    pub game: GameSettings,
    pub tolerances: Tolerances,
    pub search: SearchSettings,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "numsig".into(),
            reward: "linear".into(),
            prior: "powerlaw".into(),
            pairs: 30,
            seed: 0,
            workers: 1,
            out: PathBuf::from("numsig-out"),
            humans: None,
            game: GameSettings::default(),
            tolerances: Tolerances::default(),
            search: SearchSettings::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid experiment spec")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn rewards(&self) -> Result<Vec<RewardKind>> {
        let kinds = self
            .reward
            .split(',')
            .map(|s| s.trim().parse::<RewardKind>().map_err(anyhow::Error::from))
            .collect::<Result<Vec<_>>>()?;
        if kinds.is_empty() {
            bail!("no reward kind given");
        }
        Ok(kinds)
    }

    pub fn prior_source(&self) -> Result<PriorSource> {
        self.prior.parse()
    }

    pub fn init(&self) -> Result<Init> {
        match self.game.init.as_str() {
            "glorot" => Ok(Init::Glorot),
            "zeros" => Ok(Init::Zeros),
            other => bail!("unknown init `{other}` (glorot | zeros)"),
        }
    }

    pub fn weber_exponent(&self) -> Result<Exponent> {
        Ok(self.search.weber_exponent.parse()?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            bail!("pairs must be at least 1");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.game.trace_every == 0 || self.game.mc_samples == 0 {
            bail!("trace_every and mc_samples must be positive");
        }
        self.rewards()?;
        self.init()?;
        self.weber_exponent()?;
        if let Some(file) = self.prior_source()?.file() {
            if !file.exists() {
                bail!("prior file {} does not exist", file.display());
            }
        }
        if let Some(h) = &self.humans {
            if !h.exists() {
                bail!("human-systems file {} does not exist", h.display());
            }
        }
        Ok(())
    }
}
