use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use log::info;
use numsig_cli::config::ExperimentSpec;
use numsig_cli::{plot, run};

#[derive(Parser)]
#[command(name = "numsig", version, about = "Numeral systems from a two-agent signaling game")]
struct Cli {
    /// TOML experiment spec; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train sender-listener pairs and write per-pair results.
    Train,
    /// Best and worst hypothetical systems per term count.
    Frontier,
    /// Tabulate the uniform, power-law, capacity-achieving and max-entropy priors.
    Priors,
    /// Compare trained pairs with the envelope and score human systems.
    Analyze,
    /// Consensus partition per term count.
    Consensus,
    /// Fit the Weber fraction to every pair's listener.
    Weber,
    /// Render SVG figures from the tables in the output directory.
    Plot,
    /// train, frontier, analyze, consensus, weber and plot in sequence.
    All,
}

#[derive(Args)]
struct Overrides {
    /// Reward kinds, comma separated: linear, inverse, exp.
    #[arg(long, global = true)]
    reward: Option<String>,
    /// uniform | powerlaw[:FILE] | cap[:FILE] | maxent[:FILE] | explicit:P1,...
    #[arg(long, global = true)]
    prior: Option<String>,
    /// Pairs per reward kind.
    #[arg(long, global = true)]
    pairs: Option<usize>,
    #[arg(long, global = true)]
    updates: Option<usize>,
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Human-systems file (defaults to the bundled one).
    #[arg(long, global = true)]
    humans: Option<PathBuf>,
    #[arg(long, global = true)]
    numbers: Option<u32>,
    #[arg(long, global = true)]
    words: Option<usize>,
    #[arg(long, global = true)]
    dropout: Option<f64>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    hidden: Option<usize>,
    /// glorot | zeros
    #[arg(long, global = true)]
    init: Option<String>,
    #[arg(long, global = true)]
    mc_samples: Option<usize>,
    #[arg(long, global = true)]
    trace_every: Option<usize>,
    #[arg(long, global = true)]
    exact_threshold: Option<f64>,
    #[arg(long, global = true)]
    cap_tol: Option<f64>,
    #[arg(long, global = true)]
    cap_max_iter: Option<usize>,
    #[arg(long, global = true)]
    maxent_tol: Option<f64>,
    /// Weber fraction of hypothetical and human approximate words.
    #[arg(long, global = true)]
    weber: Option<f64>,
    #[arg(long, global = true)]
    frontier_restarts: Option<usize>,
    #[arg(long, global = true)]
    consensus_restarts: Option<usize>,
    /// doubled | standard
    #[arg(long, global = true)]
    weber_exponent: Option<String>,
}

impl Overrides {
    fn apply(self, spec: &mut ExperimentSpec) {
        macro_rules! set {
            ($($field:ident => $($target:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$field { spec.$($target).+ = v; })*
            };
        }
        set! {
            reward => reward, prior => prior, pairs => pairs, seed => seed, out => out, workers => workers,
            updates => game.updates, batch => game.batch, numbers => game.numbers, words => game.words,
            dropout => game.dropout, lr => game.lr, hidden => game.hidden, init => game.init,
            mc_samples => game.mc_samples, trace_every => game.trace_every,
            exact_threshold => tolerances.exact_threshold, cap_tol => tolerances.cap_tol,
            cap_max_iter => tolerances.cap_max_iter, maxent_tol => tolerances.maxent_tol, weber => tolerances.weber,
            frontier_restarts => search.frontier_restarts, consensus_restarts => search.consensus_restarts,
            weber_exponent => search.weber_exponent,
        }
        if self.humans.is_some() {
            spec.humans = self.humans;
        }
    }
}

fn frontier(spec: &ExperimentSpec) -> Result<()> {
    let prior = run::resolve_prior(spec)?;
    let rows = run::run_frontier(spec, &prior)?;
    info!("wrote {} envelope rows", rows.len());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut spec = match &cli.config {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec::default(),
    };
    cli.overrides.apply(&mut spec);
    spec.validate()?;
    std::fs::create_dir_all(&spec.out)?;
    match cli.command {
        Command::Train => {
            let summary = run::run_experiment(&spec)?;
            info!("{} pairs trained, {} failed", summary.results.len(), summary.failures.len());
        }
        Command::Frontier => frontier(&spec)?,
        Command::Priors => {
            run::run_priors(&spec)?;
        }
        Command::Analyze => {
            run::run_analyze(&spec)?;
        }
        Command::Consensus => {
            run::run_consensus(&spec)?;
        }
        Command::Weber => {
            run::run_weber(&spec)?;
        }
        Command::Plot => {
            for p in plot::emit_plots(&spec.out)? {
                info!("wrote {}", p.display());
            }
        }
        Command::All => {
            run::run_experiment(&spec)?;
            frontier(&spec)?;
            run::run_analyze(&spec)?;
            run::run_consensus(&spec)?;
            run::run_weber(&spec)?;
            plot::emit_plots(&spec.out)?;
        }
    }
    Ok(())
}
