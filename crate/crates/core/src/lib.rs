//! Emergent numeral systems from a two-agent Lewis signaling game.
//!
//! A sender and a listener, each a small dropout network acting greedily on
//! a sampled sub-network, learn to communicate numbers over a fixed
//! vocabulary. The resulting lexicons are scored by the expected surprisal
//! of a Bayesian listener and compared against optimized hypothetical
//! systems, consensus partitions and a Gaussian number-sense model.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what the experiment
//! runner uses.

// Negated comparisons are how NaN inputs get rejected; index loops read
// better than zipped iterators in the dense numeric kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod consensus;
pub mod domain;
pub mod error;
pub mod frontier;
pub mod game;
pub mod neural;
pub mod priors;
pub mod scalar;
pub mod weber;

pub use consensus::AgreementMatrix;
pub use domain::{reward, NumberLine, NumeralSystem, RewardKind, Vocabulary};
pub use error::{Error, Result};
pub use scalar::Real;

pub type NeedPrior = domain::NeedPrior<f64>;
pub type NamingDistribution = domain::NamingDistribution<f64>;
pub type AgentNet = neural::AgentNet<f64>;
pub type GameConfig = game::GameConfig<f64>;
pub type TrainedPair = game::TrainedPair<f64>;
pub type ListenerPosterior = analysis::ListenerPosterior<f64>;
pub type CostReport = analysis::CostReport<f64>;
pub type FrontierPoint = frontier::FrontierPoint<f64>;
pub type Envelope = frontier::Envelope<f64>;
pub type FrequencyTable = priors::FrequencyTable<f64>;
pub type WordFrequency = priors::WordFrequency<f64>;
pub type CapResult = priors::CapResult<f64>;
pub type MaxEntResult = priors::MaxEntResult<f64>;
pub type PairPosterior = weber::PairPosterior<f64>;
pub type WeberFit = weber::WeberFit<f64>;
pub type WeberReport = weber::WeberReport<f64>;

pub type NeedPrior32 = domain::NeedPrior<f32>;
pub type NamingDistribution32 = domain::NamingDistribution<f32>;
pub type AgentNet32 = neural::AgentNet<f32>;
pub type GameConfig32 = game::GameConfig<f32>;
