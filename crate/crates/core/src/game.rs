//! The Lewis signaling game: a number is drawn from the need prior, the
//! sender names it, the listener guesses it back, and both receive the same
//! reward. Each agent acts greedily under a freshly sampled dropout mask and
//! is regressed onto the reward with one Adam step per batch of rounds.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{NeedPrior, NumberLine, RewardKind, Vocabulary};
use crate::error::{Error, Result};
use crate::neural::{AgentNet, DropoutMask, Init, NetConfig, Sample};
use crate::scalar::{argmax_lowest, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig<T = f64> {
    pub line: NumberLine,
    pub vocab: Vocabulary,
    pub reward_kind: RewardKind,
    pub prior: NeedPrior<T>,
    pub batch_size: usize,
    pub updates: usize,
    /// Dropout rate `p`; hidden units are kept with probability `1 - p`.
    pub dropout: f64,
    pub lr: f64,
    pub hidden: usize,
    pub init: Init,
    pub seed: u64,
}

impl<T: Real> GameConfig<T> {
    /// Defaults: 10 words, batches of 100, 10 000 updates, dropout 0.3,
    /// learning rate 0.001, 50 hidden units.
    pub fn new(line: NumberLine, reward_kind: RewardKind, prior: NeedPrior<T>, seed: u64) -> Self {
        Self {
            line,
            vocab: Vocabulary::default(),
            reward_kind,
            prior,
            batch_size: 100,
            updates: 10_000,
            dropout: 0.3,
            lr: 1e-3,
            hidden: 50,
            init: Init::Glorot,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.updates == 0 {
            return Err(Error::Domain("batch size and update count must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Domain(format!("dropout rate {} not in [0, 1)", self.dropout)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Domain(format!("learning rate {} must be positive", self.lr)));
        }
        if self.prior.len() != self.line.size() {
            return Err(Error::Shape { expected: self.line.size(), got: self.prior.len() });
        }
        Ok(())
    }

    fn net_config(&self, inputs: usize, outputs: usize) -> NetConfig<T> {
        let mut cfg = NetConfig::new(inputs, outputs);
        cfg.hidden = self.hidden;
        cfg.keep_prob = T::lit(1.0 - self.dropout);
        cfg.adam.lr = T::lit(self.lr);
        cfg.init = self.init;
        cfg
    }

    pub fn sender_config(&self) -> NetConfig<T> {
        self.net_config(self.line.size(), self.vocab.size())
    }

    pub fn listener_config(&self) -> NetConfig<T> {
        self.net_config(self.vocab.size(), self.line.size())
    }
}

/// One round of the game as seen by both agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T = f64> {
    pub n: u32,
    pub w: usize,
    pub n_hat: u32,
    pub r: T,
    pub sender_mask: DropoutMask,
    pub listener_mask: DropoutMask,
}

impl<T: Real> Transition<T> {
    /// What the sender observes: its state, its word, the reward.
    pub fn sender_sample(&self, line: NumberLine) -> Sample<'_, T> {
        Sample { input: (self.n - line.lo()) as usize, action: self.w, target: self.r, mask: Some(&self.sender_mask) }
    }

    /// What the listener observes: the word, its guess, the reward.
    pub fn listener_sample(&self, line: NumberLine) -> Sample<'_, T> {
        Sample { input: self.w, action: (self.n_hat - line.lo()) as usize, target: self.r, mask: Some(&self.listener_mask) }
    }
}

/// Play one round for a given number `n`.
pub fn play_round<T: Real, R: Rng + ?Sized>(
    sender: &AgentNet<T>,
    listener: &AgentNet<T>,
    n: u32,
    kind: RewardKind,
    line: NumberLine,
    rng: &mut R,
) -> Result<Transition<T>> {
    let n_idx = line.index_of(n)?;
    let sender_mask = sender.sample_mask(rng);
    let w = argmax_lowest(&sender.forward(n_idx, Some(&sender_mask))?);
    let listener_mask = listener.sample_mask(rng);
    let guess_idx = argmax_lowest(&listener.forward(w, Some(&listener_mask))?);
    let n_hat = line.number_at(guess_idx);
    let r = kind.of_distance(n.abs_diff(n_hat), line.size());
    Ok(Transition { n, w, n_hat, r, sender_mask, listener_mask })
}

/// Sampler for numbers drawn from a need prior.
#[derive(Debug, Clone)]
pub struct NeedSampler {
    line: NumberLine,
    dist: WeightedIndex<f64>,
}

impl NeedSampler {
    pub fn new<T: Real>(line: NumberLine, prior: &NeedPrior<T>) -> Result<Self> {
        if prior.len() != line.size() {
            return Err(Error::Shape { expected: line.size(), got: prior.len() });
        }
        let weights: Vec<f64> = prior.probs().iter().map(|p| p.as_f64()).collect();
        let dist = WeightedIndex::new(weights).map_err(|e| Error::Domain(format!("prior cannot be sampled: {e}")))?;
        Ok(Self { line, dist })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.line.number_at(self.dist.sample(rng))
    }
}

/// A batch of rounds with numbers drawn i.i.d. from the prior.
pub fn play_batch<T: Real, R: Rng + ?Sized>(
    sender: &AgentNet<T>,
    listener: &AgentNet<T>,
    config: &GameConfig<T>,
    sampler: &NeedSampler,
    rng: &mut R,
) -> Result<Vec<Transition<T>>> {
    (0..config.batch_size)
        .map(|_| {
            let n = sampler.sample(rng);
            play_round(sender, listener, n, config.reward_kind, config.line, rng)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainedPair<T = f64> {
    pub sender: AgentNet<T>,
    pub listener: AgentNet<T>,
    pub config: GameConfig<T>,
    /// Mean reward of the batch played before each update.
    pub reward_trace: Vec<T>,
}

impl<T: Real> TrainedPair<T> {
    /// Mean of the trace over its last `window` entries.
    pub fn trailing_mean_reward(&self, window: usize) -> T {
        let w = window.clamp(1, self.reward_trace.len().max(1));
        let tail = &self.reward_trace[self.reward_trace.len().saturating_sub(w)..];
        tail.iter().copied().sum::<T>() / T::count(tail.len().max(1))
    }
}

/// Initialize a sender/listener pair from `config.seed`. The returned RNG
/// continues the same stream and drives the game.
pub fn init_pair<T: Real>(config: &GameConfig<T>) -> Result<(AgentNet<T>, AgentNet<T>, ChaCha8Rng)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sender = AgentNet::new(&config.sender_config(), &mut rng)?;
    let listener = AgentNet::new(&config.listener_config(), &mut rng)?;
    Ok((sender, listener, rng))
}

/// Train a fresh pair for `config.updates` batches.
pub fn train_pair<T: Real>(config: &GameConfig<T>) -> Result<TrainedPair<T>> {
    let (mut sender, mut listener, mut rng) = init_pair(config)?;
    let sampler = NeedSampler::new(config.line, &config.prior)?;
    let line = config.line;
    let mut reward_trace = Vec::with_capacity(config.updates);
    for _ in 0..config.updates {
        let batch = play_batch(&sender, &listener, config, &sampler, &mut rng)?;
        let mean = batch.iter().map(|t| t.r).sum::<T>() / T::count(batch.len());
        reward_trace.push(mean);
        let sender_batch: Vec<_> = batch.iter().map(|t| t.sender_sample(line)).collect();
        let listener_batch: Vec<_> = batch.iter().map(|t| t.listener_sample(line)).collect();
        sender.train_batch(&sender_batch)?;
        listener.train_batch(&listener_batch)?;
    }
    Ok(TrainedPair { sender, listener, config: config.clone(), reward_trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> NumberLine {
        NumberLine::default()
    }

    fn uniform() -> NeedPrior<f64> {
        NeedPrior::new(vec![0.05; 20]).unwrap()
    }

    fn zero_pair(config: &GameConfig<f64>) -> (AgentNet<f64>, AgentNet<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = config.sender_config();
        s.init = Init::Zeros;
        let mut l = config.listener_config();
        l.init = Init::Zeros;
        (AgentNet::new(&s, &mut rng).unwrap(), AgentNet::new(&l, &mut rng).unwrap())
    }

    /// Sender maps n to word n-1 and listener maps word w back to w+1,
    /// on a 10-number line with 10 words.
    pub(crate) fn identity_pair(keep_prob: f64) -> (AgentNet<f64>, AgentNet<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cfg = NetConfig::new(10, 10);
        cfg.hidden = 10;
        cfg.init = Init::Zeros;
        cfg.keep_prob = keep_prob;
        let mut s = AgentNet::new(&cfg, &mut rng).unwrap();
        let mut l = AgentNet::new(&cfg, &mut rng).unwrap();
        for i in 0..10 {
            for net in [&mut s, &mut l] {
                net.set_w1(i, i, 10.0);
                net.set_w2(i, i, 10.0);
            }
        }
        (s, l)
    }

    #[test]
    fn identity_agents_communicate_perfectly() {
        let line = NumberLine::new(10).unwrap();
        let (s, l) = identity_pair(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=10 {
            let t: Transition<f64> = play_round(&s, &l, n, RewardKind::Linear, line, &mut rng).unwrap();
            assert_eq!(t.n_hat, n);
            assert_eq!(t.w, (n - 1) as usize);
            assert_eq!(t.r, 1.0);
        }
        let mut cfg = GameConfig::new(line, RewardKind::Exponential, NeedPrior::new(vec![0.1; 10]).unwrap(), 0);
        cfg.dropout = 0.0;
        let sampler = NeedSampler::new(line, &cfg.prior).unwrap();
        let batch = play_batch(&s, &l, &cfg, &sampler, &mut rng).unwrap();
        assert_eq!(batch.iter().map(|t| t.r).sum::<f64>() / batch.len() as f64, 1.0);
    }

    #[test]
    fn zero_nets_break_ties_low() {
        let cfg = GameConfig::new(line(), RewardKind::Linear, uniform(), 0);
        let (s, l) = zero_pair(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 7, 20] {
            let t = play_round(&s, &l, n, RewardKind::Linear, line(), &mut rng).unwrap();
            assert_eq!((t.w, t.n_hat), (0, 1));
            assert_eq!(t.r, reward::<f64>(RewardKind::Linear, n, 1, line()).unwrap());
        }
    }

    use crate::domain::reward;

    #[test]
    fn round_is_replayable() {
        let cfg = GameConfig::new(line(), RewardKind::Inverse, uniform(), 42);
        let (s, l, _) = init_pair(&cfg).unwrap();
        let a = play_round(&s, &l, 5, RewardKind::Inverse, line(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = play_round(&s, &l, 5, RewardKind::Inverse, line(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_prior_always_draws_its_number() {
        let mut probs = vec![0.0; 20];
        probs[2] = 1.0;
        let mut cfg = GameConfig::new(line(), RewardKind::Linear, NeedPrior::new(probs).unwrap(), 0);
        cfg.batch_size = 500;
        let (s, l, mut rng) = init_pair(&cfg).unwrap();
        let sampler = NeedSampler::new(line(), &cfg.prior).unwrap();
        let batch = play_batch(&s, &l, &cfg, &sampler, &mut rng).unwrap();
        assert!(batch.iter().all(|t| t.n == 3));
    }

    #[test]
    fn uniform_prior_sampling_frequencies() {
        let sampler = NeedSampler::new(line(), &uniform()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 20];
        for _ in 0..100_000 {
            counts[(sampler.sample(&mut rng) - 1) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 0.05).abs() < 0.01);
        }
    }

    #[test]
    fn stored_reward_matches_reward_function() {
        let mut cfg = GameConfig::new(line(), RewardKind::Exponential, uniform(), 8);
        cfg.batch_size = 300;
        let (s, l, mut rng) = init_pair(&cfg).unwrap();
        let sampler = NeedSampler::new(line(), &cfg.prior).unwrap();
        for t in play_batch(&s, &l, &cfg, &sampler, &mut rng).unwrap() {
            assert_eq!(t.r, reward::<f64>(cfg.reward_kind, t.n, t.n_hat, line()).unwrap());
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = GameConfig::new(line(), RewardKind::Linear, uniform(), 0);
        cfg.dropout = 1.0;
        assert!(cfg.validate().is_err());
        cfg.dropout = 0.3;
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        cfg.batch_size = 1;
        cfg.prior = NeedPrior::new(vec![0.5, 0.5]).unwrap();
        assert!(train_pair(&cfg).is_err());
    }

    #[test]
    fn short_training_is_deterministic() {
        let mut cfg = GameConfig::new(line(), RewardKind::Linear, uniform(), 123);
        cfg.updates = 50;
        let a = train_pair(&cfg).unwrap();
        let b = train_pair(&cfg).unwrap();
        assert_eq!(a.reward_trace.len(), 50);
        assert_eq!(a.reward_trace, b.reward_trace);
        assert_eq!(a.sender.params(), b.sender.params());
        assert!(a.reward_trace.iter().all(|&r| r > 0.0 && r <= 1.0));
    }
}
