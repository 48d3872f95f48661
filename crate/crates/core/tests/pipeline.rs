//! End-to-end checks across training, estimation and scoring.

use numsig_core::analysis::{comm_cost, estimate_naming, mode_system, partition_cost};
use numsig_core::frontier::{exact_frontier, Extreme};
use numsig_core::game::train_pair;
use numsig_core::neural::Init;
use numsig_core::{reward, GameConfig, GameConfig32, NeedPrior, NeedPrior32, NumberLine, RewardKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn power_law(alpha: f64) -> NeedPrior {
    NeedPrior::from_weights((1..=20).map(|n| f64::from(n).powf(-alpha)).collect()).unwrap()
}

#[test]
fn untrained_pair_matches_brute_force_expectation() {
    let line = NumberLine::default();
    let prior = power_law(2.0);
    let mut cfg = GameConfig::new(line, RewardKind::Linear, prior.clone(), 5);
    cfg.init = Init::Zeros;
    cfg.batch_size = 20_000;
    cfg.updates = 1;
    // All-zero nets tie everywhere, so the listener always guesses 1.
    let expected: f64 = line.numbers().zip(prior.probs()).map(|(n, p)| p * reward::<f64>(RewardKind::Linear, n, 1, line).unwrap()).sum();
    let pair = train_pair(&cfg).unwrap();
    // Five binomial standard errors of a reward bounded in [0, 1].
    assert!((pair.reward_trace[0] - expected).abs() < 5.0 * 0.5 / (20_000f64).sqrt());
}

#[test]
fn learning_raises_reward() {
    let prior = power_law(2.0);
    for seed in 0..6 {
        let mut cfg = GameConfig::new(NumberLine::default(), RewardKind::Linear, prior.clone(), seed);
        cfg.updates = 1500;
        let pair = train_pair(&cfg).unwrap();
        let lead: f64 = pair.reward_trace[..200].iter().sum::<f64>() / 200.0;
        assert!(pair.trailing_mean_reward(200) > lead, "seed {seed}");
    }
}

#[test]
fn trained_lexicon_scores_between_frontier_extremes() {
    let prior = power_law(2.0);
    let mut cfg = GameConfig::new(NumberLine::default(), RewardKind::Exponential, prior.clone(), 11);
    cfg.updates = 2000;
    let pair = train_pair(&cfg).unwrap();
    let mode = mode_system(&estimate_naming(&pair.sender, 500, &mut ChaCha8Rng::seed_from_u64(1)).unwrap());
    let k = mode.term_count();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let best = exact_frontier(&prior, k, Extreme::Best, 50, &mut rng).unwrap()[k - 1].cost_bits;
    let worst = exact_frontier(&prior, k, Extreme::Worst, 50, &mut rng).unwrap()[k - 1].cost_bits;
    let cost = partition_cost(&mode, &prior).unwrap();
    assert!(cost >= best - 1e-9 && cost <= worst + 1e-9, "{best} <= {cost} <= {worst}");
}

#[test]
fn single_precision_pipeline() {
    let prior = NeedPrior32::from_weights((1..=20).map(|n| (n as f32).powf(-2.0)).collect()).unwrap();
    let mut cfg = GameConfig32::new(NumberLine::default(), RewardKind::Inverse, prior.clone(), 3);
    cfg.updates = 300;
    let pair = train_pair(&cfg).unwrap();
    let naming = estimate_naming(&pair.sender, 200, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let report = comm_cost(&naming, &prior).unwrap();
    assert!(report.cost_bits.is_finite() && report.cost_bits >= 0.0);
    assert!(report.cost_bits <= prior.entropy_bits() + 1e-4);
    assert!((1..=10).contains(&report.term_count));
}
