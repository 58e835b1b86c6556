//! Sanity-check the policy-optimization stack on a one-armed bandit.
//!
//! The task is as small as reinforcement learning gets: one constant
//! observation, one action dimension, one-step episodes, reward −(a−0.7)².
//! A working optimizer must drag the policy mean from its near-zero
//! initialization up to 0.7 while the critic learns the average reward.
//! Run it twice with the same seed and the learning curves match to the
//! last bit; the final checkpoint round-trips through text and acts
//! identically.
//!
//! Usage: train_bandit [seed] [epochs]

use std::process::exit;

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

use artisim::learn::{
    run_training, Checkpoint, EpisodeEnv, LearnError, Policy, StepOutcome, TrainConfig,
};

/// Constant-observation bandit with reward peaked at action 0.7.
struct Bandit;

impl EpisodeEnv for Bandit {
    fn obs_dim(&self) -> usize {
        1
    }
    fn action_dim(&self) -> usize {
        1
    }
    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Result<DVector<f64>, LearnError> {
        Ok(DVector::zeros(1))
    }
    fn step(&mut self, action: &DVector<f64>) -> Result<StepOutcome, LearnError> {
        let a = action[0];
        Ok(StepOutcome { obs: DVector::zeros(1), reward: -(a - 0.7) * (a - 0.7), done: true })
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = match args.get(1).map(|s| s.parse()) {
        None => 7,
        Some(Ok(s)) => s,
        Some(Err(_)) => {
            eprintln!("usage: train_bandit [seed] [epochs]");
            exit(2);
        }
    };
    let epochs: usize = match args.get(2).map(|s| s.parse()) {
        None => 120,
        Some(Ok(e)) => e,
        Some(Err(_)) => {
            eprintln!("usage: train_bandit [seed] [epochs]");
            exit(2);
        }
    };

    let cfg = TrainConfig {
        steps_per_epoch: 512,
        batch_size: 256,
        update_passes: 10,
        learning_rate: 3e-3,
        hidden_layers: 1,
        hidden_units: 16,
        ..TrainConfig::default()
    };

    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = Policy::new(1, 1, &cfg.hidden(), cfg.log_std_init, &mut rng);
    let mut envs: Vec<Bandit> = (0..4).map(|_| Bandit).collect();

    println!("bandit: reward -(a-0.7)^2, seed {seed}, {epochs} epochs of {} steps", cfg.steps_per_epoch);
    println!("{:>5} {:>12} {:>10} {:>10} {:>8}", "epoch", "mean_reward", "action", "std", "clip%");

    let probe = DVector::zeros(1);
    let reports = run_training(&mut policy, &mut envs, &cfg, epochs, seed, |r, p| {
        let mut prng = ChaCha8Rng::seed_from_u64(0);
        let a = p.act(&probe, &mut prng, true).expect("policy act").action[0];
        if r.epoch % 10 == 0 || r.epoch + 1 == epochs {
            println!(
                "{:>5} {:>12.5} {:>10.4} {:>10.4} {:>8.2}",
                r.epoch,
                r.mean_episode_reward,
                a,
                p.log_std[0].exp(),
                100.0 * r.update.clip_fraction,
            );
        }
        true
    })
    .unwrap_or_else(|e| {
        eprintln!("training failed: {e}");
        exit(1);
    });

    let mut prng = ChaCha8Rng::seed_from_u64(0);
    let final_action = policy.act(&probe, &mut prng, true).expect("policy act").action[0];
    let first = reports.first().expect("at least one epoch");
    let last = reports.last().expect("at least one epoch");
    println!(
        "\nreward improved {:.5} -> {:.5}; deterministic action {final_action:.4} (target 0.7)",
        first.mean_episode_reward, last.mean_episode_reward
    );

    // Round-trip the result through the text checkpoint format and make
    // sure the restored policy is the same function.
    let mut ckpt = Checkpoint::new(0, policy);
    ckpt.epoch = last.epoch + 1;
    let text = ckpt.write_string();
    let restored = Checkpoint::parse(&text).expect("parse checkpoint");
    let mut prng = ChaCha8Rng::seed_from_u64(0);
    let replayed = restored.policy.act(&probe, &mut prng, true).expect("policy act").action[0];
    println!(
        "checkpoint: {} bytes, round-trip action {}",
        text.len(),
        if replayed == final_action { "identical" } else { "MISMATCH" }
    );

    if (final_action - 0.7).abs() > 0.05 {
        eprintln!("policy failed to reach the reward peak");
        exit(1);
    }
}
