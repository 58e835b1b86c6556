//! Experience collection across parallel workers and the epoch loop.
//!
//! Each worker owns one environment plus an immutable snapshot of the
//! policy, so collection needs no locks. Determinism comes from seeding:
//! worker w in epoch e draws from a counter RNG keyed by (run seed, w, e),
//! and finished rollouts are merged in worker-index order — thread
//! scheduling can reorder the *work* but never the *data*.
//!
//! Observation-normalizer statistics stay frozen during both collection and
//! the update, then absorb the epoch's raw observations afterwards. The
//! one-epoch lag keeps the density ratios exact: the first update pass sees
//! the same whitening the behavior policy used.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::net::Adam;
use super::policy::Policy;
use super::ppo::{gae, ppo_update, SampleBatch, TrainConfig, UpdateStats};
use super::LearnError;

/// What one environment step reports back.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    /// Observation of the state the step produced (valid even on the final
    /// step of an episode).
    pub obs: DVector<f64>,
    pub reward: f64,
    pub done: bool,
}

/// An episodic environment a rollout worker can drive.
pub trait EpisodeEnv: Send {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Start a fresh episode and return its first observation.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<DVector<f64>, LearnError>;
    fn step(&mut self, action: &DVector<f64>) -> Result<StepOutcome, LearnError>;
}

/// One stored environment transition.
#[derive(Clone, Debug)]
pub struct Transition {
    /// Raw (unnormalized) observation the action was chosen from.
    pub obs: DVector<f64>,
    pub action: DVector<f64>,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// Everything one worker gathered in an epoch.
#[derive(Clone, Debug)]
pub struct WorkerRollout {
    pub transitions: Vec<Transition>,
    /// Critic estimate of the state after the final transition; zero when
    /// that transition ended its episode.
    pub bootstrap: f64,
    pub episodes: usize,
    pub reward_sum: f64,
}

/// FNV-1a over the three words, giving well-spread per-worker seeds.
pub fn mix_seed(seed: u64, worker: u64, epoch: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for word in [seed, worker, epoch] {
        for byte in word.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Gather `steps_per_worker` transitions from every environment in
/// parallel. Results come back in worker-index order regardless of how the
/// threads were scheduled.
pub fn collect_rollouts<E: EpisodeEnv>(
    policy: &Policy,
    envs: &mut [E],
    steps_per_worker: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<WorkerRollout>, LearnError> {
    envs.par_iter_mut()
        .enumerate()
        .map(|(worker, env)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, worker as u64, epoch));
            let mut out = WorkerRollout {
                transitions: Vec::with_capacity(steps_per_worker),
                bootstrap: 0.0,
                episodes: 0,
                reward_sum: 0.0,
            };
            let mut obs = env.reset(&mut rng)?;
            let mut last: Option<StepOutcome> = None;
            while out.transitions.len() < steps_per_worker {
                let act = policy.act(&obs, &mut rng, false)?;
                let outcome = env.step(&act.action)?;
                out.reward_sum += outcome.reward;
                out.transitions.push(Transition {
                    obs,
                    action: act.action,
                    log_prob: act.log_prob,
                    value: act.value,
                    reward: outcome.reward,
                    done: outcome.done,
                });
                if outcome.done {
                    out.episodes += 1;
                    obs = env.reset(&mut rng)?;
                } else {
                    obs = outcome.obs.clone();
                }
                last = Some(outcome);
            }
            if let Some(outcome) = last {
                if !outcome.done {
                    // Truncated by the step budget: bootstrap the tail
                    // through the critic.
                    out.bootstrap = policy.act(&outcome.obs, &mut rng, true)?.value;
                }
            }
            Ok(out)
        })
        .collect()
}

/// Concatenate per-worker rollouts (in worker order) into one update batch,
/// running advantage estimation per worker so episode boundaries and
/// truncation bootstraps stay correct.
pub fn assemble_batch(rollouts: &[WorkerRollout], cfg: &TrainConfig) -> SampleBatch {
    let total: usize = rollouts.iter().map(|r| r.transitions.len()).sum();
    assert!(total > 0, "no transitions collected");
    let obs_dim = rollouts[0].transitions[0].obs.nrows();
    let act_dim = rollouts[0].transitions[0].action.nrows();
    let mut obs = DMatrix::zeros(obs_dim, total);
    let mut actions = DMatrix::zeros(act_dim, total);
    let mut log_probs = Vec::with_capacity(total);
    let mut advantages = Vec::with_capacity(total);
    let mut returns = Vec::with_capacity(total);
    let mut col = 0;
    for r in rollouts {
        let rewards: Vec<f64> = r.transitions.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = r.transitions.iter().map(|t| t.value).collect();
        let dones: Vec<bool> = r.transitions.iter().map(|t| t.done).collect();
        let (adv, ret) = gae(&rewards, &values, &dones, r.bootstrap, cfg.gamma, cfg.gae_lambda);
        for (t, transition) in r.transitions.iter().enumerate() {
            obs.set_column(col, &transition.obs);
            actions.set_column(col, &transition.action);
            log_probs.push(transition.log_prob);
            advantages.push(adv[t]);
            returns.push(ret[t]);
            col += 1;
        }
    }
    SampleBatch { obs, actions, log_probs, advantages, returns }
}

// ---------------------------------------------------------------------------

/// Per-epoch training diagnostics.
#[derive(Clone, Debug)]
pub struct EpochReport {
    pub epoch: usize,
    /// Cumulative environment steps over the whole run.
    pub env_steps: usize,
    /// Episodes completed this epoch (across workers).
    pub episodes: usize,
    /// Collected reward divided by completed episodes (the trailing partial
    /// episode's reward is included in the numerator).
    pub mean_episode_reward: f64,
    pub update: UpdateStats,
}

/// Run the full collect → estimate → update loop for `epochs` epochs.
///
/// `on_epoch` sees each report plus the freshly updated policy and may
/// return `false` to stop early (curricula use this for phase switching and
/// convergence exits). Workers share the step budget evenly, rounded up so
/// the requested `steps_per_epoch` is always met.
pub fn run_training<E, F>(
    policy: &mut Policy,
    envs: &mut [E],
    cfg: &TrainConfig,
    epochs: usize,
    seed: u64,
    mut on_epoch: F,
) -> Result<Vec<EpochReport>, LearnError>
where
    E: EpisodeEnv,
    F: FnMut(&EpochReport, &Policy) -> bool,
{
    assert!(!envs.is_empty(), "need at least one environment");
    let mut opt = Adam::new(cfg.learning_rate, policy.param_count());
    let steps_per_worker = cfg.steps_per_epoch.div_ceil(envs.len());
    let mut reports = Vec::with_capacity(epochs);
    let mut env_steps = 0;
    for epoch in 0..epochs {
        let rollouts = collect_rollouts(policy, envs, steps_per_worker, seed, epoch as u64)?;
        let batch = assemble_batch(&rollouts, cfg);
        env_steps += batch.len();
        let episodes: usize = rollouts.iter().map(|r| r.episodes).sum();
        let reward_sum: f64 = rollouts.iter().map(|r| r.reward_sum).sum();

        let mut update_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::MAX, epoch as u64));
        let update = ppo_update(policy, &mut opt, &batch, cfg, &mut update_rng);

        // Fold the epoch's raw observations into the whitening statistics
        // only now — see the module docs for why the lag matters.
        for c in 0..batch.obs.ncols() {
            policy.norm.update(&batch.obs.column(c).into_owned());
        }

        let report = EpochReport {
            epoch,
            env_steps,
            episodes,
            mean_episode_reward: reward_sum / episodes.max(1) as f64,
            update,
        };
        let go_on = on_epoch(&report, policy);
        reports.push(report);
        if !go_on {
            break;
        }
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
