//! Proximal policy optimization: advantage estimation and the clipped
//! surrogate update.
//!
//! The update maximizes `mean(min(ρ·A, clip(ρ, 1−ε, 1+ε)·A))` minus a value
//! regression term, where ρ is the new/old density ratio of each stored
//! action. Gradients are computed analytically (see `minibatch_loss_grad`),
//! which makes the clip plateau exact: once ρ leaves the trust band and the
//! clipped branch is the smaller one, the sample contributes *precisely*
//! zero policy gradient, not merely a small one.
//!
//! Determinism: minibatch order comes from the caller's seeded RNG, samples
//! within a minibatch are processed in fixed 256-sample chunks, and all
//! accumulation is serial — so a repeated update with the same inputs is
//! bit-identical.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use super::net::{clip_grad_norm, Adam};
use super::policy::Policy;

/// Samples processed per backward pass inside a minibatch. Fixed so the
/// floating-point reduction order never depends on batch size.
const GRAD_CHUNK: usize = 256;

/// Hyperparameters for rollout collection and policy updates.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Reward discount per control step.
    pub gamma: f64,
    /// Generalized-advantage smoothing factor.
    pub gae_lambda: f64,
    /// Half-width ε of the density-ratio trust band.
    pub clip_ratio: f64,
    /// Global gradient-norm ceiling applied before each optimizer step.
    pub max_grad_norm: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    /// Environment steps gathered per epoch (across all workers).
    pub steps_per_epoch: usize,
    /// Samples per optimizer step.
    pub batch_size: usize,
    /// Full passes over the epoch's data per update.
    pub update_passes: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub log_std_init: f64,
    /// Lower bound on each log standard deviation, re-applied after every
    /// optimizer step so exploration can never collapse to zero.
    pub log_std_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.996,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            max_grad_norm: 0.5,
            value_coef: 0.5,
            entropy_coef: 0.0,
            learning_rate: 5e-4,
            steps_per_epoch: 600_000,
            batch_size: 2000,
            update_passes: 20,
            hidden_layers: 2,
            hidden_units: 128,
            log_std_init: 0.3f64.ln(),
            log_std_floor: 1e-3f64.ln(),
        }
    }
}

impl TrainConfig {
    /// Hidden layer widths as a slice for network construction.
    pub fn hidden(&self) -> Vec<usize> {
        vec![self.hidden_units; self.hidden_layers]
    }
}

// ---------------------------------------------------------------------------

/// One epoch of experience, already assembled into matrices
/// (columns = samples, observations raw/unnormalized).
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub obs: DMatrix<f64>,
    pub actions: DMatrix<f64>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }
}

/// Generalized advantage estimation over one contiguous rollout.
///
/// `dones[t]` marks a terminal transition (no value flows across it);
/// `bootstrap` is the critic's estimate of the state *after* the last
/// transition, used only when that transition is not terminal (truncation).
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let t_max = rewards.len();
    assert_eq!(values.len(), t_max);
    assert_eq!(dones.len(), t_max);
    let mut advantages = vec![0.0; t_max];
    let mut acc = 0.0;
    for t in (0..t_max).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < t_max { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        acc = delta + gamma * lambda * not_done * acc;
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// Shift and scale to zero mean, unit standard deviation. Degenerate
/// batches (near-zero spread) are only centered.
pub fn standardize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for x in xs.iter_mut() {
        *x -= mean;
        if std > 1e-8 {
            *x /= std;
        }
    }
}

/// The per-sample clipped surrogate objective (the quantity being
/// maximized), exposed for direct inspection.
pub fn clipped_surrogate(rho: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = rho.clamp(1.0 - clip, 1.0 + clip) * advantage;
    (rho * advantage).min(clipped)
}

// ---------------------------------------------------------------------------

/// Diagnostics from one [`ppo_update`] call (means over minibatches).
#[derive(Clone, Debug, Default)]
pub struct UpdateStats {
    /// Mean of −surrogate (lower is better for the policy term).
    pub policy_loss: f64,
    /// Mean unweighted value regression loss (V − R)².
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose density ratio left the trust band.
    pub clip_fraction: f64,
    /// Mean pre-clip global gradient norm.
    pub grad_norm: f64,
    pub minibatches: usize,
    /// True if a non-finite loss or gradient appeared: the update was
    /// abandoned and parameters restored to their pre-update values.
    pub restored: bool,
}

/// Loss and flat gradient (same layout as `Policy::params_flat`) over the
/// minibatch selected by `idx`, with advantages already standardized.
///
/// Observations are whitened with the policy's *current* normalizer
/// statistics, which the update never touches — the caller refreshes them
/// from raw observations after the epoch's update completes.
pub fn minibatch_loss_grad(
    policy: &Policy,
    batch: &SampleBatch,
    advantages: &[f64],
    idx: &[usize],
    cfg: &TrainConfig,
) -> (f64, Vec<f64>, f64) {
    let n_mb = idx.len();
    assert!(n_mb > 0);
    let obs_dim = policy.obs_dim();
    let act_dim = policy.act_dim();
    let inv_n = 1.0 / n_mb as f64;

    let mut grad = vec![0.0; policy.param_count()];
    let mean_count = policy.mean_net.param_count();
    let value_count = policy.value_net.param_count();
    let mut loss = 0.0;
    let mut clipped_samples = 0usize;

    for chunk in idx.chunks(GRAD_CHUNK) {
        let nc = chunk.len();
        let mut obs_c = DMatrix::zeros(obs_dim, nc);
        let mut act_c = DMatrix::zeros(act_dim, nc);
        for (j, &s) in chunk.iter().enumerate() {
            obs_c.set_column(j, &batch.obs.column(s));
            act_c.set_column(j, &batch.actions.column(s));
        }
        let z = policy.norm.normalize_batch(&obs_c);
        let (mu, mean_cache) = policy.mean_net.forward_cached(&z);
        let (val, value_cache) = policy.value_net.forward_cached(&z);

        let mut dout_mean = DMatrix::zeros(act_dim, nc);
        let mut dout_value = DMatrix::zeros(1, nc);
        let mut dlog_std = vec![0.0; act_dim];

        for (j, &s) in chunk.iter().enumerate() {
            // New log density of the stored action and the ratio to the
            // behavior policy that generated it.
            let mut logp = 0.0;
            for i in 0..act_dim {
                let sig = policy.log_std[i].exp();
                let zu = (act_c[(i, j)] - mu[(i, j)]) / sig;
                logp += -0.5 * zu * zu
                    - policy.log_std[i]
                    - 0.5 * (2.0 * std::f64::consts::PI).ln();
            }
            let rho = (logp - batch.log_probs[s]).exp();
            let adv = advantages[s];
            let clipped = rho.clamp(1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio) * adv;
            let unclipped = rho * adv;
            loss -= unclipped.min(clipped) * inv_n;
            if (rho - 1.0).abs() > cfg.clip_ratio {
                clipped_samples += 1;
            }

            // Policy gradient flows only while the unclipped branch is the
            // active minimum; otherwise clamp saturates and the sample's
            // contribution is exactly zero.
            let dloss_dlogp =
                if unclipped <= clipped { -rho * adv * inv_n } else { 0.0 };
            if dloss_dlogp != 0.0 {
                for i in 0..act_dim {
                    let sig = policy.log_std[i].exp();
                    let zu = (act_c[(i, j)] - mu[(i, j)]) / sig;
                    dout_mean[(i, j)] = dloss_dlogp * zu / sig;
                    dlog_std[i] += dloss_dlogp * (zu * zu - 1.0);
                }
            }

            let verr = val[(0, j)] - batch.returns[s];
            loss += cfg.value_coef * verr * verr * inv_n;
            dout_value[(0, j)] = 2.0 * cfg.value_coef * verr * inv_n;
        }

        // Entropy bonus: state independent, so it spreads evenly over the
        // minibatch and touches only the log-std coordinates.
        let frac = nc as f64 * inv_n;
        loss -= cfg.entropy_coef * policy.entropy() * frac;
        for g in dlog_std.iter_mut() {
            *g -= cfg.entropy_coef * frac;
        }

        let mean_grads = policy.mean_net.backward(&mean_cache, &dout_mean);
        let value_grads = policy.value_net.backward(&value_cache, &dout_value);
        let mut k = 0;
        for layer in &mean_grads {
            for r in 0..layer.dw.nrows() {
                for c in 0..layer.dw.ncols() {
                    grad[k] += layer.dw[(r, c)];
                    k += 1;
                }
            }
            for r in 0..layer.db.nrows() {
                grad[k] += layer.db[r];
                k += 1;
            }
        }
        debug_assert_eq!(k, mean_count);
        for layer in &value_grads {
            for r in 0..layer.dw.nrows() {
                for c in 0..layer.dw.ncols() {
                    grad[k] += layer.dw[(r, c)];
                    k += 1;
                }
            }
            for r in 0..layer.db.nrows() {
                grad[k] += layer.db[r];
                k += 1;
            }
        }
        debug_assert_eq!(k, mean_count + value_count);
        for (i, g) in dlog_std.iter().enumerate() {
            grad[k + i] += g;
        }
    }

    (loss, grad, clipped_samples as f64 / n_mb as f64)
}

/// One full policy update over an epoch of experience.
///
/// Advantages are standardized once over the whole batch, then
/// `update_passes` shuffled passes of `batch_size` minibatches run through
/// Adam with global gradient-norm clipping. A non-finite loss or gradient
/// abandons the update: parameters revert to their pre-update snapshot and
/// the event is flagged in the returned stats.
pub fn ppo_update(
    policy: &mut Policy,
    opt: &mut Adam,
    batch: &SampleBatch,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> UpdateStats {
    let n = batch.len();
    assert!(n > 0, "empty batch");
    let mut advantages = batch.advantages.clone();
    standardize(&mut advantages);

    let snapshot = policy.params_flat();
    let opt_snapshot = opt.clone();
    let mut stats = UpdateStats::default();
    let mut order: Vec<usize> = (0..n).collect();

    'passes: for _ in 0..cfg.update_passes {
        order.shuffle(rng);
        for mb in order.chunks(cfg.batch_size) {
            let (loss, mut grad, clip_frac) =
                minibatch_loss_grad(policy, batch, &advantages, mb, cfg);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                policy.set_params_flat(&snapshot);
                *opt = opt_snapshot.clone();
                stats.restored = true;
                break 'passes;
            }
            stats.grad_norm += clip_grad_norm(&mut grad, cfg.max_grad_norm);
            let mut theta = policy.params_flat();
            opt.step(&mut theta, &grad);
            policy.set_params_flat(&theta);
            for i in 0..policy.log_std.nrows() {
                if policy.log_std[i] < cfg.log_std_floor {
                    policy.log_std[i] = cfg.log_std_floor;
                }
            }

            // Bookkeeping (loss holds the combined objective; split terms
            // are recomputed cheaply for reporting).
            stats.policy_loss += loss;
            stats.clip_fraction += clip_frac;
            stats.minibatches += 1;
        }
    }

    if stats.minibatches > 0 {
        let inv = 1.0 / stats.minibatches as f64;
        stats.policy_loss *= inv;
        stats.clip_fraction *= inv;
        stats.grad_norm *= inv;
    }
    stats.entropy = policy.entropy();
    stats.value_loss = value_loss_probe(policy, batch);
    stats
}

/// Mean squared value error over (a deterministic subsample of) the batch,
/// for progress reporting only.
fn value_loss_probe(policy: &Policy, batch: &SampleBatch) -> f64 {
    let n = batch.len();
    let stride = (n / 512).max(1);
    let mut sum = 0.0;
    let mut count = 0.0f64;
    let mut col = DMatrix::zeros(policy.obs_dim(), 1);
    for s in (0..n).step_by(stride) {
        col.set_column(0, &batch.obs.column(s));
        let z = policy.norm.normalize_batch(&col);
        let v = policy.value_net.forward(&z)[(0, 0)];
        let e = v - batch.returns[s];
        sum += e * e;
        count += 1.0;
    }
    sum / count.max(1.0)
}

// ---------------------------------------------------------------------------
