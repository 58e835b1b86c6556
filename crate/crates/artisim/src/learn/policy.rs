//! Gaussian control policy and running observation normalizer.
//!
//! The policy maps an observation to a diagonal Gaussian over actions: an
//! MLP produces the mean, and a state-independent per-dimension log standard
//! deviation is learned alongside it. A separate value head with the same
//! trunk shape (but its own weights) estimates returns.
//!
//! Observations are whitened by a running mean/variance (Welford) before
//! hitting either net, then clamped to ±10 standard deviations so one bad
//! outlier can't blow up the first layer. The normalizer only updates
//! when training code explicitly feeds it, so evaluation runs are frozen.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::net::Mlp;
use super::LearnError;

/// Half-width of the whitened-observation clamp, in standard deviations.
const OBS_CLIP: f64 = 10.0;

/// Running per-dimension mean/variance for observation whitening.
#[derive(Clone, Debug)]
pub struct ObsNormalizer {
    pub mean: DVector<f64>,
    /// Sum of squared deviations from the running mean (Welford's M2).
    pub m2: DVector<f64>,
    pub count: f64,
}

impl ObsNormalizer {
    pub fn new(dim: usize) -> Self {
        ObsNormalizer { mean: DVector::zeros(dim), m2: DVector::zeros(dim), count: 0.0 }
    }

    /// Fold one raw observation into the running statistics.
    pub fn update(&mut self, obs: &DVector<f64>) {
        self.count += 1.0;
        for i in 0..self.mean.nrows() {
            let delta = obs[i] - self.mean[i];
            self.mean[i] += delta / self.count;
            self.m2[i] += delta * (obs[i] - self.mean[i]);
        }
    }

    fn variance(&self, i: usize) -> f64 {
        if self.count < 2.0 {
            1.0
        } else {
            self.m2[i] / self.count
        }
    }

    /// Whiten and clamp one observation.
    pub fn normalize(&self, obs: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(obs.nrows(), |i, _| {
            let z = (obs[i] - self.mean[i]) / (self.variance(i) + 1e-8).sqrt();
            z.clamp(-OBS_CLIP, OBS_CLIP)
        })
    }

    /// Whiten a batch (columns = samples).
    pub fn normalize_batch(&self, obs: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(obs.nrows(), obs.ncols(), |i, c| {
            let z = (obs[(i, c)] - self.mean[i]) / (self.variance(i) + 1e-8).sqrt();
            z.clamp(-OBS_CLIP, OBS_CLIP)
        })
    }
}

// ---------------------------------------------------------------------------

/// Policy + value function sharing one observation pipeline.
#[derive(Clone, Debug)]
pub struct Policy {
    pub mean_net: Mlp,
    pub value_net: Mlp,
    /// Per-action-dimension log standard deviation (state independent).
    pub log_std: DVector<f64>,
    pub norm: ObsNormalizer,
}

/// Everything `act` reports about one decision.
#[derive(Clone, Debug)]
pub struct ActOutput {
    pub action: DVector<f64>,
    pub log_prob: f64,
    pub value: f64,
}

impl Policy {
    /// Fresh policy: `hidden` tanh layers between `obs_dim` and `act_dim`.
    /// The mean head starts near zero so early actions hug the PD hold
    /// targets; the value head starts at ordinary scale.
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        log_std_init: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        let mut mean_sizes = sizes.clone();
        mean_sizes.push(act_dim);
        let mut value_sizes = sizes;
        value_sizes.push(1);
        Policy {
            mean_net: Mlp::new(&mean_sizes, 0.01, rng),
            value_net: Mlp::new(&value_sizes, 1.0, rng),
            log_std: DVector::from_element(act_dim, log_std_init),
            norm: ObsNormalizer::new(obs_dim),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    /// Hidden layer widths (shared shape between the two nets).
    pub fn hidden_sizes(&self) -> Vec<usize> {
        let s = self.mean_net.sizes();
        s[1..s.len() - 1].to_vec()
    }

    /// Sample (or take the mean of) the action distribution at `obs`.
    ///
    /// Returns the action, its log density under the current distribution,
    /// and the value estimate. A non-finite network output aborts with a
    /// parameter checksum so the failing snapshot can be identified.
    pub fn act(
        &self,
        obs: &DVector<f64>,
        rng: &mut impl Rng,
        deterministic: bool,
    ) -> Result<ActOutput, LearnError> {
        let z = self.norm.normalize(obs);
        let zb = DMatrix::from_column_slice(z.nrows(), 1, z.as_slice());
        let mean = self.mean_net.forward(&zb).column(0).into_owned();
        let value = self.value_net.forward(&zb)[(0, 0)];
        if !value.is_finite() || mean.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFiniteNetwork { checksum: self.param_checksum() });
        }
        let action = if deterministic {
            mean.clone()
        } else {
            DVector::from_fn(mean.nrows(), |i, _| {
                mean[i] + self.log_std[i].exp() * rng.sample::<f64, _>(StandardNormal)
            })
        };
        let log_prob = self.log_prob(&mean, &action);
        Ok(ActOutput { action, log_prob, value })
    }

    /// Log density of `action` under N(mean, diag(exp(log_std))²).
    pub fn log_prob(&self, mean: &DVector<f64>, action: &DVector<f64>) -> f64 {
        let mut lp = 0.0;
        for i in 0..mean.nrows() {
            let s = self.log_std[i].exp();
            let z = (action[i] - mean[i]) / s;
            lp += -0.5 * z * z - self.log_std[i] - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        lp
    }

    /// Mean entropy of the action distribution (state independent for a
    /// diagonal Gaussian with fixed log_std).
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln())).sum()
    }

    // --- flat parameter plumbing (Adam + checkpoints + gradient checks) ---

    pub fn param_count(&self) -> usize {
        self.mean_net.param_count() + self.value_net.param_count() + self.log_std.nrows()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.mean_net.write_flat(&mut out);
        self.value_net.write_flat(&mut out);
        out.extend(self.log_std.iter());
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let k = self.mean_net.read_flat(flat);
        let k2 = k + self.value_net.read_flat(&flat[k..]);
        for (i, v) in flat[k2..].iter().enumerate() {
            self.log_std[i] = *v;
        }
    }

    /// Order-sensitive digest of all parameters (FNV-1a over the bit
    /// patterns), used to label non-finite-network faults.
    pub fn param_checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.params_flat() {
            for byte in v.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

// ---------------------------------------------------------------------------
