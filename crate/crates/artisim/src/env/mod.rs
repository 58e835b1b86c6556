//! The decision-process layer: observations, rewards, resets, termination.
//!
//! A [`ManipulationEnv`] owns one object and one or two PD-controlled hands
//! in a shared scene. Actions are bounded deltas on each hand's 51 PD
//! targets; each action advances several physics substeps. Episodes start
//! with the hands backed off from their pose references with partially
//! opened fingers, and end on a step budget or when the object leaves the
//! workspace.

pub mod features;
pub mod reference;
pub mod reward;

use nalgebra::{DVector, Vector3};
use rand::Rng;
use thiserror::Error;

use crate::models::hand::{
    finger_q_index, ActionScale, HandModel, AXIS_FLEX, FINGERS, HAND_DOFS, REAL_LINKS,
    SEGMENTS_PER_FINGER,
};
use crate::models::object::ObjectModel;
use crate::sim::pd::PdTargets;
use crate::sim::tree::{kinematics, BodyKinematics, BodyState};
use crate::sim::{link_id, split_link_id, BodyRole, Scene, SceneBody, SimConfig, SimFault, TABLE_ID};

pub use features::{
    extract_features, feature_dim, HandObservation, ObjectObservation, FEATURE_LAYOUT_VERSION,
};
pub use reference::{
    fk_link_points, load_reference, parse_reference, save_reference, write_reference,
    HandPoseReference,
};
pub use reward::{compute_reward, RewardBreakdown, RewardWeights};

/// What an episode asks of the policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// Reach the reference and hold it; target articulation angle 0.
    Grasp,
    /// Drive the articulated part to a sampled target angle.
    Articulate,
}

/// Episode parameters and reward configuration.
#[derive(Clone, Copy, Debug)]
pub struct EnvConfig {
    /// Actions per episode.
    pub episode_steps: usize,
    pub weights: RewardWeights,
    /// Include the hinge axis/distance/mass block in observations.
    pub use_art_features: bool,
    /// Target articulation angles are sampled from this range [rad].
    pub target_angle_range: (f64, f64),
    /// Initial wrist back-off from the reference [m].
    pub init_offset_dist: f64,
    /// Initial finger flexion as a fraction of the reference flexion.
    pub init_open_fraction: f64,
    pub action_scale: ActionScale,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            episode_steps: 300,
            weights: RewardWeights::default(),
            use_art_features: true,
            target_angle_range: (0.3, 1.6),
            init_offset_dist: 0.15,
            init_open_fraction: 0.5,
            action_scale: ActionScale::default(),
        }
    }
}

/// Why an episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// The step budget ran out (normal end).
    TimeLimit,
    /// The object base dropped below the table plane.
    ObjectFell,
    /// The object base left the workspace radius.
    ObjectEscaped,
}

/// Object-base height below which the episode fails [m].
const FALL_LIMIT: f64 = -0.05;
/// Object-base displacement beyond which the episode fails [m].
const ESCAPE_LIMIT: f64 = 1.0;
/// Placement attempts = 1 + this many retries, each 25 % further out.
const PLACEMENT_RETRIES: usize = 3;

/// Environment faults: the episode cannot continue.
#[derive(Debug, Error)]
pub enum EnvFault {
    #[error("hand {hand} still interpenetrates after {attempts} placement attempts")]
    Placement { hand: usize, attempts: usize },
    #[error("non-finite action for hand {hand}")]
    NonFiniteAction { hand: usize },
    #[error(transparent)]
    Sim(#[from] SimFault),
}

/// One hand's model and its pose reference.
#[derive(Clone, Debug)]
pub struct HandSetup {
    pub model: HandModel,
    pub reference: HandPoseReference,
}

/// Result of one environment step.
pub struct StepResult {
    /// Observation per hand (order follows the setup list).
    pub features: Vec<DVector<f64>>,
    pub rewards: Vec<RewardBreakdown>,
    pub done: bool,
    pub event: Option<Termination>,
}

/// One object, one or two hands, and the episode bookkeeping around them.
pub struct ManipulationEnv {
    pub config: EnvConfig,
    pub sim_config: SimConfig,
    /// Weld the object base to the table (single-hand pre-training).
    pub fixed_object_base: bool,
    pub object: ObjectModel,
    pub hands: Vec<HandSetup>,
    pub scene: Scene,
    pub task: Task,
    /// Target articulation angle for the current episode [rad].
    pub omega_bar: f64,
    /// Object-base position at episode start.
    pub p0: Vector3<f64>,
    object_body: usize,
    hand_bodies: Vec<usize>,
    steps: usize,
    done: bool,
}

impl ManipulationEnv {
    /// Assemble an environment; call [`ManipulationEnv::reset`] before
    /// stepping.
    pub fn new(
        object: ObjectModel,
        hands: Vec<HandSetup>,
        fixed_object_base: bool,
        config: EnvConfig,
        sim_config: SimConfig,
    ) -> Self {
        assert!(!hands.is_empty(), "environment needs at least one hand");
        for h in &hands {
            assert_eq!(h.model.spec.side, h.reference.side, "hand/reference side mismatch");
        }
        ManipulationEnv {
            config,
            sim_config,
            fixed_object_base,
            object,
            hands,
            scene: Scene::new(sim_config),
            task: Task::Grasp,
            omega_bar: 0.0,
            p0: Vector3::zeros(),
            object_body: 0,
            hand_bodies: Vec::new(),
            steps: 0,
            done: true,
        }
    }

    /// Start an episode, sampling the target angle for articulation tasks.
    pub fn reset(
        &mut self,
        task: Task,
        rng: &mut impl Rng,
    ) -> Result<Vec<DVector<f64>>, EnvFault> {
        let omega_bar = match task {
            Task::Grasp => 0.0,
            Task::Articulate => {
                let (lo, hi) = self.config.target_angle_range;
                rng.gen_range(lo..=hi)
            }
        };
        self.reset_with_target(task, omega_bar)
    }

    /// Start an episode with an explicit target angle (evaluation grids).
    pub fn reset_with_target(
        &mut self,
        task: Task,
        omega_bar: f64,
    ) -> Result<Vec<DVector<f64>>, EnvFault> {
        self.task = task;
        self.omega_bar = omega_bar;
        self.steps = 0;
        self.done = false;

        self.scene = Scene::new(self.sim_config);
        self.object_body = self.scene.add_body(self.object.scene_body(
            self.fixed_object_base,
            self.object.rest_pose(),
            &self.sim_config,
        ));
        self.p0 = self.object.rest_pose().position;

        self.hand_bodies.clear();
        let hands = std::mem::take(&mut self.hands);
        let mut placement: Result<(), EnvFault> = Ok(());
        for (i, h) in hands.iter().enumerate() {
            let state = BodyState::at_rest(&h.model.body, crate::math::Pose::IDENTITY);
            let body = self.scene.add_body(SceneBody::new(
                format!("hand_{}_{}", h.reference.side, i),
                BodyRole::Hand,
                h.model.body.clone(),
                state,
                h.model.colliders.clone(),
                h.model.controller.clone(),
            ));
            self.hand_bodies.push(body);
            if let Err(e) = self.place_hand(i, h, body) {
                placement = Err(e);
                break;
            }
        }
        self.hands = hands;
        placement?;

        self.scene.refresh_contacts();
        let (features, _) = self.observe();
        Ok(features)
    }

    /// Back the wrist off from the resolved reference and open the fingers;
    /// retry further out while anything touches this hand.
    fn place_hand(&mut self, index: usize, h: &HandSetup, body: usize) -> Result<(), EnvFault> {
        let d = &h.reference;
        let obj_state = self.scene.bodies[self.object_body].state.clone();
        let obj_kin = kinematics(&self.scene.bodies[self.object_body].model, &obj_state);
        let part_pose = obj_kin.link_pose[d.part.link()];
        let wrist_ref = part_pose.compose(&d.t_bar);
        let center = self.object.center_of_mass(&obj_kin);
        let away = wrist_ref.position - center;
        let dir = if away.norm() > 1e-9 { away.normalize() } else { Vector3::z() };

        // Reference flexion, partially opened.
        let mut q = d.q_bar;
        for f in 0..FINGERS {
            for s in 0..SEGMENTS_PER_FINGER {
                let idx = finger_q_index(f, s, AXIS_FLEX);
                let (lo, hi) = h.model.q_limits[idx];
                q[idx] = (q[idx] * self.config.init_open_fraction).clamp(lo, hi);
            }
        }

        let mut offset = self.config.init_offset_dist;
        for _attempt in 0..=PLACEMENT_RETRIES {
            let pose = crate::math::Pose::new(
                wrist_ref.position + offset * dir,
                wrist_ref.orientation,
            );
            let mut state = BodyState::at_rest(&h.model.body, pose);
            state.q.copy_from_slice(&q);
            self.scene.bodies[body].state = state;
            self.scene.refresh_contacts();
            let touching = self.scene.contacts.iter().any(|c| {
                split_link_id(c.link_a).0 == body
                    || (c.link_b != TABLE_ID && split_link_id(c.link_b).0 == body)
            });
            if !touching {
                return Ok(());
            }
            offset *= 1.25;
        }
        Err(EnvFault::Placement { hand: index, attempts: PLACEMENT_RETRIES + 1 })
    }

    /// Apply one bounded-delta action per hand and advance the simulation.
    pub fn step(&mut self, actions: &[DVector<f64>]) -> Result<StepResult, EnvFault> {
        assert!(!self.done, "step on a finished episode");
        assert_eq!(actions.len(), self.hands.len());
        for (i, a) in actions.iter().enumerate() {
            if a.len() != HAND_DOFS || !a.iter().all(|v| v.is_finite()) {
                self.done = true;
                return Err(EnvFault::NonFiniteAction { hand: i });
            }
        }

        let mut targets = vec![PdTargets::hold(&self.scene.bodies[self.object_body].state)];
        for (i, h) in self.hands.iter().enumerate() {
            let state = &self.scene.bodies[self.hand_bodies[i]].state;
            targets.push(h.model.targets_from_action(
                state,
                actions[i].as_slice(),
                &self.config.action_scale,
            ));
        }

        for _ in 0..self.sim_config.substeps {
            if let Err(fault) = self.scene.step_targets(&targets) {
                self.done = true;
                return Err(fault.into());
            }
        }
        self.steps += 1;

        let p = self.scene.bodies[self.object_body].state.base.position;
        let event = if p.z < FALL_LIMIT {
            Some(Termination::ObjectFell)
        } else if (p - self.p0).norm() > ESCAPE_LIMIT {
            Some(Termination::ObjectEscaped)
        } else if self.steps >= self.config.episode_steps {
            Some(Termination::TimeLimit)
        } else {
            None
        };
        self.done = event.is_some();

        let (features, rewards) = self.observe();
        Ok(StepResult { features, rewards, done: self.done, event })
    }

    /// Observations and rewards for the current state.
    pub fn observe(&self) -> (Vec<DVector<f64>>, Vec<RewardBreakdown>) {
        let kins: Vec<BodyKinematics> =
            self.scene.bodies.iter().map(|b| kinematics(&b.model, &b.state)).collect();
        let obj = ObjectObservation {
            object: &self.object,
            state: &self.scene.bodies[self.object_body].state,
            kin: &kins[self.object_body],
        };
        let mut features = Vec::with_capacity(self.hands.len());
        let mut rewards = Vec::with_capacity(self.hands.len());
        for (i, h) in self.hands.iter().enumerate() {
            let body = self.hand_bodies[i];
            let (force_all, force_part, touching_part) = self.hand_contacts(i);
            let hand = HandObservation {
                model: &h.model,
                state: &self.scene.bodies[body].state,
                kin: &kins[body],
                force_all,
                force_part,
                touching_part,
            };
            features.push(extract_features(
                &hand,
                &obj,
                &h.reference,
                self.omega_bar,
                self.config.use_art_features,
            ));
            rewards.push(compute_reward(
                &hand,
                &obj,
                &h.reference,
                self.omega_bar,
                &self.p0,
                &self.config.weights,
            ));
        }
        (features, rewards)
    }

    /// Per-real-link contact readings for one hand: net force magnitude from
    /// all sources, net magnitude against the assigned part, and touch flags.
    fn hand_contacts(&self, i: usize) -> ([f64; REAL_LINKS], [f64; REAL_LINKS], [bool; REAL_LINKS]) {
        let body = self.hand_bodies[i];
        let model = &self.hands[i].model;
        let part_id = link_id(self.object_body, self.hands[i].reference.part.link());
        let mut slot_of = vec![usize::MAX; model.body.links.len()];
        for (slot, &l) in model.feature_links.iter().enumerate() {
            slot_of[l] = slot;
        }
        let mut net_all = [Vector3::zeros(); REAL_LINKS];
        let mut net_part = [Vector3::zeros(); REAL_LINKS];
        for c in &self.scene.contacts {
            let (ba, la) = split_link_id(c.link_a);
            if ba == body && slot_of[la] != usize::MAX {
                let s = slot_of[la];
                net_all[s] += c.force;
                if c.link_b == part_id {
                    net_part[s] += c.force;
                }
            }
            if c.link_b != TABLE_ID {
                let (bb, lb) = split_link_id(c.link_b);
                if bb == body && slot_of[lb] != usize::MAX {
                    let s = slot_of[lb];
                    net_all[s] -= c.force;
                    if c.link_a == part_id {
                        net_part[s] -= c.force;
                    }
                }
            }
        }
        let eps = self.scene.config.contact_force_eps;
        let mut force_all = [0.0; REAL_LINKS];
        let mut force_part = [0.0; REAL_LINKS];
        let mut touching = [false; REAL_LINKS];
        for s in 0..REAL_LINKS {
            force_all[s] = net_all[s].norm();
            force_part[s] = net_part[s].norm();
            touching[s] = force_part[s] > eps;
        }
        (force_all, force_part, touching)
    }

    // --- introspection -------------------------------------------------------

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn object_body(&self) -> usize {
        self.object_body
    }

    pub fn hand_body(&self, i: usize) -> usize {
        self.hand_bodies[i]
    }

    /// Current articulation angle [rad].
    pub fn articulation_angle(&self) -> f64 {
        self.scene.bodies[self.object_body].state.q[0]
    }

    /// Current object-base position.
    pub fn object_base_position(&self) -> Vector3<f64> {
        self.scene.bodies[self.object_body].state.base.position
    }

    pub fn hand_state(&self, i: usize) -> &BodyState {
        &self.scene.bodies[self.hand_bodies[i]].state
    }
}

// ---------------------------------------------------------------------------
