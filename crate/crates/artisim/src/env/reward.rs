//! Composite reward: imitation (pose + contact + regularization) plus task.
//!
//! The pose term penalizes squared link-point offsets (fingertips weighted
//! heavier) and the joint-angle error norm. The contact term pays for the
//! fraction of target contacts achieved plus the total force on them,
//! capped at a multiple of the manipulated part's weight so crushing is
//! never optimal. Regularization damps wrist and object rates; the task
//! term tracks the target articulation angle while pinning the object base.

use nalgebra::Vector3;

use crate::models::hand::REAL_LINKS;

use super::features::{target_errors, HandObservation, ObjectObservation};
use super::reference::HandPoseReference;

/// Reward weights (defaults are the tuned values used for all training).
#[derive(Clone, Copy, Debug)]
pub struct RewardWeights {
    /// Squared link-point offsets [1/m²].
    pub w_px: f64,
    /// Same, for fingertip links.
    pub w_px_fingertip: f64,
    /// Joint-angle error norm [1/rad].
    pub w_pq: f64,
    /// Fraction of target contacts achieved.
    pub w_cc: f64,
    /// Total force on target contacts [1/N].
    pub w_cf: f64,
    /// Wrist rate regularization.
    pub w_rh: f64,
    /// Object rate regularization.
    pub w_ro: f64,
    /// Articulation-angle error.
    pub w_tq: f64,
    /// Object-base displacement.
    pub w_tx: f64,
    /// Contact-force cap as a multiple of the part's mass [N/kg].
    pub lambda: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_px: 3.0,
            w_px_fingertip: 12.0,
            w_pq: 0.2,
            w_cc: 1.5,
            w_cf: 1.5,
            w_rh: 0.5,
            w_ro: 0.2,
            w_tq: 1.5,
            w_tx: 0.2,
            lambda: 5.0,
        }
    }
}

/// One step's reward, split by term.
#[derive(Clone, Copy, Debug, Default)]
pub struct RewardBreakdown {
    /// Pose imitation (≤ 0).
    pub r_p: f64,
    /// Contact imitation (≥ 0, bounded).
    pub r_c: f64,
    /// Rate regularization (≤ 0).
    pub r_reg: f64,
    /// Articulation tracking and base pinning (≤ 0).
    pub r_task: f64,
    /// Sum of the four terms.
    pub total: f64,
}

/// Evaluate the composite reward for one hand on the current state.
///
/// `omega_bar` is the target articulation angle and `p0` the episode's
/// initial object-base position. The contact readings in `hand` are w.r.t.
/// the hand's assigned part, whose mass caps the force payout.
pub fn compute_reward(
    hand: &HandObservation,
    obj: &ObjectObservation,
    d: &HandPoseReference,
    omega_bar: f64,
    p0: &Vector3<f64>,
    w: &RewardWeights,
) -> RewardBreakdown {
    let err = target_errors(hand, obj, d);

    // Pose: squared point offsets, fingertips weighted up, plus angle norm.
    let tips = hand.model.fingertip_slots();
    let mut r_p = 0.0;
    for i in 0..REAL_LINKS {
        let wx = if tips.contains(&i) { w.w_px_fingertip } else { w.w_px };
        r_p -= wx * err.gx[i].norm_squared();
    }
    let qnorm: f64 = err.gq.iter().map(|e| e * e).sum::<f64>().sqrt();
    r_p -= w.w_pq * qnorm;

    // Contact: achieved fraction of targets, plus capped force on them.
    let n_targets = d.target_contact_count() as f64;
    let mut achieved = 0.0;
    let mut force = 0.0;
    for i in 0..REAL_LINKS {
        if d.c_bar[i] {
            if hand.touching_part[i] {
                achieved += 1.0;
            }
            force += hand.force_part[i];
        }
    }
    let m_o = obj.object.part_mass(d.part);
    let r_c = w.w_cc * (achieved / n_targets) + w.w_cf * force.min(w.lambda * m_o);

    // Regularization on world rates: wrist 6, object base 6 + hinge 1.
    let hand_rate2 =
        hand.state.base_lin_vel.norm_squared() + hand.state.base_ang_vel.norm_squared();
    let obj_rate2 = obj.state.base_lin_vel.norm_squared()
        + obj.state.base_ang_vel.norm_squared()
        + obj.rate() * obj.rate();
    let r_reg = -w.w_rh * hand_rate2 - w.w_ro * obj_rate2;

    // Task: track the target angle, keep the base where it started.
    let r_task = -w.w_tq * (omega_bar - obj.angle()).abs()
        - w.w_tx * (p0 - obj.state.base.position).norm_squared();

    let total = r_p + r_c + r_reg + r_task;
    RewardBreakdown { r_p, r_c, r_reg, r_task, total }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Pose;
    use crate::models::hand::{finger_q_index, HandModel, FINGER_DOFS};
    use crate::models::object::{ObjectModel, Primitive};
    use crate::models::{Handedness, Part};
    use crate::sim::contact::ColliderShape;
    use crate::sim::tree::{kinematics, BodyKinematics, BodyState};
    use approx::assert_relative_eq;

    /// Object whose base part weighs exactly 0.4 kg.
    fn test_object() -> ObjectModel {
        ObjectModel {
            name: "test_block".into(),
            base: vec![Primitive {
                local: Pose::IDENTITY,
                shape: ColliderShape::Box { half: Vector3::new(0.05, 0.05, 0.03) },
                mass: 0.4,
            }],
            art: vec![Primitive {
                local: Pose::IDENTITY,
                shape: ColliderShape::Box { half: Vector3::new(0.02, 0.02, 0.02) },
                mass: 0.1,
            }],
            hinge_axis: crate::math::unit(0.0, 0.0, 1.0),
            hinge_mount: Pose::from_position(Vector3::new(0.0, 0.06, 0.0)),
            hinge_limits: (0.0, 1.5),
            rest_height: 0.03,
        }
    }

    fn reference() -> HandPoseReference {
        let mut q = [0.0; FINGER_DOFS];
        for f in 0..5 {
            q[finger_q_index(f, 0, crate::models::hand::AXIS_FLEX)] = 0.5;
        }
        let mut c = [false; REAL_LINKS];
        c[3] = true;
        c[6] = true;
        c[9] = true;
        HandPoseReference::new(
            Handedness::Right,
            Part::Base,
            Pose::IDENTITY,
            Pose::from_position(Vector3::new(0.1, 0.0, 0.08)),
            q,
            c,
        )
        .unwrap()
    }

    struct Fixture {
        object: ObjectModel,
        obj_state: BodyState,
        obj_kin: BodyKinematics,
        model: HandModel,
        state: BodyState,
        kin: BodyKinematics,
        d: HandPoseReference,
    }

    /// Hand parked exactly at the reference of a resting object.
    fn ideal_fixture() -> Fixture {
        let object = test_object();
        let (obj_model, _) = object.build(false);
        let obj_state = BodyState::at_rest(&obj_model, object.rest_pose());
        let obj_kin = kinematics(&obj_model, &obj_state);
        let d = reference();
        let model = HandModel::for_side(d.side);
        let wrist = obj_kin.link_pose[d.part.link()].compose(&d.t_bar);
        let mut state = BodyState::at_rest(&model.body, wrist);
        state.q.copy_from_slice(&d.q_bar);
        let kin = kinematics(&model.body, &state);
        Fixture { object, obj_state, obj_kin, model, state, kin, d }
    }

    impl Fixture {
        fn observations(
            &self,
            force_part: [f64; REAL_LINKS],
            touching: [bool; REAL_LINKS],
        ) -> (HandObservation<'_>, ObjectObservation<'_>) {
            (
                HandObservation {
                    model: &self.model,
                    state: &self.state,
                    kin: &self.kin,
                    force_all: force_part,
                    force_part,
                    touching_part: touching,
                },
                ObjectObservation {
                    object: &self.object,
                    state: &self.obj_state,
                    kin: &self.obj_kin,
                },
            )
        }
    }

    #[test]
    fn ideal_grasp_pays_only_the_capped_contact_term() {
        let fx = ideal_fixture();
        let mut force = [0.0; REAL_LINKS];
        // 100 N spread over the three target links.
        force[3] = 40.0;
        force[6] = 40.0;
        force[9] = 20.0;
        let (hand, obj) = fx.observations(force, fx.d.c_bar);
        let p0 = fx.obj_state.base.position;
        let r = compute_reward(&hand, &obj, &fx.d, 0.0, &p0, &RewardWeights::default());
        assert_relative_eq!(r.r_p, 0.0, epsilon = 1e-9);
        assert_relative_eq!(r.r_reg, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.r_task, 0.0, epsilon = 1e-12);
        // Fraction term 1.5, force term 1.5 · min(100, 5 · 0.4) = 3.0.
        assert_relative_eq!(r.r_c, 4.5, epsilon = 1e-9);
        assert_relative_eq!(r.total, 4.5, epsilon = 1e-9);
    }

    #[test]
    fn link_point_offsets_cost_their_squared_distance() {
        let mut fx = ideal_fixture();
        // Move one non-fingertip target point 0.1 m; angles stay equal, so
        // only the squared-distance term fires: −3.0 · 0.01.
        fx.d.x_bar[1].x += 0.1;
        let (hand, obj) = fx.observations([0.0; REAL_LINKS], [false; REAL_LINKS]);
        let p0 = fx.obj_state.base.position;
        let r = compute_reward(&hand, &obj, &fx.d, 0.0, &p0, &RewardWeights::default());
        assert_relative_eq!(r.r_p, -0.03, epsilon = 1e-9);
        assert_relative_eq!(r.r_c, 0.0, epsilon = 1e-12);
        // Fingertips weigh 12.0 instead.
        let mut fx2 = ideal_fixture();
        fx2.d.x_bar[3].x += 0.1;
        let (hand2, obj2) = fx2.observations([0.0; REAL_LINKS], [false; REAL_LINKS]);
        let r2 = compute_reward(&hand2, &obj2, &fx2.d, 0.0, &p0, &RewardWeights::default());
        assert_relative_eq!(r2.r_p, -0.12, epsilon = 1e-9);
    }

    #[test]
    fn force_payout_saturates_at_the_part_weight_cap() {
        let fx = ideal_fixture();
        let w = RewardWeights::default();
        let cap = w.w_cf * w.lambda * fx.object.part_mass(fx.d.part);
        for total in [0.5_f64, 1.9, 2.0, 50.0, 1e6] {
            let mut force = [0.0; REAL_LINKS];
            force[3] = total;
            let (hand, obj) = fx.observations(force, fx.d.c_bar);
            let p0 = fx.obj_state.base.position;
            let r = compute_reward(&hand, &obj, &fx.d, 0.0, &p0, &w);
            let force_part = r.r_c - w.w_cc;
            assert!(force_part <= cap + 1e-12);
            assert_relative_eq!(force_part, (w.w_cf * total).min(cap), epsilon = 1e-9);
        }
    }

    #[test]
    fn task_term_vanishes_exactly_at_the_goal() {
        let fx = ideal_fixture();
        let (hand, obj) = fx.observations([0.0; REAL_LINKS], [false; REAL_LINKS]);
        let p0 = fx.obj_state.base.position;
        let w = RewardWeights::default();
        let at_goal = compute_reward(&hand, &obj, &fx.d, 0.0, &p0, &w);
        assert_eq!(at_goal.r_task, 0.0);
        let angle_off = compute_reward(&hand, &obj, &fx.d, 0.4, &p0, &w);
        assert!(angle_off.r_task < 0.0);
        let moved = p0 + Vector3::new(0.05, 0.0, 0.0);
        let base_off = compute_reward(&hand, &obj, &fx.d, 0.0, &moved, &w);
        assert!(base_off.r_task < 0.0);
    }

    #[test]
    fn growing_any_point_offset_strictly_lowers_the_pose_term() {
        let mut prev = 0.0;
        for step in 1..5 {
            let mut fx = ideal_fixture();
            fx.d.x_bar[7].y += 0.02 * step as f64;
            let (hand, obj) = fx.observations([0.0; REAL_LINKS], [false; REAL_LINKS]);
            let p0 = fx.obj_state.base.position;
            let r = compute_reward(&hand, &obj, &fx.d, 0.0, &p0, &RewardWeights::default());
            assert!(r.r_p < prev);
            prev = r.r_p;
        }
    }

    #[test]
    fn totals_are_exact_sums() {
        let fx = ideal_fixture();
        let mut force = [0.0; REAL_LINKS];
        force[3] = 1.0;
        let mut touching = [false; REAL_LINKS];
        touching[3] = true;
        let (hand, obj) = fx.observations(force, touching);
        let p0 = fx.obj_state.base.position + Vector3::new(0.01, 0.0, 0.0);
        let r = compute_reward(&hand, &obj, &fx.d, 0.3, &p0, &RewardWeights::default());
        assert_eq!(r.total, r.r_p + r.r_c + r.r_reg + r.r_task);
        // One of three targets touched.
        assert_relative_eq!(r.r_c, 1.5 / 3.0 + 1.5 * 1.0, epsilon = 1e-12);
    }
}
