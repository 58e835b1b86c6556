//! Observations and reward shaping while a hand hooks a handle and lifts.
//!
//! Builds the hinged box plus a right hand with a static grasp reference
//! (wrist over the handle bar, fingers curled around it), resets the
//! environment, then runs a proportional tracker toward the reference and
//! finally commands straight wrist lift. Prints how each reward term and the
//! hand-object contact respond along the way.
//!
//! ```text
//! cargo run --example features_and_rewards
//! ```

use artisim::env::{
    feature_dim, EnvConfig, HandPoseReference, HandSetup, ManipulationEnv, Task,
    FEATURE_LAYOUT_VERSION,
};
use artisim::math::{rotation_vector_between, Pose};
use artisim::models::hand::{
    finger_q_index, HandModel, AXIS_FLEX, FINGERS, FINGER_DOFS, HAND_DOFS, REAL_LINKS,
};
use artisim::models::object::ObjectModel;
use artisim::models::{Handedness, Part};
use artisim::sim::SimConfig;
use nalgebra::{DVector, Vector3};

/// Hook grasp on the box's handle bar: the wrist sits above and behind the
/// bar, the four fingers pass over it and curl down its far side so their
/// tips tuck into the clearance underneath; the thumb stays out of the way.
fn grasp_reference() -> HandPoseReference {
    let mut q_bar = [0.0; FINGER_DOFS];
    for f in 0..FINGERS {
        let flex = if f == 0 { [0.3, 0.3, 0.2] } else { [0.5, 1.2, 0.9] };
        for (s, a) in flex.iter().enumerate() {
            q_bar[finger_q_index(f, s, AXIS_FLEX)] = *a;
        }
    }
    let mut c_bar = [false; REAL_LINKS];
    for tip in [6, 9, 12, 15] {
        c_bar[tip] = true;
    }
    let t_bar = Pose::from_position(Vector3::new(-0.055, 0.0, 0.105));
    HandPoseReference::new(Handedness::Right, Part::Base, Pose::IDENTITY, t_bar, q_bar, c_bar)
        .expect("reference asks for at least one contact")
}

/// Proportional action toward a world wrist goal. Raw errors saturate the
/// per-step action clamps, so this closes at the maximum commanded rate and
/// slows smoothly near the goal. `openness` scales the finger flexion
/// target: held low while the wrist flies in so the straight fingers clear
/// the handle, then 1 to wrap it.
fn action_toward(env: &ManipulationEnv, goal: &Pose, gain: f64, openness: f64) -> DVector<f64> {
    let d = &env.hands[0].reference;
    let s = env.hand_state(0);
    let dp = goal.position - s.base.position;
    let dr = rotation_vector_between(&s.base.orientation, &goal.orientation);
    let mut a = DVector::zeros(HAND_DOFS);
    for i in 0..3 {
        a[i] = gain * dp[i];
        a[3 + i] = dr[i];
    }
    for j in 0..FINGER_DOFS {
        a[6 + j] = openness * d.q_bar[j] - s.q[j];
    }
    a
}

/// The reference wrist pose attached to the object's current part pose.
fn wrist_reference(env: &ManipulationEnv) -> Pose {
    let d = &env.hands[0].reference;
    env.object.part_pose(&env.scene.bodies[env.object_body()].state, d.part).compose(&d.t_bar)
}

fn hits_and_force(env: &ManipulationEnv) -> (usize, usize, f64) {
    let d = &env.hands[0].reference;
    let touching = env.scene.links_touching_link(
        env.hand_body(0),
        env.object_body(),
        d.part.link(),
    );
    let links = &env.hands[0].model.feature_links;
    let hits = (0..REAL_LINKS)
        .filter(|&slot| d.c_bar[slot] && touching[links[slot]])
        .count();
    let force = env.scene.total_force_between(env.hand_body(0), env.object_body());
    (hits, d.c_bar.iter().filter(|&&c| c).count(), force)
}

fn main() {
    let reference = grasp_reference();
    let model = HandModel::for_side(reference.side);
    // Start with the fingers nearly straight so they fly in above the bar.
    let config = EnvConfig { init_open_fraction: 0.15, ..EnvConfig::default() };
    let mut env = ManipulationEnv::new(
        ObjectModel::hinged_box(),
        vec![HandSetup { model, reference }],
        false,
        config,
        SimConfig::default(),
    );

    let features = env.reset_with_target(Task::Grasp, 0.0).expect("hand placement");
    println!(
        "feature layout v{FEATURE_LAYOUT_VERSION}: {} dims ({} without the articulation block)",
        feature_dim(true),
        feature_dim(false)
    );
    let f = &features[0];
    println!(
        "at reset: object in wrist frame = ({:.3}, {:.3}, {:.3}) m, hinge angle {:.3} rad, \
         part masses ({:.2}, {:.2}) kg",
        f[112], f[113], f[114], f[119], f[134], f[135]
    );

    let start_z = env.object_base_position().z;
    let phase = |env: &mut ManipulationEnv,
                 label: &str,
                 n: usize,
                 goal: &dyn Fn(&ManipulationEnv, usize) -> Pose,
                 gain: f64,
                 openness: f64| {
        println!("-- {label}");
        for step in 0..n {
            let action = action_toward(env, &goal(env, step), gain, openness);
            let result = env.step(std::slice::from_ref(&action)).expect("step");
            if (step + 1) % (n / 2).max(1) == 0 {
                let r = &result.rewards[0];
                let (hits, want, force) = hits_and_force(env);
                println!(
                    "step {:3}  lift={:6.3} m  r_p={:8.3}  r_c={:6.3}  r_reg={:7.3}  \
                     contacts {hits}/{want}  grip force {force:5.1} N",
                    env.steps(),
                    env.object_base_position().z - start_z,
                    r.r_p,
                    r.r_c,
                    r.r_reg,
                );
            }
        }
    };
    // Soft wrist gain on the way in (brake before the fingers thread the
    // handle), full gain once threading and carrying. The lift goal is
    // anchored in the world — a part-attached goal would chase the rising
    // object and run away.
    let tracked = |env: &ManipulationEnv, _: usize| wrist_reference(env);
    phase(&mut env, "fly the open hand to the reference", 110, &tracked, 0.25, 0.15);
    phase(&mut env, "curl the fingers around the bar", 60, &tracked, 1.0, 1.0);
    let carry_from = wrist_reference(&env);
    let hoist = move |_: &ManipulationEnv, step: usize| {
        let mut g = carry_from;
        g.position.z += (0.001 * (step + 1) as f64).min(0.08);
        g
    };
    phase(&mut env, "lift straight up", 130, &hoist, 1.0, 1.0);

    let lift = env.object_base_position().z - start_z;
    println!(
        "final lift {:.3} m after {} actions ({})",
        lift,
        env.steps(),
        if lift > 0.05 { "the hook grasp held" } else { "the grasp slipped" }
    );
}
