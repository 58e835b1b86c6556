//! PD actuation: position targets to generalized forces.
//!
//! Controllers are split so the stiff damping term can be handled
//! implicitly by the integrator: [`PdController::forces`] returns the
//! explicit part `kp·error − kd·rate`, and [`PdController::damping_vector_at`]
//! returns the per-DoF `kd` that the dynamics solve folds into
//! `(M + dt·diag(kd))` — together they realize the exact implicit damper
//! `−kd·rate'`. Joint-limit torques use the same one-sided spring-damper
//! with each joint's own gains, and their damper joins the implicit vector
//! whenever a limit is engaged.

use nalgebra::{DVector, UnitQuaternion, Vector3};

use crate::math::rotation_vector_between;
use crate::sim::tree::{limit_damping, limit_torque, BodyState, Dof, Joint, MultiBodyModel};

/// Gains for a floating base driven like a wrist.
#[derive(Clone, Copy, Debug)]
pub struct WristGains {
    pub kp_lin: f64,
    pub kd_lin: f64,
    pub kp_ang: f64,
    pub kd_ang: f64,
}

/// Position-servo description for one tree.
#[derive(Clone, Debug)]
pub struct PdController {
    /// Base servo; `None` for passive or welded bases.
    pub wrist: Option<WristGains>,
    /// Per-joint proportional gain (0 disables the servo on that joint).
    pub joint_kp: Vec<f64>,
    /// Per-joint damping, applied implicitly.
    pub joint_kd: Vec<f64>,
    /// Per-joint one-sided limit gains (kp, kd).
    pub limit_gains: Vec<(f64, f64)>,
}

/// Servo setpoints for one tree.
#[derive(Clone, Debug)]
pub struct PdTargets {
    pub base_pos: Vector3<f64>,
    pub base_rot: UnitQuaternion<f64>,
    /// Per-joint angle targets (same order as `BodyState::q`).
    pub q: Vec<f64>,
}

impl PdTargets {
    /// Targets equal to the current configuration (zero servo error).
    pub fn hold(state: &BodyState) -> Self {
        PdTargets { base_pos: state.base.position, base_rot: state.base.orientation, q: state.q.clone() }
    }
}

impl PdController {
    /// A fully passive tree (free object): no servos, optional uniform
    /// joint damping (e.g. hinge friction).
    pub fn passive(model: &MultiBodyModel, joint_damping: f64, limit_gains: (f64, f64)) -> Self {
        let n = model.njoints();
        PdController {
            wrist: None,
            joint_kp: vec![0.0; n],
            joint_kd: vec![joint_damping; n],
            limit_gains: vec![limit_gains; n],
        }
    }

    /// Configuration-independent per-DoF damping coefficients.
    pub fn damping_vector(&self, model: &MultiBodyModel) -> Vec<f64> {
        let mut d = vec![0.0; model.ndof()];
        for (i, dof) in model.dofs.iter().enumerate() {
            d[i] = match *dof {
                Dof::BaseLin(_) => self.wrist.map_or(0.0, |w| w.kd_lin),
                Dof::BaseAng(_) => self.wrist.map_or(0.0, |w| w.kd_ang),
                Dof::Joint(link) => self.joint_kd[model.q_index(link).unwrap()],
            };
        }
        d
    }

    /// Per-DoF damping for the implicit solve at a given configuration:
    /// servo damping plus any engaged joint-limit dampers.
    pub fn damping_vector_at(&self, model: &MultiBodyModel, state: &BodyState) -> Vec<f64> {
        let mut d = self.damping_vector(model);
        for (i, dof) in model.dofs.iter().enumerate() {
            if let Dof::Joint(link) = *dof {
                if let Joint::Revolute { limits: Some((lo, hi)), .. } = model.links[link].joint {
                    let qi = model.q_index(link).unwrap();
                    d[i] += limit_damping(state.q[qi], lo, hi, self.limit_gains[qi].1);
                }
            }
        }
        d
    }

    /// Explicit generalized forces: proportional terms, the explicit half of
    /// the damping (−kd·rate), and joint-limit torques.
    pub fn forces(
        &self,
        model: &MultiBodyModel,
        state: &BodyState,
        targets: &PdTargets,
    ) -> DVector<f64> {
        assert_eq!(targets.q.len(), model.njoints());
        let mut tau = DVector::zeros(model.ndof());
        for (i, dof) in model.dofs.iter().enumerate() {
            match *dof {
                Dof::BaseLin(k) => {
                    if let Some(w) = self.wrist {
                        let e = targets.base_pos - state.base.position;
                        tau[i] = w.kp_lin * e[k] - w.kd_lin * state.base_lin_vel[k];
                    }
                }
                Dof::BaseAng(k) => {
                    if let Some(w) = self.wrist {
                        // Geodesic orientation error, expressed in world.
                        let e_local =
                            rotation_vector_between(&state.base.orientation, &targets.base_rot);
                        let e_world = state.base.orientation * e_local;
                        tau[i] = w.kp_ang * e_world[k] - w.kd_ang * state.base_ang_vel[k];
                    }
                }
                Dof::Joint(link) => {
                    let qi = model.q_index(link).unwrap();
                    let (q, qd) = (state.q[qi], state.qd[qi]);
                    let mut t = self.joint_kp[qi] * (targets.q[qi] - q) - self.joint_kd[qi] * qd;
                    if let Joint::Revolute { limits: Some((lo, hi)), .. } = model.links[link].joint
                    {
                        let (lkp, lkd) = self.limit_gains[qi];
                        t += limit_torque(q, qd, lo, hi, lkp, lkd);
                    }
                    tau[i] = t;
                }
            }
        }
        tau
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{box_inertia, unit, Pose};
    use crate::sim::tree::{forward_dynamics, integrate, kinematics, Link, LinkLoad};
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;

    fn servo_arm() -> (MultiBodyModel, PdController) {
        let model = MultiBodyModel::new(vec![
            Link {
                name: "base".into(),
                parent: None,
                origin: Pose::IDENTITY,
                joint: Joint::Root { floating: false },
                mass: 1.0,
                com: Vector3::zeros(),
                inertia: Matrix3::identity() * 1e-3,
            },
            Link {
                name: "arm".into(),
                parent: Some(0),
                origin: Pose::IDENTITY,
                joint: Joint::Revolute { axis: unit(0.0, 1.0, 0.0), limits: Some((-0.2, 1.7)) },
                mass: 0.05,
                com: Vector3::new(0.03, 0.0, 0.0),
                inertia: box_inertia(0.05, &Vector3::new(0.03, 0.005, 0.005)),
            },
        ]);
        let pd = PdController {
            wrist: None,
            joint_kp: vec![3.0],
            joint_kd: vec![0.1],
            limit_gains: vec![(3.0, 0.1)],
        };
        (model, pd)
    }

    #[test]
    fn servo_converges_to_target_and_respects_limits() {
        let (model, pd) = servo_arm();
        let mut state = BodyState::at_rest(&model, Pose::IDENTITY);
        let ext = vec![LinkLoad::default(); model.links.len()];
        let dt = 2.5e-3;
        let mut targets = PdTargets::hold(&state);
        targets.q[0] = 1.0;
        for _ in 0..4000 {
            let kin = kinematics(&model, &state);
            let tau = pd.forces(&model, &state, &targets);
            let damping = pd.damping_vector_at(&model, &state);
            let udot = forward_dynamics(
                &model, &state, &kin, &tau, &Vector3::zeros(), &ext, &damping, dt,
            )
            .unwrap();
            integrate(&model, &mut state, &udot, dt);
        }
        assert_relative_eq!(state.q[0], 1.0, epsilon = 1e-4);

        // Drive far past the upper limit: the limit spring holds near it.
        targets.q[0] = 4.0;
        for _ in 0..4000 {
            let kin = kinematics(&model, &state);
            let tau = pd.forces(&model, &state, &targets);
            let damping = pd.damping_vector_at(&model, &state);
            let udot = forward_dynamics(
                &model, &state, &kin, &tau, &Vector3::zeros(), &ext, &damping, dt,
            )
            .unwrap();
            integrate(&model, &mut state, &udot, dt);
        }
        // PD and limit springs have equal gains here, so the angle settles
        // midway between target and limit; it must not track 4.0.
        assert!(state.q[0] < 3.0 && state.q[0] > 1.7);
    }

    #[test]
    fn wrist_servo_tracks_pose() {
        let model = MultiBodyModel::new(vec![Link {
            name: "wrist".into(),
            parent: None,
            origin: Pose::IDENTITY,
            joint: Joint::Root { floating: true },
            mass: 0.3,
            com: Vector3::zeros(),
            inertia: box_inertia(0.3, &Vector3::new(0.04, 0.03, 0.012)),
        }]);
        let pd = PdController {
            wrist: Some(WristGains { kp_lin: 500.0, kd_lin: 20.0, kp_ang: 50.0, kd_ang: 2.0 }),
            joint_kp: vec![],
            joint_kd: vec![],
            limit_gains: vec![],
        };
        let mut state = BodyState::at_rest(&model, Pose::from_position(Vector3::new(0.0, 0.0, 0.2)));
        let goal = Pose::new(
            Vector3::new(0.05, -0.03, 0.25),
            UnitQuaternion::from_euler_angles(0.2, -0.3, 0.4),
        );
        let targets = PdTargets { base_pos: goal.position, base_rot: goal.orientation, q: vec![] };
        let damping = pd.damping_vector(&model);
        let ext = vec![LinkLoad::default(); 1];
        let dt = 2.5e-3;
        let gravity = Vector3::new(0.0, 0.0, -9.81);
        for _ in 0..4000 {
            let kin = kinematics(&model, &state);
            let tau = pd.forces(&model, &state, &targets);
            let udot =
                forward_dynamics(&model, &state, &kin, &tau, &gravity, &ext, &damping, dt).unwrap();
            integrate(&model, &mut state, &udot, dt);
        }
        // Gravity sag on the position servo: mg/kp ≈ 6 mm on z.
        assert!((state.base.position - goal.position).norm() < 0.01);
        assert!(crate::math::rotation_angle_between(&state.base.orientation, &goal.orientation) < 1e-3);
    }
}
