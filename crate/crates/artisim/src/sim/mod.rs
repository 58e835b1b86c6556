//! Deterministic rigid-body scene: articulated trees, penalty contacts
//! against each other and the table plane z = 0, and PD actuation.
//!
//! A [`Scene`] advances all bodies simultaneously: contacts and controller
//! torques are evaluated on the pre-step state, then every tree solves its
//! own `(M + dt·D)u̇ = τ − bias` and integrates semi-implicitly. Stepping is
//! available at two levels — position targets (the normal path) or raw
//! generalized forces (the replay path); the target path returns the exact
//! torque vectors it applied so a rollout can be replayed bit-identically.

pub mod contact;
pub mod pd;
pub mod tree;

use nalgebra::{DVector, Vector3};
use thiserror::Error;

use crate::math::Pose;
use contact::{
    box_plane, resolve_contact, sphere_box, sphere_plane, sphere_sphere, Collider, ColliderShape,
    ContactGeom, ContactMobility, ContactParams, ContactPoint,
};
use pd::{PdController, PdTargets};
use tree::{forward_dynamics, integrate, kinematics, BodyKinematics, BodyState, LinkLoad, MultiBodyModel};

/// Simulation parameters.
#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    /// Physics step [s].
    pub dt: f64,
    /// Physics steps per control action.
    pub substeps: usize,
    pub gravity: Vector3<f64>,
    pub contact: ContactParams,
    /// Viscous damping on unactuated object hinges [N·m·s/rad]. Sized like
    /// a stiff laptop hinge: flap-scale parts (I ~ 1e-4 kg·m²) track a
    /// pressing finger quasi-statically instead of bouncing off it.
    pub hinge_damping: f64,
    /// One-sided spring-damper gains at object hinge limits.
    pub hinge_limit_kp: f64,
    pub hinge_limit_kd: f64,
    /// Net contact force below this magnitude does not count as "in
    /// contact" [N].
    pub contact_force_eps: f64,
    /// Collide bodies against the table plane z = 0.
    pub table: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 2.5e-3,
            substeps: 4,
            gravity: Vector3::new(0.0, 0.0, -9.81),
            contact: ContactParams::default(),
            hinge_damping: 0.08,
            hinge_limit_kp: 10.0,
            hinge_limit_kd: 0.05,
            contact_force_eps: 1e-4,
            table: true,
        }
    }
}

/// Which collision pairs a body participates in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BodyRole {
    /// Sphere-covered hand: collides with objects, the table, other hands.
    Hand,
    /// Manipulated object: collides with hands and the table, not itself.
    Object,
}

/// One articulated tree plus its collision and actuation attachments.
#[derive(Clone, Debug)]
pub struct SceneBody {
    pub name: String,
    pub role: BodyRole,
    pub model: MultiBodyModel,
    pub state: BodyState,
    /// Colliders per link (indices follow `model.links`).
    pub colliders: Vec<Vec<Collider>>,
    pub controller: PdController,
}

impl SceneBody {
    pub fn new(
        name: impl Into<String>,
        role: BodyRole,
        model: MultiBodyModel,
        state: BodyState,
        colliders: Vec<Vec<Collider>>,
        controller: PdController,
    ) -> Self {
        assert_eq!(colliders.len(), model.links.len());
        SceneBody { name: name.into(), role, model, state, colliders, controller }
    }
}

/// Simulation fault: the state left the representable regime.
#[derive(Debug, Error)]
pub enum SimFault {
    #[error("non-finite state in body {body} ({name})")]
    NonFinite { body: usize, name: String },
    #[error("mass matrix not positive definite for body {body} ({name})")]
    SolverFailure { body: usize, name: String },
    #[error("torque vector for body {body} has length {got}, expected {expected}")]
    BadTorqueLength { body: usize, got: usize, expected: usize },
}

/// The world: bodies, last-step contacts, and configuration.
#[derive(Clone, Debug)]
pub struct Scene {
    pub config: SimConfig,
    pub bodies: Vec<SceneBody>,
    /// Contacts produced by the most recent substep.
    pub contacts: Vec<ContactPoint>,
    /// Simulation time [s].
    pub time: f64,
}

/// Scene-wide link id packing (body, link) into one integer.
pub fn link_id(body: usize, link: usize) -> usize {
    body * 1000 + link
}

/// Inverse of [`link_id`].
pub fn split_link_id(id: usize) -> (usize, usize) {
    (id / 1000, id % 1000)
}

/// Link id used for the static table in contact records.
pub const TABLE_ID: usize = usize::MAX;

impl Scene {
    pub fn new(config: SimConfig) -> Self {
        Scene { config, bodies: Vec::new(), contacts: Vec::new(), time: 0.0 }
    }

    pub fn add_body(&mut self, body: SceneBody) -> usize {
        self.bodies.push(body);
        self.bodies.len() - 1
    }

    pub fn snapshot(&self) -> Vec<BodyState> {
        self.bodies.iter().map(|b| b.state.clone()).collect()
    }

    pub fn restore(&mut self, snap: &[BodyState]) {
        assert_eq!(snap.len(), self.bodies.len());
        for (b, s) in self.bodies.iter_mut().zip(snap) {
            b.state = s.clone();
        }
        self.contacts.clear();
    }

    /// Advance one physics step driven by per-body PD targets; returns the
    /// applied generalized-force vectors (replayable via
    /// [`Scene::step_torques`]).
    pub fn step_targets(&mut self, targets: &[PdTargets]) -> Result<Vec<DVector<f64>>, SimFault> {
        assert_eq!(targets.len(), self.bodies.len());
        let taus: Vec<DVector<f64>> = self
            .bodies
            .iter()
            .zip(targets)
            .map(|(b, t)| b.controller.forces(&b.model, &b.state, t))
            .collect();
        self.step_torques(&taus)?;
        Ok(taus)
    }

    /// Advance one physics step with explicit generalized forces per body.
    pub fn step_torques(&mut self, taus: &[DVector<f64>]) -> Result<(), SimFault> {
        assert_eq!(taus.len(), self.bodies.len());
        for (i, (b, tau)) in self.bodies.iter().zip(taus).enumerate() {
            if tau.len() != b.model.ndof() {
                return Err(SimFault::BadTorqueLength {
                    body: i,
                    got: tau.len(),
                    expected: b.model.ndof(),
                });
            }
        }

        let kins: Vec<BodyKinematics> =
            self.bodies.iter().map(|b| kinematics(&b.model, &b.state)).collect();
        let (contacts, loads) = self.collect_contacts(&kins);
        self.contacts = contacts;

        let dt = self.config.dt;
        let mut udots = Vec::with_capacity(self.bodies.len());
        for (i, b) in self.bodies.iter().enumerate() {
            let damping = b.controller.damping_vector_at(&b.model, &b.state);
            let udot = forward_dynamics(
                &b.model,
                &b.state,
                &kins[i],
                &taus[i],
                &self.config.gravity,
                &loads[i],
                &damping,
                dt,
            )
            .ok_or(SimFault::SolverFailure { body: i, name: b.name.clone() })?;
            udots.push(udot);
        }
        for (i, b) in self.bodies.iter_mut().enumerate() {
            integrate(&b.model, &mut b.state, &udots[i], dt);
            if !b.state.is_finite() {
                return Err(SimFault::NonFinite { body: i, name: b.name.clone() });
            }
        }
        self.time += dt;
        Ok(())
    }

    /// Recompute the contact set for the current states without stepping
    /// (e.g. so a freshly reset scene can be observed).
    pub fn refresh_contacts(&mut self) {
        let kins: Vec<BodyKinematics> =
            self.bodies.iter().map(|b| kinematics(&b.model, &b.state)).collect();
        let (contacts, _) = self.collect_contacts(&kins);
        self.contacts = contacts;
    }

    /// Contact pass: returns the contact list and per-body per-link loads.
    ///
    /// Runs in two phases: first enumerate all geometric overlaps in a fixed
    /// deterministic order, then resolve forces knowing how many contacts
    /// each link pair shares (their impulse caps are split accordingly).
    fn collect_contacts(
        &self,
        kins: &[BodyKinematics],
    ) -> (Vec<ContactPoint>, Vec<Vec<LinkLoad>>) {
        // Phase 1: geometry. (a, b, geom) with b = None for the table.
        let mut geoms: Vec<((usize, usize), Option<(usize, usize)>, ContactGeom)> = Vec::new();
        for ai in 0..self.bodies.len() {
            let a = &self.bodies[ai];
            for al in 0..a.model.links.len() {
                for ac in &a.colliders[al] {
                    let a_pose = kins[ai].link_pose[al].compose(&ac.local);
                    // Against the table.
                    if self.config.table {
                        match &ac.shape {
                            ColliderShape::Sphere { radius } => {
                                if let Some(g) = sphere_plane(&a_pose.position, *radius) {
                                    geoms.push(((ai, al), None, g));
                                }
                            }
                            ColliderShape::Box { half } => {
                                for g in box_plane(&a_pose, half) {
                                    geoms.push(((ai, al), None, g));
                                }
                            }
                        }
                    }
                    // Against later bodies (each unordered pair once).
                    for bi in (ai + 1)..self.bodies.len() {
                        let b = &self.bodies[bi];
                        // Objects never collide with objects (single-object
                        // scenes; parts interleave at the hinge).
                        if a.role == BodyRole::Object && b.role == BodyRole::Object {
                            continue;
                        }
                        for bl in 0..b.model.links.len() {
                            for bc in &b.colliders[bl] {
                                let b_pose = kins[bi].link_pose[bl].compose(&bc.local);
                                let geom = match (&ac.shape, &bc.shape) {
                                    (
                                        ColliderShape::Sphere { radius: ra },
                                        ColliderShape::Sphere { radius: rb },
                                    ) => sphere_sphere(&a_pose.position, *ra, &b_pose.position, *rb),
                                    (
                                        ColliderShape::Sphere { radius: ra },
                                        ColliderShape::Box { half },
                                    ) => sphere_box(&a_pose.position, *ra, &b_pose, half),
                                    (
                                        ColliderShape::Box { half },
                                        ColliderShape::Sphere { radius: rb },
                                    ) => sphere_box(&b_pose.position, *rb, &a_pose, half)
                                        .map(|g| ContactGeom {
                                            point: g.point,
                                            normal: -g.normal,
                                            depth: g.depth,
                                        }),
                                    (ColliderShape::Box { .. }, ColliderShape::Box { .. }) => None,
                                };
                                if let Some(g) = geom {
                                    geoms.push(((ai, al), Some((bi, bl)), g));
                                }
                            }
                        }
                    }
                }
            }
        }

        // Contacts shared per link pair (table counts as one partner).
        let pair_key = |a: (usize, usize), b: Option<(usize, usize)>| {
            (link_id(a.0, a.1), b.map_or(TABLE_ID, |(bb, bl)| link_id(bb, bl)))
        };
        let mut shared: std::collections::HashMap<(usize, usize), f64> =
            std::collections::HashMap::new();
        for (a, b, _) in &geoms {
            *shared.entry(pair_key(*a, *b)).or_insert(0.0) += 1.0;
        }

        // Phase 2: force resolution.
        let point_vel = |bi: usize, li: usize, p: &Vector3<f64>| -> Vector3<f64> {
            let kin = &kins[bi];
            kin.link_origin_vel[li]
                + kin.link_ang_vel[li].cross(&(p - kin.link_pose[li].position))
        };
        let mobility = |bi: usize, li: usize| -> ContactMobility {
            let link = &self.bodies[bi].model.links[li];
            // Welded bases do not move under contact forces.
            if li == 0 && !self.bodies[bi].model.floating {
                return ContactMobility::STATIC;
            }
            let rot = kins[bi].link_pose[li].rotation_matrix();
            let inertia_w = rot * link.inertia * rot.transpose();
            ContactMobility::from_link(link.mass, &inertia_w, kins[bi].link_com[li])
        };

        let mut contacts = Vec::with_capacity(geoms.len());
        let mut loads: Vec<Vec<LinkLoad>> =
            self.bodies.iter().map(|b| vec![LinkLoad::default(); b.model.links.len()]).collect();
        for (a, b, geom) in geoms {
            let va = point_vel(a.0, a.1, &geom.point);
            let vb = b.map_or(Vector3::zeros(), |(bb, bl)| point_vel(bb, bl, &geom.point));
            let mob_a = mobility(a.0, a.1);
            let mob_b = b.map_or(ContactMobility::STATIC, |(bb, bl)| mobility(bb, bl));
            let n_shared = shared[&pair_key(a, b)];
            let force = resolve_contact(
                &geom,
                &va,
                &vb,
                &mob_a,
                &mob_b,
                n_shared,
                self.config.dt,
                &self.config.contact,
            );
            debug_assert!(force.dot(&geom.normal) >= -1e-12);
            loads[a.0][a.1].add_force_at_point(force, geom.point, kins[a.0].link_pose[a.1].position);
            if let Some((bb, bl)) = b {
                loads[bb][bl].add_force_at_point(
                    -force,
                    geom.point,
                    kins[bb].link_pose[bl].position,
                );
            }
            contacts.push(ContactPoint {
                link_a: link_id(a.0, a.1),
                link_b: b.map_or(TABLE_ID, |(bb, bl)| link_id(bb, bl)),
                point: geom.point,
                normal: geom.normal,
                depth: geom.depth,
                force,
            });
        }
        (contacts, loads)
    }

    /// Net world contact force per link of one body.
    pub fn link_contact_forces(&self, body: usize) -> Vec<Vector3<f64>> {
        let mut out = vec![Vector3::zeros(); self.bodies[body].model.links.len()];
        for c in &self.contacts {
            let (ba, la) = split_link_id(c.link_a);
            if ba == body {
                out[la] += c.force;
            }
            if c.link_b != TABLE_ID {
                let (bb, lb) = split_link_id(c.link_b);
                if bb == body {
                    out[lb] -= c.force;
                }
            }
        }
        out
    }

    /// Links of `body` whose net force against `other` specifically exceeds
    /// the contact threshold.
    pub fn links_touching(&self, body: usize, other: usize) -> Vec<bool> {
        let mut acc = vec![Vector3::zeros(); self.bodies[body].model.links.len()];
        for c in &self.contacts {
            let (ba, la) = split_link_id(c.link_a);
            let bo = if c.link_b == TABLE_ID { None } else { Some(split_link_id(c.link_b)) };
            if ba == body {
                if let Some((bb, _)) = bo {
                    if bb == other {
                        acc[la] += c.force;
                    }
                }
            } else if let Some((bb, lb)) = bo {
                if bb == body && ba == other {
                    acc[lb] -= c.force;
                }
            }
        }
        acc.iter().map(|f| f.norm() > self.config.contact_force_eps).collect()
    }

    /// Links of `body` touching a specific link of `other`.
    pub fn links_touching_link(&self, body: usize, other: usize, other_link: usize) -> Vec<bool> {
        let mut acc = vec![Vector3::zeros(); self.bodies[body].model.links.len()];
        for c in &self.contacts {
            let (ba, la) = split_link_id(c.link_a);
            let bo = if c.link_b == TABLE_ID { None } else { Some(split_link_id(c.link_b)) };
            if ba == body {
                if let Some((bb, lb)) = bo {
                    if bb == other && lb == other_link {
                        acc[la] += c.force;
                    }
                }
            } else if let Some((bb, lb)) = bo {
                if bb == body && ba == other && la == other_link {
                    acc[lb] -= c.force;
                }
            }
        }
        acc.iter().map(|f| f.norm() > self.config.contact_force_eps).collect()
    }

    /// Total contact force magnitude exerted on `body` by `other`.
    pub fn total_force_between(&self, body: usize, other: usize) -> f64 {
        let mut total = Vector3::zeros();
        for c in &self.contacts {
            let (ba, la) = split_link_id(c.link_a);
            let _ = la;
            if c.link_b == TABLE_ID {
                continue;
            }
            let (bb, _) = split_link_id(c.link_b);
            if ba == body && bb == other {
                total += c.force;
            } else if bb == body && ba == other {
                total -= c.force;
            }
        }
        total.norm()
    }
}

/// Helper for builders: a single-link floating body with one collider.
pub fn simple_body(
    name: &str,
    role: BodyRole,
    mass: f64,
    inertia: nalgebra::Matrix3<f64>,
    shape: ColliderShape,
    pose: Pose,
) -> SceneBody {
    let model = MultiBodyModel::new(vec![tree::Link {
        name: name.into(),
        parent: None,
        origin: Pose::IDENTITY,
        joint: tree::Joint::Root { floating: true },
        mass,
        com: Vector3::zeros(),
        inertia,
    }]);
    let state = BodyState::at_rest(&model, pose);
    let controller = PdController::passive(&model, 0.0, (0.0, 0.0));
    SceneBody::new(name, role, model, state, vec![vec![Collider { local: Pose::IDENTITY, shape }]], controller)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sphere_inertia;
    use approx::assert_relative_eq;

    fn drop_sphere_scene() -> Scene {
        let mut scene = Scene::new(SimConfig::default());
        scene.add_body(simple_body(
            "ball",
            BodyRole::Object,
            0.2,
            sphere_inertia(0.2, 0.03),
            ColliderShape::Sphere { radius: 0.03 },
            Pose::from_position(Vector3::new(0.0, 0.0, 0.05)),
        ));
        scene
    }

    #[test]
    fn dropped_sphere_settles_at_static_penetration() {
        let mut scene = drop_sphere_scene();
        let targets: Vec<PdTargets> =
            scene.bodies.iter().map(|b| PdTargets::hold(&b.state)).collect();
        for _ in 0..4000 {
            scene.step_targets(&targets).unwrap();
        }
        let z = scene.bodies[0].state.base.position.z;
        let static_depth = 0.2 * 9.81 / scene.config.contact.kp;
        let depth = 0.03 - z;
        assert!(depth > 0.0, "sphere must rest on the table");
        assert!(
            depth <= 1.1 * static_depth,
            "resting penetration {depth} exceeds 110% of {static_depth}"
        );
        assert!(scene.bodies[0].state.base_lin_vel.norm() < 1e-4);
    }

    #[test]
    fn contact_forces_push_along_normal() {
        let mut scene = drop_sphere_scene();
        let targets: Vec<PdTargets> =
            scene.bodies.iter().map(|b| PdTargets::hold(&b.state)).collect();
        for _ in 0..2000 {
            scene.step_targets(&targets).unwrap();
            for c in &scene.contacts {
                assert!(c.force.dot(&c.normal) >= -1e-12);
            }
        }
        assert!(!scene.contacts.is_empty());
        // At rest the normal force balances gravity.
        let f: f64 = scene.contacts.iter().map(|c| c.normal_force()).sum();
        assert_relative_eq!(f, 0.2 * 9.81, max_relative = 5e-2);
    }

    #[test]
    fn friction_drives_a_sliding_sphere_to_rolling() {
        let mut scene = drop_sphere_scene();
        scene.bodies[0].state.base.position.z = 0.03;
        scene.bodies[0].state.base_lin_vel = Vector3::new(0.5, 0.0, 0.0);
        let targets: Vec<PdTargets> =
            scene.bodies.iter().map(|b| PdTargets::hold(&b.state)).collect();
        for _ in 0..4000 {
            scene.step_targets(&targets).unwrap();
        }
        // Friction removes the slip at the contact point: the sphere ends up
        // rolling (v + ω × r ≈ 0 at the lowest point), slower than it began.
        let s = &scene.bodies[0].state;
        let r = Vector3::new(0.0, 0.0, -0.03);
        let slip = s.base_lin_vel + s.base_ang_vel.cross(&r);
        assert!(slip.norm() < 5e-3, "contact slip {} should vanish", slip.norm());
        assert!(s.base_lin_vel.norm() < 0.45);
    }

    #[test]
    fn torque_replay_is_bit_identical() {
        let mut scene = drop_sphere_scene();
        scene.bodies[0].state.base_lin_vel = Vector3::new(0.1, -0.05, 0.0);
        let snap = scene.snapshot();
        let targets: Vec<PdTargets> =
            scene.bodies.iter().map(|b| PdTargets::hold(&b.state)).collect();
        let mut recorded = Vec::new();
        for _ in 0..500 {
            recorded.push(scene.step_targets(&targets).unwrap());
        }
        let end_state = scene.snapshot();

        scene.restore(&snap);
        for taus in &recorded {
            scene.step_torques(taus).unwrap();
        }
        let replayed = scene.snapshot();
        for (a, b) in end_state.iter().zip(&replayed) {
            assert_eq!(a.base.position, b.base.position);
            assert_eq!(a.base.orientation, b.base.orientation);
            assert_eq!(a.base_lin_vel, b.base_lin_vel);
            assert_eq!(a.base_ang_vel, b.base_ang_vel);
            assert_eq!(a.q, b.q);
            assert_eq!(a.qd, b.qd);
        }
    }

    #[test]
    fn bad_torque_length_is_rejected() {
        let mut scene = drop_sphere_scene();
        let err = scene.step_torques(&[DVector::zeros(3)]).unwrap_err();
        assert!(matches!(err, SimFault::BadTorqueLength { expected: 6, got: 3, .. }));
    }
}
