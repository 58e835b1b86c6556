//! Two-part articulated objects: a free-floating base part and one movable
//! part on a single hinge.
//!
//! The base part's body frame is the object pose Ω; the movable part's body
//! frame is the hinge frame rotated by the articulation angle. Each part is
//! a union of box/sphere primitives that double as colliders; part mass
//! properties are assembled from the primitives.
//!
//! Three desk-scale objects are built in. Each has a handle bar on the base
//! for power grasps and a distinct hinge orientation:
//! - `hinged_box` — a box with a vertical-axis door flap on top,
//! - `clamshell` — a laptop-like lid over a base slab (horizontal hinge),
//! - `lever_jar` — a squat body with a side-mounted pump lever.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};

use crate::math::{box_inertia, parallel_axis, sphere_inertia, unit, Pose};
use crate::sim::contact::{Collider, ColliderShape};
use crate::sim::pd::PdController;
use crate::sim::tree::{BodyKinematics, BodyState, Joint, Link, MultiBodyModel};
use crate::sim::{BodyRole, SceneBody, SimConfig};

use super::{ModelError, Part};

/// One shape primitive of a part, in the part's body frame.
#[derive(Clone, Debug)]
pub struct Primitive {
    pub local: Pose,
    pub shape: ColliderShape,
    pub mass: f64,
}

impl Primitive {
    pub fn boxed(pos: Vector3<f64>, half: Vector3<f64>, mass: f64) -> Self {
        Primitive { local: Pose::from_position(pos), shape: ColliderShape::Box { half }, mass }
    }

    pub fn sphere(pos: Vector3<f64>, radius: f64, mass: f64) -> Self {
        Primitive { local: Pose::from_position(pos), shape: ColliderShape::Sphere { radius }, mass }
    }

    fn inertia_about_own_com(&self) -> Matrix3<f64> {
        match &self.shape {
            ColliderShape::Box { half } => {
                let i = box_inertia(self.mass, half);
                let r = self.local.rotation_matrix();
                r * i * r.transpose()
            }
            ColliderShape::Sphere { radius } => sphere_inertia(self.mass, *radius),
        }
    }
}

/// Mass, COM (part frame), and inertia about that COM for a primitive union.
pub fn assemble_mass(prims: &[Primitive]) -> (f64, Vector3<f64>, Matrix3<f64>) {
    let mass: f64 = prims.iter().map(|p| p.mass).sum();
    assert!(mass > 0.0, "part must have positive mass");
    let com = prims.iter().map(|p| p.local.position * p.mass).sum::<Vector3<f64>>() / mass;
    let mut inertia = Matrix3::zeros();
    for p in prims {
        inertia += parallel_axis(&p.inertia_about_own_com(), p.mass, &(p.local.position - com));
    }
    (mass, com, inertia)
}

/// An articulated two-part object description.
#[derive(Clone, Debug)]
pub struct ObjectModel {
    pub name: String,
    pub base: Vec<Primitive>,
    pub art: Vec<Primitive>,
    /// Hinge axis in the hinge frame.
    pub hinge_axis: Unit<Vector3<f64>>,
    /// Hinge frame in the base part's body frame.
    pub hinge_mount: Pose,
    /// Articulation angle range [rad].
    pub hinge_limits: (f64, f64),
    /// Rest height of the base frame so the object sits on the table.
    pub rest_height: f64,
}

impl ObjectModel {
    pub fn base_mass(&self) -> f64 {
        self.base.iter().map(|p| p.mass).sum()
    }

    pub fn art_mass(&self) -> f64 {
        self.art.iter().map(|p| p.mass).sum()
    }

    pub fn part_mass(&self, part: Part) -> f64 {
        match part {
            Part::Base => self.base_mass(),
            Part::Art => self.art_mass(),
        }
    }

    /// Build the dynamics tree. `fixed_base` welds the base to the world
    /// (training phase 1); otherwise the base is free.
    pub fn build(&self, fixed_base: bool) -> (MultiBodyModel, Vec<Vec<Collider>>) {
        let (bm, bc, bi) = assemble_mass(&self.base);
        let (am, ac, ai) = assemble_mass(&self.art);
        let links = vec![
            Link {
                name: format!("{}_base", self.name),
                parent: None,
                origin: Pose::IDENTITY,
                joint: Joint::Root { floating: !fixed_base },
                mass: bm,
                com: bc,
                inertia: bi,
            },
            Link {
                name: format!("{}_art", self.name),
                parent: Some(0),
                origin: self.hinge_mount,
                joint: Joint::Revolute { axis: self.hinge_axis, limits: Some(self.hinge_limits) },
                mass: am,
                com: ac,
                inertia: ai,
            },
        ];
        let to_colliders = |prims: &[Primitive]| {
            prims
                .iter()
                .map(|p| Collider { local: p.local, shape: p.shape.clone() })
                .collect::<Vec<_>>()
        };
        (MultiBodyModel::new(links), vec![to_colliders(&self.base), to_colliders(&self.art)])
    }

    /// Scene body at the given base pose with standard passive control.
    pub fn scene_body(&self, fixed_base: bool, base: Pose, config: &SimConfig) -> SceneBody {
        let (model, colliders) = self.build(fixed_base);
        let controller = PdController::passive(
            &model,
            config.hinge_damping,
            (config.hinge_limit_kp, config.hinge_limit_kd),
        );
        let state = BodyState::at_rest(&model, base);
        SceneBody::new(self.name.clone(), BodyRole::Object, model, state, colliders, controller)
    }

    /// Rest pose: sitting on the table at the origin.
    pub fn rest_pose(&self) -> Pose {
        Pose::from_position(Vector3::new(0.0, 0.0, self.rest_height))
    }

    /// World pose of a part frame given the object's state.
    pub fn part_pose(&self, state: &BodyState, part: Part) -> Pose {
        self.part_pose_at(&state.base, state.q[0], part)
    }

    /// World pose of a part frame from an explicit base pose and angle
    /// (for data that carries object poses without a dynamics state).
    pub fn part_pose_at(&self, base: &Pose, angle: f64, part: Part) -> Pose {
        match part {
            Part::Base => *base,
            Part::Art => {
                let spin = UnitQuaternion::from_axis_angle(&self.hinge_axis, angle);
                base.compose(&self.hinge_mount).compose(&Pose::from_rotation(spin))
            }
        }
    }

    /// Distance from a world point to the part's primitive union
    /// (negative inside a primitive).
    pub fn part_distance_at(
        &self,
        base: &Pose,
        angle: f64,
        part: Part,
        point: &Vector3<f64>,
    ) -> f64 {
        let frame = self.part_pose_at(base, angle, part);
        let prims = match part {
            Part::Base => &self.base,
            Part::Art => &self.art,
        };
        let mut best = f64::INFINITY;
        for p in prims {
            let local = frame.compose(&p.local).inverse().transform_point(point);
            let d = match &p.shape {
                ColliderShape::Sphere { radius } => local.norm() - radius,
                ColliderShape::Box { half } => {
                    let excess = Vector3::new(
                        local.x.abs() - half.x,
                        local.y.abs() - half.y,
                        local.z.abs() - half.z,
                    );
                    let outside = Vector3::new(
                        excess.x.max(0.0),
                        excess.y.max(0.0),
                        excess.z.max(0.0),
                    );
                    if outside.norm() > 0.0 {
                        outside.norm()
                    } else {
                        excess.max()
                    }
                }
            };
            best = best.min(d);
        }
        best
    }

    /// Mass-weighted whole-object COM in world coordinates.
    pub fn center_of_mass(&self, kin: &BodyKinematics) -> Vector3<f64> {
        let (bm, am) = (self.base_mass(), self.art_mass());
        (kin.link_com[0] * bm + kin.link_com[1] * am) / (bm + am)
    }

    /// World hinge axis direction and a world point on the axis.
    pub fn hinge_world(&self, state: &BodyState) -> (Vector3<f64>, Vector3<f64>) {
        let frame = state.base.compose(&self.hinge_mount);
        (frame.rotate_vector(&self.hinge_axis), frame.position)
    }

    // --- built-in objects ---------------------------------------------------

    /// Box with a top handle bar and a vertical-axis door flap at the rear
    /// edge. The flap swings in the horizontal plane, so gravity neither
    /// opens nor closes it.
    pub fn hinged_box() -> Self {
        ObjectModel {
            name: "hinged_box".into(),
            base: vec![
                Primitive::boxed(Vector3::zeros(), Vector3::new(0.05, 0.05, 0.03), 0.4),
                // Handle bar along y, 22 mm of finger clearance beneath it.
                Primitive::boxed(Vector3::new(0.0, 0.0, 0.06), Vector3::new(0.008, 0.04, 0.008), 0.1),
            ],
            art: vec![
                // Thin flap hanging from the hinge toward −y.
                Primitive::boxed(Vector3::new(0.0, -0.03, 0.0), Vector3::new(0.004, 0.03, 0.03), 0.08),
            ],
            hinge_axis: unit(0.0, 0.0, 1.0),
            hinge_mount: Pose::from_position(Vector3::new(-0.046, 0.046, 0.072)),
            hinge_limits: (0.0, 1.8),
            rest_height: 0.03,
        }
    }

    /// Laptop-like clamshell: base slab with a front handle bar, lid on a
    /// horizontal hinge along the rear edge; positive angle opens the lid.
    pub fn clamshell() -> Self {
        ObjectModel {
            name: "clamshell".into(),
            base: vec![
                Primitive::boxed(Vector3::zeros(), Vector3::new(0.06, 0.045, 0.008), 0.35),
                Primitive::boxed(Vector3::new(0.05, 0.0, 0.024), Vector3::new(0.008, 0.03, 0.008), 0.08),
            ],
            art: vec![Primitive::boxed(
                Vector3::new(0.058, 0.0, 0.005),
                Vector3::new(0.058, 0.045, 0.004),
                0.15,
            )],
            // Axis −y: positive angle lifts the lid's free edge.
            hinge_axis: unit(0.0, -1.0, 0.0),
            hinge_mount: Pose::from_position(Vector3::new(-0.06, 0.0, 0.009)),
            hinge_limits: (0.0, 2.2),
            rest_height: 0.008,
        }
    }

    /// Squat jar with a top handle bar and a side-mounted pump lever that
    /// swings upward about the x axis.
    pub fn lever_jar() -> Self {
        ObjectModel {
            name: "lever_jar".into(),
            base: vec![
                Primitive::boxed(Vector3::zeros(), Vector3::new(0.035, 0.035, 0.045), 0.45),
                Primitive::boxed(Vector3::new(0.0, 0.0, 0.075), Vector3::new(0.008, 0.03, 0.008), 0.08),
            ],
            art: vec![Primitive::boxed(
                Vector3::new(0.0, 0.035, 0.0),
                Vector3::new(0.006, 0.035, 0.006),
                0.05,
            )],
            hinge_axis: unit(1.0, 0.0, 0.0),
            hinge_mount: Pose::from_position(Vector3::new(0.041, 0.0, 0.03)),
            hinge_limits: (0.0, 1.4),
            rest_height: 0.045,
        }
    }

    /// The built-in object with the given name.
    pub fn by_name(name: &str) -> Result<Self, ModelError> {
        match name {
            "hinged_box" => Ok(Self::hinged_box()),
            "clamshell" => Ok(Self::clamshell()),
            "lever_jar" => Ok(Self::lever_jar()),
            other => Err(ModelError::bad(format!("unknown built-in object '{other}'"))),
        }
    }

    pub const BUILTIN: [&'static str; 3] = ["hinged_box", "clamshell", "lever_jar"];
}

// --- file format -------------------------------------------------------------

const OBJECT_MAGIC: &str = "ARTIOBJ 1";

/// Serialize an object description.
pub fn write_object(obj: &ObjectModel) -> String {
    let mut out = String::new();
    out.push_str(OBJECT_MAGIC);
    out.push('\n');
    out.push_str(&format!("name {}\n", obj.name));
    out.push_str(&format!("rest_height {}\n", obj.rest_height));
    for (part, prims) in [(Part::Base, &obj.base), (Part::Art, &obj.art)] {
        out.push_str(&format!("part {part}\n"));
        for p in prims {
            let q = p.local.orientation;
            let pos = p.local.position;
            match &p.shape {
                ColliderShape::Box { half } => out.push_str(&format!(
                    "prim box {} {} {} {} {} {} {} {} {} {} {}\n",
                    pos.x, pos.y, pos.z, q.w, q.i, q.j, q.k, half.x, half.y, half.z, p.mass
                )),
                ColliderShape::Sphere { radius } => out.push_str(&format!(
                    "prim sphere {} {} {} {} {} {} {} {} {}\n",
                    pos.x, pos.y, pos.z, q.w, q.i, q.j, q.k, radius, p.mass
                )),
            }
        }
    }
    let a = obj.hinge_axis;
    let m = obj.hinge_mount;
    let q = m.orientation;
    out.push_str(&format!(
        "hinge axis {} {} {} mount {} {} {} {} {} {} {} limits {} {}\n",
        a.x,
        a.y,
        a.z,
        m.position.x,
        m.position.y,
        m.position.z,
        q.w,
        q.i,
        q.j,
        q.k,
        obj.hinge_limits.0,
        obj.hinge_limits.1
    ));
    out
}

/// Parse an object description written by [`write_object`].
pub fn parse_object(text: &str) -> Result<ObjectModel, ModelError> {
    let mut lines = super::content_lines(text);
    let header = lines.next().ok_or_else(|| ModelError::bad("empty object file"))?;
    if header.trim() != OBJECT_MAGIC {
        return Err(ModelError::bad(format!("expected '{OBJECT_MAGIC}' header, got '{header}'")));
    }
    let mut name = None;
    let mut rest_height = 0.0;
    let mut base = Vec::new();
    let mut art = Vec::new();
    let mut hinge = None;
    let mut current: Option<Part> = None;
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "name" => name = Some(super::tok(&toks, 1)?.to_string()),
            "rest_height" => rest_height = super::num(&toks, 1)?,
            "part" => current = Some(Part::from_tag(super::tok(&toks, 1)?)?),
            "prim" => {
                let part = current.ok_or_else(|| ModelError::bad("prim before any part"))?;
                let f = |i| super::num(&toks, i);
                let pos = Vector3::new(f(2)?, f(3)?, f(4)?);
                let local = Pose::new(pos, super::quat(&toks, 5)?);
                let prim = match super::tok(&toks, 1)? {
                    "box" => Primitive {
                        local,
                        shape: ColliderShape::Box { half: Vector3::new(f(9)?, f(10)?, f(11)?) },
                        mass: f(12)?,
                    },
                    "sphere" => Primitive {
                        local,
                        shape: ColliderShape::Sphere { radius: f(9)? },
                        mass: f(10)?,
                    },
                    other => return Err(ModelError::bad(format!("unknown prim kind '{other}'"))),
                };
                if prim.mass <= 0.0 {
                    return Err(ModelError::bad("prim mass must be positive"));
                }
                match part {
                    Part::Base => base.push(prim),
                    Part::Art => art.push(prim),
                }
            }
            "hinge" => {
                let f = |i| super::num(&toks, i);
                let axis = super::unit3(&toks, 2)?;
                let (lo, hi) = (f(14)?, f(15)?);
                if lo >= hi {
                    return Err(ModelError::bad("hinge limits lo >= hi"));
                }
                hinge = Some((
                    axis,
                    Pose::new(Vector3::new(f(6)?, f(7)?, f(8)?), super::quat(&toks, 9)?),
                    (lo, hi),
                ));
            }
            other => return Err(ModelError::bad(format!("unknown object record '{other}'"))),
        }
    }
    let (hinge_axis, hinge_mount, hinge_limits) =
        hinge.ok_or_else(|| ModelError::bad("missing hinge record"))?;
    if base.is_empty() || art.is_empty() {
        return Err(ModelError::bad("both parts need at least one primitive"));
    }
    Ok(ObjectModel {
        name: name.ok_or_else(|| ModelError::bad("missing name record"))?,
        base,
        art,
        hinge_axis,
        hinge_mount,
        hinge_limits,
        rest_height,
    })
}

pub fn save_object(path: &std::path::Path, obj: &ObjectModel) -> Result<(), ModelError> {
    std::fs::write(path, write_object(obj)).map_err(ModelError::from)
}

pub fn load_object(path: &std::path::Path) -> Result<ObjectModel, ModelError> {
    parse_object(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::pd::PdTargets;
    use crate::sim::tree::kinematics;
    use crate::sim::{Scene, SimConfig};
    use approx::assert_relative_eq;

    #[test]
    fn part_pose_tracks_hinge_angle() {
        let obj = ObjectModel::hinged_box();
        let (model, _) = obj.build(false);
        let mut state = BodyState::at_rest(&model, obj.rest_pose());
        state.q[0] = 0.7;
        // Analytic: art frame = base ∘ mount ∘ Rz(0.7).
        let expect = state
            .base
            .compose(&obj.hinge_mount)
            .compose(&Pose::from_rotation(UnitQuaternion::from_axis_angle(&obj.hinge_axis, 0.7)));
        let got = obj.part_pose(&state, Part::Art);
        assert_relative_eq!(got.position, expect.position, epsilon = 1e-12);
        assert!(crate::math::rotation_angle_between(&got.orientation, &expect.orientation) < 1e-12);
        // And it matches the dynamics tree's FK exactly.
        let kin = kinematics(&model, &state);
        assert_relative_eq!(kin.link_pose[1].position, expect.position, epsilon = 1e-12);
        assert!(
            crate::math::rotation_angle_between(&kin.link_pose[1].orientation, &expect.orientation)
                < 1e-12
        );
    }

    #[test]
    fn builtin_objects_rest_stably_on_table() {
        for name in ObjectModel::BUILTIN {
            let obj = ObjectModel::by_name(name).unwrap();
            let config = SimConfig::default();
            let mut scene = Scene::new(config);
            scene.add_body(obj.scene_body(false, obj.rest_pose(), &config));
            let targets = vec![PdTargets::hold(&scene.bodies[0].state)];
            for _ in 0..2000 {
                scene.step_targets(&targets).unwrap();
            }
            let s = &scene.bodies[0].state;
            assert!(s.is_finite(), "{name} went non-finite");
            assert!(
                (s.base.position - obj.rest_pose().position).norm() < 5e-3,
                "{name} drifted {:?}",
                s.base.position
            );
            assert!(s.base_lin_vel.norm() < 1e-3, "{name} still moving");
            assert!(s.q[0].abs() < 0.05, "{name} hinge swung to {}", s.q[0]);
        }
    }

    #[test]
    fn gravity_opens_nothing_on_the_vertical_hinge() {
        // The door flap axis is vertical: gravity must produce no hinge
        // torque, so the angle stays where it is put.
        let obj = ObjectModel::hinged_box();
        let config = SimConfig::default();
        let mut scene = Scene::new(config);
        scene.add_body(obj.scene_body(true, obj.rest_pose(), &config));
        scene.bodies[0].state.q[0] = 0.9;
        let targets = vec![PdTargets::hold(&scene.bodies[0].state)];
        for _ in 0..2000 {
            scene.step_targets(&targets).unwrap();
        }
        assert_relative_eq!(scene.bodies[0].state.q[0], 0.9, epsilon = 1e-6);
    }

    #[test]
    fn clamshell_lid_falls_closed_under_gravity() {
        let obj = ObjectModel::clamshell();
        let config = SimConfig::default();
        let mut scene = Scene::new(config);
        scene.add_body(obj.scene_body(true, obj.rest_pose(), &config));
        scene.bodies[0].state.q[0] = 0.5;
        let targets = vec![PdTargets::hold(&scene.bodies[0].state)];
        for _ in 0..4000 {
            scene.step_targets(&targets).unwrap();
        }
        assert!(scene.bodies[0].state.q[0] < 0.05, "lid should fall closed");
    }

    #[test]
    fn hinge_limits_hold_under_external_push() {
        let obj = ObjectModel::hinged_box();
        let config = SimConfig::default();
        let mut scene = Scene::new(config);
        scene.add_body(obj.scene_body(true, obj.rest_pose(), &config));
        // Constant external hinge torque on top of the passive controller
        // (whose one-sided springs implement the limits).
        let hold = PdTargets::hold(&scene.bodies[0].state);
        for _ in 0..4000 {
            let b = &scene.bodies[0];
            let mut tau = b.controller.forces(&b.model, &b.state, &hold);
            tau[0] += 0.5;
            scene.step_torques(&[tau]).unwrap();
        }
        let q = scene.bodies[0].state.q[0];
        assert!(q > 1.8 && q < 1.95, "hinge should stop just past the 1.8 limit, got {q}");
    }

    #[test]
    fn object_file_roundtrip_is_lossless() {
        for name in ObjectModel::BUILTIN {
            let obj = ObjectModel::by_name(name).unwrap();
            let text = write_object(&obj);
            let parsed = parse_object(&text).unwrap();
            assert_eq!(text, write_object(&parsed), "{name} roundtrip not byte-stable");
            assert_eq!(parsed.name, obj.name);
            assert_relative_eq!(parsed.base_mass(), obj.base_mass());
            assert_relative_eq!(parsed.art_mass(), obj.art_mass());
        }
    }

    #[test]
    fn parse_rejects_malformed_objects() {
        assert!(parse_object("").is_err());
        let good = write_object(&ObjectModel::hinged_box());
        assert!(parse_object(&good.replace("ARTIOBJ 1", "ARTIOBJ 2")).is_err());
        assert!(parse_object(&good.replace("hinge axis 0 0 1", "hinge axis 0 0 9")).is_err());
        // Limits reversed.
        assert!(parse_object(&good.replace("limits 0 1.8", "limits 1.8 0")).is_err());
    }
}
