//! Primitive robot hand: a wrist box plus five equal three-segment fingers.
//!
//! Every finger joint has three rotational DoFs — abduction about z,
//! flexion about y, twist about x, composed in that order — so a hand has
//! 15 segments × 3 = 45 joint DoFs plus the free 6-DoF wrist: 51 in total.
//! In the tree each 3-DoF joint is two massless intermediate links followed
//! by the mass-carrying segment link; the 16 *real* links (wrist + 15
//! segments) are what contacts and features refer to.
//!
//! The wrist frame has fingers along +x and the palm facing −z; positive
//! flexion curls a finger toward the palm. The thumb is the same finger
//! geometry on a 45°-rotated side mount. A left hand is the mirror image
//! across the xz-plane, built so that equal joint angles produce mirrored
//! poses.

use nalgebra::{UnitQuaternion, Vector3};

use crate::math::{box_inertia, cylinder_inertia_x, quat_from_rotvec, unit, Pose};
use crate::sim::contact::{Collider, ColliderShape};
use crate::sim::pd::{PdController, PdTargets, WristGains};
use crate::sim::tree::{BodyState, Joint, Link, MultiBodyModel};

use super::{Handedness, ModelError};

/// Joint DoFs per hand (fingers only).
pub const FINGER_DOFS: usize = 45;
/// Full action/state dimension per hand: 6 wrist + 45 finger DoFs.
pub const HAND_DOFS: usize = 51;
/// Real (mass-carrying, collidable) links per hand.
pub const REAL_LINKS: usize = 16;
pub const FINGERS: usize = 5;
pub const SEGMENTS_PER_FINGER: usize = 3;

/// Per-DoF axis order within a finger joint.
pub const AXIS_ABDUCT: usize = 0;
pub const AXIS_FLEX: usize = 1;
pub const AXIS_TWIST: usize = 2;

/// Index into the 45-dim finger angle vector.
pub fn finger_q_index(finger: usize, segment: usize, axis: usize) -> usize {
    debug_assert!(finger < FINGERS && segment < SEGMENTS_PER_FINGER && axis < 3);
    9 * finger + 3 * segment + axis
}

/// One finger segment as stored in hand description files.
#[derive(Clone, Debug)]
pub struct SegmentSpec {
    /// Parent real-link id: 0 is the wrist, 1..=15 are segments.
    pub parent: usize,
    /// Mount pose in the parent real link's body frame.
    pub mount: Pose,
    pub mass: f64,
    /// Segment length along its +x axis [m].
    pub length: f64,
    /// Collision sphere radius at the distal end [m].
    pub radius: f64,
    /// (lo, hi) per axis in [abduct, flex, twist] order.
    pub limits: [(f64, f64); 3],
}

/// Plain description of a hand — the file image.
#[derive(Clone, Debug)]
pub struct HandSpec {
    pub side: Handedness,
    pub wrist_mass: f64,
    pub wrist_half: Vector3<f64>,
    pub wrist_radius: f64,
    pub wrist_gains: WristGains,
    pub finger_kp: f64,
    pub finger_kd: f64,
    /// 15 segments, finger-major (thumb first), proximal to distal.
    pub segments: Vec<SegmentSpec>,
}

impl HandSpec {
    /// The built-in right hand.
    pub fn default_right() -> Self {
        Self::default_for(Handedness::Right)
    }

    /// The built-in left hand (mirror of the right).
    pub fn default_left() -> Self {
        Self::default_for(Handedness::Left)
    }

    pub fn default_for(side: Handedness) -> Self {
        let mirror = |p: Pose| -> Pose {
            match side {
                Handedness::Right => p,
                Handedness::Left => mirror_pose_y(&p),
            }
        };
        let lengths = [0.045, 0.03, 0.025];
        let limits =
            [(-0.5, 0.5), (-0.2, 1.7), (-0.5, 0.5)];
        let mut segments = Vec::with_capacity(FINGERS * SEGMENTS_PER_FINGER);
        for f in 0..FINGERS {
            let mount = if f == 0 {
                // Thumb: side mount, rotated 45° toward the fingers.
                Pose::new(
                    Vector3::new(0.015, 0.036, 0.0),
                    UnitQuaternion::from_axis_angle(&unit(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_4),
                )
            } else {
                Pose::from_position(Vector3::new(0.04, 0.027 - 0.018 * (f as f64 - 1.0), 0.0))
            };
            for s in 0..SEGMENTS_PER_FINGER {
                let (parent, mount) = if s == 0 {
                    (0, mirror(mount))
                } else {
                    // Chained at the previous segment's distal end.
                    (f * SEGMENTS_PER_FINGER + s, Pose::from_position(Vector3::new(lengths[s - 1], 0.0, 0.0)))
                };
                segments.push(SegmentSpec {
                    parent,
                    mount,
                    mass: 0.03,
                    length: lengths[s],
                    radius: 0.008,
                    limits,
                });
            }
        }
        HandSpec {
            side,
            wrist_mass: 0.3,
            wrist_half: Vector3::new(0.04, 0.036, 0.012),
            wrist_radius: 0.025,
            // Sized so a full 0.02 m target offset pulls ~40 N: enough to
            // carry the hand's own 0.75 kg plus a ~1 kg object with room to
            // accelerate, while sagging only ~4 mm under gravity. Damping is
            // near-critical for the hand's mass so approaches don't overshoot.
            wrist_gains: WristGains { kp_lin: 2000.0, kd_lin: 100.0, kp_ang: 50.0, kd_ang: 2.0 },
            finger_kp: 3.0,
            finger_kd: 0.1,
            segments,
        }
    }

    /// Expand the description into a simulatable hand.
    pub fn build(&self) -> HandModel {
        assert_eq!(self.segments.len(), FINGERS * SEGMENTS_PER_FINGER);
        // Abduction/flexion/twist axes; the left hand mirrors chirality by
        // flipping the z and x axes so equal angles give mirrored poses.
        let (ax_abd, ax_flex, ax_twist) = match self.side {
            Handedness::Right => (unit(0.0, 0.0, 1.0), unit(0.0, 1.0, 0.0), unit(1.0, 0.0, 0.0)),
            Handedness::Left => (unit(0.0, 0.0, -1.0), unit(0.0, 1.0, 0.0), unit(-1.0, 0.0, 0.0)),
        };

        let mut links = vec![Link {
            name: "wrist".into(),
            parent: None,
            origin: Pose::IDENTITY,
            joint: Joint::Root { floating: true },
            mass: self.wrist_mass,
            com: Vector3::zeros(),
            inertia: box_inertia(self.wrist_mass, &self.wrist_half),
        }];
        let mut colliders: Vec<Vec<Collider>> = vec![vec![Collider {
            local: Pose::from_position(Vector3::new(0.01, 0.0, 0.0)),
            shape: ColliderShape::Sphere { radius: self.wrist_radius },
        }]];
        let mut feature_links = vec![0usize];

        // Tree index of a real-link id: wrist 0, segment i at 3i+3.
        let real_tree_index = |real_id: usize| if real_id == 0 { 0 } else { 3 * real_id };

        for (i, seg) in self.segments.iter().enumerate() {
            let f = i / SEGMENTS_PER_FINGER;
            let s = i % SEGMENTS_PER_FINGER;
            let parent_tree = real_tree_index(seg.parent);
            let tag = format!("f{f}s{s}");
            let massless = |name: String, parent, origin, axis, limits| Link {
                name,
                parent: Some(parent),
                origin,
                joint: Joint::Revolute { axis, limits: Some(limits) },
                mass: 0.0,
                com: Vector3::zeros(),
                inertia: nalgebra::Matrix3::zeros(),
            };
            let base = links.len();
            links.push(massless(format!("{tag}_abd"), parent_tree, seg.mount, ax_abd, seg.limits[0]));
            links.push(massless(format!("{tag}_flex"), base, Pose::IDENTITY, ax_flex, seg.limits[1]));
            links.push(Link {
                name: tag,
                parent: Some(base + 1),
                origin: Pose::IDENTITY,
                joint: Joint::Revolute { axis: ax_twist, limits: Some(seg.limits[2]) },
                mass: seg.mass,
                com: Vector3::new(seg.length / 2.0, 0.0, 0.0),
                inertia: cylinder_inertia_x(seg.mass, seg.radius, seg.length),
            });
            colliders.push(Vec::new());
            colliders.push(Vec::new());
            colliders.push(vec![Collider {
                local: Pose::from_position(Vector3::new(seg.length, 0.0, 0.0)),
                shape: ColliderShape::Sphere { radius: seg.radius },
            }]);
            feature_links.push(base + 2);
        }

        let body = MultiBodyModel::new(links);
        let controller = PdController {
            wrist: Some(self.wrist_gains),
            joint_kp: vec![self.finger_kp; FINGER_DOFS],
            joint_kd: vec![self.finger_kd; FINGER_DOFS],
            limit_gains: vec![(self.finger_kp, self.finger_kd); FINGER_DOFS],
        };
        let mut limits = [(0.0, 0.0); FINGER_DOFS];
        for (i, seg) in self.segments.iter().enumerate() {
            for a in 0..3 {
                limits[3 * i + a] = seg.limits[a];
            }
        }
        HandModel {
            spec: self.clone(),
            body,
            colliders,
            controller,
            feature_links: feature_links.clone().try_into().expect("16 real links"),
            q_limits: limits,
        }
    }
}

/// Mirror a pose across the xz-plane (y → −y), keeping a proper rotation.
pub fn mirror_pose_y(p: &Pose) -> Pose {
    let s = nalgebra::Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
    let m = s * p.rotation_matrix() * s;
    Pose::new(
        Vector3::new(p.position.x, -p.position.y, p.position.z),
        UnitQuaternion::from_matrix(&m),
    )
}

/// A buildable, simulatable hand.
#[derive(Clone, Debug)]
pub struct HandModel {
    pub spec: HandSpec,
    pub body: MultiBodyModel,
    /// Per tree-link collider lists.
    pub colliders: Vec<Vec<Collider>>,
    pub controller: PdController,
    /// Tree-link index of each real link: wrist first, then segments
    /// finger-major proximal-to-distal.
    pub feature_links: [usize; REAL_LINKS],
    /// Joint limits per finger DoF.
    pub q_limits: [(f64, f64); FINGER_DOFS],
}

impl HandModel {
    pub fn default_right() -> Self {
        HandSpec::default_right().build()
    }

    pub fn default_left() -> Self {
        HandSpec::default_left().build()
    }

    pub fn for_side(side: Handedness) -> Self {
        HandSpec::default_for(side).build()
    }

    /// Tree-link indices of the five fingertip segments.
    pub fn fingertip_links(&self) -> [usize; FINGERS] {
        let mut out = [0; FINGERS];
        for f in 0..FINGERS {
            out[f] = self.feature_links[1 + f * SEGMENTS_PER_FINGER + (SEGMENTS_PER_FINGER - 1)];
        }
        out
    }

    /// Real-link slots (0..16) of the fingertips.
    pub fn fingertip_slots(&self) -> [usize; FINGERS] {
        let mut out = [0; FINGERS];
        for f in 0..FINGERS {
            out[f] = 1 + f * SEGMENTS_PER_FINGER + (SEGMENTS_PER_FINGER - 1);
        }
        out
    }

    /// World positions of the 16 real links' reference points (the wrist
    /// origin and each segment's distal end).
    pub fn real_link_points(&self, kin: &crate::sim::tree::BodyKinematics) -> [Vector3<f64>; REAL_LINKS] {
        let mut out = [Vector3::zeros(); REAL_LINKS];
        for (slot, &tree_idx) in self.feature_links.iter().enumerate() {
            out[slot] = if slot == 0 {
                kin.link_pose[tree_idx].position
            } else {
                let seg = &self.spec.segments[slot - 1];
                kin.link_pose[tree_idx].transform_point(&Vector3::new(seg.length, 0.0, 0.0))
            };
        }
        out
    }

    /// Map a 51-dim action of bounded deltas onto PD targets.
    ///
    /// Layout: `[wrist Δpos (3), wrist Δrot vector (3), finger Δq (45)]`.
    /// Each component is clamped to its scale, then added to the current
    /// configuration; finger targets are clamped to the joint limits.
    pub fn targets_from_action(
        &self,
        state: &BodyState,
        action: &[f64],
        scale: &ActionScale,
    ) -> PdTargets {
        assert_eq!(action.len(), HAND_DOFS);
        let clamp = |v: f64, s: f64| v.clamp(-s, s);
        let dp = Vector3::new(
            clamp(action[0], scale.lin),
            clamp(action[1], scale.lin),
            clamp(action[2], scale.lin),
        );
        let dr = Vector3::new(
            clamp(action[3], scale.ang),
            clamp(action[4], scale.ang),
            clamp(action[5], scale.ang),
        );
        let mut q = vec![0.0; FINGER_DOFS];
        for i in 0..FINGER_DOFS {
            let (lo, hi) = self.q_limits[i];
            q[i] = (state.q[i] + clamp(action[6 + i], scale.joint)).clamp(lo, hi);
        }
        PdTargets {
            base_pos: state.base.position + dp,
            base_rot: quat_from_rotvec(&dr) * state.base.orientation,
            q,
        }
    }
}

/// Per-step action clamp scales.
#[derive(Clone, Copy, Debug)]
pub struct ActionScale {
    /// Wrist translation delta bound [m].
    pub lin: f64,
    /// Wrist rotation delta bound [rad].
    pub ang: f64,
    /// Finger angle delta bound [rad].
    pub joint: f64,
}

impl Default for ActionScale {
    fn default() -> Self {
        ActionScale { lin: 0.02, ang: 0.1, joint: 0.1 }
    }
}

// --- file format -------------------------------------------------------------

const HAND_MAGIC: &str = "ARTIHAND 1";

/// Serialize a hand description (text, one record per line).
pub fn write_hand_spec(spec: &HandSpec) -> String {
    let mut out = String::new();
    out.push_str(HAND_MAGIC);
    out.push('\n');
    out.push_str("# primitive hand: wrist + 5 fingers x 3 segments, 3 DoF per joint\n");
    out.push_str(&format!("side {}\n", spec.side.tag()));
    let g = spec.wrist_gains;
    out.push_str(&format!(
        "wrist mass {} half {} {} {} radius {} gains {} {} {} {}\n",
        spec.wrist_mass,
        spec.wrist_half.x,
        spec.wrist_half.y,
        spec.wrist_half.z,
        spec.wrist_radius,
        g.kp_lin,
        g.kd_lin,
        g.kp_ang,
        g.kd_ang
    ));
    out.push_str(&format!("fingers kp {} kd {}\n", spec.finger_kp, spec.finger_kd));
    for (i, s) in spec.segments.iter().enumerate() {
        let q = s.mount.orientation;
        out.push_str(&format!(
            "segment {} parent {} pos {} {} {} quat {} {} {} {} mass {} length {} radius {} limits {} {} {} {} {} {}\n",
            i + 1,
            s.parent,
            s.mount.position.x,
            s.mount.position.y,
            s.mount.position.z,
            q.w,
            q.i,
            q.j,
            q.k,
            s.mass,
            s.length,
            s.radius,
            s.limits[0].0,
            s.limits[0].1,
            s.limits[1].0,
            s.limits[1].1,
            s.limits[2].0,
            s.limits[2].1,
        ));
    }
    out
}

/// Parse a hand description written by [`write_hand_spec`].
pub fn parse_hand_spec(text: &str) -> Result<HandSpec, ModelError> {
    let mut lines = super::content_lines(text);
    let header = lines.next().ok_or_else(|| ModelError::bad("empty hand file"))?;
    if header.trim() != HAND_MAGIC {
        return Err(ModelError::bad(format!("expected '{HAND_MAGIC}' header, got '{header}'")));
    }
    let mut side = None;
    let mut wrist = None;
    let mut fingers = None;
    let mut segments: Vec<(usize, SegmentSpec)> = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "side" => {
                side = Some(Handedness::from_tag(super::tok(&toks, 1)?)?);
            }
            "wrist" => {
                let f = |i| super::num(&toks, i);
                wrist = Some((
                    f(2)?,
                    Vector3::new(f(4)?, f(5)?, f(6)?),
                    f(8)?,
                    WristGains { kp_lin: f(10)?, kd_lin: f(11)?, kp_ang: f(12)?, kd_ang: f(13)? },
                ));
            }
            "fingers" => {
                fingers = Some((super::num(&toks, 2)?, super::num(&toks, 4)?));
            }
            "segment" => {
                let f = |i| super::num(&toks, i);
                let id: usize = super::tok(&toks, 1)?
                    .parse()
                    .map_err(|_| ModelError::bad("bad segment id"))?;
                let parent: usize = super::tok(&toks, 3)?
                    .parse()
                    .map_err(|_| ModelError::bad("bad segment parent"))?;
                segments.push((
                    id,
                    SegmentSpec {
                        parent,
                        mount: Pose::new(
                            Vector3::new(f(5)?, f(6)?, f(7)?),
                            super::quat(&toks, 9)?,
                        ),
                        mass: f(14)?,
                        length: f(16)?,
                        radius: f(18)?,
                        limits: [(f(20)?, f(21)?), (f(22)?, f(23)?), (f(24)?, f(25)?)],
                    },
                ));
            }
            other => return Err(ModelError::bad(format!("unknown hand record '{other}'"))),
        }
    }
    let side = side.ok_or_else(|| ModelError::bad("missing 'side' record"))?;
    let (wrist_mass, wrist_half, wrist_radius, wrist_gains) =
        wrist.ok_or_else(|| ModelError::bad("missing 'wrist' record"))?;
    let (finger_kp, finger_kd) = fingers.ok_or_else(|| ModelError::bad("missing 'fingers' record"))?;
    segments.sort_by_key(|(id, _)| *id);
    if segments.len() != FINGERS * SEGMENTS_PER_FINGER {
        return Err(ModelError::bad(format!(
            "expected {} segments, got {}",
            FINGERS * SEGMENTS_PER_FINGER,
            segments.len()
        )));
    }
    for (i, (id, s)) in segments.iter().enumerate() {
        if *id != i + 1 {
            return Err(ModelError::bad(format!("segment ids must be 1..=15, got {id}")));
        }
        if s.parent > FINGERS * SEGMENTS_PER_FINGER {
            return Err(ModelError::bad(format!("segment {id}: parent {} out of range", s.parent)));
        }
        if s.mass < 0.0 || s.length <= 0.0 || s.radius <= 0.0 {
            return Err(ModelError::bad(format!("segment {id}: non-physical size or mass")));
        }
        for (lo, hi) in s.limits {
            if lo >= hi {
                return Err(ModelError::bad(format!("segment {id}: limit lo >= hi")));
            }
        }
    }
    Ok(HandSpec {
        side,
        wrist_mass,
        wrist_half,
        wrist_radius,
        wrist_gains,
        finger_kp,
        finger_kd,
        segments: segments.into_iter().map(|(_, s)| s).collect(),
    })
}

pub fn save_hand(path: &std::path::Path, spec: &HandSpec) -> Result<(), ModelError> {
    std::fs::write(path, write_hand_spec(spec)).map_err(ModelError::from)
}

pub fn load_hand(path: &std::path::Path) -> Result<HandModel, ModelError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_hand_spec(&text)?.build())
}

// ---------------------------------------------------------------------------
