//! Per-hand observation vectors: proprioception, object state, and goal.
//!
//! Every frame-tagged entry is relative (wrist frame, part frame, or the
//! reference frame), and contact forces enter as magnitudes, so the whole
//! vector is invariant under a rigid transform applied jointly to the hand
//! and the object. The layout is fixed and versioned; checkpoints record
//! [`FEATURE_LAYOUT_VERSION`] and refuse to resume across a change.
//!
//! Index map with articulation features enabled (265 entries):
//!
//! | range      | block   | contents                                                        |
//! |------------|---------|-----------------------------------------------------------------|
//! | 0..45      | hand    | finger joint angles [rad]                                       |
//! | 45..90     | hand    | finger joint rates [rad/s]                                      |
//! | 90..106    | hand    | net contact-force magnitude per real link [N]                   |
//! | 106..112   | hand    | wrist velocity relative to the assigned part, part frame (v, ω) |
//! | 112..115   | object  | base position in the wrist frame                                |
//! | 115..119   | object  | base orientation in the wrist frame (quat w x y z)              |
//! | 119..120   | object  | articulation angle [rad]                                        |
//! | 120..126   | object  | base velocity relative to the wrist, wrist frame (v, ω)         |
//! | 126..127   | object  | articulation rate [rad/s]                                       |
//! | 127..130   | object  | hinge axis direction, wrist frame                               |
//! | 130..133   | object  | unit vector wrist → hinge axis, wrist frame (zero if on axis)   |
//! | 133..134   | object  | wrist-to-axis distance [m]                                      |
//! | 134..136   | object  | articulated-part mass, base-part mass [kg]                      |
//! | 136..184   | goal    | joint offsets: 45 wrapped finger diffs + wrist rotation vector  |
//! | 184..232   | goal    | link-point offsets in the reference frame (16 × 3)              |
//! | 232..264   | goal    | target contacts then contact deficits `[c̄ | c̄ − c]`            |
//! | 264..265   | goal    | articulation-angle offset ω̄ − ω                                 |
//!
//! With articulation features disabled the axis/distance/mass block
//! (127..136) is omitted and everything after shifts down by 9 (256 total).

use nalgebra::{DVector, Vector3};

use crate::math::{rotation_vector_between, wrap_angle, Pose};
use crate::models::hand::{HandModel, FINGER_DOFS, REAL_LINKS};
use crate::models::object::ObjectModel;
use crate::sim::tree::{BodyKinematics, BodyState};

use super::reference::HandPoseReference;

/// Bumped whenever the index map above changes meaning, order, or size.
pub const FEATURE_LAYOUT_VERSION: u32 = 1;

/// Observation width per hand.
pub fn feature_dim(use_art_features: bool) -> usize {
    if use_art_features {
        265
    } else {
        256
    }
}

/// One hand's instantaneous view: state, kinematics, and contact readings.
pub struct HandObservation<'a> {
    pub model: &'a HandModel,
    pub state: &'a BodyState,
    pub kin: &'a BodyKinematics,
    /// Net contact-force magnitude per real link, all sources [N].
    pub force_all: [f64; REAL_LINKS],
    /// Net contact-force magnitude per real link against the assigned part.
    pub force_part: [f64; REAL_LINKS],
    /// Whether each real link currently touches the assigned part.
    pub touching_part: [bool; REAL_LINKS],
}

/// The object's instantaneous view.
pub struct ObjectObservation<'a> {
    pub object: &'a ObjectModel,
    pub state: &'a BodyState,
    pub kin: &'a BodyKinematics,
}

impl ObjectObservation<'_> {
    /// Articulation angle [rad].
    pub fn angle(&self) -> f64 {
        self.state.q[0]
    }

    /// Articulation rate [rad/s].
    pub fn rate(&self) -> f64 {
        self.state.qd[0]
    }

    /// World pose of a part's body frame.
    pub fn part_pose(&self, part: crate::models::Part) -> &Pose {
        &self.kin.link_pose[part.link()]
    }
}

/// Rates of frame `b` relative to frame `a`, expressed in `a`: the time
/// derivative of b's origin in a's coordinates, and the angular-rate
/// difference rotated into `a`.
fn relative_rates(
    pose_a: &Pose,
    v_a: &Vector3<f64>,
    w_a: &Vector3<f64>,
    p_b: &Vector3<f64>,
    v_b: &Vector3<f64>,
    w_b: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let to_a = pose_a.orientation.inverse();
    let rel = p_b - pose_a.position;
    (to_a * (v_b - v_a - w_a.cross(&rel)), to_a * (w_b - w_a))
}

/// Goal-error terms shared by features and rewards: wrapped joint-angle
/// offsets (finger 45 + wrist rotation vector 3) and per-link point offsets
/// in the reference frame.
pub(crate) struct TargetErrors {
    pub gq: [f64; FINGER_DOFS + 3],
    pub gx: [Vector3<f64>; REAL_LINKS],
}

pub(crate) fn target_errors(
    hand: &HandObservation,
    obj: &ObjectObservation,
    d: &HandPoseReference,
) -> TargetErrors {
    let part = obj.part_pose(d.part);
    let mut gq = [0.0; FINGER_DOFS + 3];
    for i in 0..FINGER_DOFS {
        gq[i] = wrap_angle(d.q_bar[i] - hand.state.q[i]);
    }
    let wrist_target = part.orientation * d.t_bar.orientation;
    let rot_err = rotation_vector_between(&hand.state.base.orientation, &wrist_target);
    gq[FINGER_DOFS] = rot_err.x;
    gq[FINGER_DOFS + 1] = rot_err.y;
    gq[FINGER_DOFS + 2] = rot_err.z;

    let points = hand.model.real_link_points(hand.kin);
    let mut gx = [Vector3::zeros(); REAL_LINKS];
    for i in 0..REAL_LINKS {
        let in_frame = part.orientation.inverse() * (points[i] - part.position);
        gx[i] = d.x_bar[i] - in_frame;
    }
    TargetErrors { gq, gx }
}

/// Assemble one hand's observation vector.
pub fn extract_features(
    hand: &HandObservation,
    obj: &ObjectObservation,
    d: &HandPoseReference,
    omega_bar: f64,
    use_art_features: bool,
) -> DVector<f64> {
    let mut out = Vec::with_capacity(feature_dim(use_art_features));

    // Proprioception: joints, rates, touch, wrist rates relative to the part.
    out.extend_from_slice(&hand.state.q);
    out.extend_from_slice(&hand.state.qd);
    out.extend_from_slice(&hand.force_all);
    let part = d.part.link();
    let (lin, ang) = relative_rates(
        &obj.kin.link_pose[part],
        &obj.kin.link_origin_vel[part],
        &obj.kin.link_ang_vel[part],
        &hand.state.base.position,
        &hand.state.base_lin_vel,
        &hand.state.base_ang_vel,
    );
    out.extend_from_slice(lin.as_slice());
    out.extend_from_slice(ang.as_slice());

    // Object state, seen from the wrist.
    let wrist = &hand.state.base;
    let to_wrist = wrist.orientation.inverse();
    let base_pos = to_wrist * (obj.state.base.position - wrist.position);
    let mut base_rot = (to_wrist * obj.state.base.orientation).into_inner();
    if base_rot.w < 0.0 {
        base_rot = -base_rot; // canonical double-cover sign
    }
    out.extend_from_slice(base_pos.as_slice());
    out.extend_from_slice(&[base_rot.w, base_rot.i, base_rot.j, base_rot.k]);
    out.push(obj.angle());
    let (olin, oang) = relative_rates(
        wrist,
        &hand.state.base_lin_vel,
        &hand.state.base_ang_vel,
        &obj.state.base.position,
        &obj.state.base_lin_vel,
        &obj.state.base_ang_vel,
    );
    out.extend_from_slice(olin.as_slice());
    out.extend_from_slice(oang.as_slice());
    out.push(obj.rate());

    if use_art_features {
        let (axis_w, point_w) = obj.object.hinge_world(obj.state);
        let axis_w = axis_w.normalize();
        let to_axis = point_w - wrist.position;
        let perp = to_axis - to_axis.dot(&axis_w) * axis_w;
        let dist = perp.norm();
        let axis = to_wrist * axis_w;
        let dir = if dist > 1e-9 { to_wrist * (perp / dist) } else { Vector3::zeros() };
        out.extend_from_slice(axis.as_slice());
        out.extend_from_slice(dir.as_slice());
        out.push(dist);
        out.push(obj.object.art_mass());
        out.push(obj.object.base_mass());
    }

    // Goal errors.
    let err = target_errors(hand, obj, d);
    out.extend_from_slice(&err.gq);
    for gx in &err.gx {
        out.extend_from_slice(gx.as_slice());
    }
    for c in d.c_bar {
        out.push(if c { 1.0 } else { 0.0 });
    }
    for i in 0..REAL_LINKS {
        let cbar = if d.c_bar[i] { 1.0 } else { 0.0 };
        let c = if hand.touching_part[i] { 1.0 } else { 0.0 };
        out.push(cbar - c);
    }
    out.push(omega_bar - obj.angle());

    debug_assert_eq!(out.len(), feature_dim(use_art_features));
    DVector::from_vec(out)
}

// ---------------------------------------------------------------------------
