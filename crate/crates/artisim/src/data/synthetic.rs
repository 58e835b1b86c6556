//! Scripted recordings for the bundled toy dataset.
//!
//! Real captures are expensive, so the pipeline ships with generators that
//! script physically sensible interactions against the built-in objects:
//! a lift-and-lower grasp, a two-handed articulation (one hand steadies the
//! base while the other rides the moving part), a jittered re-grasp while
//! the object slides, and a one-handed close. Hand poses are authored in
//! part frames and composed through the hinge kinematics, so the frames are
//! kinematically consistent and the extraction stage recovers the authored
//! poses exactly on the unjittered segments.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math::Pose;
use crate::models::hand::{
    finger_q_index, mirror_pose_y, AXIS_FLEX, FINGERS, FINGER_DOFS, REAL_LINKS,
    SEGMENTS_PER_FINGER,
};
use crate::models::object::ObjectModel;
use crate::models::Part;

use super::sequence::{MocapFrame, MocapSequence};
use super::DataError;

/// A hand configuration authored against one object part.
#[derive(Clone, Debug)]
pub struct AuthoredPose {
    pub part: Part,
    /// Wrist pose in the part frame.
    pub t_bar: Pose,
    pub q_bar: [f64; FINGER_DOFS],
    pub c_bar: [bool; REAL_LINKS],
}

/// Mirror an authored right-hand pose into its left-hand counterpart.
///
/// Valid because every built-in part feature these poses attach to is
/// symmetric across the part's xz plane; joint angles carry over unchanged
/// since the left hand model is itself the mirrored right hand.
pub fn mirrored_left(pose: &AuthoredPose) -> AuthoredPose {
    AuthoredPose { t_bar: mirror_pose_y(&pose.t_bar), ..pose.clone() }
}

/// Flexion-only finger curl: `fingers` per segment for the four fingers,
/// `thumb` per segment for the thumb; abduction and twist stay zero.
fn curled(fingers: [f64; 3], thumb: [f64; 3]) -> [f64; FINGER_DOFS] {
    let mut q = [0.0; FINGER_DOFS];
    for f in 0..FINGERS {
        let flex = if f == 0 { thumb } else { fingers };
        for s in 0..SEGMENTS_PER_FINGER {
            q[finger_q_index(f, s, AXIS_FLEX)] = flex[s];
        }
    }
    q
}

fn flags(links: &[usize]) -> [bool; REAL_LINKS] {
    let mut c = [false; REAL_LINKS];
    for &l in links {
        c[l] = true;
    }
    c
}

/// Authored grasp for a built-in object: the hand hooks (or pinches) the
/// base part's handle bar with all four fingertips.
pub fn authored_grasp(object: &str) -> Result<AuthoredPose, DataError> {
    let curl = curled([0.5, 1.2, 0.9], [0.3, 0.3, 0.2]);
    let tips = flags(&[6, 9, 12, 15]);
    let pose = match object {
        // Hook over the top bar, palm down, fingers wrapping it.
        "hinged_box" => AuthoredPose {
            part: Part::Base,
            t_bar: Pose::from_position(Vector3::new(-0.055, 0.0, 0.105)),
            q_bar: curl,
            c_bar: tips,
        },
        // Same hook, bar sits higher on the jar.
        "lever_jar" => AuthoredPose {
            part: Part::Base,
            t_bar: Pose::from_position(Vector3::new(-0.055, 0.0, 0.12)),
            q_bar: curl,
            c_bar: tips,
        },
        // The lid slides under this bar, so no room to hook beneath it:
        // fingers point down in front and press back onto the bar's face.
        "clamshell" => AuthoredPose {
            part: Part::Base,
            t_bar: Pose::new(
                Vector3::new(0.122, 0.0, 0.082),
                UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_2),
            ),
            q_bar: curl,
            c_bar: tips,
        },
        other => return Err(DataError::bad(format!("no authored grasp for '{other}'"))),
    };
    Ok(pose)
}

/// Authored articulation pose: the hand engages the moving part so that
/// pressing (or lifting) drives the hinge open.
pub fn authored_articulation(object: &str) -> Result<AuthoredPose, DataError> {
    let pose = match object {
        // Fingertips press the flap's outer face; the push torques the
        // vertical hinge open. Fingers run along the flap toward its free
        // edge, palm toward the blade.
        "hinged_box" => AuthoredPose {
            part: Part::Art,
            t_bar: Pose::new(
                Vector3::new(-0.064, 0.076, 0.0),
                UnitQuaternion::from_axis_angle(&Vector3::y_axis(), -std::f64::consts::FRAC_PI_2)
                    * UnitQuaternion::from_axis_angle(
                        &Vector3::z_axis(),
                        -std::f64::consts::FRAC_PI_2,
                    ),
            ),
            q_bar: curled([0.3, 0.6, 0.3], [0.3, 0.3, 0.2]),
            c_bar: flags(&[6, 9, 12]),
        },
        // Fingertips hook over the lid's free edge; lifting swings it up.
        "clamshell" => AuthoredPose {
            part: Part::Art,
            t_bar: Pose::from_position(Vector3::new(0.066, 0.0, 0.059)),
            q_bar: curled([0.5, 1.2, 0.9], [0.3, 0.3, 0.2]),
            c_bar: flags(&[6, 9, 12, 15]),
        },
        // Fingers drape across the lever near its free end and curl under
        // it, so raising the wrist pumps the lever up. Shifted toward the
        // free end to stay clear of the jar body; the ring fingertip ends
        // up nearly equidistant to the body, so it is not flagged.
        "lever_jar" => AuthoredPose {
            part: Part::Art,
            t_bar: Pose::from_position(Vector3::new(-0.055, 0.055, 0.045)),
            q_bar: curled([0.5, 1.2, 0.9], [0.3, 0.3, 0.2]),
            c_bar: flags(&[5, 6, 8, 9, 11, 14]),
        },
        other => return Err(DataError::bad(format!("no authored articulation for '{other}'"))),
    };
    Ok(pose)
}

// --- the script ----------------------------------------------------------

const RATE: f64 = 30.0;
/// Base translation speed while held [m/s]; must read as deliberate motion.
const CARRY_SPEED: f64 = 0.05;
const ANGLE_OPEN: f64 = 0.8;
const ANGLE_START: f64 = 0.05;
/// Where the close stops. Kept clearly away from the handle bar: near fully
/// closed (and near fully open) the moving part of every built-in object
/// sweeps within millimeters of the bar, which would make the nearest-part
/// assignment of a subsequent grasp ambiguous.
const ANGLE_CLOSED: f64 = 0.3;

struct Script<'a> {
    object: &'a ObjectModel,
    frames: Vec<MocapFrame>,
    base: Pose,
    angle: f64,
}

impl Script<'_> {
    fn parked(&self) -> MocapFrame {
        MocapFrame {
            q_l: curled([0.2, 0.2, 0.2], [0.2, 0.2, 0.2]),
            t_l: Pose::from_position(Vector3::new(-0.3, 0.15, 0.25)),
            q_r: curled([0.2, 0.2, 0.2], [0.2, 0.2, 0.2]),
            t_r: Pose::from_position(Vector3::new(-0.3, -0.15, 0.25)),
            base: self.base,
            angle: self.angle,
            contact_l: [false; REAL_LINKS],
            contact_r: [false; REAL_LINKS],
        }
    }

    fn gap(&mut self, n: usize) {
        for _ in 0..n {
            let f = self.parked();
            self.frames.push(f);
        }
    }

    /// Attach the right hand (and optionally the left) to their parts for
    /// one frame at the script's current base pose and angle.
    fn engaged(&mut self, right: &AuthoredPose, left: Option<&AuthoredPose>) {
        let mut f = self.parked();
        let part_r = self.object.part_pose_at(&self.base, self.angle, right.part);
        f.t_r = part_r.compose(&right.t_bar);
        f.q_r = right.q_bar;
        f.contact_r = right.c_bar;
        if let Some(l) = left {
            let part_l = self.object.part_pose_at(&self.base, self.angle, l.part);
            f.t_l = part_l.compose(&l.t_bar);
            f.q_l = l.q_bar;
            f.contact_l = l.c_bar;
        }
        self.frames.push(f);
    }
}

/// Generate one scripted recording against a built-in object.
///
/// The script plays four interactions separated by contact-free gaps:
/// a right-hand lift-and-lower carry, a two-handed opening (left steadies
/// the bar, right rides the moving part as the hinge sweeps open), a
/// right-hand partial close, and a jittered right-hand re-grasp while the
/// object slides sideways. Pure in (object, seed); the jitter consumes
/// exactly two draws.
pub fn synthetic_sequence(object: &ObjectModel, seed: u64) -> Result<MocapSequence, DataError> {
    let grasp = authored_grasp(&object.name)?;
    let art = authored_articulation(&object.name)?;
    let left_hold = mirrored_left(&grasp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter_z: f64 = rng.gen_range(-0.002..=0.002);
    let flex_scale: f64 = 1.0 + 0.03 * rng.gen_range(-1.0..=1.0);

    let rest = object.rest_pose();
    let mut s = Script { object, frames: Vec::new(), base: rest, angle: ANGLE_START };

    // Lead-in.
    s.gap(4);

    // 1. Grasp: carry the object up and back down.
    let step = CARRY_SPEED / RATE;
    for k in 0..20 {
        let lift = step * k.min(19 - k) as f64;
        s.base = Pose::new(rest.position + Vector3::new(0.0, 0.0, lift), rest.orientation);
        s.engaged(&grasp, None);
    }
    s.base = rest;
    s.gap(4);

    // 2. Two-handed articulation: left steadies the bar, hinge sweeps open.
    for k in 0..24 {
        s.angle = ANGLE_START + (ANGLE_OPEN - ANGLE_START) * k as f64 / 23.0;
        s.engaged(&art, Some(&left_hold));
    }
    s.gap(4);

    // 3. Partial close, one-handed.
    for k in 0..20 {
        s.angle = ANGLE_OPEN - (ANGLE_OPEN - ANGLE_CLOSED) * k as f64 / 19.0;
        s.engaged(&art, None);
    }
    s.gap(4);

    // 4. Re-grasp with jitter while the object slides sideways.
    let mut jittered = grasp.clone();
    jittered.t_bar = Pose::new(
        grasp.t_bar.position + Vector3::new(0.0, 0.0, jitter_z),
        grasp.t_bar.orientation,
    );
    for q in jittered.q_bar.iter_mut() {
        *q *= flex_scale;
    }
    for k in 1..=16 {
        s.base = Pose::new(
            rest.position + Vector3::new(0.0, -step * k as f64, 0.0),
            rest.orientation,
        );
        s.engaged(&jittered, None);
    }
    s.gap(4);

    Ok(MocapSequence { object: object.name.clone(), rate: RATE, frames: s.frames })
}

// ---------------------------------------------------------------------------
