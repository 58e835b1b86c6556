//! Turning recorded sequences into static hand pose references.
//!
//! The recording is scanned for maximal runs of frames where any hand link
//! touches the object. Each run is classified by what the object did while
//! held — its hinge angle sweeping classifies as articulation, its base
//! translating classifies as a grasp, neither discards the run — and the
//! run's middle frame becomes the reference: finger angles and contact
//! flags are copied, the wrist pose is re-expressed in the frame of the
//! part the flagged links sit closest to, so the target rides that part.

use crate::env::reference::{fk_link_points, HandPoseReference};
use crate::models::object::ObjectModel;
use crate::models::{Handedness, Part};

use super::sequence::{MocapFrame, MocapSequence};
use super::DataError;

/// Classification thresholds for contact runs.
#[derive(Clone, Copy, Debug)]
pub struct ExtractionThresholds {
    /// Base speed above which a run counts as moving the object [m/s].
    pub min_base_speed: f64,
    /// Hinge angle sweep above which a run counts as articulation [rad].
    pub min_angle_change: f64,
}

impl Default for ExtractionThresholds {
    fn default() -> Self {
        ExtractionThresholds { min_base_speed: 0.02, min_angle_change: 0.1 }
    }
}

/// What a contact run did to the object.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InteractionKind {
    Grasp,
    Articulation,
}

impl InteractionKind {
    pub fn tag(&self) -> &'static str {
        match self {
            InteractionKind::Grasp => "grasp",
            InteractionKind::Articulation => "art",
        }
    }
}

/// One classified contact run.
#[derive(Clone, Debug)]
pub struct InteractionSegment {
    pub kind: InteractionKind,
    /// First and last frame index of the run (inclusive).
    pub frame_range: (usize, usize),
    /// Frame the reference was taken from (middle of the run).
    pub chosen_frame: usize,
    /// Which hands touch at the chosen frame (left, right).
    pub hands: (bool, bool),
}

impl InteractionSegment {
    /// "l", "r", or "both".
    pub fn label(&self) -> &'static str {
        match self.hands {
            (true, true) => "both",
            (true, false) => "l",
            (false, true) => "r",
            (false, false) => "none",
        }
    }
}

/// A segment together with the per-hand references taken at its middle.
#[derive(Clone, Debug)]
pub struct ExtractedReference {
    pub segment: InteractionSegment,
    pub left: Option<HandPoseReference>,
    pub right: Option<HandPoseReference>,
}

impl ExtractedReference {
    pub fn hand(&self, side: Handedness) -> Option<&HandPoseReference> {
        match side {
            Handedness::Left => self.left.as_ref(),
            Handedness::Right => self.right.as_ref(),
        }
    }
}

// --- run classification ------------------------------------------------------

/// Maximal runs of consecutive frames with any contact, as inclusive ranges.
fn contact_runs(frames: &[MocapFrame]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (k, f) in frames.iter().enumerate() {
        match (f.any_contact(), start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                runs.push((s, k - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, frames.len() - 1));
    }
    runs
}

fn classify(
    frames: &[MocapFrame],
    rate: f64,
    run: (usize, usize),
    thresholds: &ExtractionThresholds,
) -> Option<InteractionKind> {
    let window = &frames[run.0..=run.1];
    let mut top_speed = 0.0f64;
    for pair in window.windows(2) {
        let step = (pair[1].base.position - pair[0].base.position).norm() * rate;
        top_speed = top_speed.max(step);
    }
    let angles = window.iter().map(|f| f.angle);
    let sweep = angles.clone().fold(f64::NEG_INFINITY, f64::max)
        - angles.fold(f64::INFINITY, f64::min);
    if sweep > thresholds.min_angle_change {
        Some(InteractionKind::Articulation)
    } else if top_speed > thresholds.min_base_speed {
        Some(InteractionKind::Grasp)
    } else {
        None
    }
}

/// Pick the part a hand is holding: each flagged link votes for the part
/// whose surface is nearest to it; ties go to the base.
fn assign_part(object: &ObjectModel, frame: &MocapFrame, side: Handedness) -> Part {
    let points = fk_link_points(side, frame.wrist(side), frame.finger_q(side));
    let mut art_votes = 0i32;
    for (link, &touching) in frame.contacts(side).iter().enumerate() {
        if !touching {
            continue;
        }
        let p = &points[link];
        let d_base = object.part_distance_at(&frame.base, frame.angle, Part::Base, p);
        let d_art = object.part_distance_at(&frame.base, frame.angle, Part::Art, p);
        art_votes += if d_art < d_base { 1 } else { -1 };
    }
    if art_votes > 0 {
        Part::Art
    } else {
        Part::Base
    }
}

fn hand_reference(
    object: &ObjectModel,
    frame: &MocapFrame,
    side: Handedness,
) -> Result<Option<HandPoseReference>, DataError> {
    if !frame.contacts(side).iter().any(|&c| c) {
        return Ok(None);
    }
    let part = assign_part(object, frame, side);
    let part_frame = object.part_pose_at(&frame.base, frame.angle, part);
    let t_bar = part_frame.inverse().compose(frame.wrist(side));
    let r = HandPoseReference::new(
        side,
        part,
        part_frame,
        t_bar,
        *frame.finger_q(side),
        *frame.contacts(side),
    )?;
    Ok(Some(r))
}

/// Extract one reference per qualifying contact run.
///
/// The object model must match the sequence's recorded object name; the
/// result is a pure function of the inputs.
pub fn extract_references(
    seq: &MocapSequence,
    object: &ObjectModel,
    thresholds: &ExtractionThresholds,
) -> Result<Vec<ExtractedReference>, DataError> {
    if seq.frames.is_empty() {
        return Err(DataError::bad("sequence has no frames"));
    }
    if object.name != seq.object {
        return Err(DataError::bad(format!(
            "sequence records object '{}' but model is '{}'",
            seq.object, object.name
        )));
    }
    let mut out = Vec::new();
    for run in contact_runs(&seq.frames) {
        let Some(kind) = classify(&seq.frames, seq.rate, run, thresholds) else {
            continue;
        };
        let chosen = (run.0 + run.1) / 2;
        let frame = &seq.frames[chosen];
        let left = hand_reference(object, frame, Handedness::Left)?;
        let right = hand_reference(object, frame, Handedness::Right)?;
        let segment = InteractionSegment {
            kind,
            frame_range: run,
            chosen_frame: chosen,
            hands: (left.is_some(), right.is_some()),
        };
        out.push(ExtractedReference { segment, left, right });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Pose;
    use crate::models::hand::{FINGER_DOFS, REAL_LINKS};
    use nalgebra::Vector3;

    fn still_frame(z: f64, angle: f64, right_contact: bool) -> MocapFrame {
        let mut contact_r = [false; REAL_LINKS];
        if right_contact {
            contact_r[6] = true;
            contact_r[9] = true;
        }
        MocapFrame {
            q_l: [0.0; FINGER_DOFS],
            t_l: Pose::from_position(Vector3::new(-0.3, 0.0, 0.2)),
            q_r: [0.1; FINGER_DOFS],
            t_r: Pose::from_position(Vector3::new(-0.055, 0.0, z + 0.075)),
            base: Pose::from_position(Vector3::new(0.0, 0.0, z)),
            angle,
            contact_l: [false; REAL_LINKS],
            contact_r,
        }
    }

    fn object() -> ObjectModel {
        ObjectModel::by_name("hinged_box").unwrap()
    }

    #[test]
    fn moving_base_classifies_as_grasp() {
        // 30 Hz: 2 mm per frame = 0.06 m/s, well above the 0.02 threshold.
        let mut frames = vec![still_frame(0.03, 0.0, false)];
        for k in 0..10 {
            frames.push(still_frame(0.03 + 0.002 * k as f64, 0.0, true));
        }
        frames.push(still_frame(0.05, 0.0, false));
        let seq = MocapSequence { object: "hinged_box".into(), rate: 30.0, frames };
        let refs =
            extract_references(&seq, &object(), &ExtractionThresholds::default()).unwrap();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].segment.kind, InteractionKind::Grasp);
        assert_eq!(refs[0].segment.frame_range, (1, 10));
        assert_eq!(refs[0].segment.chosen_frame, 5);
        assert_eq!(refs[0].segment.label(), "r");
        assert!(refs[0].left.is_none());
        let r = refs[0].right.as_ref().unwrap();
        assert_eq!(r.side, Handedness::Right);
        assert_eq!(r.q_bar[0], 0.1);
    }

    #[test]
    fn sweeping_angle_wins_over_base_motion() {
        // Base also moves, but any angle sweep above threshold takes priority.
        let mut frames = Vec::new();
        for k in 0..10 {
            frames.push(still_frame(0.03 + 0.002 * k as f64, 0.05 * k as f64, true));
        }
        let seq = MocapSequence { object: "hinged_box".into(), rate: 30.0, frames };
        let refs =
            extract_references(&seq, &object(), &ExtractionThresholds::default()).unwrap();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].segment.kind, InteractionKind::Articulation);
    }

    #[test]
    fn idle_contact_is_discarded_and_runs_split_on_gaps() {
        let mut frames = Vec::new();
        // Run 1: contact but nothing moves -> discarded.
        for _ in 0..8 {
            frames.push(still_frame(0.03, 0.0, true));
        }
        frames.push(still_frame(0.03, 0.0, false));
        // Run 2: object lifts -> grasp.
        for k in 0..8 {
            frames.push(still_frame(0.03 + 0.003 * k as f64, 0.0, true));
        }
        let seq = MocapSequence { object: "hinged_box".into(), rate: 30.0, frames };
        let refs =
            extract_references(&seq, &object(), &ExtractionThresholds::default()).unwrap();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].segment.frame_range, (9, 16));
    }

    #[test]
    fn wrist_is_reexpressed_in_the_part_frame() {
        let mut frames = Vec::new();
        for k in 0..6 {
            frames.push(still_frame(0.03 + 0.005 * k as f64, 0.0, true));
        }
        let seq = MocapSequence { object: "hinged_box".into(), rate: 30.0, frames };
        let refs =
            extract_references(&seq, &object(), &ExtractionThresholds::default()).unwrap();
        let r = refs[0].right.as_ref().unwrap();
        // Fingertips wrap the handle bar on the base part.
        assert_eq!(r.part, Part::Base);
        // t_bar is relative: base sits at the chosen frame's height, wrist
        // hovered 0.075 above it, so the part-frame offset is constant.
        assert!((r.t_bar.position - Vector3::new(-0.055, 0.0, 0.075)).norm() < 1e-12);
        // frame records the world part pose at capture.
        let chosen = &seq.frames[refs[0].segment.chosen_frame];
        assert!((r.frame.position - chosen.base.position).norm() < 1e-12);
    }

    #[test]
    fn empty_and_mismatched_inputs_error() {
        let seq = MocapSequence { object: "hinged_box".into(), rate: 30.0, frames: vec![] };
        assert!(extract_references(&seq, &object(), &ExtractionThresholds::default()).is_err());
        let seq = MocapSequence {
            object: "clamshell".into(),
            rate: 30.0,
            frames: vec![still_frame(0.03, 0.0, true)],
        };
        assert!(extract_references(&seq, &object(), &ExtractionThresholds::default()).is_err());
    }

    #[test]
    fn extraction_is_deterministic() {
        let mut frames = Vec::new();
        for k in 0..12 {
            frames.push(still_frame(0.03 + 0.002 * k as f64, 0.04 * k as f64, k % 11 != 10));
        }
        let seq = MocapSequence { object: "hinged_box".into(), rate: 30.0, frames };
        let a = extract_references(&seq, &object(), &ExtractionThresholds::default()).unwrap();
        let b = extract_references(&seq, &object(), &ExtractionThresholds::default()).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.segment.frame_range, y.segment.frame_range);
            let (rx, ry) = (x.right.as_ref().unwrap(), y.right.as_ref().unwrap());
            assert_eq!(rx.t_bar.position, ry.t_bar.position);
            assert_eq!(rx.x_bar, ry.x_bar);
        }
    }
}
