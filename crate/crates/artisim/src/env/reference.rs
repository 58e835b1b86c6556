//! Static hand pose references: the only supervision the policies see.
//!
//! A reference captures one hand configuration relative to one object part —
//! wrist pose, finger angles, the link points they imply, and which links
//! should be in contact. Everything is expressed in the part's body frame,
//! so at runtime the targets ride along with the part as it moves.

use nalgebra::Vector3;

use crate::math::Pose;
use crate::models::hand::{HandModel, FINGER_DOFS, REAL_LINKS};
use crate::models::{content_lines, num, tok, Handedness, ModelError, Part};
use crate::sim::tree::{kinematics, BodyState};

/// One hand's target configuration, anchored to an object part frame.
#[derive(Clone, Debug)]
pub struct HandPoseReference {
    pub side: Handedness,
    /// Part this hand manipulates; also the frame of every stored quantity.
    pub part: Part,
    /// World pose of the part frame when the reference was captured
    /// (provenance only; targets re-anchor to the current part pose).
    pub frame: Pose,
    /// Wrist pose in the part frame.
    pub t_bar: Pose,
    /// Finger joint targets [rad].
    pub q_bar: [f64; FINGER_DOFS],
    /// Link reference points in the part frame (forward kinematics of
    /// `t_bar`/`q_bar`; wrist origin first, then segment distal ends).
    pub x_bar: [Vector3<f64>; REAL_LINKS],
    /// Which links should touch the part.
    pub c_bar: [bool; REAL_LINKS],
}

/// Link points implied by a wrist pose and finger angles.
pub fn fk_link_points(
    side: Handedness,
    wrist: &Pose,
    q: &[f64; FINGER_DOFS],
) -> [Vector3<f64>; REAL_LINKS] {
    let model = HandModel::for_side(side);
    let mut state = BodyState::at_rest(&model.body, *wrist);
    state.q.copy_from_slice(q);
    let kin = kinematics(&model.body, &state);
    model.real_link_points(&kin)
}

impl HandPoseReference {
    /// Build a reference, deriving `x_bar` by forward kinematics.
    pub fn new(
        side: Handedness,
        part: Part,
        frame: Pose,
        t_bar: Pose,
        q_bar: [f64; FINGER_DOFS],
        c_bar: [bool; REAL_LINKS],
    ) -> Result<Self, ModelError> {
        if !c_bar.iter().any(|&c| c) {
            return Err(ModelError::bad("reference has no target contacts"));
        }
        let x_bar = fk_link_points(side, &t_bar, &q_bar);
        Ok(HandPoseReference { side, part, frame, t_bar, q_bar, x_bar, c_bar })
    }

    /// Number of target contacts (always ≥ 1).
    pub fn target_contact_count(&self) -> usize {
        self.c_bar.iter().filter(|&&c| c).count()
    }
}

// --- file format -------------------------------------------------------------

const REFERENCE_MAGIC: &str = "ARTIREF 1";

fn push_pose(out: &mut String, key: &str, p: &Pose) {
    let q = p.orientation;
    out.push_str(&format!(
        "{key} {} {} {} {} {} {} {}\n",
        p.position.x, p.position.y, p.position.z, q.w, q.i, q.j, q.k
    ));
}

/// Serialize a reference (byte-stable across save/load/save).
pub fn write_reference(r: &HandPoseReference) -> String {
    let mut out = String::new();
    out.push_str(REFERENCE_MAGIC);
    out.push('\n');
    out.push_str(&format!("hand {}\n", r.side));
    out.push_str(&format!("part {}\n", r.part));
    push_pose(&mut out, "frame", &r.frame);
    push_pose(&mut out, "t_bar", &r.t_bar);
    // 45 finger angles plus the wrist rotation vector of t_bar.
    out.push_str("q_bar");
    for v in r.q_bar {
        out.push_str(&format!(" {v}"));
    }
    let w = r.t_bar.orientation.scaled_axis();
    out.push_str(&format!(" {} {} {}\n", w.x, w.y, w.z));
    out.push_str("c_bar");
    for c in r.c_bar {
        out.push_str(if c { " 1" } else { " 0" });
    }
    out.push('\n');
    out.push_str("x_bar");
    for x in r.x_bar {
        out.push_str(&format!(" {} {} {}", x.x, x.y, x.z));
    }
    out.push('\n');
    out
}

fn parse_pose(toks: &[&str]) -> Result<Pose, ModelError> {
    Ok(Pose::new(
        Vector3::new(num(toks, 1)?, num(toks, 2)?, num(toks, 3)?),
        crate::models::quat(toks, 4)?,
    ))
}

/// Parse a reference written by [`write_reference`], revalidating the
/// derived quantities: `x_bar` must match forward kinematics to 1e-9, the
/// trailing wrist-rotation entries of `q_bar` must match `t_bar`, and at
/// least one target contact must be set.
pub fn parse_reference(text: &str) -> Result<HandPoseReference, ModelError> {
    let mut lines = content_lines(text);
    if lines.next() != Some(REFERENCE_MAGIC) {
        return Err(ModelError::bad(format!("expected '{REFERENCE_MAGIC}' header")));
    }
    let mut side = None;
    let mut part = None;
    let mut frame = None;
    let mut t_bar: Option<Pose> = None;
    let mut q_full: Option<Vec<f64>> = None;
    let mut c_bar = None;
    let mut x_bar: Option<Vec<f64>> = None;
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match tok(&toks, 0)? {
            "hand" => side = Some(Handedness::from_tag(tok(&toks, 1)?)?),
            "part" => part = Some(Part::from_tag(tok(&toks, 1)?)?),
            "frame" => frame = Some(parse_pose(&toks)?),
            "t_bar" => t_bar = Some(parse_pose(&toks)?),
            "q_bar" => {
                if toks.len() != 1 + FINGER_DOFS + 3 {
                    return Err(ModelError::bad(format!(
                        "q_bar needs {} entries, got {}",
                        FINGER_DOFS + 3,
                        toks.len() - 1
                    )));
                }
                q_full =
                    Some((1..toks.len()).map(|i| num(&toks, i)).collect::<Result<_, _>>()?);
            }
            "c_bar" => {
                if toks.len() != 1 + REAL_LINKS {
                    return Err(ModelError::bad("c_bar needs 16 entries"));
                }
                let mut c = [false; REAL_LINKS];
                for (i, slot) in c.iter_mut().enumerate() {
                    *slot = match tok(&toks, 1 + i)? {
                        "0" => false,
                        "1" => true,
                        other => {
                            return Err(ModelError::bad(format!("c_bar entry '{other}'")))
                        }
                    };
                }
                c_bar = Some(c);
            }
            "x_bar" => {
                if toks.len() != 1 + REAL_LINKS * 3 {
                    return Err(ModelError::bad("x_bar needs 48 entries"));
                }
                x_bar =
                    Some((1..toks.len()).map(|i| num(&toks, i)).collect::<Result<_, _>>()?);
            }
            other => return Err(ModelError::bad(format!("unknown record '{other}'"))),
        }
    }
    let side = side.ok_or_else(|| ModelError::bad("missing hand"))?;
    let part = part.ok_or_else(|| ModelError::bad("missing part"))?;
    let frame = frame.ok_or_else(|| ModelError::bad("missing frame"))?;
    let t_bar = t_bar.ok_or_else(|| ModelError::bad("missing t_bar"))?;
    let q_full = q_full.ok_or_else(|| ModelError::bad("missing q_bar"))?;
    let c_bar = c_bar.ok_or_else(|| ModelError::bad("missing c_bar"))?;
    let x_stored = x_bar.ok_or_else(|| ModelError::bad("missing x_bar"))?;

    let mut q_bar = [0.0; FINGER_DOFS];
    q_bar.copy_from_slice(&q_full[..FINGER_DOFS]);
    let wrist_rot = t_bar.orientation.scaled_axis();
    for k in 0..3 {
        if (q_full[FINGER_DOFS + k] - wrist_rot[k]).abs() > 1e-9 {
            return Err(ModelError::bad("q_bar wrist rotation disagrees with t_bar"));
        }
    }
    let r = HandPoseReference::new(side, part, frame, t_bar, q_bar, c_bar)?;
    for i in 0..REAL_LINKS {
        for k in 0..3 {
            if (x_stored[3 * i + k] - r.x_bar[i][k]).abs() > 1e-9 {
                return Err(ModelError::bad(format!(
                    "x_bar link {i} disagrees with forward kinematics"
                )));
            }
        }
    }
    Ok(r)
}

/// Write a reference file.
pub fn save_reference(path: &std::path::Path, r: &HandPoseReference) -> Result<(), ModelError> {
    std::fs::write(path, write_reference(r))?;
    Ok(())
}

/// Load and revalidate a reference file.
pub fn load_reference(path: &std::path::Path) -> Result<HandPoseReference, ModelError> {
    parse_reference(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::hand::finger_q_index;

    fn sample_reference() -> HandPoseReference {
        let mut q = [0.0; FINGER_DOFS];
        for f in 0..5 {
            for s in 0..3 {
                q[finger_q_index(f, s, crate::models::hand::AXIS_FLEX)] = 0.4 + 0.05 * f as f64;
            }
        }
        let mut c = [false; REAL_LINKS];
        c[3] = true;
        c[6] = true;
        c[9] = true;
        let t_bar = Pose::new(
            Vector3::new(0.1, -0.02, 0.05),
            nalgebra::UnitQuaternion::from_euler_angles(0.1, -0.2, 0.3),
        );
        HandPoseReference::new(
            Handedness::Right,
            Part::Art,
            Pose::from_position(Vector3::new(0.0, 0.0, 0.03)),
            t_bar,
            q,
            c,
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_is_byte_stable() {
        let r = sample_reference();
        let text = write_reference(&r);
        let loaded = parse_reference(&text).unwrap();
        assert_eq!(write_reference(&loaded), text);
        assert_eq!(loaded.target_contact_count(), 3);
    }

    #[test]
    fn corrupted_link_points_are_rejected() {
        let r = sample_reference();
        let text = write_reference(&r);
        // Nudge the first x_bar number by 1e-6.
        let lines: Vec<&str> = text.lines().collect();
        let mangled: Vec<String> = lines
            .iter()
            .map(|l| {
                if let Some(rest) = l.strip_prefix("x_bar ") {
                    let mut toks: Vec<String> =
                        rest.split_whitespace().map(String::from).collect();
                    let v: f64 = toks[0].parse().unwrap();
                    toks[0] = format!("{}", v + 1e-6);
                    format!("x_bar {}", toks.join(" "))
                } else {
                    l.to_string()
                }
            })
            .collect();
        assert!(parse_reference(&mangled.join("\n")).is_err());
    }

    #[test]
    fn references_need_at_least_one_contact() {
        let err = HandPoseReference::new(
            Handedness::Left,
            Part::Base,
            Pose::IDENTITY,
            Pose::IDENTITY,
            [0.0; FINGER_DOFS],
            [false; REAL_LINKS],
        );
        assert!(err.is_err());
    }

    #[test]
    fn stored_points_match_fk_for_both_sides() {
        for side in [Handedness::Left, Handedness::Right] {
            let mut q = [0.0; FINGER_DOFS];
            q[finger_q_index(2, 1, crate::models::hand::AXIS_FLEX)] = 0.7;
            let t = Pose::from_position(Vector3::new(0.02, 0.03, 0.08));
            let mut c = [false; REAL_LINKS];
            c[0] = true;
            let r =
                HandPoseReference::new(side, Part::Base, Pose::IDENTITY, t, q, c).unwrap();
            let again = fk_link_points(side, &r.t_bar, &r.q_bar);
            for i in 0..REAL_LINKS {
                assert!((r.x_bar[i] - again[i]).norm() < 1e-12);
            }
        }
    }
}
