//! Recorded manipulation sequences and their `ARTISEQ 1` file format.
//!
//! A sequence holds both hands' configurations, the object pose and
//! articulation angle, and per-link boolean contact flags at a fixed frame
//! rate. Lines are long but the format stays in the workspace's usual
//! shape: magic+version header, `#` comments, whitespace-separated records,
//! shortest-roundtrip floats for byte-stable save/load/save.

use nalgebra::Vector3;

use crate::math::Pose;
use crate::models::hand::{FINGER_DOFS, REAL_LINKS};
use crate::models::{content_lines, num, quat, tok, Handedness};

use super::DataError;

const SEQUENCE_MAGIC: &str = "ARTISEQ";

/// One time sample of both hands and the object.
#[derive(Clone, Debug)]
pub struct MocapFrame {
    pub q_l: [f64; FINGER_DOFS],
    pub t_l: Pose,
    pub q_r: [f64; FINGER_DOFS],
    pub t_r: Pose,
    /// Object base pose in the world.
    pub base: Pose,
    /// Articulation angle [rad].
    pub angle: f64,
    pub contact_l: [bool; REAL_LINKS],
    pub contact_r: [bool; REAL_LINKS],
}

impl MocapFrame {
    pub fn finger_q(&self, side: Handedness) -> &[f64; FINGER_DOFS] {
        match side {
            Handedness::Left => &self.q_l,
            Handedness::Right => &self.q_r,
        }
    }

    pub fn wrist(&self, side: Handedness) -> &Pose {
        match side {
            Handedness::Left => &self.t_l,
            Handedness::Right => &self.t_r,
        }
    }

    pub fn contacts(&self, side: Handedness) -> &[bool; REAL_LINKS] {
        match side {
            Handedness::Left => &self.contact_l,
            Handedness::Right => &self.contact_r,
        }
    }

    /// Any link of either hand flagged as touching.
    pub fn any_contact(&self) -> bool {
        self.contact_l.iter().chain(&self.contact_r).any(|&c| c)
    }
}

/// A fixed-rate recording of one manipulation episode with one object.
#[derive(Clone, Debug)]
pub struct MocapSequence {
    pub object: String,
    /// Frame rate [Hz]; constant over the whole sequence.
    pub rate: f64,
    pub frames: Vec<MocapFrame>,
}

// --- file format -------------------------------------------------------------

fn push_pose(out: &mut String, p: &Pose) {
    let q = p.orientation;
    out.push_str(&format!(
        " {} {} {} {} {} {} {}",
        p.position.x, p.position.y, p.position.z, q.w, q.i, q.j, q.k
    ));
}

fn push_flags(out: &mut String, flags: &[bool; REAL_LINKS]) {
    out.push(' ');
    for &f in flags {
        out.push(if f { '1' } else { '0' });
    }
}

/// Serialize a sequence (byte-stable across save/load/save).
pub fn write_sequence(seq: &MocapSequence) -> String {
    let mut out = String::new();
    out.push_str(&format!("{SEQUENCE_MAGIC} 1\n"));
    out.push_str(&format!("object {}\n", seq.object));
    out.push_str(&format!("rate {}\n", seq.rate));
    for f in &seq.frames {
        out.push_str("frame");
        for v in f.q_l {
            out.push_str(&format!(" {v}"));
        }
        push_pose(&mut out, &f.t_l);
        for v in f.q_r {
            out.push_str(&format!(" {v}"));
        }
        push_pose(&mut out, &f.t_r);
        push_pose(&mut out, &f.base);
        out.push_str(&format!(" {}", f.angle));
        push_flags(&mut out, &f.contact_l);
        push_flags(&mut out, &f.contact_r);
        out.push('\n');
    }
    out
}

fn parse_q(toks: &[&str], at: usize) -> Result<[f64; FINGER_DOFS], DataError> {
    let mut q = [0.0; FINGER_DOFS];
    for (k, slot) in q.iter_mut().enumerate() {
        *slot = num(toks, at + k)?;
    }
    Ok(q)
}

fn parse_pose(toks: &[&str], at: usize) -> Result<Pose, DataError> {
    Ok(Pose::new(
        Vector3::new(num(toks, at)?, num(toks, at + 1)?, num(toks, at + 2)?),
        quat(toks, at + 3)?,
    ))
}

fn parse_flags(toks: &[&str], at: usize) -> Result<[bool; REAL_LINKS], DataError> {
    let field = tok(toks, at)?;
    if field.len() != REAL_LINKS {
        return Err(DataError::bad(format!("contact flags need {REAL_LINKS} digits")));
    }
    let mut flags = [false; REAL_LINKS];
    for (slot, ch) in flags.iter_mut().zip(field.chars()) {
        *slot = match ch {
            '0' => false,
            '1' => true,
            other => return Err(DataError::bad(format!("contact flag '{other}'"))),
        };
    }
    Ok(flags)
}

/// Parse a sequence written by [`write_sequence`].
pub fn parse_sequence(text: &str) -> Result<MocapSequence, DataError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some(l) if l == format!("{SEQUENCE_MAGIC} 1") => {}
        _ => return Err(DataError::bad(format!("expected '{SEQUENCE_MAGIC} 1' header"))),
    }
    let mut object = None;
    let mut rate = None;
    let mut frames = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match tok(&toks, 0)? {
            "object" => object = Some(tok(&toks, 1)?.to_string()),
            "rate" => rate = Some(num(&toks, 1)?),
            "frame" => {
                // 45 + 7 + 45 + 7 + 7 + 1 numbers, then two flag strings.
                let want = 1 + FINGER_DOFS + 7 + FINGER_DOFS + 7 + 7 + 1 + 2;
                if toks.len() != want {
                    return Err(DataError::bad(format!(
                        "frame has {} fields, want {want}",
                        toks.len()
                    )));
                }
                let mut at = 1;
                let q_l = parse_q(&toks, at)?;
                at += FINGER_DOFS;
                let t_l = parse_pose(&toks, at)?;
                at += 7;
                let q_r = parse_q(&toks, at)?;
                at += FINGER_DOFS;
                let t_r = parse_pose(&toks, at)?;
                at += 7;
                let base = parse_pose(&toks, at)?;
                at += 7;
                let angle = num(&toks, at)?;
                at += 1;
                let contact_l = parse_flags(&toks, at)?;
                let contact_r = parse_flags(&toks, at + 1)?;
                frames.push(MocapFrame { q_l, t_l, q_r, t_r, base, angle, contact_l, contact_r });
            }
            other => return Err(DataError::bad(format!("unknown record '{other}'"))),
        }
    }
    let object = object.ok_or_else(|| DataError::bad("missing object"))?;
    let rate = rate.ok_or_else(|| DataError::bad("missing rate"))?;
    if !(rate > 0.0) {
        return Err(DataError::bad("rate must be positive"));
    }
    Ok(MocapSequence { object, rate, frames })
}

pub fn save_sequence(path: &std::path::Path, seq: &MocapSequence) -> Result<(), DataError> {
    std::fs::write(path, write_sequence(seq))?;
    Ok(())
}

pub fn load_sequence(path: &std::path::Path) -> Result<MocapSequence, DataError> {
    parse_sequence(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn sample_sequence() -> MocapSequence {
        let mut frames = Vec::new();
        for k in 0..3 {
            let mut q_r = [0.0; FINGER_DOFS];
            q_r[4] = 0.1 * k as f64;
            let mut contact_r = [false; REAL_LINKS];
            contact_r[6] = k > 0;
            frames.push(MocapFrame {
                q_l: [0.05; FINGER_DOFS],
                t_l: Pose::from_position(Vector3::new(-0.2, 0.1, 0.2)),
                q_r,
                t_r: Pose::new(
                    Vector3::new(0.1, 0.0, 0.15 + 0.01 * k as f64),
                    UnitQuaternion::from_euler_angles(0.0, 0.1, 0.2),
                ),
                base: Pose::from_position(Vector3::new(0.0, 0.0, 0.03)),
                angle: 0.2 * k as f64,
                contact_l: [false; REAL_LINKS],
                contact_r,
            });
        }
        MocapSequence { object: "hinged_box".into(), rate: 30.0, frames }
    }

    #[test]
    fn roundtrip_is_byte_stable() {
        let seq = sample_sequence();
        let text = write_sequence(&seq);
        let back = parse_sequence(&text).unwrap();
        assert_eq!(write_sequence(&back), text);
        assert_eq!(back.frames.len(), 3);
        assert_eq!(back.rate, 30.0);
        assert!(back.frames[1].contact_r[6]);
        assert!(!back.frames[0].any_contact());
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(parse_sequence("WRONG 1\n").is_err());
        let seq = sample_sequence();
        let text = write_sequence(&seq);
        // Chop one field off a frame line.
        let short: String = text
            .lines()
            .map(|l| {
                if l.starts_with("frame") {
                    l.rsplit_once(' ').unwrap().0.to_string()
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        assert!(parse_sequence(&short).is_err());
        // Zero rate.
        assert!(parse_sequence(&text.replace("rate 30", "rate 0")).is_err());
        // Bad contact digit.
        assert!(parse_sequence(&text.replace(" 0000001000000000", " 000000200000000x")).is_err());
    }

    #[test]
    fn side_accessors_pick_the_right_hand() {
        let seq = sample_sequence();
        let f = &seq.frames[2];
        assert_eq!(f.finger_q(Handedness::Left)[0], 0.05);
        assert_eq!(f.finger_q(Handedness::Right)[4], 0.2);
        assert_eq!(f.wrist(Handedness::Left).position.x, -0.2);
        assert!(f.contacts(Handedness::Right)[6]);
        assert!(!f.contacts(Handedness::Left).iter().any(|&c| c));
    }
}
