//! Hand and object models plus their text file formats.
//!
//! All model files are line-oriented text: a magic+version header, `#`
//! comments, and whitespace-separated records. Floats are written with
//! Rust's shortest-roundtrip formatting, so save/load/save is byte-stable.

pub mod hand;
pub mod object;

use thiserror::Error;

/// Which hand a model, reference, or policy belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Handedness {
    Left,
    Right,
}

impl Handedness {
    pub fn tag(&self) -> &'static str {
        match self {
            Handedness::Left => "l",
            Handedness::Right => "r",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self, ModelError> {
        match tag {
            "l" | "left" => Ok(Handedness::Left),
            "r" | "right" => Ok(Handedness::Right),
            other => Err(ModelError::bad(format!("unknown hand tag '{other}'"))),
        }
    }

    pub fn other(&self) -> Handedness {
        match self {
            Handedness::Left => Handedness::Right,
            Handedness::Right => Handedness::Left,
        }
    }
}

impl std::fmt::Display for Handedness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// The two rigid parts of an articulated object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    Base,
    Art,
}

impl Part {
    pub fn tag(&self) -> &'static str {
        match self {
            Part::Base => "base",
            Part::Art => "art",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self, ModelError> {
        match tag {
            "base" => Ok(Part::Base),
            "art" => Ok(Part::Art),
            other => Err(ModelError::bad(format!("unknown part tag '{other}'"))),
        }
    }

    /// Link index in the object tree.
    pub fn link(&self) -> usize {
        match self {
            Part::Base => 0,
            Part::Art => 1,
        }
    }
}

impl std::fmt::Display for Part {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Model file errors.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ModelError {
    pub fn bad(msg: impl Into<String>) -> Self {
        ModelError::Malformed(msg.into())
    }
}

/// Iterate non-empty, non-comment lines.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Fetch token `i` or fail with a uniform error.
pub(crate) fn tok<'a>(toks: &[&'a str], i: usize) -> Result<&'a str, ModelError> {
    toks.get(i).copied().ok_or_else(|| ModelError::bad(format!("missing field {i}")))
}

/// Parse token `i` as f64.
pub(crate) fn num(toks: &[&str], i: usize) -> Result<f64, ModelError> {
    tok(toks, i)?.parse::<f64>().map_err(|_| {
        ModelError::bad(format!("field {i} is not a number: '{}'", toks.get(i).unwrap_or(&"")))
    })
}

/// Parse tokens `i..i+4` as a unit quaternion (w x y z). Components are kept
/// verbatim — no renormalization — so save/load/save is byte-stable; inputs
/// further than 1e-9 from unit length are rejected as corrupt.
pub(crate) fn quat(
    toks: &[&str],
    i: usize,
) -> Result<nalgebra::UnitQuaternion<f64>, ModelError> {
    let q = nalgebra::Quaternion::new(
        num(toks, i)?,
        num(toks, i + 1)?,
        num(toks, i + 2)?,
        num(toks, i + 3)?,
    );
    if (q.norm() - 1.0).abs() > 1e-9 {
        return Err(ModelError::bad("quaternion is not unit length"));
    }
    Ok(nalgebra::UnitQuaternion::new_unchecked(q))
}

/// Parse tokens `i..i+3` as a unit vector, kept verbatim like [`quat`].
pub(crate) fn unit3(
    toks: &[&str],
    i: usize,
) -> Result<nalgebra::Unit<nalgebra::Vector3<f64>>, ModelError> {
    let v = nalgebra::Vector3::new(num(toks, i)?, num(toks, i + 1)?, num(toks, i + 2)?);
    if (v.norm() - 1.0).abs() > 1e-9 {
        return Err(ModelError::bad("direction is not unit length"));
    }
    Ok(nalgebra::Unit::new_unchecked(v))
}
