//! Versioned policy checkpoints.
//!
//! `ARTICKPT 1` is a line-oriented text format in the same family as the
//! model files: `#` comments allowed, whitespace-separated records, floats
//! in shortest-roundtrip form so save → load → save reproduces the file
//! byte for byte. A checkpoint carries everything needed to *act*: network
//! weights, per-dimension log stds, the observation-whitening statistics,
//! the feature-layout version the policy was trained against, and the
//! lineage of checkpoints it was fine-tuned from. Optimizer state is
//! deliberately not stored — resuming starts a fresh optimizer.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::policy::{ObsNormalizer, Policy};
use super::LearnError;
use crate::models::{content_lines, num, tok, ModelError};

const MAGIC: &str = "ARTICKPT";
const VERSION: u32 = 1;

/// A trained policy plus the metadata needed to trust it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    /// Observation-layout version the weights were trained against.
    pub feature_layout: u32,
    /// Training epochs completed when this snapshot was taken.
    pub epoch: usize,
    /// Paths of the checkpoints this one was initialized from, oldest
    /// first; empty for a from-scratch run.
    pub parents: Vec<String>,
    pub policy: Policy,
}

/// FNV-1a digest of arbitrary bytes; stable across platforms, used to
/// fingerprint checkpoints and data splits in run manifests.
pub fn checksum64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn push_floats(out: &mut String, label: &str, values: impl IntoIterator<Item = f64>) {
    out.push_str(label);
    for v in values {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
}

impl Checkpoint {
    pub fn new(feature_layout: u32, policy: Policy) -> Self {
        Checkpoint { feature_layout, epoch: 0, parents: Vec::new(), policy }
    }

    /// Fail unless the checkpoint was trained against the expected
    /// observation layout. Callers check this before wiring a policy to an
    /// environment — silently mismatched features would read garbage.
    pub fn ensure_layout(&self, expected: u32) -> Result<(), LearnError> {
        if self.feature_layout != expected {
            return Err(LearnError::Model(ModelError::bad(format!(
                "checkpoint uses feature layout {} but this run needs {expected}",
                self.feature_layout
            ))));
        }
        Ok(())
    }

    // --- serialization ----------------------------------------------------

    pub fn write_string(&self) -> String {
        let p = &self.policy;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        let _ = writeln!(s, "feature_layout {}", self.feature_layout);
        let _ = writeln!(s, "epoch {}", self.epoch);
        let _ = writeln!(s, "obs_dim {}", p.obs_dim());
        let _ = writeln!(s, "act_dim {}", p.act_dim());
        s.push_str("hidden");
        for h in p.hidden_sizes() {
            let _ = write!(s, " {h}");
        }
        s.push('\n');
        for parent in &self.parents {
            let _ = writeln!(s, "parent {parent}");
        }
        let _ = writeln!(s, "norm_count {}", p.norm.count);
        push_floats(&mut s, "norm_mean", p.norm.mean.iter().copied());
        push_floats(&mut s, "norm_m2", p.norm.m2.iter().copied());
        push_floats(&mut s, "log_std", p.log_std.iter().copied());
        for (name, net) in [("mean", &p.mean_net), ("value", &p.value_net)] {
            let _ = writeln!(s, "net {name} {}", net.layers.len());
            for layer in &net.layers {
                let _ = writeln!(s, "layer {} {}", layer.w.nrows(), layer.w.ncols());
                for r in 0..layer.w.nrows() {
                    push_floats(&mut s, "row", layer.w.row(r).iter().copied());
                }
                push_floats(&mut s, "bias", layer.b.iter().copied());
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self, LearnError> {
        let lines: Vec<&str> = content_lines(text).collect();
        let mut cursor = Cursor { lines: &lines, at: 0 };

        let header = cursor.line()?;
        if tok(&header, 0)? != MAGIC || tok(&header, 1)? != "1" {
            return Err(bad("not a version-1 checkpoint file"));
        }
        let feature_layout = field_u64(&mut cursor, "feature_layout")? as u32;
        let epoch = field_u64(&mut cursor, "epoch")? as usize;
        let obs_dim = field_u64(&mut cursor, "obs_dim")? as usize;
        let act_dim = field_u64(&mut cursor, "act_dim")? as usize;
        let hidden_line = cursor.expect("hidden")?;
        let hidden: Vec<usize> = hidden_line[1..]
            .iter()
            .map(|t| t.parse::<usize>().map_err(|_| bad("bad hidden size")))
            .collect::<Result<_, _>>()?;

        let mut parents = Vec::new();
        while cursor.peek_is("parent") {
            let line = cursor.line()?;
            parents.push(tok(&line, 1)?.to_string());
        }

        let count_line = cursor.expect("norm_count")?;
        let norm_count = num(&count_line, 1).map_err(LearnError::Model)?;
        let norm_mean = field_vector(&mut cursor, "norm_mean", obs_dim)?;
        let norm_m2 = field_vector(&mut cursor, "norm_m2", obs_dim)?;
        let log_std = field_vector(&mut cursor, "log_std", act_dim)?;

        // Networks are rebuilt shape-first, then filled row by row.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        use rand::SeedableRng;
        let mut policy = Policy::new(obs_dim, act_dim, &hidden, 0.0, &mut rng);
        policy.log_std = log_std;
        policy.norm = ObsNormalizer { mean: norm_mean, m2: norm_m2, count: norm_count };
        for (name, net) in [("mean", &mut policy.mean_net), ("value", &mut policy.value_net)] {
            let head = cursor.expect("net")?;
            if tok(&head, 1)? != name {
                return Err(bad(format!("expected net {name}")));
            }
            let n_layers: usize =
                tok(&head, 2)?.parse().map_err(|_| bad("bad layer count"))?;
            if n_layers != net.layers.len() {
                return Err(bad(format!(
                    "net {name}: {n_layers} layers in file, {} implied by dims",
                    net.layers.len()
                )));
            }
            for layer in &mut net.layers {
                let shape = cursor.expect("layer")?;
                let rows: usize = tok(&shape, 1)?.parse().map_err(|_| bad("bad layer rows"))?;
                let cols: usize = tok(&shape, 2)?.parse().map_err(|_| bad("bad layer cols"))?;
                if (rows, cols) != layer.w.shape() {
                    return Err(bad(format!(
                        "layer shape {rows}x{cols} clashes with header dims {:?}",
                        layer.w.shape()
                    )));
                }
                let mut w = DMatrix::zeros(rows, cols);
                for r in 0..rows {
                    let row = cursor.expect("row")?;
                    if row.len() != cols + 1 {
                        return Err(bad(format!("layer row has {} values, want {cols}", row.len() - 1)));
                    }
                    for c in 0..cols {
                        w[(r, c)] = num(&row, c + 1).map_err(LearnError::Model)?;
                    }
                }
                layer.w = w;
                layer.b = field_vector_line(cursor.expect("bias")?, rows)?;
            }
        }
        cursor.expect("end")?;
        Ok(Checkpoint { feature_layout, epoch, parents, policy })
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        std::fs::write(path, self.write_string())
            .map_err(|e| LearnError::Model(ModelError::Io(e)))
    }

    pub fn load(path: &Path) -> Result<Self, LearnError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| LearnError::Model(ModelError::Io(e)))?;
        Self::parse(&text)
    }

    /// Digest of the serialized form (what a manifest records).
    pub fn checksum(&self) -> u64 {
        checksum64(self.write_string().as_bytes())
    }
}

// --- parsing scaffolding ----------------------------------------------------

struct Cursor<'a> {
    lines: &'a [&'a str],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<Vec<&'a str>, LearnError> {
        let l = self.lines.get(self.at).ok_or_else(|| bad("file ends early"))?;
        self.at += 1;
        Ok(l.split_whitespace().collect())
    }

    fn peek_is(&self, keyword: &str) -> bool {
        self.lines.get(self.at).is_some_and(|l| l.split_whitespace().next() == Some(keyword))
    }

    fn expect(&mut self, keyword: &str) -> Result<Vec<&'a str>, LearnError> {
        let toks = self.line()?;
        if tok(&toks, 0)? != keyword {
            return Err(bad(format!("expected '{keyword}', found '{}'", toks[0])));
        }
        Ok(toks)
    }
}

fn bad(msg: impl Into<String>) -> LearnError {
    LearnError::Model(ModelError::bad(msg))
}

fn field_u64(cursor: &mut Cursor, keyword: &str) -> Result<u64, LearnError> {
    let toks = cursor.expect(keyword)?;
    tok(&toks, 1)
        .map_err(LearnError::Model)?
        .parse::<u64>()
        .map_err(|_| bad(format!("bad {keyword} value")))
}

fn field_vector_line(toks: Vec<&str>, dim: usize) -> Result<DVector<f64>, LearnError> {
    if toks.len() != dim + 1 {
        return Err(bad(format!("'{}' has {} values, want {dim}", toks[0], toks.len() - 1)));
    }
    let mut v = DVector::zeros(dim);
    for i in 0..dim {
        v[i] = num(&toks, i + 1).map_err(LearnError::Model)?;
    }
    Ok(v)
}

fn field_vector(cursor: &mut Cursor, keyword: &str, dim: usize) -> Result<DVector<f64>, LearnError> {
    let toks = cursor.expect(keyword)?;
    field_vector_line(toks, dim)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut policy = Policy::new(6, 3, &[8, 8], 0.3f64.ln(), &mut rng);
        // Give the normalizer some history so all fields are non-trivial.
        for k in 0..10 {
            policy.norm.update(&DVector::from_fn(6, |i, _| (i as f64) * 0.3 + k as f64));
        }
        let mut ckpt = Checkpoint::new(1, policy);
        ckpt.epoch = 42;
        ckpt.parents = vec!["runs/a/phase1_r.ckpt".into(), "runs/b/phase2.ckpt".into()];
        ckpt
    }

    #[test]
    fn roundtrip_is_byte_stable_and_lossless() {
        let ckpt = sample_checkpoint();
        let text = ckpt.write_string();
        let back = Checkpoint::parse(&text).unwrap();
        assert_eq!(back.write_string(), text);
        assert_eq!(back.epoch, 42);
        assert_eq!(back.parents, ckpt.parents);
        assert_eq!(back.feature_layout, 1);
        assert_eq!(back.policy.params_flat(), ckpt.policy.params_flat());
        assert_eq!(back.policy.norm.count, ckpt.policy.norm.count);
        assert_eq!(back.policy.norm.mean, ckpt.policy.norm.mean);
        assert_eq!(back.policy.norm.m2, ckpt.policy.norm.m2);
    }

    #[test]
    fn restored_policy_acts_identically() {
        let ckpt = sample_checkpoint();
        let back = Checkpoint::parse(&ckpt.write_string()).unwrap();
        let obs = DVector::from_vec(vec![0.1, -0.5, 2.0, 0.0, 1.0, -1.0]);
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let a = ckpt.policy.act(&obs, &mut r1, false).unwrap();
        let b = back.policy.act(&obs, &mut r2, false).unwrap();
        assert_eq!(a.action, b.action);
        assert_eq!(a.log_prob, b.log_prob);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn layout_gate_refuses_mismatches() {
        let ckpt = sample_checkpoint();
        assert!(ckpt.ensure_layout(1).is_ok());
        assert!(ckpt.ensure_layout(2).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let ckpt = sample_checkpoint();
        let text = ckpt.write_string();
        let cut = &text[..text.len() / 2];
        assert!(Checkpoint::parse(cut).is_err());
    }

    #[test]
    fn wrong_magic_is_rejected() {
        assert!(Checkpoint::parse("NOTCKPT 1\n").is_err());
    }

    #[test]
    fn shape_clash_is_rejected() {
        let ckpt = sample_checkpoint();
        let text = ckpt.write_string().replace("layer 8 6", "layer 8 5");
        assert!(Checkpoint::parse(&text).is_err());
    }

    #[test]
    fn file_roundtrip_via_disk() {
        let dir = std::env::temp_dir().join("artisim-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("policy.ckpt");
        let ckpt = sample_checkpoint();
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.write_string(), ckpt.write_string());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn checksum_tracks_content() {
        let a = sample_checkpoint();
        let mut b = sample_checkpoint();
        assert_eq!(a.checksum(), b.checksum());
        b.epoch += 1;
        assert_ne!(a.checksum(), b.checksum());
        // Digest function itself: empty input is the FNV offset basis.
        assert_eq!(checksum64(b""), 0xcbf2_9ce4_8422_2325);
        assert_ne!(checksum64(b"a"), checksum64(b"b"));
    }
}
