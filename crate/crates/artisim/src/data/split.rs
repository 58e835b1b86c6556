//! Train/test splitting of reference sets, stratified per object.
//!
//! Items are shuffled and divided within each object's group so every
//! object keeps roughly the requested fraction in training; an object
//! with fewer than two items cannot be split and goes entirely to
//! training, recorded as a warning. The split is a pure function of
//! (items, fraction, seed). The chosen assignment is persisted as an
//! `ARTISPLIT 1` manifest listing file paths with their tags, so a later
//! run can reload exactly the same partition.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::learn::checksum64;
use crate::models::content_lines;

use super::DataError;

/// Index partition produced by [`split_items`].
#[derive(Clone, Debug)]
pub struct SplitOutcome {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Objects that could not be split (fewer than two items).
    pub warnings: Vec<String>,
}

/// Split item indices into train/test, stratified by each item's object.
///
/// `ceil(fraction * n)` of every object's items go to training, the rest
/// to test. Returned index lists are sorted ascending.
pub fn split_items(
    objects: &[&str],
    fraction: f64,
    seed: u64,
) -> Result<SplitOutcome, DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::bad(format!("split fraction {fraction} not in (0, 1)")));
    }
    let mut names: Vec<&str> = objects.to_vec();
    names.sort_unstable();
    names.dedup();

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut warnings = Vec::new();
    for name in names {
        let mut group: Vec<usize> = objects
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == name)
            .map(|(k, _)| k)
            .collect();
        if group.len() < 2 {
            warnings.push(format!("object '{name}' has {} item(s); all assigned to train", group.len()));
            train.extend(group);
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ checksum64(name.as_bytes()));
        group.shuffle(&mut rng);
        let take = (fraction * group.len() as f64).ceil() as usize;
        train.extend(&group[..take]);
        test.extend(&group[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitOutcome { train, test, warnings })
}

// --- manifest ----------------------------------------------------------------

const SPLIT_MAGIC: &str = "ARTISPLIT";

/// Persisted split: reference file paths tagged train or test.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitManifest {
    pub seed: u64,
    pub fraction: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    pub fn write_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{SPLIT_MAGIC} 1\n"));
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("fraction {}\n", self.fraction));
        for p in &self.train {
            out.push_str(&format!("train {p}\n"));
        }
        for p in &self.test {
            out.push_str(&format!("test {p}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut lines = content_lines(text);
        match lines.next() {
            Some(l) if l == format!("{SPLIT_MAGIC} 1") => {}
            _ => return Err(DataError::bad(format!("expected '{SPLIT_MAGIC} 1' header"))),
        }
        let mut seed = None;
        let mut fraction = None;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for line in lines {
            let (key, rest) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| DataError::bad(format!("bare record '{line}'")))?;
            let rest = rest.trim();
            match key {
                "seed" => {
                    seed = Some(
                        rest.parse::<u64>()
                            .map_err(|_| DataError::bad(format!("bad seed '{rest}'")))?,
                    )
                }
                "fraction" => {
                    fraction = Some(
                        rest.parse::<f64>()
                            .map_err(|_| DataError::bad(format!("bad fraction '{rest}'")))?,
                    )
                }
                "train" => train.push(rest.to_string()),
                "test" => test.push(rest.to_string()),
                other => return Err(DataError::bad(format!("unknown record '{other}'"))),
            }
        }
        Ok(SplitManifest {
            seed: seed.ok_or_else(|| DataError::bad("missing seed"))?,
            fraction: fraction.ok_or_else(|| DataError::bad("missing fraction"))?,
            train,
            test,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), DataError> {
        std::fs::write(path, self.write_string())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, DataError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------
