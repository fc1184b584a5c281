use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lexer::{EncodedSequence, FIRST_TOKEN_ID};

/// Symmetric sparse co-occurrence weights between token indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceMatrix {
    entries: BTreeMap<(u32, u32), f64>,
    pub window: usize,
}

impl CooccurrenceMatrix {
    pub fn get(&self, i: u32, j: u32) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in `(i, j)` order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &x)| (i, j, x))
    }

    pub fn max_index(&self) -> Option<u32> {
        self.entries.keys().map(|&(i, j)| i.max(j)).max()
    }

    /// Builds a matrix from explicit entries, mirroring each one.
    pub fn from_entries(entries: impl IntoIterator<Item = (u32, u32, f64)>, window: usize) -> Result<Self> {
        let mut m = BTreeMap::new();
        for (i, j, x) in entries {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::value(format!("co-occurrence weight {x} must be positive")));
            }
            m.insert((i, j), x);
            m.insert((j, i), x);
        }
        Ok(CooccurrenceMatrix { entries: m, window })
    }
}

/// Adds `1/distance` to `(i, j)` and `(j, i)` for every pair of real tokens
/// at most `window` positions apart.
pub fn build_cooccurrence(corpus: &[EncodedSequence], window: usize) -> Result<CooccurrenceMatrix> {
    if window == 0 {
        return Err(Error::value("co-occurrence window must be at least 1"));
    }
    let mut entries: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for seq in corpus {
        let ids = &seq.ids;
        for (p, &a) in ids.iter().enumerate() {
            if a < FIRST_TOKEN_ID {
                continue;
            }
            for d in 1..=window {
                let Some(&b) = ids.get(p + d) else { break };
                if b < FIRST_TOKEN_ID {
                    continue;
                }
                let w = 1.0 / d as f64;
                *entries.entry((a, b)).or_insert(0.0) += w;
                *entries.entry((b, a)).or_insert(0.0) += w;
            }
        }
    }
    Ok(CooccurrenceMatrix { entries, window })
}
