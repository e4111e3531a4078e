//! Context-window extraction: the near, distant, and utterance-wide context
//! sets around a target position.

use crate::{Error, Result};

/// The context positions around one target token.
///
/// `near` holds every position within `delta` of the target, `dist` every
/// remaining position of the utterance. Together they partition all
/// positions except the target itself. Both lists are ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextSets {
    pub near: Vec<usize>,
    pub dist: Vec<usize>,
    pub target: usize,
    pub delta: usize,
}

impl ContextSets {
    /// All context positions (near ∪ dist) in ascending order, i.e. the
    /// whole utterance minus the target.
    pub fn all_positions(&self) -> Vec<usize> {
        let mut all = Vec::with_capacity(self.near.len() + self.dist.len());
        let mut near = self.near.iter().copied().peekable();
        let mut dist = self.dist.iter().copied().peekable();
        loop {
            match (near.peek(), dist.peek()) {
                (Some(&a), Some(&b)) => {
                    if a < b {
                        all.push(near.next().unwrap());
                    } else {
                        all.push(dist.next().unwrap());
                    }
                }
                (Some(_), None) => all.push(near.next().unwrap()),
                (None, Some(_)) => all.push(dist.next().unwrap()),
                (None, None) => break,
            }
        }
        all
    }
}

/// Split the positions of an utterance of length `utterance_len` into the
/// near window (within `delta` of `target`) and the distant remainder.
pub fn extract(utterance_len: usize, target: usize, delta: usize) -> Result<ContextSets> {
    if utterance_len == 0 {
        return Err(Error::InvalidInput("utterance is empty".into()));
    }
    if target >= utterance_len {
        return Err(Error::InvalidInput(format!(
            "target position {target} out of range for utterance of length {utterance_len}"
        )));
    }
    if delta == 0 {
        return Err(Error::InvalidInput("window width must be at least 1".into()));
    }

    let near_lo = target.saturating_sub(delta);
    let near_hi = (target + delta).min(utterance_len - 1);

    let mut near = Vec::with_capacity(near_hi - near_lo);
    let mut dist = Vec::with_capacity(utterance_len - 1 - (near_hi - near_lo));
    dist.extend(0..near_lo);
    near.extend(near_lo..target);
    near.extend(target + 1..=near_hi);
    dist.extend(near_hi + 1..utterance_len);

    Ok(ContextSets {
        near,
        dist,
        target,
        delta,
    })
}
