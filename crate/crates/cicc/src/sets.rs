//! Index-set algebra over the positions of one block, and the partitions the
//! encoder is wired from: high/low entropy thresholding, the point-to-point
//! split, the common-layer split seen by two receivers, the confidential-layer
//! split, and the channel-prefix sets.

use crate::profile::EntropyProfile;
use crate::{Error, Result};

/// Width of the guard band, in standard errors, applied to threshold
/// comparisons when the profile is a Monte Carlo estimate.
pub const GUARD_SE: f64 = 2.0;

/// A sorted, deduplicated set of positions inside `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    n: usize,
    idx: Vec<usize>,
}

impl IndexSet {
    /// Builds a set over `[0, n)`, sorting and deduplicating `idx`.
    pub fn new(n: usize, mut idx: Vec<usize>) -> Result<Self> {
        idx.sort_unstable();
        idx.dedup();
        if let Some(&last) = idx.last() {
            if last >= n {
                return Err(Error::Structure(format!(
                    "index {last} outside universe of size {n}"
                )));
            }
        }
        Ok(IndexSet { n, idx })
    }

    /// The empty set over `[0, n)`.
    pub fn empty(n: usize) -> Self {
        IndexSet { n, idx: Vec::new() }
    }

    /// The full set `[0, n)`.
    pub fn full(n: usize) -> Self {
        IndexSet { n, idx: (0..n).collect() }
    }

    /// Universe size.
    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.idx.binary_search(&j).is_ok()
    }

    /// Positions in ascending order.
    pub fn as_slice(&self) -> &[usize] {
        &self.idx
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.idx.iter().copied()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        debug_assert_eq!(self.n, other.n);
        let mut idx = self.idx.clone();
        idx.extend_from_slice(&other.idx);
        idx.sort_unstable();
        idx.dedup();
        IndexSet { n: self.n, idx }
    }

    pub fn intersect(&self, other: &IndexSet) -> IndexSet {
        debug_assert_eq!(self.n, other.n);
        let idx = self.idx.iter().copied().filter(|&j| other.contains(j)).collect();
        IndexSet { n: self.n, idx }
    }

    /// Set difference `self \ other`.
    pub fn minus(&self, other: &IndexSet) -> IndexSet {
        debug_assert_eq!(self.n, other.n);
        let idx = self.idx.iter().copied().filter(|&j| !other.contains(j)).collect();
        IndexSet { n: self.n, idx }
    }

    /// Complement within the universe.
    pub fn complement(&self) -> IndexSet {
        let idx = (0..self.n).filter(|&j| !self.contains(j)).collect();
        IndexSet { n: self.n, idx }
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.idx.iter().all(|&j| other.contains(j))
    }

    pub fn is_disjoint_from(&self, other: &IndexSet) -> bool {
        self.idx.iter().all(|&j| !other.contains(j))
    }

    /// The `k` members with the smallest `score`, ties broken by ascending
    /// position. Errors if the set holds fewer than `k` members.
    pub fn take_lowest(&self, k: usize, score: &[f64]) -> Result<IndexSet> {
        if k > self.idx.len() {
            return Err(Error::RateInfeasible(format!(
                "need {k} positions but only {} are available",
                self.idx.len()
            )));
        }
        let mut ranked: Vec<usize> = self.idx.clone();
        ranked.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
        ranked.truncate(k);
        IndexSet::new(self.n, ranked)
    }
}

/// High and low entropy sets of a profile: `high = {j : h[j] >= 1 - delta_h}`
/// and `low = {j : h[j] <= delta_l}`. Monte Carlo profiles get a guard band of
/// two standard errors on the conservative side of each comparison.
pub fn threshold_sets(
    profile: &EntropyProfile,
    delta_h: f64,
    delta_l: f64,
) -> Result<(IndexSet, IndexSet)> {
    if !(delta_h > 0.0 && delta_h < 0.5 && delta_l > 0.0 && delta_l < 0.5) {
        return Err(Error::Structure(format!(
            "thresholds must lie in (0, 0.5): got delta_h={delta_h}, delta_l={delta_l}"
        )));
    }
    let n = profile.n;
    let mut high = Vec::new();
    let mut low = Vec::new();
    for j in 0..n {
        let guard = GUARD_SE * profile.se(j);
        if profile.h[j] - guard >= 1.0 - delta_h {
            high.push(j);
        }
        if profile.h[j] + guard <= delta_l {
            low.push(j);
        }
    }
    Ok((IndexSet::new(n, high)?, IndexSet::new(n, low)?))
}

/// Point-to-point split: information positions, frozen positions, and the
/// almost-deterministic remainder.
#[derive(Debug, Clone)]
pub struct P2pPartition {
    /// Reliable information set: high entropy at the source, low at the receiver.
    pub info: IndexSet,
    /// High at the source but unreliable: publicly frozen.
    pub frozen: IndexSet,
    /// Not high at the source: filled by the conditional sampling rule.
    pub sampled: IndexSet,
}

/// Splits `[0, n)` into `info = high ∩ low_rx`, `frozen = high \ low_rx`,
/// `sampled = high^C`.
pub fn partition_p2p(high: &IndexSet, low_rx: &IndexSet) -> P2pPartition {
    P2pPartition {
        info: high.intersect(low_rx),
        frozen: high.minus(low_rx),
        sampled: high.complement(),
    }
}

/// Common-layer split for a message both receivers decode.
#[derive(Debug, Clone)]
pub struct CommonPartition {
    /// Reliable toward receiver 1.
    pub i1: IndexSet,
    /// Reliable toward receiver 2.
    pub i2: IndexSet,
    /// High entropy, reliable toward neither: publicly frozen.
    pub frozen: IndexSet,
    /// Not high: filled by the conditional sampling rule.
    pub sampled: IndexSet,
}

/// Splits a common layer by both receivers' low sets.
pub fn partition_common(high: &IndexSet, low1: &IndexSet, low2: &IndexSet) -> CommonPartition {
    CommonPartition {
        i1: high.intersect(low1),
        i2: high.intersect(low2),
        frozen: high.minus(&low1.union(low2)),
        sampled: high.complement(),
    }
}

/// Confidential-layer split: the five-way partition that separates secret,
/// private, frozen, chained-repair, and sampled positions.
#[derive(Debug, Clone)]
pub struct ConfidentialPartition {
    /// Reliable toward receiver 2 and still uniform given receiver 1's view.
    pub i2s: IndexSet,
    /// Reliable toward receiver 2, partially exposed to receiver 1.
    pub i2p: IndexSet,
    /// Unreliable toward receiver 2 but uniform to receiver 1: frozen.
    pub f2: IndexSet,
    /// Unreliable toward receiver 2 and exposed to receiver 1: chained.
    pub r2: IndexSet,
    /// Not high at the encoder: sampled.
    pub d2: IndexSet,
}

/// Splits the confidential layer from its three governing sets.
pub fn partition_confidential(
    high: &IndexSet,
    low_y2: &IndexSet,
    high_y1: &IndexSet,
) -> ConfidentialPartition {
    let reliable = high.intersect(low_y2);
    let unreliable = high.minus(low_y2);
    ConfidentialPartition {
        i2s: reliable.intersect(high_y1),
        i2p: reliable.minus(high_y1),
        f2: unreliable.intersect(high_y1),
        r2: unreliable.minus(high_y1),
        d2: high.complement(),
    }
}

/// Channel-prefix sets for the final encoding layer.
#[derive(Debug, Clone)]
pub struct PrefixSets {
    /// Uniform even given receiver 1's observation: carries the reused
    /// randomness, counted once per frame.
    pub w_reuse: IndexSet,
    /// Uniform at the encoder but visible to receiver 1: fresh randomness
    /// every block.
    pub fresh: IndexSet,
    /// Everything else: sampled from the conditional.
    pub sampled: IndexSet,
    /// Low entropy given receiver 1's observation (diagnostic only).
    pub low_y1: IndexSet,
}

/// Builds the prefix sets; the receiver-1-blind set is intersected into the
/// encoder-high set so estimator noise cannot break the nesting.
pub fn prefix_sets(high_enc: &IndexSet, high_y1: &IndexSet, low_y1: &IndexSet) -> PrefixSets {
    let w_reuse = high_enc.intersect(high_y1);
    PrefixSets {
        fresh: high_enc.minus(&w_reuse),
        sampled: high_enc.complement(),
        w_reuse,
        low_y1: low_y1.clone(),
    }
}
