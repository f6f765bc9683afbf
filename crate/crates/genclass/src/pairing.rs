//! Similar/dissimilar pair construction for the integrated classifier.
//!
//! Seen batches pair real features (left) with generated ones (right);
//! unseen batches pair generated features on both sides. Every batch is
//! balanced: one similar and one dissimilar pair per input row.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairOrigin {
    Seen,
    Unseen,
}

/// Index-level pair selection; materialize against feature matrices or use
/// the indices directly to gather tape nodes.
#[derive(Debug, Clone)]
pub struct PairPlan {
    /// Row indices into the left source (reals for seen, fakes for unseen).
    pub left: Vec<usize>,
    /// Row indices into the fake batch.
    pub right: Vec<usize>,
    /// 1.0 for same-class pairs, 0.0 otherwise.
    pub targets: Vec<f64>,
    pub origin: PairOrigin,
}

#[derive(Debug, Clone)]
pub struct PairBatch {
    pub left: Matrix,
    pub right: Matrix,
    pub targets: Vec<f64>,
    pub origin: PairOrigin,
}

impl PairPlan {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn materialize(&self, left_src: &Matrix, right_src: &Matrix) -> PairBatch {
        PairBatch {
            left: left_src.gather_rows(&self.left),
            right: right_src.gather_rows(&self.right),
            targets: self.targets.clone(),
            origin: self.origin,
        }
    }
}

/// 1 iff the two class ids are equal.
pub fn indicator(y_i: u32, y_j: u32) -> u8 {
    u8::from(y_i == y_j)
}

fn distinct_count(labels: &[u32]) -> usize {
    let mut seen: Vec<u32> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// A permutation pi with labels[pi[i]] != labels[i] for every i.
///
/// Construction: shuffle the indices, stable-sort by label, then rotate by
/// the largest class count k. In the sorted order each class occupies a
/// contiguous run of at most k positions, so a shift of k can only land in
/// the same class by wrapping clear around — impossible once k <= B/2. That
/// bound is also necessary: with k > B/2 some same-class row has no
/// cross-class partner left.
fn label_derangement(labels: &[u32], rng: &mut impl Rng) -> Result<Vec<usize>> {
    if distinct_count(labels) < 2 {
        return Err(Error::Pairing(
            "batch has a single class; dissimilar pairs are impossible, resample the batch".into(),
        ));
    }
    let b = labels.len();
    let mut order: Vec<usize> = (0..b).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| labels[i]);
    let mut max_count = 0usize;
    let mut run = 0usize;
    for w in 0..b {
        if w > 0 && labels[order[w]] == labels[order[w - 1]] {
            run += 1;
        } else {
            run = 1;
        }
        max_count = max_count.max(run);
    }
    if 2 * max_count > b {
        return Err(Error::Pairing(format!(
            "a class holds {max_count} of {b} batch rows (more than half); \
             dissimilar pairs cannot cover the batch, resample it"
        )));
    }
    let mut perm = vec![0usize; b];
    for j in 0..b {
        perm[order[j]] = order[(j + max_count) % b];
    }
    debug_assert!(perm.iter().enumerate().all(|(i, &j)| labels[i] != labels[j]));
    Ok(perm)
}

/// Pairs for a seen batch: fakes[i] was generated from the attribute of
/// labels[i], so (real_i, fake_i) is similar by construction; the dissimilar
/// half pairs real_i with a label-deranged fake.
pub fn build_seen_pairs(labels: &[u32], rng: &mut impl Rng) -> Result<PairPlan> {
    if labels.is_empty() {
        return Err(Error::Pairing("empty batch".into()));
    }
    let b = labels.len();
    let perm = label_derangement(labels, rng)?;
    let mut left = Vec::with_capacity(2 * b);
    let mut right = Vec::with_capacity(2 * b);
    let mut targets = Vec::with_capacity(2 * b);
    for i in 0..b {
        left.push(i);
        right.push(i);
        targets.push(1.0);
    }
    for (i, &j) in perm.iter().enumerate() {
        left.push(i);
        right.push(j);
        targets.push(0.0);
    }
    Ok(PairPlan { left, right, targets, origin: PairOrigin::Seen })
}

/// Pairs for an unseen batch of fakes: similar pairs take two rows of the
/// same class (distinct indices, hence independent noise draws); dissimilar
/// pairs use a label-derangement. Both indices address the fake batch.
pub fn build_unseen_pairs(labels: &[u32], rng: &mut impl Rng) -> Result<PairPlan> {
    if labels.is_empty() {
        return Err(Error::Pairing("empty batch".into()));
    }
    let b = labels.len();
    // anchors must come from classes with at least two batch members
    let paired_rows: Vec<usize> = (0..b)
        .filter(|&i| labels.iter().enumerate().any(|(j, &y)| j != i && y == labels[i]))
        .collect();
    if paired_rows.is_empty() {
        return Err(Error::Pairing(
            "no unseen class appears twice in the batch; similar fake-fake pairs are \
             impossible, resample the batch"
                .into(),
        ));
    }
    let perm = label_derangement(labels, rng)?;

    let mut left = Vec::with_capacity(2 * b);
    let mut right = Vec::with_capacity(2 * b);
    let mut targets = Vec::with_capacity(2 * b);
    for k in 0..b {
        let anchor = if paired_rows.contains(&k) {
            k
        } else {
            *paired_rows.choose(rng).expect("nonempty")
        };
        let partners: Vec<usize> = (0..b)
            .filter(|&j| j != anchor && labels[j] == labels[anchor])
            .collect();
        let partner = *partners.choose(rng).expect("anchor has a same-class partner");
        left.push(anchor);
        right.push(partner);
        targets.push(1.0);
    }
    for (i, &j) in perm.iter().enumerate() {
        left.push(i);
        right.push(j);
        targets.push(0.0);
    }
    Ok(PairPlan { left, right, targets, origin: PairOrigin::Unseen })
}
