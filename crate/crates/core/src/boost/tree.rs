//! Regression/classification trees grown best-first on rank-binned features.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gini impurity `Σ p_k (1 - p_k)` of a vector of class proportions.
pub fn gini(proportions: &[f64]) -> f64 {
    proportions.iter().map(|p| p * (1.0 - p)).sum()
}

/// Two-class Gini impurity of a node with `pos` positives among `n` rows.
pub(crate) fn binary_gini(pos: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let q = pos / n;
    2.0 * q * (1.0 - q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
        n: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        /// Impurity decrease achieved by this split (count weighted).
        decrease: f64,
        n: usize,
    },
}

/// A binary tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn rec(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + rec(t, *left).max(rec(t, *right)),
            }
        }
        rec(self, 0)
    }

    /// Splits in creation order: (feature, threshold, decrease).
    pub fn splits(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, threshold, decrease, .. } => Some((*feature, *threshold, *decrease)),
            Node::Leaf { .. } => None,
        })
    }
}

/// Column-major bin codes plus the raw cut values separating adjacent bins.
pub(crate) struct Binned {
    pub n: usize,
    pub codes: Vec<Vec<u8>>,
    /// The same codes laid out row by row.
    pub rows: Vec<u8>,
    /// `cuts[f][b]` separates bin `b` from bin `b + 1`.
    pub cuts: Vec<Vec<f64>>,
}

impl Binned {
    /// Bins every column by rank into at most `max_bins` groups of tied-together values.
    pub fn new(x: &[Vec<f64>], max_bins: usize) -> Result<Self> {
        if !(2..=256).contains(&max_bins) {
            return Err(Error::param(format!("max_bins must lie in 2..=256, got {max_bins}")));
        }
        let n = x.len();
        let p = x.first().map_or(0, Vec::len);
        let mut codes = Vec::with_capacity(p);
        let mut cuts = Vec::with_capacity(p);
        let mut order: Vec<usize> = (0..n).collect();
        for f in 0..p {
            order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
            let mut col = vec![0u8; n];
            let mut col_cuts = Vec::new();
            let mut bin = 0usize;
            let mut raw_bin = 0usize;
            let mut i = 0;
            while i < n {
                let v = x[order[i]][f];
                let mut j = i;
                while j < n && x[order[j]][f] == v {
                    j += 1;
                }
                let target = i * max_bins / n;
                if i > 0 && target > raw_bin {
                    raw_bin = target;
                    bin += 1;
                    col_cuts.push(0.5 * (x[order[i - 1]][f] + v));
                }
                for &r in &order[i..j] {
                    col[r] = bin as u8;
                }
                i = j;
            }
            codes.push(col);
            cuts.push(col_cuts);
        }
        let rows = (0..n).flat_map(|i| codes.iter().map(move |c: &Vec<u8>| c[i])).collect();
        Ok(Binned { n, codes, rows, cuts })
    }

    pub fn n_features(&self) -> usize {
        self.codes.len()
    }

    fn n_bins(&self, f: usize) -> usize {
        self.cuts[f].len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LeafRule {
    Mean,
    /// Σ r / Σ h
    Newton,
}

/// How each split's recorded decrease is measured.
#[derive(Debug, Clone, Copy)]
pub(crate) enum DecreaseRule<'a> {
    /// Reduction in the sum of squared deviations of the targets.
    Variance,
    /// Count-weighted two-class Gini decrease on these labels.
    Gini(&'a [bool]),
}

pub(crate) struct GrowOutput {
    pub tree: Tree,
    /// Leaf value reached by every training row.
    pub fitted: Vec<f64>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    bin: usize,
}

/// Per-feature histograms of `[Σ r, row count]` over bins, flattened with a fixed stride.
struct Hist {
    stride: usize,
    cells: Vec<[f64; 2]>,
}

impl Hist {
    fn build(b: &Binned, idx: &[u32], r: &[f64], stride: usize) -> Self {
        let p = b.n_features();
        let mut cells = vec![[0.0; 2]; stride * p];
        for &i in idx {
            let i = i as usize;
            let ri = r[i];
            for (h, &c) in cells.chunks_exact_mut(stride).zip(&b.rows[i * p..(i + 1) * p]) {
                let e = &mut h[c as usize];
                e[0] += ri;
                e[1] += 1.0;
            }
        }
        Hist { stride, cells }
    }

    /// `self - other`, used to derive a sibling's histogram from its parent's.
    fn minus(mut self, other: &Hist) -> Self {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a[0] -= b[0];
            a[1] -= b[1];
        }
        self
    }
}

struct Leaf {
    node: usize,
    start: usize,
    end: usize,
    hist: Option<Hist>,
    best: Option<Candidate>,
}

fn best_split(b: &Binned, hist: &Hist, idx: &[u32], r: &[f64], min_leaf: usize, inv: &[f64]) -> Option<Candidate> {
    let n = idx.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let (total, sq) = idx.iter().fold((0.0, 0.0), |(s, q), &i| {
        let v = r[i as usize];
        (s + v, q + v * v)
    });
    let parent = total * total * inv[n];
    let mut best: Option<Candidate> = None;
    let mut best_gain = 1e-12 * sq.max(1.0);
    for f in 0..b.n_features() {
        let nb = b.n_bins(f);
        let lo = f * hist.stride;
        let (mut sl, mut nl) = (0.0, 0usize);
        for (bin, &[s, c]) in hist.cells[lo..lo + nb].iter().enumerate().take(nb.saturating_sub(1)) {
            sl += s;
            nl += c as usize;
            if c == 0.0 || nl < min_leaf {
                continue;
            }
            let nr = n - nl;
            if nr < min_leaf.max(1) {
                break;
            }
            let sr = total - sl;
            let gain = sl * sl * inv[nl] + sr * sr * inv[nr] - parent;
            if gain > best_gain {
                best_gain = gain;
                best = Some(Candidate { gain, feature: f, bin });
            }
        }
    }
    best
}

fn decrease_of(rule: DecreaseRule, idx: &[u32], split: usize, gain: f64) -> f64 {
    match rule {
        DecreaseRule::Variance => gain,
        DecreaseRule::Gini(labels) => {
            let count = |s: &[u32]| s.iter().filter(|&&i| labels[i as usize]).count() as f64;
            let (l, rr) = idx.split_at(split);
            let (pl, pr) = (count(l), count(rr));
            let (nl, nr) = (l.len() as f64, rr.len() as f64);
            (nl + nr) * binary_gini(pl + pr, nl + nr) - nl * binary_gini(pl, nl) - nr * binary_gini(pr, nr)
        }
    }
}

/// Best-first growth: repeatedly split the leaf with the largest squared-error
/// reduction of `r` until `max_splits` splits are made or no admissible split remains.
pub(crate) fn grow(
    b: &Binned,
    r: &[f64],
    hess: Option<&[f64]>,
    max_splits: usize,
    min_leaf: usize,
    leaf_rule: LeafRule,
    decrease: DecreaseRule,
) -> GrowOutput {
    let mut idx: Vec<u32> = (0..b.n as u32).collect();
    let mut scratch: Vec<u32> = Vec::with_capacity(b.n);
    let inv: Vec<f64> = (0..=b.n).map(|k| if k == 0 { 0.0 } else { 1.0 / k as f64 }).collect();
    let stride = (0..b.n_features()).map(|f| b.n_bins(f)).max().unwrap_or(1);
    let mut nodes = vec![Node::Leaf { value: 0.0, n: b.n }];
    let mut leaves = vec![Leaf { node: 0, start: 0, end: b.n, hist: None, best: None }];
    if max_splits > 0 {
        let h = Hist::build(b, &idx, r, stride);
        leaves[0].best = best_split(b, &h, &idx, r, min_leaf, &inv);
        leaves[0].hist = Some(h);
    }
    let mut splits = 0;
    while splits < max_splits {
        let pick = leaves.iter().enumerate().filter_map(|(k, l)| l.best.as_ref().map(|c| (k, c.gain))).fold(
            None,
            |acc: Option<(usize, f64)>, (k, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((k, g)),
            },
        );
        let Some((k, _)) = pick else { break };
        let leaf = leaves.swap_remove(k);
        let c = leaf.best.expect("picked leaf has a candidate");
        let col = &b.codes[c.feature];
        let slice = &mut idx[leaf.start..leaf.end];
        scratch.clear();
        let mut mid = 0;
        for j in 0..slice.len() {
            let i = slice[j];
            if col[i as usize] as usize <= c.bin {
                slice[mid] = i;
                mid += 1;
            } else {
                scratch.push(i);
            }
        }
        slice[mid..].copy_from_slice(&scratch);
        let dec = decrease_of(decrease, slice, mid, c.gain);
        let (li, ri) = (nodes.len(), nodes.len() + 1);
        let size = leaf.end - leaf.start;
        nodes.push(Node::Leaf { value: 0.0, n: mid });
        nodes.push(Node::Leaf { value: 0.0, n: size - mid });
        nodes[leaf.node] = Node::Split {
            feature: c.feature,
            threshold: b.cuts[c.feature][c.bin],
            left: li,
            right: ri,
            decrease: dec,
            n: size,
        };
        splits += 1;
        let (ls, le, rs, re) = (leaf.start, leaf.start + mid, leaf.start + mid, leaf.end);
        if splits < max_splits {
            let parent = leaf.hist.expect("internal leaves carry histograms");
            let left_small = mid <= size - mid;
            let small = if left_small {
                Hist::build(b, &idx[ls..le], r, stride)
            } else {
                Hist::build(b, &idx[rs..re], r, stride)
            };
            let large = parent.minus(&small);
            let (lh, rh) = if left_small { (small, large) } else { (large, small) };
            let lb = best_split(b, &lh, &idx[ls..le], r, min_leaf, &inv);
            let rb = best_split(b, &rh, &idx[rs..re], r, min_leaf, &inv);
            leaves.push(Leaf { node: li, start: ls, end: le, hist: Some(lh), best: lb });
            leaves.push(Leaf { node: ri, start: rs, end: re, hist: Some(rh), best: rb });
        } else {
            leaves.push(Leaf { node: li, start: ls, end: le, hist: None, best: None });
            leaves.push(Leaf { node: ri, start: rs, end: re, hist: None, best: None });
        }
    }

    let mut fitted = vec![0.0; b.n];
    for leaf in &leaves {
        let rows = &idx[leaf.start..leaf.end];
        let sr: f64 = rows.iter().map(|&i| r[i as usize]).sum();
        let value = match (leaf_rule, hess) {
            (LeafRule::Newton, Some(h)) => {
                let sh: f64 = rows.iter().map(|&i| h[i as usize]).sum();
                if sh > 1e-12 {
                    sr / sh
                } else {
                    0.0
                }
            }
            _ => sr / rows.len().max(1) as f64,
        };
        nodes[leaf.node] = Node::Leaf { value, n: rows.len() };
        for &i in rows {
            fitted[i as usize] = value;
        }
    }
    GrowOutput { tree: Tree { nodes }, fitted }
}

/// Fits a single tree with at most `max_splits` splits and `min_leaf` rows per leaf.
///
/// Splits maximize the reduction in squared error of `targets`; leaves predict the
/// target mean. When every target is 0 or 1 the recorded decrease is the
/// count-weighted Gini decrease, otherwise the squared-error reduction.
pub fn fit_tree(x: &[Vec<f64>], targets: &[f64], max_splits: usize, min_leaf: usize) -> Result<Tree> {
    if x.len() != targets.len() {
        return Err(Error::param(format!("{} rows but {} targets", x.len(), targets.len())));
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("no rows".into()));
    }
    if min_leaf == 0 {
        return Err(Error::param("min_leaf must be at least 1"));
    }
    if x.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in tree input".into()));
    }
    let b = Binned::new(x, 256)?;
    let labels: Option<Vec<bool>> =
        targets.iter().all(|&t| t == 0.0 || t == 1.0).then(|| targets.iter().map(|&t| t == 1.0).collect());
    let rule = labels.as_deref().map_or(DecreaseRule::Variance, DecreaseRule::Gini);
    Ok(grow(&b, targets, None, max_splits, min_leaf, LeafRule::Mean, rule).tree)
}
