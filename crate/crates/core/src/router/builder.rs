//! Level-wise greedy tree growth over presorted sparse columns.
//!
//! Each level scans every feature column once, accumulating statistics for
//! all open nodes at the same time. Implicit zeros form one value group
//! whose statistics are the node total minus the nonzero part.

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::rng::{self, SeededRng};

/// Tree node; children are indices into the node list, root at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<L> {
    Leaf(L),
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Walks from the root to a leaf.
pub(crate) fn descend<L>(nodes: &[Node<L>], value: impl Fn(usize) -> f64) -> &L {
    let mut i = 0;
    loop {
        match &nodes[i] {
            Node::Leaf(l) => return l,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                i = if value(*feature) <= *threshold {
                    *left
                } else {
                    *right
                };
            }
        }
    }
}

pub(crate) fn depth<L>(nodes: &[Node<L>]) -> usize {
    fn go<L>(nodes: &[Node<L>], i: usize) -> usize {
        match &nodes[i] {
            Node::Leaf(_) => 0,
            Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
        }
    }
    if nodes.is_empty() {
        0
    } else {
        go(nodes, 0)
    }
}

/// Nonzero entries of every feature sorted by value, then row.
pub(crate) struct Columns {
    cols: Vec<Vec<(f64, u32)>>,
}

impl Columns {
    pub(crate) fn new(x: &FeatureMatrix) -> Self {
        let mut cols = vec![Vec::new(); x.n_features()];
        for r in 0..x.n_rows() {
            let (idx, val) = x.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                cols[c as usize].push((v, r as u32));
            }
        }
        for c in &mut cols {
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Columns { cols }
    }
}

/// Node statistics and split scoring.
pub(crate) trait Criterion {
    type Acc: Clone;
    type Score: Copy;

    fn empty(&self) -> Self::Acc;
    fn add_sample(&self, acc: &mut Self::Acc, row: usize, weight: u32);
    fn add(&self, acc: &mut Self::Acc, other: &Self::Acc);
    fn diff(&self, total: &Self::Acc, part: &Self::Acc) -> Self::Acc;
    /// Weighted sample count, compared against the minimum leaf size.
    fn weight(&self, acc: &Self::Acc) -> u64;
    fn is_pure(&self, acc: &Self::Acc) -> bool;
    fn split_score(&self, left: &Self::Acc, right: &Self::Acc) -> Self::Score;
    /// Score of leaving the node unsplit; a split must beat it strictly.
    fn parent_score(&self, total: &Self::Acc) -> Self::Score;
    fn better(&self, a: &Self::Score, b: &Self::Score) -> bool;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: u64,
    /// Features considered per node, drawn among those not constant in it.
    pub max_features: Option<usize>,
}

const NONE: u32 = u32::MAX;

struct Open<A, S> {
    node: usize,
    depth: usize,
    rows: Vec<u32>,
    total: A,
    splittable: bool,
    baseline: Option<S>,
    best: Option<(S, usize, f64)>,
}

fn threshold_between(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Grows a tree with rows weighted by `weights` (zero-weight rows are left
/// out). Ties between equally good splits go to the lowest feature, then
/// the lowest threshold.
pub(crate) fn grow<C: Criterion>(
    crit: &C,
    x: &FeatureMatrix,
    columns: &Columns,
    weights: &[u32],
    params: GrowParams,
    mut rng: Option<&mut SeededRng>,
) -> Vec<Node<C::Acc>> {
    let n_features = x.n_features();
    let mut nodes: Vec<Node<C::Acc>> = Vec::new();
    let mut node_of = vec![NONE; x.n_rows()];

    let root_rows: Vec<u32> = (0..x.n_rows() as u32)
        .filter(|&r| weights[r as usize] > 0)
        .collect();
    let mut root_total = crit.empty();
    for &r in &root_rows {
        crit.add_sample(&mut root_total, r as usize, weights[r as usize]);
    }
    nodes.push(Node::Leaf(root_total.clone()));
    let mut open = vec![Open {
        node: 0,
        depth: 0,
        rows: root_rows,
        total: root_total,
        splittable: false,
        baseline: None,
        best: None,
    }];

    // Scratch space indexed by open slot.
    let mut stamp: Vec<usize> = Vec::new();
    let mut nz: Vec<C::Acc> = Vec::new();
    let mut left: Vec<C::Acc> = Vec::new();
    let mut zero: Vec<C::Acc> = Vec::new();
    let mut last: Vec<Option<f64>> = Vec::new();
    let mut touched: Vec<usize> = Vec::new();
    let mut feature_mark = vec![usize::MAX; n_features];

    while !open.is_empty() {
        let k = open.len();
        stamp.clear();
        stamp.resize(k, usize::MAX);
        nz.clear();
        nz.resize(k, crit.empty());
        left.clear();
        left.resize(k, crit.empty());
        zero.clear();
        zero.resize(k, crit.empty());
        last.clear();
        last.resize(k, None);

        // Per-feature list of slots allowed to use it (subsampling only).
        let mut allowed: Option<Vec<Vec<u32>>> =
            params.max_features.map(|_| vec![Vec::new(); n_features]);
        for (slot, o) in open.iter_mut().enumerate() {
            o.splittable = o.depth < params.max_depth
                && crit.weight(&o.total) >= 2 * params.min_leaf.max(1)
                && !crit.is_pure(&o.total);
            if !o.splittable {
                continue;
            }
            o.baseline = Some(crit.parent_score(&o.total));
            for &r in &o.rows {
                node_of[r as usize] = slot as u32;
            }
            if let (Some(m), Some(allowed)) = (params.max_features, allowed.as_mut()) {
                let mut present = Vec::new();
                for &r in &o.rows {
                    for &c in x.row(r as usize).0 {
                        if feature_mark[c as usize] != slot {
                            feature_mark[c as usize] = slot;
                            present.push(c);
                        }
                    }
                }
                present.sort_unstable();
                let rng = rng
                    .as_deref_mut()
                    .expect("feature subsampling needs a generator");
                rng::shuffle(rng, &mut present);
                for &c in present.iter().take(m) {
                    allowed[c as usize].push(slot as u32);
                }
            }
        }
        for m in feature_mark.iter_mut() {
            *m = usize::MAX;
        }
        let mut slot_allowed = vec![params.max_features.is_none(); k];

        for f in 0..n_features {
            if let Some(allowed) = &allowed {
                if allowed[f].is_empty() {
                    continue;
                }
                for &s in &allowed[f] {
                    slot_allowed[s as usize] = true;
                }
            }
            touched.clear();
            let col = &columns.cols[f];
            for &(_, r) in col {
                let slot = node_of[r as usize];
                if slot == NONE || !slot_allowed[slot as usize] {
                    continue;
                }
                let slot = slot as usize;
                if stamp[slot] != f {
                    stamp[slot] = f;
                    touched.push(slot);
                    nz[slot] = crit.empty();
                }
                crit.add_sample(&mut nz[slot], r as usize, weights[r as usize]);
            }
            for &slot in &touched {
                zero[slot] = crit.diff(&open[slot].total, &nz[slot]);
                left[slot] = crit.empty();
                last[slot] = None;
            }
            let evaluate = |thr: f64, left_acc: &C::Acc, o: &mut Open<C::Acc, C::Score>| {
                let right = crit.diff(&o.total, left_acc);
                if crit.weight(left_acc) < params.min_leaf || crit.weight(&right) < params.min_leaf
                {
                    return;
                }
                let score = crit.split_score(left_acc, &right);
                let beats_parent = o.baseline.as_ref().is_some_and(|b| crit.better(&score, b));
                let beats_best = o.best.as_ref().is_none_or(|b| crit.better(&score, &b.0));
                if beats_parent && beats_best {
                    o.best = Some((score, f, thr));
                }
            };
            let split_at = col.partition_point(|e| e.0 < 0.0);
            let process = |range: &[(f64, u32)],
                           left: &mut Vec<C::Acc>,
                           last: &mut Vec<Option<f64>>,
                           open: &mut Vec<Open<C::Acc, C::Score>>| {
                for &(v, r) in range {
                    let slot = node_of[r as usize];
                    if slot == NONE || !slot_allowed[slot as usize] {
                        continue;
                    }
                    let slot = slot as usize;
                    if let Some(l) = last[slot] {
                        if l < v {
                            evaluate(threshold_between(l, v), &left[slot], &mut open[slot]);
                        }
                    }
                    crit.add_sample(&mut left[slot], r as usize, weights[r as usize]);
                    last[slot] = Some(v);
                }
            };
            process(&col[..split_at], &mut left, &mut last, &mut open);
            for &slot in &touched {
                if crit.weight(&zero[slot]) == 0 {
                    continue;
                }
                if let Some(l) = last[slot] {
                    evaluate(threshold_between(l, 0.0), &left[slot], &mut open[slot]);
                }
                crit.add(&mut left[slot], &zero[slot]);
                last[slot] = Some(0.0);
            }
            process(&col[split_at..], &mut left, &mut last, &mut open);

            if let Some(allowed) = &allowed {
                for &s in &allowed[f] {
                    slot_allowed[s as usize] = false;
                }
            }
        }

        let mut next = Vec::new();
        for o in open.drain(..) {
            for &r in &o.rows {
                node_of[r as usize] = NONE;
            }
            let Some((_, feature, threshold)) = o.best else {
                nodes[o.node] = Node::Leaf(o.total);
                continue;
            };
            let (mut lrows, mut rrows) = (Vec::new(), Vec::new());
            let (mut ltotal, mut rtotal) = (crit.empty(), crit.empty());
            for &r in &o.rows {
                let w = weights[r as usize];
                if x.get(r as usize, feature) <= threshold {
                    lrows.push(r);
                    crit.add_sample(&mut ltotal, r as usize, w);
                } else {
                    rrows.push(r);
                    crit.add_sample(&mut rtotal, r as usize, w);
                }
            }
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf(ltotal.clone()));
            nodes.push(Node::Leaf(rtotal.clone()));
            nodes[o.node] = Node::Split {
                feature,
                threshold,
                left: l,
                right: r,
            };
            let depth = o.depth + 1;
            next.push(Open {
                node: l,
                depth,
                rows: lrows,
                total: ltotal,
                splittable: false,
                baseline: None,
                best: None,
            });
            next.push(Open {
                node: r,
                depth,
                rows: rrows,
                total: rtotal,
                splittable: false,
                baseline: None,
                best: None,
            });
        }
        open = next;
    }
    nodes
}

/// Class counts with the running sum of squared counts.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ClassAcc {
    pub counts: Vec<u64>,
    n: u64,
    sumsq: u128,
}

/// Gini impurity on class labels. Minimizing the weighted child impurity
/// is the same as maximizing `S_L/N_L + S_R/N_R` with `S` the sum of
/// squared class counts; scores are compared exactly as fractions.
pub(crate) struct Gini<'a> {
    pub labels: &'a [usize],
    pub classes: usize,
}

fn sumsq(counts: &[u64]) -> u128 {
    counts.iter().map(|&c| c as u128 * c as u128).sum()
}

impl Criterion for Gini<'_> {
    type Acc = ClassAcc;
    type Score = (u128, u128);

    fn empty(&self) -> ClassAcc {
        ClassAcc {
            counts: vec![0; self.classes],
            n: 0,
            sumsq: 0,
        }
    }

    fn add_sample(&self, acc: &mut ClassAcc, row: usize, weight: u32) {
        let c = &mut acc.counts[self.labels[row]];
        let (old, w) = (*c as u128, weight as u128);
        acc.sumsq += (old + w) * (old + w) - old * old;
        *c += weight as u64;
        acc.n += weight as u64;
    }

    fn add(&self, acc: &mut ClassAcc, other: &ClassAcc) {
        for (a, b) in acc.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        acc.n += other.n;
        acc.sumsq = sumsq(&acc.counts);
    }

    fn diff(&self, total: &ClassAcc, part: &ClassAcc) -> ClassAcc {
        let counts: Vec<u64> = total
            .counts
            .iter()
            .zip(&part.counts)
            .map(|(a, b)| a - b)
            .collect();
        ClassAcc {
            sumsq: sumsq(&counts),
            n: total.n - part.n,
            counts,
        }
    }

    fn weight(&self, acc: &ClassAcc) -> u64 {
        acc.n
    }

    fn is_pure(&self, acc: &ClassAcc) -> bool {
        acc.counts.iter().filter(|&&c| c > 0).count() <= 1
    }

    fn split_score(&self, l: &ClassAcc, r: &ClassAcc) -> (u128, u128) {
        let (nl, nr) = (l.n as u128, r.n as u128);
        (l.sumsq * nr + r.sumsq * nl, nl * nr)
    }

    fn parent_score(&self, total: &ClassAcc) -> (u128, u128) {
        (total.sumsq, total.n as u128)
    }

    fn better(&self, a: &(u128, u128), b: &(u128, u128)) -> bool {
        a.0 * b.1 > b.0 * a.1
    }
}

/// Residual sums for boosting trees: squared-error split gain, Newton leaf.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ResidualAcc {
    pub sum: f64,
    pub hess: f64,
    pub n: u64,
}

pub(crate) struct SquaredError<'a> {
    pub residuals: &'a [f64],
    pub hessians: &'a [f64],
}

impl Criterion for SquaredError<'_> {
    type Acc = ResidualAcc;
    type Score = f64;

    fn empty(&self) -> ResidualAcc {
        ResidualAcc {
            sum: 0.0,
            hess: 0.0,
            n: 0,
        }
    }

    fn add_sample(&self, acc: &mut ResidualAcc, row: usize, weight: u32) {
        acc.sum += weight as f64 * self.residuals[row];
        acc.hess += weight as f64 * self.hessians[row];
        acc.n += weight as u64;
    }

    fn add(&self, acc: &mut ResidualAcc, other: &ResidualAcc) {
        acc.sum += other.sum;
        acc.hess += other.hess;
        acc.n += other.n;
    }

    fn diff(&self, total: &ResidualAcc, part: &ResidualAcc) -> ResidualAcc {
        ResidualAcc {
            sum: total.sum - part.sum,
            hess: total.hess - part.hess,
            n: total.n - part.n,
        }
    }

    fn weight(&self, acc: &ResidualAcc) -> u64 {
        acc.n
    }

    fn is_pure(&self, _: &ResidualAcc) -> bool {
        false
    }

    fn split_score(&self, l: &ResidualAcc, r: &ResidualAcc) -> f64 {
        l.sum * l.sum / l.n as f64 + r.sum * r.sum / r.n as f64
    }

    fn parent_score(&self, total: &ResidualAcc) -> f64 {
        total.sum * total.sum / total.n as f64
    }

    fn better(&self, a: &f64, b: &f64) -> bool {
        *a - *b > 1e-12 * (1.0 + b.abs())
    }
}
