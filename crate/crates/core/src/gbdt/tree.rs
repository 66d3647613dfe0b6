use crate::dataset::{round_sig9, RankingDataset};
use crate::error::{Error, Result};

/// Upper bound on histogram bins per feature.
pub const MAX_BINS: usize = 4096;

/// Per-column bin codes. Columns with at most `MAX_BINS` distinct values get
/// one bin per value; others are cut into equal-frequency bins that never
/// separate equal values.
#[derive(Debug, Clone)]
struct ColumnBins {
    codes: Vec<u16>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ColumnBins {
    fn new(col: &[f64]) -> Self {
        let n = col.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
        let mut distinct = 0;
        for k in 0..n {
            if k == 0 || col[order[k] as usize] != col[order[k - 1] as usize] {
                distinct += 1;
            }
        }
        let target = if distinct <= MAX_BINS { 1 } else { n.div_ceil(MAX_BINS - 1) };
        let mut codes = vec![0u16; n];
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        let mut in_bin = 0;
        for k in 0..n {
            let v = col[order[k] as usize];
            let new_value = k == 0 || v != col[order[k - 1] as usize];
            if k == 0 || (new_value && in_bin >= target) {
                lower.push(v);
                upper.push(v);
                in_bin = 0;
            }
            *upper.last_mut().expect("bin open") = v;
            in_bin += 1;
            codes[order[k] as usize] = (lower.len() - 1) as u16;
        }
        ColumnBins { codes, lower, upper }
    }

    fn len(&self) -> usize {
        self.lower.len()
    }
}

/// Column-major feature matrix with binned columns for split finding.
#[derive(Debug, Clone)]
pub struct ColumnMatrix {
    n_rows: usize,
    n_cols: usize,
    cols: Vec<f64>,
    bins: Vec<ColumnBins>,
}

impl ColumnMatrix {
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>, n_cols: usize) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n_rows = rows.len();
        let mut cols = vec![0.0; n_rows * n_cols];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Dimension {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| v.is_nan()) {
                return Err(Error::Precondition(format!("row {r} holds {v}")));
            }
            for (c, &v) in row.iter().enumerate() {
                cols[c * n_rows + r] = v;
            }
        }
        let bins = (0..n_cols)
            .map(|c| ColumnBins::new(&cols[c * n_rows..(c + 1) * n_rows]))
            .collect();
        Ok(ColumnMatrix {
            n_rows,
            n_cols,
            cols,
            bins,
        })
    }

    /// Rows in dataset order (query by query).
    pub fn from_dataset(dataset: &RankingDataset) -> Self {
        let rows = dataset
            .groups()
            .iter()
            .flat_map(|g| g.instances.iter().map(|i| i.features.values()));
        Self::from_rows(rows, dataset.num_features()).expect("dataset rows conform to registry")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.cols[col * self.n_rows..(col + 1) * self.n_rows]
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.cols[col * self.n_rows + row]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_cols).map(|c| self.value(row, c)).collect()
    }

    /// Number of histogram bins of a column.
    pub fn num_bins(&self, col: usize) -> usize {
        self.bins[col].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// `feature` is a 1-based feature id; `x[feature] <= threshold` goes left.
    Split {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

/// Binary regression tree stored in pre-order; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Accepts nodes in any layout as long as they form one tree rooted at 0.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Model("tree without nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(Error::Model(format!("node {i} reached twice")));
            }
            seen[i] = true;
            match nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature == 0 || !threshold.is_finite() {
                        return Err(Error::Model(format!("invalid split at node {i}")));
                    }
                    for c in [right, left] {
                        if c >= nodes.len() {
                            return Err(Error::Model(format!("child {c} out of range")));
                        }
                        stack.push(c);
                    }
                }
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::Model(format!("non-finite leaf at node {i}")));
                    }
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::Model(format!("node {orphan} unreachable")));
        }
        Ok(RegressionTree { nodes }.into_preorder())
    }

    fn into_preorder(self) -> Self {
        let mut out = Vec::with_capacity(self.nodes.len());
        fn visit(src: &[Node], i: usize, out: &mut Vec<Node>) -> usize {
            let at = out.len();
            match src[i] {
                Node::Leaf { value } => out.push(Node::Leaf { value }),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push(Node::Leaf { value: 0.0 });
                    let l = visit(src, left, out);
                    let r = visit(src, right, out);
                    out[at] = Node::Split {
                        feature,
                        threshold,
                        left: l,
                        right: r,
                    };
                }
            }
            at
        }
        visit(&self.nodes, 0, &mut out);
        RegressionTree { nodes: out }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn max_feature_id(&self) -> u32 {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::Split { feature, .. } => *feature,
                Node::Leaf { .. } => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// Index of the leaf node reached by `x`.
    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize - 1] <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    #[inline]
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    fn leaf_index_in(&self, data: &ColumnMatrix, row: usize) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if data.value(row, feature as usize - 1) <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn evaluate_row(&self, data: &ColumnMatrix, row: usize) -> f64 {
        match self.nodes[self.leaf_index_in(data, row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub(crate) fn leaf_of_row(&self, data: &ColumnMatrix, row: usize) -> usize {
        self.leaf_index_in(data, row)
    }

    pub(crate) fn map_leaves(&mut self, mut f: impl FnMut(usize, f64) -> f64) {
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if let Node::Leaf { value } = n {
                *value = f(i, *value);
            }
        }
    }
}

/// A split threshold strictly separating `lo < hi`, preferring short decimals
/// so that stored models reproduce training-time routing exactly.
pub(crate) fn split_threshold(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    for candidate in [round_sig9(mid), round_sig9(lo), mid] {
        if candidate >= lo && candidate < hi {
            return candidate;
        }
    }
    lo
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    /// Position in the builder's feature list.
    slot: usize,
    /// Last bin routed left.
    bin: u16,
    /// Largest left value and smallest right value.
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Bin {
    sum: f64,
    weight: f64,
    count: u32,
}

#[derive(Debug, Clone)]
struct LeafWork {
    node: usize,
    start: usize,
    end: usize,
    candidate: Option<Candidate>,
    /// Per-feature histograms, kept while the leaf may still split.
    hist: Vec<Bin>,
}

/// Reusable state for fitting many trees on one matrix.
pub(crate) struct TreeBuilder<'a> {
    data: &'a ColumnMatrix,
    scratch: Vec<u32>,
    gathered: Vec<(f64, f64)>,
}

impl<'a> TreeBuilder<'a> {
    pub(crate) fn new(data: &'a ColumnMatrix) -> Self {
        TreeBuilder {
            data,
            scratch: Vec::new(),
            gathered: Vec::new(),
        }
    }

    /// `rows` must be distinct; `targets`/`weights` are indexed by row.
    pub(crate) fn fit(
        &mut self,
        rows: &[usize],
        targets: &[f64],
        weights: &[f64],
        num_leaves: usize,
        min_instances: usize,
        features: &[usize],
    ) -> RegressionTree {
        let min_instances = min_instances.max(1);
        let mut order: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
        order.sort_unstable();
        let mut nodes = vec![Node::Leaf {
            value: leaf_value(&order, targets, weights),
        }];
        let root_hist = self.histogram(&order, targets, weights, features);
        let mut root = LeafWork {
            node: 0,
            start: 0,
            end: order.len(),
            candidate: None,
            hist: root_hist,
        };
        self.evaluate(&mut root, &order, targets, weights, min_instances, features);
        let mut leaves = vec![root];

        while leaves.len() < num_leaves.max(1) {
            let mut pick: Option<usize> = None;
            for (i, leaf) in leaves.iter().enumerate() {
                if let Some(c) = leaf.candidate {
                    if pick.is_none_or(|p| c.gain > leaves[p].candidate.unwrap().gain) {
                        pick = Some(i);
                    }
                }
            }
            let Some(pick) = pick else { break };
            let mut leaf = std::mem::replace(
                &mut leaves[pick],
                LeafWork {
                    node: 0,
                    start: 0,
                    end: 0,
                    candidate: None,
                    hist: Vec::new(),
                },
            );
            let c = leaf.candidate.expect("picked leaf has a split");
            let codes = &self.data.bins[features[c.slot]].codes;
            let mid = leaf.start + self.partition(&mut order[leaf.start..leaf.end], |r| codes[r as usize] <= c.bin);
            let left_node = nodes.len();
            nodes.push(Node::Leaf {
                value: leaf_value(&order[leaf.start..mid], targets, weights),
            });
            nodes.push(Node::Leaf {
                value: leaf_value(&order[mid..leaf.end], targets, weights),
            });
            nodes[leaf.node] = Node::Split {
                feature: features[c.slot] as u32 + 1,
                threshold: split_threshold(c.lo, c.hi),
                left: left_node,
                right: left_node + 1,
            };
            // Histogram the smaller child; the sibling is the difference.
            let left_smaller = mid - leaf.start <= leaf.end - mid;
            let small_rows = if left_smaller { &order[leaf.start..mid] } else { &order[mid..leaf.end] };
            let small = self.histogram(small_rows, targets, weights, features);
            for (p, s) in leaf.hist.iter_mut().zip(&small) {
                p.sum -= s.sum;
                p.weight -= s.weight;
                p.count -= s.count;
            }
            let (left_hist, right_hist) = if left_smaller { (small, leaf.hist) } else { (leaf.hist, small) };
            let mut left = LeafWork {
                node: left_node,
                start: leaf.start,
                end: mid,
                candidate: None,
                hist: left_hist,
            };
            let mut right = LeafWork {
                node: left_node + 1,
                start: mid,
                end: leaf.end,
                candidate: None,
                hist: right_hist,
            };
            self.evaluate(&mut left, &order, targets, weights, min_instances, features);
            self.evaluate(&mut right, &order, targets, weights, min_instances, features);
            leaves[pick] = left;
            leaves.push(right);
        }
        RegressionTree { nodes }.into_preorder()
    }

    /// Stable in-place partition; returns the size of the `true` side.
    fn partition(&mut self, range: &mut [u32], go_left: impl Fn(u32) -> bool) -> usize {
        self.scratch.clear();
        let mut w = 0;
        for k in 0..range.len() {
            let r = range[k];
            if go_left(r) {
                range[w] = r;
                w += 1;
            } else {
                self.scratch.push(r);
            }
        }
        range[w..].copy_from_slice(&self.scratch);
        w
    }

    fn histogram(&mut self, rows: &[u32], targets: &[f64], weights: &[f64], features: &[usize]) -> Vec<Bin> {
        self.gathered.clear();
        self.gathered
            .extend(rows.iter().map(|&r| (weights[r as usize] * targets[r as usize], weights[r as usize])));
        let offsets = self.offsets(features);
        let mut hist = vec![Bin::default(); offsets[features.len()]];
        for (slot, &f) in features.iter().enumerate() {
            let codes = &self.data.bins[f].codes;
            let h = &mut hist[offsets[slot]..offsets[slot + 1]];
            for (&r, &(tw, w)) in rows.iter().zip(&self.gathered) {
                let b = &mut h[codes[r as usize] as usize];
                b.sum += tw;
                b.weight += w;
                b.count += 1;
            }
        }
        hist
    }

    /// Start of each feature's bins in a leaf histogram, plus the total.
    fn offsets(&self, features: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(features.len() + 1);
        out.push(0);
        for &f in features {
            out.push(out[out.len() - 1] + self.data.bins[f].len());
        }
        out
    }

    /// Finds the leaf's best split; drops its histogram when none exists.
    fn evaluate(
        &self,
        leaf: &mut LeafWork,
        order: &[u32],
        targets: &[f64],
        weights: &[f64],
        min_instances: usize,
        features: &[usize],
    ) {
        leaf.candidate = self.best_split(leaf, order, targets, weights, min_instances, features);
        if leaf.candidate.is_none() {
            leaf.hist = Vec::new();
        }
    }

    fn best_split(
        &self,
        leaf: &LeafWork,
        order: &[u32],
        targets: &[f64],
        weights: &[f64],
        min_instances: usize,
        features: &[usize],
    ) -> Option<Candidate> {
        let n = leaf.end - leaf.start;
        if n < 2 * min_instances || features.is_empty() {
            return None;
        }
        let (mut s, mut w, mut sq) = (0.0, 0.0, 0.0);
        for &r in &order[leaf.start..leaf.end] {
            let (t, wt) = (targets[r as usize], weights[r as usize]);
            s += wt * t;
            w += wt;
            sq += wt * t * t;
        }
        if w <= 0.0 {
            return None;
        }
        let parent = s * s / w;
        let floor = 1e-12 * sq.max(f64::MIN_POSITIVE);
        let offsets = self.offsets(features);
        let mut best: Option<Candidate> = None;
        for (slot, &f) in features.iter().enumerate() {
            let bins = &self.data.bins[f];
            let h = &leaf.hist[offsets[slot]..offsets[slot + 1]];
            let (mut sl, mut wl, mut nl) = (0.0, 0.0, 0usize);
            let mut last: Option<usize> = None;
            for (b, bin) in h.iter().enumerate() {
                if bin.count == 0 {
                    continue;
                }
                if let Some(lb) = last {
                    if n - nl < min_instances {
                        break;
                    }
                    let wr = w - wl;
                    if nl >= min_instances && wl > 0.0 && wr > 0.0 {
                        let sr = s - sl;
                        let gain = sl * sl / wl + sr * sr / wr - parent;
                        if gain > floor && best.is_none_or(|c| gain > c.gain) {
                            best = Some(Candidate {
                                gain,
                                slot,
                                bin: lb as u16,
                                lo: bins.upper[lb],
                                hi: bins.lower[b],
                            });
                        }
                    }
                }
                sl += bin.sum;
                wl += bin.weight;
                nl += bin.count as usize;
                last = Some(b);
            }
        }
        best
    }
}

fn leaf_value(rows: &[u32], targets: &[f64], weights: &[f64]) -> f64 {
    let (mut s, mut w) = (0.0, 0.0);
    for &r in rows {
        s += weights[r as usize] * targets[r as usize];
        w += weights[r as usize];
    }
    if w > 0.0 {
        s / w
    } else {
        0.0
    }
}

/// Grows a tree best-first: the leaf whose best split most reduces weighted
/// squared error is expanded next, until `num_leaves` leaves exist or no split
/// leaves `min_instances` rows on both sides. Candidate thresholds are the
/// matrix bin boundaries, so every value gap is a candidate for columns with
/// at most `MAX_BINS` distinct values. Features are 0-based columns.
pub fn fit_regression_tree(
    data: &ColumnMatrix,
    rows: &[usize],
    targets: &[f64],
    weights: &[f64],
    num_leaves: usize,
    min_instances: usize,
    features: &[usize],
) -> Result<RegressionTree> {
    if targets.len() != data.n_rows() || weights.len() != data.n_rows() {
        return Err(Error::Dimension {
            expected: data.n_rows(),
            found: targets.len().min(weights.len()),
        });
    }
    if min_instances == 0 {
        return Err(Error::Precondition("min_instances must be at least 1".into()));
    }
    let mut seen = vec![false; data.n_rows()];
    for &r in rows {
        if r >= data.n_rows() || std::mem::replace(&mut seen[r], true) {
            return Err(Error::Precondition(format!("row {r} out of range or repeated")));
        }
        if !targets[r].is_finite() || !weights[r].is_finite() || weights[r] < 0.0 {
            return Err(Error::Precondition(format!("row {r} has an invalid target or weight")));
        }
    }
    if let Some(&f) = features.iter().find(|&&f| f >= data.n_cols()) {
        return Err(Error::Precondition(format!("feature column {f} out of range")));
    }
    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();
    Ok(TreeBuilder::new(data).fit(rows, targets, weights, num_leaves, min_instances, &features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[Vec<f64>]) -> ColumnMatrix {
        let n = rows[0].len();
        ColumnMatrix::from_rows(rows.iter().map(|r| r.as_slice()), n).unwrap()
    }

    #[test]
    fn constant_targets_give_one_leaf() {
        let m = matrix(&[vec![1.0, 5.0], vec![2.0, 4.0], vec![3.0, 3.0]]);
        let t = fit_regression_tree(&m, &[0, 1, 2], &[2.5; 3], &[1.0; 3], 7, 1, &[0, 1]).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 2.5 }]);
    }

    #[test]
    fn two_instances_split_exactly() {
        let m = matrix(&[vec![0.0], vec![1.0]]);
        let t = fit_regression_tree(&m, &[0, 1], &[1.5, -2.0], &[1.0; 2], 2, 1, &[0]).unwrap();
        assert_eq!(t.num_leaves(), 2);
        assert_eq!(t.evaluate(&[0.0]), 1.5);
        assert_eq!(t.evaluate(&[1.0]), -2.0);
        assert_eq!(
            t.nodes()[0],
            Node::Split {
                feature: 1,
                threshold: 0.5,
                left: 1,
                right: 2
            }
        );
    }

    #[test]
    fn too_few_rows_for_min_instances() {
        let m = matrix(&[vec![0.0], vec![1.0], vec![2.0]]);
        let t = fit_regression_tree(&m, &[0, 1, 2], &[0.0, 1.0, 2.0], &[1.0; 3], 4, 2, &[0]).unwrap();
        assert_eq!(t.num_leaves(), 1);
        assert_eq!(t.evaluate(&[0.0]), 1.0);
    }

    #[test]
    fn weighted_leaf_values() {
        let m = matrix(&[vec![0.0], vec![0.0], vec![1.0]]);
        let t = fit_regression_tree(&m, &[0, 1, 2], &[1.0, 4.0, 0.0], &[3.0, 1.0, 1.0], 2, 1, &[0]).unwrap();
        assert_eq!(t.evaluate(&[0.0]), 7.0 / 4.0);
    }

    #[test]
    fn respects_leaf_budget_and_min_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0] * 3.0 + r[1].sin()).collect();
        let m = matrix(&rows);
        let all: Vec<usize> = (0..300).collect();
        let t = fit_regression_tree(&m, &all, &targets, &[1.0; 300], 7, 20, &[0, 1, 2, 3]).unwrap();
        assert_eq!(t.num_leaves(), 7);
        let mut counts = std::collections::HashMap::new();
        for r in &rows {
            *counts.entry(t.leaf_index(r)).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 20));
    }

    #[test]
    fn from_nodes_rejects_bad_structures() {
        assert!(RegressionTree::from_nodes(vec![]).is_err());
        let cyc = vec![
            Node::Split { feature: 1, threshold: 0.0, left: 0, right: 1 },
            Node::Leaf { value: 0.0 },
        ];
        assert!(RegressionTree::from_nodes(cyc).is_err());
        let orphan = vec![Node::Leaf { value: 0.0 }, Node::Leaf { value: 1.0 }];
        assert!(RegressionTree::from_nodes(orphan).is_err());
    }

    #[test]
    fn wide_columns_are_binned_without_splitting_ties() {
        let col: Vec<f64> = (0..(3 * MAX_BINS as i64 * 2)).map(|i| (i / 3) as f64).collect();
        let bins = ColumnBins::new(&col);
        // 7 rows per bin rounds up to three whole tie groups.
        assert_eq!(col.len().div_ceil(MAX_BINS - 1), 7);
        assert_eq!(bins.len(), (2 * MAX_BINS).div_ceil(3));
        for r in 0..col.len() - 1 {
            if col[r] == col[r + 1] {
                assert_eq!(bins.codes[r], bins.codes[r + 1]);
            }
        }
        for b in 1..bins.len() {
            assert!(bins.upper[b - 1] < bins.lower[b]);
        }
        let narrow = ColumnBins::new(&[3.0, 1.0, 2.0, 1.0]);
        assert_eq!(narrow.codes, [2, 0, 1, 0]);
    }

    #[test]
    fn thresholds_separate_neighbours() {
        for (lo, hi) in [(1.0, 1.00000001), (0.1, 0.2), (-3.0, -2.999999999), (1e-300, 2e-300)] {
            let t = split_threshold(lo, hi);
            assert!(t >= lo && t < hi, "{lo} {hi} {t}");
        }
        assert_eq!(split_threshold(0.0, 1.0), 0.5);
    }
}
