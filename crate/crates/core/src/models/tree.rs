//! Depth-limited regression trees with exact greedy split search.

use ndarray::ArrayView2;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Largest feature index referenced, if any split exists.
    pub fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature, left, right, ..
            } => [Some(*feature), left.max_feature(), right.max_feature()]
                .into_iter()
                .flatten()
                .max(),
        }
    }
}

/// Per-feature row orderings, sorted by value (ties by row index). Built
/// once per training run and shared by every tree.
pub(crate) struct SortedColumns {
    orders: Vec<Vec<usize>>,
}

impl SortedColumns {
    pub(crate) fn new(x: ArrayView2<f64>) -> Self {
        let orders = x
            .columns()
            .into_iter()
            .map(|col| {
                let mut idx: Vec<usize> = (0..col.len()).collect();
                idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { orders }
    }
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Midpoint that still separates `lo` from `hi` under `x <= t`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Grows one tree on `targets` (residuals); leaf values come from `leaf_value`
/// evaluated on the rows reaching the leaf.
pub(crate) struct TreeBuilder<'a, F: Fn(&[usize]) -> f64> {
    pub x: ArrayView2<'a, f64>,
    pub sorted: &'a SortedColumns,
    pub targets: &'a [f64],
    pub params: &'a TreeParams,
    pub leaf_value: F,
}

impl<F: Fn(&[usize]) -> f64> TreeBuilder<'_, F> {
    pub(crate) fn build(&self, rows: Vec<usize>) -> TreeNode {
        let mut member = vec![false; self.x.nrows()];
        self.grow(rows, 0, &mut member)
    }

    fn grow(&self, rows: Vec<usize>, depth: usize, member: &mut [bool]) -> TreeNode {
        let min_leaf = self.params.min_samples_leaf.max(1);
        if depth >= self.params.max_depth || rows.len() < 2 * min_leaf {
            return TreeNode::Leaf {
                value: (self.leaf_value)(&rows),
            };
        }
        let Some(best) = self.best_split(&rows, member, min_leaf) else {
            return TreeNode::Leaf {
                value: (self.leaf_value)(&rows),
            };
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.x[[r, best.feature]] <= best.threshold);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.grow(left, depth + 1, member)),
            right: Box::new(self.grow(right, depth + 1, member)),
        }
    }

    /// Highest variance-reduction split; ties keep the lowest feature index,
    /// then the lowest threshold.
    fn best_split(&self, rows: &[usize], member: &mut [bool], min_leaf: usize) -> Option<BestSplit> {
        for &r in rows {
            member[r] = true;
        }
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| self.targets[r]).sum();
        let parent_score = total * total / n as f64;
        let mut best: Option<BestSplit> = None;

        for (feature, order) in self.sorted.orders.iter().enumerate() {
            let mut left_sum = 0.0;
            let mut prev: Option<f64> = None;
            for (left_n, &r) in order.iter().filter(|&&r| member[r]).enumerate() {
                let v = self.x[[r, feature]];
                if let Some(p) = prev {
                    let right_n = n - left_n;
                    if v > p && left_n >= min_leaf && right_n >= min_leaf {
                        let right_sum = total - left_sum;
                        let gain =
                            left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n as f64 - parent_score;
                        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                            best = Some(BestSplit {
                                gain,
                                feature,
                                threshold: midpoint(p, v),
                            });
                        }
                    }
                }
                left_sum += self.targets[r];
                prev = Some(v);
            }
        }

        for &r in rows {
            member[r] = false;
        }
        best
    }
}
