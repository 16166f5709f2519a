//! Leaf-wise growth of a single tree over binned features.
//!
//! Every leaf carries `[lower, upper]` output bounds. A split on a feature
//! constrained `+1` is rejected unless `w_left <= w_right` (reversed for
//! `-1`), and its children inherit the bounds `[lower, mid]` / `[mid, upper]`
//! with `mid` the average of the two child weights. Every leaf value in the
//! left subtree of such a split is then `<= mid <=` every leaf value in the
//! right subtree, which makes the tree monotone in that feature. Missing
//! values ride along with whichever child they default to and are not ordered.

use crate::binning::{BinMapper, MISSING_BIN};
use crate::params::{GbdtParams, Monotone};
use crate::tree::{Node, Tree};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct GradStats {
    pub grad: f64,
    pub hess: f64,
    pub count: usize,
}

impl GradStats {
    fn add(&mut self, g: f64, h: f64) {
        self.grad += g;
        self.hess += h;
        self.count += 1;
    }

    fn plus(self, o: GradStats) -> GradStats {
        GradStats {
            grad: self.grad + o.grad,
            hess: self.hess + o.hess,
            count: self.count + o.count,
        }
    }

    fn minus(self, o: GradStats) -> GradStats {
        GradStats {
            grad: self.grad - o.grad,
            hess: self.hess - o.hess,
            count: self.count - o.count,
        }
    }
}

/// Newton leaf weight `-G / (H + lambda)` clipped into `bounds`.
pub(crate) fn leaf_weight(s: GradStats, lambda: f64, bounds: (f64, f64)) -> f64 {
    let denom = s.hess + lambda;
    let w = if denom > 0.0 { -s.grad / denom } else { 0.0 };
    w.clamp(bounds.0, bounds.1)
}

/// Splits must reduce the loss by more than this; smaller gains are rounding noise.
pub const MIN_SPLIT_GAIN: f64 = 1e-10;

/// Second-order loss reduction from assigning weight `w` to a node.
///
/// At the unconstrained optimum this is `G^2 / (2 (H + lambda))`.
pub(crate) fn weight_gain(s: GradStats, lambda: f64, w: f64) -> f64 {
    -(s.grad * w + 0.5 * (s.hess + lambda) * w * w)
}

#[derive(Debug, Clone)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub bin: usize,
    pub default_left: bool,
    pub gain: f64,
    pub left: GradStats,
    pub right: GradStats,
    pub left_weight: f64,
    pub right_weight: f64,
}

struct Leaf {
    node: usize,
    rows: Vec<u32>,
    weight: f64,
    bounds: (f64, f64),
    best: Option<SplitChoice>,
}

pub(crate) struct Grower<'a> {
    pub mapper: &'a BinMapper,
    /// Column-major bin codes.
    pub bins: &'a [Vec<u16>],
    pub params: &'a GbdtParams,
}

impl Grower<'_> {
    fn monotone(&self, f: usize) -> Monotone {
        self.params.monotone.get(f).copied().unwrap_or_default()
    }

    fn histogram(
        &self,
        f: usize,
        rows: &[u32],
        grad: &[f64],
        hess: &[f64],
    ) -> (Vec<GradStats>, GradStats) {
        let mut hist = vec![GradStats::default(); self.mapper.n_bins(f)];
        let mut missing = GradStats::default();
        let col = &self.bins[f];
        for &r in rows {
            let r = r as usize;
            let b = col[r];
            if b == MISSING_BIN {
                missing.add(grad[r], hess[r]);
            } else {
                hist[b as usize].add(grad[r], hess[r]);
            }
        }
        (hist, missing)
    }

    /// Best admissible split of a node, scanning features in index order and
    /// thresholds in ascending order; a candidate replaces the incumbent only
    /// on strictly larger gain.
    pub(crate) fn best_split(
        &self,
        rows: &[u32],
        total: GradStats,
        weight: f64,
        bounds: (f64, f64),
        grad: &[f64],
        hess: &[f64],
    ) -> Option<SplitChoice> {
        let lambda = self.params.l2_leaf_penalty;
        let min_leaf = self.params.min_samples_leaf;
        let parent_gain = weight_gain(total, lambda, weight);
        let mut best: Option<SplitChoice> = None;

        for f in 0..self.bins.len() {
            let n_bins = self.mapper.n_bins(f);
            if n_bins < 2 {
                continue;
            }
            let monotone = self.monotone(f);
            let (hist, missing) = self.histogram(f, rows, grad, hess);
            let mut cum = GradStats::default();
            // The top bin cannot be a threshold: its right side is empty.
            for (bin, h) in hist.iter().enumerate().take(n_bins - 1) {
                cum = cum.plus(*h);
                let directions: &[bool] = if missing.count > 0 {
                    &[true, false]
                } else {
                    &[true]
                };
                for &default_left in directions {
                    let left = if default_left { cum.plus(missing) } else { cum };
                    let right = total.minus(left);
                    if left.count < min_leaf || right.count < min_leaf {
                        continue;
                    }
                    let wl = leaf_weight(left, lambda, bounds);
                    let wr = leaf_weight(right, lambda, bounds);
                    let ordered = match monotone {
                        Monotone::Increasing => wl <= wr,
                        Monotone::Decreasing => wl >= wr,
                        Monotone::None => true,
                    };
                    if !ordered {
                        continue;
                    }
                    let gain = weight_gain(left, lambda, wl) + weight_gain(right, lambda, wr)
                        - parent_gain;
                    if !(gain > MIN_SPLIT_GAIN) {
                        continue;
                    }
                    if best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(SplitChoice {
                            feature: f,
                            bin,
                            default_left,
                            gain,
                            left,
                            right,
                            left_weight: wl,
                            right_weight: wr,
                        });
                    }
                }
            }
        }
        best
    }

    /// Grows one tree on the rows `0..n` and returns it with the leaf weight
    /// assigned to every training row.
    pub(crate) fn grow(&self, grad: &[f64], hess: &[f64]) -> (Tree, Vec<f64>) {
        let lambda = self.params.l2_leaf_penalty;
        let n = grad.len();
        let rows: Vec<u32> = (0..n as u32).collect();
        let mut stats = GradStats::default();
        for r in 0..n {
            stats.add(grad[r], hess[r]);
        }
        let bounds = (f64::NEG_INFINITY, f64::INFINITY);
        let weight = leaf_weight(stats, lambda, bounds);
        let best = self.best_split(&rows, stats, weight, bounds, grad, hess);

        let mut nodes = vec![Node::Leaf { value: weight }];
        let mut leaves = vec![Leaf {
            node: 0,
            rows,
            weight,
            bounds,
            best,
        }];

        while leaves.len() < self.params.max_leaves {
            // Highest-gain leaf first; ties go to the oldest leaf.
            let mut pick: Option<(usize, f64)> = None;
            for (i, leaf) in leaves.iter().enumerate() {
                if let Some(s) = &leaf.best {
                    if pick.is_none_or(|(_, g)| s.gain > g) {
                        pick = Some((i, s.gain));
                    }
                }
            }
            let Some((idx, _)) = pick else { break };
            let leaf = leaves.remove(idx);
            let split = leaf.best.expect("picked leaf has a split");

            let col = &self.bins[split.feature];
            let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&r| {
                let b = col[r as usize];
                if b == MISSING_BIN {
                    split.default_left
                } else {
                    (b as usize) <= split.bin
                }
            });
            debug_assert_eq!(left_rows.len(), split.left.count);

            let mid = 0.5 * (split.left_weight + split.right_weight);
            let (lo, hi) = leaf.bounds;
            let (left_bounds, right_bounds) = match self.monotone(split.feature) {
                Monotone::Increasing => ((lo, mid), (mid, hi)),
                Monotone::Decreasing => ((mid, hi), (lo, mid)),
                Monotone::None => ((lo, hi), (lo, hi)),
            };

            let left_node = nodes.len();
            let right_node = left_node + 1;
            nodes.push(Node::Leaf {
                value: split.left_weight,
            });
            nodes.push(Node::Leaf {
                value: split.right_weight,
            });
            nodes[leaf.node] = Node::Split {
                feature: split.feature as u32,
                threshold: self.mapper.threshold(split.feature, split.bin),
                default_left: split.default_left,
                left: left_node as u32,
                right: right_node as u32,
                gain: split.gain,
            };

            for (node, rows, stats, weight, bounds) in [
                (
                    left_node,
                    left_rows,
                    split.left,
                    split.left_weight,
                    left_bounds,
                ),
                (
                    right_node,
                    right_rows,
                    split.right,
                    split.right_weight,
                    right_bounds,
                ),
            ] {
                let best = if rows.len() >= 2 * self.params.min_samples_leaf {
                    self.best_split(&rows, stats, weight, bounds, grad, hess)
                } else {
                    None
                };
                leaves.push(Leaf {
                    node,
                    rows,
                    weight,
                    bounds,
                    best,
                });
            }
        }

        let mut row_values = vec![0.0; n];
        for leaf in &leaves {
            for &r in &leaf.rows {
                row_values[r as usize] = leaf.weight;
            }
        }
        (Tree { nodes }, row_values)
    }
}
