use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Growth limits for one regression tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per node; `None` tries all.
    pub mtry: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 5,
            mtry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A CART regression tree. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Training rows (with bootstrap multiplicity) reaching each node.
    pub node_sample_counts: Vec<usize>,
    /// Mean training target at each node.
    pub node_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    /// Rows with `x <= threshold` in sorted order.
    n_left: usize,
}

impl Tree {
    /// A tree that always predicts `value`.
    pub fn leaf(value: f64, count: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
            node_sample_counts: vec![count],
            node_values: vec![value],
        }
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Grow a tree on `rows` (indices into `x`, repeats allowed).
    ///
    /// Returns the tree and the total squared-error decrease credited to
    /// each feature.
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[f64],
        rows: Vec<usize>,
        params: &TreeParams,
        rng: &mut impl Rng,
    ) -> (Tree, Vec<f64>) {
        let mut tree = Tree {
            nodes: Vec::new(),
            node_sample_counts: Vec::new(),
            node_values: Vec::new(),
        };
        let mut gains = vec![0.0; x.ncols()];
        tree.grow(x, y, rows, 0, params, rng, &mut gains);
        (tree, gains)
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        &mut self,
        x: ArrayView2<f64>,
        y: &[f64],
        rows: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        rng: &mut impl Rng,
        gains: &mut [f64],
    ) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| y[r]).sum();
        let mean = if n > 0 { sum / n as f64 } else { 0.0 };
        self.nodes.push(Node::Leaf { value: mean });
        self.node_sample_counts.push(n);
        self.node_values.push(mean);

        let depth_ok = params.max_depth.is_none_or(|d| depth < d);
        let min_leaf = params.min_leaf.max(1);
        if !depth_ok || n < 2 * min_leaf {
            return id;
        }
        let Some(best) = best_split(x, y, &rows, params, min_leaf, rng) else {
            return id;
        };
        gains[best.feature] += best.gain;
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| x[[r, best.feature]] <= best.threshold);
        debug_assert_eq!(left_rows.len(), best.n_left);
        let left = self.grow(x, y, left_rows, depth + 1, params, rng, gains);
        let right = self.grow(x, y, right_rows, depth + 1, params, rng, gains);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

fn best_split(
    x: ArrayView2<f64>,
    y: &[f64],
    rows: &[usize],
    params: &TreeParams,
    min_leaf: usize,
    rng: &mut impl Rng,
) -> Option<BestSplit> {
    let p = x.ncols();
    let mtry = params.mtry.unwrap_or(p).clamp(1, p);
    let mut features: Vec<usize> = if mtry == p {
        (0..p).collect()
    } else {
        index::sample(rng, p, mtry).into_vec()
    };
    features.sort_unstable();

    let n = rows.len();
    let total: f64 = rows.iter().map(|&r| y[r]).sum();
    let sse: f64 = {
        let mean = total / n as f64;
        rows.iter().map(|&r| (y[r] - mean).powi(2)).sum()
    };
    let tol = 1e-12 * (1.0 + sse);
    let mean = total / n as f64;

    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for &f in &features {
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += y[order[i]] - mean;
            let n_left = i + 1;
            if n_left < min_leaf {
                continue;
            }
            if n - n_left < min_leaf {
                break;
            }
            let (a, b) = (x[[order[i], f]], x[[order[i + 1], f]]);
            if a == b {
                continue;
            }
            // centred sums: the right sum is the negated left sum
            let gain = left_sum * left_sum * (1.0 / n_left as f64 + 1.0 / (n - n_left) as f64);
            if gain > tol && best.is_none_or(|b| gain > b.gain + tol) {
                let mut threshold = 0.5 * (a + b);
                if threshold >= b {
                    threshold = a;
                }
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    gain,
                    n_left,
                });
            }
        }
    }
    best
}
