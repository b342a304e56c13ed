//! CART regression forests and recursive feature elimination.

mod rfe;
mod tree;

pub use rfe::{
    eliminate, run_rfe, stratified_folds, Elimination, HoldoutReport, RfeConfig, RfeResult,
    DEFAULT_GRID,
};
pub use tree::{Node, Tree, TreeParams};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` means ⌈p/3⌉.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 5,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format_version: u32,
    pub trees: Vec<Tree>,
    /// Normalized squared-error decrease per feature; all zero when no
    /// tree split.
    pub feature_importances: Vec<f64>,
    pub n_features: usize,
    pub params: ForestParams,
}

/// Fit a random forest. Tree `t` draws from substream `(seed, t)`, so the
/// result does not depend on thread scheduling.
pub fn fit_forest(x: ArrayView2<f64>, y: &[f64], params: &ForestParams) -> Result<Forest> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::Config("forest needs at least one row".into()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("target row {i}")));
    }
    if params.n_trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    let p = x.ncols();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        mtry: Some(params.mtry.unwrap_or(p.div_ceil(3)).max(1)),
    };
    let fitted: Vec<(Tree, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::substream(params.seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            Tree::fit(x, y, rows, &tree_params, &mut r)
        })
        .collect();

    let mut importances = vec![0.0; p];
    for (_, gains) in &fitted {
        for (acc, g) in importances.iter_mut().zip(gains) {
            *acc += g;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    } else {
        log::warn!("no tree found a useful split; importances are all zero");
    }
    Ok(Forest {
        format_version: FOREST_FORMAT_VERSION,
        trees: fitted.into_iter().map(|(t, _)| t).collect(),
        feature_importances: importances,
        n_features: p,
        params: *params,
    })
}

impl Forest {
    pub fn from_trees(trees: Vec<Tree>, n_features: usize) -> Self {
        Self {
            format_version: FOREST_FORMAT_VERSION,
            trees,
            feature_importances: vec![0.0; n_features],
            n_features,
            params: ForestParams::default(),
        }
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64)
    }

    pub fn predict_rows(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        x.rows().into_iter().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text)?;
        if f.format_version != FOREST_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "forest format_version {} is not supported",
                f.format_version
            )));
        }
        Ok(f)
    }
}

/// Mean squared error of predictions against targets.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: y_hat.len(),
        });
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

/// Share of rows where the prediction thresholded at 0.5 matches the target.
pub fn accuracy_at_half(y: &[f64], y_hat: &[f64]) -> f64 {
    let hits = y
        .iter()
        .zip(y_hat)
        .filter(|(a, b)| (**a >= 0.5) == (**b >= 0.5))
        .count();
    hits as f64 / y.len().max(1) as f64
}

pub(crate) fn take_rows(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(ndarray::Axis(0), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn planted(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut r = rng::seeded(seed);
        let x = Array2::from_shape_fn((n, p), |_| r.random::<f64>());
        let y = x.column(2).to_vec();
        (x, y)
    }

    #[test]
    fn planted_feature_dominates_importance() {
        let (x, y) = planted(200, 6, 1);
        let params = ForestParams { n_trees: 30, mtry: Some(6), ..Default::default() };
        let f = fit_forest(x.view(), &y, &params).unwrap();
        assert!(f.feature_importances[2] > 0.9, "{:?}", f.feature_importances);
        let s: f64 = f.feature_importances.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_fit_beats_constant_predictor() {
        let (x, y) = planted(200, 6, 2);
        let f = fit_forest(x.view(), &y, &ForestParams { n_trees: 30, ..Default::default() }).unwrap();
        let pred = f.predict_rows(x.view()).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let constant = mse(&y, &vec![mean; y.len()]).unwrap();
        assert!(mse(&y, &pred).unwrap() < 0.1 * constant);
    }

    #[test]
    fn constant_target_gives_constant_forest() {
        let (x, _) = planted(50, 4, 3);
        let y = vec![2.5; 50];
        let f = fit_forest(x.view(), &y, &ForestParams { n_trees: 10, ..Default::default() }).unwrap();
        assert!(f.feature_importances.iter().all(|v| *v == 0.0));
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
        assert_eq!(f.predict(x.row(7)).unwrap(), 2.5);
    }

    #[test]
    fn single_row_is_a_leaf() {
        let x = array![[1.0, 2.0]];
        let f = fit_forest(x.view(), &[4.0], &ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        assert!(f.trees.iter().all(|t| t.nodes == vec![Node::Leaf { value: 4.0 }]));
    }

    #[test]
    fn prediction_is_tree_mean_and_checks_dimension() {
        let t1 = Tree::leaf(1.0, 1);
        let t3 = Tree::leaf(3.0, 1);
        let f = Forest::from_trees(vec![t1.clone()], 2);
        assert_eq!(f.predict(array![0.0, 0.0].view()).unwrap(), 1.0);
        let f = Forest::from_trees(vec![t1, t3], 2);
        assert_eq!(f.predict(array![0.0, 0.0].view()).unwrap(), 2.0);
        assert!(f.predict(array![0.0].view()).is_err());
    }

    #[test]
    fn seeded_fit_is_reproducible_and_order_invariant() {
        let (x, y) = planted(80, 5, 4);
        let params = ForestParams { n_trees: 12, seed: 9, ..Default::default() };
        let a = fit_forest(x.view(), &y, &params).unwrap();
        let b = fit_forest(x.view(), &y, &params).unwrap();
        assert_eq!(a, b);
        let mut rev = a.clone();
        rev.trees.reverse();
        for row in x.rows() {
            assert!((a.predict(row).unwrap() - rev.predict(row).unwrap()).abs() < 1e-12);
        }
        assert_eq!(Forest::from_json(&a.to_json().unwrap()).unwrap(), a);
    }

    #[test]
    fn child_counts_sum_to_parent() {
        let (x, y) = planted(120, 5, 5);
        let f = fit_forest(x.view(), &y, &ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        for t in &f.trees {
            for (i, node) in t.nodes.iter().enumerate() {
                match node {
                    Node::Split { left, right, .. } => assert_eq!(
                        t.node_sample_counts[*left] + t.node_sample_counts[*right],
                        t.node_sample_counts[i]
                    ),
                    Node::Leaf { value } => assert!(value.is_finite()),
                }
            }
        }
    }

    /// Best split by direct enumeration of every (feature, threshold) pair.
    fn brute_best(x: &Array2<f64>, y: &[f64], rows: &[usize], min_leaf: usize) -> Option<(usize, f64, f64)> {
        let sse = |idx: &[usize]| {
            let m = idx.iter().map(|&r| y[r]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&r| (y[r] - m).powi(2)).sum::<f64>()
        };
        let parent = sse(rows);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..x.ncols() {
            let mut vals: Vec<f64> = rows.iter().map(|&r| x[[r, f]]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[[i, f]] <= t);
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let gain = parent - sse(&l) - sse(&r);
                if gain > 1e-9 && best.is_none_or(|b| gain > b.2 + 1e-9) {
                    best = Some((f, t, gain));
                }
            }
        }
        best
    }

    #[test]
    fn small_trees_match_exhaustive_split_oracle() {
        for seed in 0..40u64 {
            let mut r = rng::seeded(seed);
            let n = r.random_range(4..=30);
            let p = r.random_range(1..=4);
            let x = Array2::from_shape_fn((n, p), |_| (r.random::<f64>() * 10.0).round());
            let y: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            let params = TreeParams { max_depth: Some(2), min_leaf: 1, mtry: None };
            let (tree, _) = Tree::fit(x.view(), &y, (0..n).collect(), &params, &mut r);
            // root
            let rows: Vec<usize> = (0..n).collect();
            match (&tree.nodes[0], brute_best(&x, &y, &rows, 1)) {
                (Node::Leaf { .. }, None) => {}
                (Node::Split { feature, threshold, left, right }, Some((bf, bt, _))) => {
                    assert_eq!((*feature, *threshold), (bf, bt), "seed {seed}");
                    for (child, side) in [(*left, true), (*right, false)] {
                        let sub: Vec<usize> = rows
                            .iter()
                            .copied()
                            .filter(|&i| (x[[i, bf]] <= bt) == side)
                            .collect();
                        match (&tree.nodes[child], brute_best(&x, &y, &sub, 1)) {
                            (Node::Leaf { .. }, None) => {}
                            (Node::Split { feature, threshold, .. }, Some((f2, t2, _))) => {
                                assert_eq!((*feature, *threshold), (f2, t2), "seed {seed}")
                            }
                            (a, b) => panic!("seed {seed}: tree {a:?} oracle {b:?}"),
                        }
                    }
                }
                (a, b) => panic!("seed {seed}: tree {a:?} oracle {b:?}"),
            }
            assert!(tree.depth() <= 2);
        }
    }
}
