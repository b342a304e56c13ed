//! Path-dependent TreeSHAP for regression forests, an exact subset
//! enumeration oracle, and CSV exports for summary and dot plots.

use std::io::Write;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, Node, Tree};

/// Largest feature count the exact oracle accepts.
pub const ORACLE_MAX_FEATURES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapMatrix {
    /// Expected forest output under the training (cover) distribution.
    pub base_value: f64,
    pub values: Array2<f64>,
    /// Feature indices by mean |SHAP| descending; ties keep input order.
    pub feature_order: Vec<usize>,
}

impl ShapMatrix {
    pub fn mean_abs(&self) -> Vec<f64> {
        let n = self.values.nrows().max(1) as f64;
        self.values
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / n)
            .collect()
    }
}

fn order_by_importance(mean_abs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..mean_abs.len()).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]));
    order
}

/// Cover-weighted expected output of one tree.
pub fn expected_value(tree: &Tree) -> f64 {
    let root = tree.node_sample_counts[0] as f64;
    tree.nodes
        .iter()
        .zip(&tree.node_sample_counts)
        .filter_map(|(n, c)| match n {
            Node::Leaf { value } => Some(value * *c as f64 / root),
            Node::Split { .. } => None,
        })
        .sum()
}

pub fn base_value(forest: &Forest) -> f64 {
    forest.trees.iter().map(expected_value).sum::<f64>() / forest.trees.len() as f64
}

#[derive(Debug, Clone, Copy)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElem {
        feature,
        zero,
        one,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (l + 1) as f64;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / (l + 1) as f64;
    }
}

fn unwind(path: &mut Vec<PathElem>, index: usize) {
    let l = path.len() - 1;
    let PathElem { one, zero, .. } = path[index];
    let mut next = path[l].weight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = path[j].weight;
            path[j].weight = next * (l + 1) as f64 / ((j + 1) as f64 * one);
            next = t - path[j].weight * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            path[j].weight = path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    for j in index..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], index: usize) -> f64 {
    let l = path.len() - 1;
    let PathElem { one, zero, .. } = path[index];
    let mut next = path[l].weight;
    let mut total = 0.0;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = next * (l + 1) as f64 / ((j + 1) as f64 * one);
            total += t;
            next = path[j].weight - t * zero * (l - j) as f64 / (l + 1) as f64;
        } else if zero != 0.0 {
            total += path[j].weight / zero / ((l - j) as f64 / (l + 1) as f64);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    x: ArrayView1<f64>,
    phi: &mut [f64],
    node: usize,
    mut path: Vec<PathElem>,
    zero: f64,
    one: f64,
    feature: Option<usize>,
) {
    extend(&mut path, zero, one, feature);
    match tree.nodes[node] {
        Node::Leaf { value } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                if let Some(f) = el.feature {
                    phi[f] += w * (el.one - el.zero) * value;
                }
            }
        }
        Node::Split {
            feature: f,
            threshold,
            left,
            right,
        } => {
            let (hot, cold) = if x[f] <= threshold { (left, right) } else { (right, left) };
            let cover = tree.node_sample_counts[node] as f64;
            let hot_frac = tree.node_sample_counts[hot] as f64 / cover;
            let cold_frac = tree.node_sample_counts[cold] as f64 / cover;
            let (mut iz, mut io) = (1.0, 1.0);
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(f)) {
                iz = path[k].zero;
                io = path[k].one;
                unwind(&mut path, k);
            }
            recurse(tree, x, phi, hot, path.clone(), iz * hot_frac, io, Some(f));
            recurse(tree, x, phi, cold, path, iz * cold_frac, 0.0, Some(f));
        }
    }
}

/// SHAP values of one tree at `x`.
pub fn tree_shap_single(tree: &Tree, x: ArrayView1<f64>, n_features: usize) -> Vec<f64> {
    let mut phi = vec![0.0; n_features];
    recurse(tree, x, &mut phi, 0, Vec::with_capacity(32), 1.0, 1.0, None);
    phi
}

fn check_dim(forest: &Forest, got: usize) -> Result<()> {
    if got != forest.n_features {
        return Err(Error::Dimension {
            expected: forest.n_features,
            got,
        });
    }
    Ok(())
}

/// Exact path-dependent SHAP values for every row of `x`, averaged over
/// trees.
pub fn tree_shap(forest: &Forest, x: ArrayView2<f64>) -> Result<ShapMatrix> {
    check_dim(forest, x.ncols())?;
    let p = forest.n_features;
    let t = forest.trees.len() as f64;
    let rows: Vec<Vec<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let mut phi = vec![0.0; p];
            for tree in &forest.trees {
                for (acc, v) in phi.iter_mut().zip(tree_shap_single(tree, x.row(i), p)) {
                    *acc += v;
                }
            }
            phi.iter_mut().for_each(|v| *v /= t);
            phi
        })
        .collect();
    let mut values = Array2::zeros((x.nrows(), p));
    for (i, row) in rows.into_iter().enumerate() {
        values.row_mut(i).assign(&ArrayView1::from(&row));
    }
    let mut m = ShapMatrix {
        base_value: base_value(forest),
        values,
        feature_order: Vec::new(),
    };
    m.feature_order = order_by_importance(&m.mean_abs());
    Ok(m)
}

/// Expected tree output when only features in `mask` are known.
fn conditional_value(tree: &Tree, x: ArrayView1<f64>, mask: u32, node: usize) -> f64 {
    match tree.nodes[node] {
        Node::Leaf { value } => value,
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if mask & (1 << feature) != 0 {
                let next = if x[feature] <= threshold { left } else { right };
                conditional_value(tree, x, mask, next)
            } else {
                let c = tree.node_sample_counts[node] as f64;
                let wl = tree.node_sample_counts[left] as f64 / c;
                let wr = tree.node_sample_counts[right] as f64 / c;
                wl * conditional_value(tree, x, mask, left) + wr * conditional_value(tree, x, mask, right)
            }
        }
    }
}

/// Classical Shapley values by enumerating all feature subsets.
pub fn shap_oracle_exact(forest: &Forest, x: ArrayView1<f64>) -> Result<Vec<f64>> {
    let p = forest.n_features;
    check_dim(forest, x.len())?;
    if p > ORACLE_MAX_FEATURES {
        return Err(Error::Config(format!(
            "exact Shapley enumeration over {p} features needs 2^{p} subsets; \
             the oracle accepts at most {ORACLE_MAX_FEATURES}, use tree_shap instead"
        )));
    }
    let t = forest.trees.len() as f64;
    let v: Vec<f64> = (0u32..1 << p)
        .map(|mask| {
            forest
                .trees
                .iter()
                .map(|tree| conditional_value(tree, x, mask, 0))
                .sum::<f64>()
                / t
        })
        .collect();
    let mut fact = vec![1.0f64; p + 1];
    for i in 1..=p {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; p];
    for (i, out) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for mask in 0u32..1 << p {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[p - s - 1] / fact[p];
            *out += w * (v[(mask | bit) as usize] - v[mask as usize]);
        }
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub mean_abs_shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DotRow {
    pub agent_id: u64,
    pub feature: String,
    pub shap_value: f64,
    pub feature_value: f64,
    /// Mid-rank percentile of the feature value within its column, 0..=100.
    pub feature_value_percentile: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapSummary {
    pub importance: Vec<ImportanceRow>,
    pub dots: Vec<DotRow>,
}

fn percentiles(col: ArrayView1<f64>) -> Vec<f64> {
    let n = col.len() as f64;
    col.iter()
        .map(|v| {
            let below = col.iter().filter(|w| *w < v).count() as f64;
            let equal = col.iter().filter(|w| *w == v).count() as f64;
            100.0 * (below + 0.5 * equal) / n
        })
        .collect()
}

/// Top-`top_k` features by mean |SHAP| plus one dot row per agent and
/// listed feature.
pub fn export_summary(
    shap: &ShapMatrix,
    x: ArrayView2<f64>,
    columns: &[String],
    agent_ids: &[u64],
    top_k: usize,
) -> Result<ShapSummary> {
    let p = shap.values.ncols();
    if top_k == 0 || top_k > p {
        return Err(Error::Config(format!("top_k {top_k} must lie in 1..={p}")));
    }
    if columns.len() != p || x.ncols() != p {
        return Err(Error::Dimension {
            expected: p,
            got: columns.len().min(x.ncols()),
        });
    }
    if agent_ids.len() != shap.values.nrows() || x.nrows() != shap.values.nrows() {
        return Err(Error::Dimension {
            expected: shap.values.nrows(),
            got: agent_ids.len(),
        });
    }
    let mean_abs = shap.mean_abs();
    let order = order_by_importance(&mean_abs);
    let top = &order[..top_k];
    let importance = top
        .iter()
        .map(|&j| ImportanceRow {
            feature: columns[j].clone(),
            mean_abs_shap: mean_abs[j],
        })
        .collect();
    let mut dots = Vec::with_capacity(top_k * agent_ids.len());
    for &j in top {
        let pct = percentiles(x.column(j));
        for (i, id) in agent_ids.iter().enumerate() {
            dots.push(DotRow {
                agent_id: *id,
                feature: columns[j].clone(),
                shap_value: shap.values[[i, j]],
                feature_value: x[[i, j]],
                feature_value_percentile: pct[i],
            });
        }
    }
    Ok(ShapSummary { importance, dots })
}

impl ShapSummary {
    pub fn write_importance_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        for row in &self.importance {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_dots_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        for row in &self.dots {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, ForestParams, TreeParams};
    use crate::rng;
    use ndarray::array;
    use rand::Rng;

    fn stump(feature: usize, threshold: f64, lo: f64, hi: f64, counts: [usize; 2]) -> Tree {
        Tree {
            nodes: vec![
                Node::Split { feature, threshold, left: 1, right: 2 },
                Node::Leaf { value: lo },
                Node::Leaf { value: hi },
            ],
            node_sample_counts: vec![counts[0] + counts[1], counts[0], counts[1]],
            node_values: vec![0.0, lo, hi],
        }
    }

    #[test]
    fn single_leaf_tree_has_zero_attribution() {
        let f = Forest::from_trees(vec![Tree::leaf(3.0, 10)], 3);
        let s = tree_shap(&f, array![[1.0, 2.0, 3.0]].view()).unwrap();
        assert_eq!(s.base_value, 3.0);
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stump_attributes_only_its_feature() {
        let f = Forest::from_trees(vec![stump(1, 0.5, -1.0, 2.0, [3, 1])], 3);
        let x = array![[9.0, 0.2, 9.0], [9.0, 0.9, 9.0]];
        let s = tree_shap(&f, x.view()).unwrap();
        assert!((s.base_value - (-0.25)).abs() < 1e-12);
        for i in 0..2 {
            assert_eq!(s.values[[i, 0]], 0.0);
            assert_eq!(s.values[[i, 2]], 0.0);
        }
        assert!((s.values[[0, 1]] - (-1.0 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn single_player_oracle() {
        let f = Forest::from_trees(vec![stump(0, 0.5, 1.0, 5.0, [1, 1])], 1);
        let x = array![0.9];
        let phi = shap_oracle_exact(&f, x.view()).unwrap();
        assert_eq!(phi, vec![5.0 - 3.0]);
    }

    #[test]
    fn symmetric_duplicates_share_credit() {
        // split on f0 then f1 on both sides, duplicated columns
        let tree = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
                Node::Split { feature: 1, threshold: 0.5, left: 3, right: 4 },
                Node::Split { feature: 1, threshold: 0.5, left: 5, right: 6 },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 1.0 },
                Node::Leaf { value: 1.0 },
                Node::Leaf { value: 2.0 },
            ],
            node_sample_counts: vec![4, 2, 2, 1, 1, 1, 1],
            node_values: vec![1.0, 0.5, 1.5, 0.0, 1.0, 1.0, 2.0],
        };
        let f = Forest::from_trees(vec![tree], 2);
        let x = array![1.0, 1.0];
        let phi = shap_oracle_exact(&f, x.view()).unwrap();
        assert!((phi[0] - phi[1]).abs() < 1e-12);
        let fast = tree_shap(&f, x.view().insert_axis(ndarray::Axis(0))).unwrap();
        assert!((fast.values[[0, 0]] - fast.values[[0, 1]]).abs() < 1e-12);
    }

    #[test]
    fn oracle_refuses_wide_inputs() {
        let f = Forest::from_trees(vec![Tree::leaf(0.0, 1)], 21);
        let err = shap_oracle_exact(&f, ndarray::Array1::zeros(21).view()).unwrap_err();
        assert!(err.to_string().contains("tree_shap"));
    }

    fn random_forest(seed: u64, p: usize, depth: usize) -> (Forest, Array2<f64>) {
        let mut r = rng::seeded(seed);
        let n = 60;
        let x = Array2::from_shape_fn((n, p), |_| (r.random::<f64>() * 8.0).floor());
        let y: Vec<f64> = (0..n).map(|i| x[[i, 0]] * x[[i, p - 1]] + r.random::<f64>()).collect();
        let params = ForestParams {
            n_trees: 3,
            max_depth: Some(depth),
            min_leaf: 1,
            seed,
            ..Default::default()
        };
        (fit_forest(x.view(), &y, &params).unwrap(), x)
    }

    #[test]
    fn tree_shap_matches_oracle_and_sums_to_prediction() {
        for seed in 0..15 {
            let (f, x) = random_forest(seed, 2 + (seed as usize % 7), 1 + seed as usize % 4);
            let s = tree_shap(&f, x.view()).unwrap();
            for i in (0..x.nrows()).step_by(7) {
                let pred = f.predict(x.row(i)).unwrap();
                let total: f64 = s.values.row(i).sum();
                assert!((s.base_value + total - pred).abs() < 1e-9);
                let oracle = shap_oracle_exact(&f, x.row(i)).unwrap();
                for (a, b) in s.values.row(i).iter().zip(&oracle) {
                    assert!((a - b).abs() < 1e-9, "seed {seed}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn unused_feature_column_is_zero() {
        let mut r = rng::seeded(3);
        let x = Array2::from_shape_fn((40, 3), |_| r.random::<f64>());
        let y: Vec<f64> = x.column(0).to_vec();
        // feature 2 never splits because only feature 0 carries signal and mtry = all
        let (tree, _) = Tree::fit(x.view(), &y, (0..40).collect(), &TreeParams { max_depth: Some(3), min_leaf: 2, mtry: None }, &mut r);
        let used: Vec<usize> = tree.nodes.iter().filter_map(|n| match n { Node::Split { feature, .. } => Some(*feature), _ => None }).collect();
        let f = Forest::from_trees(vec![tree], 3);
        let s = tree_shap(&f, x.view()).unwrap();
        for j in 0..3 {
            if !used.contains(&j) {
                assert!(s.values.column(j).iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn summary_orders_and_handles_all_zero() {
        let cols: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let zero = ShapMatrix { base_value: 0.0, values: Array2::zeros((2, 3)), feature_order: vec![0, 1, 2] };
        let s = export_summary(&zero, x.view(), &cols, &[7, 8], 3).unwrap();
        let names: Vec<&str> = s.importance.iter().map(|r| r.feature.as_str()).collect();
        assert_eq!(names, vec!["a", "b", "c"]);
        assert!(s.importance.iter().all(|r| r.mean_abs_shap == 0.0));

        let m = ShapMatrix { base_value: 0.0, values: array![[0.1, -2.0, 0.5], [0.1, 1.0, -0.4]], feature_order: vec![] };
        let s = export_summary(&m, x.view(), &cols, &[7, 8], 3).unwrap();
        let names: Vec<&str> = s.importance.iter().map(|r| r.feature.as_str()).collect();
        assert_eq!(names, vec!["b", "c", "a"]);
        assert_eq!(s.dots.len(), 6);
        assert_eq!(s.dots[0].feature_value_percentile, 25.0);
        assert!(export_summary(&m, x.view(), &cols, &[7, 8], 4).is_err());

        let mut buf = Vec::new();
        s.write_dots_csv(&mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let back: Vec<DotRow> = rdr.deserialize().collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(back, s.dots);
    }
}
