use std::collections::BTreeMap;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy_at_half, fit_forest, mse, take_rows, ForestParams};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_GRID: [usize; 9] = [10, 20, 30, 40, 50, 60, 70, 80, 90];
pub const RFE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeConfig {
    /// Features removed per round. `None` eliminates straight down to the
    /// next grid size; a fixed step is shortened so no grid size is skipped.
    pub step: Option<usize>,
    pub folds: usize,
    pub grid: Vec<usize>,
    pub forest: ForestParams,
    /// Stratify folds by label when the target is binary.
    pub stratify: bool,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for RfeConfig {
    fn default() -> Self {
        Self {
            step: None,
            folds: 10,
            grid: DEFAULT_GRID.to_vec(),
            forest: ForestParams::default(),
            stratify: true,
            holdout_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    /// 1 for the final survivors; larger values were eliminated earlier.
    pub ranking: BTreeMap<String, usize>,
    /// Surviving features at each grid size, strongest first.
    pub selected_sets: BTreeMap<usize, Vec<String>>,
    pub rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub mse: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    pub format_version: u32,
    pub ranking: BTreeMap<String, usize>,
    pub selected_sets: BTreeMap<usize, Vec<String>>,
    /// Per-fold MSE for each recorded size.
    pub cv_scores: BTreeMap<usize, Vec<f64>>,
    /// Per-fold accuracy of the forest output thresholded at 0.5.
    pub cv_accuracy: BTreeMap<usize, Vec<f64>>,
    pub holdout: BTreeMap<usize, HoldoutReport>,
    pub folds: usize,
}

impl RfeResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn is_binary(y: &[f64]) -> bool {
    y.iter().all(|v| *v == 0.0 || *v == 1.0)
}

/// Partition rows into `folds` test sets. Binary targets are stratified
/// when requested so each fold keeps the label mix.
pub fn stratified_folds(y: &[f64], folds: usize, stratify: bool, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let groups: Vec<Vec<usize>> = if stratify && is_binary(y) {
        [0.0, 1.0]
            .iter()
            .map(|c| (0..y.len()).filter(|&i| y[i] == *c).collect())
            .collect()
    } else {
        vec![(0..y.len()).collect()]
    };
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for mut g in groups {
        g.shuffle(rng);
        for i in g {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

fn holdout_split(y: &[f64], fraction: f64, stratify: bool, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let groups: Vec<Vec<usize>> = if stratify && is_binary(y) {
        [0.0, 1.0]
            .iter()
            .map(|c| (0..y.len()).filter(|&i| y[i] == *c).collect())
            .collect()
    } else {
        vec![(0..y.len()).collect()]
    };
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut g in groups {
        g.shuffle(rng);
        let k = (g.len() as f64 * fraction).round() as usize;
        test.extend_from_slice(&g[..k]);
        train.extend_from_slice(&g[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn validate(p: usize, n: usize, config: &RfeConfig, columns: &[String]) -> Result<usize> {
    if columns.len() != p {
        return Err(Error::Dimension {
            expected: p,
            got: columns.len(),
        });
    }
    let min_k = *config
        .grid
        .iter()
        .min()
        .ok_or_else(|| Error::Config("feature grid is empty".into()))?;
    if p < min_k {
        return Err(Error::Config(format!(
            "RFE needs at least {min_k} features, got {p}"
        )));
    }
    if config.folds < 2 || n < config.folds {
        return Err(Error::Config(format!(
            "cross-validation needs 2 <= folds <= rows (folds {}, rows {n})",
            config.folds
        )));
    }
    if let Some(step) = config.step {
        if step == 0 || step >= p {
            return Err(Error::Config(format!(
                "RFE step {step} must be between 1 and the feature count {p} (exclusive)"
            )));
        }
    }
    Ok(min_k)
}

/// Recursive elimination only: refit on the survivors each round and drop
/// the weakest features.
pub fn eliminate(x: ArrayView2<f64>, y: &[f64], columns: &[String], config: &RfeConfig) -> Result<Elimination> {
    let p = x.ncols();
    let min_k = validate(p, x.nrows(), config, columns)?;
    let mut surviving: Vec<usize> = (0..p).collect();
    let mut removed_rounds: Vec<Vec<usize>> = Vec::new();
    let mut selected_sets = BTreeMap::new();
    let mut round = 0u64;
    loop {
        let sub = x.select(ndarray::Axis(1), &surviving);
        let params = ForestParams {
            seed: rng::substream(config.seed, 1000 + round).random(),
            ..config.forest
        };
        let forest = fit_forest(sub.view(), y, &params)?;
        // strongest first; ties keep the lower column index ahead
        let mut order: Vec<usize> = (0..surviving.len()).collect();
        order.sort_by(|&a, &b| {
            forest.feature_importances[b]
                .total_cmp(&forest.feature_importances[a])
                .then(a.cmp(&b))
        });
        let k = surviving.len();
        if config.grid.contains(&k) {
            selected_sets.insert(k, order.iter().map(|&i| columns[surviving[i]].clone()).collect());
        }
        if k <= min_k {
            break;
        }
        let next_grid = config.grid.iter().copied().filter(|&g| g < k).max().unwrap_or(min_k);
        let target = match config.step {
            None => next_grid,
            Some(step) => k.saturating_sub(step).max(next_grid),
        };
        let keep: Vec<usize> = order[..target].iter().map(|&i| surviving[i]).collect();
        let dropped: Vec<usize> = order[target..].iter().map(|&i| surviving[i]).collect();
        removed_rounds.push(dropped);
        surviving = keep;
        surviving.sort_unstable();
        round += 1;
    }
    let mut ranking = BTreeMap::new();
    for &i in &surviving {
        ranking.insert(columns[i].clone(), 1);
    }
    for (r, dropped) in removed_rounds.iter().rev().enumerate() {
        for &i in dropped {
            ranking.insert(columns[i].clone(), r + 2);
        }
    }
    Ok(Elimination {
        ranking,
        selected_sets,
        rounds: round as usize + 1,
    })
}

/// Elimination followed by k-fold cross-validation and an 80/20 holdout
/// evaluation of every recorded feature set.
pub fn run_rfe(x: ArrayView2<f64>, y: &[f64], columns: &[String], config: &RfeConfig) -> Result<RfeResult> {
    let elim = eliminate(x, y, columns, config)?;
    let folds = stratified_folds(y, config.folds, config.stratify, &mut rng::substream(config.seed, 1));
    let (train, test) = holdout_split(y, config.holdout_fraction, config.stratify, &mut rng::substream(config.seed, 2));

    let index_of = |name: &String| columns.iter().position(|c| c == name).expect("selected column exists");
    let jobs: Vec<(usize, usize)> = elim
        .selected_sets
        .keys()
        .flat_map(|&k| (0..=config.folds).map(move |f| (k, f)))
        .collect();
    let results: Vec<((usize, usize), HoldoutReport)> = jobs
        .par_iter()
        .map(|&(k, f)| {
            let cols: Vec<usize> = elim.selected_sets[&k].iter().map(index_of).collect();
            let xk = x.select(ndarray::Axis(1), &cols);
            let (tr, te): (Vec<usize>, &[usize]) = if f < config.folds {
                let tr = (0..config.folds)
                    .filter(|&g| g != f)
                    .flat_map(|g| folds[g].iter().copied())
                    .collect();
                (tr, &folds[f])
            } else {
                (train.clone(), &test)
            };
            let params = ForestParams {
                seed: rng::substream(config.seed, 10_000 + (k * 1000 + f) as u64).random(),
                ..config.forest
            };
            let ytr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
            let forest = fit_forest(take_rows(xk.view(), &tr).view(), &ytr, &params)?;
            let pred = forest.predict_rows(take_rows(xk.view(), te).view())?;
            let yte: Vec<f64> = te.iter().map(|&i| y[i]).collect();
            Ok((
                (k, f),
                HoldoutReport {
                    mse: mse(&yte, &pred)?,
                    accuracy: accuracy_at_half(&yte, &pred),
                },
            ))
        })
        .collect::<Result<_>>()?;

    let mut cv_scores: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut cv_accuracy: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut holdout = BTreeMap::new();
    for ((k, f), rep) in results {
        if f < config.folds {
            cv_scores.entry(k).or_default().push(rep.mse);
            cv_accuracy.entry(k).or_default().push(rep.accuracy);
        } else {
            holdout.insert(k, rep);
        }
    }
    Ok(RfeResult {
        format_version: RFE_FORMAT_VERSION,
        ranking: elim.ranking,
        selected_sets: elim.selected_sets,
        cv_scores,
        cv_accuracy,
        holdout,
        folds: config.folds,
    })
}
