use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::state::{encode_states, STATE_EXTRA};
use crate::error::{Error, Result};
use crate::forest::{eliminate, ForestParams, RfeConfig};
use crate::population::{synthesize_population, CalibrationSpec, DynamicState, Population, DEFAULT_AGENTS};
use crate::preprocess::{fit_transform, DesignMatrix};

/// How the agent population and its feature sets are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub agents: usize,
    pub population_seed: u64,
    pub calibration: CalibrationSpec,
    pub rfe: RfeConfig,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            agents: DEFAULT_AGENTS,
            population_seed: 7,
            calibration: CalibrationSpec::default(),
            rfe: RfeConfig {
                forest: ForestParams {
                    seed: 7,
                    ..ForestParams::default()
                },
                seed: 7,
                ..RfeConfig::default()
            },
        }
    }
}

/// Per-agent testing cost `min + span·(1 − u)`, where `u` is the agent's
/// percentile rank on the driver score within its cohort. Agents with a
/// strong disposition to test face the smallest barrier.
///
/// With the default reward a test in Autumn pays off when the cost is
/// below 2. The default span puts that cut at `u = 0.259`, so a policy that
/// acts optimally tests about 74% of agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub min: f64,
    pub span: f64,
}

impl Default for BarrierSpec {
    fn default() -> Self {
        Self { min: 0.6, span: 1.89 }
    }
}

impl BarrierSpec {
    /// Costs for the given driver scores, ranked within the slice.
    pub fn costs(&self, scores: &[f64]) -> Vec<f64> {
        let n = scores.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        let mut cost = vec![0.0; n];
        for (rank, &i) in order.iter().enumerate() {
            let u = (rank as f64 + 0.5) / n as f64;
            cost[i] = self.min + self.span * (1.0 - u);
        }
        cost
    }
}

/// A preprocessed population with its recorded feature sets. Built once and
/// shared read-only by every run.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub design: DesignMatrix,
    /// Selected design columns by set size, strongest first.
    pub feature_sets: BTreeMap<usize, Vec<String>>,
    pub driver_scores: Vec<f64>,
    pub initial: Vec<DynamicState>,
}

impl World {
    /// Synthesize, preprocess and run recursive elimination.
    pub fn build(config: &WorldConfig) -> Result<Self> {
        let pop = synthesize_population(config.agents, config.population_seed, &config.calibration)?;
        Self::from_population(&pop, &config.rfe)
    }

    pub fn from_population(pop: &Population, rfe: &RfeConfig) -> Result<Self> {
        let design = fit_transform(pop)?;
        let y: Vec<f64> = pop
            .agents
            .iter()
            .map(|a| a.label_adoption.unwrap_or(0) as f64)
            .collect();
        let mut rfe = rfe.clone();
        rfe.grid.retain(|&k| k <= design.columns.len());
        let elim = eliminate(design.rows.view(), &y, &design.columns, &rfe)?;
        Self::from_parts(pop, design, elim.selected_sets)
    }

    /// Assemble from artifacts produced elsewhere (for example a saved
    /// transform and RFE result).
    pub fn from_parts(
        pop: &Population,
        design: DesignMatrix,
        feature_sets: BTreeMap<usize, Vec<String>>,
    ) -> Result<Self> {
        if design.n_rows() != pop.len() {
            return Err(Error::Dimension {
                expected: pop.len(),
                got: design.n_rows(),
            });
        }
        for names in feature_sets.values() {
            design.select(names)?;
        }
        Ok(Self {
            driver_scores: pop.driver_scores(),
            initial: pop.agents.iter().map(|a| a.dynamic).collect(),
            design,
            feature_sets,
        })
    }

    pub fn len(&self) -> usize {
        self.design.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The first `n` agents restricted to the size-`k` feature set.
    pub fn cohort(&self, k: usize, n: usize, barrier: &BarrierSpec) -> Result<Cohort> {
        let names = self.feature_sets.get(&k).ok_or_else(|| {
            Error::Config(format!(
                "feature set {k} not recorded; available sizes {:?}",
                self.feature_sets.keys().collect::<Vec<_>>()
            ))
        })?;
        if n == 0 || n > self.len() {
            return Err(Error::Config(format!("cohort of {n} agents from a world of {}", self.len())));
        }
        let rows: Vec<usize> = (0..n).collect();
        let features = self.design.select(names)?.select(Axis(0), &rows);
        Ok(Cohort {
            feature_names: names.clone(),
            features,
            cost: barrier.costs(&self.driver_scores[..n]),
            initial: self.initial[..n].to_vec(),
        })
    }
}

/// The agents taking part in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub feature_names: Vec<String>,
    /// Preprocessed selected features, one row per agent.
    pub features: Array2<f64>,
    pub cost: Vec<f64>,
    pub initial: Vec<DynamicState>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.features.ncols() + STATE_EXTRA
    }

    pub fn encode(&self, dynamic: &[DynamicState]) -> Array2<f64> {
        encode_states(self.features.view(), dynamic)
    }

    /// Agents at `rows`, in that order, keeping their costs.
    pub fn subset(&self, rows: &[usize]) -> Cohort {
        Cohort {
            feature_names: self.feature_names.clone(),
            features: self.features.select(Axis(0), rows),
            cost: rows.iter().map(|&i| self.cost[i]).collect(),
            initial: rows.iter().map(|&i| self.initial[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrier_costs_follow_rank() {
        let b = BarrierSpec { min: 1.0, span: 2.0 };
        let c = b.costs(&[0.3, -1.0, 5.0, 0.0]);
        // ranks 2, 0, 3, 1 -> u = 0.625, 0.125, 0.875, 0.375
        let want = [1.75, 2.75, 1.25, 2.25];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
