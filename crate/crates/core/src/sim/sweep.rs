use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{fine_tune_run, train_run, Model, RunCheckpoint, RunResult, SimConfig};
use super::world::World;
use crate::env::{find_scenario, Family};
use crate::error::{Error, Result};

/// Trained baselines keyed by seed.
#[derive(Debug, Clone, Default)]
pub struct Baselines {
    pub adoption: BTreeMap<u64, RunCheckpoint>,
    pub frequency: BTreeMap<u64, RunCheckpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub seed: u64,
    pub adoption: RunResult,
    pub frequency: Option<RunResult>,
}

/// Train the adoption baseline for every seed and, when asked, the
/// frequency baseline behind it. Seeds run in parallel.
pub fn train_baselines(
    world: &World,
    base: &SimConfig,
    seeds: &[u64],
    with_frequency: bool,
) -> Result<(Baselines, Vec<BaselineRun>)> {
    type Trained = (RunResult, RunCheckpoint);
    let runs: Vec<(u64, Trained, Option<Trained>)> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = SimConfig {
                seed,
                scenario: None,
                model: Model::Adoption,
                ..base.clone()
            };
            let adoption = train_run(world, &cfg, None)?;
            let frequency = if with_frequency {
                let fcfg = SimConfig {
                    model: Model::Frequency,
                    ..cfg
                };
                Some(train_run(world, &fcfg, Some(adoption.1.learner.net.clone()))?)
            } else {
                None
            };
            Ok((seed, adoption, frequency))
        })
        .collect::<Result<_>>()?;
    let mut baselines = Baselines::default();
    let mut out = Vec::new();
    for (seed, (ar, ac), freq) in runs {
        baselines.adoption.insert(seed, ac);
        let frequency = freq.map(|(fr, fc)| {
            baselines.frequency.insert(seed, fc);
            fr
        });
        out.push(BaselineRun {
            seed,
            adoption: ar,
            frequency,
        });
    }
    Ok((baselines, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub seed: u64,
    pub adoption: RunResult,
    pub frequency: Option<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAggregate {
    pub id: u8,
    pub name: String,
    pub family: Family,
    pub combined_weight: f64,
    pub cells: Vec<CellResult>,
    pub testers: Stat,
    pub episodes_to_convergence: Stat,
    pub decision_pct: Stat,
    pub mse: Stat,
    /// Mean final frequency and first-test season counts over seeds.
    pub frequency: Option<[f64; 4]>,
    pub season: Option<[f64; 4]>,
}

impl ScenarioAggregate {
    fn from_cells(id: u8, mut cells: Vec<CellResult>) -> Result<Self> {
        let spec = find_scenario(&id.to_string())?;
        cells.sort_by_key(|c| c.seed);
        let stat = |f: &dyn Fn(&RunResult) -> f64| Stat::of(&cells.iter().map(|c| f(&c.adoption)).collect::<Vec<_>>());
        let freq: Vec<&RunResult> = cells.iter().filter_map(|c| c.frequency.as_ref()).collect();
        let mean4 = |f: &dyn Fn(&RunResult) -> [usize; 4]| -> Option<[f64; 4]> {
            (!freq.is_empty()).then(|| {
                std::array::from_fn(|i| freq.iter().map(|r| f(r)[i] as f64).sum::<f64>() / freq.len() as f64)
            })
        };
        Ok(Self {
            id,
            name: spec.name,
            family: spec.family,
            combined_weight: spec.combined_weight,
            testers: stat(&|r| r.final_testers as f64),
            episodes_to_convergence: stat(&|r| r.episodes_to_convergence() as f64),
            decision_pct: stat(&|r| r.decision_performance_pct),
            mse: stat(&|r| r.final_mse),
            frequency: mean4(&|r| r.final_frequency),
            season: mean4(&|r| r.final_season),
            cells,
        })
    }
}

/// Fine-tune every `(scenario, seed)` cell from that seed's baseline.
///
/// When a frequency baseline exists for the seed, the frequency model is
/// fine-tuned too, gated by the scenario's fine-tuned adoption network.
/// Cells run in parallel and are aggregated in id and seed order.
pub fn sweep_scenarios(
    world: &World,
    base: &SimConfig,
    ids: &[u8],
    seeds: &[u64],
    baselines: &Baselines,
) -> Result<BTreeMap<u8, ScenarioAggregate>> {
    for &seed in seeds {
        if !baselines.adoption.contains_key(&seed) {
            return Err(Error::MissingBaseline(format!(
                "no trained adoption baseline for seed {seed}; run `train-baseline --seed {seed}` first"
            )));
        }
    }
    for &id in ids {
        find_scenario(&id.to_string())?;
    }
    let jobs: Vec<(u8, u64)> = ids.iter().flat_map(|&id| seeds.iter().map(move |&s| (id, s))).collect();
    let cells: Vec<(u8, CellResult)> = jobs
        .par_iter()
        .map(|&(id, seed)| {
            let cfg = SimConfig {
                seed,
                scenario: Some(id),
                model: Model::Adoption,
                ..base.clone()
            };
            let (adoption, ckpt) = fine_tune_run(world, &cfg, &baselines.adoption[&seed], None)?;
            let frequency = match baselines.frequency.get(&seed) {
                Some(fb) => {
                    let fcfg = SimConfig {
                        model: Model::Frequency,
                        ..cfg
                    };
                    Some(fine_tune_run(world, &fcfg, fb, Some(ckpt.learner.net))?.0)
                }
                None => None,
            };
            Ok((
                id,
                CellResult {
                    seed,
                    adoption,
                    frequency,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let mut grouped: BTreeMap<u8, Vec<CellResult>> = BTreeMap::new();
    for (id, cell) in cells {
        grouped.entry(id).or_default().push(cell);
    }
    grouped
        .into_iter()
        .map(|(id, cells)| Ok((id, ScenarioAggregate::from_cells(id, cells)?)))
        .collect()
}
