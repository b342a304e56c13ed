//! CSV reports: the scenario summary table, the frequency and season
//! breakdown, and one learning curve per run.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{RunResult, ScenarioAggregate, Stat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `None` for the baseline.
    pub id: Option<u8>,
    pub name: String,
    pub weight: f64,
    pub seeds: usize,
    pub agents_testing: f64,
    pub agents_testing_sd: f64,
    pub episodes_to_convergence: f64,
    pub decision_pct: f64,
    pub mse: f64,
    /// Mean final counts for a_f = 1..4.
    pub frequency: Option<[f64; 4]>,
    /// Mean first-test season counts (Winter, Spring, Summer, Autumn).
    pub season: Option<[f64; 4]>,
}

impl SummaryRow {
    /// Aggregate baseline runs (adoption, plus frequency when trained).
    pub fn baseline(adoption: &[&RunResult], frequency: &[&RunResult]) -> Result<Self> {
        if adoption.is_empty() {
            return Err(Error::Config("baseline summary needs at least one run".into()));
        }
        let stat = |f: &dyn Fn(&RunResult) -> f64| Stat::of(&adoption.iter().map(|r| f(r)).collect::<Vec<_>>());
        let mean4 = |f: &dyn Fn(&RunResult) -> [usize; 4]| {
            (!frequency.is_empty()).then(|| {
                std::array::from_fn(|i| frequency.iter().map(|r| f(r)[i] as f64).sum::<f64>() / frequency.len() as f64)
            })
        };
        let testers = stat(&|r| r.final_testers as f64);
        Ok(Self {
            id: None,
            name: "Baseline".into(),
            weight: 0.0,
            seeds: adoption.len(),
            agents_testing: testers.mean,
            agents_testing_sd: testers.sd,
            episodes_to_convergence: stat(&|r| r.episodes_to_convergence() as f64).mean,
            decision_pct: stat(&|r| r.decision_performance_pct).mean,
            mse: stat(&|r| r.final_mse).mean,
            frequency: mean4(&|r| r.final_frequency),
            season: mean4(&|r| r.final_season),
        })
    }

    pub fn scenario(agg: &ScenarioAggregate) -> Self {
        Self {
            id: Some(agg.id),
            name: agg.name.clone(),
            weight: agg.combined_weight,
            seeds: agg.cells.len(),
            agents_testing: agg.testers.mean,
            agents_testing_sd: agg.testers.sd,
            episodes_to_convergence: agg.episodes_to_convergence.mean,
            decision_pct: agg.decision_pct.mean,
            mse: agg.mse.mean,
            frequency: agg.frequency,
            season: agg.season,
        }
    }

    fn label(&self) -> String {
        self.id.map_or("baseline".into(), |id| id.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub name: String,
    pub weight: f64,
    pub seeds: usize,
    pub agents_testing: f64,
    pub agents_testing_sd: f64,
    pub episodes_to_convergence: f64,
    pub decision_pct: f64,
    pub mse: f64,
}

/// Frequency columns a_f = 1..4, then seasons in the order Autumn, Winter,
/// Spring, Summer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRecord {
    pub id: String,
    pub name: String,
    pub agents_testing: f64,
    pub af_1: f64,
    pub af_2: f64,
    pub af_3: f64,
    pub af_4: f64,
    pub autumn: f64,
    pub winter: f64,
    pub spring: f64,
    pub summer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub episode: usize,
    pub step: u64,
    pub epsilon: f64,
    pub reward: f64,
    pub total_reward: f64,
    pub testers: usize,
    pub loss: Option<f64>,
    pub af_1: usize,
    pub af_2: usize,
    pub af_3: usize,
    pub af_4: usize,
    pub winter: usize,
    pub spring: usize,
    pub summer: usize,
    pub autumn: usize,
}

pub fn summary_records(rows: &[SummaryRow]) -> Vec<SummaryRecord> {
    rows.iter()
        .map(|r| SummaryRecord {
            id: r.label(),
            name: r.name.clone(),
            weight: r.weight,
            seeds: r.seeds,
            agents_testing: r.agents_testing,
            agents_testing_sd: r.agents_testing_sd,
            episodes_to_convergence: r.episodes_to_convergence,
            decision_pct: r.decision_pct,
            mse: r.mse,
        })
        .collect()
}

pub fn frequency_records(rows: &[SummaryRow]) -> Vec<FrequencyRecord> {
    rows.iter()
        .filter_map(|r| {
            let (f, s) = (r.frequency?, r.season?);
            Some(FrequencyRecord {
                id: r.label(),
                name: r.name.clone(),
                agents_testing: s.iter().sum(),
                af_1: f[0],
                af_2: f[1],
                af_3: f[2],
                af_4: f[3],
                autumn: s[3],
                winter: s[0],
                spring: s[1],
                summer: s[2],
            })
        })
        .collect()
}

pub fn curve_records(run: &RunResult) -> Vec<CurveRecord> {
    run.per_episode
        .iter()
        .map(|m| CurveRecord {
            episode: m.episode,
            step: m.env_steps,
            epsilon: m.epsilon,
            reward: m.mean_reward,
            total_reward: m.total_reward,
            testers: m.testers,
            loss: m.loss,
            af_1: m.frequency_histogram[0],
            af_2: m.frequency_histogram[1],
            af_3: m.frequency_histogram[2],
            af_4: m.frequency_histogram[3],
            winter: m.season_histogram[0],
            spring: m.season_histogram[1],
            summer: m.season_histogram[2],
            autumn: m.season_histogram[3],
        })
        .collect()
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Write `scenario_summary.csv`, `frequency_breakdown.csv` (when any row
/// has frequency data) and `learning_curve_<label>.csv` for each run.
/// Returns the files written.
pub fn render_report(rows: &[SummaryRow], curves: &[(String, &RunResult)], dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::Config("nothing to report: no results given".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let summary = dir.join("scenario_summary.csv");
    write_records(&summary, &summary_records(rows))?;
    written.push(summary);
    let freq = frequency_records(rows);
    if !freq.is_empty() {
        let path = dir.join("frequency_breakdown.csv");
        write_records(&path, &freq)?;
        written.push(path);
    }
    for (label, run) in curves {
        let path = dir.join(format!("learning_curve_{label}.csv"));
        write_records(&path, &curve_records(run))?;
        written.push(path);
    }
    Ok(written)
}
