//! Agent populations: calibrated synthesis and survey CSV ingestion.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::schema::{FeatureDef, FeatureKind, FeatureSchema, TOP_DRIVERS};

pub const DEFAULT_AGENTS: usize = 561;

/// Fraction of missing cells above which a feature is excluded.
pub const EXCLUSION_THRESHOLD: f64 = 0.30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Num(f64),
    Cat(String),
}

impl RawValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            RawValue::Num(v) => Some(*v),
            RawValue::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            RawValue::Cat(c) => Some(c),
            RawValue::Num(_) => None,
        }
    }

    fn to_cell(&self) -> String {
        match self {
            RawValue::Num(v) => format!("{v}"),
            RawValue::Cat(c) => c.clone(),
        }
    }
}

/// Time-varying agent fields, reset at the start of every episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicState {
    /// Calendar month, 1..=12. Agents keep their own calendars.
    pub month: u8,
    pub months_since_last_test: u32,
    pub peer_norm: f64,
}

impl DynamicState {
    pub fn season_index(&self) -> usize {
        crate::env::season_of(self.month)
            .map(|s| s.index())
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent_id: u64,
    /// Raw feature values aligned with the schema; `None` is missing.
    pub raw: Vec<Option<RawValue>>,
    pub dynamic: DynamicState,
    pub label_adoption: Option<u8>,
    pub label_frequency: Option<u8>,
}

impl AgentRecord {
    pub fn value(&self, schema: &FeatureSchema, name: &str) -> Option<&RawValue> {
        schema.index_of(name).and_then(|i| self.raw[i].as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic {
        intercept: f64,
        expected_rate: f64,
    },
    Ingested {
        source: String,
        unparseable: BTreeMap<String, usize>,
        excluded: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub schema: FeatureSchema,
    pub agents: Vec<AgentRecord>,
    pub seed: u64,
    pub provenance: Provenance,
}

/// Per-feature generating distribution for synthetic respondents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Marginal {
    /// Standard normal truncated to ±3, mapped to `mean + sd·z`, then clamped
    /// to the feature range.
    Normal { mean: f64, sd: f64 },
    /// Weights over ordinal levels or categories, in schema order.
    Weighted { weights: Vec<f64> },
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSpec {
    /// Expected share of annual testers.
    pub target_rate: f64,
    /// Label-model coefficient per unit of reference importance.
    pub coefficient_scale: f64,
    /// Marginal overrides by feature name.
    pub marginals: BTreeMap<String, Marginal>,
    /// Per-feature probability that a cell is missing.
    pub missingness: BTreeMap<String, f64>,
    /// Mix of testing frequencies 1..=4 among testers.
    pub frequency_mix: [f64; 4],
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            target_rate: 0.05,
            coefficient_scale: 12.0,
            marginals: BTreeMap::new(),
            missingness: BTreeMap::new(),
            frequency_mix: [0.15, 0.45, 0.25, 0.15],
        }
    }
}

fn default_marginal(def: &FeatureDef) -> Marginal {
    match def.kind {
        FeatureKind::Continuous => {
            let (mean, sd) = match def.name.as_str() {
                "well_age" => (25.0, 15.0),
                "well_depth" => (45.0, 30.0),
                "well_tenure" => (18.0, 11.0),
                "age" => (56.0, 13.0),
                "residential_tenure" => (24.0, 14.0),
                "distance_to_septic" => (35.0, 18.0),
                "survey_duration" => (16.0, 6.0),
                "distance_to_farmyard" => (250.0, 150.0),
                _ => (0.0, 1.0),
            };
            Marginal::Normal { mean, sd }
        }
        FeatureKind::Binary => Marginal::Bernoulli { p: 0.5 },
        FeatureKind::Ordinal => {
            let (lo, hi) = def.range.unwrap_or((1.0, 5.0));
            Marginal::Weighted {
                weights: vec![1.0; (hi - lo) as usize + 1],
            }
        }
        FeatureKind::Categorical => Marginal::Weighted {
            weights: vec![1.0; def.categories.as_ref().map_or(1, Vec::len)],
        },
    }
}

fn draw_weighted(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn draw_value(def: &FeatureDef, marginal: &Marginal, rng: &mut impl Rng) -> Result<RawValue> {
    let bad = || Error::Config(format!("marginal {marginal:?} does not fit feature {:?}", def.name));
    Ok(match (def.kind, marginal) {
        (FeatureKind::Continuous, Marginal::Normal { mean, sd }) => {
            let z: f64 = StandardNormal.sample(rng);
            let mut v = mean + sd * z.clamp(-3.0, 3.0);
            if let Some((lo, hi)) = def.range {
                v = v.clamp(lo, hi);
            }
            RawValue::Num((v * 100.0).round() / 100.0)
        }
        (FeatureKind::Binary, Marginal::Bernoulli { p }) => {
            RawValue::Num(if rng.random::<f64>() < *p { 1.0 } else { 0.0 })
        }
        (FeatureKind::Ordinal, Marginal::Weighted { weights }) => {
            let lo = def.range.map_or(0.0, |r| r.0);
            RawValue::Num(lo + draw_weighted(weights, rng) as f64)
        }
        (FeatureKind::Categorical, Marginal::Weighted { weights }) => {
            let cats = def.categories.as_ref().ok_or_else(bad)?;
            if weights.len() != cats.len() {
                return Err(bad());
            }
            RawValue::Cat(cats[draw_weighted(weights, rng)].clone())
        }
        _ => return Err(bad()),
    })
}

fn initial_dynamic(index: usize, adopter: bool) -> DynamicState {
    DynamicState {
        month: (index % 12) as u8 + 1,
        months_since_last_test: if adopter { 6 } else { 24 },
        peer_norm: 0.0,
    }
}

/// Numeric encoding used by the label model: numbers as-is, categories by
/// their position in the schema.
fn numeric_code(def: &FeatureDef, value: &RawValue) -> f64 {
    match value {
        RawValue::Num(v) => *v,
        RawValue::Cat(c) => def.category_index(c).unwrap_or(0) as f64,
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Standardized importance-weighted driver score for every row.
fn driver_scores(schema: &FeatureSchema, rows: &[Vec<Option<RawValue>>]) -> Vec<f64> {
    let n = rows.len();
    let mut scores = vec![0.0; n];
    for (name, weight) in TOP_DRIVERS {
        let Some(j) = schema.index_of(name) else { continue };
        let def = &schema.features[j];
        let col: Vec<Option<f64>> = rows
            .iter()
            .map(|r| r[j].as_ref().map(|v| numeric_code(def, v)))
            .collect();
        let observed: Vec<f64> = col.iter().flatten().copied().collect();
        if observed.is_empty() {
            continue;
        }
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        let var = observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / observed.len() as f64;
        let sd = var.sqrt();
        for (s, v) in scores.iter_mut().zip(&col) {
            if let (Some(v), true) = (v, sd > 0.0) {
                *s += weight * (v - mean) / sd;
            }
        }
    }
    scores
}

/// Intercept giving mean testing probability `target` by bisection.
fn calibrate_intercept(linear: &[f64], target: f64) -> f64 {
    let rate = |b: f64| linear.iter().map(|x| sigmoid(b + x)).sum::<f64>() / linear.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Generate `n` synthetic respondents on the canonical schema.
///
/// Labels come from a logistic model over the standardized driver features
/// with coefficients proportional to their importances. The intercept is
/// bisected so the expected testing rate equals the target, and labels are
/// drawn by systematic unequal-probability sampling so the realised rate is
/// within `1/n` of that expectation.
pub fn synthesize_population(n: usize, seed: u64, calibration: &CalibrationSpec) -> Result<Population> {
    synthesize_with_schema(FeatureSchema::canonical(), n, seed, calibration)
}

pub fn synthesize_with_schema(
    schema: FeatureSchema,
    n: usize,
    seed: u64,
    calibration: &CalibrationSpec,
) -> Result<Population> {
    if n == 0 {
        return Err(Error::Config("population size must be at least 1".into()));
    }
    let target = calibration.target_rate;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config(format!(
            "target testing rate {target} must lie strictly between 0 and 1"
        )));
    }
    for name in calibration.marginals.keys().chain(calibration.missingness.keys()) {
        if schema.index_of(name).is_none() {
            return Err(Error::Config(format!("calibration names unknown feature {name:?}")));
        }
    }
    let marginals: Vec<Marginal> = schema
        .features
        .iter()
        .map(|d| {
            calibration
                .marginals
                .get(&d.name)
                .cloned()
                .unwrap_or_else(|| default_marginal(d))
        })
        .collect();

    let mut feature_rng = rng::substream(seed, 0);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let row = schema
            .features
            .iter()
            .zip(&marginals)
            .map(|(d, m)| draw_value(d, m, &mut feature_rng).map(Some))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }

    let linear: Vec<f64> = driver_scores(&schema, &rows)
        .into_iter()
        .map(|s| calibration.coefficient_scale * s)
        .collect();
    let intercept = calibrate_intercept(&linear, target);
    let probs: Vec<f64> = linear.iter().map(|x| sigmoid(intercept + x)).collect();
    let expected_rate = probs.iter().sum::<f64>() / n as f64;

    let mut label_rng = rng::substream(seed, 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut label_rng);
    let mut cumulative = label_rng.random::<f64>();
    let mut adopt = vec![false; n];
    for &i in &order {
        let before = cumulative.floor();
        cumulative += probs[i];
        adopt[i] = cumulative.floor() > before;
    }

    let mut miss_rng = rng::substream(seed, 2);
    let miss: Vec<f64> = schema
        .features
        .iter()
        .map(|d| calibration.missingness.get(&d.name).copied().unwrap_or(0.0))
        .collect();

    let agents = rows
        .into_iter()
        .enumerate()
        .map(|(i, mut raw)| {
            for (cell, q) in raw.iter_mut().zip(&miss) {
                if *q > 0.0 && miss_rng.random::<f64>() < *q {
                    *cell = None;
                }
            }
            let label_frequency = adopt[i]
                .then(|| draw_weighted(&calibration.frequency_mix, &mut label_rng) as u8 + 1);
            AgentRecord {
                agent_id: i as u64,
                raw,
                dynamic: initial_dynamic(i, adopt[i]),
                label_adoption: Some(adopt[i] as u8),
                label_frequency,
            }
        })
        .collect();

    Ok(Population {
        schema,
        agents,
        seed,
        provenance: Provenance::Synthetic {
            intercept,
            expected_rate,
        },
    })
}

impl Population {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn adoption_rate(&self) -> f64 {
        let labelled: Vec<u8> = self.agents.iter().filter_map(|a| a.label_adoption).collect();
        if labelled.is_empty() {
            return 0.0;
        }
        labelled.iter().map(|&l| l as f64).sum::<f64>() / labelled.len() as f64
    }

    /// Importance-weighted sum of standardized driver features per agent,
    /// the same score that drives the synthetic labels. Missing cells
    /// contribute nothing.
    pub fn driver_scores(&self) -> Vec<f64> {
        let rows: Vec<Vec<Option<RawValue>>> = self.agents.iter().map(|a| a.raw.clone()).collect();
        driver_scores(&self.schema, &rows)
    }

    /// First `n` agents, sharing the schema.
    pub fn head(&self, n: usize) -> Population {
        Population {
            schema: self.schema.clone(),
            agents: self.agents.iter().take(n).cloned().collect(),
            seed: self.seed,
            provenance: self.provenance.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["agent_id".to_string()];
        header.extend(self.schema.names().map(str::to_string));
        header.push("label_adoption".into());
        header.push("label_frequency".into());
        w.write_record(&header)?;
        for agent in &self.agents {
            let mut row = vec![agent.agent_id.to_string()];
            row.extend(
                agent
                    .raw
                    .iter()
                    .map(|v| v.as_ref().map(RawValue::to_cell).unwrap_or_default()),
            );
            row.push(agent.label_adoption.map(|l| l.to_string()).unwrap_or_default());
            row.push(agent.label_frequency.map(|l| l.to_string()).unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn parse_cell(def: &FeatureDef, cell: &str) -> Option<RawValue> {
    match def.kind {
        FeatureKind::Continuous | FeatureKind::Ordinal => {
            let v: f64 = cell.parse().ok()?;
            if !v.is_finite() {
                return None;
            }
            if def.kind == FeatureKind::Ordinal {
                let (lo, hi) = def.range?;
                if v.fract() != 0.0 || v < lo || v > hi {
                    return None;
                }
            }
            Some(RawValue::Num(v))
        }
        FeatureKind::Binary => match cell.to_ascii_lowercase().as_str() {
            "1" | "1.0" | "true" | "yes" => Some(RawValue::Num(1.0)),
            "0" | "0.0" | "false" | "no" => Some(RawValue::Num(0.0)),
            _ => None,
        },
        FeatureKind::Categorical => {
            let cats = def.categories.as_ref()?;
            cats.iter()
                .find(|c| c.eq_ignore_ascii_case(cell))
                .map(|c| RawValue::Cat(c.clone()))
        }
    }
}

/// Read a survey CSV against `schema`.
///
/// Headers are matched by name in any order. Empty cells are missing;
/// unparseable cells become missing and are counted per feature. Features
/// with more than 30% missing rows are excluded (cleared) with a warning.
pub fn ingest_csv(path: &Path, schema: &FeatureSchema) -> Result<Population> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, schema, &path.display().to_string())
}

pub fn ingest_reader<R: Read>(reader: R, schema: &FeatureSchema, source: &str) -> Result<Population> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();

    let mut id_col = None;
    let mut adopt_col = None;
    let mut freq_col = None;
    let mut feature_cols = vec![None; schema.len()];
    for (c, h) in headers.iter().enumerate() {
        match h {
            "agent_id" => id_col = Some(c),
            "label_adoption" => adopt_col = Some(c),
            "label_frequency" => freq_col = Some(c),
            _ => match schema.index_of(h) {
                Some(j) => feature_cols[j] = Some(c),
                None => return Err(Error::Schema(format!("unknown column {h:?}"))),
            },
        }
    }
    if let Some(j) = feature_cols.iter().position(Option::is_none) {
        return Err(Error::Schema(format!(
            "missing required column {:?}",
            schema.features[j].name
        )));
    }

    let mut unparseable = vec![0usize; schema.len()];
    let mut missing = vec![0usize; schema.len()];
    let mut agents = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let mut raw = Vec::with_capacity(schema.len());
        for (j, def) in schema.features.iter().enumerate() {
            let cell = record.get(feature_cols[j].unwrap()).unwrap_or("");
            let value = if cell.is_empty() {
                None
            } else {
                let v = parse_cell(def, cell);
                if v.is_none() {
                    unparseable[j] += 1;
                }
                v
            };
            if value.is_none() {
                missing[j] += 1;
            }
            raw.push(value);
        }
        let agent_id = match id_col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => s
                .parse()
                .map_err(|_| Error::Schema(format!("row {}: bad agent_id {s:?}", i + 1)))?,
            None => i as u64,
        };
        let label = |col: Option<usize>, lo: u8, hi: u8| -> Result<Option<u8>> {
            match col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
                None => Ok(None),
                Some(s) => match s.parse::<u8>() {
                    Ok(v) if (lo..=hi).contains(&v) => Ok(Some(v)),
                    _ => Err(Error::Schema(format!("row {}: bad label {s:?}", i + 1))),
                },
            }
        };
        let label_adoption = label(adopt_col, 0, 1)?;
        let mut label_frequency = label(freq_col, 1, 4)?;
        if label_frequency.is_some() && label_adoption != Some(1) {
            log::warn!("row {}: frequency label without adoption; dropped", i + 1);
            label_frequency = None;
        }
        agents.push(AgentRecord {
            agent_id,
            raw,
            dynamic: initial_dynamic(i, label_adoption == Some(1)),
            label_adoption,
            label_frequency,
        });
    }

    let rows = agents.len();
    let mut excluded = Vec::new();
    if rows > 0 {
        for (j, def) in schema.features.iter().enumerate() {
            let frac = missing[j] as f64 / rows as f64;
            if frac > EXCLUSION_THRESHOLD {
                log::warn!(
                    "feature {:?} is {:.0}% missing or unparseable; excluded",
                    def.name,
                    100.0 * frac
                );
                excluded.push(def.name.clone());
                for a in &mut agents {
                    a.raw[j] = None;
                }
            }
        }
    }

    Ok(Population {
        schema: schema.clone(),
        agents,
        seed: 0,
        provenance: Provenance::Ingested {
            source: source.to_string(),
            unparseable: schema
                .features
                .iter()
                .zip(&unparseable)
                .filter(|(_, &c)| c > 0)
                .map(|(d, &c)| (d.name.clone(), c))
                .collect(),
            excluded,
        },
    })
}
