//! Raw population to numeric design matrix: exclusion of sparse features,
//! median/mode imputation, one-hot encoding, IQR outlier flags and
//! standardization.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Population, RawValue, EXCLUSION_THRESHOLD};
use crate::schema::FeatureKind;

pub const TRANSFORM_FORMAT_VERSION: u32 = 1;

/// Imputation share above which a warning is logged.
pub const IMPUTATION_WARN_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fill {
    Num(f64),
    Cat(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub name: String,
    pub kind: FeatureKind,
    pub fill: Fill,
    /// Centre and scale; identity (0, 1) for unscaled kinds. A zero scale
    /// marks a constant column that maps to zeros.
    pub mean: f64,
    pub sd: f64,
    /// IQR fences on the imputed raw scale (scaled kinds only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fences: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl FeatureParams {
    pub fn width(&self) -> usize {
        self.categories.as_ref().map_or(1, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTransform {
    pub format_version: u32,
    pub schema_version: String,
    pub features: Vec<FeatureParams>,
    pub dropped: Vec<String>,
    pub columns: Vec<String>,
}

impl FittedTransform {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        if t.format_version != TRANSFORM_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "transform format_version {} is not supported",
                t.format_version
            )));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: Vec<String>,
    pub rows: Array2<f64>,
    pub flags: Array2<bool>,
    pub agent_ids: Vec<u64>,
    pub transform: FittedTransform,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Columns named in `names`, in that order.
    pub fn select(&self, names: &[String]) -> Result<Array2<f64>> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::Schema(format!("design matrix has no column {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.rows.select(ndarray::Axis(1), &idx))
    }

    /// `agent_id` followed by every derived column.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(std::iter::once("agent_id").chain(self.columns.iter().map(String::as_str)))?;
        for (id, row) in self.agent_ids.iter().zip(self.rows.rows()) {
            w.write_record(std::iter::once(id.to_string()).chain(row.iter().map(|v| v.to_string())))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn outlier_count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_type7(&v, 0.5)
}

/// IQR fences `[Q1 − 1.5·IQR, Q3 + 1.5·IQR]`.
pub fn iqr_fences(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_type7(&v, 0.25);
    let q3 = quantile_type7(&v, 0.75);
    let iqr = q3 - q1;
    (q1 - 1.5 * iqr, q3 + 1.5 * iqr)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn numeric(value: &RawValue) -> Option<f64> {
    value.as_num()
}

/// Fit the preprocessing pipeline on `pop` and transform it.
pub fn fit_transform(pop: &Population) -> Result<DesignMatrix> {
    let fitted = fit(pop)?;
    apply(&fitted, pop)
}

pub fn fit(pop: &Population) -> Result<FittedTransform> {
    if pop.is_empty() {
        return Err(Error::Config("cannot fit preprocessing on an empty population".into()));
    }
    let n = pop.len();
    let mut features = Vec::new();
    let mut dropped = Vec::new();
    for (j, def) in pop.schema.features.iter().enumerate() {
        let cells: Vec<Option<&RawValue>> = pop.agents.iter().map(|a| a.raw[j].as_ref()).collect();
        let observed = cells.iter().filter(|c| c.is_some()).count();
        let missing_frac = 1.0 - observed as f64 / n as f64;
        if observed == 0 || missing_frac > EXCLUSION_THRESHOLD {
            log::warn!(
                "feature {:?} is {:.0}% missing; excluded",
                def.name,
                100.0 * missing_frac
            );
            dropped.push(def.name.clone());
            continue;
        }
        if missing_frac > IMPUTATION_WARN_THRESHOLD {
            log::warn!(
                "feature {:?} imputes {:.0}% of rows",
                def.name,
                100.0 * missing_frac
            );
        }
        let params = if def.kind == FeatureKind::Categorical {
            let cats = def.categories.clone().unwrap_or_default();
            let mut counts = vec![0usize; cats.len()];
            for c in cells.iter().flatten() {
                if let Some(k) = c.as_cat().and_then(|c| def.category_index(c)) {
                    counts[k] += 1;
                }
            }
            // mode; ties go to the earliest category
            let mode = (0..cats.len())
                .max_by(|a, b| counts[*a].cmp(&counts[*b]).then(b.cmp(a)))
                .unwrap_or(0);
            FeatureParams {
                name: def.name.clone(),
                kind: def.kind,
                fill: Fill::Cat(cats.get(mode).cloned().unwrap_or_default()),
                mean: 0.0,
                sd: 1.0,
                fences: None,
                categories: Some(cats),
            }
        } else {
            let values: Vec<f64> = cells.iter().flatten().filter_map(|v| numeric(v)).collect();
            if values.is_empty() {
                return Err(Error::Schema(format!(
                    "feature {:?} has no numeric observations",
                    def.name
                )));
            }
            let med = median(&values);
            let imputed: Vec<f64> = cells
                .iter()
                .map(|c| c.and_then(numeric).unwrap_or(med))
                .collect();
            let (mean, sd, fences) = if def.kind.is_scaled() {
                let (mean, sd) = mean_sd(&imputed);
                if sd == 0.0 {
                    log::warn!("feature {:?} has zero variance; standardized to zeros", def.name);
                }
                (mean, sd, Some(iqr_fences(&imputed)))
            } else {
                (0.0, 1.0, None)
            };
            FeatureParams {
                name: def.name.clone(),
                kind: def.kind,
                fill: Fill::Num(med),
                mean,
                sd,
                fences,
                categories: None,
            }
        };
        features.push(params);
    }
    let columns = features
        .iter()
        .flat_map(|f| match &f.categories {
            Some(cats) => cats.iter().map(|c| format!("{}={}", f.name, c)).collect(),
            None => vec![f.name.clone()],
        })
        .collect();
    Ok(FittedTransform {
        format_version: TRANSFORM_FORMAT_VERSION,
        schema_version: pop.schema.version.clone(),
        features,
        dropped,
        columns,
    })
}

/// Apply fitted parameters without refitting.
pub fn apply(transform: &FittedTransform, pop: &Population) -> Result<DesignMatrix> {
    let n = pop.len();
    let p = transform.columns.len();
    let mut rows = Array2::zeros((n, p));
    let mut flags = Array2::from_elem((n, p), false);
    let mut col = 0;
    for f in &transform.features {
        let j = pop.schema.index_of(&f.name).ok_or_else(|| {
            Error::Schema(format!("feature {:?} is in the transform but not the population", f.name))
        })?;
        match (&f.categories, &f.fill) {
            (Some(cats), Fill::Cat(mode)) => {
                for (i, agent) in pop.agents.iter().enumerate() {
                    let value = match agent.raw[j].as_ref() {
                        None => Some(mode.as_str()),
                        Some(RawValue::Cat(c)) => Some(c.as_str()),
                        Some(RawValue::Num(_)) => None,
                    };
                    match value.and_then(|v| cats.iter().position(|c| c == v)) {
                        Some(k) => rows[[i, col + k]] = 1.0,
                        None => log::warn!(
                            "agent {}: unseen category {:?} for {:?}; zero block",
                            agent.agent_id,
                            agent.raw[j],
                            f.name
                        ),
                    }
                }
            }
            (None, Fill::Num(med)) => {
                for (i, agent) in pop.agents.iter().enumerate() {
                    let x = agent.raw[j].as_ref().and_then(numeric).unwrap_or(*med);
                    if let Some((lo, hi)) = f.fences {
                        flags[[i, col]] = x < lo || x > hi;
                    }
                    rows[[i, col]] = if f.sd == 0.0 { 0.0 } else { (x - f.mean) / f.sd };
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "transform entry for {:?} mixes categorical and numeric parameters",
                    f.name
                )))
            }
        }
        col += f.width();
    }
    Ok(DesignMatrix {
        columns: transform.columns.clone(),
        rows,
        flags,
        agent_ids: pop.agents.iter().map(|a| a.agent_id).collect(),
        transform: transform.clone(),
    })
}
