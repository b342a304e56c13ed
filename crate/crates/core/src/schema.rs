//! Survey feature schema.
//!
//! The canonical schema has 90 raw attributes per respondent. Positional
//! order is part of the contract: design matrices, CSV exports and state
//! vectors all index features by their position here.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "well-survey/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Ordinal,
    Categorical,
    Binary,
}

impl FeatureKind {
    /// Continuous and ordinal features are carried as numbers and scaled.
    pub fn is_scaled(self) -> bool {
        matches!(self, FeatureKind::Continuous | FeatureKind::Ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    /// Inclusive value range for ordinal and continuous features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

impl FeatureDef {
    pub fn continuous(name: &str, unit: &str, range: (f64, f64)) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            categories: None,
            unit: Some(unit.to_string()),
            range: Some(range),
        }
    }

    pub fn ordinal(name: &str, lo: i32, hi: i32) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Ordinal,
            categories: None,
            unit: None,
            range: Some((lo as f64, hi as f64)),
        }
    }

    pub fn binary(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Binary,
            categories: None,
            unit: None,
            range: Some((0.0, 1.0)),
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            categories: Some(categories.iter().map(|c| c.to_string()).collect()),
            unit: None,
            range: None,
        }
    }

    pub fn category_index(&self, value: &str) -> Option<usize> {
        self.categories
            .as_ref()
            .and_then(|cats| cats.iter().position(|c| c == value))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: String,
    pub features: Vec<FeatureDef>,
}

/// The twenty strongest drivers of testing behaviour with their reference
/// mean |SHAP| importances, strongest first.
pub const TOP_DRIVERS: [(&str, f64); 20] = [
    ("information_seeking_behaviour", 0.14),
    ("well_awareness", 0.12),
    ("treatment_system", 0.11),
    ("maintenance_confidence", 0.11),
    ("total_barriers", 0.09),
    ("ewe_impact_consequences", 0.08),
    ("climate_change_concern", 0.08),
    ("ewe_impact_likelihood", 0.07),
    ("income", 0.06),
    ("well_age", 0.06),
    ("well_depth", 0.05),
    ("flood_history_importance", 0.05),
    ("ewe_risk_perception", 0.04),
    ("ewe_impact_severity", 0.04),
    ("well_tenure", 0.04),
    ("age", 0.04),
    ("residential_tenure", 0.04),
    ("well_status_awareness", 0.03),
    ("education", 0.03),
    ("province", 0.02),
];

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self> {
        let schema = Self {
            version: SCHEMA_VERSION.to_string(),
            features,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for def in &self.features {
            if !seen.insert(def.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name {:?}", def.name)));
            }
            if def.kind == FeatureKind::Categorical
                && def.categories.as_ref().is_none_or(|c| c.is_empty())
            {
                return Err(Error::Schema(format!(
                    "categorical feature {:?} has no categories",
                    def.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&FeatureDef> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The 90-attribute well-user survey schema.
    pub fn canonical() -> Self {
        use FeatureDef as F;
        let likert = |name: &str| F::ordinal(name, 1, 5);
        let features = vec![
            // strongest drivers
            likert("information_seeking_behaviour"),
            F::ordinal("well_awareness", 0, 14),
            F::binary("treatment_system"),
            likert("maintenance_confidence"),
            F::ordinal("total_barriers", 0, 8),
            likert("ewe_impact_consequences"),
            likert("climate_change_concern"),
            likert("ewe_impact_likelihood"),
            F::ordinal("income", 1, 6),
            F::continuous("well_age", "years", (0.0, 120.0)),
            F::continuous("well_depth", "m", (1.0, 250.0)),
            likert("flood_history_importance"),
            F::continuous("ewe_risk_perception", "score", (-4.0, 4.0)),
            likert("ewe_impact_severity"),
            F::continuous("well_tenure", "years", (0.0, 80.0)),
            F::continuous("age", "years", (18.0, 100.0)),
            F::continuous("residential_tenure", "years", (0.0, 90.0)),
            F::binary("well_status_awareness"),
            likert("education"),
            F::categorical("province", &["connacht", "leinster", "munster", "ulster"]),
            // awareness domains
            F::binary("aware_well_age"),
            F::binary("aware_well_depth"),
            F::ordinal("aware_well_features", 0, 5),
            F::binary("aware_treatment"),
            F::binary("aware_previous_test"),
            F::ordinal("aware_pathogens", 0, 6),
            F::ordinal("aware_pathogen_sources", 0, 4),
            // supply
            F::categorical("supply_type", &["dug", "drilled", "spring", "unknown"]),
            F::categorical("well_use", &["domestic", "agricultural", "mixed"]),
            F::categorical("wastewater_disposal", &["dwwts", "public_sewer", "other"]),
            F::categorical(
                "water_treatment_type",
                &["none", "uv", "filter", "softener", "multiple"],
            ),
            F::binary("installed_during_residence"),
            F::continuous("distance_to_septic", "m", (0.0, 300.0)),
            F::binary("livestock_nearby"),
            F::binary("well_cap_present"),
            F::binary("well_in_flood_zone"),
            F::binary("shared_supply"),
            // household
            F::categorical("gender", &["female", "male", "other"]),
            F::ordinal("household_size", 1, 8),
            F::binary("children_in_household"),
            F::binary("farm_household"),
            F::categorical(
                "employment_status",
                &["employed", "self_employed", "retired", "other"],
            ),
            F::binary("owns_property"),
            F::binary("internet_access"),
            F::categorical("rurality", &["remote", "rural", "peri_urban"]),
            F::binary("household_elderly"),
            likert("income_stability"),
            // health and supply history
            F::binary("gi_illness_history"),
            F::binary("gi_illness_recent"),
            F::binary("boil_notice_experienced"),
            F::binary("flooding_experienced"),
            F::binary("taste_odour_issues"),
            F::binary("colour_issues"),
            F::binary("previous_contamination"),
            F::binary("medical_vulnerability"),
            // cognitive scores
            likert("test_cost_perception"),
            likert("trust_local_authority"),
            likert("trust_epa"),
            likert("trust_hse"),
            likert("trust_scientists"),
            likert("peer_testing_norm"),
            likert("injunctive_norm"),
            likert("descriptive_norm"),
            likert("health_risk_perception"),
            likert("supply_risk_perception"),
            likert("contamination_concern"),
            likert("groundwater_belief_1"),
            likert("groundwater_belief_2"),
            likert("groundwater_belief_3"),
            likert("groundwater_belief_4"),
            likert("testing_attitude_1"),
            likert("testing_attitude_2"),
            likert("testing_attitude_3"),
            likert("testing_attitude_4"),
            likert("self_efficacy_1"),
            likert("self_efficacy_2"),
            likert("self_efficacy_3"),
            F::ordinal("knowledge_score", 0, 10),
            likert("media_exposure"),
            F::continuous("survey_duration", "min", (2.0, 60.0)),
            // environment
            likert("rainfall_perception"),
            likert("drought_concern"),
            likert("agricultural_intensity"),
            F::continuous("distance_to_farmyard", "m", (0.0, 1000.0)),
            // policy attitudes
            likert("support_free_testing"),
            likert("support_regulation"),
            likert("willingness_to_pay"),
            F::binary("aware_grant_scheme"),
            F::ordinal("information_sources", 0, 6),
            F::binary("heard_of_stec"),
        ];
        Self::new(features).expect("canonical schema is valid")
    }
}
