//! Well-owner awareness scoring.
//!
//! Seven domains contribute points: five recall domains worth one point each
//! except well features (one point per identified feature, at most five),
//! pathogen recognition (0–3) and pathogen-source recognition (0–2). The
//! maximum total is 14.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_AWARENESS: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AwarenessDomain {
    WellAge,
    WellDepth,
    WellFeatures,
    TreatmentUse,
    PreviousTest,
    RelevantPathogens,
    PathogenSources,
}

const WELL_AGE_BANDS: [&str; 6] = [
    "0-5 years",
    "5-10 years",
    "10-20 years",
    "20-30 years",
    "30-50 years",
    "> 50 years",
];
const WELL_DEPTH_BANDS: [&str; 6] = [
    "< 10 ft (3m)",
    "10-50 ft (3-15m)",
    "50-100 ft (15-30m)",
    "100-200 ft (30-60m)",
    "200-300 ft (60-90m)",
    "> 300 ft (90m)",
];
const WELL_FEATURES: [&str; 6] = [
    "well cap present",
    "damaged well cap",
    "pump at base of well",
    "cement well casing",
    "damaged well casing",
    "buried well",
];
const PATHOGENS: [&str; 6] = [
    "stec",
    "giardia",
    "salmonella",
    "cryptosporidium",
    "campylobacter",
    "norovirus",
];
const PATHOGEN_SOURCES: [&str; 4] = [
    "domestic animals",
    "grazing animals",
    "farmyards",
    "septic tanks",
];

impl AwarenessDomain {
    pub const ALL: [AwarenessDomain; 7] = [
        AwarenessDomain::WellAge,
        AwarenessDomain::WellDepth,
        AwarenessDomain::WellFeatures,
        AwarenessDomain::TreatmentUse,
        AwarenessDomain::PreviousTest,
        AwarenessDomain::RelevantPathogens,
        AwarenessDomain::PathogenSources,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AwarenessDomain::WellAge => "well_age",
            AwarenessDomain::WellDepth => "well_depth",
            AwarenessDomain::WellFeatures => "well_features",
            AwarenessDomain::TreatmentUse => "treatment_use",
            AwarenessDomain::PreviousTest => "previous_test",
            AwarenessDomain::RelevantPathogens => "relevant_pathogens",
            AwarenessDomain::PathogenSources => "pathogen_sources",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        let key = normalize(name).replace([' ', '-'], "_");
        Self::ALL.into_iter().find(|d| d.name() == key)
    }

    pub fn max_points(self) -> u32 {
        match self {
            AwarenessDomain::WellFeatures => 5,
            AwarenessDomain::RelevantPathogens => 3,
            AwarenessDomain::PathogenSources => 2,
            _ => 1,
        }
    }

    /// Points for one response. Count domains accept `aware-of-N`, `none`,
    /// or a `;`-separated list of recognised items.
    pub fn score(self, response: &str) -> Result<u32> {
        let r = normalize(response);
        let unknown = || {
            Error::Schema(format!(
                "unrecognised response {response:?} for awareness domain {}",
                self.name()
            ))
        };
        match self {
            AwarenessDomain::WellAge => band_points(&r, &WELL_AGE_BANDS).ok_or_else(unknown),
            AwarenessDomain::WellDepth => band_points(&r, &WELL_DEPTH_BANDS).ok_or_else(unknown),
            AwarenessDomain::TreatmentUse | AwarenessDomain::PreviousTest => match r.as_str() {
                "yes" | "no" | "aware" => Ok(1),
                "don't know" | "unaware" => Ok(0),
                _ => Err(unknown()),
            },
            AwarenessDomain::WellFeatures => {
                let n = count_items(&r, &WELL_FEATURES).ok_or_else(unknown)?;
                Ok(n.min(5))
            }
            AwarenessDomain::RelevantPathogens => {
                let n = count_items(&r, &PATHOGENS).ok_or_else(unknown)?;
                Ok(match n {
                    0 => 0,
                    1 | 2 => 1,
                    3 | 4 => 2,
                    _ => 3,
                })
            }
            AwarenessDomain::PathogenSources => {
                let n = count_items(&r, &PATHOGEN_SOURCES).ok_or_else(unknown)?;
                Ok(match n {
                    0 => 0,
                    1 | 2 => 1,
                    _ => 2,
                })
            }
        }
    }
}

fn normalize(s: &str) -> String {
    s.trim()
        .replace(['\u{2019}', '\u{2018}'], "'")
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn band_points(r: &str, bands: &[&str]) -> Option<u32> {
    match r {
        "don't know" | "unaware" => Some(0),
        "aware" => Some(1),
        _ if bands.iter().any(|b| b.to_lowercase() == r) => Some(1),
        _ => None,
    }
}

fn count_items(r: &str, items: &[&str]) -> Option<u32> {
    if r == "none" || r.is_empty() {
        return Some(0);
    }
    if let Some(n) = r.strip_prefix("aware-of-").or_else(|| r.strip_prefix("aware of ")) {
        let n: u32 = n.trim().parse().ok()?;
        return (n as usize <= items.len()).then_some(n);
    }
    let mut seen = Vec::new();
    for part in r.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let idx = items.iter().position(|i| *i == part)?;
        if !seen.contains(&idx) {
            seen.push(idx);
        }
    }
    Some(seen.len() as u32)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwarenessScore {
    pub components: BTreeMap<String, u32>,
    pub total: u32,
}

/// Score a set of answers keyed by domain name.
pub fn score_awareness(answers: &BTreeMap<String, String>) -> Result<AwarenessScore> {
    let mut components = BTreeMap::new();
    for (domain, response) in answers {
        let d = AwarenessDomain::parse(domain)
            .ok_or_else(|| Error::Schema(format!("unknown awareness domain {domain:?}")))?;
        components.insert(d.name().to_string(), d.score(response)?);
    }
    let total = components.values().sum();
    debug_assert!(total <= MAX_AWARENESS);
    Ok(AwarenessScore { components, total })
}
