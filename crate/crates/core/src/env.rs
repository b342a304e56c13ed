//! Seasonal environment, reward functions and the intervention scenario
//! registry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Autumn,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Winter, Season::Spring, Season::Summer, Season::Autumn];

    /// Slot in state encodings and histograms.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Season::Winter => "Winter",
            Season::Spring => "Spring",
            Season::Summer => "Summer",
            Season::Autumn => "Autumn",
        }
    }
}

pub fn season_of(month: u8) -> Result<Season> {
    match month {
        12 | 1 | 2 => Ok(Season::Winter),
        3..=5 => Ok(Season::Spring),
        6..=8 => Ok(Season::Summer),
        9..=11 => Ok(Season::Autumn),
        _ => Err(Error::Config(format!("month {month} outside 1..=12"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonProfile {
    pub season: Season,
    pub months: Vec<u8>,
    pub rainfall_mm_per_month: f64,
    /// Contamination-risk weight, also used as the reward multiplier.
    pub risk_weight: f64,
}

pub fn season_table() -> Vec<SeasonProfile> {
    let p = |season, months: &[u8], rainfall, risk_weight| SeasonProfile {
        season,
        months: months.to_vec(),
        rainfall_mm_per_month: rainfall,
        risk_weight,
    };
    vec![
        p(Season::Winter, &[12, 1, 2], 130.0, 0.6),
        p(Season::Spring, &[3, 4, 5], 100.0, 0.8),
        p(Season::Summer, &[6, 7, 8], 80.0, 0.4),
        p(Season::Autumn, &[9, 10, 11], 130.0, 1.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Adoption,
    Annual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: u8,
    pub family: Family,
    pub name: String,
    pub weights: Vec<f64>,
    pub combined_weight: f64,
    pub description: String,
}

/// Reward constants for both models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub test: f64,
    pub no_test: f64,
    /// Base reward for frequency actions 1..=4.
    pub frequency: [f64; 4],
    /// Multiplier by season index (Winter, Spring, Summer, Autumn).
    pub season_multiplier: [f64; 4],
    /// Tests per year implied by each frequency action; scales the
    /// adoption-family bonus in the frequency model.
    pub tests_per_year: [f64; 4],
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            test: 1.0,
            no_test: -1.0,
            frequency: [0.5, 1.0, 2.5, 2.0],
            season_multiplier: [0.6, 0.8, 0.4, 1.0],
            tests_per_year: [3.0, 1.0, 1.0 / 3.0, 0.1],
        }
    }
}

impl RewardSpec {
    pub fn multiplier(&self, season: Season) -> f64 {
        self.season_multiplier[season.index()]
    }

    /// Reward for the yes/no testing decision.
    pub fn adoption_reward(&self, action: usize, scenario: Option<&ScenarioSpec>, season: Season) -> f64 {
        if action == 0 {
            return self.no_test;
        }
        let bonus = scenario
            .filter(|s| s.family == Family::Adoption)
            .map_or(0.0, |s| s.combined_weight);
        (self.test + bonus) * self.multiplier(season)
    }

    /// Reward for frequency action `a_f` in 1..=4.
    ///
    /// Annual-family scenarios add their weight to the at-least-annual
    /// actions. Adoption-family scenarios add their weight once per implied
    /// test per year, so strong interventions favour frequent testing.
    pub fn frequency_reward(&self, a_f: u8, scenario: Option<&ScenarioSpec>, season: Season) -> Result<f64> {
        if !(1..=4).contains(&a_f) {
            return Err(Error::Config(format!("frequency action {a_f} outside 1..=4")));
        }
        let i = a_f as usize - 1;
        let bonus = match scenario {
            Some(s) if s.family == Family::Annual && a_f <= 2 => s.combined_weight,
            Some(s) if s.family == Family::Adoption => s.combined_weight * self.tests_per_year[i],
            _ => 0.0,
        };
        Ok((self.frequency[i] + bonus) * self.multiplier(season))
    }
}

pub fn adoption_reward(action: usize, scenario: Option<&ScenarioSpec>, season: Season) -> f64 {
    RewardSpec::default().adoption_reward(action, scenario, season)
}

pub fn frequency_reward(a_f: u8, scenario: Option<&ScenarioSpec>, season: Season) -> Result<f64> {
    RewardSpec::default().frequency_reward(a_f, scenario, season)
}

pub fn scenario_registry() -> Vec<ScenarioSpec> {
    let s = |id, family, name: &str, weights: &[f64], description: &str| ScenarioSpec {
        id,
        family,
        name: name.to_string(),
        weights: weights.to_vec(),
        combined_weight: weights.iter().sum(),
        description: description.to_string(),
    };
    use Family::{Adoption, Annual};
    vec![
        s(1, Adoption, "Incentivised well testing", &[0.4],
          "Incentivised well testing will increase the probability of well testing"),
        s(2, Adoption, "Free well testing", &[0.9],
          "Free well testing will increase the probability of well testing"),
        s(3, Adoption, "Household health risk messaging", &[0.3],
          "Messaging about household health risks with case studies will increase the probability of well testing"),
        s(4, Adoption, "Domestic wastewater treatment system messaging", &[0.2],
          "Messaging about DWWTS contamination risks with case studies will increase the probability of well testing"),
        s(5, Adoption, "Implementation of information campaign", &[0.4],
          "Communication of information on testing and contamination risk will increase the probability of well testing"),
        s(6, Adoption, "Adjusting peer influence", &[0.4],
          "Altering descriptive and injunctive norms and trust in peer advice will increase the probability of well testing"),
        s(7, Adoption, "Regulation", &[0.7],
          "Wider DWWTS inspection and tests during property transactions will increase the probability of well testing"),
        s(8, Adoption, "Free well testing + intensive information campaign", &[0.9, 0.4],
          "Free well testing combined with a thorough risk communication campaign will increase the probability of well testing"),
        s(9, Adoption, "Free well testing + regulation", &[0.9, 0.7],
          "Free well testing combined with regulation will increase the probability of well testing"),
        s(10, Adoption, "Gender-focused messaging", &[0.4],
          "Awareness raising for females and extreme-weather risk messaging for males will increase well testing"),
        s(11, Annual, "Messaging about rainfall impacts", &[0.2],
          "Messaging on heavy rainfall contamination impacts raises the probability of annual testing"),
        s(12, Annual, "Index of test result", &[0.2],
          "Provision of a contamination-positive test result raises the probability of annual testing"),
        s(13, Annual, "Messaging about regular maintenance", &[0.2],
          "Messaging on testing as regular maintenance raises the probability of annual testing"),
        s(14, Annual, "Implementation of information campaign (annual)", &[0.4],
          "Communication of information on testing and contamination risk raises the probability of annual testing"),
    ]
}

/// Look up a scenario by numeric id or case-insensitive name.
pub fn find_scenario(key: &str) -> Result<ScenarioSpec> {
    let registry = scenario_registry();
    let found = match key.trim().parse::<u8>() {
        Ok(id) => registry.into_iter().find(|s| s.id == id),
        Err(_) => registry.into_iter().find(|s| s.name.eq_ignore_ascii_case(key.trim())),
    };
    found.ok_or_else(|| Error::Config(format!("no scenario with id or name {key:?} (ids are 1..=14)")))
}
