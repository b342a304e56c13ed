//! Score two survey respondents on the 14-point well-awareness index.

use std::collections::BTreeMap;

use wellsim::awareness::{score_awareness, AwarenessDomain};

fn main() -> wellsim::Result<()> {
    let respondents = [
        (
            "careful owner",
            vec![
                ("well_age", "20-30 years"),
                ("well_depth", "100-200 ft (30-60m)"),
                ("well_features", "Well cap present; Cement well casing; Pump at base of well"),
                ("treatment_use", "Yes"),
                ("previous_test", "Yes"),
                ("relevant_pathogens", "STEC; Giardia; Cryptosporidium; Norovirus"),
                ("pathogen_sources", "farmyards; septic tanks; grazing animals"),
            ],
        ),
        (
            "new owner",
            vec![
                ("well_age", "Don't know"),
                ("well_depth", "Don't know"),
                ("well_features", "none"),
                ("treatment_use", "No"),
                ("previous_test", "No"),
                ("relevant_pathogens", "aware-of-1"),
                ("pathogen_sources", "none"),
            ],
        ),
    ];

    for (who, answers) in respondents {
        let answers: BTreeMap<String, String> = answers.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        let score = score_awareness(&answers)?;
        println!("{who}: {}/14", score.total);
        for d in AwarenessDomain::ALL {
            println!("  {:<20} {}/{}", d.name(), score.components[d.name()], d.max_points());
        }
    }
    Ok(())
}
