//! Generate a calibrated synthetic survey population and write it as CSV.
//!
//! cargo run --example synthesize_population -- [n] [seed] > population.csv

use wellsim::population::{synthesize_population, CalibrationSpec, Provenance};

fn main() -> wellsim::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(561) as usize;
    let seed = args.get(1).copied().unwrap_or(7);

    let calibration = CalibrationSpec::default();
    let pop = synthesize_population(n, seed, &calibration)?;
    if let Provenance::Synthetic { intercept, expected_rate } = &pop.provenance {
        eprintln!(
            "{} agents, {} features, target rate {:.3}, expected {expected_rate:.3} (intercept {intercept:.3}), realised {:.3}",
            pop.len(),
            pop.schema.len(),
            calibration.target_rate,
            pop.adoption_rate()
        );
    }
    let mut counts = [0usize; 4];
    for f in pop.agents.iter().filter_map(|a| a.label_frequency) {
        counts[f as usize - 1] += 1;
    }
    eprintln!("testers by frequency (2-3x/yr, annual, every few years, once): {counts:?}");
    pop.write_csv(std::io::stdout().lock())
}
