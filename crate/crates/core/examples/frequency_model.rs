//! Train the adoption model, then the frequency model behind it, and show
//! which testing interval and season the testers settle on.
//!
//! cargo run --release --example frequency_model -- [seed] [scenario]

use wellsim::sim::{train_run, Model, SimConfig, World, WorldConfig};

const SEASONS: [&str; 4] = ["Winter", "Spring", "Summer", "Autumn"];
const INTERVALS: [&str; 4] = ["2-3x/year", "annual", "every few years", "once"];

fn main() -> wellsim::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let world = World::build(&WorldConfig::default())?;
    let mut adoption = SimConfig::desk();
    adoption.seed = args.first().copied().unwrap_or(1);
    adoption.scenario = args.get(1).map(|&s| s as u8);

    let (gate, ckpt) = train_run(&world, &adoption, None)?;
    println!("adoption: {} of {} agents test", gate.final_testers, gate.agents);

    let frequency = SimConfig {
        model: Model::Frequency,
        ..adoption
    };
    let (run, _) = train_run(&world, &frequency, Some(ckpt.learner.net))?;
    println!("frequency model, mean of the last {} episodes:", frequency.convergence.window);
    for (name, n) in INTERVALS.iter().zip(run.final_frequency) {
        println!("  {name:<16} {n}");
    }
    println!("first test by season:");
    for (name, n) in SEASONS.iter().zip(run.final_season) {
        println!("  {name:<16} {n}");
    }
    println!("modal interval: {}", INTERVALS[run.modal_frequency() - 1]);
    Ok(())
}
