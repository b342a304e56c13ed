//! Fine-tune desk baselines under a set of scenarios and print a table in
//! the shape of the scenario summary report.
//!
//! cargo run --release --example scenario_sweep -- --seeds 1,2 --ids 1,2,8,9 [--frequency]

use wellsim::sim::{sweep_scenarios, train_baselines, SimConfig, World, WorldConfig};

fn parse_list<T: std::str::FromStr>(args: &[String], flag: &str, default: &str) -> Vec<T> {
    let raw = args
        .iter()
        .position(|a| a == flag)
        .and_then(|i| args.get(i + 1))
        .map_or(default, String::as_str);
    raw.split(',').filter_map(|s| s.trim().parse().ok()).collect()
}

fn main() -> wellsim::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let seeds: Vec<u64> = parse_list(&args, "--seeds", "1,2");
    let ids: Vec<u8> = parse_list(&args, "--ids", "1,2,8,9");
    let with_frequency = args.iter().any(|a| a == "--frequency");

    let world = World::build(&WorldConfig::default())?;
    let mut base = SimConfig::desk();
    base.stop_at_convergence = !args.iter().any(|a| a == "--full-budget");
    let (baselines, runs) = train_baselines(&world, &base, &seeds, with_frequency)?;
    for r in &runs {
        println!(
            "baseline seed {}: testers {} converged {:?} episodes {}",
            r.seed,
            r.adoption.final_testers,
            r.adoption.converged_at,
            r.adoption.episodes_run()
        );
        if let Some(f) = &r.frequency {
            println!("  frequency {:?} seasons {:?}", f.final_frequency, f.final_season);
        }
    }

    let table = sweep_scenarios(&world, &base, &ids, &seeds, &baselines)?;
    println!("{:>3} {:<52} {:>6} {:>8} {:>6} {:>7} {:>7}", "id", "name", "weight", "testers", "sd", "episodes", "mse");
    for agg in table.values() {
        println!(
            "{:>3} {:<52} {:>6.1} {:>8.1} {:>6.2} {:>7.0} {:>7.3}",
            agg.id,
            agg.name,
            agg.combined_weight,
            agg.testers.mean,
            agg.testers.sd,
            agg.episodes_to_convergence.mean,
            agg.mse.mean
        );
        if let (Some(f), Some(s)) = (agg.frequency, agg.season) {
            println!("    a_f 1..4 {f:.1?}   Winter/Spring/Summer/Autumn {s:.1?}");
        }
    }
    Ok(())
}
