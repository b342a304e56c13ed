//! Train the adoption baseline on the desk preset and print its learning
//! curve every 25 episodes.
//!
//! cargo run --release --example train_baseline -- [seed] [agents] [episodes]

use std::time::Instant;

use wellsim::sim::{train_run, SimConfig, World, WorldConfig};

fn main() -> wellsim::Result<()> {
    env_logger::init();
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut config = SimConfig::desk();
    config.seed = args.first().copied().unwrap_or(1);
    if let Some(&n) = args.get(1) {
        config.agents = n as usize;
    }
    if let Some(&e) = args.get(2) {
        config.episodes = e as usize;
    }

    let t = Instant::now();
    let world = World::build(&WorldConfig::default())?;
    println!("world: {} agents, feature sets {:?} ({:.1?})", world.len(), world.feature_sets.keys().collect::<Vec<_>>(), t.elapsed());
    println!("top-20 features: {:?}", world.feature_sets[&20]);

    let t = Instant::now();
    let (result, _) = train_run(&world, &config, None)?;
    for m in result.per_episode.iter().filter(|m| m.episode % 25 == 0 || m.episode == 1) {
        println!(
            "episode {:4}  testers {:4}  reward {:8.3}  eps {:.3}  loss {}",
            m.episode,
            m.testers,
            m.mean_reward,
            m.epsilon,
            m.loss.map_or("-".into(), |l| format!("{l:.4}"))
        );
    }
    println!(
        "final testers {}/{} ({:.1}%), converged at {:?}, held-out mse {:.4} ({:.1?})",
        result.final_testers,
        result.agents,
        result.decision_performance_pct,
        result.converged_at,
        result.final_mse,
        t.elapsed()
    );
    Ok(())
}
