//! Interrupt a training run, save it with its replay memory, resume from
//! disk and confirm the result matches an uninterrupted run.

use wellsim::sim::{RunCheckpoint, SimConfig, Trainer, World, WorldConfig};

fn main() -> wellsim::Result<()> {
    let world = World::build(&WorldConfig::default())?;
    let mut cfg = SimConfig::desk();
    cfg.agents = 40;
    cfg.episodes = 60;
    cfg.convergence.window = 20;
    cfg.convergence.patience = 20;
    let cohort = world.cohort(cfg.feature_set, cfg.agents, &cfg.barrier)?;

    let mut straight = Trainer::new(cohort.clone(), cfg.clone(), None)?;
    straight.run()?;

    let mut first = Trainer::new(cohort.clone(), cfg, None)?;
    first.run_for(25)?;
    let path = std::env::temp_dir().join("wellsim-example-checkpoint.json");
    first.checkpoint(true).save(&path)?;
    println!("saved after 25 episodes to {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    let mut resumed = Trainer::resume(cohort, RunCheckpoint::load(&path)?)?;
    resumed.run()?;
    let (a, b) = (straight.result()?, resumed.result()?);
    println!("uninterrupted: testers {} mse {:.6}", a.final_testers, a.final_mse);
    println!("resumed:       testers {} mse {:.6}", b.final_testers, b.final_mse);
    println!("identical: {}", a == b);
    std::fs::remove_file(&path)?;
    Ok(())
}
