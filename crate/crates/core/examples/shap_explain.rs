//! Explain a random forest fitted on the top-20 features with TreeSHAP and
//! print the mean |SHAP| ranking.

use wellsim::forest::{fit_forest, ForestParams};
use wellsim::shap::{export_summary, tree_shap};
use wellsim::sim::{World, WorldConfig};
use wellsim::population::{synthesize_population, CalibrationSpec};

fn main() -> wellsim::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(561);
    let cfg = WorldConfig {
        agents: n,
        ..WorldConfig::default()
    };
    let pop = synthesize_population(n, cfg.population_seed, &CalibrationSpec::default())?;
    let world = World::from_population(&pop, &cfg.rfe)?;
    let names = world.feature_sets[&20].clone();
    let x = world.design.select(&names)?;
    let y: Vec<f64> = pop.agents.iter().map(|a| a.label_adoption.unwrap_or(0) as f64).collect();

    let forest = fit_forest(x.view(), &y, &ForestParams { seed: 7, ..ForestParams::default() })?;
    let shap = tree_shap(&forest, x.view())?;
    let summary = export_summary(&shap, x.view(), &names, &world.design.agent_ids, names.len())?;
    println!("base value {:.4}", shap.base_value);
    for (rank, row) in summary.importance.iter().enumerate() {
        println!("{:>3}. {:<32} {:.5}", rank + 1, row.feature, row.mean_abs_shap);
    }

    // per-agent check: attributions plus base value give the prediction
    let pred = forest.predict(x.row(0))?;
    let total: f64 = shap.values.row(0).sum();
    println!("agent 0: f(x) = {pred:.4}, base + sum(phi) = {:.4}", shap.base_value + total);
    Ok(())
}
