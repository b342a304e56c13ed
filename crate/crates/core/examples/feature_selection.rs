//! Recursive feature elimination over the 10..90 grid with cross-validated
//! scores per size.

use wellsim::forest::{run_rfe, RfeConfig};
use wellsim::population::{synthesize_population, CalibrationSpec};
use wellsim::preprocess::fit_transform;

fn main() -> wellsim::Result<()> {
    let pop = synthesize_population(561, 7, &CalibrationSpec::default())?;
    let design = fit_transform(&pop)?;
    let y: Vec<f64> = pop.agents.iter().map(|a| a.label_adoption.unwrap_or(0) as f64).collect();

    let mut cfg = RfeConfig {
        folds: 5,
        seed: 7,
        ..RfeConfig::default()
    };
    cfg.forest.n_trees = 50;
    cfg.grid.retain(|&k| k <= design.columns.len());
    let rfe = run_rfe(design.rows.view(), &y, &design.columns, &cfg)?;

    println!("{:>4} {:>10} {:>10} {:>12}", "k", "cv mse", "cv acc", "holdout mse");
    for (k, scores) in &rfe.cv_scores {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "{k:>4} {:>10.4} {:>10.3} {:>12.4}",
            mean(scores),
            mean(&rfe.cv_accuracy[k]),
            rfe.holdout[k].mse
        );
    }
    println!("top 20: {:?}", rfe.selected_sets[&20]);
    Ok(())
}
