//! Fit the preprocessing transform on one sample and reuse it on another.

use wellsim::population::{synthesize_population, CalibrationSpec};
use wellsim::preprocess::{apply, fit};

fn main() -> wellsim::Result<()> {
    let cal = CalibrationSpec::default();
    let train = synthesize_population(561, 7, &cal)?;
    let transform = fit(&train)?;
    let design = apply(&transform, &train)?;
    println!(
        "{} raw features -> {} columns, dropped {:?}, {} outlier cells flagged",
        train.schema.len(),
        design.columns.len(),
        transform.dropped,
        design.outlier_count()
    );

    for f in transform.features.iter().filter(|f| f.fences.is_some()).take(6) {
        let (lo, hi) = f.fences.unwrap();
        println!("  {:<28} mean {:>8.3} sd {:>7.3} fences [{lo:.2}, {hi:.2}] fill {:?}", f.name, f.mean, f.sd, f.fill);
    }

    // new respondents are centred with the stored parameters, not refitted
    let fresh = synthesize_population(20, 99, &cal)?;
    let d = apply(&transform, &fresh)?;
    let j = d.column_index("information_seeking_behaviour").expect("canonical column");
    println!("first fresh rows, information_seeking_behaviour: {:?}", &d.rows.column(j).to_vec()[..5]);
    Ok(())
}
