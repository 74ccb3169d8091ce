//! A reduced replicated experiment on objective 2: fixed Table 1 splits
//! against the norm test and the per-iteration optimal split, written as CSV
//! and SVG.
//!
//! cargo run --release --example replicated_experiment [out_dir]

use std::path::PathBuf;

use adabatch::experiment::{
    band_overlap, run_experiment, tail_disjoint, write_csv, write_svg, Case, ExperimentSpec,
    ObjectiveKind,
};
use adabatch::ControllerKind;

fn main() -> adabatch::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let mut spec = ExperimentSpec::new(ObjectiveKind::Quad2 { kappa: 100.0 });
    spec.cases = vec![Case::table(2)?, Case::table(3)?];
    spec.controllers = ControllerKind::ALL.to_vec();
    spec.replications = 50;
    spec.budget = 200_000;

    let result = run_experiment(&spec)?;
    for case in [2, 3] {
        let norm = &result.curves[&(ControllerKind::Norm, case)];
        let fixed = &result.curves[&(ControllerKind::InnerOrth, case)];
        let optimal = &result.curves[&(ControllerKind::InnerOrthOptimalSplit, case)];
        println!(
            "case #{case}: fixed split tail disjoint {:.2}, optimal split overlap {:.2}",
            tail_disjoint(norm, fixed)?,
            band_overlap(norm, optimal)?
        );
    }
    std::fs::create_dir_all(&out)?;
    write_csv(&result.curves, &out.join("quad2.csv"))?;
    write_svg(&result.curves, &out.join("quad2.svg"))?;
    println!("wrote {}/quad2.csv and quad2.svg", out.display());
    Ok(())
}
