//! One SGD run per controller on objective 1, printing the batch schedule
//! and the optimality gap.
//!
//! cargo run --example sgd_quadratic [case]

use adabatch::{run_sgd, ControllerKind, Quadratic3, SgdConfig, ToleranceConfig, Vector};

fn main() -> adabatch::Result<()> {
    let case: u32 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let tol = ToleranceConfig::table_case(case).expect("case 1 to 4");
    let obj = Quadratic3::new();
    let xi0 = Vector::from_slice(&[0.225, -0.2, 0.1])?;
    for kind in ControllerKind::ALL {
        let mut cfg = SgdConfig::new(kind.with_tolerances(&tol));
        cfg.seed = 1;
        let run = run_sgd(&obj, &cfg, &xi0)?;
        println!(
            "{:22} eta {:.5}, {} iterations, cost {}, {:?}",
            kind.as_str(),
            run.step_size,
            run.iterations.len(),
            run.total_cost(),
            run.termination
        );
        let n = run.iterations.len();
        for it in run
            .iterations
            .iter()
            .filter(|it| it.k % (n as u64 / 8).max(1) == 0)
        {
            println!(
                "    k {:6}  b {:8}  cost {:8}  gap {:.3e}",
                it.k,
                it.batch_size,
                it.cumulative_cost,
                it.gap.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
