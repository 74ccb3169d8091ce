//! Norm test and inner-product/orthogonality test sample sizes for the four
//! tolerance cases, and the split that makes them agree.
//!
//! cargo run --example batch_sizes

use adabatch::batch::{compute_batch_decision, optimal_split, DecisionInput};
use adabatch::{BatchLimits, Quadratic2, Quadratic3, StochasticObjective, ToleranceConfig, Vector};

fn report(name: &str, obj: &dyn StochasticObjective, xi: &Vector) -> adabatch::Result<()> {
    let sigma = obj.exact_covariance(xi)?;
    let grad = obj.exact_gradient(xi)?;
    let limits = BatchLimits::default();
    println!("{name} at {xi:?}");
    println!("  case   eps  theta     nu    b_norm  b_inner   b_orth  | optimal theta     nu");
    for case in 1..=4 {
        let cfg = ToleranceConfig::table_case(case).expect("built-in");
        let d = compute_batch_decision(
            DecisionInput::Oracle {
                sigma: &sigma,
                grad: &grad,
            },
            &cfg,
            &limits,
        )?;
        let (theta, nu) = optimal_split(&sigma, &grad, cfg.epsilon)?;
        println!(
            "  #{case}  {:5.2} {:6.3} {:6.3} {:9} {:8} {:8}  | {:13.4} {:6.4}",
            cfg.epsilon, cfg.theta, cfg.nu, d.b_norm, d.b_inner, d.b_orth, theta, nu
        );
    }
    Ok(())
}

fn main() -> adabatch::Result<()> {
    report(
        "objective 1",
        &Quadratic3::new(),
        &Vector::from_slice(&[0.225, -0.2, 0.1])?,
    )?;
    report(
        "objective 1",
        &Quadratic3::new(),
        &Vector::from_slice(&[0.01, 0.0, 0.0])?,
    )?;
    report(
        "objective 2",
        &Quadratic2::default(),
        &Vector::from_slice(&[20.0, 50.0])?,
    )?;
    report(
        "objective 2",
        &Quadratic2::default(),
        &Vector::from_slice(&[1.1, 0.9])?,
    )?;
    Ok(())
}
