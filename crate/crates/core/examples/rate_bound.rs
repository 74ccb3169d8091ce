//! The linear rate bound against the mean squared distance to the minimizer
//! over 200 seeded runs of the norm-test controller.
//!
//! cargo run --release --example rate_bound

use adabatch::batch::rate_bound;
use adabatch::{
    run_sgd, Controller, Quadratic3, SgdConfig, StochasticObjective, ToleranceConfig, Vector,
};

fn main() -> adabatch::Result<()> {
    let eps = 1.0;
    let k_max = 40;
    let reps = 200;
    let obj = Quadratic3::new();
    let kappa = obj.smoothness()?.kappa();
    let xi0 = Vector::from_slice(&[0.225, -0.2, 0.1])?;
    let mut mean = vec![0.0; k_max + 1];
    for seed in 0..reps {
        let mut cfg = SgdConfig::new(Controller::Norm { epsilon: eps });
        cfg.max_iterations = k_max as u64;
        cfg.max_gradient_evals = u64::MAX;
        cfg.seed = seed;
        let run = run_sgd(&obj, &cfg, &xi0)?;
        for (k, m) in mean.iter_mut().enumerate() {
            *m += run.xi(k).expect("k_max iterations").norm_sq() / reps as f64;
        }
    }
    let tol = ToleranceConfig::from_epsilon(eps)?;
    let d0 = xi0.norm_sq();
    println!("kappa = {kappa:.3}");
    println!("{:>4} {:>12} {:>12} {:>7}", "k", "mean", "bound", "ratio");
    for k in (0..=k_max).step_by(5) {
        let bound = rate_bound(kappa, &tol, k as u32) * d0;
        println!(
            "{k:4} {:12.4e} {bound:12.4e} {:7.3}",
            mean[k],
            mean[k] / bound
        );
    }
    Ok(())
}
