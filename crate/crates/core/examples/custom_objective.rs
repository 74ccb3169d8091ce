//! A user-defined objective without covariance oracles: least squares on a
//! fixed data set, one random row per gradient sample. Batch sizes come from
//! the plug-in (sample covariance) mode.
//!
//! cargo run --release --example custom_objective

use adabatch::sampling::{fill_standard_normal, stream, uniform};
use adabatch::{run_sgd, Controller, DecisionMode, SgdConfig, StochasticObjective, Vector};
use rand::RngCore;

struct LeastSquares {
    rows: Vec<[f64; 2]>,
    targets: Vec<f64>,
}

impl LeastSquares {
    fn synthetic(n: usize, seed: u64) -> Self {
        let mut rng = stream(seed);
        let truth = [1.5, -0.5];
        let mut rows = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let mut z = [0.0; 3];
            fill_standard_normal(&mut rng, &mut z);
            rows.push([z[0], 3.0 * z[1]]);
            targets.push(truth[0] * z[0] + truth[1] * 3.0 * z[1] + 0.1 * z[2]);
        }
        LeastSquares { rows, targets }
    }

    fn loss(&self, xi: &Vector) -> f64 {
        let n = self.rows.len() as f64;
        self.rows
            .iter()
            .zip(&self.targets)
            .map(|(a, y)| 0.5 * (a[0] * xi[0] + a[1] * xi[1] - y).powi(2))
            .sum::<f64>()
            / n
    }
}

impl StochasticObjective for LeastSquares {
    fn dim(&self) -> usize {
        2
    }

    fn sample_gradient_into(&self, xi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let i = ((uniform(rng) * self.rows.len() as f64) as usize).min(self.rows.len() - 1);
        let a = self.rows[i];
        let r = a[0] * xi[0] + a[1] * xi[1] - self.targets[i];
        out[0] = r * a[0];
        out[1] = r * a[1];
    }
}

fn main() -> adabatch::Result<()> {
    let obj = LeastSquares::synthetic(5000, 9);
    let xi0 = Vector::from_slice(&[0.0, 0.0])?;
    let mut cfg = SgdConfig::new(Controller::InnerOrthOptimalSplit { epsilon: 0.5 });
    cfg.mode = DecisionMode::Plugin;
    cfg.step_size_override = Some(0.05);
    cfg.max_gradient_evals = 200_000;
    let run = run_sgd(&obj, &cfg, &xi0)?;
    println!(
        "{} iterations, {} gradient samples, {:?}",
        run.iterations.len(),
        run.total_cost(),
        run.termination
    );
    for it in run
        .iterations
        .iter()
        .step_by((run.iterations.len() / 10).max(1))
    {
        println!(
            "k {:5}  b {:6}  loss {:.6}",
            it.k,
            it.batch_size,
            obj.loss(&it.xi)
        );
    }
    println!(
        "final xi {:?} (data generated with (1.5, -0.5))",
        run.final_xi()
    );
    Ok(())
}
