//! Splits the error of a noisy gradient into the part along the true gradient
//! and the part orthogonal to it, then splits the covariance the same way.
//!
//! cargo run --example error_decomposition

use adabatch::linalg::{contract, error_split, projectors};
use adabatch::sampling::{fill_standard_normal, stream};
use adabatch::{Quadratic2, StochasticObjective, SymMatrix, Vector};

fn main() -> adabatch::Result<()> {
    let g = Vector::from_slice(&[3.0, -1.0, 2.0])?;
    let upsilon = Vector::from_slice(&[3.4, -0.2, 1.5])?;
    let split = error_split(&upsilon, &g)?;
    println!("g          = {g:?}");
    println!("upsilon    = {upsilon:?}");
    println!("gamma      = {:.6}", split.gamma);
    println!("e_parallel = {:?}", split.parallel);
    println!("e_perp     = {:?}", split.orthogonal);
    println!(
        "|upsilon - g|^2 = {:.12}, |e_par|^2 + |e_perp|^2 = {:.12}",
        upsilon.sub(&g).norm_sq(),
        split.parallel.norm_sq() + split.orthogonal.norm_sq()
    );

    // a random covariance and its two contractions
    let mut rng = stream(3);
    let mut b = [0.0; 9];
    fill_standard_normal(&mut rng, &mut b);
    let rows: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| (0..3).map(|k| b[3 * i + k] * b[3 * j + k]).sum())
                .collect()
        })
        .collect();
    let sigma = SymMatrix::from_rows(&rows)?;
    let p = projectors(&g)?;
    let along = contract(&sigma, &p.p_nabla)?;
    let across = contract(&sigma, &p.p_perp)?;
    println!(
        "\nSigma:P_grad = {along:.6}, Sigma:P_perp = {across:.6}, sum = {:.6}, trace = {:.6}",
        along + across,
        sigma.trace()
    );

    // on objective 2 the noise is rank one, so the split depends on the point
    let q2 = Quadratic2::default();
    for xi in [[20.0, 50.0], [1.0, 1.0], [0.0, 5.0]] {
        let xi = Vector::from_slice(&xi)?;
        let sigma = q2.exact_covariance(&xi)?;
        let p = projectors(&q2.exact_gradient(&xi)?)?;
        let share = contract(&sigma, &p.p_nabla)? / sigma.trace();
        println!("objective 2 at {xi:?}: share of variance along the gradient {share:.4}");
    }
    Ok(())
}
