//! The numerical checks behind `adabatch verify`.
//!
//! Each check returns an [`Outcome`] with a one-line detail string; the
//! experiment checks also return their curves so they can be written as CSV
//! fixtures. Everything is driven by a single base seed.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::RngCore;

use crate::batch::{
    inner_orth_batch_sizes_real, inner_orth_test_holds, norm_test_batch_size_real, norm_test_holds,
    optimal_split_from, rate_bound, Contractions, DecisionMode, ToleranceConfig,
};
use crate::error::Result;
use crate::experiment::{
    band_overlap, run_experiment_with_threads, tail_disjoint, write_csv, AggregateCurve, Case,
    ExperimentResult, ExperimentSpec, ObjectiveKind,
};
use crate::linalg::{contract, error_split, projectors, SymMatrix, Vector, BASE_GRAD_FLOOR};
use crate::objectives::{Quadratic2, Quadratic3, StochasticObjective};
use crate::sampling::{fill_standard_normal, stream, uniform};
use crate::sgd::{run_sgd, Controller, ControllerKind, SgdConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    /// `PASS [3] name (0.12 s): detail`
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Replications of the experiment and rate checks.
    pub replications: usize,
    /// Worker threads for the experiments (0 = one per CPU).
    pub threads: usize,
    /// Where the experiment CSV fixtures go, if anywhere.
    pub out_dir: Option<PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            replications: 100,
            threads: 0,
            out_dir: None,
        }
    }
}

/// File names of the experiment fixtures inside `out_dir`.
pub const EQUIVALENCE_FIXTURE: &str = "equivalence_quad3.csv";
pub const NON_EQUIVALENCE_FIXTURE: &str = "non_equivalence_quad2.csv";

fn finish(
    id: u32,
    name: &'static str,
    start: Instant,
    limit: Duration,
    ok: bool,
    detail: String,
) -> Outcome {
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let detail = if in_time {
        detail
    } else {
        format!("{detail}; runtime over the {} s limit", limit.as_secs())
    };
    Outcome {
        id,
        name,
        passed: ok && in_time,
        detail,
        elapsed,
    }
}

fn normal_vector(rng: &mut dyn RngCore, d: usize, scale: f64) -> Vector {
    let mut v = vec![0.0; d];
    fill_standard_normal(rng, &mut v);
    Vector::new(v.into_iter().map(|x| scale * x).collect()).expect("finite")
}

/// `B` with standard normal entries, scaled by `scale`.
fn normal_factor(rng: &mut dyn RngCore, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..d)
        .map(|_| normal_vector(rng, d, scale).into_vec())
        .collect()
}

/// `B Bᵀ` for a square factor.
fn gram(b: &[Vec<f64>]) -> SymMatrix {
    let d = b.len();
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (0..d).map(|k| b[i][k] * b[j][k]).sum())
                .collect()
        })
        .collect();
    SymMatrix::from_rows(&rows).expect("finite")
}

fn log_uniform(rng: &mut dyn RngCore, lo: f64, hi: f64) -> f64 {
    (lo.ln() + uniform(rng) * (hi.ln() - lo.ln())).exp()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Pathwise split `‖υ−g‖² = ‖e∥‖² + ‖e⊥‖²` on random pairs, and the
/// expected form `E‖υ−g‖² = V[υ·e] + E‖υ−(υ·e)e‖²` for `υ ~ N(g, Σ)`.
pub fn lemma_identity(seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = stream(seed);
    let mut worst_rel = 0.0f64;
    let mut worst_z = 0.0f64;
    let mut ok = true;
    for d in [2usize, 3, 8] {
        for _ in 0..10_000 {
            let scale = log_uniform(&mut rng, 1e-3, 1e3);
            let g = normal_vector(&mut rng, d, scale);
            let spread = scale * log_uniform(&mut rng, 1e-2, 1e2);
            let u = g.add(&normal_vector(&mut rng, d, spread));
            let split = error_split(&u, &g)?;
            let lhs = u.sub(&g).norm_sq();
            let rhs = split.parallel.norm_sq() + split.orthogonal.norm_sq();
            let rel = (lhs - rhs).abs() / lhs.max(f64::MIN_POSITIVE);
            worst_rel = worst_rel.max(rel);
            ok &= rel <= 1e-10;
        }

        // Σ = B Bᵀ, υ = g + B z; the two sides use independent draws
        let b = normal_factor(&mut rng, d, 1.0);
        let g = normal_vector(&mut rng, d, 2.0);
        let e = g.scale(1.0 / g.norm());
        let n = 100_000;
        let draw = |rng: &mut dyn RngCore| {
            let z = normal_vector(rng, d, 1.0);
            let bz: Vec<f64> = b
                .iter()
                .map(|row| row.iter().zip(z.as_slice()).map(|(x, y)| x * y).sum())
                .collect();
            g.add(&Vector::new(bz).expect("finite"))
        };
        let lhs: Vec<f64> = (0..n).map(|_| draw(&mut rng).sub(&g).norm_sq()).collect();
        let (along, perp): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|_| {
                let u = draw(&mut rng);
                let a = u.dot(&e);
                (a, u.axpy(-a, &e).norm_sq())
            })
            .unzip();
        let (l_mean, l_sd) = mean_sd(&lhs);
        let (a_mean, a_sd) = mean_sd(&along);
        let (p_mean, _) = mean_sd(&perp);
        let rhs = a_sd * a_sd + p_mean;
        // delta-method standard error of the sample variance plus a mean
        let influence: Vec<f64> = along
            .iter()
            .zip(&perp)
            .map(|(a, p)| (a - a_mean).powi(2) - a_sd * a_sd + p - p_mean)
            .collect();
        let (_, r_sd) = mean_sd(&influence);
        let se = ((l_sd * l_sd + r_sd * r_sd) / n as f64).sqrt();
        let z = (l_mean - rhs).abs() / se;
        worst_z = worst_z.max(z);
        ok &= z <= 3.0;
    }
    Ok(finish(
        1,
        "error decomposition",
        start,
        Duration::from_secs(10),
        ok,
        format!("max pathwise relative error {worst_rel:.2e} (limit 1e-10); max |E-side difference| {worst_z:.2} SE (limit 3)"),
    ))
}

/// `Σ:P∇ + Σ:P⊥ = tr Σ` for random PSD `Σ` and directions.
pub fn covariance_decomposition(seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = stream(seed);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let d = 2 + i % 7;
        let s_scale = log_uniform(&mut rng, 1e-3, 1e3);
        let sigma = gram(&normal_factor(&mut rng, d, s_scale));
        let g_scale = log_uniform(&mut rng, 1e-3, 1e3);
        let g = normal_vector(&mut rng, d, g_scale);
        let p = projectors(&g)?;
        let sum = contract(&sigma, &p.p_nabla)? + contract(&sigma, &p.p_perp)?;
        worst = worst.max((sum - sigma.trace()).abs() / sigma.trace());
    }
    Ok(finish(
        2,
        "covariance decomposition",
        start,
        Duration::from_secs(1),
        worst <= 1e-12,
        format!("max relative error {worst:.2e} (limit 1e-12)"),
    ))
}

/// Under the optimal split the inner/orth sizes equal the norm test size, and
/// passing both inner/orth tests with `θ² + ν² ≤ ε²` implies the norm test.
pub fn equivalence_theorem(seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = stream(seed);
    let mut worst = 0.0f64;
    let mut counterexamples = 0usize;
    let mut both_held = 0usize;
    for i in 0..10_000 {
        let d = 2 + i % 7;
        let s_scale = log_uniform(&mut rng, 1e-2, 1e2);
        let sigma = gram(&normal_factor(&mut rng, d, s_scale));
        let g_scale = log_uniform(&mut rng, 1e-2, 1e2);
        let g = normal_vector(&mut rng, d, g_scale);
        let eps = log_uniform(&mut rng, 1e-2, 10.0);
        let c = Contractions::new(&sigma, &g, BASE_GRAD_FLOOR)?;
        let bar = norm_test_batch_size_real(&c, eps)?;
        let (theta, nu) = optimal_split_from(&c, eps)?;
        let (bi, bo) = inner_orth_batch_sizes_real(&c, theta, nu)?;
        worst = worst
            .max((bi - bar).abs() / bar)
            .max((bo - bar).abs() / bar);

        let theta = eps * uniform(&mut rng);
        let nu = (eps * eps - theta * theta).max(0.0).sqrt() * uniform(&mut rng).sqrt();
        if theta == 0.0 || nu == 0.0 {
            continue;
        }
        let (ri, ro) = inner_orth_batch_sizes_real(&c, theta, nu)?;
        let b = ((ri.max(ro) * (0.5 + uniform(&mut rng))).ceil() as u64).max(1);
        let (inner, orth) = inner_orth_test_holds(&sigma, &g, b, theta, nu)?;
        if inner && orth {
            both_held += 1;
            if !norm_test_holds(&sigma, &g, b, eps)? {
                counterexamples += 1;
            }
        }
    }
    Ok(finish(
        3,
        "equivalence under the optimal split",
        start,
        Duration::from_secs(5),
        worst <= 1e-10 && counterexamples == 0,
        format!(
            "max relative size mismatch {worst:.2e} (limit 1e-10); {counterexamples} counterexamples in {both_held} passing inner/orth draws"
        ),
    ))
}

/// Mean squared distance to the minimizer against the linear rate bound,
/// objective 1, oracle norm test with `ε = 1`, 30 iterations.
pub fn rate_bound_check(seed: u64, replications: usize) -> Result<Outcome> {
    const K: usize = 30;
    const SLACK: f64 = 1.5;
    let start = Instant::now();
    let obj = Quadratic3::new();
    let xi0 = ExperimentSpec::new(ObjectiveKind::Quad3).xi0;
    let star = obj.minimizer()?;
    let kappa = obj.smoothness()?.kappa();
    let cfg_tol = ToleranceConfig::from_epsilon(1.0)?;
    let mut sum = vec![0.0; K + 1];
    for r in 0..replications {
        let mut cfg = SgdConfig::new(Controller::Norm { epsilon: 1.0 });
        cfg.max_iterations = K as u64;
        cfg.max_gradient_evals = u64::MAX;
        cfg.seed = seed.wrapping_add(r as u64);
        let run = run_sgd(&obj, &cfg, &xi0)?;
        for (k, s) in sum.iter_mut().enumerate() {
            *s += run.xi(k).map_or(f64::NAN, |x| x.sub(&star).norm_sq());
        }
    }
    let d0 = xi0.sub(&star).norm_sq();
    let ratios: Vec<f64> = sum
        .iter()
        .enumerate()
        .map(|(k, s)| s / replications as f64 / (rate_bound(kappa, &cfg_tol, k as u32) * d0))
        .collect();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let final_ratio = ratios[K];
    Ok(finish(
        4,
        "linear rate bound",
        start,
        Duration::from_secs(120),
        worst <= SLACK,
        format!("max over k <= {K} of mean/bound = {worst:.3} (limit {SLACK}), at k = {K}: {final_ratio:.3}; {replications} replications"),
    ))
}

fn experiment_spec(
    objective: ObjectiveKind,
    cases: &[u32],
    controllers: &[ControllerKind],
    opts: &VerifyOptions,
) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(objective);
    spec.cases = cases
        .iter()
        .map(|&c| Case::table(c))
        .collect::<Result<_>>()?;
    spec.controllers = controllers.to_vec();
    spec.replications = opts.replications;
    spec.base_seed = opts.seed;
    spec.mode = DecisionMode::Oracle;
    Ok(spec)
}

fn pair(
    r: &ExperimentResult,
    a: ControllerKind,
    b: ControllerKind,
    case: u32,
) -> (&AggregateCurve, &AggregateCurve) {
    (&r.curves[&(a, case)], &r.curves[&(b, case)])
}

/// Objective 1: norm and fixed-split inner/orth bands overlap for cases #1–#3
/// and separate for case #4.
pub fn equivalence_reproduction(opts: &VerifyOptions) -> Result<(Outcome, ExperimentResult)> {
    let start = Instant::now();
    let spec = experiment_spec(
        ObjectiveKind::Quad3,
        &[1, 2, 3, 4],
        &[ControllerKind::Norm, ControllerKind::InnerOrth],
        opts,
    )?;
    let result = run_experiment_with_threads(&spec, opts.threads)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for case in 1..=3 {
        let (n, io) = pair(
            &result,
            ControllerKind::Norm,
            ControllerKind::InnerOrth,
            case,
        );
        let overlap = band_overlap(n, io)?;
        ok &= overlap >= 0.9;
        parts.push(format!("#{case} overlap {overlap:.3}"));
    }
    let (n, io) = pair(&result, ControllerKind::Norm, ControllerKind::InnerOrth, 4);
    let apart = tail_disjoint(n, io)?;
    ok &= apart >= 0.5;
    parts.push(format!("#4 tail disjoint {apart:.3}"));
    let outcome = finish(
        5,
        "objective 1 equivalence",
        start,
        Duration::from_secs(600),
        ok,
        format!("{} (limits 0.9 / 0.5)", parts.join(", ")),
    );
    Ok((outcome, result))
}

/// Objective 2: fixed splits separate from the norm test, the per-iteration
/// optimal split does not.
pub fn non_equivalence(opts: &VerifyOptions) -> Result<(Outcome, ExperimentResult)> {
    let start = Instant::now();
    let spec = experiment_spec(
        ObjectiveKind::Quad2 { kappa: 100.0 },
        &[1, 2, 3],
        &ControllerKind::ALL,
        opts,
    )?;
    let result = run_experiment_with_threads(&spec, opts.threads)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for case in 1..=3 {
        let (n, io) = pair(
            &result,
            ControllerKind::Norm,
            ControllerKind::InnerOrth,
            case,
        );
        let apart = tail_disjoint(n, io)?;
        let (n, opt) = pair(
            &result,
            ControllerKind::Norm,
            ControllerKind::InnerOrthOptimalSplit,
            case,
        );
        let overlap = band_overlap(n, opt)?;
        ok &= apart >= 0.3 && overlap >= 0.9;
        parts.push(format!(
            "#{case} fixed tail disjoint {apart:.3}, optimal overlap {overlap:.3}"
        ));
    }
    let outcome = finish(
        6,
        "objective 2 non-equivalence",
        start,
        Duration::from_secs(600),
        ok,
        format!("{} (limits 0.3 / 0.9)", parts.join("; ")),
    );
    Ok((outcome, result))
}

/// Largest entrywise deviation of the sample covariance from the exact one, in
/// standard errors.
fn covariance_z(
    obj: &dyn StochasticObjective,
    xi: &Vector,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let d = obj.dim();
    let samples: Vec<Vector> = (0..n)
        .map(|_| obj.sample_gradient(xi, rng))
        .collect::<Result<_>>()?;
    let mean: Vec<f64> = (0..d)
        .map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / n as f64)
        .collect();
    let exact = obj.exact_covariance(xi)?;
    let scale = exact.trace().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            let prods: Vec<f64> = samples
                .iter()
                .map(|s| (s[i] - mean[i]) * (s[j] - mean[j]))
                .collect();
            let (m, sd) = mean_sd(&prods);
            let est = m * n as f64 / (n - 1) as f64;
            let se = sd / (n as f64).sqrt() + 1e-12 * scale;
            worst = worst.max((est - exact.get(i, j)).abs() / se);
        }
    }
    Ok(worst)
}

/// Sample covariances against the exact covariance oracles, and the
/// objective 2 minimizer residual.
pub fn oracle_check(seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = stream(seed);
    let q3 = Quadratic3::new();
    let q2 = Quadratic2::new(100.0)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let x3 = normal_vector(&mut rng, 3, 1.0);
        worst = worst.max(covariance_z(&q3, &x3, 100_000, &mut rng)?);
        let x2 = normal_vector(&mut rng, 2, 10.0);
        worst = worst.max(covariance_z(&q2, &x2, 100_000, &mut rng)?);
    }
    let star = q2.minimizer()?;
    let residual = q2.mean_hessian().mul_vec(&star)?.sub(q2.b()).norm();
    Ok(finish(
        7,
        "objective oracles",
        start,
        Duration::from_secs(30),
        worst <= 10.0 && residual < 1e-12,
        format!("max covariance deviation {worst:.2} SE (limit 10); minimizer residual {residual:.1e} (limit 1e-12)"),
    ))
}

/// Writes the two experiment fixtures into `dir`.
pub fn write_fixtures(
    dir: &Path,
    equivalence: &ExperimentResult,
    non_equivalence: &ExperimentResult,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&equivalence.curves, &dir.join(EQUIVALENCE_FIXTURE))?;
    write_csv(&non_equivalence.curves, &dir.join(NON_EQUIVALENCE_FIXTURE))
}

/// Runs checks 1–7 in order, calling `report` after each, and writes the
/// experiment fixtures if `opts.out_dir` is set.
pub fn run_all(opts: &VerifyOptions, mut report: impl FnMut(&Outcome)) -> Result<Vec<Outcome>> {
    let mut out = Vec::new();
    let mut push = |o: Outcome, out: &mut Vec<Outcome>| {
        report(&o);
        out.push(o);
    };
    push(lemma_identity(opts.seed)?, &mut out);
    push(covariance_decomposition(opts.seed)?, &mut out);
    push(equivalence_theorem(opts.seed)?, &mut out);
    push(rate_bound_check(opts.seed, opts.replications)?, &mut out);
    let (o5, eq) = equivalence_reproduction(opts)?;
    push(o5, &mut out);
    let (o6, neq) = non_equivalence(opts)?;
    push(o6, &mut out);
    push(oracle_check(opts.seed)?, &mut out);
    if let Some(dir) = &opts.out_dir {
        write_fixtures(dir, &eq, &neq)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_is_psd() {
        let mut rng = stream(1);
        let s = gram(&normal_factor(&mut rng, 4, 1.0));
        for _ in 0..100 {
            let v = normal_vector(&mut rng, 4, 1.0);
            assert!(s.quadratic_form(&v).unwrap() >= 0.0);
        }
    }

    #[test]
    fn outcome_line_format() {
        let o = Outcome {
            id: 2,
            name: "x",
            passed: false,
            detail: "d".into(),
            elapsed: Duration::from_millis(1500),
        };
        assert_eq!(o.line(), "FAIL [2] x (1.50 s): d");
    }

    #[test]
    fn timed_out_check_fails() {
        let o = finish(
            9,
            "slow",
            Instant::now() - Duration::from_secs(3),
            Duration::from_secs(1),
            true,
            "ok".into(),
        );
        assert!(!o.passed);
        assert!(o.detail.contains("limit"));
    }
}
