//! Sample-size selection: the norm test, the inner-product/orthogonality test,
//! the optimal tolerance split that makes them cost the same, and the
//! step-size and rate formulas they feed.
//!
//! Batch sizes come in two flavours. The `*_real` functions return the
//! pre-ceiling lower bounds `Σ:P / (tol² ‖∇F‖²)`; the integer versions round
//! them up and clamp them into [`BatchLimits`].

use crate::error::{check_dim, Error, Result};
use crate::linalg::{contract_direction, SymMatrix, Vector, BASE_GRAD_FLOOR};

/// Relative slack accepted on `ε ≈ √(θ² + ν²)` for rounded tolerance triples.
pub const RELAXED_COUPLING_TOLERANCE: f64 = 1e-2;
/// Relative slack in strict mode.
pub const STRICT_COUPLING_TOLERANCE: f64 = 1e-12;

/// Relative rounding slack of the batch-size ceiling: `θ = √θ²` followed by
/// `θ²` can move an exact integer size a few ulps up.
pub const CEIL_SNAP: f64 = 8.0 * f64::EPSILON;

/// Tolerances of the norm test (`ε`) and the inner-product/orthogonality test (`θ`, `ν`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub epsilon: f64,
    pub theta: f64,
    pub nu: f64,
}

impl ToleranceConfig {
    /// A coupled triple checked against `ε² = θ² + ν²` with the relaxed tolerance,
    /// measured on `ε` (1%).
    pub fn coupled(epsilon: f64, theta: f64, nu: f64) -> Result<Self> {
        Self::checked(epsilon, theta, nu, RELAXED_COUPLING_TOLERANCE)
    }

    /// Exact coupling: `ν = √(ε² − θ²)`.
    pub fn strict(epsilon: f64, theta: f64) -> Result<Self> {
        if !(theta >= 0.0 && theta <= epsilon) {
            return Err(Error::InvalidConfig(format!(
                "strict coupling needs 0 <= theta <= epsilon, got theta = {theta}, epsilon = {epsilon}"
            )));
        }
        let nu = (epsilon * epsilon - theta * theta).sqrt();
        Self::checked(epsilon, theta, nu, STRICT_COUPLING_TOLERANCE)
    }

    /// Norm-test-only configuration. The split is set to `θ = ε, ν = 0` so that
    /// `θ² + ν² = ε²` exactly for the step size and rate.
    pub fn from_epsilon(epsilon: f64) -> Result<Self> {
        Self::checked(epsilon, epsilon, 0.0, 0.0)
    }

    /// An uncoupled `(θ, ν)` pair; `ε` is set to `√(θ² + ν²)`.
    pub fn from_split(theta: f64, nu: f64) -> Result<Self> {
        Self::checked((theta * theta + nu * nu).sqrt(), theta, nu, 0.0)
    }

    fn checked(epsilon: f64, theta: f64, nu: f64, rel_tol: f64) -> Result<Self> {
        if !(epsilon.is_finite() && theta.is_finite() && nu.is_finite()) {
            return Err(Error::NonFinite("tolerance"));
        }
        if epsilon < 0.0 || theta < 0.0 || nu < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tolerances must be non-negative: epsilon = {epsilon}, theta = {theta}, nu = {nu}"
            )));
        }
        let combined = (theta * theta + nu * nu).sqrt();
        if (combined - epsilon).abs() > rel_tol * epsilon {
            return Err(Error::InvalidConfig(format!(
                "epsilon^2 = theta^2 + nu^2 violated: epsilon = {epsilon}, sqrt(theta^2 + nu^2) = {combined}"
            )));
        }
        Ok(ToleranceConfig { epsilon, theta, nu })
    }

    /// Table 1 cases `#1`–`#4`.
    pub fn table_case(case: u32) -> Option<Self> {
        let (e, t, n) = match case {
            1 => (0.1, 0.05, 0.087),
            2 => (0.5, 0.25, 0.43),
            3 => (1.0, 0.5, 0.87),
            4 => (5.91, 0.9, 5.84),
            _ => return None,
        };
        Some(ToleranceConfig {
            epsilon: e,
            theta: t,
            nu: n,
        })
    }

    /// `θ² + ν²`, the squared tolerance entering the step size and rate.
    pub fn split_sq(&self) -> f64 {
        self.theta * self.theta + self.nu * self.nu
    }
}

/// Clamping range for integer batch sizes and the gradient floor below which
/// the tests are undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLimits {
    pub b_min: u64,
    pub b_max: u64,
    pub grad_floor: f64,
}

impl Default for BatchLimits {
    fn default() -> Self {
        BatchLimits {
            b_min: 2,
            b_max: 10_000_000,
            grad_floor: BASE_GRAD_FLOOR,
        }
    }
}

impl BatchLimits {
    /// Ceiling of a real lower bound, clamped into `[b_min, b_max]`. A value
    /// within [`CEIL_SNAP`] (relative) above an integer counts as that integer.
    pub fn clamp(&self, real: f64) -> u64 {
        if real.is_nan() {
            return self.b_max;
        }
        let floor = real.floor();
        let ceil = if real - floor <= CEIL_SNAP * real {
            floor
        } else {
            real.ceil()
        };
        // `as` saturates for out-of-range floats
        (ceil as u64).clamp(self.b_min, self.b_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecisionMode {
    /// Exact covariance and gradient from the objective's oracles.
    Oracle,
    /// Sample covariance and batch mean substituted for the exact quantities.
    Plugin,
}

impl DecisionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionMode::Oracle => "oracle",
            DecisionMode::Plugin => "plugin",
        }
    }
}

/// Batch mean, unbiased sample covariance and size of one Monte Carlo gradient draw.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBatchStats {
    pub mean: Vector,
    /// `None` when the batch has a single sample.
    pub sample_cov: Option<SymMatrix>,
    pub batch_size: u64,
}

/// Integer batch sizes for both tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchDecision {
    /// Norm test size `b̄`.
    pub b_norm: u64,
    /// Inner-product test size `b∇`.
    pub b_inner: u64,
    /// Orthogonality test size `b⊥`.
    pub b_orth: u64,
    /// `max(b∇, b⊥)`
    pub b_inner_orth: u64,
    pub mode: DecisionMode,
}

/// Where a batch decision takes its covariance and gradient from.
#[derive(Debug, Clone, Copy)]
pub enum DecisionInput<'a> {
    Oracle {
        sigma: &'a SymMatrix,
        grad: &'a Vector,
    },
    Plugin(&'a GradientBatchStats),
}

impl<'a> DecisionInput<'a> {
    pub fn resolve(self) -> Result<(&'a SymMatrix, &'a Vector, DecisionMode)> {
        match self {
            DecisionInput::Oracle { sigma, grad } => Ok((sigma, grad, DecisionMode::Oracle)),
            DecisionInput::Plugin(stats) => {
                let cov = stats.sample_cov.as_ref().ok_or_else(|| {
                    Error::InvalidConfig(
                        "plug-in decisions need a batch of at least 2 samples".into(),
                    )
                })?;
                Ok((cov, &stats.mean, DecisionMode::Plugin))
            }
        }
    }
}

/// `Σ:P∇`, `Σ:P⊥`, `Σ:I` and `‖g‖²` for a covariance and reference gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contractions {
    pub parallel: f64,
    pub orthogonal: f64,
    pub trace: f64,
    pub grad_norm_sq: f64,
}

impl Contractions {
    pub fn new(sigma: &SymMatrix, grad: &Vector, grad_floor: f64) -> Result<Self> {
        check_dim(sigma.dim(), grad.dim())?;
        let grad_norm_sq = grad.norm_sq();
        let norm = grad_norm_sq.sqrt();
        if !(norm > grad_floor) {
            return Err(Error::DegenerateGradient {
                norm,
                floor: grad_floor,
            });
        }
        let e = grad.scale(1.0 / norm);
        let trace = sigma.trace();
        // rounding residue below this is a vanishing component, not noise
        let snap = |x: f64| {
            if x <= 16.0 * f64::EPSILON * trace.abs() {
                0.0
            } else {
                x
            }
        };
        let parallel = contract_direction(sigma, &e)?;
        Ok(Contractions {
            parallel: snap(parallel),
            // Σ:P⊥ = Σ:I − Σ:P∇
            orthogonal: snap(trace - parallel),
            trace,
            grad_norm_sq,
        })
    }
}

/// `contraction / (tol² ‖g‖²)`, with `0/0 = 0` for a noiseless component.
fn ratio(contraction: f64, tol: f64, grad_norm_sq: f64, which: &'static str) -> Result<f64> {
    if contraction <= 0.0 {
        return Ok(0.0);
    }
    if tol == 0.0 {
        return Err(Error::ZeroTolerance { which, contraction });
    }
    Ok(contraction / (tol * tol * grad_norm_sq))
}

/// Whether a size-`b` batch mean satisfies `tr Σ / b ≤ ε² ‖g‖²`.
pub fn norm_test_holds(sigma: &SymMatrix, grad: &Vector, b: u64, epsilon: f64) -> Result<bool> {
    let c = Contractions::new(sigma, grad, BASE_GRAD_FLOOR)?;
    Ok(c.trace / b as f64 <= epsilon * epsilon * c.grad_norm_sq)
}

/// `(inner, orth)` test outcomes for a size-`b` batch mean:
/// `Σ:P∇ / b ≤ θ² ‖g‖²` and `Σ:P⊥ / b ≤ ν² ‖g‖²`.
pub fn inner_orth_test_holds(
    sigma: &SymMatrix,
    grad: &Vector,
    b: u64,
    theta: f64,
    nu: f64,
) -> Result<(bool, bool)> {
    let c = Contractions::new(sigma, grad, BASE_GRAD_FLOOR)?;
    let b = b as f64;
    Ok((
        c.parallel / b <= theta * theta * c.grad_norm_sq,
        c.orthogonal / b <= nu * nu * c.grad_norm_sq,
    ))
}

/// Pre-ceiling norm test size `tr Σ / (ε² ‖g‖²)`.
pub fn norm_test_batch_size_real(c: &Contractions, epsilon: f64) -> Result<f64> {
    ratio(c.trace, epsilon, c.grad_norm_sq, "epsilon")
}

/// Pre-ceiling inner/orth sizes `(Σ:P∇ / (θ² ‖g‖²), Σ:P⊥ / (ν² ‖g‖²))`.
pub fn inner_orth_batch_sizes_real(c: &Contractions, theta: f64, nu: f64) -> Result<(f64, f64)> {
    Ok((
        ratio(c.parallel, theta, c.grad_norm_sq, "theta")?,
        ratio(c.orthogonal, nu, c.grad_norm_sq, "nu")?,
    ))
}

pub fn norm_test_batch_size(
    sigma: &SymMatrix,
    grad: &Vector,
    epsilon: f64,
    limits: &BatchLimits,
) -> Result<u64> {
    let c = Contractions::new(sigma, grad, limits.grad_floor)?;
    Ok(limits.clamp(norm_test_batch_size_real(&c, epsilon)?))
}

pub fn inner_orth_batch_sizes(
    sigma: &SymMatrix,
    grad: &Vector,
    theta: f64,
    nu: f64,
    limits: &BatchLimits,
) -> Result<(u64, u64)> {
    let c = Contractions::new(sigma, grad, limits.grad_floor)?;
    let (inner, orth) = inner_orth_batch_sizes_real(&c, theta, nu)?;
    Ok((limits.clamp(inner), limits.clamp(orth)))
}

/// `(θ, ν)` with `θ² = ε² Σ:P∇ / tr Σ` and `ν² = ε² Σ:P⊥ / tr Σ`, which makes the
/// inner-product and orthogonality sizes coincide with the norm test size.
pub fn optimal_split(sigma: &SymMatrix, grad: &Vector, epsilon: f64) -> Result<(f64, f64)> {
    optimal_split_from(&Contractions::new(sigma, grad, BASE_GRAD_FLOOR)?, epsilon)
}

pub fn optimal_split_from(c: &Contractions, epsilon: f64) -> Result<(f64, f64)> {
    if !(c.trace > 0.0) {
        return Err(Error::ZeroCovariance);
    }
    let theta_sq = epsilon * epsilon * c.parallel / c.trace;
    let nu_sq = epsilon * epsilon * c.orthogonal / c.trace;
    Ok((theta_sq.sqrt(), nu_sq.sqrt()))
}

/// Isotropic fallback `θ² = ε²/d`, `ν² = ε²(d−1)/d` used when `tr Σ = 0`.
pub fn isotropic_split(epsilon: f64, dim: usize) -> (f64, f64) {
    let d = dim as f64;
    (epsilon * (1.0 / d).sqrt(), epsilon * ((d - 1.0) / d).sqrt())
}

/// Norm and inner/orth batch sizes from exact or plug-in statistics.
pub fn compute_batch_decision(
    input: DecisionInput<'_>,
    cfg: &ToleranceConfig,
    limits: &BatchLimits,
) -> Result<BatchDecision> {
    let (sigma, grad, mode) = input.resolve()?;
    let c = Contractions::new(sigma, grad, limits.grad_floor)?;
    let b_norm = limits.clamp(norm_test_batch_size_real(&c, cfg.epsilon)?);
    let (inner, orth) = inner_orth_batch_sizes_real(&c, cfg.theta, cfg.nu)?;
    let (b_inner, b_orth) = (limits.clamp(inner), limits.clamp(orth));
    Ok(BatchDecision {
        b_norm,
        b_inner,
        b_orth,
        b_inner_orth: b_inner.max(b_orth),
        mode,
    })
}

/// Constant step size `2 / ((L + μ)(1 + θ² + ν²))`.
pub fn step_size(l: f64, mu: f64, cfg: &ToleranceConfig) -> Result<f64> {
    if !(mu > 0.0 && l >= mu && l.is_finite()) {
        return Err(Error::InvalidSmoothness { l, mu });
    }
    Ok(2.0 / ((l + mu) * (1.0 + cfg.split_sq())))
}

/// Per-iteration contraction factor `(((κ−1)/(κ+1))² + ε²) / (1 + ε²)` with
/// `ε² = θ² + ν²`.
pub fn rate_factor(kappa: f64, cfg: &ToleranceConfig) -> f64 {
    let r = (kappa - 1.0) / (kappa + 1.0);
    let e2 = cfg.split_sq();
    (r * r + e2) / (1.0 + e2)
}

/// `ρ^k`, the bound on `E‖ξ_k − ξ*‖² / ‖ξ_0 − ξ*‖²`.
pub fn rate_bound(kappa: f64, cfg: &ToleranceConfig, k: u32) -> f64 {
    rate_factor(kappa, cfg).powi(k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{contract, projectors};
    use proptest::prelude::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x).unwrap()
    }

    #[test]
    fn norm_test_boundary() {
        let sigma = SymMatrix::scaled_identity(3, 1000.0);
        let g = v(&[1.0, 0.0, 0.0]);
        // 3000 / b <= 0.01 iff b >= 300000
        assert!(norm_test_holds(&sigma, &g, 300_000, 0.1).unwrap());
        assert!(!norm_test_holds(&sigma, &g, 299_999, 0.1).unwrap());
        assert!(norm_test_holds(&SymMatrix::zeros(3), &g, 1, 1e-9).unwrap());
        assert!(matches!(
            norm_test_holds(&sigma, &Vector::zeros(3), 10, 0.1),
            Err(Error::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn norm_test_sizes() {
        let lim = BatchLimits::default();
        let e1 = v(&[1.0, 0.0, 0.0]);
        let sigma = SymMatrix::scaled_identity(3, 1000.0);
        let c = Contractions::new(&sigma, &e1, lim.grad_floor).unwrap();
        // 3000 / 0.01, up to the rounding of 0.1²
        let real = norm_test_batch_size_real(&c, 0.1).unwrap();
        assert!((real - 300_000.0).abs() < 1e-6);
        assert_eq!(
            norm_test_batch_size(&sigma, &e1, 0.1, &lim).unwrap(),
            real.ceil() as u64
        );
        assert_eq!(
            norm_test_batch_size(&SymMatrix::zeros(3), &e1, 0.1, &lim).unwrap(),
            2
        );
        let lim1 = BatchLimits { b_min: 1, ..lim };
        let g = v(&[1.0, 1.0]);
        assert_eq!(
            norm_test_batch_size(&SymMatrix::identity(2), &g, 1.0, &lim1).unwrap(),
            1
        );
        assert!(matches!(
            norm_test_batch_size(&sigma, &e1, 0.0, &lim),
            Err(Error::ZeroTolerance { .. })
        ));
    }

    #[test]
    fn clamp_rounding() {
        let lim = BatchLimits::default();
        assert_eq!(lim.clamp(500.0), 500);
        assert_eq!(lim.clamp(500.0 * (1.0 + 2.0 * f64::EPSILON)), 500);
        assert_eq!(lim.clamp(500.000001), 501);
        assert_eq!(lim.clamp(0.3), 2);
        assert_eq!(lim.clamp(f64::INFINITY), 10_000_000);
        assert_eq!(lim.clamp(f64::NAN), 10_000_000);
    }

    #[test]
    fn inner_orth_isotropic() {
        let lim = BatchLimits {
            b_min: 1,
            ..Default::default()
        };
        let s2 = 7.0;
        let sigma = SymMatrix::scaled_identity(3, s2);
        let g = v(&[0.0, 1.0, 0.0]);
        let (theta, nu) = (0.5, 0.25);
        let (bi, bo) = inner_orth_batch_sizes(&sigma, &g, theta, nu, &lim).unwrap();
        assert_eq!(bi, (s2 / (theta * theta)).ceil() as u64);
        assert_eq!(bo, (2.0 * s2 / (nu * nu)).ceil() as u64);

        // oracle through explicit projectors
        let p = projectors(&g).unwrap();
        let b = 40;
        let (inner, orth) = inner_orth_test_holds(&sigma, &g, b, theta, nu).unwrap();
        assert_eq!(
            inner,
            contract(&sigma, &p.p_nabla).unwrap() / b as f64 <= theta * theta
        );
        assert_eq!(
            orth,
            contract(&sigma, &p.p_perp).unwrap() / b as f64 <= nu * nu
        );
        assert!(inner && !orth);

        assert_eq!(
            inner_orth_batch_sizes(&SymMatrix::zeros(3), &g, 0.1, 0.1, &BatchLimits::default())
                .unwrap(),
            (2, 2)
        );
    }

    #[test]
    fn rank_one_along_gradient_passes_orthogonality() {
        let g = v(&[1.0, 2.0, -1.0]);
        let sigma = SymMatrix::outer(&g).scale(50.0);
        for b in [1, 2, 17] {
            assert!(inner_orth_test_holds(&sigma, &g, b, 0.1, 1e-6).unwrap().1);
        }
        let (theta, nu) = optimal_split(&sigma, &g, 0.7).unwrap();
        assert!((theta - 0.7).abs() < 1e-12);
        assert!(nu < 1e-6);
    }

    #[test]
    fn zero_tolerance_with_noise_is_an_error() {
        let g = v(&[1.0, 0.0]);
        let sigma = SymMatrix::identity(2);
        let lim = BatchLimits::default();
        assert!(matches!(
            inner_orth_batch_sizes(&sigma, &g, 0.0, 1.0, &lim),
            Err(Error::ZeroTolerance { which: "theta", .. })
        ));
        // ν = 0 is fine when nothing lies orthogonal to g
        let along = SymMatrix::outer(&g);
        assert!(inner_orth_batch_sizes(&along, &g, 1.0, 0.0, &lim).is_ok());
    }

    #[test]
    fn optimal_split_isotropic_and_degenerate() {
        let sigma = SymMatrix::scaled_identity(3, 4.0);
        let g = v(&[0.3, 0.4, 1.2]);
        let (theta, nu) = optimal_split(&sigma, &g, 0.9).unwrap();
        assert!((theta * theta - 0.81 / 3.0).abs() < 1e-14);
        assert!((nu * nu - 2.0 * 0.81 / 3.0).abs() < 1e-14);
        assert!(matches!(
            optimal_split(&SymMatrix::zeros(3), &g, 0.9),
            Err(Error::ZeroCovariance)
        ));
        let (t, n) = isotropic_split(0.9, 3);
        assert!((t * t + n * n - 0.81).abs() < 1e-14);
    }

    #[test]
    fn objective_one_case_three_decision() {
        // ξ = (1,0,0): ∇F = Hξ = (2,1,1), ‖∇F‖² = 6, tr Σ = 3000
        let sigma = SymMatrix::scaled_identity(3, 1000.0);
        let grad = v(&[2.0, 1.0, 1.0]);
        let cfg = ToleranceConfig::table_case(3).unwrap();
        let d = compute_batch_decision(
            DecisionInput::Oracle {
                sigma: &sigma,
                grad: &grad,
            },
            &cfg,
            &BatchLimits::default(),
        )
        .unwrap();
        assert_eq!(d.b_norm, 500);
        // 1000 / (0.25·6) and 2000 / (0.7569·6)
        assert_eq!(d.b_inner, (1000.0f64 / 1.5).ceil() as u64);
        assert_eq!(d.b_orth, (2000.0 / (0.87f64 * 0.87 * 6.0)).ceil() as u64);
        assert_eq!(d.b_inner_orth, d.b_inner.max(d.b_orth));
        assert_eq!(d.mode, DecisionMode::Oracle);

        let stats = GradientBatchStats {
            mean: grad.clone(),
            sample_cov: Some(sigma.clone()),
            batch_size: 10,
        };
        let p =
            compute_batch_decision(DecisionInput::Plugin(&stats), &cfg, &BatchLimits::default())
                .unwrap();
        assert_eq!(
            (p.b_norm, p.b_inner, p.b_orth, p.mode),
            (d.b_norm, d.b_inner, d.b_orth, DecisionMode::Plugin)
        );
    }

    #[test]
    fn plugin_needs_covariance() {
        let stats = GradientBatchStats {
            mean: v(&[1.0]),
            sample_cov: None,
            batch_size: 1,
        };
        let cfg = ToleranceConfig::from_epsilon(1.0).unwrap();
        assert!(compute_batch_decision(
            DecisionInput::Plugin(&stats),
            &cfg,
            &BatchLimits::default()
        )
        .is_err());
    }

    #[test]
    fn tolerance_configs() {
        for case in 1..=4 {
            let t = ToleranceConfig::table_case(case).unwrap();
            assert!(
                ToleranceConfig::coupled(t.epsilon, t.theta, t.nu).is_ok(),
                "case {case}"
            );
        }
        assert!(ToleranceConfig::table_case(5).is_none());
        assert!(ToleranceConfig::coupled(1.0, 0.5, 0.5).is_err());
        let s = ToleranceConfig::strict(1.0, 0.5).unwrap();
        assert!((s.split_sq() - 1.0).abs() < 1e-15);
        assert!(ToleranceConfig::strict(1.0, 2.0).is_err());
        assert!(ToleranceConfig::coupled(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn step_size_examples() {
        let zero = ToleranceConfig::from_epsilon(0.0).unwrap();
        assert_eq!(step_size(1.0, 1.0, &zero).unwrap(), 1.0);
        let one = ToleranceConfig::from_epsilon(1.0).unwrap();
        assert!((step_size(100.0, 1.0, &one).unwrap() - 1.0 / 101.0).abs() < 1e-17);
        let split = ToleranceConfig::strict(1.0, 0.6).unwrap();
        assert!((step_size(100.0, 1.0, &split).unwrap() - 1.0 / 101.0).abs() < 1e-15);
        assert!(matches!(
            step_size(1.0, 2.0, &one),
            Err(Error::InvalidSmoothness { .. })
        ));
        assert!(step_size(1.0, 0.0, &one).is_err());
    }

    #[test]
    fn rate_bound_examples() {
        let cfg = ToleranceConfig::from_epsilon(1.0).unwrap();
        assert_eq!(rate_bound(50.0, &cfg, 0), 1.0);
        let rho: f64 = ((49.0f64 / 51.0).powi(2) + 1.0) / 2.0;
        assert!((rate_bound(50.0, &cfg, 10) - rho.powi(10)).abs() < 1e-15);
        let e = 0.3;
        let c = ToleranceConfig::from_epsilon(e).unwrap();
        let perfect: f64 = e * e / (1.0 + e * e);
        assert!((rate_bound(1.0, &c, 4) - perfect.powi(4)).abs() < 1e-15);
        let split = ToleranceConfig::strict(e, 0.1).unwrap();
        assert!((rate_bound(7.0, &split, 5) - rate_bound(7.0, &c, 5)).abs() < 1e-14);
    }

    fn psd(d: usize) -> impl Strategy<Value = SymMatrix> {
        prop::collection::vec(-3.0..3.0f64, d * d).prop_map(move |b| {
            let mut rows = vec![vec![0.0; d]; d];
            for i in 0..d {
                for j in 0..d {
                    rows[i][j] = (0..d).map(|k| b[i * d + k] * b[j * d + k]).sum();
                }
            }
            SymMatrix::from_rows(&rows).unwrap()
        })
    }

    fn case() -> impl Strategy<Value = (SymMatrix, Vector)> {
        (2usize..5).prop_flat_map(|d| {
            (
                psd(d).prop_filter("nonzero trace", |s| s.trace() > 1e-3),
                prop::collection::vec(-2.0..2.0f64, d)
                    .prop_filter("nonzero", |g| g.iter().map(|x| x * x).sum::<f64>() > 1e-3)
                    .prop_map(|g| Vector::new(g).unwrap()),
            )
        })
    }

    proptest! {
        #[test]
        fn inner_orth_implies_norm(
            (sigma, g) in case(),
            b in 1u64..10_000,
            eps in 0.05..3.0f64,
            frac in 0.0..1.0f64,
            shrink in 0.5..1.0f64,
        ) {
            let theta = eps * frac.sqrt() * shrink;
            let nu = eps * (1.0 - frac).sqrt() * shrink;
            let (inner, orth) = inner_orth_test_holds(&sigma, &g, b, theta, nu).unwrap();
            if inner && orth {
                prop_assert!(norm_test_holds(&sigma, &g, b, eps).unwrap());
            }
        }

        #[test]
        fn optimal_split_equalizes_sizes((sigma, g) in case(), eps in 0.05..3.0f64) {
            let c = Contractions::new(&sigma, &g, BASE_GRAD_FLOOR).unwrap();
            let (theta, nu) = optimal_split_from(&c, eps).unwrap();
            prop_assert!(((theta * theta + nu * nu) - eps * eps).abs() <= 1e-12 * eps * eps);
            let norm = norm_test_batch_size_real(&c, eps).unwrap();
            let (bi, bo) = inner_orth_batch_sizes_real(&c, theta, nu).unwrap();
            if c.parallel > 0.0 {
                prop_assert!((bi - norm).abs() <= 1e-10 * norm);
            }
            if c.orthogonal > 1e-12 * c.trace {
                prop_assert!((bo - norm).abs() <= 1e-10 * norm);
                prop_assert!(((theta * theta) / (nu * nu) - c.parallel / c.orthogonal).abs()
                    <= 1e-9 * c.parallel / c.orthogonal);
            }
        }

        #[test]
        fn monotone_in_tolerance((sigma, g) in case(), e1 in 0.05..3.0f64, e2 in 0.05..3.0f64) {
            let lim = BatchLimits::default();
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(norm_test_batch_size(&sigma, &g, lo, &lim).unwrap()
                >= norm_test_batch_size(&sigma, &g, hi, &lim).unwrap());
            let a = inner_orth_batch_sizes(&sigma, &g, lo, 1.0, &lim).unwrap();
            let b = inner_orth_batch_sizes(&sigma, &g, hi, 1.0, &lim).unwrap();
            prop_assert!(a.0 >= b.0);
            let a = inner_orth_batch_sizes(&sigma, &g, 1.0, lo, &lim).unwrap();
            let b = inner_orth_batch_sizes(&sigma, &g, 1.0, hi, &lim).unwrap();
            prop_assert!(a.1 >= b.1);
        }

        #[test]
        fn scale_invariance((sigma, g) in case(), c in 0.1..10.0f64, eps in 0.1..2.0f64) {
            let base = Contractions::new(&sigma, &g, BASE_GRAD_FLOOR).unwrap();
            let scaled_sigma = Contractions::new(&sigma.scale(c), &g, BASE_GRAD_FLOOR).unwrap();
            let scaled_grad = Contractions::new(&sigma, &g.scale(c), BASE_GRAD_FLOOR).unwrap();
            let n0 = norm_test_batch_size_real(&base, eps).unwrap();
            let n1 = norm_test_batch_size_real(&scaled_sigma, eps).unwrap();
            let n2 = norm_test_batch_size_real(&scaled_grad, eps).unwrap();
            prop_assert!((n1 - c * n0).abs() <= 1e-10 * c * n0);
            prop_assert!((n2 - n0 / (c * c)).abs() <= 1e-10 * n0 / (c * c));
            let (i0, o0) = inner_orth_batch_sizes_real(&base, 0.4, 0.7).unwrap();
            let (i1, o1) = inner_orth_batch_sizes_real(&scaled_sigma, 0.4, 0.7).unwrap();
            let (i2, o2) = inner_orth_batch_sizes_real(&scaled_grad, 0.4, 0.7).unwrap();
            prop_assert!((i1 - c * i0).abs() <= 1e-9 * (1.0 + c * i0));
            prop_assert!((o1 - c * o0).abs() <= 1e-9 * (1.0 + c * o0));
            prop_assert!((i2 - i0 / (c * c)).abs() <= 1e-9 * (1.0 + i0 / (c * c)));
            prop_assert!((o2 - o0 / (c * c)).abs() <= 1e-9 * (1.0 + o0 / (c * c)));
            let s0 = optimal_split_from(&base, eps).unwrap();
            let s1 = optimal_split_from(&scaled_sigma, eps).unwrap();
            let s2 = optimal_split_from(&scaled_grad, eps).unwrap();
            prop_assert!((s0.0 - s1.0).abs() < 1e-9 && (s0.1 - s1.1).abs() < 1e-9);
            prop_assert!((s0.0 - s2.0).abs() < 1e-9 && (s0.1 - s2.1).abs() < 1e-9);
        }

        #[test]
        fn rate_below_one(kappa in 1.0..1e4f64, eps in 1e-3..10.0f64, k in 1u32..200) {
            let cfg = ToleranceConfig::from_epsilon(eps).unwrap();
            prop_assert!(rate_bound(kappa, &cfg, k) < 1.0);
        }
    }
}
