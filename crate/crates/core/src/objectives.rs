//! Stochastic objectives `F(ξ) = E[f(ξ, ϑ) | ξ]` with Monte Carlo gradient
//! sampling, and the two built-in quadratic test problems.

use rand::RngCore;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{eig_extremes, SymMatrix, Vector};
use crate::sampling::{fill_standard_normal, uniform};

/// Gradient-Lipschitz and strong-convexity constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothness {
    pub l: f64,
    pub mu: f64,
}

impl Smoothness {
    pub fn new(l: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && l >= mu && l.is_finite()) {
            return Err(Error::InvalidSmoothness { l, mu });
        }
        Ok(Smoothness { l, mu })
    }

    /// Condition number `L / μ`.
    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }

    /// Extremes of the spectrum of a constant Hessian.
    pub fn of_hessian(h: &SymMatrix) -> Result<Self> {
        let (lo, hi) = eig_extremes(h)?;
        Self::new(hi, lo)
    }
}

/// A stochastic objective that can draw single-sample gradients.
///
/// Only [`dim`](Self::dim) and [`sample_gradient_into`](Self::sample_gradient_into)
/// are required. The exact oracles default to [`Error::OracleUnavailable`],
/// which restricts an objective to plug-in batch control.
///
/// Implementations must be immutable: the random stream is owned by the caller
/// and a single stream must not be shared across threads.
pub trait StochasticObjective: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes one draw `∇ξ f(ξ, ϑ)`, `ϑ ~ π`, into `out`.
    ///
    /// `xi` and `out` have length [`dim`](Self::dim); callers check this.
    fn sample_gradient_into(&self, xi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]);

    fn sample_gradient(&self, xi: &Vector, rng: &mut dyn RngCore) -> Result<Vector> {
        check_dim(self.dim(), xi.dim())?;
        let mut out = vec![0.0; self.dim()];
        self.sample_gradient_into(xi.as_slice(), rng, &mut out);
        Vector::new(out)
    }

    fn exact_gradient(&self, _xi: &Vector) -> Result<Vector> {
        Err(Error::OracleUnavailable("gradient"))
    }

    fn exact_value(&self, _xi: &Vector) -> Result<f64> {
        Err(Error::OracleUnavailable("value"))
    }

    /// Covariance of a single-sample gradient at `xi`.
    fn exact_covariance(&self, _xi: &Vector) -> Result<SymMatrix> {
        Err(Error::OracleUnavailable("covariance"))
    }

    fn minimizer(&self) -> Result<Vector> {
        Err(Error::OracleUnavailable("minimizer"))
    }

    fn smoothness(&self) -> Result<Smoothness> {
        Err(Error::OracleUnavailable("smoothness"))
    }
}

/// `F(ξ) = E[½ ξ·Hξ − ϑ·ξ]` on R³ with `ϑ ~ N(0, σ² I)`.
///
/// The fixed Hessian is `[[2,1,1],[1,10,1],[1,1,100]]` and σ² defaults to 1000.
/// Since `E[ϑ] = 0` the exact value reduces to `½ ξ·Hξ`.
#[derive(Debug, Clone)]
pub struct Quadratic3 {
    h: SymMatrix,
    noise_var: f64,
    noise_std: f64,
}

impl Default for Quadratic3 {
    fn default() -> Self {
        Self::new()
    }
}

impl Quadratic3 {
    pub fn new() -> Self {
        Self::with_noise_variance(1000.0)
    }

    /// Same Hessian without noise: sampled gradients are exact.
    pub fn noiseless() -> Self {
        Self::with_noise_variance(0.0)
    }

    /// Per-coordinate noise variance σ² (must be ≥ 0).
    pub fn with_noise_variance(noise_var: f64) -> Self {
        assert!(
            noise_var >= 0.0 && noise_var.is_finite(),
            "noise variance must be finite and >= 0"
        );
        let h = SymMatrix::from_rows(&[
            vec![2.0, 1.0, 1.0],
            vec![1.0, 10.0, 1.0],
            vec![1.0, 1.0, 100.0],
        ])
        .expect("finite 3x3");
        Quadratic3 {
            h,
            noise_var,
            noise_std: noise_var.sqrt(),
        }
    }

    pub fn hessian(&self) -> &SymMatrix {
        &self.h
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_var
    }
}

impl StochasticObjective for Quadratic3 {
    fn dim(&self) -> usize {
        3
    }

    fn sample_gradient_into(&self, xi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let mut noise = [0.0; 3];
        if self.noise_std != 0.0 {
            fill_standard_normal(rng, &mut noise);
        }
        let h = self.h.row_major();
        for i in 0..3 {
            let hx = h[3 * i] * xi[0] + h[3 * i + 1] * xi[1] + h[3 * i + 2] * xi[2];
            out[i] = hx - self.noise_std * noise[i];
        }
    }

    fn exact_gradient(&self, xi: &Vector) -> Result<Vector> {
        self.h.mul_vec(xi)
    }

    fn exact_value(&self, xi: &Vector) -> Result<f64> {
        Ok(0.5 * self.h.quadratic_form(xi)?)
    }

    fn exact_covariance(&self, xi: &Vector) -> Result<SymMatrix> {
        check_dim(3, xi.dim())?;
        Ok(SymMatrix::scaled_identity(3, self.noise_var))
    }

    fn minimizer(&self) -> Result<Vector> {
        Ok(Vector::zeros(3))
    }

    fn smoothness(&self) -> Result<Smoothness> {
        Smoothness::of_hessian(&self.h)
    }
}

/// `F(ξ) = ½ ξ·E[H(ϑ)]ξ − b·ξ` on R² with `H(ϑ) = I(1−ϑ) + Aϑ`, `ϑ ~ U(0, 1)`.
///
/// `A = [[2κ, 0.5], [0.5, 1]]` and `b = (1, 1)`.
#[derive(Debug, Clone)]
pub struct Quadratic2 {
    kappa: f64,
    a: SymMatrix,
    a_minus_i: SymMatrix,
    mean_h: SymMatrix,
    b: Vector,
    minimizer: Vector,
}

impl Default for Quadratic2 {
    fn default() -> Self {
        Self::new(100.0).expect("default kappa is valid")
    }
}

impl Quadratic2 {
    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::NonFinite("kappa"));
        }
        Self::with_matrix(
            SymMatrix::from_rows(&[vec![2.0 * kappa, 0.5], vec![0.5, 1.0]])?,
            kappa,
        )
    }

    /// General `A`; `kappa` is kept only as a label.
    pub fn with_matrix(a: SymMatrix, kappa: f64) -> Result<Self> {
        check_dim(2, a.dim())?;
        let identity = SymMatrix::identity(2);
        let mean_h = identity.add(&a)?.scale(0.5);
        let b = Vector::from_slice(&[1.0, 1.0])?;
        let minimizer = solve_2x2(&mean_h, &b)?;
        Ok(Quadratic2 {
            kappa,
            a_minus_i: a.sub(&identity)?,
            a,
            mean_h,
            b,
            minimizer,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    /// `E[H(ϑ)] = (I + A)/2`
    pub fn mean_hessian(&self) -> &SymMatrix {
        &self.mean_h
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }
}

/// Cramer's rule for a 2×2 system.
pub fn solve_2x2(m: &SymMatrix, rhs: &Vector) -> Result<Vector> {
    check_dim(2, m.dim())?;
    check_dim(2, rhs.dim())?;
    let (a, b, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 1));
    let det = a * d - b * b;
    if det == 0.0 || !det.is_finite() {
        return Err(Error::SingularMatrix);
    }
    Vector::new(vec![
        (rhs[0] * d - b * rhs[1]) / det,
        (a * rhs[1] - b * rhs[0]) / det,
    ])
}

impl StochasticObjective for Quadratic2 {
    fn dim(&self) -> usize {
        2
    }

    fn sample_gradient_into(&self, xi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let t = uniform(rng);
        let m = self.a_minus_i.row_major();
        let w0 = m[0] * xi[0] + m[1] * xi[1];
        let w1 = m[2] * xi[0] + m[3] * xi[1];
        out[0] = xi[0] + t * w0 - self.b[0];
        out[1] = xi[1] + t * w1 - self.b[1];
    }

    fn exact_gradient(&self, xi: &Vector) -> Result<Vector> {
        Ok(self.mean_h.mul_vec(xi)?.sub(&self.b))
    }

    fn exact_value(&self, xi: &Vector) -> Result<f64> {
        Ok(0.5 * self.mean_h.quadratic_form(xi)? - self.b.dot(xi))
    }

    /// `Var(ϑ) · w ⊗ w` with `w = (A − I)ξ` and `Var(ϑ) = 1/12`.
    fn exact_covariance(&self, xi: &Vector) -> Result<SymMatrix> {
        let w = self.a_minus_i.mul_vec(xi)?;
        Ok(SymMatrix::outer(&w).scale(1.0 / 12.0))
    }

    fn minimizer(&self) -> Result<Vector> {
        Ok(self.minimizer.clone())
    }

    fn smoothness(&self) -> Result<Smoothness> {
        Smoothness::of_hessian(&self.mean_h)
    }
}
