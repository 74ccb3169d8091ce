//! Constant-step SGD with adaptive batch sizes and full cost accounting.

use rand::RngCore;

use crate::batch::{
    inner_orth_batch_sizes_real, isotropic_split, norm_test_batch_size_real, optimal_split_from,
    step_size, BatchLimits, Contractions, DecisionMode, GradientBatchStats, ToleranceConfig,
};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{grad_floor, SymMatrix, Vector};
use crate::objectives::StochasticObjective;
use crate::sampling::stream;

/// Which sample-size test picks the next batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Controller {
    /// Norm test with tolerance `ε`.
    Norm { epsilon: f64 },
    /// Inner-product/orthogonality test with fixed `(θ, ν)`.
    InnerOrth { theta: f64, nu: f64 },
    /// Inner-product/orthogonality test with `(θ, ν)` re-split from `ε` at every decision.
    InnerOrthOptimalSplit { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKind {
    Norm,
    InnerOrth,
    InnerOrthOptimalSplit,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::Norm,
        ControllerKind::InnerOrth,
        ControllerKind::InnerOrthOptimalSplit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Norm => "norm",
            ControllerKind::InnerOrth => "innerOrth",
            ControllerKind::InnerOrthOptimalSplit => "innerOrthOptimalSplit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown controller `{s}`")))
    }

    /// The controller this kind denotes for a tolerance triple.
    pub fn with_tolerances(self, cfg: &ToleranceConfig) -> Controller {
        match self {
            ControllerKind::Norm => Controller::Norm {
                epsilon: cfg.epsilon,
            },
            ControllerKind::InnerOrth => Controller::InnerOrth {
                theta: cfg.theta,
                nu: cfg.nu,
            },
            ControllerKind::InnerOrthOptimalSplit => Controller::InnerOrthOptimalSplit {
                epsilon: cfg.epsilon,
            },
        }
    }
}

impl Controller {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Controller::Norm { .. } => ControllerKind::Norm,
            Controller::InnerOrth { .. } => ControllerKind::InnerOrth,
            Controller::InnerOrthOptimalSplit { .. } => ControllerKind::InnerOrthOptimalSplit,
        }
    }

    /// Tolerances entering the default step size: `ε²` for the norm test and the
    /// optimal split, `θ² + ν²` for a fixed split.
    pub fn step_tolerance(&self) -> Result<ToleranceConfig> {
        match *self {
            Controller::Norm { epsilon } | Controller::InnerOrthOptimalSplit { epsilon } => {
                ToleranceConfig::from_epsilon(epsilon)
            }
            Controller::InnerOrth { theta, nu } => ToleranceConfig::from_split(theta, nu),
        }
    }

    /// Pre-ceiling batch size for the given contractions. Returns the size and
    /// whether the isotropic split fallback was used.
    fn batch_size_real(&self, c: &Contractions, dim: usize) -> Result<(f64, bool)> {
        match *self {
            Controller::Norm { epsilon } => Ok((norm_test_batch_size_real(c, epsilon)?, false)),
            Controller::InnerOrth { theta, nu } => {
                let (i, o) = inner_orth_batch_sizes_real(c, theta, nu)?;
                Ok((i.max(o), false))
            }
            Controller::InnerOrthOptimalSplit { epsilon } => {
                let (split, fallback) = match optimal_split_from(c, epsilon) {
                    Ok(split) => (split, false),
                    Err(Error::ZeroCovariance) => (isotropic_split(epsilon, dim), true),
                    Err(e) => return Err(e),
                };
                let (i, o) = inner_orth_batch_sizes_real(c, split.0, split.1)?;
                Ok((i.max(o), fallback))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub controller: Controller,
    pub mode: DecisionMode,
    /// Replaces the default `2 / ((L + μ)(1 + ε²))` step size.
    pub step_size_override: Option<f64>,
    pub max_iterations: u64,
    pub max_gradient_evals: u64,
    /// Batch size of iteration 0.
    pub b0: u64,
    pub seed: u64,
    pub limits: BatchLimits,
}

impl SgdConfig {
    pub fn new(controller: Controller) -> Self {
        SgdConfig {
            controller,
            mode: DecisionMode::Oracle,
            step_size_override: None,
            max_iterations: 1_000_000,
            max_gradient_evals: 1_000_000,
            b0: 32,
            seed: 0,
            limits: BatchLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.max_iterations < 1 {
            return bad("max_iterations must be >= 1".into());
        }
        if self.b0 < self.limits.b_min {
            return bad(format!(
                "b0 = {} is below b_min = {}",
                self.b0, self.limits.b_min
            ));
        }
        if self.limits.b_min < 1 || self.limits.b_min > self.limits.b_max {
            return bad(format!(
                "batch limits [{}, {}] are empty",
                self.limits.b_min, self.limits.b_max
            ));
        }
        if self.mode == DecisionMode::Plugin && self.limits.b_min < 2 {
            return bad("plug-in mode needs b_min >= 2".into());
        }
        if self.max_gradient_evals < self.b0 {
            return bad(format!(
                "budget {} is below b0 = {}",
                self.max_gradient_evals, self.b0
            ));
        }
        if let Some(eta) = self.step_size_override {
            if !(eta > 0.0 && eta.is_finite()) {
                return bad(format!("step size must be positive, got {eta}"));
            }
        }
        Ok(())
    }
}

/// State after iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: u64,
    /// `ξ_{k+1} = ξ_k − η υ_k`
    pub xi: Vector,
    /// `b_k`, the number of samples averaged into `υ_k`.
    pub batch_size: u64,
    /// `Σ_{j≤k} b_j`
    pub cumulative_cost: u64,
    /// `F(ξ_{k+1}) − F(ξ*)` when the objective has value and minimizer oracles.
    pub gap: Option<f64>,
    /// `‖∇F(ξ_{k+1})‖²` when the objective has a gradient oracle.
    pub grad_norm_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    MaxIterations,
    /// The next batch would exceed the gradient-evaluation budget.
    BudgetExhausted,
    /// The reference gradient fell below the floor where the tests are defined.
    Converged,
    /// The iterate left the finite range.
    Diverged,
    /// The batch controller failed; the message is the error.
    ControllerError(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub xi0: Vector,
    pub initial_gap: Option<f64>,
    pub step_size: f64,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    /// Decisions where the optimal split fell back to the isotropic one.
    pub split_fallbacks: u64,
}

impl RunRecord {
    pub fn total_cost(&self) -> u64 {
        self.iterations.last().map_or(0, |r| r.cumulative_cost)
    }

    pub fn final_xi(&self) -> &Vector {
        self.iterations.last().map_or(&self.xi0, |r| &r.xi)
    }

    /// Iterate `ξ_k`, with `ξ_0` the starting point.
    pub fn xi(&self, k: usize) -> Option<&Vector> {
        match k {
            0 => Some(&self.xi0),
            _ => self.iterations.get(k - 1).map(|r| &r.xi),
        }
    }
}

/// Mean and unbiased covariance (divisor `b − 1`) of `b` sampled gradients.
///
/// `sample_cov` is `None` for `b = 1`.
pub fn batch_mean_and_cov(
    obj: &dyn StochasticObjective,
    xi: &Vector,
    b: u64,
    rng: &mut dyn RngCore,
) -> Result<GradientBatchStats> {
    sample_batch(obj, xi, b, rng, true)
}

fn sample_batch(
    obj: &dyn StochasticObjective,
    xi: &Vector,
    b: u64,
    rng: &mut dyn RngCore,
    with_cov: bool,
) -> Result<GradientBatchStats> {
    let d = obj.dim();
    check_dim(d, xi.dim())?;
    if b == 0 {
        return Err(Error::InvalidConfig("batch size must be >= 1".into()));
    }
    let x = xi.as_slice();
    let mut g = vec![0.0; d];
    obj.sample_gradient_into(x, rng, &mut g);
    // moments are accumulated about the first sample
    let shift = g.clone();
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; if with_cov { d * d } else { 0 }];
    for _ in 1..b {
        obj.sample_gradient_into(x, rng, &mut g);
        for i in 0..d {
            g[i] -= shift[i];
            s1[i] += g[i];
        }
        if with_cov {
            for i in 0..d {
                for j in i..d {
                    s2[i * d + j] += g[i] * g[j];
                }
            }
        }
    }
    let n = b as f64;
    let mean: Vec<f64> = (0..d).map(|i| shift[i] + s1[i] / n).collect();
    let mean = Vector::new(mean)?;
    let sample_cov = if with_cov && b >= 2 {
        let mut rows = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in i..d {
                let c = (s2[i * d + j] - s1[i] * s1[j] / n) / (n - 1.0);
                rows[i][j] = c;
                rows[j][i] = c;
            }
        }
        Some(SymMatrix::from_rows(&rows)?)
    } else {
        None
    };
    Ok(GradientBatchStats {
        mean,
        sample_cov,
        batch_size: b,
    })
}

struct GapOracle {
    f_star: Option<f64>,
}

impl GapOracle {
    fn new(obj: &dyn StochasticObjective) -> Self {
        let f_star = obj.minimizer().and_then(|x| obj.exact_value(&x)).ok();
        GapOracle { f_star }
    }

    fn gap(&self, obj: &dyn StochasticObjective, xi: &Vector) -> Option<f64> {
        Some(obj.exact_value(xi).ok()? - self.f_star?)
    }
}

/// Runs `ξ_{k+1} = ξ_k − η υ_k` from `xi0`.
///
/// Iteration 0 uses `cfg.b0` samples. In oracle mode the batch for `ξ_k`,
/// `k ≥ 1`, is sized from the exact covariance and gradient at `ξ_k`. In
/// plug-in mode the sample covariance and mean of iteration `k` size the batch
/// of iteration `k + 1`.
///
/// Configuration and oracle-availability problems are returned as errors;
/// anything that happens mid-run ends the run with a [`Termination`].
pub fn run_sgd(obj: &dyn StochasticObjective, cfg: &SgdConfig, xi0: &Vector) -> Result<RunRecord> {
    cfg.validate()?;
    check_dim(obj.dim(), xi0.dim())?;
    if cfg.mode == DecisionMode::Oracle {
        obj.exact_gradient(xi0)?;
        obj.exact_covariance(xi0)?;
    }
    let eta = match cfg.step_size_override {
        Some(eta) => eta,
        None => {
            let s = obj.smoothness()?;
            step_size(s.l, s.mu, &cfg.controller.step_tolerance()?)?
        }
    };
    let gap_oracle = GapOracle::new(obj);
    let mut rng = stream(cfg.seed);
    let rng: &mut dyn RngCore = &mut rng;

    let mut record = RunRecord {
        xi0: xi0.clone(),
        initial_gap: gap_oracle.gap(obj, xi0),
        step_size: eta,
        iterations: Vec::new(),
        termination: Termination::MaxIterations,
        split_fallbacks: 0,
    };
    let want_cov = cfg.mode == DecisionMode::Plugin;
    let mut xi = xi0.clone();
    let mut batch = cfg.b0;
    let mut cost = 0u64;

    let decide =
        |sigma: &SymMatrix, grad: &Vector, at: &Vector, fallbacks: &mut u64| -> Result<u64> {
            let c = Contractions::new(sigma, grad, grad_floor(at))?;
            let (real, fell_back) = cfg.controller.batch_size_real(&c, obj.dim())?;
            *fallbacks += u64::from(fell_back);
            Ok(cfg.limits.clamp(real))
        };

    for k in 0..cfg.max_iterations {
        if cost + batch > cfg.max_gradient_evals {
            record.termination = Termination::BudgetExhausted;
            return Ok(record);
        }
        let stats = sample_batch(obj, &xi, batch, rng, want_cov)?;
        cost += batch;
        let next = xi.axpy(-eta, &stats.mean);
        if !next.is_finite() {
            record.termination = Termination::Diverged;
            return Ok(record);
        }
        let exact_grad = obj.exact_gradient(&next).ok();
        record.iterations.push(IterationRecord {
            k,
            xi: next.clone(),
            batch_size: batch,
            cumulative_cost: cost,
            gap: gap_oracle.gap(obj, &next),
            grad_norm_sq: exact_grad.as_ref().map(Vector::norm_sq),
        });

        let decision = match cfg.mode {
            DecisionMode::Oracle => {
                let grad = exact_grad.ok_or(Error::OracleUnavailable("gradient"));
                grad.and_then(|g| {
                    let sigma = obj.exact_covariance(&next)?;
                    decide(&sigma, &g, &next, &mut record.split_fallbacks)
                })
            }
            DecisionMode::Plugin => match &stats.sample_cov {
                Some(cov) => decide(cov, &stats.mean, &xi, &mut record.split_fallbacks),
                None => Err(Error::InvalidConfig(
                    "plug-in batch had a single sample".into(),
                )),
            },
        };
        match decision {
            Ok(b) => batch = b,
            Err(Error::DegenerateGradient { .. }) => {
                record.termination = Termination::Converged;
                return Ok(record);
            }
            Err(e) => {
                record.termination = Termination::ControllerError(e.to_string());
                return Ok(record);
            }
        }
        xi = next;
    }
    record.termination = Termination::MaxIterations;
    Ok(record)
}
