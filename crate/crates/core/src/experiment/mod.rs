//! Replicated experiments: every (controller, case) cell is run over many
//! seeds, each run is put on a shared logarithmic cost grid, and the cell is
//! reduced to pointwise percentile bands of the optimality gap.

mod aggregate;
mod config;
mod output;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::batch::{BatchLimits, DecisionMode, ToleranceConfig};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::objectives::{Quadratic2, Quadratic3, StochasticObjective};
use crate::sgd::{run_sgd, ControllerKind, SgdConfig};

pub use aggregate::{
    aggregate, band_overlap, gap_on_grid, log_cost_grid, overlap_fraction, percentile_nearest_rank,
    tail_disjoint, AggregateCurve,
};
pub use config::{parse_config, parse_controllers, parse_mode, RunConfig};
pub use output::{csv_string, parse_csv, read_csv, render_svg, write_atomic, write_csv, write_svg};

/// Number of points on the shared cost grid.
pub const GRID_POINTS: usize = 200;

/// Environment variable capping the number of replication workers (0 = auto).
pub const THREADS_ENV: &str = "ADABATCH_THREADS";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    Quad3,
    Quad2 { kappa: f64 },
}

impl ObjectiveKind {
    pub fn build(&self) -> Result<Box<dyn StochasticObjective>> {
        Ok(match *self {
            ObjectiveKind::Quad3 => Box::new(Quadratic3::new()),
            ObjectiveKind::Quad2 { kappa } => Box::new(Quadratic2::new(kappa)?),
        })
    }

    pub fn default_xi0(&self) -> Vector {
        match self {
            ObjectiveKind::Quad3 => Vector::from_slice(&[0.225, -0.2, 0.1]).expect("finite"),
            ObjectiveKind::Quad2 { .. } => Vector::from_slice(&[20.0, 50.0]).expect("finite"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Quad3 => "quad3",
            ObjectiveKind::Quad2 { .. } => "quad2",
        }
    }

    /// `quad3`, or `quad2` with the given condition number.
    pub fn parse(name: &str, kappa: f64) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "quad3" => Ok(ObjectiveKind::Quad3),
            "quad2" => Ok(ObjectiveKind::Quad2 { kappa }),
            other => Err(Error::InvalidConfig(format!("unknown objective `{other}`"))),
        }
    }
}

/// A labelled tolerance triple; the label is the `case` column of the CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub label: u32,
    pub tolerances: ToleranceConfig,
}

impl Case {
    /// Table 1 case `#label`.
    pub fn table(label: u32) -> Result<Self> {
        let tolerances = ToleranceConfig::table_case(label)
            .ok_or_else(|| Error::InvalidConfig(format!("no built-in case #{label}")))?;
        Ok(Case { label, tolerances })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub objective: ObjectiveKind,
    pub cases: Vec<Case>,
    pub controllers: Vec<ControllerKind>,
    pub replications: usize,
    pub xi0: Vector,
    pub base_seed: u64,
    /// Gradient-evaluation budget of each run; also the right end of the cost grid.
    pub budget: u64,
    pub b0: u64,
    pub mode: DecisionMode,
    pub max_iterations: u64,
    pub step_size_override: Option<f64>,
    pub limits: BatchLimits,
}

impl ExperimentSpec {
    /// Table 1 cases #1–#4, norm vs inner/orth, 1000 replications, budget 10⁶.
    pub fn new(objective: ObjectiveKind) -> Self {
        ExperimentSpec {
            objective,
            cases: (1..=4)
                .map(|i| Case::table(i).expect("built-in case"))
                .collect(),
            controllers: vec![ControllerKind::Norm, ControllerKind::InnerOrth],
            replications: 1000,
            xi0: objective.default_xi0(),
            base_seed: 0,
            budget: 1_000_000,
            b0: 32,
            mode: DecisionMode::Oracle,
            max_iterations: u64::MAX,
            step_size_override: None,
            limits: BatchLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.cases.is_empty() {
            return bad("no cases");
        }
        if self.controllers.is_empty() {
            return bad("no controllers");
        }
        if self.replications == 0 {
            return bad("replications must be >= 1");
        }
        let mut labels: Vec<u32> = self.cases.iter().map(|c| c.label).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.cases.len() {
            return bad("case labels must be distinct");
        }
        let mut kinds = self.controllers.clone();
        kinds.sort_unstable();
        kinds.dedup();
        if kinds.len() != self.controllers.len() {
            return bad("controllers must be distinct");
        }
        check_dim(self.objective.build()?.dim(), self.xi0.dim())?;
        self.sgd_config(self.controllers[0], &self.cases[0], 0)
            .validate()
    }

    fn sgd_config(&self, kind: ControllerKind, case: &Case, rep: usize) -> SgdConfig {
        SgdConfig {
            controller: kind.with_tolerances(&case.tolerances),
            mode: self.mode,
            step_size_override: self.step_size_override,
            max_iterations: self.max_iterations,
            max_gradient_evals: self.budget,
            b0: self.b0,
            seed: self.base_seed.wrapping_add(rep as u64),
            limits: self.limits,
        }
    }

    pub fn cost_grid(&self) -> Result<Vec<u64>> {
        log_cost_grid(self.b0, self.budget, GRID_POINTS)
    }
}

/// Key of a cell: controller and case label.
pub type CellKey = (ControllerKind, u32);

/// Aggregated curves of an experiment plus the number of failed replications
/// in each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub curves: BTreeMap<CellKey, AggregateCurve>,
    pub failed_runs: BTreeMap<CellKey, usize>,
}

/// Worker count from `ADABATCH_THREADS`; unset, empty or 0 means one per CPU.
pub fn worker_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(s) if s.trim().is_empty() => Ok(0),
        Ok(s) => s.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("{THREADS_ENV} must be an integer, got `{s}`"))
        }),
    }
}

/// [`run_experiment_with_threads`] with the worker count from the environment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run_experiment_with_threads(spec, worker_threads()?)
}

/// Runs every replication of every cell on a pool of `threads` workers
/// (0 = one per CPU). The result does not depend on `threads`: replication `i`
/// always uses seed `base_seed + i` and results are joined by index.
pub fn run_experiment_with_threads(
    spec: &ExperimentSpec,
    threads: usize,
) -> Result<ExperimentResult> {
    spec.validate()?;
    let objective = spec.objective.build()?;
    let grid = spec.cost_grid()?;

    let cells: Vec<(ControllerKind, Case)> = spec
        .controllers
        .iter()
        .flat_map(|&k| spec.cases.iter().map(move |c| (k, *c)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.replications).map(move |r| (c, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let obj: &dyn StochasticObjective = objective.as_ref();
    let gaps: Vec<Option<Vec<f64>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| {
                let (kind, case) = &cells[c];
                let cfg = spec.sgd_config(*kind, case, r);
                run_sgd(obj, &cfg, &spec.xi0)
                    .ok()
                    .and_then(|run| gap_on_grid(&run, &grid))
            })
            .collect()
    });

    let mut result = ExperimentResult {
        curves: BTreeMap::new(),
        failed_runs: BTreeMap::new(),
    };
    for (c, chunk) in gaps.chunks(spec.replications).enumerate() {
        let (kind, case) = &cells[c];
        let key = (*kind, case.label);
        let ok: Vec<Vec<f64>> = chunk.iter().flatten().cloned().collect();
        result.failed_runs.insert(key, spec.replications - ok.len());
        if ok.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "every replication of cell ({}, #{}) failed",
                kind.as_str(),
                case.label
            )));
        }
        result.curves.insert(key, aggregate(&grid, &ok)?);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(objective: ObjectiveKind) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(objective);
        spec.cases = vec![Case::table(3).unwrap()];
        spec.replications = 6;
        spec.budget = 20_000;
        spec
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let spec = small(ObjectiveKind::Quad3);
        let one = run_experiment_with_threads(&spec, 1).unwrap();
        let three = run_experiment_with_threads(&spec, 3).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.curves.len(), 2);
        assert!(one.failed_runs.values().all(|&n| n == 0));
    }

    #[test]
    fn identical_seeds_collapse_bands() {
        // replications share a seed only through base_seed, so run the same
        // seed twice by hand and aggregate
        let spec = small(ObjectiveKind::Quad2 { kappa: 100.0 });
        let grid = spec.cost_grid().unwrap();
        let obj = spec.objective.build().unwrap();
        let cfg = spec.sgd_config(ControllerKind::Norm, &spec.cases[0], 0);
        let run = run_sgd(obj.as_ref(), &cfg, &spec.xi0).unwrap();
        let g = gap_on_grid(&run, &grid).unwrap();
        let c = aggregate(&grid, &[g.clone(), g]).unwrap();
        assert_eq!(c.lo95, c.median);
        assert_eq!(c.hi95, c.median);
    }

    #[test]
    fn gaps_decrease_overall() {
        let r = run_experiment_with_threads(&small(ObjectiveKind::Quad3), 1).unwrap();
        for curve in r.curves.values() {
            assert!(curve.median.last().unwrap() < &(curve.median[0] * 0.5));
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = small(ObjectiveKind::Quad3);
        spec.replications = 0;
        assert!(spec.validate().is_err());
        let mut spec = small(ObjectiveKind::Quad3);
        spec.controllers = vec![ControllerKind::Norm, ControllerKind::Norm];
        assert!(spec.validate().is_err());
        let mut spec = small(ObjectiveKind::Quad3);
        spec.xi0 = Vector::zeros(2);
        assert!(run_experiment_with_threads(&spec, 1).is_err());
        assert!(ObjectiveKind::parse("quad4", 1.0).is_err());
        assert_eq!(
            ObjectiveKind::parse("QUAD2", 10.0).unwrap(),
            ObjectiveKind::Quad2 { kappa: 10.0 }
        );
    }
}
