//! Putting heterogeneous runs on a shared cost axis and reducing them to
//! pointwise percentile bands.

use crate::error::{Error, Result};
use crate::sgd::RunRecord;

/// Pointwise 2.5% / 50% / 97.5% percentiles of the optimality gap over
/// replications, on a shared cost grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub cost_grid: Vec<u64>,
    pub median: Vec<f64>,
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
}

impl AggregateCurve {
    pub fn len(&self) -> usize {
        self.cost_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost_grid.is_empty()
    }
}

/// `points` logarithmically spaced integer costs from `start` to `end`
/// (inclusive), rounded and deduplicated so the grid is strictly increasing.
pub fn log_cost_grid(start: u64, end: u64, points: usize) -> Result<Vec<u64>> {
    if start == 0 || end < start || points == 0 {
        return Err(Error::InvalidConfig(format!(
            "cost grid needs 0 < start <= end and points > 0, got [{start}, {end}] x {points}"
        )));
    }
    if points == 1 || start == end {
        return Ok(vec![end]);
    }
    let (a, b) = ((start as f64).ln(), (end as f64).ln());
    let mut grid: Vec<u64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            ((a + t * (b - a)).exp().round() as u64).clamp(start, end)
        })
        .collect();
    grid[0] = start;
    grid[points - 1] = end;
    grid.dedup();
    Ok(grid)
}

/// The gap of a run at each grid cost: the gap after the last iteration whose
/// cumulative cost does not exceed the grid point, or the initial gap before
/// the first iteration completes.
///
/// Returns `None` if the run has no gap oracle.
pub fn gap_on_grid(run: &RunRecord, grid: &[u64]) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut current = run.initial_gap?;
    let mut next = 0;
    for &cost in grid {
        while next < run.iterations.len() && run.iterations[next].cumulative_cost <= cost {
            current = run.iterations[next].gap?;
            next += 1;
        }
        out.push(current);
    }
    Some(out)
}

/// Nearest-rank percentile of an ascending slice: the `⌈p·n⌉`-th smallest
/// value (1-based, at least the first).
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Pointwise percentile bands of per-run gap curves sampled on `grid`.
pub fn aggregate(grid: &[u64], runs: &[Vec<f64>]) -> Result<AggregateCurve> {
    if runs.is_empty() {
        return Err(Error::InvalidConfig("no runs to aggregate".into()));
    }
    let mut curve = AggregateCurve {
        cost_grid: grid.to_vec(),
        median: Vec::with_capacity(grid.len()),
        lo95: Vec::with_capacity(grid.len()),
        hi95: Vec::with_capacity(grid.len()),
    };
    let mut column = Vec::with_capacity(runs.len());
    for j in 0..grid.len() {
        column.clear();
        column.extend(runs.iter().map(|r| r[j]));
        column.sort_by(f64::total_cmp);
        curve.lo95.push(percentile_nearest_rank(&column, 0.025));
        curve.median.push(percentile_nearest_rank(&column, 0.5));
        curve.hi95.push(percentile_nearest_rank(&column, 0.975));
    }
    Ok(curve)
}

fn bands_intersect(a: &AggregateCurve, b: &AggregateCurve, j: usize) -> bool {
    a.lo95[j].max(b.lo95[j]) <= a.hi95[j].min(b.hi95[j])
}

fn check_same_grid(a: &AggregateCurve, b: &AggregateCurve) -> Result<()> {
    if a.cost_grid != b.cost_grid {
        return Err(Error::InvalidConfig(
            "curves are on different cost grids".into(),
        ));
    }
    Ok(())
}

/// Fraction of grid points in `range` where the two 95% bands intersect.
pub fn overlap_fraction(
    a: &AggregateCurve,
    b: &AggregateCurve,
    range: std::ops::Range<usize>,
) -> Result<f64> {
    check_same_grid(a, b)?;
    let n = range.len();
    if n == 0 {
        return Ok(0.0);
    }
    let hits = range.filter(|&j| bands_intersect(a, b, j)).count();
    Ok(hits as f64 / n as f64)
}

/// Fraction of the whole grid where the bands intersect.
pub fn band_overlap(a: &AggregateCurve, b: &AggregateCurve) -> Result<f64> {
    overlap_fraction(a, b, 0..a.len())
}

/// Fraction of the second half of the grid where the bands are disjoint.
pub fn tail_disjoint(a: &AggregateCurve, b: &AggregateCurve) -> Result<f64> {
    Ok(1.0 - overlap_fraction(a, b, a.len() / 2..a.len())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use crate::sgd::{IterationRecord, Termination};

    fn run(initial: f64, steps: &[(u64, f64)]) -> RunRecord {
        RunRecord {
            xi0: Vector::zeros(1),
            initial_gap: Some(initial),
            step_size: 0.1,
            iterations: steps
                .iter()
                .enumerate()
                .map(|(k, &(c, g))| IterationRecord {
                    k: k as u64,
                    xi: Vector::zeros(1),
                    batch_size: 1,
                    cumulative_cost: c,
                    gap: Some(g),
                    grad_norm_sq: None,
                })
                .collect(),
            termination: Termination::BudgetExhausted,
            split_fallbacks: 0,
        }
    }

    #[test]
    fn grid_is_strictly_increasing_with_endpoints() {
        let g = log_cost_grid(32, 1_000_000, 200).unwrap();
        assert_eq!(g[0], 32);
        assert_eq!(*g.last().unwrap(), 1_000_000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g.len(), 200);
        let small = log_cost_grid(2, 10, 50).unwrap();
        assert!(small.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(small, (2..=10).collect::<Vec<_>>());
        assert!(log_cost_grid(0, 10, 5).is_err());
    }

    #[test]
    fn interpolation_never_looks_ahead() {
        let r = run(9.0, &[(10, 5.0), (30, 2.0), (31, 1.0)]);
        let g = gap_on_grid(&r, &[5, 10, 29, 30, 31, 1000]).unwrap();
        assert_eq!(g, vec![9.0, 5.0, 5.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn percentiles_are_order_statistics() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&values, 0.025), 3.0);
        assert_eq!(percentile_nearest_rank(&values, 0.5), 50.0);
        assert_eq!(percentile_nearest_rank(&values, 0.975), 98.0);
        assert_eq!(percentile_nearest_rank(&[4.0], 0.025), 4.0);

        // constant-gap synthetic runs: every percentile is that run's constant
        let runs: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i); 3]).collect();
        let c = aggregate(&[1, 2, 3], &runs).unwrap();
        assert_eq!(c.lo95, vec![0.0; 3]);
        assert_eq!(c.median, vec![19.0; 3]);
        assert_eq!(c.hi95, vec![38.0; 3]);
    }

    #[test]
    fn identical_replications_collapse_the_band() {
        let r = run(3.0, &[(4, 2.0), (8, 1.0)]);
        let grid = [2, 4, 8];
        let runs = vec![
            gap_on_grid(&r, &grid).unwrap(),
            gap_on_grid(&r, &grid).unwrap(),
        ];
        let c = aggregate(&grid, &runs).unwrap();
        assert_eq!(c.lo95, c.median);
        assert_eq!(c.median, c.hi95);
    }

    #[test]
    fn overlap_and_tail_fractions() {
        let a = AggregateCurve {
            cost_grid: vec![1, 2, 3, 4],
            median: vec![1.0; 4],
            lo95: vec![0.5; 4],
            hi95: vec![1.5; 4],
        };
        let mut b = a.clone();
        b.lo95 = vec![1.0, 1.0, 2.0, 2.0];
        b.hi95 = vec![3.0; 4];
        assert_eq!(band_overlap(&a, &b).unwrap(), 0.5);
        assert_eq!(tail_disjoint(&a, &b).unwrap(), 1.0);
        let mut c = a.clone();
        c.cost_grid = vec![1, 2, 3, 5];
        assert!(band_overlap(&a, &c).is_err());
    }
}
