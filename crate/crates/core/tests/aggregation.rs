use std::collections::BTreeMap;

use adabatch::experiment::{
    aggregate, csv_string, gap_on_grid, log_cost_grid, parse_csv, percentile_nearest_rank,
    AggregateCurve,
};
use adabatch::sgd::IterationRecord;
use adabatch::{ControllerKind, RunRecord, Termination, Vector};
use proptest::prelude::*;

fn record(initial: f64, costs_and_gaps: &[(u64, f64)]) -> RunRecord {
    RunRecord {
        xi0: Vector::zeros(1),
        initial_gap: Some(initial),
        step_size: 1.0,
        iterations: costs_and_gaps
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

proptest! {
    #[test]
    fn grid_strictly_increasing(start in 1u64..1000, span in 0u64..10_000_000, points in 1usize..400) {
        let g = log_cost_grid(start, start + span, points).unwrap();
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*g.last().unwrap(), start + span);
        prop_assert!(g[0] >= start);
        prop_assert!(g.len() <= points);
    }

    // The value at a grid point is the gap of the last iteration at or
    // below that cost, found here by a linear scan from the end.
    #[test]
    fn interpolation_uses_only_past_iterations(
        steps in prop::collection::vec((1u64..50, 0.0f64..10.0), 0..30),
        grid_pts in prop::collection::btree_set(0u64..2000, 1..40),
    ) {
        let mut cost = 0;
        let steps: Vec<(u64, f64)> = steps.into_iter().map(|(c, g)| { cost += c; (cost, g) }).collect();
        let grid: Vec<u64> = grid_pts.into_iter().collect();
        let run = record(99.0, &steps);
        let got = gap_on_grid(&run, &grid).unwrap();
        for (j, &g) in grid.iter().enumerate() {
            let want = steps.iter().rev().find(|(c, _)| *c <= g).map_or(99.0, |s| s.1);
            prop_assert_eq!(got[j], want);
        }
    }

    #[test]
    fn percentiles_are_order_statistics(mut values in prop::collection::vec(-1e6f64..1e6, 1..300)) {
        let curves: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        let c = aggregate(&[7], &curves).unwrap();
        values.sort_by(f64::total_cmp);
        let n = values.len();
        // k-th order statistic with k = ⌈p n⌉ by integer arithmetic
        let rank = |num: usize, den: usize| (num * n).div_ceil(den).max(1);
        prop_assert_eq!(c.lo95[0], values[rank(25, 1000) - 1]);
        prop_assert_eq!(c.median[0], values[rank(1, 2) - 1]);
        prop_assert_eq!(c.hi95[0], values[rank(975, 1000) - 1]);
        prop_assert!(c.lo95[0] <= c.median[0] && c.median[0] <= c.hi95[0]);
    }

    #[test]
    fn csv_round_trip(
        cells in prop::collection::btree_map((0usize..3, 1u32..9), prop::collection::vec((-1e300f64..1e300, any::<f64>()), 1..20), 1..5)
    ) {
        let curves: BTreeMap<_, _> = cells
            .into_iter()
            .map(|((k, case), vals)| {
                let n = vals.len();
                let finite = |x: f64| if x.is_finite() { x } else { 0.0 };
                (
                    (ControllerKind::ALL[k], case),
                    AggregateCurve {
                        cost_grid: (1..=n as u64).map(|i| i * 3).collect(),
                        median: vals.iter().map(|v| v.0).collect(),
                        lo95: vals.iter().map(|v| finite(v.1)).collect(),
                        hi95: vals.iter().map(|v| v.0 * 1.5).collect(),
                    },
                )
            })
            .collect();
        let text = csv_string(&curves).unwrap();
        prop_assert_eq!(parse_csv(text.as_bytes()).unwrap(), curves);
    }
}

#[test]
fn nearest_rank_small_samples() {
    assert_eq!(percentile_nearest_rank(&[1.0, 2.0], 0.025), 1.0);
    assert_eq!(percentile_nearest_rank(&[1.0, 2.0], 0.5), 1.0);
    assert_eq!(percentile_nearest_rank(&[1.0, 2.0], 0.975), 2.0);
}

#[test]
fn csv_layout_is_fixed() {
    let curves = BTreeMap::from([(
        (ControllerKind::InnerOrth, 4),
        AggregateCurve {
            cost_grid: vec![32, 64],
            median: vec![0.5, 0.25],
            lo95: vec![0.1, 1e-300],
            hi95: vec![1.0, 3.0],
        },
    )]);
    assert_eq!(
        csv_string(&curves).unwrap(),
        "controller,case,cost,gap_lo,gap_med,gap_hi\n\
         innerOrth,4,32,1.0000000000000001e-1,5.0000000000000000e-1,1.0000000000000000e0\n\
         innerOrth,4,64,1.0000000000000000e-300,2.5000000000000000e-1,3.0000000000000000e0\n"
    );
}
