use proptest::prelude::*;

use thzmap::grid::{Grid, Tensor3};
use thzmap::metrics::{average_precision, connected_components, mse_construction, Connectivity, Instance, InstanceSet};
use thzmap::propagation::{scale, unscale, RadioMap, ScalingSpec};
use thzmap::sampling::{apply_mask, SensorMask};
use thzmap::scenario::{generate_layout, rasterize, GridSpec, ObstacleLayout};
use thzmap::sensing::{exact_majority_error, hard_vote, hoeffding_bound, majority_vote};

fn binary_grid(rows: usize, cols: usize) -> impl Strategy<Value = Grid<u8>> {
    prop::collection::vec(0u8..=1, rows * cols).prop_map(move |v| Grid::from_vec(rows, cols, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raster_is_binary_and_monotone_in_obstacles(seed in any::<u64>(), n in 1usize..6) {
        let spec = GridSpec::new(100.0, 100.0, 32, 32).unwrap();
        let layout = generate_layout(&spec, n, (8.0, 25.0), seed).unwrap();
        let full = rasterize(&layout, &spec);
        prop_assert!(full.is_binary());
        prop_assert!(!full.is_set(spec.bs_cell().0, spec.bs_cell().1));
        let partial = ObstacleLayout { seed, polygons: layout.polygons[..n - 1].to_vec() };
        let fewer = rasterize(&partial, &spec);
        for (a, b) in fewer.as_slice().iter().zip(full.as_slice()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn masking_is_idempotent(cells in binary_grid(5, 6), values in prop::collection::vec(0.0f64..1.0, 5 * 6 * 3)) {
        let t = Tensor3::from_vec(5, 6, 3, values).unwrap();
        let mask = SensorMask::from_cells(cells).unwrap();
        let once = apply_mask(&t, &mask).unwrap();
        let twice = apply_mask(&once.values, &mask).unwrap();
        prop_assert_eq!(&once.values, &twice.values);
        for r in 0..5 {
            for c in 0..6 {
                let expect = if mask.cells().is_set(r, c) { t.cell(r, c).to_vec() } else { vec![0.0; 3] };
                prop_assert_eq!(once.values.cell(r, c), &expect[..]);
            }
        }
    }

    #[test]
    fn ap_ignores_monotone_confidence_transforms(
        truth_map in binary_grid(8, 8),
        pred_map in binary_grid(8, 8),
        confs in prop::collection::vec(0.01f64..1.0, 64),
    ) {
        let truth = InstanceSet::from_map(&truth_map, Connectivity::Eight);
        let mut pred = InstanceSet::from_map(&pred_map, Connectivity::Eight);
        for (inst, c) in pred.instances.iter_mut().zip(&confs) {
            inst.confidence = *c;
        }
        let squashed = InstanceSet {
            instances: pred.instances.iter().map(|i| Instance { cells: i.cells.clone(), confidence: i.confidence.powi(3) }).collect(),
        };
        let a = average_precision(&[pred], std::slice::from_ref(&truth)).unwrap();
        let b = average_precision(&[squashed], &[truth]).unwrap();
        prop_assert!((a.ap - b.ap).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.ap));
    }

    #[test]
    fn mse_is_symmetric_and_zero_on_identity(
        a in prop::collection::vec(0.0f64..1.0, 2 * 3 * 4),
        b in prop::collection::vec(0.0f64..1.0, 2 * 3 * 4),
    ) {
        let ta = Tensor3::from_vec(2, 3, 4, a).unwrap();
        let tb = Tensor3::from_vec(2, 3, 4, b).unwrap();
        let ab = mse_construction(&[ta.clone()], &[tb.clone()]).unwrap();
        let ba = mse_construction(&[tb], &[ta.clone()]).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(mse_construction(&[ta.clone()], &[ta]).unwrap(), 0.0);
    }

    #[test]
    fn hard_vote_is_below_majority_and_every_vote(votes in prop::collection::vec(binary_grid(4, 4), 1..8)) {
        let hv = hard_vote(&votes).unwrap();
        let mv = majority_vote(&votes).unwrap();
        for i in 0..16 {
            prop_assert!(hv.as_slice()[i] <= mv.as_slice()[i]);
            for v in &votes {
                prop_assert!(hv.as_slice()[i] <= v.as_slice()[i]);
            }
        }
    }

    #[test]
    fn exact_error_never_exceeds_bound(half_n in 0usize..30, eps in 0.0f64..0.499) {
        let n = 2 * half_n + 1;
        let exact = exact_majority_error(n, eps).unwrap();
        prop_assert!(exact <= hoeffding_bound(n, eps).unwrap() + 1e-15);
        prop_assert!((0.0..=1.0).contains(&exact));
    }

    #[test]
    fn components_partition_the_ones(map in binary_grid(9, 7), eight in any::<bool>()) {
        let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
        let comps = connected_components(&map, conn);
        let mut all: Vec<usize> = comps.iter().flatten().copied().collect();
        all.sort_unstable();
        let ones: Vec<usize> = (0..map.len()).filter(|&i| map.as_slice()[i] == 1).collect();
        prop_assert_eq!(all, ones);
    }

    #[test]
    fn scale_then_unscale_recovers_in_range_power(dbm in prop::collection::vec(-90.0f64..-50.0, 6)) {
        let spec = ScalingSpec::new(0.05, 0.9, -90.0, -50.0).unwrap();
        let raw = Tensor3::from_vec(1, 3, 2, dbm.iter().map(|d| 10f64.powf(d / 10.0)).collect()).unwrap();
        let occ = Grid::filled(1, 3, 0u8);
        let scaled = scale(&RadioMap(raw), &occ, &spec).unwrap();
        prop_assert!(scaled.as_slice().iter().all(|v| (0.05..=0.9).contains(v)));
        let back = unscale(&scaled, &spec).unwrap();
        for (a, b) in back.dbm.as_slice().iter().zip(&dbm) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
