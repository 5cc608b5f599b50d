mod common;

use coke_core::data::{minmax_normalize, partition_to_agents, train_test_split, PartitionPlan, RawDataset};
use coke_core::metrics::{compute_mse, Split};
use coke_core::rng::SeededRng;
use coke_core::{AgentDataset, FeatureVariant, Matrix, RandomFeatureMap};
use proptest::prelude::*;

/// Rows tagged by their first column so provenance can be traced.
fn tagged(n: usize) -> RawDataset {
    let rows: Vec<[f64; 2]> = (0..n).map(|i| [i as f64, (i * 7 % 5) as f64]).collect();
    RawDataset::new(Matrix::from_rows(&rows).unwrap(), (0..n).map(|i| i as f64 * 0.5).collect()).unwrap()
}

fn tags(d: &RawDataset) -> Vec<usize> {
    d.features.row_iter().map(|r| r[0] as usize).collect()
}

proptest! {
    #[test]
    fn split_is_a_seeded_partition(n in 2usize..200, f in 0.05f64..0.95, seed in 0u64..1000) {
        let d = tagged(n);
        let (tr, te) = train_test_split(&d, f, seed).unwrap();
        prop_assert_eq!(tr.len(), (f * n as f64).floor() as usize);
        prop_assert_eq!(tr.len() + te.len(), n);
        let mut all = tags(&tr);
        all.extend(tags(&te));
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for (row, y) in tr.features.row_iter().zip(&tr.labels) {
            prop_assert_eq!(*y, row[0] * 0.5);
        }
        let again = train_test_split(&d, f, seed).unwrap();
        prop_assert_eq!(tags(&again.0), tags(&tr));
    }

    #[test]
    fn partition_blocks_are_disjoint(sizes in proptest::collection::vec(5usize..40, 1..6), extra in 0usize..20, seed in 0u64..1000) {
        let total: usize = sizes.iter().sum();
        let d = tagged(total + extra);
        let plan = PartitionPlan::new(sizes.clone(), 0.7, seed).unwrap();
        let parts = partition_to_agents(&d, &plan).unwrap();
        prop_assert_eq!(parts.iter().map(RawDataset::len).collect::<Vec<_>>(), sizes);
        let mut seen: Vec<usize> = parts.iter().flat_map(tags).collect();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), total);
    }

    #[test]
    fn normalized_columns_span_unit_interval(seed in 0u64..500) {
        let mut rng = SeededRng::new(seed);
        let parts: Vec<RawDataset> = (0..3)
            .map(|_| {
                let m = Matrix::from_vec(10, 3, (0..30).map(|_| rng.uniform_range(-5.0, 9.0)).collect()).unwrap();
                RawDataset::new(m, vec![0.0; 10]).unwrap()
            })
            .collect();
        let (norm, _) = minmax_normalize(&parts).unwrap();
        for c in 0..3 {
            let col: Vec<f64> = norm.iter().flat_map(|p| p.features.column(c)).collect();
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(lo, 0.0);
            prop_assert!((hi - 1.0).abs() <= 1e-15);
        }
    }
}

#[test]
fn unbalanced_plan_rejected() {
    assert!(PartitionPlan::new(vec![10, 110], 0.7, 1).is_err());
    assert!(PartitionPlan::new(vec![10, 109], 0.7, 1).is_ok());
    assert!(PartitionPlan::new(vec![0, 3], 0.7, 1).is_err());
    assert!(partition_to_agents(&tagged(10), &PartitionPlan::new(vec![6, 6], 0.7, 1).unwrap()).is_err());
}

#[test]
fn mse_matches_flat_loop() {
    let map = RandomFeatureMap::new(2, 4, 2, 1.0, FeatureVariant::PairedTrig).unwrap();
    let mut rng = SeededRng::new(3);
    let mk = |rng: &mut SeededRng, n| {
        let m = Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.uniform()).collect()).unwrap();
        RawDataset::new(m, (0..n).map(|_| rng.gaussian()).collect()).unwrap()
    };
    let agents: Vec<AgentDataset> = [(5, 2), (9, 4)]
        .into_iter()
        .map(|(tr, te)| {
            let a = mk(&mut rng, tr);
            let b = mk(&mut rng, te);
            AgentDataset::new(&map, a, b).unwrap()
        })
        .collect();
    let thetas: Vec<Vec<f64>> = (0..2).map(|_| (0..8).map(|_| rng.gaussian()).collect()).collect();
    for split in [Split::Train, Split::Test] {
        let (mut sum, mut count) = (0.0, 0);
        for (a, th) in agents.iter().zip(&thetas) {
            let (x, y) = match split {
                Split::Train => (&a.features, &a.labels),
                Split::Test => (&a.test_features, &a.test_labels),
            };
            for (row, yv) in x.row_iter().zip(y) {
                let phi = map.map_point(row).unwrap();
                let pred: f64 = phi.iter().zip(th).map(|(p, t)| p * t).sum();
                sum += (yv - pred).powi(2);
                count += 1;
            }
        }
        let got = compute_mse(&thetas, &agents, split).unwrap();
        assert!((got - sum / count as f64).abs() <= 1e-12);
    }
}
