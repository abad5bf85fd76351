mod support;

use kra_core::kmeans::{kmeans_run, objective, KMeansParams};
use kra_core::kra::{build_sdm, knockout, refine, KraParams};
use kra_core::metrics::{db_index, dunn_index, external_measures, ClassLabels, MetricsError};
use kra_core::som::{SomGrid, SomSchedule};
use kra_core::{Clustering, Method, SessionMatrix};
use proptest::prelude::*;

fn rows_strategy(max_n: usize, max_m: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    (1..=max_m).prop_flat_map(move |m| {
        prop::collection::vec(prop::collection::vec(0u8..=1, m), 1..=max_n)
    })
}

fn labelled(max_n: usize, max_m: usize) -> impl Strategy<Value = (Vec<Vec<u8>>, usize, Vec<usize>)> {
    (2usize..=5).prop_flat_map(move |k| {
        (k..=max_n).prop_flat_map(move |n| {
            (1..=max_m).prop_flat_map(move |m| {
                (
                    prop::collection::vec(prop::collection::vec(0u8..=1, m), n),
                    Just(k),
                    prop::collection::vec(0..k, n),
                )
            })
        })
    })
}

fn as_options(labels: &[usize]) -> Vec<Option<usize>> {
    labels.iter().copied().map(Some).collect()
}

fn close(a: Result<f64, MetricsError>, b: Option<f64>) -> bool {
    match (a, b) {
        (Ok(x), Some(y)) => (x - y).abs() <= 1e-9,
        (Err(_), None) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn internal_indices_match_brute_force((rows, k, labels) in labelled(30, 8)) {
        let m = SessionMatrix::from_binary_rows(&rows).unwrap();
        let c = Clustering::from_labels(k, &labels, Method::KMeans).unwrap();
        let opts = as_options(&labels);
        prop_assert!(close(db_index(&m, &c), support::davies_bouldin(&rows, &opts)));
        prop_assert!(close(dunn_index(&m, &c), support::dunn(&rows, &opts)));
    }

    #[test]
    fn indices_ignore_uniform_distance_scaling((rows, k, labels) in labelled(20, 6)) {
        // repeating every coordinate multiplies all distances by sqrt(2)
        let doubled: Vec<Vec<u8>> = rows.iter().map(|r| [r.as_slice(), r.as_slice()].concat()).collect();
        let c = Clustering::from_labels(k, &labels, Method::KMeans).unwrap();
        let a = SessionMatrix::from_binary_rows(&rows).unwrap();
        let b = SessionMatrix::from_binary_rows(&doubled).unwrap();
        if let (Ok(x), Ok(y)) = (db_index(&a, &c), db_index(&b, &c)) {
            prop_assert!((x - y).abs() <= 1e-9 * x.max(1.0));
        }
        if let (Ok(x), Ok(y)) = (dunn_index(&a, &c), dunn_index(&b, &c)) {
            prop_assert!((x - y).abs() <= 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn metrics_ignore_cluster_relabelling((rows, k, labels) in labelled(20, 6), shift in 1usize..5) {
        let m = SessionMatrix::from_binary_rows(&rows).unwrap();
        let relabelled: Vec<usize> = labels.iter().map(|&l| (l + shift) % k).collect();
        let c1 = Clustering::from_labels(k, &labels, Method::KMeans).unwrap();
        let c2 = Clustering::from_labels(k, &relabelled, Method::KMeans).unwrap();
        let same = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-12 * x.max(1.0),
            (x, y) => x == y,
        };
        prop_assert!(same(db_index(&m, &c1).ok(), db_index(&m, &c2).ok()));
        prop_assert!(same(dunn_index(&m, &c1).ok(), dunn_index(&m, &c2).ok()));
        let classes = ClassLabels::from_classes(rows.iter().map(|r| format!("{}", r[0])));
        let e1 = external_measures(&c1, &classes).unwrap();
        let e2 = external_measures(&c2, &classes).unwrap();
        prop_assert!((e1.f_measure - e2.f_measure).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&e1.f_measure));
    }

    #[test]
    fn external_matches_brute_force((rows, k, labels) in labelled(30, 3), class_seed in any::<u64>()) {
        let names = ["w", "x", "y"];
        let classes: Vec<&str> = (0..rows.len())
            .map(|i| names[((class_seed >> (i % 60)) as usize + i) % 3])
            .collect();
        let c = Clustering::from_labels(k, &labels, Method::KMeans).unwrap();
        let e = external_measures(&c, &ClassLabels::from_classes(classes.iter().copied())).unwrap();
        let (p, r, f) = support::external(&as_options(&labels), &classes);
        prop_assert_eq!((e.precision, e.recall, e.f_measure), (p, r, f));
    }

    #[test]
    fn sdm_is_symmetric_with_zero_diagonal(rows in rows_strategy(12, 10)) {
        let m = SessionMatrix::from_binary_rows(&rows).unwrap();
        let members: Vec<usize> = (0..rows.len()).collect();
        let sdm = build_sdm(&m, &members);
        for i in 0..rows.len() {
            prop_assert_eq!(sdm.get(i, i), 0.0);
            for j in 0..rows.len() {
                prop_assert_eq!(sdm.get(i, j), sdm.get(j, i));
                prop_assert!((0.0..=1.0).contains(&sdm.get(i, j)));
            }
        }
    }

    #[test]
    fn knockout_is_monotone(
        rows in rows_strategy(15, 8),
        t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0,
        c1 in 0usize..5, c2 in 0usize..5,
    ) {
        let m = SessionMatrix::from_binary_rows(&rows).unwrap();
        let members: Vec<usize> = (0..rows.len()).collect();
        let sdm = build_sdm(&m, &members);
        let (lo_t, hi_t) = (t1.min(t2), t1.max(t2));
        let (lo_c, hi_c) = (c1.min(c2), c1.max(c2));
        let strict = knockout(&sdm, &members, lo_t, lo_c);
        let loose = knockout(&sdm, &members, hi_t, hi_c);
        prop_assert!(loose.removed.iter().all(|r| strict.removed.contains(r)));
    }

    #[test]
    fn refine_partitions_each_cluster((rows, k, labels) in labelled(25, 6)) {
        let m = SessionMatrix::from_binary_rows(&rows).unwrap();
        let c = Clustering::from_labels(k, &labels, Method::KMeans).unwrap();
        let (refined, report) = refine(&m, &c, KraParams::default());
        prop_assert_eq!(refined.k(), k);
        let before = c.members();
        let after = refined.members();
        for cluster in 0..k {
            prop_assert!(after[cluster].iter().all(|r| before[cluster].contains(r)));
            let entry = &report.clusters[cluster];
            let mut ids: Vec<u64> = entry.kept.iter().chain(&entry.removed).copied().collect();
            ids.sort();
            let expected: Vec<u64> = before[cluster].iter().map(|&r| m.row_ids()[r]).collect();
            prop_assert_eq!(ids, expected);
            prop_assert_eq!(entry.kept.len(), after[cluster].len());
        }
    }

    #[test]
    fn kmeans_objective_never_rises(rows in rows_strategy(30, 8), k in 1usize..5, seed in any::<u64>()) {
        let m = SessionMatrix::from_binary_rows(&rows).unwrap();
        match kmeans_run(&m, KMeansParams::new(k, seed)) {
            Ok(run) => {
                for w in run.objective_trace.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-9);
                }
                prop_assert!(run.iterations <= 100);
                let j = objective(&m, &run.clustering, &run.centroids);
                prop_assert!((j - run.objective()).abs() < 1e-9 || !run.converged);
            }
            Err(_) => {
                let mut distinct = rows.clone();
                distinct.sort();
                distinct.dedup();
                prop_assert!(k > distinct.len());
            }
        }
    }

    #[test]
    fn som_step_moves_toward_input(
        weights in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 5), 6),
        input in prop::collection::vec(0u8..=1, 5),
        t in 0usize..100,
    ) {
        let mut grid = SomGrid::from_weights(2, 3, weights).unwrap();
        let before = grid.clone();
        let schedule = SomSchedule::new(100, 0.5, 1.5).unwrap();
        grid.update(&input, t, &schedule).unwrap();
        for v in 0..6 {
            for ((&w0, &w1), &x) in before.weight(v).iter().zip(grid.weight(v)).zip(&input) {
                let target = f64::from(x);
                prop_assert_eq!((w1 - w0).signum() == (target - w0).signum() || w1 == w0, true);
                prop_assert!((w1 - target).abs() <= (w0 - target).abs());
            }
        }
    }
}

#[test]
fn kmeans_k1_matches_total_scatter() {
    let inst = support::random_instance(99);
    let m = SessionMatrix::from_binary_rows(&inst.rows).unwrap();
    let run = kmeans_run(&m, KMeansParams::new(1, 0)).unwrap();
    let n = inst.rows.len() as f64;
    let cols = inst.rows[0].len();
    let mean: Vec<f64> = (0..cols)
        .map(|j| inst.rows.iter().map(|r| r[j] as f64).sum::<f64>() / n)
        .collect();
    let scatter: f64 = inst
        .rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(&x, mu)| (x as f64 - mu).powi(2)).sum::<f64>())
        .sum();
    assert_eq!(run.centroids.get(0), mean.as_slice());
    assert!((run.objective() - scatter).abs() < 1e-9);
}

#[test]
fn fixed_seed_reproduces_kmeans_and_som() {
    let inst = support::random_instance(3);
    let m = SessionMatrix::from_binary_rows(&inst.rows).unwrap();
    let a = kmeans_run(&m, KMeansParams::new(2, 17)).unwrap();
    let b = kmeans_run(&m, KMeansParams::new(2, 17)).unwrap();
    assert_eq!(a.clustering, b.clustering);
    assert_eq!(a.centroids, b.centroids);

    let schedule = SomSchedule::default_for(1, 3, m.n_rows());
    let g1 = SomGrid::random(1, 3, m.n_cols(), 5).unwrap().train(&m, &schedule, 8).unwrap();
    let g2 = SomGrid::random(1, 3, m.n_cols(), 5).unwrap().train(&m, &schedule, 8).unwrap();
    assert_eq!(g1, g2);
    assert_eq!(g1.clustering(&m).unwrap(), g2.clustering(&m).unwrap());
}
