//! Property-based invariants over randomized inputs.

use ndarray::Array2;
use proptest::prelude::*;

use pa1smt::io::{self, Dataset};
use pa1smt::metrics;
use pa1smt::slmc::{self, Membership};

fn matrix_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-1e6f64..1e6, r * c)
            .prop_map(move |v| Array2::from_shape_vec((r, c), v).unwrap())
    })
}

proptest! {
    #[test]
    fn raw_round_trip_is_bit_exact(x in matrix_strategy(8, 12)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.raw");
        io::save_raw(&path, x.view()).unwrap();
        let back = io::load_raw(&path).unwrap();
        prop_assert_eq!(x, back);
    }

    #[test]
    fn csv_round_trip_preserves_values_and_labels(x in matrix_strategy(6, 10)) {
        let n = x.ncols();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let ds = Dataset { features: x.clone(), labels: Some(labels.clone()) };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        io::save_csv(&path, &ds).unwrap();
        let back = io::load_csv(&path, true).unwrap();
        prop_assert_eq!(back.labels, Some(labels));
        // shortest-round-trip formatting reparses to the same float
        prop_assert_eq!(back.features, x);
    }

    #[test]
    fn membership_update_yields_simplex_columns(
        seed in 0u64..1_000,
        d in 2usize..6,
        c in 2usize..5,
        n in 5usize..30,
    ) {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Array2::from_shape_fn((d, c), |_| rng.sample::<f64, _>(StandardNormal));
        let x = Array2::from_shape_fn((d, n), |_| rng.sample::<f64, _>(StandardNormal));
        let u = slmc::update_membership(w.view(), x.view()).unwrap();
        let m = u.matrix();
        for j in 0..n {
            let col_sum: f64 = m.column(j).sum();
            prop_assert!((col_sum - 1.0).abs() <= 1e-12);
            for i in 0..c {
                prop_assert!(m[[i, j]] >= 0.0);
            }
        }
        // re-validating through the constructor must succeed
        prop_assert!(Membership::new(m.to_owned()).is_ok());
    }

    #[test]
    fn nmi_and_rand_index_stay_in_unit_interval(
        labels in proptest::collection::vec((0usize..5, 0usize..5), 2..100)
    ) {
        let a: Vec<usize> = labels.iter().map(|p| p.0).collect();
        let b: Vec<usize> = labels.iter().map(|p| p.1).collect();
        let nmi = metrics::nmi(&a, &b).unwrap();
        let ri = metrics::rand_index(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&nmi));
        prop_assert!((0.0..=1.0).contains(&ri));
    }
}
