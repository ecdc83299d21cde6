use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gkred::cli::to_json;
use gkred::fields::{field, non_skew_residual, Chart, Polynomial, ThreeForm};
use gkred::hamilton::{moment_residual, obstruction_s, PointwiseModel};
use gkred::models::{make_flat_kahler, make_hyperkahler};
use gkred::structures::{bihermitian_from_gk, gualtieri_map, random_bihermitian, validate_gk};

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, n)
}

fn polynomial_section(n: usize, seed: u64) -> gkred::fields::Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outputs = (0..2 * n).flat_map(|_| Polynomial::random(n, 3, 3, &mut rng).outputs).collect();
    field(Polynomial { outputs })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gualtieri_round_trip(seed in any::<u64>(), half in 1usize..5) {
        let n = 2 * half;
        let data = random_bihermitian(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let pair = gualtieri_map(&data).unwrap();
        prop_assert!(validate_gk(&pair, 1e-10).pass);
        let (back, b) = bihermitian_from_gk(&pair).unwrap();
        prop_assert!((back.jp - &data.jp).abs().max() < 1e-9);
        prop_assert!((back.jm - &data.jm).abs().max() < 1e-9);
        prop_assert!(b.abs().max() < 1e-9);
    }

    #[test]
    fn dorfman_bracket_symmetric_part_is_exact(s1 in any::<u64>(), s2 in any::<u64>(), x in point(4), c in -2.0f64..2.0) {
        let chart = Chart::euclidean(4);
        let h = ThreeForm::elementary(4, [0, 1, 3], c);
        let (a, b) = (polynomial_section(4, s1), polynomial_section(4, s2));
        prop_assert!(non_skew_residual(&chart, &a, &b, &h, &x).unwrap() < 1e-7);
    }

    #[test]
    fn flat_moment_condition_everywhere(x in point(6)) {
        let m = make_flat_kahler(3).unwrap();
        prop_assert!(moment_residual(&m, 0, &x).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn hyperkahler_obstruction_vanishes(x in point(8)) {
        let m = make_hyperkahler(2, 2).unwrap();
        for a in 0..m.lie().dim {
            for b in 0..m.lie().dim {
                let (sp, sb) = obstruction_s(&m, a, b, &x).unwrap();
                prop_assert!(sp.abs() < 1e-12 && sb.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_floats_round_trip(v in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..8)) {
        let back: Vec<f64> = serde_json::from_str(&to_json(&v)).unwrap();
        prop_assert_eq!(back, v);
    }
}
