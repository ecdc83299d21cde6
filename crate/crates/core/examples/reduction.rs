//! Reduced generalized Kähler structures at level-set points.

use gkred::reduction::{carrier_identity_check, ghs_check, level_set_points, reduced_pair, type_formula_check, LEVEL_TOL};
use gkred::models::{make_flat_kahler, make_hyperkahler};

fn main() {
    for m in [make_flat_kahler(2).unwrap(), make_hyperkahler(2, 2).unwrap()] {
        for x in level_set_points(&m, 3, 11, 1e-10, 100_000) {
            let red = reduced_pair(&m, &x).unwrap();
            let tf = type_formula_check(&m, &x).unwrap();
            let ghs = ghs_check(&m, &x, 1e-6).unwrap();
            println!(
                "{}: dim {}, types ({}, {}), formula {} = {}, residual {:.1e}, carrier {:?}, adapted rank {}/{}",
                m.name,
                red.carrier.ncols(),
                red.type_1,
                red.type_2,
                tf.lhs,
                tf.rhs,
                red.residuals.max_residual(),
                carrier_identity_check(&m, &x, LEVEL_TOL).unwrap(),
                ghs.rank_a,
                ghs.expected_rank,
            );
        }
    }
}
