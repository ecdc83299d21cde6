//! Random bihermitian data through the Gualtieri map.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gkred::glinalg::{numerical_rank, singular_spectrum_r, RANK_TOL};
use gkred::structures::{bihermitian_from_gk, gualtieri_map, poisson_bivectors, random_bihermitian, validate_gk};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [4, 6, 8] {
        let data = random_bihermitian(n, &mut rng);
        let pair = gualtieri_map(&data).expect("valid data");
        let rep = validate_gk(&pair, 1e-10);
        let (back, b) = bihermitian_from_gk(&pair).expect("untwists");
        let (b1, b2) = poisson_bivectors(&data);
        let rank = |m| numerical_rank(&singular_spectrum_r(m), RANK_TOL);
        println!(
            "dim {n}: max residual {:.2e}, min eigenvalue {:.3}, round trip {:.2e}, |B| {:.2e}, rank beta1 {}, beta2 {}",
            rep.max_residual(),
            rep.metric_min_eigenvalue,
            (back.jp - &data.jp).abs().max(),
            b.abs().max(),
            rank(&b1.mat),
            rank(&b2.mat),
        );
    }
}
