//! The obstruction S computed from the pairing and from the Poisson bivector.

use gkred::hamilton::strong_hamiltonian_test;
use gkred::models::{build_model, ModelSpec};

fn main() {
    for name in ["hyperkahler", "cpn", "nonstrong"] {
        let built = build_model(&ModelSpec::new(name)).expect("model");
        let m = built.pointwise();
        let rep = strong_hamiltonian_test(m, &m.sample(50, 1), 1e-9).unwrap();
        println!(
            "{:<24} |S| {:.2e}  disagreement {:.2e}  strong {}",
            m.name(),
            rep.max_s_pairing,
            rep.max_disagreement,
            rep.pass
        );
    }
}
