//! The full verification battery, as run by `gkred verify`.

use gkred::models::{build_model, ModelSpec};
use gkred::verify::{run_verify, Tolerances};

fn main() {
    let m = build_model(&ModelSpec::new("hyperkahler")).expect("model");
    let rep = run_verify(&m, 50, 42, &Tolerances::for_model(&m)).unwrap();
    for c in &rep.checks {
        println!("{:<32} {:>10.2e}  tol {:>8.0e}  {}", c.name, c.max_residual, c.tol, if c.pass { "ok" } else { "FAIL" });
    }
    println!("poisson ranks {:?}, all pass: {}", rep.poisson_ranks, rep.pass);
}
