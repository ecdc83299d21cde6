//! Flows of the imaginary generators and descent onto the zero level set.

use gkred::flowkn::{h_monotonicity_check, integrate_generator_flow, mu_norm_descent, stability_probe};
use gkred::models::{make_flat_kahler, make_hyperkahler};

fn main() {
    let flat = make_flat_kahler(2).expect("model");
    let tr = integrate_generator_flow(&flat, &[1.0], &[2.0, 0.0, 0.0, 0.0], 1.0, 1e-2).unwrap();
    let rep = h_monotonicity_check(&tr, &flat, &[1.0]).unwrap();
    let x = tr.last_point()[0];
    println!("radial flow: x(1) = {x:.10}, oracle {:.10}", 2.0 * (-2.0f64).exp());
    println!("h' + g(Y,Y) {:.2e}, integral residual {:.2e}", rep.max_discrepancy, rep.integral_residual);

    let d = mu_norm_descent(&flat, &[0.3, 1.2, -0.4, 0.9], 1e-10, 10_000).unwrap();
    println!("descent: {:?} after {} steps, |mu| = {:.2e}", d.exit, d.len() - 1, d.final_mu_norm());

    let hk = make_hyperkahler(2, 2).expect("model");
    let start = [0.4, -0.2, 0.7, 0.1, -0.5, 0.3, 0.2, 0.6];
    println!("hyperkahler start {:?}", stability_probe(&hk, &start, 1e-8, 100_000).unwrap());
    println!("origin in C^2     {:?}", stability_probe(&flat, &[0.0; 4], 1e-8, 1_000).unwrap());
}
