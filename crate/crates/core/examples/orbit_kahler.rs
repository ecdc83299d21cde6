//! Kähler geometry on a complexified orbit through a level-set point.

use gkred::models::make_hyperkahler;
use gkred::orbit::{orbit_kahler_check, orbit_metrics, OrbitChart};
use gkred::reduction::level_set_points;

fn main() {
    let m = make_hyperkahler(2, 2).expect("model");
    let base = level_set_points(&m, 1, 2, 1e-10, 100_000).remove(0);
    let oc = OrbitChart::new(&m, base).unwrap();
    let om = orbit_metrics(&oc, &vec![0.0; 2 * oc.dim_g()]).unwrap();
    println!("diagonal of g0 at the base point: {:.6?}", om.g0.diagonal().as_slice());
    for p in oc.sample_parameters(5, 1) {
        let r = orbit_kahler_check(&oc, &p).unwrap();
        println!(
            "p = {:?}: moment {:.1e}, d omega0 {:.1e}, min eig {:.3}, pass {}",
            p.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>(),
            r.moment_residual,
            r.domega_max,
            r.min_eigenvalue,
            r.pass()
        );
    }
}
