//! Deformed structure on CP^N from the SU(2)-reduction of C^{N+1}.

use gkred::cpn::CpnModel;
use gkred::hamilton::PointwiseModel;
use gkred::structures::validate_gk;

fn main() {
    let m = CpnModel::new(5, 1.0).expect("model");
    let pts = m.sample(40, 3);
    let v = m.validity(&pts, 1e-6);
    println!(
        "{} of {} points valid, max residual {:.1e}, min transversality {:.3}, max B {:.3}",
        v.valid, v.points, v.max_residual, v.min_transversality, v.max_b_field
    );
    let z = &pts[0];
    let rep = validate_gk(&m.reduced_pair(z).unwrap(), 1e-8);
    println!("reduced pair at a sample point: pass {}, min eigenvalue {:.3}", rep.pass, rep.metric_min_eigenvalue);

    let mut z = vec![0.0; 12];
    for r in [0.5, 1.0, 1.3, 2f64.sqrt()] {
        z[0] = r;
        match m.deformed_l1(&z) {
            Ok(_) => println!("|z0| = {r:.4}: deformation transverse"),
            Err(e) => println!("|z0| = {r:.4}: {e}"),
        }
    }
}
