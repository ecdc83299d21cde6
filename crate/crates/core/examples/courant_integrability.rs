//! Dorfman bracket identities and integrability defects.

use gkred::fields::{frame_integrability_defect, non_skew_residual, Chart, ThreeForm};
use gkred::hamilton::PointwiseModel;
use gkred::models::{make_hyperkahler, non_closed_symplectic};

fn main() {
    let m = make_hyperkahler(2, 2).expect("model");
    let x = m.sample(1, 3).remove(0);
    let a = m.action.generators[0].clone();
    let b = m.j1.apply(m.action.generators[1].clone());
    println!("non-skew residual  {:.2e}", non_skew_residual(&m.chart, &a, &b, &m.h, &x).unwrap());
    println!("defect J1          {:.2e}", frame_integrability_defect(&m.chart, &m.j1, &m.h, &x).unwrap());
    println!("defect J2          {:.2e}", frame_integrability_defect(&m.chart, &m.j2, &m.h, &x).unwrap());

    let j = non_closed_symplectic();
    let d = frame_integrability_defect(&Chart::euclidean(4), &j, &ThreeForm::zero(4), &[0.1, -0.3, 0.2, 0.5]).unwrap();
    println!("non-closed omega   {d:.2e}");
}
