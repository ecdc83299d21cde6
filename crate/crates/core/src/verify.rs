//! The invariant battery behind `gkred verify`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cpn::CpnModel;
use crate::error::{Error, Result};
use crate::fields::{frame_integrability_defect, non_skew_residual, Field};
use crate::glinalg::{numerical_rank, singular_spectrum_r, RANK_TOL};
use crate::hamilton::{
    bihermitian_residual, bracket_identity_residuals, curvature_residual, equivariance_residual,
    homomorphism_residual, invariance_residual, isotropy_residual, moment_residual, obstruction_s,
    precomplex_homomorphism_residual, y_consistency, y_invariance_residual, HamiltonianModel, PointwiseModel,
};
use crate::models::BuiltModel;
use crate::structures::{poisson_bivectors, validate_gk};

pub const SCHEMA_VERSION: u32 = 1;

const DEFAULTS: [(&str, f64); 20] = [
    ("lie_algebra", 1e-12),
    ("gk_algebra", 1e-8),
    ("gk_positivity", 0.0),
    ("moment_condition", 1e-8),
    ("bihermitian_condition", 1e-8),
    ("moment_bihermitian_equivalence", 0.5),
    ("y_field", 1e-8),
    ("s_agreement", 1e-9),
    ("strong_hamiltonian", 1e-9),
    ("isotropy", 1e-8),
    ("homomorphism", 1e-8),
    ("equivariance", 1e-8),
    ("curvature", 1e-8),
    ("three_form_closed", 1e-8),
    ("action_invariance", 1e-6),
    ("integrability_j1", 1e-6),
    ("integrability_j2", 1e-6),
    ("courant_non_skew", 1e-7),
    ("imaginary_invariance", 1e-6),
    ("precomplex_homomorphism", 1e-6),
];

/// Named tolerances with a default for every check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances(pub BTreeMap<String, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances(DEFAULTS.iter().map(|(k, v)| (k.to_string(), *v)).chain([("bracket_identities".to_string(), 1e-6)]).collect())
    }
}

impl Tolerances {
    /// Defaults adjusted to the accuracy of the model's construction.
    pub fn for_model(m: &BuiltModel) -> Self {
        let mut t = Self::default();
        if let BuiltModel::Pointwise(_) = m {
            t.0.insert("gk_algebra".into(), 1e-6);
            t.0.insert("bihermitian_condition".into(), 1e-6);
            t.0.insert("y_field".into(), 1e-6);
        }
        t
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match self.0.get_mut(name) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(Error::Input(format!("unknown tolerance `{name}`"))),
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0[name]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Largest residual over evaluated points; `null` if every point failed
    /// to evaluate.
    pub max_residual: f64,
    pub witness: Option<Vec<f64>>,
    pub tol: f64,
    pub evaluated: usize,
    /// First evaluation error, if any.
    pub error: Option<String>,
    pub pass: bool,
}

impl CheckResult {
    fn scalar(name: &str, value: f64, tol: f64) -> Self {
        CheckResult {
            name: name.into(),
            max_residual: value,
            witness: None,
            tol,
            evaluated: 1,
            error: None,
            pass: value < tol,
        }
    }
}

/// Evaluates `f` at every point (in parallel, merged in index order) and
/// keeps the worst value and its point.
pub fn check_points<F>(name: &str, points: &[Vec<f64>], tol: f64, f: F) -> CheckResult
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let vals: Vec<Result<f64>> = points.par_iter().map(|x| f(x)).collect();
    let mut out =
        CheckResult { name: name.into(), max_residual: f64::NEG_INFINITY, witness: None, tol, evaluated: 0, error: None, pass: true };
    for (x, v) in points.iter().zip(vals) {
        match v {
            Ok(r) => {
                out.evaluated += 1;
                if r > out.max_residual || r.is_nan() {
                    out.max_residual = r;
                    out.witness = Some(x.clone());
                }
            }
            Err(e) => {
                out.pass = false;
                if out.error.is_none() {
                    out.error = Some(e.to_string());
                    out.witness = Some(x.clone());
                }
            }
        }
    }
    if out.evaluated == 0 {
        out.max_residual = f64::NAN;
    }
    out.pass &= out.max_residual < tol;
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub schema: u32,
    pub model: String,
    pub points: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    /// Distinct ranks of `β₁`, `β₂` over the sample.
    pub poisson_ranks: BTreeMap<String, Vec<usize>>,
    /// Extra facts reported without a pass criterion.
    pub notes: BTreeMap<String, serde_json::Value>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn s_values(m: &dyn PointwiseModel, x: &[f64]) -> Result<(f64, f64)> {
    let d = m.lie().dim;
    let (mut s, mut dis) = (0.0f64, 0.0f64);
    for a in 0..d {
        for b in 0..d {
            let (sp, sb) = obstruction_s(m, a, b, x)?;
            s = s.max(sp.abs()).max(sb.abs());
            dis = dis.max((sp - sb).abs());
        }
    }
    Ok((s, dis))
}

/// Checks that only need pointwise evaluation.
pub fn pointwise_checks(m: &dyn PointwiseModel, pts: &[Vec<f64>], tol: &Tolerances) -> Vec<CheckResult> {
    let d = m.lie().dim;
    let lie = m.lie();
    let mut out = vec![CheckResult::scalar(
        "lie_algebra",
        lie.antisymmetry_residual().max(lie.jacobi_residual()),
        tol.get("lie_algebra"),
    )];
    out.push(check_points("gk_algebra", pts, tol.get("gk_algebra"), |x| {
        Ok(validate_gk(&m.gk_at(x)?, tol.get("gk_algebra")).max_residual())
    }));
    out.push(check_points("gk_positivity", pts, f64::MIN_POSITIVE.max(tol.get("gk_positivity")), |x| {
        Ok(-validate_gk(&m.gk_at(x)?, 0.0).metric_min_eigenvalue)
    }));
    let per_gen = |f: &(dyn Fn(usize, &[f64]) -> Result<f64> + Sync), x: &[f64]| -> Result<f64> {
        (0..d).try_fold(0.0f64, |acc, a| Ok(acc.max(f(a, x)?)))
    };
    let moment = |a: usize, x: &[f64]| moment_residual(m, a, x).map(|r| r.sup_norm());
    let biherm = |a: usize, x: &[f64]| {
        let (r1, r2) = bihermitian_residual(m, a, x)?;
        Ok(r1.iter().chain(&r2).fold(0.0f64, |acc, v| acc.max(v.abs())))
    };
    out.push(check_points("moment_condition", pts, tol.get("moment_condition"), |x| per_gen(&moment, x)));
    out.push(check_points("bihermitian_condition", pts, tol.get("bihermitian_condition"), |x| per_gen(&biherm, x)));
    let (tm, tb) = (tol.get("moment_condition"), tol.get("bihermitian_condition"));
    out.push(check_points("moment_bihermitian_equivalence", pts, tol.get("moment_bihermitian_equivalence"), |x| {
        let a = per_gen(&moment, x)? < tm;
        let b = per_gen(&biherm, x)? < tb;
        Ok(if a == b { 0.0 } else { 1.0 })
    }));
    out.push(check_points("y_field", pts, tol.get("y_field"), |x| per_gen(&|a, x| y_consistency(m, a, x), x)));
    out.push(check_points("s_agreement", pts, tol.get("s_agreement"), |x| Ok(s_values(m, x)?.1)));
    out.push(check_points("strong_hamiltonian", pts, tol.get("strong_hamiltonian"), |x| Ok(s_values(m, x)?.0)));
    out.push(check_points("isotropy", pts, tol.get("isotropy"), |x| isotropy_residual(m, x)));
    out
}

fn generator_sections(m: &HamiltonianModel) -> Vec<Field> {
    let mut s: Vec<Field> = m.action.generators.clone();
    s.extend(m.action.generators.iter().map(|g| m.j1.apply(g.clone())));
    s.extend(m.action.generators.iter().map(|g| m.j2.apply(g.clone())));
    s
}

/// Checks that differentiate the model's fields.
pub fn field_checks(m: &HamiltonianModel, pts: &[Vec<f64>], tol: &Tolerances, strong: bool) -> Vec<CheckResult> {
    let mut out = vec![
        check_points("homomorphism", pts, tol.get("homomorphism"), |x| homomorphism_residual(m, x)),
        check_points("equivariance", pts, tol.get("equivariance"), |x| equivariance_residual(m, x)),
        check_points("curvature", pts, tol.get("curvature"), |x| curvature_residual(m, x)),
        check_points("three_form_closed", pts, tol.get("three_form_closed"), |x| Ok(m.h.closedness_residual(x))),
        check_points("action_invariance", pts, tol.get("action_invariance"), |x| invariance_residual(m, x)),
        check_points("integrability_j1", pts, tol.get("integrability_j1"), |x| {
            frame_integrability_defect(&m.chart, &m.j1, &m.h, x)
        }),
        check_points("integrability_j2", pts, tol.get("integrability_j2"), |x| {
            frame_integrability_defect(&m.chart, &m.j2, &m.h, x)
        }),
    ];
    let secs = generator_sections(m);
    out.push(check_points("courant_non_skew", pts, tol.get("courant_non_skew"), |x| {
        let mut worst = 0.0f64;
        for a in &secs {
            for b in &secs {
                worst = worst.max(non_skew_residual(&m.chart, a, b, &m.h, x)?);
            }
        }
        Ok(worst)
    }));
    if strong {
        out.push(check_points("imaginary_invariance", pts, tol.get("imaginary_invariance"), |x| y_invariance_residual(m, x)));
        out.push(check_points("bracket_identities", pts, tol.get("bracket_identities"), |x| {
            let (a, b) = bracket_identity_residuals(m, x)?;
            Ok(a.max(b))
        }));
        out.push(check_points("precomplex_homomorphism", pts, tol.get("precomplex_homomorphism"), |x| {
            precomplex_homomorphism_residual(m, x)
        }));
    }
    out
}

fn poisson_ranks(m: &dyn PointwiseModel, pts: &[Vec<f64>]) -> BTreeMap<String, Vec<usize>> {
    let ranks: Vec<Option<(usize, usize)>> = pts
        .par_iter()
        .map(|x| {
            let (b, _) = m.bihermitian_at(x).ok()?;
            let (b1, b2) = poisson_bivectors(&b);
            let r = |p: &crate::structures::PoissonBivector| numerical_rank(&singular_spectrum_r(&p.mat), RANK_TOL);
            Some((r(&b1), r(&b2)))
        })
        .collect();
    let mut r1: Vec<usize> = ranks.iter().flatten().map(|r| r.0).collect();
    let mut r2: Vec<usize> = ranks.iter().flatten().map(|r| r.1).collect();
    r1.sort_unstable();
    r1.dedup();
    r2.sort_unstable();
    r2.dedup();
    BTreeMap::from([("beta1".to_string(), r1), ("beta2".to_string(), r2)])
}

fn cpn_notes(c: &CpnModel, pts: &[Vec<f64>], tol: &Tolerances) -> Result<(Vec<CheckResult>, BTreeMap<String, serde_json::Value>)> {
    let up = c.upstairs_model()?;
    let checks = vec![
        check_points("upstairs_homomorphism", pts, tol.get("homomorphism"), |x| homomorphism_residual(&up, x)),
        check_points("upstairs_equivariance", pts, tol.get("equivariance"), |x| equivariance_residual(&up, x)),
    ];
    let validity = c.validity(pts, tol.get("gk_algebra"));
    let notes = BTreeMap::from([
        ("validity_valid".to_string(), serde_json::json!(validity.valid)),
        ("validity_points".to_string(), serde_json::json!(validity.points)),
        ("min_transversality".to_string(), serde_json::json!(validity.min_transversality)),
        ("max_b_field".to_string(), serde_json::json!(validity.max_b_field)),
    ]);
    Ok((checks, notes))
}

/// Runs the whole battery on `points` seeded samples.
pub fn run_verify(model: &BuiltModel, points: usize, seed: u64, tol: &Tolerances) -> Result<VerifyReport> {
    let pm = model.pointwise();
    let pts = pm.sample(points, seed);
    if pts.len() < points {
        return Err(Error::Input(format!("sampler produced {} of {points} points", pts.len())));
    }
    let mut checks = pointwise_checks(pm, &pts, tol);
    let strong = checks.iter().find(|c| c.name == "strong_hamiltonian").is_some_and(|c| c.pass);
    let mut notes = BTreeMap::new();
    match model {
        BuiltModel::Field(m) => checks.extend(field_checks(m, &pts, tol, strong)),
        BuiltModel::Pointwise(c) => {
            let (extra, n) = cpn_notes(c, &pts, tol)?;
            checks.extend(extra);
            notes = n;
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        schema: SCHEMA_VERSION,
        model: pm.name().to_string(),
        points,
        seed,
        checks,
        poisson_ranks: poisson_ranks(pm, &pts),
        notes,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Scalar;
    use crate::autodiff::FieldFn;
    use crate::fields::{field, Chart, MatrixField, ThreeForm};
    use crate::hamilton::{ExtendedAction, LieAlgebraData, MomentMap};
    use crate::models::{build_model, standard_complex, ModelSpec};
    use crate::structures::{gualtieri_map, BiHermitianData};

    #[test]
    fn tolerances_reject_unknown_names() {
        let mut t = Tolerances::default();
        assert!(t.set("moment_condition", 1e-3).is_ok());
        assert_eq!(t.get("moment_condition"), 1e-3);
        assert!(t.set("nosuch", 1.0).is_err());
    }

    #[test]
    fn flat_model_passes() {
        let m = build_model(&ModelSpec::new("flat")).unwrap();
        let rep = run_verify(&m, 20, 1, &Tolerances::for_model(&m)).unwrap();
        assert!(rep.pass, "{:#?}", rep.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
        assert_eq!(rep.poisson_ranks["beta2"], vec![4]);
        assert_eq!(rep.poisson_ranks["beta1"], vec![0]);
    }

    #[test]
    fn negative_controls_fail() {
        let m = build_model(&ModelSpec::new("flat-perturbed")).unwrap();
        let rep = run_verify(&m, 10, 1, &Tolerances::for_model(&m)).unwrap();
        assert!(!rep.check("moment_condition").unwrap().pass);
        assert!(!rep.check("bihermitian_condition").unwrap().pass);
        assert!(rep.check("moment_bihermitian_equivalence").unwrap().pass);
        let m = build_model(&ModelSpec::new("nonstrong")).unwrap();
        let rep = run_verify(&m, 10, 1, &Tolerances::for_model(&m)).unwrap();
        let s = rep.check("strong_hamiltonian").unwrap();
        assert!(!s.pass && s.witness.is_some());
        assert!(rep.check("s_agreement").unwrap().pass);
    }

    /// Conformally flat Hermitian metric: the Gualtieri field must agree
    /// with the pointwise map, and its derivatives with finite differences.
    #[test]
    fn nonconstant_gualtieri_field() {
        #[derive(Clone)]
        struct Conformal;
        impl FieldFn for Conformal {
            fn out_dim(&self) -> usize {
                16
            }
            fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
                let mut r = S::one();
                for v in x {
                    r += *v * *v;
                }
                (0..16).map(|k| if k % 5 == 0 { r } else { S::zero() }).collect()
            }
        }
        let n = 4;
        let j = MatrixField::constant(&standard_complex(2));
        let g = MatrixField::new(n, n, field(Conformal)).unwrap();
        let m = HamiltonianModel::with_fields(
            "conformal",
            Chart::euclidean(n),
            g,
            j.clone(),
            j,
            ThreeForm::zero(n),
            ExtendedAction { generators: vec![], lie: LieAlgebraData::abelian(0) },
            MomentMap { components: vec![] },
        )
        .unwrap();
        let x = [0.3, -0.2, 0.5, 0.1];
        let data = BiHermitianData::new(m.g.eval(&x), m.jp.eval(&x), m.jm.eval(&x)).unwrap();
        let pair = gualtieri_map(&data).unwrap();
        assert!(crate::glinalg::max_abs_r(&(m.j1.eval(&x) - &pair.j1.mat)) < 1e-14);
        assert!(crate::glinalg::max_abs_r(&(m.j2.eval(&x) - &pair.j2.mat)) < 1e-14);
        let (_, jac) = <f64 as Scalar>::jet(m.j2.field.as_ref(), &x);
        let fd = crate::fields::finite_difference_jacobian(m.j2.field.as_ref(), &x, 1e-5);
        for (a, b) in jac.iter().flatten().zip(fd.iter().flatten()) {
            assert!((a - b).abs() < 1e-7);
        }
        // Non-Kähler metric: the symplectic structure gJ is not closed.
        assert!(frame_integrability_defect(&m.chart, &m.j2, &m.h, &x).unwrap() > 1e-3);
        assert!(frame_integrability_defect(&m.chart, &m.j1, &m.h, &x).unwrap() < 1e-12);
    }
}
