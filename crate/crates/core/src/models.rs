//! Built-in Hamiltonian generalized Kähler models and the name registry.
//!
//! Complex coordinates are interleaved, `z_k = x_{2k} + i x_{2k+1}`;
//! quaternionic coordinates are blocks `q = a + b i + c j + d k`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cpn::CpnModel;
use crate::error::{Error, Result};
use crate::autodiff::{solve_generic, FieldFn, Scalar};
use crate::fields::{field, section, Affine, Chart, Constant, Field, MatrixField, Quadratic, ThreeForm};
use crate::glinalg::{max_abs_r, GElement, RMat};
use crate::hamilton::{
    equivariance_residual, isotropy_residual, moment_residual, ExtendedAction, HamiltonianModel, LieAlgebraData,
    MomentMap, PointwiseModel,
};
use crate::structures::{gualtieri_map, random_bihermitian, BiHermitianData};

/// Standard complex structure on `ℂ^m` in interleaved coordinates.
pub fn standard_complex(m: usize) -> RMat {
    let mut j = RMat::zeros(2 * m, 2 * m);
    for k in 0..m {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

fn block_diag(block: &RMat, copies: usize) -> RMat {
    let b = block.nrows();
    let mut m = RMat::zeros(b * copies, b * copies);
    for c in 0..copies {
        m.view_mut((c * b, c * b), (b, b)).copy_from(block);
    }
    m
}

/// Left multiplication by `i`, `j`, `k` on one quaternion `(a, b, c, d)`.
pub fn quaternion_left() -> [RMat; 3] {
    let i = RMat::from_row_slice(4, 4, &[0., -1., 0., 0., 1., 0., 0., 0., 0., 0., 0., -1., 0., 0., 1., 0.]);
    let j = RMat::from_row_slice(4, 4, &[0., 0., -1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., -1., 0., 0.]);
    let k = RMat::from_row_slice(4, 4, &[0., 0., 0., -1., 0., 0., -1., 0., 0., 1., 0., 0., 1., 0., 0., 0.]);
    [i, j, k]
}

/// Right multiplication by `i` on one quaternion.
pub fn quaternion_right_i() -> RMat {
    RMat::from_row_slice(4, 4, &[0., -1., 0., 0., 1., 0., 0., 0., 0., 0., 0., 1., 0., 0., -1., 0.])
}

fn linear_section(x_mat: &RMat, xi_mat: &RMat) -> Field {
    section(field(Affine::linear(x_mat.clone())), field(Affine::linear(xi_mat.clone())))
}

/// `xᵀ Q x + c`.
fn quadratic(q: RMat, c: f64) -> Field {
    let n = q.nrows();
    field(Quadratic { q, l: vec![0.0; n], c })
}

/// Light construction-time validation of the moment and isotropy conditions.
fn construction_check(m: &HamiltonianModel) -> Result<()> {
    for x in m.sample(12, 0x5eed) {
        let mut worst = isotropy_residual(m, &x)?.max(equivariance_residual(m, &x)?);
        for a in 0..m.action.dim() {
            worst = worst.max(moment_residual(m, a, &x)?.sup_norm());
        }
        if worst > 1e-8 {
            return Err(Error::ModelConstruction(format!("{}: invariant residual {worst:e} at {x:?}", m.name)));
        }
    }
    Ok(())
}

/// Flat `ℂ^n` with the scaling circle `X = 2Jx` and `μ = |z|² − 1`.
pub fn make_flat_kahler(n: usize) -> Result<HamiltonianModel> {
    if n == 0 {
        return Err(Error::Input("flat model needs n ≥ 1".into()));
    }
    let dim = 2 * n;
    let j = standard_complex(n);
    let data = BiHermitianData::kahler(RMat::identity(dim, dim), j.clone())?;
    let action = ExtendedAction { generators: vec![linear_section(&(&j * 2.0), &RMat::zeros(dim, dim))], lie: LieAlgebraData::abelian(1) };
    let mu = MomentMap { components: vec![quadratic(RMat::identity(dim, dim), -1.0)] };
    let m = HamiltonianModel::with_constant_structure(format!("flat(n={n})"), Chart::euclidean(dim), &data, ThreeForm::zero(dim), action, mu)?
        .with_sample_radius(1.5);
    construction_check(&m)?;
    Ok(m)
}

/// Flat model with `μ + x¹`: the moment condition fails everywhere.
pub fn make_flat_perturbed(n: usize) -> Result<HamiltonianModel> {
    let mut m = make_flat_kahler(n)?;
    let dim = 2 * n;
    let mut l = vec![0.0; dim];
    l[0] = 1.0;
    m.mu = MomentMap { components: vec![field(Quadratic { q: RMat::identity(dim, dim), l, c: -1.0 })] };
    m.name = format!("flat-perturbed(n={n})");
    Ok(m)
}

/// Constant term of each hyperkähler moment component; a nonzero value keeps
/// the torus action locally free on the zero level.
pub const HYPERKAHLER_LEVEL: f64 = -0.5;

/// Flat `ℍ^m` with `J₊ = I`, `J₋ = −J`, the rank-`k` torus acting by right
/// multiplication by `i` on the first `k` quaternionic coordinates,
/// `ξ = ι_X ω_K` and `μ = μ^I − μ^J + const`.
pub fn make_hyperkahler(k: usize, m: usize) -> Result<HamiltonianModel> {
    if m == 0 || k > m {
        return Err(Error::Input(format!("hyperkähler model needs 1 ≤ m and k ≤ m (k = {k}, m = {m})")));
    }
    let dim = 4 * m;
    let [qi, qj, qk] = quaternion_left();
    let (i, j, kk) = (block_diag(&qi, m), block_diag(&qj, m), block_diag(&qk, m));
    let data = BiHermitianData::new(RMat::identity(dim, dim), i.clone(), -&j)?;
    let mut gens = Vec::new();
    let mut comps = Vec::new();
    for a in 0..k {
        let mut r = RMat::zeros(dim, dim);
        r.view_mut((4 * a, 4 * a), (4, 4)).copy_from(&quaternion_right_i());
        gens.push(linear_section(&r, &(&kk * &r)));
        // dμ^I = −ι_X ω_I = −I R x, and likewise for J.
        let q = (-(&i * &r) + &j * &r) * 0.5;
        comps.push(quadratic(q, HYPERKAHLER_LEVEL));
    }
    let action = ExtendedAction { generators: gens, lie: LieAlgebraData::abelian(k) };
    let model = HamiltonianModel::with_constant_structure(
        format!("hyperkahler(k={k},m={m})"),
        Chart::euclidean(dim),
        &data,
        ThreeForm::zero(dim),
        action,
        MomentMap { components: comps },
    )?
    .with_sample_radius(1.0);
    construction_check(&model)?;
    Ok(model)
}

/// Constant random bihermitian data on `ℝ⁴` with two commuting constant
/// generators `φ_a = −𝕁₂dμ_a` for linear `μ_a`. The moment condition holds
/// but `{μ₁, μ₂}` for `β₁` does not vanish.
pub fn make_nonstrong(seed: u64) -> Result<HamiltonianModel> {
    let n = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = random_bihermitian(n, &mut rng);
    let pair = gualtieri_map(&data)?;
    let beta2 = pair.j2.poisson_block();
    let a1 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let v = &beta2 * &a1;
    let r = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let a2 = &r - &v * (r.dot(&v) / v.dot(&v));
    let mut gens = Vec::new();
    let mut comps = Vec::new();
    for (idx, alpha) in [a1, a2].into_iter().enumerate() {
        let phi = GElement::covector(alpha.iter().copied().collect()).apply(&pair.j2.mat).scaled(-1.0);
        gens.push(field(Constant::new(phi.stacked().iter().copied().collect())));
        let c = if idx == 0 { 0.25 } else { -0.25 };
        comps.push(field(Affine { a: RMat::from_row_slice(1, n, alpha.as_slice()), b: vec![c] }));
    }
    let action = ExtendedAction { generators: gens, lie: LieAlgebraData::abelian(2) };
    HamiltonianModel::with_constant_structure(
        format!("nonstrong(seed={seed})"),
        Chart::euclidean(n),
        &data,
        ThreeForm::zero(n),
        action,
        MomentMap { components: comps },
    )
}

/// Name and parameters of a built-in model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>) -> Self {
        ModelSpec { name: name.into(), params: BTreeMap::new(), seed: 0 }
    }

    pub fn param(mut self, key: &str, v: f64) -> Self {
        self.params.insert(key.to_string(), v);
        self
    }

    fn int(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(&v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            Some(&v) => Err(Error::Input(format!("parameter {key} must be a non-negative integer, got {v}"))),
        }
    }

    fn real(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Input(format!("model {} has no parameter {k}", self.name))),
            None => Ok(()),
        }
    }
}

/// `𝕁 = [[0, ω⁻¹], [−ω, 0]]` for `ω = (1 + x³) dx¹∧dx² + dx³∧dx⁴`.
struct NonClosedSymplectic;

impl FieldFn for NonClosedSymplectic {
    fn out_dim(&self) -> usize {
        64
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let f = S::one() + x[2];
        let z = S::zero();
        let o = S::one();
        // Map matrix of ω: ι_{e1} ω = f dx², ι_{e2} ω = −f dx¹, ...
        let w = vec![
            vec![z, -f, z, z],
            vec![f, z, z, z],
            vec![z, z, z, -o],
            vec![z, z, o, z],
        ];
        let id: Vec<Vec<S>> = (0..4).map(|i| (0..4).map(|j| if i == j { o } else { z }).collect()).collect();
        let wi = solve_generic(&w, &id).unwrap();
        let mut out = vec![z; 64];
        for i in 0..4 {
            for j in 0..4 {
                out[i * 8 + 4 + j] = wi[i][j];
                out[(4 + i) * 8 + j] = -w[i][j];
            }
        }
        out
    }
}

/// Negative control for integrability: a pointwise-nondegenerate but
/// non-closed `ω` on `ℝ⁴`, as a field of `8×8` map matrices.
pub fn non_closed_symplectic() -> MatrixField {
    MatrixField::new(8, 8, field(NonClosedSymplectic)).expect("64 outputs")
}

pub const MODEL_NAMES: [&str; 5] = ["flat", "hyperkahler", "cpn", "nonstrong", "flat-perturbed"];

/// A constructed model: fully differentiable, or pointwise only.
pub enum BuiltModel {
    Field(Box<HamiltonianModel>),
    Pointwise(Box<CpnModel>),
}

impl BuiltModel {
    pub fn pointwise(&self) -> &dyn PointwiseModel {
        match self {
            BuiltModel::Field(m) => m.as_ref(),
            BuiltModel::Pointwise(m) => m.as_ref(),
        }
    }

    pub fn as_field(&self) -> Option<&HamiltonianModel> {
        match self {
            BuiltModel::Field(m) => Some(m),
            BuiltModel::Pointwise(_) => None,
        }
    }

    /// Whether the model is expected to pass its own invariant battery.
    pub fn is_negative_control(&self) -> bool {
        let name = self.pointwise().name();
        name.starts_with("nonstrong") || name.starts_with("flat-perturbed")
    }
}

pub fn build_model(spec: &ModelSpec) -> Result<BuiltModel> {
    let m = match spec.name.as_str() {
        "flat" => {
            spec.check_keys(&["n"])?;
            BuiltModel::Field(Box::new(make_flat_kahler(spec.int("n", 2)?)?))
        }
        "flat-perturbed" => {
            spec.check_keys(&["n"])?;
            BuiltModel::Field(Box::new(make_flat_perturbed(spec.int("n", 2)?)?))
        }
        "hyperkahler" => {
            spec.check_keys(&["k", "m"])?;
            BuiltModel::Field(Box::new(make_hyperkahler(spec.int("k", 2)?, spec.int("m", 2)?)?))
        }
        "nonstrong" => {
            spec.check_keys(&[])?;
            BuiltModel::Field(Box::new(make_nonstrong(spec.seed)?))
        }
        "cpn" => {
            spec.check_keys(&["N", "eps_scale"])?;
            BuiltModel::Pointwise(Box::new(CpnModel::new(spec.int("N", 5)?, spec.real("eps_scale", 1.0))?))
        }
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    Ok(m)
}

/// Largest deviation of a model's `𝕁₁`, `𝕁₂` from expected constant matrices.
pub fn structure_deviation(m: &HamiltonianModel, j1: &RMat, j2: &RMat, x: &[f64]) -> f64 {
    max_abs_r(&(m.j1.eval(x) - j1)).max(max_abs_r(&(m.j2.eval(x) - j2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glinalg::b_field_matrix;
    use crate::hamilton::{bihermitian_residual, obstruction_s};

    #[test]
    fn quaternion_relations() {
        let [i, j, k] = quaternion_left();
        let id = RMat::identity(4, 4);
        for q in [&i, &j, &k] {
            assert_eq!(q * q, -&id);
        }
        assert_eq!(&i * &j, k);
        let r = quaternion_right_i();
        assert_eq!(&r * &r, -&id);
        for q in [&i, &j, &k] {
            assert_eq!(q * &r, &r * q);
        }
    }

    #[test]
    fn hyperkahler_matches_displayed_matrices() {
        let m = make_hyperkahler(1, 1).unwrap();
        let [i, j, k] = quaternion_left();
        let inv = |w: &RMat| w.clone().try_inverse().unwrap();
        let block = |ur: RMat, ll: RMat| {
            let mut b = RMat::zeros(8, 8);
            b.view_mut((0, 4), (4, 4)).copy_from(&ur);
            b.view_mut((4, 0), (4, 4)).copy_from(&ll);
            b
        };
        let j1 = b_field_matrix(&(-&k)) * block((inv(&i) + inv(&j)) * 0.5, -(&i + &j)) * b_field_matrix(&k);
        let j2 = b_field_matrix(&k) * block((inv(&i) - inv(&j)) * 0.5, -(&i - &j)) * b_field_matrix(&(-&k));
        assert!(structure_deviation(&m, &j1, &j2, &[0.0; 4]) < 1e-14);
    }

    #[test]
    fn hyperkahler_identities() {
        let m = make_hyperkahler(2, 2).unwrap();
        let [_, _, k] = quaternion_left();
        let kk = block_diag(&k, 2);
        for x in m.sample(20, 3) {
            for a in 0..2 {
                let phi = m.generator_at(a, &x).unwrap();
                let dmu = m.dmu_at(a, &x).unwrap();
                let (b, _) = m.bihermitian_at(&x).unwrap();
                let (beta1, beta2) = crate::structures::poisson_bivectors(&b);
                let kx = &kk * DVector::from_column_slice(&phi.vec);
                let b1 = beta1.apply(&dmu);
                let b2 = beta2.apply(&dmu);
                for r in 0..8 {
                    assert!((b1[r] + kx[r]).abs() < 1e-12);
                    assert!((b2[r] + phi.vec[r]).abs() < 1e-12);
                }
                let (r1, r2) = bihermitian_residual(&m, a, &x).unwrap();
                assert!(r1.iter().chain(&r2).all(|v| v.abs() < 1e-12));
            }
            let (sp, sb) = obstruction_s(&m, 0, 1, &x).unwrap();
            assert!(sp.abs() < 1e-12 && sb.abs() < 1e-12);
        }
    }

    #[test]
    fn nonstrong_control_has_obstruction() {
        let m = make_nonstrong(1).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4];
        assert!(moment_residual(&m, 0, &x).unwrap().sup_norm() < 1e-12);
        assert!(isotropy_residual(&m, &x).unwrap() < 1e-12);
        assert!(equivariance_residual(&m, &x).unwrap() < 1e-12);
        let (sp, sb) = obstruction_s(&m, 0, 1, &x).unwrap();
        assert!(sp.abs() > 1e-3);
        assert!((sp - sb).abs() < 1e-12);
    }

    #[test]
    fn registry() {
        assert!(matches!(build_model(&ModelSpec::new("nosuch")), Err(Error::UnknownModel(_))));
        assert!(build_model(&ModelSpec::new("flat").param("n", 3.0)).is_ok());
        assert!(build_model(&ModelSpec::new("flat").param("q", 3.0)).is_err());
        assert!(build_model(&ModelSpec::new("hyperkahler").param("k", 3.0).param("m", 2.0)).is_err());
    }
}
