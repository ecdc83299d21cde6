//! Linear algebra of the quotient at points of `μ⁻¹(0)`: the subspace
//! `K₀ = span{φ(ς_a), dμ_a}`, the carrier `K₀⊥ ∩ 𝒢K₀⊥` of the reduced pair,
//! the type formula, and the generalized holomorphic structure `𝒜`.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::autodiff::{solve_generic_cx, Cx, FieldFn, Scalar};
use crate::error::{Error, Result};
use crate::fields::{courant_bracket, field, Field, Slice};
use crate::flowkn::{mu_norm_descent, FlowExit};
use crate::glinalg::{
    max_abs_c, max_abs_r, orthogonal_complement, pairing_matrix, singular_spectrum, to_complex, CMat, FieldKind,
    GElement, LinearGC, RMat, SubspaceBasis,
};
use crate::hamilton::{HamiltonianModel, PointwiseModel};

/// Default bound on `‖μ(x)‖` for a point to count as on the level set.
pub const LEVEL_TOL: f64 = 1e-7;
/// Invariant tolerance for reduced structures.
pub const REDUCED_TOL: f64 = 1e-8;
const ZERO_REL: f64 = 1e-7;
const GAP_LO: f64 = 1e-9;
const GAP_HI: f64 = 1e-5;

fn mu_norm(m: &dyn PointwiseModel, x: &[f64]) -> Result<f64> {
    Ok(m.mu_at(x)?.iter().map(|v| v * v).sum::<f64>().sqrt())
}

fn require_level(m: &dyn PointwiseModel, x: &[f64], tol: f64) -> Result<()> {
    let norm = mu_norm(m, x)?;
    if norm >= tol {
        return Err(Error::NotOnLevelSet { norm });
    }
    Ok(())
}

/// Rank with a guarded gap: singular values below `1e−7·max` count as
/// zero, and any value in `[1e−9, 1e−5]·max` makes the rank indeterminate.
pub fn guarded_rank(spectrum: &[f64]) -> Result<usize> {
    let smax = spectrum.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    if spectrum.iter().any(|&s| s >= GAP_LO * smax && s <= GAP_HI * smax) {
        return Err(Error::IndeterminateRank { spectrum: spectrum.to_vec() });
    }
    Ok(spectrum.iter().filter(|&&s| s >= ZERO_REL * smax).count())
}

fn guarded_rank_of(m: &CMat) -> Result<usize> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok(0);
    }
    guarded_rank(&singular_spectrum(m))
}

fn hcat(parts: &[&CMat]) -> CMat {
    let rows = parts[0].nrows();
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        out.view_mut((0, c), (rows, p.ncols())).copy_from(p);
        c += p.ncols();
    }
    out
}

fn generators(m: &dyn PointwiseModel, x: &[f64]) -> Result<Vec<GElement>> {
    (0..m.lie().dim).map(|a| m.generator_at(a, x)).collect()
}

/// `span{φ(ς_a), dμ_a}` at a level-set point.
pub fn k0_subspace(m: &dyn PointwiseModel, x: &[f64], level_tol: f64) -> Result<SubspaceBasis> {
    require_level(m, x, level_tol)?;
    let n = m.dim();
    let d = m.lie().dim;
    let mut cols = RMat::zeros(2 * n, 2 * d);
    for (a, phi) in generators(m, x)?.iter().enumerate() {
        cols.set_column(a, &phi.stacked());
        let dmu = GElement::covector(m.dmu_at(a, x)?);
        cols.set_column(d + a, &dmu.stacked());
    }
    locally_free_span(&cols, 2 * d)
}

fn locally_free_span(cols: &RMat, expected: usize) -> Result<SubspaceBasis> {
    if cols.ncols() == 0 {
        return Ok(SubspaceBasis::zero(cols.nrows()));
    }
    let svd = cols.clone().svd(false, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-9 * smax).count();
    if rank < expected || smax == 0.0 {
        let vt = svd.v_t.expect("requested");
        let (k, _) = svd.singular_values.argmin();
        return Err(Error::NotLocallyFree { rank, expected, combination: vt.row(k).iter().copied().collect() });
    }
    Ok(SubspaceBasis::span_real(cols))
}

/// `𝒢 = −𝕁₁𝕁₂` at `x`.
fn metric(m: &dyn PointwiseModel, x: &[f64]) -> Result<(LinearGC, LinearGC, RMat)> {
    let pair = m.gk_at(x)?;
    let g = -(&pair.j1.mat * &pair.j2.mat);
    Ok((pair.j1, pair.j2, g))
}

/// `S⊥ ∩ 𝒢S⊥`.
fn carrier_of(s: &SubspaceBasis, gm: &RMat, n: usize) -> Result<SubspaceBasis> {
    let perp = orthogonal_complement(s, n)?;
    Ok(perp.intersection(&perp.image(gm)))
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducedResiduals {
    pub square_1: f64,
    pub square_2: f64,
    pub orthogonality_1: f64,
    pub orthogonality_2: f64,
    pub commutation: f64,
    /// Largest distance of `𝕁ᵢ(carrier)` from the carrier.
    pub invariance: f64,
    pub metric_min_eigenvalue: f64,
}

impl ReducedResiduals {
    pub fn max_residual(&self) -> f64 {
        [self.square_1, self.square_2, self.orthogonality_1, self.orthogonality_2, self.commutation, self.invariance]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn pass(&self, tol: f64) -> bool {
        self.max_residual() < tol && self.metric_min_eigenvalue > tol
    }
}

/// The reduced pair on `K₀⊥ ∩ 𝒢K₀⊥`, in an orthonormal carrier basis.
#[derive(Clone, Debug, Serialize)]
pub struct ReducedStructure {
    pub base_point: Vec<f64>,
    /// Orthonormal carrier basis, one column per entry.
    #[serde(serialize_with = "columns")]
    pub carrier: RMat,
    #[serde(serialize_with = "rows")]
    pub j1_red: RMat,
    #[serde(serialize_with = "rows")]
    pub j2_red: RMat,
    /// Restricted pairing in the carrier basis.
    #[serde(serialize_with = "rows")]
    pub pairing: RMat,
    pub type_1: usize,
    pub type_2: usize,
    pub residuals: ReducedResiduals,
}

pub fn rows<S: serde::Serializer>(m: &RMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        seq.serialize_element(&m.row(i).iter().copied().collect::<Vec<f64>>())?;
    }
    seq.end()
}

fn columns<S: serde::Serializer>(m: &RMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    rows(&m.transpose(), s)
}

fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn reduced_pair(m: &dyn PointwiseModel, x: &[f64]) -> Result<ReducedStructure> {
    reduced_pair_with(m, x, LEVEL_TOL)
}

pub fn reduced_pair_with(m: &dyn PointwiseModel, x: &[f64], level_tol: f64) -> Result<ReducedStructure> {
    let n = m.dim();
    let d = m.lie().dim;
    let k0 = k0_subspace(m, x, level_tol)?;
    let (j1, j2, gm) = metric(m, x)?;
    let carrier = carrier_of(&k0, &gm, n)?;
    let expected = 2 * n - 4 * d;
    if carrier.dim() != expected {
        return Err(Error::ReductionDegeneracy { expected, found: carrier.dim() });
    }
    let invariance = carrier.containment_residual(&carrier.image(&j1.mat)).max(carrier.containment_residual(&carrier.image(&j2.mat)));
    if invariance > 1e-6 {
        return Err(Error::Structural(format!("carrier is not invariant under the GK pair (residual {invariance:e})")));
    }
    let w = real_part(&carrier.basis);
    let j1r = w.transpose() * &j1.mat * &w;
    let j2r = w.transpose() * &j2.mat * &w;
    let p = w.transpose() * pairing_matrix(n) * &w;
    let id = RMat::identity(expected, expected);
    let metric_form = &p * -(&j1r * &j2r);
    let sym = (&metric_form + metric_form.transpose()) * 0.5;
    let metric_min_eigenvalue = if expected == 0 { f64::INFINITY } else { sym.symmetric_eigenvalues().min() };
    let residuals = ReducedResiduals {
        square_1: max_abs_r(&(&j1r * &j1r + &id)),
        square_2: max_abs_r(&(&j2r * &j2r + &id)),
        orthogonality_1: max_abs_r(&(j1r.transpose() * &p * &j1r - &p)),
        orthogonality_2: max_abs_r(&(j2r.transpose() * &p * &j2r - &p)),
        commutation: max_abs_r(&(&j1r * &j2r - &j2r * &j1r)),
        invariance,
        metric_min_eigenvalue,
    };
    let type_1 = reduced_type(m, x, &w, &j1r)?;
    let type_2 = reduced_type(m, x, &w, &j2r)?;
    Ok(ReducedStructure { base_point: x.to_vec(), carrier: w, j1_red: j1r, j2_red: j2r, pairing: p, type_1, type_2, residuals })
}

/// `+i`-eigenspace of a real complex structure, as column basis.
fn plus_i_eigenspace(j: &RMat) -> CMat {
    let r = j.nrows();
    let jc = to_complex(j);
    // Columns of (1 − iJ) span the +i eigenspace.
    let m = CMat::identity(r, r) - jc * Complex64::new(0.0, 1.0);
    SubspaceBasis::span(&m, FieldKind::Complex).basis
}

/// Type of a reduced structure: `(n − 2d) − dim_ℂ π_red(L_red)` where
/// `π_red(L_red) = (π(L_red) + ℂX)/ℂX`.
fn reduced_type(m: &dyn PointwiseModel, x: &[f64], w: &RMat, j_red: &RMat) -> Result<usize> {
    let n = m.dim();
    let d = m.lie().dim;
    let l_red = to_complex(w) * plus_i_eigenspace(j_red);
    let tangent = l_red.rows(0, n).into_owned();
    let xs = x_columns(m, x)?;
    let rank = guarded_rank_of(&hcat(&[&tangent, &xs]))?;
    Ok(n - d - rank)
}

fn x_columns(m: &dyn PointwiseModel, x: &[f64]) -> Result<CMat> {
    let gens = generators(m, x)?;
    let n = m.dim();
    let mut out = CMat::zeros(n, gens.len());
    for (a, g) in gens.iter().enumerate() {
        let v = DVector::from_column_slice(&g.vec);
        let nv = v.norm();
        let v = if nv > 0.0 { v / nv } else { v };
        out.set_column(a, &to_complex(&RMat::from_column_slice(n, 1, v.as_slice())).column(0));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CarrierIdentity {
    Checked { max_principal_angle: f64, tol: f64, pass: bool },
    /// The point is off the level set, where the identity is not claimed.
    NotApplicable { mu_norm: f64 },
}

/// `K = span φ(ς_a)` and `K̃ = K ⊕ 𝕁₁K`.
fn k_tilde(m: &dyn PointwiseModel, x: &[f64], j1: &RMat) -> Result<(SubspaceBasis, SubspaceBasis)> {
    let n = m.dim();
    let d = m.lie().dim;
    let gens = generators(m, x)?;
    let mut k = RMat::zeros(2 * n, d);
    let mut kt = RMat::zeros(2 * n, 2 * d);
    for (a, g) in gens.iter().enumerate() {
        k.set_column(a, &g.stacked());
        kt.set_column(a, &g.stacked());
        kt.set_column(d + a, &g.apply(j1).stacked());
    }
    Ok((locally_free_span(&k, d)?, locally_free_span(&kt, 2 * d)?))
}

/// Compares `K₀⊥ ∩ 𝒢K₀⊥` with `K̃⊥ ∩ 𝒢K̃⊥`.
pub fn carrier_identity_check(m: &dyn PointwiseModel, x: &[f64], level_tol: f64) -> Result<CarrierIdentity> {
    let norm = mu_norm(m, x)?;
    if norm >= level_tol {
        return Ok(CarrierIdentity::NotApplicable { mu_norm: norm });
    }
    let n = m.dim();
    let (j1, _, gm) = metric(m, x)?;
    let a = carrier_of(&k0_subspace(m, x, level_tol)?, &gm, n)?;
    let (_, kt) = k_tilde(m, x, &j1.mat)?;
    let b = carrier_of(&kt, &gm, n)?;
    let angle = a.max_principal_angle(&b);
    Ok(CarrierIdentity::Checked { max_principal_angle: angle, tol: 1e-8, pass: angle < 1e-8 })
}

#[derive(Clone, Debug, Serialize)]
pub struct TypeFormula {
    /// Type of the reduced `𝕁₁`, computed on the carrier.
    pub lhs: usize,
    /// `t(x) − dim𝔤 + 2 dim(π(L₁) ∩ π(K_ℂ))`.
    pub rhs: usize,
    pub upstairs_type: usize,
    pub dim_g: usize,
    pub intersection: usize,
}

impl TypeFormula {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

pub fn type_formula_check(m: &dyn PointwiseModel, x: &[f64]) -> Result<TypeFormula> {
    let red = reduced_pair(m, x)?;
    let n = m.dim();
    let d = m.lie().dim;
    let (j1, _, _) = metric(m, x)?;
    let l1 = plus_i_eigenspace(&j1.mat);
    let pl = l1.rows(0, n).into_owned();
    let xs = x_columns(m, x)?;
    let r_l = guarded_rank_of(&pl)?;
    let r_k = guarded_rank_of(&xs)?;
    let r_sum = guarded_rank_of(&hcat(&[&pl, &xs]))?;
    let intersection = r_l + r_k - r_sum;
    let upstairs_type = n - r_l;
    let rhs = upstairs_type + 2 * intersection - d;
    Ok(TypeFormula { lhs: red.type_1, rhs, upstairs_type, dim_g: d, intersection })
}

#[derive(Clone, Debug, Serialize)]
pub struct GhsReport {
    pub rank_a: usize,
    pub expected_rank: usize,
    /// `K_a ⊆ 𝒜`.
    pub ka_in_a: f64,
    /// `𝒜 ⊆ K̃⊥_ℂ`.
    pub a_in_kperp: f64,
    /// Principal angle between `𝒜 ⊕ 𝒜̄` and `K̃⊥_ℂ`.
    pub a_sum_angle: f64,
    /// Principal angle between `K_a ⊕ K̄_a` and `K̃_ℂ`.
    pub ka_sum_angle: f64,
    /// Largest distance of a frame bracket from `𝒜`.
    pub involutivity: f64,
    pub frame_size: usize,
    pub pass: bool,
}

/// Complex section of `𝒜 = L₁ ∩ K̃⊥` obtained from the `L₁`-projection
/// `ℓ = e − i𝕁₁e` of a constant frame element as
/// `ℓ − Σ 𝒢t_a (M⁻¹)_{ab} ⟨t̄_b, ℓ⟩`, with `t_a = φ_a − i𝕁₁φ_a` spanning `K_a`
/// and `M_{ba} = ⟨t̄_b, 𝒢t_a⟩` positive definite Hermitian. Output: real
/// parts then imaginary parts.
struct AdaptedSection {
    j1: Field,
    j2: Field,
    gens: Vec<Field>,
    e: usize,
    n: usize,
}

impl FieldFn for AdaptedSection {
    fn out_dim(&self) -> usize {
        4 * self.n
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let m = 2 * self.n;
        let j = S::call(self.j1.as_ref(), x);
        let j2 = S::call(self.j2.as_ref(), x);
        let mat = |a: &[S], v: &[S]| -> Vec<S> {
            (0..m)
                .map(|i| {
                    let mut acc = S::zero();
                    for k in 0..m {
                        acc += a[i * m + k] * v[k];
                    }
                    acc
                })
                .collect()
        };
        let apply = |v: &[S]| mat(&j, v);
        // 𝒢v = −𝕁₁𝕁₂v.
        let metric = |v: &[S]| -> Vec<S> { mat(&j, &mat(&j2, v)).into_iter().map(|c| -c).collect() };
        let pair = |a: &[Cx<S>], b: &[Cx<S>]| -> Cx<S> {
            let mut acc = Cx::zero();
            for i in 0..self.n {
                acc = acc + a[i] * b[i + self.n] + a[i + self.n] * b[i];
            }
            acc
        };
        let cx = |re: &[S], im: &[S], sign: f64| -> Vec<Cx<S>> {
            re.iter().zip(im).map(|(&r, &i)| Cx::new(r, i.scale(sign))).collect()
        };
        let mut e = vec![S::zero(); m];
        e[self.e] = S::one();
        let je = apply(&e);
        let ell = cx(&e, &je, -1.0);
        let mut u = Vec::new();
        let mut tbar = Vec::new();
        for g in &self.gens {
            let phi = S::call(g.as_ref(), x);
            let jp = apply(&phi);
            let (gp, gjp) = (metric(&phi), metric(&jp));
            u.push(cx(&gp, &gjp, -1.0));
            tbar.push(cx(&phi, &jp, 1.0));
        }
        let d = u.len();
        let mut s = ell.clone();
        if d > 0 {
            let nmat: Vec<Vec<Cx<S>>> = (0..d).map(|b| (0..d).map(|a| pair(&tbar[b], &u[a])).collect()).collect();
            let w: Vec<Vec<Cx<S>>> = (0..d).map(|b| vec![pair(&tbar[b], &ell)]).collect();
            let c = solve_generic_cx(&nmat, &w).expect("Hermitian Gram matrix of K_a is definite at free points");
            for a in 0..d {
                for i in 0..m {
                    s[i] = s[i] - u[a][i] * c[a][0];
                }
            }
        }
        s.iter().map(|z| z.re).chain(s.iter().map(|z| z.im)).collect()
    }
}

fn complex_bracket(m: &HamiltonianModel, a: &Field, b: &Field, x: &[f64]) -> Result<DVector<Complex64>> {
    let n2 = 2 * m.n();
    let part = |f: &Field, k: usize| field(Slice { f: f.clone(), start: k * n2, len: n2 });
    let (ar, ai, br, bi) = (part(a, 0), part(a, 1), part(b, 0), part(b, 1));
    let h = &m.h;
    let c = |p: &Field, q: &Field| courant_bracket(&m.chart, p, q, h, x).map(|g| g.stacked());
    let re = c(&ar, &br)? - c(&ai, &bi)?;
    let im = c(&ar, &bi)? + c(&ai, &br)?;
    Ok(DVector::from_fn(n2, |i, _| Complex64::new(re[i], im[i])))
}

/// Algebraic and involutivity checks of `𝒜 = L₁ ∩ K̃⊥_ℂ` at a level-set point.
pub fn ghs_check(m: &HamiltonianModel, x: &[f64], tol: f64) -> Result<GhsReport> {
    require_level(m, x, LEVEL_TOL)?;
    let n = m.n();
    let d = m.action.dim();
    let (j1, _, _) = metric(m, x)?;
    let l1 = SubspaceBasis::span(&plus_i_eigenspace(&j1.mat), FieldKind::Complex);
    let (_, kt) = k_tilde(m, x, &j1.mat)?;
    let ktc = kt.complexified();
    let kperp = orthogonal_complement(&ktc, n)?;
    let a = l1.intersection(&kperp);
    let ka = l1.intersection(&ktc);
    let a_sum = a.sum(&a.conj());
    let ka_sum = ka.sum(&ka.conj());

    let sections: Vec<Field> = (0..2 * n)
        .map(|e| field(AdaptedSection { j1: m.j1.field.clone(), j2: m.j2.field.clone(), gens: m.action.generators.clone(), e, n }))
        .collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut cols = CMat::zeros(2 * n, 0);
    for (e, s) in sections.iter().enumerate() {
        let v = s.eval_f64(x);
        let col = CMat::from_fn(2 * n, 1, |i, _| Complex64::new(v[i], v[i + 2 * n]));
        let trial = hcat(&[&cols, &col]);
        if SubspaceBasis::span(&trial, FieldKind::Complex).dim() > cols.ncols() {
            cols = trial;
            chosen.push(e);
        }
        if chosen.len() == n - d {
            break;
        }
    }
    let proj = a.projector();
    let mut involutivity = 0.0f64;
    for (p, &i) in chosen.iter().enumerate() {
        for &k in &chosen[p + 1..] {
            let br = complex_bracket(m, &sections[i], &sections[k], x)?;
            let off = &br - &proj * &br;
            involutivity = involutivity.max(off.norm());
        }
    }
    let mut rep = GhsReport {
        rank_a: a.dim(),
        expected_rank: n - d,
        ka_in_a: a.containment_residual(&ka),
        a_in_kperp: kperp.containment_residual(&a),
        a_sum_angle: a_sum.max_principal_angle(&kperp),
        ka_sum_angle: ka_sum.max_principal_angle(&ktc),
        involutivity,
        frame_size: chosen.len(),
        pass: false,
    };
    rep.pass = rep.rank_a == rep.expected_rank
        && rep.ka_in_a < 1e-8
        && rep.a_in_kperp < 1e-8
        && rep.a_sum_angle < 1e-8
        && rep.ka_sum_angle < 1e-8
        && rep.involutivity < tol
        && rep.frame_size == rep.expected_rank;
    Ok(rep)
}

/// Level-set points found by descent from the model's own samples.
pub fn level_set_points(m: &dyn PointwiseModel, count: usize, seed: u64, tol: f64, max_steps: usize) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    let starts = m.sample(4 * count.max(1), seed);
    let found: Vec<Option<Vec<f64>>> = starts
        .par_iter()
        .map(|x0| match mu_norm_descent(m, x0, tol, max_steps) {
            Ok(tr) if tr.exit == FlowExit::Converged => Some(tr.last_point().to_vec()),
            _ => None,
        })
        .collect();
    found.into_iter().flatten().take(count).collect()
}

/// Largest `|⟨a, b⟩|` over basis pairs of the complexified `K₀`.
pub fn k0_isotropy(k0: &SubspaceBasis) -> f64 {
    let n = k0.ambient() / 2;
    max_abs_c(&(k0.basis.transpose() * to_complex(&pairing_matrix(n)) * &k0.basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_flat_kahler, make_hyperkahler};

    #[test]
    fn flat_sphere_point() {
        let m = make_flat_kahler(2).unwrap();
        let x = [0.6, 0.0, 0.0, 0.8];
        let k0 = k0_subspace(&m, &x, LEVEL_TOL).unwrap();
        assert_eq!(k0.dim(), 2);
        assert!(k0_isotropy(&k0) < 1e-10);
        let red = reduced_pair(&m, &x).unwrap();
        assert_eq!(red.carrier.ncols(), 4);
        assert!(red.residuals.pass(1e-8), "{:?}", red.residuals);
        assert_eq!((red.type_1, red.type_2), (1, 0));
        let tf = type_formula_check(&m, &x).unwrap();
        assert_eq!((tf.lhs, tf.rhs, tf.upstairs_type, tf.intersection), (1, 1, 2, 0));
        assert!(matches!(carrier_identity_check(&m, &x, LEVEL_TOL).unwrap(), CarrierIdentity::Checked { pass: true, .. }));
    }

    #[test]
    fn off_level_set() {
        let m = make_flat_kahler(2).unwrap();
        let x = [1.0, 0.0, 0.0, 0.5];
        assert!(matches!(k0_subspace(&m, &x, LEVEL_TOL), Err(Error::NotOnLevelSet { .. })));
        assert!(matches!(carrier_identity_check(&m, &x, LEVEL_TOL).unwrap(), CarrierIdentity::NotApplicable { .. }));
    }

    #[test]
    fn guarded_rank_rules() {
        assert_eq!(guarded_rank(&[1.0, 0.5, 1e-12]).unwrap(), 2);
        assert!(matches!(guarded_rank(&[1.0, 1e-6]), Err(Error::IndeterminateRank { .. })));
        assert_eq!(guarded_rank(&[]).unwrap(), 0);
    }

    #[test]
    fn hyperkahler_reduction() {
        let m = make_hyperkahler(2, 2).unwrap();
        let pts = level_set_points(&m, 5, 3, 1e-10, 100_000);
        assert_eq!(pts.len(), 5);
        for x in &pts {
            let red = reduced_pair(&m, x).unwrap();
            assert!(red.residuals.pass(1e-8), "{:?}", red.residuals);
            assert_eq!(red.type_2, 0);
            assert!(type_formula_check(&m, x).unwrap().holds());
            assert!(matches!(carrier_identity_check(&m, x, LEVEL_TOL).unwrap(), CarrierIdentity::Checked { pass: true, .. }));
            let g = ghs_check(&m, x, 1e-6).unwrap();
            assert!(g.pass, "{g:?}");
        }
    }

    #[test]
    fn flat_ghs() {
        let m = make_flat_kahler(2).unwrap();
        let g = ghs_check(&m, &[0.6, 0.0, 0.0, 0.8], 1e-6).unwrap();
        assert!(g.pass, "{g:?}");
    }
}
