//! Extended actions, moment maps and the pointwise identities of
//! Hamiltonian generalized Kähler manifolds.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::autodiff::{solve_generic, FieldFn, Scalar};
use crate::error::{Error, Result};
use crate::fields::{
    anchor, combine, exterior_derivative_field, field, form_part, Chart, ConstMatApply, Contraction, Field, MatrixField,
    ThreeForm,
};
use crate::glinalg::{max_abs_r, pairing, CMat, GElement, LinearGC, RMat};
use crate::structures::{gualtieri_map, poisson_bivectors, BiHermitianData, GKPair};

/// Structure constants `[e_i, e_j] = Σ_k c^k_{ij} e_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LieAlgebraData {
    pub dim: usize,
    /// `c^k_{ij}` at index `(i·d + j)·d + k`.
    pub structure_constants: Vec<f64>,
    pub basis_names: Vec<String>,
}

impl LieAlgebraData {
    pub fn abelian(d: usize) -> Self {
        LieAlgebraData {
            dim: d,
            structure_constants: vec![0.0; d * d * d],
            basis_names: (0..d).map(|i| format!("t{}", i + 1)).collect(),
        }
    }

    /// `su(2)` in the basis `T_a = −iσ_a/2`, where `[T_a, T_b] = ε_{abc} T_c`.
    pub fn su2() -> Self {
        let mut c = vec![0.0; 27];
        for (i, j, k, s) in [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)] {
            c[(i * 3 + j) * 3 + k] = s;
            c[(j * 3 + i) * 3 + k] = -s;
        }
        LieAlgebraData { dim: 3, structure_constants: c, basis_names: vec!["T1".into(), "T2".into(), "T3".into()] }
    }

    /// Structure constants of the real span of the given complex matrices
    /// (which must close under commutators).
    pub fn from_matrices(names: Vec<String>, mats: &[CMat]) -> Result<Self> {
        let d = mats.len();
        let inner = |a: &CMat, b: &CMat| (a.adjoint() * b).trace().re;
        let gram = RMat::from_fn(d, d, |i, j| inner(&mats[i], &mats[j]));
        let gi = gram.try_inverse().ok_or_else(|| Error::Input("dependent Lie algebra basis".into()))?;
        let mut c = vec![0.0; d * d * d];
        for i in 0..d {
            for j in 0..d {
                let br = &mats[i] * &mats[j] - &mats[j] * &mats[i];
                let rhs = DVector::from_fn(d, |k, _| inner(&mats[k], &br));
                let coef = &gi * rhs;
                let recon = mats.iter().zip(coef.iter()).fold(CMat::zeros(br.nrows(), br.ncols()), |acc, (m, &s)| acc + m * Complex64::new(s, 0.0));
                let err = (recon - &br).iter().fold(0.0f64, |a, z| a.max(z.norm()));
                if err > 1e-10 {
                    return Err(Error::Input(format!("basis does not close under brackets (residual {err:e})")));
                }
                for k in 0..d {
                    c[(i * d + j) * d + k] = coef[k];
                }
            }
        }
        Ok(LieAlgebraData { dim: d, structure_constants: c, basis_names: names })
    }

    /// `c^k_{ij}`.
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.structure_constants[(i * self.dim + j) * self.dim + k]
    }

    pub fn bracket(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += u[i] * v[j] * self.c(i, j, k);
                    }
                }
                s
            })
            .collect()
    }

    pub fn is_abelian(&self) -> bool {
        self.structure_constants.iter().all(|&c| c == 0.0)
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        let d = self.dim;
        let mut r = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    r = r.max((self.c(i, j, k) + self.c(j, i, k)).abs());
                }
            }
        }
        r
    }

    pub fn jacobi_residual(&self) -> f64 {
        let d = self.dim;
        let e = |i: usize| (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect::<Vec<_>>();
        let mut r = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let t1 = self.bracket(&e(a), &self.bracket(&e(b), &e(c)));
                    let t2 = self.bracket(&e(b), &self.bracket(&e(c), &e(a)));
                    let t3 = self.bracket(&e(c), &self.bracket(&e(a), &e(b)));
                    for k in 0..d {
                        r = r.max((t1[k] + t2[k] + t3[k]).abs());
                    }
                }
            }
        }
        r
    }
}

/// Standard basis of `su(m)` as anti-Hermitian matrices.
pub fn su_basis(m: usize) -> Vec<CMat> {
    let mut out = Vec::new();
    let i = Complex64::new(0.0, 1.0);
    for p in 0..m {
        for q in p + 1..m {
            let mut a = CMat::zeros(m, m);
            a[(p, q)] = Complex64::new(1.0, 0.0);
            a[(q, p)] = Complex64::new(-1.0, 0.0);
            out.push(a * Complex64::new(0.5, 0.0));
            let mut s = CMat::zeros(m, m);
            s[(p, q)] = i;
            s[(q, p)] = i;
            out.push(s * Complex64::new(0.5, 0.0));
        }
    }
    for p in 0..m.saturating_sub(1) {
        let mut h = CMat::zeros(m, m);
        h[(p, p)] = i * 0.5;
        h[(p + 1, p + 1)] = -i * 0.5;
        out.push(h);
    }
    out
}

/// Real `2m × 2m` matrix of a complex `m × m` matrix acting on interleaved
/// coordinates `z_k = x_{2k} + i x_{2k+1}`.
pub fn realify(a: &CMat) -> RMat {
    let m = a.nrows();
    let mut r = RMat::zeros(2 * m, 2 * m);
    for p in 0..m {
        for q in 0..a.ncols() {
            let z = a[(p, q)];
            r[(2 * p, 2 * q)] = z.re;
            r[(2 * p, 2 * q + 1)] = -z.im;
            r[(2 * p + 1, 2 * q)] = z.im;
            r[(2 * p + 1, 2 * q + 1)] = z.re;
        }
    }
    r
}

/// Generators `φ(ς_a) = X_a + ξ_a`, as sections.
#[derive(Clone)]
pub struct ExtendedAction {
    pub generators: Vec<Field>,
    pub lie: LieAlgebraData,
}

impl ExtendedAction {
    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    /// `φ(Σ u_a ς_a)`.
    pub fn combination(&self, u: &[f64]) -> Field {
        combine(u.iter().copied().zip(self.generators.iter().cloned()).collect())
    }
}

#[derive(Clone)]
pub struct MomentMap {
    pub components: Vec<Field>,
}

impl MomentMap {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval_f64(x)[0]).collect()
    }

    pub fn differential(&self, a: usize, n: usize) -> Field {
        exterior_derivative_field(self.components[a].clone(), n, 0)
    }
}

/// Gualtieri matrices of position-dependent bihermitian data.
struct GualtieriField {
    g: MatrixField,
    jp: MatrixField,
    jm: MatrixField,
    second: bool,
}

fn as_rows<S: Scalar>(v: &[S], n: usize) -> Vec<Vec<S>> {
    (0..n).map(|i| v[i * n..(i + 1) * n].to_vec()).collect()
}

fn mm<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Vec<Vec<S>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut s = S::zero();
                    for (k, bk) in b.iter().enumerate() {
                        s += a[i][k] * bk[j];
                    }
                    s
                })
                .collect()
        })
        .collect()
}

impl FieldFn for GualtieriField {
    fn out_dim(&self) -> usize {
        4 * self.g.rows * self.g.rows
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.g.rows;
        let g = as_rows(&S::call(self.g.field.as_ref(), x), n);
        let jp = as_rows(&S::call(self.jp.field.as_ref(), x), n);
        let jm = as_rows(&S::call(self.jm.field.as_ref(), x), n);
        let id: Vec<Vec<S>> = (0..n).map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect()).collect();
        let gi = solve_generic(&g, &id).expect("metric field must be invertible");
        let (op, om) = (mm(&g, &jp), mm(&g, &jm));
        // ω⁻¹ = −J g⁻¹
        let (opi, omi) = (mm(&jp, &gi), mm(&jm, &gi));
        let s = if self.second { -S::one() } else { S::one() };
        let half = S::cst(0.5);
        let mut out = vec![S::zero(); 4 * n * n];
        let w = 2 * n;
        for i in 0..n {
            for j in 0..n {
                out[i * w + j] = half * (-jp[i][j] - s * jm[i][j]);
                out[i * w + n + j] = half * (-opi[i][j] + s * omi[i][j]);
                out[(n + i) * w + j] = half * (-op[i][j] + s * om[i][j]);
                out[(n + i) * w + n + j] = half * (jp[j][i] + s * jm[j][i]);
            }
        }
        out
    }
}

/// A Hamiltonian generalized Kähler model in a single chart, with all
/// structure given by differentiable fields.
#[derive(Clone)]
pub struct HamiltonianModel {
    pub name: String,
    pub chart: Chart,
    pub g: MatrixField,
    pub jp: MatrixField,
    pub jm: MatrixField,
    pub j1: MatrixField,
    pub j2: MatrixField,
    pub h: ThreeForm,
    pub action: ExtendedAction,
    pub mu: MomentMap,
    /// Half-width of the coordinate box used for sampling.
    pub sample_radius: f64,
}

impl HamiltonianModel {
    /// Model with constant bihermitian data; the GK pair is computed once.
    pub fn with_constant_structure(
        name: impl Into<String>,
        chart: Chart,
        data: &BiHermitianData,
        h: ThreeForm,
        action: ExtendedAction,
        mu: MomentMap,
    ) -> Result<Self> {
        let pair = gualtieri_map(data)?;
        Self::assemble(
            name.into(),
            chart,
            MatrixField::constant(&data.g),
            MatrixField::constant(&data.jp),
            MatrixField::constant(&data.jm),
            MatrixField::constant(&pair.j1.mat),
            MatrixField::constant(&pair.j2.mat),
            h,
            action,
            mu,
        )
    }

    /// Model with position-dependent bihermitian data.
    #[allow(clippy::too_many_arguments)]
    pub fn with_fields(
        name: impl Into<String>,
        chart: Chart,
        g: MatrixField,
        jp: MatrixField,
        jm: MatrixField,
        h: ThreeForm,
        action: ExtendedAction,
        mu: MomentMap,
    ) -> Result<Self> {
        let n = chart.dim;
        let j = |second| {
            MatrixField::new(2 * n, 2 * n, field(GualtieriField { g: g.clone(), jp: jp.clone(), jm: jm.clone(), second }))
        };
        let (j1, j2) = (j(false)?, j(true)?);
        Self::assemble(name.into(), chart, g, jp, jm, j1, j2, h, action, mu)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        name: String,
        chart: Chart,
        g: MatrixField,
        jp: MatrixField,
        jm: MatrixField,
        j1: MatrixField,
        j2: MatrixField,
        h: ThreeForm,
        action: ExtendedAction,
        mu: MomentMap,
    ) -> Result<Self> {
        let n = chart.dim;
        if action.generators.len() != action.lie.dim || mu.components.len() != action.lie.dim {
            return Err(Error::ModelConstruction("generator, moment and Lie algebra dimensions differ".into()));
        }
        if action.generators.iter().any(|g| g.out_dim() != 2 * n) || mu.components.iter().any(|m| m.out_dim() != 1) {
            return Err(Error::ModelConstruction("generator or moment component has the wrong shape".into()));
        }
        if h.n != n {
            return Err(Error::ModelConstruction("three-form dimension differs from chart".into()));
        }
        Ok(HamiltonianModel { name, chart, g, jp, jm, j1, j2, h, action, mu, sample_radius: 1.0 })
    }

    pub fn with_sample_radius(mut self, r: f64) -> Self {
        self.sample_radius = r;
        self
    }

    pub fn n(&self) -> usize {
        self.chart.dim
    }

    pub fn generator(&self, a: usize) -> &Field {
        &self.action.generators[a]
    }

    /// `Y_a = −π(𝕁₁φ(ς_a))` as a vector field.
    pub fn y_field(&self, a: usize) -> Field {
        let jphi = self.j1.apply(self.generator(a).clone());
        let n = self.n();
        field(ConstMatApply { m: -RMat::identity(n, n), f: anchor(jphi, n) })
    }

    /// `X_a` as a vector field.
    pub fn x_field(&self, a: usize) -> Field {
        anchor(self.generator(a).clone(), self.n())
    }

    pub fn xi_field(&self, a: usize) -> Field {
        form_part(self.generator(a).clone(), self.n())
    }

    pub fn dmu_field(&self, a: usize) -> Field {
        self.mu.differential(a, self.n())
    }

    /// `L_Y f = df(Y)` for a scalar field `f`.
    pub fn lie_derivative_scalar(&self, f: Field, along: Field) -> Field {
        field(Contraction { form: exterior_derivative_field(f, self.n(), 0), vector: along })
    }

    /// `φ_ℂ(u + iv) = φ(u) − 𝕁₁φ(v)`.
    pub fn precomplexify(&self, u: &[f64], v: &[f64]) -> Field {
        let real = self.action.combination(u);
        let imag = self.j1.apply(self.action.combination(v));
        combine(vec![(1.0, real), (-1.0, imag)])
    }
}

/// Pointwise access to a Hamiltonian GK model; the only interface needed by
/// the algebraic checks.
pub trait PointwiseModel: Send + Sync {
    fn name(&self) -> &str;
    /// Real dimension of the tangent space in the model's frame.
    fn dim(&self) -> usize;
    fn lie(&self) -> &LieAlgebraData;
    fn check_point(&self, x: &[f64]) -> Result<()>;
    fn gk_at(&self, x: &[f64]) -> Result<GKPair>;
    /// Bihermitian data and the B-field relating the model's splitting to
    /// the metric one (`𝕁 = e^B 𝕁_metric e^{−B}`).
    fn bihermitian_at(&self, x: &[f64]) -> Result<(BiHermitianData, RMat)>;
    fn generator_at(&self, a: usize, x: &[f64]) -> Result<GElement>;
    fn mu_at(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn dmu_at(&self, a: usize, x: &[f64]) -> Result<Vec<f64>>;
    fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>>;
}

impl PointwiseModel for HamiltonianModel {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.n()
    }
    fn lie(&self) -> &LieAlgebraData {
        &self.action.lie
    }
    fn check_point(&self, x: &[f64]) -> Result<()> {
        self.chart.check(x)
    }
    fn gk_at(&self, x: &[f64]) -> Result<GKPair> {
        self.chart.check(x)?;
        Ok(GKPair { j1: LinearGC::unchecked(self.j1.eval(x)), j2: LinearGC::unchecked(self.j2.eval(x)) })
    }
    fn bihermitian_at(&self, x: &[f64]) -> Result<(BiHermitianData, RMat)> {
        self.chart.check(x)?;
        let n = self.n();
        Ok((BiHermitianData::new(self.g.eval(x), self.jp.eval(x), self.jm.eval(x))?, RMat::zeros(n, n)))
    }
    fn generator_at(&self, a: usize, x: &[f64]) -> Result<GElement> {
        self.chart.check(x)?;
        Ok(GElement::from_stacked(&self.generator(a).eval_f64(x)))
    }
    fn mu_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.chart.check(x)?;
        Ok(self.mu.eval(x))
    }
    fn dmu_at(&self, a: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.chart.check(x)?;
        Ok(self.dmu_field(a).eval_f64(x))
    }
    fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let r = self.sample_radius;
        crate::sampling::halton_filtered(self.n(), count, seed, -r, r, |p| self.chart.contains(p))
    }
}

fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn sup(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Residuals of the moment condition at a point.
#[derive(Clone, Debug, Serialize)]
pub struct MomentResidual {
    /// `𝕁₂φ(ς_a) − dμ_a`.
    pub direct: GElement,
    /// Real and imaginary parts of `𝕁₂v − iv`, `v = φ(ς_a) − i dμ_a`.
    pub eigen_re: GElement,
    pub eigen_im: GElement,
}

impl MomentResidual {
    pub fn sup_norm(&self) -> f64 {
        self.direct.sup_norm().max(self.eigen_re.sup_norm()).max(self.eigen_im.sup_norm())
    }
}

pub fn moment_residual(m: &dyn PointwiseModel, a: usize, x: &[f64]) -> Result<MomentResidual> {
    let pair = m.gk_at(x)?;
    let phi = m.generator_at(a, x)?;
    let dmu = GElement::covector(m.dmu_at(a, x)?);
    let j2 = &pair.j2.mat;
    let direct = phi.apply(j2).sub(&dmu);
    // v = φ − i dμ; 𝕁₂v − iv = (𝕁₂φ − dμ) + i(−𝕁₂dμ − φ).
    let eigen_re = phi.apply(j2).sub(&dmu);
    let eigen_im = dmu.apply(j2).add(&phi).scaled(-1.0);
    Ok(MomentResidual { direct, eigen_re, eigen_im })
}

/// `(J₊X⁺ − J₋X⁻, J₊X⁺ + g⁻¹dμ)` with `X± = X ± g⁻¹ξ`, in the metric
/// splitting.
pub fn bihermitian_residual(m: &dyn PointwiseModel, a: usize, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (b, bf) = m.bihermitian_at(x)?;
    let phi = m.generator_at(a, x)?;
    let xv = dvec(&phi.vec);
    let xi = dvec(&phi.form) - &bf * &xv;
    let gi = b.g_inv();
    let xp = &xv + &gi * &xi;
    let xm = &xv - &gi * &xi;
    let yp = &b.jp * &xp;
    let r1 = &yp - &b.jm * &xm;
    let r2 = &yp + &gi * dvec(&m.dmu_at(a, x)?);
    Ok((r1.iter().copied().collect(), r2.iter().copied().collect()))
}

/// `Y_a = J₊X_a⁺` from the bihermitian data.
pub fn y_at(m: &dyn PointwiseModel, a: usize, x: &[f64]) -> Result<Vec<f64>> {
    let (b, bf) = m.bihermitian_at(x)?;
    let phi = m.generator_at(a, x)?;
    let xv = dvec(&phi.vec);
    let xi = dvec(&phi.form) - &bf * &xv;
    Ok((&b.jp * (&xv + b.g_inv() * xi)).iter().copied().collect())
}

/// Sup-norm distances between `J₊X⁺`, `−g⁻¹dμ` and `−π(𝕁₁φ)`.
pub fn y_consistency(m: &dyn PointwiseModel, a: usize, x: &[f64]) -> Result<f64> {
    let y = dvec(&y_at(m, a, x)?);
    let (b, _) = m.bihermitian_at(x)?;
    let grad = -(b.g_inv() * dvec(&m.dmu_at(a, x)?));
    let pair = m.gk_at(x)?;
    let j1phi = m.generator_at(a, x)?.apply(&pair.j1.mat);
    let anchor_y = -dvec(&j1phi.vec);
    Ok(sup(&(&y - &grad)).max(sup(&(&y - anchor_y))))
}

/// The obstruction `S(ς_a, ς_b)` computed as the pairing `(𝕁₁φ_a, φ_b)` and
/// as the Poisson bracket `{μ_a, μ_b}` of the bihermitian `β₁`.
pub fn obstruction_s(m: &dyn PointwiseModel, a: usize, b: usize, x: &[f64]) -> Result<(f64, f64)> {
    let pair = m.gk_at(x)?;
    let pa = m.generator_at(a, x)?;
    let pb = m.generator_at(b, x)?;
    let s_pair = pairing(&pa.apply(&pair.j1.mat), &pb)?;
    let (bh, _) = m.bihermitian_at(x)?;
    let (beta1, _) = poisson_bivectors(&bh);
    let s_poisson = beta1.bracket(&m.dmu_at(a, x)?, &m.dmu_at(b, x)?);
    Ok((s_pair, s_poisson))
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongReport {
    pub max_s_pairing: f64,
    pub max_s_poisson: f64,
    pub max_disagreement: f64,
    /// Point where `|S|` is largest.
    pub witness: Option<Vec<f64>>,
    pub tol: f64,
    pub pass: bool,
}

pub fn strong_hamiltonian_test(m: &dyn PointwiseModel, sample: &[Vec<f64>], tol: f64) -> Result<StrongReport> {
    use rayon::prelude::*;
    let d = m.lie().dim;
    let per_point: Vec<(f64, f64, f64)> = sample
        .par_iter()
        .map(|x| {
            let mut acc = (0.0f64, 0.0f64, 0.0f64);
            for a in 0..d {
                for b in a + 1..d {
                    let (sp, sb) = obstruction_s(m, a, b, x)?;
                    acc.0 = acc.0.max(sp.abs());
                    acc.1 = acc.1.max(sb.abs());
                    acc.2 = acc.2.max((sp - sb).abs());
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rep = StrongReport { max_s_pairing: 0.0, max_s_poisson: 0.0, max_disagreement: 0.0, witness: None, tol, pass: true };
    for (x, (sp, sb, dis)) in sample.iter().zip(per_point) {
        if rep.witness.is_none() || sp > rep.max_s_pairing {
            rep.witness = Some(x.clone());
        }
        rep.max_s_pairing = rep.max_s_pairing.max(sp);
        rep.max_s_poisson = rep.max_s_poisson.max(sb);
        rep.max_disagreement = rep.max_disagreement.max(dis);
    }
    rep.pass = rep.max_s_pairing < tol && rep.max_s_poisson < tol;
    Ok(rep)
}

/// `‖[φ_a, φ_b] − Σ c^k_{ab} φ_k‖` at `x`.
pub fn homomorphism_residual(m: &HamiltonianModel, x: &[f64]) -> Result<f64> {
    let d = m.action.dim();
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            let br = crate::fields::courant_bracket(&m.chart, m.generator(a), m.generator(b), &m.h, x)?;
            let mut rhs = GElement::zero(m.n());
            for k in 0..d {
                let c = m.action.lie.c(a, b, k);
                if c != 0.0 {
                    rhs = rhs.add(&m.generator_at(k, x)?.scaled(c));
                }
            }
            worst = worst.max(br.sub(&rhs).sup_norm());
        }
    }
    Ok(worst)
}

/// `‖L_{X_a}μ_b − Σ c^k_{ab}μ_k‖` at `x`.
pub fn equivariance_residual(m: &HamiltonianModel, x: &[f64]) -> Result<f64> {
    m.chart.check(x)?;
    let d = m.action.dim();
    let mu = m.mu.eval(x);
    let mut worst = 0.0f64;
    for a in 0..d {
        let xa = dvec(&m.x_field(a).eval_f64(x));
        for b in 0..d {
            let lhs = dvec(&m.dmu_field(b).eval_f64(x)).dot(&xa);
            let rhs: f64 = (0..d).map(|k| m.action.lie.c(a, b, k) * mu[k]).sum();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// `max |ξ_a(X_b) + ξ_b(X_a)|` at `x`.
pub fn isotropy_residual(m: &dyn PointwiseModel, x: &[f64]) -> Result<f64> {
    let d = m.lie().dim;
    let gens = (0..d).map(|a| m.generator_at(a, x)).collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for a in &gens {
        for b in &gens {
            worst = worst.max(pairing(a, b)?.abs());
        }
    }
    Ok(worst)
}

/// `max |dξ_a − ι_{X_a}H|` over components at `x`.
pub fn curvature_residual(m: &HamiltonianModel, x: &[f64]) -> Result<f64> {
    let n = m.n();
    let mut worst = 0.0f64;
    for a in 0..m.action.dim() {
        let dxi = crate::fields::exterior_derivative(&m.chart, &m.xi_field(a), 1, x)?;
        let xa = m.x_field(a).eval_f64(x);
        let hv = if m.h.is_zero() { vec![0.0; n * n * n] } else { m.h.eval(x) };
        for j in 0..n {
            for k in 0..n {
                let ih: f64 = (0..n).map(|i| xa[i] * hv[i * n * n + j * n + k]).sum();
                worst = worst.max((dxi[j * n + k] - ih).abs());
            }
        }
    }
    Ok(worst)
}

/// Largest entry of the Lie derivative of `𝕁₁` and `𝕁₂` along the generators.
pub fn invariance_residual(m: &HamiltonianModel, x: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for a in 0..m.action.dim() {
        for j in [&m.j1, &m.j2] {
            let l = crate::fields::lie_derivative_gc(&m.chart, j, m.generator(a), &m.h, x)?;
            worst = worst.max(max_abs_r(&l));
        }
    }
    Ok(worst)
}

/// Lie derivative of `𝕁₁` along `−𝕁₁φ(ς_a)`.
pub fn y_invariance_residual(m: &HamiltonianModel, x: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for a in 0..m.action.dim() {
        let gen = m.precomplexify(&vec![0.0; m.action.dim()], &unit(m.action.dim(), a));
        let l = crate::fields::lie_derivative_gc(&m.chart, &m.j1, &gen, &m.h, x)?;
        worst = worst.max(max_abs_r(&l));
    }
    Ok(worst)
}

pub(crate) fn unit(d: usize, a: usize) -> Vec<f64> {
    (0..d).map(|k| if k == a { 1.0 } else { 0.0 }).collect()
}

/// Residuals of `[φ_a, 𝕁₁φ_b] = 𝕁₁[φ_a, φ_b]` and
/// `[𝕁₁φ_a, 𝕁₁φ_b] = −[φ_a, φ_b] + 𝕁₁dS(a, b)`.
pub fn bracket_identity_residuals(m: &HamiltonianModel, x: &[f64]) -> Result<(f64, f64)> {
    let d = m.action.dim();
    let j1 = m.j1.eval(x);
    let (mut r1, mut r2) = (0.0f64, 0.0f64);
    for a in 0..d {
        for b in 0..d {
            let pa = m.generator(a).clone();
            let pb = m.generator(b).clone();
            let ja = m.j1.apply(pa.clone());
            let jb = m.j1.apply(pb.clone());
            let base = crate::fields::courant_bracket(&m.chart, &pa, &pb, &m.h, x)?;
            let lhs1 = crate::fields::courant_bracket(&m.chart, &pa, &jb, &m.h, x)?;
            r1 = r1.max(lhs1.sub(&base.apply(&j1)).sup_norm());
            let s = field(crate::fields::PairingField { a: ja.clone(), b: pb.clone(), n: m.n() });
            let ds = GElement::covector(crate::fields::exterior_derivative(&m.chart, &s, 0, x)?);
            let lhs2 = crate::fields::courant_bracket(&m.chart, &ja, &jb, &m.h, x)?;
            r2 = r2.max(lhs2.add(&base).sub(&ds.apply(&j1)).sup_norm());
        }
    }
    Ok((r1, r2))
}

/// `π([𝕁₁φ_a, 𝕁₁df]) + β₁(d L_{Y_a} f)` for a scalar field `f`.
pub fn poisson_invariance_residual(m: &HamiltonianModel, f: &Field, x: &[f64]) -> Result<f64> {
    let n = m.n();
    let df = exterior_derivative_field(f.clone(), n, 0);
    let df_section = crate::fields::section(field(crate::fields::Constant::zeros(n)), df);
    let jdf = m.j1.apply(df_section);
    let (b, _) = m.bihermitian_at(x)?;
    let (beta1, _) = poisson_bivectors(&b);
    let mut worst = 0.0f64;
    for a in 0..m.action.dim() {
        let ja = m.j1.apply(m.generator(a).clone());
        let lhs = crate::fields::courant_bracket(&m.chart, &ja, &jdf, &m.h, x)?;
        let lyf = m.lie_derivative_scalar(f.clone(), m.y_field(a));
        let dlyf = crate::fields::exterior_derivative(&m.chart, &lyf, 0, x)?;
        let rhs = beta1.apply(&dlyf);
        for i in 0..n {
            worst = worst.max((lhs.vec[i] + rhs[i]).abs());
        }
    }
    Ok(worst)
}

/// Homomorphism defect of `φ_ℂ` on the basis `{ς_a, iς_a}` of `𝔤_ℂ`,
/// using the complexified structure constants.
pub fn precomplex_homomorphism_residual(m: &HamiltonianModel, x: &[f64]) -> Result<f64> {
    let d = m.action.dim();
    let zero = vec![0.0; d];
    // Basis element (u, v) represents u + iv.
    let basis: Vec<(Vec<f64>, Vec<f64>)> =
        (0..d).map(|a| (unit(d, a), zero.clone())).chain((0..d).map(|a| (zero.clone(), unit(d, a)))).collect();
    let lie = &m.action.lie;
    let mut worst = 0.0f64;
    for (u1, v1) in &basis {
        for (u2, v2) in &basis {
            let lhs = crate::fields::courant_bracket(
                &m.chart,
                &m.precomplexify(u1, v1),
                &m.precomplexify(u2, v2),
                &m.h,
                x,
            )?;
            // [u1 + iv1, u2 + iv2] = [u1,u2] − [v1,v2] + i([u1,v2] + [v1,u2]).
            let re: Vec<f64> = lie.bracket(u1, u2).iter().zip(lie.bracket(v1, v2)).map(|(p, q)| p - q).collect();
            let im: Vec<f64> = lie.bracket(u1, v2).iter().zip(lie.bracket(v1, u2)).map(|(p, q)| p + q).collect();
            let rhs = GElement::from_stacked(&m.precomplexify(&re, &im).eval_f64(x));
            worst = worst.max(lhs.sub(&rhs).sup_norm());
        }
    }
    Ok(worst)
}
