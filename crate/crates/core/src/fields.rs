//! Charts, differentiable fields and the calculus on `T ⊕ T*` in a single
//! coordinate chart.
//!
//! A [`Field`] is any type-erased [`Pointwise`] map. Sections of `T ⊕ T*`
//! are fields with `2n` outputs stacked as `[X; ξ]`. A `k`-form is a field
//! with `n^k` outputs holding its fully antisymmetric components
//! `f(e_{i₁}, …, e_{i_k})` in row-major order.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::autodiff::{FieldFn, Pointwise, Scalar};
use crate::error::{Error, Result};
use crate::glinalg::{GElement, RMat};

pub type Field = Arc<dyn Pointwise>;

pub fn field<F: Pointwise + 'static>(f: F) -> Field {
    Arc::new(f)
}

type DomainFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct Chart {
    pub name: String,
    pub dim: usize,
    domain: DomainFn,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl Chart {
    pub fn euclidean(dim: usize) -> Self {
        Chart { name: format!("R^{dim}"), dim, domain: Arc::new(|_| true) }
    }

    pub fn with_domain(name: impl Into<String>, dim: usize, domain: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Chart { name: name.into(), dim, domain: Arc::new(domain) }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.is_finite()) && (self.domain)(x)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: x.len() });
        }
        if !self.contains(x) {
            return Err(Error::Domain { chart: self.name.clone(), point: x.to_vec() });
        }
        Ok(())
    }
}

/// Closed or general three-form in antisymmetric components.
#[derive(Clone)]
pub struct ThreeForm {
    pub n: usize,
    pub field: Field,
    pub closed: bool,
    zero: bool,
}

impl ThreeForm {
    pub fn zero(n: usize) -> Self {
        ThreeForm { n, field: field(Constant::zeros(n * n * n)), closed: true, zero: true }
    }

    pub fn new(n: usize, field: Field, closed: bool) -> Result<Self> {
        if field.out_dim() != n * n * n {
            return Err(Error::Dimension { expected: n * n * n, found: field.out_dim() });
        }
        Ok(ThreeForm { n, field, closed, zero: false })
    }

    /// Constant multiple of `dx^a ∧ dx^b ∧ dx^c`.
    pub fn elementary(n: usize, idx: [usize; 3], c: f64) -> Self {
        let mut v = vec![0.0; n * n * n];
        let perms = [([0, 1, 2], 1.0), ([1, 2, 0], 1.0), ([2, 0, 1], 1.0), ([1, 0, 2], -1.0), ([0, 2, 1], -1.0), ([2, 1, 0], -1.0)];
        for (p, s) in perms {
            v[idx[p[0]] * n * n + idx[p[1]] * n + idx[p[2]]] = s * c;
        }
        ThreeForm { n, field: field(Constant::new(v)), closed: true, zero: c == 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.field.eval_f64(x)
    }

    /// Largest component of `dH` at `x`.
    pub fn closedness_residual(&self, x: &[f64]) -> f64 {
        if self.zero {
            return 0.0;
        }
        exterior_derivative_at(&self.field, self.n, 3, x).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Constant field.
#[derive(Clone, Debug)]
pub struct Constant {
    pub value: Vec<f64>,
}

impl Constant {
    pub fn new(value: Vec<f64>) -> Self {
        Constant { value }
    }
    pub fn zeros(m: usize) -> Self {
        Constant { value: vec![0.0; m] }
    }
    /// The constant section `e_i` of `T ⊕ T*`.
    pub fn frame(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; 2 * n];
        v[i] = 1.0;
        Constant { value: v }
    }
}

impl FieldFn for Constant {
    fn out_dim(&self) -> usize {
        self.value.len()
    }
    fn eval<S: Scalar>(&self, _x: &[S]) -> Vec<S> {
        self.value.iter().map(|&v| S::cst(v)).collect()
    }
}

/// `x ↦ A x + b`.
#[derive(Clone, Debug)]
pub struct Affine {
    pub a: RMat,
    pub b: Vec<f64>,
}

impl Affine {
    pub fn linear(a: RMat) -> Self {
        let b = vec![0.0; a.nrows()];
        Affine { a, b }
    }
}

impl FieldFn for Affine {
    fn out_dim(&self) -> usize {
        self.a.nrows()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        (0..self.a.nrows())
            .map(|i| {
                let mut acc = S::cst(self.b[i]);
                for (j, &xj) in x.iter().enumerate() {
                    let c = self.a[(i, j)];
                    if c != 0.0 {
                        acc += xj.scale(c);
                    }
                }
                acc
            })
            .collect()
    }
}

/// Scalar `xᵀ Q x + l·x + c`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub q: RMat,
    pub l: Vec<f64>,
    pub c: f64,
}

impl FieldFn for Quadratic {
    fn out_dim(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut acc = S::cst(self.c);
        for i in 0..x.len() {
            if self.l[i] != 0.0 {
                acc += x[i].scale(self.l[i]);
            }
            for j in 0..x.len() {
                let c = self.q[(i, j)];
                if c != 0.0 {
                    acc += (x[i] * x[j]).scale(c);
                }
            }
        }
        vec![acc]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Vector of polynomials in the chart coordinates.
#[derive(Clone, Debug)]
pub struct Polynomial {
    pub outputs: Vec<Vec<Monomial>>,
}

impl Polynomial {
    pub fn scalar(terms: Vec<Monomial>) -> Self {
        Polynomial { outputs: vec![terms] }
    }

    pub fn random<R: rand::Rng>(n: usize, degree: u32, terms: usize, rng: &mut R) -> Self {
        let t = (0..terms)
            .map(|_| {
                let mut powers = vec![0u32; n];
                let total = rng.gen_range(1..=degree);
                for _ in 0..total {
                    powers[rng.gen_range(0..n)] += 1;
                }
                Monomial { coef: rng.gen_range(-1.0..1.0), powers }
            })
            .collect();
        Polynomial::scalar(t)
    }
}

impl FieldFn for Polynomial {
    fn out_dim(&self) -> usize {
        self.outputs.len()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.outputs
            .iter()
            .map(|terms| {
                let mut acc = S::zero();
                for m in terms {
                    let mut t = S::cst(m.coef);
                    for (xi, &p) in x.iter().zip(&m.powers) {
                        for _ in 0..p {
                            t *= *xi;
                        }
                    }
                    acc += t;
                }
                acc
            })
            .collect()
    }
}

/// Constant matrix applied to a field.
#[derive(Clone)]
pub struct ConstMatApply {
    pub m: RMat,
    pub f: Field,
}

impl FieldFn for ConstMatApply {
    fn out_dim(&self) -> usize {
        self.m.nrows()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let v = S::call(self.f.as_ref(), x);
        mat_vec(&self.m, &v)
    }
}

fn mat_vec<S: Scalar>(m: &RMat, v: &[S]) -> Vec<S> {
    (0..m.nrows())
        .map(|i| {
            let mut acc = S::zero();
            for (j, &vj) in v.iter().enumerate() {
                let c = m[(i, j)];
                if c != 0.0 {
                    acc += vj.scale(c);
                }
            }
            acc
        })
        .collect()
}

/// Matrix-valued field in row-major components.
#[derive(Clone)]
pub struct MatrixField {
    pub rows: usize,
    pub cols: usize,
    pub field: Field,
}

impl MatrixField {
    pub fn constant(m: &RMat) -> Self {
        let v = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        MatrixField { rows: m.nrows(), cols: m.ncols(), field: field(Constant::new(v)) }
    }

    pub fn new(rows: usize, cols: usize, field: Field) -> Result<Self> {
        if field.out_dim() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, found: field.out_dim() });
        }
        Ok(MatrixField { rows, cols, field })
    }

    pub fn eval(&self, x: &[f64]) -> RMat {
        RMat::from_row_slice(self.rows, self.cols, &self.field.eval_f64(x))
    }

    /// The field `x ↦ M(x) f(x)`.
    pub fn apply(&self, f: Field) -> Field {
        field(MatApply { m: self.clone(), f })
    }
}

#[derive(Clone)]
pub struct MatApply {
    pub m: MatrixField,
    pub f: Field,
}

impl FieldFn for MatApply {
    fn out_dim(&self) -> usize {
        self.m.rows
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let m = S::call(self.m.field.as_ref(), x);
        let v = S::call(self.f.as_ref(), x);
        (0..self.m.rows)
            .map(|i| {
                let mut acc = S::zero();
                for j in 0..self.m.cols {
                    acc += m[i * self.m.cols + j] * v[j];
                }
                acc
            })
            .collect()
    }
}

/// `Σ c_k f_k`.
#[derive(Clone)]
pub struct LinearCombination {
    pub terms: Vec<(f64, Field)>,
}

impl FieldFn for LinearCombination {
    fn out_dim(&self) -> usize {
        self.terms[0].1.out_dim()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut acc = vec![S::zero(); self.terms[0].1.out_dim()];
        for (c, f) in &self.terms {
            for (a, v) in acc.iter_mut().zip(S::call(f.as_ref(), x)) {
                *a += v.scale(*c);
            }
        }
        acc
    }
}

pub fn combine(terms: Vec<(f64, Field)>) -> Field {
    field(LinearCombination { terms })
}

/// Scalar field times a field.
#[derive(Clone)]
pub struct ScalarTimes {
    pub s: Field,
    pub f: Field,
}

impl FieldFn for ScalarTimes {
    fn out_dim(&self) -> usize {
        self.f.out_dim()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let s = S::call(self.s.as_ref(), x)[0];
        S::call(self.f.as_ref(), x).into_iter().map(|v| s * v).collect()
    }
}

/// Outputs of several fields concatenated.
#[derive(Clone)]
pub struct Concat {
    pub parts: Vec<Field>,
}

impl FieldFn for Concat {
    fn out_dim(&self) -> usize {
        self.parts.iter().map(|p| p.out_dim()).sum()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.parts.iter().flat_map(|p| S::call(p.as_ref(), x)).collect()
    }
}

/// The section `X + ξ` from a vector field and a one-form.
pub fn section(vector: Field, form: Field) -> Field {
    field(Concat { parts: vec![vector, form] })
}

/// Components `start..start + len` of a field.
#[derive(Clone)]
pub struct Slice {
    pub f: Field,
    pub start: usize,
    pub len: usize,
}

impl FieldFn for Slice {
    fn out_dim(&self) -> usize {
        self.len
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        S::call(self.f.as_ref(), x)[self.start..self.start + self.len].to_vec()
    }
}

/// Tangent part of a section with `n`-dimensional base.
pub fn anchor(s: Field, n: usize) -> Field {
    field(Slice { f: s, start: 0, len: n })
}

pub fn form_part(s: Field, n: usize) -> Field {
    field(Slice { f: s, start: n, len: n })
}

fn flat_index(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

fn exterior_derivative_generic<S: Scalar>(f: &dyn Pointwise, n: usize, k: usize, x: &[S]) -> Vec<S> {
    let (_, jac) = S::jet(f, x);
    let total = n.pow(k as u32 + 1);
    let mut out = vec![S::zero(); total];
    let mut idx = vec![0usize; k + 1];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut r = flat;
        for p in (0..=k).rev() {
            idx[p] = r % n;
            r /= n;
        }
        let mut acc = S::zero();
        for a in 0..=k {
            let rest: Vec<usize> = idx.iter().enumerate().filter(|&(p, _)| p != a).map(|(_, &v)| v).collect();
            let term = jac[flat_index(&rest, n)][idx[a]];
            if a % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        *slot = acc;
    }
    out
}

/// The `(k+1)`-form `df` of a `k`-form field.
#[derive(Clone)]
pub struct ExteriorDerivative {
    pub f: Field,
    pub n: usize,
    pub k: usize,
}

impl FieldFn for ExteriorDerivative {
    fn out_dim(&self) -> usize {
        self.n.pow(self.k as u32 + 1)
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        exterior_derivative_generic(self.f.as_ref(), self.n, self.k, x)
    }
}

pub fn exterior_derivative_field(f: Field, n: usize, k: usize) -> Field {
    field(ExteriorDerivative { f, n, k })
}

fn exterior_derivative_at(f: &Field, n: usize, k: usize, x: &[f64]) -> Vec<f64> {
    exterior_derivative_generic(f.as_ref(), n, k, x)
}

/// Value of `df` at `x`, for a `k`-form field `f` on the chart.
pub fn exterior_derivative(chart: &Chart, f: &Field, k: usize, x: &[f64]) -> Result<Vec<f64>> {
    chart.check(x)?;
    let n = chart.dim;
    if k + 1 > n {
        return Err(Error::Input(format!("cannot differentiate a {k}-form on a {n}-dimensional chart")));
    }
    if f.out_dim() != n.pow(k as u32) {
        return Err(Error::Dimension { expected: n.pow(k as u32), found: f.out_dim() });
    }
    Ok(exterior_derivative_at(f, n, k, x))
}

/// `ι_X α` for a vector field and a one-form.
#[derive(Clone)]
pub struct Contraction {
    pub form: Field,
    pub vector: Field,
}

impl FieldFn for Contraction {
    fn out_dim(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let a = S::call(self.form.as_ref(), x);
        let v = S::call(self.vector.as_ref(), x);
        let mut acc = S::zero();
        for (p, q) in a.into_iter().zip(v) {
            acc += p * q;
        }
        vec![acc]
    }
}

/// The pairing `ξ(Y) + η(X)` of two sections.
#[derive(Clone)]
pub struct PairingField {
    pub a: Field,
    pub b: Field,
    pub n: usize,
}

impl FieldFn for PairingField {
    fn out_dim(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let a = S::call(self.a.as_ref(), x);
        let b = S::call(self.b.as_ref(), x);
        let n = self.n;
        let mut acc = S::zero();
        for i in 0..n {
            acc += a[n + i] * b[i] + b[n + i] * a[i];
        }
        vec![acc]
    }
}

fn lie_bracket_generic<S: Scalar>(a: &dyn Pointwise, b: &dyn Pointwise, n: usize, x: &[S]) -> Vec<S> {
    let (va, ja) = S::jet(a, x);
    let (vb, jb) = S::jet(b, x);
    (0..n)
        .map(|i| {
            let mut acc = S::zero();
            for j in 0..n {
                acc += va[j] * jb[i][j] - vb[j] * ja[i][j];
            }
            acc
        })
        .collect()
}

fn courant_generic<S: Scalar>(a: &dyn Pointwise, b: &dyn Pointwise, h: &ThreeForm, n: usize, x: &[S]) -> Vec<S> {
    let (va, ja) = S::jet(a, x);
    let (vb, jb) = S::jet(b, x);
    let mut out = vec![S::zero(); 2 * n];
    for i in 0..n {
        let mut t = S::zero();
        let mut f = S::zero();
        for j in 0..n {
            let (xj, yj, eta_j) = (va[j], vb[j], vb[n + j]);
            t += xj * jb[i][j] - yj * ja[i][j];
            // L_X η
            f += xj * jb[n + i][j] + eta_j * ja[j][i];
            // − ι_Y dξ
            f -= yj * (ja[n + i][j] - ja[n + j][i]);
        }
        out[i] = t;
        out[n + i] = f;
    }
    if !h.is_zero() {
        let hv = S::call(h.field.as_ref(), x);
        for i in 0..n {
            let mut acc = S::zero();
            for j in 0..n {
                for k in 0..n {
                    acc += hv[j * n * n + k * n + i] * va[j] * vb[k];
                }
            }
            out[n + i] += acc;
        }
    }
    out
}

/// The twisted Courant (Dorfman) bracket of two sections, as a section.
#[derive(Clone)]
pub struct CourantField {
    pub a: Field,
    pub b: Field,
    pub h: ThreeForm,
}

impl FieldFn for CourantField {
    fn out_dim(&self) -> usize {
        2 * self.h.n
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        courant_generic(self.a.as_ref(), self.b.as_ref(), &self.h, self.h.n, x)
    }
}

pub fn bracket_field(a: Field, b: Field, h: &ThreeForm) -> Field {
    field(CourantField { a, b, h: h.clone() })
}

/// Lie bracket of vector fields, as a field.
#[derive(Clone)]
pub struct LieBracketField {
    pub x: Field,
    pub y: Field,
    pub n: usize,
}

impl FieldFn for LieBracketField {
    fn out_dim(&self) -> usize {
        self.n
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        lie_bracket_generic(self.x.as_ref(), self.y.as_ref(), self.n, x)
    }
}

fn check_section(s: &Field, n: usize) -> Result<()> {
    if s.out_dim() != 2 * n {
        return Err(Error::Dimension { expected: 2 * n, found: s.out_dim() });
    }
    Ok(())
}

pub fn courant_bracket(chart: &Chart, a: &Field, b: &Field, h: &ThreeForm, x: &[f64]) -> Result<GElement> {
    chart.check(x)?;
    let n = chart.dim;
    check_section(a, n)?;
    check_section(b, n)?;
    Ok(GElement::from_stacked(&courant_generic(a.as_ref(), b.as_ref(), h, n, x)))
}

/// `|[a, b] + [b, a] − d⟨a, b⟩|` at `x` (sup over components).
pub fn non_skew_residual(chart: &Chart, a: &Field, b: &Field, h: &ThreeForm, x: &[f64]) -> Result<f64> {
    let n = chart.dim;
    let sym = courant_bracket(chart, a, b, h, x)?.add(&courant_bracket(chart, b, a, h, x)?);
    let pair = field(PairingField { a: a.clone(), b: b.clone(), n });
    let dp = GElement::covector(exterior_derivative(chart, &pair, 0, x)?);
    Ok(sym.sub(&dp).sup_norm())
}

pub fn lie_bracket(chart: &Chart, x_field: &Field, y_field: &Field, x: &[f64]) -> Result<Vec<f64>> {
    chart.check(x)?;
    Ok(lie_bracket_generic(x_field.as_ref(), y_field.as_ref(), chart.dim, x))
}

pub fn eval_section(chart: &Chart, s: &Field, x: &[f64]) -> Result<GElement> {
    chart.check(x)?;
    check_section(s, chart.dim)?;
    Ok(GElement::from_stacked(&s.eval_f64(x)))
}

/// `[𝕁A, 𝕁B] − 𝕁[𝕁A, B] − 𝕁[A, 𝕁B] − [A, B]` at `x`.
pub fn integrability_defect(chart: &Chart, j: &MatrixField, a: &Field, b: &Field, h: &ThreeForm, x: &[f64]) -> Result<GElement> {
    chart.check(x)?;
    let n = chart.dim;
    check_section(a, n)?;
    check_section(b, n)?;
    let ja = j.apply(a.clone());
    let jb = j.apply(b.clone());
    let br = |p: &Field, q: &Field| DVector::from_vec(courant_generic(p.as_ref(), q.as_ref(), h, n, x));
    let jm = j.eval(x);
    let d = br(&ja, &jb) - &jm * br(&ja, b) - &jm * br(a, &jb) - br(a, b);
    Ok(GElement::from_stacked(d.as_slice()))
}

/// Largest integrability defect over all pairs of constant coordinate
/// frame sections.
pub fn frame_integrability_defect(chart: &Chart, j: &MatrixField, h: &ThreeForm, x: &[f64]) -> Result<f64> {
    let n = chart.dim;
    let frames: Vec<Field> = (0..2 * n).map(|i| field(Constant::frame(n, i))).collect();
    let mut worst = 0.0f64;
    for p in 0..2 * n {
        for q in p + 1..2 * n {
            worst = worst.max(integrability_defect(chart, j, &frames[p], &frames[q], h, x)?.sup_norm());
        }
    }
    Ok(worst)
}

/// Matrix of `B ↦ [gen, 𝕁B] − 𝕁[gen, B]` at `x`; zero iff the
/// infinitesimal automorphism generated by `gen` preserves `𝕁` there.
pub fn lie_derivative_gc(chart: &Chart, j: &MatrixField, gen: &Field, h: &ThreeForm, x: &[f64]) -> Result<RMat> {
    chart.check(x)?;
    let n = chart.dim;
    check_section(gen, n)?;
    let jm = j.eval(x);
    let mut out = RMat::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        let e: Field = field(Constant::frame(n, i));
        let je = j.apply(e.clone());
        let a = DVector::from_vec(courant_generic(gen.as_ref(), je.as_ref(), h, n, x));
        let b = DVector::from_vec(courant_generic(gen.as_ref(), e.as_ref(), h, n, x));
        out.set_column(i, &(a - &jm * b));
    }
    Ok(out)
}

/// Central-difference Jacobian with relative step `h·(1 + |x_j|)`, used as
/// an independent cross-check of the dual-number path.
pub fn finite_difference_jacobian(f: &dyn Pointwise, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let m = f.out_dim();
    let mut jac = vec![vec![0.0; x.len()]; m];
    for j in 0..x.len() {
        let step = h * (1.0 + x[j].abs());
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += step;
        xm[j] -= step;
        let fp = f.eval_f64(&xp);
        let fm = f.eval_f64(&xm);
        for i in 0..m {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    jac
}

/// Map matrix `X ↦ ι_X ω` of a two-form given in antisymmetric components.
pub fn two_form_map(components: &[f64], n: usize) -> RMat {
    RMat::from_fn(n, n, |i, j| components[j * n + i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glinalg::LinearGC;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_section<R: Rng>(n: usize, rng: &mut R) -> Field {
        let outputs = (0..2 * n)
            .map(|_| Polynomial::random(n, 3, 4, rng).outputs.remove(0))
            .collect();
        field(Polynomial { outputs })
    }

    fn random_point<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn textbook_differentials() {
        let c = Chart::euclidean(2);
        let f = field(Polynomial { outputs: vec![vec![], vec![Monomial { coef: 1.0, powers: vec![1, 0] }]] });
        let d = exterior_derivative(&c, &f, 1, &[0.4, -2.0]).unwrap();
        assert_eq!(d, vec![0.0, 1.0, -1.0, 0.0]);
        let k = field(Constant::new(vec![3.0, 4.0]));
        assert!(exterior_derivative(&c, &k, 1, &[0.1, 0.2]).unwrap().iter().all(|v| *v == 0.0));
        assert!(exterior_derivative(&c, &k, 2, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn d_squared_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 4;
        let f: Field = field(Polynomial::random(n, 4, 6, &mut rng));
        let df = exterior_derivative_field(f, n, 0);
        let c = Chart::euclidean(n);
        let ddf = exterior_derivative(&c, &df, 1, &random_point(n, &mut rng)).unwrap();
        assert!(ddf.iter().all(|v| v.abs() < 1e-12));
        let alpha = field(Polynomial { outputs: (0..n).map(|_| Polynomial::random(n, 3, 3, &mut rng).outputs.remove(0)).collect() });
        let da = exterior_derivative_field(alpha, n, 1);
        let dda = exterior_derivative(&c, &da, 2, &random_point(n, &mut rng)).unwrap();
        assert!(dda.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn duals_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_section(3, &mut rng);
        for _ in 0..5 {
            let x = random_point(3, &mut rng);
            let (_, jac) = f64::jet(s.as_ref(), &x);
            let fd = finite_difference_jacobian(s.as_ref(), &x, 1e-5);
            for i in 0..6 {
                for j in 0..3 {
                    assert!((jac[i][j] - fd[i][j]).abs() <= 1e-6 * (1.0 + jac[i][j].abs()));
                }
            }
        }
    }

    #[test]
    fn bracket_non_skewness_and_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 3;
        let c = Chart::euclidean(n);
        let h = ThreeForm::elementary(n, [0, 1, 2], 0.7);
        for _ in 0..5 {
            let a = random_section(n, &mut rng);
            let b = random_section(n, &mut rng);
            let x = random_point(n, &mut rng);
            let ab = courant_bracket(&c, &a, &b, &h, &x).unwrap();
            let ba = courant_bracket(&c, &b, &a, &h, &x).unwrap();
            let pair = field(PairingField { a: a.clone(), b: b.clone(), n });
            let dp = exterior_derivative(&c, &pair, 0, &x).unwrap();
            let sym = ab.add(&ba);
            assert!(sym.vec.iter().all(|v| v.abs() < 1e-10));
            for i in 0..n {
                assert!((sym.form[i] - dp[i]).abs() < 1e-10);
            }
            let lb = lie_bracket(&c, &anchor(a.clone(), n), &anchor(b.clone(), n), &x).unwrap();
            for i in 0..n {
                assert!((lb[i] - ab.vec[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dorfman_jacobi_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 3;
        let c = Chart::euclidean(n);
        let h = ThreeForm::zero(n);
        let a = random_section(n, &mut rng);
        let b = random_section(n, &mut rng);
        let cc = random_section(n, &mut rng);
        let x = random_point(n, &mut rng);
        let lhs = courant_bracket(&c, &a, &bracket_field(b.clone(), cc.clone(), &h), &h, &x).unwrap();
        let r1 = courant_bracket(&c, &bracket_field(a.clone(), b.clone(), &h), &cc, &h, &x).unwrap();
        let r2 = courant_bracket(&c, &b, &bracket_field(a.clone(), cc.clone(), &h), &h, &x).unwrap();
        assert!(lhs.sub(&r1.add(&r2)).sup_norm() < 1e-9);
    }

    #[test]
    fn constant_structures_are_integrable() {
        let n = 4;
        let c = Chart::euclidean(n);
        let mut j = RMat::zeros(n, n);
        j[(1, 0)] = 1.0;
        j[(0, 1)] = -1.0;
        j[(3, 2)] = 1.0;
        j[(2, 3)] = -1.0;
        let gc = LinearGC::from_complex(&j).unwrap();
        let jf = MatrixField::constant(&gc.mat);
        let d = frame_integrability_defect(&c, &jf, &ThreeForm::zero(n), &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(d, 0.0);
        let zero: Field = field(Constant::zeros(2 * n));
        let l = lie_derivative_gc(&c, &jf, &zero, &ThreeForm::zero(n), &[0.0; 4]).unwrap();
        assert_eq!(crate::glinalg::max_abs_r(&l), 0.0);
    }

    #[test]
    fn non_closed_symplectic_form_is_not_integrable() {
        let c = Chart::euclidean(4);
        let jf = crate::models::non_closed_symplectic();
        let x = [0.1, -0.3, 0.2, 0.5];
        LinearGC::new(jf.eval(&x)).unwrap();
        let d = frame_integrability_defect(&c, &jf, &ThreeForm::zero(4), &x).unwrap();
        assert!(d > 1e-2, "defect {d}");
    }

    #[test]
    fn domain_is_enforced() {
        let c = Chart::with_domain("ball", 2, |x| x[0] * x[0] + x[1] * x[1] < 1.0);
        let s: Field = field(Constant::zeros(4));
        assert!(matches!(courant_bracket(&c, &s, &s, &ThreeForm::zero(2), &[2.0, 0.0]), Err(Error::Domain { .. })));
        assert!(matches!(eval_section(&c, &s, &[0.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn closedness_of_three_forms() {
        let h = ThreeForm::elementary(4, [0, 1, 3], 2.0);
        assert_eq!(h.eval(&[0.0; 4])[4 + 3], 2.0);
        assert!(h.closedness_residual(&[0.3, 0.1, 0.0, 0.2]) < 1e-14);
    }
}
