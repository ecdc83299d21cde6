//! Pointwise linear algebra of `V ⊕ V*` with the split pairing
//! `(X+ξ, Y+η) = ξ(Y) + η(X)`.
//!
//! Vectors of the doubled space are stored stacked, tangent part first:
//! `[X; ξ]`. Two-forms enter block matrices as the matrix of `X ↦ ι_X B`.
//! Subspaces keep an orthonormal basis (Hermitian inner product) and are
//! re-orthonormalized after every construction.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Relative cutoff: singular values below `RANK_TOL × σ_max` count as zero.
pub const RANK_TOL: f64 = 1e-9;
/// Two subspaces are equal when their largest principal angle is below this.
pub const ANGLE_TOL: f64 = 1e-8;

/// A point of `V ⊕ V*`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct GElement {
    pub vec: Vec<f64>,
    pub form: Vec<f64>,
}

impl GElement {
    pub fn new(vec: Vec<f64>, form: Vec<f64>) -> Result<Self> {
        if vec.len() != form.len() {
            return Err(Error::Dimension { expected: vec.len(), found: form.len() });
        }
        Ok(GElement { vec, form })
    }

    pub fn zero(n: usize) -> Self {
        GElement { vec: vec![0.0; n], form: vec![0.0; n] }
    }

    pub fn vector(vec: Vec<f64>) -> Self {
        let n = vec.len();
        GElement { vec, form: vec![0.0; n] }
    }

    pub fn covector(form: Vec<f64>) -> Self {
        let n = form.len();
        GElement { vec: vec![0.0; n], form }
    }

    /// Split a stacked `[X; ξ]` slice.
    pub fn from_stacked(s: &[f64]) -> Self {
        let n = s.len() / 2;
        GElement { vec: s[..n].to_vec(), form: s[n..].to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.dim(), self.vec.iter().chain(self.form.iter()).copied())
    }

    pub fn sup_norm(&self) -> f64 {
        self.vec.iter().chain(self.form.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, o: &GElement) -> GElement {
        GElement {
            vec: self.vec.iter().zip(&o.vec).map(|(a, b)| a - b).collect(),
            form: self.form.iter().zip(&o.form).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, o: &GElement) -> GElement {
        GElement {
            vec: self.vec.iter().zip(&o.vec).map(|(a, b)| a + b).collect(),
            form: self.form.iter().zip(&o.form).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> GElement {
        GElement {
            vec: self.vec.iter().map(|a| a * s).collect(),
            form: self.form.iter().map(|a| a * s).collect(),
        }
    }

    pub fn apply(&self, m: &RMat) -> GElement {
        GElement::from_stacked((m * self.stacked()).as_slice())
    }
}

/// `ξ(Y) + η(X)` for `a = X+ξ`, `b = Y+η`.
pub fn pairing(a: &GElement, b: &GElement) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), found: b.dim() });
    }
    let d1: f64 = a.form.iter().zip(&b.vec).map(|(x, y)| x * y).sum();
    let d2: f64 = b.form.iter().zip(&a.vec).map(|(x, y)| x * y).sum();
    Ok(d1 + d2)
}

/// Gram matrix `[[0, 1], [1, 0]]` of the pairing in the stacked basis.
pub fn pairing_matrix(n: usize) -> RMat {
    let mut p = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        p[(i, n + i)] = 1.0;
        p[(n + i, i)] = 1.0;
    }
    p
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn max_abs_r(m: &RMat) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.norm()))
}

fn singular_values<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Singular values of a complex matrix, descending.
pub fn singular_spectrum(m: &CMat) -> Vec<f64> {
    singular_values(m)
}

/// Singular values of a real matrix, descending.
pub fn singular_spectrum_r(m: &RMat) -> Vec<f64> {
    singular_values(m)
}

/// Rank with respect to the relative cutoff `rel_tol × σ_max`.
pub fn numerical_rank(svals: &[f64], rel_tol: f64) -> usize {
    let smax = svals.iter().fold(0.0_f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0;
    }
    svals.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Orthonormal basis of the column space, plus the singular values.
pub fn orth<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, rel_tol: f64) -> (DMatrix<T>, Vec<f64>) {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return (DMatrix::zeros(rows, 0), Vec::new());
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.unwrap();
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = s.iter().fold(0.0_f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..s.len()).filter(|&i| smax > 0.0 && s[i] > rel_tol * smax).collect();
    let mut basis = DMatrix::zeros(rows, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &u.column(i));
    }
    let mut sorted = s;
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (basis, sorted)
}

/// Orthonormal basis of `{x : m·x = 0}`. Relative cutoff against `σ_max(m)`;
/// a zero matrix has the whole space as kernel.
pub fn null_space<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, rel_tol: f64) -> DMatrix<T> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    let rows = m.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.unwrap();
    let s = svd.singular_values;
    let smax = s.iter().fold(0.0_f64, |a, &b| a.max(b));
    let idx: Vec<usize> = (0..s.len()).filter(|&i| smax == 0.0 || s[i] <= rel_tol * smax).collect();
    let mut out = DMatrix::zeros(cols, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        for r in 0..cols {
            out[(r, c)] = vt[(i, r)].clone().conjugate();
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum FieldKind {
    Real,
    Complex,
}

/// A column-spanned subspace of `V ⊕ V*` or of its complexification.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    /// Orthonormal columns (ambient × dim).
    pub basis: CMat,
    pub field: FieldKind,
    pub rank_tol: f64,
    /// Singular values of the columns the subspace was built from.
    pub singular_values: Vec<f64>,
}

impl SubspaceBasis {
    /// Span of the given columns, which must be linearly independent.
    pub fn from_columns(cols: &CMat, field: FieldKind) -> Result<Self> {
        let sv = singular_values(cols);
        let smax = sv.first().copied().unwrap_or(0.0);
        if let Some(&smin) = sv.last() {
            if smin <= RANK_TOL * smax || smax == 0.0 {
                return Err(Error::Degenerate { sigma: smin, tol: RANK_TOL * smax });
            }
        }
        Ok(Self::span(cols, field))
    }

    /// Span of arbitrary columns (rank revealing).
    pub fn span(cols: &CMat, field: FieldKind) -> Self {
        let (basis, sv) = orth(cols, RANK_TOL);
        let basis = if field == FieldKind::Real { basis.map(|z| Complex64::new(z.re, 0.0)) } else { basis };
        SubspaceBasis { basis, field, rank_tol: RANK_TOL, singular_values: sv }
    }

    pub fn span_real(cols: &RMat) -> Self {
        let (basis, sv) = orth(cols, RANK_TOL);
        SubspaceBasis { basis: to_complex(&basis), field: FieldKind::Real, rank_tol: RANK_TOL, singular_values: sv }
    }

    pub fn from_elements(els: &[GElement]) -> Result<Self> {
        let n2 = els.first().map(|e| 2 * e.dim()).unwrap_or(0);
        let mut m = RMat::zeros(n2, els.len());
        for (j, e) in els.iter().enumerate() {
            m.set_column(j, &e.stacked());
        }
        Self::from_columns(&to_complex(&m), FieldKind::Real)
    }

    pub fn zero(ambient: usize) -> Self {
        SubspaceBasis { basis: CMat::zeros(ambient, 0), field: FieldKind::Real, rank_tol: RANK_TOL, singular_values: vec![] }
    }

    pub fn full(ambient: usize) -> Self {
        SubspaceBasis {
            basis: CMat::identity(ambient, ambient),
            field: FieldKind::Real,
            rank_tol: RANK_TOL,
            singular_values: vec![1.0; ambient],
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    fn real_basis(&self) -> RMat {
        self.basis.map(|z| z.re)
    }

    fn is_real(&self) -> bool {
        self.field == FieldKind::Real
    }

    pub fn conj(&self) -> Self {
        SubspaceBasis { basis: self.basis.map(|z| z.conj()), ..self.clone() }
    }

    pub fn complexified(&self) -> Self {
        SubspaceBasis { field: FieldKind::Complex, ..self.clone() }
    }

    pub fn sum(&self, other: &Self) -> Self {
        let mut m = CMat::zeros(self.ambient(), self.dim() + other.dim());
        m.view_mut((0, 0), (self.ambient(), self.dim())).copy_from(&self.basis);
        m.view_mut((0, self.dim()), (self.ambient(), other.dim())).copy_from(&other.basis);
        let field = if self.is_real() && other.is_real() { FieldKind::Real } else { FieldKind::Complex };
        if field == FieldKind::Real {
            Self::span_real(&m.map(|z| z.re))
        } else {
            Self::span(&m, field)
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (p, q) = (self.dim(), other.dim());
        if p == 0 || q == 0 {
            return Self::zero(self.ambient());
        }
        if self.is_real() && other.is_real() {
            let (a, b) = (self.real_basis(), other.real_basis());
            let mut m = RMat::zeros(self.ambient(), p + q);
            m.view_mut((0, 0), (self.ambient(), p)).copy_from(&a);
            m.view_mut((0, p), (self.ambient(), q)).copy_from(&(-b));
            let ns = null_space(&m, RANK_TOL);
            let coeffs = ns.rows(0, p).into_owned();
            return Self::span_real(&(a * coeffs));
        }
        let (a, b) = (&self.basis, &other.basis);
        let mut m = CMat::zeros(self.ambient(), p + q);
        m.view_mut((0, 0), (self.ambient(), p)).copy_from(a);
        m.view_mut((0, p), (self.ambient(), q)).copy_from(&(-b));
        let ns = null_space(&m, RANK_TOL);
        let coeffs = ns.rows(0, p).into_owned();
        Self::span(&(a * coeffs), FieldKind::Complex)
    }

    /// Complement with respect to the Hermitian (Euclidean) inner product.
    pub fn hermitian_complement(&self) -> Self {
        if self.is_real() {
            let ns = null_space(&self.real_basis().transpose(), RANK_TOL);
            let ns = if self.dim() == 0 { RMat::identity(self.ambient(), self.ambient()) } else { ns };
            return Self::span_real(&ns);
        }
        let ns = if self.dim() == 0 { CMat::identity(self.ambient(), self.ambient()) } else { null_space(&self.basis.adjoint(), RANK_TOL) };
        Self::span(&ns, FieldKind::Complex)
    }

    /// Image under a real linear map of the ambient space.
    pub fn image(&self, m: &RMat) -> Self {
        let img = to_complex(m) * &self.basis;
        if self.is_real() {
            Self::span_real(&img.map(|z| z.re))
        } else {
            Self::span(&img, FieldKind::Complex)
        }
    }

    /// Span of the tangent parts (first `n` coordinates).
    pub fn tangent_projection(&self, n: usize) -> Self {
        let rows = self.basis.rows(0, n).into_owned();
        if self.is_real() {
            Self::span_real(&rows.map(|z| z.re))
        } else {
            Self::span(&rows, FieldKind::Complex)
        }
    }

    /// Orthogonal projector onto the subspace (Hermitian).
    pub fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }

    /// Largest distance `‖(1 − P)v‖` over the orthonormal basis of `other`.
    pub fn containment_residual(&self, other: &Self) -> f64 {
        if other.dim() == 0 {
            return 0.0;
        }
        let r = &other.basis - self.projector() * &other.basis;
        singular_values(&r).first().copied().unwrap_or(0.0)
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.containment_residual(other) < ANGLE_TOL
    }

    /// Largest principal angle in radians, computed from sines for accuracy
    /// at small angles. Subspaces of different dimension are at `π/2`.
    pub fn max_principal_angle(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() || self.ambient() != other.ambient() {
            return std::f64::consts::FRAC_PI_2;
        }
        let s = self.containment_residual(other).min(1.0);
        s.asin()
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.max_principal_angle(other) < ANGLE_TOL
    }

    /// Largest `|b_iᵀ P b_j|` over pairs of basis vectors (bilinear pairing).
    pub fn isotropy_residual(&self) -> f64 {
        let n = self.ambient() / 2;
        let p = to_complex(&pairing_matrix(n));
        max_abs_c(&(self.basis.transpose() * p * &self.basis))
    }
}

/// `K⊥` with respect to the (complex-bilinearly extended) pairing.
pub fn orthogonal_complement(s: &SubspaceBasis, n: usize) -> Result<SubspaceBasis> {
    if s.ambient() != 2 * n {
        return Err(Error::Dimension { expected: 2 * n, found: s.ambient() });
    }
    if let (Some(&smax), Some(&smin)) = (s.singular_values.first(), s.singular_values.last()) {
        if s.dim() > 0 && smin <= s.rank_tol * smax {
            return Err(Error::Degenerate { sigma: smin, tol: s.rank_tol * smax });
        }
    }
    if s.dim() == 0 {
        let mut full = SubspaceBasis::full(2 * n);
        full.field = s.field;
        return Ok(full);
    }
    let p = pairing_matrix(n);
    if s.field == FieldKind::Real {
        let rows = (p * s.basis.map(|z| z.re)).transpose();
        return Ok(SubspaceBasis::span_real(&null_space(&rows, RANK_TOL)));
    }
    let rows = (to_complex(&p) * &s.basis).transpose();
    Ok(SubspaceBasis::span(&null_space(&rows, RANK_TOL), FieldKind::Complex))
}

fn check_antisymmetric(b: &RMat, what: &str) -> Result<()> {
    let r = max_abs_r(&(b + b.transpose()));
    if r > 1e-10 * (1.0 + max_abs_r(b)) {
        return Err(Error::Input(format!("{what} is not antisymmetric (residual {r:e})")));
    }
    Ok(())
}

/// Block matrix of the B-field transform `X+ξ ↦ X + ξ + ι_X B`, with `b`
/// the matrix of `X ↦ ι_X B`.
pub fn b_field_matrix(b: &RMat) -> RMat {
    let n = b.nrows();
    let mut m = RMat::identity(2 * n, 2 * n);
    m.view_mut((n, 0), (n, n)).copy_from(b);
    m
}

pub fn b_field_transform(b: &RMat, a: &GElement) -> Result<GElement> {
    if b.nrows() != a.dim() || b.ncols() != a.dim() {
        return Err(Error::Dimension { expected: a.dim(), found: b.nrows() });
    }
    check_antisymmetric(b, "B")?;
    let bx = b * DVector::from_column_slice(&a.vec);
    Ok(GElement { vec: a.vec.clone(), form: a.form.iter().zip(bx.iter()).map(|(x, y)| x + y).collect() })
}

/// A linear generalized complex structure: `𝕁² = −1`, pairing-orthogonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGC {
    pub mat: RMat,
}

pub const GC_TOL: f64 = 1e-9;

impl LinearGC {
    pub fn new(mat: RMat) -> Result<Self> {
        let j = LinearGC { mat };
        let (sq, orth) = j.residuals();
        let scale = 1.0 + max_abs_r(&j.mat).powi(2);
        if sq > GC_TOL * scale {
            return Err(Error::Structural(format!("J² + 1 residual {sq:e}")));
        }
        if orth > GC_TOL * scale {
            return Err(Error::Structural(format!("orthogonality residual {orth:e}")));
        }
        Ok(j)
    }

    /// Skip validation (for diagnostics on possibly invalid matrices).
    pub fn unchecked(mat: RMat) -> Self {
        LinearGC { mat }
    }

    pub fn n(&self) -> usize {
        self.mat.nrows() / 2
    }

    /// `(‖𝕁² + 1‖, ‖𝕁ᵀP𝕁 − P‖)` in the max norm.
    pub fn residuals(&self) -> (f64, f64) {
        let n2 = self.mat.nrows();
        let sq = max_abs_r(&(&self.mat * &self.mat + RMat::identity(n2, n2)));
        let p = pairing_matrix(n2 / 2);
        let orth = max_abs_r(&(self.mat.transpose() * &p * &self.mat - p));
        (sq, orth)
    }

    /// Extreme example from a complex structure: `[[−J, 0], [0, Jᵀ]]`.
    pub fn from_complex(j: &RMat) -> Result<Self> {
        let n = j.nrows();
        let r = max_abs_r(&(j * j + RMat::identity(n, n)));
        if r > 1e-10 {
            return Err(Error::Input(format!("J² + 1 residual {r:e}")));
        }
        let mut m = RMat::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&(-j));
        m.view_mut((n, n), (n, n)).copy_from(&j.transpose());
        LinearGC::new(m)
    }

    /// Extreme example from a symplectic form (matrix of `X ↦ ι_X ω`):
    /// `[[0, ω⁻¹], [−ω, 0]]`.
    pub fn from_symplectic(omega: &RMat) -> Result<Self> {
        check_antisymmetric(omega, "ω")?;
        let n = omega.nrows();
        let inv = omega
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Input("ω is degenerate".into()))?;
        let mut m = RMat::zeros(2 * n, 2 * n);
        m.view_mut((0, n), (n, n)).copy_from(&inv);
        m.view_mut((n, 0), (n, n)).copy_from(&(-omega));
        LinearGC::new(m)
    }

    /// The `+i`-eigenspace `L`, as the range of `½(1 − i𝕁)`.
    pub fn plus_eigenspace(&self) -> Result<SubspaceBasis> {
        let n2 = self.mat.nrows();
        let proj = CMat::from_fn(n2, n2, |r, c| {
            let id = if r == c { 0.5 } else { 0.0 };
            Complex64::new(id, -0.5 * self.mat[(r, c)])
        });
        let l = SubspaceBasis::span(&proj, FieldKind::Complex);
        if l.dim() != n2 / 2 {
            return Err(Error::Structural(format!("+i-eigenspace has dimension {} ≠ {}", l.dim(), n2 / 2)));
        }
        Ok(l)
    }

    /// Poisson bivector: the upper-right block.
    pub fn poisson_block(&self) -> RMat {
        let n = self.n();
        self.mat.view((0, n), (n, n)).into_owned()
    }

    /// Conjugation `e^B 𝕁 e^{−B}`.
    pub fn b_conjugate(&self, b: &RMat) -> LinearGC {
        LinearGC { mat: b_field_matrix(b) * &self.mat * b_field_matrix(&(-b)) }
    }
}

/// Type: `n − dim_ℂ π(L)`.
pub fn gc_type(j: &LinearGC) -> Result<usize> {
    let n = j.n();
    let l = j.plus_eigenspace()?;
    Ok(n - l.tangent_projection(n).dim())
}

/// Independent route: `(n − rank β)/2` with `β` the Poisson block.
pub fn gc_type_from_poisson(j: &LinearGC) -> usize {
    let sv = singular_spectrum_r(&j.poisson_block());
    let rank = numerical_rank(&sv, RANK_TOL);
    (j.n() - rank) / 2
}

/// Result of linear Dirac reduction, expressed on a frame `W ≅ K⊥/K`.
#[derive(Clone, Debug)]
pub struct ReducedDirac {
    /// Columns spanning the representative space `W = K⊥ ∩ K^{⊥,herm}`.
    pub frame: CMat,
    /// Reduced subspace in frame coordinates.
    pub subspace: SubspaceBasis,
    /// Pairing restricted to the frame (bilinear).
    pub gram: CMat,
}

impl ReducedDirac {
    /// Largest `|vᵀ G w|` over reduced basis pairs.
    pub fn isotropy_residual(&self) -> f64 {
        let b = &self.subspace.basis;
        max_abs_c(&(b.transpose() * &self.gram * b))
    }
}

/// Representative frame of `K⊥/K`: the part of `K⊥` Euclidean-orthogonal to `K`.
pub fn reduction_frame(k: &SubspaceBasis, n: usize) -> Result<SubspaceBasis> {
    let kperp = orthogonal_complement(k, n)?;
    let w = kperp.intersection(&k.hermitian_complement());
    let expected = 2 * n - 2 * k.dim();
    if w.dim() != expected {
        return Err(Error::ReductionDegeneracy { expected, found: w.dim() });
    }
    Ok(w)
}

/// `(𝒟 ∩ K⊥ + K)/K`, in coordinates of [`reduction_frame`].
pub fn dirac_reduce(d: &SubspaceBasis, k: &SubspaceBasis) -> Result<ReducedDirac> {
    let n = d.ambient() / 2;
    let frame = reduction_frame(k, n)?;
    dirac_reduce_on(d, k, &frame.basis)
}

/// As [`dirac_reduce`], with caller-supplied orthonormal frame of a complement
/// of `K` inside `K⊥` that is Euclidean-orthogonal to `K`.
pub fn dirac_reduce_on(d: &SubspaceBasis, k: &SubspaceBasis, frame: &CMat) -> Result<ReducedDirac> {
    let n = d.ambient() / 2;
    let iso = k.isotropy_residual();
    if iso > 1e-9 {
        return Err(Error::Input(format!("K is not isotropic (residual {iso:e})")));
    }
    let kperp = orthogonal_complement(&k.complexified(), n)?;
    let inter = d.intersection(&kperp);
    let coords = frame.adjoint() * &inter.basis;
    let sub = SubspaceBasis::span(&coords, FieldKind::Complex);
    let expected = frame.ncols() / 2;
    if sub.dim() != expected {
        return Err(Error::ReductionDegeneracy { expected, found: sub.dim() });
    }
    let p = to_complex(&pairing_matrix(n));
    let gram = frame.transpose() * p * frame;
    Ok(ReducedDirac { frame: frame.clone(), subspace: sub, gram })
}

/// Real matrix with `+i` on `l` and `−i` on `conj(l)` (requires `l ∩ l̄ = 0`).
pub fn gc_from_eigenspace(l: &SubspaceBasis) -> Result<RMat> {
    let m = l.ambient();
    let k = l.dim();
    if 2 * k != m {
        return Err(Error::Structural(format!("eigenspace dimension {k} is not half of {m}")));
    }
    let mut v = CMat::zeros(m, m);
    v.view_mut((0, 0), (m, k)).copy_from(&l.basis);
    v.view_mut((0, k), (m, k)).copy_from(&l.basis.map(|z| z.conj()));
    let sv = singular_values(&v);
    let smin = sv.last().copied().unwrap_or(0.0);
    if smin < 1e-8 {
        return Err(Error::DeformationDegeneracy { sigma: smin });
    }
    let mut d = CMat::zeros(m, m);
    for i in 0..k {
        d[(i, i)] = Complex64::new(0.0, 1.0);
        d[(k + i, k + i)] = Complex64::new(0.0, -1.0);
    }
    let inv = v.clone().try_inverse().ok_or(Error::DeformationDegeneracy { sigma: smin })?;
    let j = &v * d * inv;
    let imag = j.iter().fold(0.0_f64, |a, z| a.max(z.im.abs()));
    if imag > 1e-8 {
        return Err(Error::Structural(format!("reconstructed structure has imaginary part {imag:e}")));
    }
    Ok(j.map(|z| z.re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn std_j(n: usize) -> RMat {
        let mut j = RMat::zeros(n, n);
        for k in 0..n / 2 {
            j[(2 * k + 1, 2 * k)] = 1.0;
            j[(2 * k, 2 * k + 1)] = -1.0;
        }
        j
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn rand_antisym(rng: &mut ChaCha8Rng, n: usize) -> RMat {
        let a = RMat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &a - a.transpose()
    }

    #[test]
    fn pairing_examples() {
        let a = GElement::vector(vec![1.0, 0.0]);
        let b = GElement::covector(vec![1.0, 0.0]);
        assert_eq!(pairing(&a, &b).unwrap(), 1.0);
        assert_eq!(pairing(&a, &a).unwrap(), 0.0);
        let c = GElement::zero(3);
        assert!(matches!(pairing(&a, &c), Err(Error::Dimension { .. })));
    }

    #[test]
    fn pairing_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a = GElement::new(rand_vec(&mut rng, 4), rand_vec(&mut rng, 4)).unwrap();
            let b = GElement::new(rand_vec(&mut rng, 4), rand_vec(&mut rng, 4)).unwrap();
            let direct: f64 = (0..4).map(|i| a.form[i] * b.vec[i] + b.form[i] * a.vec[i]).sum();
            assert!((pairing(&a, &b).unwrap() - direct).abs() < 1e-14);
            let via_gram = a.stacked().dot(&(pairing_matrix(4) * b.stacked()));
            assert!((via_gram - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn pairing_signature_is_split() {
        for n in 1..6 {
            let eig = pairing_matrix(n).symmetric_eigen().eigenvalues;
            assert_eq!(eig.iter().filter(|&&e| e > 0.5).count(), n);
            assert_eq!(eig.iter().filter(|&&e| e < -0.5).count(), n);
        }
    }

    #[test]
    fn complement_examples() {
        let k = SubspaceBasis::from_elements(&[GElement::vector(vec![1.0, 0.0])]).unwrap();
        let kp = orthogonal_complement(&k, 2).unwrap();
        assert_eq!(kp.dim(), 3);
        assert!(kp.contains(&k));

        let full = SubspaceBasis::full(4);
        assert_eq!(orthogonal_complement(&full, 2).unwrap().dim(), 0);
    }

    #[test]
    fn b_field_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = GElement::new(rand_vec(&mut rng, 6), rand_vec(&mut rng, 6)).unwrap();
        let b = GElement::new(rand_vec(&mut rng, 6), rand_vec(&mut rng, 6)).unwrap();
        let zero = RMat::zeros(6, 6);
        assert_eq!(b_field_transform(&zero, &a).unwrap(), a);
        let bf = rand_antisym(&mut rng, 6);
        let ta = b_field_transform(&bf, &a).unwrap();
        let tb = b_field_transform(&bf, &b).unwrap();
        assert!((pairing(&ta, &tb).unwrap() - pairing(&a, &b).unwrap()).abs() < 1e-12);
        let back = b_field_transform(&(-&bf), &ta).unwrap();
        assert!(back.sub(&a).sup_norm() < 1e-14);
        let sym = RMat::identity(6, 6);
        assert!(matches!(b_field_transform(&sym, &a), Err(Error::Input(_))));
    }

    #[test]
    fn extreme_types() {
        let j = LinearGC::from_complex(&std_j(2)).unwrap();
        assert_eq!(gc_type(&j).unwrap(), 1);
        let w = LinearGC::from_symplectic(&std_j(2)).unwrap();
        assert_eq!(gc_type(&w).unwrap(), 0);
        for n in [2, 4, 6, 8, 10] {
            let jc = LinearGC::from_complex(&std_j(n)).unwrap();
            let js = LinearGC::from_symplectic(&std_j(n)).unwrap();
            let (a, b) = jc.residuals();
            let (c, d) = js.residuals();
            assert!(a.max(b).max(c).max(d) < 1e-12);
            assert_eq!(gc_type(&jc).unwrap(), n / 2);
            assert_eq!(gc_type_from_poisson(&jc), n / 2);
            assert_eq!(gc_type(&js).unwrap(), 0);
        }
        assert!(LinearGC::from_complex(&RMat::identity(2, 2)).is_err());
    }

    #[test]
    fn plus_eigenspace_rejects_non_complex_structures() {
        let j = LinearGC::unchecked(RMat::identity(4, 4));
        assert!(matches!(j.plus_eigenspace(), Err(Error::Structural(_))));
    }

    #[test]
    fn type_invariant_under_b_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 4, 6] {
            for j in [LinearGC::from_complex(&std_j(n)).unwrap(), LinearGC::from_symplectic(&std_j(n)).unwrap()] {
                let b = rand_antisym(&mut rng, n);
                let jb = LinearGC::new(j.b_conjugate(&b).mat).unwrap();
                assert_eq!(gc_type(&jb).unwrap(), gc_type(&j).unwrap());
                assert_eq!(gc_type_from_poisson(&jb), gc_type(&j).unwrap());
            }
        }
    }

    #[test]
    fn reduce_by_zero_is_identity() {
        let l = LinearGC::from_symplectic(&std_j(4)).unwrap().plus_eigenspace().unwrap();
        let red = dirac_reduce(&l, &SubspaceBasis::zero(8)).unwrap();
        let back = SubspaceBasis::span(&(&red.frame * &red.subspace.basis), FieldKind::Complex);
        assert!(back.same_as(&l));
    }

    /// Linear Marsden–Weinstein on ℝ⁴: ω standard, Hamiltonian direction v,
    /// dμ = −ι_v ω. The reduced Dirac structure must be the graph of iω̄ on
    /// `U = ker dμ ∩ v^⊥` (hand-coded oracle).
    #[test]
    fn symplectic_reduction_matches_marsden_weinstein() {
        let om = std_j(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = DVector::from_vec(rand_vec(&mut rng, 4));
        let dmu = -(&om * &v);
        let k = SubspaceBasis::from_elements(&[
            GElement::vector(v.iter().copied().collect()),
            GElement::covector(dmu.iter().copied().collect()),
        ])
        .unwrap();
        let l = LinearGC::from_symplectic(&om).unwrap().plus_eigenspace().unwrap();
        let red = dirac_reduce(&l, &k).unwrap();
        assert_eq!(red.subspace.dim(), 2);
        assert!(red.isotropy_residual() < 1e-12);
        // Oracle: basis of U.
        let mut c = RMat::zeros(2, 4);
        c.set_row(0, &dmu.transpose());
        c.set_row(1, &v.transpose());
        let u = null_space(&c, 1e-12);
        assert_eq!(u.ncols(), 2);
        for col in 0..red.subspace.dim() {
            let amb = &red.frame * red.subspace.basis.column(col);
            let x: Vec<Complex64> = (0..4).map(|i| amb[i]).collect();
            let eta: Vec<Complex64> = (4..8).map(|i| amb[i]).collect();
            for w in 0..2 {
                let wv = u.column(w);
                let lhs: Complex64 = (0..4).map(|i| eta[i] * wv[i]).sum();
                // ω(x, w) = (ω_map x)·w
                let omx: Vec<Complex64> = (0..4)
                    .map(|i| (0..4).map(|j| x[j] * om[(i, j)]).sum::<Complex64>())
                    .collect();
                let rhs: Complex64 = Complex64::new(0.0, 1.0) * (0..4).map(|i| omx[i] * wv[i]).sum::<Complex64>();
                assert!((lhs - rhs).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn reduced_dimension_count_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [4, 6] {
            let j = LinearGC::from_complex(&std_j(n)).unwrap();
            let jb = j.b_conjugate(&rand_antisym(&mut rng, n));
            let l = jb.plus_eigenspace().unwrap();
            // isotropic real K: span of two random vectors.
            let k = SubspaceBasis::from_elements(&[
                GElement::vector(rand_vec(&mut rng, n)),
                GElement::vector(rand_vec(&mut rng, n)),
            ])
            .unwrap();
            let red = dirac_reduce(&l, &k).unwrap();
            assert_eq!(red.subspace.dim(), (2 * n - 2 * k.dim()) / 2);
            assert!(red.isotropy_residual() < 1e-10);
        }
    }

    #[test]
    fn reduced_eigenspace_reconstructs_real_structure() {
        let l = LinearGC::from_complex(&std_j(4)).unwrap().plus_eigenspace().unwrap();
        let j = gc_from_eigenspace(&l).unwrap();
        assert!(max_abs_r(&(j - LinearGC::from_complex(&std_j(4)).unwrap().mat)) < 1e-12);
    }
}
