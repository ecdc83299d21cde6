//! Generalized complex and generalized Kähler structures built from
//! bihermitian data, plus Dirac-level deformations.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glinalg::{
    b_field_matrix, max_abs_r, pairing_matrix, to_complex, CMat, FieldKind, LinearGC, RMat, SubspaceBasis,
};

/// Metric `g` with two `g`-orthogonal complex structures `J₊`, `J₋`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiHermitianData {
    pub g: RMat,
    pub jp: RMat,
    pub jm: RMat,
}

pub const INPUT_TOL: f64 = 1e-9;

impl BiHermitianData {
    pub fn new(g: RMat, jp: RMat, jm: RMat) -> Result<Self> {
        let b = BiHermitianData { g, jp, jm };
        b.validate()?;
        Ok(b)
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn kahler(g: RMat, j: RMat) -> Result<Self> {
        Self::new(g, j.clone(), j)
    }

    /// Largest residual among `g` symmetry, `J±² + 1` and `J±ᵀ g J± − g`.
    pub fn residual(&self) -> f64 {
        let n = self.n();
        let id = RMat::identity(n, n);
        [
            max_abs_r(&(&self.g - self.g.transpose())),
            max_abs_r(&(&self.jp * &self.jp + &id)),
            max_abs_r(&(&self.jm * &self.jm + &id)),
            max_abs_r(&(self.jp.transpose() * &self.g * &self.jp - &self.g)),
            max_abs_r(&(self.jm.transpose() * &self.g * &self.jm - &self.g)),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.jp.nrows() != n || self.jm.nrows() != n || !n.is_multiple_of(2) {
            return Err(Error::Input(format!("inconsistent or odd dimensions (n = {n})")));
        }
        let r = self.residual();
        let scale = 1.0 + max_abs_r(&self.g);
        if r > INPUT_TOL * scale * scale {
            return Err(Error::Input(format!("bihermitian residual {r:e}")));
        }
        let min_eig = self.g.clone().symmetric_eigen().eigenvalues.min();
        if min_eig <= 0.0 {
            return Err(Error::Input(format!("metric not positive definite (eigenvalue {min_eig:e})")));
        }
        Ok(())
    }

    pub fn g_inv(&self) -> RMat {
        self.g.clone().try_inverse().expect("validated metric is invertible")
    }

    /// `ω± = g J±` as maps `T → T*`.
    pub fn omega_p(&self) -> RMat {
        &self.g * &self.jp
    }

    pub fn omega_m(&self) -> RMat {
        &self.g * &self.jm
    }
}

/// Draw `A·Aᵀ + n·1` and two independent `g`-orthogonal complex structures,
/// orthogonal conjugates of the standard one.
pub fn random_bihermitian<R: Rng>(n: usize, rng: &mut R) -> BiHermitianData {
    let a = RMat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let g = &a * a.transpose() + RMat::identity(n, n) * (n as f64);
    let l = g.clone().cholesky().expect("positive definite").l();
    let l_inv_t = l.transpose().try_inverse().expect("invertible");
    let mut draw = || {
        let q = RMat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let u = &q * standard_complex_block(n) * q.transpose();
        &l_inv_t * u * l.transpose()
    };
    let jp = draw();
    let jm = draw();
    BiHermitianData { g, jp, jm }
}

fn standard_complex_block(n: usize) -> RMat {
    let mut j = RMat::zeros(n, n);
    for k in (0..n).step_by(2) {
        j[(k + 1, k)] = 1.0;
        j[(k, k + 1)] = -1.0;
    }
    j
}

/// Commuting pair with `−𝕁₁𝕁₂` a generalized metric.
#[derive(Clone, Debug, PartialEq)]
pub struct GKPair {
    pub j1: LinearGC,
    pub j2: LinearGC,
}

impl GKPair {
    pub fn n(&self) -> usize {
        self.j1.n()
    }

    /// `𝒢 = −𝕁₁𝕁₂`.
    pub fn generalized_metric(&self) -> RMat {
        -(&self.j1.mat * &self.j2.mat)
    }
}

fn block(ul: &RMat, ur: &RMat, ll: &RMat, lr: &RMat) -> RMat {
    let n = ul.nrows();
    let mut m = RMat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(ul);
    m.view_mut((0, n), (n, n)).copy_from(ur);
    m.view_mut((n, 0), (n, n)).copy_from(ll);
    m.view_mut((n, n), (n, n)).copy_from(lr);
    m
}

/// The Gualtieri map, in the metric splitting.
pub fn gualtieri_map(b: &BiHermitianData) -> Result<GKPair> {
    b.validate()?;
    let (jp, jm) = (&b.jp, &b.jm);
    let (op, om) = (b.omega_p(), b.omega_m());
    let opi = op.clone().try_inverse().ok_or_else(|| Error::Input("ω₊ degenerate".into()))?;
    let omi = om.clone().try_inverse().ok_or_else(|| Error::Input("ω₋ degenerate".into()))?;
    let j1 = block(&(-(jp + jm)), &(&opi - &omi), &(&om - &op), &(jp.transpose() + jm.transpose())) * 0.5;
    let j2 = block(&(jm - jp), &(&opi + &omi), &(-(&op + &om)), &(jp.transpose() - jm.transpose())) * 0.5;
    Ok(GKPair { j1: LinearGC::unchecked(j1), j2: LinearGC::unchecked(j2) })
}

/// Untwist a GK pair whose metric is `e^B [[0, g⁻¹], [g, 0]] e^{−B}` and
/// recover `(g, J₊, J₋)` and the map matrix of `B`.
pub fn bihermitian_from_gk(p: &GKPair) -> Result<(BiHermitianData, RMat)> {
    let n = p.n();
    let gm = p.generalized_metric();
    let ginv = gm.view((0, n), (n, n)).into_owned();
    let g = ginv.clone().try_inverse().ok_or_else(|| Error::Structural("metric block degenerate".into()))?;
    let g = (&g + g.transpose()) * 0.5;
    // Upper-left block of e^B G e^{-B} is −g⁻¹B.
    let b = -(&g * gm.view((0, 0), (n, n)).into_owned());
    let b = (&b - b.transpose()) * 0.5;
    let untwist = |j: &LinearGC| b_field_matrix(&(-&b)) * &j.mat * b_field_matrix(&b);
    let u1 = untwist(&p.j1);
    let u2 = untwist(&p.j2);
    let ul1 = u1.view((0, 0), (n, n)).into_owned();
    let ul2 = u2.view((0, 0), (n, n)).into_owned();
    let jp = -(&ul1 + &ul2);
    let jm = -(&ul1 - &ul2);
    Ok((BiHermitianData::new(g, jp, jm)?, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtremeKind {
    Complex,
    Symplectic,
}

pub fn extreme_gc(kind: ExtremeKind, m: &RMat) -> Result<LinearGC> {
    match kind {
        ExtremeKind::Complex => LinearGC::from_complex(m),
        ExtremeKind::Symplectic => LinearGC::from_symplectic(m),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoissonBivector {
    pub mat: RMat,
}

impl PoissonBivector {
    pub fn apply(&self, covector: &[f64]) -> Vec<f64> {
        (&self.mat * DVector::from_column_slice(covector)).iter().copied().collect()
    }

    /// `β(α, γ)`.
    pub fn bracket(&self, a: &[f64], c: &[f64]) -> f64 {
        let ba = DVector::from_vec(self.apply(a));
        ba.dot(&DVector::from_column_slice(c))
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        max_abs_r(&(&self.mat + self.mat.transpose()))
    }
}

/// `(β₁, β₂) = (−½(J₊ − J₋)g⁻¹, −½(J₊ + J₋)g⁻¹)`.
pub fn poisson_bivectors(b: &BiHermitianData) -> (PoissonBivector, PoissonBivector) {
    let gi = b.g_inv();
    let b1 = -(&b.jp - &b.jm) * &gi * 0.5;
    let b2 = -(&b.jp + &b.jm) * &gi * 0.5;
    (PoissonBivector { mat: b1 }, PoissonBivector { mat: b2 })
}

#[derive(Clone, Debug, Serialize)]
pub struct GkReport {
    pub square_1: f64,
    pub square_2: f64,
    pub orthogonality_1: f64,
    pub orthogonality_2: f64,
    pub commutation: f64,
    pub metric_square: f64,
    /// Smallest eigenvalue of the symmetric form `(𝒢e, e)`.
    pub metric_min_eigenvalue: f64,
    pub tol: f64,
    pub pass: bool,
}

impl GkReport {
    pub fn max_residual(&self) -> f64 {
        [self.square_1, self.square_2, self.orthogonality_1, self.orthogonality_2, self.commutation, self.metric_square]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn validate_gk(p: &GKPair, tol: f64) -> GkReport {
    let (s1, o1) = p.j1.residuals();
    let (s2, o2) = p.j2.residuals();
    let comm = max_abs_r(&(&p.j1.mat * &p.j2.mat - &p.j2.mat * &p.j1.mat));
    let g = p.generalized_metric();
    let n2 = g.nrows();
    let msq = max_abs_r(&(&g * &g - RMat::identity(n2, n2)));
    let form = pairing_matrix(n2 / 2) * &g;
    let form = (&form + form.transpose()) * 0.5;
    let min_eig = form.symmetric_eigen().eigenvalues.min();
    let pass = [s1, s2, o1, o2, comm, msq].iter().all(|&r| r < tol) && min_eig > tol;
    GkReport {
        square_1: s1,
        square_2: s2,
        orthogonality_1: o1,
        orthogonality_2: o2,
        commutation: comm,
        metric_square: msq,
        metric_min_eigenvalue: min_eig,
        tol,
        pass,
    }
}

/// Map `A ↦ c·((a, A) b − (b, A) a)` of the bivector `c·a∧b`.
pub fn wedge_map(a: &[Complex64], b: &[Complex64], c: Complex64) -> CMat {
    let m = a.len();
    let n = m / 2;
    let p = to_complex(&pairing_matrix(n));
    let av = nalgebra::DVector::from_column_slice(a);
    let bv = nalgebra::DVector::from_column_slice(b);
    let pa = (&p * &av).transpose();
    let pb = (&p * &bv).transpose();
    (bv * pa - av * pb) * c
}

#[derive(Clone, Debug)]
pub struct DeformedDirac {
    pub subspace: SubspaceBasis,
    pub isotropy_residual: f64,
    pub maximal_isotropic: bool,
    /// Smallest singular value of `[L^ε | conj(L^ε)]`.
    pub transversality: f64,
}

/// Smallest singular value of `[L | conj L]` below which a deformation is
/// declared degenerate.
pub const DEFORMATION_TOL: f64 = 1e-8;

/// Graph `{A + ε(A) : A ∈ L}` of a bivector map `ε: L → L̄`.
pub fn deform_dirac(l: &SubspaceBasis, eps: &CMat) -> Result<DeformedDirac> {
    let m = l.ambient();
    let graph = &l.basis + eps * &l.basis;
    let sub = SubspaceBasis::span(&graph, FieldKind::Complex);
    if sub.dim() != l.dim() {
        return Err(Error::DeformationDegeneracy { sigma: sub.singular_values.last().copied().unwrap_or(0.0) });
    }
    let mut both = CMat::zeros(m, 2 * sub.dim());
    both.view_mut((0, 0), (m, sub.dim())).copy_from(&sub.basis);
    both.view_mut((0, sub.dim()), (m, sub.dim())).copy_from(&sub.basis.map(|z| z.conj()));
    let transversality = crate::glinalg::singular_spectrum(&both).last().copied().unwrap_or(0.0);
    if 2 * sub.dim() == m && transversality < DEFORMATION_TOL {
        return Err(Error::DeformationDegeneracy { sigma: transversality });
    }
    let iso = sub.isotropy_residual();
    Ok(DeformedDirac {
        maximal_isotropic: iso < 1e-10 && 2 * sub.dim() == m,
        isotropy_residual: iso,
        subspace: sub,
        transversality,
    })
}
