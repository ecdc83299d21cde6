//! Deformed generalized Kähler structure on `ℂP^N`, obtained pointwise by
//! reducing a bivector deformation of the standard pair on `ℂ^{N+1}` by the
//! scaling circle, with `SU(N−3)` acting on the last `N−3` coordinates.
//!
//! Points are unit-sphere representatives `z ∈ ℂ^{N+1}` in interleaved real
//! coordinates. The tangent space of `ℂP^N` at `[z]` is identified with the
//! horizontal space `H = {z, iz}⊥` through a fixed orthonormal frame.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{field, section, Affine, Chart, Field, Quadratic, ThreeForm};
use crate::glinalg::{
    dirac_reduce_on, gc_from_eigenspace, max_abs_r, to_complex, CMat, GElement, LinearGC, RMat,
    SubspaceBasis,
};
use crate::hamilton::{realify, su_basis, ExtendedAction, HamiltonianModel, LieAlgebraData, MomentMap, PointwiseModel};
use crate::models::standard_complex;
use crate::structures::{bihermitian_from_gk, deform_dirac, validate_gk, wedge_map, BiHermitianData, DeformedDirac, GKPair};

/// Distance in `|z₀|` from the singular cylinder `|z₀| = √2` below which
/// points are rejected.
pub const SINGULAR_MARGIN: f64 = 1e-3;
const SPHERE_TOL: f64 = 1e-9;

pub struct CpnModel {
    pub big_n: usize,
    pub eps_scale: f64,
    name: String,
    lie: LieAlgebraData,
    /// Real matrices `G_a` with `X_a = G_a z` upstairs.
    gens: Vec<RMat>,
    j: RMat,
    l1: SubspaceBasis,
    l2: SubspaceBasis,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl CpnModel {
    pub fn new(big_n: usize, eps_scale: f64) -> Result<Self> {
        if big_n < 5 {
            return Err(Error::Input(format!("projective model needs N ≥ 5, got {big_n}")));
        }
        if !eps_scale.is_finite() {
            return Err(Error::Input("eps_scale must be finite".into()));
        }
        let m = big_n + 1;
        let j = standard_complex(m);
        let l1 = LinearGC::from_complex(&j)?.plus_eigenspace()?;
        let l2 = LinearGC::from_symplectic(&j)?.plus_eigenspace()?;
        let r = big_n - 3;
        let (lie, small) = if r == 2 {
            let i = c(0.0, 1.0);
            let sig = [
                CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
                CMat::from_row_slice(2, 2, &[c(0., 0.), -i, i, c(0., 0.)]),
                CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
            ];
            (LieAlgebraData::su2(), sig.iter().map(|s| s * (-i * 0.5)).collect::<Vec<_>>())
        } else {
            let b = su_basis(r);
            let names = (0..b.len()).map(|i| format!("e{}", i + 1)).collect();
            (LieAlgebraData::from_matrices(names, &b)?, b)
        };
        let gens = small
            .iter()
            .map(|a| {
                let mut big = CMat::zeros(m, m);
                big.view_mut((4, 4), (r, r)).copy_from(a);
                -realify(&big)
            })
            .collect();
        Ok(CpnModel { big_n, eps_scale, name: format!("cpn(N={big_n},eps_scale={eps_scale})"), lie, gens, j, l1, l2 })
    }

    fn ambient(&self) -> usize {
        2 * (self.big_n + 1)
    }

    /// Bivector map of `ε = ½ s z₀² a∧b`, `a = ∂_{z₁} + ½dz̄₁`, `b = ∂_{z₂} − ½dz̄₂`.
    pub fn epsilon_map(&self, z: &[f64]) -> CMat {
        let m = self.ambient();
        let z0 = c(z[0], z[1]);
        let mut a = vec![c(0.0, 0.0); 2 * m];
        let mut b = vec![c(0.0, 0.0); 2 * m];
        // ∂_z = ½(∂_x − i∂_y), dz̄ = dx − i dy.
        a[2] = c(0.5, 0.0);
        a[3] = c(0.0, -0.5);
        a[m + 2] = c(0.5, 0.0);
        a[m + 3] = c(0.0, -0.5);
        b[4] = c(0.5, 0.0);
        b[5] = c(0.0, -0.5);
        b[m + 4] = c(-0.5, 0.0);
        b[m + 5] = c(0.0, 0.5);
        wedge_map(&a, &b, z0 * z0 * (0.5 * self.eps_scale))
    }

    /// The deformed `+i`-eigenspace `L₁^ε` upstairs at `z` (any point).
    pub fn deformed_l1(&self, z: &[f64]) -> Result<DeformedDirac> {
        deform_dirac(&self.l1, &self.epsilon_map(z))
    }

    /// Orthonormal frame of `{z, iz}⊥`.
    pub fn horizontal_frame(&self, z: &[f64]) -> RMat {
        let m = self.ambient();
        let zv = DVector::from_column_slice(z);
        let jz = &self.j * &zv;
        let mut cols: Vec<DVector<f64>> = vec![zv.normalize(), jz.normalize()];
        let mut out = Vec::new();
        for e in 0..m {
            let mut v = DVector::from_fn(m, |i, _| if i == e { 1.0 } else { 0.0 });
            for _ in 0..2 {
                for u in &cols {
                    v -= u * u.dot(&v);
                }
            }
            let nv = v.norm();
            if nv > 1e-6 {
                v /= nv;
                cols.push(v.clone());
                out.push(v);
            }
            if out.len() == m - 2 {
                break;
            }
        }
        RMat::from_columns(&out)
    }

    fn check_representative(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.ambient() {
            return Err(Error::Dimension { expected: self.ambient(), found: z.len() });
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > SPHERE_TOL {
            return Err(Error::Domain { chart: "unit sphere".into(), point: z.to_vec() });
        }
        let z0 = (z[0] * z[0] + z[1] * z[1]).sqrt();
        if (z0 - 2f64.sqrt()).abs() < SINGULAR_MARGIN {
            return Err(Error::Domain { chart: "cpn regular locus".into(), point: z.to_vec() });
        }
        Ok(())
    }

    fn reduce(&self, l: &SubspaceBasis, z: &[f64], h: &RMat) -> Result<RMat> {
        let m = self.ambient();
        let zv = DVector::from_column_slice(z);
        let jz = &self.j * &zv;
        let mut k = RMat::zeros(2 * m, 2);
        k.view_mut((0, 0), (m, 1)).copy_from(&jz);
        k.view_mut((m, 1), (m, 1)).copy_from(&zv);
        let k = SubspaceBasis::span_real(&k);
        let mut frame = RMat::zeros(2 * m, 2 * (m - 2));
        frame.view_mut((0, 0), (m, m - 2)).copy_from(h);
        frame.view_mut((m, m - 2), (m, m - 2)).copy_from(h);
        let red = dirac_reduce_on(l, &k, &to_complex(&frame))?;
        gc_from_eigenspace(&red.subspace)
    }

    /// Reduced pair at `[z]`, in the horizontal frame.
    pub fn reduced_pair(&self, z: &[f64]) -> Result<GKPair> {
        self.check_representative(z)?;
        let h = self.horizontal_frame(z);
        let l1e = self.deformed_l1(z)?;
        let j1 = self.reduce(&l1e.subspace, z, &h)?;
        let j2 = self.reduce(&self.l2, z, &h)?;
        Ok(GKPair { j1: LinearGC::unchecked(j1), j2: LinearGC::unchecked(j2) })
    }

    /// Undeformed Fubini–Study pair at `[z]` in the same frame.
    pub fn fubini_study_pair(&self, z: &[f64]) -> Result<GKPair> {
        self.check_representative(z)?;
        let h = self.horizontal_frame(z);
        let jr = h.transpose() * &self.j * &h;
        Ok(GKPair { j1: LinearGC::from_complex(&jr)?, j2: LinearGC::from_symplectic(&jr)? })
    }

    /// Unit representative with the first nonvanishing coordinate real
    /// positive.
    pub fn normalize(&self, x: &[f64]) -> Option<Vec<f64>> {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-3 {
            return None;
        }
        let m = self.big_n + 1;
        let k = (0..m).find(|&k| x[2 * k].hypot(x[2 * k + 1]) > 1e-12)?;
        let phase = c(x[2 * k], x[2 * k + 1]).unscale(x[2 * k].hypot(x[2 * k + 1])).conj();
        let mut out = vec![0.0; 2 * m];
        for p in 0..m {
            let w = c(x[2 * p], x[2 * p + 1]) * phase / norm;
            out[2 * p] = w.re;
            out[2 * p + 1] = w.im;
        }
        Some(out)
    }

    /// Flat model on `ℂ^{N+1}` with the standard pair and the `SU(N−3)`
    /// generators, for the derivative-level checks of the action.
    pub fn upstairs_model(&self) -> Result<HamiltonianModel> {
        let m = self.ambient();
        let data = BiHermitianData::kahler(RMat::identity(m, m), self.j.clone())?;
        let gens: Vec<Field> =
            self.gens.iter().map(|g| section(field(Affine::linear(g.clone())), field(Affine::linear(RMat::zeros(m, m))))).collect();
        let comps: Vec<Field> = self.gens.iter().map(|g| field(Quadratic { q: -(&self.j * g) * 0.5, l: vec![0.0; m], c: 0.0 })).collect();
        HamiltonianModel::with_constant_structure(
            format!("cpn-upstairs(N={})", self.big_n),
            Chart::euclidean(m),
            &data,
            ThreeForm::zero(m),
            ExtendedAction { generators: gens, lie: self.lie.clone() },
            MomentMap { components: comps },
        )
    }

    /// Observed validity of the reduced pair over sampled points.
    pub fn validity(&self, points: &[Vec<f64>], tol: f64) -> ValidityReport {
        let mut rep = ValidityReport { points: points.len(), valid: 0, failures: Vec::new(), max_residual: 0.0, min_transversality: f64::INFINITY, max_b_field: 0.0 };
        for z in points {
            let outcome = self.deformed_l1(z).and_then(|d| {
                rep.min_transversality = rep.min_transversality.min(d.transversality);
                self.reduced_pair(z)
            });
            match outcome {
                Ok(pair) => {
                    let r = validate_gk(&pair, tol);
                    rep.max_residual = rep.max_residual.max(r.max_residual());
                    if let Ok((_, b)) = bihermitian_from_gk(&pair) {
                        rep.max_b_field = rep.max_b_field.max(max_abs_r(&b));
                    }
                    if r.pass {
                        rep.valid += 1;
                    } else {
                        rep.failures.push(z.clone());
                    }
                }
                Err(_) => rep.failures.push(z.clone()),
            }
        }
        rep
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidityReport {
    pub points: usize,
    pub valid: usize,
    pub failures: Vec<Vec<f64>>,
    pub max_residual: f64,
    pub min_transversality: f64,
    /// Largest entry of the B-field relating the reduced splitting to the
    /// metric one.
    pub max_b_field: f64,
}

impl PointwiseModel for CpnModel {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        2 * self.big_n
    }
    fn lie(&self) -> &LieAlgebraData {
        &self.lie
    }
    fn check_point(&self, x: &[f64]) -> Result<()> {
        self.check_representative(x)
    }
    fn gk_at(&self, x: &[f64]) -> Result<GKPair> {
        self.reduced_pair(x)
    }
    fn bihermitian_at(&self, x: &[f64]) -> Result<(BiHermitianData, RMat)> {
        bihermitian_from_gk(&self.reduced_pair(x)?)
    }
    fn generator_at(&self, a: usize, x: &[f64]) -> Result<GElement> {
        self.check_representative(x)?;
        let h = self.horizontal_frame(x);
        let xa = &self.gens[a] * DVector::from_column_slice(x);
        Ok(GElement::vector((h.transpose() * xa).iter().copied().collect()))
    }
    fn mu_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_representative(x)?;
        let z = DVector::from_column_slice(x);
        Ok(self.gens.iter().map(|g| -0.5 * z.dot(&(&self.j * g * &z))).collect())
    }
    fn dmu_at(&self, a: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_representative(x)?;
        let h = self.horizontal_frame(x);
        let z = DVector::from_column_slice(x);
        let d = -(&self.j * &self.gens[a] * z);
        Ok((h.transpose() * d).iter().copied().collect())
    }
    fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        crate::sampling::halton(self.ambient(), 4 * count.max(1), seed, -1.0, 1.0)
            .into_iter()
            .filter_map(|p| self.normalize(&p))
            .filter(|z| self.check_representative(z).is_ok())
            .take(count)
            .collect()
    }
}

/// Real and complex upstairs subspaces, exposed for diagnostics.
pub fn upstairs_eigenspaces(model: &CpnModel) -> (SubspaceBasis, SubspaceBasis) {
    (model.l1.clone(), model.l2.clone())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamilton::{equivariance_residual, homomorphism_residual, isotropy_residual, moment_residual, strong_hamiltonian_test};

    #[test]
    fn reduced_pair_is_generalized_kahler() {
        let m = CpnModel::new(5, 1.0).unwrap();
        let pts = m.sample(10, 1);
        assert_eq!(pts.len(), 10);
        let rep = m.validity(&pts, 1e-6);
        assert_eq!(rep.valid, 10, "{rep:?}");
        assert!(rep.max_b_field > 1e-6);
    }

    #[test]
    fn undeformed_reduction_is_fubini_study() {
        let m = CpnModel::new(5, 0.0).unwrap();
        for z in m.sample(5, 2) {
            let a = m.reduced_pair(&z).unwrap();
            let b = m.fubini_study_pair(&z).unwrap();
            assert!(max_abs_r(&(&a.j1.mat - &b.j1.mat)) < 1e-8);
            assert!(max_abs_r(&(&a.j2.mat - &b.j2.mat)) < 1e-8);
        }
    }

    #[test]
    fn deformation_degenerates_on_the_cylinder() {
        let m = CpnModel::new(5, 1.0).unwrap();
        let mut z = vec![0.0; 12];
        z[0] = 2f64.sqrt();
        assert!(matches!(m.deformed_l1(&z), Err(Error::DeformationDegeneracy { .. })));
        z[0] = 1.0;
        assert!(m.deformed_l1(&z).unwrap().maximal_isotropic);
    }

    #[test]
    fn strong_and_moment_conditions() {
        let m = CpnModel::new(5, 1.0).unwrap();
        let pts = m.sample(10, 3);
        let rep = strong_hamiltonian_test(&m, &pts, 1e-9).unwrap();
        assert!(rep.pass, "{rep:?}");
        for z in &pts {
            for a in 0..3 {
                assert!(moment_residual(&m, a, z).unwrap().sup_norm() < 1e-8);
            }
            assert!(isotropy_residual(&m, z).unwrap() < 1e-12);
        }
    }

    #[test]
    fn upstairs_action_is_hamiltonian() {
        let m = CpnModel::new(5, 1.0).unwrap().upstairs_model().unwrap();
        for x in m.sample(5, 4) {
            assert!(homomorphism_residual(&m, &x).unwrap() < 1e-12);
            assert!(equivariance_residual(&m, &x).unwrap() < 1e-12);
            for a in 0..3 {
                assert!(moment_residual(&m, a, &x).unwrap().sup_norm() < 1e-12);
            }
        }
    }
}
