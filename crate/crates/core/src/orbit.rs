//! Geometry of a complexified orbit: the frame `{X_a, Y_a}`, the complex
//! structure `J₀X = Y, J₀Y = −X`, the metric `g₀`, the form
//! `ω₀(U, V) = g₀(J₀U, V)`, and the moment-map identity `dμ = −ι_X ω₀`.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{combine, lie_bracket, Field};
use crate::flowkn::flow_endpoint;
use crate::glinalg::{max_abs_r, pairing_matrix, singular_spectrum_r, RMat};
use crate::hamilton::HamiltonianModel;
use crate::reduction::rows;

pub const DEFAULT_BOX: f64 = 0.5;
pub const DEFAULT_DT: f64 = 1e-3;
/// Central-difference step for derivatives of frame components.
pub const FD_STEP: f64 = 1e-4;
const FRAME_RANK_TOL: f64 = 1e-9;

/// Exponential coordinates `(t, s) ↦ Flow_{Y_s}(1) ∘ Flow_{X_t}(1)(base)` on
/// a `G^ℂ`-orbit, with `X_t = Σ tᵃX_a` and `Y_s = Σ sᵃY_a`.
pub struct OrbitChart<'a> {
    pub model: &'a HamiltonianModel,
    pub base_point: Vec<f64>,
    pub half_width: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitFrame {
    pub point: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    /// Smallest singular value of `[X | Y]`.
    pub sigma_min: f64,
}

impl OrbitFrame {
    fn matrix(&self) -> RMat {
        let n = self.point.len();
        let cols: Vec<DVector<f64>> =
            self.x.iter().chain(&self.y).map(|c| DVector::from_column_slice(c)).collect();
        if cols.is_empty() {
            RMat::zeros(n, 0)
        } else {
            RMat::from_columns(&cols)
        }
    }
}

impl<'a> OrbitChart<'a> {
    pub fn new(model: &'a HamiltonianModel, base_point: Vec<f64>) -> Result<Self> {
        model.chart.check(&base_point)?;
        Ok(OrbitChart { model, base_point, half_width: DEFAULT_BOX, dt: DEFAULT_DT })
    }

    pub fn dim_g(&self) -> usize {
        self.model.action.dim()
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim_g();
        if p.len() != 2 * d {
            return Err(Error::Dimension { expected: 2 * d, found: p.len() });
        }
        if p.iter().any(|v| v.abs() > self.half_width) {
            return Err(Error::Input(format!("orbit parameters {p:?} outside the box of half-width {}", self.half_width)));
        }
        if d == 0 || p.iter().all(|v| *v == 0.0) {
            return Ok(self.base_point.clone());
        }
        let xt: Field = combine((0..d).map(|a| (p[a], self.model.x_field(a))).collect());
        let ys: Field = combine((0..d).map(|a| (p[d + a], self.model.y_field(a))).collect());
        let mid = flow_endpoint(self.model, &xt, &self.base_point, 1.0, self.dt)?;
        flow_endpoint(self.model, &ys, &mid, 1.0, self.dt)
    }

    /// Seeded parameter points in the box.
    pub fn sample_parameters(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        crate::sampling::halton(2 * self.dim_g(), count, seed, -self.half_width, self.half_width)
    }
}

pub fn frame_at(m: &HamiltonianModel, y: &[f64]) -> Result<OrbitFrame> {
    m.chart.check(y)?;
    let d = m.action.dim();
    let ev = |f: Field| f.eval_f64(y);
    let frame = OrbitFrame {
        point: y.to_vec(),
        x: (0..d).map(|a| ev(m.x_field(a))).collect(),
        y: (0..d).map(|a| ev(m.y_field(a))).collect(),
        xi: (0..d).map(|a| ev(m.xi_field(a))).collect(),
        sigma_min: 0.0,
    };
    let sigma_min = singular_spectrum_r(&frame.matrix()).into_iter().fold(f64::INFINITY, f64::min);
    let sigma_min = if d == 0 { f64::INFINITY } else { sigma_min };
    if sigma_min < FRAME_RANK_TOL {
        return Err(Error::OrbitDegeneracy { sigma: sigma_min });
    }
    Ok(OrbitFrame { sigma_min, ..frame })
}

pub fn orbit_frame(oc: &OrbitChart, p: &[f64]) -> Result<OrbitFrame> {
    frame_at(oc.model, &oc.eval(p)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitMetrics {
    #[serde(serialize_with = "rows")]
    pub j0: RMat,
    #[serde(serialize_with = "rows")]
    pub g0: RMat,
    /// `ω₀(E_i, E_j)` in the frame `(X_1..X_d, Y_1..Y_d)`.
    #[serde(serialize_with = "rows")]
    pub omega0: RMat,
    pub min_eigenvalue: f64,
    /// `|g₀(J₀·, J₀·) − g₀|`.
    pub compatibility: f64,
    pub omega_antisymmetry: f64,
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// The standard block `[[0, −1], [1, 0]]` acting on frame coefficients.
pub fn j0_matrix(d: usize) -> RMat {
    let mut j = RMat::zeros(2 * d, 2 * d);
    for a in 0..d {
        j[(d + a, a)] = 1.0;
        j[(a, d + a)] = -1.0;
    }
    j
}

fn g0_from_frame(m: &HamiltonianModel, fr: &OrbitFrame) -> RMat {
    let d = fr.x.len();
    let g = m.g.eval(&fr.point);
    let gi = g.clone().try_inverse().expect("metric is invertible on the chart");
    let mut g0 = RMat::zeros(2 * d, 2 * d);
    for a in 0..d {
        for b in 0..d {
            let xx = dv(&fr.x[a]).dot(&(&g * dv(&fr.x[b]))) + dv(&fr.xi[a]).dot(&(&gi * dv(&fr.xi[b])));
            let xy = dv(&fr.x[a]).dot(&(&g * dv(&fr.y[b])));
            g0[(a, b)] = xx;
            g0[(d + a, d + b)] = xx;
            g0[(a, d + b)] = xy;
            g0[(d + b, a)] = xy;
        }
    }
    g0
}

fn metrics_from_frame(m: &HamiltonianModel, fr: &OrbitFrame) -> Result<OrbitMetrics> {
    let d = fr.x.len();
    let g0 = g0_from_frame(m, fr);
    let j0 = j0_matrix(d);
    // ω₀(E_i, E_j) = g₀(J₀E_i, E_j).
    let omega0 = j0.transpose() * &g0;
    let eig = if d == 0 { f64::INFINITY } else { ((&g0 + g0.transpose()) * 0.5).symmetric_eigenvalues().min() };
    if eig <= 0.0 {
        return Err(Error::Structural(format!("orbit metric is not positive definite (smallest eigenvalue {eig:e})")));
    }
    Ok(OrbitMetrics {
        compatibility: max_abs_r(&(j0.transpose() * &g0 * &j0 - &g0)),
        omega_antisymmetry: max_abs_r(&(&omega0 + omega0.transpose())),
        j0,
        g0,
        omega0,
        min_eigenvalue: eig,
    })
}

pub fn orbit_metrics(oc: &OrbitChart, p: &[f64]) -> Result<OrbitMetrics> {
    metrics_from_frame(oc.model, &orbit_frame(oc, p)?)
}

/// `g₀` recomputed as the restriction of `𝒢 = −𝕁₁𝕁₂` to
/// `span{X_a + ξ_a, Y_a}`, compared with the frame formula.
pub fn metric_restriction_residual(m: &HamiltonianModel, y: &[f64]) -> Result<f64> {
    let fr = frame_at(m, y)?;
    let n = m.n();
    let d = fr.x.len();
    let gm = -(m.j1.eval(y) * m.j2.eval(y));
    let p = pairing_matrix(n);
    let mut chi = RMat::zeros(2 * n, 2 * d);
    for a in 0..d {
        for i in 0..n {
            chi[(i, a)] = fr.x[a][i];
            chi[(n + i, a)] = fr.xi[a][i];
            chi[(i, d + a)] = fr.y[a][i];
        }
    }
    let restricted = chi.transpose() * p * gm * &chi;
    Ok(max_abs_r(&(restricted - g0_from_frame(m, &fr))))
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitKahlerReport {
    pub parameters: Vec<f64>,
    pub point: Vec<f64>,
    /// `max |dμ_a(E_j) + ω₀(X_a, E_j)|`.
    pub moment_residual: f64,
    /// Largest `|dω₀(E_i, E_j, E_k)|`.
    pub domega_max: f64,
    /// Largest distance of frame brackets from `[X_a, Y_b] = Σ c^k_{ab} Y_k`
    /// and `[Y_a, Y_b] = −Σ c^k_{ab} X_k`.
    pub bracket_residual: f64,
    pub min_eigenvalue: f64,
    pub compatibility: f64,
}

impl OrbitKahlerReport {
    pub fn pass(&self) -> bool {
        self.moment_residual < 1e-6 && self.domega_max < 1e-4 && self.min_eigenvalue > 0.0
    }
}

/// Frame-component functions `y ↦ ω₀(E_i, E_j)(y)` evaluated off the base
/// point (the frame fields are defined on the whole chart).
fn omega_at(m: &HamiltonianModel, y: &[f64]) -> Result<RMat> {
    Ok(metrics_from_frame(m, &frame_at(m, y)?)?.omega0)
}

pub fn orbit_kahler_check(oc: &OrbitChart, p: &[f64]) -> Result<OrbitKahlerReport> {
    let m = oc.model;
    let y = oc.eval(p)?;
    kahler_check_at(m, &y, p.to_vec())
}

pub fn kahler_check_at(m: &HamiltonianModel, y: &[f64], parameters: Vec<f64>) -> Result<OrbitKahlerReport> {
    let fr = frame_at(m, y)?;
    let met = metrics_from_frame(m, &fr)?;
    let d = fr.x.len();
    let frame: Vec<&Vec<f64>> = fr.x.iter().chain(&fr.y).collect();
    let fields: Vec<Field> = (0..d).map(|a| m.x_field(a)).chain((0..d).map(|a| m.y_field(a))).collect();

    let mut moment_residual = 0.0f64;
    for a in 0..d {
        let dmu = m.dmu_field(a).eval_f64(y);
        for (j, e) in frame.iter().enumerate() {
            let lhs: f64 = dmu.iter().zip(e.iter()).map(|(u, v)| u * v).sum();
            moment_residual = moment_residual.max((lhs + met.omega0[(a, j)]).abs());
        }
    }

    // Frame brackets expressed in the frame by least squares.
    let fmat = fr.matrix();
    let pinv = fmat.clone().pseudo_inverse(1e-12).map_err(|e| Error::Structural(e.to_string()))?;
    let k = 2 * d;
    let mut coeff = vec![vec![DVector::zeros(k); k]; k];
    let lie = &m.action.lie;
    let mut bracket_residual = 0.0f64;
    for i in 0..k {
        for j in i + 1..k {
            let br = dv(&lie_bracket(&m.chart, &fields[i], &fields[j], y)?);
            let c = &pinv * &br;
            let mut expect = DVector::zeros(m.n());
            // [X_a, X_b] = c X, [X_a, Y_b] = c Y, [Y_a, Y_b] = −c X.
            let (a, b) = (i % d, j % d);
            for kk in 0..d {
                let ck = lie.c(a, b, kk);
                match (i < d, j < d) {
                    (true, true) => expect += dv(&fr.x[kk]) * ck,
                    (true, false) => expect += dv(&fr.y[kk]) * ck,
                    _ => expect -= dv(&fr.x[kk]) * ck,
                }
            }
            bracket_residual = bracket_residual.max((&br - expect).amax());
            coeff[j][i] = -c.clone();
            coeff[i][j] = c;
        }
    }

    // Derivatives of ω₀ components along each frame direction.
    let mut deriv = Vec::with_capacity(k);
    for e in &frame {
        let plus: Vec<f64> = y.iter().zip(e.iter()).map(|(a, b)| a + FD_STEP * b).collect();
        let minus: Vec<f64> = y.iter().zip(e.iter()).map(|(a, b)| a - FD_STEP * b).collect();
        deriv.push((omega_at(m, &plus)? - omega_at(m, &minus)?) / (2.0 * FD_STEP));
    }
    let w = &met.omega0;
    let wv = |c: &DVector<f64>, l: usize| -> f64 { (0..k).map(|q| c[q] * w[(q, l)]).sum() };
    let mut domega_max = 0.0f64;
    for i in 0..k {
        for j in i + 1..k {
            for l in j + 1..k {
                let v = deriv[i][(j, l)] - deriv[j][(i, l)] + deriv[l][(i, j)] - wv(&coeff[i][j], l)
                    + wv(&coeff[i][l], j)
                    - wv(&coeff[j][l], i);
                domega_max = domega_max.max(v.abs());
            }
        }
    }
    Ok(OrbitKahlerReport {
        parameters,
        point: y.to_vec(),
        moment_residual,
        domega_max,
        bracket_residual,
        min_eigenvalue: met.min_eigenvalue,
        compatibility: met.compatibility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_flat_kahler, make_hyperkahler};
    use crate::reduction::level_set_points;

    #[test]
    fn flat_frame_at_base() {
        let m = make_flat_kahler(2).unwrap();
        let base = vec![0.6, 0.0, 0.0, 0.8];
        let oc = OrbitChart::new(&m, base.clone()).unwrap();
        let fr = orbit_frame(&oc, &[0.0, 0.0]).unwrap();
        let j = crate::models::standard_complex(2);
        let x = &j * dv(&base) * 2.0;
        assert!((dv(&fr.x[0]) - x).amax() < 1e-14);
        assert!((dv(&fr.y[0]) + dv(&base) * 2.0).amax() < 1e-14);
        let rep = orbit_kahler_check(&oc, &[0.3, -0.2]).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert_eq!(rep.domega_max, 0.0);
        // The Y-flow for time s rescales by e^{−2s}.
        let y = oc.eval(&[0.0, 0.25]).unwrap();
        assert!((dv(&y).norm() - (-0.5f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn hyperkahler_orbit() {
        let m = make_hyperkahler(2, 2).unwrap();
        let base = level_set_points(&m, 1, 5, 1e-10, 100_000).remove(0);
        let oc = OrbitChart::new(&m, base).unwrap();
        for p in oc.sample_parameters(5, 1) {
            let rep = orbit_kahler_check(&oc, &p).unwrap();
            assert!(rep.pass(), "{rep:?}");
            assert!(rep.compatibility < 1e-10);
            assert!(rep.bracket_residual < 1e-5);
            assert!(metric_restriction_residual(&m, &rep.point).unwrap() < 1e-8);
            assert!(orbit_frame(&oc, &p).unwrap().sigma_min > 1e-6);
        }
    }

    #[test]
    fn parameters_are_checked() {
        let m = make_flat_kahler(2).unwrap();
        let oc = OrbitChart::new(&m, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(oc.eval(&[0.0]).is_err());
        assert!(oc.eval(&[0.9, 0.0]).is_err());
        assert!(matches!(orbit_frame(&OrbitChart::new(&m, vec![0.0; 4]).unwrap(), &[0.0, 0.0]), Err(Error::OrbitDegeneracy { .. })));
    }
}
