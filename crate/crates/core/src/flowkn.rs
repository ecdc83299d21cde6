//! Flows of the imaginary generators `Y` and descent of `‖μ‖²` towards the
//! zero level set.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::autodiff::Scalar;
use crate::error::{Error, Result};
use crate::fields::{combine, two_form_map, Field};
use crate::glinalg::{singular_spectrum_r, RMat};
use crate::hamilton::{y_at, HamiltonianModel, PointwiseModel};

/// Largest accepted Richardson error estimate per step.
pub const STEP_TOL: f64 = 1e-6;
pub const DEFAULT_DESCENT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_STEPS: usize = 100_000;
const ARMIJO_SHRINK: f64 = 0.5;
const ARMIJO_SLOPE: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;
const FIXED_POINT_TOL: f64 = 1e-15;
/// Largest Euclidean displacement of a single descent step.
const MAX_DISPLACEMENT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowExit {
    Completed,
    /// `Y_u` vanishes at the start point; the trajectory has one row.
    FixedPoint,
    LeftDomain,
    StepRejected,
    Converged,
    MaxSteps,
    Stalled,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Map matrices of `B_t` at `x(t)`.
    #[serde(skip)]
    pub b_accumulator: Vec<RMat>,
    pub h_values: Vec<f64>,
    pub mu_norms: Vec<f64>,
    pub exit: FlowExit,
    pub rejected_steps: usize,
}

impl FlowTrajectory {
    fn start(x0: &[f64], n: usize, h: f64, mu_norm: f64) -> Self {
        FlowTrajectory {
            times: vec![0.0],
            points: vec![x0.to_vec()],
            b_accumulator: vec![RMat::zeros(n, n)],
            h_values: vec![h],
            mu_norms: vec![mu_norm],
            exit: FlowExit::Completed,
            rejected_steps: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_point(&self) -> &[f64] {
        self.points.last().expect("trajectories hold the initial point")
    }

    pub fn final_mu_norm(&self) -> f64 {
        *self.mu_norms.last().expect("trajectories hold the initial point")
    }

    /// Lengths agree and times strictly increase.
    pub fn is_consistent(&self) -> bool {
        let n = self.times.len();
        [self.points.len(), self.b_accumulator.len(), self.h_values.len(), self.mu_norms.len()].iter().all(|&l| l == n)
            && self.times.windows(2).all(|w| w[1] > w[0])
    }

    /// CSV with header `t,x_1..x_n,h,mu_norm`, one row per stored point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.points.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.push("h".into());
        header.push("mu_norm".into());
        w.write_record(&header).map_err(io_err)?;
        for k in 0..self.len() {
            let mut row = vec![fmt17(self.times[k])];
            row.extend(self.points[k].iter().map(|&v| fmt17(v)));
            row.push(fmt17(self.h_values[k]));
            row.push(fmt17(self.mu_norms[k]));
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
        Ok(())
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Input(format!("csv output failed: {e}"))
}

/// Seventeen significant digits, identical across runs.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn axpy(x: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

/// `Y_u = Σ u_a Y_a` as a vector field.
pub fn y_combination(m: &HamiltonianModel, u: &[f64]) -> Result<Field> {
    if u.len() != m.action.dim() {
        return Err(Error::Dimension { expected: m.action.dim(), found: u.len() });
    }
    Ok(combine(u.iter().enumerate().map(|(a, &c)| (c, m.y_field(a))).collect()))
}

fn h_value(m: &HamiltonianModel, u: &[f64], x: &[f64]) -> f64 {
    m.mu.eval(x).iter().zip(u).map(|(a, b)| a * b).sum()
}

/// Generic RK4 with step doubling. `rhs` returns the derivative of the
/// flattened state.
struct Rk4<'a> {
    rhs: &'a dyn Fn(&[f64]) -> Result<Vec<f64>>,
}

impl Rk4<'_> {
    fn step(&self, y: &[f64], h: f64) -> Result<Vec<f64>> {
        let k1 = (self.rhs)(y)?;
        let k2 = (self.rhs)(&axpy(y, h / 2.0, &k1))?;
        let k3 = (self.rhs)(&axpy(y, h / 2.0, &k2))?;
        let k4 = (self.rhs)(&axpy(y, h, &k3))?;
        Ok((0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }

    /// Two half steps, with the Richardson estimate against one full step
    /// taken over the first `check` components.
    fn checked_step(&self, y: &[f64], h: f64, check: usize) -> Result<(Vec<f64>, f64)> {
        let full = self.step(y, h)?;
        let half = self.step(&self.step(y, h / 2.0)?, h / 2.0)?;
        let err = (0..check).fold(0.0f64, |e, i| e.max((half[i] - full[i]).abs())) / 15.0;
        Ok((half, err))
    }
}

fn point_rhs(m: &dyn PointwiseModel, f: &dyn Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64]) -> Result<Vec<f64>> {
    m.check_point(x)?;
    f(x)
}

/// Integrates `x′ = Y_u(x)` from `x0` for time `t_final` with nominal step
/// `dt`, accumulating `B_t = −Φ_t^{−T}(∫₀ᵗ Φ_sᵀ(ι_Y H)Φ_s ds)Φ_t^{−1}`,
/// where `Φ` is the linearized flow.
pub fn integrate_generator_flow(
    m: &HamiltonianModel,
    u: &[f64],
    x0: &[f64],
    t_final: f64,
    dt: f64,
) -> Result<FlowTrajectory> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::Input(format!("need dt > 0 and T ≥ 0, got dt = {dt}, T = {t_final}")));
    }
    m.chart.check(x0)?;
    let n = m.n();
    let y = y_combination(m, u)?;
    let twisted = !m.h.is_zero();
    let velocity = |x: &[f64]| Ok(y.eval_f64(x));
    // State: x, then Φ column-major when twisted.
    let rhs = |s: &[f64]| -> Result<Vec<f64>> {
        let x = &s[..n];
        if !twisted {
            return point_rhs(m, &velocity, x);
        }
        m.chart.check(x)?;
        let (v, jac) = <f64 as Scalar>::jet(y.as_ref(), x);
        let dy = DMatrix::from_fn(n, n, |i, j| jac[i][j]);
        let phi = DMatrix::from_column_slice(n, n, &s[n..]);
        let mut out = v;
        out.extend((dy * phi).iter());
        Ok(out)
    };
    let rk = Rk4 { rhs: &rhs };
    let iota = |x: &[f64]| -> RMat {
        let hx = m.h.eval(x);
        let yv = y.eval_f64(x);
        let comps: Vec<f64> =
            (0..n * n).map(|ij| (0..n).map(|k| hx[k * n * n + ij] * yv[k]).sum()).collect();
        two_form_map(&comps, n)
    };

    let mu0 = m.mu.eval(x0);
    let mut tr = FlowTrajectory::start(x0, n, h_value(m, u, x0), norm(&mu0));
    let mut state = x0.to_vec();
    if twisted {
        state.extend(RMat::identity(n, n).iter());
    }
    if y.eval_f64(x0).iter().all(|v| v.abs() < FIXED_POINT_TOL) {
        tr.exit = FlowExit::FixedPoint;
        return Ok(tr);
    }
    let mut integrand_prev = if twisted { Some(iota(x0)) } else { None };
    let mut integral = RMat::zeros(n, n);
    let mut t = 0.0;
    let mut h = dt;
    while t < t_final * (1.0 - 1e-14) {
        let step = h.min(t_final - t);
        let (next, err) = match rk.checked_step(&state, step, n) {
            Ok(r) => r,
            Err(Error::Domain { .. }) => {
                if step < MIN_STEP {
                    tr.exit = FlowExit::LeftDomain;
                    break;
                }
                h = step / 2.0;
                tr.rejected_steps += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if err > STEP_TOL {
            tr.rejected_steps += 1;
            h = step / 2.0;
            if h < MIN_STEP {
                tr.exit = FlowExit::StepRejected;
                break;
            }
            continue;
        }
        let x = &next[..n];
        if !m.chart.contains(x) {
            tr.exit = FlowExit::LeftDomain;
            break;
        }
        t += step;
        let b = if let Some(prev) = integrand_prev.as_mut() {
            let phi = DMatrix::from_column_slice(n, n, &next[n..]);
            let cur = iota(x);
            let cur = phi.transpose() * &cur * &phi;
            integral += (&*prev + &cur) * (step / 2.0);
            *prev = cur;
            let inv = phi.clone().try_inverse().ok_or(Error::Degenerate { sigma: 0.0, tol: 0.0 })?;
            -(inv.transpose() * &integral * inv)
        } else {
            RMat::zeros(n, n)
        };
        tr.times.push(t);
        tr.points.push(x.to_vec());
        tr.b_accumulator.push(b);
        tr.h_values.push(h_value(m, u, x));
        tr.mu_norms.push(norm(&m.mu.eval(x)));
        state = next;
        h = dt;
    }
    Ok(tr)
}

/// Endpoint of the flow of `v` for time `t_final` (negative times allowed),
/// with the same step control as the generator flow.
pub fn flow_endpoint(m: &dyn PointwiseModel, v: &Field, x0: &[f64], t_final: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Input(format!("need dt > 0, got {dt}")));
    }
    m.check_point(x0)?;
    let sign = if t_final < 0.0 { -1.0 } else { 1.0 };
    let vel = |x: &[f64]| Ok(v.eval_f64(x).into_iter().map(|c| sign * c).collect());
    let rhs = |x: &[f64]| point_rhs(m, &vel, x);
    let rk = Rk4 { rhs: &rhs };
    let total = t_final.abs();
    let (mut t, mut h, mut x) = (0.0, dt, x0.to_vec());
    while t < total * (1.0 - 1e-14) {
        let step = h.min(total - t);
        match rk.checked_step(&x, step, x.len()) {
            Ok((next, err)) if err <= STEP_TOL => {
                t += step;
                x = next;
                h = dt;
            }
            Ok(_) | Err(Error::Domain { .. }) => {
                h = step / 2.0;
                if h < MIN_STEP {
                    return Err(Error::Domain { chart: m.name().to_string(), point: x });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(x)
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    /// Largest `|h′ + g(Y, Y)|` with `h′` by five-point finite differences.
    pub max_discrepancy: f64,
    /// Largest `|dμ_u(Y_u) + g(Y_u, Y_u)|` evaluated exactly.
    pub max_pointwise: f64,
    /// `|h(T) − h(0) + ∫₀ᵀ g(Y, Y) dt|` by composite Simpson quadrature.
    pub integral_residual: f64,
    pub non_increasing: bool,
}

/// Derivative at `t[k]` of the polynomial interpolating `v` on the (up to)
/// five nearest nodes.
fn fd_derivative(t: &[f64], v: &[f64], k: usize) -> f64 {
    let n = t.len();
    let w = n.min(5);
    let lo = k.saturating_sub(w / 2).min(n - w);
    let nodes: Vec<usize> = (lo..lo + w).collect();
    let x = t[k];
    let mut d = 0.0;
    for &i in &nodes {
        // l_i'(x) = Σ_{j≠i} 1/(t_i − t_j) Π_{m≠i,j} (x − t_m)/(t_i − t_m)
        let mut li = 0.0;
        for &j in &nodes {
            if j == i {
                continue;
            }
            let mut p = 1.0 / (t[i] - t[j]);
            for &m in &nodes {
                if m != i && m != j {
                    p *= (x - t[m]) / (t[i] - t[m]);
                }
            }
            li += p;
        }
        d += li * v[i];
    }
    d
}

/// Integral of the piecewise parabola through consecutive node triples.
fn simpson(t: &[f64], f: &[f64]) -> f64 {
    let n = t.len();
    if n < 3 {
        return (1..n).map(|k| (t[k] - t[k - 1]) * (f[k] + f[k - 1]) / 2.0).sum();
    }
    // ∫_{a}^{b} of the parabola through (t0,f0),(t1,f1),(t2,f2).
    let piece = |i: [usize; 3], a: f64, b: f64| -> f64 {
        let mut s = 0.0;
        for p in 0..3 {
            let (q, r) = ((p + 1) % 3, (p + 2) % 3);
            let (tq, tr) = (t[i[q]], t[i[r]]);
            let den = (t[i[p]] - tq) * (t[i[p]] - tr);
            let anti = |x: f64| x * x * x / 3.0 - (tq + tr) * x * x / 2.0 + tq * tr * x;
            s += f[i[p]] * (anti(b) - anti(a)) / den;
        }
        s
    };
    let mut total = 0.0;
    let mut k = 0;
    while k + 2 < n {
        total += piece([k, k + 1, k + 2], t[k], t[k + 2]);
        k += 2;
    }
    if k + 1 < n {
        total += piece([n - 3, n - 2, n - 1], t[n - 2], t[n - 1]);
    }
    total
}

pub fn h_monotonicity_check(tr: &FlowTrajectory, m: &HamiltonianModel, u: &[f64]) -> Result<MonotonicityReport> {
    let y = y_combination(m, u)?;
    let dmu = combine(u.iter().enumerate().map(|(a, &c)| (c, m.dmu_field(a))).collect());
    let gyy: Vec<f64> = tr
        .points
        .iter()
        .map(|x| {
            let yv = DVector::from_vec(y.eval_f64(x));
            (&yv.transpose() * m.g.eval(x) * &yv)[0]
        })
        .collect();
    let mut rep = MonotonicityReport {
        max_discrepancy: 0.0,
        max_pointwise: 0.0,
        integral_residual: 0.0,
        non_increasing: tr.h_values.windows(2).all(|w| w[1] <= w[0] + 1e-15),
    };
    for (k, x) in tr.points.iter().enumerate() {
        let yv = y.eval_f64(x);
        let d: f64 = dmu.eval_f64(x).iter().zip(&yv).map(|(a, b)| a * b).sum();
        rep.max_pointwise = rep.max_pointwise.max((d + gyy[k]).abs());
        if tr.len() >= 3 {
            let fd = fd_derivative(&tr.times, &tr.h_values, k);
            rep.max_discrepancy = rep.max_discrepancy.max((fd + gyy[k]).abs());
        }
    }
    let integral = simpson(&tr.times, &gyy);
    rep.integral_residual = (tr.h_values[tr.len() - 1] - tr.h_values[0] + integral).abs();
    Ok(rep)
}

/// `−grad f = Σ_a μ_a Y_a` for `f = ½‖μ‖²`.
fn descent_direction(m: &dyn PointwiseModel, x: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    let mut d = vec![0.0; x.len()];
    for (a, &ma) in mu.iter().enumerate() {
        let ya = y_at(m, a, x)?;
        for (di, yi) in d.iter_mut().zip(&ya) {
            *di += ma * yi;
        }
    }
    Ok(d)
}

fn half_norm_sq(v: &[f64]) -> f64 {
    0.5 * v.iter().map(|a| a * a).sum::<f64>()
}

/// Armijo-backtracked gradient descent on `½‖μ‖²`. The trajectory's times
/// are iteration counts and `h_values` hold `½‖μ‖²`.
pub fn mu_norm_descent(m: &dyn PointwiseModel, x0: &[f64], tol: f64, max_steps: usize) -> Result<FlowTrajectory> {
    m.check_point(x0)?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut mu = m.mu_at(&x)?;
    let mut tr = FlowTrajectory::start(x0, n, half_norm_sq(&mu), norm(&mu));
    let mut step: f64 = 1.0;
    for k in 1..=max_steps {
        if norm(&mu) < tol {
            tr.exit = FlowExit::Converged;
            return Ok(tr);
        }
        let d = descent_direction(m, &x, &mu)?;
        let (bh, _) = m.bihermitian_at(&x)?;
        let dv = DVector::from_column_slice(&d);
        // df(d) = −g(grad f, grad f).
        let slope = -(&dv.transpose() * &bh.g * &dv)[0];
        if -slope < 1e-300 {
            tr.exit = FlowExit::Stalled;
            return Ok(tr);
        }
        let f0 = half_norm_sq(&mu);
        let mut s = (2.0 * step).min(1.0f64).min(MAX_DISPLACEMENT / norm(&d));
        let accepted = loop {
            let cand = axpy(&x, s, &d);
            if m.check_point(&cand).is_ok() {
                let mc = m.mu_at(&cand)?;
                let f1 = half_norm_sq(&mc);
                if f1 <= f0 + ARMIJO_SLOPE * s * slope && f1 <= f0 {
                    break Some((cand, mc));
                }
            }
            s *= ARMIJO_SHRINK;
            tr.rejected_steps += 1;
            if s < MIN_STEP {
                break None;
            }
        };
        let Some((cand, mc)) = accepted else {
            tr.exit = FlowExit::Stalled;
            return Ok(tr);
        };
        step = s;
        x = cand;
        mu = mc;
        tr.times.push(k as f64);
        tr.points.push(x.clone());
        tr.b_accumulator.push(RMat::zeros(n, n));
        tr.h_values.push(half_norm_sq(&mu));
        tr.mu_norms.push(norm(&mu));
    }
    tr.exit = if norm(&mu) < tol { FlowExit::Converged } else { FlowExit::MaxSteps };
    Ok(tr)
}

/// Continuous descent `x′ = Σ_a μ_a Y_a`, integrated like a generator flow.
pub fn integrate_descent_flow(m: &dyn PointwiseModel, x0: &[f64], t_final: f64, dt: f64) -> Result<FlowTrajectory> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::Input(format!("need dt > 0 and T ≥ 0, got dt = {dt}, T = {t_final}")));
    }
    m.check_point(x0)?;
    let n = x0.len();
    let vel = |x: &[f64]| -> Result<Vec<f64>> {
        let mu = m.mu_at(x)?;
        descent_direction(m, x, &mu)
    };
    let rhs = |x: &[f64]| point_rhs(m, &vel, x);
    let rk = Rk4 { rhs: &rhs };
    let mu0 = m.mu_at(x0)?;
    let mut tr = FlowTrajectory::start(x0, n, half_norm_sq(&mu0), norm(&mu0));
    let (mut t, mut h, mut x) = (0.0, dt, x0.to_vec());
    while t < t_final * (1.0 - 1e-14) {
        let step = h.min(t_final - t);
        match rk.checked_step(&x, step, n) {
            Ok((next, err)) if err <= STEP_TOL => {
                t += step;
                x = next;
                let mu = m.mu_at(&x)?;
                tr.times.push(t);
                tr.points.push(x.clone());
                tr.b_accumulator.push(RMat::zeros(n, n));
                tr.h_values.push(half_norm_sq(&mu));
                tr.mu_norms.push(norm(&mu));
                h = dt;
            }
            Ok(_) | Err(Error::Domain { .. }) => {
                tr.rejected_steps += 1;
                h = step / 2.0;
                if h < MIN_STEP {
                    tr.exit = FlowExit::StepRejected;
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(tr)
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Stability {
    Stable { witness: Vec<f64>, mu_norm: f64, steps: usize },
    Undetermined { last_point: Vec<f64>, mu_norm: f64, steps: usize },
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable { .. })
    }
}

pub fn stability_probe(m: &dyn PointwiseModel, x0: &[f64], tol: f64, max_steps: usize) -> Result<Stability> {
    let tr = mu_norm_descent(m, x0, tol, max_steps)?;
    let steps = tr.len() - 1;
    let mu_norm = tr.final_mu_norm();
    Ok(if tr.exit == FlowExit::Converged {
        Stability::Stable { witness: tr.last_point().to_vec(), mu_norm, steps }
    } else {
        Stability::Undetermined { last_point: tr.last_point().to_vec(), mu_norm, steps }
    })
}

/// Smallest singular value of the matrix with columns `Y_a(x)`.
pub fn y_rank_margin(m: &dyn PointwiseModel, x: &[f64]) -> Result<f64> {
    let d = m.lie().dim;
    let cols: Vec<DVector<f64>> = (0..d).map(|a| y_at(m, a, x).map(DVector::from_vec)).collect::<Result<_>>()?;
    let s = singular_spectrum_r(&RMat::from_columns(&cols));
    Ok(s.iter().copied().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{field, Affine, Chart, Quadratic, ThreeForm};
    use crate::hamilton::{ExtendedAction, LieAlgebraData, MomentMap};
    use crate::models::{make_flat_kahler, make_hyperkahler, standard_complex};
    use crate::structures::BiHermitianData;

    #[test]
    fn generator_flow_is_radial_exponential() {
        let m = make_flat_kahler(2).unwrap();
        let x0 = [2.0, 0.0, 0.0, 0.0];
        let tr = integrate_generator_flow(&m, &[1.0], &x0, 1.0, 1e-2).unwrap();
        assert!(tr.is_consistent());
        assert_eq!(tr.exit, FlowExit::Completed);
        for (t, x) in tr.times.iter().zip(&tr.points) {
            assert!((norm(x) - 2.0 * (-2.0 * t).exp()).abs() < 1e-8);
        }
        assert!(tr.b_accumulator.iter().all(|b| b.iter().all(|v| *v == 0.0)));
        let rep = h_monotonicity_check(&tr, &m, &[1.0]).unwrap();
        assert!(rep.non_increasing && rep.max_discrepancy < 1e-5 && rep.integral_residual < 1e-4, "{rep:?}");
    }

    #[test]
    fn fixed_point_is_constant() {
        let m = make_flat_kahler(2).unwrap();
        let tr = integrate_generator_flow(&m, &[1.0], &[0.0; 4], 0.5, 0.1).unwrap();
        assert_eq!((tr.len(), tr.exit), (1, FlowExit::FixedPoint));
        let rep = h_monotonicity_check(&tr, &m, &[1.0]).unwrap();
        assert!(rep.max_discrepancy < 1e-12);
    }

    #[test]
    fn descent_reaches_the_sphere() {
        let m = make_flat_kahler(2).unwrap();
        let tr = mu_norm_descent(&m, &[2.0, 0.0, 0.0, 0.0], 1e-6, 10_000).unwrap();
        assert_eq!(tr.exit, FlowExit::Converged);
        assert!(tr.mu_norms.windows(2).all(|w| w[1] <= w[0]));
        let x = tr.last_point();
        assert!((x[0] - 1.0).abs() < 1e-4 && x[1..].iter().all(|v| v.abs() < 1e-12));
        assert_eq!(mu_norm_descent(&m, x, 1e-6, 10).unwrap().len(), 1);
        assert!(!stability_probe(&m, &[0.0; 4], 1e-8, 1000).unwrap().is_stable());
    }

    #[test]
    fn continuous_descent_matches_logistic_radius() {
        let m = make_flat_kahler(1).unwrap();
        let tr = integrate_descent_flow(&m, &[2.0, 0.0], 2.0, 1e-3).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.points) {
            let r2 = 1.0 / (1.0 - 0.75 * (-4.0 * t).exp());
            assert!((norm(x) - r2.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn hyperkahler_points_are_stable() {
        let m = make_hyperkahler(2, 2).unwrap();
        for x in m.sample(5, 9) {
            match stability_probe(&m, &x, 1e-8, 100_000).unwrap() {
                Stability::Stable { witness, .. } => assert!(y_rank_margin(&m, &witness).unwrap() > 1e-6),
                s => panic!("{s:?}"),
            }
        }
    }

    #[test]
    fn twisted_accumulator_matches_direct_quadrature() {
        // Flat ℝ⁴ with H = c dx¹∧dx²∧dx⁴ and a translation-like action
        // whose Y-field is constant: Y = −∂₄, so Φ = id and
        // B_t = −t ι_Y H.
        let n = 4;
        let data = BiHermitianData::kahler(RMat::identity(n, n), standard_complex(2)).unwrap();
        let a = RMat::zeros(2 * n, n);
        let gen = field(Affine { a, b: vec![0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0] });
        let mut l = vec![0.0; n];
        l[3] = 1.0;
        let mu = field(Quadratic { q: RMat::zeros(n, n), l, c: 0.0 });
        let h = ThreeForm::elementary(n, [0, 1, 3], 0.7);
        let m = HamiltonianModel::with_constant_structure(
            "twisted",
            Chart::euclidean(n),
            &data,
            h,
            ExtendedAction { generators: vec![gen], lie: LieAlgebraData::abelian(1) },
            MomentMap { components: vec![mu] },
        )
        .unwrap();
        let tr = integrate_generator_flow(&m, &[1.0], &[0.1, 0.2, 0.3, 0.4], 1.0, 0.1).unwrap();
        let t = *tr.times.last().unwrap();
        let b = tr.b_accumulator.last().unwrap();
        let x = tr.last_point();
        let hx = m.h.eval(x);
        let yv = y_combination(&m, &[1.0]).unwrap().eval_f64(x);
        let comps: Vec<f64> = (0..n * n).map(|ij| (0..n).map(|k| hx[k * n * n + ij] * yv[k]).sum()).collect();
        let expect = two_form_map(&comps, n) * (-t);
        assert!(crate::glinalg::max_abs_r(&(b - &expect)) < 1e-12);
        assert!(crate::glinalg::max_abs_r(&expect) > 0.1);
    }
}
