//! Forward-mode dual numbers and the scalar abstraction used by every
//! differentiable field in the crate.
//!
//! Fields are written once, generically over [`Scalar`], and are evaluated
//! with `f64`, [`D1`] (first order) or [`D2`] (nested, second order). Type
//! erasure goes through [`Pointwise`], whose three concrete entry points are
//! selected by [`Scalar::call`]. This lets a combinator (a bracket, a matrix
//! applied to a section, ...) differentiate its children without knowing what
//! they are.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Real scalar usable inside generic field evaluations.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn cst(v: f64) -> Self;
    /// Value part, all tangents dropped.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn scale(self, s: f64) -> Self {
        self * Self::cst(s)
    }

    /// Evaluate a type-erased field at `x`.
    fn call(f: &dyn Pointwise, x: &[Self]) -> Vec<Self>;

    /// Value and Jacobian (`jac[i][j] = ∂_j f_i`) of a type-erased field at
    /// `x`, computed one order of dual numbers above `Self`.
    fn jet(f: &dyn Pointwise, x: &[Self]) -> (Vec<Self>, Vec<Vec<Self>>);
}

/// A field that can be evaluated at three differentiation depths.
pub trait Pointwise: Send + Sync {
    fn out_dim(&self) -> usize;
    fn eval_f64(&self, x: &[f64]) -> Vec<f64>;
    fn eval_d1(&self, x: &[D1]) -> Vec<D1>;
    fn eval_d2(&self, x: &[D2]) -> Vec<D2>;
}

/// A field written generically over the scalar type.
pub trait FieldFn: Send + Sync {
    fn out_dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S>;
}

impl<T: FieldFn> Pointwise for T {
    fn out_dim(&self) -> usize {
        FieldFn::out_dim(self)
    }
    fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        self.eval(x)
    }
    fn eval_d1(&self, x: &[D1]) -> Vec<D1> {
        self.eval(x)
    }
    fn eval_d2(&self, x: &[D2]) -> Vec<D2> {
        self.eval(x)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn call(f: &dyn Pointwise, x: &[Self]) -> Vec<Self> {
        f.eval_f64(x)
    }
    fn jet(f: &dyn Pointwise, x: &[Self]) -> (Vec<Self>, Vec<Vec<Self>>) {
        let n = x.len();
        let m = f.out_dim();
        let mut value = vec![0.0; m];
        let mut jac = vec![vec![0.0; n]; m];
        for j in 0..n {
            let xd: Vec<D1> = x
                .iter()
                .enumerate()
                .map(|(k, &v)| Dual::new(v, if k == j { 1.0 } else { 0.0 }))
                .collect();
            let out = f.eval_d1(&xd);
            for i in 0..m {
                if j == 0 {
                    value[i] = out[i].re;
                }
                jac[i][j] = out[i].eps;
            }
        }
        if n == 0 {
            value = f.eval_f64(x);
        }
        (value, jac)
    }
}

/// First-order dual number `re + eps·ε`, `ε² = 0`.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

pub type D1 = Dual<f64>;
pub type D2 = Dual<D1>;

impl<T> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }
}

impl<T: fmt::Debug> fmt::Debug for Dual<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?} + {:?}ε)", self.re, self.eps)
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}
impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}
impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}
impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.re;
        Dual::new(self.re * inv, (self.eps * o.re - self.re * o.eps) * inv * inv)
    }
}
impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}
impl<T: Scalar> AddAssign for Dual<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}
impl<T: Scalar> SubAssign for Dual<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}
impl<T: Scalar> MulAssign for Dual<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

macro_rules! dual_common {
    () => {
        fn cst(v: f64) -> Self {
            Dual::new(Scalar::cst(v), Scalar::cst(0.0))
        }
        fn re(&self) -> f64 {
            self.re.re()
        }
        fn sqrt(self) -> Self {
            let s = self.re.sqrt();
            Dual::new(s, self.eps / (s + s))
        }
        fn exp(self) -> Self {
            let e = self.re.exp();
            Dual::new(e, self.eps * e)
        }
        fn sin(self) -> Self {
            Dual::new(self.re.sin(), self.eps * self.re.cos())
        }
        fn cos(self) -> Self {
            Dual::new(self.re.cos(), -(self.eps * self.re.sin()))
        }
    };
}

impl Scalar for D1 {
    dual_common!();
    fn call(f: &dyn Pointwise, x: &[Self]) -> Vec<Self> {
        f.eval_d1(x)
    }
    fn jet(f: &dyn Pointwise, x: &[Self]) -> (Vec<Self>, Vec<Vec<Self>>) {
        let n = x.len();
        let m = f.out_dim();
        let mut value = vec![D1::zero(); m];
        let mut jac = vec![vec![D1::zero(); n]; m];
        for j in 0..n {
            let xd: Vec<D2> = x
                .iter()
                .enumerate()
                .map(|(k, &v)| Dual::new(v, if k == j { D1::one() } else { D1::zero() }))
                .collect();
            let out = f.eval_d2(&xd);
            for i in 0..m {
                if j == 0 {
                    value[i] = out[i].re;
                }
                jac[i][j] = out[i].eps;
            }
        }
        if n == 0 {
            value = f.eval_d1(x);
        }
        (value, jac)
    }
}

impl Scalar for D2 {
    dual_common!();
    fn call(f: &dyn Pointwise, x: &[Self]) -> Vec<Self> {
        f.eval_d2(x)
    }
    fn jet(_f: &dyn Pointwise, _x: &[Self]) -> (Vec<Self>, Vec<Vec<Self>>) {
        panic!("third-order derivatives are not supported: nesting depth of brackets exceeds two")
    }
}

/// Complex number over a generic real scalar, used where complexified
/// sections have to be differentiated.
#[derive(Clone, Copy, Debug)]
pub struct Cx<S> {
    pub re: S,
    pub im: S,
}

impl<S: Scalar> Cx<S> {
    pub fn new(re: S, im: S) -> Self {
        Cx { re, im }
    }
    pub fn real(re: S) -> Self {
        Cx { re, im: S::zero() }
    }
    pub fn zero() -> Self {
        Cx::real(S::zero())
    }
    pub fn from_c64(z: num_complex::Complex64) -> Self {
        Cx::new(S::cst(z.re), S::cst(z.im))
    }
    pub fn conj(self) -> Self {
        Cx::new(self.re, -self.im)
    }
    pub fn norm_sqr_re(&self) -> f64 {
        let (a, b) = (self.re.re(), self.im.re());
        a * a + b * b
    }
    pub fn recip(self) -> Self {
        let d = self.re * self.re + self.im * self.im;
        Cx::new(self.re / d, -self.im / d)
    }
}

impl<S: Scalar> Add for Cx<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Cx::new(self.re + o.re, self.im + o.im)
    }
}
impl<S: Scalar> Sub for Cx<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Cx::new(self.re - o.re, self.im - o.im)
    }
}
impl<S: Scalar> Mul for Cx<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Cx::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}
impl<S: Scalar> Div for Cx<S> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}
impl<S: Scalar> Neg for Cx<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Cx::new(-self.re, -self.im)
    }
}

/// Solve `a·x = b` for small dense systems by Gaussian elimination with
/// partial pivoting on the value parts. Returns `None` if a pivot vanishes.
pub fn solve_generic<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Option<Vec<Vec<S>>> {
    let n = a.len();
    let mut m: Vec<Vec<S>> = a.to_vec();
    let mut rhs: Vec<Vec<S>> = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i][col].re().abs().partial_cmp(&m[j][col].re().abs()).unwrap()
        })?;
        if m[piv][col].re().abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let inv = S::one() / m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] * inv;
            for k in col..n {
                let t = m[col][k];
                m[row][k] -= factor * t;
            }
            for k in 0..rhs[row].len() {
                let t = rhs[col][k];
                rhs[row][k] -= factor * t;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = S::one() / m[col][col];
        for k in 0..rhs[col].len() {
            let mut acc = rhs[col][k];
            for j in col + 1..n {
                acc -= m[col][j] * rhs[j][k];
            }
            rhs[col][k] = acc * inv;
        }
    }
    Some(rhs)
}

/// Complex counterpart of [`solve_generic`].
pub fn solve_generic_cx<S: Scalar>(a: &[Vec<Cx<S>>], b: &[Vec<Cx<S>>]) -> Option<Vec<Vec<Cx<S>>>> {
    let n = a.len();
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i][col].norm_sqr_re().partial_cmp(&m[j][col].norm_sqr_re()).unwrap()
        })?;
        if m[piv][col].norm_sqr_re() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let inv = m[col][col].recip();
        for row in col + 1..n {
            let factor = m[row][col] * inv;
            for k in col..n {
                let t = m[col][k];
                m[row][k] = m[row][k] - factor * t;
            }
            for k in 0..rhs[row].len() {
                let t = rhs[col][k];
                rhs[row][k] = rhs[row][k] - factor * t;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = m[col][col].recip();
        for k in 0..rhs[col].len() {
            let mut acc = rhs[col][k];
            for j in col + 1..n {
                acc = acc - m[col][j] * rhs[j][k];
            }
            rhs[col][k] = acc * inv;
        }
    }
    Some(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Cubic;
    impl FieldFn for Cubic {
        fn out_dim(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![x[0] * x[0] * x[1], x[0].sin() * x[1].exp() / (x[1] + S::cst(3.0))]
        }
    }

    #[test]
    fn first_order_matches_central_differences() {
        let x = [0.3, -0.7];
        let (v, jac) = f64::jet(&Cubic, &x);
        let h = 1e-5;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fp = Cubic.eval(&xp);
            let fm = Cubic.eval(&xm);
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - jac[i][j]).abs() <= 1e-6 * (1.0 + fd.abs()));
            }
        }
        assert_eq!(v, Cubic.eval(&x));
    }

    #[test]
    fn nested_duals_give_second_derivatives() {
        // f0 = x² y: ∂x∂x f0 = 2y, ∂x∂y f0 = 2x.
        let x = [D1::new(0.3, 1.0), D1::new(-0.7, 0.0)];
        let (_, jac) = D1::jet(&Cubic, &x);
        assert!((jac[0][0].eps - 2.0 * -0.7).abs() < 1e-14);
        assert!((jac[0][1].eps - 2.0 * 0.3).abs() < 1e-14);
    }

    #[test]
    fn generic_solvers() {
        let a = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        let b = vec![vec![4.0], vec![3.0]];
        let x = solve_generic(&a, &b).unwrap();
        assert!((x[0][0] - 1.0).abs() < 1e-14 && (x[1][0] - 2.0).abs() < 1e-14);

        let i = Cx::new(0.0, 1.0);
        let one = Cx::real(1.0);
        let a = vec![vec![i, one], vec![one, Cx::zero()]];
        let b = vec![vec![Cx::real(2.0)], vec![Cx::new(0.0, 3.0)]];
        let x = solve_generic_cx(&a, &b).unwrap();
        // x0 = 3i, i·3i + x1 = 2 → x1 = 5
        assert!((x[0][0].im - 3.0).abs() < 1e-14 && (x[1][0].re - 5.0).abs() < 1e-14);
    }
}
