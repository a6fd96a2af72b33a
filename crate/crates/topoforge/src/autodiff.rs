//! Single-tangent forward-mode differentiation.
//!
//! Coefficient callbacks are written once over [`Dual`] and evaluated either
//! with zero tangents (plain values) or with one seeded tangent direction.
//! Vectors and matrices are fixed 2-arrays; for scalar problems (m = 1) the
//! second row is unused and stays zero.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Point, DIM};

/// Value plus one directional derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
}

/// State value y1 ∈ R^m (padded to 2).
pub type DVec = [Dual; 2];
/// State gradient y2 ∈ R^{m×d}, row i = gradient of component i.
pub type DMat = [[Dual; 2]; 2];

pub type RVec = [f64; 2];
pub type RMat = [[f64; 2]; 2];

impl Dual {
    pub const ZERO: Dual = Dual { value: 0.0, deriv: 0.0 };
    pub const ONE: Dual = Dual { value: 1.0, deriv: 0.0 };

    #[inline]
    pub const fn new(value: f64, deriv: f64) -> Self {
        Dual { value, deriv }
    }

    #[inline]
    pub const fn constant(value: f64) -> Self {
        Dual { value, deriv: 0.0 }
    }

    #[inline]
    pub const fn variable(value: f64) -> Self {
        Dual { value, deriv: 1.0 }
    }

    #[inline]
    pub fn exp(self) -> Self {
        let e = self.value.exp();
        Dual::new(e, e * self.deriv)
    }

    #[inline]
    pub fn ln(self) -> Self {
        Dual::new(self.value.ln(), self.deriv / self.value)
    }

    #[inline]
    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        Dual::new(s, 0.5 * self.deriv / s)
    }

    #[inline]
    pub fn powi(self, n: i32) -> Self {
        match n {
            0 => Dual::ONE,
            1 => self,
            _ => Dual::new(self.value.powi(n), n as f64 * self.value.powi(n - 1) * self.deriv),
        }
    }

    #[inline]
    pub fn powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Dual::ONE;
        }
        Dual::new(self.value.powf(p), p * self.value.powf(p - 1.0) * self.deriv)
    }

    #[inline]
    pub fn recip(self) -> Self {
        Dual::new(1.0 / self.value, -self.deriv / (self.value * self.value))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.value.is_finite() && self.deriv.is_finite()
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Self {
        Dual::constant(v)
    }
}

impl fmt::Display for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}ε", self.value, self.deriv)
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.value + o.value, self.deriv + o.deriv)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.value - o.value, self.deriv - o.deriv)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.value * o.value, self.deriv * o.value + self.value * o.deriv)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.value;
        Dual::new(self.value * inv, (self.deriv - self.value * inv * o.deriv) * inv)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.deriv)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: f64) -> Dual {
        Dual::new(self.value + o, self.deriv)
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: f64) -> Dual {
        Dual::new(self.value - o, self.deriv)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: f64) -> Dual {
        Dual::new(self.value * o, self.deriv * o)
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: f64) -> Dual {
        Dual::new(self.value / o, self.deriv / o)
    }
}

impl Add<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self + o.value, o.deriv)
    }
}

impl Sub<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self - o.value, -o.deriv)
    }
}

impl Mul<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self * o.value, self * o.deriv)
    }
}

impl Div<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        Dual::constant(self) / o
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        *self = *self + o;
    }
}

impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, o: Dual) {
        *self = *self - o;
    }
}

impl MulAssign for Dual {
    #[inline]
    fn mul_assign(&mut self, o: Dual) {
        *self = *self * o;
    }
}

impl MulAssign<f64> for Dual {
    #[inline]
    fn mul_assign(&mut self, o: f64) {
        *self = *self * o;
    }
}

impl std::iter::Sum for Dual {
    fn sum<I: Iterator<Item = Dual>>(iter: I) -> Dual {
        iter.fold(Dual::ZERO, |a, b| a + b)
    }
}

pub const ZERO_VEC: DVec = [Dual::ZERO; 2];
pub const ZERO_MAT: DMat = [[Dual::ZERO; 2]; 2];

pub fn const_vec(v: &RVec) -> DVec {
    [Dual::constant(v[0]), Dual::constant(v[1])]
}

pub fn const_mat(a: &RMat) -> DMat {
    [
        [Dual::constant(a[0][0]), Dual::constant(a[0][1])],
        [Dual::constant(a[1][0]), Dual::constant(a[1][1])],
    ]
}

/// Frobenius product A : B.
#[inline]
pub fn frob(a: &DMat, b: &DMat) -> Dual {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Product of two 2×2 matrices.
#[inline]
pub fn matmul(a: &DMat, b: &DMat) -> DMat {
    let mut c = ZERO_MAT;
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

#[inline]
pub fn transpose(a: &DMat) -> DMat {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// One unit tangent in (y1, y2)-space. Indices are zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TangentDirection {
    StateValue { i: usize },
    StateGradient { i: usize, k: usize },
}

impl TangentDirection {
    /// All m + m·d directions: values first, then gradient entries row-major.
    pub fn all(m: usize) -> Vec<TangentDirection> {
        let mut dirs: Vec<_> = (0..m).map(|i| TangentDirection::StateValue { i }).collect();
        for i in 0..m {
            for k in 0..DIM {
                dirs.push(TangentDirection::StateGradient { i, k });
            }
        }
        dirs
    }

    pub fn validate(self, m: usize) -> Result<()> {
        let ok = match self {
            TangentDirection::StateValue { i } => i < m,
            TangentDirection::StateGradient { i, k } => i < m && k < DIM,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDirection(format!("{self:?} for m = {m}, d = {DIM}")))
        }
    }

    /// Unit tangent as a (dy1, dy2) pair.
    pub fn tangent(self) -> (RVec, RMat) {
        let mut t1 = [0.0; 2];
        let mut t2 = [[0.0; 2]; 2];
        match self {
            TangentDirection::StateValue { i } => t1[i] = 1.0,
            TangentDirection::StateGradient { i, k } => t2[i][k] = 1.0,
        }
        (t1, t2)
    }
}

/// Evaluation point (x, y1, y2) with real entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalPoint {
    pub x: Point,
    pub y1: RVec,
    pub y2: RMat,
}

impl EvalPoint {
    pub fn new(x: Point, y1: RVec, y2: RMat) -> Self {
        EvalPoint { x, y1, y2 }
    }

    /// Dual arguments seeded along (t1, t2).
    pub fn seeded(&self, t1: &RVec, t2: &RMat) -> (DVec, DMat) {
        let y1 = [Dual::new(self.y1[0], t1[0]), Dual::new(self.y1[1], t1[1])];
        let y2 = [
            [Dual::new(self.y2[0][0], t2[0][0]), Dual::new(self.y2[0][1], t2[0][1])],
            [Dual::new(self.y2[1][0], t2[1][0]), Dual::new(self.y2[1][1], t2[1][1])],
        ];
        (y1, y2)
    }

    pub fn constant(&self) -> (DVec, DMat) {
        (const_vec(&self.y1), const_mat(&self.y2))
    }
}

/// Callback outputs that can be split into value and tangent parts.
pub trait DualOutput: Copy {
    type Real: Copy + fmt::Debug + PartialEq;
    fn value(&self) -> Self::Real;
    fn deriv(&self) -> Self::Real;
    fn all_finite(&self) -> bool;
}

impl DualOutput for Dual {
    type Real = f64;
    fn value(&self) -> f64 {
        self.value
    }
    fn deriv(&self) -> f64 {
        self.deriv
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl DualOutput for DVec {
    type Real = RVec;
    fn value(&self) -> RVec {
        [self[0].value, self[1].value]
    }
    fn deriv(&self) -> RVec {
        [self[0].deriv, self[1].deriv]
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|d| d.is_finite())
    }
}

impl DualOutput for DMat {
    type Real = RMat;
    fn value(&self) -> RMat {
        [[self[0][0].value, self[0][1].value], [self[1][0].value, self[1][1].value]]
    }
    fn deriv(&self) -> RMat {
        [[self[0][0].deriv, self[0][1].deriv], [self[1][0].deriv, self[1][1].deriv]]
    }
    fn all_finite(&self) -> bool {
        self.iter().flatten().all(|d| d.is_finite())
    }
}

fn checked<T: DualOutput>(out: T, x: Point, what: &str) -> Result<T> {
    if out.all_finite() {
        Ok(out)
    } else {
        Err(Error::EvaluationDomain { point: x, what: what.to_string() })
    }
}

/// Plain evaluation (all tangents zero).
pub fn evaluate<T, F>(f: F, at: &EvalPoint) -> Result<T::Real>
where
    T: DualOutput,
    F: Fn(Point, &DVec, &DMat) -> T,
{
    let (y1, y2) = at.constant();
    Ok(checked(f(at.x, &y1, &y2), at.x, "non-finite callback value")?.value())
}

/// Jacobian-vector product along an arbitrary tangent; returns (value, derivative).
pub fn jvp<T, F>(f: F, at: &EvalPoint, t1: &RVec, t2: &RMat) -> Result<(T::Real, T::Real)>
where
    T: DualOutput,
    F: Fn(Point, &DVec, &DMat) -> T,
{
    let (y1, y2) = at.seeded(t1, t2);
    let out = checked(f(at.x, &y1, &y2), at.x, "non-finite callback derivative")?;
    Ok((out.value(), out.deriv()))
}

/// Exact derivative of the callback along one unit tangent.
pub fn directional_derivative<T, F>(f: F, at: &EvalPoint, dir: TangentDirection, m: usize) -> Result<T::Real>
where
    T: DualOutput,
    F: Fn(Point, &DVec, &DMat) -> T,
{
    dir.validate(m)?;
    let (t1, t2) = dir.tangent();
    Ok(jvp(f, at, &t1, &t2)?.1)
}

/// Value and all m + m·d directional derivatives, in [`TangentDirection::all`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian<R> {
    pub value: R,
    pub columns: Vec<(TangentDirection, R)>,
}

impl<R: Copy> Jacobian<R> {
    pub fn get(&self, dir: TangentDirection) -> Option<R> {
        self.columns.iter().find(|(d, _)| *d == dir).map(|(_, r)| *r)
    }
}

pub fn full_jacobian<T, F>(f: F, at: &EvalPoint, m: usize) -> Result<Jacobian<T::Real>>
where
    T: DualOutput,
    F: Fn(Point, &DVec, &DMat) -> T,
{
    let value = evaluate(&f, at)?;
    let mut columns = Vec::with_capacity(m + m * DIM);
    for dir in TangentDirection::all(m) {
        let (t1, t2) = dir.tangent();
        columns.push((dir, jvp(&f, at, &t1, &t2)?.1));
    }
    Ok(Jacobian { value, columns })
}
