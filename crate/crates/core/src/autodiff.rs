//! Forward-mode differentiation with dual and hyper-dual numbers.
//!
//! Models are written once against the [`Scalar`] trait ([`Function`]) and get
//! evaluated on `f64`, [`Dual`] and [`HyperDual`] through the object-safe
//! [`ScalarField`]. A central-difference oracle ([`fd_grad`],
//! [`fd_hessian_mixed`]) lives next to the exact routes so they can be compared.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::{Error, Result};

/// Number kind a model can be evaluated on.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn recip(self) -> Self {
        Self::constant(1.0) / self
    }

    fn powi(self, n: i32) -> Self {
        let mut acc = Self::constant(1.0);
        for _ in 0..n.unsigned_abs() {
            acc = acc * self;
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
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
}

/// `value + deriv·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
}

impl Dual {
    pub fn new(value: f64, deriv: f64) -> Self {
        Dual { value, deriv }
    }

    /// Applies a scalar function given its value and first derivative at `self.value`.
    fn chain(self, f: f64, df: f64) -> Self {
        Dual { value: f, deriv: df * self.deriv }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { value: self.value + o.value, deriv: self.deriv + o.deriv }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { value: self.value - o.value, deriv: self.deriv - o.deriv }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { value: self.value * o.value, deriv: self.value * o.deriv + self.deriv * o.value }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let value = self.value / o.value;
        Dual { value, deriv: (self.deriv - value * o.deriv) / o.value }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { value: -self.value, deriv: -self.deriv }
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(self, o: f64) -> Dual {
        Dual { value: self.value + o, deriv: self.deriv }
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    fn sub(self, o: f64) -> Dual {
        Dual { value: self.value - o, deriv: self.deriv }
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, o: f64) -> Dual {
        Dual { value: self.value * o, deriv: self.deriv * o }
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    fn div(self, o: f64) -> Dual {
        Dual { value: self.value / o, deriv: self.deriv / o }
    }
}

impl Scalar for Dual {
    fn constant(v: f64) -> Self {
        Dual { value: v, deriv: 0.0 }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }
}

/// Second-order Taylor number `value + d1·ε₁ + d2·ε₂ + d12·ε₁ε₂` with `ε₁² = ε₂² = 0`.
///
/// Seeding `ε₁` along `eᵢ` and `ε₂` along `eⱼ` leaves `∂²f/∂xᵢ∂xⱼ` in `d12`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperDual {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl HyperDual {
    pub fn new(value: f64, d1: f64, d2: f64, d12: f64) -> Self {
        HyperDual { value, d1, d2, d12 }
    }

    /// Applies a scalar function given `f`, `f'`, `f''` at `self.value`.
    fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        HyperDual {
            value: f,
            d1: df * self.d1,
            d2: df * self.d2,
            d12: df * self.d12 + ddf * self.d1 * self.d2,
        }
    }
}

impl Add for HyperDual {
    type Output = HyperDual;
    fn add(self, o: HyperDual) -> HyperDual {
        HyperDual {
            value: self.value + o.value,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            d12: self.d12 + o.d12,
        }
    }
}

impl Sub for HyperDual {
    type Output = HyperDual;
    fn sub(self, o: HyperDual) -> HyperDual {
        HyperDual {
            value: self.value - o.value,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
            d12: self.d12 - o.d12,
        }
    }
}

impl Mul for HyperDual {
    type Output = HyperDual;
    fn mul(self, o: HyperDual) -> HyperDual {
        HyperDual {
            value: self.value * o.value,
            d1: self.value * o.d1 + self.d1 * o.value,
            d2: self.value * o.d2 + self.d2 * o.value,
            d12: self.value * o.d12 + self.d1 * o.d2 + self.d2 * o.d1 + self.d12 * o.value,
        }
    }
}

impl Div for HyperDual {
    type Output = HyperDual;
    fn div(self, o: HyperDual) -> HyperDual {
        let inv = o.value.recip();
        self * o.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}

impl Neg for HyperDual {
    type Output = HyperDual;
    fn neg(self) -> HyperDual {
        HyperDual { value: -self.value, d1: -self.d1, d2: -self.d2, d12: -self.d12 }
    }
}

impl Add<f64> for HyperDual {
    type Output = HyperDual;
    fn add(self, o: f64) -> HyperDual {
        HyperDual { value: self.value + o, ..self }
    }
}

impl Sub<f64> for HyperDual {
    type Output = HyperDual;
    fn sub(self, o: f64) -> HyperDual {
        HyperDual { value: self.value - o, ..self }
    }
}

impl Mul<f64> for HyperDual {
    type Output = HyperDual;
    fn mul(self, o: f64) -> HyperDual {
        HyperDual { value: self.value * o, d1: self.d1 * o, d2: self.d2 * o, d12: self.d12 * o }
    }
}

impl Div<f64> for HyperDual {
    type Output = HyperDual;
    fn div(self, o: f64) -> HyperDual {
        HyperDual { value: self.value / o, d1: self.d1 / o, d2: self.d2 / o, d12: self.d12 / o }
    }
}

impl Scalar for HyperDual {
    fn constant(v: f64) -> Self {
        HyperDual { value: v, ..Default::default() }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.value))
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }
    fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }
}

/// A scalar function written generically over the number kind.
pub trait Function: Send + Sync {
    fn arity(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S>;
}

/// Object-safe view of a scalar function with its dual and hyper-dual lifts.
///
/// Every [`Function`] is a `ScalarField`; implement this trait directly only when
/// the lifts need custom rules (e.g. an implicitly defined function).
pub trait ScalarField: Send + Sync {
    fn arity(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn value_dual(&self, x: &[Dual]) -> Result<Dual>;
    fn value_hyper(&self, x: &[HyperDual]) -> Result<HyperDual>;
}

impl<F: Function> ScalarField for F {
    fn arity(&self) -> usize {
        Function::arity(self)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }
    fn value_dual(&self, x: &[Dual]) -> Result<Dual> {
        self.eval(x)
    }
    fn value_hyper(&self, x: &[HyperDual]) -> Result<HyperDual> {
        self.eval(x)
    }
}

fn check_arity(f: &dyn ScalarField, x: &[f64]) -> Result<()> {
    if x.len() != f.arity() {
        return Err(Error::InvalidInput(format!(
            "function of arity {} evaluated at a point of length {}",
            f.arity(),
            x.len()
        )));
    }
    Ok(())
}

/// Plain evaluation with a finiteness check.
pub fn value(f: &dyn ScalarField, x: &[f64]) -> Result<f64> {
    check_arity(f, x)?;
    let v = f.value(x)?;
    if !v.is_finite() {
        return Err(Error::NonFinite { component: 0 });
    }
    Ok(v)
}

/// Gradient by one dual pass per component.
pub fn grad(f: &dyn ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    check_arity(f, x)?;
    let mut seeded: Vec<Dual> = x.iter().map(|&v| Dual::new(v, 0.0)).collect();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        seeded[i].deriv = 1.0;
        let r = f.value_dual(&seeded)?;
        seeded[i].deriv = 0.0;
        if !(r.value.is_finite() && r.deriv.is_finite()) {
            return Err(Error::NonFinite { component: i });
        }
        out.push(r.deriv);
    }
    Ok(out)
}

/// Central-difference gradient. The step along `xᵢ` is `h·max(1, |xᵢ|)`.
pub fn fd_grad(f: &dyn ScalarField, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {h}")));
    }
    check_arity(f, x)?;
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let hi = h * x[i].abs().max(1.0);
        probe[i] = x[i] + hi;
        let plus = f.value(&probe)?;
        probe[i] = x[i] - hi;
        let minus = f.value(&probe)?;
        probe[i] = x[i];
        let d = (plus - minus) / (2.0 * hi);
        if !d.is_finite() {
            return Err(Error::NonFinite { component: i });
        }
        out.push(d);
    }
    Ok(out)
}

/// `∂²f/∂xᵢ∂xⱼ` from one hyper-dual pass.
pub fn hessian_mixed(f: &dyn ScalarField, x: &[f64], i: usize, j: usize) -> Result<f64> {
    check_arity(f, x)?;
    if i >= x.len() || j >= x.len() {
        return Err(Error::InvalidInput(format!("index ({i}, {j}) out of range for arity {}", x.len())));
    }
    let mut seeded: Vec<HyperDual> = x.iter().map(|&v| HyperDual::constant(v)).collect();
    seeded[i].d1 = 1.0;
    seeded[j].d2 = 1.0;
    let r = f.value_hyper(&seeded)?;
    if !r.d12.is_finite() {
        return Err(Error::NonFinite { component: i });
    }
    Ok(r.d12)
}

/// Full Hessian, row-major `k×k`, from `k(k+1)/2` hyper-dual passes.
pub fn hessian(f: &dyn ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    check_arity(f, x)?;
    let k = x.len();
    let mut seeded: Vec<HyperDual> = x.iter().map(|&v| HyperDual::constant(v)).collect();
    let mut h = vec![0.0; k * k];
    for i in 0..k {
        seeded[i].d1 = 1.0;
        for j in i..k {
            seeded[j].d2 = 1.0;
            let r = f.value_hyper(&seeded)?;
            seeded[j].d2 = 0.0;
            if !r.d12.is_finite() {
                return Err(Error::NonFinite { component: i });
            }
            h[i * k + j] = r.d12;
            h[j * k + i] = r.d12;
        }
        seeded[i].d1 = 0.0;
    }
    Ok(h)
}

/// Second-order central differences for `∂²f/∂xᵢ∂xⱼ` with step `h·max(1, |x|)`.
pub fn fd_hessian_mixed(f: &dyn ScalarField, x: &[f64], i: usize, j: usize, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {h}")));
    }
    check_arity(f, x)?;
    let hi = h * x[i].abs().max(1.0);
    let hj = h * x[j].abs().max(1.0);
    let at = |di: f64, dj: f64| -> Result<f64> {
        let mut p = x.to_vec();
        p[i] += di;
        p[j] += dj;
        f.value(&p)
    };
    let d = if i == j {
        (at(hi, 0.0)? - 2.0 * f.value(x)? + at(-hi, 0.0)?) / (hi * hi)
    } else {
        (at(hi, hj)? - at(hi, -hj)? - at(-hi, hj)? + at(-hi, -hj)?) / (4.0 * hi * hj)
    };
    if !d.is_finite() {
        return Err(Error::NonFinite { component: i });
    }
    Ok(d)
}
