//! Small symbolic expression trees over the ambient coordinates `x, y, z`
//! with exact differentiation.
//!
//! Analytic test fields are written once as expressions; their exterior
//! derivatives are obtained by symbolic differentiation, never by finite
//! differences, so commuting-diagram and manufactured-solution checks are
//! independent of the discretization.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Ambient coordinate 0, 1 or 2.
    Var(usize),
    Add(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
    Powi(Arc<Expr>, i32),
}

pub fn c(v: f64) -> Expr {
    Expr::Const(v)
}

pub fn x() -> Expr {
    Expr::Var(0)
}

pub fn y() -> Expr {
    Expr::Var(1)
}

pub fn z() -> Expr {
    Expr::Var(2)
}

pub fn sin(e: Expr) -> Expr {
    match e {
        Expr::Const(v) => Expr::Const(v.sin()),
        e => Expr::Sin(Arc::new(e)),
    }
}

pub fn cos(e: Expr) -> Expr {
    match e {
        Expr::Const(v) => Expr::Const(v.cos()),
        e => Expr::Cos(Arc::new(e)),
    }
}

pub fn exp(e: Expr) -> Expr {
    match e {
        Expr::Const(v) => Expr::Const(v.exp()),
        e => Expr::Exp(Arc::new(e)),
    }
}

impl Expr {
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 1.0)
    }

    pub fn powi(self, p: i32) -> Expr {
        match (self, p) {
            (_, 0) => c(1.0),
            (e, 1) => e,
            (Expr::Const(v), p) => c(v.powi(p)),
            (e, p) => Expr::Powi(Arc::new(e), p),
        }
    }

    /// Partial derivative with respect to ambient coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => c(0.0),
            Expr::Var(i) => c(if *i == var { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => a.diff(var) + b.diff(var),
            Expr::Mul(a, b) => a.diff(var) * (**b).clone() + (**a).clone() * b.diff(var),
            Expr::Neg(a) => -a.diff(var),
            Expr::Sin(a) => cos((**a).clone()) * a.diff(var),
            Expr::Cos(a) => -(sin((**a).clone()) * a.diff(var)),
            Expr::Exp(a) => exp((**a).clone()) * a.diff(var),
            Expr::Powi(a, p) => c(*p as f64) * (**a).clone().powi(p - 1) * a.diff(var),
        }
    }

    pub fn eval<T: Real>(&self, p: &[T; 3]) -> T {
        match self {
            Expr::Const(v) => T::lit(*v),
            Expr::Var(i) => p[*i],
            Expr::Add(a, b) => a.eval(p) + b.eval(p),
            Expr::Mul(a, b) => a.eval(p) * b.eval(p),
            Expr::Neg(a) => -a.eval(p),
            Expr::Sin(a) => a.eval(p).sin(),
            Expr::Cos(a) => a.eval(p).cos(),
            Expr::Exp(a) => a.eval(p).exp(),
            Expr::Powi(a, k) => a.eval(p).powi(*k),
        }
    }

    /// Highest coordinate power if the expression is a polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => Some(0),
            Expr::Var(_) => Some(1),
            Expr::Add(a, b) => Some(a.polynomial_degree()?.max(b.polynomial_degree()?)),
            Expr::Mul(a, b) => Some(a.polynomial_degree()? + b.polynomial_degree()?),
            Expr::Neg(a) => a.polynomial_degree(),
            Expr::Powi(a, p) if *p >= 0 => Some(a.polynomial_degree()? * (*p as usize)),
            _ => None,
        }
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) => c(a + b),
            (a, b) if a.is_zero() => b,
            (a, b) if b.is_zero() => a,
            (a, b) => Expr::Add(Arc::new(a), Arc::new(b)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) => c(a * b),
            (a, b) if a.is_zero() || b.is_zero() => c(0.0),
            (a, b) if a.is_one() => b,
            (a, b) if b.is_one() => a,
            (a, b) => Expr::Mul(Arc::new(a), Arc::new(b)),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Const(v) => c(-v),
            Expr::Neg(a) => (*a).clone(),
            e => Expr::Neg(Arc::new(e)),
        }
    }
}

impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        c(self) * rhs
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "{}", ["x", "y", "z"][*i]),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Neg(a) => write!(f, "-{a}"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Powi(a, p) => write!(f, "{a}^{p}"),
        }
    }
}

/// A differential form on ambient R³ in proxy components:
/// degree 0 and 3 are scalars, degrees 1 and 2 are 3-vectors (1-forms as
/// covector components, 2-forms as flux components `(yz, zx, xy)`).
#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    degree: usize,
    comps: Vec<Expr>,
}

impl FormField {
    pub fn new(degree: usize, comps: Vec<Expr>) -> Self {
        assert!(degree <= 3, "ambient forms have degree at most 3");
        let expected = if degree == 0 || degree == 3 { 1 } else { 3 };
        assert_eq!(comps.len(), expected, "wrong number of proxy components");
        Self { degree, comps }
    }

    pub fn scalar(degree: usize, e: Expr) -> Self {
        Self::new(degree, vec![e])
    }

    pub fn vector(degree: usize, e: [Expr; 3]) -> Self {
        Self::new(degree, e.into())
    }

    pub fn zero(degree: usize) -> Self {
        let n = if degree == 0 || degree == 3 { 1 } else { 3 };
        Self::new(degree, vec![c(0.0); n])
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    /// Exterior derivative: grad, curl, div; zero beyond degree 3.
    pub fn d(&self) -> FormField {
        let e = &self.comps;
        match self.degree {
            0 => FormField::vector(1, [e[0].diff(0), e[0].diff(1), e[0].diff(2)]),
            1 => FormField::vector(
                2,
                [
                    e[2].diff(1) - e[1].diff(2),
                    e[0].diff(2) - e[2].diff(0),
                    e[1].diff(0) - e[0].diff(1),
                ],
            ),
            2 => FormField::scalar(3, e[0].diff(0) + e[1].diff(1) + e[2].diff(2)),
            _ => FormField::zero(3),
        }
    }

    /// Divergence of a 1-form's proxy in the flat metric.
    pub fn flat_divergence(&self) -> Expr {
        assert_eq!(self.degree, 1);
        self.comps[0].diff(0) + self.comps[1].diff(1) + self.comps[2].diff(2)
    }

    /// Curl of a 2-form's flux proxy, read as a 1-form through the flat
    /// Hodge star: `curl curl U = (dU).flat_curl()` for a 1-form `U`.
    pub fn flat_curl(&self) -> FormField {
        assert_eq!(self.degree, 2);
        let e = &self.comps;
        FormField::vector(
            1,
            [
                e[2].diff(1) - e[1].diff(2),
                e[0].diff(2) - e[2].diff(0),
                e[1].diff(0) - e[0].diff(1),
            ],
        )
    }

    pub fn eval<T: Real>(&self, p: &[T; 3]) -> Vec<T> {
        self.comps.iter().map(|e| e.eval(p)).collect()
    }

    pub fn add(&self, other: &FormField) -> FormField {
        assert_eq!(self.degree, other.degree);
        FormField {
            degree: self.degree,
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> FormField {
        FormField { degree: self.degree, comps: self.comps.iter().map(|a| s * a.clone()).collect() }
    }

    pub fn polynomial_degree(&self) -> Option<usize> {
        self.comps.iter().map(|e| e.polynomial_degree()).try_fold(0, |m, d| Some(m.max(d?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn derivative_of_product_and_chain() {
        let e = x() * sin(2.0 * PI * y());
        let p = [0.3, 0.7, 0.1];
        let dy = e.diff(1).eval(&p);
        assert!((dy - 0.3 * 2.0 * PI * (2.0 * PI * 0.7).cos()).abs() < 1e-13);
        assert!(e.diff(2).is_zero());
    }

    #[test]
    fn dd_is_zero_symbolically_evaluated() {
        let u = FormField::scalar(0, x().powi(2) * y() + sin(z()) * x());
        let ddu = u.d().d();
        let w = FormField::vector(1, [y() * z(), x().powi(3), cos(x() * y())]);
        let ddw = w.d().d();
        let p = [0.2f64, -0.4, 0.9];
        for v in ddu.eval(&p).into_iter().chain(ddw.eval(&p)) {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn polynomial_degree_detection() {
        assert_eq!((x() * y().powi(2) + c(1.0)).polynomial_degree(), Some(3));
        assert_eq!(sin(x()).polynomial_degree(), None);
    }
}
