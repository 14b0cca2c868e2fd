//! Complex-frequency expression algebra.
//!
//! Impedances and controller transfer functions are kept as lazy expression
//! trees and evaluated pointwise at any complex `s`. Nested parallels of
//! frequency-shifted rational blocks stay exact per point this way; expanding
//! them into a single polynomial ratio would blow up the degree.
//!
//! An absent branch is represented by [`FreqExpr::open`]. Open is the identity
//! for [`FreqExpr::parallel`], absorbs [`FreqExpr::series`], and becomes zero
//! admittance under [`FreqExpr::recip`]. A top-level [`FreqExpr::eval`] that
//! resolves to an open circuit is an error; use [`FreqExpr::eval_value`] to
//! observe it.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, GridError, ParamError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Result of evaluating an expression that may contain open branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Finite(Complex64),
    Open,
}

impl Value {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            Value::Finite(z) => Some(z),
            Value::Open => None,
        }
    }

    pub fn is_open(self) -> bool {
        matches!(self, Value::Open)
    }
}

#[derive(Debug)]
enum Node {
    Const(Complex64),
    Resistor(f64),
    Inductor(f64),
    Capacitor(f64),
    /// Coefficients in ascending powers of `s`.
    Rational {
        num: Vec<Complex64>,
        den: Vec<Complex64>,
    },
    Open,
    Series(FreqExpr, FreqExpr),
    Parallel(FreqExpr, FreqExpr),
    Mul(FreqExpr, FreqExpr),
    Div(FreqExpr, FreqExpr),
    Recip(FreqExpr),
    Scale(Complex64, FreqExpr),
    Shift(Complex64, FreqExpr),
    Named(Arc<str>, FreqExpr),
}

/// Immutable, cheaply clonable expression in the Laplace variable `s`.
#[derive(Debug, Clone)]
pub struct FreqExpr(Arc<Node>);

fn horner(coeffs: &[Complex64], s: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * s + c)
}

fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

impl FreqExpr {
    fn node(node: Node) -> Self {
        FreqExpr(Arc::new(node))
    }

    pub fn constant(value: Complex64) -> Self {
        Self::node(Node::Const(value))
    }

    pub fn real(value: f64) -> Self {
        Self::constant(Complex64::new(value, 0.0))
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    pub fn resistor(r: f64) -> Self {
        Self::node(Node::Resistor(r))
    }

    /// `s·L`.
    pub fn inductor(l: f64) -> Self {
        Self::node(Node::Inductor(l))
    }

    /// `1/(s·C)`.
    pub fn capacitor(c: f64) -> Self {
        Self::node(Node::Capacitor(c))
    }

    pub fn open() -> Self {
        Self::node(Node::Open)
    }

    /// Ratio of two polynomials in `s`, coefficients in ascending powers.
    pub fn rational(num: Vec<Complex64>, den: Vec<Complex64>) -> Result<Self, ParamError> {
        if num.is_empty() || den.is_empty() {
            return Err(ParamError::new("rational", "coefficient lists must be non-empty"));
        }
        if den.iter().all(|c| *c == ZERO) {
            return Err(ParamError::new("rational", "denominator is identically zero"));
        }
        if num.iter().chain(den.iter()).any(|c| !is_finite(*c)) {
            return Err(ParamError::new("rational", "coefficients must be finite"));
        }
        Ok(Self::node(Node::Rational { num, den }))
    }

    pub fn rational_real(num: &[f64], den: &[f64]) -> Result<Self, ParamError> {
        let c = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::rational(c(num), c(den))
    }

    /// `kp + ki/s`.
    pub fn pi_controller(kp: f64, ki: f64) -> Self {
        Self::rational_real(&[ki, kp], &[0.0, 1.0]).expect("PI denominator is s")
    }

    /// Unity-gain biquad notch `(s² + ωN²)/(s² + 2ζN·ωN·s + ωN²)`.
    pub fn notch(omega_n: f64, zeta_n: f64) -> Result<Self, ParamError> {
        if !(omega_n > 0.0 && omega_n.is_finite()) {
            return Err(ParamError::new("notch", "centre frequency must be positive"));
        }
        if !(zeta_n >= 0.0 && zeta_n.is_finite()) {
            return Err(ParamError::new("notch", "damping ratio must be non-negative"));
        }
        let w2 = omega_n * omega_n;
        Self::rational_real(&[w2, 0.0, 1.0], &[w2, 2.0 * zeta_n * omega_n, 1.0])
    }

    pub fn series(&self, other: &FreqExpr) -> FreqExpr {
        Self::node(Node::Series(self.clone(), other.clone()))
    }

    pub fn parallel(&self, other: &FreqExpr) -> FreqExpr {
        Self::node(Node::Parallel(self.clone(), other.clone()))
    }

    pub fn mul(&self, other: &FreqExpr) -> FreqExpr {
        Self::node(Node::Mul(self.clone(), other.clone()))
    }

    pub fn div(&self, other: &FreqExpr) -> FreqExpr {
        Self::node(Node::Div(self.clone(), other.clone()))
    }

    pub fn recip(&self) -> FreqExpr {
        Self::node(Node::Recip(self.clone()))
    }

    pub fn scale(&self, k: Complex64) -> FreqExpr {
        Self::node(Node::Scale(k, self.clone()))
    }

    pub fn scale_real(&self, k: f64) -> FreqExpr {
        self.scale(Complex64::new(k, 0.0))
    }

    /// Expression whose value at `s` is this expression's value at `s − delta`.
    pub fn shift(&self, delta: Complex64) -> FreqExpr {
        Self::node(Node::Shift(delta, self.clone()))
    }

    /// Attach a label that is reported in evaluation errors.
    pub fn named(&self, name: &str) -> FreqExpr {
        Self::node(Node::Named(Arc::from(name), self.clone()))
    }

    /// True only for a literal open marker (possibly behind labels).
    pub fn is_open(&self) -> bool {
        match &*self.0 {
            Node::Open => true,
            Node::Named(_, e) => e.is_open(),
            _ => false,
        }
    }

    pub fn name(&self) -> Option<&str> {
        match &*self.0 {
            Node::Named(n, _) => Some(n),
            _ => None,
        }
    }

    /// Whether the expression contains complex coefficients, so that
    /// `eval(conj(s)) == conj(eval(s))` need not hold.
    pub fn has_complex_coefficients(&self) -> bool {
        let cplx = |z: &Complex64| z.im != 0.0;
        match &*self.0 {
            Node::Const(c) => cplx(c),
            Node::Resistor(_) | Node::Inductor(_) | Node::Capacitor(_) | Node::Open => false,
            Node::Rational { num, den } => num.iter().chain(den.iter()).any(cplx),
            Node::Series(a, b) | Node::Parallel(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.has_complex_coefficients() || b.has_complex_coefficients()
            }
            Node::Recip(a) | Node::Named(_, a) => a.has_complex_coefficients(),
            Node::Scale(k, a) => cplx(k) || a.has_complex_coefficients(),
            Node::Shift(d, a) => d.im != 0.0 || a.has_complex_coefficients(),
        }
    }

    /// Evaluate at `s`; an open-circuit result is an error.
    pub fn eval(&self, s: Complex64) -> Result<Complex64, EvalError> {
        match self.eval_value(s)? {
            Value::Finite(z) => Ok(z),
            Value::Open => Err(EvalError::OpenCircuit { s, path: self.name().map(String::from) }),
        }
    }

    /// Evaluate on the imaginary axis at angular frequency `omega` (rad/s).
    pub fn eval_jw(&self, omega: f64) -> Result<Complex64, EvalError> {
        self.eval(Complex64::new(0.0, omega))
    }

    pub fn eval_value(&self, s: Complex64) -> Result<Value, EvalError> {
        use Value::{Finite, Open};
        let pole = |what: String| EvalError::Pole { s, at: what, path: Vec::new() };
        let v = match &*self.0 {
            Node::Const(c) => Finite(*c),
            Node::Resistor(r) => Finite(Complex64::new(*r, 0.0)),
            Node::Inductor(l) => Finite(s * *l),
            Node::Capacitor(c) => {
                let d = s * *c;
                if d == ZERO {
                    return Err(pole(format!("capacitor (C = {c:e})")));
                }
                Finite(d.inv())
            }
            Node::Rational { num, den } => {
                let d = horner(den, s);
                if d == ZERO {
                    return Err(pole(format!("rational block of degree {}", den.len() - 1)));
                }
                Finite(horner(num, s) / d)
            }
            Node::Open => Open,
            Node::Series(a, b) => match (a.eval_value(s)?, b.eval_value(s)?) {
                (Finite(x), Finite(y)) => Finite(x + y),
                _ => Open,
            },
            Node::Parallel(a, b) => match (a.eval_value(s)?, b.eval_value(s)?) {
                (Open, v) | (v, Open) => v,
                (Finite(x), Finite(y)) => {
                    if x == ZERO || y == ZERO {
                        Finite(ZERO)
                    } else {
                        let sum = x + y;
                        if sum == ZERO {
                            return Err(pole("parallel resonance".into()));
                        }
                        Finite(x * y / sum)
                    }
                }
            },
            Node::Mul(a, b) => match (a.eval_value(s)?, b.eval_value(s)?) {
                (Finite(x), Finite(y)) => Finite(x * y),
                (Open, Open) => Open,
                (Open, Finite(k)) | (Finite(k), Open) => {
                    if k == ZERO {
                        return Err(EvalError::Indeterminate { s, what: "open × 0".into() });
                    }
                    Open
                }
            },
            Node::Div(a, b) => match (a.eval_value(s)?, b.eval_value(s)?) {
                (Finite(x), Finite(y)) => {
                    if y == ZERO {
                        return Err(pole("division by zero".into()));
                    }
                    Finite(x / y)
                }
                (Finite(_), Open) => Finite(ZERO),
                (Open, Finite(y)) => {
                    if y == ZERO {
                        return Err(EvalError::Indeterminate { s, what: "open / 0".into() });
                    }
                    Open
                }
                (Open, Open) => {
                    return Err(EvalError::Indeterminate { s, what: "open / open".into() })
                }
            },
            Node::Recip(a) => match a.eval_value(s)? {
                Open => Finite(ZERO),
                Finite(x) => {
                    if x == ZERO {
                        return Err(pole("reciprocal of zero".into()));
                    }
                    Finite(x.inv())
                }
            },
            Node::Scale(k, a) => match a.eval_value(s)? {
                Finite(x) => Finite(k * x),
                Open if *k == ZERO => {
                    return Err(EvalError::Indeterminate { s, what: "0 × open".into() })
                }
                Open => Open,
            },
            Node::Shift(d, a) => a.eval_value(s - d).map_err(|e| e.at_s(s))?,
            Node::Named(name, a) => a.eval_value(s).map_err(|e| e.within(name))?,
        };
        if let Finite(z) = v {
            if !is_finite(z) {
                return Err(pole("non-finite intermediate".into()));
            }
        }
        Ok(v)
    }
}

impl fmt::Display for FreqExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => write!(f, "({c})"),
            Node::Resistor(r) => write!(f, "R({r})"),
            Node::Inductor(l) => write!(f, "sL({l})"),
            Node::Capacitor(c) => write!(f, "1/sC({c})"),
            Node::Rational { num, den } => write!(f, "rat[{}/{}]", num.len() - 1, den.len() - 1),
            Node::Open => write!(f, "open"),
            Node::Series(a, b) => write!(f, "({a} + {b})"),
            Node::Parallel(a, b) => write!(f, "({a} || {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Recip(a) => write!(f, "1/{a}"),
            Node::Scale(k, a) => write!(f, "({k})*{a}"),
            Node::Shift(d, a) => write!(f, "{a}[s-({d})]"),
            Node::Named(n, _) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Logarithmic,
    Linear,
    Explicit,
}

/// Ordered analysis frequencies in hertz.
///
/// Sequence impedances have complex coefficients and are not
/// conjugate-symmetric, so a symmetric grid evaluates the mirrored negative
/// frequencies explicitly instead of conjugating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    freqs_hz: Vec<f64>,
    spacing: Spacing,
    symmetric: bool,
}

impl FrequencyGrid {
    pub fn log(f_min: f64, f_max: f64, points: usize) -> Result<Self, GridError> {
        if !(f_min > 0.0) {
            return Err(GridError::NonPositiveLog(f_min));
        }
        if !(f_max > f_min) || !f_max.is_finite() {
            return Err(GridError::BadRange { f_min, f_max });
        }
        if points < 2 {
            return Err(GridError::TooFewPoints(points));
        }
        let ratio = (f_max / f_min).ln();
        let n = points - 1;
        let mut freqs: Vec<f64> =
            (0..points).map(|i| f_min * (ratio * i as f64 / n as f64).exp()).collect();
        freqs[0] = f_min;
        freqs[n] = f_max;
        Self::checked(freqs, Spacing::Logarithmic)
    }

    pub fn linear(f_min: f64, f_max: f64, points: usize) -> Result<Self, GridError> {
        if !(f_max > f_min) || !f_min.is_finite() || !f_max.is_finite() {
            return Err(GridError::BadRange { f_min, f_max });
        }
        if points < 2 {
            return Err(GridError::TooFewPoints(points));
        }
        let n = points - 1;
        let freqs = (0..points)
            .map(|i| if i == n { f_max } else { f_min + (f_max - f_min) * i as f64 / n as f64 })
            .collect();
        Self::checked(freqs, Spacing::Linear)
    }

    pub fn explicit(freqs_hz: Vec<f64>) -> Result<Self, GridError> {
        Self::checked(freqs_hz, Spacing::Explicit)
    }

    fn checked(freqs_hz: Vec<f64>, spacing: Spacing) -> Result<Self, GridError> {
        if let Some(bad) = freqs_hz.iter().find(|f| !f.is_finite()) {
            return Err(GridError::NonFinite(*bad));
        }
        for w in freqs_hz.windows(2) {
            if !(w[1] > w[0]) {
                return Err(GridError::NotMonotone { a: w[0], b: w[1] });
            }
        }
        Ok(FrequencyGrid { freqs_hz, spacing, symmetric: false })
    }

    /// Mirror the grid onto negative frequencies. Requires strictly positive points.
    pub fn symmetric(mut self) -> Result<Self, GridError> {
        if let Some(&f) = self.freqs_hz.first() {
            if f <= 0.0 {
                return Err(GridError::NonPositiveLog(f));
            }
        }
        self.symmetric = true;
        Ok(self)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    /// Angular frequencies in ascending signed order (negatives first when symmetric).
    pub fn signed_omegas(&self) -> Vec<f64> {
        let tau = 2.0 * std::f64::consts::PI;
        let pos = self.freqs_hz.iter().map(|f| tau * f);
        if self.symmetric {
            let neg: Vec<f64> = self.freqs_hz.iter().rev().map(|f| -tau * f).collect();
            neg.into_iter().chain(pos).collect()
        } else {
            pos.collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn inductor_at_100hz() {
        let z = FreqExpr::inductor(0.003).eval(c(0.0, 2.0 * PI * 100.0)).unwrap();
        assert!((z - c(0.0, 1.884956)).norm() < 1e-6);
    }

    #[test]
    fn identical_parallel_halves() {
        let e = FreqExpr::real(2.0).parallel(&FreqExpr::real(2.0));
        assert_eq!(e.eval(c(3.0, -7.0)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn pi_controller_table_gains() {
        let z = FreqExpr::pi_controller(0.015, 3.0).eval(c(0.0, 100.0)).unwrap();
        assert!((z - c(0.015, -0.03)).norm() < 1e-15);
    }

    #[test]
    fn reactance_parallel_and_series() {
        let p = FreqExpr::constant(c(0.0, 0.3)).parallel(&FreqExpr::constant(c(0.0, 0.6)));
        assert!((p.eval(c(1.0, 1.0)).unwrap() - c(0.0, 0.2)).norm() < 1e-15);
        let s = FreqExpr::real(1.0).series(&FreqExpr::real(2.0));
        assert_eq!(s.eval(c(0.0, 5.0)).unwrap(), c(3.0, 0.0));
    }

    #[test]
    fn huge_branch_is_near_open() {
        let z = FreqExpr::resistor(0.3).series(&FreqExpr::inductor(0.01));
        let p = z.parallel(&FreqExpr::real(1e15));
        let s = c(0.0, 314.0);
        assert!(rel(p.eval(s).unwrap(), z.eval(s).unwrap()) < 1e-12);
    }

    #[test]
    fn open_marker_semantics() {
        let z = FreqExpr::real(5.0);
        let s = c(0.0, 1.0);
        assert_eq!(z.parallel(&FreqExpr::open()).eval(s).unwrap(), c(5.0, 0.0));
        assert!(z.series(&FreqExpr::open()).eval_value(s).unwrap().is_open());
        assert!(matches!(
            z.series(&FreqExpr::open()).eval(s),
            Err(EvalError::OpenCircuit { .. })
        ));
        assert_eq!(FreqExpr::open().recip().eval(s).unwrap(), c(0.0, 0.0));
        assert!(FreqExpr::open().scale_real(0.0).eval_value(s).is_err());
    }

    #[test]
    fn shift_reduces_to_pi_at_offset() {
        let w1 = 100.0 * PI;
        let e = FreqExpr::pi_controller(0.015, 3.0).shift(c(0.0, w1));
        let z = e.eval(c(0.0, w1 + 100.0)).unwrap();
        assert!((z - c(0.015, -0.03)).norm() < 1e-12);
    }

    #[test]
    fn notch_shape() {
        let n = FreqExpr::notch(200.0 * PI, 1.0).unwrap();
        assert!(n.eval(c(0.0, 200.0 * PI)).unwrap().norm() < 1e-12);
        assert_eq!(n.eval(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        // (w0² − w²)/(w0² − w² + j2ζw0w) with w = 10·w0, ζ = 1: |·| = 99/sqrt(99² + 20²)
        let m = n.eval(c(0.0, 2000.0 * PI)).unwrap().norm();
        assert!((m - 99.0 / (99.0f64 * 99.0 + 400.0).sqrt()).abs() < 1e-12);
        assert!((m - 1.0).abs() < 2e-2);
        assert!(FreqExpr::notch(0.0, 1.0).is_err());
        assert!(FreqExpr::notch(1.0, -0.1).is_err());
    }

    #[test]
    fn pole_is_reported_with_leaf_and_path() {
        let z = FreqExpr::capacitor(5e-5).named("Z_filter");
        match z.eval(c(0.0, 0.0)) {
            Err(EvalError::Pole { at, path, .. }) => {
                assert!(at.contains("capacitor"));
                assert_eq!(path, vec!["Z_filter".to_string()]);
            }
            other => panic!("expected pole, got {other:?}"),
        }
        let pi = FreqExpr::pi_controller(1.0, 1.0);
        assert!(matches!(pi.eval(c(0.0, 0.0)), Err(EvalError::Pole { .. })));
        // shifted pole is reported at the caller's s
        let sh = pi.shift(c(0.0, 5.0));
        match sh.eval(c(0.0, 5.0)) {
            Err(EvalError::Pole { s, .. }) => assert_eq!(s, c(0.0, 5.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn complex_flag() {
        assert!(!FreqExpr::inductor(1.0).series(&FreqExpr::resistor(1.0)).has_complex_coefficients());
        assert!(FreqExpr::inductor(1.0).shift(c(0.0, 1.0)).has_complex_coefficients());
        assert!(!FreqExpr::inductor(1.0).shift(c(2.0, 0.0)).has_complex_coefficients());
    }

    #[test]
    fn grids() {
        let g = FrequencyGrid::log(0.1, 1000.0, 200).unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g.freqs_hz()[0], 0.1);
        assert_eq!(g.freqs_hz()[199], 1000.0);
        assert!(FrequencyGrid::log(0.0, 10.0, 5).is_err());
        assert!(FrequencyGrid::explicit(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::explicit(vec![2.0, 1.0]).is_err());
        let s = FrequencyGrid::linear(1.0, 3.0, 3).unwrap().symmetric().unwrap();
        let w = s.signed_omegas();
        assert_eq!(w.len(), 6);
        assert!(w.windows(2).all(|p| p[1] > p[0]));
        assert_eq!(w[0], -w[5]);
        assert!(FrequencyGrid::linear(0.0, 3.0, 3).unwrap().symmetric().is_err());
    }

    // ---- random expression trees --------------------------------------

    fn leaf() -> impl Strategy<Value = FreqExpr> {
        prop_oneof![
            (0.1f64..10.0, -5.0f64..5.0).prop_map(|(a, b)| FreqExpr::constant(c(a, b))),
            (0.01f64..10.0).prop_map(FreqExpr::resistor),
            (1e-4f64..1e-1).prop_map(FreqExpr::inductor),
            (1e-5f64..1e-2).prop_map(FreqExpr::capacitor),
            (0.1f64..2.0, 0.1f64..50.0).prop_map(|(kp, ki)| FreqExpr::pi_controller(kp, ki)),
        ]
    }

    fn tree() -> impl Strategy<Value = FreqExpr> {
        leaf().prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.series(&b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.parallel(&b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
                (inner.clone(), (0.2f64..3.0, -1.0f64..1.0))
                    .prop_map(|(a, (x, y))| a.scale(c(x, y))),
                (inner.clone(), -50.0f64..50.0).prop_map(|(a, d)| a.shift(c(0.0, d))),
            ]
        })
    }

    fn point() -> impl Strategy<Value = Complex64> {
        (-20.0f64..20.0, 1.0f64..2000.0).prop_map(|(re, im)| c(re, im))
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * a.norm().max(b.norm()).max(1e-300)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn combinators_commute_and_associate(a in tree(), b in tree(), d in tree(), s in point()) {
            let (Ok(va), Ok(vb), Ok(vd)) = (a.eval(s), b.eval(s), d.eval(s)) else { return Ok(()); };
            if !(va.norm() > 1e-9 && vb.norm() > 1e-9 && vd.norm() > 1e-9) { return Ok(()); }
            let pab = a.parallel(&b).eval(s);
            let pba = b.parallel(&a).eval(s);
            if let (Ok(x), Ok(y)) = (pab, pba) { prop_assert!(close(x, y, 1e-12)); }
            let sab = a.series(&b).eval(s).unwrap();
            prop_assert!(close(sab, b.series(&a).eval(s).unwrap(), 1e-12));
            // associativity is only well-conditioned away from cancellation
            if (va + vb).norm() > 1e-3 * (va.norm() + vb.norm())
                && (vb + vd).norm() > 1e-3 * (vb.norm() + vd.norm())
                && (va + vb + vd).norm() > 1e-3 * (va.norm() + vb.norm() + vd.norm())
            {
                let l = a.series(&b).series(&d).eval(s).unwrap();
                let r = a.series(&b.series(&d)).eval(s).unwrap();
                prop_assert!(close(l, r, 1e-12));
                let ya = va.inv(); let yb = vb.inv(); let yd = vd.inv();
                if (ya + yb).norm() > 1e-3 * (ya.norm() + yb.norm())
                    && (yb + yd).norm() > 1e-3 * (yb.norm() + yd.norm())
                    && (ya + yb + yd).norm() > 1e-3 * (ya.norm() + yb.norm() + yd.norm())
                {
                    let l = a.parallel(&b).parallel(&d).eval(s).unwrap();
                    let r = a.parallel(&b.parallel(&d)).eval(s).unwrap();
                    prop_assert!(close(l, r, 1e-12));
                }
            }
        }

        #[test]
        fn parallel_matches_reciprocal_form(a in tree(), b in tree(), s in point()) {
            let (Ok(va), Ok(vb)) = (a.eval(s), b.eval(s)) else { return Ok(()); };
            if va.norm() < 1e-9 || vb.norm() < 1e-9 { return Ok(()); }
            let ya = va.inv(); let yb = vb.inv();
            if (ya + yb).norm() < 1e-3 * (ya.norm() + yb.norm()) { return Ok(()); }
            let p = a.parallel(&b).eval(s).unwrap();
            let r = a.recip().series(&b.recip()).recip().eval(s).unwrap();
            prop_assert!(close(p, r, 1e-12));
        }

        #[test]
        fn double_reciprocal_is_identity(a in tree(), s in point()) {
            let Ok(v) = a.eval(s) else { return Ok(()); };
            if v.norm() < 1e-9 { return Ok(()); }
            prop_assert!(close(a.recip().recip().eval(s).unwrap(), v, 1e-12));
        }

        #[test]
        fn shift_laws(a in tree(), s in point(), d1 in -30.0f64..30.0, d2 in -30.0f64..30.0, r in -2.0f64..2.0) {
            let delta1 = c(r, d1);
            let delta2 = c(0.0, d2);
            if let (Ok(x), Ok(y)) = (a.shift(delta1).eval(s), a.eval(s - delta1)) {
                prop_assert_eq!(x, y);
            }
            if let Ok(v) = a.eval(s) {
                prop_assert_eq!(a.shift(c(0.0, 0.0)).eval(s).unwrap(), v);
            }
            let nested = a.shift(delta1).shift(delta2).eval(s);
            let combined = a.shift(delta1 + delta2).eval(s);
            if let (Ok(x), Ok(y)) = (nested, combined) {
                prop_assert!(close(x, y, 1e-12));
            }
        }

        #[test]
        fn real_coefficient_conjugate_symmetry(a in tree(), s in point()) {
            if a.has_complex_coefficients() { return Ok(()); }
            if let (Ok(x), Ok(y)) = (a.eval(s), a.eval(s.conj())) {
                prop_assert!(close(y, x.conj(), 1e-12));
            }
        }
    }
}
