//! Dense complex nodal analysis for small phasor networks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::tfcore::Value;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Above this 1-norm condition estimate a solve is logged as ill-conditioned.
pub const CONDITION_WARN: f64 = 1e12;

/// Node index; `None` is the reference.
pub type Node = Option<usize>;

#[derive(Debug, Clone)]
pub struct Circuit {
    y: DMatrix<Complex64>,
    rhs: DVector<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CircuitError {
    ZeroImpedance(String),
    Singular,
}

impl Circuit {
    pub fn new(nodes: usize) -> Self {
        Circuit { y: DMatrix::zeros(nodes, nodes), rhs: DVector::zeros(nodes) }
    }

    pub fn add_admittance(&mut self, a: Node, b: Node, y: Complex64) {
        if let Some(i) = a {
            self.y[(i, i)] += y;
        }
        if let Some(j) = b {
            self.y[(j, j)] += y;
        }
        if let (Some(i), Some(j)) = (a, b) {
            self.y[(i, j)] -= y;
            self.y[(j, i)] -= y;
        }
    }

    /// Stamp an impedance branch; open branches are skipped.
    pub fn add_branch(&mut self, a: Node, b: Node, z: Value, name: &str) -> Result<(), CircuitError> {
        match z {
            Value::Open => Ok(()),
            Value::Finite(z) if z == ZERO => Err(CircuitError::ZeroImpedance(name.to_string())),
            Value::Finite(z) => {
                self.add_admittance(a, b, z.inv());
                Ok(())
            }
        }
    }

    /// Current `i` flowing into node `a` and out of node `b`.
    pub fn inject(&mut self, a: Node, b: Node, i: Complex64) {
        if let Some(k) = a {
            self.rhs[k] += i;
        }
        if let Some(k) = b {
            self.rhs[k] -= i;
        }
    }

    /// Impedance branch `a`–`b` carrying an EMF `e` that raises `a` above
    /// `b` by `e` at zero current (Norton equivalent).
    pub fn add_source_branch(&mut self, a: Node, b: Node, z: Complex64, e: Complex64, name: &str) -> Result<(), CircuitError> {
        if z == ZERO {
            return Err(CircuitError::ZeroImpedance(name.to_string()));
        }
        let y = z.inv();
        self.add_admittance(a, b, y);
        self.inject(a, b, e * y);
        Ok(())
    }

    /// Solve `Y·v = i`, returning node voltages and a 1-norm condition estimate.
    pub fn solve(&self) -> Result<(DVector<Complex64>, f64), CircuitError> {
        let n = self.y.nrows();
        let lu = self.y.clone().lu();
        let v = lu.solve(&self.rhs).ok_or(CircuitError::Singular)?;
        let inv = lu.try_inverse().ok_or(CircuitError::Singular)?;
        let cond = norm1(&self.y) * norm1(&inv);
        if !cond.is_finite() || v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CircuitError::Singular);
        }
        if cond > CONDITION_WARN {
            log::warn!("ill-conditioned {n}-node network: condition estimate {cond:.3e}");
        }
        Ok((v, cond))
    }
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn voltage(v: &DVector<Complex64>, n: Node) -> Complex64 {
    n.map_or(ZERO, |k| v[k])
}

/// Current through branch `a`→`b` of impedance `z`; zero for an open branch.
pub fn branch_current(v: &DVector<Complex64>, a: Node, b: Node, z: Value) -> Complex64 {
    match z {
        Value::Open => ZERO,
        Value::Finite(z) => (voltage(v, a) - voltage(v, b)) / z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn divider() {
        // 1 A into a node with 2 Ω and 2 Ω to ground
        let mut ckt = Circuit::new(1);
        ckt.add_branch(Some(0), None, Value::Finite(c(2.0, 0.0)), "a").unwrap();
        ckt.add_branch(Some(0), None, Value::Finite(c(2.0, 0.0)), "b").unwrap();
        ckt.inject(Some(0), None, c(1.0, 0.0));
        let (v, cond) = ckt.solve().unwrap();
        assert!((v[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((cond - 1.0).abs() < 1e-12);
    }

    #[test]
    fn source_branch_thevenin() {
        // E = 10 behind 1 Ω feeding 4 Ω
        let mut ckt = Circuit::new(1);
        ckt.add_source_branch(Some(0), None, c(1.0, 0.0), c(10.0, 0.0), "src").unwrap();
        ckt.add_branch(Some(0), None, Value::Finite(c(4.0, 0.0)), "load").unwrap();
        let (v, _) = ckt.solve().unwrap();
        assert!((v[0] - c(8.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn floating_node_is_singular() {
        let mut ckt = Circuit::new(2);
        ckt.add_branch(Some(0), None, Value::Finite(c(1.0, 0.0)), "a").unwrap();
        assert_eq!(ckt.solve().unwrap_err(), CircuitError::Singular);
        assert!(ckt.add_branch(Some(0), None, Value::Finite(c(0.0, 0.0)), "z").is_err());
    }
}
