//! Fundamental-frequency steady state of the system, with or without the
//! fault, used to pick the converter linearization point and to start
//! time-domain runs close to steady state.
//!
//! The converter is a positive-sequence current source aligned with its
//! terminal voltage (the PLL's d axis) plus its negative-sequence impedance
//! at the fundamental. The sequence networks are tied in series through
//! `3·Z_f` exactly as in the composite model.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, SimError};
use crate::nodal::{voltage, Circuit, CircuitError, Node};
use crate::plant::{converter_sequence_impedance, shunt_filter_branch, OperatingPoint, Sequence};
use crate::system::SystemSpec;
use crate::tfcore::{FreqExpr, Value};
use crate::wcsim::{grid_branches, FaultSpec};

/// Sequence phasors (p.u., peak-referred, system base) at the main buses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BusPhasors {
    pub pos: Complex64,
    pub neg: Complex64,
    pub zero: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    /// Converter terminal (filter bus), T1 low-voltage side.
    pub terminal: BusPhasors,
    /// 35 kV collector bus (T1 high-voltage side).
    pub collector: BusPhasors,
    /// Point on the 220 kV line where the fault sits.
    pub fault_bus: BusPhasors,
    /// Converter current in p.u. of the unit peak current.
    pub i_conv: Complex64,
    /// Phase-A fault current in p.u.
    pub i_fault: Complex64,
}

impl Equilibrium {
    /// Positive-sequence terminal voltage magnitude in peak phase volts.
    pub fn v1_volts(&self, sys: &SystemSpec) -> f64 {
        self.terminal.pos.norm() * sys.bases.v_unit_peak()
    }
}

const TP: Node = Some(0);
const WP: Node = Some(1);
const FP: Node = Some(2);
const NP: Node = Some(3);
const TN: Node = Some(4);
const WN: Node = Some(5);
const NN: Node = Some(6);
const GND: Node = None;

fn ev(e: &FreqExpr, s: Complex64) -> Result<Value, Error> {
    Ok(e.eval_value(s)?)
}

fn fin(e: &FreqExpr, s: Complex64) -> Result<Complex64, Error> {
    Ok(e.eval(s)?)
}

fn circuit(e: CircuitError) -> Error {
    SimError::Equilibrium(match e {
        CircuitError::Singular => "singular phasor network".to_string(),
        CircuitError::ZeroImpedance(b) => format!("zero-impedance branch {b}"),
    })
    .into()
}

/// Sequence EMFs of the grid source in p.u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceSequences {
    pub pos: Complex64,
    pub neg: Complex64,
    pub zero: Complex64,
}

impl SourceSequences {
    pub fn balanced(v_pu: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        SourceSequences { pos: Complex64::new(v_pu, 0.0), neg: z, zero: z }
    }

    /// Phase A amplitude reduced by the fraction `depth`, phases B and C intact.
    pub fn phase_a_sag(v_pu: f64, depth: f64) -> Self {
        let d = Complex64::new(-depth * v_pu / 3.0, 0.0);
        SourceSequences { pos: Complex64::new(v_pu, 0.0) + d, neg: d, zero: d }
    }

    fn scaled(&self, k: f64) -> Self {
        SourceSequences { pos: self.pos * k, neg: self.neg * k, zero: self.zero * k }
    }
}

/// Node voltages with the source scaled by `e` and converter current `i_conv`.
fn solve_network(
    sys: &SystemSpec,
    fault: Option<&FaultSpec>,
    e: &SourceSequences,
    i_conv: Complex64,
) -> Result<(nalgebra::DVector<Complex64>, Value), Error> {
    let p = &sys.converter;
    let s = Complex64::new(0.0, p.omega1);
    let zb = sys.bases.z_base_unit();
    let alpha = fault.map_or(sys.fault.alpha, |f| f.alpha);
    let g = grid_branches(sys, alpha)?;
    let xt1 = Value::Finite(s * (p.x_t1_pu / p.omega1));
    let filt = fin(&shunt_filter_branch(p)?, s)? / zb;
    // at the fundamental the negative-sequence converter impedance does not
    // depend on the PLL, so any valid linearization point will do
    let op = OperatingPoint::new(sys.bases.v_unit_peak(), p.i_ar, p.i_qr)?;
    let zcn = fin(&converter_sequence_impedance(p, &op, Sequence::Negative)?, s)? / zb;
    let zf = match fault {
        Some(f) if !f.branch.is_open() => match ev(&f.branch.expr(p.omega1), s)? {
            Value::Finite(z) => Value::Finite(3.0 * z),
            Value::Open => Value::Open,
        },
        _ => Value::Open,
    };
    let g1 = ev(&g.z_g1, s)?;
    let g2 = fin(&g.z_g2, s)?;

    let mut c = Circuit::new(7);
    let mut add = |a, b, z, n: &str| c.add_branch(a, b, z, n).map_err(circuit);
    add(TP, NP, Value::Finite(filt), "filter")?;
    add(TP, WP, xt1, "T1")?;
    add(WP, FP, g1, "Z_g1")?;
    add(TN, NN, Value::Finite(filt * zcn / (filt + zcn)), "converter")?;
    add(TN, WN, xt1, "T1")?;
    add(WN, GND, g1, "Z_g1")?;
    add(NP, GND, ev(&g.z_01, s)?, "Z_01")?;
    add(FP, NN, zf, "3Z_f")?;
    // each source EMF sits at the grid end of its network, between the
    // fault-side terminal and the network neutral
    c.add_source_branch(FP, NP, g2, e.pos, "Z_g2").map_err(circuit)?;
    c.add_source_branch(GND, NN, g2, e.neg, "Z_g2").map_err(circuit)?;
    match ev(&g.z_02, s)? {
        Value::Finite(z02) => c.add_source_branch(NP, GND, z02, e.zero, "Z_02").map_err(circuit)?,
        Value::Open if e.zero.norm() == 0.0 => {}
        Value::Open => {
            return Err(SimError::Equilibrium("zero-sequence source behind an open branch".into()).into())
        }
    }
    c.inject(TP, NP, i_conv);
    let (v, _) = c.solve().map_err(circuit)?;
    Ok((v, zf))
}

/// Solve the fundamental-frequency steady state. `fault = None` gives the
/// healthy system.
pub fn phasor_equilibrium(sys: &SystemSpec, fault: Option<&FaultSpec>) -> Result<Equilibrium, Error> {
    phasor_equilibrium_with(sys, fault, &SourceSequences::balanced(sys.source.v_pu))
}

/// As [`phasor_equilibrium`] with an unbalanced grid source.
pub fn phasor_equilibrium_with(
    sys: &SystemSpec,
    fault: Option<&FaultSpec>,
    e: &SourceSequences,
) -> Result<Equilibrium, Error> {
    sys.validate()?;
    let p = &sys.converter;
    let i_dq = Complex64::new(p.i_ar, p.i_qr) / sys.bases.i_unit_peak();

    // the terminal voltage is affine in the converter current: V = A + B·I
    let term = |v: &nalgebra::DVector<Complex64>| voltage(v, TP) - voltage(v, NP);
    let (va, _) = solve_network(sys, fault, e, Complex64::new(0.0, 0.0))?;
    let (vb, _) = solve_network(sys, fault, &e.scaled(0.0), Complex64::new(1.0, 0.0))?;
    let a = term(&va);
    let c = term(&vb) * i_dq;
    // arg(A + c·e^{jφ}) = φ  ⇔  Im(A·e^{-jφ}) = −Im(c)
    let x = c.im / a.norm();
    if !(x.abs() < 1.0) {
        return Err(SimError::Equilibrium(format!(
            "no synchronous solution: converter current too large for the grid (|sin| = {:.3})",
            x.abs()
        ))
        .into());
    }
    let phi = a.arg() + x.asin();
    let i_conv = i_dq * Complex64::from_polar(1.0, phi);
    let (v, zf) = solve_network(sys, fault, e, i_conv)?;
    let t = term(&v);
    debug_assert!((t.arg() - phi).sin().abs() < 1e-9 || t.norm() < 1e-12);
    if t.re * phi.cos() + t.im * phi.sin() <= 0.0 {
        return Err(SimError::Equilibrium("terminal voltage collapsed".into()).into());
    }

    let pos = |n: Node| voltage(&v, n) - voltage(&v, NP);
    let neg = |n: Node| voltage(&v, n) - voltage(&v, NN);
    let i_fault = match zf {
        Value::Finite(z3) => 3.0 * (voltage(&v, FP) - voltage(&v, NN)) / z3,
        Value::Open => Complex64::new(0.0, 0.0),
    };
    let zero = Complex64::new(0.0, 0.0);
    Ok(Equilibrium {
        terminal: BusPhasors { pos: pos(TP), neg: neg(TN), zero },
        collector: BusPhasors { pos: pos(WP), neg: neg(WN), zero },
        fault_bus: BusPhasors { pos: pos(FP), neg: neg(GND), zero: voltage(&v, NP) },
        i_conv,
        i_fault,
    })
}

/// Phase `k` (0 = a) of a sequence set at electrical angle `theta`.
pub fn phase_value(b: &BusPhasors, k: usize, theta: f64) -> f64 {
    let shift = -2.0 * PI * k as f64 / 3.0;
    let rot = |z: Complex64, sh: f64| (z * Complex64::from_polar(1.0, theta + sh)).re;
    rot(b.pos, shift) + rot(b.neg, -shift) + rot(b.zero, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::OperatingPointMode;
    use crate::wcsim::FaultBranch;

    #[test]
    fn healthy_equilibrium_is_balanced_and_aligned() {
        let sys = SystemSpec::default();
        let eq = phasor_equilibrium(&sys, None).unwrap();
        assert!(eq.terminal.neg.norm() < 1e-12);
        assert!(eq.i_fault.norm() == 0.0);
        // current in phase with the terminal voltage (i_q = 0)
        assert!((eq.i_conv.arg() - eq.terminal.pos.arg()).abs() < 1e-9);
        let v1 = eq.v1_volts(&sys);
        assert!(v1 > 300.0 && v1 < 700.0, "{v1}");
    }

    #[test]
    fn fault_depresses_positive_sequence_and_creates_negative() {
        let sys = SystemSpec::default();
        let healthy = phasor_equilibrium(&sys, None).unwrap();
        let faulted = phasor_equilibrium(&sys, Some(&sys.fault)).unwrap();
        assert!(faulted.terminal.pos.norm() < healthy.terminal.pos.norm());
        assert!(faulted.terminal.neg.norm() > 1e-3);
        // series interconnection: the three sequence fault currents are equal
        assert!(faulted.i_fault.norm() > 0.0);
    }

    #[test]
    fn kirchhoff_at_the_fault() {
        // u_p + u_n + u_0 = Z_f·I_fa for a resistive fault
        let sys = SystemSpec::default();
        let eq = phasor_equilibrium(&sys, Some(&sys.fault)).unwrap();
        let FaultBranch::Resistive(rf) = sys.fault.branch else { unreachable!() };
        let u = eq.fault_bus.pos + eq.fault_bus.neg + eq.fault_bus.zero;
        assert!((u - rf * eq.i_fault).norm() < 1e-12);
    }

    #[test]
    fn explicit_mode_skips_the_solver() {
        let sys = SystemSpec {
            operating_point: OperatingPointMode::Explicit { v1_v: 400.0, i_d0_a: 100.0, i_q0_a: 5.0 },
            ..Default::default()
        };
        let op = sys.resolve_operating_point(Some(&sys.fault)).unwrap();
        assert_eq!((op.v1, op.i_d0, op.i_q0), (400.0, 100.0, 5.0));
    }

    #[test]
    fn overload_has_no_solution() {
        let mut sys = SystemSpec::default();
        sys.converter.i_ar = 60_000.0;
        assert!(phasor_equilibrium(&sys, None).is_err());
    }

    #[test]
    fn phase_reconstruction() {
        let b = BusPhasors { pos: Complex64::new(1.0, 0.0), neg: Complex64::new(0.0, 0.0), zero: Complex64::new(0.0, 0.0) };
        assert!((phase_value(&b, 0, 0.0) - 1.0).abs() < 1e-15);
        assert!((phase_value(&b, 1, 0.0) + 0.5).abs() < 1e-15);
        let sum: f64 = (0..3).map(|k| phase_value(&b, k, 0.3)).sum();
        assert!(sum.abs() < 1e-14);
    }
}
