//! Composite three-sequence network of a single-line-to-ground fault (or an
//! unbalanced phase-A load) and its closed-form equivalents.
//!
//! The positive, negative and zero sequence circuits are tied in series
//! through `3·Z_f` at the fault point. Seen from the WPP port of one sequence
//! the grid becomes `Z_g1 + Z_g2 ∥ (Z_other + 3·Z_f + Z_0e)`.
//!
//! [`nodal_solve`] is an independent check of the closed forms: it stamps the
//! same branch expressions into a node-admittance matrix and solves it
//! directly without going through [`zgpe`] or [`zgne`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, ParamError, SolveError};
use crate::nodal::{branch_current, voltage, Circuit, CircuitError, Node};
use crate::plant::{
    line_impedance, transformer_impedance, OperatingPoint, Sequence, Side, SequencePath,
};
use crate::system::SystemSpec;
use crate::tfcore::{FreqExpr, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// Phase A to ground through `Z_f`.
    Slgf,
    /// Unbalanced phase-A load represented by its small-signal impedance.
    VirtualLoad,
}

/// Fault branch impedance in p.u. on the system base.
#[derive(Debug, Clone)]
pub enum FaultBranch {
    Resistive(f64),
    /// `R + s·X/ω1`, `X` at the fundamental.
    SeriesRl { r_pu: f64, x_pu: f64 },
    Open,
    Expr(FreqExpr),
}

impl FaultBranch {
    pub fn expr(&self, omega1: f64) -> FreqExpr {
        match self {
            FaultBranch::Resistive(r) => FreqExpr::resistor(*r),
            FaultBranch::SeriesRl { r_pu, x_pu } => {
                FreqExpr::resistor(*r_pu).series(&FreqExpr::inductor(x_pu / omega1))
            }
            FaultBranch::Open => FreqExpr::open(),
            FaultBranch::Expr(e) => e.clone(),
        }
    }

    pub fn is_open(&self) -> bool {
        match self {
            FaultBranch::Open => true,
            FaultBranch::Expr(e) => e.is_open(),
            _ => false,
        }
    }

    /// Same branch with every impedance multiplied by `k`.
    pub fn scaled(&self, k: f64) -> FaultBranch {
        match self {
            FaultBranch::Resistive(r) => FaultBranch::Resistive(r * k),
            FaultBranch::SeriesRl { r_pu, x_pu } => FaultBranch::SeriesRl { r_pu: r_pu * k, x_pu: x_pu * k },
            FaultBranch::Open => FaultBranch::Open,
            FaultBranch::Expr(e) => FaultBranch::Expr(e.scale_real(k)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FaultSpec {
    pub kind: FaultKind,
    /// Fault location as a fraction of the 220 kV line measured from the WPP.
    pub alpha: f64,
    pub branch: FaultBranch,
}

impl Default for FaultSpec {
    fn default() -> Self {
        FaultSpec { kind: FaultKind::Slgf, alpha: 0.1, branch: FaultBranch::Resistive(0.02) }
    }
}

impl FaultSpec {
    pub fn new(kind: FaultKind, alpha: f64, branch: FaultBranch) -> Result<Self, ParamError> {
        let f = FaultSpec { kind, alpha, branch };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ParamError::new(
                "FaultSpec",
                format!("alpha = {} violates 0 < alpha < 1", self.alpha),
            ));
        }
        match self.branch {
            FaultBranch::Resistive(r) if !(r >= 0.0 && r.is_finite()) => {
                Err(ParamError::new("FaultSpec", "fault resistance must be >= 0"))
            }
            FaultBranch::SeriesRl { r_pu, x_pu } if !(r_pu >= 0.0 && x_pu >= 0.0) => {
                Err(ParamError::new("FaultSpec", "fault R and X must be >= 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self, ParamError> {
        FaultSpec::new(self.kind, alpha, self.branch.clone())
    }
}

/// Branches of the composite network, all in p.u. on the system base.
#[derive(Debug, Clone)]
pub struct CompositeModel {
    pub z_wp: FreqExpr,
    pub z_wn: FreqExpr,
    pub z_g1: FreqExpr,
    pub z_g2: FreqExpr,
    pub z_01: FreqExpr,
    pub z_02: FreqExpr,
    pub z_f: FreqExpr,
}

impl CompositeModel {
    /// Whole-grid positive-sequence impedance without any interconnection.
    pub fn z_gp(&self) -> FreqExpr {
        self.z_g1.series(&self.z_g2)
    }

    pub fn z_gn(&self) -> FreqExpr {
        self.z_g1.series(&self.z_g2)
    }

    pub fn with_fault_branch(&self, z_f: FreqExpr) -> CompositeModel {
        CompositeModel { z_f, ..self.clone() }
    }

    /// Exchange the positive and negative WPP branches.
    pub fn swapped(&self) -> CompositeModel {
        CompositeModel { z_wp: self.z_wn.clone(), z_wn: self.z_wp.clone(), ..self.clone() }
    }
}

/// Grid-side branches for fault location `alpha`.
pub struct GridBranches {
    pub z_g1: FreqExpr,
    pub z_g2: FreqExpr,
    pub z_01: FreqExpr,
    pub z_02: FreqExpr,
}

pub fn grid_branches(system: &SystemSpec, alpha: f64) -> Result<GridBranches, ParamError> {
    let w1 = system.converter.omega1;
    let pos = Sequence::Positive;
    let t2 = transformer_impedance(&system.t2, pos, Side::Low, w1);
    let t2 = t2.expr().cloned().ok_or_else(|| ParamError::new("T2", "no positive-sequence path"))?;
    let source = system.source.expr(w1);
    let z_g1 = line_impedance(&system.l1, 1.0, pos, w1)?
        .series(&t2)
        .series(&line_impedance(&system.l2, alpha, pos, w1)?)
        .named("Z_g1");
    let z_g2 = line_impedance(&system.l2, 1.0 - alpha, pos, w1)?.series(&source).named("Z_g2");
    let mut z_01 = line_impedance(&system.l2, alpha, Sequence::Zero, w1)?;
    z_01 = match transformer_impedance(&system.t2, Sequence::Zero, Side::High, w1) {
        SequencePath::Series(t) if system.xt2_in_z01 => z_01.series(&t),
        _ => z_01,
    };
    let z_02 = line_impedance(&system.l2, 1.0 - alpha, Sequence::Zero, w1)?
        .series(&system.source.zero_expr(w1))
        .named("Z_02");
    Ok(GridBranches { z_g1, z_g2, z_01: z_01.named("Z_01"), z_02 })
}

/// Assemble the composite model; the WPP branches are linearized at the
/// operating point resolved from `system`.
pub fn build_composite(system: &SystemSpec, fault: &FaultSpec) -> Result<CompositeModel, Error> {
    let op = system.resolve_operating_point(Some(fault))?;
    build_composite_at(system, fault, &op)
}

pub fn build_composite_at(
    system: &SystemSpec,
    fault: &FaultSpec,
    op: &OperatingPoint,
) -> Result<CompositeModel, Error> {
    system.validate()?;
    fault.validate()?;
    let g = grid_branches(system, fault.alpha)?;
    Ok(CompositeModel {
        z_wp: system.wpp_impedance(Sequence::Positive, op)?.named("Z_wp"),
        z_wn: system.wpp_impedance(Sequence::Negative, op)?.named("Z_wn"),
        z_g1: g.z_g1,
        z_g2: g.z_g2,
        z_01: g.z_01,
        z_02: g.z_02,
        z_f: fault.branch.expr(system.converter.omega1).named("Z_f"),
    })
}

/// Zero-sequence equivalent seen from the fault point, `Z_01·Z_02/(Z_01 + Z_02)`.
pub fn z0e(z_01: &FreqExpr, z_02: &FreqExpr) -> Result<FreqExpr, ParamError> {
    if z_01.is_open() && z_02.is_open() {
        return Err(ParamError::new("z0e", "both zero-sequence branches are open"));
    }
    Ok(z_01.parallel(z_02))
}

/// Negative-sequence equivalent seen from the fault point,
/// `(Z_wn + Z_g1)·Z_g2/(Z_wn + Z_g1 + Z_g2)`.
pub fn zne(z_wn: &FreqExpr, z_g1: &FreqExpr, z_g2: &FreqExpr) -> FreqExpr {
    z_wn.series(z_g1).parallel(z_g2)
}

/// Positive-sequence equivalent seen from the fault point; the mirror of [`zne`].
pub fn zpe(z_wp: &FreqExpr, z_g1: &FreqExpr, z_g2: &FreqExpr) -> FreqExpr {
    z_wp.series(z_g1).parallel(z_g2)
}

/// Equivalent positive-sequence grid impedance seen by the WPP,
/// `Z_g1 + Z_g2 ∥ (Z_ne + 3·Z_f + Z_0e)`.
pub fn zgpe(m: &CompositeModel) -> Result<FreqExpr, ParamError> {
    let tie = zne(&m.z_wn, &m.z_g1, &m.z_g2)
        .series(&m.z_f.scale_real(3.0))
        .series(&z0e(&m.z_01, &m.z_02)?);
    Ok(m.z_g1.series(&m.z_g2.parallel(&tie)).named("Z_gpe"))
}

/// Equivalent negative-sequence grid impedance seen by the WPP,
/// `Z_g1 + Z_g2 ∥ (Z_pe + 3·Z_f + Z_0e)`.
pub fn zgne(m: &CompositeModel) -> Result<FreqExpr, ParamError> {
    let tie = zpe(&m.z_wp, &m.z_g1, &m.z_g2)
        .series(&m.z_f.scale_real(3.0))
        .series(&z0e(&m.z_01, &m.z_02)?);
    Ok(m.z_g1.series(&m.z_g2.parallel(&tie)).named("Z_gne"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InjectionPort {
    /// Between the positive-sequence WPP bus and its neutral, WPP branch removed.
    PositiveWpp,
    NegativeWpp,
    /// Across the fault branch, in parallel with `3·Z_f`.
    Fault,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceSolution {
    pub s: Complex64,
    pub port: InjectionPort,
    pub injection: Complex64,
    pub u_fp: Complex64,
    pub u_fn: Complex64,
    pub u_f0: Complex64,
    /// Sequence currents leaving each network at its fault terminal.
    pub i_fp: Complex64,
    pub i_fn: Complex64,
    pub i_f0: Complex64,
    /// Phase-A current through `Z_f` (three times the tie current).
    pub i_fa: Complex64,
    pub driving_point: Complex64,
    pub condition: f64,
}

// node numbering; F_n and N_0 are the reference
const FP: Node = Some(0);
const NP: Node = Some(1); // also F_0
const NN: Node = Some(2);
const WP: Node = Some(3);
const WN: Node = Some(4);
const GND: Node = None;

struct Evaluated {
    wp: Value,
    wn: Value,
    g1: Value,
    g2: Value,
    z01: Value,
    z02: Value,
    f: Value,
}

fn evaluate(m: &CompositeModel, s: Complex64) -> Result<Evaluated, EvalError> {
    Ok(Evaluated {
        wp: m.z_wp.eval_value(s)?,
        wn: m.z_wn.eval_value(s)?,
        g1: m.z_g1.eval_value(s)?,
        g2: m.z_g2.eval_value(s)?,
        z01: m.z_01.eval_value(s)?,
        z02: m.z_02.eval_value(s)?,
        f: m.z_f.eval_value(s)?,
    })
}

fn triple(v: Value) -> Value {
    match v {
        Value::Finite(z) => Value::Finite(3.0 * z),
        Value::Open => Value::Open,
    }
}

fn circuit_err(s: Complex64) -> impl Fn(CircuitError) -> SolveError {
    move |e| match e {
        CircuitError::Singular => SolveError::Singular { s },
        CircuitError::ZeroImpedance(b) => {
            SolveError::Topology(format!("zero-impedance branch {b} at s = {s}"))
        }
    }
}

/// Solve the interconnected sequence networks at `s` for a current
/// `amplitude` injected at `port`.
pub fn nodal_solve(
    m: &CompositeModel,
    s: Complex64,
    port: InjectionPort,
    amplitude: Complex64,
) -> Result<SequenceSolution, SolveError> {
    let z = evaluate(m, s)?;
    let err = circuit_err(s);
    let mut ckt = Circuit::new(5);
    // positive network
    if port != InjectionPort::PositiveWpp {
        ckt.add_branch(WP, NP, z.wp, "Z_wp").map_err(&err)?;
    }
    ckt.add_branch(WP, FP, z.g1, "Z_g1").map_err(&err)?;
    ckt.add_branch(FP, NP, z.g2, "Z_g2").map_err(&err)?;
    // negative network, fault terminal is the reference
    if port != InjectionPort::NegativeWpp {
        ckt.add_branch(WN, NN, z.wn, "Z_wn").map_err(&err)?;
    }
    ckt.add_branch(WN, GND, z.g1, "Z_g1").map_err(&err)?;
    ckt.add_branch(GND, NN, z.g2, "Z_g2").map_err(&err)?;
    // zero network between F_0 and N_0
    ckt.add_branch(NP, GND, z.z01, "Z_01").map_err(&err)?;
    ckt.add_branch(NP, GND, z.z02, "Z_02").map_err(&err)?;
    // series tie
    ckt.add_branch(FP, NN, triple(z.f), "3Z_f").map_err(&err)?;

    let (plus, minus) = match port {
        InjectionPort::PositiveWpp => (WP, NP),
        InjectionPort::NegativeWpp => (WN, NN),
        InjectionPort::Fault => (FP, NN),
    };
    ckt.inject(plus, minus, amplitude);
    let (v, condition) = ckt.solve().map_err(&err)?;

    let u_fp = voltage(&v, FP) - voltage(&v, NP);
    let u_fn = voltage(&v, GND) - voltage(&v, NN);
    let u_f0 = voltage(&v, NP) - voltage(&v, GND);
    let i_fp = branch_current(&v, WP, FP, z.g1) + branch_current(&v, NP, FP, z.g2);
    let i_fn = branch_current(&v, WN, GND, z.g1) + branch_current(&v, NN, GND, z.g2);
    let i_f0 = branch_current(&v, GND, NP, z.z01) + branch_current(&v, GND, NP, z.z02);
    let i_fa = match z.f {
        Value::Open => Complex64::new(0.0, 0.0),
        Value::Finite(zf) => (voltage(&v, FP) - voltage(&v, NN)) / zf,
    };
    Ok(SequenceSolution {
        s,
        port,
        injection: amplitude,
        u_fp,
        u_fn,
        u_f0,
        i_fp,
        i_fn,
        i_f0,
        i_fa,
        driving_point: (voltage(&v, plus) - voltage(&v, minus)) / amplitude,
        condition,
    })
}

/// Fault boundary-condition residuals `(voltage law, current law)`,
/// normalized by the injection amplitude.
///
/// Voltage law: `|u_fp + u_fn + u_f0 − Z_f·I_fa|`. Current law: largest
/// deviation of a sequence current from `I_fa/3`. An injection across the
/// fault branch supplies part of the fault current, so for that port the
/// sequence currents are compared with `I_fa/3 − I_inj`.
pub fn boundary_residual(sol: &SequenceSolution, z_f: Value) -> (f64, f64) {
    let scale = sol.injection.norm();
    let u_sum = sol.u_fp + sol.u_fn + sol.u_f0;
    let voltage_law = match z_f {
        Value::Finite(zf) => (u_sum - zf * sol.i_fa).norm(),
        // open fault: the phase-A current is zero and no voltage law applies
        Value::Open => sol.i_fa.norm(),
    };
    let mut share = sol.i_fa / 3.0;
    if sol.port == InjectionPort::Fault {
        share -= sol.injection;
    }
    let current_law = [sol.i_fp, sol.i_fn, sol.i_f0]
        .iter()
        .map(|i| (i - share).norm())
        .fold(0.0, f64::max);
    (voltage_law / scale, current_law / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn jf(f: f64) -> Complex64 {
        c(0.0, 2.0 * PI * f)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn toy(zf: FreqExpr) -> CompositeModel {
        CompositeModel {
            z_wp: FreqExpr::resistor(0.4).series(&FreqExpr::inductor(0.002)),
            z_wn: FreqExpr::resistor(0.7).series(&FreqExpr::inductor(0.001)),
            z_g1: FreqExpr::resistor(0.01).series(&FreqExpr::inductor(0.0003)),
            z_g2: FreqExpr::resistor(0.03).series(&FreqExpr::inductor(0.0011)),
            z_01: FreqExpr::resistor(0.02).series(&FreqExpr::inductor(0.0004)),
            z_02: FreqExpr::resistor(0.09).series(&FreqExpr::inductor(0.0033)),
            z_f: zf,
        }
    }

    #[test]
    fn z0e_examples() {
        let a = FreqExpr::constant(c(0.0, 0.3));
        let b = FreqExpr::constant(c(0.0, 0.6));
        assert!((z0e(&a, &b).unwrap().eval(c(0.0, 1.0)).unwrap() - c(0.0, 0.2)).norm() < 1e-15);
        assert_eq!(z0e(&a, &FreqExpr::open()).unwrap().eval(c(0.0, 1.0)).unwrap(), c(0.0, 0.3));
        assert!(z0e(&FreqExpr::open(), &FreqExpr::open()).is_err());
    }

    #[test]
    fn zne_limits() {
        let m = toy(FreqExpr::resistor(0.02));
        let s = jf(30.0);
        let open = FreqExpr::open();
        let v = zne(&open, &m.z_g1, &m.z_g2).eval(s).unwrap();
        assert_eq!(v, m.z_g2.eval(s).unwrap());
        let v = zne(&m.z_wn, &m.z_g1, &open).eval(s).unwrap();
        assert!(rel(v, m.z_wn.eval(s).unwrap() + m.z_g1.eval(s).unwrap()) < 1e-15);
    }

    #[test]
    fn zgpe_limits() {
        let m = toy(FreqExpr::resistor(0.02));
        let s = jf(70.0);
        let open = m.with_fault_branch(FreqExpr::open());
        let want = m.z_gp().eval(s).unwrap();
        assert!(rel(zgpe(&open).unwrap().eval(s).unwrap(), want) < 1e-15);
        assert!(rel(zgne(&open).unwrap().eval(s).unwrap(), want) < 1e-15);

        let no_g2 = CompositeModel { z_g2: FreqExpr::open(), ..m.clone() };
        let ev = |e: &FreqExpr| e.eval(s).unwrap();
        let want = ev(&m.z_g1) + ev(&m.z_wn) + ev(&m.z_g1) + 3.0 * ev(&m.z_f)
            + ev(&z0e(&m.z_01, &m.z_02).unwrap());
        // with Z_g2 open Z_ne becomes Z_wn + Z_g1
        assert!(rel(ev(&zgpe(&no_g2).unwrap()), want) < 1e-14);
    }

    #[test]
    fn oracle_matches_closed_forms() {
        let m = toy(FreqExpr::resistor(0.02));
        for f in [0.3, 5.0, 30.0, 70.0, 180.0, 950.0] {
            let s = jf(f);
            let p = nodal_solve(&m, s, InjectionPort::PositiveWpp, c(1.0, 0.0)).unwrap();
            assert!(rel(p.driving_point, zgpe(&m).unwrap().eval(s).unwrap()) < 1e-12);
            let n = nodal_solve(&m, s, InjectionPort::NegativeWpp, c(0.0, 0.5)).unwrap();
            assert!(rel(n.driving_point, zgne(&m).unwrap().eval(s).unwrap()) < 1e-12);
            // across the fault the three networks are in series, then ∥ 3Z_f
            let q = nodal_solve(&m, s, InjectionPort::Fault, c(1.0, 0.0)).unwrap();
            let chain = zpe(&m.z_wp, &m.z_g1, &m.z_g2)
                .series(&zne(&m.z_wn, &m.z_g1, &m.z_g2))
                .series(&z0e(&m.z_01, &m.z_02).unwrap())
                .parallel(&m.z_f.scale_real(3.0));
            assert!(rel(q.driving_point, chain.eval(s).unwrap()) < 1e-12);
            for sol in [p, n, q] {
                let (vl, cl) = boundary_residual(&sol, m.z_f.eval_value(s).unwrap());
                assert!(vl < 1e-12 && cl < 1e-12, "{vl} {cl}");
            }
        }
    }

    #[test]
    fn open_fault_carries_no_current() {
        let m = toy(FreqExpr::open());
        let sol = nodal_solve(&m, jf(40.0), InjectionPort::PositiveWpp, c(1.0, 0.0)).unwrap();
        assert_eq!(sol.i_fa, c(0.0, 0.0));
        let (vl, cl) = boundary_residual(&sol, Value::Open);
        assert_eq!(vl, 0.0);
        assert!(cl < 1e-14);
        assert!(rel(sol.driving_point, m.z_gp().eval(jf(40.0)).unwrap()) < 1e-13);
    }

    #[test]
    fn three_impedance_loop_by_hand() {
        // With Z_g2 open each sequence network collapses to a series chain and
        // the fault loop is Z_a + Z_b + Z_c + 2·Z_g1.
        let za = c(1.0, 2.0);
        let zb = c(1.0, 2.0);
        let zc = c(1.0, 2.0);
        let zf = c(0.5, 0.0);
        let m = CompositeModel {
            z_wp: FreqExpr::constant(za),
            z_wn: FreqExpr::constant(zb),
            z_g1: FreqExpr::real(0.1),
            z_g2: FreqExpr::open(),
            z_01: FreqExpr::constant(zc),
            z_02: FreqExpr::open(),
            z_f: FreqExpr::constant(zf),
        };
        let i = c(1.0, 0.0);
        let sol = nodal_solve(&m, jf(10.0), InjectionPort::Fault, i).unwrap();
        // current divider between the loop and 3Z_f; the loop share flows
        // into the networks at their fault terminals
        let loop_z = za + zb + zc + c(0.2, 0.0);
        let i_loop = -i * 3.0 * zf / (3.0 * zf + loop_z);
        assert!((sol.i_fp - i_loop).norm() < 1e-12, "{} {}", sol.i_fp, i_loop);
        assert!((sol.i_fn - i_loop).norm() < 1e-12);
        assert!((sol.i_f0 - i_loop).norm() < 1e-12);
        let (vl, cl) = boundary_residual(&sol, Value::Finite(zf));
        assert!(vl < 1e-12 && cl < 1e-12);
    }

    #[test]
    fn balanced_limit_is_monotone() {
        let m = toy(FreqExpr::resistor(0.02));
        let grid: Vec<f64> = (0..40).map(|k| 10f64.powf(-1.0 + 4.0 * k as f64 / 39.0)).collect();
        let mut last = f64::INFINITY;
        for e in 2..=9 {
            let k = 10f64.powi(e);
            let mk = m.with_fault_branch(m.z_f.scale_real(k));
            let dev = grid
                .iter()
                .map(|&f| {
                    let s = jf(f);
                    rel(zgpe(&mk).unwrap().eval(s).unwrap(), m.z_gp().eval(s).unwrap())
                })
                .fold(0.0, f64::max);
            assert!(dev < last);
            last = dev;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn swap_symmetry() {
        let m = toy(FreqExpr::resistor(0.05));
        let w = m.swapped();
        for f in [1.0, 20.0, 77.0, 400.0] {
            let s = jf(f);
            let a = zgpe(&m).unwrap().eval(s).unwrap();
            let b = zgne(&w).unwrap().eval(s).unwrap();
            assert!(rel(a, b) < 1e-12);
        }
        let sym = CompositeModel { z_wn: m.z_wp.clone(), ..m };
        let s = jf(33.0);
        assert!(rel(zgpe(&sym).unwrap().eval(s).unwrap(), zgne(&sym).unwrap().eval(s).unwrap()) < 1e-12);
    }
}
