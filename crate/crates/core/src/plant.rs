//! Sequence-domain impedance models of the physical elements: lines,
//! transformers, the converter's shunt filter and the aggregated
//! grid-following converter, plus per-unit bases.
//!
//! Network quantities are in per-unit on the system base; converter
//! quantities are in SI ohms at the unit terminal and are rebased by
//! [`aggregate_wpp`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::tfcore::FreqExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sequence {
    #[serde(alias = "pos")]
    Positive,
    #[serde(alias = "neg")]
    Negative,
    Zero,
}

impl Sequence {
    pub const ALL: [Sequence; 3] = [Sequence::Positive, Sequence::Negative, Sequence::Zero];

    pub fn short_name(self) -> &'static str {
        match self {
            Sequence::Positive => "pos",
            Sequence::Negative => "neg",
            Sequence::Zero => "zero",
        }
    }
}

impl std::str::FromStr for Sequence {
    type Err = ParamError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pos" | "positive" => Ok(Sequence::Positive),
            "neg" | "negative" => Ok(Sequence::Negative),
            "zero" => Ok(Sequence::Zero),
            _ => Err(ParamError::new("sequence", format!("unknown sequence '{s}'"))),
        }
    }
}

/// Transmission line on the system base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub r_pu: f64,
    /// Reactance at the fundamental.
    pub x_pu: f64,
    pub zero_seq_multiplier: f64,
}

impl LineParams {
    pub fn new(r_pu: f64, x_pu: f64, zero_seq_multiplier: f64) -> Result<Self, ParamError> {
        let l = LineParams { r_pu, x_pu, zero_seq_multiplier };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.r_pu >= 0.0) {
            return Err(ParamError::new("LineParams", "R must be >= 0"));
        }
        if !(self.x_pu > 0.0) {
            return Err(ParamError::new("LineParams", "X must be > 0"));
        }
        if !(self.zero_seq_multiplier > 0.0) {
            return Err(ParamError::new("LineParams", "zero-sequence multiplier must be > 0"));
        }
        Ok(())
    }

    /// 35 kV collector line.
    pub fn default_l1() -> Self {
        LineParams { r_pu: 0.0058, x_pu: 0.058, zero_seq_multiplier: 3.0 }
    }

    /// 220 kV transmission line.
    pub fn default_l2() -> Self {
        LineParams { r_pu: 0.041, x_pu: 0.41, zero_seq_multiplier: 3.0 }
    }
}

/// Impedance of the fraction `sigma` of a line, `σ·(R + s·X/ω1)`, times the
/// zero-sequence multiplier for the zero sequence.
pub fn line_impedance(
    line: &LineParams,
    sigma: f64,
    seq: Sequence,
    omega1: f64,
) -> Result<FreqExpr, ParamError> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(ParamError::new("line_impedance", format!("length fraction {sigma} outside [0, 1]")));
    }
    let k = match seq {
        Sequence::Positive | Sequence::Negative => sigma,
        Sequence::Zero => sigma * line.zero_seq_multiplier,
    };
    Ok(FreqExpr::resistor(k * line.r_pu).series(&FreqExpr::inductor(k * line.x_pu / omega1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connection {
    /// Grounded star on the high-voltage side, delta on the low-voltage side.
    YNd,
}

impl std::str::FromStr for Connection {
    type Err = ParamError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "YNd" | "ynd" => Ok(Connection::YNd),
            other => Err(ParamError::new(
                "TransformerParams",
                format!("unsupported connection '{other}' (only YNd is modeled)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformerParams {
    pub x_pu: f64,
    pub connection: Connection,
}

impl TransformerParams {
    pub fn new(x_pu: f64, connection: Connection) -> Result<Self, ParamError> {
        let t = TransformerParams { x_pu, connection };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.x_pu > 0.0) {
            return Err(ParamError::new("TransformerParams", "X_T must be > 0"));
        }
        Ok(())
    }
}

/// Path offered by an element in one sequence network.
#[derive(Debug, Clone)]
pub enum SequencePath {
    Series(FreqExpr),
    Blocked,
}

impl SequencePath {
    pub fn expr(&self) -> Option<&FreqExpr> {
        match self {
            SequencePath::Series(e) => Some(e),
            SequencePath::Blocked => None,
        }
    }
}

/// Leakage-reactance model of a two-winding transformer.
///
/// In the zero sequence a YNd unit is a path to ground of `X_T` seen from the
/// grounded-star side and blocks zero-sequence current seen from the delta
/// side.
pub fn transformer_impedance(
    t: &TransformerParams,
    seq: Sequence,
    side: Side,
    omega1: f64,
) -> SequencePath {
    let leak = FreqExpr::inductor(t.x_pu / omega1);
    match (t.connection, seq, side) {
        (_, Sequence::Positive | Sequence::Negative, _) => SequencePath::Series(leak),
        (Connection::YNd, Sequence::Zero, Side::High) => SequencePath::Series(leak),
        (Connection::YNd, Sequence::Zero, Side::Low) => SequencePath::Blocked,
    }
}

/// Grid-following converter parameters (one unit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverterParams {
    /// Current-controller PI, modulation units per ampere.
    pub k_pc: f64,
    pub k_ic: f64,
    /// PLL PI acting on the notch-filtered q-axis voltage in volts.
    pub k_pp: f64,
    pub k_ip: f64,
    /// Notch centre (rad/s) and damping.
    pub omega_n: f64,
    pub zeta_n: f64,
    pub l_f: f64,
    pub c_f: f64,
    pub r_cf: f64,
    /// dq current references, amplitude-invariant peak amperes.
    pub i_ar: f64,
    pub i_qr: f64,
    /// Cross-coupling (current) and voltage feedforward coefficients, modulation units.
    pub k_f: f64,
    pub k_d: f64,
    pub v_dc: f64,
    /// Unit step-up transformer reactance on the unit base.
    pub x_t1_pu: f64,
    pub omega1: f64,
}

impl Default for ConverterParams {
    fn default() -> Self {
        ConverterParams {
            k_pc: 0.015,
            k_ic: 3.0,
            k_pp: 0.48,
            k_ip: 43.0,
            omega_n: 200.0 * PI,
            zeta_n: 1.0,
            l_f: 3e-3,
            c_f: 50e-6,
            r_cf: 1.5,
            i_ar: 2368.0,
            i_qr: 0.0,
            k_f: 0.00157,
            k_d: 0.001667,
            v_dc: 690.0,
            x_t1_pu: 0.01,
            omega1: 100.0 * PI,
        }
    }
}

impl ConverterParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let gains = [
            ("k_pc", self.k_pc),
            ("k_ic", self.k_ic),
            ("k_pp", self.k_pp),
            ("k_ip", self.k_ip),
            ("zeta_n", self.zeta_n),
            ("k_f", self.k_f),
            ("k_d", self.k_d),
            ("r_cf", self.r_cf),
        ];
        for (name, v) in gains {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ParamError::new("ConverterParams", format!("{name} must be >= 0")));
            }
        }
        let positive = [
            ("omega1", self.omega1),
            ("l_f", self.l_f),
            ("c_f", self.c_f),
            ("omega_n", self.omega_n),
            ("v_dc", self.v_dc),
            ("x_t1", self.x_t1_pu),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamError::new("ConverterParams", format!("{name} must be > 0")));
            }
        }
        if !self.i_ar.is_finite() || !self.i_qr.is_finite() {
            return Err(ParamError::new("ConverterParams", "current references must be finite"));
        }
        Ok(())
    }

    /// Volts of converter output per unit of modulation command (ideal,
    /// stiff DC link).
    pub fn modulation_gain(&self) -> f64 {
        self.v_dc
    }

    /// Current PI in ohms, `G_m·(k_pc + k_ic/s)`.
    pub fn current_controller(&self) -> FreqExpr {
        FreqExpr::pi_controller(self.k_pc, self.k_ic).scale_real(self.modulation_gain())
    }
}

/// Small-signal linearization point of the converter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Positive-sequence terminal voltage, peak phase volts.
    pub v1: f64,
    pub i_d0: f64,
    pub i_q0: f64,
    pub theta0: f64,
}

impl OperatingPoint {
    pub fn new(v1: f64, i_d0: f64, i_q0: f64) -> Result<Self, ParamError> {
        if !(v1 > 0.0 && v1.is_finite()) {
            return Err(ParamError::new("OperatingPoint", "V1 must be > 0"));
        }
        Ok(OperatingPoint { v1, i_d0, i_q0, theta0: 0.0 })
    }

    /// Reference currents at the given terminal voltage.
    pub fn at_references(p: &ConverterParams, v1: f64) -> Result<Self, ParamError> {
        Self::new(v1, p.i_ar, p.i_qr)
    }
}

/// Power and voltage bases. Zone voltages are line-to-line RMS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseSet {
    pub s_base_va: f64,
    pub v_grid_v: f64,
    pub v_collector_v: f64,
    pub v_unit_v: f64,
    pub s_unit_va: f64,
}

impl Default for BaseSet {
    fn default() -> Self {
        BaseSet {
            s_base_va: 300e6,
            v_grid_v: 220e3,
            v_collector_v: 35e3,
            v_unit_v: 690.0,
            s_unit_va: 2e6,
        }
    }
}

impl BaseSet {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, v) in [
            ("s_base", self.s_base_va),
            ("v_grid", self.v_grid_v),
            ("v_collector", self.v_collector_v),
            ("v_unit", self.v_unit_v),
            ("s_unit", self.s_unit_va),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamError::new("BaseSet", format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn z_base(v_ll: f64, s: f64) -> f64 {
        v_ll * v_ll / s
    }

    /// Impedance base of one converter unit.
    pub fn z_base_unit(&self) -> f64 {
        Self::z_base(self.v_unit_v, self.s_unit_va)
    }

    /// Peak phase voltage of the unit zone at 1 p.u.
    pub fn v_unit_peak(&self) -> f64 {
        self.v_unit_v * (2.0f64 / 3.0).sqrt()
    }

    /// Peak phase current of one unit at 1 p.u.
    pub fn i_unit_peak(&self) -> f64 {
        self.s_unit_va / (3.0f64.sqrt() * self.v_unit_v) * 2.0f64.sqrt()
    }
}

/// Closed-loop small-signal PLL response `V1·H/(1 + V1·H)` with
/// `H(s) = N(s)·(k_pp + k_ip/s)/s`; the notch sits in the error path.
pub fn pll_closed_loop(p: &ConverterParams, op: &OperatingPoint) -> Result<FreqExpr, ParamError> {
    pll_closed_loop_with(p, op, true)
}

pub(crate) fn pll_closed_loop_with(
    p: &ConverterParams,
    op: &OperatingPoint,
    with_notch: bool,
) -> Result<FreqExpr, ParamError> {
    let integrator = FreqExpr::rational_real(&[1.0], &[0.0, 1.0])?;
    let mut open = FreqExpr::pi_controller(p.k_pp, p.k_ip).mul(&integrator);
    if with_notch {
        open = FreqExpr::notch(p.omega_n, p.zeta_n)?.mul(&open);
    }
    let vh = open.scale_real(op.v1);
    Ok(vh.div(&FreqExpr::real(1.0).series(&vh)))
}

/// dq-frame impedance of the current-controlled converter seen from its
/// terminal, with `sign = +1` for the synchronous frame and `-1` for the
/// conjugate-coefficient frame used by the negative sequence.
fn dq_impedance(p: &ConverterParams, op: &OperatingPoint, sign: f64) -> Result<FreqExpr, ParamError> {
    let j = Complex64::new(0.0, sign);
    let gm = p.modulation_gain();
    let i0 = Complex64::new(op.i_d0, 0.0) + j * op.i_q0;
    let v1 = op.v1;
    let k = gm * p.k_d;

    let z_ctrl = p.current_controller().series(&FreqExpr::constant(-j * gm * p.k_f));
    let plant = FreqExpr::inductor(p.l_f).series(&FreqExpr::constant(j * p.omega1 * p.l_f));
    let numerator = plant.series(&z_ctrl);

    let t_pll = pll_closed_loop(p, op)?;
    // rotation of the controller's frame by the PLL angle error
    let frame = z_ctrl
        .scale(i0)
        .series(&FreqExpr::constant(Complex64::new((1.0 - k) * v1, 0.0) + j * p.omega1 * p.l_f * i0));
    let denominator =
        FreqExpr::real(1.0 - k).series(&t_pll.mul(&frame).scale_real(-1.0 / (2.0 * v1)));
    Ok(numerator.div(&denominator))
}

/// Converter-side sequence impedance in SI ohms at the unit terminal
/// (behind the filter inductor, excluding the shunt filter).
///
/// Positive sequence: `Z_dq(s − jω1)`; negative sequence: the
/// conjugate-coefficient `Z_dq(s + jω1)`. With
/// `Zc(s) = G_m(k_pc + k_ic/s) − jG_m·K_f`, `k = G_m·K_d`:
///
/// ```text
/// Z_dq(s) = [L_f(s + jω1) + Zc(s)] / [(1 − k) − T_pll(s)·B(s)/(2·V1)]
/// B(s)    = Zc(s)·I0 + (1 − k)·V1 + jω1·L_f·I0
/// ```
pub fn converter_sequence_impedance(
    p: &ConverterParams,
    op: &OperatingPoint,
    seq: Sequence,
) -> Result<FreqExpr, ParamError> {
    p.validate()?;
    let w1 = Complex64::new(0.0, p.omega1);
    match seq {
        Sequence::Positive => Ok(dq_impedance(p, op, 1.0)?.shift(w1)),
        Sequence::Negative => Ok(dq_impedance(p, op, -1.0)?.shift(-w1)),
        Sequence::Zero => Err(ParamError::new(
            "converter_sequence_impedance",
            "three-wire converter has no zero-sequence path",
        )),
    }
}

/// Series `R_cf + 1/(s·C_f)` shunt branch at the converter terminal, SI ohms.
pub fn shunt_filter_branch(p: &ConverterParams) -> Result<FreqExpr, ParamError> {
    if !(p.c_f > 0.0) {
        return Err(ParamError::new("shunt_filter_branch", "C_f must be > 0"));
    }
    Ok(FreqExpr::resistor(p.r_cf).series(&FreqExpr::capacitor(p.c_f)))
}

/// Lump `n_units` identical units (each `unit_expr` ohms at the unit
/// terminal) into one branch in per-unit on the system base, including the
/// unit transformer reactance.
///
/// With `n_units·S_unit = S_base` the aggregate on the system base equals the
/// single unit on its own base. Otherwise a `rebase` factor must be supplied;
/// it multiplies the per-unit result.
pub fn aggregate_wpp(
    unit_expr: &FreqExpr,
    p: &ConverterParams,
    bases: &BaseSet,
    n_units: usize,
    rebase: Option<f64>,
) -> Result<FreqExpr, ParamError> {
    if n_units == 0 {
        return Err(ParamError::new("aggregate_wpp", "n_units must be >= 1"));
    }
    bases.validate()?;
    let total = n_units as f64 * bases.s_unit_va;
    let factor = if (total - bases.s_base_va).abs() <= 1e-9 * bases.s_base_va {
        1.0
    } else {
        match rebase {
            Some(f) if f > 0.0 && f.is_finite() => f,
            _ => {
                return Err(ParamError::new(
                    "aggregate_wpp",
                    format!(
                        "base inconsistency: {n_units} x {} VA != {} VA and no rebase factor",
                        bases.s_unit_va, bases.s_base_va
                    ),
                ))
            }
        }
    };
    let unit_pu = unit_expr
        .scale_real(1.0 / bases.z_base_unit())
        .series(&FreqExpr::inductor(p.x_t1_pu / p.omega1));
    Ok(if factor == 1.0 { unit_pu } else { unit_pu.scale_real(factor) })
}

/// Unit-level WPP branch: converter in parallel with the shunt filter.
pub fn unit_wpp_impedance(
    p: &ConverterParams,
    op: &OperatingPoint,
    seq: Sequence,
) -> Result<FreqExpr, ParamError> {
    let conv = converter_sequence_impedance(p, op, seq)?;
    Ok(conv.parallel(&shunt_filter_branch(p)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const W1: f64 = 100.0 * PI;

    fn jw(w: f64) -> Complex64 {
        Complex64::new(0.0, w)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn line_examples() {
        let l2 = LineParams::default_l2();
        let full = line_impedance(&l2, 1.0, Sequence::Positive, W1).unwrap().eval(jw(W1)).unwrap();
        assert!(close(full, Complex64::new(0.041, 0.41), 1e-14));
        let tenth = line_impedance(&l2, 0.1, Sequence::Positive, W1).unwrap().eval(jw(W1)).unwrap();
        assert!(close(tenth, Complex64::new(0.0041, 0.041), 1e-14));
        let zero = line_impedance(&l2, 1.0, Sequence::Zero, W1).unwrap().eval(jw(W1)).unwrap();
        assert!(close(zero, Complex64::new(0.123, 1.23), 1e-14));
        let neg = line_impedance(&l2, 1.0, Sequence::Negative, W1).unwrap().eval(jw(W1)).unwrap();
        assert_eq!(neg, full);
        assert!(line_impedance(&l2, 1.2, Sequence::Positive, W1).is_err());
        assert!(LineParams::new(0.1, 0.0, 3.0).is_err());
    }

    #[test]
    fn line_is_linear_in_length() {
        let l = LineParams::default_l1();
        for &(a, b) in &[(0.1, 0.3), (0.25, 0.75), (0.0, 0.6)] {
            for &w in &[3.0, 314.0, 9000.0] {
                let za = line_impedance(&l, a, Sequence::Zero, W1).unwrap().eval(jw(w)).unwrap();
                let zb = line_impedance(&l, b, Sequence::Zero, W1).unwrap().eval(jw(w)).unwrap();
                let zab = line_impedance(&l, a + b, Sequence::Zero, W1).unwrap().eval(jw(w)).unwrap();
                assert!(close(za + zb, zab, 1e-12));
            }
        }
    }

    #[test]
    fn transformer_paths() {
        let t2 = TransformerParams::new(0.03, Connection::YNd).unwrap();
        let pos = transformer_impedance(&t2, Sequence::Positive, Side::Low, W1);
        assert!(close(pos.expr().unwrap().eval(jw(W1)).unwrap(), Complex64::new(0.0, 0.03), 1e-14));
        assert!(matches!(
            transformer_impedance(&t2, Sequence::Zero, Side::Low, W1),
            SequencePath::Blocked
        ));
        let hv = transformer_impedance(&t2, Sequence::Zero, Side::High, W1);
        assert!(close(hv.expr().unwrap().eval(jw(W1)).unwrap(), Complex64::new(0.0, 0.03), 1e-14));
        assert!("Dyn".parse::<Connection>().is_err());
    }

    #[test]
    fn passive_elements_have_nonnegative_resistance() {
        let p = ConverterParams::default();
        let f = shunt_filter_branch(&p).unwrap();
        let l = line_impedance(&LineParams::default_l2(), 0.4, Sequence::Zero, W1).unwrap();
        let t = transformer_impedance(&TransformerParams::new(0.03, Connection::YNd).unwrap(), Sequence::Positive, Side::High, W1);
        for k in -40..=40 {
            let w = 10f64.powf(k as f64 / 8.0) * if k % 2 == 0 { 1.0 } else { -1.0 };
            for e in [&f, &l, t.expr().unwrap()] {
                assert!(e.eval(jw(w)).unwrap().re >= 0.0);
            }
        }
    }

    #[test]
    fn shunt_filter_values() {
        let p = ConverterParams::default();
        let f = shunt_filter_branch(&p).unwrap();
        let z = f.eval(jw(W1)).unwrap();
        assert!((z.re - 1.5).abs() < 1e-12);
        assert!((z.im + 1.0 / (W1 * 50e-6)).abs() < 1e-9);
        assert!((z.im + 63.66).abs() < 5e-3);
        assert!((f.eval(jw(1e9)).unwrap() - Complex64::new(1.5, 0.0)).norm() < 1e-4);
        assert!(f.eval(jw(1e-6)).unwrap().norm() > 1e9);
        let bad = ConverterParams { c_f: 0.0, ..p };
        assert!(shunt_filter_branch(&bad).is_err());
    }

    #[test]
    fn pll_limits_and_notch() {
        let p = ConverterParams::default();
        let op = OperatingPoint::new(563.4, 2368.0, 0.0).unwrap();
        let t = pll_closed_loop(&p, &op).unwrap();
        assert!(t.eval(jw(1e7)).unwrap().norm() < 1e-3);
        assert!((t.eval(jw(1e-3)).unwrap().norm() - 1.0).abs() < 1e-3);
        assert!(t.eval(Complex64::new(0.0, 0.0)).is_err());
        let w = 2.0 * PI * 100.0;
        let with = t.eval(jw(w)).unwrap().norm();
        let without = pll_closed_loop_with(&p, &op, false).unwrap().eval(jw(w)).unwrap().norm();
        assert!(with < 1e-9 * without);
        let w = 2.0 * PI * 80.0;
        assert!(t.eval(jw(w)).unwrap().norm()
            < pll_closed_loop_with(&p, &op, false).unwrap().eval(jw(w)).unwrap().norm());
    }

    #[test]
    fn frozen_pll_leaves_plant_and_current_loop() {
        let p = ConverterParams { k_pp: 0.0, k_ip: 0.0, k_f: 0.0, k_d: 0.0, ..Default::default() };
        let op = OperatingPoint::new(563.4, 2368.0, 120.0).unwrap();
        let zp = converter_sequence_impedance(&p, &op, Sequence::Positive).unwrap();
        let zn = converter_sequence_impedance(&p, &op, Sequence::Negative).unwrap();
        let hi = p.current_controller();
        let mut seed = 0x2545F4914F6CDD1Du64;
        for _ in 0..100 {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            let re = (seed % 1000) as f64 / 100.0 - 5.0;
            let im = ((seed >> 20) % 400_000) as f64 / 100.0 - 2000.0;
            let s = Complex64::new(re, im);
            let Ok(ref_p) = hi.eval(s - jw(W1)) else { continue };
            let want = s * p.l_f + ref_p;
            assert!(close(zp.eval(s).unwrap(), want, 1e-12));
            let want_n = s * p.l_f + hi.eval(s + jw(W1)).unwrap();
            assert!(close(zn.eval(s).unwrap(), want_n, 1e-12));
        }
    }

    #[test]
    fn converter_high_frequency_asymptote() {
        // the PLL and controller terms fade, leaving s·L_f/(1 − G_m·K_d)
        let p = ConverterParams::default();
        let op = OperatingPoint::new(563.4, 2368.0, 0.0).unwrap();
        let zp = converter_sequence_impedance(&p, &op, Sequence::Positive).unwrap();
        let s = jw(1e4 * W1);
        let asym = s * p.l_f / (1.0 - p.modulation_gain() * p.k_d);
        assert!((zp.eval(s).unwrap() - asym).norm() / asym.norm() < 0.05);
        let p0 = ConverterParams { k_d: 0.0, ..p };
        let z0 = converter_sequence_impedance(&p0, &op, Sequence::Positive).unwrap();
        assert!((z0.eval(s).unwrap() - s * p.l_f).norm() / (s * p.l_f).norm() < 0.05);
        assert!(converter_sequence_impedance(&p, &op, Sequence::Zero).is_err());
    }

    #[test]
    fn sequences_are_mirror_images() {
        // Z_p(−jω) = conj(Z_n(jω)) for a real-coefficient plant in the abc frame
        let p = ConverterParams::default();
        let op = OperatingPoint::new(400.0, 2368.0, 300.0).unwrap();
        let zp = converter_sequence_impedance(&p, &op, Sequence::Positive).unwrap();
        let zn = converter_sequence_impedance(&p, &op, Sequence::Negative).unwrap();
        for f in [3.0, 17.0, 61.0, 133.0, 480.0] {
            let w = 2.0 * PI * f;
            assert!(close(zp.eval(jw(-w)).unwrap().conj(), zn.eval(jw(w)).unwrap(), 1e-12));
        }
    }

    #[test]
    fn aggregation_base_change() {
        let bases = BaseSet::default();
        let p = ConverterParams { x_t1_pu: 1e-300, ..Default::default() };
        let unit = FreqExpr::real(0.5 * bases.z_base_unit());
        let agg = aggregate_wpp(&unit, &p, &bases, 150, None).unwrap();
        // ohms level: 150 units in parallel at 690 V, expressed on 300 MVA
        let ohms = 0.5 * bases.z_base_unit() / 150.0;
        let pu = ohms / BaseSet::z_base(bases.v_unit_v, bases.s_base_va);
        assert!((agg.eval(jw(W1)).unwrap() - Complex64::new(pu, 0.0)).norm() < 1e-12);
        assert!((pu - 0.5).abs() < 1e-12);

        let one = BaseSet { s_base_va: 2e6, ..bases };
        let id = aggregate_wpp(&unit, &p, &one, 1, None).unwrap();
        assert!((id.eval(jw(7.0)).unwrap().re - 0.5).abs() < 1e-12);

        let p = ConverterParams::default();
        let with_t1 = aggregate_wpp(&unit, &p, &bases, 150, None).unwrap().eval(jw(W1)).unwrap();
        assert!((with_t1 - Complex64::new(0.5, 0.01)).norm() < 1e-12);

        assert!(aggregate_wpp(&unit, &p, &bases, 100, None).is_err());
        assert!(aggregate_wpp(&unit, &p, &bases, 100, Some(1.5)).is_ok());
        assert!(aggregate_wpp(&unit, &p, &bases, 0, None).is_err());
    }

    #[test]
    fn aggregation_equals_explicit_parallel() {
        let n = 4;
        let bases = BaseSet { s_base_va: 4.0 * 2e6, ..Default::default() };
        let p = ConverterParams::default();
        let op = OperatingPoint::new(500.0, 2368.0, 0.0).unwrap();
        let unit = unit_wpp_impedance(&p, &op, Sequence::Positive).unwrap();
        let agg = aggregate_wpp(&unit, &p, &bases, n, None).unwrap();
        let zt1 = FreqExpr::inductor(p.x_t1_pu / p.omega1).scale_real(bases.z_base_unit());
        let branch = unit.series(&zt1);
        let mut par = branch.clone();
        for _ in 1..n {
            par = par.parallel(&branch);
        }
        let zb_sys = BaseSet::z_base(bases.v_unit_v, bases.s_base_va);
        for f in [1.0, 12.0, 49.0, 77.0, 230.0, 1500.0] {
            let s = jw(2.0 * PI * f);
            let want = par.eval(s).unwrap() / zb_sys;
            assert!(close(agg.eval(s).unwrap(), want, 1e-12), "f = {f}");
        }
    }
}
