//! Scenario description for the time-domain engine: buses, modal
//! three-phase branches, single-phase switches, the ideal source, the
//! converter and the perturbation.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::SimError;
use crate::plant::{ConverterParams, Sequence};

/// Per-mode series R-L-C in SI units. `c_f = None` means no capacitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Mode {
    Open,
    Rlc { r_ohm: f64, l_h: f64, c_f: Option<f64> },
}

impl Mode {
    pub fn rl(r_ohm: f64, l_h: f64) -> Mode {
        Mode::Rlc { r_ohm, l_h, c_f: None }
    }

    pub fn rc(r_ohm: f64, c_f: f64) -> Mode {
        Mode::Rlc { r_ohm, l_h: 0.0, c_f: Some(c_f) }
    }

    pub(crate) fn validate(&self, name: &str) -> Result<(), SimError> {
        match *self {
            Mode::Open => Ok(()),
            Mode::Rlc { r_ohm, l_h, c_f } => {
                let ok = r_ohm >= 0.0 && l_h >= 0.0 && r_ohm.is_finite() && l_h.is_finite();
                let c_ok = c_f.is_none_or(|c| c > 0.0 && c.is_finite());
                if !ok || !c_ok {
                    return Err(SimError::Scenario(format!("branch {name}: R, L must be >= 0 and C > 0")));
                }
                if r_ohm == 0.0 && l_h == 0.0 && c_f.is_none() {
                    return Err(SimError::Scenario(format!("branch {name}: zero-impedance mode")));
                }
                Ok(())
            }
        }
    }
}

/// Balanced three-phase branch described by its differential (positive and
/// negative sequence) and zero-sequence modes. `None` is ground.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub name: String,
    pub from: Option<usize>,
    pub to: Option<usize>,
    pub differential: Mode,
    pub zero: Mode,
}

/// Single-phase switched R-L branch, e.g. a phase-to-ground fault.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Switch {
    pub name: String,
    pub bus: usize,
    pub phase: usize,
    pub r_ohm: f64,
    pub l_h: f64,
    /// Earliest closing time; closed from the start if `<= 0`.
    pub close_after: f64,
    /// Wait for the next zero crossing of the voltage across the switch.
    pub on_zero_crossing: bool,
}

/// Per-phase amplitude multipliers effective from `t` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeStep {
    pub t: f64,
    pub scale: [f64; 3],
}

/// Ideal three-phase voltage source fixing the voltages of one bus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Source {
    pub bus: usize,
    /// Peak phase voltage.
    pub peak_v: f64,
    pub phase_rad: f64,
    pub omega: f64,
    /// Time-ordered amplitude changes; unity before the first step.
    pub schedule: Vec<AmplitudeStep>,
}

impl Source {
    pub fn scale_at(&self, t: f64) -> [f64; 3] {
        self.schedule.iter().rev().find(|s| t >= s.t).map_or([1.0; 3], |s| s.scale)
    }

    pub fn phasors_at(&self, t: f64) -> [Complex64; 3] {
        let k = self.scale_at(t);
        [0, 1, 2].map(|p| {
            Complex64::from_polar(self.peak_v * k[p], self.phase_rad - 2.0 * std::f64::consts::PI * p as f64 / 3.0)
        })
    }
}

/// Converter behind an inductor from `bus` to ground.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverterSpec {
    pub params: ConverterParams,
    pub bus: usize,
    pub notch: bool,
    /// Reference changes `(t, i_d + j·i_q)`; the parameters' references apply before the first.
    pub i_ref_steps: Vec<(f64, Complex64)>,
}

impl ConverterSpec {
    pub fn i_ref_at(&self, t: f64) -> Complex64 {
        self.i_ref_steps
            .iter()
            .rev()
            .find(|(ts, _)| t >= *ts)
            .map_or(Complex64::new(self.params.i_ar, self.params.i_qr), |s| s.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Injection {
    /// Current into `bus` from ground.
    ShuntCurrent { bus: usize },
    /// EMF in series with the named branch, raising `from` above `to`.
    SeriesVoltage { branch: String },
    /// Added to the ideal source voltages.
    SourceVoltage,
}

/// Balanced sequence set at `f_hz`, peak `amplitude` (A or V), switched on
/// at `t_start` under a raised-cosine envelope lasting `ramp_s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perturbation {
    pub injection: Injection,
    pub sequence: Sequence,
    pub f_hz: f64,
    pub amplitude: f64,
    pub t_start: f64,
    /// A step in an inductor current excites the trapezoidal rule's
    /// alternating mode, which rings for seconds in lightly damped loops.
    pub ramp_s: f64,
}

impl Perturbation {
    pub fn value(&self, t: f64) -> [f64; 3] {
        if t < self.t_start {
            return [0.0; 3];
        }
        let rise = t - self.t_start;
        let env = if rise < self.ramp_s {
            0.5 * (1.0 - (std::f64::consts::PI * rise / self.ramp_s).cos())
        } else {
            1.0
        };
        let w = 2.0 * std::f64::consts::PI * self.f_hz * t;
        let step = 2.0 * std::f64::consts::PI / 3.0;
        [0, 1, 2].map(|k| {
            let shift = match self.sequence {
                Sequence::Positive => -step * k as f64,
                Sequence::Negative => step * k as f64,
                Sequence::Zero => 0.0,
            };
            env * self.amplitude * (w + shift).cos()
        })
    }
}

/// Recorded signals. Three-phase probes produce channels `<prefix>_a/b/c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Probe {
    /// `v_<bus>`.
    Voltage(usize),
    /// `i_<branch>`, positive from `from` to `to`.
    Current(String),
    /// `i_<switch>` (single channel).
    SwitchCurrent(String),
    /// `i_inj` for a shunt perturbation.
    Injection,
    /// `pll_theta`, `pll_omega`, `i_d`, `i_q`, `v_d`, `v_q`.
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Init {
    /// All states zero at t = 0.
    Zero,
    /// Fundamental-frequency steady state of the initial topology with the
    /// converter injecting its reference current.
    Steady,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimScenario {
    pub buses: Vec<String>,
    pub branches: Vec<Branch>,
    pub switches: Vec<Switch>,
    pub source: Source,
    pub converter: Option<ConverterSpec>,
    pub perturbation: Option<Perturbation>,
    pub dt: f64,
    pub t_end: f64,
    /// First recorded time.
    pub record_from: f64,
    pub probes: Vec<Probe>,
    /// Conductance from every phase node to ground, siemens.
    pub leak_s: f64,
    pub init: Init,
    /// Stop early once any recorded voltage exceeds this many volts.
    pub divergence_limit_v: Option<f64>,
}

impl SimScenario {
    pub fn bus(&self, name: &str) -> Option<usize> {
        self.buses.iter().position(|b| b == name)
    }

    pub fn branch(&self, name: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.name == name)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Scenario(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be > 0".into());
        }
        if !(self.t_end >= self.dt) {
            return bad("t_end must be at least one step".into());
        }
        if !(self.leak_s >= 0.0) {
            return bad("leak conductance must be >= 0".into());
        }
        let nb = self.buses.len();
        let bus_ok = |b: Option<usize>| b.is_none_or(|i| i < nb);
        let mut names = HashSet::new();
        for b in &self.branches {
            if !names.insert(b.name.as_str()) {
                return bad(format!("duplicate branch name {}", b.name));
            }
            if !bus_ok(b.from) || !bus_ok(b.to) {
                return bad(format!("branch {} refers to an unknown bus", b.name));
            }
            if b.from == b.to {
                return bad(format!("branch {} is a self-loop", b.name));
            }
            b.differential.validate(&b.name)?;
            b.zero.validate(&b.name)?;
        }
        for s in &self.switches {
            if !names.insert(s.name.as_str()) {
                return bad(format!("duplicate branch name {}", s.name));
            }
            if s.bus >= nb || s.phase > 2 {
                return bad(format!("switch {} refers to an unknown node", s.name));
            }
            if !(s.r_ohm >= 0.0 && s.l_h >= 0.0) || s.r_ohm + s.l_h == 0.0 {
                return bad(format!("switch {}: needs R > 0 or L > 0", s.name));
            }
        }
        if self.source.bus >= nb {
            return bad("source bus out of range".into());
        }
        if self.source.schedule.windows(2).any(|w| w[1].t < w[0].t) {
            return bad("source schedule is not time-ordered".into());
        }
        if let Some(c) = &self.converter {
            if c.bus >= nb {
                return bad("converter bus out of range".into());
            }
            if c.i_ref_steps.windows(2).any(|w| w[1].0 < w[0].0) {
                return bad("current reference steps are not time-ordered".into());
            }
        }
        if let Some(p) = &self.perturbation {
            if !(p.f_hz > 0.0 && p.amplitude.is_finite() && p.t_start >= 0.0 && p.ramp_s >= 0.0) {
                return bad("perturbation needs f > 0, a start time >= 0 and a ramp >= 0".into());
            }
            match &p.injection {
                Injection::ShuntCurrent { bus } if *bus >= nb || *bus == self.source.bus => {
                    return bad("shunt injection must target a free bus".into())
                }
                Injection::SeriesVoltage { branch } if self.branch(branch).is_none() => {
                    return bad(format!("unknown branch {branch}"))
                }
                _ => {}
            }
        }
        for p in &self.probes {
            match p {
                Probe::Voltage(b) if *b >= nb => return bad("probe refers to an unknown bus".into()),
                Probe::Current(n)
                    if self.branch(n).is_none()
                        && !(n == super::engine::CONVERTER_BRANCH && self.converter.is_some()) =>
                {
                    return bad(format!("probe refers to unknown branch {n}"))
                }
                Probe::SwitchCurrent(n) if !self.switches.iter().any(|s| &s.name == n) => {
                    return bad(format!("probe refers to unknown switch {n}"))
                }
                Probe::Control if self.converter.is_none() => {
                    return bad("control probe without a converter".into())
                }
                Probe::Injection
                    if !matches!(
                        self.perturbation,
                        Some(Perturbation { injection: Injection::ShuntCurrent { .. }, .. })
                    ) =>
                {
                    return bad("injection probe without a shunt perturbation".into())
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Probe channel names in recording order.
    pub fn channel_names(&self) -> Vec<String> {
        let abc = |p: String| ["a", "b", "c"].map(|s| format!("{p}_{s}"));
        let mut out = Vec::new();
        for p in &self.probes {
            match p {
                Probe::Voltage(b) => out.extend(abc(format!("v_{}", self.buses[*b]))),
                Probe::Current(n) => out.extend(abc(format!("i_{n}"))),
                Probe::SwitchCurrent(n) => out.push(format!("i_{n}")),
                Probe::Injection => out.extend(abc("i_inj".into())),
                Probe::Control => {
                    out.extend(["pll_theta", "pll_omega", "i_d", "i_q", "v_d", "v_q"].map(String::from))
                }
            }
        }
        out
    }
}
