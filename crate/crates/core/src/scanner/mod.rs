//! Time-domain frequency scanner: a three-phase companion-model simulator
//! of the plant with the averaged converter control, sequence-set
//! perturbation injection and single-bin DFT impedance measurement, plus
//! the sag-versus-fault replication.
//!
//! The whole plant is modelled as one converter unit at the 690 V level:
//! network impedances in system p.u. are referred through the unit
//! impedance base, which is exact when `n_units·S_unit = S_base`.
//! Transformers are ideal-ratio YNd with their winding phase shift ignored,
//! like the sequence models.

pub mod control;
pub mod engine;
pub mod measure;
pub mod network;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

pub use control::{control_law_step, ControlOutput, ControlState, Controller};
pub use engine::{run, Simulator, CONVERTER_BRANCH};
pub use measure::{
    content_hash, extract_phasor, extract_phasor_skipping, fortescue, fortescue_of, inverse_fortescue,
    oscillation_verdict, settle_time, OscillationClass, OscillationVerdict, PhasorTriple, Waveform,
    WaveformMeta,
};
pub use network::{
    AmplitudeStep, Branch, ConverterSpec, Init, Injection, Mode, Perturbation, Probe, SimScenario, Source, Switch,
};

use crate::equilibrium::{phasor_equilibrium, phasor_equilibrium_with, SourceSequences};
use crate::error::{Error, SimError};
use crate::plant::{LineParams, Sequence};
use crate::system::{ScanSettings, SystemSpec};
use crate::tfcore::FrequencyGrid;
use crate::wcsim::{FaultBranch, FaultSpec};

/// Node-to-ground leak keeping floating zero-sequence nodes defined.
pub const LEAK_S: f64 = 1e-6;

/// Harmonics of the fundamental that are never scanned.
pub const EXCLUDED_HARMONICS: [u32; 3] = [1, 2, 3];

/// Share of the transient allowance spent ramping the perturbation in.
pub const RAMP_FRACTION: f64 = 0.25;

/// Bus names of the plant scenario.
pub mod bus {
    pub const PCC: &str = "pcc";
    pub const COLLECTOR: &str = "collector";
    pub const T2_LV: &str = "t2_lv";
    pub const T2_HV: &str = "t2_hv";
    pub const FAULT: &str = "fault";
    pub const GRID: &str = "grid";
    pub const GRID_EMF: &str = "grid_emf";
}

/// Name of the fault switch.
pub const FAULT_SWITCH: &str = "fault";

/// When and how the fault switch closes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaultTiming {
    pub close_after: f64,
    pub on_zero_crossing: bool,
}

/// Ohms at the unit level per system p.u.
fn referral(system: &SystemSpec) -> Result<f64, SimError> {
    let b = &system.bases;
    let total = system.n_units as f64 * b.s_unit_va;
    if (total - b.s_base_va).abs() > 1e-9 * b.s_base_va {
        return Err(SimError::Scenario(format!(
            "time-domain model needs n_units·S_unit = S_base ({} x {} VA vs {} VA)",
            system.n_units, b.s_unit_va, b.s_base_va
        )));
    }
    Ok(b.z_base_unit())
}

fn line_modes(l: &LineParams, share: f64, k: f64, w1: f64) -> (Mode, Mode) {
    let m = l.zero_seq_multiplier;
    (
        Mode::rl(share * l.r_pu * k, share * l.x_pu * k / w1),
        Mode::rl(share * m * l.r_pu * k, share * m * l.x_pu * k / w1),
    )
}

/// Three-phase scenario of the plant: converter (optional) behind its
/// filter, T1, L1, T2, the 220 kV line split at the fault point, and the
/// grid source. Runs from the steady state with nothing recorded; callers
/// set the time span, probes and events.
pub fn plant_scenario(
    system: &SystemSpec,
    converter: bool,
    fault: Option<(&FaultSpec, FaultTiming)>,
) -> Result<SimScenario, Error> {
    system.validate()?;
    let k = referral(system)?;
    let p = &system.converter;
    let w1 = p.omega1;
    if !system.xt2_in_z01 {
        return Err(SimError::Scenario(
            "time-domain model represents T2 as a grounded star; xt2_in_z01 must be on".into(),
        )
        .into());
    }
    let alpha = fault.map_or(system.fault.alpha, |(f, _)| f.alpha);
    let ideal = system.source.is_ideal();
    let mut buses: Vec<String> =
        [bus::PCC, bus::COLLECTOR, bus::T2_LV, bus::T2_HV, bus::FAULT, bus::GRID].map(String::from).to_vec();
    if !ideal {
        buses.push(bus::GRID_EMF.into());
    }
    let at = |n: &str| buses.iter().position(|b| b == n);
    let br = |name: &str, from: Option<usize>, to: Option<usize>, d: Mode, z: Mode| Branch {
        name: name.into(),
        from,
        to,
        differential: d,
        zero: z,
    };
    let l_t1 = p.x_t1_pu * k / w1;
    let l_t2 = system.t2.x_pu * k / w1;
    let (l1d, l1z) = line_modes(&system.l1, 1.0, k, w1);
    let (l2ad, l2az) = line_modes(&system.l2, alpha, k, w1);
    let (l2bd, l2bz) = line_modes(&system.l2, 1.0 - alpha, k, w1);
    let mut branches = vec![
        br("filter", at(bus::PCC), None, Mode::rc(p.r_cf, p.c_f), Mode::Open),
        br("T1", at(bus::PCC), at(bus::COLLECTOR), Mode::rl(0.0, l_t1), Mode::Open),
        br("T1_ground", at(bus::COLLECTOR), None, Mode::Open, Mode::rl(0.0, l_t1)),
        br("L1", at(bus::COLLECTOR), at(bus::T2_LV), l1d, l1z),
        br("T2", at(bus::T2_LV), at(bus::T2_HV), Mode::rl(0.0, l_t2), Mode::Open),
        br("T2_ground", at(bus::T2_HV), None, Mode::Open, Mode::rl(0.0, l_t2)),
        br("L2_wpp", at(bus::T2_HV), at(bus::FAULT), l2ad, l2az),
        br("L2_grid", at(bus::FAULT), at(bus::GRID), l2bd, l2bz),
    ];
    let src_bus = if ideal {
        at(bus::GRID).unwrap()
    } else {
        let s = &system.source;
        if s.r_pu + s.x_pu == 0.0 || s.r0_pu + s.x0_pu == 0.0 {
            return Err(SimError::Scenario("source impedance must be zero or non-zero in both modes".into()).into());
        }
        branches.push(br(
            "source",
            at(bus::GRID_EMF),
            at(bus::GRID),
            Mode::rl(s.r_pu * k, s.x_pu * k / w1),
            Mode::rl(s.r0_pu * k, s.x0_pu * k / w1),
        ));
        at(bus::GRID_EMF).unwrap()
    };
    let mut switches = Vec::new();
    if let Some((f, timing)) = fault {
        f.validate()?;
        let (r, x) = match &f.branch {
            FaultBranch::Resistive(r) => (*r, 0.0),
            FaultBranch::SeriesRl { r_pu, x_pu } => (*r_pu, *x_pu),
            FaultBranch::Open => (f64::NAN, f64::NAN),
            FaultBranch::Expr(_) => {
                return Err(SimError::Scenario("expression fault branches have no time-domain form".into()).into())
            }
        };
        if r.is_finite() {
            switches.push(Switch {
                name: FAULT_SWITCH.into(),
                bus: at(bus::FAULT).unwrap(),
                phase: 0,
                r_ohm: r * k,
                l_h: x * k / w1,
                close_after: timing.close_after,
                on_zero_crossing: timing.on_zero_crossing,
            });
        }
    }
    let conv = converter.then(|| ConverterSpec {
        params: *p,
        bus: at(bus::PCC).unwrap(),
        notch: true,
        i_ref_steps: Vec::new(),
    });
    Ok(SimScenario {
        source: Source {
            bus: src_bus,
            peak_v: system.source.v_pu * system.bases.v_unit_peak(),
            phase_rad: 0.0,
            omega: w1,
            schedule: Vec::new(),
        },
        buses,
        branches,
        switches,
        converter: conv,
        perturbation: None,
        dt: system.scan.dt_s,
        t_end: system.scan.dt_s,
        record_from: 0.0,
        probes: Vec::new(),
        leak_s: LEAK_S,
        init: Init::Steady,
        divergence_limit_v: None,
    })
}

/// Converter alone on an ideal source at its terminal.
pub fn converter_bench(system: &SystemSpec) -> Result<SimScenario, Error> {
    system.validate()?;
    let p = &system.converter;
    Ok(SimScenario {
        buses: vec![bus::PCC.into()],
        branches: Vec::new(),
        switches: Vec::new(),
        source: Source {
            bus: 0,
            peak_v: system.source.v_pu * system.bases.v_unit_peak(),
            phase_rad: 0.0,
            omega: p.omega1,
            schedule: Vec::new(),
        },
        converter: Some(ConverterSpec { params: *p, bus: 0, notch: true, i_ref_steps: Vec::new() }),
        perturbation: None,
        dt: system.scan.dt_s,
        t_end: system.scan.dt_s,
        record_from: 0.0,
        probes: Vec::new(),
        leak_s: LEAK_S,
        init: Init::Steady,
        divergence_limit_v: None,
    })
}

/// Impedance a scan measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanPort {
    /// Grid side of the collector bus (`Z_g1 + Z_g2`, or `Z_gpe` with the
    /// fault applied): shunt current at the collector, current in L1.
    Grid,
    /// WPP side of the collector bus: series voltage in L1.
    Wpp,
    /// Driving point at the fault location: shunt current.
    Fault,
    /// Converter alone on an ideal source: voltage added to the source.
    Converter,
}

impl std::str::FromStr for ScanPort {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "grid" => Ok(ScanPort::Grid),
            "wpp" => Ok(ScanPort::Wpp),
            "fault" => Ok(ScanPort::Fault),
            "converter" => Ok(ScanPort::Converter),
            _ => Err(format!("unknown port '{s}' (grid, wpp, fault, converter)")),
        }
    }
}

impl ScanPort {
    pub fn name(self) -> &'static str {
        match self {
            ScanPort::Grid => "grid",
            ScanPort::Wpp => "wpp",
            ScanPort::Fault => "fault",
            ScanPort::Converter => "converter",
        }
    }
}

/// A scenario wired for measuring at one port.
#[derive(Debug, Clone, Serialize)]
pub struct ScanBench {
    pub port: ScanPort,
    pub scenario: SimScenario,
    injection: Injection,
    v_group: String,
    i_group: String,
    /// `Z = sign·V/I`.
    sign: f64,
    /// Peak of 1 p.u. of the injected quantity.
    nominal: f64,
    /// Ohms to p.u.
    z_scale: f64,
    f1_hz: f64,
}

impl ScanBench {
    /// `converter` keeps the converter in the plant (ignored for the
    /// converter port); `fault` closes the fault from the start.
    pub fn new(system: &SystemSpec, port: ScanPort, converter: bool, fault: bool) -> Result<Self, Error> {
        let b = &system.bases;
        let v_nom = system.source.v_pu * b.v_unit_peak();
        let i_nom = b.i_unit_peak();
        let f1_hz = system.converter.omega1 / (2.0 * PI);
        let timing = FaultTiming { close_after: 0.0, on_zero_crossing: false };
        let plant = || plant_scenario(system, converter, fault.then_some((&system.fault, timing)));
        let (scenario, injection, v_group, i_group, sign, nominal) = match port {
            ScanPort::Grid => {
                let sc = plant()?;
                let at = sc.bus(bus::COLLECTOR).unwrap();
                (sc, Injection::ShuntCurrent { bus: at }, "v_collector", "i_L1", 1.0, i_nom)
            }
            ScanPort::Wpp => {
                let sc = plant()?;
                (sc, Injection::SeriesVoltage { branch: "L1".into() }, "v_collector", "i_L1", -1.0, v_nom)
            }
            ScanPort::Fault => {
                let sc = plant()?;
                let at = sc.bus(bus::FAULT).unwrap();
                (sc, Injection::ShuntCurrent { bus: at }, "v_fault", "i_inj", 1.0, i_nom)
            }
            ScanPort::Converter => {
                (converter_bench(system)?, Injection::SourceVoltage, "v_pcc", "i_converter", -1.0, v_nom)
            }
        };
        Ok(ScanBench {
            port,
            scenario,
            injection,
            v_group: v_group.into(),
            i_group: i_group.into(),
            sign,
            nominal,
            z_scale: 1.0 / referral(system)?,
            f1_hz,
        })
    }

    pub fn f1_hz(&self) -> f64 {
        self.f1_hz
    }
}

/// One measured impedance point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measurement {
    pub f_hz: f64,
    pub sequence: Sequence,
    /// Per-unit on the system base (converter port: the unit base, which
    /// coincides with it for a consistent aggregation).
    pub z: Complex64,
    pub amplitude: f64,
    pub settle_s: f64,
    pub leakage: f64,
}

/// Snap `f` to the window's frequency resolution and check the exclusion list.
pub fn scan_frequency(f: f64, f1: f64, window_s: f64) -> Result<f64, SimError> {
    let fs = (f * window_s).round() / window_s;
    if !(fs > 0.0) {
        return Err(SimError::Window { f, t0: 0.0, t1: window_s });
    }
    let res = 0.5 / window_s;
    if EXCLUDED_HARMONICS.iter().any(|&h| (fs - h as f64 * f1).abs() < res) {
        return Err(SimError::Excluded { f: fs });
    }
    Ok(fs)
}

/// Run the bench to steady state, superpose a `seq` perturbation at `f`,
/// and measure `ΔV_seq/ΔI_seq` at the port.
pub fn inject_and_measure(
    bench: &ScanBench,
    seq: Sequence,
    f: f64,
    settings: &ScanSettings,
) -> Result<Measurement, SimError> {
    if !(0.005..=0.05).contains(&settings.amplitude) {
        return Err(SimError::Amplitude(settings.amplitude));
    }
    settings.validate()?;
    let fs = scan_frequency(f, bench.f1_hz, settings.window_s)?;
    let mut sc = bench.scenario.clone();
    sc.dt = settings.dt_s;
    let t_inj = settings.settle_s;
    let t_meas = t_inj + settings.transient_s;
    sc.t_end = t_meas + settings.window_s;
    sc.perturbation = Some(Perturbation {
        injection: bench.injection.clone(),
        sequence: seq,
        f_hz: fs,
        amplitude: settings.amplitude * bench.nominal,
        t_start: t_inj,
        ramp_s: RAMP_FRACTION * settings.transient_s,
    });
    let probe = |g: &str| match g.strip_prefix("v_") {
        Some(b) => Probe::Voltage(sc.bus(b).unwrap()),
        None if g == "i_inj" => Probe::Injection,
        None => Probe::Current(g.trim_start_matches("i_").to_string()),
    };
    sc.probes = vec![probe(&bench.v_group), probe(&bench.i_group)];
    sc.record_from = 0.0;
    let w = run(&sc)?;

    let n_pre = ((t_inj / w.dt).round() as usize).min(w.len());
    let va = &w.group(&bench.v_group).unwrap()[0][..n_pre];
    let settle_s = if t_inj > 0.0 {
        settle_time(va, w.t0, w.dt, bench.f1_hz, 1e-3, 5)
            .ok_or(SimError::Settling { f: fs, leakage: f64::INFINITY, limit: settings.leakage_limit })?
    } else {
        0.0
    };
    let window = (t_meas, t_meas + settings.window_s);
    let pv = extract_phasor_skipping(&w, &bench.v_group, fs, window, Some(bench.f1_hz))?;
    let pi = extract_phasor_skipping(&w, &bench.i_group, fs, window, Some(bench.f1_hz))?;
    let pick = |p: &PhasorTriple| {
        let (pos, neg, zero) = fortescue(p);
        match seq {
            Sequence::Positive => pos,
            Sequence::Negative => neg,
            Sequence::Zero => zero,
        }
    };
    let leakage = pv.leakage.max(pi.leakage);
    if !(leakage <= settings.leakage_limit) {
        return Err(SimError::Settling { f: fs, leakage, limit: settings.leakage_limit });
    }
    let i = pick(&pi);
    if i.norm() == 0.0 {
        return Err(SimError::Scenario(format!("no {} current at {fs} Hz", seq.short_name())));
    }
    Ok(Measurement {
        f_hz: fs,
        sequence: seq,
        z: bench.sign * pick(&pv) / i * bench.z_scale,
        amplitude: settings.amplitude,
        settle_s,
        leakage,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub f_hz: f64,
    pub sequence: Sequence,
    pub z: Option<Complex64>,
    pub amplitude: f64,
    pub settle_s: Option<f64>,
    pub leakage: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub port: ScanPort,
    pub rows: Vec<ScanRow>,
}

/// One independent run per positive grid frequency, in parallel; failed
/// points are kept as rows with an error.
pub fn scan(bench: &ScanBench, grid: &FrequencyGrid, seq: Sequence, settings: &ScanSettings) -> ScanResult {
    let freqs: Vec<f64> = grid.freqs_hz().iter().copied().filter(|f| *f > 0.0).collect();
    let rows = freqs
        .par_iter()
        .map(|&f| match inject_and_measure(bench, seq, f, settings) {
            Ok(m) => ScanRow {
                f_hz: m.f_hz,
                sequence: seq,
                z: Some(m.z),
                amplitude: m.amplitude,
                settle_s: Some(m.settle_s),
                leakage: Some(m.leakage),
                error: None,
            },
            Err(e) => ScanRow {
                f_hz: f,
                sequence: seq,
                z: None,
                amplitude: settings.amplitude,
                settle_s: None,
                leakage: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    ScanResult { port: bench.port, rows }
}

/// Timing of the sag-versus-fault runs, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationSettings {
    /// Earliest fault closing or sag onset.
    pub t_event: f64,
    pub t_end: f64,
    /// Early envelope window, relative to the event.
    pub early: (f64, f64),
    /// Late envelope window length, ending at `t_end`.
    pub late_len: f64,
    /// Window for the positive-sequence PCC voltage, relative to the event.
    pub vp_window: (f64, f64),
    /// Relative tolerance of the sag-depth bisection.
    pub depth_tol: f64,
    /// Abort a run once a voltage exceeds this multiple of nominal peak.
    pub divergence_factor: f64,
}

impl Default for ReplicationSettings {
    fn default() -> Self {
        ReplicationSettings {
            t_event: 0.2,
            t_end: 3.2,
            early: (0.2, 0.7),
            late_len: 0.5,
            vp_window: (0.1, 0.3),
            depth_tol: 1e-4,
            divergence_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SagDepth {
    /// Bisect so the sag equilibrium matches the faulted positive-sequence PCC voltage.
    Matched,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SagFaultReport {
    /// Fraction by which the phase-A source amplitude drops.
    pub sag_depth: f64,
    /// Whether the bisection reached the faulted voltage.
    pub matched: bool,
    pub bisection_steps: usize,
    /// Positive-sequence PCC voltage (peak phase volts) of the phasor equilibria.
    pub vp_sag_equilibrium: f64,
    pub vp_fault_equilibrium: f64,
    /// Same, measured on the simulated waveforms.
    pub vp_sag: f64,
    pub vp_fault: f64,
    pub case_sag: OscillationVerdict,
    pub case_fault: OscillationVerdict,
    pub fault_closed_at: Option<f64>,
    pub sag_at: f64,
}

fn vp_of(sys: &SystemSpec, depth: f64) -> Option<f64> {
    phasor_equilibrium_with(sys, None, &SourceSequences::phase_a_sag(sys.source.v_pu, depth))
        .ok()
        .map(|e| e.v1_volts(sys))
}

/// Bisection on the sag depth; returns `(depth, matched, steps)`.
fn match_sag_depth(sys: &SystemSpec, target: f64, tol: f64) -> (f64, bool, usize) {
    let miss = |d: f64| vp_of(sys, d).map_or(-1.0, |v| (v - target) / target);
    if miss(1.0) > 0.0 {
        return (1.0, false, 0);
    }
    if miss(0.0) <= 0.0 {
        return (0.0, miss(0.0).abs() <= tol, 0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut steps = 0;
    while steps < 100 {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        let m = miss(mid);
        if m.abs() <= tol {
            return (mid, true, steps);
        }
        if m > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), false, steps)
}

/// Simulate a phase-A source sag (no sequence coupling at the fault point)
/// and the actual fault, with equal positive-sequence PCC voltage, and
/// classify each run.
pub fn replicate_sag_vs_fault(
    system: &SystemSpec,
    fault: &FaultSpec,
    depth: SagDepth,
    rs: &ReplicationSettings,
) -> Result<SagFaultReport, Error> {
    fault.validate()?;
    if !(rs.t_event > 0.0 && rs.t_end > rs.t_event + rs.early.1 && rs.late_len > 0.0) {
        return Err(SimError::Scenario("replication windows are inconsistent".into()).into());
    }
    let f1 = system.converter.omega1 / (2.0 * PI);
    let faulted = !fault.branch.is_open();
    let vp_fault_eq = phasor_equilibrium(system, faulted.then_some(fault))?.v1_volts(system);
    let (sag_depth, matched, steps) = match depth {
        SagDepth::Matched => match_sag_depth(system, vp_fault_eq, rs.depth_tol),
        SagDepth::Fixed(d) if (0.0..=1.0).contains(&d) => (d, true, 0),
        SagDepth::Fixed(d) => return Err(SimError::Scenario(format!("sag depth {d} outside [0, 1]")).into()),
    };
    let vp_sag_eq = vp_of(system, sag_depth)
        .ok_or_else(|| SimError::Equilibrium(format!("no steady state for sag depth {sag_depth}")))?;

    let v_nom = system.source.v_pu * system.bases.v_unit_peak();
    let prepare = |mut sc: SimScenario| {
        sc.t_end = rs.t_end;
        sc.record_from = 0.0;
        sc.divergence_limit_v = Some(rs.divergence_factor * v_nom);
        sc.probes.push(Probe::Voltage(sc.bus(bus::PCC).unwrap()));
        sc
    };
    // sag onset at the next zero crossing of the phase-A source voltage
    let w1 = system.converter.omega1;
    let k = ((w1 * rs.t_event - PI / 2.0) / PI).ceil();
    let sag_at = (PI / 2.0 + k * PI) / w1;
    let mut sag_sc = prepare(plant_scenario(system, true, None)?);
    sag_sc.source.schedule.push(AmplitudeStep { t: sag_at, scale: [1.0 - sag_depth, 1.0, 1.0] });
    let timing = FaultTiming { close_after: rs.t_event, on_zero_crossing: true };
    let mut fault_sc = prepare(plant_scenario(system, true, faulted.then_some((fault, timing)))?);
    if faulted {
        fault_sc.probes.push(Probe::SwitchCurrent(FAULT_SWITCH.into()));
    }

    let (ws, wf) = rayon::join(|| run(&sag_sc), || run(&fault_sc));
    let fault_closed_at = match &wf {
        Ok(w) => w.channel(&format!("i_{FAULT_SWITCH}")).and_then(|i| {
            i.iter().position(|x| *x != 0.0).map(|k| w.t0 + (k.max(1) - 1) as f64 * w.dt)
        }),
        Err(_) => None,
    };
    let event_f = fault_closed_at.unwrap_or(rs.t_event);
    let classify = |w: &Result<Waveform, SimError>, t_ev: f64| -> Result<(OscillationVerdict, f64), Error> {
        let w = match w {
            Ok(w) => w,
            Err(SimError::NonFinite { .. }) => return Ok((OscillationVerdict::diverged(), f64::NAN)),
            Err(e) => return Err(e.clone().into()),
        };
        let vw = (t_ev + rs.vp_window.0, t_ev + rs.vp_window.1);
        // align the voltage window to whole fundamental cycles
        let vw = (vw.0, vw.0 + ((vw.1 - vw.0) * f1).round() / f1);
        let vp = if w.t_last() >= vw.1 {
            fortescue(&extract_phasor(w, "v_pcc", f1, vw)?).0.norm()
        } else {
            f64::NAN
        };
        if w.diverged_at.is_some() {
            return Ok((OscillationVerdict::diverged(), vp));
        }
        let early = (t_ev + rs.early.0, t_ev + rs.early.1);
        let late = (rs.t_end - rs.late_len, rs.t_end);
        let v = oscillation_verdict(w, "v_pcc", f1, early, late, 1e-6 * v_nom)?;
        Ok((v, vp))
    };
    let (case_sag, vp_sag) = classify(&ws, sag_at)?;
    let (case_fault, vp_fault) = classify(&wf, event_f)?;
    Ok(SagFaultReport {
        sag_depth,
        matched,
        bisection_steps: steps,
        vp_sag_equilibrium: vp_sag_eq,
        vp_fault_equilibrium: vp_fault_eq,
        vp_sag,
        vp_fault,
        case_sag,
        case_fault,
        fault_closed_at,
        sag_at,
    })
}
