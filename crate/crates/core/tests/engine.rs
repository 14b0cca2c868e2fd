use std::f64::consts::PI;

use num_complex::Complex64;
use seqstab::scanner::*;
use seqstab::{Sequence, SystemSpec};

const W1: f64 = 100.0 * PI;

fn source(peak: f64) -> Source {
    Source { bus: 0, peak_v: peak, phase_rad: 0.0, omega: W1, schedule: Vec::new() }
}

fn one_branch(mode: Mode, init: Init, t_end: f64) -> SimScenario {
    SimScenario {
        buses: vec!["src".into()],
        branches: vec![Branch { name: "load".into(), from: Some(0), to: None, differential: mode, zero: mode }],
        switches: Vec::new(),
        source: source(100.0),
        converter: None,
        perturbation: None,
        dt: 10e-6,
        t_end,
        record_from: 0.0,
        probes: vec![Probe::Current("load".into())],
        leak_s: 1e-6,
        init,
        divergence_limit_v: None,
    }
}

fn peak_tail(x: &[f64], n: usize) -> f64 {
    x[x.len() - n..].iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[test]
fn rl_branch_reaches_phasor_steady_state() {
    let (r, l) = (2.0, 0.02);
    let expect = 100.0 / Complex64::new(r, W1 * l).norm();
    for init in [Init::Zero, Init::Steady] {
        // tau = 10 ms; 0.3 s leaves e^-30 of the offset
        let w = run(&one_branch(Mode::rl(r, l), init, 0.3)).unwrap();
        for ch in ["i_load_a", "i_load_b", "i_load_c"] {
            let got = peak_tail(w.channel(ch).unwrap(), 2000);
            assert!((got / expect - 1.0).abs() < 1e-3, "{init:?} {ch}: {got} vs {expect}");
        }
    }
}

#[test]
fn capacitor_energization_follows_closed_form() {
    let (r, c) = (10.0, 100e-6);
    // phase a starts at a voltage zero so its current is continuous at t = 0
    let mut sc = one_branch(Mode::rc(r, c), Init::Zero, 0.01);
    sc.source.phase_rad = -PI / 2.0;
    let w = run(&sc).unwrap();
    let i_ss = Complex64::new(0.0, -100.0) / Complex64::new(r, -1.0 / (W1 * c));
    let vc0 = (i_ss / Complex64::new(0.0, W1 * c)).re;
    let tau = r * c;
    let ia = w.channel("i_load_a").unwrap();
    let mut worst = 0.0f64;
    for k in 0..ia.len() {
        let t = k as f64 * w.dt;
        let exact = (i_ss * Complex64::from_polar(1.0, W1 * t)).re + vc0 / r * (-t / tau).exp();
        worst = worst.max((ia[k] - exact).abs());
    }
    assert!(worst < 1e-3 * i_ss.norm(), "worst error {worst}");
}

#[test]
fn passive_network_energy_never_grows_after_source_short() {
    let sys = SystemSpec::default();
    let mut sc = plant_scenario(&sys, false, None).unwrap();
    sc.source.schedule.push(AmplitudeStep { t: 0.0, scale: [0.0; 3] });
    sc.init = Init::Zero;
    // charge the network first, then short the source
    sc.source.schedule[0].t = 0.05;
    let mut sim = Simulator::new(&sc).unwrap();
    while sim.time() < 0.05 + 0.5 * sc.dt {
        sim.advance().unwrap();
    }
    let mut prev = sim.stored_energy();
    assert!(prev > 0.0);
    for _ in 0..20_000 {
        sim.advance().unwrap();
        let e = sim.stored_energy();
        assert!(e <= prev * (1.0 + 1e-12) + 1e-15, "energy rose from {prev} to {e} at t = {}", sim.time());
        prev = e;
    }
}

fn bench(steps: Vec<(f64, Complex64)>, init: Init, t_end: f64) -> SimScenario {
    let sys = SystemSpec::default();
    let mut sc = converter_bench(&sys).unwrap();
    sc.converter.as_mut().unwrap().i_ref_steps = steps;
    sc.init = init;
    sc.t_end = t_end;
    sc.probes = vec![Probe::Control, Probe::Current(CONVERTER_BRANCH.into())];
    sc
}

#[test]
fn converter_cold_start_settles_to_reference() {
    let sys = SystemSpec::default();
    let w = run(&bench(Vec::new(), Init::Zero, 1.0)).unwrap();
    let id = *w.channel("i_d").unwrap().last().unwrap();
    let iq = *w.channel("i_q").unwrap().last().unwrap();
    let iar = sys.converter.i_ar;
    assert!((id / iar - 1.0).abs() < 0.01, "i_d = {id}");
    assert!(iq.abs() < 0.01 * iar, "i_q = {iq}");
    let peak = peak_tail(w.channel("i_converter_a").unwrap(), 1000);
    assert!((peak / iar - 1.0).abs() < 0.01);
}

#[test]
fn converter_follows_reference_step() {
    let sys = SystemSpec::default();
    let target = Complex64::new(0.5 * sys.converter.i_ar, 0.2 * sys.converter.i_ar);
    let w = run(&bench(vec![(0.1, target)], Init::Steady, 0.5)).unwrap();
    let id = w.channel("i_d").unwrap();
    let iq = w.channel("i_q").unwrap();
    let k_pre = (0.099 / w.dt) as usize;
    assert!((id[k_pre] / sys.converter.i_ar - 1.0).abs() < 1e-6);
    let got = Complex64::new(*id.last().unwrap(), *iq.last().unwrap());
    assert!((got - target).norm() < 0.01 * target.norm(), "{got} vs {target}");
}

#[test]
fn steady_start_of_plant_holds_equilibrium() {
    let sys = SystemSpec::default();
    let mut sc = plant_scenario(&sys, true, None).unwrap();
    sc.t_end = 0.2;
    sc.probes = vec![Probe::Control];
    let w = run(&sc).unwrap();
    let eq = seqstab::equilibrium::phasor_equilibrium(&sys, None).unwrap();
    let vd = w.channel("v_d").unwrap();
    let drift = vd.iter().map(|v| (v - eq.v1_volts(&sys)).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-3 * eq.v1_volts(&sys), "v_d drift {drift}");
}

#[test]
fn fault_switch_closes_on_voltage_zero() {
    let sys = SystemSpec::default();
    let timing = FaultTiming { close_after: 0.1, on_zero_crossing: true };
    let mut sc = plant_scenario(&sys, false, Some((&sys.fault, timing))).unwrap();
    sc.t_end = 0.2;
    sc.probes = vec![Probe::SwitchCurrent(FAULT_SWITCH.into()), Probe::Voltage(sc.bus(bus::FAULT).unwrap())];
    let w = run(&sc).unwrap();
    let i = w.channel("i_fault").unwrap();
    let first = i.iter().position(|x| *x != 0.0).unwrap();
    let t_close = first as f64 * w.dt;
    assert!((0.1..0.111).contains(&t_close), "closed at {t_close}");
    // phase-a voltage just before closing sits next to a zero crossing
    let va = w.channel("v_fault_a").unwrap();
    let v_peak = va[..first].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(va[first - 1].abs() < 0.01 * v_peak);
}

#[test]
fn runs_are_bit_identical() {
    let sys = SystemSpec::default();
    let b = ScanBench::new(&sys, ScanPort::Converter, true, false).unwrap();
    let settings = seqstab::system::ScanSettings { settle_s: 0.2, transient_s: 0.3, window_s: 0.2, ..sys.scan };
    let a = inject_and_measure(&b, Sequence::Positive, 35.0, &settings).unwrap();
    let c = inject_and_measure(&b, Sequence::Positive, 35.0, &settings).unwrap();
    assert_eq!(a.z.re.to_bits(), c.z.re.to_bits());
    assert_eq!(a.z.im.to_bits(), c.z.im.to_bits());
}

#[test]
fn injection_settings_are_checked() {
    let sys = SystemSpec::default();
    let b = ScanBench::new(&sys, ScanPort::Grid, false, false).unwrap();
    let mut s = sys.scan;
    s.amplitude = 0.2;
    assert!(inject_and_measure(&b, Sequence::Positive, 37.0, &s).is_err());
    assert!(inject_and_measure(&b, Sequence::Positive, 50.0, &sys.scan).is_err());
    assert!(inject_and_measure(&b, Sequence::Positive, 100.2, &sys.scan).is_err());
}

#[test]
fn zero_sequence_fault_port_scan_matches_network() {
    let sys = SystemSpec::default();
    let b = ScanBench::new(&sys, ScanPort::Fault, false, false).unwrap();
    let m = inject_and_measure(&b, Sequence::Zero, 37.0, &sys.scan).unwrap();
    let g = seqstab::wcsim::grid_branches(&sys, sys.fault.alpha).unwrap();
    let z = seqstab::wcsim::z0e(&g.z_01, &g.z_02).unwrap().eval_jw(2.0 * PI * 37.0).unwrap();
    assert!((m.z.norm() / z.norm() - 1.0).abs() < 5e-3, "{} vs {z}", m.z);
    assert!((m.z / z).arg().to_degrees().abs() < 0.5);
}

#[test]
fn empty_grid_gives_empty_scan() {
    let sys = SystemSpec::default();
    let b = ScanBench::new(&sys, ScanPort::Grid, false, false).unwrap();
    let grid = seqstab::FrequencyGrid::explicit(Vec::new()).unwrap();
    assert!(scan(&b, &grid, Sequence::Positive, &sys.scan).rows.is_empty());
}

#[test]
fn measured_impedance_is_linear_in_amplitude() {
    let sys = SystemSpec::default();
    let b = ScanBench::new(&sys, ScanPort::Wpp, true, false).unwrap();
    let base = seqstab::system::ScanSettings { settle_s: 0.2, transient_s: 0.4, window_s: 0.2, ..sys.scan };
    for f in [25.0, 75.0] {
        let small = inject_and_measure(&b, Sequence::Positive, f, &seqstab::system::ScanSettings { amplitude: 0.01, ..base }).unwrap();
        let large = inject_and_measure(&b, Sequence::Positive, f, &seqstab::system::ScanSettings { amplitude: 0.02, ..base }).unwrap();
        let change = (large.z - small.z).norm() / small.z.norm();
        assert!(change < 0.01, "{f} Hz: {} vs {} ({change})", small.z, large.z);
    }
}
