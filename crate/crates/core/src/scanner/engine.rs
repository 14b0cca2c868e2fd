//! Trapezoidal companion-model integration of the three-phase network.
//!
//! Each balanced branch is split into a differential and a zero-sequence
//! mode with projectors `P1 = I − J/3` and `P0 = J/3`; every mode is a series
//! R-L-C whose trapezoidal companion is `v = Zeq·i + e_hist`. Nodal equations
//! are dense and refactored only when a switch closes. The converter EMF
//! enters the nodal solution linearly, so the delay-free control law is
//! closed per step by fixed-point iteration on precomputed sensitivities.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;

use super::control::{inverse_park, park, ControlOutput, ControlState, Controller};
use super::measure::Waveform;
use super::network::{Init, Injection, Mode, Probe, SimScenario};
use crate::error::SimError;

/// Converter branch name used by probes.
pub const CONVERTER_BRANCH: &str = "converter";

const FIXED_POINT_MAX: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Free(usize),
    Fixed(usize),
    Ground,
}

#[derive(Debug, Clone, Copy)]
struct Coef {
    open: bool,
    r: f64,
    l: f64,
    /// `1/C`, zero without a capacitor.
    cinv: f64,
}

impl Coef {
    fn from_mode(m: &Mode) -> Coef {
        match *m {
            Mode::Open => Coef { open: true, r: 0.0, l: 0.0, cinv: 0.0 },
            Mode::Rlc { r_ohm, l_h, c_f } => {
                Coef { open: false, r: r_ohm, l: l_h, cinv: c_f.map_or(0.0, |c| 1.0 / c) }
            }
        }
    }

    fn zeq(&self, dt: f64) -> f64 {
        self.r + 2.0 * self.l / dt + self.cinv * dt / 2.0
    }

    fn z_phasor(&self, w: f64) -> Complex64 {
        Complex64::new(self.r, w * self.l - self.cinv / w)
    }
}

fn p0(x: &Vector3<f64>) -> Vector3<f64> {
    Vector3::repeat(x.sum() / 3.0)
}

/// `c[0]·P1·x + c[1]·P0·x`.
fn modal(c: [f64; 2], x: &Vector3<f64>) -> Vector3<f64> {
    let z = p0(x);
    (x - z) * c[0] + z * c[1]
}

fn modal_c(c: [Complex64; 2], x: &Vector3<Complex64>) -> Vector3<Complex64> {
    let z = Vector3::repeat(x.sum() / 3.0);
    (x - z) * c[0] + z * c[1]
}

fn projector_sum(c: [f64; 2]) -> Matrix3<f64> {
    let j = Matrix3::repeat(1.0 / 3.0);
    (Matrix3::identity() - j) * c[0] + j * c[1]
}

#[derive(Debug, Clone)]
struct BranchState {
    name: String,
    from: [Slot; 3],
    to: [Slot; 3],
    modes: [Coef; 2],
    y: Matrix3<f64>,
    i: Vector3<f64>,
    vl: Vector3<f64>,
    vc: Vector3<f64>,
    /// History plus series EMF used in the current step.
    h: Vector3<f64>,
}

impl BranchState {
    fn new(name: &str, from: [Slot; 3], to: [Slot; 3], modes: [Coef; 2], dt: f64) -> Self {
        let adm = modes.map(|m| if m.open { 0.0 } else { 1.0 / m.zeq(dt) });
        BranchState {
            name: name.to_string(),
            from,
            to,
            modes,
            y: projector_sum(adm),
            i: Vector3::zeros(),
            vl: Vector3::zeros(),
            vc: Vector3::zeros(),
            h: Vector3::zeros(),
        }
    }

    fn coefs(&self, f: impl Fn(&Coef) -> f64) -> [f64; 2] {
        self.modes.map(|m| if m.open { 0.0 } else { f(&m) })
    }

    fn history(&self, dt: f64) -> Vector3<f64> {
        modal(self.coefs(|m| -2.0 * m.l / dt + m.cinv * dt / 2.0), &self.i) - self.vl + self.vc
    }

    fn advance(&mut self, i_new: Vector3<f64>, dt: f64) {
        let di = i_new - self.i;
        let si = i_new + self.i;
        self.vl = modal(self.coefs(|m| 2.0 * m.l / dt), &di) - self.vl;
        self.vc += modal(self.coefs(|m| m.cinv * dt / 2.0), &si);
        self.i = i_new;
    }

    fn y_phasor(&self, w: f64) -> Result<Matrix3<Complex64>, SimError> {
        let mut y = [Complex64::new(0.0, 0.0); 2];
        for (k, m) in self.modes.iter().enumerate() {
            if !m.open {
                let z = m.z_phasor(w);
                if z.norm() == 0.0 {
                    return Err(SimError::Scenario(format!("branch {} is a short at the fundamental", self.name)));
                }
                y[k] = z.inv();
            }
        }
        let j = Matrix3::repeat(Complex64::new(1.0 / 3.0, 0.0));
        Ok((Matrix3::identity() - j) * y[0] + j * y[1])
    }

    fn energy(&self) -> f64 {
        let mut e = 0.0;
        let z_i = p0(&self.i);
        let z_c = p0(&self.vc);
        for (k, m) in self.modes.iter().enumerate() {
            if m.open {
                continue;
            }
            let (ii, vc) = if k == 0 { (self.i - z_i, self.vc - z_c) } else { (z_i, z_c) };
            e += 0.5 * m.l * ii.norm_squared();
            if m.cinv > 0.0 {
                e += 0.5 * vc.norm_squared() / m.cinv;
            }
        }
        e
    }
}

#[derive(Debug, Clone)]
struct SwitchState {
    node: Slot,
    r: f64,
    l: f64,
    closed: bool,
    close_after: f64,
    sync: bool,
    i: f64,
    vl: f64,
    h: f64,
    v_last: f64,
}

impl SwitchState {
    fn zeq(&self, dt: f64) -> f64 {
        self.r + 2.0 * self.l / dt
    }
}

struct ConverterState {
    branch: usize,
    bus: [Slot; 3],
    ctrl: Controller,
    state: ControlState,
    /// Converter EMF (the branch EMF is its negative).
    e: Vector3<f64>,
    out: Option<ControlOutput>,
    m_e: DMatrix<f64>,
}

/// Step-by-step simulator; [`run`] drives it over a whole scenario.
pub struct Simulator {
    sc: SimScenario,
    slots: Vec<[Slot; 3]>,
    n_free: usize,
    branches: Vec<BranchState>,
    switches: Vec<SwitchState>,
    g_uk: DMatrix<f64>,
    ginv: DMatrix<f64>,
    conv: Option<ConverterState>,
    series_branch: Option<usize>,
    v: DVector<f64>,
    vk: Vector3<f64>,
    step: usize,
    iterations_max: usize,
}

fn slot_rows(slots: &[Slot; 3], m: &DMatrix<f64>) -> Matrix3<f64> {
    let mut out = Matrix3::zeros();
    for p in 0..3 {
        if let Slot::Free(i) = slots[p] {
            for c in 0..3 {
                out[(p, c)] = m[(i, c)];
            }
        }
    }
    out
}

impl Simulator {
    pub fn new(sc: &SimScenario) -> Result<Self, SimError> {
        sc.validate()?;
        let dt = sc.dt;
        let mut slots = Vec::with_capacity(sc.buses.len());
        let mut n_free = 0;
        for b in 0..sc.buses.len() {
            if b == sc.source.bus {
                slots.push([Slot::Fixed(0), Slot::Fixed(1), Slot::Fixed(2)]);
            } else {
                slots.push([0, 1, 2].map(|k| Slot::Free(n_free + k)));
                n_free += 3;
            }
        }
        let node = |b: Option<usize>| b.map_or([Slot::Ground; 3], |b| slots[b]);
        let mut branches: Vec<BranchState> = sc
            .branches
            .iter()
            .map(|b| {
                BranchState::new(
                    &b.name,
                    node(b.from),
                    node(b.to),
                    [Coef::from_mode(&b.differential), Coef::from_mode(&b.zero)],
                    dt,
                )
            })
            .collect();
        let conv = match &sc.converter {
            Some(c) => {
                if sc.branch(CONVERTER_BRANCH).is_some() {
                    return Err(SimError::Scenario(format!("branch name '{CONVERTER_BRANCH}' is reserved")));
                }
                let ctrl = Controller::new(&c.params, dt, c.notch)?;
                let modes = [Coef::from_mode(&Mode::rl(0.0, c.params.l_f)), Coef::from_mode(&Mode::Open)];
                branches.push(BranchState::new(CONVERTER_BRANCH, [Slot::Ground; 3], slots[c.bus], modes, dt));
                Some(ConverterState {
                    branch: branches.len() - 1,
                    bus: slots[c.bus],
                    state: ctrl.zero_state(0.0),
                    ctrl,
                    e: Vector3::zeros(),
                    out: None,
                    m_e: DMatrix::zeros(n_free, 3),
                })
            }
            None => None,
        };
        let switches = sc
            .switches
            .iter()
            .map(|s| SwitchState {
                node: slots[s.bus][s.phase],
                r: s.r_ohm,
                l: s.l_h,
                closed: s.close_after <= 0.0,
                close_after: s.close_after,
                sync: s.on_zero_crossing,
                i: 0.0,
                vl: 0.0,
                h: 0.0,
                v_last: 0.0,
            })
            .collect();
        let series_branch = match &sc.perturbation {
            Some(p) => match &p.injection {
                Injection::SeriesVoltage { branch } => sc.branch(branch),
                _ => None,
            },
            None => None,
        };
        for p in &sc.probes {
            if let Probe::Current(n) = p {
                if !branches.iter().any(|b| &b.name == n) {
                    return Err(SimError::Scenario(format!("probe refers to unknown branch {n}")));
                }
            }
        }
        let mut sim = Simulator {
            sc: sc.clone(),
            slots,
            n_free,
            branches,
            switches,
            g_uk: DMatrix::zeros(n_free, 3),
            ginv: DMatrix::zeros(n_free, n_free),
            conv,
            series_branch,
            v: DVector::zeros(n_free),
            vk: Vector3::zeros(),
            step: 0,
            iterations_max: 0,
        };
        sim.refactor(0.0)?;
        match sc.init {
            Init::Zero => sim.vk = sim.fixed_voltages(0.0),
            Init::Steady => sim.init_steady()?,
        }
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.sc.dt
    }

    /// Largest number of fixed-point iterations any step needed.
    pub fn max_iterations(&self) -> usize {
        self.iterations_max
    }

    fn stamp(&self, g: &mut DMatrix<f64>, from: &[Slot; 3], to: &[Slot; 3], y: &Matrix3<f64>) {
        let idx = |s: Slot| match s {
            Slot::Free(i) => Some(i),
            Slot::Fixed(k) => Some(self.n_free + k),
            Slot::Ground => None,
        };
        for p in 0..3 {
            for q in 0..3 {
                let v = y[(p, q)];
                if v == 0.0 {
                    continue;
                }
                for (a, b, sgn) in [(from[p], from[q], 1.0), (to[p], to[q], 1.0), (from[p], to[q], -1.0), (to[p], from[q], -1.0)] {
                    if let (Some(i), Some(j)) = (idx(a), idx(b)) {
                        g[(i, j)] += sgn * v;
                    }
                }
            }
        }
    }

    fn refactor(&mut self, t: f64) -> Result<(), SimError> {
        let n = self.n_free;
        let dt = self.sc.dt;
        let mut g = DMatrix::zeros(n + 3, n + 3);
        for b in &self.branches {
            self.stamp(&mut g, &b.from, &b.to, &b.y);
        }
        for s in self.switches.iter().filter(|s| s.closed) {
            let idx = match s.node {
                Slot::Free(i) => i,
                Slot::Fixed(k) => n + k,
                Slot::Ground => continue,
            };
            g[(idx, idx)] += 1.0 / s.zeq(dt);
        }
        for i in 0..n {
            g[(i, i)] += self.sc.leak_s;
        }
        let g_uu = g.view((0, 0), (n, n)).into_owned();
        self.g_uk = g.view((0, n), (n, 3)).into_owned();
        self.ginv = if n == 0 {
            DMatrix::zeros(0, 0)
        } else {
            g_uu.try_inverse().ok_or(SimError::Singular { t })?
        };
        if self.ginv.iter().any(|x| !x.is_finite()) {
            return Err(SimError::Singular { t });
        }
        if let Some(c) = &self.conv {
            let b = &self.branches[c.branch];
            // nodal response to a unit branch EMF in each phase
            let mut s = DMatrix::zeros(n, 3);
            for col in 0..3 {
                let yh = b.y.column(col).into_owned();
                for p in 0..3 {
                    if let Slot::Free(i) = b.from[p] {
                        s[(i, col)] += yh[p];
                    }
                    if let Slot::Free(i) = b.to[p] {
                        s[(i, col)] -= yh[p];
                    }
                }
            }
            let m_e = &self.ginv * s;
            self.conv.as_mut().unwrap().m_e = m_e;
        }
        Ok(())
    }

    fn fixed_voltages(&self, t: f64) -> Vector3<f64> {
        let src = &self.sc.source;
        let k = src.scale_at(t);
        let mut v = Vector3::from_fn(|p, _| {
            src.peak_v * k[p] * (src.omega * t + src.phase_rad - 2.0 * PI * p as f64 / 3.0).cos()
        });
        if let Some(p) = &self.sc.perturbation {
            if p.injection == Injection::SourceVoltage {
                v += Vector3::from(p.value(t));
            }
        }
        v
    }

    fn volts(&self, slots: &[Slot; 3], v: &DVector<f64>) -> Vector3<f64> {
        Vector3::from_fn(|p, _| match slots[p] {
            Slot::Free(i) => v[i],
            Slot::Fixed(k) => self.vk[k],
            Slot::Ground => 0.0,
        })
    }

    fn init_steady(&mut self) -> Result<(), SimError> {
        let n = self.n_free;
        let w = self.sc.source.omega;
        let zero = Complex64::new(0.0, 0.0);
        let conv_branch = self.conv.as_ref().map(|c| c.branch);
        let idx = |s: Slot| match s {
            Slot::Free(i) => Some(i),
            Slot::Fixed(k) => Some(n + k),
            Slot::Ground => None,
        };
        let mut g: DMatrix<Complex64> = DMatrix::from_element(n + 3, n + 3, zero);
        let mut yb = Vec::with_capacity(self.branches.len());
        for (bi, b) in self.branches.iter().enumerate() {
            let y = if Some(bi) == conv_branch { Matrix3::from_element(zero) } else { b.y_phasor(w)? };
            for p in 0..3 {
                for q in 0..3 {
                    for (a, c, sgn) in
                        [(b.from[p], b.from[q], 1.0), (b.to[p], b.to[q], 1.0), (b.from[p], b.to[q], -1.0), (b.to[p], b.from[q], -1.0)]
                    {
                        if let (Some(i), Some(j)) = (idx(a), idx(c)) {
                            g[(i, j)] += y[(p, q)] * sgn;
                        }
                    }
                }
            }
            yb.push(y);
        }
        for s in self.switches.iter().filter(|s| s.closed) {
            if let Some(i) = idx(s.node) {
                g[(i, i)] += Complex64::new(s.r, w * s.l).inv();
            }
        }
        for i in 0..n {
            g[(i, i)] += self.sc.leak_s;
        }
        let vk = self.sc.source.phasors_at(0.0);
        let vk = Vector3::from(vk);
        let g_uu = g.view((0, 0), (n, n)).into_owned();
        let g_uk = g.view((0, n), (n, 3)).into_owned();
        let lu = g_uu.lu();
        let base = -(&g_uk * vk);
        let solve = |rhs: &DVector<Complex64>| -> Result<DVector<Complex64>, SimError> {
            if n == 0 {
                return Ok(DVector::from_element(0, zero));
            }
            lu.solve(rhs).ok_or(SimError::Singular { t: 0.0 })
        };
        let va = solve(&DVector::from_column_slice(base.as_slice()))?;
        let phasor = |slots: &[Slot; 3], v: &DVector<Complex64>| -> Vector3<Complex64> {
            Vector3::from_fn(|p, _| match slots[p] {
                Slot::Free(i) => v[i],
                Slot::Fixed(k) => vk[k],
                Slot::Ground => zero,
            })
        };

        let a = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let pos = |x: &Vector3<Complex64>| (x[0] + a * x[1] + a * a * x[2]) / 3.0;
        let mut v = va.clone();
        let mut i_conv = Vector3::from_element(zero);
        if let (Some(c), Some(spec)) = (&self.conv, &self.sc.converter) {
            let set = Vector3::from_fn(|p, _| Complex64::from_polar(1.0, -2.0 * PI * p as f64 / 3.0));
            let mut rhs = DVector::from_element(n, zero);
            for p in 0..3 {
                if let Slot::Free(i) = c.bus[p] {
                    rhs[i] += set[p];
                }
            }
            let vb = solve(&rhs)?;
            let vb_pos = pos(&Vector3::from_fn(|p, _| match c.bus[p] {
                Slot::Free(i) => vb[i],
                _ => zero,
            }));
            let a_pos = pos(&phasor(&c.bus, &va));
            let i_dq = spec.i_ref_at(0.0);
            let cc = vb_pos * i_dq;
            let x = cc.im / a_pos.norm();
            if !(x.abs() < 1.0) {
                return Err(SimError::Equilibrium("converter current too large for the initial network".into()));
            }
            let phi = a_pos.arg() + x.asin();
            let ia = i_dq * Complex64::from_polar(1.0, phi);
            v = &va + &vb * ia;
            i_conv = set * ia;
            let vt_pos = pos(&phasor(&c.bus, &v));
            let rot = Complex64::from_polar(1.0, -phi);
            let ctrl_state = c.ctrl.steady_state(vt_pos * rot, i_dq, phi);
            let e_dq = vt_pos * rot + Complex64::new(0.0, w * spec.params.l_f) * i_dq;
            let e = Vector3::from(inverse_park(e_dq, phi));
            let cm = self.conv.as_mut().unwrap();
            cm.state = ctrl_state;
            cm.e = e;
        }

        for (bi, b) in self.branches.iter_mut().enumerate() {
            let ib = if Some(bi) == conv_branch {
                i_conv
            } else {
                yb[bi] * (phasor(&b.from, &v) - phasor(&b.to, &v))
            };
            let jl = b.modes.map(|m| if m.open { zero } else { Complex64::new(0.0, w * m.l) });
            let cz = b.modes.map(|m| if m.open { zero } else { Complex64::new(0.0, -m.cinv / w) });
            b.i = ib.map(|z| z.re);
            b.vl = modal_c(jl, &ib).map(|z| z.re);
            b.vc = modal_c(cz, &ib).map(|z| z.re);
        }
        for s in self.switches.iter_mut() {
            let vs = match s.node {
                Slot::Free(i) => v[i],
                Slot::Fixed(k) => vk[k],
                Slot::Ground => zero,
            };
            s.v_last = vs.re;
            if s.closed {
                let is = vs / Complex64::new(s.r, w * s.l);
                s.i = is.re;
                s.vl = (Complex64::new(0.0, w * s.l) * is).re;
            }
        }
        self.v = v.map(|z| z.re);
        self.vk = vk.map(|z| z.re);
        Ok(())
    }

    fn node_name(&self, node: usize) -> String {
        for (b, s) in self.slots.iter().enumerate() {
            for (p, slot) in s.iter().enumerate() {
                if *slot == Slot::Free(node) {
                    return format!("{}.{}", self.sc.buses[b], ["a", "b", "c"][p]);
                }
            }
        }
        format!("node {node}")
    }

    /// Advance one step.
    pub fn advance(&mut self) -> Result<(), SimError> {
        let dt = self.sc.dt;
        let t_prev = self.time();
        let t = (self.step + 1) as f64 * dt;

        // switch closings are decided on the previous step's voltages
        let mut changed = false;
        for s in self.switches.iter_mut().filter(|s| !s.closed) {
            if t_prev + 0.5 * dt < s.close_after {
                continue;
            }
            let v_now = match s.node {
                Slot::Free(i) => self.v[i],
                Slot::Fixed(k) => self.vk[k],
                Slot::Ground => 0.0,
            };
            let crossed = !s.sync || v_now == 0.0 || (v_now > 0.0) != (s.v_last > 0.0);
            s.v_last = v_now;
            if crossed {
                s.closed = true;
                s.i = 0.0;
                s.vl = 0.0;
                changed = true;
            }
        }
        if changed {
            self.refactor(t)?;
        }
        for s in self.switches.iter_mut().filter(|s| !s.closed) {
            s.v_last = match s.node {
                Slot::Free(i) => self.v[i],
                Slot::Fixed(k) => self.vk[k],
                Slot::Ground => 0.0,
            };
        }

        self.vk = self.fixed_voltages(t);
        let pert = self.sc.perturbation.as_ref().map(|p| Vector3::from(p.value(t)));
        let n = self.n_free;
        let mut rhs = DVector::zeros(n);
        for (bi, b) in self.branches.iter_mut().enumerate() {
            let mut h = b.history(dt);
            if Some(bi) == self.series_branch {
                h += pert.unwrap_or_else(Vector3::zeros);
            }
            b.h = h;
            let yh = b.y * h;
            for p in 0..3 {
                if let Slot::Free(i) = b.from[p] {
                    rhs[i] += yh[p];
                }
                if let Slot::Free(i) = b.to[p] {
                    rhs[i] -= yh[p];
                }
            }
        }
        for s in self.switches.iter_mut().filter(|s| s.closed) {
            s.h = -2.0 * s.l / dt * s.i - s.vl;
            if let Slot::Free(i) = s.node {
                rhs[i] += s.h / s.zeq(dt);
            }
        }
        if let (Some(p), Some(pv)) = (&self.sc.perturbation, pert) {
            if let Injection::ShuntCurrent { bus } = p.injection {
                for k in 0..3 {
                    if let Slot::Free(i) = self.slots[bus][k] {
                        rhs[i] += pv[k];
                    }
                }
            }
        }
        rhs -= &self.g_uk * self.vk;
        let v0 = &self.ginv * rhs;

        let v = if let Some(mut c) = self.conv.take() {
            let b = &self.branches[c.branch];
            let vf0 = self.volts_of(&b.from, &v0);
            let vt0 = self.volts_of(&b.to, &v0);
            let mf = slot_rows(&b.from, &c.m_e);
            let mt = slot_rows(&b.to, &c.m_e);
            let i_base = b.y * (vf0 - vt0 - b.h);
            let k = b.y * (mf - mt - Matrix3::identity());
            let vbus0 = self.volts_of(&c.bus, &v0);
            let mbus = slot_rows(&c.bus, &c.m_e);
            let i_ref = self.sc.converter.as_ref().unwrap().i_ref_at(t);
            let scale = c.ctrl.params.modulation_gain().max(1.0);
            let mut e = c.e;
            let mut out = None;
            let mut iters = 0;
            for it in 1..=FIXED_POINT_MAX {
                iters = it;
                let e_br = -e;
                let vt = vbus0 + mbus * e_br;
                let ic = i_base + k * e_br;
                let o = c.ctrl.step(&c.state, vt.into(), ic.into(), i_ref);
                let e_new = Vector3::from(o.e_abc);
                let delta = (e_new - e).amax();
                e = e_new;
                out = Some(o);
                if !delta.is_finite() || delta <= 1e-11 * scale {
                    break;
                }
            }
            self.iterations_max = self.iterations_max.max(iters);
            let o = out.unwrap();
            c.state = o.state;
            c.out = Some(o);
            c.e = e;
            let v = &v0 - &c.m_e * e;
            self.conv = Some(c);
            v
        } else {
            v0
        };
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            return Err(SimError::NonFinite { t, node: self.node_name(k) });
        }
        if let Some(c) = &self.conv {
            if c.e.iter().any(|x| !x.is_finite()) {
                return Err(SimError::NonFinite { t, node: "converter EMF".into() });
            }
        }

        let conv_branch = self.conv.as_ref().map(|c| c.branch);
        let e_br = self.conv.as_ref().map(|c| -c.e);
        for bi in 0..self.branches.len() {
            let b = &self.branches[bi];
            let mut drop = self.volts_of(&b.from, &v) - self.volts_of(&b.to, &v) - b.h;
            if Some(bi) == conv_branch {
                drop -= e_br.unwrap();
            }
            let i_new = b.y * drop;
            self.branches[bi].advance(i_new, dt);
        }
        for si in 0..self.switches.len() {
            if !self.switches[si].closed {
                continue;
            }
            let vs = match self.switches[si].node {
                Slot::Free(i) => v[i],
                Slot::Fixed(k) => self.vk[k],
                Slot::Ground => 0.0,
            };
            let s = &mut self.switches[si];
            let i_new = (vs - s.h) / s.zeq(dt);
            s.vl = 2.0 * s.l / dt * (i_new - s.i) - s.vl;
            s.i = i_new;
        }
        self.v = v;
        self.step += 1;
        Ok(())
    }

    fn volts_of(&self, slots: &[Slot; 3], v: &DVector<f64>) -> Vector3<f64> {
        self.volts(slots, v)
    }

    pub fn bus_voltage(&self, bus: usize) -> [f64; 3] {
        self.volts(&self.slots[bus], &self.v).into()
    }

    pub fn branch_current(&self, name: &str) -> Option<[f64; 3]> {
        self.branches.iter().find(|b| b.name == name).map(|b| b.i.into())
    }

    /// Magnetic plus electric energy stored in all branches, joules.
    pub fn stored_energy(&self) -> f64 {
        self.branches.iter().map(BranchState::energy).sum::<f64>()
            + self.switches.iter().filter(|s| s.closed).map(|s| 0.5 * s.l * s.i * s.i).sum::<f64>()
    }

    pub fn control_state(&self) -> Option<&ControlState> {
        self.conv.as_ref().map(|c| &c.state)
    }

    fn sample(&self, out: &mut Vec<f64>) {
        let t = self.time();
        for p in &self.sc.probes {
            match p {
                Probe::Voltage(b) => out.extend(self.bus_voltage(*b)),
                Probe::Current(n) => out.extend(self.branch_current(n).unwrap_or([f64::NAN; 3])),
                Probe::SwitchCurrent(n) => {
                    let k = self.sc.switches.iter().position(|s| &s.name == n).unwrap();
                    out.push(self.switches[k].i);
                }
                Probe::Injection => {
                    let v = self.sc.perturbation.as_ref().map_or([0.0; 3], |p| p.value(t));
                    out.extend(v);
                }
                Probe::Control => {
                    let c = self.conv.as_ref().unwrap();
                    let (v_dq, i_dq, theta) = match &c.out {
                        Some(o) => (o.v_dq, o.i_dq, o.state.theta),
                        None => {
                            let b = &self.branches[c.branch];
                            let vt = self.volts(&c.bus, &self.v);
                            (park(vt.into(), c.state.theta), park(b.i.into(), c.state.theta), c.state.theta)
                        }
                    };
                    out.extend([theta, c.state.omega, i_dq.re, i_dq.im, v_dq.re, v_dq.im]);
                }
            }
        }
    }
}

/// Integrate `scenario` from 0 to `t_end` and return the recorded probes.
pub fn run(scenario: &SimScenario) -> Result<Waveform, SimError> {
    let mut sim = Simulator::new(scenario)?;
    let dt = scenario.dt;
    let steps = (scenario.t_end / dt).round() as usize;
    let first = (scenario.record_from / dt - 1e-9).ceil().max(0.0) as usize;
    let names = scenario.channel_names();
    let nch = names.len();
    let mut data: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1 - first.min(steps)); nch];
    let mut row = Vec::with_capacity(nch);
    let volt_channels: Vec<usize> =
        names.iter().enumerate().filter(|(_, n)| n.starts_with("v_")).map(|(k, _)| k).collect();
    let mut diverged_at = None;
    for n in 0..=steps {
        if n > 0 {
            sim.advance()?;
        }
        if n >= first {
            row.clear();
            sim.sample(&mut row);
            for (ch, x) in data.iter_mut().zip(&row) {
                ch.push(*x);
            }
            if let Some(lim) = scenario.divergence_limit_v {
                if volt_channels.iter().any(|&k| row[k].abs() > lim) {
                    diverged_at = Some(sim.time());
                    break;
                }
            }
        }
    }
    if sim.max_iterations() >= FIXED_POINT_MAX {
        log::warn!("converter control fixed point hit the iteration cap");
    }
    Ok(Waveform { t0: first as f64 * dt, dt, names, data, diverged_at })
}
