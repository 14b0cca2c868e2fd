//! Averaged grid-following converter control: a PLL with a notch in its
//! error path and a dq current PI with cross-coupling and voltage
//! feedforward. Modulation is ideal and delay-free on a stiff DC link.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::ParamError;
use crate::plant::ConverterParams;

const A: Complex64 = Complex64::new(-0.5, 0.866_025_403_784_438_6);

/// Amplitude-invariant Park transform: `(2/3)(x_a + a·x_b + a²·x_c)·e^{−jθ}`.
pub fn park(x: [f64; 3], theta: f64) -> Complex64 {
    let sv = (Complex64::new(x[0], 0.0) + A * x[1] + A * A * x[2]) * (2.0 / 3.0);
    sv * Complex64::from_polar(1.0, -theta)
}

/// Inverse of [`park`] for a zero-sequence-free set.
pub fn inverse_park(x: Complex64, theta: f64) -> [f64; 3] {
    let r = x * Complex64::from_polar(1.0, theta);
    [r.re, (r * A * A).re, (r * A).re]
}

/// Second-order section in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    const IDENTITY: Biquad = Biquad { b: [1.0, 0.0, 0.0], a: [0.0, 0.0] };

    /// Bilinear transform of `(s² + ωn²)/(s² + 2ζωn·s + ωn²)`, prewarped so
    /// the discrete zero lands exactly on `ωn`.
    fn notch(omega_n: f64, zeta: f64, dt: f64) -> Biquad {
        let k = omega_n / (omega_n * dt / 2.0).tan();
        let (k2, w2) = (k * k, omega_n * omega_n);
        let a0 = k2 + 2.0 * zeta * omega_n * k + w2;
        Biquad {
            b: [(k2 + w2) / a0, (2.0 * w2 - 2.0 * k2) / a0, (k2 + w2) / a0],
            a: [(2.0 * w2 - 2.0 * k2) / a0, (k2 - 2.0 * zeta * omega_n * k + w2) / a0],
        }
    }

    fn step(&self, z: [f64; 2], x: f64) -> (f64, [f64; 2]) {
        let y = self.b[0] * x + z[0];
        (y, [self.b[1] * x - self.a[0] * y + z[1], self.b[2] * x - self.a[1] * y])
    }
}

/// Controller memory between steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlState {
    /// PLL angle, wrapped to [0, 2π).
    pub theta: f64,
    pub omega: f64,
    pll_int: f64,
    pll_in_prev: f64,
    notch_z: [f64; 2],
    cur_int: Complex64,
    err_prev: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Converter EMF per phase, volts.
    pub e_abc: [f64; 3],
    pub v_dq: Complex64,
    pub i_dq: Complex64,
    /// Notch output feeding the PLL PI.
    pub vq_filtered: f64,
    /// Angle used for this step before wrapping.
    pub theta: f64,
    pub state: ControlState,
}

#[derive(Debug, Clone, Serialize)]
pub struct Controller {
    pub params: ConverterParams,
    pub dt: f64,
    notch: Biquad,
}

impl Controller {
    pub fn new(params: &ConverterParams, dt: f64, with_notch: bool) -> Result<Self, ParamError> {
        params.validate()?;
        if !(dt > 0.0) {
            return Err(ParamError::new("Controller", "dt must be > 0"));
        }
        if with_notch && params.omega_n * dt >= PI {
            return Err(ParamError::new("Controller", "notch frequency above Nyquist"));
        }
        let notch = if with_notch {
            Biquad::notch(params.omega_n, params.zeta_n, dt)
        } else {
            Biquad::IDENTITY
        };
        Ok(Controller { params: *params, dt, notch })
    }

    /// State that holds `e_dq = v_dq + jω1·L_f·i_dq` with the PLL locked at `theta`.
    pub fn steady_state(&self, v_dq: Complex64, i_dq: Complex64, theta: f64) -> ControlState {
        let p = &self.params;
        let j = Complex64::new(0.0, 1.0);
        let e_dq = v_dq + j * p.omega1 * p.l_f * i_dq;
        ControlState {
            theta: theta.rem_euclid(2.0 * PI),
            omega: p.omega1,
            pll_int: 0.0,
            pll_in_prev: 0.0,
            notch_z: [0.0; 2],
            cur_int: e_dq / p.modulation_gain() - j * p.k_f * i_dq - p.k_d * v_dq,
            err_prev: Complex64::new(0.0, 0.0),
        }
    }

    /// All-zero state at angle `theta`, for cold starts.
    pub fn zero_state(&self, theta: f64) -> ControlState {
        ControlState {
            theta,
            omega: self.params.omega1,
            pll_int: 0.0,
            pll_in_prev: 0.0,
            notch_z: [0.0; 2],
            cur_int: Complex64::new(0.0, 0.0),
            err_prev: Complex64::new(0.0, 0.0),
        }
    }

    /// One control period. Pure: the caller decides whether to keep `state`.
    pub fn step(&self, st: &ControlState, v_abc: [f64; 3], i_abc: [f64; 3], i_ref: Complex64) -> ControlOutput {
        let p = &self.params;
        let h = self.dt / 2.0;

        // the angle enters its own update through v_q; iterate the implicit
        // trapezoidal integrator to convergence
        let mut theta = st.theta + self.dt * st.omega;
        let (mut v_dq, mut vq_f, mut notch_z, mut pll_int, mut omega);
        let mut it = 0;
        loop {
            v_dq = park(v_abc, theta);
            (vq_f, notch_z) = self.notch.step(st.notch_z, v_dq.im);
            pll_int = st.pll_int + p.k_ip * h * (vq_f + st.pll_in_prev);
            omega = p.omega1 + p.k_pp * vq_f + pll_int;
            let next = st.theta + h * (omega + st.omega);
            it += 1;
            if (next - theta).abs() <= 1e-14 * (1.0 + theta.abs()) || it >= 50 {
                theta = next;
                v_dq = park(v_abc, theta);
                break;
            }
            theta = next;
        }

        let j = Complex64::new(0.0, 1.0);
        let i_dq = park(i_abc, theta);
        let err = i_ref - i_dq;
        let cur_int = st.cur_int + p.k_ic * h * (err + st.err_prev);
        let m = p.k_pc * err + cur_int + j * p.k_f * i_dq + p.k_d * v_dq;
        let e_abc = inverse_park(p.modulation_gain() * m, theta);
        ControlOutput {
            e_abc,
            v_dq,
            i_dq,
            vq_filtered: vq_f,
            theta,
            state: ControlState {
                theta: theta.rem_euclid(2.0 * PI),
                omega,
                pll_int,
                pll_in_prev: vq_f,
                notch_z,
                cur_int,
                err_prev: err,
            },
        }
    }
}

/// Free-function form of [`Controller::step`].
pub fn control_law_step(
    ctrl: &Controller,
    state: &ControlState,
    v_abc: [f64; 3],
    i_abc: [f64; 3],
    i_ref: Complex64,
) -> ControlOutput {
    ctrl.step(state, v_abc, i_abc, i_ref)
}
