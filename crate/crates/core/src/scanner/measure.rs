//! Waveform container, single-bin DFT phasors, symmetrical components,
//! settle detection and oscillation classification.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::SimError;
use crate::sig12;

/// Uniformly sampled channels starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub t0: f64,
    pub dt: f64,
    pub names: Vec<String>,
    pub data: Vec<Vec<f64>>,
    /// Set when the run stopped early on the divergence limit.
    pub diverged_at: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveformMeta {
    pub dt: f64,
    pub t0: f64,
    pub samples: usize,
    pub channels: Vec<String>,
    pub scenario_hash: String,
    pub diverged_at: Option<f64>,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn t_last(&self) -> f64 {
        self.t0 + (self.len().max(1) - 1) as f64 * self.dt
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.data[k].as_slice())
    }

    /// The `<prefix>_a`, `_b`, `_c` channels.
    pub fn group(&self, prefix: &str) -> Option<[&[f64]; 3]> {
        Some([
            self.channel(&format!("{prefix}_a"))?,
            self.channel(&format!("{prefix}_b"))?,
            self.channel(&format!("{prefix}_c"))?,
        ])
    }

    /// CSV with a `t` column; numbers at 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for k in 0..self.len() {
            write!(w, "{}", sig12(self.t0 + k as f64 * self.dt))?;
            for ch in &self.data {
                write!(w, ",{}", sig12(ch[k]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn metadata(&self, scenario_hash: &str) -> WaveformMeta {
        WaveformMeta {
            dt: self.dt,
            t0: self.t0,
            samples: self.len(),
            channels: self.names.clone(),
            scenario_hash: scenario_hash.to_string(),
            diverged_at: self.diverged_at,
        }
    }
}

/// SHA-256 of any value's `Debug` rendering, hex encoded.
pub fn content_hash<T: std::fmt::Debug>(value: &T) -> String {
    let digest = Sha256::digest(format!("{value:?}").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Peak-amplitude phasors of one three-phase group at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasorTriple {
    pub f_hz: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    /// Energy in the two neighbouring bins over the energy in the bin.
    pub leakage: f64,
}

impl PhasorTriple {
    pub fn phases(&self) -> [Complex64; 3] {
        [self.a, self.b, self.c]
    }
}

/// `(2/N)·Σ x[n]·e^{−j2πf·t[n]}` over `x` sampled from `t0` at `dt`.
pub fn single_bin(x: &[f64], t0: f64, dt: f64, f: f64) -> Complex64 {
    let w = 2.0 * PI * f;
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, &v) in x.iter().enumerate() {
        let ph = -w * (t0 + n as f64 * dt);
        acc += v * Complex64::new(ph.cos(), ph.sin());
    }
    acc * (2.0 / x.len() as f64)
}

/// Sample range of `[t0, t1)` and its length; checks the period condition.
fn window_range(w: &Waveform, f: f64, window: (f64, f64)) -> Result<(usize, usize), SimError> {
    let (t0, t1) = window;
    let err = SimError::Window { f, t0, t1 };
    if !(f > 0.0 && t1 > t0) {
        return Err(err);
    }
    let periods = (t1 - t0) * f;
    if ((t1 - t0) - periods.round() / f).abs() > w.dt || periods.round() < 1.0 {
        return Err(err);
    }
    let k0 = ((t0 - w.t0) / w.dt).round();
    let n = ((t1 - t0) / w.dt).round() as usize;
    if k0 < 0.0 || k0 as usize + n > w.len() || n == 0 {
        return Err(err);
    }
    Ok((k0 as usize, n))
}

/// Single-bin phasors of the `prefix` group over `window`.
pub fn extract_phasor(w: &Waveform, prefix: &str, f: f64, window: (f64, f64)) -> Result<PhasorTriple, SimError> {
    extract_phasor_skipping(w, prefix, f, window, None)
}

/// As [`extract_phasor`]; neighbouring bins that fall on a multiple of
/// `harmonic_base` (the fundamental and its harmonics) are left out of the
/// leakage metric.
pub fn extract_phasor_skipping(
    w: &Waveform,
    prefix: &str,
    f: f64,
    window: (f64, f64),
    harmonic_base: Option<f64>,
) -> Result<PhasorTriple, SimError> {
    let (k0, n) = window_range(w, f, window)?;
    let g = w
        .group(prefix)
        .ok_or_else(|| SimError::Scenario(format!("waveform has no channel group {prefix}")))?;
    let t0 = w.t0 + k0 as f64 * w.dt;
    let df = 1.0 / (n as f64 * w.dt);
    let bins = |ff: f64| g.map(|x| single_bin(&x[k0..k0 + n], t0, w.dt, ff));
    let main = bins(f);
    let energy = |p: &[Complex64; 3]| p.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let skip = |ff: f64| {
        ff <= 0.5 * df
            || harmonic_base.is_some_and(|h| {
                let k = (ff / h).round();
                k >= 1.0 && (ff - k * h).abs() < 0.5 * df
            })
    };
    let mut side = 0.0;
    for ff in [f - df, f + df] {
        if !skip(ff) {
            side += energy(&bins(ff));
        }
    }
    let e = energy(&main);
    Ok(PhasorTriple {
        f_hz: f,
        a: main[0],
        b: main[1],
        c: main[2],
        leakage: if e > 0.0 { side / e } else { f64::INFINITY },
    })
}

fn a_op() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / 3.0)
}

/// Symmetrical components `(pos, neg, zero)` of a phase triple.
pub fn fortescue(p: &PhasorTriple) -> (Complex64, Complex64, Complex64) {
    fortescue_of(p.phases())
}

pub fn fortescue_of(x: [Complex64; 3]) -> (Complex64, Complex64, Complex64) {
    let a = a_op();
    let a2 = a * a;
    (
        (x[0] + a * x[1] + a2 * x[2]) / 3.0,
        (x[0] + a2 * x[1] + a * x[2]) / 3.0,
        (x[0] + x[1] + x[2]) / 3.0,
    )
}

/// Phase quantities from symmetrical components.
pub fn inverse_fortescue(pos: Complex64, neg: Complex64, zero: Complex64) -> [Complex64; 3] {
    let a = a_op();
    let a2 = a * a;
    [zero + pos + neg, zero + a2 * pos + a * neg, zero + a * pos + a2 * neg]
}

/// First time after which the per-cycle RMS of `x` varies by less than
/// `tol` (relative) for `cycles` consecutive fundamental cycles.
pub fn settle_time(x: &[f64], t0: f64, dt: f64, f1: f64, tol: f64, cycles: usize) -> Option<f64> {
    let per = (1.0 / (f1 * dt)).round() as usize;
    if per == 0 {
        return None;
    }
    let rms: Vec<f64> = x
        .chunks_exact(per)
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / per as f64).sqrt())
        .collect();
    let mut run = 0;
    for k in 1..rms.len() {
        let scale = rms[k - 1].max(f64::MIN_POSITIVE);
        if (rms[k] - rms[k - 1]).abs() / scale < tol {
            run += 1;
            if run >= cycles {
                return Some(t0 + (k + 1) as f64 * per as f64 * dt);
            }
        } else {
            run = 0;
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OscillationClass {
    Oscillating,
    Damped,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationVerdict {
    pub class: OscillationClass,
    pub diverged: bool,
    /// Late over early RMS of the non-periodic part.
    pub growth_ratio: f64,
    pub early_rms: f64,
    pub late_rms: f64,
    /// Strongest component of the late window, Hz.
    pub dominant_hz: Option<f64>,
}

impl OscillationVerdict {
    pub fn diverged() -> Self {
        OscillationVerdict {
            class: OscillationClass::Oscillating,
            diverged: true,
            growth_ratio: f64::INFINITY,
            early_rms: f64::NAN,
            late_rms: f64::INFINITY,
            dominant_hz: None,
        }
    }

    pub fn label(&self) -> &'static str {
        match (self.class, self.diverged) {
            (_, true) => "oscillating (diverged)",
            (OscillationClass::Oscillating, _) => "oscillating",
            (OscillationClass::Damped, _) => "damped",
            (OscillationClass::Marginal, _) => "marginal",
        }
    }
}

/// Growth ratio above which a run counts as oscillating, and below whose
/// inverse it counts as damped.
pub const GROWTH_OSCILLATING: f64 = 1.05;
pub const GROWTH_DAMPED: f64 = 0.95;

/// Classify the `prefix` group by the growth of its non-periodic content.
///
/// Subtracting the signal one fundamental period earlier removes the
/// fundamental and all its harmonics, leaving the band that carries
/// sub- and super-synchronous oscillations. Its RMS over `late` is compared
/// with the RMS over `early`. Content below `floor` in both windows is
/// numerical noise and counts as damped.
pub fn oscillation_verdict(
    w: &Waveform,
    prefix: &str,
    f1: f64,
    early: (f64, f64),
    late: (f64, f64),
    floor: f64,
) -> Result<OscillationVerdict, SimError> {
    let g = w
        .group(prefix)
        .ok_or_else(|| SimError::Scenario(format!("waveform has no channel group {prefix}")))?;
    let per = (1.0 / (f1 * w.dt)).round() as usize;
    let idx = |t: f64| ((t - w.t0) / w.dt).round();
    let range = |(a, b): (f64, f64)| -> Result<(usize, usize), SimError> {
        let (i0, i1) = (idx(a), idx(b));
        if i0 < per as f64 || i1 > w.len() as f64 || i1 <= i0 {
            return Err(SimError::Scenario(format!("window [{a}, {b}] outside the waveform")));
        }
        Ok((i0 as usize, i1 as usize))
    };
    let comb = |k: usize, ch: &[f64]| ch[k] - ch[k - per];
    let rms = |(i0, i1): (usize, usize)| {
        let s: f64 = (i0..i1).map(|k| g.iter().map(|ch| comb(k, ch).powi(2)).sum::<f64>()).sum();
        (s / (3 * (i1 - i0)) as f64).sqrt()
    };
    let (re, rl) = (range(early)?, range(late)?);
    let (early_rms, late_rms) = (rms(re), rms(rl));
    let growth_ratio = late_rms / early_rms.max(f64::MIN_POSITIVE);
    let class = if late_rms <= floor && early_rms <= floor {
        OscillationClass::Damped
    } else if growth_ratio > GROWTH_OSCILLATING {
        OscillationClass::Oscillating
    } else if growth_ratio < GROWTH_DAMPED {
        OscillationClass::Damped
    } else {
        OscillationClass::Marginal
    };
    // dominant component of the comb output in the late window
    let (i0, i1) = rl;
    let n = i1 - i0;
    let df = 1.0 / (n as f64 * w.dt);
    let y: Vec<f64> = (i0..i1).map(|k| comb(k, g[0])).collect();
    let t0 = w.t0 + i0 as f64 * w.dt;
    let mut best: Option<(f64, f64)> = None;
    let mut k = 1;
    while k as f64 * df <= 1000.0 {
        let f = k as f64 * df;
        let m = single_bin(&y, t0, w.dt, f).norm();
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((f, m));
        }
        k += 1;
    }
    Ok(OscillationVerdict {
        class,
        diverged: false,
        growth_ratio,
        early_rms,
        late_rms,
        dominant_hz: if late_rms > floor { best.map(|b| b.0) } else { None },
    })
}
