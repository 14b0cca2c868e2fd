//! Loop-gain Nyquist analysis of the WPP–grid interconnection.
//!
//! The loop gain `L = Z_g/Z_w` is sampled on `s = jω` over negative and
//! positive frequencies (sequence impedances have complex coefficients, so
//! the two halves differ). The winding number around `(−1, j0)` is the
//! accumulated angle of `L − (−1)` along increasing `ω`, after midpoint
//! refinement until no step turns more than 10°.
//!
//! `N` counts clockwise encirclements, i.e. the number of closed-loop
//! right-half-plane zeros when the open loop has `P` such poles: `Z = N + P`.
//! `P` is declared by the caller, not computed; the default of zero assumes
//! both impedances are individually stable.
//!
//! The loop gain of a WPP is generally bi-proper: both impedances are
//! inductive or resistive at high frequency and `L` tends to a finite
//! nonzero value. The infinite arc then maps to that single value and the
//! contour is closed with a chord between the two sweep ends, provided they
//! have converged to the same point (or are both small). Otherwise the sweep
//! is extended by decades until they do.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, EvalError, StabilityError};
use crate::plant::OperatingPoint;
use crate::system::SystemSpec;
use crate::tfcore::{FreqExpr, FrequencyGrid};
use crate::wcsim::{build_composite_at, zgpe, FaultSpec};

/// Largest angular step of `L − point` accepted between adjacent samples.
pub const MAX_STEP_DEG: f64 = 10.0;
/// Samples closer than this to the critical point make the count indeterminate.
pub const INDETERMINATE_DISTANCE: f64 = 1e-6;
/// Sweep ends count as closed when both have `|L|` below this.
pub const END_MAGNITUDE: f64 = 0.1;
/// Or when they differ by less than this fraction of their distance to the point.
pub const END_AGREEMENT: f64 = 0.05;
/// Upper limit for automatic extension of the sweep.
pub const F_EXTEND_LIMIT_HZ: f64 = 1e7;
const MAX_DEPTH: u32 = 48;

fn jw(w: f64) -> Complex64 {
    Complex64::new(0.0, w)
}

fn deg(x: f64) -> f64 {
    x * 180.0 / PI
}

#[derive(Debug, Clone)]
pub struct LoopGainSamples {
    /// Signed angular frequencies, ascending.
    pub omegas: Vec<f64>,
    pub values: Vec<Complex64>,
    pub numerator: String,
    pub denominator: String,
    /// Grid points where the loop gain could not be evaluated.
    pub skipped: Vec<(f64, String)>,
    num: FreqExpr,
    den: FreqExpr,
}

impl LoopGainSamples {
    pub fn eval(&self, omega: f64) -> Result<Complex64, EvalError> {
        let s = jw(omega);
        let d = self.den.eval(s)?;
        if d == Complex64::new(0.0, 0.0) {
            return Err(EvalError::Pole { s, at: "zero loop-gain denominator".into(), path: vec![] });
        }
        let l = self.num.eval(s)? / d;
        if !(l.re.is_finite() && l.im.is_finite()) {
            return Err(EvalError::Pole { s, at: "non-finite loop gain".into(), path: vec![] });
        }
        Ok(l)
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

fn label(e: &FreqExpr, fallback: &str) -> String {
    e.name().map(str::to_string).unwrap_or_else(|| fallback.to_string())
}

/// Sample `Z_ge/Z_w` at `s = jω` for every grid frequency and its mirror.
pub fn loop_gain(z_ge: &FreqExpr, z_w: &FreqExpr, grid: &FrequencyGrid) -> LoopGainSamples {
    let mut samples = LoopGainSamples {
        omegas: Vec::new(),
        values: Vec::new(),
        numerator: label(z_ge, "Z_g"),
        denominator: label(z_w, "Z_w"),
        skipped: Vec::new(),
        num: z_ge.clone(),
        den: z_w.clone(),
    };
    let mut omegas: Vec<f64> = grid.freqs_hz().iter().filter(|f| **f > 0.0).map(|f| 2.0 * PI * f).collect();
    let positive = omegas.clone();
    omegas.reverse();
    let mut signed: Vec<f64> = omegas.into_iter().map(|w| -w).collect();
    if grid.freqs_hz().first() == Some(&0.0) {
        signed.push(0.0);
    }
    signed.extend(positive);
    let evaluated: Vec<_> = signed.par_iter().map(|&w| samples.eval(w)).collect();
    for (w, r) in signed.into_iter().zip(evaluated) {
        match r {
            Ok(l) => {
                samples.omegas.push(w);
                samples.values.push(l);
            }
            Err(e) => samples.skipped.push((w, e.to_string())),
        }
    }
    samples
}

/// Contour closure applied at the sweep ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Closure {
    /// Both ends have `|L|` below [`END_MAGNITUDE`].
    SmallEnds,
    /// Ends converged to the same finite value (bi-proper loop gain).
    ConvergedEnds,
}

#[derive(Debug, Clone, Serialize)]
pub struct Winding {
    /// Clockwise encirclements of the point.
    pub n: i64,
    /// Distance of the accumulated turns from the nearest integer.
    pub residual: f64,
    pub closure: Closure,
    /// Largest `|ω|` used, rad/s (after any extension).
    pub omega_max: f64,
    /// Refined curve, ascending in `ω`.
    pub omegas: Vec<f64>,
    pub values: Vec<Complex64>,
}

#[derive(Clone, Copy)]
struct Pt {
    w: f64,
    l: Complex64,
}

fn step_angle(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    ((b - p) / (a - p)).arg()
}

struct Walker<'a> {
    s: &'a LoopGainSamples,
    p: Complex64,
}

impl Walker<'_> {
    fn eval_near(&self, a: f64, b: f64) -> Result<Pt, StabilityError> {
        let mut last = None;
        for frac in [0.5, 0.49, 0.51, 0.45, 0.55] {
            let w = a + frac * (b - a);
            match self.s.eval(w) {
                Ok(l) => return self.check(Pt { w, l }),
                Err(e) => last = Some(e),
            }
        }
        Err(StabilityError::Eval(last.expect("at least one attempt")))
    }

    fn check(&self, pt: Pt) -> Result<Pt, StabilityError> {
        let d = (pt.l - self.p).norm();
        if d < INDETERMINATE_DISTANCE {
            return Err(StabilityError::Indeterminate { omega: pt.w, distance: d });
        }
        Ok(pt)
    }

    /// Angle swept from `a` to `b`, appending refined points after `a`.
    fn segment(&self, a: Pt, b: Pt, out: &mut Vec<Pt>) -> Result<f64, StabilityError> {
        let limit = MAX_STEP_DEG.to_radians();
        let mut stack = vec![(b, 0u32)];
        let mut left = a;
        let mut total = 0.0;
        while let Some(&(right, depth)) = stack.last() {
            let d = step_angle(left.l, right.l, self.p);
            if d.abs() <= limit {
                total += d;
                out.push(right);
                left = right;
                stack.pop();
                continue;
            }
            if depth >= MAX_DEPTH || (right.w - left.w).abs() <= 1e-12 * right.w.abs().max(1e-9) {
                return Err(StabilityError::NotConverged {
                    w0: left.w,
                    w1: right.w,
                    angle_deg: deg(d.abs()),
                });
            }
            let mid = self.eval_near(left.w, right.w)?;
            stack.push((mid, depth + 1));
        }
        Ok(total)
    }
}

fn ends_closed(lo: Complex64, hi: Complex64, p: Complex64) -> Option<Closure> {
    if lo.norm() < END_MAGNITUDE && hi.norm() < END_MAGNITUDE {
        return Some(Closure::SmallEnds);
    }
    let reach = (lo - p).norm().min((hi - p).norm());
    if (hi - lo).norm() < END_AGREEMENT * reach {
        return Some(Closure::ConvergedEnds);
    }
    None
}

/// Signed count of clockwise encirclements of `point` by the sampled curve.
pub fn encirclements(samples: &LoopGainSamples, point: Complex64) -> Result<Winding, StabilityError> {
    if samples.omegas.len() < 2 {
        return Err(StabilityError::Empty);
    }
    let walker = Walker { s: samples, p: point };
    let mut pts: Vec<Pt> = samples
        .omegas
        .iter()
        .zip(&samples.values)
        .map(|(&w, &l)| walker.check(Pt { w, l }))
        .collect::<Result<_, _>>()?;

    // extend the sweep until the ends close
    let per_decade = 20;
    let mut closure = ends_closed(pts[0].l, pts[pts.len() - 1].l, point);
    while closure.is_none() {
        let w_hi = pts[pts.len() - 1].w.max(-pts[0].w);
        if w_hi >= 2.0 * PI * F_EXTEND_LIMIT_HZ * (1.0 - 1e-9) {
            return Err(StabilityError::OpenContour {
                omega_max: w_hi,
                lo: pts[0].l.norm(),
                hi: pts[pts.len() - 1].l.norm(),
            });
        }
        let w_next = (w_hi * 10.0).min(2.0 * PI * F_EXTEND_LIMIT_HZ);
        let ratio = (w_next / w_hi).powf(1.0 / per_decade as f64);
        let mut w = w_hi;
        let mut low = Vec::new();
        for _ in 0..per_decade {
            w *= ratio;
            let w = w.min(w_next);
            pts.push(walker.check(Pt { w, l: samples.eval(w)? })?);
            low.push(walker.check(Pt { w: -w, l: samples.eval(-w)? })?);
        }
        low.reverse();
        low.extend(pts);
        pts = low;
        closure = ends_closed(pts[0].l, pts[pts.len() - 1].l, point);
    }
    let omega_max = pts[pts.len() - 1].w.max(-pts[0].w);
    if omega_max > samples.omegas[samples.omegas.len() - 1] * 1.0000001 {
        log::info!("Nyquist sweep extended to {:.3e} Hz to close the contour", omega_max / (2.0 * PI));
    }

    let mut refined = vec![pts[0]];
    let mut total = 0.0;
    for pair in pts.windows(2) {
        total += walker.segment(pair[0], pair[1], &mut refined)?;
    }
    let last = refined[refined.len() - 1].l;
    total += step_angle(last, refined[0].l, point);
    let turns = total / (2.0 * PI);
    let rounded = turns.round();
    Ok(Winding {
        n: -(rounded as i64),
        residual: (turns - rounded).abs(),
        closure: closure.expect("loop exits with a closure"),
        omega_max,
        omegas: refined.iter().map(|p| p.w).collect(),
        values: refined.iter().map(|p| p.l).collect(),
    })
}

/// Crossing of `|L| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub omega: f64,
    pub f_hz: f64,
    /// `180° − |∠L|`, the angular distance of the crossing from `(−1, j0)`.
    pub phase_margin_deg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityVerdict {
    pub n: i64,
    pub declared_p: i64,
    /// Closed-loop right-half-plane zeros, `N + P`.
    pub z: i64,
    pub stable: bool,
    pub crossings: Vec<Crossing>,
    /// Smallest `|1 + L|` on the refined curve and where it occurs.
    pub min_distance: f64,
    pub omega_at_min: f64,
    pub residual: f64,
    pub closure: Closure,
    pub omega_max: f64,
    pub skipped: usize,
    pub assumption: &'static str,
}

const ASSUMPTION: &str = "open-loop right-half-plane pole count is declared, not computed";

fn bisect<F: Fn(f64) -> Result<f64, EvalError>>(mut a: f64, mut b: f64, f: F, tol: f64) -> Result<f64, EvalError> {
    let mut fa = f(a)?;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

fn unit_crossings(samples: &LoopGainSamples, w: &Winding) -> Vec<Crossing> {
    let mut out = Vec::new();
    for k in 1..w.omegas.len() {
        let (a, b) = (w.values[k - 1].norm() - 1.0, w.values[k].norm() - 1.0);
        if (a < 0.0) != (b < 0.0) {
            let (w0, w1) = (w.omegas[k - 1], w.omegas[k]);
            let tol = 1e-9 * w0.abs().max(w1.abs()).max(1.0);
            let Ok(wc) = bisect(w0, w1, |x| Ok(samples.eval(x)?.norm() - 1.0), tol) else { continue };
            let Ok(l) = samples.eval(wc) else { continue };
            out.push(Crossing {
                omega: wc,
                f_hz: wc / (2.0 * PI),
                phase_margin_deg: 180.0 - deg(l.arg()).abs(),
            });
        }
    }
    out
}

/// Nyquist verdict for the interconnection of `Z_ge` and `Z_w`.
pub fn assess(
    z_ge: &FreqExpr,
    z_w: &FreqExpr,
    grid: &FrequencyGrid,
    declared_p: i64,
) -> Result<StabilityVerdict, StabilityError> {
    let samples = loop_gain(z_ge, z_w, grid);
    verdict_from(&samples, declared_p)
}

pub fn verdict_from(samples: &LoopGainSamples, declared_p: i64) -> Result<StabilityVerdict, StabilityError> {
    let w = encirclements(samples, Complex64::new(-1.0, 0.0))?;
    let crossings = unit_crossings(samples, &w);
    let (k_min, min_distance) = w
        .values
        .iter()
        .map(|l| (l + 1.0).norm())
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, d)| if d < acc.1 { (k, d) } else { acc });
    let z = w.n + declared_p;
    Ok(StabilityVerdict {
        n: w.n,
        declared_p,
        z,
        stable: z == 0,
        crossings,
        min_distance,
        omega_at_min: w.omegas[k_min],
        residual: w.residual,
        closure: w.closure,
        omega_max: w.omega_max,
        skipped: samples.skipped.len(),
        assumption: ASSUMPTION,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BodeRow {
    pub f_hz: f64,
    /// `None` where evaluation failed (pole); such rows carry NaN fields.
    pub value: Option<Complex64>,
    pub mag: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

/// Magnitude and unwrapped phase of `e` on the grid's frequencies.
pub fn bode_table(e: &FreqExpr, grid: &FrequencyGrid) -> Vec<BodeRow> {
    let values: Vec<_> = grid.freqs_hz().par_iter().map(|&f| e.eval(jw(2.0 * PI * f)).ok()).collect();
    let mut prev: Option<f64> = None;
    grid.freqs_hz()
        .iter()
        .zip(values)
        .map(|(&f_hz, v)| match v {
            Some(z) => {
                let mut ph = deg(z.arg());
                if let Some(p) = prev {
                    ph += 360.0 * ((p - ph) / 360.0).round();
                }
                prev = Some(ph);
                BodeRow { f_hz, value: Some(z), mag: z.norm(), mag_db: 20.0 * z.norm().log10(), phase_deg: ph }
            }
            None => BodeRow { f_hz, value: None, mag: f64::NAN, mag_db: f64::NAN, phase_deg: f64::NAN },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Intersection {
    pub f_hz: f64,
    pub mag: f64,
    /// `∠Z_g − ∠Z_w` with each angle in (−180°, 180°].
    pub phase_diff_deg: f64,
    /// `180° − |Δ∠|`; negative means the pair is past the stability boundary.
    pub margin_deg: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IntersectionReport {
    pub rows: Vec<Intersection>,
}

impl IntersectionReport {
    pub fn in_band(&self, f_lo: f64, f_hi: f64) -> impl Iterator<Item = &Intersection> {
        self.rows.iter().filter(move |r| r.f_hz >= f_lo && r.f_hz <= f_hi)
    }
}

/// Frequencies where `|Z_g|` and `|Z_w|` cross, located to 1e-3 Hz.
pub fn intersections(z_g: &FreqExpr, z_w: &FreqExpr, grid: &FrequencyGrid) -> IntersectionReport {
    let gap = |f: f64| -> Result<f64, EvalError> {
        let s = jw(2.0 * PI * f);
        Ok(z_g.eval(s)?.norm() - z_w.eval(s)?.norm())
    };
    let freqs = grid.freqs_hz();
    let gaps: Vec<Option<f64>> = freqs.par_iter().map(|&f| gap(f).ok()).collect();
    let mut rows = Vec::new();
    for k in 1..freqs.len() {
        let (Some(a), Some(b)) = (gaps[k - 1], gaps[k]) else { continue };
        if a == 0.0 {
            rows.push(freqs[k - 1]);
        } else if b != 0.0 && (a < 0.0) != (b < 0.0) {
            if let Ok(f) = bisect(freqs[k - 1], freqs[k], gap, 1e-3) {
                rows.push(f);
            }
        }
    }
    if let Some(Some(g)) = gaps.last() {
        if *g == 0.0 {
            rows.push(freqs[freqs.len() - 1]);
        }
    }
    rows.dedup();
    let rows = rows
        .into_iter()
        .filter_map(|f| {
            let s = jw(2.0 * PI * f);
            let (g, w) = (z_g.eval(s).ok()?, z_w.eval(s).ok()?);
            let diff = deg(g.arg()) - deg(w.arg());
            Some(Intersection { f_hz: f, mag: g.norm(), phase_diff_deg: diff, margin_deg: 180.0 - diff.abs() })
        })
        .collect();
    IntersectionReport { rows }
}

/// One side of the SSSI comparison.
#[derive(Debug, Clone, Serialize)]
pub struct SssiCase {
    pub verdict: StabilityVerdict,
    pub intersections: IntersectionReport,
    pub grid_bode: Vec<BodeRow>,
    #[serde(skip)]
    pub z_g: FreqExpr,
    #[serde(skip)]
    pub samples: LoopGainSamples,
    #[serde(skip)]
    pub winding: Winding,
}

#[derive(Debug, Clone, Serialize)]
pub struct SssiComparison {
    pub operating_point: OperatingPoint,
    pub with: SssiCase,
    pub without: SssiCase,
    pub wpp_bode: Vec<BodeRow>,
    /// `|Z_gpe| ≤ |Z_g1 + Z_g2|` at every point of the positive grid.
    pub magnitude_reduced: bool,
    /// Largest `|Z_gpe|/|Z_g1 + Z_g2|` on the grid.
    pub max_magnitude_ratio: f64,
    /// Largest `|∠Z_gpe − ∠(Z_g1 + Z_g2)|` on the grid, degrees.
    pub max_phase_deviation_deg: f64,
    #[serde(skip)]
    pub z_wp: FreqExpr,
}

fn sssi_case(z_g: FreqExpr, z_w: &FreqExpr, grid: &FrequencyGrid) -> Result<SssiCase, StabilityError> {
    let samples = loop_gain(&z_g, z_w, grid);
    let winding = encirclements(&samples, Complex64::new(-1.0, 0.0))?;
    let verdict = verdict_from(&samples, 0)?;
    Ok(SssiCase {
        verdict,
        intersections: intersections(&z_g, z_w, grid),
        grid_bode: bode_table(&z_g, grid),
        z_g,
        samples,
        winding,
    })
}

/// Compare the verdict with the balanced grid impedance `Z_g1 + Z_g2`
/// against the one with the fault interconnection `Z_gpe`, using the same
/// WPP impedance for both.
pub fn compare_sssi(system: &SystemSpec, fault: &FaultSpec, grid: &FrequencyGrid) -> Result<SssiComparison, Error> {
    let op = system.resolve_operating_point(Some(fault))?;
    compare_sssi_at(system, fault, grid, &op)
}

pub fn compare_sssi_at(
    system: &SystemSpec,
    fault: &FaultSpec,
    grid: &FrequencyGrid,
    op: &OperatingPoint,
) -> Result<SssiComparison, Error> {
    let model = build_composite_at(system, fault, op)?;
    let with_g = zgpe(&model)?;
    let without_g = model.z_gp().named("Z_gp");
    let with = sssi_case(with_g.clone(), &model.z_wp, grid)?;
    let without = sssi_case(without_g.clone(), &model.z_wp, grid)?;

    let mut max_ratio: f64 = 0.0;
    let mut max_dev: f64 = 0.0;
    for &f in grid.freqs_hz().iter().filter(|f| **f > 0.0) {
        let s = jw(2.0 * PI * f);
        let (Ok(a), Ok(b)) = (with_g.eval(s), without_g.eval(s)) else { continue };
        max_ratio = max_ratio.max(a.norm() / b.norm());
        max_dev = max_dev.max(deg((a / b).arg()).abs());
    }
    Ok(SssiComparison {
        operating_point: *op,
        wpp_bode: bode_table(&model.z_wp, grid),
        magnitude_reduced: max_ratio <= 1.0,
        max_magnitude_ratio: max_ratio,
        max_phase_deviation_deg: max_dev,
        with,
        without,
        z_wp: model.z_wp,
    })
}
