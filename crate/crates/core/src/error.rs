use num_complex::Complex64;
use thiserror::Error;

/// Failure while evaluating a [`FreqExpr`](crate::tfcore::FreqExpr) at a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("pole at s = {s}: {at}{}", fmt_path(path))]
    Pole { s: Complex64, at: String, path: Vec<String> },
    #[error("expression{} is an open circuit at s = {s}", path.as_deref().map(|p| format!(" {p}")).unwrap_or_default())]
    OpenCircuit { s: Complex64, path: Option<String> },
    #[error("indeterminate form ({what}) at s = {s}")]
    Indeterminate { s: Complex64, what: String },
}

fn fmt_path(path: &[String]) -> String {
    if path.is_empty() {
        String::new()
    } else {
        format!(" in {}", path.join(" > "))
    }
}

impl EvalError {
    pub(crate) fn within(mut self, name: &str) -> Self {
        if let EvalError::Pole { path, .. } = &mut self {
            path.insert(0, name.to_string());
        }
        self
    }

    pub(crate) fn at_s(mut self, outer: Complex64) -> Self {
        match &mut self {
            EvalError::Pole { s, .. }
            | EvalError::OpenCircuit { s, .. }
            | EvalError::Indeterminate { s, .. } => *s = outer,
        }
        self
    }

    pub fn s(&self) -> Complex64 {
        match self {
            EvalError::Pole { s, .. }
            | EvalError::OpenCircuit { s, .. }
            | EvalError::Indeterminate { s, .. } => *s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("logarithmic grid needs positive frequencies, got {0}")]
    NonPositiveLog(f64),
    #[error("invalid frequency range [{f_min}, {f_max}]")]
    BadRange { f_min: f64, f_max: f64 },
    #[error("grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid is not strictly increasing ({a} then {b})")]
    NotMonotone { a: f64, b: f64 },
    #[error("non-finite grid frequency {0}")]
    NonFinite(f64),
}

/// A parameter record violates one of its invariants.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{what}: {reason}")]
pub struct ParamError {
    pub what: String,
    pub reason: String,
}

impl ParamError {
    pub fn new(what: impl Into<String>, reason: impl Into<String>) -> Self {
        ParamError { what: what.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("singular nodal matrix at s = {s}")]
    Singular { s: Complex64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Topology(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("loop-gain curve passes within {distance:e} of the critical point at omega = {omega} rad/s")]
    Indeterminate { omega: f64, distance: f64 },
    #[error("Nyquist refinement did not converge; worst segment [{w0}, {w1}] rad/s swings {angle_deg:.1} deg")]
    NotConverged { w0: f64, w1: f64, angle_deg: f64 },
    #[error("loop gain does not close at the sweep ends (|L| = {lo:.3} / {hi:.3} at ±{omega_max:.1} rad/s)")]
    OpenContour { omega_max: f64, lo: f64, hi: f64 },
    #[error("no valid samples on the grid")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("singular network matrix at t = {t} s")]
    Singular { t: f64 },
    #[error("non-finite state at t = {t} s ({node})")]
    NonFinite { t: f64, node: String },
    #[error("analysis window [{t0}, {t1}] is not an integer number of periods at {f} Hz")]
    Window { f: f64, t0: f64, t1: f64 },
    #[error("insufficient settling: leakage {leakage:e} exceeds {limit:e} at {f} Hz")]
    Settling { f: f64, leakage: f64, limit: f64 },
    #[error("injection amplitude {0} outside [0.005, 0.05]")]
    Amplitude(f64),
    #[error("{f} Hz is on the exclusion list")]
    Excluded { f: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("equilibrium did not converge: {0}")]
    Equilibrium(String),
}

/// Crate-level error for pipelines that cross module boundaries.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
