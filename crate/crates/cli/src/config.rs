//! Configuration file: sections of `key = value` pairs whose names carry
//! their unit (`_pu`, `_hz`, `_h`, `_f`, `_ohm`, `_v`, `_a`, `_va`, `_s`,
//! `_rad_s`). Gains and ratios have no suffix. Every omitted key takes its
//! default, and the fully resolved file can be echoed back.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use seqstab::system::{GridSpec, ScanSettings, SourceSpec};
use seqstab::{
    BaseSet, ConverterParams, FaultBranch, FaultKind, FaultSpec, LineParams, OperatingPointMode, SystemSpec,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("unit-suffix mismatch: `{given}` should be `{expected}`")]
    UnitSuffix { given: String, expected: String },
    #[error("`{key}`: expected {expected}")]
    Type { key: String, expected: &'static str },
    #[error("out of range: {0}")]
    Range(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bases {
    pub s_base_va: f64,
    pub v_grid_v: f64,
    pub v_collector_v: f64,
    pub v_unit_v: f64,
    pub s_unit_va: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lines {
    pub r_l1_pu: f64,
    pub x_l1_pu: f64,
    /// Zero-sequence impedance over positive-sequence impedance.
    pub k0_l1: f64,
    pub r_l2_pu: f64,
    pub x_l2_pu: f64,
    pub k0_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Transformers {
    /// T1 on the unit base.
    pub x_t1_pu: f64,
    pub x_t2_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Converter {
    pub k_pc: f64,
    pub k_ic: f64,
    pub k_pp: f64,
    pub k_ip: f64,
    pub f_notch_hz: f64,
    pub zeta_n: f64,
    pub l_f_h: f64,
    pub c_f_f: f64,
    pub r_cf_ohm: f64,
    pub i_ar_a: f64,
    pub i_qr_a: f64,
    /// Current cross-coupling feedforward.
    pub k_ff: f64,
    /// Voltage feedforward.
    pub k_d: f64,
    pub v_dc_v: f64,
    pub f1_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Plant {
    pub n_units: usize,
    /// Multiplier applied when `n_units · s_unit_va` differs from the system base.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rebase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Source {
    pub r_pu: f64,
    pub x_pu: f64,
    pub r0_pu: f64,
    pub x0_pu: f64,
    pub v_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fault {
    /// `slgf` or `virtual-load`.
    pub kind: String,
    pub alpha: f64,
    pub r_f_pu: f64,
    pub x_f_pu: f64,
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatingPoint {
    /// `faulted`, `prefault` or `explicit`.
    pub mode: String,
    /// Used by `explicit` only; peak phase volts and amplitude-invariant amperes.
    pub v1_v: f64,
    pub i_d0_a: f64,
    pub i_q0_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scan {
    pub dt_s: f64,
    pub amplitude: f64,
    pub settle_s: f64,
    pub transient_s: f64,
    pub window_s: f64,
    pub leakage_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Replication {
    pub t_event_s: f64,
    pub t_end_s: f64,
    /// Fixed phase-A sag depth; omitted means matched to the fault.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sag_depth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Variants {
    pub xt2_in_z01: bool,
    /// Couple the sequence networks through the fault.
    pub sssi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub bases: Bases,
    pub lines: Lines,
    pub transformers: Transformers,
    pub converter: Converter,
    pub plant: Plant,
    pub source: Source,
    pub fault: Fault,
    pub operating_point: OperatingPoint,
    pub grid: Grid,
    pub scan: Scan,
    pub replication: Replication,
    pub variants: Variants,
}

/// Keys that may be absent from the echo.
const OPTIONAL_KEYS: &[(&str, &str)] = &[("plant", "rebase"), ("replication", "sag_depth")];

const UNIT_SUFFIXES: &[&str] = &["_rad_s", "_ohm", "_va", "_pu", "_hz", "_s", "_h", "_f", "_v", "_a"];

fn unit_stem(key: &str) -> Option<&str> {
    UNIT_SUFFIXES.iter().find_map(|s| key.strip_suffix(s))
}

impl Default for Config {
    fn default() -> Self {
        Config::from_system(&SystemSpec::default())
    }
}

macro_rules! section_default {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                Config::from_system(&SystemSpec::default()).into()
            }
        }
    )*};
}

macro_rules! section_from {
    ($($t:ty => $f:ident),*) => {$(
        impl From<Config> for $t {
            fn from(c: Config) -> Self {
                c.$f
            }
        }
    )*};
}

section_from!(Bases => bases, Lines => lines, Transformers => transformers, Converter => converter,
    Plant => plant, Source => source, Fault => fault, OperatingPoint => operating_point, Grid => grid,
    Scan => scan, Replication => replication, Variants => variants);
section_default!(Bases, Lines, Transformers, Converter, Plant, Source, Fault, OperatingPoint, Grid, Scan,
    Replication, Variants);

impl Config {
    pub fn from_system(s: &SystemSpec) -> Config {
        let p = &s.converter;
        let (r_f_pu, x_f_pu, open) = match s.fault.branch {
            FaultBranch::Resistive(r) => (r, 0.0, false),
            FaultBranch::SeriesRl { r_pu, x_pu } => (r_pu, x_pu, false),
            _ => (0.0, 0.0, true),
        };
        let (mode, v1_v, i_d0_a, i_q0_a) = match s.operating_point {
            OperatingPointMode::Faulted => ("faulted", 0.0, p.i_ar, p.i_qr),
            OperatingPointMode::Prefault => ("prefault", 0.0, p.i_ar, p.i_qr),
            OperatingPointMode::Explicit { v1_v, i_d0_a, i_q0_a } => ("explicit", v1_v, i_d0_a, i_q0_a),
        };
        Config {
            bases: Bases {
                s_base_va: s.bases.s_base_va,
                v_grid_v: s.bases.v_grid_v,
                v_collector_v: s.bases.v_collector_v,
                v_unit_v: s.bases.v_unit_v,
                s_unit_va: s.bases.s_unit_va,
            },
            lines: Lines {
                r_l1_pu: s.l1.r_pu,
                x_l1_pu: s.l1.x_pu,
                k0_l1: s.l1.zero_seq_multiplier,
                r_l2_pu: s.l2.r_pu,
                x_l2_pu: s.l2.x_pu,
                k0_l2: s.l2.zero_seq_multiplier,
            },
            transformers: Transformers { x_t1_pu: p.x_t1_pu, x_t2_pu: s.t2.x_pu },
            converter: Converter {
                k_pc: p.k_pc,
                k_ic: p.k_ic,
                k_pp: p.k_pp,
                k_ip: p.k_ip,
                f_notch_hz: round_hz(p.omega_n),
                zeta_n: p.zeta_n,
                l_f_h: p.l_f,
                c_f_f: p.c_f,
                r_cf_ohm: p.r_cf,
                i_ar_a: p.i_ar,
                i_qr_a: p.i_qr,
                k_ff: p.k_f,
                k_d: p.k_d,
                v_dc_v: p.v_dc,
                f1_hz: round_hz(p.omega1),
            },
            plant: Plant { n_units: s.n_units, rebase: s.rebase },
            source: Source {
                r_pu: s.source.r_pu,
                x_pu: s.source.x_pu,
                r0_pu: s.source.r0_pu,
                x0_pu: s.source.x0_pu,
                v_pu: s.source.v_pu,
            },
            fault: Fault {
                kind: match s.fault.kind {
                    FaultKind::Slgf => "slgf",
                    FaultKind::VirtualLoad => "virtual-load",
                }
                .into(),
                alpha: s.fault.alpha,
                r_f_pu,
                x_f_pu,
                open,
            },
            operating_point: OperatingPoint { mode: mode.into(), v1_v, i_d0_a, i_q0_a },
            grid: Grid { f_min_hz: s.grid.f_min_hz, f_max_hz: s.grid.f_max_hz, points: s.grid.points },
            scan: Scan {
                dt_s: s.scan.dt_s,
                amplitude: s.scan.amplitude,
                settle_s: s.scan.settle_s,
                transient_s: s.scan.transient_s,
                window_s: s.scan.window_s,
                leakage_limit: s.scan.leakage_limit,
            },
            replication: Replication { t_event_s: 0.2, t_end_s: 3.2, sag_depth: None },
            variants: Variants { xt2_in_z01: s.xt2_in_z01, sssi: true },
        }
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut given: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let known = toml::Table::try_from(Config::default()).expect("defaults serialize");
        for (section, body) in given.iter_mut() {
            let Some(toml::Value::Table(defaults)) = known.get(section) else {
                return Err(ConfigError::UnknownKey(section.clone()));
            };
            let toml::Value::Table(body) = body else {
                return Err(ConfigError::Type { key: section.clone(), expected: "a section" });
            };
            for (key, value) in body.iter_mut() {
                let full = format!("{section}.{key}");
                let default = match defaults.get(key) {
                    Some(d) => d,
                    None if OPTIONAL_KEYS.contains(&(section.as_str(), key.as_str())) => &toml::Value::Float(0.0),
                    None => return Err(unknown_key(section, key, defaults)),
                };
                // integers are accepted where a float is expected
                if let (toml::Value::Float(_), toml::Value::Integer(i)) = (default, &*value) {
                    *value = toml::Value::Float(*i as f64);
                }
                if std::mem::discriminant(default) != std::mem::discriminant(value) {
                    let expected = match default {
                        toml::Value::Float(_) => "a number",
                        toml::Value::Integer(_) => "an integer",
                        toml::Value::Boolean(_) => "true or false",
                        _ => "a string",
                    };
                    return Err(ConfigError::Type { key: full, expected });
                }
            }
        }
        let cfg: Config = toml::Value::Table(given).try_into().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        cfg.system()?;
        Ok(cfg)
    }

    /// The fully resolved configuration as a config file.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn system(&self) -> Result<SystemSpec, ConfigError> {
        let range = |e: seqstab::ParamError| ConfigError::Range(e.to_string());
        let c = &self.converter;
        let mut s = SystemSpec::default();
        s.bases = BaseSet {
            s_base_va: self.bases.s_base_va,
            v_grid_v: self.bases.v_grid_v,
            v_collector_v: self.bases.v_collector_v,
            v_unit_v: self.bases.v_unit_v,
            s_unit_va: self.bases.s_unit_va,
        };
        let l = &self.lines;
        s.l1 = LineParams { r_pu: l.r_l1_pu, x_pu: l.x_l1_pu, zero_seq_multiplier: l.k0_l1 };
        s.l2 = LineParams { r_pu: l.r_l2_pu, x_pu: l.x_l2_pu, zero_seq_multiplier: l.k0_l2 };
        s.t2.x_pu = self.transformers.x_t2_pu;
        s.converter = ConverterParams {
            k_pc: c.k_pc,
            k_ic: c.k_ic,
            k_pp: c.k_pp,
            k_ip: c.k_ip,
            omega_n: 2.0 * PI * c.f_notch_hz,
            zeta_n: c.zeta_n,
            l_f: c.l_f_h,
            c_f: c.c_f_f,
            r_cf: c.r_cf_ohm,
            i_ar: c.i_ar_a,
            i_qr: c.i_qr_a,
            k_f: c.k_ff,
            k_d: c.k_d,
            v_dc: c.v_dc_v,
            x_t1_pu: self.transformers.x_t1_pu,
            omega1: 2.0 * PI * c.f1_hz,
        };
        s.n_units = self.plant.n_units;
        s.rebase = self.plant.rebase;
        let src = &self.source;
        s.source = SourceSpec { r_pu: src.r_pu, x_pu: src.x_pu, r0_pu: src.r0_pu, x0_pu: src.x0_pu, v_pu: src.v_pu };
        let f = &self.fault;
        let kind = match f.kind.as_str() {
            "slgf" => FaultKind::Slgf,
            "virtual-load" => FaultKind::VirtualLoad,
            other => {
                return Err(ConfigError::Range(format!("fault.kind = `{other}` (expected slgf or virtual-load)")))
            }
        };
        let branch = if f.open {
            FaultBranch::Open
        } else if f.x_f_pu == 0.0 {
            FaultBranch::Resistive(f.r_f_pu)
        } else {
            FaultBranch::SeriesRl { r_pu: f.r_f_pu, x_pu: f.x_f_pu }
        };
        s.fault = FaultSpec { kind, alpha: f.alpha, branch };
        let op = &self.operating_point;
        s.operating_point = match op.mode.as_str() {
            "faulted" => OperatingPointMode::Faulted,
            "prefault" => OperatingPointMode::Prefault,
            "explicit" => OperatingPointMode::Explicit { v1_v: op.v1_v, i_d0_a: op.i_d0_a, i_q0_a: op.i_q0_a },
            other => {
                return Err(ConfigError::Range(format!(
                    "operating_point.mode = `{other}` (expected faulted, prefault or explicit)"
                )))
            }
        };
        s.grid = GridSpec { f_min_hz: self.grid.f_min_hz, f_max_hz: self.grid.f_max_hz, points: self.grid.points };
        s.grid.log().map_err(|e| ConfigError::Range(format!("grid: {e}")))?;
        let sc = &self.scan;
        s.scan = ScanSettings {
            dt_s: sc.dt_s,
            amplitude: sc.amplitude,
            settle_s: sc.settle_s,
            transient_s: sc.transient_s,
            window_s: sc.window_s,
            leakage_limit: sc.leakage_limit,
        };
        s.xt2_in_z01 = self.variants.xt2_in_z01;
        s.validate().map_err(range)?;
        let r = &self.replication;
        if !(r.t_event_s > 0.0 && r.t_end_s > r.t_event_s) {
            return Err(ConfigError::Range("replication: need 0 < t_event_s < t_end_s".into()));
        }
        if let Some(d) = r.sag_depth {
            if !(0.0..=1.0).contains(&d) {
                return Err(ConfigError::Range(format!("replication: sag_depth = {d} outside [0, 1]")));
            }
        }
        Ok(s)
    }
}

fn round_hz(omega: f64) -> f64 {
    let f = omega / (2.0 * PI);
    let r = (f * 1e9).round() / 1e9;
    if (r - f).abs() <= 1e-12 * f {
        r
    } else {
        f
    }
}

fn unknown_key(section: &str, key: &str, defaults: &toml::Table) -> ConfigError {
    let candidates = defaults.keys().map(String::as_str).chain(
        OPTIONAL_KEYS.iter().filter(|(s, _)| *s == section).map(|(_, k)| *k),
    );
    for k in candidates {
        let Some(stem) = unit_stem(k) else { continue };
        // the given key may carry an unrecognised unit such as `_mh`
        if key == stem || unit_stem(key) == Some(stem) || key.rsplit_once('_').map(|(a, _)| a) == Some(stem) {
            return ConfigError::UnitSuffix { given: format!("{section}.{key}"), expected: format!("{section}.{k}") };
        }
    }
    ConfigError::UnknownKey(format!("{section}.{key}"))
}
