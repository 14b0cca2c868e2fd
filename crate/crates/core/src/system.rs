//! Whole-system description: network, converter, fault and analysis settings.

use serde::{Deserialize, Serialize};

use crate::equilibrium::phasor_equilibrium;
use crate::error::{Error, GridError, ParamError};
use crate::plant::{
    aggregate_wpp, unit_wpp_impedance, BaseSet, Connection, ConverterParams, LineParams,
    OperatingPoint, Sequence, TransformerParams,
};
use crate::tfcore::{FreqExpr, FrequencyGrid};
use crate::wcsim::FaultSpec;

/// Thevenin impedance of the 220 kV source; zero for an ideal source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub r_pu: f64,
    pub x_pu: f64,
    pub r0_pu: f64,
    pub x0_pu: f64,
    /// Positive-sequence EMF magnitude.
    pub v_pu: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec { r_pu: 0.0, x_pu: 0.0, r0_pu: 0.0, x0_pu: 0.0, v_pu: 1.0 }
    }
}

impl SourceSpec {
    pub fn expr(&self, omega1: f64) -> FreqExpr {
        FreqExpr::resistor(self.r_pu).series(&FreqExpr::inductor(self.x_pu / omega1))
    }

    pub fn zero_expr(&self, omega1: f64) -> FreqExpr {
        FreqExpr::resistor(self.r0_pu).series(&FreqExpr::inductor(self.x0_pu / omega1))
    }

    pub fn is_ideal(&self) -> bool {
        self.r_pu == 0.0 && self.x_pu == 0.0 && self.r0_pu == 0.0 && self.x0_pu == 0.0
    }
}

/// Where the converter impedances are linearized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OperatingPointMode {
    /// Fundamental-frequency equilibrium with the fault applied.
    Faulted,
    /// Equilibrium of the healthy, balanced system.
    Prefault,
    /// Explicit terminal voltage (peak phase volts) and dq currents.
    Explicit { v1_v: f64, i_d0_a: f64, i_q0_a: f64 },
}

/// Signed logarithmic analysis grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Points per half (positive and negative frequencies each).
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { f_min_hz: 0.1, f_max_hz: 2000.0, points: 400 }
    }
}

impl GridSpec {
    pub fn log(&self) -> Result<FrequencyGrid, GridError> {
        FrequencyGrid::log(self.f_min_hz, self.f_max_hz, self.points)
    }

    pub fn symmetric(&self) -> Result<FrequencyGrid, GridError> {
        self.log()?.symmetric()
    }
}

/// Time-domain scanner settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub dt_s: f64,
    /// Perturbation amplitude as a fraction of nominal.
    pub amplitude: f64,
    /// Time allowed for the unperturbed system to reach steady state.
    pub settle_s: f64,
    /// Time allowed after the perturbation starts before measuring.
    pub transient_s: f64,
    /// Measurement window; its inverse is the frequency resolution.
    pub window_s: f64,
    /// Acceptable ratio of neighbouring-bin to bin energy.
    pub leakage_limit: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            dt_s: 20e-6,
            amplitude: 0.02,
            settle_s: 1.0,
            transient_s: 1.0,
            window_s: 1.0,
            leakage_limit: 1e-2,
        }
    }
}

impl ScanSettings {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.dt_s > 0.0 && self.dt_s < 1e-3) {
            return Err(ParamError::new("ScanSettings", "dt must be in (0, 1 ms)"));
        }
        if !(0.005..=0.05).contains(&self.amplitude) {
            return Err(ParamError::new("ScanSettings", "amplitude must be within [0.005, 0.05]"));
        }
        if !(self.settle_s >= 0.0 && self.transient_s >= 0.0 && self.window_s > 0.0) {
            return Err(ParamError::new("ScanSettings", "times must be non-negative, window positive"));
        }
        if !(self.leakage_limit > 0.0) {
            return Err(ParamError::new("ScanSettings", "leakage limit must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub bases: BaseSet,
    pub l1: LineParams,
    pub l2: LineParams,
    pub t2: TransformerParams,
    pub converter: ConverterParams,
    pub n_units: usize,
    pub rebase: Option<f64>,
    pub source: SourceSpec,
    pub fault: FaultSpec,
    /// Include the grounded-star T2 path in `Z_01`.
    pub xt2_in_z01: bool,
    pub operating_point: OperatingPointMode,
    pub grid: GridSpec,
    pub scan: ScanSettings,
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec {
            bases: BaseSet::default(),
            l1: LineParams::default_l1(),
            l2: LineParams::default_l2(),
            t2: TransformerParams { x_pu: 0.03, connection: Connection::YNd },
            converter: ConverterParams::default(),
            n_units: 150,
            rebase: None,
            source: SourceSpec::default(),
            fault: FaultSpec::default(),
            xt2_in_z01: true,
            operating_point: OperatingPointMode::Faulted,
            grid: GridSpec::default(),
            scan: ScanSettings::default(),
        }
    }
}

impl SystemSpec {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.bases.validate()?;
        self.l1.validate()?;
        self.l2.validate()?;
        self.t2.validate()?;
        self.converter.validate()?;
        self.fault.validate()?;
        self.scan.validate()?;
        if self.n_units == 0 {
            return Err(ParamError::new("SystemSpec", "n_units must be >= 1"));
        }
        let s = &self.source;
        if !(s.r_pu >= 0.0 && s.x_pu >= 0.0 && s.r0_pu >= 0.0 && s.x0_pu >= 0.0 && s.v_pu > 0.0) {
            return Err(ParamError::new("SourceSpec", "impedances must be >= 0 and EMF > 0"));
        }
        if let OperatingPointMode::Explicit { v1_v, .. } = self.operating_point {
            if !(v1_v > 0.0) {
                return Err(ParamError::new("OperatingPoint", "V1 must be > 0"));
            }
        }
        Ok(())
    }

    /// Unit step-up transformer as a transformer record.
    pub fn t1(&self) -> TransformerParams {
        TransformerParams { x_pu: self.converter.x_t1_pu, connection: Connection::YNd }
    }

    /// Aggregated WPP branch (converter ∥ filter, plus T1) in system p.u.
    pub fn wpp_impedance(&self, seq: Sequence, op: &OperatingPoint) -> Result<FreqExpr, ParamError> {
        let unit = unit_wpp_impedance(&self.converter, op, seq)?;
        aggregate_wpp(&unit, &self.converter, &self.bases, self.n_units, self.rebase)
    }

    /// Linearization point per [`OperatingPointMode`]. `fault = None` forces
    /// the healthy equilibrium in `Faulted` mode.
    pub fn resolve_operating_point(&self, fault: Option<&FaultSpec>) -> Result<OperatingPoint, Error> {
        let p = &self.converter;
        match self.operating_point {
            OperatingPointMode::Explicit { v1_v, i_d0_a, i_q0_a } => {
                Ok(OperatingPoint::new(v1_v, i_d0_a, i_q0_a)?)
            }
            OperatingPointMode::Prefault => {
                let eq = phasor_equilibrium(self, None)?;
                Ok(OperatingPoint::at_references(p, eq.v1_volts(self))?)
            }
            OperatingPointMode::Faulted => {
                let eq = phasor_equilibrium(self, fault)?;
                Ok(OperatingPoint::at_references(p, eq.v1_volts(self))?)
            }
        }
    }
}
