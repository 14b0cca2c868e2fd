//! Sequence-impedance modelling and small-signal stability analysis of a
//! wind power plant on a radial grid, including the coupling between
//! sequence networks created by a single-line-to-ground fault or an
//! unbalanced load.

pub mod equilibrium;
pub mod error;
mod nodal;
mod numfmt;
pub mod plant;
pub mod scanner;
pub mod stability;
pub mod system;
pub mod tfcore;
pub mod wcsim;

pub use error::{Error, EvalError, GridError, ParamError, SimError, SolveError, StabilityError};
pub use num_complex::Complex64;
pub use numfmt::sig12;
pub use plant::{BaseSet, ConverterParams, LineParams, OperatingPoint, Sequence, TransformerParams};
pub use system::{OperatingPointMode, SystemSpec};
pub use tfcore::{FreqExpr, FrequencyGrid, Value};
pub use wcsim::{CompositeModel, FaultBranch, FaultKind, FaultSpec, InjectionPort};

/// Library version, recorded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
