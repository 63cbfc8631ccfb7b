//! Discrete orthogonal polynomial detrending for GNSS orbit time series.

pub mod basis;
pub mod conditioning;
pub mod detect;
pub mod error;
pub mod fit;
pub mod hahn;
pub mod lattice;
pub mod par;
pub mod real;
pub mod sp3;
pub mod summation;
pub mod synth;

pub use basis::{build_basis, BasisCache, OrthoBasis};
pub use error::{Error, Result};
pub use fit::{detrend, project, read_series_csv, residue_tail, write_series_csv, DataSeries, FitResult};
pub use lattice::{Lattice, LatticeKind};
pub use par::Execution;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
