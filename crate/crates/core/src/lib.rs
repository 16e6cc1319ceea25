//! Eigenfunction-series solver for one-dimensional convective-dispersive
//! transport with sorption, first-order decay and zero-order production in a
//! finite column with Robin (third-type) boundaries.

pub mod eigen;
pub mod error;
pub mod exit_flux;
pub mod model;
pub mod quad;
pub mod roots;
pub mod series;
pub mod smooth;
pub mod verify;

pub use error::{Error, Result};
pub use model::{ExitSpec, LiftKind, ProblemData, TransportParams};
pub use smooth::{SmoothFn, Table};
pub use series::{Evaluation, SeriesSolution, TruncationPolicy};
