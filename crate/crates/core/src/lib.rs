//! Schwarz symmetrization, radial shooting and explicit a-priori bounds for
//! quasilinear elliptic Dirichlet problems on masked grids.

pub mod error;
pub mod field;
pub mod grid;
pub mod ops;
pub mod bounds;
pub mod compare;
pub mod profile;
pub mod radial;
pub mod rearrange;
pub mod suite;

pub use error::{Error, Result};
pub use grid::{Fixture, ScalarField, Shape};
pub use ops::{Constants, Family, OperatorSpec, SourceFn, SourceSpec, Weight};
pub use profile::{DistributionCurve, RadialProfile};
