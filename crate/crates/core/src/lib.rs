//! Spectral machinery for symmetric hyperbolic systems on flat tori, with
//! verification labs for the Dirac–Maxwell identities and a 1+1 causal
//! induction construction.
//!
//! Numerical types are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix double precision, which every tolerance in the test
//! suites assumes.

pub mod bundled;
pub mod causal;
pub mod dirac_maxwell;
pub mod error;
pub mod estimates;
pub mod evolve;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod mollifier;
pub mod scalar;
pub mod system;

pub use error::{Error, Result};
pub use evolve::{integrate, SolveControls, Trajectory};
pub use field::{Field, MatrixField};
pub use grid::{Grid, GridSpec, ScalarKind};
pub use linalg::CMat;
pub use mollifier::Mollifier;
pub use scalar::{Cplx, Real};
pub use system::{Coefficient, HyperbolicSystem, SecondOrderOp};

pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type Grid64 = Grid<f64>;
pub type Mollifier64 = Mollifier<f64>;
pub type CMat64 = CMat<f64>;
pub type System64 = HyperbolicSystem<f64>;
pub type Trajectory64 = Trajectory<f64>;
