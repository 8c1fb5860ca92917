//! Numerical parallel transport and holonomy on path and loop spaces.
//!
//! A connection pair `(A, B)` — an ordinary Lie-algebra-valued connection
//! 1-form `A` on a chart together with an adjoint-valued 2-form `B` —
//! determines a connection on the bundle of `A`-horizontal paths. This crate
//! computes the associated transports: ordinary holonomy of loops, the
//! surface ordered exponential of squares (paths of paths), the curvature of
//! the path-space connection via Chen integrals, first-variation formulas,
//! and the trace observables built from them. Everything is sampler-based
//! (fields and geometry are closures, not grids) and deterministic for a
//! fixed grid schedule.

pub mod chen;
pub mod config;
pub mod error;
pub mod fields;
pub mod geom;
pub mod liealg;
pub mod observables;
pub mod pathspace;
pub mod report;
pub mod runner;
pub mod transport;
pub mod variations;

pub use error::Error;
pub use liealg::{AlgebraElement, GroupElement, GroupFamily, GroupSpec};

/// Points and tangent vectors of the chart. Coordinates beyond the chart
/// dimension are kept at zero by every constructor in this crate.
pub type Coord = nalgebra::Vector4<f64>;

/// Complex scalar used throughout the matrix kernels.
pub type C64 = nalgebra::Complex<f64>;

/// Dynamically sized complex matrix backing group and algebra elements.
pub type CMat = nalgebra::DMatrix<C64>;
