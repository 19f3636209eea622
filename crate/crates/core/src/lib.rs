//! Asymptotic predictions and Monte-Carlo validation for spectral
//! initialization in phase retrieval with sub-sampled Haar sensing.

pub mod error;
pub mod freeconv;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod theory;
pub mod trimmer;

pub use error::{Error, Result};
pub use model::{Model, SolverSettings};
pub use quadrature::{Quadrature, QuadratureSettings};
pub use trimmer::{normalize_trimmer, AffineMap, Table, TrimmingFunction};
