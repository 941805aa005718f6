//! Spectral and probabilistic verification toolkit for the periodic
//! Benjamin–Ono equation `u_t + H u_xx + u u_x = 0` and its Galerkin
//! truncations.

pub mod energy;
pub mod flow;
pub mod error;
pub mod fourier;
pub mod harness;
pub mod identities;
pub mod measure;
pub mod moments;
pub mod monomial;
pub mod random;
pub mod scalar;
pub mod series;

pub use energy::{g_value, Calibration, EnergyFunctional, EnergySet};
pub use error::{Error, Result};
pub use flow::{evolve, Equation, FlowSpec};
pub use fourier::{product, FourierField, Multiplier, Product, Spectrum};
pub use monomial::{mono, Monomial, PStar, WeightedMonomialSum};
pub use scalar::{DoubleDouble, Rational, Real, Scalar};

pub type Field64 = FourierField<f64>;
pub type Field32 = FourierField<f32>;
pub type ExactField = FourierField<Rational>;
pub type Spectrum64 = Spectrum<f64>;
