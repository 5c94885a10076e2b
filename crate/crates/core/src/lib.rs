pub mod calibration;
pub mod config;
pub mod domain;
pub mod error;
pub mod groupparams;
pub mod montecarlo;
pub mod quadrature;
pub mod perturbation;
pub mod pricing;
pub mod special;
pub mod spectral;

pub use domain::*;
pub use error::{Result, SpecVolError};
