//! Discontinuous Galerkin spectral element solver for the first-order acoustic
//! wave equation with an energy-stable perfectly matched layer.

pub mod ader;
pub mod analysis;
pub mod config;
pub mod dgsem;
pub mod error;
pub mod experiment;
pub mod flux;
pub mod layout;
pub mod mesh;
pub mod output;
pub mod pml;
pub mod quadrature;
pub mod selftest;
pub mod source;

pub use error::{Error, Result};
