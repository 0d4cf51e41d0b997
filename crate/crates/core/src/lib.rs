//! Ginzburg-Landau approximation of the Gray-Scott-Klausmeier system near a
//! Turing instability: model, spectral machinery, bifurcation analysis, time
//! integration, approximation diagnostics and the experiment harness.

pub mod approximation;
pub mod bifurcation;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod matrix2;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
