//! Simulation of digitally modulated microwave-to-quantum-optical conversion in
//! antenna-coupled electro-optic phase modulators.

pub mod cli;
pub mod config;
pub mod constellation;
pub mod error;
pub mod physics;
pub mod qstate;
pub mod sideband;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use physics::ConverterDesign;
