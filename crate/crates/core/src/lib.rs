//! Open-system simulation of dynamic nuclear polarization in an
//! electron-nucleus pair, with derivative-free pulse design.
//!
//! Numerical kernels are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod channels;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod pulse;
pub mod quantum;
pub mod random;
pub mod scalar;
pub mod simplex;

pub use error::{Error, Result};

pub type Complex = scalar::C<f64>;
pub type Matrix = scalar::CMatrix<f64>;
pub type Vector = scalar::CVector<f64>;
pub type Density = quantum::DensityMatrix<f64>;
pub type Kraus = channels::KrausSet<f64>;
pub type Super = channels::SuperMatrix<f64>;
pub type Choi = channels::ChoiMatrix<f64>;
pub type SpinParams = quantum::SpinSystemParams<f64>;
pub type Relaxation = model::RelaxationParams<f64>;
