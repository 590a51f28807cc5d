//! Nonlinear (Tomlinson-Harashima) and reference precoding for the
//! RIS-aided MIMO broadcast channel with a rank-one BS-RIS link.
//!
//! The numeric core is generic over [`Real`] (`f32`/`f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the Monte Carlo
//! harness in [`sim`] uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod alloc;
pub mod baseline;
pub mod channel;
pub mod error;
pub mod gram;
pub mod linalg;
pub mod phase_opt;
pub mod quad;
pub mod scalar;
pub mod sim;
pub mod thp;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ChannelRealization = channel::ChannelRealization<f64>;
pub type GramDecomposition = gram::GramDecomposition<f64>;
pub type EigenInfo = linalg::EigenInfo<f64>;
pub type PhaseConfig = phase_opt::PhaseConfig<f64>;
pub type ThpFilters = thp::ThpFilters<f64>;
pub type ModuloSymbols = thp::ModuloSymbols<f64>;
pub type Allocation = alloc::Allocation<f64>;
pub type LinearSolution = baseline::LinearSolution<f64>;
pub type CMat = scalar::CMat<f64>;
pub type CVec = scalar::CVec<f64>;
