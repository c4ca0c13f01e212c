//! Two-scale finite-element simulator for an upscaled filtration-combustion
//! model: periodic cell problems with Arrhenius interface reactions define
//! temperature/concentration-dependent effective diffusion tensors, which in
//! turn drive a coupled quasilinear heat/mass system on the macroscopic domain.

pub mod config;
pub mod error;
pub mod fem;
pub mod io;
pub mod kinetics;
pub mod macroscale;
pub mod mesh;
pub mod microcell;
pub mod sparse;
pub mod tensors;
pub mod verify;

pub use error::{Error, Result};
