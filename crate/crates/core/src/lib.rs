//! Time-dependent normal coupled cluster (NCCM) evolution of the Rabi
//! Hamiltonian
//!
//! ```text
//!   H = ½ω₀σᶻ + ω b†b + g(σ⁺ + σ⁻)(b† + b)
//! ```
//!
//! from the unexcited vacuum `|0,↓⟩`, together with an exact-diagonalization
//! reference used to check every observable.

pub mod ci;
pub mod error;
pub mod golden;
pub mod integrator;
pub mod io;
pub mod nccm;
pub mod observables;
pub mod op_algebra;
pub mod spectral;

pub use error::{Error, Result};
pub use nccm::{ClusterConfig, ClusterState, RabiParams};

pub use num_complex::Complex64 as C64;
