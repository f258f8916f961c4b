//! Attenuated geodesic X-ray transform on simple surfaces realized as the unit
//! disk with a conformal metric e^{2λ}(dx² + dy²).
//!
//! The crate covers the forward transform and its adjoints, the boundary
//! operators Q_a, B_a and P_a = B_a H Q_a, Hodge and pair decompositions,
//! holomorphic integrating factors, range tests and the exact reconstruction
//! of (f, h₀, ω₁, ω₋₁) from boundary data.

pub mod error;
pub mod par;
pub mod surface;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub mod adjoint_ops;
pub mod cache;
pub mod config;
pub mod fields;
pub mod func;
pub mod hodge;
pub mod holo;
pub mod io;
pub mod linalg;
pub mod phase_space;
pub mod range_ops;
pub mod reconstruct;
pub mod run;
pub mod selfcheck;
pub mod transport;
