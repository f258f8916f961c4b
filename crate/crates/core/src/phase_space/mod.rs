//! Discretizations of SM and ∂SM, fiberwise Fourier calculus and the frame
//! vector fields.

pub mod boundary;
pub mod lattice;
pub mod sm;

pub use boundary::{AlphaNodes, BoundaryField, BoundaryGrid, FullBoundaryField};
pub use lattice::{Lattice, LatticeFunc};
pub use sm::{FiberSpectrum, SmField, SmGrid};
