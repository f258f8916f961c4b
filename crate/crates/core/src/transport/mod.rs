//! Forward attenuated transforms, integrating factors, invariant extensions
//! and the boundary operators Q_a, B_a, P_a.

pub mod basis;
pub mod integrand;
pub mod ops;
pub mod rays;

pub use basis::GeodesicBasis;
pub use integrand::{Integrand, ModeList, Pair};
pub use ops::{
    beam_odd_boundary, beam_odd_solution, forward, forward_field, integrating_factor_field,
    integrating_factor_u, op_b, op_p, op_p_fn, op_p_invariant, op_q, op_q_fn, op_q_invariant, psi_extension, psi_extension_fn,
    sharp_extension, transport_solution, InterpDiag,
};
pub use rays::{boundary_point_of, Beam, End, GridSpec, Setup};
