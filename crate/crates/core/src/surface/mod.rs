//! Geometry of the conformal unit disk: metric, geodesic flow, exit times,
//! scattering relation and simplicity witnesses.

pub mod geodesic;
pub mod lambda;
pub mod metric;

pub use geodesic::{
    check_simplicity, exit_time, flow_derivative, jacobi_witness, santalo_weight, scattering,
    trace_geodesic, walk, wrap_2pi, wrap_pi, BoundaryPoint, Exit, GeodesicPath, Phase,
    SimplicityReport,
};
pub use lambda::{Jet, Lambda, LambdaGrid, LambdaGridHeader};
pub use metric::ConformalMetric;
