//! Geometry of the tangent bundle with the metric induced by an isotropic
//! almost complex structure, evaluated pointwise in the adapted frame.

mod connection;
mod curvature;
mod types;

pub use connection::{ConnectionCase, FieldJets, TmPoint};
pub use curvature::{
    coordinate_frame, Alternative, Breakdown, CurvatureCase, DotReading, ScalarBreakdown, Term,
    VectorBreakdown, VhvReading,
};
pub use types::{IsotropicParams, Lift, LiftVector, ScenarioGeometry, TangentPoint, Tolerance};
