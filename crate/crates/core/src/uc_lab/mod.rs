//! Unique-continuation laboratory: Carleman weights and τ-sweeps, weighted
//! integration-by-parts identities, the sixth-order reduction, and ball
//! measurements (doubling, three spheres, Caccioppoli).

pub mod balls;
pub mod battery;
pub mod carleman;
pub mod identities;
pub mod polar;
pub mod reduction;
pub mod weight;

pub use balls::{
    ball_profile, caccioppoli_report, doubling_report, dyadic_radii, three_sphere_exponent, three_sphere_report,
    BallProfile, DoublingReport, DoublingRow, ThreeSphereReport, DOUBLING_EXPONENT,
};
pub use carleman::{carleman_sweep, tau_range, Operator, SweepOptions, SweepReport, SweepRow};
pub use identities::{identity_check, Identity, IdentityCheck};
pub use polar::{PolarResolution, PolarRule};
pub use reduction::{reduction_check, reduction_check_fields, ReductionPoint, ReductionReport};
pub use weight::{CarlemanWeight, RhoPower};
