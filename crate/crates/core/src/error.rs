use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ellipticity violated at ({x:.6}, {y:.6}): mu = {mu:e}, 2mu+3lambda = {bulk:e}")]
    EllipticityViolation { x: f64, y: f64, mu: f64, bulk: f64 },
    #[error("invalid material parameter `{0}`: must be positive and finite")]
    InvalidMaterial(&'static str),
    #[error("convexity probe found a non-positive estimate (xi_P = {xi_p:e}, xi_Q = {xi_q:e})")]
    ConvexityViolation { xi_p: f64, xi_q: f64 },
    #[error("arclength {s} outside [0, {perimeter})")]
    OutOfRange { s: f64, perimeter: f64 },
    #[error("map Jacobian is singular near ({x:.6}, {y:.6}): det = {det:e}")]
    SingularMap { x: f64, y: f64, det: f64 },
    #[error("operation needs a mapped domain")]
    NotMapped,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("boundary is not smooth enough for {0}")]
    InsufficientSmoothness(String),
    #[error("spline degree {0} is below 3")]
    InvalidDegree(usize),
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
    #[error("derivative order {requested} exceeds available order {available}")]
    OrderTooHigh { requested: usize, available: usize },
    #[error("degenerate quadrature cell: {0}")]
    QuadratureUnderflow(String),
    #[error("saddle system is singular: {0}")]
    SingularSystem(String),
    #[error("boundary data incompatible: residuals {residuals:?} exceed tolerance {tolerance:e}")]
    IncompatibleData { residuals: [f64; 3], tolerance: f64 },
    #[error("test field is nonzero outside the admissible annulus ({0})")]
    SupportViolation(String),
    #[error("negative weight power requested at the origin")]
    OriginSingular,
    #[error("radius {radius} outside the domain (limit {limit})")]
    RadiusOutOfDomain { radius: f64, limit: f64 },
    #[error("denominator of the frequency vanishes: {0:e}")]
    DegenerateDenominator(f64),
    #[error("radii must satisfy 2r <= s (r = {r}, s = {s})")]
    RadiusOrdering { r: f64, s: f64 },
    #[error("expression error: {0}")]
    Expression(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
