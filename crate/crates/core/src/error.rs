use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} is outside the supported range d >= 3")]
    UnsupportedDimension(usize),

    #[error("exponent p = {p} is not admissible in dimension {d}")]
    Inadmissible { p: f64, d: usize },

    #[error("site {site:?} has {found} coordinates, expected {expected}")]
    SiteDimension {
        site: Vec<i64>,
        expected: usize,
        found: usize,
    },

    #[error("site {0:?} appears more than once in the potential")]
    DuplicateSite(Vec<i64>),

    #[error("potential value at site {0:?} is not finite")]
    NonFiniteValue(Vec<i64>),

    #[error("z = 0 maps to lambda = infinity")]
    ZeroDiskPoint,

    #[error("lambda = {0} lies on the band [-d, d]")]
    OnBand(Complex64),

    #[error(
        "lambda = {lambda} is {distance:.3e} from the band, below the quadrature floor {floor:.1e}"
    )]
    TooCloseToBand {
        lambda: Complex64,
        distance: f64,
        floor: f64,
    },

    #[error(
        "quadrature at lambda = {lambda} did not reach tol {tol:.1e} within {max_points} points per dimension (last discrepancy {discrepancy:.3e})"
    )]
    QuadratureNotConverged {
        lambda: Complex64,
        tol: f64,
        max_points: usize,
        discrepancy: f64,
    },

    #[error("|z| = {modulus} exceeds the radial ceiling {ceiling}")]
    RadialCeiling { modulus: f64, ceiling: f64 },

    #[error("determinant vanishes on the path near z = {0}")]
    ZeroOnPath(Complex64),

    #[error("log D path must start where |D - 1| < 0.5, found D = {0}")]
    UnanchoredPath(Complex64),

    #[error("{count} zero(s) of D lie inside |z| < {radius}")]
    ZerosInside { count: usize, radius: f64 },

    #[error("winding number {0} is not close to an integer")]
    NonIntegerWinding(f64),

    #[error("{count} zeros exceed the supported maximum of {max}")]
    TooManyZeros { count: usize, max: usize },

    #[error("zero refinement failed: {0}")]
    Refinement(String),

    #[error("box of half-width {half_width} has {size} sites, above the cap {cap}")]
    BoxTooLarge {
        half_width: usize,
        size: usize,
        cap: usize,
    },

    #[error("box half-width {half_width} does not enclose the support (needs >= {required})")]
    BoxTooSmall { half_width: usize, required: usize },

    #[error("eigenpair residual {residual:.3e} at lambda = {lambda} exceeds the certificate bound")]
    ResidualCheck { lambda: Complex64, residual: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("oracle found {oracle} eigenvalues but the determinant has {determinant} zeros at L = {half_width}")]
    CountMismatch {
        half_width: usize,
        oracle: usize,
        determinant: usize,
    },

    #[error("real potential produced a non-real zero z = {0}")]
    NonRealZero(Complex64),

    #[error("unknown {kind} strategy `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
