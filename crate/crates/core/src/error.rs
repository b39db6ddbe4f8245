use thiserror::Error;

/// Errors raised by constructions and numerical preconditions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("flux {flux} is incommensurate with n1 = {n1}; smallest compatible n1 is {smallest_n1}")]
    IncommensurateFlux {
        flux: String,
        n1: usize,
        smallest_n1: usize,
    },
    #[error("operation requires a torus geometry")]
    NotTorus,
    #[error("operation requires a cylinder geometry")]
    NotCylinder,
    #[error("operator is not hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("range {range} aliases on a period of {period} sites")]
    Aliasing { range: usize, period: usize },
    #[error("spin mismatch: pairing needs L = {required}, lattice has L = {actual}")]
    SpinMismatch { required: usize, actual: usize },
    #[error("pairing with qB = {qb:.6} breaks covariance; qB must be 0, pi/2, pi or 3pi/2")]
    FluxPairing { qb: f64 },
    #[error("symmetry precondition failed: {name} residual {residual:.3e}")]
    Symmetry { name: &'static str, residual: f64 },
    #[error("zero-energy eigenvalues make the Fermi projection ambiguous: {0:?}")]
    ZeroModes(Vec<f64>),
    #[error("energy window touches the bulk spectrum: {0}")]
    Window(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
}

pub type Result<T> = std::result::Result<T, Error>;
