use core::fmt;

/// Failure modes shared by every stage of the hover pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An integration step produced NaN or infinity.
    NonFiniteState,
    /// Pitch came within the guard band of +-pi/2 where the Euler kinematics are singular.
    GimbalProximity { pitch: f64 },
    /// A measurement model was requested without any measurement kinds.
    EmptyMeasurementSet,
    /// The control Riccati equation has no stabilizing solution.
    NotStabilizable,
    /// The filter Riccati equation has no stabilizing solution.
    NotDetectable,
    /// The innovation covariance of a Kalman update could not be inverted.
    SingularInnovation,
    /// The active-set allocator exceeded its iteration budget.
    NoConvergence { iterations: usize },
    /// Demanded electrical power exceeds what the pack can deliver at its present state.
    PowerInfeasible { demand: f64, max: f64 },
    /// Two series that must be aligned have different lengths.
    LengthMismatch { left: usize, right: usize },
    /// A configuration value violates its documented range.
    InvalidConfig(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFiniteState => write!(f, "state became non-finite"),
            Error::GimbalProximity { pitch } => {
                write!(f, "pitch {pitch} rad is too close to the Euler singularity")
            }
            Error::EmptyMeasurementSet => write!(f, "measurement set is empty"),
            Error::NotStabilizable => write!(f, "no stabilizing Riccati solution (control)"),
            Error::NotDetectable => write!(f, "no stabilizing Riccati solution (estimation)"),
            Error::SingularInnovation => write!(f, "innovation covariance is singular"),
            Error::NoConvergence { iterations } => {
                write!(f, "active-set iteration did not converge after {iterations} iterations")
            }
            Error::PowerInfeasible { demand, max } => {
                write!(f, "power demand {demand:.3} W exceeds deliverable maximum {max:.3} W")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "series lengths differ: {left} vs {right}")
            }
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
        }
    }
}

impl core::error::Error for Error {}
