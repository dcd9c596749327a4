use core::fmt;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain { what: &'static str, value: f64 },
    /// A value is inside the mathematical domain but beyond the guarded range.
    Range { what: &'static str, value: f64, limit: f64 },
    /// The trajectory left the admissible strip `|m| <= 1 - delta`.
    BoundaryHit { time: f64, m: f64 },
    /// The adaptive step size collapsed below the floor.
    StepUnderflow { time: f64, step: f64 },
    /// Too many steps were needed to reach the horizon.
    StepLimit { time: f64, steps: usize },
    /// The first integral drifted beyond tolerance even after tightening.
    EnergyDrift { drift: f64, tolerance: f64 },
    /// No Euler-Lagrange path joins the two magnetizations in the bracket.
    NoConnection { m_start: f64, m_end: f64 },
    /// No fold of the transported curve up to the time bound.
    NoFold { t_max: f64 },
    /// Parameters outside the regime where a closed form applies.
    OutOfRegime(&'static str),
    /// Two global cost minimizers tie, so the one-point kernel is undefined.
    AmbiguousMinimizer { m0_a: f64, m0_b: f64, gap: f64 },
    /// No transported branch reaches the requested final magnetization.
    Unreachable { m_end: f64 },
    /// Too few Monte Carlo paths ended inside the conditioning window.
    InsufficientAcceptance { accepted: usize, required: usize },
    /// Degenerate input (zero horizon with distinct endpoints and similar).
    Degenerate(&'static str),
    /// An iterative solver failed to converge.
    NoConvergence(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::Range { what, value, limit } => {
                write!(f, "{what} = {value} exceeds guarded range {limit}")
            }
            Error::BoundaryHit { time, m } => {
                write!(f, "trajectory left the admissible strip at s = {time} (m = {m})")
            }
            Error::StepUnderflow { time, step } => {
                write!(f, "step size underflow at s = {time} (h = {step:e})")
            }
            Error::StepLimit { time, steps } => {
                write!(f, "step limit {steps} reached at s = {time}")
            }
            Error::EnergyDrift { drift, tolerance } => {
                write!(f, "first-integral drift {drift:e} exceeds {tolerance:e}")
            }
            Error::NoConnection { m_start, m_end } => {
                write!(f, "no Euler-Lagrange path from {m_start} to {m_end}")
            }
            Error::NoFold { t_max } => write!(f, "no fold up to t = {t_max}"),
            Error::OutOfRegime(msg) => write!(f, "out of regime: {msg}"),
            Error::AmbiguousMinimizer { m0_a, m0_b, gap } => write!(
                f,
                "ambiguous minimizer: {m0_a} and {m0_b} tie (gap {gap:e})"
            ),
            Error::Unreachable { m_end } => {
                write!(f, "no transported branch reaches m' = {m_end}")
            }
            Error::InsufficientAcceptance { accepted, required } => write!(
                f,
                "only {accepted} paths accepted, {required} required"
            ),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::NoConvergence(msg) => write!(f, "no convergence: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
