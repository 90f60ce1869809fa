use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical or numerical parameter violates its invariant.
    #[error("invalid parameter `{name}`: {constraint}")]
    InvalidParameter { name: &'static str, constraint: String },

    /// Sideband truncation is too narrow for the modulation depth.
    #[error("truncation S = {half_width} too small for modulation depth |{depth:.4}| (need S >= |depth| + 5)")]
    Truncation { half_width: usize, depth: f64 },

    #[error("sideband truncation mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("element index {index} outside 1..={count}")]
    IndexOutOfRange { index: usize, count: usize },

    /// Step halving changed the integrated phase by more than the tolerance.
    #[error("ODE phase did not converge under step halving: change {change:.3e} rad > {tolerance:.1e} rad")]
    Refinement { change: f64, tolerance: f64 },

    #[error("need at least {required} symbols, got {got}")]
    TooFewSymbols { required: usize, got: usize },

    #[error("configuration field `{field}`: {constraint}")]
    Config { field: String, constraint: String },
}

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            constraint: format!("must be finite, got {value}"),
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            constraint: format!("must be > 0, got {value}"),
        })
    }
}
