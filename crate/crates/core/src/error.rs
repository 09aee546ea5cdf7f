use thiserror::Error;

use crate::integrator::TrajectoryRecord;
use crate::shooting::ExitReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root bracket failure while {context}: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    Bracket {
        context: String,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("similarity time {s} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { s: f64, lo: f64, hi: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("time step {ds} exceeds the explicit stability bound {limit}")]
    Cfl { ds: f64, limit: f64 },

    #[error("state escaped the admissible regime: |v| = {v} at y = {y}, s = {s}")]
    EscapedRegime { v: f64, y: f64, s: f64 },

    #[error("non-finite value in state after s = {last_valid_s}")]
    PoisonedState {
        last_valid_s: f64,
        partial: Box<TrajectoryRecord>,
    },

    #[error("no admissible bracket: both endpoints exit with the same sign ({})", lo.sign_label())]
    NoAdmissibleBracket {
        lo: Box<ExitReport>,
        hi: Box<ExitReport>,
    },

    #[error("trajectory did not survive long enough: {0}")]
    NotSurvived(String),
}

pub type Result<T> = std::result::Result<T, Error>;
