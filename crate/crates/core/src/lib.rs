//! Cantor-set sign functions, their Fourier transforms, and numerical checks
//! of the cosine-product inequalities behind them.

pub mod dyadic;
pub mod fourier;
pub mod logval;
pub mod norms;
pub mod oracle;
pub mod oscillation;
pub mod cantor;
pub mod cosineineq;
pub mod dimension;
pub mod params;
pub mod quad;
pub mod suite;

use serde::{Deserialize, Serialize};

pub use dyadic::{DyadicInterval, DyadicRational, Round};
pub use logval::{NeumaierSum, SignedLogValue};
pub use params::{build_default_schedule, Schedule, ScheduleError, ScheduleSpec};

/// Outcome of a numerical check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    Violated,
    /// Budget or precision ran out before a decision.
    Inconclusive,
}

impl Verdict {
    /// `Violated` dominates `Inconclusive`, which dominates `Verified`.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Verified,
        }
    }

    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::Verified
        } else {
            Verdict::Violated
        }
    }
}
