use thiserror::Error;

use crate::energy::Singularity;

#[derive(Debug, Error, Clone)]
pub enum Error {
    #[error("invalid system: {0}")]
    Validation(String),

    #[error("hypothesis violated: {message}")]
    HypothesisViolation { message: String, witness: Option<Box<(Singularity, Singularity)>> },

    #[error("energy {h} is outside the attainable range on the {side} side (sup = {limit})")]
    Range { h: f64, side: &'static str, limit: f64 },

    #[error("energy {h} is too close to a separatrix")]
    NearSeparatrix { h: f64 },

    #[error("orbit at energy {h} did not close within {steps} steps")]
    IntegrationBudget { h: f64, steps: usize },

    #[error("energy drift {drift:e} at h = {h} exceeds {bound:e}")]
    EnergyDrift { h: f64, drift: f64, bound: f64 },

    #[error("{failed} of {total} period samples failed")]
    CurveQuality { failed: usize, total: usize },

    #[error("not enough samples: {0}")]
    InsufficientSamples(String),

    #[error("{0}")]
    NotEScaled(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NearSeparatrix { .. }
                | Error::IntegrationBudget { .. }
                | Error::EnergyDrift { .. }
                | Error::CurveQuality { .. }
                | Error::InsufficientSamples(_)
                | Error::Range { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
