//! Concentration parameters and the rate-function coefficients they induce.

use serde::Serialize;

use crate::error::{check_positive, Result};

/// Level-one concentration `alpha`, level-two concentration `beta`, and their
/// ratio `c = alpha / beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    alpha: f64,
    beta: f64,
    c: f64,
}

impl Params {
    /// Builds parameters from `beta` and the ratio `c`; `alpha` is `c * beta`.
    pub fn new(beta: f64, c: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        check_positive("c", c)?;
        let alpha = c * beta;
        check_positive("alpha", alpha)?;
        Ok(Self { alpha, beta, c })
    }

    /// Builds parameters from both concentrations; the ratio is derived.
    pub fn from_concentrations(alpha: f64, beta: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("beta", beta)?;
        Ok(Self {
            alpha,
            beta,
            c: alpha / beta,
        })
    }

    /// Parameters at speed `gamma = max(alpha, beta)` with `alpha / beta = c`.
    ///
    /// For `c <= 1` the level-two concentration carries the speed
    /// (`beta = gamma`, `alpha = c * gamma`); otherwise `alpha = gamma` and
    /// `beta = gamma / c`.
    pub fn at_speed(gamma: f64, c: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        check_positive("c", c)?;
        if c <= 1.0 {
            Self::new(gamma, c)
        } else {
            Ok(Self {
                alpha: gamma,
                beta: gamma / c,
                c,
            })
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Large-deviation speed `max(alpha, beta)`.
    pub fn gamma(&self) -> f64 {
        self.alpha.max(self.beta)
    }

    pub fn coefficients(&self) -> RateCoefficients {
        RateCoefficients::from_ratio(self.c)
    }
}

/// Weights `(a, b)` on the level-one and level-two terms of the rate functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCoefficients {
    pub a: f64,
    pub b: f64,
}

impl RateCoefficients {
    /// `(c, 1)` for `c < 1`, `(1, 1/c)` for `c > 1`, `(1, 1)` at `c = 1`.
    pub fn from_ratio(c: f64) -> Self {
        if c < 1.0 {
            Self { a: c, b: 1.0 }
        } else if c > 1.0 {
            Self { a: 1.0, b: 1.0 / c }
        } else {
            Self { a: 1.0, b: 1.0 }
        }
    }

    pub fn min(&self) -> f64 {
        self.a.min(self.b)
    }
}
