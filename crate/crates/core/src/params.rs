//! Model coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used for degenerate-regime and singular-denominator checks.
pub const TAU_REG: f64 = 1e-10;

/// Coefficients of the two-species cross-diffusion competition system
///
/// ```text
/// u_t = Δ((d + d11 u + d12 v) u) + (r1 - a1 u - b1 v) u
/// v_t = Δ((d + d22 v + d21 u) v) + (r2 - b2 u - a2 v) v
/// ```
///
/// on `(0, ell)` with homogeneous Neumann conditions. Both species share the
/// standard diffusion coefficient `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub r1: f64,
    pub r2: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub d: f64,
    #[serde(default)]
    pub d11: f64,
    #[serde(default)]
    pub d22: f64,
    pub d12: f64,
    pub d21: f64,
    #[serde(default = "default_ell")]
    pub ell: f64,
}

fn default_ell() -> f64 {
    1.0
}

impl ModelParams {
    /// The usual weak-competition setting: r = (5, 2), a = (3, 3), b = (1, 1)
    /// on the unit interval, with d12 = 3 and no second cross-diffusion.
    pub fn reference() -> Self {
        Self {
            r1: 5.0,
            r2: 2.0,
            a1: 3.0,
            a2: 3.0,
            b1: 1.0,
            b2: 1.0,
            d: 0.05,
            d11: 0.0,
            d22: 0.0,
            d12: 3.0,
            d21: 0.0,
            ell: 1.0,
        }
    }

    pub fn with_d(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn with_d12(mut self, d12: f64) -> Self {
        self.d12 = d12;
        self
    }

    pub fn with_d21(mut self, d21: f64) -> Self {
        self.d21 = d21;
        self
    }

    /// Checks the sign constraints on every coefficient.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r1", self.r1),
            ("r2", self.r2),
            ("a1", self.a1),
            ("a2", self.a2),
            ("d", self.d),
            ("ell", self.ell),
        ];
        let non_negative = [
            ("b1", self.b1),
            ("b2", self.b2),
            ("d11", self.d11),
            ("d22", self.d22),
            ("d12", self.d12),
            ("d21", self.d21),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {value}")));
            }
        }
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {value}")));
            }
        }
        Ok(())
    }

    /// `a1 a2 - b1 b2`, the denominator of the coexistence state.
    pub fn competition_determinant(&self) -> f64 {
        self.a1 * self.a2 - self.b1 * self.b2
    }

    pub(crate) fn require_no_self_diffusion(&self) -> Result<()> {
        if self.d11 != 0.0 || self.d22 != 0.0 {
            return Err(Error::SelfDiffusion { d11: self.d11, d22: self.d22 });
        }
        Ok(())
    }
}
