use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a rate quoted as `X MHz·2π` into rad/ns.
pub fn mhz_to_rad_per_ns(mhz: f64) -> f64 {
    2.0 * PI * mhz * 1e-3
}

/// Physical rates, all in MHz·2π and all field-amplitude rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub g: f64,
    pub kappa_ex: f64,
    pub kappa_i: f64,
    pub gamma: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Optional per-trial multiplicative spread of `g`, drawn uniformly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_scale_range: Option<[f64; 2]>,
}

fn default_epsilon() -> f64 {
    0.045
}

/// Rates converted to rad/ns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub g: f64,
    pub kappa_ex: f64,
    pub kappa_i: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Rates {
    pub fn kappa(&self) -> f64 {
        self.kappa_ex + self.kappa_i
    }

    pub fn gamma_1d(&self) -> f64 {
        let k = self.kappa();
        if k > 0.0 {
            2.0 * self.g * self.g / k
        } else {
            0.0
        }
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl SystemParams {
    pub fn nominal() -> Self {
        Self {
            g: 27.0,
            kappa_ex: 60.0,
            kappa_i: 6.0,
            gamma: 3.0,
            delta: 0.0,
            epsilon: 0.045,
            g_scale_range: None,
        }
    }

    /// Lossless, crosstalk-free limit at the nominal coupling rates.
    pub fn ideal() -> Self {
        Self {
            kappa_i: 0.0,
            gamma: 0.0,
            epsilon: 0.0,
            ..Self::nominal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g", self.g),
            ("kappa_ex", self.kappa_ex),
            ("kappa_i", self.kappa_i),
            ("gamma", self.gamma),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be a finite rate >= 0, got {v}")));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParams("delta must be finite".into()));
        }
        if !(0.0..=0.5).contains(&self.epsilon) {
            return Err(Error::InvalidParams(format!("epsilon must lie in [0, 0.5], got {}", self.epsilon)));
        }
        if self.kappa_ex + self.kappa_i <= 0.0 {
            return Err(Error::InvalidParams("kappa_ex + kappa_i must be positive".into()));
        }
        if let Some([lo, hi]) = self.g_scale_range {
            if !(0.0 < lo && lo <= hi && hi <= 1.0) {
                return Err(Error::InvalidParams(format!("g_scale_range [{lo}, {hi}] must satisfy 0 < lo <= hi <= 1")));
            }
        }
        Ok(())
    }

    pub fn rates(&self) -> Rates {
        Rates {
            g: mhz_to_rad_per_ns(self.g),
            kappa_ex: mhz_to_rad_per_ns(self.kappa_ex),
            kappa_i: mhz_to_rad_per_ns(self.kappa_i),
            gamma: mhz_to_rad_per_ns(self.gamma),
            delta: mhz_to_rad_per_ns(self.delta),
        }
    }

    pub fn gamma_1d(&self) -> Result<f64> {
        gamma_1d(self)
    }

    /// `Γ/γ`; infinite when `γ = 0` and `Γ > 0`.
    pub fn cooperativity(&self) -> Result<f64> {
        let g1d = gamma_1d(self)?;
        Ok(if g1d == 0.0 { 0.0 } else { g1d / self.gamma })
    }

    pub fn with_g_scale(&self, scale: f64) -> Self {
        Self {
            g: self.g * scale,
            ..self.clone()
        }
    }
}

/// Purcell-enhanced emission rate into the fiber, `2g²/(κ_ex+κ_i)`, in MHz·2π.
pub fn gamma_1d(params: &SystemParams) -> Result<f64> {
    let k = params.kappa_ex + params.kappa_i;
    if !(k > 0.0) {
        return Err(Error::InvalidParams("kappa_ex + kappa_i must be positive".into()));
    }
    Ok(2.0 * params.g * params.g / k)
}
