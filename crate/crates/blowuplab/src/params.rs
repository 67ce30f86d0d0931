//! Model parameters and the geometric constants derived from them.
//!
//! The system under study couples a density n(r, t) to an attractive
//! potential in d space dimensions. All solvers work on the averaged
//! density b rather than n, and the coefficients that appear there are
//! χ_d (volume of the unit ball), Θ (diffusivity), Θ₁ = 1/(4dχ_d) (the
//! largest diffusivity for which the sandwich estimates are certified)
//! and M₁ = 2d/(d−2) (the sharp constant in the upper bound
//! b(0,t) ≤ M₁/(T−t)).

use crate::error::{LabError, LabResult};
use serde::{Deserialize, Serialize};

/// Volume of the unit ball in `d` dimensions, π^{d/2} / Γ(d/2 + 1).
///
/// `d` is restricted to integers, so Γ(d/2 + 1) is evaluated exactly by the
/// half-integer recurrence instead of a general Γ implementation.
pub fn unit_ball_volume(d: u32) -> LabResult<f64> {
    if d < 1 {
        return Err(LabError::Domain(format!("dimension must be >= 1, got {d}")));
    }
    let pi = std::f64::consts::PI;
    // Γ(d/2 + 1): for even d this is (d/2)!, for odd d walk up from Γ(1/2) = √π.
    let gamma = if d % 2 == 0 {
        let mut g = 1.0;
        for k in 1..=(d / 2) {
            g *= k as f64;
        }
        g
    } else {
        let mut g = pi.sqrt();
        let mut x = 0.5;
        while x < d as f64 / 2.0 + 1.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    Ok(pi.powf(d as f64 / 2.0) / gamma)
}

/// Dimension, diffusivity and the constants derived from them.
///
/// Derived fields are recomputed by the constructor; deserialized values are
/// re-validated so a manifest edited by hand cannot smuggle in inconsistent
/// constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Space dimension (integer; the solvers require d >= 3).
    pub d: u32,
    /// Diffusivity Θ > 0.
    pub theta: f64,
    /// χ_d = volume of the unit ball.
    pub chi_d: f64,
    /// Θ₁ = 1 / (4 d χ_d).
    pub theta_one: f64,
    /// M₁ = 2d / (d − 2).
    pub m_one: f64,
}

impl Params {
    pub fn new(d: u32, theta: f64) -> LabResult<Self> {
        if d < 3 {
            return Err(LabError::Domain(format!(
                "dimension must be an integer >= 3, got {d}"
            )));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(LabError::Domain(format!("theta must be positive, got {theta}")));
        }
        let chi_d = unit_ball_volume(d)?;
        Ok(Params {
            d,
            theta,
            chi_d,
            theta_one: 1.0 / (4.0 * d as f64 * chi_d),
            m_one: 2.0 * d as f64 / (d as f64 - 2.0),
        })
    }

    /// Standard choice for the certified blow-up run: Θ = Θ₁ / 2 keeps the
    /// diffusivity strictly below the sandwich threshold.
    pub fn with_half_theta_one(d: u32) -> LabResult<Self> {
        let probe = Params::new(d, 1.0)?;
        Params::new(d, probe.theta_one / 2.0)
    }

    pub fn df(&self) -> f64 {
        self.d as f64
    }

    /// Combined diffusion coefficient χ_d Θ in front of the Laplacian of b.
    pub fn chi_theta(&self) -> f64 {
        self.chi_d * self.theta
    }

    /// Check that the stored derived constants match the primary fields.
    pub fn validate(&self) -> LabResult<()> {
        let fresh = Params::new(self.d, self.theta)?;
        if self.chi_d != fresh.chi_d
            || self.theta_one != fresh.theta_one
            || self.m_one != fresh.m_one
        {
            return Err(LabError::Config(format!(
                "derived constants do not match d={} theta={}: expected chi_d={}, theta_one={}, m_one={}",
                self.d, self.theta, fresh.chi_d, fresh.theta_one, fresh.m_one
            )));
        }
        Ok(())
    }

    /// The profile-family machinery is only validated on 3 <= d <= 9.
    pub fn require_family_range(&self) -> LabResult<()> {
        if self.d < 3 || self.d > 9 {
            return Err(LabError::Domain(format!(
                "profile family requires 3 <= d <= 9, got d = {}",
                self.d
            )));
        }
        Ok(())
    }
}
