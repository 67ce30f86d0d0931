//! Steady self-similar profiles of the rescaled equation.
//!
//! The stationary equation for φ(η) is
//!
//!   φ″ + (d+1)/η · φ′ + (η/d) φ φ′ − (η/2) φ′ + φ² − φ = 0,   φ′(0) = 0,
//!
//! and this module carries its closed-form solutions:
//!
//! * φ_S(η) = 2d/η²                  (singular, scale-invariant),
//! * φ₁(η) = 2d/(d − 2 + η²/2)       (bounded, decaying like 2d/η²·2(d−2)/η²… ),
//! * φ* ≡ 1 and φ ≡ 0                (spatially constant),
//!
//! plus a `Numeric` kind wrapping a tabulated solution from the steady-state
//! solver. Tabulated profiles extrapolate beyond their table with the
//! far-field asymptote φ ≈ C/η², C = η_end² φ(η_end).

use crate::error::{LabError, LabResult};
use crate::field::RadialField;
use crate::params::Params;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// φ_S = 2d/η², singular at the origin.
    #[serde(rename = "singular_S")]
    SingularS,
    /// φ₁ = 2d/(d−2+η²/2), the first bounded member of the steady family.
    #[serde(rename = "explicit_one")]
    ExplicitOne,
    /// φ ≡ 1.
    #[serde(rename = "constant_star")]
    ConstantStar,
    /// φ ≡ 0.
    #[serde(rename = "constant_zero")]
    ConstantZero,
    /// Tabulated profile produced by the steady-state solver.
    #[serde(rename = "numeric")]
    Numeric,
}

/// A steady profile: closed form or tabulated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Profile {
    pub kind: ProfileKind,
    /// Sample table for the `Numeric` kind, `None` otherwise.
    pub table: Option<RadialField>,
    pub params: Params,
}

impl Profile {
    pub fn singular(params: Params) -> Self {
        Profile { kind: ProfileKind::SingularS, table: None, params }
    }

    pub fn explicit_one(params: Params) -> Self {
        Profile { kind: ProfileKind::ExplicitOne, table: None, params }
    }

    pub fn constant_star(params: Params) -> Self {
        Profile { kind: ProfileKind::ConstantStar, table: None, params }
    }

    pub fn constant_zero(params: Params) -> Self {
        Profile { kind: ProfileKind::ConstantZero, table: None, params }
    }

    pub fn numeric(params: Params, table: RadialField) -> LabResult<Self> {
        if table.len() < 4 {
            return Err(LabError::Domain(format!(
                "numeric profile table needs at least 4 nodes, got {}",
                table.len()
            )));
        }
        Ok(Profile { kind: ProfileKind::Numeric, table: Some(table), params })
    }

    /// φ(η). The singular profile rejects η = 0.
    pub fn eval(&self, eta: f64) -> LabResult<f64> {
        if eta < 0.0 || !eta.is_finite() {
            return Err(LabError::Domain(format!("profile evaluation needs finite eta >= 0, got {eta}")));
        }
        let d = self.params.df();
        match self.kind {
            ProfileKind::SingularS => {
                if eta == 0.0 {
                    Err(LabError::Domain(
                        "singular profile 2d/eta^2 is undefined at eta = 0".into(),
                    ))
                } else {
                    Ok(2.0 * d / (eta * eta))
                }
            }
            ProfileKind::ExplicitOne => Ok(2.0 * d / (d - 2.0 + 0.5 * eta * eta)),
            ProfileKind::ConstantStar => Ok(1.0),
            ProfileKind::ConstantZero => Ok(0.0),
            ProfileKind::Numeric => {
                let table = self.table.as_ref().expect("numeric profile carries a table");
                let grid = table.grid();
                let end = grid[grid.len() - 1];
                if eta > end {
                    let c = end * end * table.values()[grid.len() - 1];
                    Ok(c / (eta * eta))
                } else {
                    Ok(table.interpolant().eval(eta))
                }
            }
        }
    }

    /// φ′(η).
    pub fn eval_derivative(&self, eta: f64) -> LabResult<f64> {
        if eta < 0.0 || !eta.is_finite() {
            return Err(LabError::Domain(format!("profile derivative needs finite eta >= 0, got {eta}")));
        }
        let d = self.params.df();
        match self.kind {
            ProfileKind::SingularS => {
                if eta == 0.0 {
                    Err(LabError::Domain(
                        "singular profile derivative is undefined at eta = 0".into(),
                    ))
                } else {
                    Ok(-4.0 * d / (eta * eta * eta))
                }
            }
            ProfileKind::ExplicitOne => {
                let q = d - 2.0 + 0.5 * eta * eta;
                Ok(-2.0 * d * eta / (q * q))
            }
            ProfileKind::ConstantStar | ProfileKind::ConstantZero => Ok(0.0),
            ProfileKind::Numeric => {
                let table = self.table.as_ref().expect("numeric profile carries a table");
                let grid = table.grid();
                let end = grid[grid.len() - 1];
                if eta >= end {
                    let c = end * end * table.values()[grid.len() - 1];
                    Ok(-2.0 * c / (eta * eta * eta))
                } else {
                    Ok(table.interpolant().eval_derivative(eta))
                }
            }
        }
    }

    /// φ″(η) for closed-form kinds. Tabulated profiles do not expose a second
    /// derivative; differentiate their grid with the field stencils instead.
    pub fn eval_second_derivative(&self, eta: f64) -> LabResult<f64> {
        let d = self.params.df();
        match self.kind {
            ProfileKind::SingularS => {
                if eta <= 0.0 {
                    Err(LabError::Domain("second derivative of 2d/eta^2 needs eta > 0".into()))
                } else {
                    Ok(12.0 * d / eta.powi(4))
                }
            }
            ProfileKind::ExplicitOne => {
                let q = d - 2.0 + 0.5 * eta * eta;
                Ok(-2.0 * d * (q - 2.0 * eta * eta) / (q * q * q))
            }
            ProfileKind::ConstantStar | ProfileKind::ConstantZero => Ok(0.0),
            ProfileKind::Numeric => Err(LabError::Domain(
                "tabulated profiles do not carry an analytic second derivative".into(),
            )),
        }
    }

    /// Value of G(η) = η²φ(η).
    pub fn eval_g(&self, eta: f64) -> LabResult<f64> {
        if self.kind == ProfileKind::SingularS {
            return Ok(2.0 * self.params.df());
        }
        Ok(eta * eta * self.eval(eta)?)
    }
}

/// Pointwise residual of the stationary equation given value and derivatives
/// at one η. At η = 0 the symmetric limit replaces (d+1)/η·φ′ by (d+1)φ″,
/// so the residual becomes (d+2)φ″(0) + φ(0)² − φ(0) (valid since φ′(0) = 0
/// for smooth even profiles).
pub fn steady_residual(eta: f64, phi: f64, dphi: f64, d2phi: f64, params: &Params) -> f64 {
    let d = params.df();
    if eta == 0.0 {
        (d + 2.0) * d2phi + phi * phi - phi
    } else {
        d2phi + (d + 1.0) / eta * dphi + (eta / d) * phi * dphi - 0.5 * eta * dphi + phi * phi
            - phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roots::count_sign_changes;

    fn p3() -> Params {
        Params::with_half_theta_one(3).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let p = p3();
        let s = Profile::singular(p);
        let one = Profile::explicit_one(p);
        let star = Profile::constant_star(p);
        assert_eq!(s.eval(1.0).unwrap(), 6.0);
        assert_eq!(one.eval(0.0).unwrap(), 6.0);
        assert_eq!(star.eval(7.3).unwrap(), 1.0);
        assert_eq!(Profile::constant_zero(p).eval(2.0).unwrap(), 0.0);
        assert!(s.eval(0.0).is_err());
        assert!(s.eval(f64::NAN).is_err());
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let p = p3();
        for prof in [Profile::singular(p), Profile::explicit_one(p)] {
            for k in 1..40 {
                let eta = 0.3 + 0.5 * k as f64;
                let h = 1e-6;
                let fd1 = (prof.eval(eta + h).unwrap() - prof.eval(eta - h).unwrap()) / (2.0 * h);
                let fd2 = (prof.eval(eta + h).unwrap() - 2.0 * prof.eval(eta).unwrap()
                    + prof.eval(eta - h).unwrap())
                    / (h * h);
                assert!((prof.eval_derivative(eta).unwrap() - fd1).abs() < 1e-5 * (1.0 + fd1.abs()));
                assert!(
                    (prof.eval_second_derivative(eta).unwrap() - fd2).abs()
                        < 1e-3 * (1.0 + fd2.abs())
                );
            }
        }
    }

    #[test]
    fn singular_profile_solves_both_identities() {
        // φ_S satisfies φ + ηφ′/2 = 0 (scale invariance) and separately the
        // stationary equation without the −ηφ′/2 − φ terms; together they give
        // the full residual.
        let p = p3();
        let s = Profile::singular(p);
        let d = p.df();
        for k in 1..=200 {
            let eta = 0.1 + (20.0 - 0.1) * k as f64 / 200.0;
            let (phi, dphi, d2phi) = (
                s.eval(eta).unwrap(),
                s.eval_derivative(eta).unwrap(),
                s.eval_second_derivative(eta).unwrap(),
            );
            let scale_inv = phi + 0.5 * eta * dphi;
            assert!(scale_inv.abs() < 1e-10 * (1.0 + phi.abs()), "at {eta}: {scale_inv}");
            let partial = d2phi + (d + 1.0) / eta * dphi + (eta / d) * phi * dphi + phi * phi;
            assert!(partial.abs() < 1e-9 * (1.0 + d2phi.abs()), "at {eta}: {partial}");
            let full = steady_residual(eta, phi, dphi, d2phi, &p);
            assert!(full.abs() < 1e-9 * (1.0 + d2phi.abs()), "at {eta}: {full}");
        }
    }

    #[test]
    fn explicit_profile_has_zero_residual_including_origin() {
        for d in [3u32, 4, 5, 7] {
            let p = Params::new(d, 0.01).unwrap();
            let prof = Profile::explicit_one(p);
            for k in 0..=400 {
                let eta = 20.0 * k as f64 / 400.0;
                let r = steady_residual(
                    eta,
                    prof.eval(eta).unwrap(),
                    prof.eval_derivative(eta).unwrap(),
                    prof.eval_second_derivative(eta).unwrap(),
                    &p,
                );
                assert!(r.abs() < 1e-10, "d={d}, eta={eta}: residual {r}");
            }
        }
    }

    #[test]
    fn constants_are_equilibria() {
        let p = p3();
        for (prof, val) in [
            (Profile::constant_star(p), 1.0f64),
            (Profile::constant_zero(p), 0.0),
        ] {
            for eta in [0.0, 0.5, 3.0, 15.0] {
                let r = steady_residual(eta, val, 0.0, 0.0, &p);
                assert_eq!(r, 0.0);
                assert_eq!(prof.eval(eta).unwrap(), val);
            }
        }
    }

    #[test]
    fn pairwise_crossings_land_at_the_known_radii() {
        let p = p3();
        let s = Profile::singular(p);
        let one = Profile::explicit_one(p);
        let star = Profile::constant_star(p);

        let diff = |a: &Profile, b: &Profile| {
            let (a, b) = (a.clone(), b.clone());
            move |eta: f64| a.eval(eta).unwrap() - b.eval(eta).unwrap()
        };
        // φ₁ vs φ_S: single crossing at sqrt(2(d-2)) = sqrt(2)
        let c1 = count_sign_changes(diff(&one, &s), 0.05, 20.0, 4000, 1e-9);
        let genuine: Vec<_> = c1.iter().filter(|c| !c.tangential).collect();
        assert_eq!(genuine.len(), 1);
        assert!((genuine[0].x - 2.0f64.sqrt()).abs() < 1e-9);

        // φ* vs φ_S: single crossing at sqrt(2d) = sqrt(6)
        let c2 = count_sign_changes(diff(&star, &s), 0.05, 20.0, 4000, 1e-9);
        let genuine: Vec<_> = c2.iter().filter(|c| !c.tangential).collect();
        assert_eq!(genuine.len(), 1);
        assert!((genuine[0].x - 6.0f64.sqrt()).abs() < 1e-9);

        // φ* vs φ₁: single crossing at sqrt(2(d+2)) = sqrt(10)
        let c3 = count_sign_changes(diff(&star, &one), 0.0, 20.0, 4000, 1e-9);
        let genuine: Vec<_> = c3.iter().filter(|c| !c.tangential).collect();
        assert_eq!(genuine.len(), 1);
        assert!((genuine[0].x - 10.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn numeric_profile_interpolates_and_extends_with_tail() {
        let p = p3();
        let grid = crate::field::graded_grid(0.0, 25.0, 2001, 2.0);
        let exact = Profile::explicit_one(p);
        let table = RadialField::sample(crate::field::CoordinateKind::SelfSimilar, grid, |eta| {
            exact.eval(eta).unwrap()
        })
        .unwrap();
        let num = Profile::numeric(p, table).unwrap();
        for eta in [0.0, 0.31, 2.7, 14.9, 24.99] {
            assert!((num.eval(eta).unwrap() - exact.eval(eta).unwrap()).abs() < 1e-6, "at {eta}");
        }
        // beyond the table: 2d/eta^2 tail with C from the table end
        let far = num.eval(40.0).unwrap();
        let c_end = 25.0 * 25.0 * exact.eval(25.0).unwrap();
        assert!((far - c_end / 1600.0).abs() < 1e-12);
        assert!((num.eval_derivative(40.0).unwrap() + 2.0 * c_end / 40.0f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn g_form_of_singular_profile_is_constant() {
        let p = p3();
        let s = Profile::singular(p);
        assert_eq!(s.eval_g(0.0).unwrap(), 6.0);
        assert_eq!(s.eval_g(11.0).unwrap(), 6.0);
        let one = Profile::explicit_one(p);
        assert!((one.eval_g(1e6).unwrap() - 12.0).abs() < 1e-3);
    }
}
