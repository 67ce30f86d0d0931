//! Changes of variables: density n ↔ mass average b, and physical (r, t) ↔
//! self-similar (η, τ) coordinates.
//!
//! The mass average of a radial density n over the ball of radius r is
//!
//!   b(r) = (d χ_d / r^d) ∫₀^r n(y) y^{d−1} dy,      b(0) = χ_d n(0),
//!
//! and inversely n(r) = (r b_r / d + b) / χ_d. With blow-up time T the
//! self-similar variables are
//!
//!   τ = log(T / (T − t)),   η = r / sqrt(χ_d Θ (T − t)),   B = (T − t) b,
//!
//! so the fixed wall r = 1 sits at η = ℓ(τ) = (χ_d Θ T)^{−1/2} e^{τ/2}.

use crate::error::{LabError, LabResult};
use crate::field::{CoordinateKind, RadialField};
use crate::params::Params;

/// n(r) = (r·b_r/d + b)/χ_d using the crate's stencils; at r = 0 the term
/// r·b_r vanishes and n(0) = b(0)/χ_d.
pub fn n_from_b(b: &RadialField, params: &Params) -> LabResult<RadialField> {
    let grid = b.grid().to_vec();
    let br = b.derivative_even();
    let d = params.df();
    let values: Vec<f64> = grid
        .iter()
        .zip(b.values())
        .zip(&br)
        .map(|((&r, &bv), &bp)| (r * bp / d + bv) / params.chi_d)
        .collect();
    RadialField::new(b.kind(), grid, values)
}

/// b(r) = (d χ_d / r^d) ∫₀^r n y^{d−1} dy with exact per-interval moment
/// integration of the piecewise-linear interpolant of n, so constant n maps
/// to constant b at machine precision. Requires the grid to start at 0.
pub fn b_from_n(n: &RadialField, params: &Params) -> LabResult<RadialField> {
    if !n.starts_at_zero() {
        return Err(LabError::Domain(
            "b_from_n integrates from the origin: grid must start at r = 0".into(),
        ));
    }
    if let Some((i, &bad)) = n.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(LabError::Domain(format!(
            "density must be nonnegative, found {bad} at node {i} (r = {})",
            n.grid()[i]
        )));
    }
    let d = params.d as i32;
    let grid = n.grid();
    let vals = n.values();
    let mut cumulative = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        let (y0, y1) = (grid[i - 1], grid[i]);
        let (n0, n1) = (vals[i - 1], vals[i]);
        let slope = (n1 - n0) / (y1 - y0);
        // moments I_k = ∫ y^k dy over [y0, y1]
        let i_dm1 = (y1.powi(d) - y0.powi(d)) / d as f64;
        let i_d = (y1.powi(d + 1) - y0.powi(d + 1)) / (d + 1) as f64;
        cumulative[i] = cumulative[i - 1] + n0 * i_dm1 + slope * (i_d - y0 * i_dm1);
    }
    let dchi = d as f64 * params.chi_d;
    let values: Vec<f64> = grid
        .iter()
        .zip(&cumulative)
        .map(|(&r, &m)| {
            if r == 0.0 {
                params.chi_d * vals[0]
            } else {
                dchi * m / r.powi(d)
            }
        })
        .collect();
    RadialField::new(n.kind(), grid.to_vec(), values)
}

/// (t, r) → (τ, η). Rejects t outside [0, T).
pub fn to_selfsim(t: f64, r: f64, blowup_time: f64, params: &Params) -> LabResult<(f64, f64)> {
    if !(blowup_time > 0.0) || !blowup_time.is_finite() {
        return Err(LabError::Domain(format!("blow-up time must be positive, got {blowup_time}")));
    }
    if !(0.0..blowup_time).contains(&t) {
        return Err(LabError::Domain(format!(
            "time {t} outside [0, T) with T = {blowup_time}"
        )));
    }
    if r < 0.0 {
        return Err(LabError::Domain(format!("radius must be nonnegative, got {r}")));
    }
    let remaining = blowup_time - t;
    let tau = (blowup_time / remaining).ln();
    let eta = r / (params.chi_theta() * remaining).sqrt();
    Ok((tau, eta))
}

/// (τ, η) → (t, r), the inverse of [`to_selfsim`].
pub fn from_selfsim(tau: f64, eta: f64, blowup_time: f64, params: &Params) -> LabResult<(f64, f64)> {
    if tau < 0.0 || !tau.is_finite() || eta < 0.0 {
        return Err(LabError::Domain(format!("need tau >= 0 and eta >= 0, got ({tau}, {eta})")));
    }
    let remaining = blowup_time * (-tau).exp();
    let t = blowup_time - remaining;
    let r = eta * (params.chi_theta() * remaining).sqrt();
    Ok((t, r))
}

/// Similarity image of the fixed wall r = 1: ℓ(τ) = (χ_d Θ T)^{−1/2} e^{τ/2}.
pub fn ell(tau: f64, blowup_time: f64, params: &Params) -> f64 {
    (0.5 * tau).exp() / (params.chi_theta() * blowup_time).sqrt()
}

/// Rescaled amplitude B = (T − t) b at physical time t.
pub fn selfsim_value(b: f64, t: f64, blowup_time: f64) -> f64 {
    (blowup_time - t) * b
}

/// Physical amplitude b = B / (T e^{−τ}) at rescaled time τ.
pub fn physical_value(big_b: f64, tau: f64, blowup_time: f64) -> f64 {
    big_b * tau.exp() / blowup_time
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{graded_grid, uniform_grid};
    use rand::{Rng, SeedableRng};

    fn p3() -> Params {
        Params::with_half_theta_one(3).unwrap()
    }

    #[test]
    fn constant_b_gives_constant_n_and_back() {
        let p = p3();
        let grid = graded_grid(0.0, 1.0, 257, 4.0);
        let b = RadialField::sample(CoordinateKind::Physical, grid, |_| 1.0).unwrap();
        let n = n_from_b(&b, &p).unwrap();
        for &v in n.values() {
            assert!((v - 1.0 / p.chi_d).abs() < 1e-14);
        }
        let back = b_from_n(&n, &p).unwrap();
        for &v in back.values() {
            assert!((v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn quadratic_b_matches_symbolic_density() {
        let p = p3();
        let d = p.df();
        let grid = uniform_grid(0.0, 1.0, 301);
        let b = RadialField::sample(CoordinateKind::Physical, grid.clone(), |r| 2.0 - r * r).unwrap();
        let n = n_from_b(&b, &p).unwrap();
        for (&r, &v) in grid.iter().zip(n.values()) {
            let exact = (1.0 - 2.0 * r * r / d + (1.0 - r * r)) / p.chi_d;
            assert!((v - exact).abs() < 1e-12, "at r={r}: {v} vs {exact}");
        }
    }

    #[test]
    fn pure_singularity_has_no_mass_away_from_origin() {
        let p = p3();
        let grid = uniform_grid(0.2, 1.0, 4001);
        let b = RadialField::sample(CoordinateKind::Physical, grid.clone(), |r| r.powi(-3)).unwrap();
        let n = n_from_b(&b, &p).unwrap();
        for (&r, &v) in grid.iter().zip(n.values()) {
            let tol = if r >= 0.5 { 1e-5 } else { 1e-3 };
            assert!(v.abs() < tol, "at r={r}: n={v}");
        }
    }

    #[test]
    fn zero_density_and_negative_density() {
        let p = p3();
        let grid = uniform_grid(0.0, 1.0, 33);
        let zero = RadialField::sample(CoordinateKind::Physical, grid.clone(), |_| 0.0).unwrap();
        let b = b_from_n(&zero, &p).unwrap();
        assert!(b.values().iter().all(|&v| v == 0.0));

        let neg = RadialField::sample(CoordinateKind::Physical, grid, |r| 0.5 - r).unwrap();
        assert!(b_from_n(&neg, &p).is_err());
    }

    #[test]
    fn concentrated_unit_mass_looks_like_r_to_minus_d() {
        // Quartic bump supported in [0, 0.1], normalized so the total mass
        // d·χ_d·∫ n y^{d-1} dy equals 1; outside the support b(r) = r^{-d}.
        let p = p3();
        let r0 = 0.1_f64;
        // ∫₀^{r0} (1-(y/r0)²)² y² dy = r0³ · 8/105
        let bump_moment = r0.powi(3) * 8.0 / 105.0;
        let amp = 1.0 / (3.0 * p.chi_d * bump_moment);
        let mut grid = graded_grid(0.0, r0, 3001, 0.0);
        grid.extend(uniform_grid(r0 + 1e-9, 1.0, 500));
        let n = RadialField::sample(CoordinateKind::Physical, grid.clone(), |y| {
            if y <= r0 {
                let u = y / r0;
                amp * (1.0 - u * u).powi(2)
            } else {
                0.0
            }
        })
        .unwrap();
        let b = b_from_n(&n, &p).unwrap();
        for (&r, &v) in grid.iter().zip(b.values()) {
            if r >= 0.1001 {
                let exact = r.powi(-3);
                assert!(
                    ((v - exact) / exact).abs() < 1e-6,
                    "at r={r}: b={v} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn round_trip_converges_at_second_order() {
        let p = p3();
        let err_for = |nn: usize| {
            let grid = graded_grid(0.0, 1.0, nn, 3.0);
            let n0 = RadialField::sample(CoordinateKind::Physical, grid, |r| {
                0.3 + (-8.0 * r * r).exp()
            })
            .unwrap();
            let b = b_from_n(&n0, &p).unwrap();
            let n1 = n_from_b(&b, &p).unwrap();
            n0.values()
                .iter()
                .zip(n1.values())
                .map(|(a, c)| (a - c).abs())
                .fold(0.0f64, f64::max)
        };
        let e1 = err_for(201);
        let e2 = err_for(401);
        assert!(e1 / e2 > 3.0, "round trip not second order: {e1} vs {e2}");
        assert!(e2 < 1e-4);
    }

    #[test]
    fn selfsim_map_basics() {
        let p = p3();
        let t_total = 2.5;
        let (tau, eta) = to_selfsim(0.0, 0.3, t_total, &p).unwrap();
        assert_eq!(tau, 0.0);
        assert!((eta - 0.3 / (p.chi_theta() * t_total).sqrt()).abs() < 1e-15);

        // τ = 1 exactly when t = T(1 - e^{-1})
        let t1 = t_total * (1.0 - (-1.0f64).exp());
        let (tau1, _) = to_selfsim(t1, 0.1, t_total, &p).unwrap();
        assert!((tau1 - 1.0).abs() < 1e-12);

        // the wall lands on ℓ(τ)
        let (tauw, etaw) = to_selfsim(t1, 1.0, t_total, &p).unwrap();
        assert!((etaw - ell(tauw, t_total, &p)).abs() < 1e-12 * etaw);

        assert!(to_selfsim(t_total, 0.1, t_total, &p).is_err());
        assert!(to_selfsim(-0.1, 0.1, t_total, &p).is_err());
    }

    #[test]
    fn selfsim_round_trip_is_identity() {
        let p = p3();
        let t_total = 0.73;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let t: f64 = rng.gen_range(0.0..t_total * 0.999999);
            let r: f64 = rng.gen_range(0.0..1.0);
            let (tau, eta) = to_selfsim(t, r, t_total, &p).unwrap();
            let (t2, r2) = from_selfsim(tau, eta, t_total, &p).unwrap();
            assert!((t2 - t).abs() <= 1e-12 * (1.0 + t.abs()), "t: {t} vs {t2}");
            assert!((r2 - r).abs() <= 1e-12 * (1.0 + r.abs()), "r: {r} vs {r2}");
        }
    }

    #[test]
    fn amplitude_maps_are_inverse() {
        let t_total = 1.7_f64;
        let t = 0.9;
        let tau = (t_total / (t_total - t)).ln();
        let b = 5.3;
        let big = selfsim_value(b, t, t_total);
        assert!((physical_value(big, tau, t_total) - b).abs() < 1e-12);
    }
}
