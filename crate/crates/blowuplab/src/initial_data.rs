//! Admissibility checks for initial data b₀ on [0, 1], plus the built-in
//! families used by presets.
//!
//! The blow-up theory needs three hypotheses, checked here in b-form with
//! the crate's stencils:
//!
//! 1. the underlying density n₀ = (r b₀′/d + b₀)/χ_d is nonnegative (with
//!    smoothness proxied by finite discrete derivatives),
//! 2. b₀ is radially nonincreasing,
//! 3. the parabolic operator applied to b₀ is nonnegative, i.e. the solution
//!    starts pointwise nondecreasing in time.
//!
//! Violations are measured relative to each check's own scale; the report
//! carries the worst scaled violation and where it occurs.

use crate::error::{LabError, LabResult};
use crate::field::{d1_backward, d2_one_sided, RadialField};
use crate::params::Params;
use crate::pde::physical_rhs;
use crate::transform::n_from_b;
use serde::{Deserialize, Serialize};

/// Dimensionless slack for "nonnegative": absorbs roundoff without masking
/// genuine violations.
pub const NONNEG_TOL: f64 = 1e-10;

/// Outcome of [`validate_initial_data`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialDataReport {
    /// Density n₀ ≥ 0 (and discrete derivatives finite).
    pub density_nonnegative: bool,
    /// b₀ nonincreasing in r.
    pub radially_nonincreasing: bool,
    /// Parabolic operator of b₀ ≥ 0, so b is initially nondecreasing in t.
    pub initially_nondecreasing: bool,
    /// Largest violation across the three checks, scaled by that check's
    /// magnitude (max(1, sup |quantity|)); ≤ NONNEG_TOL iff all checks pass.
    pub worst_violation: f64,
    /// Radius where the worst violation occurs.
    pub worst_location: f64,
    /// Which check produced the worst violation.
    pub worst_check: String,
}

impl InitialDataReport {
    pub fn all_ok(&self) -> bool {
        self.density_nonnegative && self.radially_nonincreasing && self.initially_nondecreasing
    }
}

/// Largest entry of `viol` (a per-node violation magnitude, positive = bad),
/// scaled by max(1, sup|reference|); returns (scaled violation, location).
fn worst(viol: impl Iterator<Item = (f64, f64)>, scale: f64) -> (f64, f64) {
    let s = scale.max(1.0);
    let mut worst_v = f64::NEG_INFINITY;
    let mut worst_r = 0.0;
    for (v, r) in viol {
        if v > worst_v {
            worst_v = v;
            worst_r = r;
        }
    }
    (worst_v / s, worst_r)
}

/// Evaluate the three admissibility hypotheses on `b0`. The grid must span
/// [0, 1]; the boundary value itself is checked by the solver, not here, so
/// deliberately inadmissible examples can still be diagnosed.
pub fn validate_initial_data(b0: &RadialField, params: &Params) -> LabResult<InitialDataReport> {
    let grid = b0.grid();
    if grid[0] != 0.0 || (grid[grid.len() - 1] - 1.0).abs() > 1e-12 {
        return Err(LabError::Domain(format!(
            "initial data must live on [0, 1], got [{}, {}]",
            grid[0],
            grid[grid.len() - 1]
        )));
    }

    // density nonnegativity
    let n = n_from_b(b0, params)?;
    let n_scale = n.values().iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let (density_viol, density_loc) = worst(
        n.values().iter().zip(grid).map(|(&v, &r)| (-v, r)),
        n_scale,
    );

    // radial monotonicity
    let br = b0.derivative_even();
    let br_scale = br.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let (mono_viol, mono_loc) = worst(br.iter().zip(grid).map(|(&v, &r)| (v, r)), br_scale);

    // parabolic operator sign: interior and origin rows from the solver
    // stencil; the Dirichlet row is replaced by the one-sided operator value
    // so the hypothesis is checked up to the wall.
    let mut rhs = physical_rhs(b0, params)?;
    let nlen = grid.len();
    let vals = b0.values();
    let d = params.df();
    let r_end = grid[nlen - 1];
    let d1 = d1_backward(grid, vals, nlen - 1);
    let d2 = d2_one_sided(grid, vals, false);
    rhs[nlen - 1] = params.chi_theta() * (d2 + (d + 1.0) / r_end * d1)
        + (r_end / d) * vals[nlen - 1] * d1
        + vals[nlen - 1] * vals[nlen - 1];
    let rhs_scale = rhs.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let (bt_viol, bt_loc) = worst(rhs.iter().zip(grid).map(|(&v, &r)| (-v, r)), rhs_scale);

    let checks = [
        ("density_nonnegative", density_viol, density_loc),
        ("radially_nonincreasing", mono_viol, mono_loc),
        ("initially_nondecreasing", bt_viol, bt_loc),
    ];
    let (worst_check, worst_violation, worst_location) = checks
        .iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|&(name, v, l)| (name.to_string(), v, l))
        .unwrap();

    Ok(InitialDataReport {
        density_nonnegative: density_viol <= NONNEG_TOL,
        radially_nonincreasing: mono_viol <= NONNEG_TOL,
        initially_nondecreasing: bt_viol <= NONNEG_TOL,
        worst_violation,
        worst_location,
        worst_check,
    })
}

/// b₀(r) = K₁ + K₂/(r^d + K₃) with K₁ chosen so b₀(1) = 1. All three
/// admissibility hypotheses hold whenever Θ < K₂/(2 d² χ_d) (see
/// [`rational_theta_bound`]).
pub fn rational_initial_data(
    params: &Params,
    k2: f64,
    k3: f64,
    grid: Vec<f64>,
) -> LabResult<RadialField> {
    if !(k2 > 0.0) || !(k3 > 0.0) {
        return Err(LabError::Domain(format!(
            "rational family needs K2 > 0 and K3 > 0, got K2 = {k2}, K3 = {k3}"
        )));
    }
    let k1 = 1.0 - k2 / (1.0 + k3);
    if k1 < 0.0 {
        return Err(LabError::Domain(format!(
            "rational family constant K1 = 1 - K2/(1+K3) = {k1} is negative"
        )));
    }
    let dp = params.d as i32;
    RadialField::sample(crate::field::CoordinateKind::Physical, grid, |r| {
        k1 + k2 / (r.powi(dp) + k3)
    })
}

/// Largest diffusivity for which the rational family with amplitude `k2`
/// keeps the parabolic operator nonnegative: K₂ / (2 d² χ_d).
pub fn rational_theta_bound(params: &Params, k2: f64) -> f64 {
    k2 / (2.0 * params.df() * params.df() * params.chi_d)
}
