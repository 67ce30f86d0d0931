//! Self-similar solver on the expanding domain [0, ℓ(τ)].
//!
//! In rescaled variables the unknown B(η, τ) obeys
//!
//!   B_τ = B_ηη + (d+1)/η · B_η + (η/d) B B_η − (η/2) B_η + B² − B,
//!   B_η(0, τ) = 0,    B(ℓ(τ), τ) = T e^{−τ},    ℓ(τ) = (χ_d Θ T)^{−1/2} e^{τ/2},
//!
//! and every bounded steady profile of the steady module is an equilibrium
//! of this flow. The domain endpoint grows like e^{τ/2} while the solution
//! structure concentrates on a fixed core, so all meshes are cut from one
//! fixed ladder of nodes: a graded core on [0, 40] continued by
//! geometrically growing outer rungs. Nodes never move once the domain has
//! passed them, which pins the discrete equilibria in place across
//! remeshes. The solver remeshes on a fixed τ cadence (and at every
//! checkpoint), refilling newly exposed outer nodes from the far-field
//! boundary value; between remeshes the outermost retained node carries
//! the moving Dirichlet value, and the outflow advection −(η/2)B_η screens
//! the interior from the small truncation this causes.
//!
//! Time stepping is Crank-Nicolson with two Picard sweeps per step: the
//! advection coefficient and the linearized reaction 2B − 1 are refreshed
//! from the latest iterate, and each sweep costs one tridiagonal solve.
//! Advection is discretized centrally where the cell Péclet number allows
//! and by first-order upwinding in the far field, where the profile is
//! exponentially flat and the extra numerical diffusion is harmless.
//!
//! Besides the integrator the module carries the profile diagnostics that
//! run along it: intersection counting between profiles with a tangency
//! band, the per-checkpoint zero-number series, and a bisection refiner for
//! the blow-up time that exploits the instability of the time-shift mode
//! (a misestimated T makes B(0, τ) drift away from its plateau at the rate
//! e^{τ}, so the drift direction brackets T to near machine precision).

use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};
use crate::field::{graded_grid, uniform_grid, CoordinateKind, MonotoneCubic, RadialField};
use crate::params::Params;
use crate::pde::{Snapshot, SolverConfig};
use crate::profiles::Profile;
use crate::roots::count_sign_changes;
use crate::steady::solve_tridiagonal;
use crate::transform;

/// Span of the fixed-resolution core kept in every mesh.
const CORE_SPAN: f64 = 40.0;
/// Log ratio of last to first core spacing (≈ e³ ≈ 20:1 grading).
const CORE_STRETCH: f64 = 3.0;
/// Growth ratio of the mesh spacing beyond the core.
const OUTER_GROWTH: f64 = 1.08;
/// Remesh cadence in τ. Between remeshes the outer Dirichlet node lags the
/// true endpoint by at most the factor e^{−REMESH_DTAU/2} ≈ 0.88, which
/// keeps it inside the exponentially flat far field.
const REMESH_DTAU: f64 = 0.25;
/// Base τ step; the actual step is dt_safety · BASE_DTAU.
const BASE_DTAU: f64 = 2.5e-3;
/// First geometric checkpoint and the ratio between consecutive ones.
const CHECKPOINT_FIRST: f64 = 0.5;
const CHECKPOINT_RATIO: f64 = 1.25;
/// Two profile values closer than this band only touch; they do not cross.
pub const TANGENCY_BAND: f64 = 1e-9;
/// Radius of the window [0, C] on which consecutive checkpoint profiles are
/// compared in the sup norm.
const DISTANCE_WINDOW: f64 = 5.0;
/// An origin value beyond RUNAWAY_FACTOR · m_one (or below 1e-4) means the
/// run has left the similarity regime entirely; it is cut short with a
/// warning instead of burning steps on a diverging state.
const RUNAWAY_FACTOR: f64 = 100.0;
/// Consecutive monitor stops outside the plateau band before a
/// transformation-inconsistency warning is raised.
const DRIFT_PATIENCE: usize = 3;
/// Relative undershoot of the plateau floor B(0, τ) ≥ 1 tolerated silently;
/// a sustained dip below it signals an underestimated blow-up time.
const DRIFT_BAND: f64 = 1e-3;
/// Relative overshoot of the plateau ceiling m_one tolerated silently. The
/// ceiling monitor detects the exponential climb of an overestimated
/// blow-up time, so the margin only needs to clear the discrete
/// equilibrium's mesh offset, not track it tightly.
const UPPER_MARGIN: f64 = 0.05;
/// Horizon for blow-up-time refinement probes. A time offset δT excites the
/// unstable time-translation mode of the plateau, which grows like δT e^{τ}
/// and trips the probe bands near B(0,τ) ~ 12 m_one once
/// δT ≳ band / e^{REFINE_TAU}; at 39 that threshold sits below one ulp of a
/// time near 1, so the bisection separates candidates down to the f64
/// granularity of the blow-up time itself. The depth matters because a
/// later rescaled run to τ_max inherits an error ~ δT e^{τ_max}; the
/// certification must reach beyond any τ_max the refined time is used with.
const REFINE_TAU: f64 = 39.0;
/// Horizon of the one-ulp centering probes that finish a refinement: deep
/// enough that a single ulp of time offset moves the origin value
/// measurably (ulp · e^{29} ~ 1e-3), shallow enough that a ±2 ulp candidate
/// still holds the plateau.
const SELECT_TAU: f64 = 29.0;

/// The rescaled solution at one instant τ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RescaledState {
    /// Logarithmic time τ = ln(T / (T − t)).
    pub tau: f64,
    /// B on [0, ℓ(τ)], stored on the solver mesh.
    pub b: RadialField,
    /// Domain endpoint ℓ(τ) = (χ_d Θ T)^{−1/2} e^{τ/2}.
    pub ell: f64,
    /// Blow-up time the rescaling was built with.
    pub blowup_time: f64,
}

impl RescaledState {
    /// Origin value B(0, τ).
    pub fn origin_value(&self) -> f64 {
        self.b.values()[0]
    }
}

/// Far-field closure of the rescaled problem.
#[derive(Debug, Clone)]
pub enum TailBoundary {
    /// The moving Dirichlet value T e^{−τ} induced by the fixed physical
    /// wall value b(1, t) = 1. This is the physically meaningful closure.
    Similarity,
    /// Pin the endpoint (and newly exposed nodes) to a fixed profile. This
    /// turns exact equilibria into exact fixed points of the discrete flow
    /// and exists for convergence studies with synthetic data.
    FromProfile(Profile),
}

/// End-of-run diagnostics extracted from the checkpoint trail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmegaReport {
    /// The final checkpoint as an interpolable profile.
    pub profile: Profile,
    /// (τ_j, sup_{[0, C]} |B_j − B_{j−1}|) for consecutive checkpoints.
    pub sup_distance_history: Vec<(f64, f64)>,
    /// Number of transversal intersections of the final profile with the
    /// singular steady profile 2d/η².
    pub intersections_with_singular: usize,
    /// True when the final profile crosses the singular profile exactly
    /// once, the defining property of the attracting profile class.
    pub s1_member: bool,
    /// Transformation-inconsistency and runaway warnings collected during
    /// the run, empty for a healthy one.
    pub warnings: Vec<String>,
}

/// A full rescaled run: the checkpoint trail plus its diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RescaledRun {
    /// States at τ = 0, at every geometric checkpoint, and at tau_max.
    pub states: Vec<RescaledState>,
    /// Diagnostics of the final profile and the approach to it.
    pub omega: OmegaReport,
}

/// Transversal crossings and tangential contacts between two profiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntersectionCount {
    /// Abscissae of sign changes of A − B, bisection-sharpened.
    pub crossings: Vec<f64>,
    /// Abscissae where |A − B| dips below the tangency band without a sign
    /// change; reported separately and not counted as crossings.
    pub tangencies: Vec<f64>,
}

/// Zero-number series of a run against a reference profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroNumberReport {
    /// (τ_j, Z(τ_j)): transversal crossings with the reference at each
    /// checkpoint.
    pub series: Vec<(f64, usize)>,
    /// Checkpoints where Z increased and stayed increased: genuine
    /// violations of zero-number monotonicity.
    pub violations: Vec<String>,
    /// One-sample increases that immediately recover; these accompany
    /// domain growth, which can expose an extra far-field crossing for a
    /// single checkpoint, and are logged rather than flagged.
    pub transients: Vec<String>,
}

/// τ step used by the integrator under the given configuration.
fn tau_step(cfg: &SolverConfig) -> f64 {
    cfg.dt_safety * BASE_DTAU
}

/// Mesh on [0, ell], cut from a fixed ladder of nodes: a graded core
/// (spacing ratio e^CORE_STRETCH over [0, CORE_SPAN]) continued by
/// geometrically growing outer rungs. The ladder depends only on the
/// configuration, never on ell, so a node that has entered the mesh keeps
/// its position at every later remesh and only the endpoint node tracks
/// the growing domain; this pins the discrete equilibria in place while
/// the domain expands. A rung too close to ell (inside 0.3 of the local
/// spacing) is left out to avoid a degenerate last cell.
fn expanding_mesh(ell: f64, cfg: &SolverConfig) -> Vec<f64> {
    let n_core = cfg.grid_size.max(64);
    let core = graded_grid(0.0, CORE_SPAN, n_core, CORE_STRETCH);
    let mut grid: Vec<f64> = Vec::with_capacity(n_core + 64);
    if ell <= CORE_SPAN {
        for (i, &x) in core.iter().enumerate() {
            let h_next = core[(i + 1).min(n_core - 1)] - core[i.min(n_core - 2)];
            if x < ell - 0.3 * h_next {
                grid.push(x);
            } else {
                break;
            }
        }
        grid.push(ell);
        if grid.len() < 48 {
            // a tiny domain catches too few ladder nodes to integrate on
            return uniform_grid(0.0, ell, 48);
        }
        return grid;
    }
    grid.extend_from_slice(&core);
    let mut step = core[n_core - 1] - core[n_core - 2];
    let mut x = CORE_SPAN;
    loop {
        step *= OUTER_GROWTH;
        let next = x + step;
        if next >= ell - 0.3 * step {
            grid.push(ell);
            break;
        }
        grid.push(next);
        x = next;
    }
    grid
}

/// Geometric checkpoint times: CHECKPOINT_FIRST, then ratio
/// CHECKPOINT_RATIO, with tau_max always included as the last entry.
fn checkpoint_taus(tau_max: f64) -> Vec<f64> {
    let mut taus = Vec::new();
    let mut t = CHECKPOINT_FIRST;
    while t < tau_max * (1.0 - 1e-9) {
        taus.push(t);
        t *= CHECKPOINT_RATIO;
    }
    taus.push(tau_max);
    taus
}

/// Integration stops: remesh ticks every REMESH_DTAU merged with the
/// checkpoints, each stop tagged with whether it records a state.
fn stop_schedule(tau_max: f64) -> Vec<(f64, bool)> {
    let mut stops: Vec<(f64, bool)> = checkpoint_taus(tau_max)
        .into_iter()
        .map(|t| (t, true))
        .collect();
    let mut k = 1.0;
    while k * REMESH_DTAU < tau_max * (1.0 - 1e-9) {
        stops.push((k * REMESH_DTAU, false));
        k += 1.0;
    }
    stops.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite stop times"));
    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(stops.len());
    for (t, cp) in stops {
        match merged.last_mut() {
            Some((prev, prev_cp)) if (t - *prev).abs() < 1e-9 => *prev_cp |= cp,
            _ => merged.push((t, cp)),
        }
    }
    merged
}

/// Split weights of one advection-diffusion row: diffusion face factors
/// (fm, fp), slope-stencil factors (am, ap), and the advection speed `a`
/// frozen at the value `bc`.
struct RowParts {
    fm: f64,
    fp: f64,
    am: f64,
    ap: f64,
    a: f64,
}

#[inline]
fn row_parts(grid: &[f64], dpow: i32, d: f64, i: usize, bc: f64) -> RowParts {
    let eta = grid[i];
    let hm = eta - grid[i - 1];
    let hp = grid[i + 1] - eta;
    let rm = 0.5 * (eta + grid[i - 1]);
    let rp = 0.5 * (eta + grid[i + 1]);
    // finite-volume normalization: divide the face-flux difference by the
    // exact cell volume in the η^{d+1} measure. Away from the axis this
    // matches the midpoint rule to second order; at the first nodes it is
    // what keeps the truncation error bounded (the midpoint denominator is
    // off by an O(1) factor there).
    let volume = (rp.powi(dpow + 1) - rm.powi(dpow + 1)) / f64::from(dpow + 1);
    let fm = rm.powi(dpow) / (hm * volume);
    let fp = rp.powi(dpow) / (hp * volume);
    let a = eta * (bc / d - 0.5);
    let (am, ap) = if a.abs() * hm.max(hp) * 0.5 <= 1.0 {
        // centered slope in difference form
        (-hp / (hm * (hm + hp)), hm / (hp * (hm + hp)))
    } else if a < 0.0 {
        // characteristics move outward: slope from the inner side
        (-1.0 / hm, 0.0)
    } else {
        (0.0, 1.0 / hp)
    };
    RowParts { fm, fp, am, ap, a }
}

/// Difference-form weights (c_sub, c_sup) of the advection-diffusion row i
/// with the advection coefficient frozen at the value `bc`; the row acts as
/// c_sub · (v_{i−1} − v_i) + c_sup · (v_{i+1} − v_i), so constants are
/// annihilated exactly and the diagonal weight is −(c_sub + c_sup).
#[inline]
fn row_weights(grid: &[f64], dpow: i32, d: f64, i: usize, bc: f64) -> (f64, f64) {
    let p = row_parts(grid, dpow, d, i, bc);
    (p.fm + p.a * p.am, p.fp + p.a * p.ap)
}

/// Even-extension origin closure: with B_η(0) = 0 the diffusion reduces to
/// (d + 2) B_ηη(0), discretized as oc · (v_1 − v_0).
#[inline]
fn origin_coeff(grid: &[f64], d: f64) -> f64 {
    let h0 = grid[1] - grid[0];
    (d + 2.0) * 2.0 / (h0 * h0)
}

/// Full semi-discrete right-hand side with coefficients frozen at `coeff`
/// and applied to `v`. The first row uses the origin closure when the grid
/// starts at zero and is zeroed otherwise (segment evaluations); the last
/// row is always zero (Dirichlet).
fn apply_operator(grid: &[f64], dpow: i32, d: f64, coeff: &[f64], v: &[f64], out: &mut [f64]) {
    let n = grid.len();
    out[0] = if grid[0] == 0.0 {
        origin_coeff(grid, d) * (v[1] - v[0]) + v[0] * v[0] - v[0]
    } else {
        0.0
    };
    for i in 1..n - 1 {
        let (cs, cp) = row_weights(grid, dpow, d, i, coeff[i]);
        out[i] = cs * (v[i - 1] - v[i]) + cp * (v[i + 1] - v[i]) + v[i] * v[i] - v[i];
    }
    out[n - 1] = 0.0;
}

/// Semi-discrete right-hand side of the rescaled equation on the field's
/// own grid, with the advection coefficient taken from the field itself.
/// Boundary rows follow `apply_operator`. Exact for constants: B ≡ 1 gives
/// an identically zero interior.
pub fn rescaled_rhs(b: &RadialField, params: &Params) -> LabResult<Vec<f64>> {
    params.validate()?;
    if b.kind() != CoordinateKind::SelfSimilar {
        return Err(LabError::Domain(
            "rescaled_rhs needs a self-similar-coordinate field".into(),
        ));
    }
    if b.len() < 3 {
        return Err(LabError::Domain(
            "rescaled_rhs needs at least 3 grid nodes".into(),
        ));
    }
    let mut out = vec![0.0; b.len()];
    apply_operator(
        b.grid(),
        params.d as i32 + 1,
        params.df(),
        b.values(),
        b.values(),
        &mut out,
    );
    Ok(out)
}

/// Newton-polish `v` into the discrete stationary state of the semi-discrete
/// operator on `grid`, holding the last node fixed. Returns the final max
/// residual. The time stepper preserves semi-discrete equilibria to rounding,
/// so a polished start isolates integration effects from the mesh-truncation
/// offset of a closed-form profile.
pub(crate) fn polish_stationary(grid: &[f64], v: &mut [f64], dpow: i32, d: f64) -> f64 {
    let n = grid.len();
    let mut g = vec![0.0; n];
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for _ in 0..30 {
        apply_operator(grid, dpow, d, v, v, &mut g);
        let res = g.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
        if res < 1e-13 {
            break;
        }
        if grid[0] == 0.0 {
            let oc = origin_coeff(grid, d);
            sub[0] = 0.0;
            diag[0] = -oc + 2.0 * v[0] - 1.0;
            sup[0] = oc;
            g[0] = -g[0];
        } else {
            sub[0] = 0.0;
            diag[0] = 1.0;
            sup[0] = 0.0;
            g[0] = 0.0;
        }
        for i in 1..n - 1 {
            let p = row_parts(grid, dpow, d, i, v[i]);
            let cs = p.fm + p.a * p.am;
            let cp = p.fp + p.a * p.ap;
            let slope = p.am * (v[i - 1] - v[i]) + p.ap * (v[i + 1] - v[i]);
            sub[i] = cs;
            sup[i] = cp;
            // the advection speed depends on the local value, so the exact
            // Jacobian picks up the slope term beyond the frozen-coefficient
            // weights
            diag[i] = -(cs + cp) + 2.0 * v[i] - 1.0 + grid[i] / d * slope;
            g[i] = -g[i];
        }
        sub[n - 1] = 0.0;
        diag[n - 1] = 1.0;
        sup[n - 1] = 0.0;
        g[n - 1] = 0.0;
        solve_tridiagonal(&sub, &diag, &sup, &mut g);
        for i in 0..n {
            v[i] += g[i];
        }
    }
    apply_operator(grid, dpow, d, v, v, &mut g);
    g.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

/// Scratch vectors of the Crank-Nicolson step, reused between steps and
/// resized at remeshes.
struct StepWorkspace {
    f_n: Vec<f64>,
    bc: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    rhs: Vec<f64>,
}

impl StepWorkspace {
    fn sized(n: usize) -> Self {
        StepWorkspace {
            f_n: vec![0.0; n],
            bc: vec![0.0; n],
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    fn resize(&mut self, n: usize) {
        self.f_n.resize(n, 0.0);
        self.bc.resize(n, 0.0);
        self.sub.resize(n, 0.0);
        self.diag.resize(n, 0.0);
        self.sup.resize(n, 0.0);
        self.rhs.resize(n, 0.0);
    }
}

/// Advance `v` from tau_from to tau_to with Crank-Nicolson steps of size at
/// most `dtau_target`, two Picard sweeps per step. The endpoint node slides
/// along `ell_of` every step, so the Dirichlet value `tail_value(τ, η)` is
/// imposed at the true domain edge instead of at a frozen one; freezing the
/// edge between remeshes understates the annexed far field and the inward
/// η/2-drift carries that deficit into the core.
#[allow(clippy::too_many_arguments)]
fn advance_segment(
    grid: &mut [f64],
    v: &mut [f64],
    tau_from: f64,
    tau_to: f64,
    dtau_target: f64,
    ell_of: &dyn Fn(f64) -> f64,
    tail_value: &dyn Fn(f64, f64) -> f64,
    dpow: i32,
    d: f64,
    ws: &mut StepWorkspace,
) -> LabResult<()> {
    let n = grid.len();
    let span = tau_to - tau_from;
    let n_steps = (span / dtau_target).ceil().max(1.0) as usize;
    let dtau = span / n_steps as f64;
    let s = 0.5 * dtau;
    let oc = origin_coeff(grid, d);
    for k in 0..n_steps {
        let tau_now = tau_from + span * k as f64 / n_steps as f64;
        let tau_next = tau_from + span * (k + 1) as f64 / n_steps as f64;
        // slide the edge and resample its value before the explicit half so
        // both halves of the step see a single geometry
        grid[n - 1] = ell_of(tau_next);
        v[n - 1] = tail_value(tau_now, grid[n - 1]);
        apply_operator(grid, dpow, d, v, v, &mut ws.f_n);
        ws.bc.copy_from_slice(v);
        for _ in 0..2 {
            for i in 0..n - 1 {
                ws.rhs[i] = v[i] + s * ws.f_n[i] - s * ws.bc[i] * ws.bc[i];
            }
            ws.rhs[n - 1] = tail_value(tau_next, grid[n - 1]);
            ws.sub[0] = 0.0;
            ws.diag[0] = 1.0 - s * (-oc + 2.0 * ws.bc[0] - 1.0);
            ws.sup[0] = -s * oc;
            for i in 1..n - 1 {
                let (cs, cp) = row_weights(grid, dpow, d, i, ws.bc[i]);
                ws.sub[i] = -s * cs;
                ws.sup[i] = -s * cp;
                ws.diag[i] = 1.0 - s * (-(cs + cp) + 2.0 * ws.bc[i] - 1.0);
            }
            ws.sub[n - 1] = 0.0;
            ws.diag[n - 1] = 1.0;
            ws.sup[n - 1] = 0.0;
            solve_tridiagonal(&ws.sub, &ws.diag, &ws.sup, &mut ws.rhs);
            ws.bc.copy_from_slice(&ws.rhs);
        }
        v.copy_from_slice(&ws.bc);
        if !v[0].is_finite() {
            return Err(LabError::Divergence(format!(
                "rescaled step produced a non-finite origin value at tau = {tau_next:.6}"
            )));
        }
    }
    Ok(())
}

/// Outcome of the integration core: the recorded states, accumulated
/// warnings, and the sign of any plateau-band exit (used by the blow-up
/// time refiner).
struct CoreOutcome {
    states: Vec<RescaledState>,
    warnings: Vec<String>,
    drift_sign: i8,
}

/// Shared integration loop behind the public runners. `initial` supplies
/// B(η, 0); `record` keeps checkpoint states; `drift_abort` stops as soon
/// as B(0, τ) exits the plateau band decisively and reports the side.
fn integrate_core(
    initial: &dyn Fn(f64) -> f64,
    blowup_time: f64,
    tau_max: f64,
    cfg: &SolverConfig,
    params: &Params,
    tail: &TailBoundary,
    record: bool,
    drift_abort: bool,
) -> LabResult<CoreOutcome> {
    let d = params.df();
    let dpow = params.d as i32 + 1;
    let dtau = tau_step(cfg);
    let m_one = params.m_one;

    if let TailBoundary::FromProfile(p) = tail {
        // fail early if the pinned profile cannot produce boundary values
        p.eval(1.0)?;
    }
    let tail_value = |tau: f64, eta: f64| -> f64 {
        match tail {
            TailBoundary::Similarity => blowup_time * (-tau).exp(),
            TailBoundary::FromProfile(p) => p
                .eval(eta)
                .expect("tail profile evaluable at positive radius"),
        }
    };

    let mut tau = 0.0;
    let mut grid = expanding_mesh(transform::ell(0.0, blowup_time, params), cfg);
    let mut v: Vec<f64> = grid.iter().map(|&eta| initial(eta)).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Domain(
            "initial rescaled data contains non-finite values".into(),
        ));
    }
    let n0 = grid.len();
    v[n0 - 1] = tail_value(0.0, grid[n0 - 1]);

    let mut ws = StepWorkspace::sized(grid.len());
    let mut states = Vec::new();
    let mut warnings = Vec::new();
    if record {
        states.push(RescaledState {
            tau: 0.0,
            b: RadialField::new(CoordinateKind::SelfSimilar, grid.clone(), v.clone())?,
            ell: *grid.last().expect("mesh is nonempty"),
            blowup_time,
        });
    }

    let mut below = 0usize;
    let mut above = 0usize;
    let mut warned_below = false;
    let mut warned_above = false;
    let mut drift_sign = 0i8;

    let ell_of = |t: f64| transform::ell(t, blowup_time, params);
    for (stop, is_checkpoint) in stop_schedule(tau_max) {
        let step_result = advance_segment(
            &mut grid,
            &mut v,
            tau,
            stop,
            dtau,
            &ell_of,
            &tail_value,
            dpow,
            d,
            &mut ws,
        );
        tau = stop;
        if let Err(err) = step_result {
            if record && !states.is_empty() {
                warnings.push(format!("run cut short: {err}"));
                break;
            }
            return Err(err);
        }
        if v.iter().any(|x| !x.is_finite()) {
            let msg = format!("non-finite values appeared by tau = {tau:.3}");
            if record && !states.is_empty() {
                warnings.push(format!("run cut short: {msg}"));
                break;
            }
            return Err(LabError::Divergence(msg));
        }

        let b0 = v[0];
        if b0 < 1.0 - DRIFT_BAND {
            below += 1;
        } else {
            below = 0;
        }
        if b0 > m_one * (1.0 + UPPER_MARGIN) {
            above += 1;
        } else {
            above = 0;
        }
        if below >= DRIFT_PATIENCE && !warned_below {
            warned_below = true;
            warnings.push(format!(
                "transformation inconsistency: B(0, tau) = {b0:.6} stayed below 1 \
                 through tau = {tau:.3}; the blow-up time is likely underestimated"
            ));
        }
        if above >= DRIFT_PATIENCE && !warned_above {
            warned_above = true;
            let ceiling = m_one * (1.0 + UPPER_MARGIN);
            warnings.push(format!(
                "transformation inconsistency: B(0, tau) = {b0:.6} stayed above \
                 {ceiling:.3} through tau = {tau:.3}; the blow-up time is \
                 likely overestimated"
            ));
        }
        if drift_abort {
            if b0 > 12.0 * m_one {
                drift_sign = 1;
                break;
            }
            if b0 < 0.9 {
                drift_sign = -1;
                break;
            }
        } else if b0 > RUNAWAY_FACTOR * m_one || b0 < 1e-4 {
            warnings.push(format!(
                "runaway origin value B(0, tau) = {b0:.3e} at tau = {tau:.3}; \
                 stopping early"
            ));
            break;
        }

        // remesh on the freshly covered domain; the endpoint already sits at
        // ell(stop), so new ladder nodes interpolate the old field (the tail
        // branch only guards rounding ties at the edge)
        let new_ell = *grid.last().expect("mesh is nonempty");
        let new_grid = expanding_mesh(new_ell, cfg);
        let interp = MonotoneCubic::new(&grid, &v);
        let old_end = new_ell;
        let mut new_v: Vec<f64> = new_grid
            .iter()
            .map(|&eta| {
                if eta <= old_end {
                    interp.eval(eta)
                } else {
                    tail_value(tau, eta)
                }
            })
            .collect();
        let n = new_grid.len();
        new_v[n - 1] = tail_value(tau, new_grid[n - 1]);
        grid = new_grid;
        v = new_v;
        ws.resize(grid.len());

        if record && is_checkpoint {
            states.push(RescaledState {
                tau,
                b: RadialField::new(CoordinateKind::SelfSimilar, grid.clone(), v.clone())?,
                ell: new_ell,
                blowup_time,
            });
        }
    }

    Ok(CoreOutcome {
        states,
        warnings,
        drift_sign,
    })
}

/// Sup distance between two states over [0, min(C, both domains)], sampled
/// on a fine uniform grid through the monotone interpolants.
fn window_distance(a: &RescaledState, b: &RescaledState) -> f64 {
    let hi = DISTANCE_WINDOW.min(a.ell).min(b.ell);
    let ia = a.b.interpolant();
    let ib = b.b.interpolant();
    let n = 501;
    (0..n)
        .map(|i| {
            let eta = hi * i as f64 / (n - 1) as f64;
            (ia.eval(eta) - ib.eval(eta)).abs()
        })
        .fold(0.0, f64::max)
}

/// Build the end-of-run report from the checkpoint trail.
fn build_omega(
    states: &[RescaledState],
    warnings: Vec<String>,
    params: &Params,
) -> LabResult<OmegaReport> {
    let last = states.last().ok_or_else(|| {
        LabError::Degenerate("rescaled run recorded no checkpoints".into())
    })?;
    let profile = Profile::numeric(*params, last.b.clone())?;
    let sup_distance_history: Vec<(f64, f64)> = states
        .windows(2)
        .map(|w| (w[1].tau, window_distance(&w[0], &w[1])))
        .collect();
    let singular = Profile::singular(*params);
    let lo = last.b.grid()[1].max(0.02);
    let hi = (0.9 * last.ell).min(50.0);
    let count = count_intersections(&profile, &singular, lo, hi, 4000)?;
    let intersections = count.crossings.len();
    Ok(OmegaReport {
        profile,
        sup_distance_history,
        intersections_with_singular: intersections,
        s1_member: intersections == 1,
        warnings,
    })
}

/// Check that physical initial data lives on [0, 1] with the wall node at
/// r = 1; `require_wall_value` additionally pins b(1) = 1, the hypothesis
/// behind the similarity boundary value.
fn check_initial_field(b0: &RadialField, require_wall_value: bool) -> LabResult<()> {
    if b0.kind() != CoordinateKind::Physical {
        return Err(LabError::Domain(
            "rescaled runs start from physical-coordinate data".into(),
        ));
    }
    if !b0.starts_at_zero() {
        return Err(LabError::Domain(
            "initial data must start at the origin r = 0".into(),
        ));
    }
    let grid = b0.grid();
    let last = grid[grid.len() - 1];
    if (last - 1.0).abs() > 1e-12 {
        return Err(LabError::Domain(format!(
            "initial data must end at the wall r = 1, got r = {last}"
        )));
    }
    if require_wall_value {
        let wall = b0.values()[b0.len() - 1];
        if (wall - 1.0).abs() > 1e-9 {
            return Err(LabError::Domain(format!(
                "the similarity boundary value needs b(1) = 1, got {wall}"
            )));
        }
    }
    Ok(())
}

/// Run the rescaled flow from physical initial data b0 on [0, 1], using the
/// given blow-up time for the change of variables and the similarity
/// boundary value T e^{−τ}. States are recorded at τ = 0, at geometric
/// checkpoints, and at tau_max (which must be at least 5 so the run clears
/// the transient regime).
pub fn run_rescaled(
    b0: &RadialField,
    blowup_time: f64,
    tau_max: f64,
    cfg: &SolverConfig,
    params: &Params,
) -> LabResult<RescaledRun> {
    run_rescaled_with(
        b0,
        blowup_time,
        tau_max,
        cfg,
        params,
        TailBoundary::Similarity,
    )
}

/// `run_rescaled` with an explicit tail closure. With a pinned profile the
/// wall value b(1) = 1 is not required of the data, since the boundary no
/// longer encodes it.
pub fn run_rescaled_with(
    b0: &RadialField,
    blowup_time: f64,
    tau_max: f64,
    cfg: &SolverConfig,
    params: &Params,
    tail: TailBoundary,
) -> LabResult<RescaledRun> {
    params.validate()?;
    cfg.validate()?;
    if !(blowup_time.is_finite() && blowup_time > 0.0) {
        return Err(LabError::Domain(format!(
            "blow-up time must be positive and finite, got {blowup_time}"
        )));
    }
    if !(tau_max.is_finite() && tau_max >= 5.0) {
        return Err(LabError::Domain(format!(
            "tau_max must be at least 5 to clear the transient regime, got {tau_max}"
        )));
    }
    check_initial_field(b0, matches!(tail, TailBoundary::Similarity))?;

    let scale = (params.chi_theta() * blowup_time).sqrt();
    let interp = b0.interpolant();
    let initial = move |eta: f64| blowup_time * interp.eval((eta * scale).min(1.0));
    let out = integrate_core(
        &initial,
        blowup_time,
        tau_max,
        cfg,
        params,
        &tail,
        true,
        false,
    )?;
    let omega = build_omega(&out.states, out.warnings, params)?;
    Ok(RescaledRun {
        states: out.states,
        omega,
    })
}

/// Advance a rescaled state by one τ step (dt_safety · 2.5e-3) under the
/// similarity boundary value. The domain edge slides to the new ℓ(τ) during
/// the step and the mesh is rebuilt on the grown domain afterwards.
/// Divergence is an error; the caller keeps the input state.
pub fn step_rescaled(
    state: &RescaledState,
    cfg: &SolverConfig,
    params: &Params,
) -> LabResult<RescaledState> {
    params.validate()?;
    cfg.validate()?;
    if state.b.kind() != CoordinateKind::SelfSimilar {
        return Err(LabError::Domain(
            "step_rescaled needs a self-similar-coordinate state".into(),
        ));
    }
    if state.b.len() < 8 {
        return Err(LabError::Domain(
            "step_rescaled needs at least 8 grid nodes".into(),
        ));
    }
    let d = params.df();
    let dpow = params.d as i32 + 1;
    let dtau = tau_step(cfg);
    let mut grid = state.b.grid().to_vec();
    let mut v = state.b.values().to_vec();
    let blowup_time = state.blowup_time;
    let ell_of = |t: f64| transform::ell(t, blowup_time, params);
    let tail_value = |t: f64, _eta: f64| blowup_time * (-t).exp();
    let mut ws = StepWorkspace::sized(grid.len());
    let tau_next = state.tau + dtau;
    advance_segment(
        &mut grid,
        &mut v,
        state.tau,
        tau_next,
        dtau,
        &ell_of,
        &tail_value,
        dpow,
        d,
        &mut ws,
    )?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Divergence(format!(
            "non-finite values after one step from tau = {:.6}",
            state.tau
        )));
    }

    let new_ell = *grid.last().expect("state mesh is nonempty");
    let new_grid = expanding_mesh(new_ell, cfg);
    let interp = MonotoneCubic::new(&grid, &v);
    let old_end = new_ell;
    let mut new_v: Vec<f64> = new_grid
        .iter()
        .map(|&eta| {
            if eta <= old_end {
                interp.eval(eta)
            } else {
                tail_value(tau_next, eta)
            }
        })
        .collect();
    let n = new_grid.len();
    new_v[n - 1] = tail_value(tau_next, new_grid[n - 1]);
    Ok(RescaledState {
        tau: tau_next,
        b: RadialField::new(CoordinateKind::SelfSimilar, new_grid, new_v)?,
        ell: new_ell,
        blowup_time,
    })
}

/// Map one physical snapshot into the rescaled frame: τ = ln(T / (T − t)),
/// η = r / sqrt(χ_d Θ (T − t)), B = (T − t) b. The last node lands exactly
/// on ℓ(τ).
pub fn rescaled_from_physical(
    snap: &Snapshot,
    blowup_time: f64,
    params: &Params,
) -> LabResult<RescaledState> {
    params.validate()?;
    if !(blowup_time.is_finite() && blowup_time > 0.0) {
        return Err(LabError::Domain(format!(
            "blow-up time must be positive and finite, got {blowup_time}"
        )));
    }
    if !(snap.t >= 0.0 && snap.t < blowup_time) {
        return Err(LabError::Domain(format!(
            "snapshot time {} is outside [0, T) for T = {}",
            snap.t, blowup_time
        )));
    }
    let remaining = blowup_time - snap.t;
    let tau = (blowup_time / remaining).ln();
    let scale = (params.chi_theta() * remaining).sqrt();
    let grid: Vec<f64> = snap.b.grid().iter().map(|&r| r / scale).collect();
    let values: Vec<f64> = snap.b.values().iter().map(|&b| remaining * b).collect();
    let ell = *grid.last().ok_or_else(|| {
        LabError::Domain("snapshot carries an empty field".into())
    })?;
    Ok(RescaledState {
        tau,
        b: RadialField::new(CoordinateKind::SelfSimilar, grid, values)?,
        ell,
        blowup_time,
    })
}

/// Refine the blow-up time of the run started from b0 by bisection on the
/// drift direction of B(0, τ). An overestimated T makes the origin value
/// climb away from its plateau and an underestimated one makes it sink
/// below 1, both at the rate e^{τ}; a probe that reaches τ = 32 without
/// leaving the band certifies the candidate to relative precision ~e^{−32}.
/// The bracket [t_lo, t_hi] must straddle: the low edge must sink and the
/// high edge climb.
pub fn refine_blowup_time(
    b0: &RadialField,
    t_lo: f64,
    t_hi: f64,
    cfg: &SolverConfig,
    params: &Params,
) -> LabResult<f64> {
    params.validate()?;
    cfg.validate()?;
    check_initial_field(b0, true)?;
    if !(t_lo.is_finite() && t_hi.is_finite() && 0.0 < t_lo && t_lo < t_hi) {
        return Err(LabError::Domain(format!(
            "need 0 < t_lo < t_hi, got [{t_lo}, {t_hi}]"
        )));
    }
    let interp = b0.interpolant();
    let drift = |t: f64| -> LabResult<i8> {
        let initial = |eta: f64| t * interp.eval((eta * (params.chi_theta() * t).sqrt()).min(1.0));
        let out = integrate_core(
            &initial,
            t,
            REFINE_TAU,
            cfg,
            params,
            &TailBoundary::Similarity,
            false,
            true,
        );
        match out {
            Ok(o) => Ok(o.drift_sign),
            // a mid-segment divergence is a finite-τ blow-up of the probe,
            // which only the overestimated side produces
            Err(LabError::Divergence(_)) => Ok(1),
            Err(err) => Err(err),
        }
    };
    // one-ulp centering: bisection bottoms out at the f64 granularity of the
    // time itself, and a leftover offset of k ulps still moves the deep
    // plateau by roughly k · ulp · e^τ. Among the representable neighbors of
    // the bisection result, keep the one whose origin value at SELECT_TAU
    // lands closest to the plateau constant.
    let center = |t_mid: f64| -> LabResult<f64> {
        let mut best: Option<(f64, f64)> = None;
        for k in -2i32..=2 {
            let t = t_mid * (1.0 + f64::from(k) * f64::EPSILON);
            let initial =
                |eta: f64| t * interp.eval((eta * (params.chi_theta() * t).sqrt()).min(1.0));
            let Ok(out) = integrate_core(
                &initial,
                t,
                SELECT_TAU,
                cfg,
                params,
                &TailBoundary::Similarity,
                true,
                false,
            ) else {
                continue;
            };
            let Some(last) = out.states.last() else {
                continue;
            };
            if (last.tau - SELECT_TAU).abs() > 1e-9 {
                // the probe was cut short, so this neighbor left the plateau
                continue;
            }
            let score = (last.origin_value() - params.m_one).abs();
            if best.map_or(true, |(s, _)| score < s) {
                best = Some((score, t));
            }
        }
        match best {
            Some((_, t)) => Ok(t),
            None => Err(LabError::Divergence(
                "no representable blow-up time holds the deep plateau".into(),
            )),
        }
    };
    let mut lo = t_lo;
    let mut hi = t_hi;
    match drift(lo)? {
        -1 => {}
        0 => return center(lo),
        _ => {
            return Err(LabError::Domain(format!(
                "lower bracket {t_lo} does not underestimate the blow-up time"
            )))
        }
    }
    match drift(hi)? {
        1 => {}
        0 => return center(hi),
        _ => {
            return Err(LabError::Domain(format!(
                "upper bracket {t_hi} does not overestimate the blow-up time"
            )))
        }
    }
    // bisect down to one ulp; a probe that stays on the plateau through the
    // whole horizon is accepted outright
    for _ in 0..90 {
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match drift(mid)? {
            0 => return center(mid),
            1 => hi = mid,
            _ => lo = mid,
        }
    }
    center(0.5 * (lo + hi))
}

/// Count intersections of two profiles on [eta_lo, eta_hi]: transversal
/// sign changes of A − B are bisection-sharpened crossings, values inside
/// the tangency band are touches reported separately, and two profiles
/// indistinguishable over the whole window (sup < 1e-12) are rejected as
/// degenerate input. Sampling is logarithmic when the window spans more
/// than a decade away from zero.
pub fn count_intersections(
    a: &Profile,
    b: &Profile,
    eta_lo: f64,
    eta_hi: f64,
    n_samples: usize,
) -> LabResult<IntersectionCount> {
    if !(eta_lo.is_finite() && eta_hi.is_finite() && 0.0 <= eta_lo && eta_lo < eta_hi) {
        return Err(LabError::Domain(format!(
            "need 0 <= eta_lo < eta_hi, got [{eta_lo}, {eta_hi}]"
        )));
    }
    if n_samples < 16 {
        return Err(LabError::Domain(
            "intersection counting needs at least 16 samples".into(),
        ));
    }
    // surface evaluability problems (e.g. a singular profile at 0) eagerly
    a.eval(eta_lo).and(b.eval(eta_lo))?;
    let diff = |eta: f64| -> f64 {
        let va = a.eval(eta).expect("profile evaluable inside the window");
        let vb = b.eval(eta).expect("profile evaluable inside the window");
        va - vb
    };
    let sup = (0..n_samples)
        .map(|i| {
            let eta = eta_lo + (eta_hi - eta_lo) * i as f64 / (n_samples - 1) as f64;
            diff(eta).abs()
        })
        .fold(0.0, f64::max);
    if sup < 1e-12 {
        return Err(LabError::Degenerate(format!(
            "profiles agree to within {sup:.2e} over [{eta_lo}, {eta_hi}]; \
             intersection counting is meaningless"
        )));
    }
    let hits = if eta_lo > 0.0 && eta_hi / eta_lo > 10.0 {
        let (slo, shi) = (eta_lo.ln(), eta_hi.ln());
        count_sign_changes(|s| diff(s.exp()), slo, shi, n_samples, TANGENCY_BAND)
            .into_iter()
            .map(|mut c| {
                c.x = c.x.exp();
                c
            })
            .collect::<Vec<_>>()
    } else {
        count_sign_changes(diff, eta_lo, eta_hi, n_samples, TANGENCY_BAND)
    };
    let mut crossings = Vec::new();
    let mut tangencies = Vec::new();
    for c in hits {
        if c.tangential {
            tangencies.push(c.x);
        } else {
            crossings.push(c.x);
        }
    }
    Ok(IntersectionCount {
        crossings,
        tangencies,
    })
}

/// Zero-number series of a checkpoint trail against a reference profile:
/// Z(τ_j) counts transversal crossings over the state's own domain. The
/// series must be nonincreasing for the flow's comparison structure to
/// hold; increases are flagged, except one-sample transients at domain
/// growth, which are logged separately.
pub fn zero_number_series(
    states: &[RescaledState],
    reference: &Profile,
) -> LabResult<ZeroNumberReport> {
    if states.is_empty() {
        return Err(LabError::Domain(
            "zero-number series needs at least one state".into(),
        ));
    }
    let mut series = Vec::with_capacity(states.len());
    for state in states {
        let grid = state.b.grid();
        let lo = grid[1].max(1e-3);
        let hi = grid[grid.len() - 1] * (1.0 - 1e-9);
        let interp = state.b.interpolant();
        let f = |eta: f64| -> f64 {
            interp.eval(eta)
                - reference
                    .eval(eta)
                    .expect("reference profile evaluable at positive radius")
        };
        reference.eval(lo)?;
        let hits = count_sign_changes(|s| f(s.exp()), lo.ln(), hi.ln(), 4000, TANGENCY_BAND);
        let z = hits.iter().filter(|c| !c.tangential).count();
        series.push((state.tau, z));
    }
    let mut violations = Vec::new();
    let mut transients = Vec::new();
    for j in 1..series.len() {
        let (tau, z) = series[j];
        let z_prev = series[j - 1].1;
        if z > z_prev {
            let recovers = j + 1 < series.len() && series[j + 1].1 <= z_prev;
            let msg = format!(
                "zero number rose from {z_prev} to {z} at tau = {tau:.3}"
            );
            if recovers {
                transients.push(format!("{msg} (one-sample transient at domain growth)"));
            } else {
                violations.push(msg);
            }
        }
    }
    Ok(ZeroNumberReport {
        series,
        violations,
        transients,
    })
}
