//! Explicit finite-difference solver for the physical-variable equation
//!
//!   b_t = χ_d Θ (b_rr + (d+1)/r · b_r) + (r/d) b b_r + b²,
//!   b_r(0, t) = 0,   b(1, t) = 1,
//!
//! on a graded mesh clustered at r = 0, integrated until b(0, t) reaches a
//! blow-up threshold. The diffusion part is discretized in conservative flux
//! form, (1/r^{d+1})(r^{d+1} b_r)_r, which keeps every off-diagonal stencil
//! weight nonnegative (no oscillations from the 1/r transport near the
//! origin); at r = 0 the even-extension closure (d+2)·b_rr(0) is used.
//! Time stepping is explicit Euler with dt capped by the positivity limit of
//! the discrete operator and by 0.1/b(0,t) so the quadratic source stays
//! resolved as the peak grows.

use crate::error::{LabError, LabResult};
use crate::field::{graded_grid, CoordinateKind, RadialField};
use crate::initial_data::validate_initial_data;
use crate::params::Params;
use crate::transform::n_from_b;
use serde::{Deserialize, Serialize};

/// Knobs shared by the physical and rescaled solvers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of grid nodes (≥ 64).
    pub grid_size: usize,
    /// First-to-last spacing ratio of the graded mesh (≥ 1; 1 = uniform).
    pub grid_stretch: f64,
    /// Fraction of the stability limit actually taken, in (0, 1].
    pub dt_safety: f64,
    /// Stop once b(0, t) exceeds this (≥ 100).
    pub blowup_threshold: f64,
    /// Hard cap on time steps; reaching it without blow-up is a valid
    /// "no blow-up detected" outcome.
    pub max_steps: u64,
    /// Snapshots are emitted each time b(0, t) grows by 10^(1/this).
    pub snapshots_per_decade: usize,
    /// Peak-trace samples per decade of b(0, t) growth.
    pub trace_per_decade: usize,
    /// Relative tolerance for the inequality monitors.
    pub monitor_tol: f64,
    /// Drop the transport and source terms (pure-diffusion oracle runs).
    pub diffusion_only: bool,
    /// Skip the initial-data admissibility gate (recorded by callers).
    pub skip_initial_data_check: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_size: 512,
            grid_stretch: 4.0,
            dt_safety: 0.4,
            blowup_threshold: 1e4,
            max_steps: 50_000_000,
            snapshots_per_decade: 8,
            trace_per_decade: 200,
            monitor_tol: 1e-8,
            diffusion_only: false,
            skip_initial_data_check: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> LabResult<()> {
        if self.grid_size < 64 {
            return Err(LabError::Config(format!(
                "grid_size must be at least 64, got {}",
                self.grid_size
            )));
        }
        if !(self.grid_stretch >= 1.0) {
            return Err(LabError::Config(format!(
                "grid_stretch must be >= 1, got {}",
                self.grid_stretch
            )));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(LabError::Config(format!(
                "dt_safety must lie in (0, 1], got {}",
                self.dt_safety
            )));
        }
        if !(self.blowup_threshold >= 100.0) {
            return Err(LabError::Config(format!(
                "blowup_threshold must be at least 100, got {}",
                self.blowup_threshold
            )));
        }
        Ok(())
    }

    /// The solver's graded mesh on [0, 1].
    pub fn physical_grid(&self) -> Vec<f64> {
        graded_grid(0.0, 1.0, self.grid_size, self.grid_stretch.ln())
    }
}

/// Outcomes of the runtime inequality monitors at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorFlags {
    /// b_r ≤ 0: the mass average is radially nonincreasing.
    pub gradient_nonpositive: bool,
    /// b is pointwise nondecreasing in time against the previous snapshot.
    pub time_nondecreasing: bool,
    /// χ_d Θ b_r² ≤ (2/3) b(0,t)³.
    pub gradient_bound: bool,
    /// b(r) ≤ r^{−d} away from the origin.
    pub singular_upper_bound: bool,
    /// The reconstructed density n stays nonnegative.
    pub density_nonnegative: bool,
}

impl MonitorFlags {
    pub fn all_ok(&self) -> bool {
        self.gradient_nonpositive
            && self.time_nondecreasing
            && self.gradient_bound
            && self.singular_upper_bound
            && self.density_nonnegative
    }

    pub fn pass() -> Self {
        MonitorFlags {
            gradient_nonpositive: true,
            time_nondecreasing: true,
            gradient_bound: true,
            singular_upper_bound: true,
            density_nonnegative: true,
        }
    }
}

/// One saved state of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub b: RadialField,
    /// Peak value b(0, t).
    pub b0t: f64,
    pub flags: MonitorFlags,
}

/// Least-squares blow-up time estimate from the peak trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupEstimate {
    /// Estimated blow-up time T.
    pub t_blowup: f64,
    /// RMS residual of the linear fit of 1/b(0,t), relative to the RMS of
    /// the fitted values.
    pub fit_residual: f64,
    /// (T − t)·b(0,t) ≥ 1 held (within 1%) on every trace sample.
    pub lower_ok: bool,
    /// (T − t)·b(0,t) ≤ M₁ held (within 1%) on every trace sample.
    pub upper_ok: bool,
    /// b(0,t) window the fit used.
    pub fit_window: (f64, f64),
    pub samples_used: usize,
}

/// Full result of [`run_to_blowup`].
#[derive(Debug, Clone)]
pub struct BlowupRun {
    pub snapshots: Vec<Snapshot>,
    /// Decimated (t, b(0,t)) peak trace.
    pub trace: Vec<(f64, f64)>,
    pub estimate: Option<BlowupEstimate>,
    /// False when max_steps elapsed before the threshold was reached.
    pub detected: bool,
    pub steps: u64,
}

// ---------------------------------------------------------------------------
// Discrete spatial operator
// ---------------------------------------------------------------------------

/// Precomputed stencil weights for one grid. The right-hand side is written
/// in difference form (weights multiply value differences), so constants are
/// annihilated exactly.
pub(crate) struct Discretization {
    grid: Vec<f64>,
    /// Flux-form diffusion weights (χ_d Θ included): rhs_i +=
    /// fm_i (v_{i−1} − v_i) + fp_i (v_{i+1} − v_i).
    fm: Vec<f64>,
    fp: Vec<f64>,
    /// Centered first-derivative difference weights: b_r ≈
    /// am_i (v_{i−1} − v_i) + ap_i (v_{i+1} − v_i).
    am: Vec<f64>,
    ap: Vec<f64>,
    /// r_i / d.
    adv_geom: Vec<f64>,
    /// χ_d Θ (d+2) · 2/h₁² for the origin closure.
    origin_coeff: f64,
    diffusion_only: bool,
}

impl Discretization {
    pub(crate) fn new(grid: &[f64], params: &Params, diffusion_only: bool) -> Self {
        let n = grid.len();
        let d = params.df();
        let dpow = params.d as i32 + 1;
        let chi_theta = params.chi_theta();
        let mut fm = vec![0.0; n];
        let mut fp = vec![0.0; n];
        let mut am = vec![0.0; n];
        let mut ap = vec![0.0; n];
        for i in 1..n - 1 {
            let hm = grid[i] - grid[i - 1];
            let hp = grid[i + 1] - grid[i];
            let rm = 0.5 * (grid[i] + grid[i - 1]);
            let rp = 0.5 * (grid[i] + grid[i + 1]);
            let scale = 2.0 * chi_theta / (grid[i].powi(dpow) * (hm + hp));
            fm[i] = scale * rm.powi(dpow) / hm;
            fp[i] = scale * rp.powi(dpow) / hp;
            // centered d1 in difference form
            am[i] = -hp / (hm * (hm + hp));
            ap[i] = hm / (hp * (hm + hp));
        }
        let h1 = grid[1] - grid[0];
        Discretization {
            grid: grid.to_vec(),
            fm,
            fp,
            am,
            ap,
            adv_geom: grid.iter().map(|&r| r / d).collect(),
            origin_coeff: chi_theta * (d + 2.0) * 2.0 / (h1 * h1),
            diffusion_only,
        }
    }

    /// Spatial operator; the Dirichlet boundary row is 0.
    pub(crate) fn rhs(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        out[0] = self.origin_coeff * (v[1] - v[0]);
        if !self.diffusion_only {
            out[0] += v[0] * v[0];
        }
        for i in 1..n - 1 {
            let dm = v[i - 1] - v[i];
            let dp = v[i + 1] - v[i];
            let mut acc = self.fm[i] * dm + self.fp[i] * dp;
            if !self.diffusion_only {
                let slope = self.am[i] * dm + self.ap[i] * dp;
                acc += self.adv_geom[i] * v[i] * slope + v[i] * v[i];
            }
            out[i] = acc;
        }
        out[n - 1] = 0.0;
    }

    /// Positivity/stability bound on dt for the current state.
    pub(crate) fn dt_limit(&self, v: &[f64]) -> f64 {
        let n = v.len();
        let mut lam = self.origin_coeff;
        for i in 1..n - 1 {
            let mut l = self.fm[i] + self.fp[i];
            if !self.diffusion_only {
                let w = (self.adv_geom[i] * v[i]).abs();
                l += w * (self.am[i].abs() + self.ap[i].abs());
            }
            lam = lam.max(l);
        }
        1.0 / lam
    }

    pub(crate) fn grid(&self) -> &[f64] {
        &self.grid
    }
}

/// The discrete right-hand side of the evolution applied to `b` (boundary
/// row 0); exposed for admissibility checks and manufactured-solution tests.
pub fn physical_rhs(b: &RadialField, params: &Params) -> LabResult<Vec<f64>> {
    if !b.starts_at_zero() {
        return Err(LabError::Domain("physical operator needs a grid starting at r = 0".into()));
    }
    let disc = Discretization::new(b.grid(), params, false);
    let mut out = vec![0.0; b.len()];
    disc.rhs(b.values(), &mut out);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

fn check_boundary(b: &RadialField) -> LabResult<()> {
    let grid = b.grid();
    if grid[0] != 0.0 || (grid[grid.len() - 1] - 1.0).abs() > 1e-12 {
        return Err(LabError::Domain(format!(
            "physical solver works on [0, 1], got [{}, {}]",
            grid[0],
            grid[grid.len() - 1]
        )));
    }
    let last = b.values()[b.len() - 1];
    if (last - 1.0).abs() > 1e-9 {
        return Err(LabError::Domain(format!(
            "boundary value b(1) must be 1, got {last}"
        )));
    }
    Ok(())
}

/// Advance one adaptive explicit step. For long integrations prefer
/// [`run_to_blowup`], which amortizes the stencil setup.
pub fn step_b(state: &Snapshot, cfg: &SolverConfig, params: &Params) -> LabResult<Snapshot> {
    check_boundary(&state.b)?;
    let disc = Discretization::new(state.b.grid(), params, cfg.diffusion_only);
    let v = state.b.values();
    let mut rhs = vec![0.0; v.len()];
    disc.rhs(v, &mut rhs);
    let mut dt = cfg.dt_safety * disc.dt_limit(v);
    if state.b0t > 0.0 {
        dt = dt.min(cfg.dt_safety * 0.1 / state.b0t);
    }
    let mut new_v: Vec<f64> = v.iter().zip(&rhs).map(|(&x, &f)| x + dt * f).collect();
    let nn = new_v.len();
    new_v[nn - 1] = 1.0;
    if new_v.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Divergence(format!(
            "non-finite update at t = {}, peak {}",
            state.t, state.b0t
        )));
    }
    let b = RadialField::new(CoordinateKind::Physical, state.b.grid().to_vec(), new_v)?;
    let b0t = b.values()[0];
    let flags = monitor_invariants(
        &Snapshot { t: state.t + dt, b: b.clone(), b0t, flags: MonitorFlags::pass() },
        Some(state),
        params,
        cfg.monitor_tol,
    );
    Ok(Snapshot { t: state.t + dt, b, b0t, flags })
}

/// Check the a priori inequalities on a snapshot (against `prev` for the
/// time-monotonicity one). All comparisons carry relative slack `tol`.
pub fn monitor_invariants(
    snap: &Snapshot,
    prev: Option<&Snapshot>,
    params: &Params,
    tol: f64,
) -> MonitorFlags {
    let b = &snap.b;
    let grid = b.grid();
    let vals = b.values();
    let br = b.derivative_even();
    let b0 = snap.b0t;

    let grad_scale = 1.0 + br.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let gradient_nonpositive = br.iter().all(|&x| x <= tol * grad_scale);

    let time_nondecreasing = match prev {
        Some(p) if p.t < snap.t && p.b.len() == b.len() => {
            let dt = snap.t - p.t;
            let scale = 1.0 + b0 * b0;
            vals.iter()
                .zip(p.b.values())
                .all(|(&now, &before)| (now - before) / dt >= -tol * scale)
        }
        _ => true,
    };

    let bound = 2.0 / 3.0 * b0 * b0 * b0;
    let gradient_bound = br
        .iter()
        .all(|&x| params.chi_theta() * x * x <= bound * (1.0 + tol) + tol);

    let singular_upper_bound = grid
        .iter()
        .zip(vals)
        .skip(1)
        .all(|(&r, &v)| v <= r.powi(-(params.d as i32)) * (1.0 + tol));

    let density_nonnegative = match n_from_b(b, params) {
        Ok(n) => {
            let scale = 1.0 + n.values().iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            n.values().iter().all(|&x| x >= -tol * scale)
        }
        Err(_) => false,
    };

    MonitorFlags {
        gradient_nonpositive,
        time_nondecreasing,
        gradient_bound,
        singular_upper_bound,
        density_nonnegative,
    }
}

/// Integrate from `b0` until the peak reaches `cfg.blowup_threshold` (or
/// `max_steps` elapse), collecting geometric snapshots, the decimated peak
/// trace, and the blow-up time fit.
pub fn run_to_blowup(b0: &RadialField, cfg: &SolverConfig, params: &Params) -> LabResult<BlowupRun> {
    cfg.validate()?;
    check_boundary(b0)?;
    if !cfg.skip_initial_data_check {
        let report = validate_initial_data(b0, params)?;
        if !report.all_ok() {
            return Err(LabError::Domain(format!(
                "initial data fails admissibility: {report:?}; set skip_initial_data_check to run anyway"
            )));
        }
    }

    let grid = cfg.physical_grid();
    let mut v: Vec<f64> = if grid == b0.grid() {
        b0.values().to_vec()
    } else {
        let interp = b0.interpolant();
        grid.iter().map(|&r| interp.eval(r)).collect()
    };
    let n = v.len();
    v[n - 1] = 1.0;

    let disc = Discretization::new(&grid, params, cfg.diffusion_only);
    let mut rhs = vec![0.0; n];
    let mut t = 0.0;
    let mut steps: u64 = 0;

    let snap_factor = 10f64.powf(1.0 / cfg.snapshots_per_decade as f64);
    let trace_factor = 10f64.powf(1.0 / cfg.trace_per_decade as f64);
    let b0_init = v[0];
    let mut next_snap = b0_init * snap_factor;
    let mut next_trace = b0_init * trace_factor;

    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut trace: Vec<(f64, f64)> = vec![(0.0, b0_init)];

    let make_snapshot = |t: f64, v: &[f64], prev: Option<&Snapshot>, params: &Params| {
        let b = RadialField::new(CoordinateKind::Physical, grid.clone(), v.to_vec())
            .expect("solver state is a valid field");
        let b0t = b.values()[0];
        let mut snap = Snapshot { t, b, b0t, flags: MonitorFlags::pass() };
        snap.flags = monitor_invariants(&snap, prev, params, cfg.monitor_tol);
        snap
    };

    snapshots.push(make_snapshot(0.0, &v, None, params));

    let mut detected = false;
    while steps < cfg.max_steps {
        disc.rhs(&v, &mut rhs);
        let mut dt = cfg.dt_safety * disc.dt_limit(&v);
        if v[0] > 0.0 {
            dt = dt.min(cfg.dt_safety * 0.1 / v[0]);
        }
        for (x, f) in v.iter_mut().zip(&rhs) {
            *x += dt * f;
        }
        v[n - 1] = 1.0;
        t += dt;
        steps += 1;
        let peak = v[0];
        if !peak.is_finite() {
            return Err(LabError::Divergence(format!(
                "non-finite peak after step {steps} at t = {t}"
            )));
        }
        if peak >= next_trace || steps % 10_000 == 0 {
            trace.push((t, peak));
            while next_trace <= peak {
                next_trace *= trace_factor;
            }
        }
        if peak >= next_snap {
            let prev = snapshots.last().cloned();
            snapshots.push(make_snapshot(t, &v, prev.as_ref(), params));
            while next_snap <= peak {
                next_snap *= snap_factor;
            }
        }
        if peak >= cfg.blowup_threshold {
            detected = true;
            break;
        }
    }

    let prev = snapshots.last().cloned();
    let last = make_snapshot(t, &v, prev.as_ref(), params);
    if (last.t, last.b0t) != (snapshots[snapshots.len() - 1].t, snapshots[snapshots.len() - 1].b0t)
    {
        snapshots.push(last);
    }
    if trace.last().map(|&(tt, _)| tt) != Some(t) {
        trace.push((t, v[0]));
    }

    let estimate = if detected {
        Some(estimate_blowup_time(&trace, cfg.blowup_threshold, params)?)
    } else {
        None
    };

    Ok(BlowupRun { snapshots, trace, estimate, detected, steps })
}

/// Least-squares fit of 1/b(0,t) against t over the trace samples with
/// b(0,t) in [threshold/100, threshold]; since b(0,t) ≈ ν/(T−t) near
/// blow-up, the fitted line crosses zero at t = T.
pub fn estimate_blowup_time(
    trace: &[(f64, f64)],
    threshold: f64,
    params: &Params,
) -> LabResult<BlowupEstimate> {
    let window: Vec<(f64, f64)> = trace
        .iter()
        .copied()
        .filter(|&(_, b)| b >= threshold / 100.0 && b <= threshold)
        .collect();
    if window.len() < 8 {
        return Err(LabError::Resolution(format!(
            "only {} trace samples inside the fit window [{}, {}]",
            window.len(),
            threshold / 100.0,
            threshold
        )));
    }
    // Weighted least squares with weights b(0,t)²: y = 1/b has roughly
    // constant relative error, so late samples (where y is smallest and the
    // trace is deepest into the hyperbolic regime) carry the information;
    // unweighted fitting lets pre-asymptotic curvature bias T low.
    let ys: Vec<f64> = window.iter().map(|&(_, b)| 1.0 / b).collect();
    let ws: Vec<f64> = window.iter().map(|&(_, b)| b * b).collect();
    let wsum: f64 = ws.iter().sum();
    let t_mean = window.iter().zip(&ws).map(|(&(t, _), &w)| w * t).sum::<f64>() / wsum;
    let y_mean = ys.iter().zip(&ws).map(|(&y, &w)| w * y).sum::<f64>() / wsum;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (&(t, _), (&y, &w)) in window.iter().zip(ys.iter().zip(&ws)) {
        let dt = t - t_mean;
        stt += w * dt * dt;
        sty += w * dt * (y - y_mean);
    }
    if stt == 0.0 {
        return Err(LabError::Resolution("degenerate fit: all trace times equal".into()));
    }
    let slope = sty / stt;
    if !(slope < 0.0) {
        return Err(LabError::Classification(format!(
            "peak trace is not growing like 1/(T−t): fitted slope {slope}"
        )));
    }
    let t_blowup = t_mean - y_mean / slope;
    let mut ss_res = 0.0;
    let mut ss_y = 0.0;
    for (&(t, _), (&y, &w)) in window.iter().zip(ys.iter().zip(&ws)) {
        let fit = y_mean + slope * (t - t_mean);
        ss_res += w * (y - fit) * (y - fit);
        ss_y += w * y * y;
    }
    let fit_residual = (ss_res / wsum).sqrt() / (ss_y / wsum).sqrt().max(f64::MIN_POSITIVE);

    let last_t = window.last().unwrap().0;
    if !(t_blowup > last_t) {
        return Err(LabError::Classification(format!(
            "estimated blow-up time {t_blowup} does not exceed the last sample time {last_t}"
        )));
    }

    // a priori bounds 1 ≤ (T−t) b(0,t) ≤ M₁ with 1% slack, on all samples
    let mut lower_ok = true;
    let mut upper_ok = true;
    for &(t, b) in trace {
        let product = (t_blowup - t) * b;
        if product < 0.99 {
            lower_ok = false;
        }
        if product > params.m_one * 1.01 {
            upper_ok = false;
        }
    }

    Ok(BlowupEstimate {
        t_blowup,
        fit_residual,
        lower_ok,
        upper_ok,
        fit_window: (threshold / 100.0, threshold),
        samples_used: window.len(),
    })
}
