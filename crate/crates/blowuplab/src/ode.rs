//! Adaptive Dormand-Prince 5(4) integration with dense output and event
//! location, used by the shooting solver and the characteristic tracer.
//!
//! Events are scalar functions g(x, y); a sign change inside an accepted
//! step is located on the 4th-order dense interpolant by bisection, the
//! event state is reconstructed from the interpolant, and integration either
//! stops there (terminal events) or records the hit and continues.

use crate::error::{LabError, LabResult};
use crate::roots::bisect;

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial trial step (magnitude); 0 picks one automatically.
    pub h0: f64,
    /// Smallest allowed step magnitude before giving up.
    pub h_min: f64,
    /// Largest allowed step magnitude.
    pub h_max: f64,
    pub max_steps: u64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h0: 0.0,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

/// Sign-change condition monitored during integration.
pub struct EventSpec<'a> {
    /// Scalar event function; a root of g along the trajectory is a hit.
    pub g: Box<dyn Fn(f64, &[f64]) -> f64 + 'a>,
    /// −1: only falling (g goes + to −); +1: only rising; 0: any crossing.
    pub direction: i8,
    /// Stop integrating at the first hit of this event.
    pub terminal: bool,
}

impl<'a> EventSpec<'a> {
    pub fn new(g: impl Fn(f64, &[f64]) -> f64 + 'a, direction: i8, terminal: bool) -> Self {
        EventSpec { g: Box::new(g), direction, terminal }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventHit {
    pub index: usize,
    pub x: f64,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeStatus {
    ReachedEnd,
    TerminalEvent,
    MaxSteps,
    StepUnderflow,
}

#[derive(Debug, Clone)]
pub struct OdeResult {
    pub x: f64,
    pub y: Vec<f64>,
    pub status: OdeStatus,
    pub steps: u64,
    /// All event hits in trajectory order (the terminal one, if any, last).
    pub hits: Vec<EventHit>,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// 5th-order weights minus embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output coefficients.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

struct DenseSegment {
    x0: f64,
    h: f64,
    r1: Vec<f64>,
    r2: Vec<f64>,
    r3: Vec<f64>,
    r4: Vec<f64>,
    r5: Vec<f64>,
}

impl DenseSegment {
    fn eval(&self, x: f64, out: &mut [f64]) {
        let theta = (x - self.x0) / self.h;
        let omt = 1.0 - theta;
        for i in 0..out.len() {
            out[i] = self.r1[i]
                + theta
                    * (self.r2[i]
                        + omt * (self.r3[i] + theta * (self.r4[i] + omt * self.r5[i])));
        }
    }
}

/// Integrate dy/dx = f(x, y) from (x0, y0) to x_end (x_end may be below x0;
/// the step sign follows). `on_step` observes every accepted step.
pub fn integrate(
    f: impl Fn(f64, &[f64], &mut [f64]),
    x0: f64,
    y0: &[f64],
    x_end: f64,
    opts: &OdeOptions,
    events: &[EventSpec],
    mut on_step: impl FnMut(f64, &[f64]),
) -> LabResult<OdeResult> {
    let dim = y0.len();
    let dir = if x_end >= x0 { 1.0 } else { -1.0 };
    let span = (x_end - x0).abs();
    if span == 0.0 {
        return Ok(OdeResult {
            x: x0,
            y: y0.to_vec(),
            status: OdeStatus::ReachedEnd,
            steps: 0,
            hits: Vec::new(),
        });
    }

    let mut x = x0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; dim]).collect();
    let mut ytmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let mut hits: Vec<EventHit> = Vec::new();

    f(x, &y, &mut k[0]);
    let mut gvals: Vec<f64> = events.iter().map(|e| (e.g)(x, &y)).collect();

    let mut h = if opts.h0 > 0.0 {
        opts.h0.min(opts.h_max).min(span)
    } else {
        // conservative automatic start: scale against the initial slope
        let ynorm = y.iter().map(|v| v.abs()).fold(0.0f64, f64::max).max(1e-6);
        let fnorm = k[0].iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        let guess = if fnorm > 0.0 { 0.01 * ynorm / fnorm } else { span / 100.0 };
        guess.min(span / 10.0).min(opts.h_max).max(opts.h_min)
    };

    let mut steps: u64 = 0;
    on_step(x, &y);

    loop {
        if steps >= opts.max_steps {
            return Ok(OdeResult { x, y, status: OdeStatus::MaxSteps, steps, hits });
        }
        let remaining = (x_end - x) * dir;
        if remaining <= 1e-15 * (1.0 + x.abs()) {
            return Ok(OdeResult { x: x_end, y, status: OdeStatus::ReachedEnd, steps, hits });
        }
        let mut hstep = h.min(remaining);
        let hs = hstep * dir;

        // six stages (k[0] is fresh from FSAL or the initial evaluation)
        for s in 1..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s - 1][j] * kj[i];
                }
                ytmp[i] = y[i] + hs * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            f(x + C[s] * hs, &ytmp, &mut tail[0]);
        }
        // 5th-order solution (row 6 of A) and its slope k7
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += A[5][j] * kj[i];
            }
            y5[i] = y[i] + hs * acc;
        }
        {
            let (head, tail) = k.split_at_mut(6);
            let _ = head;
            f(x + hs, &y5, &mut tail[0]);
        }

        // embedded error estimate
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= hs;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / dim as f64).sqrt();

        if !err.is_finite() {
            hstep *= 0.25;
            if hstep < opts.h_min {
                return Ok(OdeResult { x, y, status: OdeStatus::StepUnderflow, steps, hits });
            }
            h = hstep;
            continue;
        }

        if err <= 1.0 {
            // accepted
            steps += 1;
            let xh = x + hs;

            // dense output coefficients for this step
            let mut seg = DenseSegment {
                x0: x,
                h: hs,
                r1: y.clone(),
                r2: vec![0.0; dim],
                r3: vec![0.0; dim],
                r4: vec![0.0; dim],
                r5: vec![0.0; dim],
            };
            for i in 0..dim {
                let ydiff = y5[i] - y[i];
                let bspl = hs * k[0][i] - ydiff;
                seg.r2[i] = ydiff;
                seg.r3[i] = bspl;
                seg.r4[i] = ydiff - hs * k[6][i] - bspl;
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc += D[j] * kj[i];
                }
                seg.r5[i] = hs * acc;
            }

            // event scan over this step
            let mut terminal_hit: Option<EventHit> = None;
            let mut probe = vec![0.0; dim];
            for (idx, ev) in events.iter().enumerate() {
                let g0 = gvals[idx];
                let g1 = (ev.g)(xh, &y5);
                let crossed = g0 * g1 < 0.0
                    && match ev.direction {
                        1 => g1 > g0,
                        -1 => g1 < g0,
                        _ => true,
                    };
                if crossed {
                    let gfun = |xx: f64| {
                        let mut p = vec![0.0; dim];
                        seg.eval(xx, &mut p);
                        (ev.g)(xx, &p)
                    };
                    let xe = bisect(gfun, x.min(xh), x.max(xh), 1e-15 * (1.0 + xh.abs()));
                    seg.eval(xe, &mut probe);
                    let hit = EventHit { index: idx, x: xe, y: probe.clone() };
                    if ev.terminal {
                        let better = match &terminal_hit {
                            None => true,
                            Some(prev) => (xe - x) * dir < (prev.x - x) * dir,
                        };
                        if better {
                            terminal_hit = Some(hit);
                        }
                    } else {
                        hits.push(hit);
                    }
                }
            }

            if let Some(hit) = terminal_hit {
                // drop non-terminal hits recorded past the stopping point
                hits.retain(|h2| (h2.x - hit.x) * dir <= 0.0);
                let result_y = hit.y.clone();
                let result_x = hit.x;
                hits.push(hit);
                on_step(result_x, &result_y);
                return Ok(OdeResult {
                    x: result_x,
                    y: result_y,
                    status: OdeStatus::TerminalEvent,
                    steps,
                    hits,
                });
            }

            x = xh;
            y.copy_from_slice(&y5);
            k.swap(0, 6); // FSAL
            gvals = events.iter().map(|e| (e.g)(x, &y)).collect();
            on_step(x, &y);

            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (hstep * factor).min(opts.h_max);
        } else {
            let factor = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h = hstep * factor;
            if h < opts.h_min {
                return Ok(OdeResult { x, y, status: OdeStatus::StepUnderflow, steps, hits });
            }
        }
    }
}

/// Convenience wrapper when no events or step observer are needed.
pub fn integrate_plain(
    f: impl Fn(f64, &[f64], &mut [f64]),
    x0: f64,
    y0: &[f64],
    x_end: f64,
    opts: &OdeOptions,
) -> LabResult<OdeResult> {
    integrate(f, x0, y0, x_end, opts, &[], |_, _| {})
}

/// Guard wrapper: error out unless integration reached `x_end`.
pub fn expect_reached(result: OdeResult, context: &str) -> LabResult<OdeResult> {
    match result.status {
        OdeStatus::ReachedEnd | OdeStatus::TerminalEvent => Ok(result),
        OdeStatus::MaxSteps => Err(LabError::Resolution(format!(
            "{context}: step budget exhausted at x = {}",
            result.x
        ))),
        OdeStatus::StepUnderflow => Err(LabError::Divergence(format!(
            "{context}: step size underflow at x = {} (likely a singularity)",
            result.x
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_to_tight_tolerance() {
        let opts = OdeOptions::default();
        let r = integrate_plain(|_, y, dy| dy[0] = y[0], 0.0, &[1.0], 2.0, &opts).unwrap();
        assert_eq!(r.status, OdeStatus::ReachedEnd);
        assert!((r.y[0] - 2.0f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_preserves_energy() {
        let opts = OdeOptions::default();
        let r = integrate_plain(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            40.0 * std::f64::consts::PI,
            &opts,
        )
        .unwrap();
        let energy = r.y[0] * r.y[0] + r.y[1] * r.y[1];
        assert!((energy - 1.0).abs() < 1e-7, "energy drift {energy}");
        assert!((r.y[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn backward_integration_works() {
        let opts = OdeOptions::default();
        let r = integrate_plain(|x, _, dy| dy[0] = 2.0 * x, 1.0, &[1.0], -1.0, &opts).unwrap();
        // y = x², so y(-1) = 1
        assert!((r.y[0] - 1.0).abs() < 1e-10);
        assert_eq!(r.status, OdeStatus::ReachedEnd);
    }

    #[test]
    fn event_located_at_high_precision() {
        // y = sin(x): falling zero at x = π
        let opts = OdeOptions::default();
        let ev = [EventSpec::new(|_, y: &[f64]| y[0], -1, true)];
        let r = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            10.0,
            &opts,
            &ev,
            |_, _| {},
        )
        .unwrap();
        assert_eq!(r.status, OdeStatus::TerminalEvent);
        assert!((r.x - std::f64::consts::PI).abs() < 1e-10, "event at {}", r.x);
        assert!((r.y[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_terminal_events_all_recorded() {
        let opts = OdeOptions::default();
        let ev = [EventSpec::new(|_, y: &[f64]| y[0], 0, false)];
        let r = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            10.0,
            &opts,
            &ev,
            |_, _| {},
        )
        .unwrap();
        assert_eq!(r.status, OdeStatus::ReachedEnd);
        // zeros at π, 2π, 3π inside (0, 10]; the start point is not a crossing
        assert_eq!(r.hits.len(), 3);
        for (k, hit) in r.hits.iter().enumerate() {
            let expect = (k + 1) as f64 * std::f64::consts::PI;
            assert!((hit.x - expect).abs() < 1e-9, "hit {k} at {}", hit.x);
        }
    }

    #[test]
    fn directional_filter_respected() {
        let opts = OdeOptions::default();
        // only rising crossings of y[0]
        let ev = [EventSpec::new(|_, y: &[f64]| y[0], 1, false)];
        let r = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            13.0,
            &opts,
            &ev,
            |_, _| {},
        )
        .unwrap();
        // sin rises through zero at 2π and 4π within (0, 13]
        assert_eq!(r.hits.len(), 2);
        assert!((r.hits[0].x - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn augmented_quadrature_state() {
        // y' = cos(x) integrated as an extra state: ∫₀^π cos = 0,
        // ∫₀^{π/2} cos = 1 via an event at x = π/2.
        let opts = OdeOptions::default();
        let ev = [EventSpec::new(
            |x: f64, _: &[f64]| x - std::f64::consts::FRAC_PI_2,
            0,
            true,
        )];
        let r = integrate(
            |x, _, dy| dy[0] = x.cos(),
            0.0,
            &[0.0],
            10.0,
            &opts,
            &ev,
            |_, _| {},
        )
        .unwrap();
        assert_eq!(r.status, OdeStatus::TerminalEvent);
        assert!((r.y[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn riccati_blowup_flagged_as_underflow() {
        // y' = 1 + y², y(0) = 0 blows up at π/2; the controller must shrink
        // to underflow rather than stepping over the pole.
        let opts = OdeOptions { h_min: 1e-12, ..OdeOptions::default() };
        let r = integrate_plain(|_, y, dy| dy[0] = 1.0 + y[0] * y[0], 0.0, &[0.0], 3.0, &opts)
            .unwrap();
        assert_eq!(r.status, OdeStatus::StepUnderflow);
        assert!((r.x - std::f64::consts::FRAC_PI_2).abs() < 1e-3, "stopped at {}", r.x);
        assert!(expect_reached(r, "riccati").is_err());
    }

    #[test]
    fn max_steps_is_reported() {
        let opts = OdeOptions { max_steps: 10, ..OdeOptions::default() };
        let r = integrate_plain(|_, y, dy| dy[0] = y[0], 0.0, &[1.0], 50.0, &opts).unwrap();
        assert_eq!(r.status, OdeStatus::MaxSteps);
    }
}
