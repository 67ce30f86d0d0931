//! Scalar root location helpers shared by the event detector, the
//! intersection counter and the shooting bisection.

/// Bisect a sign change of `f` inside [lo, hi] down to width `xtol`.
/// Requires f(lo) and f(hi) to have opposite (nonzero) signs.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    let mut flo = f(lo);
    let fhi = f(hi);
    debug_assert!(flo * fhi <= 0.0, "bisect needs a bracket: f({lo})={flo}, f({hi})={fhi}");
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    while hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // spacing limit reached
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// One crossing of the difference of two sampled curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// Abscissa of the sign change (bisection-sharpened).
    pub x: f64,
    /// True when the curves only touch within the tangency band rather than
    /// crossing transversally.
    pub tangential: bool,
}

/// Count sign changes of `f` over [lo, hi] using `n_probe` uniform probe
/// points, sharpening each bracketed change by bisection. Probe values with
/// |f| below `tangency_band` are treated as touches: a contiguous run of
/// near-zero probes flanked by same-sign values is recorded as one tangential
/// contact instead of a crossing pair.
pub fn count_sign_changes(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n_probe: usize,
    tangency_band: f64,
) -> Vec<Crossing> {
    assert!(n_probe >= 2 && hi > lo);
    let xs: Vec<f64> = (0..n_probe)
        .map(|i| lo + (hi - lo) * i as f64 / (n_probe - 1) as f64)
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    // Classify each probe: -1, 0 (inside band), +1.
    let signs: Vec<i8> = vals
        .iter()
        .map(|&v| {
            if v.abs() <= tangency_band {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    // find first definite sign
    let mut i = 0;
    while i < signs.len() && signs[i] == 0 {
        i += 1;
    }
    if i == signs.len() {
        return out; // everything inside the band: caller decides (degenerate)
    }
    let mut last_sign = signs[i];
    let mut last_idx = i;
    i += 1;
    while i < signs.len() {
        if signs[i] == 0 {
            i += 1;
            continue;
        }
        if signs[i] != last_sign {
            // genuine crossing somewhere in (xs[last_idx], xs[i])
            let x = bisect(&f, xs[last_idx], xs[i], 1e-12 * (1.0 + hi.abs()));
            out.push(Crossing { x, tangential: false });
        } else if i > last_idx + 1 {
            // same sign on both flanks with a near-zero run in between: touch
            let mid = 0.5 * (xs[last_idx + 1] + xs[i - 1]);
            out.push(Crossing { x: mid, tangential: true });
        }
        last_sign = signs[i];
        last_idx = i;
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 1.0, 2.0, 1e-14);
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-13);
    }

    #[test]
    fn counts_simple_crossings() {
        // sin has zeros at pi, 2pi, 3pi inside (0.1, 10)
        let cs = count_sign_changes(|x| x.sin(), 0.1, 10.0, 400, 1e-14);
        let genuine: Vec<_> = cs.iter().filter(|c| !c.tangential).collect();
        assert_eq!(genuine.len(), 3);
        assert!((genuine[0].x - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn tangency_detected_as_touch_not_crossing() {
        // (x-1)^2 - band/2 stays positive except for a dip below the band near 1
        let band = 1e-9;
        let f = |x: f64| (x - 1.0).powi(2) + 0.1 * band;
        let cs = count_sign_changes(f, 0.0, 2.0, 100001, band);
        assert!(cs.iter().all(|c| c.tangential));
        assert_eq!(cs.len(), 1);
        assert!((cs[0].x - 1.0).abs() < 1e-3);
    }
}
