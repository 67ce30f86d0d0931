//! Scratch probe: independent physical-side integration of the aggregation
//! equation with both stencil normalizations, to pin down the true blow-up
//! time for unit initial data.

use blowuplab::field::uniform_grid;
use blowuplab::Params;

fn run_physical(n: usize, fixed_stencil: bool, params: &Params) -> (f64, f64) {
    let d = f64::from(params.d);
    let dpow = params.d as i32 + 1;
    let chi = params.chi_theta();
    let grid = uniform_grid(0.0, 1.0, n);
    let mut v = vec![1.0_f64; n];
    let mut t = 0.0_f64;
    let h = grid[1] - grid[0];
    let dt_diff = 0.35 * h * h / (2.0 * (d + 2.0) * chi);
    let oc = 2.0 * f64::from(dpow + 1) / (h * h);

    loop {
        let b0 = v[0];
        if !b0.is_finite() {
            return (f64::NAN, t);
        }
        if b0 >= 1.0e4 {
            return (t, b0);
        }
        let dt = dt_diff.min(0.05 / b0.abs().max(1.0));
        let mut out = vec![0.0_f64; n];
        out[0] = chi * oc * (v[1] - v[0]) + v[0] * v[0];
        for i in 1..n - 1 {
            let r = grid[i];
            let hm = r - grid[i - 1];
            let hp = grid[i + 1] - r;
            let rm = r - 0.5 * hm;
            let rp = r + 0.5 * hp;
            let denom = if fixed_stencil {
                (rp.powi(dpow + 1) - rm.powi(dpow + 1)) / f64::from(dpow + 1)
            } else {
                r.powi(dpow) * 0.5 * (hm + hp)
            };
            let fm = rm.powi(dpow) / (hm * denom);
            let fp = rp.powi(dpow) / (hp * denom);
            let diff = fm * (v[i - 1] - v[i]) + fp * (v[i + 1] - v[i]);
            let a = r / d * v[i];
            let der = if a * hm.max(hp) * 0.5 <= chi {
                // centered first derivative on a nonuniform pair
                (-hp / (hm * (hm + hp))) * (v[i - 1] - v[i])
                    + (hm / (hp * (hm + hp))) * (v[i + 1] - v[i])
            } else {
                // a >= 0 here, forward upwind
                (v[i + 1] - v[i]) / hp
            };
            out[i] = chi * diff + a * der + v[i] * v[i];
        }
        out[n - 1] = 0.0;
        for i in 0..n {
            v[i] += dt * out[i];
        }
        t += dt;
        if t > 4.0 {
            return (f64::NAN, v[0]);
        }
    }
}

fn main() {
    let params = Params::with_half_theta_one(3).expect("params");
    for &fixed in &[false, true] {
        for &n in &[512usize, 1024, 2048] {
            let start = std::time::Instant::now();
            let (t_cross, b0) = run_physical(n, fixed, &params);
            println!(
                "stencil={} n={:5}  t_cross(1e4)={:.9}  b0={:.3e}  [{:.1?}]",
                if fixed { "fv    " } else { "midpt " },
                n,
                t_cross,
                b0,
                start.elapsed()
            );
        }
    }
}
