//! Radial fields on one-dimensional grids and the finite-difference stencils
//! used by every solver in the crate.
//!
//! Grids may be nonuniform (the physical solver clusters points near r = 0
//! where the singularity forms), so all stencils are written for arbitrary
//! strictly increasing abscissae:
//!
//! * interior nodes: three-point centered formulas, second order for ∂_r on
//!   any grid and for ∂_rr on smoothly graded grids,
//! * ends: one-sided three-point (∂_r) and four-point (∂_rr) closures,
//! * r = 0 for even fields: the ghost-free symmetric closure
//!   f''(0) ≈ 2(f₁ − f₀)/r₁², exact through fourth order because all odd
//!   derivatives vanish.

use crate::error::{LabError, LabResult};
use serde::{Deserialize, Serialize};

/// Which radial coordinate a grid lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordinateKind {
    /// Physical radius r on [0, 1].
    Physical,
    /// Similarity variable η = r / sqrt(χ_d Θ (T − t)).
    SelfSimilar,
}

/// Sampled radial function: a strictly increasing grid plus one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    kind: CoordinateKind,
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(kind: CoordinateKind, grid: Vec<f64>, values: Vec<f64>) -> LabResult<Self> {
        if grid.len() != values.len() {
            return Err(LabError::Domain(format!(
                "grid has {} nodes but {} values were supplied",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 3 {
            return Err(LabError::Domain(format!(
                "a radial field needs at least 3 nodes, got {}",
                grid.len()
            )));
        }
        for (i, w) in grid.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(LabError::Domain(format!(
                    "grid must be strictly increasing, violated at index {i}: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(x) = grid.iter().chain(values.iter()).find(|x| !x.is_finite()) {
            return Err(LabError::Domain(format!("non-finite entry {x} in field data")));
        }
        Ok(RadialField { kind, grid, values })
    }

    /// Build from a closure sampled on `grid`.
    pub fn sample(
        kind: CoordinateKind,
        grid: Vec<f64>,
        f: impl Fn(f64) -> f64,
    ) -> LabResult<Self> {
        let values = grid.iter().map(|&x| f(x)).collect();
        RadialField::new(kind, grid, values)
    }

    pub fn kind(&self) -> CoordinateKind {
        self.kind
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn starts_at_zero(&self) -> bool {
        self.grid[0] == 0.0
    }

    /// First derivative at every node; one-sided second-order at both ends.
    pub fn derivative(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        out[0] = d1_forward(&self.grid, &self.values, 0);
        out[n - 1] = d1_backward(&self.grid, &self.values, n - 1);
        for i in 1..n - 1 {
            out[i] = d1_centered(&self.grid, &self.values, i);
        }
        out
    }

    /// First derivative for an even field whose grid starts at 0: the origin
    /// slope is pinned to the symmetry value 0.
    pub fn derivative_even(&self) -> Vec<f64> {
        let mut out = self.derivative();
        if self.starts_at_zero() {
            out[0] = 0.0;
        }
        out
    }

    /// Second derivative at every node; four-point one-sided at the ends.
    pub fn second_derivative(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        out[0] = d2_one_sided(&self.grid, &self.values, true);
        out[n - 1] = d2_one_sided(&self.grid, &self.values, false);
        for i in 1..n - 1 {
            out[i] = d2_centered(&self.grid, &self.values, i);
        }
        out
    }

    /// Second derivative for an even field: at r = 0 uses the symmetric
    /// closure 2(f₁ − f₀)/r₁².
    pub fn second_derivative_even(&self) -> Vec<f64> {
        let mut out = self.second_derivative();
        if self.starts_at_zero() {
            out[0] = d2_even_origin(&self.grid, &self.values);
        }
        out
    }

    /// Monotone cubic interpolant of this field.
    pub fn interpolant(&self) -> MonotoneCubic {
        MonotoneCubic::new(&self.grid, &self.values)
    }

    /// Resample onto a new grid with monotone cubic interpolation; values
    /// beyond the old span are clamped to the end values.
    pub fn resample(&self, kind: CoordinateKind, grid: Vec<f64>) -> LabResult<Self> {
        let interp = self.interpolant();
        let values = grid.iter().map(|&x| interp.eval(x)).collect();
        RadialField::new(kind, grid, values)
    }
}

// ---------------------------------------------------------------------------
// Raw stencils on (grid, values) slices. Callers guarantee index validity.
// ---------------------------------------------------------------------------

/// Centered first derivative at interior node `i` on a nonuniform grid.
pub fn d1_centered(grid: &[f64], v: &[f64], i: usize) -> f64 {
    let hm = grid[i] - grid[i - 1];
    let hp = grid[i + 1] - grid[i];
    let a = -hp / (hm * (hm + hp));
    let b = (hp - hm) / (hm * hp);
    let c = hm / (hp * (hm + hp));
    a * v[i - 1] + b * v[i] + c * v[i + 1]
}

/// Centered second derivative at interior node `i`.
pub fn d2_centered(grid: &[f64], v: &[f64], i: usize) -> f64 {
    let hm = grid[i] - grid[i - 1];
    let hp = grid[i + 1] - grid[i];
    2.0 * (hm * v[i + 1] - (hm + hp) * v[i] + hp * v[i - 1]) / (hm * hp * (hm + hp))
}

/// One-sided second-order first derivative at the left end node `i`
/// (uses nodes i, i+1, i+2).
pub fn d1_forward(grid: &[f64], v: &[f64], i: usize) -> f64 {
    let h1 = grid[i + 1] - grid[i];
    let h2 = grid[i + 2] - grid[i + 1];
    let a = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
    let b = (h1 + h2) / (h1 * h2);
    let c = -h1 / (h2 * (h1 + h2));
    a * v[i] + b * v[i + 1] + c * v[i + 2]
}

/// One-sided second-order first derivative at the right end node `i`
/// (uses nodes i, i-1, i-2).
pub fn d1_backward(grid: &[f64], v: &[f64], i: usize) -> f64 {
    let h1 = grid[i] - grid[i - 1];
    let h2 = grid[i - 1] - grid[i - 2];
    let a = (2.0 * h1 + h2) / (h1 * (h1 + h2));
    let b = -(h1 + h2) / (h1 * h2);
    let c = h1 / (h2 * (h1 + h2));
    a * v[i] + b * v[i - 1] + c * v[i - 2]
}

/// Symmetric-origin second derivative for an even field sampled with
/// grid[0] = 0: f''(0) ≈ 2 (f₁ − f₀) / r₁².
pub fn d2_even_origin(grid: &[f64], v: &[f64]) -> f64 {
    let h = grid[1] - grid[0];
    2.0 * (v[1] - v[0]) / (h * h)
}

/// One-sided second derivative at an end, second order (four-point cubic fit).
pub fn d2_one_sided(grid: &[f64], v: &[f64], left: bool) -> f64 {
    let n = grid.len();
    let idx: [usize; 4] = if left {
        [0, 1, 2, 3]
    } else {
        [n - 1, n - 2, n - 3, n - 4]
    };
    // Newton divided differences through the four nodes.
    let x: Vec<f64> = idx.iter().map(|&j| grid[j]).collect();
    let mut dd: Vec<f64> = idx.iter().map(|&j| v[j]).collect();
    for order in 1..4 {
        for k in (order..4).rev() {
            dd[k] = (dd[k] - dd[k - 1]) / (x[k] - x[k - order]);
        }
    }
    // p''(x0) of the interpolating cubic.
    2.0 * dd[2] + 2.0 * dd[3] * ((x[0] - x[1]) + (x[0] - x[2]))
}

// ---------------------------------------------------------------------------
// Grid builders
// ---------------------------------------------------------------------------

/// `n` nodes uniformly spaced on [a, b].
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && b > a);
    let h = (b - a) / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
    g[n - 1] = b;
    g
}

/// `n` nodes on [a, b] clustered toward `a` by an exponential map; spacing
/// grows by a factor of roughly e^stretch from the first cell to the last.
/// `stretch = 0` reduces to the uniform grid.
pub fn graded_grid(a: f64, b: f64, n: usize, stretch: f64) -> Vec<f64> {
    assert!(n >= 2 && b > a && stretch >= 0.0);
    if stretch < 1e-12 {
        return uniform_grid(a, b, n);
    }
    let em1 = stretch.exp_m1();
    let mut g: Vec<f64> = (0..n)
        .map(|i| {
            let xi = i as f64 / (n - 1) as f64;
            a + (b - a) * (stretch * xi).exp_m1() / em1
        })
        .collect();
    g[0] = a;
    g[n - 1] = b;
    g
}

// ---------------------------------------------------------------------------
// Monotone cubic interpolation (Fritsch-Carlson slopes)
// ---------------------------------------------------------------------------

/// Piecewise-cubic Hermite interpolant whose slopes are limited so that data
/// monotone on an interval stays monotone after interpolation. Evaluation
/// outside the data span clamps to the end values.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        assert!(x.len() == y.len() && x.len() >= 2);
        let n = x.len();
        let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut m = vec![0.0; n];

        m[0] = end_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
        m[n - 1] = end_slope(
            h[n - 2],
            if n >= 3 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n >= 3 { delta[n - 3] } else { delta[n - 2] },
        );
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                m[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        MonotoneCubic {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    fn locate(&self, xq: f64) -> usize {
        match self
            .x
            .binary_search_by(|probe| probe.partial_cmp(&xq).unwrap())
        {
            Ok(i) => i.min(self.x.len() - 2),
            Err(0) => 0,
            Err(i) if i >= self.x.len() => self.x.len() - 2,
            Err(i) => i - 1,
        }
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.locate(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.m[i] + h01 * self.y[i + 1] + h11 * h * self.m[i + 1]
    }

    pub fn eval_derivative(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] || xq >= self.x[n - 1] {
            return 0.0;
        }
        let i = self.locate(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let t2 = t * t;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        dh00 * self.y[i] + dh10 * self.m[i] + dh01 * self.y[i + 1] + dh11 * self.m[i + 1]
    }
}

/// Shape-preserving one-sided slope estimate for an end node.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let mut m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        m = 0.0;
    } else if d0 * d1 < 0.0 && m.abs() > 3.0 * d0.abs() {
        m = 3.0 * d0;
    }
    m
}
