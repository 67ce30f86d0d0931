//! Numerical laboratory for radially symmetric blow-up in a
//! diffusion-attraction system.
//!
//! The crate studies the scalar unknown b(r, t), a mass-average of the
//! density n inside radius r, which satisfies
//!
//!   b_t = χ_d Θ (b_rr + (d+1)/r · b_r) + (r/d) b b_r + b²
//!
//! on the unit ball with b_r(0, t) = 0 and b(1, t) = 1, together with its
//! self-similar rescaling B(η, τ). Modules:
//!
//! * [`params`]: dimension-dependent constants (χ_d, Θ₁, M₁) and validation.
//! * [`field`]: radial grids, finite-difference stencils, monotone resampling.
//! * [`profiles`]: closed-form steady profiles and exact comparison solutions.
//! * [`transform`]: maps between n and b and between physical and
//!   self-similar variables.
//! * [`initial_data`]: admissibility checks and initial-data families.
//! * [`ode`]: adaptive Runge-Kutta integration with event location.
//! * [`steady`]: shooting and collocation for steady self-similar profiles.
//! * [`pde`]: the physical-variable initial-boundary-value solver.
//! * [`rescaled`]: the self-similar solver on a growing domain.
//! * [`stability`]: linearized spectra around steady profiles.
//! * [`lyapunov`]: the weighted energy functional and its monotonicity.
//! * [`io`]: CSV/JSON output, run manifests, INI-style run configuration.
//! * [`presets`]: named, fully specified benchmark scenarios.
//! * [`verify`]: the acceptance suite wiring everything together.

pub mod error;
pub mod ode;
pub mod roots;
pub mod transform;
pub mod field;
pub mod initial_data;
pub mod params;
pub mod pde;
pub mod profiles;
pub mod rescaled;
pub mod steady;

pub use error::{LabError, LabResult};
pub use field::{CoordinateKind, MonotoneCubic, RadialField};
pub use params::Params;
pub use profiles::{Profile, ProfileKind};
