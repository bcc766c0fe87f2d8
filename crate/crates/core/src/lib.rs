//! Numerical laboratory for a ratio-dependent predator-prey system whose
//! habitat `[0, h(t)]` expands by a Stefan-type front law.
//!
//! * [`model`]: parameters, reaction terms, equilibria and closed-form thresholds.
//! * [`solver`]: front-fixing finite-difference integration of the free-boundary problem.
//! * [`phase_plane`]: finite-length waves, the critical elliptic problem and traveling fronts.
//! * [`dichotomy`]: spreading/vanishing verdicts, μ-bracketing, speed estimates and
//!   comparison checks against explicit upper solutions.
//! * [`config`], [`output`], [`runner`]: configuration files, CSV/JSON emission and dispatch.

pub mod config;
pub mod dichotomy;
pub mod error;
pub mod model;
pub mod numerics;
pub mod output;
pub mod phase_plane;
pub mod runner;
pub mod solver;

pub use error::{LabError, Result};
pub use model::{InitialData, ModelParams};
