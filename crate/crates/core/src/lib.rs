//! Closed-form complex solitary waves of the compound Burgers-KdV equation
//!
//! ```text
//! u_t + alpha u u_x + beta u^2 u_x + mu u_xx + s u_xxx = 0
//! ```
//!
//! together with the tools used to check them: an exact reduction of the `tanh`/`sech`
//! ansatz to a polynomial system, a Gauss-Newton search over that system, a finite
//! difference integrator for the full PDE and velocity sensitivity analysis.

pub mod analysis;
pub mod cli;
pub mod complex_json;
pub mod dynamics;
pub mod error;
pub mod laurent;
pub mod model;
pub mod reduction;

pub use error::{Error, Result};
pub use model::{
    amplitude_balance, evaluate_profile, kappa, ode_residual, solve_coefficients,
    trivial_solutions, PhysicalParameters, ReducedOdeCoefficients, Sign, SignTriple,
    TravelingWaveSolution, WaveCoefficients,
};
pub use num_complex::Complex64;
