//! Numerical toolkit for semilinear damped wave equations
//! `u_tt - Laplace u + c(t,x) u_t = |u|^p` with `c = a0 <x>^{-alpha} (1+t)^{-beta}`.

pub mod blowup;
pub mod energy;
pub mod error;
pub mod inequalities;
pub mod problem;
pub mod quadrature;
pub mod smoothstep;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
