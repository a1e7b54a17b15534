//! Numerical correspondence between singularly perturbed Kirchhoff equations
//!
//! ```text
//! -eps^2 M(eps^{2-N} |grad u|_2^2) Delta u + V(x) u = u^{p-1}
//! ```
//!
//! and the NLS family `-delta^2 Delta w + V w = w^{p-1}`: a Kirchhoff
//! solution at `eps` is the NLS solution at the matched `delta_eps`.

pub mod concentration;
pub mod config;
pub mod correspondence;
pub mod error;
pub mod expr;
pub mod family;
pub mod grid;
pub mod kirchhoff_map;
pub mod multipeak;
pub mod nonexistence;
pub mod numerics;
pub mod output;
pub mod profiles;
pub mod runner;
pub mod semilinear;

pub use error::{Error, Result};
