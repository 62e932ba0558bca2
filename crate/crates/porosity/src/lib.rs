//! Constructive porosity machinery for non-expansive self-maps of bounded,
//! closed, convex subsets of finite-dimensional lp spaces.
//!
//! The library builds the porosity-witness perturbation `g` of a strict
//! contraction `f`, certifies the lemma inequalities behind it numerically,
//! and computes local-Lipschitz fields for residual-set exploration.
//!
//! Modules follow the construction bottom-up:
//! - [`space`]: lp norms, distances, norming functionals
//! - [`domain`]: convex bodies, open subsets, deterministic sampling
//! - [`map`]: the non-expansive map algebra and Lipschitz estimators
//! - [`witness`]: the witness construction (x0, e, r, sigma, gamma, g)
//! - [`certify`]: machine-checkable certificates for the lemma inequalities
//! - [`scenario`]: end-to-end scenarios, subset families, sweep reports

pub mod certify;
pub mod domain;
pub mod error;
mod linalg;
pub mod map;
pub mod scenario;
pub mod space;
pub mod witness;

pub use error::{Error, Result};
