//! Symbol-side and function-space-side analysis for systems of linear partial
//! differential operators with constant coefficients.
//!
//! The crate is split along the two halves of the theory of iterates:
//!
//! * [`poly`] holds exact multivariate symbols `P_j(ξ)` and operator systems.
//! * [`symbol`] estimates the growth exponents that govern how systems compare
//!   (the derivative-decay exponent `γ_P`, the `h`-weakness exponent, ellipticity).
//! * [`weight`] implements weight functions `ω`, their Young conjugates and the
//!   inequality toolbox used by the inclusion theorems.
//! * [`iterates`] applies iterates `P^β(D)` to closed families of test functions,
//!   evaluates `L²` norms on boxes and the iterate semi-norms, and checks class
//!   inclusions end to end.
//!
//! Everything numeric here is an estimate: exponents are fitted from samples and
//! snapped to small-denominator rationals, sups over infinite index sets are
//! certified only by plateau detection.

pub mod iterates;
pub mod poly;
pub mod quad;
pub mod serde_ext;
pub mod symbol;
pub mod weight;

pub use iterates::{BoxRegion, NormTable, TestFunction};
pub use poly::{MultiIndex, MultiPoly, OperatorSystem};
pub use symbol::{GrowthFit, SamplingPlan};
pub use weight::{WeightAxiomReport, WeightFunction};
