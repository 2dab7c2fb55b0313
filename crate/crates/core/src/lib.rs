//! Numerical laboratory for dyadic Haar analysis on the unit torus/cube:
//! step functions and their oscillation and square-function norms, candidate
//! functions for the induction-by-scales argument with full condition
//! checking, an executable induction engine with per-node margins and a
//! telescoping certificate, and a seeded randomized search probing how close
//! the pairing-to-norms ratio gets to its proven ceiling `sqrt(2)/4`.
//!
//! Everything is generic over the floating-point scalar through [`Scalar`]
//! (`f64` and `f32`); the crate root exports concrete aliases such as
//! [`StepFunction64`] for callers that do not care about the generics.
//! Measures, norms, and functionals are finite exact sums over lattice
//! nodes, summed in a fixed pairwise order so results are bit-reproducible
//! regardless of parallel schedule; where an inequality is claimed to hold
//! exactly in floating point (sibling equality, super-mean dominance, the
//! measure partition), the evaluation order is chosen to make it so.
//!
//! The slow, definition-level twins of the fast paths live in [`reference`]
//! and back the test suite and [`search::certify`] as independent oracles.

pub mod bellman;
pub mod error;
pub mod formats;
pub mod generate;
pub mod golden;
pub mod haar;
pub mod lattice;
pub mod lemma;
pub mod reference;
pub mod report;
pub mod scalar;
pub mod search;
pub mod tolerances;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// [`haar::StepFunction`] over `f64`.
pub type StepFunction64 = haar::StepFunction<f64>;
/// [`haar::StepFunction`] over `f32`.
pub type StepFunction32 = haar::StepFunction<f32>;
/// [`haar::HaarCoefficients`] over `f64`.
pub type HaarCoefficients64 = haar::HaarCoefficients<f64>;
/// [`haar::HaarCoefficients`] over `f32`.
pub type HaarCoefficients32 = haar::HaarCoefficients<f32>;
/// [`lemma::NodeFunctional`] over `f64`.
pub type NodeFunctional64 = lemma::NodeFunctional<f64>;
/// [`lemma::NodeFunctional`] over `f32`.
pub type NodeFunctional32 = lemma::NodeFunctional<f32>;
/// [`lemma::AdmissiblePair`] over `f64`.
pub type AdmissiblePair64 = lemma::AdmissiblePair<f64>;
/// [`lemma::AdmissiblePair`] over `f32`.
pub type AdmissiblePair32 = lemma::AdmissiblePair<f32>;
/// [`lemma::InductionTrace`] over `f64`.
pub type InductionTrace64 = lemma::InductionTrace<f64>;
/// [`lemma::InductionTrace`] over `f32`.
pub type InductionTrace32 = lemma::InductionTrace<f32>;
/// [`bellman::BellmanCandidate`] over `f64`.
pub type BellmanCandidate64 = bellman::BellmanCandidate<f64>;
/// [`bellman::BellmanCandidate`] over `f32`.
pub type BellmanCandidate32 = bellman::BellmanCandidate<f32>;
/// [`bellman::ConditionReport`] over `f64`.
pub type ConditionReport64 = bellman::ConditionReport<f64>;
/// [`bellman::ConditionReport`] over `f32`.
pub type ConditionReport32 = bellman::ConditionReport<f32>;
/// [`report::VerificationReport`] over `f64`.
pub type VerificationReport64 = report::VerificationReport<f64>;
/// [`report::VerificationReport`] over `f32`.
pub type VerificationReport32 = report::VerificationReport<f32>;
/// [`search::SearchResult`] over `f64`.
pub type SearchResult64 = search::SearchResult<f64>;
/// [`search::SearchResult`] over `f32`.
pub type SearchResult32 = search::SearchResult<f32>;
