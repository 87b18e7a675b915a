//! Capacity of amplitude-constrained AWGN channels with causal transmitter
//! state information.
//!
//! The channel is `Y = X + N` with unit-variance Gaussian noise, where each
//! input symbol obeys a hard amplitude bound that varies over time according
//! to an i.i.d. state process known causally at the transmitter (an
//! energy-harvesting transmitter is the motivating instance). Coding over
//! Shannon strategies turns this into an equivalent memoryless channel whose
//! input is a vector `t = (t_1..t_M)` of per-state symbols and whose output
//! density is the state-weighted Gaussian mixture `Σ_i p_i φ(y − t_i)`.
//!
//! The crate computes the capacity of that extended channel, together with
//! its finite-support capacity-achieving input distribution, by
//! fixed-cardinality concave maximization plus cardinality escalation, and
//! certifies optimality with the classic condition "the mutual-information
//! density is ≤ C on the whole box and = C on the support".
//!
//! Modules:
//! - [`numerics`] — Gaussian density, composite Gauss–Legendre quadrature,
//!   log-domain helpers.
//! - [`channel`] — state alphabet, extended channel, discrete input
//!   distributions, and the information functionals.
//! - [`solver`] — fixed-cardinality optimizer, optimality verification,
//!   cardinality escalation, and an independent Blahut–Arimoto grid oracle.
//! - [`onoff`] — the on-off (energy-harvesting) specialization: capacity,
//!   the `U(p_on)` binary-optimality threshold, and baseline capacities.
//! - [`strategy_sim`] — Shannon-strategy codebook sampling, state-driven
//!   transmission, and Monte Carlo mutual-information estimation.
//!
//! All capacities and entropies are in nats.
//!
//! # Example
//!
//! ```
//! use ehcap_core::solver::smith_capacity;
//!
//! // Static amplitude constraint |X| <= 1.5: the optimal input is binary.
//! let sol = smith_capacity::<f64>(1.5, 1e-6).unwrap();
//! assert!(sol.converged);
//! assert_eq!(sol.distribution.support_size(), 2);
//! assert!((sol.capacity - 0.526777306521).abs() < 1e-6);
//! ```

pub mod channel;
pub mod error;
pub mod numerics;
pub mod onoff;
pub mod solver;
pub mod strategy_sim;

pub use error::{Error, Result};

use core::fmt::{Debug, Display};
use core::iter::Sum;
use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the whole library is generic over.
///
/// Implemented for `f32` and `f64`; all internal tolerances that are tighter
/// than `f32` resolution are widened automatically via [`tol_scaled`].
pub trait Scalar:
    Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into the working scalar type.
///
/// Panics only if the target type cannot represent ordinary finite `f64`
/// values, which cannot happen for the provided `f32`/`f64` impls.
pub(crate) fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("scalar type must convert from f64")
}

/// A tolerance that equals `tight` at `f64`-class precision but widens to
/// `eps_mult · ε` for scalars too coarse to resolve it (e.g. `f32`).
pub(crate) fn tol_scaled<T: Scalar>(tight: f64, eps_mult: f64) -> T {
    lit::<T>(tight).max(T::epsilon() * lit(eps_mult))
}

// ---------------------------------------------------------------------------
// Concrete type aliases at the default (f64) and single (f32) precisions.
// ---------------------------------------------------------------------------

/// Default working precision for the CLI and the test suites.
pub type Real = f64;

pub type QuadratureRuleF64 = numerics::QuadratureRule<f64>;
pub type StateAlphabetF64 = channel::StateAlphabet<f64>;
pub type ExtendedPointF64 = channel::ExtendedPoint<f64>;
pub type DiscreteDistributionF64 = channel::DiscreteDistribution<f64>;
pub type ExtendedChannelF64 = channel::ExtendedChannel<f64>;
pub type KktReportF64 = solver::KktReport<f64>;
pub type CapacitySolutionF64 = solver::CapacitySolution<f64>;
pub type OnOffProblemF64 = onoff::OnOffProblem<f64>;
pub type BaselineSetF64 = onoff::BaselineSet<f64>;
pub type CodebookSpecF64 = strategy_sim::CodebookSpec<f64>;
pub type CodewordF64 = strategy_sim::Codeword<f64>;
pub type TransmissionTraceF64 = strategy_sim::TransmissionTrace<f64>;
pub type MiEstimateF64 = strategy_sim::MiEstimate<f64>;

pub type QuadratureRuleF32 = numerics::QuadratureRule<f32>;
pub type StateAlphabetF32 = channel::StateAlphabet<f32>;
pub type ExtendedPointF32 = channel::ExtendedPoint<f32>;
pub type DiscreteDistributionF32 = channel::DiscreteDistribution<f32>;
pub type ExtendedChannelF32 = channel::ExtendedChannel<f32>;
pub type KktReportF32 = solver::KktReport<f32>;
pub type CapacitySolutionF32 = solver::CapacitySolution<f32>;
pub type OnOffProblemF32 = onoff::OnOffProblem<f32>;
pub type BaselineSetF32 = onoff::BaselineSet<f32>;
pub type CodebookSpecF32 = strategy_sim::CodebookSpec<f32>;
pub type CodewordF32 = strategy_sim::Codeword<f32>;
pub type TransmissionTraceF32 = strategy_sim::TransmissionTrace<f32>;
pub type MiEstimateF32 = strategy_sim::MiEstimate<f32>;
