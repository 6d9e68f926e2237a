//! Sharp concentration-function bounds for sums of independent random
//! variables, computed in exact rational arithmetic.
//!
//! The concentration function of a random variable `X` at window width `h` is
//!
//! ```text
//! Q_h(X) = sup_x P(X in (x, x+h])
//! ```
//!
//! For a sum `S_n = X_1 + ... + X_n` of independent variables with
//! `Q_2(X_i) <= alpha_i`, the optimal upper bound on `Q_{2l}(S_n)` is attained
//! by mixtures of two uniform distributions on arithmetic progressions. This
//! crate constructs those extremal mixtures, evaluates the optimal bound
//! exactly, and cross-checks the combinatorics that make it work:
//!
//! - [`dist`] — exact arithmetic on finitely supported rational
//!   distributions: convolution, concentration, moments, affine maps.
//! - [`extremal`] — the extremal mixtures `T(alpha)`, the sharp bound for a
//!   vector of concentration levels, and a variance-matching probe for the
//!   homogenization conjecture.
//! - [`decompose`] — writes any simple rational distribution with
//!   `Q_2 = m/n` as an explicit mixture of uniform measures on point sets
//!   with pairwise gaps >= 2.
//! - [`lattice`] — Sperner/LYM combinatorics on products of chains: level
//!   profiles, the `f` counting function, and exhaustive k-Sperner search.
//! - [`bounds`] — classical comparison bounds: the Kolmogorov–Rogozin form,
//!   a local-limit asymptotic, and Poisson/Skellam bounds.
//! - [`approx`] — quantile discretization of piecewise atom+ramp
//!   distribution functions with certified `1/m` and `2/m` error bounds.
//! - [`fdist`] — a 64-bit floating-point mirror of the distribution pipeline
//!   for large-n asymptotics (renormalizes after each convolution and
//!   reports the accumulated drift).
//! - [`verify`] — seeded randomized verification suites shared by the test
//!   suite and the CLI.
//!
//! Everything in the exact pipeline is a pure function over immutable data
//! and safe to call concurrently. With the default `parallel` feature the
//! heavy inner loops (subset search, dense convolution, verification
//! batches) run on rayon; disabling the feature falls back to sequential
//! code paths with identical results.

pub mod approx;
pub mod bounds;
pub mod decompose;
pub mod dist;
pub mod extremal;
pub mod fdist;
pub mod lattice;
pub mod rational;
pub mod verify;

pub use dist::{ConcentrationResult, DiscreteDistribution, DistError};
pub use extremal::{ExtremalMix, SharpBoundReport};
pub use rational::Rational;
