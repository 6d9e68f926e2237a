//! Extremal mixtures for the sharp concentration bound.
//!
//! For `alpha` in `(1/(k+1), 1/k]` the extremal law `T(alpha)` is the
//! mixture `(1-tau) nu^{k+1} + tau nu^k` with `tau = k(k+1) alpha - k`,
//! where `nu^k` is uniform on the k-term progression `{-k+1, -k+3, ..., k-1}`.
//! Any window of width 2 captures at most two adjacent atoms, whose masses
//! sum to `(1-tau)/(k+1) + tau/k = alpha`, so `Q_2(T(alpha)) = alpha`
//! exactly; the constructor asserts this on every call.
//!
//! For independent `X_i` with `Q_2(X_i) <= alpha_i`, the sum's concentration
//! at every even window width `2l` is maximized by `sum T_i(alpha_i)`, and
//! the maximum is attained on the central interval `(-l, l]`. The central
//! claim is verified per instance (`equality_check`), never assumed: the
//! extremal sum is not unimodal in general.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::dist::{DiscreteDistribution, DistError};
use crate::fdist::IntLattice;
use crate::rational::{format_rational, int, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtremalError {
    #[error("alpha must lie in (0, 1], got {0}")]
    AlphaOutOfRange(String),
    #[error("alpha {0} needs a progression of more than {1} points")]
    ProgressionTooLong(String, usize),
    #[error("variance matching did not converge within {0} bisection steps")]
    BisectionNoConverge(u32),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// The extremal mixture `T(alpha)` together with its parameters.
///
/// Canonical at breakpoints: `alpha = 1/k` maps to level `k` with `tau = 1`
/// (never to level `k-1` with `tau = 0`), so the representation is unique
/// per alpha.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremalMix {
    pub alpha: Rational,
    pub k: u32,
    pub tau: Rational,
    pub dist: DiscreteDistribution,
}

/// Exact sharp bound for a vector of concentration levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharpBoundReport {
    /// Input levels echoed in descending order (convolution is commutative,
    /// so the bound is order-free; sorting makes output deterministic).
    pub alphas: Vec<Rational>,
    pub ell: u32,
    /// `Q_{2 ell}` of the exact convolution of the `T(alpha_i)`.
    pub bound: Rational,
    /// Mass of `(-ell, ell]` under the same convolution.
    pub central_mass: Rational,
    /// Whether `bound == central_mass`; false would be a loud finding.
    pub equality_check: bool,
}

impl Serialize for SharpBoundReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("SharpBoundReport", 5)?;
        let alphas: Vec<String> = self.alphas.iter().map(|a| format_rational(a)).collect();
        s.serialize_field("alphas", &alphas)?;
        s.serialize_field("ell", &self.ell)?;
        s.serialize_field("bound", &format_rational(&self.bound))?;
        s.serialize_field("central_mass", &format_rational(&self.central_mass))?;
        s.serialize_field("equality_check", &self.equality_check)?;
        s.end()
    }
}

/// Variance-matched homogenization probe; reports, never asserts.
#[derive(Debug, Clone)]
pub struct ConjectureProbe {
    /// Exact bound for the heterogeneous input vector.
    pub lhs: Rational,
    /// The unique alpha with `n Var(T(alpha)) = sum Var(T(alpha_i))`.
    pub matched_alpha: f64,
    /// Float-pipeline bound for n copies of `T(matched_alpha)`.
    pub rhs: f64,
    /// `rhs - lhs`; negative beyond tolerance would be a counterexample
    /// candidate for the homogenization conjecture.
    pub margin: f64,
    /// `margin < -1e-9`.
    pub flagged: bool,
}

impl Serialize for ConjectureProbe {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("ConjectureProbe", 5)?;
        s.serialize_field("lhs", &format_rational(&self.lhs))?;
        s.serialize_field("matched_alpha", &self.matched_alpha)?;
        s.serialize_field("rhs", &self.rhs)?;
        s.serialize_field("margin", &self.margin)?;
        s.serialize_field("flagged", &self.flagged)?;
        s.end()
    }
}

const MAX_PROGRESSION: usize = 10_000_000;

/// Uniform distribution on the k-term arithmetic progression
/// `{-k+1, -k+3, ..., k-1}`.
pub fn nu(k: u32) -> Result<DiscreteDistribution, ExtremalError> {
    if k == 0 {
        return Err(ExtremalError::AlphaOutOfRange("1/0".into()));
    }
    let mass = Rational::new(BigInt::one(), BigInt::from(k));
    let atoms = (0..k)
        .map(|i| (int(-(k as i64) + 1 + 2 * i as i64), mass.clone()))
        .collect();
    Ok(DiscreteDistribution::validate(atoms)?)
}

fn level_of(alpha: &Rational) -> Result<u32, ExtremalError> {
    if !alpha.is_positive() || alpha > &Rational::one() {
        return Err(ExtremalError::AlphaOutOfRange(format_rational(alpha)));
    }
    // alpha in (1/(k+1), 1/k]  <=>  k <= 1/alpha < k+1.
    let k = alpha.denom().div_floor(alpha.numer());
    let k = k
        .to_usize()
        .filter(|&k| k < MAX_PROGRESSION)
        .ok_or_else(|| {
            ExtremalError::ProgressionTooLong(format_rational(alpha), MAX_PROGRESSION)
        })?;
    Ok(k as u32)
}

/// Builds `T(alpha)` for `alpha` in `(0, 1]`.
pub fn make_extremal(alpha: &Rational) -> Result<ExtremalMix, ExtremalError> {
    let k = level_of(alpha)?;
    let kq = int(k as i64);
    let tau = &kq * (&kq + int(1)) * alpha - &kq;
    debug_assert!(tau.is_positive() && tau <= Rational::one());

    let mut atoms = Vec::with_capacity(2 * k as usize + 1);
    let big_mass = (Rational::one() - &tau) / int(k as i64 + 1);
    if !big_mass.is_zero() {
        for i in 0..=k {
            atoms.push((int(-(k as i64) + 2 * i as i64), big_mass.clone()));
        }
    }
    let small_mass = &tau / int(k as i64);
    for i in 0..k {
        atoms.push((int(-(k as i64) + 1 + 2 * i as i64), small_mass.clone()));
    }
    let dist = DiscreteDistribution::validate(atoms)?;
    let q2 = dist.concentration(&int(2));
    assert_eq!(
        q2.value, *alpha,
        "extremal construction must satisfy Q_2(T(alpha)) = alpha"
    );
    Ok(ExtremalMix {
        alpha: alpha.clone(),
        k: k as u32,
        tau,
        dist,
    })
}

/// Exact sharp bound `Q_{2 ell}(T_1(alpha_1) + ... + T_n(alpha_n))`, with the
/// central-interval mass and the equality diagnostic.
pub fn sharp_bound(alphas: &[Rational], ell: u32) -> Result<SharpBoundReport, ExtremalError> {
    assert!(!alphas.is_empty(), "sharp_bound needs at least one alpha");
    assert!(ell >= 1, "sharp_bound needs ell >= 1");
    let dists: Vec<_> = alphas
        .iter()
        .map(|a| make_extremal(a).map(|m| m.dist))
        .collect::<Result<_, _>>()?;
    let sum = DiscreteDistribution::convolve_all(&dists)?;
    let h = int(2 * ell as i64);
    let bound = sum.concentration(&h).value;
    let central_mass = sum.interval_mass(&int(-(ell as i64)), &int(ell as i64));
    let mut sorted = alphas.to_vec();
    sorted.sort_by(|a, b| b.cmp(a));
    Ok(SharpBoundReport {
        alphas: sorted,
        ell,
        equality_check: bound == central_mass,
        bound,
        central_mass,
    })
}

/// `Var(T(alpha)) = ((1-tau)((k+1)^2 - 1) + tau (k^2 - 1)) / 3`,
/// cross-checked against the constructed distribution.
pub fn extremal_variance(alpha: &Rational) -> Result<Rational, ExtremalError> {
    let mix = make_extremal(alpha)?;
    let k = int(mix.k as i64);
    let kp = &k + int(1);
    let formula = ((Rational::one() - &mix.tau) * (&kp * &kp - int(1))
        + &mix.tau * (&k * &k - int(1)))
        / int(3);
    let direct = mix.dist.variance();
    assert_eq!(formula, direct, "variance formula must match the moment sum");
    Ok(formula)
}

/// Level of a float alpha: the k with `alpha` in `(1/(k+1), 1/k]`.
fn level_of_f64(alpha: f64) -> u32 {
    assert!(alpha > 0.0 && alpha <= 1.0);
    let mut k = (1.0 / alpha).floor().max(1.0) as u32;
    while alpha <= 1.0 / (k as f64 + 1.0) {
        k += 1;
    }
    while k > 1 && alpha > 1.0 / k as f64 {
        k -= 1;
    }
    k
}

/// Float-pipeline `Var(T(alpha))`.
pub fn extremal_variance_f64(alpha: f64) -> f64 {
    let k = level_of_f64(alpha) as f64;
    let tau = (k * (k + 1.0) * alpha - k).clamp(0.0, 1.0);
    ((1.0 - tau) * ((k + 1.0) * (k + 1.0) - 1.0) + tau * (k * k - 1.0)) / 3.0
}

/// `T(alpha)` on the dense integer lattice, for the float pipeline.
pub fn extremal_lattice_f64(alpha: f64) -> IntLattice {
    let k = level_of_f64(alpha);
    let tau = ((k as f64) * (k as f64 + 1.0) * alpha - k as f64).clamp(0.0, 1.0);
    let width = 2 * k as usize + 1;
    let mut mass = vec![0.0; width];
    let big = (1.0 - tau) / (k as f64 + 1.0);
    for i in 0..=k as usize {
        mass[2 * i] += big;
    }
    let small = tau / k as f64;
    for i in 0..k as usize {
        mass[2 * i + 1] += small;
    }
    IntLattice::new(-(k as i64), mass)
}

/// Float-pipeline sharp bound: `(Q_{2 ell}, central mass, drift)`.
///
/// Homogeneous inputs go through repeated squaring; heterogeneous ones fold
/// left to right.
pub fn sharp_bound_f64(alphas: &[f64], ell: u32) -> (f64, f64, f64) {
    assert!(!alphas.is_empty() && ell >= 1);
    let homogeneous = alphas.windows(2).all(|w| w[0] == w[1]);
    let sum = if homogeneous {
        extremal_lattice_f64(alphas[0]).power(alphas.len() as u64)
    } else {
        let mut acc = extremal_lattice_f64(alphas[0]);
        for &a in &alphas[1..] {
            acc = acc.convolve(&extremal_lattice_f64(a));
        }
        acc
    };
    let (bound, _) = sum.concentration_window(2 * ell as usize);
    let central = sum.range_mass_inclusive(-(ell as i64) + 1, ell as i64);
    (bound, central, sum.drift())
}

const MATCH_TOLERANCE: f64 = 1e-12;
const MARGIN_FLAG: f64 = -1e-9;
const MAX_BISECTION: u32 = 300;

/// Variance-matched homogenization probe.
///
/// Finds the unique `alpha` with `n Var(T(alpha)) = sum_i Var(T(alpha_i))`
/// (the variance is continuous and strictly decreasing in alpha, so
/// bisection converges to the unique root) and compares the exact
/// heterogeneous bound against the float bound at the matched alpha.
/// A margin below `-1e-9` is flagged as a counterexample candidate; nothing
/// is asserted either way.
pub fn conjecture_probe(alphas: &[Rational], ell: u32) -> Result<ConjectureProbe, ExtremalError> {
    assert!(!alphas.is_empty() && ell >= 1);
    for a in alphas {
        if !a.is_positive() || a > &Rational::one() {
            return Err(ExtremalError::AlphaOutOfRange(format_rational(a)));
        }
    }
    let lhs = sharp_bound(alphas, ell)?.bound;
    let lhs_f = to_f64(&lhs);

    if alphas.windows(2).all(|w| w[0] == w[1]) {
        // Already homogeneous: the matched alpha is the input alpha and the
        // two sides coincide by definition; report margin exactly 0.
        return Ok(ConjectureProbe {
            lhs,
            matched_alpha: to_f64(&alphas[0]),
            rhs: lhs_f,
            margin: 0.0,
            flagged: false,
        });
    }

    let target: Rational = alphas
        .iter()
        .map(extremal_variance)
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    let n = alphas.len() as f64;
    let t = to_f64(&target);
    let f = |alpha: f64| n * extremal_variance_f64(alpha) - t;

    // Bracket: f decreases in alpha, f(1) = -t < 0.
    let mut hi = 1.0;
    let mut lo = 0.5;
    let mut guard = 0;
    while f(lo) <= 0.0 {
        lo /= 2.0;
        guard += 1;
        if guard > 1100 {
            return Err(ExtremalError::BisectionNoConverge(guard));
        }
    }
    let mut steps = 0;
    while hi - lo > MATCH_TOLERANCE {
        steps += 1;
        if steps > MAX_BISECTION {
            return Err(ExtremalError::BisectionNoConverge(steps));
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let matched_alpha = 0.5 * (lo + hi);
    let (rhs, _, _) = sharp_bound_f64(&vec![matched_alpha; alphas.len()], ell);
    let margin = rhs - lhs_f;
    Ok(ConjectureProbe {
        lhs,
        matched_alpha,
        rhs,
        margin,
        flagged: margin < MARGIN_FLAG,
    })
}
