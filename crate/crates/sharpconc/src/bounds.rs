//! Classical comparison bounds for the sharp concentration pipeline.
//!
//! - `kr_bound`: the Kolmogorov–Rogozin form
//!   `C (sum_i (1 - alpha_i))^{-1/2}`. The constant is existential — no
//!   canonical value exists — so the caller supplies `C`, default 1 at the
//!   CLI.
//! - `llt_reference`: the local-limit asymptotic
//!   `2 l / sqrt(2 pi Var(T_1 + ... + T_n))`. This is the leading term with
//!   the `o(1)` dropped, an asymptotic reference only — not a valid bound at
//!   finite n.
//! - `skellam_central`: `P(eta_1 - eta_2 in {0, 1})` for independent
//!   Poisson(lambda) variables, which bounds `Q_2` of sums whose levels all
//!   sit at or above 1/2; and `skellam_tail_bound`: `sqrt(2 / (pi lambda))`.

use num_traits::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::extremal::{extremal_variance, sharp_bound, ExtremalError};
use crate::rational::{format_rational, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("all alphas are 1: the Kolmogorov-Rogozin denominator vanishes")]
    AllAlphasOne,
    #[error("constant must be positive, got {0}")]
    InvalidConstant(f64),
    #[error("total extremal variance is zero; the asymptotic reference is undefined")]
    ZeroVariance,
    #[error("lambda must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("lambda must be positive, got {0}")]
    NonpositiveLambda(f64),
    #[error(transparent)]
    Extremal(#[from] ExtremalError),
}

/// `C (sum_i (1 - alpha_i))^{-1/2}`.
pub fn kr_bound(alphas: &[Rational], c: f64) -> Result<f64, BoundsError> {
    if !(c > 0.0) {
        return Err(BoundsError::InvalidConstant(c));
    }
    let total: Rational = alphas.iter().map(|a| Rational::one() - a).sum();
    if total.is_zero() {
        return Err(BoundsError::AllAlphasOne);
    }
    assert!(total.is_positive(), "alphas must lie in (0, 1]");
    Ok(c / to_f64(&total).sqrt())
}

/// `2 l / sqrt(2 pi sum_i Var(T(alpha_i)))` — asymptotic reference, not a
/// bound at finite n.
pub fn llt_reference(alphas: &[Rational], ell: u32) -> Result<f64, BoundsError> {
    assert!(ell >= 1);
    let mut total = Rational::zero();
    for a in alphas {
        total += extremal_variance(a)?;
    }
    if total.is_zero() {
        return Err(BoundsError::ZeroVariance);
    }
    Ok(2.0 * ell as f64 / (2.0 * std::f64::consts::PI * to_f64(&total)).sqrt())
}

/// Series/asymptotic switch point. The spec'd series peaks near
/// `lambda^{2j}/(j!)^2 ~ e^{2 lambda}`, which overflows f64 past
/// `lambda ~ 354`; switching at 300 keeps every intermediate finite while
/// the four-term Bessel asymptotic is already accurate to ~1e-14 there.
const SKELLAM_ASYMPTOTIC_SWITCH: f64 = 300.0;
const SKELLAM_RELATIVE_CUTOFF: f64 = 1e-15;

/// `P(eta_1 - eta_2 in {0, 1})` for independent Poisson(lambda) `eta_i`:
///
/// ```text
/// sum_{j>=0} e^{-2 lambda} lambda^{2j} / (j!)^2
///   + sum_{j>=0} e^{-2 lambda} lambda^{2j+1} / (j! (j+1)!)
/// ```
///
/// summed with term recurrences until the tail drops below 1e-15 of the
/// running sum; large lambda switches to the scaled Bessel asymptotic.
pub fn skellam_central(lambda: f64) -> Result<f64, BoundsError> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(BoundsError::NegativeLambda(lambda));
    }
    if lambda > SKELLAM_ASYMPTOTIC_SWITCH {
        return Ok(skellam_central_asymptotic(lambda));
    }
    let scale = (-2.0 * lambda).exp();
    let mut t0 = scale; // e^{-2L} L^{2j} / (j!)^2 at j = 0
    let mut t1 = scale * lambda; // e^{-2L} L^{2j+1} / (j!(j+1)!) at j = 0
    let mut sum = t0 + t1;
    let mut j = 0.0f64;
    loop {
        j += 1.0;
        t0 *= lambda * lambda / (j * j);
        t1 *= lambda * lambda / (j * (j + 1.0));
        let step = t0 + t1;
        sum += step;
        // Terms grow until j ~ lambda; only then does the cutoff apply.
        if j > lambda && step < SKELLAM_RELATIVE_CUTOFF * sum {
            return Ok(sum.min(1.0));
        }
        assert!(j < 10.0 * lambda + 200.0, "series must terminate");
    }
}

/// `e^{-z} (I_0(z) + I_1(z))` at `z = 2 lambda` via the large-argument
/// expansion, terms through `(8z)^{-4}`.
fn skellam_central_asymptotic(lambda: f64) -> f64 {
    let z = 2.0 * lambda;
    let r = 1.0 / (8.0 * z);
    let series = 2.0 - 2.0 * r - 3.0 * r * r - 15.0 * r * r * r - 131.25 * r * r * r * r;
    series / (2.0 * std::f64::consts::PI * z).sqrt()
}

/// `sqrt(2 / (pi lambda))`.
pub fn skellam_tail_bound(lambda: f64) -> Result<f64, BoundsError> {
    if !(lambda > 0.0) {
        return Err(BoundsError::NonpositiveLambda(lambda));
    }
    Ok((2.0 / (std::f64::consts::PI * lambda)).sqrt())
}

/// Side-by-side tabulation of the sharp bound against the classical ones.
/// The Skellam fields are present exactly when every alpha is >= 1/2.
#[derive(Debug, Clone)]
pub struct BoundComparison {
    pub alphas: Vec<Rational>,
    pub ell: u32,
    /// Exact pipeline.
    pub sharp: Rational,
    pub kr: f64,
    /// Asymptotic reference, not a finite-n bound.
    pub llt: f64,
    pub skellam: Option<f64>,
    pub skellam_tail: Option<f64>,
}

impl Serialize for BoundComparison {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("BoundComparison", 7)?;
        let alphas: Vec<String> = self.alphas.iter().map(|a| format_rational(a)).collect();
        s.serialize_field("alphas", &alphas)?;
        s.serialize_field("ell", &self.ell)?;
        s.serialize_field("sharp", &format_rational(&self.sharp))?;
        s.serialize_field("kr", &self.kr)?;
        s.serialize_field("llt", &self.llt)?;
        s.serialize_field("skellam", &self.skellam)?;
        s.serialize_field("skellam_tail", &self.skellam_tail)?;
        s.end()
    }
}

/// Evaluates every applicable bound for one alpha vector.
pub fn compare(alphas: &[Rational], ell: u32, c: f64) -> Result<BoundComparison, BoundsError> {
    assert!(!alphas.is_empty() && ell >= 1);
    let report = sharp_bound(alphas, ell)?;
    let kr = kr_bound(alphas, c)?;
    let llt = llt_reference(alphas, ell)?;
    let half = Rational::new(1.into(), 2.into());
    let (skellam, skellam_tail) = if alphas.iter().all(|a| *a >= half) {
        let lambda: Rational = alphas.iter().map(|a| Rational::one() - a).sum();
        let lambda = to_f64(&lambda);
        (
            Some(skellam_central(lambda)?),
            Some(skellam_tail_bound(lambda)?),
        )
    } else {
        (None, None)
    };
    Ok(BoundComparison {
        alphas: report.alphas,
        ell,
        sharp: report.bound,
        kr,
        llt,
        skellam,
        skellam_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    /// Independent oracle: 30 explicit terms with literal factorials.
    fn skellam_oracle_30(lambda: f64) -> f64 {
        let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>().max(1.0);
        let mut sum = 0.0;
        for j in 0..=30usize {
            sum += (-2.0 * lambda).exp() * lambda.powi(2 * j as i32) / (fact(j) * fact(j));
            sum += (-2.0 * lambda).exp() * lambda.powi(2 * j as i32 + 1)
                / (fact(j) * fact(j + 1));
        }
        sum
    }

    #[test]
    fn kr_bound_cases() {
        let v = kr_bound(&vec![ratio(1, 2); 4], 1.0).unwrap();
        assert!((v - 1.0 / 2.0_f64.sqrt()).abs() < 1e-12);
        let v = kr_bound(&vec![ratio(1, 2); 100], 1.0).unwrap();
        assert!((v - 1.0 / 50.0_f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            kr_bound(&[int(1), int(1)], 1.0),
            Err(BoundsError::AllAlphasOne)
        ));
        assert!(matches!(
            kr_bound(&[ratio(1, 2)], 0.0),
            Err(BoundsError::InvalidConstant(_))
        ));
    }

    #[test]
    fn llt_reference_cases() {
        let v = llt_reference(&vec![ratio(1, 2); 100], 1).unwrap();
        assert!((v - 2.0 / (200.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let v = llt_reference(&vec![ratio(1, 3); 3], 1).unwrap();
        assert!((v - 2.0 / (16.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!(matches!(
            llt_reference(&[int(1)], 1),
            Err(BoundsError::ZeroVariance)
        ));
    }

    #[test]
    fn skellam_central_cases() {
        assert_eq!(skellam_central(0.0).unwrap(), 1.0);
        let v = skellam_central(1.0).unwrap();
        assert!((v - skellam_oracle_30(1.0)).abs() < 1e-12, "got {v}");
        assert!((v - 0.5237).abs() < 1e-4);
        // Large lambda: the mass of {0, 1} under a difference of two
        // Poisson(lambda) variables approaches 2 phi(0) / sqrt(2 lambda)
        // = 1 / sqrt(pi lambda), i.e. the tail-bound formula evaluated at
        // the Skellam variance 2 lambda. The tail bound itself stays a
        // factor sqrt(2) above.
        let v = skellam_central(100.0).unwrap();
        let tail = skellam_tail_bound(100.0).unwrap();
        assert!(v <= tail);
        let asym = skellam_tail_bound(200.0).unwrap();
        assert!((v - asym).abs() / asym < 0.01, "got {v}, asymptote {asym}");
        assert!(skellam_central(-1.0).is_err());
    }

    #[test]
    fn skellam_series_and_asymptotic_agree_at_the_switch() {
        let below = skellam_central(299.0).unwrap();
        let above = skellam_central_asymptotic(299.0);
        assert!(
            ((below - above) / below).abs() < 1e-12,
            "series {below} vs asymptotic {above}"
        );
    }

    #[test]
    fn skellam_central_is_decreasing() {
        let grid: Vec<f64> = (1..=400).map(|i| i as f64 * 0.25).collect();
        let mut prev = skellam_central(0.0).unwrap();
        for l in grid {
            let v = skellam_central(l).unwrap();
            assert!(v < prev, "not decreasing at lambda = {l}");
            prev = v;
        }
    }

    #[test]
    fn skellam_tail_cases() {
        let v = skellam_tail_bound(2.0 / std::f64::consts::PI).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = skellam_tail_bound(1.0).unwrap();
        assert!((v - 0.7979).abs() < 1e-4);
        let v = skellam_tail_bound(8.0).unwrap();
        assert!((v - 0.2821).abs() < 1e-4);
        assert!(skellam_tail_bound(0.0).is_err());
    }

    #[test]
    fn compare_fills_applicable_fields() {
        let c = compare(&vec![ratio(1, 2); 3], 1, 1.0).unwrap();
        assert_eq!(c.sharp, ratio(3, 8));
        assert!((c.kr - 0.8165).abs() < 1e-4);
        assert!((c.llt - 0.4607).abs() < 1e-4);
        assert!(c.skellam.is_some());

        let c = compare(&[ratio(3, 4), ratio(3, 4)], 1, 1.0).unwrap();
        let s = c.skellam.unwrap();
        assert!((s - skellam_oracle_30(0.5)).abs() < 1e-12);

        let c = compare(&[ratio(1, 3), ratio(1, 2)], 1, 1.0).unwrap();
        assert!(c.skellam.is_none() && c.skellam_tail.is_none());
    }

    #[test]
    fn sharp_skellam_tail_ordering_as_n_grows() {
        // For fixed alpha >= 1/2, growing n: exact sharp <= skellam(lambda)
        // <= tail(lambda), lambda = n (1 - alpha). Incremental convolution
        // keeps this cheap.
        for alpha in [ratio(1, 2), ratio(3, 4), ratio(9, 10)] {
            let t = crate::extremal::make_extremal(&alpha).unwrap().dist;
            let mut sum = t.clone();
            let one_minus = Rational::one() - &alpha;
            for n in 1..=200u32 {
                if n > 1 {
                    sum = sum.convolve(&t).unwrap();
                }
                let sharp = to_f64(&sum.concentration(&int(2)).value);
                let lambda = to_f64(&one_minus) * n as f64;
                let central = skellam_central(lambda).unwrap();
                let tail = skellam_tail_bound(lambda).unwrap();
                assert!(
                    sharp <= central + 1e-12,
                    "alpha {alpha} n {n}: sharp {sharp} > skellam {central}"
                );
                assert!(
                    central <= tail + 1e-12,
                    "alpha {alpha} n {n}: skellam {central} > tail {tail}"
                );
            }
        }
    }
}
