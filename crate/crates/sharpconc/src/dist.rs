//! Exact arithmetic on finitely supported rational distributions.
//!
//! A [`DiscreteDistribution`] is a non-empty list of `(location, mass)` atoms
//! with strictly increasing locations, positive masses, and total mass
//! exactly 1. All operations are pure functions; values are immutable after
//! construction, so everything here is safe to share across threads.
//!
//! The interval convention is half-open throughout: the concentration
//! function is `Q_h(X) = sup_x P(X in (x, x+h])`. For a finite atom set the
//! supremum is attained by a window whose right endpoint sits on an atom:
//! given any window `(x, x+h]`, let `p` be the largest atom with `p <= x+h`
//! (if none, the window is empty); every atom of `(x, x+h]` is `> x >= p-h`
//! and `<= p`, so the window `(p-h, p]` carries at least as much mass. The
//! sweep below therefore only inspects windows ending on atoms.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rational::{format_rational, parse_rational, Rational};

/// Default cap on the projected atom count of an exact convolution.
pub const DEFAULT_MAX_ATOMS: usize = 10_000_000;

static CONVOLUTION_CAP: AtomicUsize = AtomicUsize::new(0);

/// Current atom-count cap for exact convolutions. Initialized from the
/// `SHARPCONC_MAX_ATOMS` environment variable on first use, else
/// [`DEFAULT_MAX_ATOMS`]. Exceeding the cap is an error, never silent
/// truncation.
pub fn convolution_cap() -> usize {
    match CONVOLUTION_CAP.load(Ordering::Relaxed) {
        0 => {
            let cap = std::env::var("SHARPCONC_MAX_ATOMS")
                .ok()
                .and_then(|v| v.parse::<usize>().ok())
                .filter(|&v| v > 0)
                .unwrap_or(DEFAULT_MAX_ATOMS);
            CONVOLUTION_CAP.store(cap, Ordering::Relaxed);
            cap
        }
        cap => cap,
    }
}

/// Overrides the convolution cap for this process.
pub fn set_convolution_cap(cap: usize) {
    CONVOLUTION_CAP.store(cap.max(1), Ordering::Relaxed);
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistError {
    #[error("atom masses must be non-negative, got {0}")]
    NegativeMass(String),
    #[error("atom masses must sum to 1, got {0}")]
    NotNormalized(String),
    #[error("affine scale must be non-zero")]
    ZeroScale,
    #[error("projected atom count {projected} exceeds the cap {cap}")]
    ResourceLimit { projected: usize, cap: usize },
}

/// Finitely supported distribution with rational atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteDistribution {
    atoms: Vec<(Rational, Rational)>,
}

/// Value and a witness window for the concentration function.
///
/// `value` is the exact supremum of the mass of `(x, x+h]`; `witness_left`
/// is the smallest left endpoint attaining it among windows ending on atoms,
/// which makes outputs deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcentrationResult {
    pub value: Rational,
    pub witness_left: Rational,
}

impl DiscreteDistribution {
    /// Builds a distribution from raw `(location, mass)` pairs: merges
    /// duplicate locations, drops zero masses, sorts, and checks that the
    /// total mass is exactly 1.
    pub fn validate(atoms: Vec<(Rational, Rational)>) -> Result<Self, DistError> {
        let mut merged: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (x, mass) in atoms {
            if mass.is_negative() {
                return Err(DistError::NegativeMass(format_rational(&mass)));
            }
            if mass.is_zero() {
                continue;
            }
            *merged.entry(x).or_insert_with(Rational::zero) += mass;
        }
        let total: Rational = merged.values().cloned().sum();
        if !total.is_one() {
            return Err(DistError::NotNormalized(format_rational(&total)));
        }
        let atoms: Vec<_> = merged
            .into_iter()
            .filter(|(_, m)| !m.is_zero())
            .collect();
        Ok(Self { atoms })
    }

    /// The degenerate distribution concentrated at `x`.
    pub fn point_mass(x: Rational) -> Self {
        Self {
            atoms: vec![(x, Rational::one())],
        }
    }

    /// Uniform distribution on the given locations (must be distinct).
    pub fn uniform(locations: &[Rational]) -> Result<Self, DistError> {
        let n = locations.len();
        let mass = Rational::new(1.into(), (n as i64).into());
        Self::validate(
            locations
                .iter()
                .map(|x| (x.clone(), mass.clone()))
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[(Rational, Rational)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: non-empty
    }

    /// Smallest and largest atom location.
    pub fn support_hull(&self) -> (&Rational, &Rational) {
        (&self.atoms[0].0, &self.atoms[self.atoms.len() - 1].0)
    }

    /// Exact mass of the half-open interval `(left, right]`.
    pub fn interval_mass(&self, left: &Rational, right: &Rational) -> Rational {
        assert!(left < right, "interval_mass needs left < right");
        let lo = self.atoms.partition_point(|(x, _)| x <= left);
        let hi = self.atoms.partition_point(|(x, _)| x <= right);
        self.atoms[lo..hi].iter().map(|(_, m)| m.clone()).sum()
    }

    /// Exact concentration function `Q_h = sup_x P(X in (x, x+h])` with the
    /// smallest attaining left endpoint as witness.
    ///
    /// Two-pointer sweep over windows whose right endpoint is an atom; see
    /// the module docs for why that candidate set is sufficient.
    pub fn concentration(&self, h: &Rational) -> ConcentrationResult {
        assert!(h.is_positive(), "concentration needs h > 0");
        let n = self.atoms.len();
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(Rational::zero());
        for (_, m) in &self.atoms {
            let last = prefix.last().unwrap().clone();
            prefix.push(last + m);
        }
        let mut best = Rational::zero();
        let mut best_left = self.atoms[0].0.clone() - h;
        let mut lo = 0usize;
        for j in 0..n {
            let left = self.atoms[j].0.clone() - h;
            while self.atoms[lo].0 <= left {
                lo += 1;
            }
            let mass = prefix[j + 1].clone() - &prefix[lo];
            // Left endpoints increase with j, so the first maximizer found
            // carries the smallest witness; update only on strict improvement.
            if mass > best {
                best = mass;
                best_left = left;
            }
        }
        ConcentrationResult {
            value: best,
            witness_left: best_left,
        }
    }

    /// Exact distribution of the sum of independent draws from `self` and
    /// `other`.
    pub fn convolve(&self, other: &Self) -> Result<Self, DistError> {
        self.convolve_capped(other, convolution_cap())
    }

    /// [`convolve`](Self::convolve) with an explicit atom-count cap.
    pub fn convolve_capped(&self, other: &Self, cap: usize) -> Result<Self, DistError> {
        let projected = self.atoms.len().saturating_mul(other.atoms.len());
        if projected > cap {
            return Err(DistError::ResourceLimit { projected, cap });
        }
        let mut acc: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (xa, ma) in &self.atoms {
            for (xb, mb) in &other.atoms {
                let loc = xa + xb;
                *acc.entry(loc).or_insert_with(Rational::zero) += ma * mb;
            }
        }
        let atoms: Vec<_> = acc.into_iter().collect();
        debug_assert!(atoms.iter().map(|(_, m)| m.clone()).sum::<Rational>() == Rational::one());
        Ok(Self { atoms })
    }

    /// Convolution of every distribution in `ds` (at least one).
    pub fn convolve_all(ds: &[Self]) -> Result<Self, DistError> {
        let (first, rest) = ds.split_first().expect("convolve_all needs >= 1 input");
        let mut acc = first.clone();
        for d in rest {
            acc = acc.convolve(d)?;
        }
        Ok(acc)
    }

    /// Exact mean.
    pub fn mean(&self) -> Rational {
        self.atoms.iter().map(|(x, m)| x * m).sum()
    }

    /// Exact second central moment.
    pub fn variance(&self) -> Rational {
        let mean = self.mean();
        self.atoms
            .iter()
            .map(|(x, m)| {
                let d = x - &mean;
                &d * &d * m
            })
            .sum()
    }

    /// Atoms mapped `x -> scale*x + shift`; masses unchanged.
    pub fn affine(&self, scale: &Rational, shift: &Rational) -> Result<Self, DistError> {
        if scale.is_zero() {
            return Err(DistError::ZeroScale);
        }
        let mut atoms: Vec<_> = self
            .atoms
            .iter()
            .map(|(x, m)| (x * scale + shift, m.clone()))
            .collect();
        if scale.is_negative() {
            atoms.reverse();
        }
        Ok(Self { atoms })
    }

    /// True when the atom set and masses are symmetric about 0.
    pub fn is_symmetric_about_zero(&self) -> bool {
        let n = self.atoms.len();
        (0..n).all(|i| {
            let (x, m) = &self.atoms[i];
            let (y, w) = &self.atoms[n - 1 - i];
            *x == -y && m == w
        })
    }
}

#[derive(Serialize, Deserialize)]
struct AtomJson {
    x: String,
    mass: String,
}

#[derive(Serialize, Deserialize)]
struct DistJson {
    atoms: Vec<AtomJson>,
}

impl Serialize for DiscreteDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DistJson {
            atoms: self
                .atoms
                .iter()
                .map(|(x, m)| AtomJson {
                    x: format_rational(x),
                    mass: format_rational(m),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DiscreteDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = DistJson::deserialize(deserializer)?;
        let mut atoms = Vec::with_capacity(raw.atoms.len());
        for a in raw.atoms {
            let x = parse_rational(&a.x).map_err(D::Error::custom)?;
            let m = parse_rational(&a.mass).map_err(D::Error::custom)?;
            atoms.push((x, m));
        }
        DiscreteDistribution::validate(atoms).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    /// Independent oracle: mass of every window `(p_j - h, p_j]` by direct
    /// summation, max value with smallest attaining left endpoint.
    pub(crate) fn concentration_oracle(
        d: &DiscreteDistribution,
        h: &Rational,
    ) -> (Rational, Rational) {
        let mut best = Rational::zero();
        let mut best_left = d.atoms()[0].0.clone() - h;
        for (p, _) in d.atoms() {
            let left = p - h;
            let mut mass = Rational::zero();
            for (x, m) in d.atoms() {
                if *x > left && x <= p {
                    mass += m;
                }
            }
            if mass > best {
                best = mass;
                best_left = left;
            }
        }
        (best, best_left)
    }

    /// Independent oracle: convolution by enumerating all outcome pairs.
    pub(crate) fn convolve_oracle(
        a: &DiscreteDistribution,
        b: &DiscreteDistribution,
    ) -> Vec<(Rational, Rational)> {
        let mut acc: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (xa, ma) in a.atoms() {
            for (xb, mb) in b.atoms() {
                *acc.entry(xa + xb).or_insert_with(Rational::zero) += ma * mb;
            }
        }
        acc.into_iter().collect()
    }

    fn u(locs: &[i64]) -> DiscreteDistribution {
        let locs: Vec<Rational> = locs.iter().map(|&x| int(x)).collect();
        DiscreteDistribution::uniform(&locs).unwrap()
    }

    #[test]
    fn validate_point_mass() {
        let d = DiscreteDistribution::validate(vec![(int(0), int(1))]).unwrap();
        assert_eq!(d.atoms(), &[(int(0), int(1))]);
    }

    #[test]
    fn validate_sorts() {
        let d =
            DiscreteDistribution::validate(vec![(int(1), ratio(1, 2)), (int(-1), ratio(1, 2))])
                .unwrap();
        assert_eq!(d.atoms()[0].0, int(-1));
        assert_eq!(d.atoms()[1].0, int(1));
    }

    #[test]
    fn validate_merges_duplicates() {
        let d =
            DiscreteDistribution::validate(vec![(int(0), ratio(1, 2)), (int(0), ratio(1, 2))])
                .unwrap();
        assert_eq!(d.atoms(), &[(int(0), int(1))]);
    }

    #[test]
    fn validate_rejects_unnormalized_and_negative() {
        assert!(matches!(
            DiscreteDistribution::validate(vec![(int(0), ratio(1, 2))]),
            Err(DistError::NotNormalized(_))
        ));
        assert!(matches!(
            DiscreteDistribution::validate(vec![
                (int(0), ratio(3, 2)),
                (int(1), ratio(-1, 2))
            ]),
            Err(DistError::NegativeMass(_))
        ));
    }

    #[test]
    fn concentration_point_mass() {
        let d = DiscreteDistribution::point_mass(int(0));
        let c = d.concentration(&int(2));
        assert_eq!(c.value, int(1));
    }

    #[test]
    fn concentration_two_point() {
        // uniform on {-1, 1}, h = 2: the half-open window captures one atom.
        let c = u(&[-1, 1]).concentration(&int(2));
        assert_eq!(c.value, ratio(1, 2));
    }

    #[test]
    fn concentration_three_point_witness() {
        // uniform on {0, 1, 4}, h = 2 -> 2/3 with witness -1 (frozen from the
        // window oracle).
        let d = u(&[0, 1, 4]);
        let c = d.concentration(&int(2));
        assert_eq!(c.value, ratio(2, 3));
        assert_eq!(c.witness_left, int(-1));
        let (ov, ol) = concentration_oracle(&d, &int(2));
        assert_eq!(c.value, ov);
        assert_eq!(c.witness_left, ol);
    }

    #[test]
    fn concentration_matches_oracle_on_assorted_inputs() {
        let cases = vec![
            u(&[0, 1, 2, 3, 4]),
            u(&[-3, -1, 0, 5]),
            DiscreteDistribution::validate(vec![
                (int(0), ratio(1, 2)),
                (int(3), ratio(1, 4)),
                (int(6), ratio(1, 4)),
            ])
            .unwrap(),
            DiscreteDistribution::validate(vec![
                (ratio(-1, 2), ratio(1, 6)),
                (ratio(1, 3), ratio(1, 3)),
                (int(2), ratio(1, 2)),
            ])
            .unwrap(),
        ];
        for d in &cases {
            for h in [ratio(1, 2), int(1), int(2), ratio(7, 3)] {
                let c = d.concentration(&h);
                let (ov, ol) = concentration_oracle(d, &h);
                assert_eq!(c.value, ov);
                assert_eq!(c.witness_left, ol);
                // Witness window attains the value.
                let right = c.witness_left.clone() + &h;
                assert_eq!(d.interval_mass(&c.witness_left, &right), c.value);
            }
        }
    }

    #[test]
    fn convolve_identity() {
        let d = u(&[0, 1, 4]);
        let delta = DiscreteDistribution::point_mass(int(0));
        assert_eq!(delta.convolve(&d).unwrap(), d);
    }

    #[test]
    fn convolve_rademacher_pair() {
        let s = u(&[-1, 1]).convolve(&u(&[-1, 1])).unwrap();
        assert_eq!(
            s.atoms(),
            &[
                (int(-2), ratio(1, 4)),
                (int(0), ratio(1, 2)),
                (int(2), ratio(1, 4)),
            ]
        );
    }

    #[test]
    fn convolve_matches_pair_enumeration() {
        let a = u(&[-2, 0, 2]);
        let b = u(&[-1, 1]);
        let s = a.convolve(&b).unwrap();
        assert_eq!(s.atoms(), convolve_oracle(&a, &b).as_slice());
        // 1/6 at each of -3, -1, 1, 3 plus 1/6+1/6 merging at +-1: explicit
        // check of the merged masses.
        assert_eq!(s.interval_mass(&int(-4), &int(4)), int(1));
        assert_eq!(s.atoms()[0], (int(-3), ratio(1, 6)));
        assert_eq!(s.atoms()[1], (int(-1), ratio(2, 6)));
    }

    #[test]
    fn convolve_respects_cap() {
        let a = u(&[0, 1, 2, 3]);
        match a.convolve_capped(&a, 15) {
            Err(DistError::ResourceLimit { projected: 16, cap: 15 }) => {}
            other => panic!("expected ResourceLimit, got {other:?}"),
        }
    }

    #[test]
    fn interval_mass_endpoints() {
        let d = u(&[-1, 1]);
        assert_eq!(d.interval_mass(&int(-1), &int(1)), ratio(1, 2));
        assert_eq!(d.interval_mass(&int(-2), &int(2)), int(1));
        assert_eq!(u(&[0, 1, 4]).interval_mass(&int(-1), &int(1)), ratio(2, 3));
    }

    #[test]
    fn interval_mass_full_hull_is_one() {
        let d = DiscreteDistribution::validate(vec![
            (ratio(-7, 2), ratio(1, 5)),
            (int(0), ratio(3, 10)),
            (ratio(9, 4), ratio(1, 2)),
        ])
        .unwrap();
        let (lo, hi) = d.support_hull();
        let left = lo.clone() - int(1);
        assert_eq!(d.interval_mass(&left, hi), int(1));
    }

    #[test]
    fn variance_cases() {
        assert_eq!(DiscreteDistribution::point_mass(int(7)).variance(), int(0));
        assert_eq!(u(&[-1, 1]).variance(), int(1));
        assert_eq!(u(&[-2, 0, 2]).variance(), ratio(8, 3));
    }

    #[test]
    fn affine_identity_and_scaling() {
        let d = u(&[-1, 1]);
        assert_eq!(d.affine(&int(1), &int(0)).unwrap(), d);
        let scaled = d.affine(&int(2), &int(0)).unwrap();
        assert_eq!(scaled, u(&[-2, 2]));
        // Q_h(X) = Q_{h/a}(aX): Q_4 of the scaled equals Q_2 of the original.
        assert_eq!(
            scaled.concentration(&int(4)).value,
            d.concentration(&int(2)).value
        );
    }

    #[test]
    fn affine_mirror_preserves_concentration() {
        let d = u(&[0, 1, 4]);
        let mirrored = d.affine(&int(-1), &int(0)).unwrap();
        for h in [int(1), int(2), int(5)] {
            assert_eq!(
                mirrored.concentration(&h).value,
                d.concentration(&h).value
            );
        }
    }

    #[test]
    fn affine_rejects_zero_scale() {
        assert_eq!(
            u(&[0, 1]).affine(&int(0), &int(0)).unwrap_err(),
            DistError::ZeroScale
        );
    }

    #[test]
    fn json_round_trip() {
        let d = DiscreteDistribution::validate(vec![
            (ratio(-1, 2), ratio(1, 3)),
            (int(2), ratio(2, 3)),
        ])
        .unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"atoms":[{"x":"-1/2","mass":"1/3"},{"x":"2","mass":"2/3"}]}"#);
        let back: DiscreteDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn json_rejects_bad_mass() {
        let s = r#"{"atoms":[{"x":"0","mass":"1/3"}]}"#;
        assert!(serde_json::from_str::<DiscreteDistribution>(s).is_err());
    }
}
