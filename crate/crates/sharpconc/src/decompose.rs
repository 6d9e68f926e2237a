//! Mixture decomposition of simple rational distributions.
//!
//! Any finitely supported rational distribution with `Q_2 = m/n` in
//! `(1/(k+1), 1/k]` is an explicit convex combination of uniform measures on
//! point sets with pairwise gaps >= 2: `K` components on `k+1` points with
//! weight `(1-tau)/K` each and `L` components on `k` points with weight
//! `tau/L` each, `tau = k(k+1) m/n - k`.
//!
//! The construction views the distribution as the uniform distribution on a
//! multiset of `N` points (`N` a common denominator of all masses and of
//! `m/n`), sorted ascending. Since no window `(x, x+2]` holds mass above
//! `m/n`, no `d+1 = Nm/n + 1` consecutive multiset points fit in such a
//! window, so points `d` apart sit at distance >= 2. Components are the
//! index progressions `l, l+d, l+2d, ...` — the `d` residue classes mod `d`
//! partition the indices, classes starting at `l <= K = N - kd` hold exactly
//! `k+1` indices and the remaining `L = (k+1)d - N` classes hold exactly
//! `k`.
//!
//! `N` here is the least common multiple of the denominators rather than
//! their full product; that shrinks the multiset exponentially while leaving
//! every identity intact, and the gap and reconstitution assertions run on
//! every call. Indices are 1-based in the description above and 0-based in
//! the code; component `l` starts at `points[l-1]`.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dist::{convolution_cap, DiscreteDistribution, DistError};
use crate::rational::{format_rational, int, parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecomposeError {
    // Firing would falsify the gap step of the construction; it cannot
    // happen for a valid input distribution.
    #[error("multiset points at indices {index} and {index}+{stride} are closer than 2: {lower} .. {upper}")]
    GapViolation {
        index: usize,
        stride: usize,
        lower: String,
        upper: String,
    },
    #[error("reconstituted mixture does not match the input distribution")]
    ReconstitutionMismatch,
    #[error("multiset needs {needed} points, cap is {cap}")]
    ResourceLimit { needed: u64, cap: u64 },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// The input distribution viewed as a uniform distribution on a multiset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultisetExpansion {
    /// Points ascending, with multiplicity `N * mass`.
    pub points: Vec<Rational>,
    /// Multiset size `N`: lcm of the mass denominators and of `n`.
    pub n_effective: u64,
    /// `N * m / n`: no window `(x, x+2]` holds more than this many points.
    pub d: u64,
    /// `Q_2` of the input, in lowest terms.
    pub q2: Rational,
}

/// Convex combination of uniform measures on gap->=2 point sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixtureDecomposition {
    pub k: u32,
    pub tau: Rational,
    pub components: Vec<MixtureComponent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixtureComponent {
    pub weight: Rational,
    pub support: Vec<Rational>,
}

/// Expands a distribution into its sorted multiset form and verifies the
/// gap property `points[l+d] - points[l] >= 2`.
pub fn expand_multiset(d: &DiscreteDistribution) -> Result<MultisetExpansion, DecomposeError> {
    let q2 = d.concentration(&int(2)).value;
    let mut n_eff = q2.denom().clone();
    for (_, mass) in d.atoms() {
        n_eff = n_eff.lcm(mass.denom());
    }
    let cap = convolution_cap() as u64;
    let n_effective = n_eff.to_u64().filter(|&n| n <= cap).ok_or_else(|| {
        DecomposeError::ResourceLimit {
            needed: n_eff.to_u64().unwrap_or(u64::MAX),
            cap,
        }
    })?;

    let big_n = int(n_effective as i64);
    let d_exact = &big_n * &q2;
    debug_assert!(d_exact.is_integer());
    let stride = d_exact.to_integer().to_u64().expect("d = N m/n fits");

    let mut points = Vec::with_capacity(n_effective as usize);
    for (x, mass) in d.atoms() {
        let count = (mass * &big_n).to_integer().to_u64().expect("N * mass is integral");
        for _ in 0..count {
            points.push(x.clone());
        }
    }
    debug_assert_eq!(points.len() as u64, n_effective);

    let s = stride as usize;
    let two = int(2);
    for l in 0..points.len().saturating_sub(s) {
        if &points[l + s] - &points[l] < two {
            return Err(DecomposeError::GapViolation {
                index: l,
                stride: s,
                lower: format_rational(&points[l]),
                upper: format_rational(&points[l + s]),
            });
        }
    }

    Ok(MultisetExpansion {
        points,
        n_effective,
        d: stride,
        q2,
    })
}

/// Decomposes a distribution into its mixture of uniform gap->=2 measures,
/// verifying the counting identity, single-use of every multiset point, the
/// per-component gap property, and exact reconstitution.
pub fn decompose(dist: &DiscreteDistribution) -> Result<MixtureDecomposition, DecomposeError> {
    let exp = expand_multiset(dist)?;
    let q2 = &exp.q2;
    let k64 = q2.denom().div_floor(q2.numer()).to_u64().expect("k fits");
    let k = k64 as usize;
    let n = exp.n_effective;
    let d = exp.d;

    let kq = int(k64 as i64);
    let tau = &kq * (&kq + int(1)) * q2 - &kq;

    // K classes of k+1 indices, L classes of k; K + L = d, L >= 1.
    assert!(k64 * d <= n && n < (k64 + 1) * d);
    let big_count = (n - k64 * d) as usize; // K
    let small_count = ((k64 + 1) * d - n) as usize; // L
    assert_eq!(big_count + small_count, d as usize);
    assert_eq!(big_count * (k + 1) + small_count * k, n as usize, "K(k+1) + Lk = N");

    let big_weight = if big_count > 0 {
        (Rational::one() - &tau) / int(big_count as i64)
    } else {
        // tau = 1 exactly: only k-point components exist.
        assert!(tau.is_one());
        Rational::zero()
    };
    let small_weight = &tau / int(small_count as i64);

    let mut used = vec![false; exp.points.len()];
    let mut components = Vec::with_capacity(d as usize);
    for l in 0..d as usize {
        let size = if l < big_count { k + 1 } else { k };
        let weight = if l < big_count {
            big_weight.clone()
        } else {
            small_weight.clone()
        };
        let mut support = Vec::with_capacity(size);
        for j in 0..size {
            let idx = l + j * d as usize;
            assert!(!used[idx], "each multiset point is used exactly once");
            used[idx] = true;
            support.push(exp.points[idx].clone());
        }
        for pair in support.windows(2) {
            assert!(&pair[1] - &pair[0] >= int(2), "component gap >= 2");
        }
        components.push(MixtureComponent { weight, support });
    }
    assert!(used.iter().all(|&u| u), "all multiset points consumed");

    let result = MixtureDecomposition {
        k: k as u32,
        tau,
        components,
    };
    if &reconstitute(&result)? != dist {
        return Err(DecomposeError::ReconstitutionMismatch);
    }
    Ok(result)
}

/// Exact weighted sum of the uniform measures on the component supports.
pub fn reconstitute(m: &MixtureDecomposition) -> Result<DiscreteDistribution, DecomposeError> {
    let mut acc: BTreeMap<Rational, Rational> = BTreeMap::new();
    for comp in &m.components {
        assert!(!comp.support.is_empty(), "component support must be non-empty");
        let share = &comp.weight / int(comp.support.len() as i64);
        for x in &comp.support {
            *acc.entry(x.clone()).or_insert_with(Rational::zero) += &share;
        }
    }
    Ok(DiscreteDistribution::validate(acc.into_iter().collect())?)
}

#[derive(Serialize, Deserialize)]
struct ComponentJson {
    weight: String,
    support: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct MixtureJson {
    k: u32,
    tau: String,
    components: Vec<ComponentJson>,
}

impl Serialize for MixtureDecomposition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MixtureJson {
            k: self.k,
            tau: format_rational(&self.tau),
            components: self
                .components
                .iter()
                .map(|c| ComponentJson {
                    weight: format_rational(&c.weight),
                    support: c.support.iter().map(format_rational).collect(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MixtureDecomposition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = MixtureJson::deserialize(deserializer)?;
        let mut components = Vec::with_capacity(raw.components.len());
        for c in raw.components {
            let weight = parse_rational(&c.weight).map_err(D::Error::custom)?;
            let support = c
                .support
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<Vec<_>, _>>()
                .map_err(D::Error::custom)?;
            components.push(MixtureComponent { weight, support });
        }
        Ok(MixtureDecomposition {
            k: raw.k,
            tau: parse_rational(&raw.tau).map_err(D::Error::custom)?,
            components,
        })
    }
}
