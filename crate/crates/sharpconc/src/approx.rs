//! Quantile discretization of piecewise atom+ramp distribution functions.
//!
//! A [`CdfSpec`] describes a right-continuous distribution function built
//! from point masses and linear ramps — rich enough to exercise every
//! discretization guarantee, simple enough for exact rational quantile
//! inversion. Discretizing at level `m` places an atom of mass `1/m` at each
//! generalized-inverse quantile `inf { t : F(t) >= j/m }`, `j = 1..m`;
//! coincident quantiles merge. The resulting step function `F_m` satisfies
//! `sup_t |F(t) - F_m(t)| <= 1/m` and the concentration functions differ by
//! at most `2/m` at every window width; both bounds are verified on every
//! call rather than assumed.
//!
//! Exactness note for the sup checks: between consecutive breakpoints (of
//! either function) the difference `F - F_m` is linear, so its supremum over
//! the line is attained at a breakpoint value or a breakpoint left limit.
//! The same argument drives `concentration_of_cdf`: the window mass
//! `F(x+h) - F(x)` is piecewise linear in `x` with kinks only where `x` or
//! `x+h` crosses a breakpoint, so the supremum is a maximum over windows
//! whose right endpoint is a breakpoint or a breakpoint plus `h`, together
//! with their left limits.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dist::{DiscreteDistribution, DistError};
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApproxError {
    #[error("a distribution function needs at least one piece")]
    Empty,
    #[error("invalid piece: {0}")]
    BadPiece(String),
    #[error("pieces must be ordered along the line: {0}")]
    Unordered(String),
    #[error("piece masses must sum to 1, got {0}")]
    NotNormalized(String),
    // Would falsify the discretization guarantee; cannot fire.
    #[error("CDF sup error {error} exceeds 1/{m}")]
    SupErrorExceeded { error: String, m: u32 },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// One piece of a piecewise distribution function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CdfPiece {
    Atom { at: Rational, mass: Rational },
    Ramp { from: Rational, to: Rational, mass: Rational },
}

impl CdfPiece {
    fn start(&self) -> &Rational {
        match self {
            CdfPiece::Atom { at, .. } => at,
            CdfPiece::Ramp { from, .. } => from,
        }
    }

    fn end(&self) -> &Rational {
        match self {
            CdfPiece::Atom { at, .. } => at,
            CdfPiece::Ramp { to, .. } => to,
        }
    }

    fn mass(&self) -> &Rational {
        match self {
            CdfPiece::Atom { mass, .. } | CdfPiece::Ramp { mass, .. } => mass,
        }
    }
}

/// Piecewise atom+ramp distribution function with total mass 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdfSpec {
    pieces: Vec<CdfPiece>,
}

impl CdfSpec {
    /// Validates ordering (consecutive pieces may share an endpoint, except
    /// two atoms at the same location), positive masses, ramp orientation,
    /// and total mass 1. Zero-mass pieces are dropped.
    pub fn new(pieces: Vec<CdfPiece>) -> Result<Self, ApproxError> {
        let pieces: Vec<CdfPiece> = pieces
            .into_iter()
            .filter(|p| !p.mass().is_zero())
            .collect();
        if pieces.is_empty() {
            return Err(ApproxError::Empty);
        }
        for p in &pieces {
            if p.mass().is_negative() {
                return Err(ApproxError::BadPiece(format!(
                    "negative mass {}",
                    format_rational(p.mass())
                )));
            }
            if let CdfPiece::Ramp { from, to, .. } = p {
                if from >= to {
                    return Err(ApproxError::BadPiece(format!(
                        "ramp needs from < to, got {} .. {}",
                        format_rational(from),
                        format_rational(to)
                    )));
                }
            }
        }
        for w in pieces.windows(2) {
            let strict = matches!(
                (&w[0], &w[1]),
                (CdfPiece::Atom { .. }, CdfPiece::Atom { .. })
            );
            let ok = if strict {
                w[0].end() < w[1].start()
            } else {
                w[0].end() <= w[1].start()
            };
            if !ok {
                return Err(ApproxError::Unordered(format!(
                    "{} then {}",
                    format_rational(w[0].end()),
                    format_rational(w[1].start())
                )));
            }
        }
        let total: Rational = pieces.iter().map(|p| p.mass().clone()).sum();
        if !total.is_one() {
            return Err(ApproxError::NotNormalized(format_rational(&total)));
        }
        Ok(Self { pieces })
    }

    /// Pure-atom distribution function of a discrete distribution.
    pub fn from_discrete(d: &DiscreteDistribution) -> Self {
        Self {
            pieces: d
                .atoms()
                .iter()
                .map(|(x, m)| CdfPiece::Atom {
                    at: x.clone(),
                    mass: m.clone(),
                })
                .collect(),
        }
    }

    pub fn pieces(&self) -> &[CdfPiece] {
        &self.pieces
    }

    /// `F(t) = P(X <= t)`, right-continuous.
    pub fn cdf(&self, t: &Rational) -> Rational {
        self.cdf_impl(t, false)
    }

    /// Left limit `F(t-)`.
    pub fn cdf_left(&self, t: &Rational) -> Rational {
        self.cdf_impl(t, true)
    }

    fn cdf_impl(&self, t: &Rational, left_limit: bool) -> Rational {
        let mut acc = Rational::zero();
        for p in &self.pieces {
            match p {
                CdfPiece::Atom { at, mass } => {
                    let counted = if left_limit { at < t } else { at <= t };
                    if counted {
                        acc += mass;
                    }
                }
                CdfPiece::Ramp { from, to, mass } => {
                    if t >= to {
                        acc += mass;
                    } else if t > from {
                        acc += mass * (t - from) / (to - from);
                    }
                }
            }
        }
        acc
    }

    /// Generalized inverse `inf { t : F(t) >= u }` for `u` in `(0, 1]`.
    /// At a flat stretch whose level is exactly `u`, this returns the left
    /// end of the stretch (the inf convention).
    pub fn quantile(&self, u: &Rational) -> Rational {
        assert!(u.is_positive() && u <= &Rational::one());
        let mut acc = Rational::zero();
        for p in &self.pieces {
            let reached = &acc + p.mass() >= *u;
            if reached {
                return match p {
                    CdfPiece::Atom { at, .. } => at.clone(),
                    CdfPiece::Ramp { from, to, mass } => {
                        from + (u - &acc) * (to - from) / mass
                    }
                };
            }
            acc += p.mass();
        }
        // Total mass is 1 and u <= 1, so the loop always returns.
        unreachable!("quantile({u}) with total mass 1")
    }

    /// All atom locations and ramp endpoints, ascending.
    pub fn breakpoints(&self) -> Vec<Rational> {
        let mut set = BTreeSet::new();
        for p in &self.pieces {
            set.insert(p.start().clone());
            set.insert(p.end().clone());
        }
        set.into_iter().collect()
    }

    /// Exact distribution function of `X + D` for `D` discrete and
    /// independent: a mass-weighted mixture of shifted copies, with
    /// overlapping ramp segments split at the union of their endpoints.
    pub fn convolve_discrete(&self, d: &DiscreteDistribution) -> CdfSpec {
        let mut atom_acc: BTreeMap<Rational, Rational> = BTreeMap::new();
        // (from, to, density) for every shifted ramp.
        let mut ramps: Vec<(Rational, Rational, Rational)> = Vec::new();
        for (shift, p_shift) in d.atoms() {
            for piece in &self.pieces {
                match piece {
                    CdfPiece::Atom { at, mass } => {
                        *atom_acc.entry(at + shift).or_insert_with(Rational::zero) +=
                            mass * p_shift;
                    }
                    CdfPiece::Ramp { from, to, mass } => {
                        let density = mass * p_shift / (to - from);
                        ramps.push((from + shift, to + shift, density));
                    }
                }
            }
        }
        let mut cuts: BTreeSet<Rational> = BTreeSet::new();
        for (from, to, _) in &ramps {
            cuts.insert(from.clone());
            cuts.insert(to.clone());
        }
        for at in atom_acc.keys() {
            cuts.insert(at.clone());
        }
        let cuts: Vec<Rational> = cuts.into_iter().collect();

        let mut pieces = Vec::new();
        for (i, cut) in cuts.iter().enumerate() {
            if let Some(mass) = atom_acc.get(cut) {
                pieces.push(CdfPiece::Atom {
                    at: cut.clone(),
                    mass: mass.clone(),
                });
            }
            if i + 1 < cuts.len() {
                let next = &cuts[i + 1];
                let density: Rational = ramps
                    .iter()
                    .filter(|(from, to, _)| from <= cut && next <= to)
                    .map(|(_, _, d)| d.clone())
                    .sum();
                if !density.is_zero() {
                    pieces.push(CdfPiece::Ramp {
                        from: cut.clone(),
                        to: next.clone(),
                        mass: density * (next - cut),
                    });
                }
            }
        }
        CdfSpec::new(pieces).expect("mixture of shifted pieces is a valid CDF")
    }
}

/// Uniform discretization `X^(m)`: `m` quantile atoms of mass `1/m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discretization {
    pub m: u32,
    pub dist: DiscreteDistribution,
}

/// Largest `|F - F_m|` over the union of both functions' breakpoints,
/// including left limits.
pub fn sup_cdf_error(cdf: &CdfSpec, disc: &Discretization) -> Rational {
    let step = CdfSpec::from_discrete(&disc.dist);
    let mut candidates = cdf.breakpoints();
    candidates.extend(step.breakpoints());
    candidates.sort();
    candidates.dedup();
    let mut worst = Rational::zero();
    for t in &candidates {
        for (a, b) in [
            (cdf.cdf(t), step.cdf(t)),
            (cdf.cdf_left(t), step.cdf_left(t)),
        ] {
            let err = (a - b).abs();
            if err > worst {
                worst = err;
            }
        }
    }
    worst
}

/// Quantile discretization at level `m`, with the `1/m` sup-error guarantee
/// checked before returning.
pub fn discretize(cdf: &CdfSpec, m: u32) -> Result<Discretization, ApproxError> {
    assert!(m >= 1);
    let unit = Rational::new(1.into(), m.into());
    let atoms = (1..=m)
        .map(|j| {
            let u = Rational::new(j.into(), m.into());
            (cdf.quantile(&u), unit.clone())
        })
        .collect();
    let dist = DiscreteDistribution::validate(atoms)?;
    let disc = Discretization { m, dist };
    let err = sup_cdf_error(cdf, &disc);
    if err > unit {
        return Err(ApproxError::SupErrorExceeded {
            error: format_rational(&err),
            m,
        });
    }
    Ok(disc)
}

/// Exact `Q_h = sup_x (F(x+h) - F(x))`, half-open convention, as a maximum
/// over windows whose right endpoint is a breakpoint or breakpoint + h
/// (values and left limits).
pub fn concentration_of_cdf(cdf: &CdfSpec, h: &Rational) -> Rational {
    assert!(h.is_positive());
    let base = cdf.breakpoints();
    let mut rights: Vec<Rational> = base.iter().map(|b| b + h).collect();
    rights.extend(base);
    rights.sort();
    rights.dedup();
    let mut best = Rational::zero();
    for r in &rights {
        let l = r - h;
        let value = cdf.cdf(r) - cdf.cdf(&l);
        let limit = cdf.cdf_left(r) - cdf.cdf_left(&l);
        for v in [value, limit] {
            if v > best {
                best = v;
            }
        }
    }
    best
}

/// The `|Q_h(X) - Q_h(X^(m))| <= 2/m` certificate for one spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppendixCheck {
    pub q_original: Rational,
    pub q_discrete: Rational,
    pub gap: Rational,
    pub certified: bool,
}

pub fn appendix_error_check(
    cdf: &CdfSpec,
    m: u32,
    h: &Rational,
) -> Result<AppendixCheck, ApproxError> {
    let q_original = concentration_of_cdf(cdf, h);
    let disc = discretize(cdf, m)?;
    let q_discrete = disc.dist.concentration(h).value;
    let gap = (&q_original - &q_discrete).abs();
    let certified = gap <= Rational::new(2.into(), m.into());
    Ok(AppendixCheck {
        q_original,
        q_discrete,
        gap,
        certified,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PieceJson {
    Atom { at: String, mass: String },
    Ramp { from: String, to: String, mass: String },
}

#[derive(Serialize, Deserialize)]
struct CdfJson {
    pieces: Vec<PieceJson>,
}

impl Serialize for CdfSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CdfJson {
            pieces: self
                .pieces
                .iter()
                .map(|p| match p {
                    CdfPiece::Atom { at, mass } => PieceJson::Atom {
                        at: format_rational(at),
                        mass: format_rational(mass),
                    },
                    CdfPiece::Ramp { from, to, mass } => PieceJson::Ramp {
                        from: format_rational(from),
                        to: format_rational(to),
                        mass: format_rational(mass),
                    },
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CdfSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = CdfJson::deserialize(deserializer)?;
        let mut pieces = Vec::with_capacity(raw.pieces.len());
        for p in raw.pieces {
            let piece = match p {
                PieceJson::Atom { at, mass } => CdfPiece::Atom {
                    at: parse_rational(&at).map_err(D::Error::custom)?,
                    mass: parse_rational(&mass).map_err(D::Error::custom)?,
                },
                PieceJson::Ramp { from, to, mass } => CdfPiece::Ramp {
                    from: parse_rational(&from).map_err(D::Error::custom)?,
                    to: parse_rational(&to).map_err(D::Error::custom)?,
                    mass: parse_rational(&mass).map_err(D::Error::custom)?,
                },
            };
            pieces.push(piece);
        }
        CdfSpec::new(pieces).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn unit_ramp(from: i64, to: i64) -> CdfSpec {
        CdfSpec::new(vec![CdfPiece::Ramp {
            from: int(from),
            to: int(to),
            mass: int(1),
        }])
        .unwrap()
    }

    #[test]
    fn discretize_unit_ramp() {
        let disc = discretize(&unit_ramp(0, 1), 4).unwrap();
        let expect: Vec<_> = [1, 2, 3, 4]
            .iter()
            .map(|&j| (ratio(j, 4), ratio(1, 4)))
            .collect();
        assert_eq!(disc.dist.atoms(), expect.as_slice());
    }

    #[test]
    fn discretize_point_mass_is_fixed() {
        let spec = CdfSpec::new(vec![CdfPiece::Atom {
            at: int(5),
            mass: int(1),
        }])
        .unwrap();
        for m in [1u32, 3, 10] {
            let disc = discretize(&spec, m).unwrap();
            assert_eq!(disc.dist, DiscreteDistribution::point_mass(int(5)));
        }
    }

    #[test]
    fn discretize_atom_plus_ramp() {
        let spec = CdfSpec::new(vec![
            CdfPiece::Atom {
                at: int(0),
                mass: ratio(1, 2),
            },
            CdfPiece::Ramp {
                from: int(1),
                to: int(2),
                mass: ratio(1, 2),
            },
        ])
        .unwrap();
        let disc = discretize(&spec, 2).unwrap();
        assert_eq!(
            disc.dist.atoms(),
            &[(int(0), ratio(1, 2)), (int(2), ratio(1, 2))]
        );
    }

    #[test]
    fn quantile_inf_convention_on_flat_stretch() {
        // Mass 1/2 up to 0, flat on (0, 3), then a ramp: F hits exactly 1/2
        // at 0 and stays there, so the 1/2-quantile is 0.
        let spec = CdfSpec::new(vec![
            CdfPiece::Atom {
                at: int(0),
                mass: ratio(1, 2),
            },
            CdfPiece::Ramp {
                from: int(3),
                to: int(4),
                mass: ratio(1, 2),
            },
        ])
        .unwrap();
        assert_eq!(spec.quantile(&ratio(1, 2)), int(0));
        assert_eq!(spec.quantile(&ratio(3, 4)), ratio(7, 2));
    }

    #[test]
    fn concentration_of_cdf_cases() {
        assert_eq!(
            concentration_of_cdf(&unit_ramp(0, 1), &ratio(1, 2)),
            ratio(1, 2)
        );
        let delta = CdfSpec::new(vec![CdfPiece::Atom {
            at: int(0),
            mass: int(1),
        }])
        .unwrap();
        assert_eq!(concentration_of_cdf(&delta, &int(2)), int(1));
        // Atom at 0 plus ramp over [0, 2]: the sup at h = 1 is a left limit,
        // approached by windows creeping up on the atom from below.
        let mixed = CdfSpec::new(vec![
            CdfPiece::Atom {
                at: int(0),
                mass: ratio(1, 2),
            },
            CdfPiece::Ramp {
                from: int(0),
                to: int(2),
                mass: ratio(1, 2),
            },
        ])
        .unwrap();
        assert_eq!(concentration_of_cdf(&mixed, &int(1)), ratio(3, 4));
    }

    #[test]
    fn appendix_check_cases() {
        let c = appendix_error_check(&unit_ramp(0, 1), 10, &ratio(1, 2)).unwrap();
        assert!(c.certified);

        // A spec already uniform on m points is a fixed point: gap 0.
        let locs: Vec<Rational> = (1..=4).map(int).collect();
        let uniform = DiscreteDistribution::uniform(&locs).unwrap();
        let spec = CdfSpec::from_discrete(&uniform);
        let c = appendix_error_check(&spec, 4, &int(1)).unwrap();
        assert_eq!(c.gap, int(0));
        assert!(c.certified);

        let c = appendix_error_check(&unit_ramp(0, 1), 3, &ratio(1, 3)).unwrap();
        assert!(c.gap <= ratio(2, 3));
        assert!(c.certified);
    }

    #[test]
    fn sup_error_within_bound_for_assorted_specs() {
        let specs = vec![
            unit_ramp(-2, 5),
            CdfSpec::new(vec![
                CdfPiece::Ramp {
                    from: int(0),
                    to: ratio(1, 2),
                    mass: ratio(1, 3),
                },
                CdfPiece::Atom {
                    at: int(1),
                    mass: ratio(1, 3),
                },
                CdfPiece::Ramp {
                    from: int(1),
                    to: int(4),
                    mass: ratio(1, 3),
                },
            ])
            .unwrap(),
        ];
        for spec in &specs {
            for m in [1u32, 2, 5, 10, 50] {
                let disc = discretize(spec, m).unwrap();
                assert!(sup_cdf_error(spec, &disc) <= ratio(1, m as i64));
            }
        }
    }

    #[test]
    fn convolve_discrete_disjoint_and_overlapping() {
        let d = DiscreteDistribution::uniform(&[int(0), int(3)]).unwrap();
        let s = unit_ramp(0, 1).convolve_discrete(&d);
        assert_eq!(
            s.pieces(),
            &[
                CdfPiece::Ramp {
                    from: int(0),
                    to: int(1),
                    mass: ratio(1, 2)
                },
                CdfPiece::Ramp {
                    from: int(3),
                    to: int(4),
                    mass: ratio(1, 2)
                },
            ]
        );

        let d = DiscreteDistribution::uniform(&[int(0), ratio(1, 2)]).unwrap();
        let s = unit_ramp(0, 1).convolve_discrete(&d);
        assert_eq!(
            s.pieces(),
            &[
                CdfPiece::Ramp {
                    from: int(0),
                    to: ratio(1, 2),
                    mass: ratio(1, 4)
                },
                CdfPiece::Ramp {
                    from: ratio(1, 2),
                    to: int(1),
                    mass: ratio(1, 2)
                },
                CdfPiece::Ramp {
                    from: int(1),
                    to: ratio(3, 2),
                    mass: ratio(1, 4)
                },
            ]
        );
    }

    #[test]
    fn sum_transfer_bound() {
        // X1 general (atom + ramps), X2 and X3 discrete: the sum's CDF stays
        // exactly representable, and the discretized sum's concentration
        // sits within 2n/m of the true one.
        let x1 = CdfSpec::new(vec![
            CdfPiece::Ramp {
                from: int(-1),
                to: int(0),
                mass: ratio(1, 4),
            },
            CdfPiece::Atom {
                at: ratio(1, 2),
                mass: ratio(1, 2),
            },
            CdfPiece::Ramp {
                from: int(1),
                to: int(3),
                mass: ratio(1, 4),
            },
        ])
        .unwrap();
        let x2 = DiscreteDistribution::validate(vec![
            (int(0), ratio(2, 3)),
            (ratio(5, 2), ratio(1, 3)),
        ])
        .unwrap();
        let x3 = DiscreteDistribution::uniform(&[int(-2), int(1)]).unwrap();

        let sum_cdf = x1.convolve_discrete(&x2).convolve_discrete(&x3);
        let n = 3i64;
        for m in [5u32, 10, 50] {
            for h in [ratio(1, 2), int(1), int(2)] {
                let q_true = concentration_of_cdf(&sum_cdf, &h);
                let d1 = discretize(&x1, m).unwrap().dist;
                let d2 = discretize(&CdfSpec::from_discrete(&x2), m).unwrap().dist;
                let d3 = discretize(&CdfSpec::from_discrete(&x3), m).unwrap().dist;
                let sum_disc = d1.convolve(&d2).unwrap().convolve(&d3).unwrap();
                let q_disc = sum_disc.concentration(&h).value;
                let gap = (q_true - q_disc).abs();
                assert!(
                    gap <= ratio(2 * n, m as i64),
                    "m={m} h={h}: gap {gap}"
                );
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let spec = CdfSpec::new(vec![
            CdfPiece::Atom {
                at: int(0),
                mass: ratio(1, 2),
            },
            CdfPiece::Ramp {
                from: int(1),
                to: int(2),
                mass: ratio(1, 2),
            },
        ])
        .unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            s,
            r#"{"pieces":[{"kind":"atom","at":"0","mass":"1/2"},{"kind":"ramp","from":"1","to":"2","mass":"1/2"}]}"#
        );
        let back: CdfSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn rejects_malformed_specs() {
        assert!(matches!(CdfSpec::new(vec![]), Err(ApproxError::Empty)));
        assert!(CdfSpec::new(vec![CdfPiece::Ramp {
            from: int(1),
            to: int(0),
            mass: int(1),
        }])
        .is_err());
        assert!(CdfSpec::new(vec![
            CdfPiece::Atom {
                at: int(1),
                mass: ratio(1, 2)
            },
            CdfPiece::Atom {
                at: int(0),
                mass: ratio(1, 2)
            },
        ])
        .is_err());
        assert!(CdfSpec::new(vec![CdfPiece::Atom {
            at: int(0),
            mass: ratio(1, 2)
        }])
        .is_err());
    }
}
