//! Seeded randomized verification suites.
//!
//! Each suite draws its cases from a ChaCha stream keyed by the caller's
//! seed, evaluates them (in parallel under the `parallel` feature; results
//! are merged back in input order), and produces a deterministic log: one
//! line per case plus a summary. The first failing case, if any, is
//! serialized as a JSON counterexample.

use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::approx::{appendix_error_check, discretize, sup_cdf_error, CdfPiece, CdfSpec};
use crate::dist::DiscreteDistribution;
use crate::extremal::{make_extremal, sharp_bound};
use crate::lattice::{
    f_value, is_k_sperner, level_profile, lym_sum, max_k_sperner_bruteforce,
    middle_levels_family, BoxShape, VectorFamily,
};
use crate::rational::{format_rational, int, ratio, Rational};

/// The randomized suites exposed by `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lym,
    Sperner,
    TheoremMain,
    Appendix,
    Equality,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Lym => "lym",
            Suite::Sperner => "sperner",
            Suite::TheoremMain => "theorem-main",
            Suite::Appendix => "appendix",
            Suite::Equality => "equality",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lym" => Some(Suite::Lym),
            "sperner" => Some(Suite::Sperner),
            "theorem-main" => Some(Suite::TheoremMain),
            "appendix" => Some(Suite::Appendix),
            "equality" => Some(Suite::Equality),
            _ => None,
        }
    }
}

/// Result of one suite run. `log` is byte-deterministic for a fixed seed.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub suite: &'static str,
    pub cases: u64,
    pub pass: bool,
    pub log: String,
    pub counterexample: Option<Value>,
}

struct CaseResult {
    line: String,
    failure: Option<Value>,
}

fn ok_case(line: String) -> CaseResult {
    CaseResult {
        line,
        failure: None,
    }
}

fn assemble(suite: &'static str, results: Vec<CaseResult>) -> SuiteOutcome {
    let mut log = String::new();
    let mut counterexample = None;
    let mut failures = 0u64;
    for r in &results {
        log.push_str(&r.line);
        log.push('\n');
        if let Some(f) = &r.failure {
            failures += 1;
            if counterexample.is_none() {
                counterexample = Some(f.clone());
            }
        }
    }
    let pass = failures == 0;
    log.push_str(&format!(
        "suite={} cases={} failures={} {}\n",
        suite,
        results.len(),
        failures,
        if pass { "pass" } else { "FAIL" }
    ));
    SuiteOutcome {
        suite,
        cases: results.len() as u64,
        pass,
        log,
        counterexample,
    }
}

fn eval_cases<C, F>(cases: Vec<C>, eval: F) -> Vec<CaseResult>
where
    C: Send,
    F: Fn(C) -> CaseResult + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        cases.into_par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cases.into_iter().map(eval).collect()
    }
}

/// Runs one suite with `trials` randomized cases on top of its exhaustive
/// baseline.
pub fn run_suite(suite: Suite, trials: u64, seed: u64) -> SuiteOutcome {
    match suite {
        Suite::Lym => lym_suite(trials, seed),
        Suite::Sperner => sperner_suite(trials, seed),
        Suite::TheoremMain => theorem_main_suite(trials, seed),
        Suite::Appendix => appendix_suite(trials, seed),
        Suite::Equality => equality_suite(trials, seed),
    }
}

// ---------------------------------------------------------------------------
// Random generators (all deterministic in the rng)

/// Random rational in (0, 1] with denominator at most `max_den`.
pub fn random_alpha(rng: &mut impl Rng, max_den: u64) -> Rational {
    let den = rng.gen_range(1..=max_den) as i64;
    let num = rng.gen_range(1..=den);
    ratio(num, den)
}

/// Random simple rational distribution: up to `max_support` distinct
/// locations (integers plus a shared fractional offset), masses `w_i / D`
/// with a common denominator `D <= max_mass_den`.
pub fn random_simple_dist(
    rng: &mut impl Rng,
    max_support: usize,
    max_mass_den: u64,
) -> DiscreteDistribution {
    let den = rng.gen_range(1..=max_mass_den);
    let support = rng.gen_range(1..=max_support.min(den as usize));
    // Split D into `support` positive parts via distinct cut points.
    let mut cuts: Vec<u64> = (1..den).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<u64> = cuts.into_iter().take(support - 1).collect();
    cuts.push(0);
    cuts.push(den);
    cuts.sort_unstable();
    let masses: Vec<u64> = cuts.windows(2).map(|w| w[1] - w[0]).collect();

    let mut locs = std::collections::BTreeSet::new();
    while locs.len() < support {
        locs.insert(rng.gen_range(-30i64..=30));
    }
    let offset_den = rng.gen_range(1..=3i64);
    let offset_num = rng.gen_range(0..offset_den);
    let offset = ratio(offset_num, offset_den);
    let atoms = locs
        .into_iter()
        .zip(masses)
        .map(|(x, w)| (int(x) + &offset, ratio(w as i64, den as i64)))
        .collect();
    DiscreteDistribution::validate(atoms).expect("generated masses sum to 1")
}

/// Random atom+ramp distribution function with at most `max_pieces` pieces.
pub fn random_cdf_spec(rng: &mut impl Rng, max_pieces: usize) -> CdfSpec {
    let count = rng.gen_range(1..=max_pieces);
    let weights: Vec<i64> = (0..count).map(|_| rng.gen_range(1..=6i64)).collect();
    let total: i64 = weights.iter().sum();
    let mut cursor = ratio(rng.gen_range(-12i64..=12), rng.gen_range(1..=3i64));
    let mut pieces = Vec::with_capacity(count);
    for w in weights {
        let mass = ratio(w, total);
        if rng.gen_bool(0.5) {
            pieces.push(CdfPiece::Atom {
                at: cursor.clone(),
                mass,
            });
            cursor += ratio(rng.gen_range(1..=6i64), rng.gen_range(1..=3i64));
        } else {
            let len = ratio(rng.gen_range(1..=8i64), rng.gen_range(1..=3i64));
            let to = &cursor + &len;
            pieces.push(CdfPiece::Ramp {
                from: cursor.clone(),
                to: to.clone(),
                mass,
            });
            cursor = to + ratio(rng.gen_range(0..=4i64), 2);
        }
    }
    CdfSpec::new(pieces).expect("generated pieces form a valid CDF")
}

fn random_shape(rng: &mut impl Rng, max_points: u64) -> BoxShape {
    loop {
        let n = rng.gen_range(1..=4usize);
        let sides: Vec<u32> = (0..n).map(|_| rng.gen_range(2..=6u32)).collect();
        let shape = BoxShape::new(sides).unwrap();
        if shape.total_points_u64().is_some_and(|p| p <= max_points) {
            return shape;
        }
    }
}

/// All canonical box shapes (sides >= 2, nondecreasing) with at most
/// `max_points` points.
pub fn canonical_shapes(max_points: u64) -> Vec<BoxShape> {
    fn recurse(min_side: u64, budget: u64, prefix: &mut Vec<u32>, out: &mut Vec<BoxShape>) {
        let mut side = min_side;
        while side <= budget {
            prefix.push(side as u32);
            out.push(BoxShape::new(prefix.clone()).unwrap());
            recurse(side, budget / side, prefix, out);
            prefix.pop();
            side += 1;
        }
    }
    let mut out = Vec::new();
    recurse(2, max_points, &mut Vec::new(), &mut out);
    out.sort_by_key(|s| (s.total_points_u64().unwrap(), s.sides().to_vec()));
    out
}

// ---------------------------------------------------------------------------
// Exhaustive LYM machinery (shared with the acceptance tests)

/// Exhaustive-LYM statistics for one box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LymExhaustive {
    pub antichains: u64,
    /// Largest LYM sum seen across all antichains (should be exactly 1).
    pub max_sum_is_one: bool,
}

/// Enumerates every subset of the box, filters to antichains, and checks the
/// LYM sum of each. Returns statistics, or the first violating family.
pub fn exhaustive_lym_check(shape: &BoxShape) -> Result<LymExhaustive, Value> {
    let points = shape
        .total_points_u64()
        .expect("exhaustive LYM needs a tiny box") as usize;
    assert!(points <= 24, "exhaustive LYM capped at 24 points");
    let vectors = shape.vectors();
    // comparable[i]: bitmask of j != i with v_i, v_j comparable.
    let comparable: Vec<u64> = (0..points)
        .map(|i| {
            let mut mask = 0u64;
            for j in 0..points {
                if i != j {
                    let a = &vectors[i];
                    let b = &vectors[j];
                    let le = |x: &[u32], y: &[u32]| x.iter().zip(y).all(|(p, q)| p <= q);
                    if le(a, b) || le(b, a) {
                        mask |= 1 << j;
                    }
                }
            }
            mask
        })
        .collect();
    let ranks: Vec<usize> = vectors.iter().map(|v| v.iter().sum::<u32>() as usize).collect();
    let profile = level_profile(shape);
    let level_sizes: Vec<u64> = profile
        .counts
        .iter()
        .map(|c| c.to_u64().unwrap())
        .collect();

    let check_range = |range: std::ops::Range<u64>| -> Result<(u64, bool), Value> {
        let mut antichains = 0u64;
        let mut seen_one = false;
        'mask: for mask in range {
            let mut rest = mask;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if comparable[i] & mask != 0 {
                    continue 'mask;
                }
            }
            antichains += 1;
            let mut per_rank = vec![0u64; level_sizes.len()];
            let mut rest = mask;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                per_rank[ranks[i]] += 1;
            }
            let sum: Rational = per_rank
                .iter()
                .zip(&level_sizes)
                .filter(|(&c, _)| c > 0)
                .map(|(&c, &s)| ratio(c as i64, s as i64))
                .sum();
            if sum > Rational::one() {
                return Err(json!({
                    "check": "lym",
                    "shape": shape.sides(),
                    "antichain_mask": mask,
                    "lym_sum": format_rational(&sum),
                }));
            }
            if sum.is_one() {
                seen_one = true;
            }
        }
        Ok((antichains, seen_one))
    };

    let total_masks = 1u64 << points;
    #[cfg(feature = "parallel")]
    let pieces: Vec<Result<(u64, bool), Value>> = {
        let chunk = 1u64 << 12;
        let starts: Vec<u64> = (0..total_masks).step_by(chunk as usize).collect();
        starts
            .into_par_iter()
            .map(|s| check_range(s..(s + chunk).min(total_masks)))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let pieces: Vec<Result<(u64, bool), Value>> = vec![check_range(0..total_masks)];

    let mut antichains = 0u64;
    let mut seen_one = false;
    for p in pieces {
        let (a, s) = p?;
        antichains += a;
        seen_one |= s;
    }
    Ok(LymExhaustive {
        antichains,
        max_sum_is_one: seen_one,
    })
}

// ---------------------------------------------------------------------------
// Suites

fn lym_suite(trials: u64, seed: u64) -> SuiteOutcome {
    let mut results = Vec::new();
    for shape in canonical_shapes(12) {
        let line = match exhaustive_lym_check(&shape) {
            Ok(stats) => {
                if stats.max_sum_is_one {
                    ok_case(format!(
                        "lym exhaustive shape={:?} antichains={} max_sum=1 ok",
                        shape.sides(),
                        stats.antichains
                    ))
                } else {
                    CaseResult {
                        line: format!(
                            "lym exhaustive shape={:?} FAIL: no antichain attains 1",
                            shape.sides()
                        ),
                        failure: Some(json!({
                            "check": "lym-equality",
                            "shape": shape.sides(),
                        })),
                    }
                }
            }
            Err(ce) => CaseResult {
                line: format!("lym exhaustive shape={:?} FAIL", shape.sides()),
                failure: Some(ce),
            },
        };
        results.push(line);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for t in 0..trials {
        let shape = random_shape(&mut rng, 4096);
        let mut vectors = shape.vectors();
        vectors.shuffle(&mut rng);
        cases.push((t, shape, vectors));
    }
    results.extend(eval_cases(cases, |(t, shape, vectors)| {
        // Greedy random antichain.
        let mut chosen: Vec<Vec<u32>> = Vec::new();
        let le = |x: &[u32], y: &[u32]| x.iter().zip(y).all(|(p, q)| p <= q);
        for v in vectors {
            if chosen.iter().all(|c| !le(c, &v) && !le(&v, c)) {
                chosen.push(v);
            }
        }
        let size = chosen.len();
        let family = VectorFamily::new(shape.clone(), chosen).unwrap();
        let sum = lym_sum(&family);
        if sum <= Rational::one() {
            ok_case(format!(
                "lym trial={t} shape={:?} antichain={size} sum={} ok",
                shape.sides(),
                format_rational(&sum)
            ))
        } else {
            CaseResult {
                line: format!("lym trial={t} shape={:?} FAIL", shape.sides()),
                failure: Some(json!({
                    "check": "lym-random",
                    "trial": t,
                    "shape": shape.sides(),
                    "antichain": family.members(),
                    "lym_sum": format_rational(&sum),
                })),
            }
        }
    }));
    assemble("lym", results)
}

fn sperner_suite(trials: u64, seed: u64) -> SuiteOutcome {
    let mut cases = Vec::new();
    for shape in canonical_shapes(14) {
        for k in 1..=3u32 {
            cases.push((shape.clone(), k));
        }
    }
    let mut results = eval_cases(cases, |(shape, k)| {
        let brute = max_k_sperner_bruteforce(&shape, k).unwrap();
        let f = f_value(&shape, k);
        if num_bigint::BigUint::from(brute) == f {
            ok_case(format!(
                "sperner exhaustive shape={:?} k={k} max={brute} f={f} ok",
                shape.sides()
            ))
        } else {
            CaseResult {
                line: format!("sperner exhaustive shape={:?} k={k} FAIL", shape.sides()),
                failure: Some(json!({
                    "check": "sperner-bruteforce",
                    "shape": shape.sides(),
                    "k": k,
                    "bruteforce": brute,
                    "f_value": f.to_string(),
                })),
            }
        }
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_cases = Vec::new();
    for t in 0..trials {
        let shape = random_shape(&mut rng, 4096);
        let k = rng.gen_range(1..=3u32);
        // A random union of k distinct levels.
        let levels = shape.max_rank() as usize + 1;
        let mut ranks: Vec<usize> = (0..levels).collect();
        ranks.shuffle(&mut rng);
        let picked: Vec<usize> = ranks.into_iter().take(k as usize).collect();
        random_cases.push((t, shape, k, picked));
    }
    results.extend(eval_cases(random_cases, |(t, shape, k, picked)| {
        let members: Vec<Vec<u32>> = shape
            .vectors()
            .into_iter()
            .filter(|v| picked.contains(&(v.iter().sum::<u32>() as usize)))
            .collect();
        let family = VectorFamily::new(shape.clone(), members).unwrap();
        let check = is_k_sperner(&family, k);
        let f = f_value(&shape, k);
        let within = num_bigint::BigUint::from(family.len()) <= f;
        let mid = middle_levels_family(&shape, k).unwrap();
        let mid_ok =
            is_k_sperner(&mid, k).ok && num_bigint::BigUint::from(mid.len()) == f;
        if check.ok && within && mid_ok {
            ok_case(format!(
                "sperner trial={t} shape={:?} k={k} union={} f={f} ok",
                shape.sides(),
                family.len()
            ))
        } else {
            CaseResult {
                line: format!("sperner trial={t} shape={:?} k={k} FAIL", shape.sides()),
                failure: Some(json!({
                    "check": "sperner-random",
                    "trial": t,
                    "shape": shape.sides(),
                    "k": k,
                    "union_is_sperner": check.ok,
                    "union_size": family.len(),
                    "middle_levels_ok": mid_ok,
                    "f_value": f.to_string(),
                })),
            }
        }
    }));
    assemble("sperner", results)
}

fn theorem_main_suite(trials: u64, seed: u64) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for t in 0..trials {
        let n = rng.gen_range(1..=5usize);
        let ell = rng.gen_range(1..=3u32);
        let dists: Vec<DiscreteDistribution> = (0..n)
            .map(|_| random_simple_dist(&mut rng, 5, 12))
            .collect();
        cases.push((t, ell, dists));
    }
    let results = eval_cases(cases, |(t, ell, dists)| {
        let alphas: Vec<Rational> = dists
            .iter()
            .map(|d| d.concentration(&int(2)).value)
            .collect();
        let sum = DiscreteDistribution::convolve_all(&dists).unwrap();
        let h = int(2 * ell as i64);
        let q = sum.concentration(&h).value;
        let report = sharp_bound(&alphas, ell).unwrap();

        // Saturation: the extremal instance attains the bound through the
        // generic pipeline.
        let extremal_dists: Vec<DiscreteDistribution> = alphas
            .iter()
            .map(|a| make_extremal(a).unwrap().dist)
            .collect();
        let extremal_sum = DiscreteDistribution::convolve_all(&extremal_dists).unwrap();
        let attained = extremal_sum.concentration(&h).value;

        if q <= report.bound && attained == report.bound {
            ok_case(format!(
                "theorem-main trial={t} n={} ell={ell} q={} bound={} ok",
                dists.len(),
                format_rational(&q),
                format_rational(&report.bound)
            ))
        } else {
            CaseResult {
                line: format!("theorem-main trial={t} FAIL"),
                failure: Some(json!({
                    "check": "theorem-main",
                    "trial": t,
                    "ell": ell,
                    "dists": dists,
                    "alphas": alphas.iter().map(format_rational).collect::<Vec<_>>(),
                    "q_sum": format_rational(&q),
                    "bound": format_rational(&report.bound),
                    "extremal_attains": format_rational(&attained),
                })),
            }
        }
    });
    assemble("theorem-main", results)
}

fn appendix_suite(trials: u64, seed: u64) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for t in 0..trials {
        let spec = random_cdf_spec(&mut rng, 6);
        let m = *[2u32, 5, 10, 50].choose(&mut rng).unwrap();
        let h = [ratio(1, 2), int(1), int(2)]
            .choose(&mut rng)
            .unwrap()
            .clone();
        cases.push((t, spec, m, h));
    }
    let results = eval_cases(cases, |(t, spec, m, h)| {
        let disc = discretize(&spec, m).unwrap();
        let sup_err = sup_cdf_error(&spec, &disc);
        let check = appendix_error_check(&spec, m, &h).unwrap();
        let sup_ok = sup_err <= ratio(1, m as i64);
        if sup_ok && check.certified {
            ok_case(format!(
                "appendix trial={t} m={m} h={} sup_err={} gap={} ok",
                format_rational(&h),
                format_rational(&sup_err),
                format_rational(&check.gap)
            ))
        } else {
            CaseResult {
                line: format!("appendix trial={t} FAIL"),
                failure: Some(json!({
                    "check": "appendix",
                    "trial": t,
                    "spec": spec,
                    "m": m,
                    "h": format_rational(&h),
                    "sup_error": format_rational(&sup_err),
                    "gap": format_rational(&check.gap),
                    "certified": check.certified,
                })),
            }
        }
    });
    assemble("appendix", results)
}

fn equality_suite(trials: u64, seed: u64) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for t in 0..trials {
        let n = rng.gen_range(1..=8usize);
        let ell = rng.gen_range(1..=3u32);
        let alphas: Vec<Rational> = (0..n).map(|_| random_alpha(&mut rng, 12)).collect();
        cases.push((t, ell, alphas));
    }
    let results = eval_cases(cases, |(t, ell, alphas)| {
        let report = sharp_bound(&alphas, ell).unwrap();
        if report.equality_check {
            ok_case(format!(
                "equality trial={t} n={} ell={ell} bound={} ok",
                alphas.len(),
                format_rational(&report.bound)
            ))
        } else {
            CaseResult {
                line: format!("equality trial={t} FAIL"),
                failure: Some(json!({
                    "check": "equality",
                    "trial": t,
                    "ell": ell,
                    "alphas": alphas.iter().map(format_rational).collect::<Vec<_>>(),
                    "bound": format_rational(&report.bound),
                    "central_mass": format_rational(&report.central_mass),
                })),
            }
        }
    });
    assemble("equality", results)
}
