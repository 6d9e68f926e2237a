//! Sperner and LYM combinatorics on products of chains.
//!
//! Multisets over `[n]` with multiplicity bounds `k_i` are vectors in the
//! discrete box `{0..k_1-1} x ... x {0..k_n-1}` under the coordinatewise
//! order. The rank-`i` level `L_i` collects vectors with coordinate sum `i`;
//! the level sizes are symmetric and unimodal, and `f(shape, k)` — the total
//! size of the `k` largest (middle) levels — is the maximum size of any
//! family with no chain of `k+1` members.
//!
//! `max_k_sperner_bruteforce` verifies that maximum by exhausting all
//! `2^points` subsets (cap: 20 points), which doubles as the independent
//! oracle for `f_value`. `lr_family_check` builds the family of outcome
//! vectors whose coordinate sums land in a window `(x-l, x+l]` over supports
//! with pairwise gaps >= 2, and confirms it is l-Sperner and within the `f`
//! bound.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use crate::rational::{int, Rational};

/// Exhaustive subset search cap, in box points (2^20 masks).
pub const BRUTEFORCE_POINT_CAP: usize = 20;

/// Full-enumeration cap for `lr_family_check`, in box vectors.
pub const LR_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("box shape must have at least one side")]
    EmptyShape,
    #[error("box sides must be >= 1")]
    ZeroSide,
    #[error("vector {0} lies outside the box")]
    OutOfBox(String),
    #[error("box has {points} points, over the cap {cap}")]
    ResourceLimit { points: String, cap: u64 },
    #[error("support {0} must be sorted with pairwise gaps >= 2")]
    InvalidSupport(String),
    // The two below would falsify the combinatorial core; they cannot fire
    // for valid inputs and are surfaced loudly rather than tolerated.
    #[error("window family is not l-Sperner; violating chain: {chain}")]
    SpernerViolation { chain: String },
    #[error("window family has {size} members, above the bound {bound}")]
    BoundExceeded { size: u64, bound: String },
}

/// Side lengths `k_1, ..., k_n` of a discrete box, each >= 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxShape {
    sides: Vec<u32>,
}

impl BoxShape {
    pub fn new(sides: Vec<u32>) -> Result<Self, LatticeError> {
        if sides.is_empty() {
            return Err(LatticeError::EmptyShape);
        }
        if sides.iter().any(|&k| k == 0) {
            return Err(LatticeError::ZeroSide);
        }
        Ok(Self { sides })
    }

    pub fn sides(&self) -> &[u32] {
        &self.sides
    }

    pub fn total_points(&self) -> BigUint {
        self.sides
            .iter()
            .fold(BigUint::one(), |acc, &k| acc * BigUint::from(k))
    }

    pub fn total_points_u64(&self) -> Option<u64> {
        self.total_points().to_u64()
    }

    /// Largest coordinate sum `N = sum (k_i - 1)`.
    pub fn max_rank(&self) -> u32 {
        self.sides.iter().map(|&k| k - 1).sum()
    }

    /// All box vectors in lexicographic order. Caller is responsible for the
    /// box being enumerable.
    pub fn vectors(&self) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; self.sides.len()];
        loop {
            out.push(cur.clone());
            let mut pos = self.sides.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                if cur[pos] + 1 < self.sides[pos] {
                    cur[pos] += 1;
                    break;
                }
                cur[pos] = 0;
            }
        }
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        v.len() == self.sides.len() && v.iter().zip(&self.sides).all(|(&x, &k)| x < k)
    }
}

/// Level sizes `|L_0|, ..., |L_N|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelProfile {
    pub shape: BoxShape,
    pub counts: Vec<BigUint>,
}

/// Level sizes by coefficient extraction from
/// `prod_i (1 + q + ... + q^{k_i - 1})`. Symmetry and unimodality of the
/// result are asserted on every call.
pub fn level_profile(shape: &BoxShape) -> LevelProfile {
    let mut counts = vec![BigUint::one()];
    for &k in shape.sides() {
        let mut next = vec![BigUint::zero(); counts.len() + k as usize - 1];
        for (i, c) in counts.iter().enumerate() {
            for j in 0..k as usize {
                next[i + j] += c;
            }
        }
        counts = next;
    }
    let n = counts.len();
    for i in 0..n / 2 {
        assert_eq!(counts[i], counts[n - 1 - i], "level sizes are symmetric");
    }
    for i in 0..n / 2 {
        assert!(counts[i] <= counts[i + 1], "level sizes are unimodal");
    }
    let total: BigUint = counts.iter().sum();
    assert_eq!(total, shape.total_points());
    LevelProfile {
        shape: shape.clone(),
        counts,
    }
}

/// Inclusive index range of the `k` middle levels: centered on `ceil(N/2)`,
/// extended symmetrically, preferring the lower index on ties. Tied levels
/// have equal size by symmetry, so `f` is unaffected by the tie rule; it
/// only pins down witness output.
pub fn middle_level_indices(shape: &BoxShape, k: u32) -> (usize, usize) {
    assert!(k >= 1);
    let nlev = shape.max_rank() as usize + 1;
    let take = (k as usize).min(nlev);
    let profile = level_profile(shape);
    let mut lo = nlev / 2; // ceil(N/2) with N = nlev - 1
    let mut hi = lo;
    while hi - lo + 1 < take {
        if lo == 0 {
            hi += 1;
        } else if hi == nlev - 1 {
            lo -= 1;
        } else if profile.counts[lo - 1] >= profile.counts[hi + 1] {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    (lo, hi)
}

/// `f(shape, k)`: total size of the `k` largest levels. For
/// `k > max_rank + 1` this is the whole box.
pub fn f_value(shape: &BoxShape, k: u32) -> BigUint {
    let (lo, hi) = middle_level_indices(shape, k);
    let profile = level_profile(shape);
    profile.counts[lo..=hi].iter().sum()
}

/// A set of box vectors, stored sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorFamily {
    shape: BoxShape,
    members: Vec<Vec<u32>>,
}

impl VectorFamily {
    pub fn new(shape: BoxShape, mut members: Vec<Vec<u32>>) -> Result<Self, LatticeError> {
        for m in &members {
            if !shape.contains(m) {
                return Err(LatticeError::OutOfBox(format!("{m:?}")));
            }
        }
        members.sort();
        members.dedup();
        Ok(Self { shape, members })
    }

    pub fn shape(&self) -> &BoxShape {
        &self.shape
    }

    pub fn members(&self) -> &[Vec<u32>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn rank(v: &[u32]) -> u32 {
    v.iter().sum()
}

fn le(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Exact LYM sum over ranks: `sum_i |F cap L_i| / |L_i|`.
pub fn lym_sum(family: &VectorFamily) -> Rational {
    let profile = level_profile(&family.shape);
    let mut per_rank = vec![0u64; profile.counts.len()];
    for m in &family.members {
        per_rank[rank(m) as usize] += 1;
    }
    per_rank
        .iter()
        .zip(&profile.counts)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, size)| {
            Rational::new(
                BigInt::from(c),
                BigInt::from(size.clone()),
            )
        })
        .sum()
}

/// Outcome of a k-Sperner check; `witness` is a violating chain of `k+1`
/// members when the family fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpernerCheck {
    pub ok: bool,
    pub witness: Option<Vec<Vec<u32>>>,
}

/// Longest-chain test: true iff no `k+1` members form a chain under the
/// product order. DP over members sorted by rank (comparable distinct
/// vectors always differ in rank), O(|F|^2).
pub fn is_k_sperner(family: &VectorFamily, k: u32) -> SpernerCheck {
    assert!(k >= 1);
    let mut order: Vec<usize> = (0..family.members.len()).collect();
    order.sort_by_key(|&i| (rank(&family.members[i]), i));
    let mut dp = vec![1u32; order.len()];
    let mut parent = vec![usize::MAX; order.len()];
    for oi in 0..order.len() {
        let vi = &family.members[order[oi]];
        for oj in 0..oi {
            let vj = &family.members[order[oj]];
            if dp[oj] + 1 > dp[oi] && le(vj, vi) {
                dp[oi] = dp[oj] + 1;
                parent[oi] = oj;
            }
        }
        if dp[oi] > k {
            // Chain of k+1 found; walk the parents for the witness.
            let mut chain = Vec::with_capacity(k as usize + 1);
            let mut cur = oi;
            loop {
                chain.push(family.members[order[cur]].clone());
                if parent[cur] == usize::MAX {
                    break;
                }
                cur = parent[cur];
            }
            chain.reverse();
            return SpernerCheck {
                ok: false,
                witness: Some(chain),
            };
        }
    }
    SpernerCheck {
        ok: true,
        witness: None,
    }
}

struct MaskSearch {
    /// Predecessor bitmask per point, in rank order.
    pred: Vec<u32>,
    k: u32,
}

impl MaskSearch {
    fn build(shape: &BoxShape, k: u32) -> Self {
        let vectors = shape.vectors();
        let mut order: Vec<usize> = (0..vectors.len()).collect();
        order.sort_by_key(|&i| (rank(&vectors[i]), i));
        let pred = (0..order.len())
            .map(|p| {
                let mut mask = 0u32;
                for q in 0..p {
                    if le(&vectors[order[q]], &vectors[order[p]]) && order[q] != order[p] {
                        mask |= 1 << q;
                    }
                }
                mask
            })
            .collect();
        Self { pred, k }
    }

    /// Size of the subset if it is k-Sperner, else None. Early-exits as soon
    /// as a chain of k+1 appears.
    #[inline]
    fn sperner_size(&self, mask: u32) -> Option<u32> {
        let mut dp = [0u8; BRUTEFORCE_POINT_CAP];
        let mut rest = mask;
        while rest != 0 {
            let p = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let mut best = 0u8;
            let mut preds = self.pred[p] & mask;
            while preds != 0 {
                let q = preds.trailing_zeros() as usize;
                preds &= preds - 1;
                best = best.max(dp[q]);
            }
            dp[p] = best + 1;
            if dp[p] as u32 > self.k {
                return None;
            }
        }
        Some(mask.count_ones())
    }
}

fn bruteforce_prepare(shape: &BoxShape, k: u32) -> Result<(MaskSearch, u32), LatticeError> {
    assert!(k >= 1);
    let points = shape
        .total_points_u64()
        .filter(|&p| p <= BRUTEFORCE_POINT_CAP as u64)
        .ok_or_else(|| LatticeError::ResourceLimit {
            points: shape.total_points().to_string(),
            cap: BRUTEFORCE_POINT_CAP as u64,
        })? as u32;
    Ok((MaskSearch::build(shape, k), points))
}

/// Exact maximum size of a k-Sperner family, by exhausting all subsets of
/// the box. Errors above [`BRUTEFORCE_POINT_CAP`] points; for larger boxes
/// use [`middle_levels_family`], which is a lower-bound construction.
pub fn max_k_sperner_bruteforce(shape: &BoxShape, k: u32) -> Result<u64, LatticeError> {
    let (search, points) = bruteforce_prepare(shape, k)?;
    let masks = 1usize << points;
    #[cfg(feature = "parallel")]
    let best = (0..masks)
        .into_par_iter()
        .with_min_len(1 << 12)
        .filter_map(|mask| search.sperner_size(mask as u32))
        .max();
    #[cfg(not(feature = "parallel"))]
    let best = (0..masks)
        .filter_map(|mask| search.sperner_size(mask as u32))
        .max();
    Ok(best.unwrap_or(0) as u64)
}

/// Sequential twin of [`max_k_sperner_bruteforce`] (bench baseline).
pub fn max_k_sperner_bruteforce_seq(shape: &BoxShape, k: u32) -> Result<u64, LatticeError> {
    let (search, points) = bruteforce_prepare(shape, k)?;
    let best = (0..1u64 << points)
        .filter_map(|mask| search.sperner_size(mask as u32))
        .max();
    Ok(best.unwrap_or(0) as u64)
}

/// The union of the `k` middle levels: a k-Sperner family of size
/// `f(shape, k)` (a chain of `k+1` distinct vectors needs `k+1` distinct
/// ranks). This is the greedy lower-bound construction for boxes above the
/// exhaustive cap.
pub fn middle_levels_family(shape: &BoxShape, k: u32) -> Result<VectorFamily, LatticeError> {
    let points = shape.total_points_u64().filter(|&p| p <= LR_ENUMERATION_CAP);
    if points.is_none() {
        return Err(LatticeError::ResourceLimit {
            points: shape.total_points().to_string(),
            cap: LR_ENUMERATION_CAP,
        });
    }
    let (lo, hi) = middle_level_indices(shape, k);
    let members = shape
        .vectors()
        .into_iter()
        .filter(|v| {
            let r = rank(v) as usize;
            r >= lo && r <= hi
        })
        .collect();
    let family = VectorFamily::new(shape.clone(), members)?;
    debug_assert_eq!(BigUint::from(family.len()), f_value(shape, k));
    Ok(family)
}

/// Result of the window-family check over gap->=2 supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LrCheck {
    pub family_size: u64,
    pub sperner_ok: bool,
    pub bound: BigUint,
}

/// Builds `F = { v : sum_j supports[j][v_j] in (x-l, x+l] }` by full
/// enumeration, verifies that `F` is l-Sperner, and checks
/// `|F| <= f(shape, l)`. Both failures are loud errors; neither can occur
/// for valid gap->=2 supports.
pub fn lr_family_check(
    supports: &[Vec<Rational>],
    x: &Rational,
    ell: u32,
) -> Result<LrCheck, LatticeError> {
    assert!(ell >= 1);
    if supports.is_empty() {
        return Err(LatticeError::EmptyShape);
    }
    let two = int(2);
    for s in supports {
        if s.is_empty() {
            return Err(LatticeError::InvalidSupport("[]".into()));
        }
        for pair in s.windows(2) {
            if &pair[1] - &pair[0] < two {
                return Err(LatticeError::InvalidSupport(format!(
                    "[{}]",
                    s.iter()
                        .map(|r| r.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                )));
            }
        }
    }
    let shape = BoxShape::new(supports.iter().map(|s| s.len() as u32).collect())?;
    let points = shape.total_points_u64().filter(|&p| p <= LR_ENUMERATION_CAP);
    if points.is_none() {
        return Err(LatticeError::ResourceLimit {
            points: shape.total_points().to_string(),
            cap: LR_ENUMERATION_CAP,
        });
    }

    let low = x - int(ell as i64);
    let high = x + int(ell as i64);
    let mut members = Vec::new();
    let mut cur = vec![0u32; supports.len()];
    let mut sum: Rational = supports.iter().map(|s| s[0].clone()).sum();
    loop {
        if sum > low && sum <= high {
            members.push(cur.clone());
        }
        // Mixed-radix increment, updating the running sum by the deltas.
        let mut pos = supports.len();
        loop {
            if pos == 0 {
                let family = VectorFamily::new(shape.clone(), members)?;
                return finish_lr_check(&shape, family, ell);
            }
            pos -= 1;
            let digit = cur[pos] as usize;
            if digit + 1 < supports[pos].len() {
                sum += &supports[pos][digit + 1] - &supports[pos][digit];
                cur[pos] += 1;
                break;
            }
            sum += &supports[pos][0] - &supports[pos][digit];
            cur[pos] = 0;
        }
    }
}

fn finish_lr_check(
    shape: &BoxShape,
    family: VectorFamily,
    ell: u32,
) -> Result<LrCheck, LatticeError> {
    if !family.is_empty() {
        let check = is_k_sperner(&family, ell);
        if !check.ok {
            return Err(LatticeError::SpernerViolation {
                chain: format!("{:?}", check.witness.unwrap()),
            });
        }
    }
    let bound = f_value(shape, ell);
    let family_size = family.len() as u64;
    if BigUint::from(family_size) > bound {
        return Err(LatticeError::BoundExceeded {
            size: family_size,
            bound: bound.to_string(),
        });
    }
    Ok(LrCheck {
        family_size,
        sperner_ok: true,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn shape(sides: &[u32]) -> BoxShape {
        BoxShape::new(sides.to_vec()).unwrap()
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    /// Oracle: level counts by enumerating every vector of the box.
    fn profile_by_enumeration(s: &BoxShape) -> Vec<u64> {
        let mut counts = vec![0u64; s.max_rank() as usize + 1];
        for v in s.vectors() {
            counts[rank(&v) as usize] += 1;
        }
        counts
    }

    #[test]
    fn profiles_match_enumeration() {
        for s in [shape(&[2, 2]), shape(&[2, 2, 2]), shape(&[3, 2]), shape(&[4, 3, 2])] {
            let p = level_profile(&s);
            let oracle = profile_by_enumeration(&s);
            let got: Vec<u64> = p.counts.iter().map(|c| c.to_u64().unwrap()).collect();
            assert_eq!(got, oracle);
        }
        assert_eq!(
            level_profile(&shape(&[2, 2])).counts,
            vec![big(1), big(2), big(1)]
        );
        assert_eq!(
            level_profile(&shape(&[2, 2, 2])).counts,
            vec![big(1), big(3), big(3), big(1)]
        );
        assert_eq!(
            level_profile(&shape(&[3, 2])).counts,
            vec![big(1), big(2), big(2), big(1)]
        );
    }

    #[test]
    fn f_value_examples() {
        assert_eq!(f_value(&shape(&[2, 2, 2]), 1), big(3));
        assert_eq!(f_value(&shape(&[2, 2, 2]), 2), big(6));
        assert_eq!(f_value(&shape(&[3, 2]), 2), big(4));
        assert_eq!(f_value(&shape(&[2, 2]), 2), big(3));
        // Beyond the rank range, f is the whole box.
        assert_eq!(f_value(&shape(&[3, 2]), 9), big(6));
    }

    #[test]
    fn lym_sum_cases() {
        let s = shape(&[2, 2, 2]);
        let single = VectorFamily::new(s.clone(), vec![vec![1, 0, 0]]).unwrap();
        assert_eq!(lym_sum(&single), ratio(1, 3));

        let mid = middle_levels_family(&s, 1).unwrap();
        assert_eq!(lym_sum(&mid), ratio(1, 1));

        let two_mid = middle_levels_family(&s, 2).unwrap();
        assert_eq!(lym_sum(&two_mid), ratio(2, 1));
    }

    #[test]
    fn sperner_checks() {
        let s = shape(&[2, 2]);
        let bad = VectorFamily::new(s.clone(), vec![vec![0, 0], vec![1, 1]]).unwrap();
        let check = is_k_sperner(&bad, 1);
        assert!(!check.ok);
        assert_eq!(check.witness.unwrap(), vec![vec![0, 0], vec![1, 1]]);

        let s3 = shape(&[2, 2, 2]);
        assert!(is_k_sperner(&middle_levels_family(&s3, 1).unwrap(), 1).ok);
        assert!(is_k_sperner(&middle_levels_family(&s3, 2).unwrap(), 2).ok);
        // Two middle levels contain chains of length 2, so they are not an
        // antichain.
        assert!(!is_k_sperner(&middle_levels_family(&s3, 2).unwrap(), 1).ok);
    }

    #[test]
    fn bruteforce_examples() {
        assert_eq!(max_k_sperner_bruteforce(&shape(&[2, 2, 2]), 1).unwrap(), 3);
        assert_eq!(max_k_sperner_bruteforce(&shape(&[2, 2]), 2).unwrap(), 3);
        assert_eq!(max_k_sperner_bruteforce(&shape(&[3, 3]), 1).unwrap(), 3);
    }

    #[test]
    fn bruteforce_matches_f_on_small_boxes() {
        for s in [shape(&[2, 2]), shape(&[3, 2]), shape(&[2, 2, 2]), shape(&[4, 3])] {
            for k in 1..=3 {
                assert_eq!(
                    BigUint::from(max_k_sperner_bruteforce(&s, k).unwrap()),
                    f_value(&s, k),
                    "shape {:?} k {}",
                    s.sides(),
                    k
                );
            }
        }
    }

    #[test]
    fn bruteforce_parallel_and_sequential_agree() {
        for s in [shape(&[3, 2, 2]), shape(&[4, 3])] {
            for k in 1..=2 {
                assert_eq!(
                    max_k_sperner_bruteforce(&s, k).unwrap(),
                    max_k_sperner_bruteforce_seq(&s, k).unwrap()
                );
            }
        }
    }

    #[test]
    fn bruteforce_rejects_large_boxes() {
        assert!(matches!(
            max_k_sperner_bruteforce(&shape(&[5, 5]), 1),
            Err(LatticeError::ResourceLimit { .. })
        ));
    }

    #[test]
    fn lr_check_examples() {
        let zero = int(0);
        let r = lr_family_check(
            &[vec![int(-1), int(1)], vec![int(-1), int(1)]],
            &zero,
            1,
        )
        .unwrap();
        assert_eq!(r.family_size, 2);
        assert_eq!(r.bound, big(2));
        assert!(r.sperner_ok);

        let r = lr_family_check(&[vec![int(0), int(2), int(4)]], &int(2), 1).unwrap();
        assert_eq!(r.family_size, 1);
        assert_eq!(r.bound, big(1));

        let r = lr_family_check(
            &[vec![int(-1), int(1)], vec![int(-3), int(0), int(3)]],
            &zero,
            1,
        )
        .unwrap();
        assert_eq!(r.family_size, 1);
        assert_eq!(r.bound, big(2));
    }

    #[test]
    fn lr_check_rejects_narrow_gaps() {
        assert!(matches!(
            lr_family_check(&[vec![int(0), int(1)]], &int(0), 1),
            Err(LatticeError::InvalidSupport(_))
        ));
    }

    #[test]
    fn lr_check_rational_supports() {
        // Rational gap->=2 supports with an off-grid window.
        let r = lr_family_check(
            &[
                vec![ratio(-5, 2), ratio(1, 2), ratio(7, 2)],
                vec![ratio(-3, 2), ratio(5, 2)],
            ],
            &ratio(1, 4),
            2,
        )
        .unwrap();
        assert!(r.sperner_ok);
        assert!(BigUint::from(r.family_size) <= r.bound);
    }
}
