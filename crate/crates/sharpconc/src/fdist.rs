//! 64-bit floating-point mirror of the exact distribution pipeline.
//!
//! Exact rational convolution is the default everywhere; this module exists
//! for large-n asymptotics where exact denominators grow into the thousands
//! of digits. Error model: masses are renormalized to sum to 1 after every
//! convolution and the absolute renormalization corrections are accumulated
//! into a reported `drift` figure, so callers can budget the float error
//! against the tolerance they care about.
//!
//! [`IntLattice`] is the workhorse: a dense step-1 integer-lattice
//! distribution with data-parallel convolution (rayon under the default
//! `parallel` feature, sequential otherwise; both paths sum in the same
//! order and produce bit-identical results). [`FloatDist`] mirrors the
//! general atom-list operations for irregular supports.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Dense distribution on consecutive integers `origin, origin+1, ...`.
#[derive(Debug, Clone)]
pub struct IntLattice {
    origin: i64,
    mass: Vec<f64>,
    drift: f64,
}

/// `out[t] = sum_i a[i] * b[t-i]`, summed in ascending `i` order.
#[inline]
fn conv_at(a: &[f64], b: &[f64], t: usize) -> f64 {
    let i_min = (t + 1).saturating_sub(b.len());
    let i_max = t.min(a.len() - 1);
    let mut s = 0.0;
    for i in i_min..=i_max {
        s += a[i] * b[t - i];
    }
    s
}

/// Sequential dense convolution; always available as the reference path.
pub fn conv_dense_seq(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() + b.len() - 1;
    (0..n).map(|t| conv_at(a, b, t)).collect()
}

#[cfg(feature = "parallel")]
fn conv_dense_par(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() + b.len() - 1;
    (0..n)
        .into_par_iter()
        .with_min_len(1024)
        .map(|t| conv_at(a, b, t))
        .collect()
}

/// Dense convolution; parallel when the output is large enough to pay for
/// the fan-out. Same summation order as [`conv_dense_seq`], so the two
/// paths agree bit for bit.
pub fn conv_dense(a: &[f64], b: &[f64]) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    {
        if a.len() + b.len() >= 8192 {
            return conv_dense_par(a, b);
        }
    }
    conv_dense_seq(a, b)
}

impl IntLattice {
    /// Builds from raw masses, renormalizing to total 1.
    pub fn new(origin: i64, mass: Vec<f64>) -> Self {
        assert!(!mass.is_empty());
        let mut lat = Self {
            origin,
            mass,
            drift: 0.0,
        };
        lat.renormalize();
        lat
    }

    /// Point mass at 0.
    pub fn delta() -> Self {
        Self {
            origin: 0,
            mass: vec![1.0],
            drift: 0.0,
        }
    }

    fn renormalize(&mut self) {
        let total: f64 = self.mass.iter().sum();
        self.drift += (1.0 - total).abs();
        if total > 0.0 {
            let inv = 1.0 / total;
            for m in &mut self.mass {
                *m *= inv;
            }
        }
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Accumulated absolute renormalization corrections.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    fn convolve_impl(&self, other: &Self, seq: bool) -> Self {
        let mass = if seq {
            conv_dense_seq(&self.mass, &other.mass)
        } else {
            conv_dense(&self.mass, &other.mass)
        };
        let mut out = Self {
            origin: self.origin + other.origin,
            mass,
            drift: self.drift + other.drift,
        };
        out.renormalize();
        out
    }

    pub fn convolve(&self, other: &Self) -> Self {
        self.convolve_impl(other, false)
    }

    /// Sequential reference convolution (bench baseline).
    pub fn convolve_seq(&self, other: &Self) -> Self {
        self.convolve_impl(other, true)
    }

    fn power_impl(&self, n: u64, seq: bool) -> Self {
        assert!(n >= 1, "power needs n >= 1");
        let mut result: Option<Self> = None;
        let mut base = self.clone();
        let mut n = n;
        loop {
            if n & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.convolve_impl(&base, seq),
                });
            }
            n >>= 1;
            if n == 0 {
                break;
            }
            base = base.convolve_impl(&base, seq);
        }
        result.unwrap()
    }

    /// Distribution of the sum of `n` independent copies, by repeated
    /// squaring.
    pub fn power(&self, n: u64) -> Self {
        self.power_impl(n, false)
    }

    pub fn power_seq(&self, n: u64) -> Self {
        self.power_impl(n, true)
    }

    /// `Q_h` for integer `h = width`: every window `(x, x+width]` covers
    /// exactly `width` consecutive lattice points, so the supremum is a
    /// sliding-window maximum. Returns `(value, witness_left)`.
    pub fn concentration_window(&self, width: usize) -> (f64, i64) {
        assert!(width >= 1);
        let n = self.mass.len();
        let w = width.min(n);
        let mut sum: f64 = self.mass[..w].iter().sum();
        let mut best = sum;
        let mut best_start = 0usize;
        for start in 1..=(n - w) {
            sum += self.mass[start + w - 1] - self.mass[start - 1];
            if sum > best {
                best = sum;
                best_start = start;
            }
        }
        // Window covering lattice points [origin+start, origin+start+width-1]
        // is the interval (origin+start-1, origin+start-1+width].
        (best, self.origin + best_start as i64 - 1)
    }

    /// Mass of the integer points in `[lo, hi]`.
    pub fn range_mass_inclusive(&self, lo: i64, hi: i64) -> f64 {
        let n = self.mass.len() as i64;
        let a = (lo - self.origin).clamp(0, n);
        let b = (hi - self.origin + 1).clamp(0, n);
        if a >= b {
            return 0.0;
        }
        self.mass[a as usize..b as usize].iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, m)| (self.origin + i as i64) as f64 * m)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.mass
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let d = (self.origin + i as i64) as f64 - mu;
                d * d * m
            })
            .sum()
    }
}

/// General atom-list float distribution. Atom locations are merged by exact
/// f64 equality, which is the right notion for the integer- and
/// dyadic-valued supports this pipeline sees.
#[derive(Debug, Clone)]
pub struct FloatDist {
    atoms: Vec<(f64, f64)>,
    drift: f64,
}

impl FloatDist {
    pub fn validate(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.retain(|&(_, m)| m != 0.0);
        assert!(!atoms.is_empty());
        assert!(atoms.iter().all(|&(x, m)| x.is_finite() && m > 0.0));
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += m,
                _ => merged.push((x, m)),
            }
        }
        let total: f64 = merged.iter().map(|&(_, m)| m).sum();
        let drift = (1.0 - total).abs();
        let inv = 1.0 / total;
        for a in &mut merged {
            a.1 *= inv;
        }
        Self {
            atoms: merged,
            drift,
        }
    }

    pub fn from_exact(d: &crate::dist::DiscreteDistribution) -> Self {
        Self::validate(
            d.atoms()
                .iter()
                .map(|(x, m)| (crate::rational::to_f64(x), crate::rational::to_f64(m)))
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Same sweep as the exact pipeline: windows ending on atoms.
    pub fn concentration(&self, h: f64) -> (f64, f64) {
        assert!(h > 0.0);
        let n = self.atoms.len();
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        for &(_, m) in &self.atoms {
            prefix.push(prefix.last().unwrap() + m);
        }
        let mut best = 0.0;
        let mut best_left = self.atoms[0].0 - h;
        let mut lo = 0usize;
        for j in 0..n {
            let left = self.atoms[j].0 - h;
            while self.atoms[lo].0 <= left {
                lo += 1;
            }
            let mass = prefix[j + 1] - prefix[lo];
            if mass > best {
                best = mass;
                best_left = left;
            }
        }
        (best, best_left)
    }

    pub fn convolve(&self, other: &Self) -> Self {
        let mut pairs = Vec::with_capacity(self.atoms.len() * other.atoms.len());
        for &(xa, ma) in &self.atoms {
            for &(xb, mb) in &other.atoms {
                pairs.push((xa + xb, ma * mb));
            }
        }
        let mut out = Self::validate(pairs);
        out.drift += self.drift + other.drift;
        out
    }

    pub fn interval_mass(&self, left: f64, right: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|&&(x, _)| x > left && x <= right)
            .map(|&(_, m)| m)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean: f64 = self.atoms.iter().map(|&(x, m)| x * m).sum();
        self.atoms
            .iter()
            .map(|&(x, m)| (x - mean) * (x - mean) * m)
            .sum()
    }

    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        assert!(scale != 0.0);
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.0 = a.0 * scale + shift;
        }
        if scale < 0.0 {
            out.atoms.reverse();
        }
        out
    }
}
