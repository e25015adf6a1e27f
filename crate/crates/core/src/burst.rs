//! The built-in heavy-tailed "burst" state: `N` children of weight 1/2 with
//! `P(N = 2^k) = c·2^(−k)/k²` for `k ≥ 1`, `c = 12/π²`, and an atom at
//! `N = 0` carrying the remaining mass `6(ln 2)²/π²`.
//!
//! `E N = c·ζ(2) = 2`, so the quenched mean of `Σ y` is one, while
//! `E[(N/2)|log(N/2)|] = (c ln 2 / 2)·Σ (k−1)/k²` diverges.

use std::f64::consts::{LN_2, PI};

use rand::Rng;

/// Number of exponents summed explicitly in every series.
pub const SERIES_TERMS: u32 = 60;

pub const CHILD_WEIGHT: f64 = 0.5;

/// A partial sum plus an enclosure radius for the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: u32,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BurstLaw;

pub fn normalizer() -> f64 {
    12.0 / (PI * PI)
}

impl BurstLaw {
    pub fn prob_zero(&self) -> f64 {
        6.0 * LN_2 * LN_2 / (PI * PI)
    }

    /// `P(N = 2^k)` for `k ≥ 1`.
    pub fn prob_exponent(&self, k: u32) -> f64 {
        debug_assert!(k >= 1);
        let kf = k as f64;
        normalizer() * (-kf * LN_2).exp() / (kf * kf)
    }

    /// `E N = c·Σ_k 1/k²`, summed to [`SERIES_TERMS`] with an asymptotic tail.
    pub fn mean_count(&self) -> SeriesValue {
        let partial: f64 = (1..=SERIES_TERMS).rev().map(|k| 1.0 / (k as f64).powi(2)).sum();
        let (tail, bound) = inverse_square_tail(SERIES_TERMS);
        let c = normalizer();
        SeriesValue { value: c * (partial + tail), terms: SERIES_TERMS, tail_bound: c * bound }
    }

    /// Lower bound on the divergent `c2` series after [`SERIES_TERMS`] terms.
    pub fn c2_partial_sum(&self) -> f64 {
        let c = normalizer();
        (1..=SERIES_TERMS)
            .map(|k| {
                let kf = k as f64;
                c * 0.5 * LN_2 * (kf - 1.0) / (kf * kf)
            })
            .sum()
    }

    /// Draws the child count `N`.
    pub fn sample_count<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let mut acc = self.prob_zero();
        if u < acc {
            return 0;
        }
        for k in 1..=SERIES_TERMS {
            acc += self.prob_exponent(k);
            if u < acc {
                return 1u64 << k;
            }
        }
        // remaining mass is below 1e-21
        1u64 << SERIES_TERMS
    }

    /// `1 − E[exp(−N·ℓ)]` for a per-child exponent `ℓ = L(u/2) ≥ 0`.
    pub fn one_minus_transform(&self, per_child: f64) -> f64 {
        (1..=SERIES_TERMS)
            .rev()
            .map(|k| {
                let n = (1u64 << k) as f64;
                self.prob_exponent(k) * -(-n * per_child).exp_m1()
            })
            .sum()
    }
}

/// `Σ_{k>K} 1/k²` by its Euler–Maclaurin expansion
/// `1/K − 1/(2K²) + 1/(6K³) − 1/(30K⁵) + 1/(42K⁷)`; the expansion is
/// enveloping, so the first omitted term `1/(30K⁹)` bounds the error.
pub fn inverse_square_tail(k: u32) -> (f64, f64) {
    let k = k as f64;
    let tail = 1.0 / k - 1.0 / (2.0 * k.powi(2)) + 1.0 / (6.0 * k.powi(3))
        - 1.0 / (30.0 * k.powi(5))
        + 1.0 / (42.0 * k.powi(7));
    (tail, 1.0 / (30.0 * k.powi(9)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_sum_to_one() {
        let b = BurstLaw;
        let total: f64 = b.prob_zero() + (1..=SERIES_TERMS).map(|k| b.prob_exponent(k)).sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12, "total = {total}");
        assert!((b.prob_zero() - 0.29208).abs() < 1e-5);
        assert!((normalizer() - 1.21585).abs() < 1e-5);
    }

    #[test]
    fn tail_matches_direct_summation() {
        // direct summation out to 10^7 plus the 1/10^7 integral remainder
        let direct: f64 = (61..10_000_000u64).rev().map(|k| 1.0 / (k as f64).powi(2)).sum::<f64>() + 1e-7;
        let (tail, _) = inverse_square_tail(60);
        assert!((tail - direct).abs() < 1e-12, "{tail} vs {direct}");
    }

    #[test]
    fn mean_count_is_two() {
        let m = BurstLaw.mean_count();
        assert!((m.value - 2.0).abs() < 1e-13, "{}", m.value);
        assert!(m.tail_bound < 1e-15);
    }

    #[test]
    fn c2_partial_sum_grows_like_log() {
        // Σ_{k≤K} (k−1)/k² ≈ ln K, unbounded
        let s = BurstLaw.c2_partial_sum();
        assert!(s > 1.0);
    }

    #[test]
    fn transform_at_zero_exponent() {
        assert_eq!(BurstLaw.one_minus_transform(0.0), 0.0);
        let all = BurstLaw.one_minus_transform(1e6);
        assert!((all - (1.0 - BurstLaw.prob_zero())).abs() < 1e-12);
    }
}
