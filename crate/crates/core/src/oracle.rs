//! Slow, independent reference computations used to cross-check the fast paths.

use std::f64::consts::PI;

use crate::cantor::{black_midpoints, generation, CantorError};
use crate::dyadic::DyadicRational;
use crate::logval::NeumaierSum;
use crate::params::Schedule;

/// `ǧ⁽¹⁾(ξ)` by summing the transform of every black interval of generations `k ∈ S, k ≤ kmax`:
/// `Σ_k (-1)^k Σ_m |B_k| sinc(π|B_k|ξ) cos(2π m ξ)` over the `2^k` midpoints `m`.
pub fn ghat1_by_midpoints(s: &Schedule, xi: f64, kmax: usize) -> Result<f64, CantorError> {
    let mut total = NeumaierSum::new();
    for k in s.members().take_while(|&k| k <= kmax) {
        let mut big = DyadicRational::one();
        for j in 0..k {
            big = &big * &s.theta(j)?;
        }
        let black = (&DyadicRational::one() - &s.theta(k)?.mul_pow2(1)) * big;
        let b = black.to_f64();
        let x = PI * b * xi;
        let ft = if x == 0.0 { b } else { b * x.sin() / x };
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for m in black_midpoints(s, k)? {
            total.add(sign * ft * (2.0 * PI * m.to_f64() * xi).cos());
        }
    }
    Ok(total.sum())
}

/// `∫ g⁽¹⁾` exactly, summing signed black lengths generation by generation.
pub fn g1_integral_exact(s: &Schedule, kmax: usize) -> Result<DyadicRational, CantorError> {
    let mut total = DyadicRational::zero();
    for k in s.members().take_while(|&k| k <= kmax) {
        let gen = generation(s, k)?;
        let mut mass = DyadicRational::zero();
        for b in &gen.blacks {
            mass = &mass + &b.length();
        }
        total = if k % 2 == 0 { &total + &mass } else { &total - &mass };
    }
    Ok(total)
}

/// `H(ξ)` by direct floating products, without the log-domain bookkeeping.
pub fn h_direct(s: &Schedule, xi: f64, kmax: usize) -> f64 {
    let mut total = 0.0;
    let mut prod = 1.0;
    let mut big = 1.0;
    for k in 0..=kmax.min(s.k_cap()) {
        let th = s.theta_f64(k);
        if s.in_s(k) {
            total += (k as f64).exp2() * big / (1.0 + big * xi.abs()) * prod;
        }
        prod *= (PI * (1.0 - th) * big * xi).cos().abs();
        big *= th;
    }
    total
}

/// Midpoint Riemann sum of `∏ |cos(φ_j ξ)|^p` on `[a, b]` with `n` cells, and a bound on its error:
/// the cell width times the total variation, which is at most `2` per monotone piece.
pub fn riemann_cos_power(phases: &[f64], p: f64, a: f64, b: f64, n: usize) -> (f64, f64) {
    let h = (b - a) / n as f64;
    let mut sum = NeumaierSum::new();
    for i in 0..n {
        let x = a + (i as f64 + 0.5) * h;
        sum.add(phases.iter().map(|&f| (f * x).cos().abs()).product::<f64>().powf(p));
    }
    // Each factor has at most (b-a)φ/π + 2 monotone pieces; the product at most their sum.
    let pieces: f64 = phases.iter().map(|&f| (b - a) * f / PI * 2.0 + 2.0).sum::<f64>() + 1.0;
    (sum.sum() * h, 2.0 * pieces * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cosineineq::{default_quad, lemma31_lhs, IndexSet};
    use crate::fourier::{ghat1, H_eval};
    use crate::params::build_default_schedule;

    #[test]
    fn midpoints_agree_with_series() {
        let s = build_default_schedule(40).unwrap();
        for xi in [0.0, 0.37, 5.0, 101.0] {
            let a = ghat1(&s, xi, 10).value;
            let b = ghat1_by_midpoints(&s, xi, 10).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-3), "{xi}: {a} {b}");
        }
    }

    #[test]
    fn zero_frequency_is_the_integral() {
        let s = Schedule::preset("pair", 10).unwrap();
        // |B_0| = 1/2, and generation 2 has 4 blacks of length Θ_2/2 = θ_1/8.
        let exact = g1_integral_exact(&s, 10).unwrap();
        assert_eq!(exact, DyadicRational::half() + s.theta(1).unwrap().mul_pow2(-1));
        assert_eq!(ghat1(&s, 0.0, 10).value, exact.to_f64());
    }

    #[test]
    fn direct_h() {
        let s = build_default_schedule(100).unwrap();
        for xi in [0.0, 1.0, 33.3, 1e3] {
            let a = H_eval(&s, xi, 100).value;
            let b = h_direct(&s, xi, 100);
            assert!((a - b).abs() <= 1e-10 * a.max(1e-300), "{xi}: {a} {b}");
        }
    }

    #[test]
    fn riemann_vs_quadrature() {
        let j = IndexSet::new(vec![1, 2, 5]);
        let q = lemma31_lhs(&j, 6, 1.5, &default_quad()).unwrap();
        let phases = [0.5, 0.25, 1.0 / 32.0];
        let (v, err) = riemann_cos_power(&phases, 1.5, 0.0, 32.0 * PI, 2_000_000);
        assert!((q.value - v).abs() <= q.abs_error + err);
        assert!((q.value - v).abs() < 1e-6);
    }
}
