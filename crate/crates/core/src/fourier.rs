//! Fourier transforms of the sign function and of the natural measures, the
//! majorant series, and the Euler product.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::logval::{NeumaierSum, SignedLogValue};
use crate::params::Schedule;

/// Below this `|η|` the sinc factor uses its Taylor expansion.
const SINC_SERIES: f64 = 1.0 / (1u64 << 26) as f64;

/// `|ǧ⁽¹⁾| ≤ MAJORANT_CONSTANT · H` termwise, from `|sin η / η| ≤ min(1, 1/|η|)`.
pub const MAJORANT_CONSTANT: f64 = 2.0;

/// Slope of `log sup` against `log ξ_max` above which a decay exponent is flagged.
pub const DECAY_SLOPE_TOL: f64 = 0.01;

/// A truncated series value with a certified bound on the omitted terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtValue {
    pub value: f64,
    pub tail_bound: f64,
    pub kmax: usize,
    /// Set when `kmax` was chosen automatically and the tolerance was not reached by `k_cap`.
    pub inconclusive: bool,
}

/// `∏ cos(φ_j ξ)` in sign/log form; exactly zero iff some factor is.
pub fn cos_product(phases: &[f64], xi: f64) -> SignedLogValue {
    SignedLogValue::product(phases.iter().map(|&p| SignedLogValue::from_f64((p * xi).cos())))
}

fn sinc(eta: f64) -> f64 {
    if eta.abs() < SINC_SERIES {
        1.0 - eta * eta / 6.0
    } else {
        eta.sin() / eta
    }
}

/// Per-index constants of the series, computed once and reused across `ξ`.
#[derive(Debug, Clone)]
pub struct SeriesTable {
    kmax: usize,
    in_s: Vec<bool>,
    /// `log2(π(1-θ_j)Θ_j)`.
    log2_phase: Vec<f64>,
    phase: Vec<f64>,
    /// `log2 |B_k|`.
    log2_black: Vec<f64>,
    /// `log2 Θ_k`.
    log2_theta: Vec<f64>,
    /// `log2(2^(kmax+1) Θ_(kmax+1))`, or `-inf` when no member of `S` exceeds `kmax`.
    log2_tail: f64,
}

impl SeriesTable {
    pub fn new(s: &Schedule, kmax: usize) -> Self {
        let kmax = kmax.min(s.k_cap());
        let mut t = SeriesTable {
            kmax,
            in_s: Vec::with_capacity(kmax + 1),
            log2_phase: Vec::with_capacity(kmax + 1),
            phase: Vec::with_capacity(kmax + 1),
            log2_black: Vec::with_capacity(kmax + 1),
            log2_theta: Vec::with_capacity(kmax + 1),
            log2_tail: f64::NEG_INFINITY,
        };
        for j in 0..=kmax {
            let lt = s.log2_big_theta(j);
            let theta = s.theta_f64(j);
            let lp = (1.0 - theta).log2() + lt + PI.log2();
            t.in_s.push(s.in_s(j));
            t.log2_phase.push(lp);
            t.phase.push(lp.exp2());
            t.log2_black.push((1.0 - 2.0 * theta).log2() + lt);
            t.log2_theta.push(lt);
        }
        let finite_done = matches!(s.last_member(), Some(last) if last.map_or(true, |m| m <= kmax));
        if !finite_done {
            t.log2_tail = (kmax + 1) as f64 + s.log2_big_theta(kmax + 1);
        }
        t
    }

    /// Smallest `kmax` whose `ǧ⁽¹⁾` tail bound is below `tol`; flags when `k_cap` is reached first.
    pub fn auto(s: &Schedule, tol: f64) -> (Self, bool) {
        let lt = tol.log2();
        let finite = s.last_member().map(|m| m.unwrap_or(0));
        let k = (0..=s.k_cap()).find(|&k| {
            finite.map_or(false, |m| k >= m) || (k + 1) as f64 + s.log2_big_theta(k + 1) < lt
        });
        match k {
            Some(k) => (Self::new(s, k), false),
            None => (Self::new(s, s.k_cap()), true),
        }
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// Bound on `Σ_{k∈S, k>kmax} |term_k|` of `ǧ⁽¹⁾`: the black mass beyond generation `kmax`.
    pub fn ghat_tail(&self) -> f64 {
        self.log2_tail.exp2()
    }

    /// Bound on the omitted terms of `H`; uses `Θ_k ≤ 2|B_k|` for `k ∈ S` (weights ≥ 2).
    pub fn h_tail(&self) -> f64 {
        2.0 * self.ghat_tail()
    }

    fn cos_arg(&self, j: usize, axi: f64, log2_axi: f64) -> f64 {
        let p = self.phase[j];
        if p > f64::MIN_POSITIVE {
            p * axi
        } else {
            (self.log2_phase[j] + log2_axi).exp2()
        }
    }

    /// Term `k` of `ǧ⁽¹⁾`, `(-1)^k 2^k |B_k| sinc(|B_k|πξ) ∏_{j<k} cos(π(1-θ_j)Θ_j ξ)`, for all `k ≤ kmax`.
    fn for_each_term(&self, xi: f64, mut f: impl FnMut(usize, SignedLogValue, f64)) {
        let axi = xi.abs();
        let log2_axi = axi.log2();
        let mut cos_sign = 1i8;
        let mut cos_log = NeumaierSum::new();
        for k in 0..=self.kmax {
            let cl = SignedLogValue::from_log2(cos_sign, cos_log.sum());
            f(k, cl, log2_axi);
            let c = self.cos_arg(k, axi, log2_axi).cos();
            if c == 0.0 {
                return;
            }
            if c < 0.0 {
                cos_sign = -cos_sign;
            }
            cos_log.add(c.abs().log2());
        }
    }

    /// Term `k` of the `ǧ⁽¹⁾` series given the running cosine product.
    fn ghat_term(&self, k: usize, cosp: &SignedLogValue, log2_axi: f64) -> SignedLogValue {
        let eta = (self.log2_black[k] + PI.log2() + log2_axi).exp2();
        let sc = SignedLogValue::from_f64(sinc(eta));
        let sign = if k % 2 == 0 { 1 } else { -1 };
        SignedLogValue::from_log2(sign, k as f64 + self.log2_black[k]).mul(&sc).mul(cosp)
    }

    pub fn ghat1(&self, xi: f64) -> FtValue {
        let mut sum = NeumaierSum::new();
        self.for_each_term(xi, |k, cosp, l| {
            if self.in_s[k] {
                sum.add(self.ghat_term(k, &cosp, l).to_f64());
            }
        });
        FtValue { value: sum.sum(), tail_bound: self.ghat_tail(), kmax: self.kmax, inconclusive: false }
    }

    /// The individual nonzero terms of `ǧ⁽¹⁾(ξ)`, for diagnostics and oracles.
    pub fn ghat1_terms(&self, xi: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_term(xi, |k, cosp, l| {
            if self.in_s[k] {
                out.push((k, self.ghat_term(k, &cosp, l).to_f64()));
            }
        });
        out
    }

    /// `H(ξ) = Σ_{k∈S} 2^k Θ_k / (1 + Θ_k ξ) ∏_{j<k} |cos(π(1-θ_j)Θ_j ξ)|`.
    pub fn h(&self, xi: f64) -> FtValue {
        let mut sum = NeumaierSum::new();
        self.for_each_term(xi, |k, cosp, l| {
            if self.in_s[k] {
                let denom = (self.log2_theta[k] + l).exp2().ln_1p() / std::f64::consts::LN_2;
                let t = SignedLogValue::pow2(k as f64 + self.log2_theta[k] - denom).mul(&cosp.abs());
                sum.add(t.to_f64());
            }
        });
        FtValue { value: sum.sum(), tail_bound: self.h_tail(), kmax: self.kmax, inconclusive: false }
    }
}

/// `ǧ⁽¹⁾(ξ)` truncated after generation `kmax`.
pub fn ghat1(s: &Schedule, xi: f64, kmax: usize) -> FtValue {
    SeriesTable::new(s, kmax).ghat1(xi)
}

/// `ǧ⁽¹⁾(ξ)` with `kmax` chosen so that the tail bound is below `tol`.
pub fn ghat1_auto(s: &Schedule, xi: f64, tol: f64) -> FtValue {
    let (t, inconclusive) = SeriesTable::auto(s, tol);
    FtValue { inconclusive, ..t.ghat1(xi) }
}

/// `ǧ(ξ) = ∏ ǧ⁽¹⁾(ξ_i)`; the tail bounds `|∏(|v_i| + t_i) - ∏|v_i||`.
pub fn ghat(s: &Schedule, xi: &[f64], kmax: usize) -> FtValue {
    let t = SeriesTable::new(s, kmax);
    if let [x] = xi {
        return t.ghat1(*x);
    }
    tensor(xi.iter().map(|&x| t.ghat1(x)), t.kmax)
}

fn tensor(parts: impl Iterator<Item = FtValue>, kmax: usize) -> FtValue {
    let mut value = SignedLogValue::ONE;
    let mut upper = SignedLogValue::ONE;
    for p in parts {
        value = value.mul_f64(p.value);
        upper = upper.mul_f64(p.value.abs() + p.tail_bound);
    }
    let v = value.to_f64();
    FtValue { value: v, tail_bound: (upper.to_f64() - v.abs()).max(0.0), kmax, inconclusive: false }
}

/// The majorant `H(ξ)` truncated after generation `kmax`.
#[allow(non_snake_case)]
pub fn H_eval(s: &Schedule, xi: f64, kmax: usize) -> FtValue {
    SeriesTable::new(s, kmax).h(xi)
}

/// `∏_{j=1}^n cos(2^-j ξ)`.
pub fn euler_product(xi: f64, n: u32) -> f64 {
    let phases: Vec<f64> = (1..=n).map(|j| (-(j as f64)).exp2()).collect();
    cos_product(&phases, xi).to_f64()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub n: u32,
    pub points: usize,
    /// `max(|sinc ξ| - |∏|)`; the lower inequality needs this `≤ slack`.
    pub worst_lower: f64,
    /// `max(|∏| - (π/2)|sinc ξ|)`.
    pub worst_upper: f64,
    pub slack: f64,
    pub holds: bool,
}

/// `|sin ξ/ξ| ≤ |∏_{j≤n} cos(2^-j ξ)| ≤ (π/2)|sin ξ/ξ|` on an even grid over `[0, 2^(n-1)π]`.
pub fn euler_sandwich(n: u32, points: usize, slack: f64) -> SandwichReport {
    let top = (n as f64 - 1.0).exp2() * PI;
    let (lower, upper) = (0..points)
        .into_par_iter()
        .map(|i| {
            let xi = top * i as f64 / (points - 1).max(1) as f64;
            let p = euler_product(xi, n).abs();
            let sc = sinc(xi).abs();
            (sc - p, p - PI / 2.0 * sc)
        })
        .reduce(|| (f64::NEG_INFINITY, f64::NEG_INFINITY), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    SandwichReport { n, points, worst_lower: lower, worst_upper: upper, slack, holds: lower <= slack && upper <= slack }
}

/// `max |2^n sin(2^-n ξ) ∏_{j≤n} cos(2^-j ξ) - sin ξ|` over the given points.
pub fn telescoping_defect(n: u32, xis: &[f64]) -> f64 {
    xis.iter()
        .map(|&xi| ((n as f64).exp2() * ((-(n as f64)).exp2() * xi).sin() * euler_product(xi, n) - xi.sin()).abs())
        .fold(0.0, f64::max)
}

/// Fourier transform of a natural measure at generation `θ.len()`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureFt {
    pub value: f64,
    /// The last factor still differs from 1 by more than `1e-12`: the product may not have settled.
    pub unsettled: bool,
}

/// `∏_{j<n} cos(π(1-θ_j)Θ_j ξ)` for explicit ratios `θ_0, ..., θ_{n-1}`.
pub fn cantor_measure_ft(thetas: &[f64], xi: f64) -> MeasureFt {
    let mut big_theta = 1.0f64;
    let mut phases = Vec::with_capacity(thetas.len());
    for &t in thetas {
        phases.push(PI * (1.0 - t) * big_theta);
        big_theta *= t;
    }
    let last = phases.last().map_or(0.0, |p| 1.0 - (p * xi).cos());
    MeasureFt { value: cos_product(&phases, xi).to_f64(), unsettled: last.abs() > 1e-12 }
}

/// The natural measure of a schedule's set, truncated after `kmax` generations.
pub fn schedule_measure_ft(s: &Schedule, xi: f64, kmax: usize) -> MeasureFt {
    cantor_measure_ft(&s.theta_f64_table(kmax), xi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiGrid {
    /// `n` log-spaced points on `[min, max]`.
    Log { min: f64, max: f64, n: usize },
    /// `base^k` for `k = kmin..=kmax`.
    Powers { base: f64, kmin: i32, kmax: i32 },
}

impl XiGrid {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            XiGrid::Log { min, max, n } => {
                if n <= 1 {
                    return vec![min];
                }
                let (a, b) = (min.ln(), max.ln());
                (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
            }
            XiGrid::Powers { base, kmin, kmax } => (kmin..=kmax).map(|k| base.powi(k)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub beta: f64,
    /// `(ξ_max, sup_{ξ ≤ ξ_max} |ξ|^(β/2) |μ̂(ξ)|)` over nested windows.
    pub sups: Vec<(f64, f64)>,
    /// Least-squares slope of `log sup` against `log ξ_max` over the upper half of the windows.
    pub slope: f64,
    pub growing: bool,
}

/// Empirical `sup |ξ|^(β/2) |μ̂(ξ)|` over growing windows of `grid`; diagnostic only.
pub fn decay_exponent_scan<F>(ft: F, betas: &[f64], grid: &[f64]) -> Vec<DecayRow>
where
    F: Fn(f64) -> f64 + Sync,
{
    let mut xs = grid.to_vec();
    xs.sort_by(f64::total_cmp);
    let vals: Vec<f64> = xs.par_iter().map(|&x| ft(x).abs()).collect();
    betas
        .iter()
        .map(|&beta| {
            let mut run = 0.0f64;
            let sups: Vec<(f64, f64)> = xs
                .iter()
                .zip(&vals)
                .map(|(&x, &v)| {
                    run = run.max(x.abs().powf(beta / 2.0) * v);
                    (x, run)
                })
                .collect();
            let upper: Vec<(f64, f64)> = sups[sups.len() / 2..]
                .iter()
                .filter(|(x, s)| *x > 0.0 && *s > 0.0)
                .map(|&(x, s)| (x.ln(), s.ln()))
                .collect();
            let slope = least_squares_slope(&upper);
            DecayRow { beta, sups, slope, growing: slope > DECAY_SLOPE_TOL }
        })
        .collect()
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::build_default_schedule;

    #[test]
    fn cos_product_examples() {
        assert_eq!(cos_product(&[1.0, 2.0], 0.0).to_f64(), 1.0);
        let z = cos_product(&[PI / 2.0], 1.0);
        assert!(z.is_zero() || z.to_f64().abs() < 1e-16);
        let v = cos_product(&[1.0; 50], 1.0);
        assert!((v.log2 - 50.0 * 1f64.cos().log2()).abs() < 1e-12);
        assert!((v.log2 + 44.4).abs() < 0.1);
    }

    #[test]
    fn single_member_is_a_sinc() {
        let s = Schedule::preset("single", 40).unwrap();
        for xi in [0.0, 0.3, 1.0, 7.5, 123.0, 1e4] {
            let v = ghat1(&s, xi, 40);
            let b = 0.5;
            let expect = if xi == 0.0 { b } else { (b * PI * xi).sin() / (PI * xi) };
            assert!((v.value - expect).abs() < 1e-15, "{xi}");
            assert_eq!(v.tail_bound, 0.0);
        }
    }

    #[test]
    fn even_in_xi() {
        let s = build_default_schedule(300).unwrap();
        let t = SeriesTable::new(&s, 300);
        for xi in [0.1, 2.0, 77.7, 3000.0] {
            assert_eq!(t.ghat1(xi).value, t.ghat1(-xi).value);
        }
    }

    #[test]
    fn majorant_dominates() {
        let s = build_default_schedule(2000).unwrap();
        let t = SeriesTable::new(&s, 2000);
        for x in (XiGrid::Log { min: 1e-3, max: 1e8, n: 300 }).points() {
            let g = t.ghat1(x);
            let h = t.h(x);
            assert!(g.value.abs() <= MAJORANT_CONSTANT * h.value + g.tail_bound + 1e-15, "{x}");
        }
    }

    #[test]
    fn h_tail_is_honest() {
        let s = build_default_schedule(3000).unwrap();
        for x in [0.0, 0.5, 10.0, 1e3] {
            let short = H_eval(&s, x, 100);
            let long = H_eval(&s, x, 3000);
            assert!(long.value >= short.value);
            assert!(long.value <= short.value + short.tail_bound);
            let g_short = ghat1(&s, x, 100);
            let g_long = ghat1(&s, x, 3000);
            assert!((g_long.value - g_short.value).abs() <= g_short.tail_bound);
        }
    }

    #[test]
    fn h_at_zero() {
        let s = build_default_schedule(200).unwrap();
        let expect: f64 = s.members().filter(|&k| k <= 200).map(|k| (k as f64 + s.log2_big_theta(k)).exp2()).sum();
        assert!((H_eval(&s, 0.0, 200).value - expect).abs() < 1e-15);
    }

    #[test]
    fn auto_kmax() {
        let s = build_default_schedule(10_000).unwrap();
        let v = ghat1_auto(&s, 3.0, 1e-12);
        assert!(!v.inconclusive && v.tail_bound < 1e-12);
        let small = build_default_schedule(50).unwrap();
        assert!(ghat1_auto(&small, 3.0, 1e-12).inconclusive);
    }

    #[test]
    fn tensor_of_zero_frequency() {
        let s = build_default_schedule(400).unwrap();
        let g0 = ghat1(&s, 0.0, 400).value;
        let g = ghat(&s, &[0.0, 0.0, 0.0], 400);
        assert!((g.value - g0.powi(3)).abs() < 1e-15);
        assert_eq!(ghat(&s, &[2.5], 400).value, ghat1(&s, 2.5, 400).value);
    }

    #[test]
    fn euler_identities() {
        assert_eq!(euler_product(0.0, 10), 1.0);
        let xs: Vec<f64> = (0..2001).map(|i| -1000.0 + i as f64).collect();
        for n in [1, 5, 20, 30] {
            assert!(telescoping_defect(n, &xs) < 1e-12);
        }
        let r = euler_sandwich(20, 10_000, 1e-12);
        assert!(r.holds, "{r:?}");
        // Dropping a factor breaks the upper bound somewhere in range.
        let r = euler_sandwich(20, 10_000, 1e-12);
        let broken = (0..10_000).any(|i| {
            let xi = (19f64).exp2() * PI * i as f64 / 9999.0;
            euler_product(xi, 19).abs() > PI / 2.0 * sinc(xi).abs() + 1e-3
        });
        assert!(r.holds && broken);
    }

    #[test]
    fn middle_thirds() {
        let th = vec![1.0 / 3.0; 60];
        assert_eq!(cantor_measure_ft(&th, 0.0).value, 1.0);
        for x in (XiGrid::Log { min: 1e-2, max: 1e3, n: 1000 }).points() {
            let lhs = cantor_measure_ft(&th, 3.0 * x).value;
            let rhs = (2.0 * PI * x).cos() * cantor_measure_ft(&th, x).value;
            assert!((lhs - rhs).abs() < 1e-10, "{x}");
        }
        let m1 = cantor_measure_ft(&th, 1.0).value.abs();
        for k in 1..=15 {
            assert!((cantor_measure_ft(&th, 3f64.powi(k)).value.abs() - m1).abs() < 1e-10);
        }
    }

    #[test]
    fn decay_scan_controls() {
        let th = vec![1.0 / 3.0; 60];
        let grid = XiGrid::Powers { base: 3.0, kmin: 1, kmax: 15 }.points();
        let rows = decay_exponent_scan(|x| cantor_measure_ft(&th, x).value, &[0.0, 0.2, 0.6], &grid);
        assert!(!rows[0].growing && rows[0].sups.last().unwrap().1 <= 1.0);
        assert!(rows[1].growing && rows[2].growing);
        let single = Schedule::preset("single", 10).unwrap();
        let grid = XiGrid::Log { min: 1.0, max: 1e6, n: 4000 }.points();
        let rows = decay_exponent_scan(|x| ghat1(&single, x, 10).value, &[0.0, 1.0, 2.0, 2.5], &grid);
        assert!(!rows[0].growing && !rows[1].growing && !rows[2].growing);
        assert!(rows[3].growing);
    }
}
