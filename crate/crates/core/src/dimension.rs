//! Finite-scale dimension estimates: covering counts from above, the natural
//! measure's mass-to-diameter ratio from below.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cantor::{generation, CantorError};
use crate::dyadic::DyadicRational;
use crate::params::Schedule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimensionError {
    #[error("scale k = 0 has log(1/Θ_0) = 0")]
    ZeroScale,
    #[error("k = {k} exceeds the schedule horizon {k_cap}")]
    OutOfRange { k: usize, k_cap: usize },
    #[error("ambient dimension must be at least 1")]
    ZeroDimension,
    #[error("eps = {0} must lie in (0, 1]")]
    BadEpsilon(f64),
    #[error("box side [{0}, {1}] is empty")]
    EmptySide(String, String),
    #[error(transparent)]
    Cantor(#[from] CantorError),
}

fn check_k(s: &Schedule, k: usize) -> Result<(), DimensionError> {
    if k > s.k_cap() {
        return Err(DimensionError::OutOfRange { k, k_cap: s.k_cap() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringEstimate {
    pub k: usize,
    pub d: u32,
    pub log2_theta: f64,
    /// `log2(2^k ⌈Θ_k^-(d-1)⌉ d)`.
    pub log2_count: f64,
    /// `log count / log(1/Θ_k)`, clamped to `[0, d]`.
    pub dim_estimate: f64,
    pub clamped: bool,
}

/// `2^k ⌈Θ_k^-(d-1)⌉ d` boxes of diameter comparable to `Θ_k`.
pub fn covering_estimate(s: &Schedule, k: usize, d: u32) -> Result<CoveringEstimate, DimensionError> {
    if k == 0 {
        return Err(DimensionError::ZeroScale);
    }
    if d == 0 {
        return Err(DimensionError::ZeroDimension);
    }
    check_k(s, k)?;
    let lt = s.log2_big_theta(k);
    let side = -(d as f64 - 1.0) * lt;
    // ⌈2^x⌉ only differs from 2^x by a visible amount when x is small.
    let ceil_log = if side < 52.0 { side.exp2().ceil().log2() } else { side };
    let log2_count = k as f64 + ceil_log + (d as f64).log2();
    let raw = log2_count / -lt;
    let dim_estimate = raw.clamp(0.0, d as f64);
    Ok(CoveringEstimate { k, d, log2_theta: lt, log2_count, dim_estimate, clamped: dim_estimate != raw })
}

/// The exact count when it fits in `u128`.
pub fn covering_count(s: &Schedule, k: usize, d: u32) -> Result<Option<u128>, DimensionError> {
    let e = covering_estimate(s, k, d)?;
    if e.log2_count >= 120.0 {
        return Ok(None);
    }
    let side = if d == 1 { 1.0 } else { (-(d as f64 - 1.0) * e.log2_theta).exp2().ceil() };
    Ok(Some((1u128 << k) * side as u128 * d as u128))
}

/// An axis-aligned box whose first side lies along the Cantor axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub cantor: (DyadicRational, DyadicRational),
    pub others: Vec<(DyadicRational, DyadicRational)>,
}

impl AxisBox {
    pub fn unit(d: usize) -> Self {
        let h = DyadicRational::half();
        let side = (-h.clone(), h);
        AxisBox { cantor: side.clone(), others: vec![side; d.saturating_sub(1)] }
    }
}

/// `2^-k · #{W_k met by the Cantor side} · |T ∩ [-1/2, 1/2]^(d-1)|`. Exact when the
/// Cantor side is a union of generation-`k` whites, an upper bound otherwise.
pub fn natural_measure_mass(s: &Schedule, k: usize, b: &AxisBox) -> Result<DyadicRational, DimensionError> {
    check_k(s, k)?;
    let (lo, hi) = &b.cantor;
    if lo > hi {
        return Err(DimensionError::EmptySide(lo.to_string(), hi.to_string()));
    }
    let gen = generation(s, k)?;
    let met = gen.whites.iter().filter(|w| w.left <= *hi && *lo <= w.right).count();
    let half = DyadicRational::half();
    let mut t = DyadicRational::one();
    for (a, c) in &b.others {
        if a > c {
            return Err(DimensionError::EmptySide(a.to_string(), c.to_string()));
        }
        let l = DyadicRational::max(a, &-half.clone());
        let r = DyadicRational::min(c, &half);
        if l >= r {
            return Ok(DyadicRational::zero());
        }
        t = &t * &(&r - &l);
    }
    Ok(&DyadicRational::from_int(met as i64) * &t.mul_pow2(-(k as i64)))
}

/// Exhaustive check that an interval shorter than `Θ_k` meets at most two whites of
/// generation `k`: any three consecutive whites span at least `Θ_k` between the outer two.
pub fn at_most_two_met(s: &Schedule, k: usize) -> Result<bool, DimensionError> {
    check_k(s, k)?;
    let gen = generation(s, k)?;
    let len = match gen.whites.first() {
        Some(w) => w.length(),
        None => return Ok(true),
    };
    Ok(gen.whites.windows(3).all(|w| &w[2].left - &w[0].right >= len))
}

/// Fraction of a generation-`j` white's mass in its initial segment of relative length `ell`.
fn edge_fraction(thetas: &[f64], j: usize, ell: f64, depth: usize) -> (f64, f64) {
    if ell >= 1.0 {
        return (1.0, 1.0);
    }
    if ell <= 0.0 {
        return (0.0, 0.0);
    }
    if depth == 0 || j >= thetas.len() {
        return (0.0, 1.0);
    }
    let t = thetas[j];
    let (base, rest) = if ell <= t {
        (0.0, ell / t)
    } else if ell <= 1.0 - t {
        return (0.5, 0.5);
    } else {
        (0.5, (ell - (1.0 - t)) / t)
    };
    let (lo, hi) = edge_fraction(thetas, j + 1, rest, depth - 1);
    (base + 0.5 * lo, base + 0.5 * hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrostmanBox {
    /// Length of the Cantor side, relative to `Θ_k`.
    pub relative_side: f64,
    pub log2_diam: f64,
    /// Upper enclosure of `μ(U)` in log form.
    pub log2_mass: f64,
    pub log2_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanRecord {
    pub k: usize,
    pub d: u32,
    pub eps: f64,
    pub boxes: Vec<FrostmanBox>,
    /// `max μ(U) / diam(U)^(d-ε)` over the boxes.
    pub worst_ratio: f64,
    pub bound: f64,
    pub holds: bool,
    /// Smallest `N` with `Θ_k^(1/k) ≥ 2^(-1/(1-ε))` for all `N ≤ k ≤ horizon`.
    pub threshold: Option<usize>,
    pub above_threshold: bool,
}

/// Smallest `N` with `log2 Θ_k ≥ -k/(1-ε)` for every `k` in `[N, horizon]`.
pub fn empirical_threshold(s: &Schedule, eps: f64, horizon: usize) -> Option<usize> {
    let horizon = horizon.min(s.k_cap());
    if eps >= 1.0 {
        return Some(0);
    }
    let slope = 1.0 / (1.0 - eps);
    let mut n = None;
    for k in (0..=horizon).rev() {
        if s.log2_big_theta(k) >= -(k as f64) * slope {
            n = Some(k);
        } else {
            break;
        }
    }
    n
}

/// Worst ratio over the canonical test boxes at scale `k`: one whole white, and boxes of
/// Cantor side in `[Θ_{k+1}, Θ_k)` centred on the narrowest gap between two adjacent whites.
/// Cross sections are cubes of the same side, clipped to the unit cube.
pub fn frostman_ratio(s: &Schedule, k: usize, d: u32, eps: f64) -> Result<FrostmanRecord, DimensionError> {
    if d == 0 {
        return Err(DimensionError::ZeroDimension);
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(DimensionError::BadEpsilon(eps));
    }
    if k + 1 > s.k_cap() {
        return Err(DimensionError::OutOfRange { k: k + 1, k_cap: s.k_cap() });
    }
    let lt = s.log2_big_theta(k);
    let thetas: Vec<f64> = (k..s.k_cap().min(k + 80) + 1).map(|j| s.theta_f64(j)).collect();
    let expo = d as f64 - eps;
    let make = |rel: f64, log2_mass_line: f64| {
        let log2_side = lt + rel.log2();
        let clipped = log2_side.min(0.0);
        let log2_diam = 0.5 * (2.0 * log2_side).exp2().mul_add(1.0, (d as f64 - 1.0) * (2.0 * clipped).exp2()).log2();
        let log2_mass = log2_mass_line + (d as f64 - 1.0) * clipped;
        FrostmanBox { relative_side: rel, log2_diam, log2_mass, log2_ratio: log2_mass - expo * log2_diam }
    };
    // Work relative to Θ_k so nothing underflows.
    let mut boxes = vec![make(1.0, -(k as f64))];
    if k >= 1 {
        // Narrowest gap between adjacent generation-k whites, relative to Θ_k.
        let gap_log2 = (0..k)
            .map(|j| (1.0 - 2.0 * s.theta_f64(j)).log2() + s.log2_big_theta(j) - lt)
            .fold(f64::INFINITY, f64::min);
        let gap = gap_log2.exp2();
        let t = thetas[0];
        for rel in [t, 0.5 * (1.0 + t), 1.0 - 1e-9] {
            let reach = 0.5 * (rel - gap);
            let (_, hi) = edge_fraction(&thetas, 0, reach, 200);
            let mass = 2.0 * hi;
            let log2_mass = if mass > 0.0 { mass.log2() - k as f64 } else { f64::NEG_INFINITY };
            boxes.push(make(rel, log2_mass));
        }
    }
    let worst = boxes.iter().map(|b| b.log2_ratio).fold(f64::NEG_INFINITY, f64::max);
    let bound = 4.0 * (d as f64 - 1.0).exp2();
    let threshold = empirical_threshold(s, eps, s.k_cap());
    Ok(FrostmanRecord {
        k,
        d,
        eps,
        boxes,
        worst_ratio: worst.exp2(),
        bound,
        holds: worst <= bound.log2(),
        threshold,
        above_threshold: threshold.map_or(false, |n| k >= n),
    })
}

/// Minimum of `Σ diam^(d-ε)` over all covers of the scale-`n` boxes by canonical boxes of
/// generations `n..=n+extra`, each white split into its two children or kept whole.
pub fn min_cover_sum(s: &Schedule, n: usize, extra: usize, d: u32, eps: f64) -> Result<f64, DimensionError> {
    check_k(s, n + extra)?;
    let expo = d as f64 - eps;
    let leaf = |k: usize| {
        // ⌈1/Θ_k⌉^(d-1) cubes of side Θ_k, diameter √d Θ_k, in log form.
        let lt = s.log2_big_theta(k);
        let per_axis = if -lt < 52.0 { (-lt).exp2().ceil().log2() } else { -lt };
        (d as f64 - 1.0) * per_axis + expo * (lt + 0.5 * (d as f64).log2())
    };
    // best(k) in log2, per white of generation k.
    let mut best = leaf(n + extra);
    for k in (n..n + extra).rev() {
        let split = 1.0 + best;
        best = leaf(k).min(split);
    }
    Ok((n as f64 + best).exp2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRow {
    pub k: usize,
    pub log2_theta: f64,
    pub log2_count: f64,
    pub dim_estimate: f64,
    pub frostman_worst_ratio: f64,
    pub frostman_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub schedule: String,
    pub seed: u64,
    pub d: u32,
    pub eps: f64,
    pub threshold: Option<usize>,
    pub rows: Vec<DimensionRow>,
}

/// Per-scale records for `k = 1..=kmax`.
pub fn dimension_report(s: &Schedule, kmax: usize, d: u32, eps: f64) -> Result<DimensionReport, DimensionError> {
    let rows = (1..=kmax)
        .into_par_iter()
        .map(|k| {
            let c = covering_estimate(s, k, d)?;
            let f = frostman_ratio(s, k, d, eps)?;
            Ok(DimensionRow {
                k,
                log2_theta: c.log2_theta,
                log2_count: c.log2_count,
                dim_estimate: c.dim_estimate,
                frostman_worst_ratio: f.worst_ratio,
                frostman_holds: f.holds,
            })
        })
        .collect::<Result<Vec<_>, DimensionError>>()?;
    Ok(DimensionReport {
        schedule: s.name().to_string(),
        seed: s.seed(),
        d,
        eps,
        threshold: empirical_threshold(s, eps, s.k_cap()),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::build_default_schedule;

    fn dy(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    #[test]
    fn covering_examples() {
        let q = Schedule::preset("quarter", 64).unwrap();
        for k in [1, 5, 40] {
            let e = covering_estimate(&q, k, 1).unwrap();
            assert_eq!(e.dim_estimate, 0.5);
        }
        assert_eq!(covering_count(&q, 3, 2).unwrap(), Some(8 * 64 * 2));
        assert_eq!(covering_estimate(&q, 0, 1), Err(DimensionError::ZeroScale));
        let s = build_default_schedule(1000).unwrap();
        let e = covering_estimate(&s, 1000, 1).unwrap();
        assert!(e.dim_estimate > 0.9 && e.dim_estimate < 1.0);
        for k in 1..=1000 {
            let e = covering_estimate(&s, k, 3).unwrap();
            assert!((0.0..=3.0).contains(&e.dim_estimate));
            let one = covering_estimate(&s, k, 1).unwrap();
            assert!(one.dim_estimate < 1.0 && !one.clamped);
        }
    }

    #[test]
    fn measure_masses() {
        let s = build_default_schedule(64).unwrap();
        for d in 1..=3 {
            assert_eq!(natural_measure_mass(&s, 6, &AxisBox::unit(d)).unwrap(), DyadicRational::one());
        }
        let w1 = &generation(&s, 1).unwrap().whites[0];
        let b = AxisBox { cantor: (w1.left.clone(), w1.right.clone()), others: AxisBox::unit(3).others };
        assert_eq!(natural_measure_mass(&s, 1, &b).unwrap(), DyadicRational::half());
        let thin = AxisBox { cantor: (w1.left.clone(), w1.right.clone()), others: vec![(dy("0"), dy("1/4"))] };
        assert_eq!(natural_measure_mass(&s, 3, &thin).unwrap(), dy("1/8"));
        for k in 0..=12 {
            assert!(at_most_two_met(&s, k).unwrap());
        }
    }

    #[test]
    fn frostman_examples() {
        let s = build_default_schedule(400).unwrap();
        let r = frostman_ratio(&s, 200, 1, 0.2).unwrap();
        assert!(r.holds && r.worst_ratio <= 4.0);
        let q = Schedule::preset("quarter", 400).unwrap();
        let f = frostman_ratio(&q, 300, 1, 0.2).unwrap();
        assert!(!f.holds);
        assert_eq!(empirical_threshold(&q, 0.2, 400), None);
        for k in [1, 10, 100] {
            assert!(frostman_ratio(&s, k, 1, 1.0).unwrap().holds);
        }
        for d in 1..=3 {
            assert!(frostman_ratio(&s, 150, d, 0.3).unwrap().holds);
        }
    }

    #[test]
    fn edge_fractions() {
        let t = [0.25; 64];
        assert_eq!(edge_fraction(&t, 0, 0.5, 60), (0.5, 0.5));
        let (lo, hi) = edge_fraction(&t, 0, 0.25, 60);
        assert_eq!((lo, hi), (0.5, 0.5));
        let (lo, hi) = edge_fraction(&t, 0, 0.1, 60);
        assert!(lo <= hi && hi - lo < 1e-12 && hi > 0.0);
    }

    #[test]
    fn covers_dominate_measure() {
        let s = build_default_schedule(400).unwrap();
        let eps = 0.2;
        let n = empirical_threshold(&s, eps, 400).unwrap();
        for d in 1..=2 {
            let m = min_cover_sum(&s, n, 30, d, eps).unwrap();
            assert!(m >= (-(d as f64) - 1.0).exp2(), "d = {d}: {m}");
        }
    }

    #[test]
    fn report_rows() {
        let s = build_default_schedule(100).unwrap();
        let r = dimension_report(&s, 50, 1, 0.2).unwrap();
        assert_eq!(r.rows.len(), 50);
        assert!(r.rows.iter().all(|row| row.dim_estimate <= 1.0));
    }
}
