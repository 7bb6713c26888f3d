//! The sign functions themselves, their averages over white intervals, and
//! witnesses that averages over shrinking boxes fail to converge on the set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cantor::{descend, white_enclosure_from_path, CantorError, Membership};
use crate::dyadic::{DyadicInterval, DyadicRational};
use crate::params::{Schedule, ScheduleError};
use crate::Verdict;

/// Working precision for average enclosures.
pub const AVERAGE_PREC: u64 = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OscillationError {
    #[error("indices {k} and {} are not both in S", k + 1)]
    NotAPair { k: usize },
    #[error("need k ≤ jmax ≤ k_cap, got k = {k}, jmax = {jmax}")]
    BadRange { k: usize, jmax: usize },
    #[error("eps must lie in (0, 2^-M)")]
    BadEpsilon,
    #[error("found {found} qualifying pairs, {wanted} requested")]
    InsufficientGoodPairs { found: usize, wanted: usize },
    #[error("coordinate {coordinate} could not be located at generation {generation}")]
    BadPoint { coordinate: usize, generation: usize },
    #[error("coordinate {coordinate} lies in a black interval of generation {generation} ∉ S, where the function vanishes")]
    ZeroFactor { coordinate: usize, generation: usize },
    #[error("no coordinate lies in the set; the point is a Lebesgue point")]
    LebesguePoint,
    #[error(transparent)]
    Cantor(#[from] CantorError),
}

impl From<ScheduleError> for OscillationError {
    fn from(e: ScheduleError) -> Self {
        OscillationError::Cantor(CantorError::Schedule(e))
    }
}

/// A value of the sign function, or `Undetermined` when the point survives to the
/// requested depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignValue {
    Value(i8),
    Undetermined,
}

/// `g⁽¹⁾(x)` resolved through generation `depth`.
pub fn g1_eval(s: &Schedule, x: &DyadicRational, depth: usize) -> Result<SignValue, CantorError> {
    if s.s_is_empty() {
        return Ok(SignValue::Value(0));
    }
    let d = descend(s, x, (depth + 1).min(s.k_cap()))?;
    Ok(match d.membership {
        Membership::InBlack { sign, in_s, .. } => SignValue::Value(if in_s { sign } else { 0 }),
        Membership::OutsideHull => SignValue::Value(0),
        Membership::Inside { .. } | Membership::Undetermined { .. } => SignValue::Undetermined,
    })
}

/// `g(x) = ∏ g⁽¹⁾(x_i)`.
pub fn g_eval(s: &Schedule, x: &[DyadicRational], depth: usize) -> Result<SignValue, CantorError> {
    let mut prod = 1i8;
    let mut undetermined = false;
    for xi in x {
        match g1_eval(s, xi, depth)? {
            SignValue::Value(0) => return Ok(SignValue::Value(0)),
            SignValue::Value(v) => prod *= v,
            SignValue::Undetermined => undetermined = true,
        }
    }
    Ok(if undetermined { SignValue::Undetermined } else { SignValue::Value(prod) })
}

/// The average of `g⁽¹⁾` over any white of generation `k`: the series truncated
/// after generation `jmax`, plus a bound on everything beyond it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AverageValue {
    pub k: usize,
    pub jmax: usize,
    /// Enclosure of the partial sum; a point when the arithmetic was exact.
    pub partial: DyadicInterval,
    /// `2^(jmax+1-k) Θ_(jmax+1) / Θ_k`, the relative measure of the generation `jmax+1` whites.
    pub tail: DyadicRational,
}

impl AverageValue {
    /// Enclosure of the exact average.
    pub fn enclosure(&self) -> DyadicInterval {
        DyadicInterval::new(&self.partial.lo - &self.tail, &self.partial.hi + &self.tail)
    }

    pub fn to_f64(&self) -> f64 {
        self.partial.midpoint_radius().0.to_f64()
    }
}

/// `Σ_{j∈S, k≤j≤jmax} (-1)^j 2^(j-k) (1-2θ_j) Θ_j/Θ_k`.
pub fn white_average(s: &Schedule, k: usize, jmax: usize) -> Result<AverageValue, OscillationError> {
    if k > jmax || jmax > s.k_cap() {
        return Err(OscillationError::BadRange { k, jmax });
    }
    let prec = AVERAGE_PREC;
    let one = DyadicInterval::point(DyadicRational::one());
    let mut ratio = one.clone();
    let mut sum = DyadicInterval::point(DyadicRational::zero());
    for j in k..=jmax {
        let theta = s.theta_enclosure(j, prec)?;
        if s.in_s(j) {
            let term = one.sub(&theta.mul_pow2(1), prec).mul(&ratio, prec).mul_pow2((j - k) as i64);
            sum = if j % 2 == 0 { sum.add(&term, prec) } else { sum.sub(&term, prec) };
        }
        ratio = ratio.mul(&theta, prec);
    }
    let tail = ratio.hi.mul_pow2((jmax + 1 - k) as i64);
    Ok(AverageValue { k, jmax, partial: sum, tail })
}

/// Smallest `jmax ≥ k` whose tail bound is (approximately) below `2^tail_log2`,
/// capped at `k_cap`.
pub fn jmax_for_tail(s: &Schedule, k: usize, tail_log2: f64) -> usize {
    let base = s.log2_big_theta(k) - k as f64;
    (k..=s.k_cap())
        .find(|&j| (j + 1) as f64 + s.log2_big_theta(j + 1) - base < tail_log2)
        .unwrap_or(s.k_cap())
}

/// Averages `a_0, ..., a_kmax` from the recursion `a_j = 2θ_j a_(j+1) + [j∈S](-1)^j(1-2θ_j)`,
/// started from `a_(jmax+1) ∈ [-1, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AverageTable {
    pub jmax: usize,
    pub values: Vec<DyadicInterval>,
}

impl AverageTable {
    pub fn build(s: &Schedule, kmax: usize, jmax: usize) -> Result<Self, OscillationError> {
        if kmax > jmax || jmax > s.k_cap() {
            return Err(OscillationError::BadRange { k: kmax, jmax });
        }
        let prec = AVERAGE_PREC;
        let one = DyadicInterval::point(DyadicRational::one());
        let mut a = DyadicInterval::new(-DyadicRational::one(), DyadicRational::one());
        let mut values = vec![a.clone(); kmax + 1];
        for j in (0..=jmax).rev() {
            let theta = s.theta_enclosure(j, prec)?;
            a = theta.mul_pow2(1).mul(&a, prec);
            if s.in_s(j) {
                let c = one.sub(&theta.mul_pow2(1), prec);
                a = if j % 2 == 0 { a.add(&c, prec) } else { a.sub(&c, prec) };
            }
            if j <= kmax {
                values[j] = a.clone();
            }
        }
        Ok(AverageTable { jmax, values })
    }

    pub fn get(&self, k: usize) -> Option<&DyadicInterval> {
        self.values.get(k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OscillationGap {
    pub k: usize,
    /// Enclosure of `(-1)^k (a_k - a_(k+1))`.
    pub signed_gap: DyadicInterval,
    /// `2(1-2θ_k)(1-2θ_(k+1))`.
    pub lower_bound: DyadicInterval,
    pub verdict: Verdict,
}

/// `|a_k - a_(k+1)|` against `2(1-2θ_k)(1-2θ_(k+1))` for `k, k+1 ∈ S`.
pub fn oscillation_gap(s: &Schedule, k: usize) -> Result<OscillationGap, OscillationError> {
    if !(s.in_s(k) && s.in_s(k + 1)) {
        return Err(OscillationError::NotAPair { k });
    }
    let prec = AVERAGE_PREC;
    let jmax = jmax_for_tail(s, k + 1, -200.0).max(k + 1);
    let a0 = white_average(s, k, jmax)?.enclosure();
    let a1 = white_average(s, k + 1, jmax)?.enclosure();
    let diff = a0.sub(&a1, prec);
    let signed_gap = if k % 2 == 0 { diff } else { diff.neg() };
    let one = DyadicInterval::point(DyadicRational::one());
    let f = |j: usize| -> Result<DyadicInterval, OscillationError> {
        Ok(one.sub(&s.theta_enclosure(j, prec)?.mul_pow2(1), prec))
    };
    let lower_bound = f(k)?.mul(&f(k + 1)?, prec).mul_pow2(1);
    let verdict = if signed_gap.lo >= lower_bound.hi {
        Verdict::Verified
    } else if signed_gap.hi < lower_bound.lo {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    Ok(OscillationGap { k, signed_gap, lower_bound, verdict })
}

/// One side of a box: enclosures of its endpoints (points when exact).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSide {
    pub left: DyadicInterval,
    pub right: DyadicInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessPair {
    pub k: usize,
    pub k_prime: usize,
    pub even_box: Vec<BoxSide>,
    pub odd_box: Vec<BoxSide>,
    pub even_average: DyadicInterval,
    pub odd_average: DyadicInterval,
    pub gap: DyadicInterval,
    /// `2^(2d+1) ε^(2d)`.
    pub threshold: DyadicRational,
    /// Longest over shortest side of the odd box; the even box is a cube.
    pub eccentricity: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceWitness {
    pub point: Vec<DyadicRational>,
    pub eps: DyadicRational,
    /// Coordinate whose side changes between the two boxes of a pair.
    pub varying_coordinate: usize,
    pub pairs: Vec<WitnessPair>,
    /// `1/ε`, the bound implied by `θ > ε`.
    pub eccentricity_bound: f64,
    /// Whether every box also meets the tighter bound `1/(2ε)`.
    pub within_half_bound: bool,
    /// Every box contains the point and each even box contains the next one.
    pub nested: bool,
    pub verdict: Verdict,
}

enum Coord {
    Cantor(Vec<i8>),
    /// In a black of a generation in `S`, with the black's enclosure and the sign there.
    Black { sign: i8, left: DyadicInterval, right: DyadicInterval },
}

fn side_from(centre: &DyadicInterval, len: &DyadicInterval, prec: u64) -> BoxSide {
    let h = len.mul_pow2(-1);
    BoxSide { left: centre.sub(&h, prec), right: centre.add(&h, prec) }
}

fn not_refuted_inside(outer: &BoxSide, inner: &BoxSide) -> bool {
    outer.left.lo <= inner.left.hi && inner.right.lo <= outer.right.hi
}

/// Searches the good pairs up to `horizon` for `count` pairs of boxes shrinking to
/// `x` whose averages of `g` differ by more than `2^(2d+1) ε^(2d)`.
pub fn divergence_witness(
    s: &Schedule,
    x: &[DyadicRational],
    eps: &DyadicRational,
    count: usize,
    horizon: usize,
) -> Result<DivergenceWitness, OscillationError> {
    let m = s.m_bound() as i64;
    if !eps.is_positive() || *eps >= DyadicRational::pow2(-m) {
        return Err(OscillationError::BadEpsilon);
    }
    let horizon = horizon.min(s.k_cap());
    let prec = AVERAGE_PREC;
    let d = x.len();

    let mut coords = Vec::with_capacity(d);
    for (i, xi) in x.iter().enumerate() {
        let desc = descend(s, xi, horizon)?;
        coords.push(match desc.membership {
            Membership::Inside { .. } => Coord::Cantor(desc.path),
            Membership::InBlack { generation, sign, in_s } => {
                if !in_s {
                    return Err(OscillationError::ZeroFactor { coordinate: i, generation });
                }
                let (c, len) = white_enclosure_from_path(s, &desc.path, prec)?;
                let theta = s.theta_enclosure(generation, prec)?;
                let one = DyadicInterval::point(DyadicRational::one());
                let half_black = one.sub(&theta.mul_pow2(1), prec).mul(&len, prec).mul_pow2(-1);
                Coord::Black { sign, left: c.sub(&half_black, prec), right: c.add(&half_black, prec) }
            }
            Membership::OutsideHull => return Err(OscillationError::ZeroFactor { coordinate: i, generation: 0 }),
            Membership::Undetermined { generation } => return Err(OscillationError::BadPoint { coordinate: i, generation }),
        });
    }
    let varying = coords.iter().position(|c| matches!(c, Coord::Cantor(_))).ok_or(OscillationError::LebesguePoint)?;

    let eps_f = eps.to_f64();
    let eps2 = eps * eps;
    let four_eps2 = eps2.mul_pow2(2);
    let eight_eps2 = eps2.mul_pow2(3);
    let threshold = (0..d).fold(DyadicRational::pow2(2 * d as i64 + 1), |acc, _| &acc * &eps2);

    let candidates: Vec<(usize, usize)> = s
        .good_pairs(horizon)
        .into_iter()
        .flat_map(|k| [(k, k + 1), (k + 1, k)])
        .filter(|&(k, kp)| k.max(kp) <= horizon)
        .collect();
    let kmax = candidates.iter().map(|&(k, kp)| k.max(kp)).max().unwrap_or(0);
    let table = AverageTable::build(s, kmax, jmax_for_tail(s, kmax, -200.0).max(kmax))?;

    let black_side = |i: usize, gen: usize| -> Result<BoxSide, OscillationError> {
        let (_, len) = white_enclosure_from_path(s, &vec![1; gen], prec)?;
        Ok(side_from(&DyadicInterval::point(x[i].clone()), &len, prec))
    };
    let eps_iv = DyadicInterval::point(eps.clone());
    let qualifies = |&(k, kp): &(usize, usize)| -> Result<bool, OscillationError> {
        for j in [k, kp] {
            if s.theta_enclosure(j, prec)?.lo <= eps_iv.hi {
                return Ok(false);
            }
        }
        for (i, c) in coords.iter().enumerate() {
            if let Coord::Black { left, right, .. } = c {
                // The function is constant on the side only if it stays inside the black.
                let side = black_side(i, k)?;
                if !(left.hi < side.left.lo && side.right.hi < right.lo) {
                    return Ok(false);
                }
            }
        }
        let (ak, akp) = (&table.values[k], &table.values[kp]);
        let gap = ak.sub(akp, prec).abs();
        Ok(gap.lo > eight_eps2 && ak.abs().lo > four_eps2)
    };
    let flags: Vec<bool> = candidates.par_iter().map(qualifies).collect::<Result<_, _>>()?;
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    for (c, ok) in candidates.iter().zip(flags) {
        if ok && chosen.last().map_or(true, |&(k, kp)| c.0.min(c.1) > k.max(kp)) {
            chosen.push(*c);
        }
    }
    if chosen.len() < count {
        return Err(OscillationError::InsufficientGoodPairs { found: chosen.len(), wanted: count });
    }
    chosen.truncate(count);

    let side_for = |i: usize, gen: usize| -> Result<(BoxSide, DyadicInterval), OscillationError> {
        match &coords[i] {
            Coord::Cantor(path) => {
                let (c, len) = white_enclosure_from_path(s, &path[..gen], prec)?;
                let avg = table.values[gen].clone();
                Ok((side_from(&c, &len, prec), avg))
            }
            Coord::Black { sign, .. } => Ok((black_side(i, gen)?, DyadicInterval::point(DyadicRational::from_int(*sign as i64)))),
        }
    };

    let mut pairs = Vec::with_capacity(count);
    let mut nested = true;
    let mut max_ecc = 1.0f64;
    for &(k, kp) in &chosen {
        let mut even_box = Vec::with_capacity(d);
        let mut odd_box = Vec::with_capacity(d);
        let mut even_average = DyadicInterval::point(DyadicRational::one());
        let mut odd_average = even_average.clone();
        for i in 0..d {
            let (side, avg) = side_for(i, k)?;
            even_average = even_average.mul(&avg, prec);
            if i == varying {
                let (oside, oavg) = side_for(i, kp)?;
                odd_average = odd_average.mul(&oavg, prec);
                odd_box.push(oside);
            } else {
                odd_average = odd_average.mul(&avg, prec);
                odd_box.push(side.clone());
            }
            even_box.push(side);
        }
        let gap = even_average.sub(&odd_average, prec).abs();
        let ratio = (s.log2_big_theta(k) - s.log2_big_theta(kp)).abs().exp2();
        max_ecc = max_ecc.max(ratio);
        // Cantor sides are whites along one descent path and the other sides are
        // centred at the point with shrinking length, so nesting holds by
        // construction; the enclosures must merely not refute it.
        for b in [&even_box, &odd_box] {
            nested &= b.iter().zip(x).all(|(side, xi)| side.left.lo <= *xi && *xi <= side.right.hi);
        }
        if let Some(prev) = pairs.last() {
            let prev: &WitnessPair = prev;
            nested &= prev.even_box.iter().zip(&even_box).all(|(o, n)| not_refuted_inside(o, n));
        }
        let certified = gap.lo > threshold;
        pairs.push(WitnessPair {
            k,
            k_prime: kp,
            even_box,
            odd_box,
            even_average,
            odd_average,
            gap,
            threshold: threshold.clone(),
            eccentricity: ratio,
            certified,
        });
    }
    let all_certified = pairs.iter().all(|p| p.certified);
    let verdict = if all_certified && nested { Verdict::Verified } else { Verdict::Violated };
    Ok(DivergenceWitness {
        point: x.to_vec(),
        eps: eps.clone(),
        varying_coordinate: varying,
        pairs,
        eccentricity_bound: 1.0 / eps_f,
        within_half_bound: max_ecc <= 0.5 / eps_f + 1e-12,
        nested,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::build_default_schedule;

    fn d(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    #[test]
    fn sign_function_values() {
        let s = build_default_schedule(100).unwrap();
        assert_eq!(g1_eval(&s, &d("0"), 5).unwrap(), SignValue::Value(0));
        let single = Schedule::preset("single", 10).unwrap();
        assert_eq!(g1_eval(&single, &d("0"), 5).unwrap(), SignValue::Value(1));
        let q = Schedule::preset("quarter", 10).unwrap();
        assert_eq!(g1_eval(&q, &d("3/8"), 3).unwrap(), SignValue::Value(-1));
        assert_eq!(g1_eval(&q, &d("1/2"), 8).unwrap(), SignValue::Undetermined);
        let e = Schedule::preset("empty", 10).unwrap();
        assert_eq!(g1_eval(&e, &d("3/8"), 3).unwrap(), SignValue::Value(0));
        assert_eq!(g1_eval(&e, &d("1/2"), 3).unwrap(), SignValue::Value(0));
        assert_eq!(g_eval(&q, &[d("0"), d("0")], 3).unwrap(), SignValue::Value(1));
        assert_eq!(g_eval(&q, &[d("3/8"), d("0")], 3).unwrap(), SignValue::Value(-1));
        assert_eq!(g_eval(&q, &[d("1/2"), d("7/8")], 3).unwrap(), SignValue::Value(0));
        assert_eq!(g_eval(&q, &[d("1/2"), d("0")], 3).unwrap(), SignValue::Undetermined);
    }

    #[test]
    fn quarter_average_is_one_third() {
        let q = Schedule::preset("quarter", 80).unwrap();
        let a = white_average(&q, 0, 60).unwrap();
        assert!(a.tail < DyadicRational::pow2(-60));
        let (lo, hi) = a.enclosure().to_f64_bounds();
        assert!(lo <= 1.0 / 3.0 && 1.0 / 3.0 <= hi);
        assert!(a.partial.is_exact());
        assert!((a.to_f64() - 1.0 / 3.0).abs() < 1e-17);
    }

    #[test]
    fn empty_schedule_average_is_zero() {
        let e = Schedule::preset("empty", 30).unwrap();
        let a = white_average(&e, 3, 30).unwrap();
        assert_eq!(a.partial, DyadicInterval::point(DyadicRational::zero()));
    }

    #[test]
    fn table_matches_closed_form() {
        for s in [Schedule::preset("quarter", 200).unwrap(), build_default_schedule(3000).unwrap(), Schedule::preset("pair", 100).unwrap()] {
            let jmax = s.k_cap();
            let table = AverageTable::build(&s, 80, jmax).unwrap();
            for k in 0..=80 {
                let closed = white_average(&s, k, jmax).unwrap().enclosure();
                let rec = &table.values[k];
                assert!(closed.lo <= rec.hi && rec.lo <= closed.hi, "{} k = {k}", s.name());
                assert!(rec.lo >= -DyadicRational::one() && rec.hi <= DyadicRational::one());
            }
        }
    }

    #[test]
    fn gaps() {
        let q = Schedule::preset("quarter", 200).unwrap();
        for k in 0..=10 {
            let g = oscillation_gap(&q, k).unwrap();
            assert_eq!(g.verdict, Verdict::Verified);
            assert!((g.signed_gap.lo.to_f64() - 2.0 / 3.0).abs() < 1e-12);
        }
        let s = build_default_schedule(3000).unwrap();
        let g = oscillation_gap(&s, 64).unwrap();
        assert_eq!(g.verdict, Verdict::Verified);
        assert_eq!(g.lower_bound, DyadicInterval::point(d("1/2")));
        assert!(matches!(oscillation_gap(&s, 63), Err(OscillationError::NotAPair { k: 63 })));
    }

    #[test]
    fn witness_quarter_one_dimensional() {
        let q = Schedule::preset("quarter", 100).unwrap();
        let w = divergence_witness(&q, &[d("1/2")], &d("1/8"), 5, 100).unwrap();
        assert_eq!(w.verdict, Verdict::Verified);
        assert_eq!(w.pairs.len(), 5);
        for p in &w.pairs {
            assert!(p.gap.lo.to_f64() > 0.6);
            assert!(p.eccentricity <= 4.0 + 1e-12);
        }
        assert!(w.within_half_bound);
    }

    #[test]
    fn witness_two_dimensional_and_mixed() {
        let q = Schedule::preset("quarter", 100).unwrap();
        let w = divergence_witness(&q, &[d("1/2"), d("1/2")], &d("1/8"), 3, 100).unwrap();
        assert_eq!(w.verdict, Verdict::Verified);
        assert_eq!(w.pairs[0].threshold, DyadicRational::pow2(5 - 12));
        // Second coordinate in the generation-0 black, where the sign is +1.
        let w = divergence_witness(&q, &[d("1/2"), d("0")], &d("1/8"), 3, 100).unwrap();
        assert_eq!(w.verdict, Verdict::Verified);
        let e = divergence_witness(&q, &[d("0"), d("0")], &d("1/8"), 1, 100).unwrap_err();
        assert_eq!(e, OscillationError::LebesguePoint);
        assert_eq!(divergence_witness(&q, &[d("1/2")], &d("1/4"), 1, 100).unwrap_err(), OscillationError::BadEpsilon);
    }

    #[test]
    fn witness_default_schedule() {
        let s = build_default_schedule(1000).unwrap();
        let w = divergence_witness(&s, &[d("1/2")], &d("1/8"), 2, 1000).unwrap();
        assert_eq!(w.verdict, Verdict::Verified);
        let ks: Vec<(usize, usize)> = w.pairs.iter().map(|p| (p.k.min(p.k_prime), p.k.max(p.k_prime))).collect();
        assert_eq!(ks, vec![(64, 65), (729, 730)]);
    }
}
