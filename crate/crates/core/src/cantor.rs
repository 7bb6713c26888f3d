//! The white/black interval recursion, its midpoints, and membership by descent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::{DyadicInterval, DyadicRational};
use crate::params::{Schedule, ScheduleError};

/// Default cap on the number of intervals in one materialized generation.
pub const MAX_GENERATION_ITEMS: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CantorError {
    #[error("generation {k} has {items} intervals, budget is {limit}")]
    Budget { k: usize, items: u128, limit: usize },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// An interval with exact endpoints; openness is implied by its role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub left: DyadicRational,
    pub right: DyadicRational,
}

impl Interval {
    pub fn new(left: DyadicRational, right: DyadicRational) -> Self {
        Interval { left, right }
    }

    pub fn length(&self) -> DyadicRational {
        &self.right - &self.left
    }

    pub fn midpoint(&self) -> DyadicRational {
        (&self.left + &self.right).mul_pow2(-1)
    }

    pub fn contains_closed(&self, x: &DyadicRational) -> bool {
        self.left <= *x && *x <= self.right
    }

    pub fn contains_open(&self, x: &DyadicRational) -> bool {
        self.left < *x && *x < self.right
    }
}

/// Generation `k`: the `2^k` closed whites of length `Θ_k` and the `2^k` open
/// blacks of length `(1-2θ_k)Θ_k` cut from their centres.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalGeneration {
    pub k: usize,
    pub whites: Vec<Interval>,
    pub blacks: Vec<Interval>,
}

fn check_budget(k: usize, limit: usize) -> Result<(), CantorError> {
    let items = 1u128.checked_shl(k as u32).unwrap_or(u128::MAX);
    if k >= 127 || items > limit as u128 {
        return Err(CantorError::Budget { k, items, limit });
    }
    Ok(())
}

fn blacks_of(whites: &[Interval], theta: &DyadicRational) -> Vec<Interval> {
    let keep = theta.clone();
    whites
        .iter()
        .map(|w| {
            let len = w.length();
            let side = &len * &keep;
            Interval::new(&w.left + &side, &w.right - &side)
        })
        .collect()
}

/// Generations `0..=k`, each derived from the previous one.
pub fn generations(s: &Schedule, k: usize, limit: usize) -> Result<Vec<IntervalGeneration>, CantorError> {
    check_budget(k, limit)?;
    let mut out = Vec::with_capacity(k + 1);
    let half = DyadicRational::half();
    let mut whites = vec![Interval::new(-&half, half)];
    for j in 0..=k {
        let theta = s.theta(j)?;
        let blacks = blacks_of(&whites, &theta);
        let next = if j < k {
            whites
                .iter()
                .zip(&blacks)
                .flat_map(|(w, b)| [Interval::new(w.left.clone(), b.left.clone()), Interval::new(b.right.clone(), w.right.clone())])
                .collect()
        } else {
            Vec::new()
        };
        out.push(IntervalGeneration { k: j, whites: std::mem::replace(&mut whites, next), blacks });
    }
    Ok(out)
}

/// Generation `k` alone.
pub fn generation(s: &Schedule, k: usize) -> Result<IntervalGeneration, CantorError> {
    Ok(generations(s, k, MAX_GENERATION_ITEMS)?.pop().expect("k + 1 generations"))
}

/// `{Σ_{j<k} σ_j (1-θ_j)Θ_j/2 : σ_j = ±1}`, sorted ascending.
pub fn black_midpoints(s: &Schedule, k: usize) -> Result<Vec<DyadicRational>, CantorError> {
    check_budget(k, MAX_GENERATION_ITEMS)?;
    let mut mids = vec![DyadicRational::zero()];
    let mut big_theta = DyadicRational::one();
    for j in 0..k {
        let theta = s.theta(j)?;
        let step = (&(DyadicRational::one() - &theta) * &big_theta).mul_pow2(-1);
        mids = mids.iter().flat_map(|m| [m - &step, m + &step]).collect();
        big_theta = &big_theta * &theta;
    }
    mids.sort();
    Ok(mids)
}

/// `2^k Θ_k`, the total white length of generation `k`.
pub fn total_white_length(s: &Schedule, k: usize) -> Result<DyadicRational, CantorError> {
    let thetas = s.exact_big_thetas(k)?;
    Ok(thetas[k].mul_pow2(k as i64))
}

/// Exact structural checks on materialized generations; returns the failures.
pub fn check_generations(s: &Schedule, gens: &[IntervalGeneration]) -> Result<Vec<String>, CantorError> {
    let mut bad = Vec::new();
    let thetas = s.exact_big_thetas(gens.len().saturating_sub(1))?;
    let mut all_blacks: Vec<&Interval> = Vec::new();
    for g in gens {
        let k = g.k;
        let theta = s.theta(k)?;
        let black_len = &(DyadicRational::one() - &theta.mul_pow2(1)) * &thetas[k];
        if g.whites.len() != 1 << k || g.blacks.len() != 1 << k {
            bad.push(format!("generation {k}: wrong interval count"));
        }
        for (w, b) in g.whites.iter().zip(&g.blacks) {
            if w.length() != thetas[k] {
                bad.push(format!("generation {k}: white {w:?} has wrong length"));
            }
            if b.length() != black_len {
                bad.push(format!("generation {k}: black {b:?} has wrong length"));
            }
            if w.midpoint() != b.midpoint() {
                bad.push(format!("generation {k}: black not concentric"));
            }
        }
        for pair in g.whites.windows(2) {
            if pair[0].right >= pair[1].left {
                bad.push(format!("generation {k}: whites overlap"));
            }
        }
        let total: DyadicRational = g.whites.iter().fold(DyadicRational::zero(), |a, w| &a + &w.length());
        if total != thetas[k].mul_pow2(k as i64) {
            bad.push(format!("generation {k}: total white length differs from 2^k Θ_k"));
        }
        all_blacks.extend(&g.blacks);
    }
    for pair in gens.windows(2) {
        let (g, h) = (&pair[0], &pair[1]);
        for (i, w) in g.whites.iter().enumerate() {
            let b = &g.blacks[i];
            let (l, r) = (&h.whites[2 * i], &h.whites[2 * i + 1]);
            if *l != Interval::new(w.left.clone(), b.left.clone()) || *r != Interval::new(b.right.clone(), w.right.clone()) {
                bad.push(format!("generation {}: children of white {i} are not the complement of its black", h.k));
            }
        }
    }
    all_blacks.sort_by(|a, b| a.left.cmp(&b.left));
    for pair in all_blacks.windows(2) {
        if pair[0].right > pair[1].left {
            bad.push("black intervals of different generations intersect".into());
        }
    }
    Ok(bad)
}

/// Outcome of locating a point in the one-dimensional set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Membership {
    /// In a white of every generation up to and including `depth`.
    Inside { depth: usize },
    /// In the black of generation `generation`; `sign = (-1)^generation`.
    InBlack { generation: usize, sign: i8, in_s: bool },
    OutsideHull,
    /// Rounding could not separate the point from a black endpoint at this generation.
    Undetermined { generation: usize },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside { .. })
    }
}

/// Result of a descent: the verdict plus the branch taken at each generation
/// (`-1` left, `+1` right).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Descent {
    pub membership: Membership,
    pub path: Vec<i8>,
}

fn descent_precision(x: &DyadicRational, depth: usize) -> u64 {
    256 + 2 * depth as u64 + x.mantissa_bits()
}

/// Follows `x` down the white tree for `depth` generations.
///
/// The offset of `x` from the current white centre is carried as an
/// outward-rounded enclosure, so the verdict is rigorous; it is exact
/// whenever the `θ_j` fit the working precision.
pub fn descend(s: &Schedule, x: &DyadicRational, depth: usize) -> Result<Descent, CantorError> {
    if depth > s.k_cap() {
        return Err(ScheduleError::OutOfRange { index: depth, k_cap: s.k_cap() }.into());
    }
    let half = DyadicRational::half();
    if x.abs() > half {
        return Ok(Descent { membership: Membership::OutsideHull, path: Vec::new() });
    }
    let prec = descent_precision(x, depth);
    let one = DyadicInterval::point(DyadicRational::one());
    let mut offset = DyadicInterval::point(x.clone());
    let mut big_theta = one.clone();
    let mut path = Vec::with_capacity(depth);
    for j in 0..depth {
        let theta = s.theta_enclosure(j, prec)?;
        // Half-length of the black, (1-2θ_j)Θ_j/2.
        let hb = one.sub(&theta.mul_pow2(1), prec).mul(&big_theta, prec).mul_pow2(-1);
        let a = offset.abs();
        if a.hi < hb.lo {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            return Ok(Descent { membership: Membership::InBlack { generation: j, sign, in_s: s.in_s(j) }, path });
        }
        if a.lo < hb.hi && !(a.is_exact() && hb.is_exact()) {
            return Ok(Descent { membership: Membership::Undetermined { generation: j }, path });
        }
        // Now |offset| ≥ half-black: x is in the child white on its side, endpoints included.
        // a.lo > 0 here, so the sign of the offset is known.
        let side: i8 = if offset.hi.is_positive() { 1 } else { -1 };
        let step = one.sub(&theta, prec).mul(&big_theta, prec).mul_pow2(-1);
        offset = if side > 0 { offset.sub(&step, prec) } else { offset.add(&step, prec) };
        big_theta = big_theta.mul(&theta, prec);
        path.push(side);
    }
    Ok(Descent { membership: Membership::Inside { depth }, path })
}

/// Membership of `x` in the one-dimensional set, resolved to generation `depth`.
pub fn in_cantor_1d(s: &Schedule, x: &DyadicRational, depth: usize) -> Result<Membership, CantorError> {
    Ok(descend(s, x, depth)?.membership)
}

/// The exact white of generation `path.len()` reached by following `path` from `W_0`.
pub fn white_from_path(s: &Schedule, path: &[i8]) -> Result<Interval, CantorError> {
    let mut centre = DyadicRational::zero();
    let mut big_theta = DyadicRational::one();
    for (j, &side) in path.iter().enumerate() {
        let theta = s.theta(j)?;
        let step = (&(DyadicRational::one() - &theta) * &big_theta).mul_pow2(-1);
        centre = if side > 0 { &centre + &step } else { &centre - &step };
        big_theta = &big_theta * &theta;
    }
    let h = big_theta.mul_pow2(-1);
    Ok(Interval::new(&centre - &h, &centre + &h))
}

/// Enclosures of the centre and length of the white reached by `path`.
pub fn white_enclosure_from_path(s: &Schedule, path: &[i8], prec: u64) -> Result<(DyadicInterval, DyadicInterval), CantorError> {
    let one = DyadicInterval::point(DyadicRational::one());
    let mut centre = DyadicInterval::point(DyadicRational::zero());
    let mut big_theta = one.clone();
    for (j, &side) in path.iter().enumerate() {
        let theta = s.theta_enclosure(j, prec)?;
        let step = one.sub(&theta, prec).mul(&big_theta, prec).mul_pow2(-1);
        centre = if side > 0 { centre.add(&step, prec) } else { centre.sub(&step, prec) };
        big_theta = big_theta.mul(&theta, prec);
    }
    Ok((centre, big_theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetVerdict {
    Inside,
    Outside,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorMembership {
    pub verdict: SetVerdict,
    pub coordinates: Vec<Membership>,
}

/// Membership in the tensor set: every coordinate in `[-1/2, 1/2]` and at
/// least one coordinate in the one-dimensional set.
#[allow(non_snake_case)]
pub fn in_E(s: &Schedule, x: &[DyadicRational], depth: usize) -> Result<TensorMembership, CantorError> {
    let coordinates = x.iter().map(|xi| in_cantor_1d(s, xi, depth)).collect::<Result<Vec<_>, _>>()?;
    let verdict = if coordinates.iter().any(|m| *m == Membership::OutsideHull) {
        SetVerdict::Outside
    } else if coordinates.iter().any(Membership::is_inside) {
        SetVerdict::Inside
    } else if coordinates.iter().any(|m| matches!(m, Membership::Undetermined { .. })) {
        SetVerdict::Undetermined
    } else {
        SetVerdict::Outside
    };
    Ok(TensorMembership { verdict, coordinates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::build_default_schedule;
    use proptest::prelude::*;

    fn d(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    fn iv(a: &str, b: &str) -> Interval {
        Interval::new(d(a), d(b))
    }

    #[test]
    fn first_generations_by_hand() {
        let q = Schedule::preset("quarter", 8).unwrap();
        let g = generations(&q, 1, 16).unwrap();
        assert_eq!(g[0].whites, vec![iv("-1/2", "1/2")]);
        assert_eq!(g[0].blacks, vec![iv("-1/4", "1/4")]);
        assert_eq!(g[1].whites, vec![iv("-1/2", "-1/4"), iv("1/4", "1/2")]);
        assert_eq!(g[1].blacks, vec![iv("-7/16", "-5/16"), iv("5/16", "7/16")]);
    }

    #[test]
    fn midpoints_by_hand() {
        let q = Schedule::preset("quarter", 8).unwrap();
        assert_eq!(black_midpoints(&q, 0).unwrap(), vec![d("0")]);
        assert_eq!(black_midpoints(&q, 1).unwrap(), vec![d("-3/8"), d("3/8")]);
        assert_eq!(black_midpoints(&q, 2).unwrap(), vec![d("-15/32"), d("-9/32"), d("9/32"), d("15/32")]);
    }

    #[test]
    fn structure_holds_exactly() {
        for s in [Schedule::preset("quarter", 12).unwrap(), build_default_schedule(12).unwrap(), Schedule::preset("pair", 12).unwrap()] {
            let gens = generations(&s, 12, 1 << 12).unwrap();
            assert!(check_generations(&s, &gens).unwrap().is_empty(), "{}", s.name());
            for g in &gens {
                let from_sum = black_midpoints(&s, g.k).unwrap();
                let from_tree: Vec<_> = g.blacks.iter().map(Interval::midpoint).collect();
                assert_eq!(from_sum, from_tree);
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let q = Schedule::preset("quarter", 40).unwrap();
        assert!(matches!(generations(&q, 30, 1 << 24), Err(CantorError::Budget { .. })));
    }

    #[test]
    fn membership_examples() {
        let s = build_default_schedule(200).unwrap();
        for depth in [0, 1, 5, 50, 200] {
            assert_eq!(in_cantor_1d(&s, &d("1/2"), depth).unwrap(), Membership::Inside { depth });
            assert_eq!(in_cantor_1d(&s, &d("-1/2"), depth).unwrap(), Membership::Inside { depth });
        }
        assert_eq!(
            in_cantor_1d(&s, &d("0"), 3).unwrap(),
            Membership::InBlack { generation: 0, sign: 1, in_s: false }
        );
        assert_eq!(in_cantor_1d(&s, &d("3/4"), 3).unwrap(), Membership::OutsideHull);
        let q = Schedule::preset("quarter", 8).unwrap();
        assert_eq!(in_cantor_1d(&q, &d("3/8"), 1).unwrap(), Membership::Inside { depth: 1 });
        assert_eq!(
            in_cantor_1d(&q, &d("3/8"), 2).unwrap(),
            Membership::InBlack { generation: 1, sign: -1, in_s: true }
        );
        // Black endpoints stay in the closed white.
        assert_eq!(in_cantor_1d(&q, &d("5/16"), 8).unwrap(), Membership::Inside { depth: 8 });
        assert_eq!(in_cantor_1d(&q, &d("1/4"), 8).unwrap(), Membership::Inside { depth: 8 });
    }

    #[test]
    fn tensor_membership() {
        let s = build_default_schedule(50).unwrap();
        let inside = in_E(&s, &[d("1/2"), d("0")], 20).unwrap();
        assert_eq!(inside.verdict, SetVerdict::Inside);
        assert_eq!(in_E(&s, &[d("0"), d("0")], 20).unwrap().verdict, SetVerdict::Outside);
        assert_eq!(in_E(&s, &[d("1/2"), d("1")], 20).unwrap().verdict, SetVerdict::Outside);
        let one = in_E(&s, &[d("1/4")], 20).unwrap();
        assert_eq!(one.coordinates[0], in_cantor_1d(&s, &d("1/4"), 20).unwrap());
    }

    #[test]
    fn path_reproduces_white() {
        let q = Schedule::preset("quarter", 10).unwrap();
        let gens = generations(&q, 6, 1 << 6).unwrap();
        for w in &gens[6].whites {
            let desc = descend(&q, &w.midpoint(), 6).unwrap();
            assert_eq!(desc.membership, Membership::Inside { depth: 6 });
            assert_eq!(white_from_path(&q, &desc.path).unwrap(), *w);
        }
    }

    proptest! {
        #[test]
        fn descent_agrees_with_materialized_tree(num in -512i64..=512, depth in 0usize..8) {
            let s = build_default_schedule(10).unwrap();
            let x = DyadicRational::new(num, -10);
            let gens = generations(&s, depth, 1 << depth).unwrap();
            let m = in_cantor_1d(&s, &x, depth).unwrap();
            let in_white = gens[depth].whites.iter().any(|w| w.contains_closed(&x));
            let black = gens.iter().find(|g| g.blacks.iter().any(|b| b.contains_open(&x))).map(|g| g.k);
            match m {
                Membership::Inside { .. } => prop_assert!(in_white && black.map_or(true, |k| k >= depth)),
                Membership::InBlack { generation, .. } => prop_assert_eq!(black, Some(generation)),
                other => prop_assert!(false, "unexpected {:?}", other),
            }
        }

        #[test]
        fn white_measure_is_nonincreasing(k in 0usize..30) {
            let s = build_default_schedule(40).unwrap();
            prop_assert!(total_white_length(&s, k + 1).unwrap() <= total_white_length(&s, k).unwrap());
        }
    }
}
