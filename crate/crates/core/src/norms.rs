//! Truncated `L^p` norms of the majorant `H`, the scale integrals behind its
//! Minkowski decomposition, and the exact combinatorics of the dyadic exponent sets.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cosineineq::{c_p, zeros, CosineError, IndexSet};
use crate::dyadic::{DyadicRational, Round};
use crate::fourier::SeriesTable;
use crate::params::{Schedule, ScheduleError};
use crate::quad::{integrate_profile, QuadError, QuadOptions, QuadResult};
use crate::Verdict;

/// Constant in the reported scale-integral bound: `2^3` from the enlarged domain and the
/// perturbation lemma at `ε = 1`, and `2` for `Θ_r^-1 ≤ 2^(r*+1)`.
pub const NORM_BOUND_CONSTANT: f64 = 16.0;
/// Largest `s*` whose integration domain `[0, Θ_s^-1]` is attempted.
pub const MAX_SCALE_STAR: i64 = 26;
/// Panel cap for one quadrature.
pub const MAX_PANELS: usize = 1 << 23;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("need r(scale) = {r} ≤ k = {k} ≤ scale = {scale}")]
    BadScale { k: usize, scale: usize, r: usize },
    #[error("j = {0} is a member of S")]
    MemberIndex(usize),
    #[error("k = {0} is not a member of S")]
    NotMember(usize),
    #[error("scale {scale} has s* = {star}, above the quadrature cap {MAX_SCALE_STAR}")]
    ScaleTooLarge { scale: usize, star: i64 },
    #[error("p = {0} must exceed 1")]
    BadExponent(f64),
    #[error("integration limit {0} must be finite and nonnegative")]
    BadLimit(f64),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Cosine(#[from] CosineError),
}

fn check_p(p: f64) -> Result<(), NormError> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(NormError::BadExponent(p))
    }
}

fn check_range(s: &Schedule, k: usize, scale: usize) -> Result<usize, NormError> {
    if scale > s.k_cap() {
        return Err(ScheduleError::OutOfRange { index: scale, k_cap: s.k_cap() }.into());
    }
    let r = s.r(scale);
    if !(r <= k && k <= scale) {
        return Err(NormError::BadScale { k, scale, r });
    }
    Ok(r)
}

/// `{j* - r(scale)* + 1 : j ∉ S, r(scale) ≤ j ≤ k-1}`, built element by element.
pub fn exponent_set(s: &Schedule, k: usize, scale: usize) -> Result<IndexSet, NormError> {
    let r = check_range(s, k, scale)?;
    let base = s.k_star(r);
    Ok(IndexSet::new((r..k).filter(|&j| !s.in_s(j)).map(|j| (s.k_star(j) - base + 1) as u32).collect()))
}

/// Prefix tables giving size, run count and maximum of the exponent sets in O(1).
#[derive(Debug, Clone)]
pub struct ExponentTables {
    /// `#{j < x : j ∉ S}`.
    non_members: Vec<u64>,
    /// `#{1 ≤ j < x : j ∉ S, j-1 ∈ S}`.
    run_starts: Vec<u64>,
    /// Largest `j < x` outside `S`.
    last_non_member: Vec<Option<usize>>,
}

impl ExponentTables {
    pub fn new(s: &Schedule) -> Self {
        let n = s.k_cap() + 1;
        let mut t = ExponentTables {
            non_members: vec![0; n + 1],
            run_starts: vec![0; n + 1],
            last_non_member: vec![None; n + 1],
        };
        for j in 0..n {
            let out = !s.in_s(j);
            t.non_members[j + 1] = t.non_members[j] + out as u64;
            t.run_starts[j + 1] = t.run_starts[j] + (out && j >= 1 && s.in_s(j - 1)) as u64;
            t.last_non_member[j + 1] = if out { Some(j) } else { t.last_non_member[j] };
        }
        t
    }
}

/// Size, runs and maximum of one exponent set with the three bounds they must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentRecord {
    pub k: usize,
    pub scale: usize,
    pub r: usize,
    pub size: u64,
    pub components: u64,
    pub sup: Option<i64>,
    /// `k* - w⁺(k) - r(scale)`.
    pub size_lower: i64,
    /// `χ⁺(k) + 1`.
    pub components_upper: u64,
    /// `scale* - r(scale)*`.
    pub sup_upper: i64,
    pub ok: bool,
}

/// The exponent-set record from prefix tables.
pub fn exponent_record(s: &Schedule, t: &ExponentTables, k: usize, scale: usize) -> Result<ExponentRecord, NormError> {
    let r = check_range(s, k, scale)?;
    let size = t.non_members[k] - t.non_members[r];
    let first_run = (r < k && !s.in_s(r)) as u64;
    let components = if size == 0 { 0 } else { t.run_starts[k] - t.run_starts[r + 1] + first_run };
    let sup = t.last_non_member[k].filter(|&j| j >= r).map(|j| s.k_star(j) - s.k_star(r) + 1);
    let size_lower = s.k_star(k) - s.w_plus(k) as i64 - r as i64;
    let components_upper = s.chi_plus(k) + 1;
    let sup_upper = s.k_star(scale) - s.k_star(r);
    let ok = size as i64 >= size_lower && components <= components_upper && sup.map_or(true, |m| m <= sup_upper);
    Ok(ExponentRecord { k, scale, r, size, components, sup, size_lower, components_upper, sup_upper, ok })
}

/// A near-dyadic phase against its dyadic target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub j: usize,
    pub scale: usize,
    pub r: usize,
    /// The target is `2^-target_exponent`, `target_exponent = j* - r(scale)* + 1`.
    pub target_exponent: i64,
    /// `(1-θ_j) Θ_j / Θ_r`, when it fits the bit budget.
    pub phase: Option<DyadicRational>,
    /// `phase / target - 1`, exact, when the phase is.
    pub relative_deviation: Option<DyadicRational>,
    /// Certified bound on `|phase / target - 1|`: `max(α_j, Σ_{i∉S, r≤i<j} α_i)` rounded up.
    pub deviation_upper: DyadicRational,
    /// `δ(2 scale)`.
    pub delta: DyadicRational,
    pub within: bool,
}

/// `(1-θ_j) Θ_r^-1 Θ_j` against `2^-(j* - r(scale)* + 1)` and the tolerance `δ(2 scale)`.
pub fn phase_deviation(s: &Schedule, j: usize, scale: usize) -> Result<PhaseRecord, NormError> {
    if scale > s.k_cap() || j > s.k_cap() {
        return Err(ScheduleError::OutOfRange { index: scale.max(j), k_cap: s.k_cap() }.into());
    }
    let r = s.r(scale);
    if j < r {
        return Err(NormError::BadScale { k: j, scale, r });
    }
    if s.in_s(j) {
        return Err(NormError::MemberIndex(j));
    }
    let target_exponent = s.k_star(j) - s.k_star(r) + 1;
    let bits: u64 = (r..=j).map(|i| s.big_theta_bits(i + 1) - s.big_theta_bits(i)).sum();
    let (phase, relative_deviation) = if bits <= s.exact_bits() {
        let mut ph = DyadicRational::one() - s.theta(j)?;
        for i in r..j {
            ph = &ph * &s.theta(i)?;
        }
        let dev = ph.mul_pow2(target_exponent) - DyadicRational::one();
        (Some(ph), Some(dev))
    } else {
        (None, None)
    };
    let mut sum = DyadicRational::zero();
    for i in (r..j).filter(|&i| !s.in_s(i)) {
        sum = sum.add_rounded(s.alpha(i)?, 64, Round::Up);
    }
    let deviation_upper = DyadicRational::max(s.alpha(j)?, &sum);
    let delta = s.delta(2 * scale as u128);
    let within = deviation_upper <= delta && relative_deviation.as_ref().map_or(true, |d| d.abs() <= delta);
    Ok(PhaseRecord { j, scale, r, target_exponent, phase, relative_deviation, deviation_upper, delta, within })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub horizon: usize,
    pub exponent_records: u64,
    pub exponent_failures: u64,
    pub phase_pairs: u64,
    pub phase_failures: u64,
    /// `2α_{i+1} ≤ α_i` for all `i < horizon`; the suffix bound relies on it only through the sums.
    pub alpha_chain_ok: bool,
    /// `2^(-k*-1) ≤ Θ_k ≤ 2^(-k*)` for all `k ≤ horizon`, from `Σ_{j∉S} α_j ≤ 1/2`.
    pub theta_bounds_ok: bool,
}

impl SweepSummary {
    pub fn ok(&self) -> bool {
        self.exponent_failures == 0 && self.phase_failures == 0 && self.theta_bounds_ok
    }
}

/// Every `(k, scale)` with `r(scale) ≤ k ≤ scale ≤ horizon` through the prefix tables, and every
/// phase `j ∉ S`, `r(scale) ≤ j < scale` through the certified bound `max(α_j, Σ_{i∉S, i≥r} α_i)`
/// with the suffix sums rounded up. This also certifies `1 - δ(2s) ≤ 2^(j*-r*) Θ_j / Θ_r ≤ 1`.
pub fn combinatorics_sweep(s: &Schedule, horizon: usize) -> Result<SweepSummary, NormError> {
    let horizon = horizon.min(s.k_cap());
    let tables = ExponentTables::new(s);
    let mut suffix = vec![DyadicRational::zero(); horizon + 2];
    for i in (0..=horizon).rev() {
        suffix[i] = if s.in_s(i) { suffix[i + 1].clone() } else { suffix[i + 1].add_rounded(s.alpha(i)?, 64, Round::Up) };
    }
    let alpha_chain_ok = (0..horizon).all(|i| s.alpha(i + 1).unwrap().mul_pow2(1) <= *s.alpha(i).unwrap());
    let per_scale: Vec<(u64, u64, u64, u64)> = (1..=horizon)
        .into_par_iter()
        .map(|scale| {
            let r = s.r(scale);
            let mut recs = 0;
            let mut bad = 0;
            for k in r..=scale {
                let rec = exponent_record(s, &tables, k, scale).expect("range checked");
                recs += 1;
                bad += !rec.ok as u64;
            }
            let delta = s.delta(2 * scale as u128);
            let tail_ok = suffix[r] <= delta;
            let mut pairs = 0;
            let mut pbad = 0;
            for j in (r..scale).filter(|&j| !s.in_s(j)) {
                pairs += 1;
                pbad += !(tail_ok && *s.alpha(j).unwrap() <= delta) as u64;
            }
            (recs, bad, pairs, pbad)
        })
        .collect();
    let sum = |f: fn(&(u64, u64, u64, u64)) -> u64| per_scale.iter().map(f).sum::<u64>();
    Ok(SweepSummary {
        horizon,
        exponent_records: sum(|t| t.0),
        exponent_failures: sum(|t| t.1),
        phase_pairs: sum(|t| t.2),
        phase_failures: sum(|t| t.3),
        alpha_chain_ok,
        theta_bounds_ok: suffix[0] <= DyadicRational::half(),
    })
}

/// `π(1-θ_j)Θ_j` for `j < k`.
fn product_phases(s: &Schedule, k: usize) -> Vec<f64> {
    (0..k).map(|j| PI * (1.0 - s.theta_f64(j)) * s.log2_big_theta(j).exp2()).collect()
}

fn inv_big_theta(s: &Schedule, k: usize) -> f64 {
    (-s.log2_big_theta(k)).exp2()
}

fn check_scale_star(s: &Schedule, scale: usize) -> Result<(), NormError> {
    let star = s.k_star(scale);
    if star > MAX_SCALE_STAR {
        return Err(NormError::ScaleTooLarge { scale, star });
    }
    Ok(())
}

fn budget_panels(n: usize) -> Result<(), QuadError> {
    if n > MAX_PANELS {
        return Err(QuadError::Budget { partial: QuadResult { value: f64::NAN, abs_error: f64::INFINITY, evaluations: 0 } });
    }
    Ok(())
}

/// `∫_0^{c_i} ∏_{j<k} |cos(π(1-θ_j)Θ_j ξ)|^p dξ` at increasing checkpoints.
fn product_profile(s: &Schedule, k: usize, p: f64, checkpoints: &[f64], opts: &QuadOptions) -> Result<Vec<QuadResult>, QuadError> {
    if k == 0 {
        return Ok(checkpoints.iter().map(|&c| QuadResult { value: c, abs_error: 4.0 * f64::EPSILON * c, evaluations: 0 }).collect());
    }
    let phases = product_phases(s, k);
    let end = checkpoints.last().copied().unwrap_or(0.0);
    let approx: f64 = phases.iter().map(|f| f * end / PI).sum();
    budget_panels(approx as usize)?;
    let bp = zeros(&phases, 0.0, end);
    let f = |x: f64| phases.iter().map(|&ph| (ph * x).cos().abs()).product::<f64>().powf(p);
    integrate_profile(f, 0.0, checkpoints, &bp, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleIntegral {
    pub k: usize,
    pub scale: usize,
    pub p: f64,
    pub result: Option<QuadResult>,
    /// `NORM_BOUND_CONSTANT Θ_s^-1 Θ_k 2^(w⁺(k)+r(s)) C_p^(χ⁺(k)+1)`.
    pub bound: f64,
    pub dominated: Verdict,
}

/// `∫_0^{Θ_scale^-1} ∏_{j<k} |cos(π(1-θ_j)Θ_j ξ)|^p dξ` with the reported majorant.
pub fn scale_integral(s: &Schedule, k: usize, scale: usize, p: f64, opts: &QuadOptions) -> Result<ScaleIntegral, NormError> {
    check_p(p)?;
    if !(k <= scale && scale <= s.k_cap()) {
        return Err(NormError::BadScale { k, scale, r: s.r(scale) });
    }
    check_scale_star(s, scale)?;
    let cp = c_p(p)?;
    let log2_bound = NORM_BOUND_CONSTANT.log2() - s.log2_big_theta(scale) + s.log2_big_theta(k)
        + (s.w_plus(k) + s.r(scale) as u64) as f64
        + (s.chi_plus(k) + 1) as f64 * (cp.value - cp.abs_error).log2();
    let bound = log2_bound.exp2();
    let result = match product_profile(s, k, p, &[inv_big_theta(s, scale)], opts) {
        Ok(v) => Some(v[0]),
        Err(e) => e.partial().filter(|q| q.abs_error.is_finite()),
    };
    let dominated = match result {
        Some(q) if q.upper() <= bound => Verdict::Verified,
        Some(q) if q.lower() > bound => Verdict::Violated,
        _ => Verdict::Inconclusive,
    };
    Ok(ScaleIntegral { k, scale, p, result, bound, dominated })
}

/// `min((1 - 1/p)/4, (p - 1)/2)`.
pub fn default_majorant_eps(p: f64) -> f64 {
    ((1.0 - 1.0 / p) / 4.0).min((p - 1.0) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiPiece {
    pub s: usize,
    /// `∫_0^{Θ_(s+1)^-1}` of the cosine product.
    pub integral: QuadResult,
    /// `(Θ_s/Θ_k)^p` times the integral.
    pub weighted: f64,
    pub weighted_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiTerm {
    pub k: usize,
    pub p: f64,
    pub smax: usize,
    pub head: QuadResult,
    pub pieces: Vec<MinkowskiPiece>,
    /// `2^k Θ_k (I_{k,k} + Σ_{s=k}^{smax} (Θ_s/Θ_k)^p I_{k,s+1})^(1/p)`.
    pub value: f64,
    pub upper: f64,
    pub lower: f64,
    /// `2^-(1-1/p-2ε) w⁺(k) (Θ_smax/Θ_k)^(p-1-ε)`.
    pub majorant_at_last: f64,
    pub eps: f64,
    /// The last piece, normalized by the majorant, has not grown past the first.
    pub tail_flag: bool,
}

/// One Minkowski term, with the pieces `[Θ_s^-1, Θ_(s+1)^-1)` for `k ≤ s ≤ smax` (none if `smax < k`).
pub fn minkowski_term(s: &Schedule, k: usize, p: f64, smax: usize, eps: Option<f64>, opts: &QuadOptions) -> Result<MinkowskiTerm, NormError> {
    check_p(p)?;
    if !s.in_s(k) {
        return Err(NormError::NotMember(k));
    }
    let last = smax.max(k.saturating_sub(1)) + 1;
    if last > s.k_cap() {
        return Err(ScheduleError::OutOfRange { index: last, k_cap: s.k_cap() }.into());
    }
    check_scale_star(s, last.max(k))?;
    let eps = eps.unwrap_or_else(|| default_majorant_eps(p));
    let mut checkpoints = vec![inv_big_theta(s, k)];
    checkpoints.extend((k..=smax).map(|j| inv_big_theta(s, j + 1)));
    let ints = product_profile(s, k, p, &checkpoints, opts).map_err(CosineError::from)?;
    let head = ints[0];
    let lk = s.log2_big_theta(k);
    let pieces: Vec<MinkowskiPiece> = (k..=smax)
        .zip(&ints[1..])
        .map(|(j, q)| {
            let w = (p * (s.log2_big_theta(j) - lk)).exp2();
            MinkowskiPiece { s: j, integral: *q, weighted: w * q.value, weighted_upper: w * q.upper() }
        })
        .collect();
    let scale = (k as f64 + lk).exp2();
    let inner = head.value + pieces.iter().map(|x| x.weighted).sum::<f64>();
    let inner_up = head.upper() + pieces.iter().map(|x| x.weighted_upper).sum::<f64>();
    let inner_lo = head.lower().max(0.0)
        + pieces.iter().map(|x| (x.weighted - (x.weighted_upper - x.weighted)).max(0.0)).sum::<f64>();
    let majorant = |j: usize| {
        (-(1.0 - 1.0 / p - 2.0 * eps) * s.w_plus(k) as f64 + (p - 1.0 - eps) * (s.log2_big_theta(j) - lk)).exp2()
    };
    let tail_flag = match (pieces.first(), pieces.last()) {
        (Some(a), Some(b)) => b.weighted / majorant(b.s) <= a.weighted / majorant(a.s),
        _ => true,
    };
    Ok(MinkowskiTerm {
        k,
        p,
        smax,
        head,
        value: scale * inner.powf(1.0 / p),
        upper: scale * inner_up.powf(1.0 / p),
        lower: scale * inner_lo.powf(1.0 / p),
        majorant_at_last: majorant(smax.max(k)),
        eps,
        tail_flag,
        pieces,
    })
}

fn h_breakpoints(s: &Schedule, table_kmax: usize, xi_max: f64) -> Result<Vec<f64>, QuadError> {
    let top = s.members().take_while(|&m| m <= table_kmax).last().unwrap_or(0);
    let phases = product_phases(s, top);
    let approx: f64 = phases.iter().map(|f| f * xi_max / PI).sum();
    budget_panels(approx as usize)?;
    Ok(zeros(&phases, 0.0, xi_max))
}

/// `∫_0^{c_i} H(ξ)^p dξ` at increasing checkpoints, `H` truncated after generation `kmax`.
pub fn h_norm_profile(s: &Schedule, p: f64, checkpoints: &[f64], kmax: usize, opts: &QuadOptions) -> Result<Vec<QuadResult>, NormError> {
    check_p(p)?;
    if let Some(&bad) = checkpoints.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(NormError::BadLimit(bad));
    }
    let table = SeriesTable::new(s, kmax);
    let end = checkpoints.last().copied().unwrap_or(0.0);
    let bp = h_breakpoints(s, table.kmax(), end).map_err(CosineError::from)?;
    let sup = (table.h(0.0).value).max(1.0);
    let o = QuadOptions { sup_bound: sup.powf(p), ..*opts };
    let res = match DirectH::new(s, table.kmax()) {
        Some(d) => integrate_profile(|x| d.eval(x).powf(p), 0.0, checkpoints, &bp, &o),
        None => integrate_profile(|x| table.h(x).value.powf(p), 0.0, checkpoints, &bp, &o),
    };
    Ok(res.map_err(CosineError::from)?)
}

/// Plain floating evaluation of the truncated `H`, usable while every `Θ_k` stays well inside `f64`.
struct DirectH {
    /// `π(1-θ_j)Θ_j` for `j` below the last member.
    phases: Vec<f64>,
    /// `(index, 2^k Θ_k, Θ_k)` per member.
    terms: Vec<(usize, f64, f64)>,
}

impl DirectH {
    fn new(s: &Schedule, kmax: usize) -> Option<Self> {
        let members: Vec<usize> = s.members().take_while(|&m| m <= kmax).collect();
        let last = members.last().copied().unwrap_or(0);
        if s.log2_big_theta(last) < -900.0 || last > 900 {
            return None;
        }
        let phases = (0..last).map(|j| PI * (1.0 - s.theta_f64(j)) * (s.log2_big_theta(j)).exp2()).collect();
        let terms = members
            .iter()
            .map(|&k| {
                let big = s.log2_big_theta(k).exp2();
                (k, (k as f64).exp2() * big, big)
            })
            .collect();
        Some(DirectH { phases, terms })
    }

    fn eval(&self, xi: f64) -> f64 {
        let xi = xi.abs();
        let mut total = 0.0;
        let mut prod = 1.0;
        let mut j = 0;
        for &(k, coef, big) in &self.terms {
            while j < k {
                prod *= (self.phases[j] * xi).cos().abs();
                j += 1;
            }
            total += coef / (1.0 + big * xi) * prod;
        }
        total
    }
}

/// `∫_0^Ξ H(ξ)^p dξ`.
pub fn h_norm_truncated(s: &Schedule, p: f64, xi_max: f64, kmax: usize, opts: &QuadOptions) -> Result<QuadResult, NormError> {
    if xi_max == 0.0 {
        return Ok(QuadResult::ZERO);
    }
    Ok(h_norm_profile(s, p, &[xi_max], kmax, opts)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiReport {
    pub p: f64,
    pub xi_max: f64,
    pub kmax: usize,
    /// `‖H‖_{L^p([0,Ξ])}` and its enclosure.
    pub norm: f64,
    pub norm_upper: f64,
    pub norm_lower: f64,
    pub terms: Vec<MinkowskiTerm>,
    pub sum: f64,
    pub sum_lower: f64,
    pub sum_upper: f64,
    /// `norm / sum`.
    pub empirical_constant: f64,
    pub verdict: Verdict,
}

/// Checks `‖H‖_{L^p([0,Ξ])} ≤ Σ_{k∈S, k≤kmax} A_k`, each term taken over enough pieces to cover `[0, Ξ]`.
pub fn minkowski_consistency(s: &Schedule, p: f64, xi_max: f64, kmax: usize, opts: &QuadOptions) -> Result<MinkowskiReport, NormError> {
    let q = h_norm_truncated(s, p, xi_max, kmax, opts)?;
    minkowski_against(s, p, xi_max, kmax, q, opts)
}

/// As [`minkowski_consistency`], with `∫_0^Ξ H^p` already computed.
pub fn minkowski_against(s: &Schedule, p: f64, xi_max: f64, kmax: usize, q: QuadResult, opts: &QuadOptions) -> Result<MinkowskiReport, NormError> {
    check_p(p)?;
    let members: Vec<usize> = s.members().take_while(|&m| m <= kmax).collect();
    let terms = members
        .par_iter()
        .map(|&k| {
            let mut smax = k.saturating_sub(1);
            while inv_big_theta(s, smax + 1) < xi_max {
                smax += 1;
                if smax + 1 > s.k_cap() {
                    return Err(ScheduleError::OutOfRange { index: smax + 1, k_cap: s.k_cap() }.into());
                }
            }
            minkowski_term(s, k, p, smax, None, opts)
        })
        .collect::<Result<Vec<_>, NormError>>()?;
    let sum = terms.iter().map(|t| t.value).sum::<f64>();
    let sum_lower = terms.iter().map(|t| t.lower).sum::<f64>();
    let sum_upper = terms.iter().map(|t| t.upper).sum::<f64>();
    let inv = 1.0 / p;
    let (norm, norm_upper, norm_lower) = (q.value.powf(inv), q.upper().powf(inv), q.lower().max(0.0).powf(inv));
    let verdict = if norm_upper <= sum_lower {
        Verdict::Verified
    } else if norm_lower > sum_upper {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    Ok(MinkowskiReport {
        p,
        xi_max,
        kmax,
        norm,
        norm_upper,
        norm_lower,
        terms,
        sum,
        sum_lower,
        sum_upper,
        empirical_constant: norm / sum,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub schedule: String,
    pub p: f64,
    pub xi_max: f64,
    pub kmax: usize,
    /// `(Ξ_i, ∫_0^{Ξ_i} H^p)` at `Ξ_i = Θ_s^-1` below `xi_max`, then `xi_max`.
    pub profile: Vec<(f64, QuadResult)>,
    pub minkowski: MinkowskiReport,
    pub scale_integrals: Vec<ScaleIntegral>,
    pub exponent_records: Vec<ExponentRecord>,
    pub phases: Vec<PhaseRecord>,
    pub profile_monotone: bool,
}

/// Everything the norms command reports, at desk scale.
pub fn norm_report(s: &Schedule, p: f64, xi_max: f64, kmax: usize, opts: &QuadOptions) -> Result<NormReport, NormError> {
    let mut cps: Vec<f64> = (0..=s.k_cap()).map(|j| inv_big_theta(s, j)).take_while(|&x| x < xi_max).collect();
    cps.push(xi_max);
    let prof = h_norm_profile(s, p, &cps, kmax, opts)?;
    let profile_monotone = prof.windows(2).all(|w| w[1].value >= w[0].value);
    let minkowski = minkowski_against(s, p, xi_max, kmax, *prof.last().unwrap(), opts)?;
    let tables = ExponentTables::new(s);
    // Per-scale records for the scales whose domain `[0, Θ_s^-1]` lies inside `[0, Ξ]`.
    let top = (0..=s.k_cap())
        .take_while(|&j| s.k_star(j) <= MAX_SCALE_STAR && inv_big_theta(s, j) <= xi_max)
        .last()
        .unwrap_or(0);
    let mut scale_integrals = Vec::new();
    let mut exponent_records = Vec::new();
    let mut phases = Vec::new();
    for scale in 1..=top {
        let r = s.r(scale);
        for k in r..=scale {
            exponent_records.push(exponent_record(s, &tables, k, scale)?);
        }
        for j in (r..scale).filter(|&j| !s.in_s(j)) {
            phases.push(phase_deviation(s, j, scale)?);
        }
    }
    let pairs: Vec<(usize, usize)> = (1..=top).flat_map(|sc| (s.r(sc)..=sc).map(move |k| (k, sc))).collect();
    scale_integrals.extend(pairs.par_iter().map(|&(k, sc)| scale_integral(s, k, sc, p, opts)).collect::<Result<Vec<_>, _>>()?);
    Ok(NormReport {
        schedule: s.name().to_string(),
        p,
        xi_max,
        kmax,
        profile: cps.into_iter().zip(prof).collect(),
        minkowski,
        scale_integrals,
        exponent_records,
        phases,
        profile_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_h_matches_table() {
        let s = crate::build_default_schedule(100).unwrap();
        for kmax in [0usize, 8, 21, 64] {
            let d = DirectH::new(&s, kmax).unwrap();
            let table = SeriesTable::new(&s, kmax);
            for xi in [0.0, 0.7, 12.5, 3.3e4, 1e7] {
                let (a, b) = (d.eval(xi), table.h(xi).value);
                // cos at arguments near 1e7 carries ~1e-9 relative error either way.
                assert!((a - b).abs() <= 1e-7 * b.max(1e-300), "{kmax} {xi}: {a} {b}");
            }
        }
    }
    use crate::cosineineq::{default_quad, lemma31_lhs};
    use crate::params::build_default_schedule;

    fn opts() -> QuadOptions {
        QuadOptions { abs_tol: 1e-8, rel_tol: 1e-10, max_level: 8, max_evals: 50_000_000, sup_bound: 1.0 }
    }

    #[test]
    fn exponent_sets() {
        let e = Schedule::preset("empty", 200).unwrap();
        for scale in [4, 16, 100] {
            let r = e.r(scale);
            for k in r..=scale {
                let j = exponent_set(&e, k, scale).unwrap();
                assert_eq!(j, IndexSet::run(1, (k - r) as u32));
            }
            assert!(exponent_set(&e, r, scale).unwrap().is_empty());
        }
        assert!(matches!(exponent_set(&e, 1, 100), Err(NormError::BadScale { .. })));
        let s = build_default_schedule(200).unwrap();
        let j = exponent_set(&s, 27, 27).unwrap();
        // r(27) = 5, and 8 is the only member of S in 5..27.
        assert_eq!(j.len(), 21);
        assert_eq!(j.components(), 2);
        let t = ExponentTables::new(&s);
        let rec = exponent_record(&s, &t, 27, 27).unwrap();
        assert_eq!((rec.size, rec.components, rec.sup), (21, 2, j.sup().map(|m| m as i64)));
    }

    #[test]
    fn prefix_tables_match_explicit_sets() {
        for name in ["default", "quarter", "empty", "pair"] {
            let s = Schedule::preset(name, 150).unwrap();
            let t = ExponentTables::new(&s);
            for scale in 1..=150 {
                for k in s.r(scale)..=scale {
                    let j = exponent_set(&s, k, scale).unwrap();
                    let rec = exponent_record(&s, &t, k, scale).unwrap();
                    assert_eq!(rec.size, j.len() as u64, "{name} {k} {scale}");
                    assert_eq!(rec.components, j.components() as u64, "{name} {k} {scale}");
                    assert_eq!(rec.sup, j.sup().map(|m| m as i64));
                    assert!(rec.ok, "{rec:?}");
                }
            }
        }
    }

    #[test]
    fn phases() {
        let s = build_default_schedule(100).unwrap();
        let rec = phase_deviation(&s, 9, 9).unwrap();
        assert!(rec.within);
        let dev = rec.relative_deviation.clone().unwrap();
        assert!(dev.abs() <= rec.deviation_upper);
        let mut signs = [0usize; 2];
        for scale in 1..=40 {
            for j in (s.r(scale)..scale).filter(|&j| !s.in_s(j)) {
                let r = phase_deviation(&s, j, scale).unwrap();
                assert!(r.within, "{j} {scale}");
                let Some(d) = r.relative_deviation else { continue };
                assert!(d.abs() <= r.deviation_upper);
                signs[(d.signum() > 0) as usize] += 1;
            }
        }
        // Both signs occur: the phase is not always below its target.
        assert!(signs[0] > 0 && signs[1] > 0);
        assert!(matches!(phase_deviation(&s, 8, 20), Err(NormError::MemberIndex(8))));
    }

    #[test]
    fn sweep_small() {
        let s = build_default_schedule(600).unwrap();
        let r = combinatorics_sweep(&s, 600).unwrap();
        assert!(r.ok() && r.alpha_chain_ok, "{r:?}");
        assert!(r.phase_pairs > 1000);
    }

    #[test]
    fn scale_integrals() {
        let s = build_default_schedule(100).unwrap();
        let z = scale_integral(&s, 0, 6, 1.5, &opts()).unwrap();
        assert_eq!(z.result.unwrap().value, (-s.log2_big_theta(6)).exp2());
        let r = scale_integral(&s, 9, 9, 1.5, &opts()).unwrap();
        assert_eq!(r.dominated, Verdict::Verified);
        assert!(matches!(scale_integral(&s, 30, 30, 1.5, &opts()), Err(NormError::ScaleTooLarge { .. })));
    }

    #[test]
    fn dyadic_limit_matches_cosine_integral() {
        // With S empty the phases are π 2^-(j+1) up to factors 1 - O(α).
        let mut spec = crate::params::ScheduleSpec::preset("empty", 40).unwrap();
        spec.alpha = crate::params::AlphaSpec::List((0..41).map(|j| DyadicRational::pow2(-60 - j)).collect());
        let e = Schedule::from_spec(spec).unwrap();
        for (k, scale) in [(3usize, 6usize), (5, 8)] {
            let a = scale_integral(&e, k, scale, 1.7, &opts()).unwrap().result.unwrap();
            let b = lemma31_lhs(&IndexSet::run(1, k as u32), scale as u32 + 1, 1.7, &default_quad()).unwrap();
            let rel = (a.value - b.value / PI).abs() / a.value;
            assert!(rel < 1e-8, "{k} {scale}: {} vs {}", a.value, b.value / PI);
        }
    }

    #[test]
    fn single_term_closed_form() {
        let s = Schedule::preset("single", 40).unwrap();
        for p in [1.5, 2.0] {
            for xi in [0.0, 3.0, 100.0] {
                let q = h_norm_truncated(&s, p, xi, 10, &opts()).unwrap();
                let exact = (1.0 - (1.0 + xi).powf(1.0 - p)) / (p - 1.0);
                assert!((q.value - exact).abs() <= q.abs_error + 1e-10, "{p} {xi}");
            }
        }
        let m = minkowski_consistency(&s, 1.5, 200.0, 10, &opts()).unwrap();
        assert_eq!(m.terms.len(), 1);
        assert_eq!(m.verdict, Verdict::Verified);
        assert!(m.empirical_constant <= 1.0);
    }

    #[test]
    fn pair_is_strict() {
        let s = Schedule::preset("pair", 40).unwrap();
        let m = minkowski_consistency(&s, 1.5, 300.0, 10, &opts()).unwrap();
        assert_eq!(m.terms.len(), 2);
        assert_eq!(m.verdict, Verdict::Verified);
        assert!(m.norm < m.sum);
    }

    #[test]
    fn monotone_profiles() {
        let s = build_default_schedule(100).unwrap();
        let cps = [10.0, 50.0, 200.0, 600.0];
        let a = h_norm_profile(&s, 1.5, &cps, 8, &opts()).unwrap();
        assert!(a.windows(2).all(|w| w[1].value >= w[0].value));
        let b = h_norm_profile(&s, 1.5, &cps, 2, &opts()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(x.value >= y.value - x.abs_error - y.abs_error);
        }
        assert_eq!(h_norm_truncated(&s, 1.5, 0.0, 8, &opts()).unwrap().value, 0.0);
        let t = minkowski_term(&s, 8, 1.5, 12, None, &opts()).unwrap();
        assert!(t.value.is_finite() && t.value > 0.0);
        assert!(t.pieces.windows(2).all(|w| w[1].weighted < w[0].weighted));
    }
}
