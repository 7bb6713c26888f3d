//! The acceptance checks, shared by the command line and the test suite.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cantor::{black_midpoints, generation};
use crate::cosineineq::{default_quad, lemma31_negative_control, lemma31_sweep};
use crate::dimension::covering_estimate;
use crate::dyadic::DyadicRational;
use crate::fourier::{cantor_measure_ft, euler_sandwich, ghat, ghat1, telescoping_defect, SeriesTable, XiGrid};
use crate::norms::{combinatorics_sweep, h_norm_profile, minkowski_against};
use crate::oracle::{g1_integral_exact, ghat1_by_midpoints};
use crate::oscillation::{divergence_witness, oscillation_gap, white_average};
use crate::params::{build_default_schedule, Schedule};
use crate::quad::{QuadOptions, QuadResult};
use crate::Verdict;

/// Size presets for the expensive checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Desk,
    Ci,
    Deep,
}

impl FromStr for Budget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Budget::Desk),
            "ci" => Ok(Budget::Ci),
            "deep" => Ok(Budget::Deep),
            o => Err(format!("unknown budget `{o}` (expected desk, ci or deep)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLimits {
    pub lemma31_n: u32,
    pub combinatorics_horizon: usize,
    pub norm_scale_star: i64,
    pub max_evals: u64,
}

impl Budget {
    /// `Desk` uses the sizes the acceptance criteria name; `Ci` shrinks the sweeps.
    pub fn limits(self) -> BudgetLimits {
        match self {
            Budget::Desk => BudgetLimits { lemma31_n: 10, combinatorics_horizon: 10_000, norm_scale_star: 22, max_evals: 1_500_000_000 },
            Budget::Ci => BudgetLimits { lemma31_n: 8, combinatorics_horizon: 2_000, norm_scale_star: 16, max_evals: 100_000_000 },
            Budget::Deep => BudgetLimits { lemma31_n: 12, combinatorics_horizon: 20_000, norm_scale_star: 24, max_evals: 8_000_000_000 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub verdict: Verdict,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
}

impl CriterionResult {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Verified
    }

    pub fn line(&self) -> String {
        let tag = match self.verdict {
            Verdict::Verified => "PASS",
            Verdict::Violated => "FAIL",
            Verdict::Inconclusive => "FAIL (inconclusive)",
        };
        format!("criterion {:>2} {tag}: [{}] {}", self.id, self.title, self.detail)
    }
}

struct Builder {
    id: u8,
    title: &'static str,
    metrics: BTreeMap<String, f64>,
    notes: Vec<String>,
    verdict: Verdict,
}

impl Builder {
    fn new(id: u8, title: &'static str) -> Self {
        Builder { id, title, metrics: BTreeMap::new(), notes: Vec::new(), verdict: Verdict::Verified }
    }

    fn metric(&mut self, k: &str, v: f64) {
        self.metrics.insert(k.to_string(), v);
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.verdict = self.verdict.combine(Verdict::Violated);
            self.notes.push(what.into());
        }
    }

    fn verdict(&mut self, v: Verdict, what: impl Into<String>) {
        if v != Verdict::Verified {
            self.verdict = self.verdict.combine(v);
            self.notes.push(what.into());
        }
    }

    fn fail(id: u8, title: &'static str, err: impl std::fmt::Display) -> CriterionResult {
        CriterionResult { id, title: title.into(), verdict: Verdict::Inconclusive, detail: format!("error: {err}"), metrics: BTreeMap::new() }
    }

    fn done(self, ok_detail: String) -> CriterionResult {
        let detail = if self.notes.is_empty() { ok_detail } else { format!("{ok_detail}; failed: {}", self.notes.join("; ")) };
        CriterionResult { id: self.id, title: self.title.into(), verdict: self.verdict, detail, metrics: self.metrics }
    }
}

macro_rules! tryc {
    ($b:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return Builder::fail($b.id, $b.title, err),
        }
    };
}

pub const CRITERIA: u8 = 12;

pub fn run_criterion(id: u8, budget: Budget) -> CriterionResult {
    let lim = budget.limits();
    match id {
        1 => cosine_sweep(lim.lemma31_n),
        2 => euler_checks(),
        3 => construction_identities(),
        4 => oscillation_checks(),
        5 => dimension_trend(),
        6 => fourier_oracles(),
        7 => tensor_identity(),
        8 => middle_thirds(),
        9 => combinatorics(lim.combinatorics_horizon),
        10 => lebesgue_witness(),
        11 => norm_convergence(lim.norm_scale_star, lim.max_evals),
        12 => negative_control(),
        _ => Builder::fail(id, "unknown criterion", format!("no criterion {id}")),
    }
}

pub fn run_all(budget: Budget) -> Vec<CriterionResult> {
    (1..=CRITERIA).map(|i| run_criterion(i, budget)).collect()
}

fn cosine_sweep(n: u32) -> CriterionResult {
    let mut b = Builder::new(1, "cosine-product bound, exhaustive subsets");
    let recs = tryc!(b, lemma31_sweep(n, &[1.1, 1.5, 2.0], &default_quad()));
    let count = |v: Verdict| recs.iter().filter(|r| r.verdict == v).count();
    let (ver, vio, inc) = (count(Verdict::Verified), count(Verdict::Violated), count(Verdict::Inconclusive));
    let frac = ver as f64 / recs.len() as f64;
    b.metric("records", recs.len() as f64);
    b.metric("verified", ver as f64);
    b.metric("violated", vio as f64);
    b.metric("inconclusive", inc as f64);
    let worst = recs.iter().map(|r| (r.value + r.abs_error) / r.bound).fold(0.0, f64::max);
    b.metric("worst_ratio", worst);
    b.check(vio == 0, format!("{vio} violated"));
    b.check(frac >= 0.99, format!("only {:.2}% verified", 100.0 * frac));
    b.done(format!("n = {n}: {ver}/{} verified, {vio} violated, {inc} inconclusive, worst value/bound {worst:.3}", recs.len()))
}

fn euler_checks() -> CriterionResult {
    let mut b = Builder::new(2, "Euler product sandwich and telescoping identity");
    let r = euler_sandwich(20, 10_000, 1e-12);
    let xs: Vec<f64> = (0..=20_000).map(|i| -1000.0 + 0.1 * i as f64).collect();
    let tele = telescoping_defect(20, &xs);
    b.metric("worst_lower", r.worst_lower);
    b.metric("worst_upper", r.worst_upper);
    b.metric("telescoping_defect", tele);
    b.check(r.holds, "sandwich");
    b.check(tele <= 1e-12, "telescoping");
    b.done(format!("lower slack {:.2e}, upper slack {:.2e}, telescoping defect {tele:.2e}", r.worst_lower, r.worst_upper))
}

fn construction_identities() -> CriterionResult {
    let mut b = Builder::new(3, "exact construction identities, k ≤ 12");
    let mut checked = 0usize;
    for name in ["default", "quarter", "pair"] {
        let s = tryc!(b, Schedule::preset(name, 40));
        let thetas = tryc!(b, s.exact_big_thetas(13));
        for k in 0..=12 {
            let gen = tryc!(b, generation(&s, k));
            let th = tryc!(b, s.theta(k));
            let black_len = (DyadicRational::one() - th.mul_pow2(1)) * thetas[k].clone();
            b.check(gen.whites.iter().all(|w| w.length() == thetas[k]), format!("{name}: white length at k = {k}"));
            b.check(gen.blacks.iter().all(|w| w.length() == black_len), format!("{name}: black length at k = {k}"));
            // Σ σ_j (1-θ_j)Θ_j/2 over all sign vectors, against the blacks built by recursion.
            let mut mids = vec![DyadicRational::zero()];
            for j in 0..k {
                let step = (DyadicRational::one() - tryc!(b, s.theta(j))) * thetas[j].mul_pow2(-1);
                mids = mids.iter().flat_map(|m| [m - &step, m + &step]).collect();
            }
            let mut from_blacks: Vec<DyadicRational> = gen.blacks.iter().map(|x| x.midpoint()).collect();
            let mut from_fn = tryc!(b, black_midpoints(&s, k));
            mids.sort();
            from_blacks.sort();
            from_fn.sort();
            b.check(mids == from_blacks && mids == from_fn, format!("{name}: midpoints at k = {k}"));
            checked += gen.whites.len() + gen.blacks.len();
        }
    }
    b.metric("intervals", checked as f64);
    b.done(format!("{checked} intervals over three schedules match exactly"))
}

fn oscillation_checks() -> CriterionResult {
    let mut b = Builder::new(4, "white averages and the oscillation gap");
    let q = tryc!(b, Schedule::preset("quarter", 100));
    let a0 = tryc!(b, white_average(&q, 0, 60));
    let third = DyadicRational::from_int(1);
    let enc = a0.enclosure();
    // 1/3 is not dyadic: compare 3·enclosure against 1.
    let three = DyadicRational::from_int(3);
    let contains = &enc.lo * &three <= third && third <= &enc.hi * &three;
    b.check(contains, "a_0 enclosure misses 1/3");
    b.check(a0.tail < DyadicRational::pow2(-60), "tail ≥ 2^-60");
    b.metric("a0", a0.to_f64());
    b.metric("a0_tail_log2", a0.tail.log2_abs());
    let mut min_gap = f64::INFINITY;
    for k in 0..=10 {
        let x = tryc!(b, white_average(&q, k, 60)).enclosure();
        let y = tryc!(b, white_average(&q, k + 1, 61)).enclosure();
        let lo = DyadicRational::max(&(&x.lo - &y.hi), &(&y.lo - &x.hi));
        min_gap = min_gap.min(lo.to_f64());
        b.check(lo >= DyadicRational::half(), format!("|a_{k} - a_{}| not ≥ 1/2", k + 1));
    }
    b.metric("quarter_min_gap", min_gap);
    let s = tryc!(b, build_default_schedule(200));
    let g = tryc!(b, oscillation_gap(&s, 64));
    b.verdict(g.verdict, "default pair (64, 65)");
    b.check(g.signed_gap.lo >= DyadicRational::half(), "default gap below 1/2");
    b.metric("default_gap_lo", g.signed_gap.lo.to_f64());
    b.metric("default_bound", g.lower_bound.hi.to_f64());
    b.done(format!(
        "a_0 = {:.15} ± 2^{:.0}, quarter gaps ≥ {min_gap:.4}, default gap (64, 65) ≥ {:.6} vs bound {}",
        a0.to_f64(),
        a0.tail.log2_abs(),
        g.signed_gap.lo.to_f64(),
        g.lower_bound.hi.to_f64()
    ))
}

fn dimension_trend() -> CriterionResult {
    let mut b = Builder::new(5, "dimension trend at k = 10^4");
    let k = 10_000;
    let s = tryc!(b, build_default_schedule(k));
    let root = (s.log2_big_theta(k) / k as f64).exp2();
    let est = tryc!(b, covering_estimate(&s, k, 1));
    let q = tryc!(b, Schedule::preset("quarter", k));
    let qe = tryc!(b, covering_estimate(&q, k, 1));
    b.metric("theta_root", root);
    b.metric("dim_estimate", est.dim_estimate);
    b.metric("quarter_estimate", qe.dim_estimate);
    b.check((0.49..=0.5).contains(&root), format!("Θ_k^(1/k) = {root}"));
    b.check(est.dim_estimate >= 0.99, format!("dim_estimate = {:.6} < 0.99", est.dim_estimate));
    b.check((qe.dim_estimate - 0.5).abs() <= 1e-6, "quarter control");
    b.done(format!("Θ_k^(1/k) = {root:.6}, covering estimate {:.6}, quarter control {:.9}", est.dim_estimate, qe.dim_estimate))
}

/// Differences are measured relative to `max(|value|, ‖g⁽¹⁾‖₁)`, where `‖g⁽¹⁾‖₁ = ǧ`'s bound
/// `Σ 2^k |B_k|`: pointwise relative error is meaningless at the zeros of `ǧ⁽¹⁾`.
fn fourier_oracles() -> CriterionResult {
    let mut b = Builder::new(6, "series against midpoint sums and exact integration");
    let mut grid = vec![0.0];
    grid.extend(XiGrid::Log { min: 1e-2, max: 1e4, n: 99 }.points());
    let mut worst = 0.0f64;
    let mut worst_pointwise = 0.0f64;
    for name in ["default", "quarter", "pair"] {
        let s = tryc!(b, Schedule::preset(name, 40));
        let t = SeriesTable::new(&s, 10);
        let mass: f64 = t.ghat1_terms(0.0).iter().map(|(_, x)| x.abs()).sum();
        for &xi in &grid {
            let v = t.ghat1(xi).value;
            let o = tryc!(b, ghat1_by_midpoints(&s, xi, 10));
            let d = (v - o).abs();
            if d > 0.0 {
                worst = worst.max(d / v.abs().max(mass));
                worst_pointwise = worst_pointwise.max(d / v.abs().max(o.abs()));
            }
        }
        let exact = tryc!(b, g1_integral_exact(&s, 10)).to_f64();
        let z = ghat1(&s, 0.0, 10).value;
        let rel0 = (z - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
        b.check(rel0 <= 1e-10, format!("{name}: ǧ(0) vs exact integral, {rel0:e}"));
    }
    b.metric("worst_relative", worst);
    b.metric("worst_pointwise_relative", worst_pointwise);
    b.check(worst <= 1e-10, format!("worst relative difference {worst:e}"));
    b.done(format!(
        "kmax = 10, 100 frequencies, three schedules: worst difference {worst:.2e} relative to max(|ǧ|, ‖g‖₁) ({worst_pointwise:.2e} pointwise, near zeros of ǧ)"
    ))
}

fn tensor_identity() -> CriterionResult {
    let mut b = Builder::new(7, "tensor identity on a 20×20 grid");
    let s = tryc!(b, build_default_schedule(400));
    let xs: Vec<f64> = (0..20).map(|i| -50.0 + 100.0 * i as f64 / 19.0 + 0.01).collect();
    let mut worst = 0.0f64;
    for &a in &xs {
        for &c in &xs {
            let g = ghat(&s, &[a, c], 400).value;
            let p = ghat1(&s, a, 400).value * ghat1(&s, c, 400).value;
            let rel = if p == 0.0 { g.abs() } else { (g - p).abs() / p.abs() };
            worst = worst.max(rel);
        }
    }
    b.metric("worst_relative", worst);
    b.check(worst <= 1e-12, format!("worst relative difference {worst:e}"));
    b.done(format!("worst relative difference {worst:.2e}"))
}

fn middle_thirds() -> CriterionResult {
    let mut b = Builder::new(8, "middle-thirds control");
    let th = vec![1.0 / 3.0; 60];
    let mut worst = 0.0f64;
    for x in (XiGrid::Log { min: 1e-2, max: 1e3, n: 1000 }).points() {
        let lhs = cantor_measure_ft(&th, 3.0 * x).value;
        let rhs = (2.0 * PI * x).cos() * cantor_measure_ft(&th, x).value;
        worst = worst.max((lhs - rhs).abs());
    }
    let m1 = cantor_measure_ft(&th, 3.0).value.abs();
    let spread = (1..=15).map(|k| (cantor_measure_ft(&th, 3f64.powi(k)).value.abs() - m1).abs()).fold(0.0, f64::max);
    b.metric("functional_equation", worst);
    b.metric("power_spread", spread);
    b.metric("modulus", m1);
    b.check(worst <= 1e-10, "functional equation");
    b.check(spread <= 1e-10, "no decay along powers of 3");
    b.done(format!("functional equation defect {worst:.2e}, |μ̂(3^k)| = {m1:.6} with spread {spread:.2e}"))
}

fn combinatorics(horizon: usize) -> CriterionResult {
    let mut b = Builder::new(9, "exponent-set and phase combinatorics");
    let s = tryc!(b, build_default_schedule(horizon));
    let r = tryc!(b, combinatorics_sweep(&s, horizon));
    b.metric("exponent_records", r.exponent_records as f64);
    b.metric("phase_pairs", r.phase_pairs as f64);
    b.check(r.exponent_failures == 0, format!("{} exponent-set failures", r.exponent_failures));
    b.check(r.phase_failures == 0, format!("{} phase failures", r.phase_failures));
    b.check(r.theta_bounds_ok, "Θ_k bounds");
    b.check(r.alpha_chain_ok, "α chain");
    let v = tryc!(b, s.validate(horizon.min(2_000)));
    b.check(v.is_valid(), "schedule validation");
    b.done(format!("horizon {horizon}: {} (k, s) records and {} phases, all exact", r.exponent_records, r.phase_pairs))
}

fn lebesgue_witness() -> CriterionResult {
    let mut b = Builder::new(10, "divergence witness at x = 1/2");
    let s = tryc!(b, build_default_schedule(1000));
    let w = tryc!(b, divergence_witness(&s, &[DyadicRational::half()], &DyadicRational::pow2(-3), 2, 1000));
    let certified: Vec<_> = w.pairs.iter().filter(|p| p.certified).collect();
    let eighth = DyadicRational::pow2(-3);
    b.check(certified.len() >= 2, format!("{} certified pairs", certified.len()));
    b.check(certified.iter().all(|p| p.gap.lo > eighth), "gap not above 1/8");
    b.verdict(w.verdict, "witness verdict");
    b.metric("certified_pairs", certified.len() as f64);
    let pairs: Vec<String> = certified.iter().map(|p| format!("({}, {}) gap ≥ {:.4}", p.k, p.k_prime, p.gap.lo.to_f64())).collect();
    b.done(pairs.join(", "))
}

fn norm_convergence(scale_star: i64, max_evals: u64) -> CriterionResult {
    let mut b = Builder::new(11, "truncated norms of the majorant");
    let s = tryc!(b, build_default_schedule(200));
    let p = 1.5;
    let top = (0..=s.k_cap()).take_while(|&j| s.k_star(j) <= scale_star).last().unwrap_or(0);
    let kmax = top;
    let cps: Vec<f64> = (1..=top).map(|j| (-s.log2_big_theta(j)).exp2()).collect();
    let opts = QuadOptions { abs_tol: 1e-6, rel_tol: 1e-10, max_level: 8, max_evals, sup_bound: 1.0 };
    let prof = tryc!(b, h_norm_profile(&s, p, &cps, kmax, &opts));
    let monotone = prof.windows(2).all(|w| w[1].value >= w[0].value);
    let total = prof.last().map_or(0.0, |q| q.value);
    let last_inc = match prof.as_slice() {
        [.., a, c] => c.value - a.value,
        _ => total,
    };
    b.check(monotone, "profile not monotone");
    b.check(last_inc < 0.1 * total, format!("last increment {:.3}% of total", 100.0 * last_inc / total));
    let xi = *cps.last().unwrap_or(&1.0);
    let q = prof.last().copied().unwrap_or(QuadResult::ZERO);
    let m = tryc!(b, minkowski_against(&s, p, xi, kmax, q, &opts));
    b.check(m.verdict != Verdict::Violated, "Minkowski inequality violated");
    b.verdict(m.verdict, "Minkowski check inconclusive");
    b.metric("xi_max", xi);
    b.metric("norm_p", total);
    b.metric("last_increment_fraction", last_inc / total);
    b.metric("empirical_constant", m.empirical_constant);
    b.done(format!(
        "Ξ = {xi:.4e} (s* ≤ {scale_star}): ∫H^p = {total:.6}, last-scale increment {:.3}%, ‖H‖ = {:.5} ≤ Σ A_k = {:.5} (constant {:.4})",
        100.0 * last_inc / total,
        m.norm,
        m.sum,
        m.empirical_constant
    ))
}

fn negative_control() -> CriterionResult {
    let mut b = Builder::new(12, "falsified constant is caught");
    let recs = tryc!(b, lemma31_negative_control(6, &[1.1, 1.5, 2.0], &default_quad()));
    let vio = recs.iter().filter(|r| r.verdict == Verdict::Violated).count();
    b.metric("violated", vio as f64);
    b.check(vio >= 1, "no violation detected");
    b.done(format!("{vio} of {} shrunk bounds violated", recs.len()))
}
