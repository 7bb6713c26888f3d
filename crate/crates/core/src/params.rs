//! Parameter schedules: the index set `S`, weights `w`, scale offsets `r`,
//! error terms `α_j`, perturbation radii `δ(n)`, and every table derived from
//! them (`θ_j`, `Θ_k`, `w⁺`, `χ⁺`, `k*`).

use num_integer::Roots;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::{DyadicInterval, DyadicRational, Round};
use crate::logval::{NeumaierSum, SignedLogValue};

/// Largest `k_cap` a schedule may materialize.
pub const MAX_K_CAP: usize = 1_000_000;

/// Default budget (mantissa bits) for exact products such as `Θ_k`.
pub const DEFAULT_EXACT_BITS: u64 = 1 << 16;

/// Significant bits kept by outward-rounded enclosures.
pub const ENCLOSURE_BITS: u64 = 256;

/// Candidate exponents `m` with `δ(n) = 2^-m` for `n = 1..=8`, produced by
/// `cosineineq::delta_search(n, 2.0, 1.0, 4, 0x5eed)` (see `examples/delta_table.rs`).
/// Monotonized on load, so the effective head is `2, 3, ..., 9`.
pub const DEFAULT_DELTA_CANDIDATES: [u64; 8] = [1, 1, 1, 1, 1, 1, 1, 1];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("k_cap {k_cap} exceeds the materialization limit {limit}")]
    KCapTooLarge { k_cap: usize, limit: usize },
    #[error("index {index} is outside the materialized range 0..={k_cap}")]
    OutOfRange { index: usize, k_cap: usize },
    #[error("exact value at index {index} needs {bits} bits, budget is {budget}")]
    BitBudget { index: usize, bits: u64, budget: u64 },
    #[error("invalid schedule: {0}")]
    Invalid(String),
    #[error("unknown schedule preset `{0}`")]
    UnknownPreset(String),
    #[error("schedule file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MemberSpec {
    /// `"standard"`, `"all"` or `"none"`.
    Named(String),
    List(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    /// `"standard"`.
    Named(String),
    Constant(u32),
    /// One weight per listed member, in order.
    List(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    /// `"derived"`.
    Named(String),
    List(Vec<DyadicRational>),
}

impl Default for AlphaSpec {
    fn default() -> Self {
        AlphaSpec::Named("derived".into())
    }
}

fn default_root() -> u32 {
    2
}
fn default_m() -> u32 {
    2
}
fn default_bits() -> u64 {
    DEFAULT_EXACT_BITS
}

/// Serializable description from which a [`Schedule`] is rebuilt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub name: String,
    pub k_cap: usize,
    #[serde(default)]
    pub seed: u64,
    pub members: MemberSpec,
    pub weights: WeightSpec,
    #[serde(default)]
    pub alpha: AlphaSpec,
    /// `r(s) = floor(s^(1/r_root))`.
    #[serde(default = "default_root")]
    pub r_root: u32,
    #[serde(default = "default_m")]
    pub m_bound: u32,
    /// Exponents of `δ(1), δ(2), ...`; empty selects the built-in table.
    #[serde(default)]
    pub delta_candidates: Vec<u64>,
    #[serde(default = "default_bits")]
    pub exact_bits: u64,
}

impl ScheduleSpec {
    pub fn preset(name: &str, k_cap: usize) -> Result<Self, ScheduleError> {
        let (members, weights) = match name {
            "default" => (MemberSpec::Named("standard".into()), WeightSpec::Named("standard".into())),
            "quarter" => (MemberSpec::Named("all".into()), WeightSpec::Constant(2)),
            "empty" => (MemberSpec::Named("none".into()), WeightSpec::Constant(2)),
            "single" => (MemberSpec::List(vec![0]), WeightSpec::List(vec![2])),
            "pair" => (MemberSpec::List(vec![0, 2]), WeightSpec::List(vec![2, 2])),
            other => return Err(ScheduleError::UnknownPreset(other.to_string())),
        };
        Ok(ScheduleSpec {
            name: name.to_string(),
            k_cap,
            seed: 0,
            members,
            weights,
            alpha: AlphaSpec::default(),
            r_root: 2,
            m_bound: 2,
            delta_candidates: Vec::new(),
            exact_bits: DEFAULT_EXACT_BITS,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schedule spec is always serializable")
    }

    pub fn from_toml(text: &str) -> Result<Self, ScheduleError> {
        toml::from_str(text).map_err(|e| ScheduleError::Parse(e.to_string()))
    }
}

/// Membership of `j` in the example set `{n³ : n ≥ 2} ∪ {n⁶ + 1 : n ≥ 2}` and its weight.
pub fn standard_weight(j: usize) -> Option<u32> {
    if j < 8 {
        return None;
    }
    let c = j.cbrt();
    if c * c * c == j {
        let sq = c.sqrt();
        return Some(if sq * sq == c { 2 } else { c as u32 });
    }
    let m = j - 1;
    let s = m.sqrt().cbrt();
    if s >= 2 && s.pow(6) == m {
        return Some(2);
    }
    None
}

/// An immutable parameter schedule with all derived tables up to `k_cap`.
#[derive(Debug, Clone)]
pub struct Schedule {
    spec: ScheduleSpec,
    in_s: Vec<bool>,
    weight: Vec<u32>,
    alpha: Vec<DyadicRational>,
    delta_head: Vec<u64>,
    w_plus: Vec<u64>,
    chi_plus: Vec<u64>,
    k_star: Vec<i64>,
    log2_theta: Vec<f64>,
    /// `Σ_{j∉S, j<k} log2(1-α_j)`.
    defect: Vec<f64>,
    theta_bits: Vec<u64>,
}

/// The default schedule, with `r(s) = ⌊√s⌋` and derived `α`, `δ`.
pub fn build_default_schedule(k_cap: usize) -> Result<Schedule, ScheduleError> {
    Schedule::from_spec(ScheduleSpec::preset("default", k_cap)?)
}

impl Schedule {
    pub fn preset(name: &str, k_cap: usize) -> Result<Self, ScheduleError> {
        Self::from_spec(ScheduleSpec::preset(name, k_cap)?)
    }

    pub fn from_spec(spec: ScheduleSpec) -> Result<Self, ScheduleError> {
        let k_cap = spec.k_cap;
        if k_cap > MAX_K_CAP {
            return Err(ScheduleError::KCapTooLarge { k_cap, limit: MAX_K_CAP });
        }
        if spec.r_root == 0 {
            return Err(ScheduleError::Invalid("r_root must be at least 1".into()));
        }
        let n = k_cap + 1;
        let mut in_s = vec![false; n];
        let mut weight = vec![0u32; n];
        match (&spec.members, &spec.weights) {
            (MemberSpec::Named(m), w) if m == "standard" => {
                if !matches!(w, WeightSpec::Named(x) if x == "standard") {
                    return Err(ScheduleError::Invalid("members = \"standard\" requires weights = \"standard\"".into()));
                }
                for j in 0..n {
                    if let Some(wj) = standard_weight(j) {
                        in_s[j] = true;
                        weight[j] = wj;
                    }
                }
            }
            (MemberSpec::Named(m), WeightSpec::Constant(c)) if m == "all" => {
                in_s.iter_mut().for_each(|b| *b = true);
                weight.iter_mut().for_each(|w| *w = *c);
            }
            (MemberSpec::Named(m), _) if m == "none" => {}
            (MemberSpec::List(list), ws) => {
                for (i, &j) in list.iter().enumerate() {
                    let wj = match ws {
                        WeightSpec::Constant(c) => *c,
                        WeightSpec::List(v) => *v.get(i).ok_or_else(|| {
                            ScheduleError::Invalid("weights list shorter than members list".into())
                        })?,
                        WeightSpec::Named(_) => {
                            return Err(ScheduleError::Invalid("explicit members need explicit weights".into()))
                        }
                    };
                    if j < n {
                        in_s[j] = true;
                        weight[j] = wj;
                    }
                }
            }
            (m, w) => return Err(ScheduleError::Invalid(format!("unsupported members/weights pair {m:?} / {w:?}"))),
        }
        if let Some(j) = (0..n).find(|&j| in_s[j] && weight[j] == 0) {
            return Err(ScheduleError::Invalid(format!("w({j}) must be positive")));
        }

        let delta_head = monotone_delta_head(if spec.delta_candidates.is_empty() {
            &DEFAULT_DELTA_CANDIDATES
        } else {
            &spec.delta_candidates
        });

        let alpha = match &spec.alpha {
            AlphaSpec::Named(x) if x == "derived" => {
                let mut out = Vec::with_capacity(n);
                let mut prev: Option<u64> = None;
                for j in 0..n {
                    let reach = (j as u128 + 1).pow(spec.r_root);
                    let from_delta = delta_exponent_with(&delta_head, 2 * reach) + 1;
                    let a = from_delta.max(2).max(prev.map_or(0, |p| p as u128 + 1));
                    let a = u64::try_from(a).map_err(|_| ScheduleError::Invalid("α exponent overflow".into()))?;
                    out.push(DyadicRational::pow2(-(a as i64)));
                    prev = Some(a);
                }
                out
            }
            AlphaSpec::List(v) => {
                if v.len() < n {
                    return Err(ScheduleError::Invalid(format!("alpha list has {} entries, need {n}", v.len())));
                }
                v[..n].to_vec()
            }
            AlphaSpec::Named(x) => return Err(ScheduleError::Invalid(format!("unknown alpha rule `{x}`"))),
        };
        let one = DyadicRational::one();
        for (j, a) in alpha.iter().enumerate() {
            if !in_s[j] && !(a.is_positive() && *a < one) {
                return Err(ScheduleError::Invalid(format!("α_{j} = {a} must lie in (0, 1)")));
            }
        }

        let mut w_plus = vec![0u64; n + 1];
        let mut chi_plus = vec![0u64; n + 1];
        let mut k_star = vec![0i64; n + 1];
        let mut log2_theta = vec![0f64; n];
        let mut defect = vec![0f64; n + 1];
        let mut theta_bits = vec![0u64; n + 1];
        let mut acc = NeumaierSum::new();
        for j in 0..n {
            let (wp, cp) = if in_s[j] { (weight[j] as u64, 1) } else { (0, 0) };
            w_plus[j + 1] = w_plus[j] + wp;
            chi_plus[j + 1] = chi_plus[j] + cp;
            let bits = if in_s[j] {
                log2_theta[j] = -(weight[j] as f64);
                1
            } else {
                let l = (-alpha[j].to_f64()).ln_1p() / std::f64::consts::LN_2;
                log2_theta[j] = -1.0 + l;
                acc.add(l);
                (-alpha[j].exponent()).max(1) as u64
            };
            defect[j + 1] = acc.sum();
            theta_bits[j + 1] = theta_bits[j].saturating_add(bits);
        }
        for k in 0..=n {
            k_star[k] = k as i64 + w_plus[k] as i64 - chi_plus[k] as i64;
        }

        Ok(Schedule { spec, in_s, weight, alpha, delta_head, w_plus, chi_plus, k_star, log2_theta, defect, theta_bits })
    }

    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn k_cap(&self) -> usize {
        self.spec.k_cap
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn m_bound(&self) -> u32 {
        self.spec.m_bound
    }

    pub fn exact_bits(&self) -> u64 {
        self.spec.exact_bits
    }

    fn check(&self, j: usize) -> Result<(), ScheduleError> {
        if j > self.k_cap() {
            Err(ScheduleError::OutOfRange { index: j, k_cap: self.k_cap() })
        } else {
            Ok(())
        }
    }

    /// `j ∈ S`; false beyond `k_cap`.
    pub fn in_s(&self, j: usize) -> bool {
        self.in_s.get(j).copied().unwrap_or(false)
    }

    /// Whether `S` is empty as a whole, not merely below `k_cap`.
    pub fn s_is_empty(&self) -> bool {
        match &self.spec.members {
            MemberSpec::Named(m) => m == "none",
            MemberSpec::List(v) => v.is_empty(),
        }
    }

    /// Largest member of `S` when `S` is known to be finite (`Some(None)` if empty),
    /// `None` for rule-based infinite sets.
    pub fn last_member(&self) -> Option<Option<usize>> {
        match &self.spec.members {
            MemberSpec::Named(m) if m == "none" => Some(None),
            MemberSpec::List(v) => Some(v.iter().copied().max()),
            _ => None,
        }
    }

    pub fn weight(&self, j: usize) -> Option<u32> {
        self.in_s(j).then(|| self.weight[j])
    }

    /// Members of `S` up to `k_cap`, ascending.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.in_s.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }

    pub fn alpha(&self, j: usize) -> Result<&DyadicRational, ScheduleError> {
        self.check(j)?;
        Ok(&self.alpha[j])
    }

    /// `θ_j` exactly: `2^-w(j)` on `S`, `(1-α_j)/2` elsewhere.
    pub fn theta(&self, j: usize) -> Result<DyadicRational, ScheduleError> {
        self.check(j)?;
        if self.in_s[j] {
            return Ok(DyadicRational::pow2(-(self.weight[j] as i64)));
        }
        let bits = self.theta_bits[j + 1] - self.theta_bits[j];
        if bits > self.exact_bits() {
            return Err(ScheduleError::BitBudget { index: j, bits, budget: self.exact_bits() });
        }
        Ok((DyadicRational::one() - &self.alpha[j]).mul_pow2(-1))
    }

    /// Outward-rounded enclosure of `θ_j`; exact whenever `θ_j` fits in `prec` bits.
    pub fn theta_enclosure(&self, j: usize, prec: u64) -> Result<DyadicInterval, ScheduleError> {
        self.check(j)?;
        if self.in_s[j] {
            return Ok(DyadicInterval::point(DyadicRational::pow2(-(self.weight[j] as i64))));
        }
        let a = &self.alpha[j];
        let top = a.top().unwrap_or(0);
        if top < -(prec as i64) - 2 {
            // 0 < α < 2^-prec.
            let half = DyadicRational::half();
            let lo = &half - &DyadicRational::pow2(-(prec as i64) - 1);
            return Ok(DyadicInterval::new(lo, half));
        }
        let t = (DyadicRational::one() - a).mul_pow2(-1);
        Ok(DyadicInterval::new(t.round(prec, Round::Down), t.round(prec, Round::Up)))
    }

    pub fn log2_theta(&self, j: usize) -> f64 {
        self.log2_theta[j]
    }

    pub fn theta_f64(&self, j: usize) -> f64 {
        self.log2_theta[j].exp2()
    }

    /// `θ_0, ..., θ_{n-1}` as floats.
    pub fn theta_f64_table(&self, n: usize) -> Vec<f64> {
        (0..n.min(self.k_cap() + 1)).map(|j| self.theta_f64(j)).collect()
    }

    /// `w⁺(k) = Σ_{j∈S, j<k} w(j)` for `k ≤ k_cap + 1`.
    pub fn w_plus(&self, k: usize) -> u64 {
        self.w_plus[k]
    }

    /// `χ⁺(k) = #(S ∩ [0, k-1])` for `k ≤ k_cap + 1`.
    pub fn chi_plus(&self, k: usize) -> u64 {
        self.chi_plus[k]
    }

    /// `k* = k + w⁺(k) - χ⁺(k)` for `k ≤ k_cap + 1`.
    pub fn k_star(&self, k: usize) -> i64 {
        self.k_star[k]
    }

    /// `log2 Θ_k = -k* + Σ_{j∉S, j<k} log2(1-α_j)`, accurate even when `Θ_k` underflows.
    pub fn log2_big_theta(&self, k: usize) -> f64 {
        -(self.k_star[k] as f64) + self.defect[k]
    }

    /// Mantissa bits of the exact product `Θ_k`.
    pub fn big_theta_bits(&self, k: usize) -> u64 {
        self.theta_bits[k]
    }

    /// `Θ_k` in log form plus the exact product when it fits the bit budget.
    pub fn big_theta(&self, k: usize) -> Result<(SignedLogValue, Option<DyadicRational>), ScheduleError> {
        if k > self.k_cap() + 1 {
            return Err(ScheduleError::OutOfRange { index: k, k_cap: self.k_cap() });
        }
        let log = SignedLogValue::from_log2(1, self.log2_big_theta(k));
        let exact = if self.theta_bits[k] <= self.exact_bits() {
            let mut p = DyadicRational::one();
            for j in 0..k {
                p = &p * &self.theta(j)?;
            }
            Some(p)
        } else {
            None
        };
        Ok((log, exact))
    }

    /// Exact `Θ_0, ..., Θ_upto`.
    pub fn exact_big_thetas(&self, upto: usize) -> Result<Vec<DyadicRational>, ScheduleError> {
        if upto > self.k_cap() + 1 {
            return Err(ScheduleError::OutOfRange { index: upto, k_cap: self.k_cap() });
        }
        if self.theta_bits[upto] > self.exact_bits() {
            return Err(ScheduleError::BitBudget { index: upto, bits: self.theta_bits[upto], budget: self.exact_bits() });
        }
        let mut out = Vec::with_capacity(upto + 1);
        let mut p = DyadicRational::one();
        out.push(p.clone());
        for j in 0..upto {
            p = &p * &self.theta(j)?;
            out.push(p.clone());
        }
        Ok(out)
    }

    /// Outward enclosure of `Θ_b / Θ_a = θ_a ⋯ θ_{b-1}`.
    pub fn theta_ratio_enclosure(&self, a: usize, b: usize, prec: u64) -> Result<DyadicInterval, ScheduleError> {
        let mut p = DyadicInterval::point(DyadicRational::one());
        for j in a..b {
            p = p.mul(&self.theta_enclosure(j, prec)?, prec);
        }
        Ok(p)
    }

    /// `r(s) = ⌊s^(1/r_root)⌋`.
    pub fn r(&self, s: usize) -> usize {
        s.nth_root(self.spec.r_root)
    }

    /// Largest `s` with `r(s) ≤ j`.
    pub fn last_scale_with_offset_at_most(&self, j: usize) -> u128 {
        (j as u128 + 1).pow(self.spec.r_root) - 1
    }

    /// Exponent `m` with `δ(n) = 2^-m`.
    pub fn delta_exponent(&self, n: u128) -> u128 {
        delta_exponent_with(&self.delta_head, n)
    }

    pub fn delta(&self, n: u128) -> DyadicRational {
        DyadicRational::pow2(-(self.delta_exponent(n) as i64))
    }

    /// The monotonized exponents of `δ(0), ..., δ(N)` taken from the search table.
    pub fn delta_head(&self) -> &[u64] {
        &self.delta_head
    }

    /// `k` with `k, k+1 ∈ S`, `k+1 ≤ upto`, and `w(k), w(k+1) ≤ M`.
    pub fn good_pairs(&self, upto: usize) -> Vec<usize> {
        let m = self.m_bound();
        (0..upto.min(self.k_cap()))
            .filter(|&k| self.in_s(k) && self.in_s(k + 1) && self.weight[k] <= m && self.weight[k + 1] <= m)
            .collect()
    }

    pub fn validate(&self, horizon: usize) -> Result<ValidationReport, ScheduleError> {
        validate_schedule(self, horizon)
    }
}

/// `e(0) = 2`, `e(n) = max(candidate(n), e(n-1) + 1)`.
fn monotone_delta_head(candidates: &[u64]) -> Vec<u64> {
    let mut head = vec![2u64];
    for &c in candidates {
        let prev = *head.last().unwrap();
        head.push(c.max(prev + 1));
    }
    head
}

/// Beyond the table: `δ(n) = min(4^-n, δ(n-1)/2)`.
fn delta_exponent_with(head: &[u64], n: u128) -> u128 {
    let last = head.len() as u128 - 1;
    if n <= last {
        return head[n as usize] as u128;
    }
    (2 * n).max(head[last as usize] as u128 + (n - last))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendSample {
    pub k: usize,
    pub value: f64,
}

/// A finite-horizon trend toward an asymptotic limit; never a proof.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trend {
    pub name: String,
    pub target: String,
    pub samples: Vec<TrendSample>,
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schedule: String,
    pub k_cap: usize,
    pub seed: u64,
    pub horizon: usize,
    pub exact_checks: u64,
    pub exact_violations: Vec<String>,
    pub trends: Vec<Trend>,
    pub theta_root_at_horizon: f64,
    pub good_pairs: Vec<[usize; 2]>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.exact_violations.is_empty()
    }
}

fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = std::iter::successors(Some(16usize), |k| Some(k * 2)).take_while(|&k| k < horizon).collect();
    ks.push(horizon);
    ks
}

/// Exact invariants (violations) and asymptotic trends (reported) up to `horizon`.
pub fn validate_schedule(s: &Schedule, horizon: usize) -> Result<ValidationReport, ScheduleError> {
    if horizon > s.k_cap() {
        return Err(ScheduleError::OutOfRange { index: horizon, k_cap: s.k_cap() });
    }
    let mut violations = Vec::new();
    let mut checks = 0u64;
    let quarter = DyadicRational::pow2(-2);
    let one = DyadicRational::one();

    for j in 0..=horizon {
        checks += 1;
        if s.in_s(j) {
            if s.weight[j] < 2 {
                violations.push(format!("w({j}) = {} < 2", s.weight[j]));
            }
        } else if !(s.alpha[j].is_positive() && s.alpha[j] < one) {
            violations.push(format!("θ_{j} outside (0, 1/2): α_{j} = {}", s.alpha[j]));
        }
    }
    for j in 0..horizon {
        checks += 1;
        let (a, b) = (&s.alpha[j], &s.alpha[j + 1]);
        if !b.is_positive() || b.mul_pow2(1) > *a || *a > quarter {
            violations.push(format!("α chain broken at j = {j}: α_j = {a}, α_(j+1) = {b}"));
        }
    }
    for j in 0..=horizon {
        checks += 1;
        let n = 2 * s.last_scale_with_offset_at_most(j);
        let de = s.delta_exponent(n);
        // 2α_j ≤ δ(n) with α_j = m 2^e  ⇔  top(α_j) + 1 < -de, or exact comparison.
        let a2 = s.alpha[j].mul_pow2(1);
        let ok = match a2.top() {
            None => false,
            Some(t) if (t as i128) < -(de as i128) => true,
            Some(_) => de < i64::MAX as u128 && a2 <= DyadicRational::pow2(-(de as i64)),
        };
        if !ok {
            violations.push(format!("2α_{j} exceeds inf δ(2s) over r(s) ≤ {j}"));
        }
    }
    for n in 0..=(2 * horizon as u128 + 2) {
        checks += 1;
        let (a, b) = (s.delta_exponent(n), s.delta_exponent(n + 1));
        if a < 2 || b <= a {
            violations.push(format!("δ not strictly decreasing below 1/2 at n = {n}"));
            break;
        }
    }

    // Θ bounds: 2^(-k*-1) ≤ Θ_k ≤ 2^(-k*) ⇐ Σ_{j∉S,j<k} α_j ≤ 1/2 (Weierstrass product inequality).
    let mut alpha_sum_up = DyadicRational::zero();
    let half = DyadicRational::half();
    for k in 0..=horizon {
        checks += 1;
        if alpha_sum_up > half {
            violations.push(format!("Θ_{k} lower bound not certified: Σα = {:e}", alpha_sum_up.to_f64()));
            break;
        }
        if !s.in_s(k) {
            alpha_sum_up = alpha_sum_up.add_rounded(&s.alpha[k], 128, Round::Up);
        }
    }
    if let Ok(thetas) = s.exact_big_thetas(horizon.min(64).min(max_exact_index(s))) {
        for (k, t) in thetas.iter().enumerate() {
            checks += 1;
            let upper = DyadicRational::pow2(-s.k_star(k));
            if !(upper.mul_pow2(-1) <= *t && *t <= upper) {
                violations.push(format!("Θ_{k} = {t} violates 2^(-k*-1) ≤ Θ_k ≤ 2^(-k*)"));
            }
        }
    }

    let good: Vec<[usize; 2]> = s.good_pairs(horizon).into_iter().map(|k| [k, k + 1]).collect();
    if good.is_empty() {
        violations.push(format!("no good pair k, k+1 ∈ S with w ≤ {} up to {horizon}", s.m_bound()));
    }

    let cps = checkpoints(horizon.max(1));
    let members: Vec<usize> = s.members().filter(|&k| k <= horizon).collect();
    let mut trends = Vec::new();
    let mk = |name: &str, target: &str, samples: Vec<TrendSample>, consistent: bool| Trend {
        name: name.into(),
        target: target.into(),
        samples,
        consistent,
    };
    // w(k)/w⁺(k) over k ∈ S.
    let ws: Vec<TrendSample> = members
        .iter()
        .filter(|&&k| s.w_plus(k) > 0)
        .map(|&k| TrendSample { k, value: s.weight[k] as f64 / s.w_plus(k) as f64 })
        .collect();
    let ws_ok = trend_decreasing(&ws);
    trends.push(mk("w(k)/w+(k), k in S", "0", thin(ws), ws_ok));
    let ratio = |f: &dyn Fn(usize) -> f64| -> Vec<TrendSample> { cps.iter().map(|&k| TrendSample { k, value: f(k) }).collect() };
    let chi = ratio(&|k| if s.w_plus(k) == 0 { f64::INFINITY } else { s.chi_plus(k) as f64 / s.w_plus(k) as f64 });
    let chi_ok = trend_decreasing(&chi);
    trends.push(mk("chi+(k)/w+(k)", "0", chi, chi_ok));
    let wk = ratio(&|k| s.w_plus(k) as f64 / k as f64);
    let wk_ok = trend_decreasing(&wk);
    trends.push(mk("w+(k)/k", "0", wk, wk_ok));
    let rs = ratio(&|k| s.r(k) as f64);
    let rs_ok = rs.last().map(|l| l.value) > rs.first().map(|f| f.value);
    trends.push(mk("r(s)", "infinity", rs, rs_ok));
    let rw = ratio(&|k| if s.w_plus(k) == 0 { f64::INFINITY } else { s.r(k) as f64 / s.w_plus(k) as f64 });
    let rw_ok = trend_decreasing(&rw);
    trends.push(mk("r(s)/w+(s)", "0", rw, rw_ok));
    let root = ratio(&|k| (s.log2_big_theta(k) / k as f64).exp2());
    let root_ok = trend_decreasing(&root.iter().map(|t| TrendSample { k: t.k, value: (0.5 - t.value).abs() }).collect::<Vec<_>>());
    let theta_root_at_horizon = root.last().map_or(f64::NAN, |t| t.value);
    trends.push(mk("Theta_k^(1/k)", "1/2", root, root_ok));

    Ok(ValidationReport {
        schedule: s.name().to_string(),
        k_cap: s.k_cap(),
        seed: s.seed(),
        horizon,
        exact_checks: checks,
        exact_violations: violations,
        trends,
        theta_root_at_horizon,
        good_pairs: good,
    })
}

fn max_exact_index(s: &Schedule) -> usize {
    (0..=s.k_cap() + 1).take_while(|&k| s.big_theta_bits(k) <= s.exact_bits()).last().unwrap_or(0)
}

fn trend_decreasing(v: &[TrendSample]) -> bool {
    match (v.len(), v.first(), v.last()) {
        (n, Some(a), Some(b)) if n >= 2 => b.value <= a.value,
        _ => true,
    }
}

fn thin(v: Vec<TrendSample>) -> Vec<TrendSample> {
    if v.len() <= 32 {
        return v;
    }
    let step = v.len().div_ceil(32);
    let last = v.last().cloned();
    let mut out: Vec<TrendSample> = v.into_iter().step_by(step).collect();
    if let Some(l) = last {
        if out.last().map(|o| o.k) != Some(l.k) {
            out.push(l);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    #[test]
    fn default_members_and_weights() {
        let s = build_default_schedule(200).unwrap();
        let first: Vec<(usize, u32)> = s.members().take(5).map(|k| (k, s.weight(k).unwrap())).collect();
        assert_eq!(first, vec![(8, 2), (27, 3), (64, 2), (65, 2), (125, 5)]);
        assert_eq!(s.w_plus(27), 2);
        assert_eq!(s.chi_plus(27), 1);
        assert_eq!(s.k_star(27), 28);
        assert_eq!(s.k_star(0), 0);
        assert_eq!(standard_weight(730), Some(2));
        assert_eq!(standard_weight(4096), Some(2));
        assert_eq!(standard_weight(4097), Some(2));
        assert_eq!(standard_weight(1000), Some(10));
        assert_eq!(standard_weight(999), None);
    }

    #[test]
    fn theta_values() {
        let s = build_default_schedule(64).unwrap();
        assert_eq!(s.theta(8).unwrap(), d("1/4"));
        let a0 = s.alpha(0).unwrap().clone();
        assert_eq!(s.theta(0).unwrap(), (DyadicRational::one() - &a0).mul_pow2(-1));
        let q = Schedule::preset("quarter", 20).unwrap();
        assert!((0..=20).all(|j| q.theta(j).unwrap() == d("1/4")));
        assert!(matches!(s.theta(65), Err(ScheduleError::OutOfRange { .. })));
    }

    #[test]
    fn big_theta_examples() {
        let q = Schedule::preset("quarter", 10).unwrap();
        assert_eq!(q.big_theta(0).unwrap().1.unwrap(), DyadicRational::one());
        assert_eq!(q.big_theta(3).unwrap().1.unwrap(), d("1/64"));
        let s = build_default_schedule(64).unwrap();
        let (log, exact) = s.big_theta(9).unwrap();
        let exact = exact.unwrap();
        let ks = s.k_star(9);
        assert!(DyadicRational::pow2(-ks - 1) <= exact && exact <= DyadicRational::pow2(-ks));
        assert!((log.to_f64() / exact.to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_recursion_and_sandwich() {
        let s = build_default_schedule(40).unwrap();
        let thetas = s.exact_big_thetas(30).unwrap();
        for k in 0..30 {
            assert_eq!(thetas[k + 1], &thetas[k] * &s.theta(k).unwrap());
            let ks = s.k_star(k);
            assert!(DyadicRational::pow2(-ks - 1) <= thetas[k] && thetas[k] <= DyadicRational::pow2(-ks));
            let rel = (s.log2_big_theta(k) - thetas[k].log2_abs()).abs() * std::f64::consts::LN_2;
            assert!(rel < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn default_validation() {
        let s = build_default_schedule(10_000).unwrap();
        let r = s.validate(10_000).unwrap();
        assert!(r.is_valid(), "{:?}", r.exact_violations);
        assert!((r.theta_root_at_horizon - 0.5).abs() < 0.01);
        assert!(r.good_pairs.contains(&[64, 65]) && r.good_pairs.contains(&[729, 730]));
    }

    #[test]
    fn broken_alpha_chain_is_reported() {
        let mut spec = ScheduleSpec::preset("empty", 4).unwrap();
        spec.alpha = AlphaSpec::List(vec![d("1/8"), d("1/4"), d("1/64"), d("1/128"), d("1/256")]);
        let s = Schedule::from_spec(spec).unwrap();
        let r = s.validate(4).unwrap();
        assert!(r.exact_violations.iter().any(|v| v.contains("α chain")));
    }

    #[test]
    fn kcap_limit() {
        assert!(matches!(build_default_schedule(MAX_K_CAP + 1), Err(ScheduleError::KCapTooLarge { .. })));
    }

    #[test]
    fn spec_round_trip() {
        let spec = ScheduleSpec::preset("default", 1000).unwrap();
        let text = spec.to_toml();
        assert_eq!(ScheduleSpec::from_toml(&text).unwrap(), spec);
        let mut custom = ScheduleSpec::preset("pair", 12).unwrap();
        custom.alpha = AlphaSpec::List((0..13).map(|j| DyadicRational::pow2(-3 - j)).collect());
        assert_eq!(ScheduleSpec::from_toml(&custom.to_toml()).unwrap(), custom);
        let err = ScheduleSpec::from_toml("name = \"x\"\nk_cap = 3\nmembers = \"all\"\nweights = 2\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn delta_table_is_strictly_decreasing() {
        let s = build_default_schedule(100).unwrap();
        for n in 0..500u128 {
            assert!(s.delta_exponent(n + 1) > s.delta_exponent(n));
        }
        assert!(s.delta_exponent(0) >= 2);
    }

    #[test]
    fn w_plus_gaps_between_members() {
        let s = build_default_schedule(10_000).unwrap();
        let m: Vec<usize> = s.members().collect();
        for w in m.windows(2) {
            assert!(s.w_plus(w[0]) + 2 <= s.w_plus(w[1]));
        }
    }
}
