//! Double-exponential (tanh-sinh) quadrature over panels whose endpoints are
//! the known singular points of the integrand.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logval::NeumaierSum;

/// Half-width of the node range in the transformed variable.
const T_MAX: f64 = 3.5;
const MAX_LEVELS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: u64,
}

impl QuadResult {
    pub const ZERO: QuadResult = QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 };

    pub fn add(&self, o: &QuadResult) -> QuadResult {
        QuadResult { value: self.value + o.value, abs_error: self.abs_error + o.abs_error, evaluations: self.evaluations + o.evaluations }
    }

    pub fn scale(&self, c: f64) -> QuadResult {
        QuadResult { value: self.value * c, abs_error: self.abs_error * c.abs(), evaluations: self.evaluations }
    }

    pub fn upper(&self) -> f64 {
        self.value + self.abs_error
    }

    pub fn lower(&self) -> f64 {
        self.value - self.abs_error
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("evaluation budget exhausted ({} evaluations, error estimate {:e})", partial.evaluations, partial.abs_error)]
    Budget { partial: QuadResult },
    #[error("refinement did not reach the tolerance (error estimate {:e})", partial.abs_error)]
    NotConverged { partial: QuadResult },
    #[error("integrand is not finite at {x}")]
    NonFinite { x: f64 },
    #[error("invalid interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

impl QuadError {
    /// Best available estimate, when one exists.
    pub fn partial(&self) -> Option<QuadResult> {
        match self {
            QuadError::Budget { partial } | QuadError::NotConverged { partial } => Some(*partial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOptions {
    /// Target absolute error for the whole integral, shared between panels by length.
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_level: u32,
    pub max_evals: u64,
    /// Bound on `|f|`, used for the truncation of the node range.
    pub sup_bound: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-10, rel_tol: 1e-12, max_level: 8, max_evals: 50_000_000, sup_bound: 1.0 }
    }
}

struct Node {
    /// `1 - tanh(π/2 sinh t)`, computed without cancellation.
    comp: f64,
    weight: f64,
}

/// `levels[0]` holds `t = 0, 1, 2, 3` and `levels[l]` the odd multiples of `2^-l`; only `t ≥ 0`.
fn node_table() -> &'static Vec<Vec<Node>> {
    static TABLE: OnceLock<Vec<Vec<Node>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let node = |t: f64| {
            let u = FRAC_PI_2 * t.sinh();
            let e = (2.0 * u).exp();
            let ch = 0.5 * (u.exp() + (-u).exp());
            Node { comp: 2.0 / (e + 1.0), weight: FRAC_PI_2 * t.cosh() / (ch * ch) }
        };
        (0..=MAX_LEVELS)
            .map(|l| {
                let h = (-(l as f64)).exp2();
                let n = (T_MAX / h) as i64;
                (0..=n).filter(|&i| l == 0 || i % 2 == 1).map(|i| node(i as f64 * h)).collect()
            })
            .collect()
    })
}

/// `(1 - tanh(π/2 sinh T)) · max weight scale`: mass of the omitted node range per unit half-length.
fn truncation_mass() -> f64 {
    let u = FRAC_PI_2 * T_MAX.sinh();
    4.0 / ((2.0 * u).exp() + 1.0)
}

struct PanelOut {
    value: f64,
    error: f64,
    evals: u64,
    converged: bool,
}

fn panel<F: Fn(f64) -> f64 + Sync>(f: &F, a: f64, b: f64, tol: f64, opts: &QuadOptions, budget: u64) -> Result<PanelOut, QuadError> {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let table = node_table();
    let mut sum = NeumaierSum::new();
    let mut abs_sum = 0.0f64;
    let mut evals = 0u64;
    let add = |n: &Node, centre: bool, sum: &mut NeumaierSum, abs_sum: &mut f64, evals: &mut u64| -> Result<(), QuadError> {
        let d = h * n.comp;
        let pts: &[f64] = if centre { &[c] } else { &[a + d, b - d] };
        for &x in pts {
            let v = f(x);
            if !v.is_finite() {
                return Err(QuadError::NonFinite { x });
            }
            sum.add(n.weight * v);
            *abs_sum += (n.weight * v).abs();
            *evals += 1;
        }
        Ok(())
    };
    for (i, n) in table[0].iter().enumerate() {
        add(n, i == 0, &mut sum, &mut abs_sum, &mut evals)?;
    }
    let mut prev = h * sum.sum();
    let mut diff = f64::INFINITY;
    let mut level = 0;
    let max_level = opts.max_level.min(MAX_LEVELS);
    while level < max_level {
        level += 1;
        for n in &table[level as usize] {
            add(n, false, &mut sum, &mut abs_sum, &mut evals)?;
        }
        let step = (-(level as f64)).exp2();
        let cur = h * step * sum.sum();
        diff = (cur - prev).abs();
        prev = cur;
        if level >= 3 && diff <= tol.max(opts.rel_tol * cur.abs()) {
            break;
        }
        if evals > budget {
            break;
        }
    }
    let step = (-(level as f64)).exp2();
    let roundoff = 8.0 * f64::EPSILON * h * step * abs_sum;
    let trunc = opts.sup_bound * h.abs() * truncation_mass();
    let converged = diff <= tol.max(opts.rel_tol * prev.abs());
    Ok(PanelOut { value: prev, error: diff + roundoff + trunc, evals, converged })
}

/// `∫_a^b f` with panels split at every breakpoint inside `(a, b)`.
pub fn integrate<F: Fn(f64) -> f64 + Sync>(f: F, a: f64, b: f64, breakpoints: &[f64], opts: &QuadOptions) -> Result<QuadResult, QuadError> {
    let pts = panel_points(a, b, breakpoints)?;
    integrate_panels(&f, &pts, opts, b - a)
}

fn panel_points(a: f64, b: f64, breakpoints: &[f64]) -> Result<Vec<f64>, QuadError> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(QuadError::BadInterval { a, b });
    }
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(breakpoints.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    Ok(pts)
}

/// Above this many panels they are evaluated in parallel; results are still summed in order.
const PARALLEL_PANELS: usize = 2048;

fn integrate_panels<F: Fn(f64) -> f64 + Sync>(f: &F, pts: &[f64], opts: &QuadOptions, total: f64) -> Result<QuadResult, QuadError> {
    let mut acc = NeumaierSum::new();
    let mut err = 0.0;
    let mut evals = 0u64;
    let mut converged = true;
    let tol_of = |l: f64, r: f64| opts.abs_tol * (r - l) / total.max(f64::MIN_POSITIVE);
    if pts.len() > PARALLEL_PANELS {
        let per_panel = opts.max_evals / (pts.len() as u64 - 1).max(1);
        let outs: Vec<Result<PanelOut, QuadError>> = pts
            .par_windows(2)
            .map(|w| {
                let (l, r) = (w[0], w[1]);
                if r <= l {
                    return Ok(PanelOut { value: 0.0, error: 0.0, evals: 0, converged: true });
                }
                panel(f, l, r, tol_of(l, r), opts, per_panel)
            })
            .collect();
        for out in outs {
            let out = out?;
            acc.add(out.value);
            err += out.error;
            evals += out.evals;
            converged &= out.converged;
        }
        if evals > opts.max_evals {
            return Err(QuadError::Budget { partial: QuadResult { value: acc.sum(), abs_error: f64::INFINITY, evaluations: evals } });
        }
    } else {
        for w in pts.windows(2) {
            let (l, r) = (w[0], w[1]);
            if r <= l {
                continue;
            }
            let out = panel(f, l, r, tol_of(l, r), opts, opts.max_evals.saturating_sub(evals))?;
            acc.add(out.value);
            err += out.error;
            evals += out.evals;
            converged &= out.converged;
            if evals > opts.max_evals {
                return Err(QuadError::Budget { partial: QuadResult { value: acc.sum(), abs_error: f64::INFINITY, evaluations: evals } });
            }
        }
    }
    let res = QuadResult { value: acc.sum(), abs_error: err, evaluations: evals };
    // A panel that stalls is fine as long as the summed estimate still meets the overall tolerance.
    if converged || err <= opts.abs_tol.max(opts.rel_tol * res.value.abs()) {
        Ok(res)
    } else {
        Err(QuadError::NotConverged { partial: res })
    }
}

/// Cumulative integrals `∫_a^{c_i} f` at increasing checkpoints `c_i ≤ b`.
pub fn integrate_profile<F: Fn(f64) -> f64 + Sync>(
    f: F,
    a: f64,
    checkpoints: &[f64],
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<Vec<QuadResult>, QuadError> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut running = QuadResult::ZERO;
    let mut lo = a;
    let total = checkpoints.last().copied().unwrap_or(a) - a;
    for &c in checkpoints {
        let pts = panel_points(lo, c, breakpoints)?;
        let sub_opts = QuadOptions { max_evals: opts.max_evals.saturating_sub(running.evaluations), ..*opts };
        let part = match integrate_panels(&f, &pts, &QuadOptions { abs_tol: opts.abs_tol * (c - lo) / total.max(f64::MIN_POSITIVE), ..sub_opts }, c - lo) {
            Ok(r) => r,
            Err(QuadError::NotConverged { partial }) => {
                running = running.add(&partial);
                return Err(QuadError::NotConverged { partial: running });
            }
            Err(e) => return Err(e),
        };
        running = running.add(&part);
        out.push(running);
        lo = c;
    }
    Ok(out)
}
