//! One function per subcommand, each returning a [`Report`].

use cantor_ft::cantor::{check_generations, generations, total_white_length};
use cantor_ft::cosineineq::{delta_search, lemma31_sweep, Lemma31Record, PerturbedRecord};
use cantor_ft::dimension::dimension_report;
use cantor_ft::fourier::{decay_exponent_scan, schedule_measure_ft, FtValue, SeriesTable, XiGrid};
use cantor_ft::norms::norm_report;
use cantor_ft::oscillation::{divergence_witness, g_eval, SignValue};
use cantor_ft::params::validate_schedule;
use cantor_ft::quad::QuadOptions;
use cantor_ft::suite::{self, CriterionResult};
use cantor_ft::{DyadicRational, Schedule, ScheduleSpec, Verdict};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, RunConfig, VerifyCommand};
use crate::report::{Report, Table};
use crate::CliError;

/// Largest generation `construct` will materialize.
const CONSTRUCT_LIMIT: usize = 1 << 24;

fn num(x: f64) -> String {
    x.to_string()
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

fn quad_options(c: &RunConfig) -> QuadOptions {
    QuadOptions {
        abs_tol: c.tolerances.abs_tol,
        rel_tol: c.tolerances.rel_tol,
        max_level: c.tolerances.max_level,
        max_evals: c.budget.limits().max_evals,
        sup_bound: 1.0,
    }
}

/// `a,b,c` as a point of `R^d`.
pub fn parse_point(text: &str) -> Result<Vec<DyadicRational>, CliError> {
    text.split(',')
        .map(|c| c.trim().parse::<DyadicRational>().map_err(|e| CliError::Usage(format!("coordinate `{}`: {e}", c.trim()))))
        .collect()
}

/// `x1,x2,...`, `log:min:max:n` or `pow:base:kmin:kmax`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("frequency grid `{text}`: expected `x1,x2,...`, `log:min:max:n` or `pow:base:kmin:kmax`"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let grid = match parts.as_slice() {
        ["log", a, b, n] => {
            let (min, max, n) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?);
            if !(min > 0.0 && max >= min && f64::is_finite(max)) {
                return Err(bad());
            }
            XiGrid::Log { min, max, n }.points()
        }
        ["pow", b, lo, hi] => XiGrid::Powers {
            base: b.parse().map_err(|_| bad())?,
            kmin: lo.parse().map_err(|_| bad())?,
            kmax: hi.parse().map_err(|_| bad())?,
        }
        .points(),
        [list] => list.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

fn verdict_of(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    verdicts.into_iter().fold(Verdict::Verified, Verdict::combine)
}

fn counts(verdicts: impl IntoIterator<Item = Verdict>) -> serde_json::Value {
    let (mut v, mut x, mut i) = (0u64, 0u64, 0u64);
    for r in verdicts {
        match r {
            Verdict::Verified => v += 1,
            Verdict::Violated => x += 1,
            Verdict::Inconclusive => i += 1,
        }
    }
    json!({ "verified": v, "violated": x, "inconclusive": i })
}

fn verdict_name(v: Verdict) -> String {
    match v {
        Verdict::Verified => "verified",
        Verdict::Violated => "violated",
        Verdict::Inconclusive => "inconclusive",
    }
    .to_string()
}

/// Runs the configured command; returns the schedule it ran on and its report.
pub fn execute(c: &RunConfig) -> Result<(ScheduleSpec, Report), CliError> {
    let command = c.command.as_ref().ok_or_else(|| CliError::Usage("no subcommand given on the command line or in the config".into()))?;
    if let Command::Verify(VerifyCommand::All(_)) = command {
        if c.schedule.file.is_some() || c.schedule.preset != "default" {
            return Err(CliError::Usage("verify all runs on its own fixed schedules; use the default preset".into()));
        }
        let spec = ScheduleSpec::preset("default", c.schedule.k_cap).map_err(|e| CliError::Input(e.to_string()))?;
        return Ok((spec, verify_all(c)));
    }
    let (spec, s) = c.schedule.build()?;
    let report = match command {
        Command::Construct(a) => construct(&s, a.k)?,
        Command::EvalG(a) => eval_g(&s, &a.point, a.depth)?,
        Command::EvalFt(a) => eval_ft(&s, &a.xi_grid, a.kmax, c.tolerances.tail_tol)?,
        Command::Norms(a) => norms(&s, a.p, a.xi_max, a.kmax, &quad_options(c))?,
        Command::Dimension(a) => dimension(&s, a.kmax, a.d, a.eps)?,
        Command::Lebesgue(a) => lebesgue(&s, &a.point, &a.eps, a.count, a.horizon)?,
        Command::Decay(a) => decay(&s, &a.beta, &a.xi_grid, a.kmax)?,
        Command::Verify(VerifyCommand::Lemma31(a)) => lemma31(a.n, &a.p, &quad_options(c))?,
        Command::Verify(VerifyCommand::Lemma32(a)) => lemma32(a.n, a.p0, a.eps, a.samples, a.seed.unwrap_or(c.seed), &quad_options(c))?,
        Command::Verify(VerifyCommand::All(_)) => unreachable!(),
        Command::ValidateSchedule(a) => validate(&s, a.horizon)?,
    };
    Ok((spec, report))
}

fn construct(s: &Schedule, k: usize) -> Result<Report, CliError> {
    if k > s.k_cap() {
        return Err(CliError::Usage(format!("generation {k} is beyond k_cap = {}", s.k_cap())));
    }
    let gens = generations(s, k, CONSTRUCT_LIMIT).map_err(compute)?;
    let violations = check_generations(s, &gens).map_err(compute)?;
    let mut t = Table::new(&["generation", "kind", "left", "right"]);
    let mut summary = Vec::new();
    for g in &gens {
        for w in &g.whites {
            t.push([g.k.to_string(), "white".into(), w.left.to_string(), w.right.to_string()]);
        }
        for b in &g.blacks {
            t.push([g.k.to_string(), "black".into(), b.left.to_string(), b.right.to_string()]);
        }
        let white_length = total_white_length(s, g.k).map_err(compute)?;
        summary.push(json!({ "generation": g.k, "whites": g.whites.len(), "blacks": g.blacks.len(), "white_length": white_length }));
    }
    let verdict = Verdict::from_bool(violations.is_empty());
    let text = format!("generations 0..={k}: {} intervals, {} identity violations", t.rows.len(), violations.len());
    Ok(Report::new(verdict, text, &json!({ "generations": summary, "violations": violations, "exact": true })).with_table(t).prefer_csv())
}

fn eval_g(s: &Schedule, point: &str, depth: usize) -> Result<Report, CliError> {
    let x = parse_point(point)?;
    let v = g_eval(s, &x, depth).map_err(compute)?;
    let (verdict, text) = match v {
        SignValue::Value(g) => (Verdict::Verified, format!("g = {g}")),
        SignValue::Undetermined => (Verdict::Inconclusive, format!("the point is in every white interval through generation {depth}")),
    };
    Ok(Report::new(verdict, text, &json!({ "point": x, "depth": depth, "value": v, "exact": true })))
}

#[derive(Serialize)]
struct FtRow {
    xi: f64,
    #[serde(flatten)]
    value: FtValue,
}

fn eval_ft(s: &Schedule, grid: &str, kmax: Option<usize>, tail_tol: f64) -> Result<Report, CliError> {
    let xs = parse_grid(grid)?;
    let (table, flagged) = match kmax {
        Some(k) if k > s.k_cap() => return Err(CliError::Usage(format!("kmax {k} is beyond k_cap = {}", s.k_cap()))),
        Some(k) => (SeriesTable::new(s, k), false),
        None => SeriesTable::auto(s, tail_tol),
    };
    let rows: Vec<FtRow> = xs.par_iter().map(|&xi| FtRow { xi, value: FtValue { inconclusive: flagged, ..table.ghat1(xi) } }).collect();
    let mut t = Table::new(&["xi", "value", "tail_bound", "kmax"]);
    for r in &rows {
        t.push([num(r.xi), num(r.value.value), num(r.value.tail_bound), r.value.kmax.to_string()]);
    }
    let verdict = if flagged { Verdict::Inconclusive } else { Verdict::Verified };
    let text = format!("{} frequencies, kmax = {}, tail bound {:e}", rows.len(), table.kmax(), table.ghat_tail());
    Ok(Report::new(verdict, text, &json!({ "rows": rows })).with_table(t).prefer_csv())
}

fn norms(s: &Schedule, p: f64, xi_max: f64, kmax: usize, opts: &QuadOptions) -> Result<Report, CliError> {
    let r = norm_report(s, p, xi_max, kmax, opts).map_err(compute)?;
    let mut t = Table::new(&["k", "scale", "p", "value", "abs_error", "bound", "dominated"]);
    for q in &r.scale_integrals {
        let (v, e) = q.result.map_or((String::new(), String::new()), |x| (num(x.value), num(x.abs_error)));
        t.push([q.k.to_string(), q.scale.to_string(), num(q.p), v, e, num(q.bound), verdict_name(q.dominated)]);
    }
    let monotone = Verdict::from_bool(r.profile_monotone);
    let verdict = verdict_of(r.scale_integrals.iter().map(|q| q.dominated).chain([r.minkowski.verdict, monotone]));
    let text = format!(
        "‖H‖_p on [0, {xi_max}] = {:.6} against Σ A_k = {:.6} (constant {:.4}), profile monotone: {}",
        r.minkowski.norm, r.minkowski.sum, r.minkowski.empirical_constant, r.profile_monotone
    );
    Ok(Report::new(verdict, text, &r).with_table(t))
}

fn dimension(s: &Schedule, kmax: usize, d: u32, eps: f64) -> Result<Report, CliError> {
    let r = dimension_report(s, kmax, d, eps).map_err(compute)?;
    let mut t = Table::new(&["k", "log2_theta", "log2_count", "dim_estimate", "frostman_worst_ratio", "frostman_holds"]);
    for row in &r.rows {
        t.push([
            row.k.to_string(),
            num(row.log2_theta),
            num(row.log2_count),
            num(row.dim_estimate),
            num(row.frostman_worst_ratio),
            row.frostman_holds.to_string(),
        ]);
    }
    let verdict = verdict_of(r.rows.iter().map(|x| Verdict::from_bool(x.frostman_holds)));
    let last = r.rows.last().map_or(f64::NAN, |x| x.dim_estimate);
    let text = format!("k ≤ {kmax}, d = {d}: covering estimate {last:.6} at k = {kmax}");
    Ok(Report::new(verdict, text, &r).with_table(t))
}

fn lebesgue(s: &Schedule, point: &str, eps: &str, count: usize, horizon: Option<usize>) -> Result<Report, CliError> {
    let x = parse_point(point)?;
    let eps: DyadicRational = eps.trim().parse().map_err(|e| CliError::Usage(format!("eps `{eps}`: {e}")))?;
    let w = divergence_witness(s, &x, &eps, count, horizon.unwrap_or(s.k_cap())).map_err(compute)?;
    let pairs: Vec<String> = w.pairs.iter().map(|p| format!("({}, {})", p.k, p.k_prime)).collect();
    let text = format!("{} of {count} pairs found: {}", w.pairs.len(), pairs.join(", "));
    Ok(Report::new(w.verdict, text, &w))
}

fn decay(s: &Schedule, betas: &[f64], grid: &str, kmax: usize) -> Result<Report, CliError> {
    if kmax > s.k_cap() {
        return Err(CliError::Usage(format!("kmax {kmax} is beyond k_cap = {}", s.k_cap())));
    }
    let xs = parse_grid(grid)?;
    let rows = decay_exponent_scan(|xi| schedule_measure_ft(s, xi, kmax).value, betas, &xs);
    let mut t = Table::new(&["beta", "xi_max", "sup"]);
    for r in &rows {
        for (x, v) in &r.sups {
            t.push([num(r.beta), num(*x), num(*v)]);
        }
    }
    let growing: Vec<String> = rows.iter().filter(|r| r.growing).map(|r| num(r.beta)).collect();
    let text = format!("diagnostic only; growing for β in [{}]", growing.join(", "));
    Ok(Report::new(Verdict::Verified, text, &json!({ "kmax": kmax, "rows": rows })).with_table(t))
}

fn set_string(set: &[u32]) -> String {
    let items: Vec<String> = set.iter().map(u32::to_string).collect();
    format!("{{{}}}", items.join(" "))
}

fn lemma31(n: u32, ps: &[f64], opts: &QuadOptions) -> Result<Report, CliError> {
    if n == 0 || n > 20 {
        return Err(CliError::Usage(format!("n = {n}: expected 1 ≤ n ≤ 20")));
    }
    let recs: Vec<Lemma31Record> = lemma31_sweep(n, ps, opts).map_err(compute)?;
    let mut t = Table::new(&["set", "n", "p", "size", "components", "value", "abs_error", "bound", "evaluations", "verdict"]);
    for r in &recs {
        t.push([
            set_string(&r.set),
            r.n.to_string(),
            num(r.p),
            r.size.to_string(),
            r.components.to_string(),
            num(r.value),
            num(r.abs_error),
            num(r.bound),
            r.evaluations.to_string(),
            verdict_name(r.verdict),
        ]);
    }
    let worst = recs.iter().map(|r| r.value / r.bound).fold(0.0, f64::max);
    let c = counts(recs.iter().map(|r| r.verdict));
    let text = format!("n = {n}, {} records: {c}, worst value/bound {worst:.6}", recs.len());
    let body = json!({ "n": n, "p": ps, "counts": c, "worst_ratio": worst, "records": recs.len() });
    Ok(Report::new(verdict_of(recs.iter().map(|r| r.verdict)), text, &body).with_table(t))
}

fn lemma32(n: u32, p0: f64, eps: f64, samples: usize, seed: u64, opts: &QuadOptions) -> Result<Report, CliError> {
    if n == 0 || n > 12 {
        return Err(CliError::Usage(format!("n = {n}: expected 1 ≤ n ≤ 12")));
    }
    let r = delta_search(n, p0, eps, samples, seed, opts).map_err(compute)?;
    let mut t = Table::new(&["set", "n", "p", "phases", "value", "abs_error", "bound", "verdict"]);
    let row = |x: &PerturbedRecord| {
        let phases: Vec<String> = x.phases.iter().map(|&f| num(f)).collect();
        [
            set_string(&x.set),
            x.n.to_string(),
            num(x.p),
            phases.join(" "),
            num(x.value),
            num(x.abs_error),
            num(x.bound),
            verdict_name(x.verdict),
        ]
    };
    for x in &r.failures_at_larger_delta {
        t.push(row(x));
    }
    let verdict = if r.fallback { Verdict::Inconclusive } else { Verdict::Verified };
    let text = format!("n = {n}: δ = 2^-{} survived {} checks{}", r.exponent, r.checks, if r.fallback { " (fallback)" } else { "" });
    Ok(Report::new(verdict, text, &r).with_table(t))
}

fn verify_all(c: &RunConfig) -> Report {
    let mut results: Vec<CriterionResult> = Vec::new();
    for id in 1..=suite::CRITERIA {
        let r = suite::run_criterion(id, c.budget);
        eprintln!("{}", r.line());
        results.push(r);
    }
    let mut t = Table::new(&["id", "title", "verdict", "detail"]);
    for r in &results {
        t.push([r.id.to_string(), r.title.clone(), verdict_name(r.verdict), r.detail.clone()]);
    }
    let passed = results.iter().filter(|r| r.passed()).count();
    let text = format!("{passed} of {} criteria passed", results.len());
    let body = json!({ "budget": c.budget, "limits": c.budget.limits(), "criteria": results });
    Report::new(verdict_of(results.iter().map(|r| r.verdict)), text, &body).with_table(t)
}

fn validate(s: &Schedule, horizon: Option<usize>) -> Result<Report, CliError> {
    let r = validate_schedule(s, horizon.unwrap_or(s.k_cap())).map_err(compute)?;
    let inconsistent: Vec<&str> = r.trends.iter().filter(|t| !t.consistent).map(|t| t.name.as_str()).collect();
    let text = format!(
        "{} exact checks, {} violations; trends off target: [{}]",
        r.exact_checks,
        r.exact_violations.len(),
        inconsistent.join(", ")
    );
    Ok(Report::new(Verdict::from_bool(r.is_valid()), text, &r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0").unwrap(), vec![0.0]);
        assert_eq!(parse_grid("1, 2.5").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_grid("pow:2:0:3").unwrap(), vec![1.0, 2.0, 4.0, 8.0]);
        let g = parse_grid("log:1:100:3").unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        for bad in ["", "log:0:1:3", "pow:2:x:1", "a,b", "lin:1:2:3"] {
            assert!(matches!(parse_grid(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn points() {
        let x = parse_point("1/2, 3/2^4").unwrap();
        assert_eq!(x[1], DyadicRational::new(3, -4));
        assert!(parse_point("1/2,").is_err());
    }
}
