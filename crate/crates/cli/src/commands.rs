use std::io::Write;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use ssbpr::campaign::run_campaign;
use ssbpr::metrics::{analyze, cover_series, monte_carlo_summary, MonteCarloSummary, RoundReport, TrialResult};
use ssbpr::params::{checklist, forced_params, solve_params, validate, DerivedParams};
use ssbpr::rational::{format_big, format_rational, to_f64};
use ssbpr::sim::{run as simulate_once, RunOptions, Scenario};

use crate::output::{default_out, Bundle, Manifest};
use crate::plot::{Chart, Series};
use crate::{Campaign, Common, Format};

fn load(c: &Common) -> Result<Scenario> {
    let mut s = Scenario::from_path(&c.scenario).with_context(|| format!("loading scenario {}", c.scenario.display()))?;
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    if let Some(v) = c.variant {
        s.variant = v.into();
    }
    if let Some(a) = c.adversary {
        s.adversary.strategy = a;
    }
    if c.rushing {
        s.adversary.rushing = true;
    }
    s.validate_basic()?;
    Ok(s)
}

/// Parameters plus the names of whatever they violate. Without
/// `--allow-invalid` any violation is an error.
fn parameters(c: &Common, s: &Scenario) -> Result<(DerivedParams, Vec<String>)> {
    if !c.allow_invalid {
        let p = solve_params(s)?;
        validate(s, &p)?;
        return Ok((p, Vec::new()));
    }
    let p = forced_params(s)?;
    let mut violated: Vec<String> = checklist(&p).into_iter().filter(|k| !k.holds).map(|k| k.name.to_string()).collect();
    if let Err(e) = s.validate_timing(p.steps) {
        violated.push(e.to_string());
    }
    if !violated.is_empty() {
        eprintln!("warning: constraints violated: {}", violated.join(", "));
    }
    Ok((p, violated))
}

#[derive(Serialize)]
struct CheckRow {
    name: &'static str,
    relation: &'static str,
    lhs: String,
    rhs: String,
    margin: String,
    margin_approx: f64,
    holds: bool,
}

fn check_rows(p: &DerivedParams) -> Vec<CheckRow> {
    checklist(p)
        .into_iter()
        .map(|k| {
            let margin = k.margin();
            CheckRow {
                name: k.name,
                relation: k.relation,
                lhs: k.lhs.as_ref().map_or("undefined".into(), format_big),
                rhs: format_big(&k.rhs),
                margin: margin.as_ref().map_or("undefined".into(), format_big),
                margin_approx: margin.as_ref().map_or(f64::NAN, ssbpr::rational::big_to_f64),
                holds: k.holds,
            }
        })
        .collect()
}

#[derive(Serialize)]
struct ParamRow {
    name: &'static str,
    value: String,
    approx: f64,
}

#[derive(Serialize)]
struct ParamsDoc<'a> {
    params: &'a DerivedParams,
    checklist: Vec<CheckRow>,
}

#[derive(Serialize)]
struct RoundRow {
    round: u32,
    t_first: u64,
    t_last: u64,
    span: String,
    cover_before: String,
    cover_after: String,
    cover_before_approx: f64,
    cover_after_approx: f64,
    synchronized_before: bool,
    success: bool,
    continuity_ok: bool,
    status: &'static str,
}

fn round_rows(reports: &[RoundReport], stamp: &'static str) -> Vec<RoundRow> {
    reports
        .iter()
        .map(|r| RoundRow {
            round: r.round,
            t_first: r.t_first,
            t_last: r.t_last,
            span: format_rational(&r.span.0),
            cover_before: format_rational(&r.cover_before.0),
            cover_after: format_rational(&r.cover_after.0),
            cover_before_approx: to_f64(&r.cover_before.0),
            cover_after_approx: to_f64(&r.cover_after.0),
            synchronized_before: r.synchronized_before,
            success: r.success,
            continuity_ok: r.continuity_ok,
            status: stamp,
        })
        .collect()
}

fn stamp(violated: &[String]) -> &'static str {
    if violated.is_empty() {
        "ok"
    } else {
        "constraints-violated"
    }
}

pub fn run(c: &Common) -> Result<()> {
    let s = load(c)?;
    let (p, violated) = parameters(c, &s)?;
    let format = c.format.unwrap_or(Format::Csv);
    let out = c.out.clone().unwrap_or_else(|| default_out("run", s.seed));

    let trace = simulate_once(&s, &p, &RunOptions { trace_messages: true })?;
    let result = analyze(&trace, &p)?;
    let rows = round_rows(&result.rounds, stamp(&violated));
    let stride = (s.period / 20).max(1);
    let cover = cover_series(&trace, stride)?;

    let mut bundle = Bundle::default();
    bundle.add("scenario.toml", s.to_toml_string().into_bytes());
    bundle.add_json("params.json", &ParamsDoc { params: &p, checklist: check_rows(&p) })?;
    bundle.add("trace.jsonl", trace.to_jsonl());
    match format {
        Format::Json => bundle.add_json("rounds.json", &rows)?,
        _ => bundle.add_csv("rounds.csv", &rows)?,
    }
    #[derive(Serialize)]
    struct CoverRow {
        time: u64,
        cover: f64,
    }
    let cover_rows: Vec<CoverRow> = cover.iter().map(|&(time, cover)| CoverRow { time, cover }).collect();
    bundle.add_csv("cover.csv", &cover_rows)?;
    let eps1 = ssbpr::rational::big_to_f64(&p.target_error);
    let (t0, t1) = (cover.first().map_or(0.0, |x| x.0 as f64), cover.last().map_or(1.0, |x| x.0 as f64));
    let chart = Chart {
        title: format!("cover length, seed {}", s.seed),
        x_label: "time (quanta)".into(),
        y_label: "cover length (cycles)".into(),
        series: vec![
            Series { label: "nonfaulty cover".into(), points: cover.iter().map(|&(t, v)| (t as f64, v)).collect() },
            Series { label: "target error".into(), points: vec![(t0, eps1), (t1, eps1)] },
        ],
    };

    let mut manifest = Manifest::new("run", c, &s, &out, format);
    manifest.stamp_violations(&violated.iter().map(String::as_str).collect::<Vec<_>>());
    bundle.write(&out, manifest, &[("cover.svg", chart)])?;

    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "seed {}: {} rounds, stabilization round {}", s.seed, result.rounds.len(), fmt_opt(result.stabilization_round))?;
    writeln!(stdout, "precision max {} quanta, accuracy violations {}", fmt_opt(result.precision_max), result.accuracy_violations)?;
    writeln!(stdout, "status {}; outputs in {}", stamp(&violated), out.display())?;
    Ok(())
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or("none".into(), |x| x.to_string())
}

#[derive(Serialize)]
struct TrialRow {
    seed: u64,
    stabilization_round: Option<u32>,
    successes: u32,
    attempts: u32,
    precision_max: Option<u64>,
    clusters_checked: u32,
    precision_violations: u32,
    gap_min: Option<u64>,
    gap_max: Option<u64>,
    accuracy_violations: u32,
    continuity_failures: u32,
    skew_violations: u64,
    agreement_late: u64,
}

impl From<&TrialResult> for TrialRow {
    fn from(t: &TrialResult) -> Self {
        TrialRow {
            seed: t.seed,
            stabilization_round: t.stabilization_round,
            successes: t.successes,
            attempts: t.attempts,
            precision_max: t.precision_max,
            clusters_checked: t.clusters_checked,
            precision_violations: t.precision_violations,
            gap_min: t.gap_min,
            gap_max: t.gap_max,
            accuracy_violations: t.accuracy_violations,
            continuity_failures: t.continuity_failures,
            skew_violations: t.diagnostics.skew_violations,
            agreement_late: t.diagnostics.agreement_late,
        }
    }
}

#[derive(Serialize)]
struct SummaryRow {
    trials: usize,
    eta_hat: f64,
    eta_low: f64,
    eta_high: f64,
    eta: f64,
    attempts: u64,
    stabilized: usize,
    mean_stabilization_round: Option<f64>,
    precision_max: Option<u64>,
    precision_bound: f64,
    precision_violations: u64,
    gap_min: Option<u64>,
    gap_max: Option<u64>,
    accuracy_bound: f64,
    accuracy_violations: u64,
    continuity_failures: u64,
    cdf_dominates: bool,
    status: &'static str,
}

fn summary_row(m: &MonteCarloSummary, status: &'static str) -> SummaryRow {
    SummaryRow {
        trials: m.trials,
        eta_hat: m.eta_hat,
        eta_low: m.eta_low,
        eta_high: m.eta_high,
        eta: m.eta,
        attempts: m.attempts,
        stabilized: m.stabilized,
        mean_stabilization_round: m.mean_stabilization_round,
        precision_max: m.precision_max,
        precision_bound: m.precision_bound,
        precision_violations: m.precision_violations,
        gap_min: m.gap_min,
        gap_max: m.gap_max,
        accuracy_bound: m.accuracy_bound,
        accuracy_violations: m.accuracy_violations,
        continuity_failures: m.continuity_failures,
        cdf_dominates: m.cdf.iter().all(|p| p.dominates()),
        status,
    }
}

pub fn montecarlo(c: &Campaign) -> Result<()> {
    let common = &c.common;
    let s = load(common)?;
    let (p, violated) = parameters(common, &s)?;
    let format = common.format.unwrap_or(Format::Csv);
    let out = common.out.clone().unwrap_or_else(|| default_out("montecarlo", s.seed));
    let trials = c.trials as usize;

    let mut manifest = Manifest::new("montecarlo", common, &s, &out, format);
    manifest.seeds = Some([s.seed, s.seed.wrapping_add(c.trials - 1)]);
    manifest.trials = Some(trials);
    manifest.workers = Some(c.workers as usize);
    manifest.stamp_violations(&violated.iter().map(String::as_str).collect::<Vec<_>>());

    let results = match run_campaign(&s, &p, trials, c.workers as usize) {
        Ok(r) => r,
        Err(e) => {
            // leave a flagged record of the attempt, but no results
            let mut bundle = Bundle::default();
            bundle.add("scenario.toml", s.to_toml_string().into_bytes());
            manifest.status = "aborted".into();
            manifest.error = Some(e.to_string());
            bundle.write(&out, manifest, &[])?;
            bail!("campaign aborted: {e}");
        }
    };
    let summary = monte_carlo_summary(&results, &p, s.rounds)?;

    let mut bundle = Bundle::default();
    bundle.add("scenario.toml", s.to_toml_string().into_bytes());
    bundle.add_json("params.json", &ParamsDoc { params: &p, checklist: check_rows(&p) })?;
    let rows: Vec<TrialRow> = results.iter().map(TrialRow::from).collect();
    bundle.add_csv("trials.csv", &rows)?;
    let status = stamp(&violated);
    match format {
        Format::Json => bundle.add_json("summary.json", &(&summary, status))?,
        _ => bundle.add_csv("summary.csv", &[summary_row(&summary, status)])?,
    }
    #[derive(Serialize)]
    struct CdfRow {
        k: u32,
        empirical: f64,
        theory: f64,
        sigma: f64,
        lower: f64,
        dominates: bool,
    }
    let cdf: Vec<CdfRow> = summary
        .cdf
        .iter()
        .map(|x| CdfRow {
            k: x.k,
            empirical: x.empirical,
            theory: x.theory,
            sigma: x.sigma,
            lower: x.theory - 3.0 * x.sigma,
            dominates: x.dominates(),
        })
        .collect();
    bundle.add_csv("cdf.csv", &cdf)?;
    let chart = Chart {
        title: format!("stabilization CDF, {} trials", trials),
        x_label: "round".into(),
        y_label: "P(stabilized by round)".into(),
        series: vec![
            Series { label: "empirical".into(), points: cdf.iter().map(|x| (x.k as f64, x.empirical)).collect() },
            Series { label: "1-(1-eta)^k".into(), points: cdf.iter().map(|x| (x.k as f64, x.theory)).collect() },
        ],
    };
    bundle.write(&out, manifest, &[("cdf.svg", chart)])?;

    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "eta_hat {:.4} [{:.4}, {:.4}] over {} rounds; guaranteed {:.4}",
        summary.eta_hat, summary.eta_low, summary.eta_high, summary.attempts, summary.eta
    )?;
    writeln!(
        stdout,
        "stabilized {}/{}; mean stabilization round {}; precision max {} (bound {:.1})",
        summary.stabilized,
        summary.trials,
        summary.mean_stabilization_round.map_or("none".into(), |m| format!("{m:.3}")),
        fmt_opt(summary.precision_max),
        summary.precision_bound
    )?;
    writeln!(stdout, "status {status}; outputs in {}", out.display())?;
    Ok(())
}

pub fn solve(c: &Common) -> Result<()> {
    let s = load(c)?;
    let p = solve_params(&s)?;
    let format = c.format.unwrap_or(Format::Table);
    let rows: Vec<ParamRow> = p.table().into_iter().map(|(name, value, approx)| ParamRow { name, value, approx }).collect();
    let checks = check_rows(&p);

    let text = match format {
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(&ParamsDoc { params: &p, checklist: checks })?;
            v.push(b'\n');
            v
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["kind", "name", "value", "approx", "relation", "rhs", "margin", "holds"])?;
            for r in &rows {
                w.write_record(["param", r.name, &r.value, &r.approx.to_string(), "", "", "", ""])?;
            }
            for k in &checks {
                w.write_record([
                    "check",
                    k.name,
                    &k.lhs,
                    &k.margin_approx.to_string(),
                    k.relation,
                    &k.rhs,
                    &k.margin,
                    &k.holds.to_string(),
                ])?;
            }
            w.into_inner().context("flushing csv")?
        }
        Format::Table => {
            let mut t = String::new();
            for r in &rows {
                t.push_str(&format!("{:<22} {:>14.6e}  {}\n", r.name, r.approx, r.value));
            }
            t.push('\n');
            for k in &checks {
                t.push_str(&format!(
                    "{:<34} {:<4} margin {:>12.4e}  {}\n",
                    k.name,
                    k.relation,
                    k.margin_approx,
                    if k.holds { "ok" } else { "VIOLATED" }
                ));
            }
            t.into_bytes()
        }
    };
    std::io::stdout().write_all(&text)?;

    let timing = validate(&s, &p);
    if let Some(out) = &c.out {
        let mut bundle = Bundle::default();
        bundle.add("scenario.toml", s.to_toml_string().into_bytes());
        let name = match format {
            Format::Json => "params.json",
            Format::Csv => "params.csv",
            Format::Table => "params.txt",
        };
        bundle.add(name, text);
        let mut manifest = Manifest::new("solve", c, &s, out, format);
        if let Err(e) = &timing {
            manifest.status = "constraints-violated".into();
            manifest.violated = vec![e.to_string()];
        }
        bundle.write(out, manifest, &[])?;
    }
    timing?;
    Ok(())
}
