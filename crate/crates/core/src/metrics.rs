//! Offline trace analysis.
//!
//! Nonfaulty phases are rebuilt from the trace alone (initial clock state
//! plus every adjustment), so every quantity here can be recomputed from a
//! persisted trace file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clock::{AdjustEffect, NodeClock};
use crate::error::{Error, Result};
use crate::geometry::{arc_shift_sum, cover_arc, Arc, RingPoint};
use crate::params::{ceil_u64, floor_u64, DerivedParams};
use crate::rational::{from_big, to_f64, Exact, Rational};
use crate::resync::NodeId;
use crate::sim::trace::{Diagnostics, Trace, TraceRecord};

/// Nonfaulty clocks reconstructed from a trace.
#[derive(Clone, Debug)]
pub struct PhaseReplay {
    pub period: u64,
    pub horizon: u64,
    pub nodes: Vec<NodeId>,
    init: Vec<NodeClock>,
    /// `(time, index into nodes, delta)` in trace order.
    adjusts: Vec<(u64, usize, i64)>,
}

impl PhaseReplay {
    pub fn from_trace(trace: &Trace) -> Result<Self> {
        let (period, tau_max, horizon) = match trace.header()? {
            TraceRecord::Header { period, tau_max, horizon, .. } => (*period, *tau_max, *horizon),
            _ => unreachable!("header() checks the variant"),
        };
        let mut nodes = Vec::new();
        let mut init = Vec::new();
        let mut index = BTreeMap::new();
        let mut adjusts = Vec::new();
        for r in &trace.records {
            match r {
                TraceRecord::Init { node, tau, tau_sch, rate, carry } => {
                    index.insert(*node, nodes.len());
                    nodes.push(*node);
                    init.push(NodeClock::new(*tau, *tau_sch, rate.0, carry.0, 0, period, tau_max));
                }
                TraceRecord::Adjust { time, node, delta, .. } => {
                    let i = *index
                        .get(node)
                        .ok_or_else(|| Error::Trace(format!("adjustment for unknown node {node}")))?;
                    adjusts.push((*time, i, *delta));
                }
                _ => {}
            }
        }
        if nodes.is_empty() {
            return Err(Error::Trace("trace has no nonfaulty nodes".into()));
        }
        Ok(PhaseReplay { period, horizon, nodes, init, adjusts })
    }

    pub fn cursor(&self) -> ReplayCursor<'_> {
        ReplayCursor { replay: self, clocks: self.init.clone(), next: 0, now: 0, pulses: Vec::new() }
    }

    /// Shortest cover length of the nonfaulty phases at `t`, after every
    /// adjustment made at `t`.
    pub fn cover_len_at(&self, t: u64) -> Result<Rational> {
        let mut c = self.cursor();
        c.seek(t, true)?;
        Ok(c.cover()?.len())
    }
}

/// Forward-only replay position.
pub struct ReplayCursor<'a> {
    replay: &'a PhaseReplay,
    clocks: Vec<NodeClock>,
    next: usize,
    now: u64,
    /// Pulses emitted so far, `(time, node)`.
    pub pulses: Vec<(u64, NodeId)>,
}

impl ReplayCursor<'_> {
    /// Moves to `t`; adjustments at exactly `t` are applied only when
    /// `inclusive` is set.
    pub fn seek(&mut self, t: u64, inclusive: bool) -> Result<()> {
        let r = self.replay;
        if t > r.horizon {
            return Err(Error::OutsideHorizon { t, horizon: r.horizon });
        }
        assert!(t >= self.now, "replay cursor only moves forward");
        while let Some(&(at, i, delta)) = r.adjusts.get(self.next) {
            if at > t || (at == t && !inclusive) {
                break;
            }
            let node = r.nodes[i];
            for p in self.clocks[i].advance_to(at) {
                self.pulses.push((p, node));
            }
            if self.clocks[i].apply_adjustment(delta) == AdjustEffect::PulseNow {
                self.pulses.push((at, node));
            }
            self.next += 1;
        }
        for (i, c) in self.clocks.iter_mut().enumerate() {
            for p in c.advance_to(t) {
                self.pulses.push((p, r.nodes[i]));
            }
        }
        self.now = t;
        Ok(())
    }

    pub fn phases(&self) -> Vec<RingPoint> {
        let t = self.replay.period as i128;
        self.clocks.iter().map(|c| RingPoint::from_ticks(c.read_phase() as i128, t)).collect()
    }

    pub fn cover(&self) -> Result<Arc> {
        cover_arc(&self.phases())
    }
}

/// Shortest cover length of the nonfaulty phases at `t`.
pub fn cover_len_at(trace: &Trace, t: u64) -> Result<Rational> {
    PhaseReplay::from_trace(trace)?.cover_len_at(t)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u32,
    pub t_first: u64,
    pub t_last: u64,
    /// `(t_last − t_first) / T`.
    pub span: Exact,
    pub cover_before: Exact,
    pub cover_after: Exact,
    /// The round started inside the target cover length.
    pub synchronized_before: bool,
    pub success: bool,
    pub continuity_ok: bool,
}

/// Radius of the continuity neighbourhood, `ρ·δ_s + ε1'`.
fn continuity_radius(p: &DerivedParams) -> Result<Rational> {
    let r = &p.drift * &p.step_skew + &p.adjust_bound;
    from_big(&r).ok_or(Error::Overflow("continuity radius"))
}

pub fn round_reports(trace: &Trace, p: &DerivedParams) -> Result<Vec<RoundReport>> {
    let replay = PhaseReplay::from_trace(trace)?;
    let eps1 = p.target_error_exact()?;
    let radius = continuity_radius(p)?;
    let honest = replay.nodes.len();
    let mut spans: BTreeMap<u32, (u64, u64, usize)> = BTreeMap::new();
    for r in &trace.records {
        if let TraceRecord::Adjust { time, round, .. } = r {
            let e = spans.entry(*round).or_insert((*time, *time, 0));
            e.0 = e.0.min(*time);
            e.1 = e.1.max(*time);
            e.2 += 1;
        }
    }
    let mut cursor = replay.cursor();
    let mut out = Vec::new();
    for (round, (t_first, t_last, count)) in spans {
        if count != honest {
            // a round cut off by the horizon
            continue;
        }
        cursor.seek(t_first, false)?;
        let before = cursor.cover()?;
        cursor.seek(t_last, true)?;
        let after = cursor.cover()?;
        let span = Rational::new((t_last - t_first) as i128, replay.period as i128);
        let shift = RingPoint::new(span - span.trunc());
        let reach = arc_shift_sum(before, shift, radius);
        out.push(RoundReport {
            round,
            t_first,
            t_last,
            span: Exact(span),
            cover_before: Exact(before.len()),
            cover_after: Exact(after.len()),
            synchronized_before: before.len() <= eps1,
            success: after.len() <= eps1,
            continuity_ok: after.is_subset_of(&reach),
        });
    }
    Ok(out)
}

/// First round whose success persists to the end of the horizon (1-based).
pub fn stabilization_round(reports: &[RoundReport]) -> Option<u32> {
    let mut first = None;
    for r in reports {
        match (r.success, first) {
            (true, None) => first = Some(r.round),
            (false, _) => first = None,
            _ => {}
        }
    }
    first
}

/// Splits pulses into per-cycle clusters at gaps wider than half a cycle.
pub fn pulse_clusters(pulses: &[(u64, NodeId)], period: u64) -> Vec<Vec<(u64, NodeId)>> {
    let mut sorted = pulses.to_vec();
    sorted.sort();
    let mut out: Vec<Vec<(u64, NodeId)>> = Vec::new();
    for p in sorted {
        match out.last_mut() {
            Some(c) if p.0 - c.last().expect("non-empty").0 <= period / 2 => c.push(p),
            _ => out.push(vec![p]),
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub rounds: Vec<RoundReport>,
    pub stabilization_round: Option<u32>,
    /// Successful rounds among those that started unsynchronized.
    pub successes: u32,
    pub attempts: u32,
    /// Widest complete post-stabilization pulse cluster, quanta.
    pub precision_max: Option<u64>,
    pub clusters_checked: u32,
    pub precision_violations: u32,
    pub gap_min: Option<u64>,
    pub gap_max: Option<u64>,
    pub accuracy_violations: u32,
    pub continuity_failures: u32,
    pub constraints_ok: bool,
    pub diagnostics: Diagnostics,
}

/// Everything the Monte Carlo summary needs from one trace.
pub fn analyze(trace: &Trace, p: &DerivedParams) -> Result<TrialResult> {
    let (seed, constraints_ok) = match trace.header()? {
        TraceRecord::Header { seed, constraints_ok, .. } => (*seed, *constraints_ok),
        _ => unreachable!("header() checks the variant"),
    };
    let replay = PhaseReplay::from_trace(trace)?;
    let rounds = round_reports(trace, p)?;
    let stab = stabilization_round(&rounds);
    let mut res = TrialResult {
        seed,
        stabilization_round: stab,
        constraints_ok,
        diagnostics: trace.diagnostics().cloned().unwrap_or_default(),
        ..Default::default()
    };
    for r in &rounds {
        if !r.synchronized_before {
            res.attempts += 1;
            res.successes += r.success as u32;
        } else if !r.continuity_ok {
            res.continuity_failures += 1;
        }
    }
    if let Some(k) = stab {
        let t_stab = rounds.iter().find(|r| r.round == k).expect("reported round").t_last;
        let pulses: Vec<(u64, NodeId)> = trace
            .records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Pulse { time, node } if *time > t_stab => Some((*time, *node)),
                _ => None,
            })
            .collect();
        // discretization of pulse instants adds at most one quantum
        let pi = floor_u64(&p.precision) + 1;
        for c in pulse_clusters(&pulses, replay.period) {
            let mut who: Vec<NodeId> = c.iter().map(|x| x.1).collect();
            who.sort();
            who.dedup();
            if who.len() != replay.nodes.len() || c.len() != who.len() {
                continue;
            }
            let width = c.last().expect("non-empty").0 - c[0].0;
            res.clusters_checked += 1;
            res.precision_max = Some(res.precision_max.map_or(width, |m: u64| m.max(width)));
            res.precision_violations += (width > pi) as u32;
        }
        let t = replay.period;
        let lo = t.saturating_sub(ceil_u64(&p.accuracy));
        let hi = t + floor_u64(&p.accuracy);
        for &q in &replay.nodes {
            let own: Vec<u64> = pulses.iter().filter(|x| x.1 == q).map(|x| x.0).collect();
            for w in own.windows(2) {
                let g = w[1] - w[0];
                res.gap_min = Some(res.gap_min.map_or(g, |m: u64| m.min(g)));
                res.gap_max = Some(res.gap_max.map_or(g, |m: u64| m.max(g)));
                res.accuracy_violations += (g < lo || g > hi) as u32;
            }
        }
    }
    res.rounds = rounds;
    Ok(res)
}

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub k: u32,
    pub empirical: f64,
    pub theory: f64,
    /// `sqrt(p(1−p)/N)` at the theoretical `p`.
    pub sigma: f64,
}

impl CdfPoint {
    pub fn dominates(&self) -> bool {
        self.empirical >= self.theory - 3.0 * self.sigma
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub successes: u64,
    pub attempts: u64,
    pub eta_hat: f64,
    pub eta_low: f64,
    pub eta_high: f64,
    pub eta: f64,
    pub stabilized: usize,
    pub mean_stabilization_round: Option<f64>,
    pub cdf: Vec<CdfPoint>,
    pub precision_max: Option<u64>,
    pub precision_bound: f64,
    pub precision_violations: u64,
    pub gap_min: Option<u64>,
    pub gap_max: Option<u64>,
    pub accuracy_bound: f64,
    pub accuracy_violations: u64,
    pub continuity_failures: u64,
    pub constraints_ok: bool,
    pub diagnostics: Diagnostics,
}

fn add_diag(a: &mut Diagnostics, b: &Diagnostics) {
    a.skew_violations += b.skew_violations;
    a.late_nonfaulty += b.late_nonfaulty;
    a.missing_nonfaulty += b.missing_nonfaulty;
    a.duplicates += b.duplicates;
    a.malformed += b.malformed;
    a.unknown_sender += b.unknown_sender;
    a.overlaps += b.overlaps;
    a.agreement_late += b.agreement_late;
    a.stale_dropped += b.stale_dropped;
    a.max_step_skew = a.max_step_skew.max(b.max_step_skew);
}

pub fn monte_carlo_summary(trials: &[TrialResult], p: &DerivedParams, horizon_rounds: u32) -> Result<MonteCarloSummary> {
    if trials.len() < 2 {
        return Err(Error::Config("a Monte Carlo summary needs at least two trials".into()));
    }
    let n = trials.len();
    let successes: u64 = trials.iter().map(|t| t.successes as u64).sum();
    let attempts: u64 = trials.iter().map(|t| t.attempts as u64).sum();
    let eta_hat = if attempts == 0 { 1.0 } else { successes as f64 / attempts as f64 };
    let (eta_low, eta_high) = wilson(successes, attempts, 1.96);
    let eta = crate::rational::big_to_f64(&p.success_probability);
    let stab: Vec<u32> = trials.iter().filter_map(|t| t.stabilization_round).collect();
    let cdf = (1..=horizon_rounds)
        .map(|k| {
            let hit = stab.iter().filter(|&&s| s <= k).count();
            let theory = 1.0 - (1.0 - eta).powi(k as i32);
            CdfPoint {
                k,
                empirical: hit as f64 / n as f64,
                theory,
                sigma: (theory * (1.0 - theory) / n as f64).sqrt(),
            }
        })
        .collect();
    let mut diagnostics = Diagnostics::default();
    for t in trials {
        add_diag(&mut diagnostics, &t.diagnostics);
    }
    Ok(MonteCarloSummary {
        trials: n,
        successes,
        attempts,
        eta_hat,
        eta_low,
        eta_high,
        eta,
        stabilized: stab.len(),
        mean_stabilization_round: (!stab.is_empty())
            .then(|| stab.iter().map(|&s| s as f64).sum::<f64>() / stab.len() as f64),
        cdf,
        precision_max: trials.iter().filter_map(|t| t.precision_max).max(),
        precision_bound: crate::rational::big_to_f64(&p.precision),
        precision_violations: trials.iter().map(|t| t.precision_violations as u64).sum(),
        gap_min: trials.iter().filter_map(|t| t.gap_min).min(),
        gap_max: trials.iter().filter_map(|t| t.gap_max).max(),
        accuracy_bound: crate::rational::big_to_f64(&p.accuracy),
        accuracy_violations: trials.iter().map(|t| t.accuracy_violations as u64).sum(),
        continuity_failures: trials.iter().map(|t| t.continuity_failures as u64).sum(),
        constraints_ok: trials.iter().all(|t| t.constraints_ok),
        diagnostics,
    })
}

/// Cover length over time, sampled at every adjustment instant and at a
/// fixed stride, for plotting.
pub fn cover_series(trace: &Trace, stride: u64) -> Result<Vec<(u64, f64)>> {
    let replay = PhaseReplay::from_trace(trace)?;
    let mut times: Vec<u64> = (0..replay.horizon).step_by(stride.max(1) as usize).collect();
    times.extend(replay.adjusts.iter().map(|a| a.0));
    times.sort();
    times.dedup();
    let mut c = replay.cursor();
    let mut out = Vec::with_capacity(times.len());
    for t in times {
        c.seek(t, true)?;
        out.push((t, to_f64(&c.cover()?.len())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn report(round: u32, success: bool) -> RoundReport {
        RoundReport {
            round,
            t_first: 0,
            t_last: 0,
            span: Exact(rat(0, 1)),
            cover_before: Exact(rat(0, 1)),
            cover_after: Exact(rat(0, 1)),
            synchronized_before: false,
            success,
            continuity_ok: true,
        }
    }

    fn reports(pattern: &[bool]) -> Vec<RoundReport> {
        pattern.iter().enumerate().map(|(i, &s)| report(i as u32 + 1, s)).collect()
    }

    #[test]
    fn stabilization_examples() {
        assert_eq!(stabilization_round(&reports(&[false, false, true, true, true])), Some(3));
        assert_eq!(stabilization_round(&reports(&[true; 6])), Some(1));
        assert_eq!(stabilization_round(&reports(&[false, true, false, true, true, true])), Some(4));
        assert_eq!(stabilization_round(&reports(&[true, true, false])), None);
    }

    #[test]
    fn wilson_brackets_the_estimate() {
        let (lo, hi) = wilson(300, 1000, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!((hi - lo) < 0.06);
        assert_eq!(wilson(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn clusters_split_at_half_cycle() {
        let pulses = [(100, 0), (105, 1), (1100, 1), (1098, 0), (2500, 0)];
        let c = pulse_clusters(&pulses, 1000);
        assert_eq!(c.len(), 3);
        assert_eq!(c[1], vec![(1098, 0), (1100, 1)]);
    }
}
