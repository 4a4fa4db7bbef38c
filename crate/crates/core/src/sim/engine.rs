//! The event loop binding clocks, the resync state machine and the adversary.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clock::{AdjustEffect, NodeClock};
use crate::decision::ideal_probabilistic_agree;
use crate::error::Result;
use crate::params::{self, DerivedParams};
use crate::rational::{ceil, Exact, Rational};
use crate::resync::{on_round_start, NodeId, Payload, ResyncConfig, ResyncState, Stage, StepMessage, StepOutput};

use super::adversary::{act, assign_agreement, View};
use super::scenario::{DelayMode, Scenario};
use super::setup::{faulty_set, generate_igc_schedule, randomize_initial_state};
use super::trace::{Diagnostics, Trace, TraceRecord};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Record every delivered message in the trace.
    pub trace_messages: bool,
}

// random streams, one per purpose, so adding draws in one place never
// shifts the others
const STREAM_INIT: u64 = 1;
const STREAM_IGC: u64 = 2;
const STREAM_NET: u64 = 3;
const STREAM_ADV: u64 = 4;
const STREAM_COIN: u64 = 5;
const STREAM_AGREE: u64 = 6;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Same-time events run in this order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Deliver = 0,
    Boundary = 1,
    Pulse = 2,
    Igc = 3,
    Adjust = 4,
}

#[derive(Clone, Debug)]
enum Action {
    Deliver { msg: StepMessage, honest: bool },
    Boundary { round: u32, step: u32 },
    Pulse { version: u64 },
    Igc { round: u32 },
    Adjust { round: u32, delta: i64 },
}

#[derive(Clone, Debug)]
struct Event {
    time: u64,
    kind: Kind,
    node: NodeId,
    aux: usize,
    seq: u64,
    action: Action,
}

impl Event {
    fn key(&self) -> (u64, Kind, NodeId, usize, u64) {
        (self.time, self.kind, self.node, self.aux, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

struct Active {
    round: u32,
    state: ResyncState,
    /// Buffered messages by step tag.
    inbox: Vec<Vec<StepMessage>>,
}

struct NodeRt {
    clock: NodeClock,
    pulse_version: u64,
    active: Option<Active>,
    /// Messages that arrived while idle, with arrival times.
    idle: Vec<(u64, StepMessage)>,
}

#[derive(Default)]
struct Session {
    started: Vec<usize>,
    first_start: Vec<u64>,
    honest: Vec<Vec<Option<Payload>>>,
    phases: Vec<Option<u64>>,
    radii: Vec<Option<Rational>>,
    inputs: Vec<Option<bool>>,
    agreed: bool,
}

struct Engine<'a> {
    s: &'a Scenario,
    cfg: ResyncConfig,
    steps: u32,
    honest_count: usize,
    faulty: Vec<bool>,
    nodes: Vec<Option<NodeRt>>,
    sessions: Vec<Session>,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    records: Vec<TraceRecord>,
    diag: Diagnostics,
    skew_limit: u64,
    net: ChaCha8Rng,
    adv: ChaCha8Rng,
    coin: ChaCha8Rng,
    agree: ChaCha8Rng,
    opts: &'a RunOptions,
}

impl<'a> Engine<'a> {
    fn push(&mut self, time: u64, node: NodeId, aux: usize, action: Action) {
        let kind = match action {
            Action::Deliver { .. } => Kind::Deliver,
            Action::Boundary { .. } => Kind::Boundary,
            Action::Pulse { .. } => Kind::Pulse,
            Action::Igc { .. } => Kind::Igc,
            Action::Adjust { .. } => Kind::Adjust,
        };
        self.seq += 1;
        self.queue.push(Reverse(Event { time, kind, node, aux, seq: self.seq, action }));
    }

    fn rt(&mut self, q: NodeId) -> &mut NodeRt {
        self.nodes[q].as_mut().expect("nonfaulty node")
    }

    fn advance(&mut self, q: NodeId, t: u64) {
        let pulses = self.rt(q).clock.advance_to(t);
        for time in pulses {
            self.records.push(TraceRecord::Pulse { time, node: q });
        }
    }

    fn schedule_pulse(&mut self, q: NodeId) {
        let rt = self.rt(q);
        rt.pulse_version += 1;
        let version = rt.pulse_version;
        let at = rt.clock.next_pulse_time();
        self.push(at, q, 0, Action::Pulse { version });
    }

    fn delay(&mut self) -> u64 {
        let dm = self.s.max_msg_delay;
        let dp = self.s.max_proc_delay;
        match self.s.adversary.delay {
            DelayMode::Max => (dm - 1) + 2 * (dp - 1),
            DelayMode::Zero => 1,
            DelayMode::Random => {
                self.net.gen_range(1..dm) + self.net.gen_range(0..dp) + self.net.gen_range(0..dp)
            }
        }
    }

    fn send(&mut self, t: u64, to: NodeId, msg: StepMessage, honest: bool) {
        let at = t + self.delay();
        if self.opts.trace_messages {
            self.records.push(TraceRecord::Message {
                t_send: t,
                t_recv: at,
                from: msg.sender,
                to,
                step: msg.step,
                payload: msg.payload,
            });
        }
        self.push(at, to, msg.sender, Action::Deliver { msg, honest });
    }

    fn broadcast(&mut self, t: u64, msg: StepMessage) {
        for to in 0..self.s.n {
            if to != msg.sender && !self.faulty[to] {
                self.send(t, to, msg, true);
            }
        }
    }

    fn session(&mut self, round: u32) -> &mut Session {
        let n = self.s.n;
        let steps = self.steps as usize;
        let idx = round as usize - 1;
        while self.sessions.len() <= idx {
            self.sessions.push(Session {
                started: vec![0; steps + 2],
                first_start: vec![u64::MAX; steps + 2],
                honest: vec![vec![None; n]; steps + 2],
                phases: vec![None; n],
                radii: vec![None; n],
                inputs: vec![None; n],
                agreed: false,
            });
        }
        &mut self.sessions[idx]
    }

    /// A nonfaulty node entered step `k`; once all have, the adversary speaks.
    fn step_started(&mut self, round: u32, k: u32, q: NodeId, t: u64, payload: Option<Payload>) {
        let honest_count = self.honest_count;
        let sess = self.session(round);
        let k = k as usize;
        sess.honest[k][q] = payload;
        sess.started[k] += 1;
        sess.first_start[k] = sess.first_start[k].min(t);
        if sess.started[k] < honest_count {
            return;
        }
        let spread = t - sess.first_start[k];
        self.diag.max_step_skew = self.diag.max_step_skew.max(spread);
        if spread > self.skew_limit {
            self.diag.skew_violations += 1;
        }
        self.adversary_step(round, k as u32, t);
    }

    fn adversary_step(&mut self, round: u32, k: u32, t: u64) {
        if self.s.f == 0 || k > self.steps {
            return;
        }
        let idx = round as usize - 1;
        let sess = &self.sessions[idx];
        let view = View {
            cfg: &self.cfg,
            step: k,
            honest: &sess.honest[k as usize],
            phases: &sess.phases,
            radii: &sess.radii,
            rushing: self.s.adversary.rushing,
        };
        let mut out = Vec::new();
        for sender in (0..self.s.n).filter(|&q| self.faulty[q]) {
            for receiver in (0..self.s.n).filter(|&q| !self.faulty[q]) {
                if let Some(payload) = act(self.s.adversary.strategy, &view, sender, receiver, &mut self.adv) {
                    out.push((receiver, StepMessage { sender, step: k, payload }));
                }
            }
        }
        for (to, msg) in out {
            self.send(t, to, msg, false);
        }
    }

    fn on_deliver(&mut self, t: u64, q: NodeId, msg: StepMessage, honest: bool) {
        let steps = self.steps;
        let rt = self.nodes[q].as_mut().expect("nonfaulty node");
        match rt.active.as_mut() {
            Some(a) if a.state.stage != Stage::Done => {
                if msg.step == 0 || msg.step > steps {
                    self.diag.malformed += 1;
                } else if msg.step >= a.state.next_step {
                    a.inbox[msg.step as usize].push(msg);
                } else if honest {
                    self.diag.late_nonfaulty += 1;
                }
            }
            _ => rt.idle.push((t, msg)),
        }
    }

    fn on_igc(&mut self, t: u64, q: NodeId, round: u32) {
        self.advance(q, t);
        let window = self.s.step_ticks;
        let steps = self.steps;
        if self.rt(q).active.is_some() {
            self.diag.overlaps += 1;
        }
        let theta = self.rt(q).clock.read_phase();
        let (state, msg) = on_round_start(q, theta, &self.cfg);
        let mut inbox = vec![Vec::new(); steps as usize + 1];
        let idle = std::mem::take(&mut self.rt(q).idle);
        for (arrived, m) in idle {
            if arrived + window < t {
                self.diag.stale_dropped += 1;
            } else if m.step == 0 || m.step > steps {
                self.diag.malformed += 1;
            } else {
                inbox[m.step as usize].push(m);
            }
        }
        let boundaries: Vec<u64> =
            (1..=steps).map(|k| self.rt(q).clock.time_after_ticks(k as u64 * window)).collect();
        self.rt(q).active = Some(Active { round, state, inbox });
        self.records.push(TraceRecord::Igc { time: t, node: q, round, theta });
        self.session(round).phases[q] = Some(theta);
        self.broadcast(t, msg);
        self.step_started(round, 1, q, t, Some(msg.payload));
        for (k, at) in boundaries.into_iter().enumerate() {
            self.push(at, q, k + 1, Action::Boundary { round, step: k as u32 + 1 });
        }
    }

    fn on_boundary(&mut self, t: u64, q: NodeId, round: u32, k: u32) -> Result<()> {
        match &self.rt(q).active {
            Some(a) if a.round == round => {}
            _ => return Ok(()),
        }
        self.advance(q, t);
        let steps = self.steps;
        let cfg = self.cfg.clone();
        if k == steps && cfg.variant == crate::resync::Variant::A {
            let a = self.rt(q).active.as_mut().expect("checked above");
            if a.state.significance.is_none() {
                let bit = a.state.radius > cfg.r0;
                a.state.set_agreement_output(bit);
                self.diag.agreement_late += 1;
            }
        }
        let (output, report, radius, stage_over) = {
            let rt = self.nodes[q].as_mut().expect("nonfaulty node");
            let a = rt.active.as_mut().expect("checked above");
            let msgs = std::mem::take(&mut a.inbox[k as usize]);
            let (output, report) = a.state.on_step(&cfg, k, &msgs, &mut self.coin)?;
            (output, report, a.state.radius, k == cfg.k1)
        };
        self.diag.duplicates += report.duplicates as u64;
        self.diag.malformed += report.malformed as u64;
        self.diag.unknown_sender += report.unknown_sender as u64;
        self.diag.missing_nonfaulty += report.defaulted.iter().filter(|&&r| !self.faulty[r]).count() as u64;
        self.records.push(TraceRecord::Step { time: t, node: q, round, step: k, defaulted: report.defaulted.len() });
        if stage_over {
            self.session(round).radii[q] = Some(radius);
        }
        match output {
            StepOutput::Send(msg) => {
                if let Payload::Coin { coin } = msg.payload {
                    self.records.push(TraceRecord::Coin { time: t, node: q, round, coin });
                }
                self.broadcast(t, msg);
                self.step_started(round, k + 1, q, t, Some(msg.payload));
            }
            StepOutput::AgreementInput(bit) => {
                self.session(round).inputs[q] = Some(bit);
                self.step_started(round, k + 1, q, t, None);
                self.maybe_agree(round);
            }
            StepOutput::Idle => {
                let a = self.rt(q).active.take().expect("checked above");
                let out = a.state.on_round_end(&cfg)?;
                self.records.push(TraceRecord::Decision {
                    time: t,
                    node: q,
                    round,
                    radius: Exact(out.radius),
                    c1: Exact(out.c1.value()),
                    significance: out.significance.value(),
                    c_star: Exact(out.c_star.value()),
                });
                self.push(t, q, 0, Action::Adjust { round, delta: out.delta });
            }
        }
        Ok(())
    }

    fn maybe_agree(&mut self, round: u32) {
        let honest: Vec<NodeId> = (0..self.s.n).filter(|&q| !self.faulty[q]).collect();
        let idx = round as usize - 1;
        let sess = &self.sessions[idx];
        if sess.agreed || honest.iter().any(|&q| sess.inputs[q].is_none()) {
            return;
        }
        let inputs: Vec<bool> = honest.iter().map(|&q| sess.inputs[q].expect("checked")).collect();
        let strategy = self.s.adversary.strategy;
        let adv = &mut self.adv;
        let outputs = ideal_probabilistic_agree(&inputs, self.s.fairness.0, &mut self.agree, |i| {
            assign_agreement(strategy, i, adv)
        });
        self.sessions[idx].agreed = true;
        for (&q, bit) in honest.iter().zip(outputs) {
            if let Some(a) = self.rt(q).active.as_mut() {
                if a.round == round && a.state.stage != Stage::Done {
                    a.state.set_agreement_output(bit);
                }
            }
        }
    }

    fn on_adjust(&mut self, t: u64, q: NodeId, round: u32, delta: i64) {
        self.advance(q, t);
        let clock = &mut self.rt(q).clock;
        let theta_before = clock.read_phase();
        let effect = clock.apply_adjustment(delta);
        let theta_after = clock.read_phase();
        self.records.push(TraceRecord::Adjust { time: t, node: q, round, theta_before, delta, theta_after });
        if effect == AdjustEffect::PulseNow {
            self.records.push(TraceRecord::Pulse { time: t, node: q });
        }
        self.schedule_pulse(q);
    }

    fn on_pulse(&mut self, t: u64, q: NodeId, version: u64) {
        if self.rt(q).pulse_version != version {
            return;
        }
        self.advance(q, t);
        self.schedule_pulse(q);
    }
}

/// Executes one scenario with already-derived parameters.
pub fn run(s: &Scenario, p: &DerivedParams, opts: &RunOptions) -> Result<Trace> {
    s.validate_basic()?;
    let cfg = p.resync_config(s)?;
    let constraints_ok = params::validate(s, p).is_ok();
    let steps = cfg.steps();
    let faulty = faulty_set(s);

    let mut init_rng = stream(s.seed, STREAM_INIT);
    let mut igc_rng = stream(s.seed, STREAM_IGC);
    let spread = match s.initial.spread {
        Some(e) => e.0,
        None => p.target_error_exact()?,
    };
    let init = randomize_initial_state(s, &cfg, spread, &mut init_rng);
    let schedule = generate_igc_schedule(s, &mut igc_rng);
    let horizon = schedule.last().expect("at least one pulse").base;

    let skew_limit = ceil(&s.step_skew()) as u64 + 1;
    let mut eng = Engine {
        s,
        cfg: cfg.clone(),
        steps,
        honest_count: s.n - s.f,
        faulty: faulty.clone(),
        nodes: Vec::with_capacity(s.n),
        sessions: Vec::new(),
        queue: BinaryHeap::new(),
        seq: 0,
        records: Vec::new(),
        diag: Diagnostics::default(),
        skew_limit,
        net: stream(s.seed, STREAM_NET),
        adv: stream(s.seed, STREAM_ADV),
        coin: stream(s.seed, STREAM_COIN),
        agree: stream(s.seed, STREAM_AGREE),
        opts,
    };

    eng.records.push(TraceRecord::Header {
        n: s.n,
        f: s.f,
        variant: s.variant,
        period: s.period,
        tau_max: s.tau_max,
        seed: s.seed,
        rounds: s.rounds,
        k1: cfg.k1,
        steps,
        target_error: Exact(p.target_error_exact()?),
        faulty: (0..s.n).filter(|&q| faulty[q]).collect(),
        horizon,
        constraints_ok,
    });
    for (q, clock) in init.clocks.into_iter().enumerate() {
        if let Some(c) = &clock {
            eng.records.push(TraceRecord::Init {
                node: q,
                tau: c.tau(),
                tau_sch: c.tau_sch(),
                rate: Exact(c.rate()),
                carry: Exact(c.carry()),
            });
        }
        eng.nodes.push(clock.map(|clock| NodeRt { clock, pulse_version: 0, active: None, idle: Vec::new() }));
    }
    for q in (0..s.n).filter(|&q| !faulty[q]) {
        eng.schedule_pulse(q);
    }
    for (at, to, msg) in init.garbage {
        eng.push(at, to, msg.sender, Action::Deliver { msg, honest: false });
    }
    for (i, pulse) in schedule[..schedule.len() - 1].iter().enumerate() {
        for q in (0..s.n).filter(|&q| !faulty[q]) {
            eng.push(pulse.base + pulse.offsets[q], q, 0, Action::Igc { round: i as u32 + 1 });
        }
    }

    while let Some(Reverse(ev)) = eng.queue.pop() {
        if ev.time >= horizon {
            break;
        }
        let (t, q) = (ev.time, ev.node);
        match ev.action {
            Action::Deliver { msg, honest } => eng.on_deliver(t, q, msg, honest),
            Action::Boundary { round, step } => eng.on_boundary(t, q, round, step)?,
            Action::Pulse { version } => eng.on_pulse(t, q, version),
            Action::Igc { round } => eng.on_igc(t, q, round),
            Action::Adjust { round, delta } => eng.on_adjust(t, q, round, delta),
        }
    }
    let diag = eng.diag.clone();
    eng.records.push(TraceRecord::Diagnostics(diag));
    Ok(Trace { records: eng.records })
}

/// Solves parameters, rejects infeasible scenarios, and runs.
pub fn simulate(s: &Scenario, opts: &RunOptions) -> Result<(DerivedParams, Trace)> {
    let p = params::solve_params(s)?;
    params::validate(s, &p)?;
    let trace = run(s, &p, opts)?;
    Ok((p, trace))
}
