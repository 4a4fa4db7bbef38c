//! Per-node resynchronization round.
//!
//! A round has `K1` first-stage steps and one second-stage step. Step 1
//! exchanges raw phases, which every node embeds on the diamond and averages
//! per axis; steps `2..=K1` exchange and re-average the plane coordinates. The
//! resulting anchor point is projected back onto the circle (the ashore point)
//! and step `K1 + 1` decides whether that point or the origin becomes the
//! reference the node moves its phase to.

use num_traits::{Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{flip_coin, significance, tally_decide, Coin, CoinVector, Significance};
use crate::error::{Error, Result};
use crate::fta::{convergence_constant, fta};
use crate::geometry::{ashore_point, delta_theta, embed_phase, reference_point, PlanePoint, RingPoint};
use crate::rational::{rat, Rational};

pub type NodeId = usize;

/// How the second stage settles significance in the uncertain band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Ideal probabilistic agreement on `r_q > r0`.
    A,
    /// One step of coin exchange and a random-walk tally.
    R,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResyncConfig {
    pub n: usize,
    pub f: usize,
    /// Nominal cycle `T` in ticks.
    pub period: u64,
    pub k1: u32,
    pub variant: Variant,
    pub r0: Rational,
    pub r0p: Rational,
}

impl ResyncConfig {
    pub fn validate(&self) -> Result<()> {
        convergence_constant(self.n, self.f)?;
        if self.k1 == 0 {
            return Err(Error::Config("K1 must be at least 1".into()));
        }
        if self.period == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if !(Rational::zero() < self.r0 && self.r0 < self.r0p) {
            return Err(Error::Config("need 0 < r0 < r0'".into()));
        }
        self.grid_denominator(self.k1)?;
        Ok(())
    }

    /// Total steps `K_s = K1 + K2` with `K2 = 1`.
    pub fn steps(&self) -> u32 {
        self.k1 + 1
    }

    pub fn convergence(&self) -> u32 {
        convergence_constant(self.n, self.f).expect("validated configuration")
    }

    /// Denominator every honest plane coordinate sent at step `k` divides.
    pub fn grid_denominator(&self, k: u32) -> Result<i128> {
        let c = convergence_constant(self.n, self.f)? as i128;
        let mut d = 4i128
            .checked_mul(self.period as i128)
            .ok_or(Error::Overflow("plane grid"))?;
        for _ in 1..k {
            d = d.checked_mul(c).ok_or(Error::Overflow("plane grid"))?;
        }
        // ashore points square the grid; keep headroom for that too
        d.checked_mul(d).and_then(|x| x.checked_mul(16)).ok_or(Error::Overflow("plane grid"))?;
        Ok(d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Phase { theta: u64 },
    Round { point: PlanePoint },
    Coin { coin: Coin },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepMessage {
    pub sender: NodeId,
    pub step: u32,
    pub payload: Payload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    First,
    Second,
    Done,
}

/// Counters for one collected inbox.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InboxReport {
    pub duplicates: usize,
    pub unknown_sender: usize,
    pub malformed: usize,
    /// Senders whose value was replaced by the node's own.
    pub defaulted: Vec<NodeId>,
}

/// Result of processing one step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutput {
    Send(StepMessage),
    /// Bit to hand to the probabilistic-agreement primitive.
    AgreementInput(bool),
    Idle,
}

/// Everything a node computes once its round is over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundOutcome {
    pub delta: i64,
    pub c_star: RingPoint,
    pub c1: RingPoint,
    pub significance: Significance,
    pub radius: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResyncState {
    pub node: NodeId,
    pub stage: Stage,
    /// Next step whose inbox will be processed.
    pub next_step: u32,
    pub theta: u64,
    pub s_q: RingPoint,
    pub round_value: PlanePoint,
    pub radius: Rational,
    pub c1: RingPoint,
    pub significance: Option<Significance>,
    pub own_coin: Option<Coin>,
}

/// Starts a round: records the node's own phase and emits the step-1 message.
pub fn on_round_start(node: NodeId, theta: u64, cfg: &ResyncConfig) -> (ResyncState, StepMessage) {
    let theta = theta % cfg.period;
    let s_q = RingPoint::from_ticks(theta as i128, cfg.period as i128);
    let state = ResyncState {
        node,
        stage: Stage::First,
        next_step: 1,
        theta,
        s_q,
        round_value: embed_phase(s_q),
        radius: Rational::zero(),
        c1: RingPoint::ORIGIN,
        significance: None,
        own_coin: None,
    };
    let msg = StepMessage { sender: node, step: 1, payload: Payload::Phase { theta } };
    (state, msg)
}

fn payload_valid(cfg: &ResyncConfig, step: u32, payload: &Payload) -> bool {
    let quarter = rat(1, 4);
    match (step, payload) {
        (1, Payload::Phase { theta }) => *theta < cfg.period,
        (k, Payload::Round { point }) if (2..=cfg.k1).contains(&k) => {
            let Ok(grid) = cfg.grid_denominator(k) else { return false };
            [point.x, point.y].iter().all(|v| {
                v.abs() <= quarter && grid % v.denom() == 0
            })
        }
        (k, Payload::Coin { .. }) => k == cfg.k1 + 1 && cfg.variant == Variant::R,
        _ => false,
    }
}

/// Builds the sender-indexed value table for `step`, applying the duplicate
/// and validity rules. Missing entries are `None`.
pub fn collect_inbox(
    cfg: &ResyncConfig,
    step: u32,
    messages: &[StepMessage],
) -> (Vec<Option<Payload>>, InboxReport) {
    let mut table = vec![None; cfg.n];
    let mut report = InboxReport::default();
    for m in messages {
        if m.sender >= cfg.n {
            report.unknown_sender += 1;
            continue;
        }
        if m.step != step || !payload_valid(cfg, step, &m.payload) {
            report.malformed += 1;
            continue;
        }
        if table[m.sender].is_some() {
            report.duplicates += 1;
            continue;
        }
        table[m.sender] = Some(m.payload);
    }
    (table, report)
}

impl ResyncState {
    fn fill_axes(&self, table: &[Option<Payload>], report: &mut InboxReport, cfg: &ResyncConfig, step: u32) -> (Vec<Rational>, Vec<Rational>) {
        let mut xs = Vec::with_capacity(cfg.n);
        let mut ys = Vec::with_capacity(cfg.n);
        for (sender, entry) in table.iter().enumerate() {
            let point = match (sender == self.node, entry) {
                (true, _) => self.round_value,
                (false, Some(Payload::Phase { theta })) if step == 1 => {
                    embed_phase(RingPoint::from_ticks(*theta as i128, cfg.period as i128))
                }
                (false, Some(Payload::Round { point })) if step > 1 => *point,
                _ => {
                    report.defaulted.push(sender);
                    self.round_value
                }
            };
            xs.push(point.x);
            ys.push(point.y);
        }
        (xs, ys)
    }

    /// Processes the inbox of step `k` and returns what to do next.
    pub fn on_step<R: Rng + ?Sized>(
        &mut self,
        cfg: &ResyncConfig,
        k: u32,
        messages: &[StepMessage],
        rng: &mut R,
    ) -> Result<(StepOutput, InboxReport)> {
        if k != self.next_step || self.stage == Stage::Done {
            return Err(Error::Config(format!(
                "node {} processed step {k} out of order (expected {})",
                self.node, self.next_step
            )));
        }
        let (table, mut report) = collect_inbox(cfg, k, messages);
        self.next_step += 1;

        if k <= cfg.k1 {
            let (xs, ys) = self.fill_axes(&table, &mut report, cfg, k);
            self.round_value = PlanePoint::new(fta(&xs, cfg.n, cfg.f)?, fta(&ys, cfg.n, cfg.f)?);
            if k < cfg.k1 {
                let msg = StepMessage {
                    sender: self.node,
                    step: k + 1,
                    payload: Payload::Round { point: self.round_value },
                };
                return Ok((StepOutput::Send(msg), report));
            }
            // first stage complete: anchor point is fixed
            self.stage = Stage::Second;
            self.radius = self.round_value.norm1();
            self.c1 = ashore_point(self.round_value).unwrap_or(RingPoint::ORIGIN);
            return Ok(match cfg.variant {
                Variant::R => {
                    let coin = flip_coin(rng);
                    self.own_coin = Some(coin);
                    let msg = StepMessage { sender: self.node, step: k + 1, payload: Payload::Coin { coin } };
                    (StepOutput::Send(msg), report)
                }
                Variant::A => (StepOutput::AgreementInput(self.radius > cfg.r0), report),
            });
        }

        // second stage
        match cfg.variant {
            Variant::R => {
                let own = self.own_coin.expect("coin drawn when the first stage ended");
                let coins: Vec<Coin> = table
                    .iter()
                    .enumerate()
                    .map(|(sender, entry)| match (sender == self.node, entry) {
                        (true, _) => own,
                        (false, Some(Payload::Coin { coin })) => *coin,
                        _ => {
                            report.defaulted.push(sender);
                            own
                        }
                    })
                    .collect();
                let b_w = tally_decide(&CoinVector(coins));
                self.significance = Some(significance(self.radius, cfg.r0, cfg.r0p, b_w));
            }
            Variant::A => {
                if self.significance.is_none() {
                    return Err(Error::Config(format!(
                        "node {}: agreement output missing at round end",
                        self.node
                    )));
                }
            }
        }
        self.stage = Stage::Done;
        Ok((StepOutput::Idle, report))
    }

    /// Delivers the agreement primitive's output bit.
    pub fn set_agreement_output(&mut self, bit: bool) {
        self.significance = Some(Significance::from_bit(bit));
    }

    /// Reference point and phase correction once every step has run.
    pub fn on_round_end(&self, cfg: &ResyncConfig) -> Result<RoundOutcome> {
        let significance = match (self.stage, self.significance) {
            (Stage::Done, Some(s)) => s,
            _ => {
                return Err(Error::Config(format!("node {} ended its round early", self.node)));
            }
        };
        let c_star = reference_point(significance.value(), self.c1);
        Ok(RoundOutcome {
            delta: delta_theta(c_star, self.s_q, cfg.period),
            c_star,
            c1: self.c1,
            significance,
            radius: self.radius,
        })
    }
}
