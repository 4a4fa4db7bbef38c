//! Execution traces: one JSON object per line, tagged by `kind`.
//!
//! Rationals are written as `"p/q"` strings. The records are enough to
//! rebuild every nonfaulty clock offline (initial state plus adjustments) and
//! so to recompute every metric.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::decision::Coin;
use crate::error::{Error, Result};
use crate::rational::Exact;
use crate::resync::{NodeId, Payload, Variant};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Step starts whose cross-node spread exceeded the step skew bound.
    pub skew_violations: u64,
    /// Nonfaulty messages that arrived after the receiver closed the step.
    pub late_nonfaulty: u64,
    /// Nonfaulty senders replaced by a default value.
    pub missing_nonfaulty: u64,
    pub duplicates: u64,
    pub malformed: u64,
    pub unknown_sender: u64,
    /// igc pulses that arrived while the previous round was still running.
    pub overlaps: u64,
    /// Agreement outputs that were not ready when a node needed them.
    pub agreement_late: u64,
    /// Stale messages dropped from an idle node's buffer.
    pub stale_dropped: u64,
    /// Largest realized cross-node spread of a step start, quanta.
    pub max_step_skew: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Header {
        n: usize,
        f: usize,
        variant: Variant,
        period: u64,
        tau_max: u64,
        seed: u64,
        rounds: u32,
        k1: u32,
        steps: u32,
        target_error: Exact,
        faulty: Vec<NodeId>,
        /// End of the simulated interval, quanta.
        horizon: u64,
        constraints_ok: bool,
    },
    Init {
        node: NodeId,
        tau: u64,
        tau_sch: u64,
        rate: Exact,
        carry: Exact,
    },
    Igc {
        time: u64,
        node: NodeId,
        round: u32,
        theta: u64,
    },
    Step {
        time: u64,
        node: NodeId,
        round: u32,
        step: u32,
        defaulted: usize,
    },
    Coin {
        time: u64,
        node: NodeId,
        round: u32,
        coin: Coin,
    },
    Decision {
        time: u64,
        node: NodeId,
        round: u32,
        radius: Exact,
        c1: Exact,
        significance: u8,
        c_star: Exact,
    },
    Adjust {
        time: u64,
        node: NodeId,
        round: u32,
        theta_before: u64,
        delta: i64,
        theta_after: u64,
    },
    Pulse {
        time: u64,
        node: NodeId,
    },
    Message {
        t_send: u64,
        t_recv: u64,
        from: NodeId,
        to: NodeId,
        step: u32,
        payload: Payload,
    },
    Diagnostics(Diagnostics),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        out
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|e| Error::Trace(format!("line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        Ok(Trace { records })
    }

    pub fn header(&self) -> Result<&TraceRecord> {
        match self.records.first() {
            Some(h @ TraceRecord::Header { .. }) => Ok(h),
            _ => Err(Error::Trace("missing header record".into())),
        }
    }

    pub fn diagnostics(&self) -> Option<&Diagnostics> {
        self.records.iter().rev().find_map(|r| match r {
            TraceRecord::Diagnostics(d) => Some(d),
            _ => None,
        })
    }

    /// Pulse instants of `node`, in order.
    pub fn pulses(&self, node: NodeId) -> Vec<u64> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Pulse { time, node: q } if *q == node => Some(*time),
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn jsonl_round_trip() {
        let t = Trace {
            records: vec![
                TraceRecord::Init { node: 0, tau: 5, tau_sch: 9, rate: Exact(rat(99_999, 100_000)), carry: Exact(rat(1, 3)) },
                TraceRecord::Pulse { time: 42, node: 0 },
                TraceRecord::Coin { time: 50, node: 1, round: 2, coin: Coin::Minus },
                TraceRecord::Diagnostics(Diagnostics { duplicates: 3, ..Default::default() }),
            ],
        };
        let bytes = t.to_jsonl();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with(r#"{"kind":"init","node":0,"tau":5,"tau_sch":9,"rate":"99999/100000""#));
        assert!(text.contains(r#""coin":-1"#));
        let back = Trace::read_jsonl(&bytes[..]).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.pulses(0), vec![42]);
    }
}
