//! igc pulse schedules and arbitrary initial states.

use rand::Rng;

use crate::clock::NodeClock;
use crate::decision::flip_coin;
use crate::geometry::PlanePoint;
use crate::rational::{floor, int, rat, Rational};
use crate::resync::{NodeId, Payload, ResyncConfig, StepMessage};

use super::scenario::{DriftMode, IgcMode, InitialPreset, OffsetMode, Scenario};

/// One igc pulse: its global base time and every node's arrival offset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IgcPulse {
    pub base: u64,
    pub offsets: Vec<u64>,
}

/// Faulty nodes are the last `f` ids.
pub fn faulty_set(s: &Scenario) -> Vec<bool> {
    (0..s.n).map(|q| q >= s.n - s.f).collect()
}

/// Base time of the first igc pulse. It leaves room for stale in-flight
/// messages to land while every node is idle.
pub fn first_base(s: &Scenario) -> u64 {
    2 * s.total_delay()
}

/// `rounds + 1` pulses; the last one only marks the end of the horizon.
pub fn generate_igc_schedule<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> Vec<IgcPulse> {
    let lo = s.igc_cycle - s.igc_jitter;
    let hi = s.igc_cycle + s.igc_jitter;
    let faulty = faulty_set(s);
    let mut base = first_base(s);
    let mut out = Vec::with_capacity(s.rounds as usize + 1);
    for i in 0..=s.rounds {
        let mut honest_index = 0;
        let offsets = (0..s.n)
            .map(|q| {
                if faulty[q] {
                    return 0;
                }
                honest_index += 1;
                match s.adversary.igc_offsets {
                    OffsetMode::Random => rng.gen_range(0..=s.igc_skew),
                    OffsetMode::Extreme if honest_index % 2 == 0 => s.igc_skew,
                    OffsetMode::Extreme => 0,
                }
            })
            .collect();
        out.push(IgcPulse { base, offsets });
        let gap = match s.adversary.igc {
            IgcMode::Random => rng.gen_range(lo..=hi),
            IgcMode::JitterMax if i % 2 == 0 => lo,
            IgcMode::JitterMax => hi,
        };
        base += gap;
    }
    out
}

#[derive(Clone, Debug)]
pub struct InitialState {
    /// One clock per nonfaulty node; `None` for faulty ids.
    pub clocks: Vec<Option<NodeClock>>,
    /// Stale messages in flight at time zero: `(arrival, receiver, message)`.
    pub garbage: Vec<(u64, NodeId, StepMessage)>,
}

fn draw_rate<R: Rng + ?Sized>(s: &Scenario, honest_index: usize, rng: &mut R) -> Rational {
    let rho = s.rho();
    match s.adversary.drift {
        DriftMode::None => int(1),
        DriftMode::Extreme if honest_index % 2 == 0 => int(1) + rho,
        DriftMode::Extreme => int(1) - rho,
        DriftMode::Random => int(1) + rho * rat(rng.gen_range(-1000..=1000), 1000),
    }
}

fn garbage_payload<R: Rng + ?Sized>(cfg: &ResyncConfig, rng: &mut R) -> Payload {
    match rng.gen_range(0..3) {
        0 => Payload::Phase { theta: rng.gen_range(0..cfg.period + cfg.period / 10) },
        1 => {
            let d = 4 * cfg.period as i128;
            let mut v = || rat(rng.gen_range(-d / 4..=d / 4), d);
            let (x, y) = (v(), v());
            Payload::Round { point: PlanePoint::new(x, y) }
        }
        _ => Payload::Coin { coin: flip_coin(rng) },
    }
}

/// Clock state for every nonfaulty node per the scenario's preset.
///
/// `spread` is the arc length (cycle fraction) used by the synchronized preset.
pub fn randomize_initial_state<R: Rng + ?Sized>(
    s: &Scenario,
    cfg: &ResyncConfig,
    spread: Rational,
    rng: &mut R,
) -> InitialState {
    let faulty = faulty_set(s);
    let t = s.period;
    let anchor = rng.gen_range(0..t);
    let spread_ticks = floor(&(spread * int(t as i128))).max(0) as u64;
    let mut honest_index = 0usize;
    let mut clocks = Vec::with_capacity(s.n);
    for q in 0..s.n {
        if faulty[q] {
            clocks.push(None);
            continue;
        }
        let rate = draw_rate(s, honest_index, rng);
        let tau = rng.gen_range(0..s.tau_max);
        let carry = rat(rng.gen_range(0..1000), 1000);
        let phase = match s.initial.preset {
            InitialPreset::Random => None,
            InitialPreset::Unanimous => Some(anchor),
            InitialPreset::Antipodal => Some((anchor + (honest_index as u64 % 2) * (t / 2)) % t),
            InitialPreset::Synchronized => {
                // first and second nodes pin both ends of the arc
                let off = match honest_index {
                    0 => 0,
                    1 => spread_ticks,
                    _ => rng.gen_range(0..=spread_ticks),
                };
                Some((anchor + off) % t)
            }
        };
        let (tau_sch, carry) = match phase {
            None => (rng.gen_range(0..s.tau_max), carry),
            Some(theta) => ((tau + (t - theta) % t) % s.tau_max, if s.initial.preset == InitialPreset::Unanimous { int(0) } else { carry }),
        };
        clocks.push(Some(NodeClock::new(tau, tau_sch, rate, carry, 0, t, s.tau_max)));
        honest_index += 1;
    }
    if s.initial.preset == InitialPreset::Unanimous {
        // identical phases only stay identical on identical clocks
        let rate = clocks.iter().flatten().next().map(|c| c.rate()).unwrap_or(int(1));
        for c in clocks.iter_mut().flatten() {
            *c = NodeClock::new(c.tau(), c.tau_sch(), rate, int(0), 0, t, s.tau_max);
        }
    }

    let mut garbage = Vec::new();
    if s.initial.garbage {
        let horizon = s.total_delay().max(2);
        for q in (0..s.n).filter(|&q| !faulty[q]) {
            for _ in 0..s.n {
                let msg = StepMessage {
                    sender: rng.gen_range(0..=s.n),
                    step: rng.gen_range(1..=cfg.steps() + 1),
                    payload: garbage_payload(cfg, rng),
                };
                garbage.push((rng.gen_range(1..horizon), q, msg));
            }
        }
    }
    InitialState { clocks, garbage }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cover_len, RingPoint};
    use crate::resync::Variant;
    use crate::sim::scenario::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(s: &Scenario) -> ResyncConfig {
        ResyncConfig { n: s.n, f: s.f, period: s.period, k1: 3, variant: s.variant, r0: rat(18, 100), r0p: rat(22, 100) }
    }

    fn phases(st: &InitialState) -> Vec<RingPoint> {
        st.clocks.iter().flatten().map(|c| RingPoint::from_ticks(c.read_phase() as i128, c.period() as i128)).collect()
    }

    #[test]
    fn periodic_schedule_without_jitter() {
        let mut s = fixtures::base(5, 1, Variant::R);
        s.igc_jitter = 0;
        let sched = generate_igc_schedule(&s, &mut ChaCha8Rng::seed_from_u64(1));
        for w in sched.windows(2) {
            assert_eq!(w[1].base - w[0].base, s.igc_cycle);
        }
    }

    #[test]
    fn jitter_max_alternates_bounds() {
        let mut s = fixtures::base(5, 1, Variant::R);
        s.adversary.igc = IgcMode::JitterMax;
        let sched = generate_igc_schedule(&s, &mut ChaCha8Rng::seed_from_u64(1));
        let gaps: Vec<u64> = sched.windows(2).map(|w| w[1].base - w[0].base).collect();
        assert_eq!(gaps[0], s.igc_cycle - s.igc_jitter);
        assert_eq!(gaps[1], s.igc_cycle + s.igc_jitter);
    }

    #[test]
    fn random_gaps_and_offsets_within_bounds() {
        let mut s = fixtures::base(7, 2, Variant::A);
        s.rounds = 1000;
        let sched = generate_igc_schedule(&s, &mut ChaCha8Rng::seed_from_u64(2));
        for w in sched.windows(2) {
            let g = w[1].base - w[0].base;
            assert!(s.igc_cycle - s.igc_jitter <= g && g <= s.igc_cycle + s.igc_jitter);
        }
        assert!(sched.iter().all(|p| p.offsets.iter().all(|&o| o <= s.igc_skew)));
    }

    #[test]
    fn same_seed_same_state() {
        let s = fixtures::base(5, 1, Variant::R);
        let a = randomize_initial_state(&s, &cfg(&s), rat(1, 40), &mut ChaCha8Rng::seed_from_u64(9));
        let b = randomize_initial_state(&s, &cfg(&s), rat(1, 40), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.clocks, b.clocks);
    }

    #[test]
    fn antipodal_preset_splits_in_half() {
        let mut s = fixtures::base(5, 1, Variant::R);
        s.initial.preset = InitialPreset::Antipodal;
        let st = randomize_initial_state(&s, &cfg(&s), rat(1, 40), &mut ChaCha8Rng::seed_from_u64(4));
        let ph = phases(&st);
        assert_eq!(ph[0], ph[2]);
        assert_eq!(crate::geometry::ring_dist(ph[0], ph[1]), rat(1, 2));
    }

    #[test]
    fn synchronized_preset_respects_spread() {
        let mut s = fixtures::base(7, 2, Variant::A);
        s.initial.preset = InitialPreset::Synchronized;
        for seed in 0..20 {
            let st = randomize_initial_state(&s, &cfg(&s), rat(1, 40), &mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(cover_len(&phases(&st)).unwrap(), rat(1, 40));
        }
    }

    #[test]
    fn uniform_phases_match_order_statistics() {
        // with three uniform points the shortest cover is 1 minus the largest
        // spacing; its mean is 1 - 11/18 = 7/18
        let mut s = fixtures::base(4, 1, Variant::A);
        s.n = 4;
        s.f = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 4000;
        let mut sum = 0.0;
        for _ in 0..trials {
            let st = randomize_initial_state(&s, &cfg(&s), rat(0, 1), &mut rng);
            sum += crate::rational::to_f64(&cover_len(&phases(&st)).unwrap());
        }
        let mean = sum / trials as f64;
        assert!((mean - 7.0 / 18.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn garbage_arrives_before_first_round() {
        let mut s = fixtures::base(5, 1, Variant::R);
        s.initial.garbage = true;
        let st = randomize_initial_state(&s, &cfg(&s), rat(0, 1), &mut ChaCha8Rng::seed_from_u64(5));
        assert!(!st.garbage.is_empty());
        assert!(st.garbage.iter().all(|(t, _, _)| *t < first_base(&s)));
    }
}
