//! Drifting local clocks with a wrapping tick counter and one scheduled
//! pulsing tick.
//!
//! Global time advances in integer quanta. A clock runs at a fixed rational
//! rate (ticks per quantum) and carries its fractional tick exactly, so tick
//! and pulse instants are reproducible bit for bit.

use serde::{Deserialize, Serialize};

use crate::rational::{ceil, floor, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeClock {
    tau: u64,
    tau_sch: u64,
    #[serde(with = "crate::rational::serde_rational")]
    rate: Rational,
    /// Global time the counter was last brought up to date.
    synced_at: u64,
    /// Fractional tick accumulated at `synced_at`, in `[0, 1)`.
    #[serde(with = "crate::rational::serde_rational")]
    carry: Rational,
    period: u64,
    tau_max: u64,
    /// The pulse for the next scheduled tick was already emitted.
    skip_next: bool,
}

/// What an adjustment did to the pulse train.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjustEffect {
    None,
    /// The phase jumped forward over zero; the skipped-over pulse fires now.
    PulseNow,
    /// The phase jumped back over zero; the repeated crossing stays silent.
    SuppressNext,
}

impl NodeClock {
    pub fn new(
        tau: u64,
        tau_sch: u64,
        rate: Rational,
        carry: Rational,
        at: u64,
        period: u64,
        tau_max: u64,
    ) -> Self {
        assert!(period >= 1 && tau_max > period, "need tau_max > T >= 1");
        assert!(rate > Rational::from_integer(0));
        let mut clock = NodeClock {
            tau: tau % tau_max,
            tau_sch: tau_sch % tau_max,
            rate,
            synced_at: at,
            carry,
            period,
            tau_max,
            skip_next: false,
        };
        if clock.tau == clock.tau_sch {
            // the pulse for this tick is treated as already emitted
            clock.tau_sch = (clock.tau_sch + period) % tau_max;
        }
        clock
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn tau_sch(&self) -> u64 {
        self.tau_sch
    }

    pub fn rate(&self) -> Rational {
        self.rate
    }

    pub fn carry(&self) -> Rational {
        self.carry
    }

    pub fn synced_at(&self) -> u64 {
        self.synced_at
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn tau_max(&self) -> u64 {
        self.tau_max
    }

    /// Ticks until the scheduled pulsing tick, in `[1, tau_max)`.
    fn ticks_to_pulse(&self) -> u64 {
        (self.tau_sch + self.tau_max - self.tau) % self.tau_max
    }

    /// Pulsing phase `(T − ((τ_sch − τ) mod τ_max)) mod T`.
    pub fn read_phase(&self) -> u64 {
        let t = self.period;
        (t - self.ticks_to_pulse() % t) % t
    }

    /// Global time at which `ticks` more ticks have elapsed since `synced_at`.
    pub fn time_after_ticks(&self, ticks: u64) -> u64 {
        if ticks == 0 {
            return self.synced_at;
        }
        let need = (Rational::from_integer(ticks as i128) - self.carry) / self.rate;
        self.synced_at + ceil(&need).max(0) as u64
    }

    /// Global time of the next pulse crossing.
    pub fn next_pulse_time(&self) -> u64 {
        self.time_after_ticks(self.ticks_to_pulse())
    }

    /// Whole ticks that elapse between `synced_at` and `t`.
    pub fn ticks_until(&self, t: u64) -> u64 {
        assert!(t >= self.synced_at, "clock cannot run backwards");
        let total = self.rate * Rational::from_integer((t - self.synced_at) as i128) + self.carry;
        floor(&total) as u64
    }

    /// Advances to global time `t`, returning the instants of emitted pulses.
    pub fn advance_to(&mut self, t: u64) -> Vec<u64> {
        assert!(t >= self.synced_at, "clock cannot run backwards");
        let total = self.rate * Rational::from_integer((t - self.synced_at) as i128) + self.carry;
        let whole = floor(&total);
        let mut pulses = Vec::new();
        let mut remaining = whole as u64;
        let mut consumed = 0u64;
        loop {
            let dist = self.ticks_to_pulse();
            if dist > remaining {
                break;
            }
            consumed += dist;
            remaining -= dist;
            let at = self.synced_at
                + ceil(&((Rational::from_integer(consumed as i128) - self.carry) / self.rate)).max(0) as u64;
            self.tau = self.tau_sch;
            self.tau_sch = (self.tau_sch + self.period) % self.tau_max;
            if self.skip_next {
                self.skip_next = false;
            } else {
                pulses.push(at);
            }
        }
        self.tau = (self.tau + remaining) % self.tau_max;
        self.carry = total - Rational::from_integer(whole);
        self.synced_at = t;
        pulses
    }

    /// Moves the phase by `delta` ticks (ring addition modulo `T`) by
    /// rescheduling the pulsing tick relative to the current counter.
    pub fn apply_adjustment(&mut self, delta: i64) -> AdjustEffect {
        let t = self.period as i64;
        debug_assert!(delta.unsigned_abs() <= self.period / 2 + 1);
        let raw = self.read_phase() as i64 + delta;
        let phase = raw.rem_euclid(t) as u64;
        let dist = if phase == 0 { self.period } else { self.period - phase };
        self.tau_sch = (self.tau + dist) % self.tau_max;
        if raw >= t {
            if self.skip_next {
                self.skip_next = false;
                AdjustEffect::None
            } else {
                AdjustEffect::PulseNow
            }
        } else if raw < 0 {
            self.skip_next = true;
            AdjustEffect::SuppressNext
        } else {
            AdjustEffect::None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use proptest::prelude::*;

    const TAU_MAX: u64 = 1 << 32;

    fn unit(tau: u64, tau_sch: u64, period: u64) -> NodeClock {
        NodeClock::new(tau, tau_sch, int(1), int(0), 0, period, TAU_MAX)
    }

    #[test]
    fn read_phase_examples() {
        // scheduled tick equal to the counter reads as phase zero
        assert_eq!(unit(500, 500, 1000).read_phase(), 0);
        assert_eq!(unit(100, 400, 1000).read_phase(), 700);
        assert_eq!(unit(TAU_MAX - 50, 150, 1000).read_phase(), 800);
    }

    #[test]
    fn adjustment_examples() {
        let mut c = unit(100, 400, 1000);
        assert_eq!(c.apply_adjustment(200), AdjustEffect::None);
        assert_eq!(c.read_phase(), 900);
        assert_eq!(c.apply_adjustment(0), AdjustEffect::None);
        assert_eq!(c.read_phase(), 900);
        assert_eq!(c.apply_adjustment(200), AdjustEffect::PulseNow);
        assert_eq!(c.read_phase(), 100);
        assert_eq!(c.apply_adjustment(-300), AdjustEffect::SuppressNext);
        assert_eq!(c.read_phase(), 800);
    }

    #[test]
    fn one_pulse_per_cycle_at_unit_rate() {
        let mut c = unit(0, 1000, 1000);
        assert_eq!(c.read_phase(), 0);
        assert_eq!(c.advance_to(1000), vec![1000]);
        assert_eq!(c.advance_to(1999), Vec::<u64>::new());
        assert_eq!(c.advance_to(2000), vec![2000]);
    }

    #[test]
    fn suppressed_crossing_is_silent_once() {
        let mut c = unit(0, 1000, 1000);
        assert_eq!(c.advance_to(1003), vec![1000]);
        assert_eq!(c.read_phase(), 3);
        assert_eq!(c.apply_adjustment(-10), AdjustEffect::SuppressNext);
        assert_eq!(c.advance_to(1010), Vec::<u64>::new());
        assert_eq!(c.advance_to(2010), vec![2010]);
    }

    #[test]
    fn drift_bound_between_extremes() {
        let rho = rat(1, 1000);
        let d = 123_457u64;
        let fast = NodeClock::new(0, 10, int(1) + rho, int(0), 0, 1000, TAU_MAX);
        let slow = NodeClock::new(0, 10, int(1) - rho, int(0), 0, 1000, TAU_MAX);
        let diff = fast.ticks_until(d) - slow.ticks_until(d);
        let bound = ceil(&(rho * 2 * int(d as i128))) as u64;
        assert!(diff <= bound, "{diff} > {bound}");
    }

    #[test]
    fn pulse_gaps_follow_rate() {
        let rho = rat(1, 100);
        for rate in [int(1) + rho, int(1) - rho, rat(1003, 1000)] {
            let mut c = NodeClock::new(7, 900, rate, rat(1, 3), 0, 1000, TAU_MAX);
            let pulses = c.advance_to(50_000);
            assert!(pulses.len() >= 40);
            for w in pulses.windows(2) {
                let gap = w[1] - w[0];
                let lo = floor(&(int(1000) / (int(1) + rho))) as u64;
                let hi = ceil(&(int(1000) / (int(1) - rho))) as u64;
                assert!(lo <= gap && gap <= hi, "gap {gap}");
            }
        }
    }

    #[test]
    fn pulse_times_match_scheduled_time() {
        let mut c = NodeClock::new(3, 800, rat(997, 1000), rat(1, 2), 10, 1000, TAU_MAX);
        for _ in 0..20 {
            let next = c.next_pulse_time();
            assert!(c.advance_to(next - 1).is_empty());
            assert_eq!(c.advance_to(next), vec![next]);
        }
    }

    #[test]
    fn wraparound_is_unobservable() {
        // compare a small wrapping counter with a wide counter carrying the
        // same distance to the scheduled tick
        let small_max = 5_000u64;
        let rate = rat(1001, 1000);
        let mut wrap = NodeClock::new(small_max - 37, 420, rate, int(0), 0, 1000, small_max);
        let dist = (420 + small_max - (small_max - 37)) % small_max;
        let mut wide = NodeClock::new(small_max - 37, small_max - 37 + dist, rate, int(0), 0, 1000, 1 << 40);
        let mut last = 0;
        for step in 1..=40u64 {
            let t = step * 977;
            let pw = wrap.advance_to(t);
            let pv = wide.advance_to(t);
            assert_eq!(pw, pv);
            for p in pw {
                assert!(p >= last);
                last = p;
            }
            assert_eq!(wrap.read_phase(), wide.read_phase());
            if step % 7 == 0 {
                let d = (step as i64 * 37) % 400 - 200;
                assert_eq!(wrap.apply_adjustment(d), wide.apply_adjustment(d));
            }
        }
    }

    proptest! {
        #[test]
        fn adjustment_is_ring_addition(tau in 0u64..TAU_MAX, sch in 0u64..TAU_MAX, delta in -500i64..=500) {
            let mut c = unit(tau, sch, 1000);
            let before = c.read_phase() as i64;
            c.apply_adjustment(delta);
            prop_assert_eq!(c.read_phase() as i64, (before + delta).rem_euclid(1000));
        }
    }
}
