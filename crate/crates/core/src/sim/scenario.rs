//! Scenario files: every system constant of one execution.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{format_rational, int, Exact, Rational};
use crate::resync::Variant;

/// Faulty-node behaviour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Crash,
    Random,
    Equivocate,
    Keeper,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Crash, Strategy::Random, Strategy::Equivocate, Strategy::Keeper];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Crash => "crash",
            Strategy::Random => "random",
            Strategy::Equivocate => "equivocate",
            Strategy::Keeper => "keeper",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// How the adversary picks network delays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DelayMode {
    #[default]
    Random,
    Max,
    Zero,
}

/// How igc pulse gaps are chosen within `[T0 − Δ0, T0 + Δ0]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IgcMode {
    #[default]
    Random,
    /// Gaps alternate between the two bounds.
    JitterMax,
}

/// How per-node igc arrival offsets are chosen within `[0, Π0]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetMode {
    #[default]
    Random,
    /// Half of the nodes at 0, the rest at Π0.
    Extreme,
}

/// How clock rates are chosen within `[1 − ρ, 1 + ρ]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DriftMode {
    #[default]
    Random,
    /// Alternating `1 + ρ` / `1 − ρ`.
    Extreme,
    None,
}

/// Initial phase layout of the nonfaulty nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPreset {
    /// Counters and scheduled ticks uniform over `[[τ_max]]`.
    #[default]
    Random,
    /// Phases spread over an arc of length `spread` (fraction of the cycle).
    Synchronized,
    /// Two equal clusters half a cycle apart.
    Antipodal,
    /// Every node at the same phase.
    Unanimous,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub strategy: Strategy,
    #[serde(default)]
    pub delay: DelayMode,
    #[serde(default)]
    pub igc: IgcMode,
    #[serde(default)]
    pub igc_offsets: OffsetMode,
    #[serde(default)]
    pub drift: DriftMode,
    /// Adversary sees the current step's nonfaulty coins before choosing its own.
    #[serde(default)]
    pub rushing: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub preset: InitialPreset,
    /// Arc length of the synchronized preset; defaults to ε1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<Exact>,
    /// Stale messages already in flight at time zero.
    #[serde(default)]
    pub garbage: bool,
}

/// Explicit protocol parameters; anything left out is solved for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProtocolOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon1: Option<Exact>,
    /// Inner significance threshold, in plane units (`|oa|₁ = 1/4`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<Exact>,
    /// Outer significance threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0p: Option<Exact>,
}

impl ProtocolOverrides {
    pub fn is_empty(&self) -> bool {
        self.k1.is_none() && self.epsilon1.is_none() && self.r0.is_none() && self.r0p.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub f: usize,
    pub variant: Variant,
    /// Nominal pulse cycle `T`, ticks.
    pub period: u64,
    /// Counter wraparound `τ_max`, ticks.
    pub tau_max: u64,
    /// Drift bound `ρ`.
    pub drift: Exact,
    /// Network delay bound `d_m`, quanta.
    pub max_msg_delay: u64,
    /// Per-end processing bound `d_p`, quanta.
    pub max_proc_delay: u64,
    /// igc nominal cycle `T0`, quanta.
    pub igc_cycle: u64,
    /// igc jitter `Δ0`, quanta.
    pub igc_jitter: u64,
    /// igc arrival skew `Π0`, quanta.
    pub igc_skew: u64,
    /// Time reserved for one resynchronization round `Γ0`, quanta.
    pub resync_budget: u64,
    /// Step length `Φ_s`, ticks.
    pub step_ticks: u64,
    /// Second-stage steps `K2`; only 1 is supported.
    #[serde(default = "one")]
    pub k2: u32,
    /// Agreement fairness for variant A.
    #[serde(default = "default_fairness")]
    pub fairness: Exact,
    pub seed: u64,
    /// Number of igc-driven rounds to simulate.
    pub rounds: u32,
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default, skip_serializing_if = "ProtocolOverrides::is_empty")]
    pub protocol: ProtocolOverrides,
}

fn one() -> u32 {
    1
}

fn default_fairness() -> Exact {
    Exact(Rational::new(35, 100))
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn rho(&self) -> Rational {
        self.drift.0
    }

    /// `d = d_m + 2 d_p`.
    pub fn total_delay(&self) -> u64 {
        self.max_msg_delay + 2 * self.max_proc_delay
    }

    /// `π_s = Π0 + 2ρΓ0`.
    pub fn step_skew(&self) -> Rational {
        int(self.igc_skew as i128) + self.rho() * 2 * int(self.resync_budget as i128)
    }

    /// Shortest real duration of a step, `Φ_s / (1 + ρ)`.
    pub fn step_min(&self) -> Rational {
        int(self.step_ticks as i128) / (int(1) + self.rho())
    }

    /// Longest real duration of a step, `Φ_s / (1 − ρ)`.
    pub fn step_max(&self) -> Rational {
        int(self.step_ticks as i128) / (int(1) - self.rho())
    }

    /// Structural checks that do not depend on the solved parameters.
    pub fn validate_basic(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Constraint(m));
        if self.f == 0 || self.n <= 3 * self.f {
            return fail(format!("n > 3f with f >= 1 (n = {}, f = {})", self.n, self.f));
        }
        if self.variant == Variant::R && 2 * self.f * self.f >= self.n - self.f {
            return fail(format!("f < sqrt((n - f)/2) for the coin variant (n = {}, f = {})", self.n, self.f));
        }
        if self.k2 != 1 {
            return fail(format!("K2 = 1 (got {})", self.k2));
        }
        if self.period < 2 || self.tau_max <= self.period {
            return fail("tau_max > T >= 2".into());
        }
        let rho = self.rho();
        if rho < int(0) || rho >= int(1) {
            return fail(format!("0 <= rho < 1 (rho = {})", format_rational(&rho)));
        }
        if self.max_msg_delay < 2 || self.max_proc_delay < 1 {
            return fail("d_m >= 2 and d_p >= 1 quanta".into());
        }
        let fair = self.fairness.0;
        if fair <= int(0) || fair > int(1) {
            return fail("0 < fairness <= 1".into());
        }
        if self.igc_jitter >= self.igc_cycle {
            return fail("igc jitter below igc cycle".into());
        }
        if self.rounds == 0 {
            return fail("at least one round".into());
        }
        Ok(())
    }

    /// Timing separation for a round of `steps` steps.
    pub fn validate_timing(&self, steps: u32) -> Result<()> {
        let fail = |m: String| Err(Error::Constraint(m));
        let gamma = int(self.resync_budget as i128);
        let gap_min = self.igc_cycle - self.igc_jitter;
        if gap_min <= self.resync_budget {
            return fail(format!(
                "T0 - Delta0 > Gamma0 ({} <= {})",
                gap_min, self.resync_budget
            ));
        }
        let round_len = self.step_max() * int(steps as i128);
        if round_len >= gamma {
            return fail(format!(
                "K_s * Phi_s+ < Gamma0 ({} >= {})",
                format_rational(&round_len),
                self.resync_budget
            ));
        }
        let need = self.step_skew() * 2 + int(self.total_delay() as i128);
        if self.step_min() <= need {
            return fail(format!(
                "Phi_s- > 2 pi_s + d ({} <= {})",
                format_rational(&self.step_min()),
                format_rational(&need)
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// A scenario that satisfies every timing constraint for up to 10 steps.
    pub fn base(n: usize, f: usize, variant: Variant) -> Scenario {
        Scenario {
            n,
            f,
            variant,
            period: 100_000,
            tau_max: 1 << 32,
            drift: Exact(Rational::new(1, 100_000)),
            max_msg_delay: 20,
            max_proc_delay: 5,
            igc_cycle: 150_000,
            igc_jitter: 50_000,
            igc_skew: 20,
            resync_budget: 2_000,
            step_ticks: 150,
            k2: 1,
            fairness: default_fairness(),
            seed: 1,
            rounds: 6,
            adversary: AdversaryConfig {
                strategy: Strategy::Crash,
                delay: DelayMode::Random,
                igc: IgcMode::Random,
                igc_offsets: OffsetMode::Random,
                drift: DriftMode::Random,
                rushing: false,
            },
            initial: InitialConfig::default(),
            protocol: ProtocolOverrides::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let s = fixtures::base(5, 1, Variant::R);
        let text = s.to_toml_string();
        assert_eq!(Scenario::from_toml_str(&text).unwrap(), s);
        let bad = format!("bogus = 3\n{text}");
        assert!(Scenario::from_toml_str(&bad).is_err());
    }

    #[test]
    fn basic_validation() {
        assert!(fixtures::base(5, 1, Variant::R).validate_basic().is_ok());
        assert!(fixtures::base(6, 2, Variant::A).validate_basic().is_err());
        // 2f² = 8 >= n - f = 8
        assert!(fixtures::base(10, 2, Variant::R).validate_basic().is_err());
        assert!(fixtures::base(10, 2, Variant::A).validate_basic().is_ok());
    }

    #[test]
    fn timing_validation_names_the_inequality() {
        let mut s = fixtures::base(5, 1, Variant::R);
        assert!(s.validate_timing(4).is_ok());
        let err = s.validate_timing(20).unwrap_err().to_string();
        assert!(err.contains("K_s * Phi_s+ < Gamma0"), "{err}");
        s.step_ticks = 60;
        let err = s.validate_timing(4).unwrap_err().to_string();
        assert!(err.contains("Phi_s- > 2 pi_s + d"), "{err}");
        s.step_ticks = 150;
        s.igc_jitter = 148_500;
        let err = s.validate_timing(4).unwrap_err().to_string();
        assert!(err.contains("T0 - Delta0 > Gamma0"), "{err}");
    }

    #[test]
    fn strategy_names() {
        assert_eq!("keeper".parse::<Strategy>().unwrap(), Strategy::Keeper);
        assert!(matches!("sneaky".parse::<Strategy>(), Err(Error::UnknownStrategy(_))));
    }
}
