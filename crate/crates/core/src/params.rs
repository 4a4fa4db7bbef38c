//! Analysis parameters: derivation from scenario constants, the feasibility
//! checklist, and a solver for the free protocol parameters.
//!
//! Plane quantities use the diamond scale where the rim sits at 1-norm
//! `1/4`; ring quantities are fractions of the nominal cycle.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fta::convergence_constant;
use crate::rational::{big_to_f64, format_big, from_big, to_big, BigRational, Rational};
use crate::resync::{ResyncConfig, Variant};
use crate::sim::scenario::Scenario;

const MAX_K1: u32 = 64;
const MAX_FIXED_POINT_ITERATIONS: usize = 256;

fn big(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn bint(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// 1-norm radius of the diamond.
pub fn rim() -> BigRational {
    big(1, 4)
}

/// Per-round success probability the convergence argument guarantees.
pub fn round_success_probability(variant: Variant) -> Rational {
    match variant {
        Variant::A => Rational::new(35, 100),
        Variant::R => Rational::new(2397, 10_000),
    }
}

/// The free protocol parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Choice {
    pub k1: u32,
    pub target_error: BigRational,
    pub inner_threshold: BigRational,
    pub outer_threshold: BigRational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// FTA contraction factor `c`.
    pub convergence: u32,
    /// First-stage steps `K1`.
    pub k1: u32,
    /// Steps per round `K_s`.
    pub steps: u32,
    #[serde(with = "crate::rational::serde_big")]
    pub drift: BigRational,
    /// `δ_s = π_s / T`.
    #[serde(with = "crate::rational::serde_big")]
    pub step_skew: BigRational,
    /// `ε0`: drift accumulated between two rounds, as a cycle fraction.
    #[serde(with = "crate::rational::serde_big")]
    pub drift_error: BigRational,
    /// `ε1`: cover length a successful round guarantees.
    #[serde(with = "crate::rational::serde_big")]
    pub target_error: BigRational,
    /// `ε1'`: largest adjustment of a synchronized round.
    #[serde(with = "crate::rational::serde_big")]
    pub adjust_bound: BigRational,
    /// `𝜀0`: per-axis spread of synchronized embedded phases.
    #[serde(with = "crate::rational::serde_big")]
    pub sync_spread: BigRational,
    /// `𝜀1`: per-axis anchor spread after the first stage, synchronized start.
    #[serde(with = "crate::rational::serde_big")]
    pub contracted_spread: BigRational,
    /// `𝜀2`: per-axis anchor spread after the first stage, arbitrary start.
    #[serde(with = "crate::rational::serde_big")]
    pub anchor_spread: BigRational,
    /// `r0`.
    #[serde(with = "crate::rational::serde_big")]
    pub inner_threshold: BigRational,
    /// `r0'`.
    #[serde(with = "crate::rational::serde_big")]
    pub outer_threshold: BigRational,
    /// `η`.
    #[serde(with = "crate::rational::serde_big")]
    pub success_probability: BigRational,
    /// Precision bound `Π = (ε0 + ε1)·T`, ticks.
    #[serde(with = "crate::rational::serde_big")]
    pub precision: BigRational,
    /// Accuracy bound `Δ`, ticks.
    #[serde(with = "crate::rational::serde_big")]
    pub accuracy: BigRational,
    pub accuracy_iterations: usize,
    /// Bound on the accuracy error of a synchronized round, equal to `ε1'`.
    #[serde(with = "crate::rational::serde_big")]
    pub accuracy_error_bound: BigRational,
    pub period: u64,
}

/// One inequality of the checklist, normalised to `lhs < rhs` or `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub relation: &'static str,
    /// `None` when the left side is undefined (a vanishing denominator).
    pub lhs: Option<BigRational>,
    pub rhs: BigRational,
    pub holds: bool,
}

impl Check {
    fn new(name: &'static str, strict: bool, lhs: Option<BigRational>, rhs: BigRational) -> Self {
        let holds = match &lhs {
            Some(l) if strict => *l < rhs,
            Some(l) => *l <= rhs,
            None => false,
        };
        Check { name, relation: if strict { "<" } else { "<=" }, lhs, rhs, holds }
    }

    /// `rhs − lhs`; positive (or zero for `≤`) when the inequality holds.
    pub fn margin(&self) -> Option<BigRational> {
        self.lhs.as_ref().map(|l| &self.rhs - l)
    }
}

/// Accuracy bound: least fixed point of
/// `Δ = ⌈(T + Δ)/(T0 − Δ0)⌉·ε1'·T + ρ(T + Δ)`.
pub fn accuracy_fixed_point(
    period: u64,
    drift: &BigRational,
    adjust_bound: &BigRational,
    min_gap: u64,
) -> Result<(BigRational, usize)> {
    if min_gap == 0 || *drift >= BigRational::one() {
        return Err(Error::FixedPointDivergence { iterations: 0 });
    }
    let t = bint(period);
    let gap = bint(min_gap);
    let one = BigRational::one();
    // for a fixed round count m the equation is linear in Δ
    let at = |m: &BigInt| -> BigRational {
        (BigRational::from_integer(m.clone()) * adjust_bound * &t + drift * &t) / (&one - drift)
    };
    let rounds = |delta: &BigRational| -> BigInt { ((&t + delta) / &gap).ceil().to_integer() };
    let mut delta = BigRational::zero();
    for i in 1..=MAX_FIXED_POINT_ITERATIONS {
        let next = at(&rounds(&delta));
        if next == delta {
            return Ok((delta, i));
        }
        delta = next;
    }
    Err(Error::FixedPointDivergence { iterations: MAX_FIXED_POINT_ITERATIONS })
}

struct Base {
    c: u32,
    rho: BigRational,
    step_skew: BigRational,
    drift_error: BigRational,
}

impl Base {
    fn new(s: &Scenario) -> Result<Self> {
        let c = convergence_constant(s.n, s.f)?;
        let rho = to_big(&s.rho());
        let t = bint(s.period);
        let step_skew = to_big(&s.step_skew()) / &t;
        let drift_error = big(2, 1) * &rho * bint(s.igc_cycle + s.igc_jitter) / &t;
        Ok(Base { c, rho, step_skew, drift_error })
    }

    /// `(1 + ρ)·δ_s`.
    fn skew_term(&self) -> BigRational {
        (BigRational::one() + &self.rho) * &self.step_skew
    }

    fn shrink(&self, k1: u32) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(self.c).pow(k1))
    }
}

pub fn derive_params(s: &Scenario, choice: &Choice) -> Result<DerivedParams> {
    let base = Base::new(s)?;
    derive_with(s, &base, choice)
}

fn derive_with(s: &Scenario, base: &Base, choice: &Choice) -> Result<DerivedParams> {
    if choice.k1 == 0 {
        return Err(Error::Config("K1 must be at least 1".into()));
    }
    let shrink = base.shrink(choice.k1);
    let eps1 = choice.target_error.clone();
    let adjust_bound = &eps1 + &base.drift_error + base.skew_term();
    let sync_spread = big(4, 1) * &adjust_bound * rim();
    let contracted_spread = &shrink * &sync_spread;
    let anchor_spread = big(2, 1) * &shrink * rim();
    let t = bint(s.period);
    let precision = (&base.drift_error + &eps1) * &t;
    let (accuracy, accuracy_iterations) =
        accuracy_fixed_point(s.period, &base.rho, &adjust_bound, s.igc_cycle - s.igc_jitter)?;
    Ok(DerivedParams {
        convergence: base.c,
        k1: choice.k1,
        steps: choice.k1 + s.k2,
        drift: base.rho.clone(),
        step_skew: base.step_skew.clone(),
        drift_error: base.drift_error.clone(),
        target_error: eps1,
        accuracy_error_bound: adjust_bound.clone(),
        adjust_bound,
        sync_spread,
        contracted_spread,
        anchor_spread,
        inner_threshold: choice.inner_threshold.clone(),
        outer_threshold: choice.outer_threshold.clone(),
        success_probability: to_big(&round_success_probability(s.variant)),
        precision,
        accuracy,
        accuracy_iterations,
        period: s.period,
    })
}

impl DerivedParams {
    fn shrink(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(self.convergence).pow(self.k1))
    }

    pub fn choice(&self) -> Choice {
        Choice {
            k1: self.k1,
            target_error: self.target_error.clone(),
            inner_threshold: self.inner_threshold.clone(),
            outer_threshold: self.outer_threshold.clone(),
        }
    }

    /// Protocol configuration for the simulator.
    pub fn resync_config(&self, s: &Scenario) -> Result<ResyncConfig> {
        let narrow = |v: &BigRational, what: &'static str| from_big(v).ok_or(Error::Overflow(what));
        let cfg = ResyncConfig {
            n: s.n,
            f: s.f,
            period: s.period,
            k1: self.k1,
            variant: s.variant,
            r0: narrow(&self.inner_threshold, "inner threshold")?,
            r0p: narrow(&self.outer_threshold, "outer threshold")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn target_error_exact(&self) -> Result<Rational> {
        from_big(&self.target_error).ok_or(Error::Overflow("target error"))
    }

    /// Name, exact value and approximation of every derived quantity.
    pub fn table(&self) -> Vec<(&'static str, String, f64)> {
        let mut rows = vec![
            ("convergence", self.convergence.to_string(), self.convergence as f64),
            ("k1", self.k1.to_string(), self.k1 as f64),
            ("steps", self.steps.to_string(), self.steps as f64),
            ("accuracy_iterations", self.accuracy_iterations.to_string(), self.accuracy_iterations as f64),
        ];
        let exact = [
            ("drift", &self.drift),
            ("step_skew", &self.step_skew),
            ("drift_error", &self.drift_error),
            ("target_error", &self.target_error),
            ("adjust_bound", &self.adjust_bound),
            ("sync_spread", &self.sync_spread),
            ("contracted_spread", &self.contracted_spread),
            ("anchor_spread", &self.anchor_spread),
            ("inner_threshold", &self.inner_threshold),
            ("outer_threshold", &self.outer_threshold),
            ("success_probability", &self.success_probability),
            ("precision", &self.precision),
            ("accuracy", &self.accuracy),
            ("accuracy_error_bound", &self.accuracy_error_bound),
        ];
        rows.extend(exact.iter().map(|(k, v)| (*k, format_big(v), big_to_f64(v))));
        rows
    }
}

/// Evaluates every feasibility inequality.
pub fn checklist(p: &DerivedParams) -> Vec<Check> {
    let one = BigRational::one();
    let four = big(4, 1);
    let oa = rim();
    let shrink = p.shrink();
    let skew_term = (&one + &p.drift) * &p.step_skew;
    let eps1 = &p.target_error;
    let eps1p = &p.adjust_bound;
    let eps0 = &p.drift_error;
    let r0 = &p.inner_threshold;
    let r0p = &p.outer_threshold;

    let rim_gap = &one - &four * eps1p;
    let error_floor = rim_gap.is_positive().then(|| &shrink * eps1p / &rim_gap + &skew_term);
    let err_gap = eps1 - eps0;
    let threshold_floor =
        err_gap.is_positive().then(|| big(2, 1) * &shrink * (&one / (&four * &err_gap) + &one));
    let random_start = (r0 > &p.anchor_spread)
        .then(|| &one / (&four * r0 / &p.anchor_spread - &four) + eps0);

    vec![
        Check::new("error_floor", false, error_floor, eps1.clone()),
        Check::new("error_ceiling", true, Some(eps1.clone()), big(1, 4) - eps0 - &skew_term),
        Check::new("threshold_floor", true, threshold_floor, r0 / &oa),
        Check::new("threshold_ceiling", true, Some(r0 / &oa), rim_gap.clone()),
        Check::new("threshold_above_contracted_spread", true, Some(p.contracted_spread.clone()), r0.clone()),
        Check::new("band_ordered", true, Some(r0.clone()), r0p.clone()),
        Check::new("outer_threshold_below_rim", true, Some(r0p.clone()), &oa - &p.sync_spread),
        Check::new("random_start_error_bound", false, random_start, eps1.clone()),
        Check::new("threshold_above_anchor_spread", true, Some(p.anchor_spread.clone()), r0.clone()),
        Check::new("band_wider_than_spread", true, Some(p.contracted_spread.clone()), r0p - r0),
    ]
}

/// Names of the violated inequalities; empty when the parameters are feasible.
pub fn check_constraints(p: &DerivedParams) -> Vec<&'static str> {
    checklist(p).into_iter().filter(|c| !c.holds).map(|c| c.name).collect()
}

/// Target error from the small-drift recipe, `c^{-K}/12 + (1+ρ)δ_s` for
/// the smallest `K` keeping it at most `1/32`.
fn recipe_error(base: &Base) -> Option<(u32, BigRational)> {
    let limit = big(1, 32);
    let small = big(2, 1) * &base.drift_error <= limit && big(2, 1) * base.skew_term() <= limit;
    if !small {
        return None;
    }
    (1..=MAX_K1).find_map(|k| {
        let e = base.shrink(k) / bint(12) + base.skew_term();
        (e <= limit).then_some((k, e))
    })
}

/// Picks thresholds on a decimal grid: `r0` just above every lower bound and
/// `r0'` just below the rim bound, keeping the band as wide as possible.
fn pick_thresholds(
    s: &Scenario,
    base: &Base,
    k1: u32,
    eps1: &BigRational,
) -> Result<Option<(BigRational, BigRational)>> {
    let probe = Choice {
        k1,
        target_error: eps1.clone(),
        inner_threshold: big(1, 8),
        outer_threshold: big(3, 16),
    };
    let p = derive_with(s, base, &probe)?;
    let one = BigRational::one();
    let four = big(4, 1);
    let oa = rim();
    let err_gap = eps1 - &p.drift_error;
    if !err_gap.is_positive() {
        return Ok(None);
    }
    let shrink = base.shrink(k1);
    let lower = [
        &oa * big(2, 1) * &shrink * (&one / (&four * &err_gap) + &one),
        p.contracted_spread.clone(),
        p.anchor_spread.clone(),
        &p.anchor_spread * (&one / &err_gap + &four) / &four,
    ]
    .into_iter()
    .max()
    .expect("non-empty");
    let r0_upper = &oa * (&one - &four * &p.adjust_bound);
    let r0p_upper = &oa - &p.sync_spread;
    let mut denom = BigInt::from(4000);
    for _ in 0..4 {
        let d = BigRational::from_integer(denom.clone());
        let r0 = BigRational::new((&lower * &d).floor().to_integer() + 1, denom.clone());
        let r0p = BigRational::new((&r0p_upper * &d).ceil().to_integer() - 1, denom.clone());
        if r0 < r0_upper && &r0p - &r0 > p.contracted_spread {
            return Ok(Some((r0, r0p)));
        }
        denom *= 10;
    }
    Ok(None)
}

fn first_violation(p: &DerivedParams) -> Option<&'static str> {
    check_constraints(p).into_iter().next()
}

/// Finds feasible protocol parameters, honouring any explicit overrides in
/// the scenario.
pub fn solve_params(s: &Scenario) -> Result<DerivedParams> {
    s.validate_basic()?;
    let base = Base::new(s)?;
    let ov = &s.protocol;
    let k_range = |start: u32| match ov.k1 {
        Some(k) => k..=k,
        None => start..=MAX_K1,
    };
    let mut binding = String::from("no candidate target error");

    let attempt = |k: u32, eps1: &BigRational, binding: &mut String| -> Result<Option<DerivedParams>> {
        let picked = match (&ov.r0, &ov.r0p) {
            (Some(a), Some(b)) => Some((to_big(&a.0), to_big(&b.0))),
            _ => pick_thresholds(s, &base, k, eps1)?.map(|(a, b)| {
                (ov.r0.map(|v| to_big(&v.0)).unwrap_or(a), ov.r0p.map(|v| to_big(&v.0)).unwrap_or(b))
            }),
        };
        let Some((r0, r0p)) = picked else {
            *binding = "threshold_floor".into();
            return Ok(None);
        };
        let choice = Choice { k1: k, target_error: eps1.clone(), inner_threshold: r0, outer_threshold: r0p };
        let p = derive_with(s, &base, &choice)?;
        match first_violation(&p) {
            None => Ok(Some(p)),
            Some(name) => {
                *binding = name.to_string();
                Ok(None)
            }
        }
    };

    if let Some(e) = &ov.epsilon1 {
        let eps1 = to_big(&e.0);
        for k in k_range(1) {
            if let Some(p) = attempt(k, &eps1, &mut binding)? {
                return Ok(p);
            }
        }
        return Err(Error::Unsolvable { max_k1: k_range(1).end().to_owned(), binding });
    }

    if let Some((k_start, eps1)) = recipe_error(&base) {
        for k in k_range(k_start) {
            if let Some(p) = attempt(k, &eps1, &mut binding)? {
                return Ok(p);
            }
        }
    }

    // fallback: sweep the target error across its admissible interval
    let floor = &base.drift_error + base.skew_term();
    let ceiling = big(1, 4) - &base.drift_error - base.skew_term();
    if ceiling > floor {
        for k in k_range(1) {
            for j in 1..32 {
                let eps1 = &floor + (&ceiling - &floor) * big(j, 32);
                if let Some(p) = attempt(k, &eps1, &mut binding)? {
                    return Ok(p);
                }
            }
        }
    } else {
        binding = "error_ceiling".into();
    }
    Err(Error::Unsolvable { max_k1: *k_range(1).end(), binding })
}

/// Parameters for exploratory runs: the scenario's explicit overrides laid
/// over a solution of the override-free scenario, with no feasibility check.
pub fn forced_params(s: &Scenario) -> Result<DerivedParams> {
    if let Ok(p) = solve_params(s) {
        return Ok(p);
    }
    let mut plain = s.clone();
    plain.protocol = Default::default();
    let base = solve_params(&plain)?.choice();
    let ov = &s.protocol;
    let choice = Choice {
        k1: ov.k1.unwrap_or(base.k1),
        target_error: ov.epsilon1.map(|e| to_big(&e.0)).unwrap_or(base.target_error),
        inner_threshold: ov.r0.map(|e| to_big(&e.0)).unwrap_or(base.inner_threshold),
        outer_threshold: ov.r0p.map(|e| to_big(&e.0)).unwrap_or(base.outer_threshold),
    };
    derive_params(s, &choice)
}

/// Full scenario check: structure, solved parameters, and round timing.
pub fn validate(s: &Scenario, p: &DerivedParams) -> Result<()> {
    s.validate_basic()?;
    s.validate_timing(p.steps)?;
    p.resync_config(s)?;
    let bad = check_constraints(p);
    if !bad.is_empty() {
        return Err(Error::Constraint(bad.join(", ")));
    }
    Ok(())
}

/// Integer ceiling of a big rational, saturating into `u64`.
pub fn ceil_u64(v: &BigRational) -> u64 {
    use num_traits::ToPrimitive;
    let c = v.ceil().to_integer();
    if c.is_negative() {
        0
    } else {
        c.to_u64().unwrap_or(u64::MAX)
    }
}

/// Integer floor of a big rational, saturating into `u64`.
pub fn floor_u64(v: &BigRational) -> u64 {
    use num_traits::ToPrimitive;
    let c = v.numer().div_floor(v.denom());
    if c.is_negative() {
        0
    } else {
        c.to_u64().unwrap_or(u64::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, Exact};
    use crate::sim::scenario::fixtures;
    use proptest::prelude::*;

    /// Drift-free, skew-free constants with `c = 2`.
    fn ideal() -> Scenario {
        let mut s = fixtures::base(4, 1, Variant::A);
        s.drift = Exact(rat(0, 1));
        s.igc_skew = 0;
        s
    }

    fn example_choice(k1: u32) -> Choice {
        Choice {
            k1,
            target_error: big(1, 32),
            inner_threshold: big(7, 10) * rim(),
            outer_threshold: big(8, 10) * rim(),
        }
    }

    #[test]
    fn drift_free_degeneracy() {
        let p = derive_params(&ideal(), &example_choice(5)).unwrap();
        assert!(p.drift_error.is_zero());
        assert!(p.step_skew.is_zero());
        assert_eq!(p.adjust_bound, p.target_error);
        assert_eq!(p.contracted_spread, big(1, 1024));
        assert_eq!(p.anchor_spread, big(1, 64));
    }

    #[test]
    fn drift_error_by_substitution() {
        let mut s = ideal();
        s.drift = Exact(rat(1, 10_000));
        s.period = 1000;
        s.igc_cycle = 400;
        s.igc_jitter = 100;
        let base = Base::new(&s).unwrap();
        assert_eq!(base.drift_error, big(1, 10_000));
    }

    #[test]
    fn worked_example_is_feasible() {
        let p = derive_params(&ideal(), &example_choice(5)).unwrap();
        assert_eq!(check_constraints(&p), Vec::<&str>::new());
        let random_start = checklist(&p).into_iter().find(|c| c.name == "random_start_error_bound").unwrap();
        let lhs = big_to_f64(random_start.lhs.as_ref().unwrap());
        assert!((lhs - 1.0 / 40.8).abs() < 1e-12, "{lhs}");
    }

    #[test]
    fn single_step_is_infeasible() {
        let p = derive_params(&ideal(), &example_choice(1)).unwrap();
        assert!(check_constraints(&p).contains(&"threshold_floor"));
    }

    #[test]
    fn quarter_target_error_breaks_ceiling() {
        let mut c = example_choice(5);
        c.target_error = big(1, 4);
        let p = derive_params(&ideal(), &c).unwrap();
        assert!(check_constraints(&p).contains(&"error_ceiling"));
    }

    #[test]
    fn collapsed_band_is_flagged() {
        let mut c = example_choice(5);
        c.outer_threshold = c.inner_threshold.clone();
        let p = derive_params(&ideal(), &c).unwrap();
        let v = check_constraints(&p);
        assert!(v.contains(&"band_wider_than_spread"));
        assert!(v.contains(&"band_ordered"));
    }

    #[test]
    fn accuracy_fixed_point_substitutes_back() {
        let rho = big(1, 100_000);
        let eps = big(3, 100);
        let (delta, iters) = accuracy_fixed_point(100_000, &rho, &eps, 100_000).unwrap();
        assert!(iters < 10);
        let t = bint(100_000);
        let m = ((&t + &delta) / bint(100_000)).ceil();
        assert_eq!(delta, m * &eps * &t + &rho * (&t + &delta));
    }

    #[test]
    fn accuracy_fixed_point_divergence_is_reported() {
        // each extra round adds more than a full gap
        let r = accuracy_fixed_point(1000, &big(0, 1), &big(2, 1), 1000);
        assert!(matches!(r, Err(Error::FixedPointDivergence { .. })));
    }

    #[test]
    fn solver_matches_expected_step_counts() {
        for (n, f, variant, k1) in [(5, 1, Variant::R, 3), (31, 3, Variant::R, 2), (7, 2, Variant::A, 5)] {
            let s = fixtures::base(n, f, variant);
            let p = solve_params(&s).unwrap();
            assert_eq!(p.k1, k1, "n = {n}");
            assert!(check_constraints(&p).is_empty());
            validate(&s, &p).unwrap();
        }
    }

    #[test]
    fn solver_closes_error_floor_with_margin_when_ideal() {
        let p = solve_params(&ideal()).unwrap();
        let floor = checklist(&p).into_iter().find(|c| c.name == "error_floor").unwrap();
        assert!(floor.margin().unwrap().is_positive());
    }

    #[test]
    fn solver_honours_overrides() {
        let mut s = fixtures::base(5, 1, Variant::R);
        s.protocol.k1 = Some(4);
        let p = solve_params(&s).unwrap();
        assert_eq!(p.k1, 4);
        s.protocol.k1 = Some(1);
        assert!(matches!(solve_params(&s), Err(Error::Unsolvable { .. })));
    }

    #[test]
    fn large_drift_is_unsolvable() {
        let mut s = fixtures::base(5, 1, Variant::R);
        s.drift = Exact(rat(1, 5));
        match solve_params(&s) {
            Err(Error::Unsolvable { binding, .. }) => assert!(!binding.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn more_steps_never_hurt(n in 4usize..14, rho_den in 1_000i128..1_000_000, skew in 0u64..60) {
            let f = (n - 1) / 3;
            let mut s = fixtures::base(n, f, Variant::A);
            s.drift = Exact(rat(1, rho_den));
            s.igc_skew = skew;
            if let Ok(p) = solve_params(&s) {
                prop_assert!(check_constraints(&p).is_empty());
                let mut c = p.choice();
                c.k1 += 3;
                let q = derive_params(&s, &c).unwrap();
                prop_assert!(check_constraints(&q).is_empty());
            }
        }
    }

    #[test]
    fn forced_params_keep_out_of_range_overrides() {
        let mut s = fixtures::base(5, 1, Variant::R);
        s.protocol.epsilon1 = Some(Exact(rat(1, 4)));
        assert!(solve_params(&s).is_err());
        let p = forced_params(&s).unwrap();
        assert_eq!(p.target_error, big(1, 4));
        assert!(check_constraints(&p).contains(&"error_ceiling"));
    }
}
