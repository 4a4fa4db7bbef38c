//! Second-stage significance machinery: coins, the random-walk tally, the
//! two-threshold significance rule, and an ideal probabilistic-agreement
//! primitive standing in for a constant-round randomized agreement protocol.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rational::Rational;

/// An unbiased ±1 coin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Coin {
    Minus,
    Plus,
}

impl Coin {
    pub fn value(self) -> i64 {
        match self {
            Coin::Minus => -1,
            Coin::Plus => 1,
        }
    }

    pub fn negate(self) -> Coin {
        match self {
            Coin::Minus => Coin::Plus,
            Coin::Plus => Coin::Minus,
        }
    }
}

impl From<Coin> for i8 {
    fn from(c: Coin) -> i8 {
        c.value() as i8
    }
}

impl TryFrom<i8> for Coin {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Coin::Minus),
            1 => Ok(Coin::Plus),
            other => Err(format!("coin must be -1 or 1, got {other}")),
        }
    }
}

/// The coins one node collected, indexed by sender.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoinVector(pub Vec<Coin>);

/// Binary significance of an anchor point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Significance(u8);

impl Significance {
    pub const ZERO: Significance = Significance(0);
    pub const ONE: Significance = Significance(1);

    pub fn from_bit(b: bool) -> Self {
        Significance(b as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

pub fn flip_coin<R: Rng + ?Sized>(rng: &mut R) -> Coin {
    if rng.gen::<bool>() {
        Coin::Plus
    } else {
        Coin::Minus
    }
}

/// 1 when the coins sum to a positive value, 0 otherwise.
pub fn tally_decide(coins: &CoinVector) -> u8 {
    let sum: i64 = coins.0.iter().map(|c| c.value()).sum();
    (sum > 0) as u8
}

/// Two-threshold rule: 1 at or above the outer threshold `r0p`, 0 at or below
/// `r0`, the tie-breaking bit in between.
pub fn significance(r_q: Rational, r0: Rational, r0p: Rational, b_w: u8) -> Significance {
    debug_assert!(r0 < r0p);
    if r_q >= r0p {
        Significance::ONE
    } else if r_q <= r0 {
        Significance::ZERO
    } else {
        Significance(b_w.min(1))
    }
}

/// Draws `true` with probability `p` exactly (for rational `p` in `[0, 1]`).
pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: Rational) -> bool {
    let den = *p.denom();
    let num = *p.numer();
    if num <= 0 {
        return false;
    }
    if num >= den {
        return true;
    }
    rng.gen_range(0..den) < num
}

/// Ideal probabilistic binary agreement among the nonfaulty nodes.
///
/// Unanimous inputs always yield that value everywhere. Otherwise one hidden
/// common coin is drawn: with probability `fairness` every node gets the same
/// fair random bit; in the remaining case `assign` (the adversary) picks each
/// node's output. Whatever `assign` returns is clamped back to validity.
pub fn ideal_probabilistic_agree<R, A>(
    inputs: &[bool],
    fairness: Rational,
    rng: &mut R,
    assign: A,
) -> Vec<bool>
where
    R: Rng + ?Sized,
    A: FnOnce(&[bool]) -> Vec<bool>,
{
    if let Some(&first) = inputs.first() {
        if inputs.iter().all(|&b| b == first) {
            return vec![first; inputs.len()];
        }
    }
    if bernoulli(rng, fairness) {
        let common = rng.gen::<bool>();
        return vec![common; inputs.len()];
    }
    let mut out = assign(inputs);
    out.resize(inputs.len(), false);
    out
}

/// Sum of `m` independent unbiased ±1 coins.
pub fn random_walk_sum<R: Rng + ?Sized>(m: usize, rng: &mut R) -> i64 {
    let mut ones = 0u32;
    let mut left = m;
    while left >= 64 {
        ones += rng.next_u64().count_ones();
        left -= 64;
    }
    if left > 0 {
        ones += (rng.next_u64() & ((1u64 << left) - 1)).count_ones();
    }
    2 * ones as i64 - m as i64
}

/// Monte Carlo estimate of `P(|Σ| ≥ threshold)` for `m` coins.
pub fn random_walk_tail<R: Rng + ?Sized>(m: usize, threshold: f64, samples: usize, rng: &mut R) -> f64 {
    let hits = (0..samples)
        .filter(|_| random_walk_sum(m, rng).unsigned_abs() as f64 >= threshold)
        .count();
    hits as f64 / samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coins(v: &[i8]) -> CoinVector {
        CoinVector(v.iter().map(|&c| Coin::try_from(c).unwrap()).collect())
    }

    #[test]
    fn coin_is_deterministic_under_seed() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let sa: Vec<Coin> = (0..64).map(|_| flip_coin(&mut a)).collect();
        let sb: Vec<Coin> = (0..64).map(|_| flip_coin(&mut b)).collect();
        assert_eq!(sa, sb);
    }

    #[test]
    fn coin_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let sum: i64 = (0..n).map(|_| flip_coin(&mut rng).value()).sum();
        assert!((sum as f64 / n as f64).abs() < 0.01);
    }

    #[test]
    fn tally_examples() {
        assert_eq!(tally_decide(&coins(&[1, 1, 1, -1, -1])), 1);
        assert_eq!(tally_decide(&coins(&[-1, -1, -1, -1, -1])), 0);
        assert_eq!(tally_decide(&coins(&[1, -1, 1, -1])), 0);
    }

    #[test]
    fn tally_antisymmetric_except_at_zero() {
        for mask in 0u32..(1 << 7) {
            let v: Vec<Coin> =
                (0..7).map(|i| if mask >> i & 1 == 1 { Coin::Plus } else { Coin::Minus }).collect();
            let neg: Vec<Coin> = v.iter().map(|c| c.negate()).collect();
            assert_eq!(tally_decide(&CoinVector(v)) + tally_decide(&CoinVector(neg)), 1);
        }
        let even = coins(&[1, -1, 1, -1, 1, -1]);
        let neg = CoinVector(even.0.iter().map(|c| c.negate()).collect());
        assert_eq!(tally_decide(&even), 0);
        assert_eq!(tally_decide(&neg), 0);
    }

    #[test]
    fn significance_examples() {
        let (r0, r0p) = (rat(175, 1000), rat(2, 10));
        assert_eq!(significance(rat(22, 100), r0, r0p, 0), Significance::ONE);
        assert_eq!(significance(rat(1, 10), r0, r0p, 1), Significance::ZERO);
        assert_eq!(significance(rat(19, 100), r0, r0p, 1), Significance::ONE);
        assert_eq!(significance(rat(19, 100), r0, r0p, 0), Significance::ZERO);
        assert_eq!(significance(r0, r0, r0p, 1), Significance::ZERO);
        assert_eq!(significance(r0p, r0, r0p, 0), Significance::ONE);
    }

    #[test]
    fn agreement_validity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let out = ideal_probabilistic_agree(&[true; 5], rat(35, 100), &mut rng, |i| {
                i.iter().map(|b| !b).collect()
            });
            assert_eq!(out, vec![true; 5]);
        }
    }

    #[test]
    fn agreement_consistency_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 10_000;
        let inputs = [true, false, true, false, true];
        let agreed = (0..trials)
            .filter(|_| {
                let out = ideal_probabilistic_agree(&inputs, rat(35, 100), &mut rng, |i| {
                    (0..i.len()).map(|k| k % 2 == 0).collect()
                });
                out.iter().all(|&b| b == out[0])
            })
            .count();
        let p = 0.35;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(agreed as f64 / trials as f64 >= p - 3.0 * sigma);
    }

    #[test]
    fn agreement_with_full_fairness_always_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let out = ideal_probabilistic_agree(&[true, false, false], rat(1, 1), &mut rng, |_| {
                vec![true, false, true]
            });
            assert!(out.iter().all(|&b| b == out[0]));
        }
    }

    #[test]
    fn walk_sum_parity_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in [1usize, 4, 63, 64, 65, 130] {
            for _ in 0..200 {
                let s = random_walk_sum(m, &mut rng);
                assert!(s.unsigned_abs() as usize <= m);
                assert_eq!((s + m as i64) % 2, 0);
            }
        }
    }
}
