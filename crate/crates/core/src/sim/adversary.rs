//! Byzantine behaviour. Faulty nodes keep no state; every payload they send is
//! computed here from what a full-information adversary can see.

use num_traits::Signed;
use rand::Rng;

use crate::decision::{flip_coin, Coin};
use crate::fta::cmp_rational;
use crate::geometry::{ashore_point, embed_phase, PlanePoint, RingPoint};
use crate::rational::{rat, Rational};
use crate::resync::{NodeId, Payload, ResyncConfig, Variant};

use super::scenario::Strategy;

/// What the adversary knows when it acts in one step.
pub struct View<'a> {
    pub cfg: &'a ResyncConfig,
    pub step: u32,
    /// Payloads the nonfaulty nodes sent in this step, by sender.
    pub honest: &'a [Option<Payload>],
    /// Own phases of the nonfaulty nodes at round start, by node.
    pub phases: &'a [Option<u64>],
    /// Anchor radii of nonfaulty nodes once the first stage is over.
    pub radii: &'a [Option<Rational>],
    /// Whether coins in `honest` may be looked at.
    pub rushing: bool,
}

impl View<'_> {
    fn round_points(&self) -> Vec<PlanePoint> {
        self.honest
            .iter()
            .filter_map(|p| match p {
                Some(Payload::Round { point }) => Some(*point),
                _ => None,
            })
            .collect()
    }

    fn phase_points(&self) -> Vec<u64> {
        self.honest
            .iter()
            .filter_map(|p| match p {
                Some(Payload::Phase { theta }) => Some(*theta),
                _ => None,
            })
            .collect()
    }

    fn honest_coin_sum(&self) -> Option<i64> {
        if !self.rushing {
            return None;
        }
        Some(
            self.honest
                .iter()
                .filter_map(|p| match p {
                    Some(Payload::Coin { coin }) => Some(coin.value()),
                    _ => None,
                })
                .sum(),
        )
    }
}

fn antipode(theta: u64, period: u64) -> u64 {
    (theta + period / 2) % period
}

fn random_payload<R: Rng + ?Sized>(cfg: &ResyncConfig, step: u32, rng: &mut R) -> Payload {
    if step == 1 {
        return Payload::Phase { theta: rng.gen_range(0..cfg.period) };
    }
    if step <= cfg.k1 {
        let grid = cfg.grid_denominator(step).expect("validated configuration");
        let quarter = grid / 4;
        let mut coord = || rat(rng.gen_range(-quarter..=quarter), grid);
        let (x, y) = (coord(), coord());
        return Payload::Round { point: PlanePoint::new(x, y) };
    }
    Payload::Coin { coin: flip_coin(rng) }
}

fn extreme<F: Fn(&PlanePoint) -> Rational>(points: &[PlanePoint], key: F, max: bool) -> Rational {
    let it = points.iter().map(key);
    if max {
        it.max_by(cmp_rational).expect("non-empty")
    } else {
        it.min_by(cmp_rational).expect("non-empty")
    }
}

fn closest_to_zero<F: Fn(&PlanePoint) -> Rational>(points: &[PlanePoint], key: F) -> Rational {
    points
        .iter()
        .map(key)
        .min_by(|a, b| cmp_rational(&a.abs(), &b.abs()).then(cmp_rational(a, b)))
        .expect("non-empty")
}

/// Index of `receiver` among the nonfaulty nodes, used to split them in two.
fn side(view: &View<'_>, receiver: NodeId) -> bool {
    view.phases[..receiver].iter().filter(|p| p.is_some()).count() % 2 == 0
}

/// Payload faulty node `sender` sends to nonfaulty `receiver`, if any.
pub fn act<R: Rng + ?Sized>(
    strategy: Strategy,
    view: &View<'_>,
    sender: NodeId,
    receiver: NodeId,
    rng: &mut R,
) -> Option<Payload> {
    let cfg = view.cfg;
    let step = view.step;
    if step > cfg.k1 && cfg.variant == Variant::A {
        // the agreement primitive is ideal; there is nothing to send
        return None;
    }
    match strategy {
        Strategy::Crash => None,
        Strategy::Random => Some(random_payload(cfg, step, rng)),
        Strategy::Equivocate => {
            let upper = side(view, receiver);
            if step == 1 {
                let own = view.phases[receiver].unwrap_or(0);
                return Some(Payload::Phase { theta: antipode(own, cfg.period) });
            }
            if step <= cfg.k1 {
                let pts = view.round_points();
                if pts.is_empty() {
                    return None;
                }
                let x = extreme(&pts, |p| p.x, upper);
                let y = extreme(&pts, |p| p.y, upper);
                return Some(Payload::Round { point: PlanePoint::new(x, y) });
            }
            let coin = if upper { Coin::Plus } else { Coin::Minus };
            Some(Payload::Coin { coin: if sender % 2 == 0 { coin } else { coin.negate() } })
        }
        Strategy::Keeper => {
            // steer the anchor radius toward the middle of the undecided band
            let mid = (cfg.r0 + cfg.r0p) / 2;
            if step == 1 {
                let thetas = view.phase_points();
                if thetas.is_empty() {
                    return None;
                }
                let sum = thetas.iter().fold(PlanePoint::new(rat(0, 1), rat(0, 1)), |acc, &t| {
                    let e = embed_phase(RingPoint::from_ticks(t as i128, cfg.period as i128));
                    PlanePoint::new(acc.x + e.x, acc.y + e.y)
                });
                let outward = sum.norm1() / rat(thetas.len() as i128, 1) < mid;
                let dir = ashore_point(sum).unwrap_or(RingPoint::ORIGIN);
                let tick = (dir.value() * rat(cfg.period as i128, 1)).to_integer() as u64;
                let theta = if outward { tick % cfg.period } else { antipode(tick, cfg.period) };
                return Some(Payload::Phase { theta });
            }
            if step <= cfg.k1 {
                let pts = view.round_points();
                if pts.is_empty() {
                    return None;
                }
                let k = rat(pts.len() as i128, 1);
                let mean = PlanePoint::new(
                    pts.iter().map(|p| p.x).sum::<Rational>() / k,
                    pts.iter().map(|p| p.y).sum::<Rational>() / k,
                );
                let point = if mean.norm1() < mid {
                    PlanePoint::new(
                        extreme(&pts, |p| p.x, !mean.x.is_negative()),
                        extreme(&pts, |p| p.y, !mean.y.is_negative()),
                    )
                } else {
                    PlanePoint::new(closest_to_zero(&pts, |p| p.x), closest_to_zero(&pts, |p| p.y))
                };
                return Some(Payload::Round { point });
            }
            Some(Payload::Coin { coin: keeper_coin(view, receiver) })
        }
    }
}

/// Coins that push undecided receivers away from what the decided ones chose.
fn keeper_coin(view: &View<'_>, receiver: NodeId) -> Coin {
    let cfg = view.cfg;
    let radii: Vec<Rational> = view.radii.iter().flatten().copied().collect();
    let any_high = radii.iter().any(|r| *r >= cfg.r0p);
    let any_low = radii.iter().any(|r| *r <= cfg.r0);
    match (any_high, any_low) {
        (true, false) => Coin::Minus,
        (false, true) => Coin::Plus,
        _ => {
            // nothing decided: split the receivers, leaning against the honest
            // majority when it is visible
            let lean = view.honest_coin_sum().map_or(Coin::Plus, |s| if s > 0 { Coin::Minus } else { Coin::Plus });
            if side(view, receiver) {
                lean
            } else {
                lean.negate()
            }
        }
    }
}

/// Output assignment when the ideal agreement primitive leaves the choice to
/// the adversary; `inputs` belong to the nonfaulty nodes in id order.
pub fn assign_agreement<R: Rng + ?Sized>(strategy: Strategy, inputs: &[bool], rng: &mut R) -> Vec<bool> {
    match strategy {
        Strategy::Keeper | Strategy::Equivocate => (0..inputs.len()).map(|i| i % 2 == 0).collect(),
        Strategy::Crash | Strategy::Random => (0..inputs.len()).map(|_| rng.gen()).collect(),
    }
}
