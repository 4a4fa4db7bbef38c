//! Exact geometry on the unit circle `C` (circumference 1) and on the 1-norm
//! diamond `D` with `|oa|₁ = 1/4` that the resynchronization round uses to
//! embed phases into the plane.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{rat, round_half_up, Rational};

fn quarter() -> Rational {
    rat(1, 4)
}

fn half() -> Rational {
    rat(1, 2)
}

/// Reduces any rational into `[0, 1)`.
fn unit_mod(r: Rational) -> Rational {
    r - Rational::from_integer(r.floor().to_integer())
}

/// A point on the unit circle, stored as its counterclockwise distance from
/// the origin in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RingPoint(#[serde(with = "crate::rational::serde_rational")] Rational);

impl RingPoint {
    pub const ORIGIN: RingPoint = RingPoint(Rational::new_raw(0, 1));

    /// Wraps any rational onto the circle.
    pub fn new(value: Rational) -> Self {
        RingPoint(unit_mod(value))
    }

    /// The point of phase `theta` on a cycle of `period` ticks.
    pub fn from_ticks(theta: i128, period: i128) -> Self {
        RingPoint::new(rat(theta, period))
    }

    pub fn value(&self) -> Rational {
        self.0
    }

    pub fn wrap_add(self, other: RingPoint) -> RingPoint {
        RingPoint::new(self.0 + other.0)
    }

    pub fn wrap_sub(self, other: RingPoint) -> RingPoint {
        RingPoint::new(self.0 - other.0)
    }
}

impl fmt::Display for RingPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `(c0 + c1) mod 1`.
pub fn wrap_add(c0: RingPoint, c1: RingPoint) -> Rational {
    c0.wrap_add(c1).0
}

/// `(c0 - c1) mod 1`.
pub fn wrap_sub(c0: RingPoint, c1: RingPoint) -> Rational {
    c0.wrap_sub(c1).0
}

/// Ring metric: length of the shorter arc between two points, in `[0, 1/2]`.
pub fn ring_dist(c0: RingPoint, c1: RingPoint) -> Rational {
    let a = wrap_sub(c1, c0);
    let b = wrap_sub(c0, c1);
    a.min(b)
}

/// A counterclockwise arc `[start, end]` on the circle, or the whole circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arc {
    pub start: RingPoint,
    pub end: RingPoint,
    full: bool,
    /// Length of the shortest cover this arc was built from; equals
    /// `end ⊖ start` for proper arcs.
    len: Rational,
}

impl Arc {
    pub fn new(start: RingPoint, end: RingPoint) -> Self {
        Arc { start, end, full: false, len: wrap_sub(end, start) }
    }

    pub fn point(c: RingPoint) -> Self {
        Arc::new(c, c)
    }

    pub fn full_circle(len: Rational) -> Self {
        Arc { start: RingPoint::ORIGIN, end: RingPoint::ORIGIN, full: true, len }
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    /// Shortest-cover length `l(S)` for arcs built by [`cover_arc`]; the arc's
    /// own length otherwise (1 for a full circle built by shifting).
    pub fn len(&self) -> Rational {
        self.len
    }

    pub fn contains(&self, c: RingPoint) -> bool {
        self.full || wrap_sub(c, self.start) <= wrap_sub(self.end, self.start)
    }

    /// Arc inclusion `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Arc) -> bool {
        if other.full {
            return true;
        }
        if self.full {
            return false;
        }
        wrap_sub(self.start, other.start) + wrap_sub(self.end, self.start)
            <= wrap_sub(other.end, other.start)
    }
}

/// Shortest arc containing every point of `points`; the full circle when that
/// shortest cover is at least a half circle.
pub fn cover_arc(points: &[RingPoint]) -> Result<Arc> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let mut sorted: Vec<RingPoint> = points.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() == 1 {
        return Ok(Arc::point(sorted[0]));
    }
    // The complement of the largest gap between circular neighbours is the
    // shortest cover.
    let m = sorted.len();
    let mut best_gap = Rational::zero();
    let mut best_after = 0;
    for i in 0..m {
        let next = sorted[(i + 1) % m];
        let gap = wrap_sub(next, sorted[i]);
        if gap > best_gap {
            best_gap = gap;
            best_after = (i + 1) % m;
        }
    }
    let len = Rational::from_integer(1) - best_gap;
    if len >= half() {
        return Ok(Arc::full_circle(len));
    }
    let start = sorted[best_after];
    let end = sorted[(best_after + m - 1) % m];
    Ok(Arc::new(start, end))
}

/// `l(S)`: length of the shortest cover of `points`.
pub fn cover_len(points: &[RingPoint]) -> Result<Rational> {
    cover_arc(points).map(|a| a.len())
}

/// Minkowski sum `arc + κ(center, radius)`.
pub fn arc_shift_sum(arc: Arc, center: RingPoint, radius: Rational) -> Arc {
    debug_assert!(!radius.is_negative());
    if arc.full {
        return arc;
    }
    let span = wrap_sub(arc.end, arc.start) + radius * 2;
    if span >= Rational::from_integer(1) {
        return Arc::full_circle(Rational::from_integer(1));
    }
    let start = arc.start.wrap_add(center).wrap_sub(RingPoint::new(radius));
    let end = arc.end.wrap_add(center).wrap_add(RingPoint::new(radius));
    Arc::new(start, end)
}

/// A point of the embedding plane, in the same unit as ring points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanePoint {
    #[serde(with = "crate::rational::serde_rational")]
    pub x: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub y: Rational,
}

impl PlanePoint {
    pub fn new(x: Rational, y: Rational) -> Self {
        PlanePoint { x, y }
    }

    /// 1-norm distance from the plane origin.
    pub fn norm1(&self) -> Rational {
        self.x.abs() + self.y.abs()
    }
}

/// Places a ring point on the diamond, keeping its directed distance from `a`.
pub fn embed_phase(c: RingPoint) -> PlanePoint {
    PlanePoint {
        x: quarter() - ring_dist(c, RingPoint::ORIGIN),
        y: quarter() - ring_dist(c, RingPoint::new(quarter())),
    }
}

/// Intersection of the ray from the origin through `p` with the diamond,
/// returned as a ring coordinate. `None` when `p` is the origin.
pub fn ashore_point(p: PlanePoint) -> Option<RingPoint> {
    let r = p.norm1();
    if r.is_zero() {
        return None;
    }
    let ratio = p.x / r;
    let value = if !p.y.is_negative() {
        (Rational::from_integer(1) - ratio) / 4
    } else {
        (Rational::from_integer(3) + ratio) / 4
    };
    Some(RingPoint::new(value))
}

/// Reference point `c_w · c1` for a binary significance.
pub fn reference_point(significance: u8, c1: RingPoint) -> RingPoint {
    debug_assert!(significance <= 1);
    if significance == 1 {
        c1
    } else {
        RingPoint::ORIGIN
    }
}

/// Signed phase correction in ticks that moves `s_q` to `c_star` along the
/// shorter direction. Exact rational results are rounded to the nearest tick.
pub fn delta_theta(c_star: RingPoint, s_q: RingPoint, period: u64) -> i64 {
    assert!(period >= 1);
    let t = Rational::from_integer(period as i128);
    let forward = wrap_sub(c_star, s_q);
    let exact = if forward < half() { t * forward } else { -(t * wrap_sub(s_q, c_star)) };
    round_half_up(&exact) as i64
}
