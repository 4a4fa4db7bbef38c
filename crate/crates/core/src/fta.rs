//! Fault-tolerant approximate averaging.
//!
//! Sort, drop the `f` smallest and `f` largest values, keep every `f`-th of
//! what remains starting from the smallest, and average the kept values. Two
//! nonfaulty callers whose inputs share `n - f` correct values obtain outputs
//! at most `range / c` apart, with `c` given by [`convergence_constant`].

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::rational::Rational;

/// `⌊(n − 2f − 1)/f⌋ + 1`, the per-application contraction factor.
pub fn convergence_constant(n: usize, f: usize) -> Result<u32> {
    if f == 0 {
        return Err(Error::Config("fault bound f must be at least 1".into()));
    }
    if n <= 3 * f {
        return Err(Error::Config(format!("need n > 3f, got n = {n}, f = {f}")));
    }
    Ok(((n - 2 * f - 1) / f + 1) as u32)
}

/// Ordering by cross-multiplication, which avoids the long-division path of
/// the generic `Ord` for the small denominators seen here.
pub(crate) fn cmp_rational(a: &Rational, b: &Rational) -> Ordering {
    match (a.numer().checked_mul(*b.denom()), b.numer().checked_mul(*a.denom())) {
        (Some(l), Some(r)) => l.cmp(&r),
        _ => a.cmp(b),
    }
}

/// The kept values after trimming and subsampling, in ascending order.
pub fn selected(values: &[Rational], f: usize) -> Vec<Rational> {
    let mut sorted = values.to_vec();
    sorted.sort_by(cmp_rational);
    let trimmed = &sorted[f..sorted.len() - f];
    trimmed.iter().step_by(f.max(1)).copied().collect()
}

/// Applies the averaging function to exactly `n` values.
pub fn fta(values: &[Rational], n: usize, f: usize) -> Result<Rational> {
    convergence_constant(n, f)?;
    if values.len() != n {
        return Err(Error::WrongMultisetSize { expected: n, actual: values.len() });
    }
    let kept = selected(values, f);
    let count = kept.len() as i128;
    let sum: Rational = kept.into_iter().sum();
    Ok(sum / count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use proptest::prelude::*;

    fn ints(v: &[i128]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn convergence_constant_examples() {
        assert_eq!(convergence_constant(4, 1).unwrap(), 2);
        assert_eq!(convergence_constant(13, 3).unwrap(), 3);
        assert_eq!(convergence_constant(7, 2).unwrap(), 2);
        assert_eq!(convergence_constant(5, 1).unwrap(), 3);
        assert_eq!(convergence_constant(31, 3).unwrap(), 9);
        assert!(convergence_constant(4, 0).is_err());
        assert!(convergence_constant(6, 2).is_err());
    }

    #[test]
    fn fta_examples() {
        assert_eq!(fta(&ints(&[0, 10, 20, 30, 50]), 5, 1).unwrap(), int(20));
        assert_eq!(fta(&ints(&[0, 1, 2, 3, 4, 5, 100]), 7, 2).unwrap(), int(3));
        assert_eq!(fta(&[rat(3, 7); 10], 10, 3).unwrap(), rat(3, 7));
    }

    #[test]
    fn wrong_size_is_rejected() {
        assert!(matches!(
            fta(&ints(&[1, 2, 3]), 4, 1),
            Err(Error::WrongMultisetSize { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn order_does_not_matter() {
        let a = fta(&ints(&[5, -3, 9, 0, 2, 7, 1]), 7, 2).unwrap();
        let b = fta(&ints(&[7, 1, 0, 9, -3, 5, 2]), 7, 2).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn selected_count_matches_constant(f in 1usize..5, extra in 1usize..12, seed in prop::collection::vec(-1000i128..1000, 64)) {
            let n = 3 * f + extra;
            let vals: Vec<Rational> = seed.iter().take(n).map(|&x| int(x)).collect();
            prop_assume!(vals.len() == n);
            prop_assert_eq!(selected(&vals, f).len() as u32, convergence_constant(n, f).unwrap());
        }

        #[test]
        fn output_within_trimmed_range(f in 1usize..4, extra in 1usize..8, seed in prop::collection::vec(-1000i128..1000, 64)) {
            let n = 3 * f + extra;
            let mut vals: Vec<Rational> = seed.iter().take(n).map(|&x| rat(x, 7)).collect();
            prop_assume!(vals.len() == n);
            let out = fta(&vals, n, f).unwrap();
            vals.sort();
            prop_assert!(vals[f] <= out && out <= vals[n - 1 - f]);
        }
    }
}
