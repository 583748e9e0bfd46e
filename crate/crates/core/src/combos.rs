//! Committee enumeration and counting.

use crate::model::Committee;
use itertools::Itertools;

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of nonempty committees of size at most `max_size`.
pub fn count_up_to(m: usize, max_size: usize) -> u128 {
    (1..=max_size.min(m)).fold(0u128, |acc, l| acc.saturating_add(binomial(m, l)))
}

/// All committees of exactly `size` members, in lexicographic order.
pub fn of_size(m: usize, size: usize) -> impl Iterator<Item = Committee> {
    (0..m)
        .combinations(size)
        .map(Committee::from_sorted_unchecked)
}

/// All nonempty committees of size at most `max_size`, size-major and
/// lexicographic within each size.
pub fn up_to(m: usize, max_size: usize) -> impl Iterator<Item = Committee> {
    (1..=max_size.min(m)).flat_map(move |size| of_size(m, size))
}
