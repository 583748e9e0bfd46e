//! Probability matching and dependent rounding.
//!
//! Given an attacker lottery with candidate marginals `p` and expected size
//! `β·K`, the defender includes candidate `i` with probability at least
//! `q_i = min(1, p_i/β)`. The matched vector is padded to `α` with
//! `Σα = K` and rounded to a random committee of size exactly `K` whose
//! inclusion indicators have marginals `α` and are negatively correlated.

use crate::error::{Error, Result};
use crate::model::{AttackLottery, Committee};
use rand::Rng;
use std::cmp::Ordering;

/// Values closer than this to 0 or 1 are treated as integral.
const SNAP: f64 = 1e-12;
/// Allowed deviation of a vector's mass from its target.
const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarginalKind {
    /// Attacker inclusion probabilities `p`.
    Attacker,
    /// `q = min(1, p/β)`.
    Matched,
    /// `α ≥ q` with `Σα = K`.
    Padded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalVector {
    values: Vec<f64>,
    kind: MarginalKind,
}

impl MarginalVector {
    pub fn new(values: Vec<f64>, kind: MarginalKind) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(-SNAP..=1.0 + SNAP).contains(*v))
        {
            return Err(Error::invalid(format!("marginal {i} = {v} outside [0, 1]")));
        }
        Ok(MarginalVector { values, kind })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> MarginalKind {
        self.kind
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Expected attacker size over `K`; lies in `(0, 1]` for attackers of size
/// at most `K`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Beta(pub f64);

/// `p_i = Pr[i ∈ S_a]`.
pub fn attacker_marginals(m: usize, attack: &AttackLottery) -> Result<MarginalVector> {
    let mut p = vec![0.0; m];
    for (c, prob) in attack.entries() {
        for i in c.iter() {
            *p.get_mut(i)
                .ok_or_else(|| Error::invalid(format!("attacker candidate {i} out of range (m = {m})")))? += prob;
        }
    }
    MarginalVector::new(p, MarginalKind::Attacker)
}

/// `β = E[|S_a|] / K`.
pub fn beta(attack: &AttackLottery, k: usize) -> Beta {
    let expected_size: f64 = attack.entries().iter().map(|(c, p)| p * c.len() as f64).sum();
    Beta(expected_size / k as f64)
}

/// `q_i = min(1, p_i/β)`. The result always has `Σq ≤ K`; a larger sum means
/// `p` and `β` do not come from the same attacker lottery.
pub fn match_probabilities(p: &MarginalVector, beta: Beta, k: usize) -> Result<MarginalVector> {
    if !(beta.0 > 0.0) {
        return Err(Error::invalid(format!("β = {} must be positive", beta.0)));
    }
    let q: Vec<f64> = p.values.iter().map(|&pi| (pi / beta.0).min(1.0)).collect();
    let total: f64 = q.iter().sum();
    if total > k as f64 + MASS_TOLERANCE {
        return Err(Error::Internal(format!("matched marginals sum to {total} > K = {k}")));
    }
    MarginalVector::new(q, MarginalKind::Matched)
}

/// Raises `q` to `α ∈ [q, 1]` with `Σα = K`.
///
/// Coordinates are raised to 1 in order of decreasing `q_i` (ties by id); the
/// last one touched absorbs the remainder.
pub fn pad(q: &MarginalVector, k: usize) -> Result<MarginalVector> {
    let m = q.values.len();
    if m < k {
        return Err(Error::invalid(format!("cannot pad {m} candidates up to K = {k}")));
    }
    let mut alpha = q.values.clone();
    let mut remaining = k as f64 - q.sum();
    if remaining < -MASS_TOLERANCE {
        return Err(Error::invalid(format!("marginals already sum to {} > K = {k}", q.sum())));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        alpha[j]
            .partial_cmp(&alpha[i])
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut last = None;
    for &i in &order {
        if remaining <= SNAP {
            break;
        }
        let room = 1.0 - alpha[i];
        if room <= 0.0 {
            continue;
        }
        let raise = room.min(remaining);
        alpha[i] += raise;
        remaining -= raise;
        last = Some(i);
    }
    if let Some(i) = last {
        let others: f64 = alpha.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).sum();
        alpha[i] = (k as f64 - others).clamp(q.values[i], 1.0);
    }
    let total: f64 = alpha.iter().sum();
    if (total - k as f64).abs() > MASS_TOLERANCE {
        return Err(Error::Internal(format!("padded marginals sum to {total}, expected {k}")));
    }
    MarginalVector::new(alpha, MarginalKind::Padded)
}

/// The full defender construction `p → β → q → α` for an attacker lottery.
pub fn matched_marginals(m: usize, k: usize, attack: &AttackLottery) -> Result<MarginalVector> {
    let p = attacker_marginals(m, attack)?;
    let q = match_probabilities(&p, beta(attack, k), k)?;
    pad(&q, k)
}

fn is_integral(x: f64) -> bool {
    x <= SNAP || x >= 1.0 - SNAP
}

/// Rounds `alpha` (with integral sum `K`) to a random committee of exactly
/// `K` members, preserving every marginal.
pub fn dependent_round<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Committee> {
    dependent_round_observed(alpha, rng, |_| {})
}

/// As [`dependent_round`], calling `observe` with the fractional vector after
/// every pairwise step.
pub fn dependent_round_observed<R, F>(alpha: &[f64], rng: &mut R, mut observe: F) -> Result<Committee>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]),
{
    if let Some((i, v)) = alpha
        .iter()
        .enumerate()
        .find(|(_, v)| !(-SNAP..=1.0 + SNAP).contains(*v))
    {
        return Err(Error::invalid(format!("α_{i} = {v} outside [0, 1]")));
    }
    let total: f64 = alpha.iter().sum();
    let k = total.round();
    if (total - k).abs() > MASS_TOLERANCE {
        return Err(Error::invalid(format!("α sums to {total}, which is not an integer")));
    }

    let mut a: Vec<f64> = alpha
        .iter()
        .map(|&x| if x <= SNAP { 0.0 } else if x >= 1.0 - SNAP { 1.0 } else { x })
        .collect();

    // `carry` is the lowest-indexed fractional coordinate; every step pairs
    // it with the next fractional one and makes at least one of them integral.
    let mut carry: Option<usize> = None;
    for j in 0..a.len() {
        if is_integral(a[j]) {
            continue;
        }
        let Some(i) = carry else {
            carry = Some(j);
            continue;
        };
        let up = (1.0 - a[i]).min(a[j]);
        let down = a[i].min(1.0 - a[j]);
        if rng.gen::<f64>() * (up + down) < down {
            // i gains `up`, j loses it
            if 1.0 - a[i] <= a[j] {
                a[j] -= 1.0 - a[i];
                a[i] = 1.0;
            } else {
                a[i] += a[j];
                a[j] = 0.0;
            }
        } else if a[i] <= 1.0 - a[j] {
            a[j] += a[i];
            a[i] = 0.0;
        } else {
            a[i] -= 1.0 - a[j];
            a[j] = 1.0;
        }
        for x in [i, j] {
            if a[x] <= SNAP {
                a[x] = 0.0;
            } else if a[x] >= 1.0 - SNAP {
                a[x] = 1.0;
            }
        }
        observe(&a);
        carry = [i, j].into_iter().find(|&x| !is_integral(a[x]));
    }
    if let Some(i) = carry {
        // Only reachable through accumulated rounding error.
        let v = a[i].round();
        if (a[i] - v).abs() > MASS_TOLERANCE {
            return Err(Error::Internal(format!("lone fractional coordinate α_{i} = {}", a[i])));
        }
        a[i] = v;
    }
    let committee = Committee::new((0..a.len()).filter(|&i| a[i] == 1.0));
    if committee.len() as f64 != k {
        return Err(Error::Internal(format!(
            "rounded committee has {} members, expected {k}",
            committee.len()
        )));
    }
    Ok(committee)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn singletons(m: usize) -> AttackLottery {
        let p = 1.0 / m as f64;
        AttackLottery::new((0..m).map(|i| (Committee::new([i]), p)).collect()).unwrap()
    }

    #[test]
    fn marginals_and_beta() {
        let pm = AttackLottery::new(vec![(Committee::new([0, 1]), 1.0)]).unwrap();
        assert_eq!(attacker_marginals(3, &pm).unwrap().values(), &[1.0, 1.0, 0.0]);
        assert_eq!(beta(&pm, 2), Beta(1.0));

        let u = singletons(6);
        let p = attacker_marginals(6, &u).unwrap();
        assert!(p.values().iter().all(|&x| (x - 1.0 / 6.0).abs() < 1e-15));
        assert!((beta(&u, 3).0 - 1.0 / 3.0).abs() < 1e-15);
        assert!(attacker_marginals(2, &u).is_err());
    }

    #[test]
    fn marginals_match_direct_summation() {
        let lot = AttackLottery::new(vec![
            (Committee::new([0, 2]), 0.2),
            (Committee::new([1]), 0.5),
            (Committee::new([1, 2, 3]), 0.3),
        ])
        .unwrap();
        let p = attacker_marginals(4, &lot).unwrap();
        for i in 0..4 {
            let direct: f64 = lot.entries().iter().filter(|(c, _)| c.contains(i)).map(|(_, p)| p).sum();
            assert_eq!(p.values()[i], direct);
        }
        let b1 = beta(&lot, 3).0;
        let b2 = p.sum() / 3.0;
        assert!((b1 - b2).abs() < 1e-12);
    }

    #[test]
    fn matching_examples() {
        let p = MarginalVector::new(vec![0.5, 0.5], MarginalKind::Attacker).unwrap();
        let q = match_probabilities(&p, Beta(0.5), 2).unwrap();
        assert_eq!(q.values(), &[1.0, 1.0]);

        let u = singletons(6);
        let p = attacker_marginals(6, &u).unwrap();
        let q = match_probabilities(&p, beta(&u, 3), 3).unwrap();
        assert!(q.values().iter().all(|&x| (x - 0.5).abs() < 1e-12));
        assert!((q.sum() - 3.0).abs() < 1e-12);

        // inconsistent inputs trip the internal check
        let p = MarginalVector::new(vec![0.9; 4], MarginalKind::Attacker).unwrap();
        assert!(matches!(match_probabilities(&p, Beta(0.5), 2), Err(Error::Internal(_))));
        assert!(match_probabilities(&p, Beta(0.0), 2).is_err());
    }

    #[test]
    fn pad_examples() {
        let q = MarginalVector::new(vec![0.0, 0.0, 0.0], MarginalKind::Matched).unwrap();
        assert_eq!(pad(&q, 2).unwrap().values(), &[1.0, 1.0, 0.0]);

        let q = MarginalVector::new(vec![0.5, 1.0, 0.5], MarginalKind::Matched).unwrap();
        assert_eq!(pad(&q, 2).unwrap().values(), q.values());

        let q = MarginalVector::new(vec![0.1, 0.4, 0.2], MarginalKind::Matched).unwrap();
        let a = pad(&q, 2).unwrap();
        assert!((a.values()[1] - 1.0).abs() < 1e-15);
        assert!((a.values()[2] - 0.9).abs() < 1e-12);
        assert!((a.values()[0] - 0.1).abs() < 1e-12);

        let q = MarginalVector::new(vec![0.1], MarginalKind::Matched).unwrap();
        assert!(pad(&q, 2).is_err());
    }

    #[test]
    fn integral_alpha_is_deterministic() {
        let mut rng = stream(1, 0);
        let c = dependent_round(&[1.0, 0.0, 1.0, 0.0], &mut rng).unwrap();
        assert_eq!(c, Committee::new([0, 2]));
    }

    #[test]
    fn rejects_fractional_total() {
        let mut rng = stream(1, 0);
        assert!(dependent_round(&[0.5, 0.7], &mut rng).is_err());
        assert!(dependent_round(&[1.5, 0.5], &mut rng).is_err());
    }

    #[test]
    fn half_half_one() {
        let mut rng = stream(7, 0);
        let n = 100_000;
        let mut zero = 0usize;
        for _ in 0..n {
            let c = dependent_round(&[0.5, 0.5, 1.0], &mut rng).unwrap();
            assert_eq!(c.len(), 2);
            assert!(c.contains(2));
            zero += c.contains(0) as usize;
        }
        let sigma = (0.25 / n as f64).sqrt();
        assert!((zero as f64 / n as f64 - 0.5).abs() <= 5.0 * sigma);
    }

    #[test]
    fn complementary_pair() {
        let mut rng = stream(8, 0);
        let mut first = 0usize;
        let n = 20_000;
        for _ in 0..n {
            let c = dependent_round(&[0.5, 0.5], &mut rng).unwrap();
            assert_eq!(c.len(), 1);
            first += c.contains(0) as usize;
        }
        let sigma = (0.25 / n as f64).sqrt();
        assert!((first as f64 / n as f64 - 0.5).abs() <= 5.0 * sigma);
    }

    #[test]
    fn same_seed_same_committee() {
        let alpha = [0.3, 0.7, 0.25, 0.75, 0.5, 0.5];
        let a = dependent_round(&alpha, &mut stream(99, 1)).unwrap();
        let b = dependent_round(&alpha, &mut stream(99, 1)).unwrap();
        assert_eq!(a, b);
    }

    fn arb_alpha() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (2usize..12).prop_flat_map(|m| (prop::collection::vec(0.0f64..1.0, m), 1..m)).prop_map(|(raw, k)| {
            let q = MarginalVector::new(raw.iter().map(|x| x * k as f64 / raw.len() as f64).collect(), MarginalKind::Matched).unwrap();
            (pad(&q, k).unwrap().values().to_vec(), k)
        })
    }

    proptest! {
        #[test]
        fn mass_is_conserved_and_size_exact((alpha, k) in arb_alpha(), seed in any::<u64>()) {
            let mut rng = stream(seed, 0);
            let mut worst: f64 = 0.0;
            let c = dependent_round_observed(&alpha, &mut rng, |a| {
                worst = worst.max((a.iter().sum::<f64>() - k as f64).abs());
            }).unwrap();
            prop_assert!(worst <= 1e-9);
            prop_assert_eq!(c.len(), k);
            for i in c.iter() {
                prop_assert!(alpha[i] > 0.0);
            }
        }

        #[test]
        fn pad_respects_bounds(raw in prop::collection::vec(0.0f64..1.0, 1..15), kf in 0.0f64..1.0) {
            let m = raw.len();
            let k = 1 + ((m - 1) as f64 * kf) as usize;
            let scale = k as f64 / m as f64;
            let q = MarginalVector::new(raw.iter().map(|x| x * scale).collect(), MarginalKind::Matched).unwrap();
            let a = pad(&q, k).unwrap();
            prop_assert!((a.sum() - k as f64).abs() <= 1e-9);
            for (qi, ai) in q.values().iter().zip(a.values()) {
                prop_assert!(*ai >= *qi && *ai <= 1.0);
            }
        }

        #[test]
        fn matching_is_monotone(p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, b1 in 0.05f64..1.0, b2 in 0.05f64..1.0) {
            let q = |p: f64, b: f64| {
                let v = MarginalVector::new(vec![p], MarginalKind::Attacker).unwrap();
                match_probabilities(&v, Beta(b), 1).map(|q| q.values()[0]).unwrap_or(1.0)
            };
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            prop_assert!(q(lo, b1) <= q(hi, b1));
            let (bl, bh) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            prop_assert!(q(lo, bh) <= q(lo, bl));
        }
    }
}
