//! Deterministic committee rules: proportional approval voting, Pareto
//! improvement, and the constructive stable-committee algorithm for `K = 3`.

use crate::combos;
use crate::error::{Error, Result};
use crate::model::{capture_count, Committee, Instance};
use crate::verify::guard;

/// Largest candidate count accepted by [`pav_exact`].
pub const PAV_EXACT_MAX_M: usize = 20;

/// Relative tolerance under which two PAV scores count as tied.
const SCORE_TIE: f64 = 1e-9;

/// `Σ_v weight_v · H(|S ∩ A_v|)` with `H(r) = 1 + 1/2 + … + 1/r`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct PavScore(pub f64);

fn harmonic(r: u32) -> f64 {
    (1..=r).map(|i| 1.0 / i as f64).sum()
}

fn require_approval(instance: &Instance) -> Result<()> {
    if instance.all_approval() {
        Ok(())
    } else {
        Err(Error::invalid("PAV needs approval ballots; the instance has ranking voters"))
    }
}

fn strictly_better(a: f64, b: f64) -> bool {
    a > b + SCORE_TIE * a.abs().max(b.abs()).max(1.0)
}

pub fn pav_score(instance: &Instance, committee: &Committee) -> Result<PavScore> {
    require_approval(instance)?;
    Ok(PavScore(
        instance
            .voters()
            .iter()
            .map(|v| v.weight() as f64 * harmonic(v.satisfaction(committee)))
            .sum(),
    ))
}

/// Sequential PAV: `K` rounds, each adding the candidate with the largest
/// marginal score gain. Ties go to the smallest candidate id.
pub fn pav_greedy(instance: &Instance) -> Result<Committee> {
    require_approval(instance)?;
    let m = instance.m();
    let mut chosen = Committee::empty();
    let mut counts: Vec<u32> = vec![0; instance.voters().len()];
    for _ in 0..instance.k() {
        let mut best: Option<(usize, f64)> = None;
        for c in (0..m).filter(|&c| !chosen.contains(c)) {
            let single = Committee::new([c]);
            let gain: f64 = instance
                .voters()
                .iter()
                .zip(&counts)
                .filter(|(v, _)| v.satisfaction(&single) > 0)
                .map(|(v, &r)| v.weight() as f64 / (r + 1) as f64)
                .sum();
            if best.is_none_or(|(_, g)| strictly_better(gain, g)) {
                best = Some((c, gain));
            }
        }
        let (c, _) = best.ok_or_else(|| Error::invalid("fewer than K candidates"))?;
        let single = Committee::new([c]);
        for (v, r) in instance.voters().iter().zip(counts.iter_mut()) {
            *r += v.satisfaction(&single);
        }
        chosen = chosen.with(c);
    }
    Ok(chosen)
}

/// Exhaustive PAV: the lexicographically first size-`K` committee with the
/// maximum score.
pub fn pav_exact(instance: &Instance) -> Result<Committee> {
    require_approval(instance)?;
    let (m, k) = (instance.m(), instance.k());
    if m > PAV_EXACT_MAX_M {
        return Err(Error::invalid(format!(
            "exact PAV enumerates C({m}, {k}) committees; m is capped at {PAV_EXACT_MAX_M}, use greedy mode"
        )));
    }
    let mut best: Option<(Committee, f64)> = None;
    for c in combos::of_size(m, k) {
        let score = pav_score(instance, &c)?.0;
        if best.as_ref().is_none_or(|(_, s)| strictly_better(score, *s)) {
            best = Some((c, score));
        }
    }
    best.map(|(c, _)| c).ok_or_else(|| Error::invalid("no committee of size K"))
}

/// A Pareto-optimal committee of size at most `size_bound` that weakly
/// improves every voter relative to `committee`.
///
/// Among all committees that weakly improve every voter, the one with the
/// largest total weighted satisfaction is Pareto-optimal, so a single scan
/// suffices. The input is kept unless something strictly dominates it.
pub fn pareto_improve(instance: &Instance, committee: &Committee, size_bound: usize) -> Result<Committee> {
    if committee.len() > size_bound || size_bound > instance.m() {
        return Err(Error::invalid(format!(
            "need |committee| = {} ≤ size bound {size_bound} ≤ m = {}",
            committee.len(),
            instance.m()
        )));
    }
    instance.check_committee(committee)?;
    guard("Pareto improvement", combos::count_up_to(instance.m(), size_bound))?;
    let base = instance.satisfaction_profile(committee);
    let total = |profile: &[u32]| -> u64 {
        instance
            .voters()
            .iter()
            .zip(profile)
            .map(|(v, &s)| v.weight() * s as u64)
            .sum()
    };
    let mut best = committee.clone();
    let mut best_total = total(&base);
    for candidate in combos::up_to(instance.m(), size_bound) {
        let profile = instance.satisfaction_profile(&candidate);
        if profile.iter().zip(&base).all(|(new, old)| new >= old) {
            let t = total(&profile);
            if t > best_total {
                best = candidate;
                best_total = t;
            }
        }
    }
    Ok(best)
}

/// Which branch of the `K = 3` construction produced the seed committee.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum K3Case {
    /// Some pair is fully approved by more than a third of the voters.
    StrongPair,
    /// Some pair covers at least two thirds of the voters.
    CoveringPair,
    /// Neither; built from the empty committee by single-candidate blockers.
    FromEmpty,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct K3Outcome {
    pub committee: Committee,
    pub case: K3Case,
    /// Committee of size at most 3 with no blocking committee of size 1 or 2,
    /// before Pareto improvement and padding.
    pub seed: Committee,
}

/// A stable committee for an approval instance with `K = 3`.
pub fn stable_k3(instance: &Instance) -> Result<Committee> {
    stable_k3_traced(instance).map(|o| o.committee)
}

/// As [`stable_k3`], also reporting the branch taken.
pub fn stable_k3_traced(instance: &Instance) -> Result<K3Outcome> {
    if instance.k() != 3 {
        return Err(Error::invalid(format!("stable_k3 needs K = 3, got K = {}", instance.k())));
    }
    if !instance.all_approval() {
        return Err(Error::invalid("stable_k3 needs approval ballots"));
    }
    let m = instance.m();
    let n = instance.n() as u128;
    // Third-of-n thresholds in exact integer arithmetic: 3·x vs n.
    let thirds = |x: u64| 3 * x as u128;
    let single_blocker = |s: &Committee| -> Option<usize> {
        (0..m).find(|&c| thirds(capture_count(instance, s, &Committee::new([c]))) >= n)
    };

    let pairs: Vec<(Committee, u64, u64)> = combos::of_size(m, 2)
        .map(|s| {
            let (mut both, mut any) = (0, 0);
            for v in instance.voters() {
                match v.satisfaction(&s) {
                    2 => {
                        both += v.weight();
                        any += v.weight();
                    }
                    1 => any += v.weight(),
                    _ => {}
                }
            }
            (s, both, any)
        })
        .collect();

    let (seed, case) = if let Some((s, _, _)) = pairs.iter().find(|(_, both, _)| thirds(*both) > n) {
        // No pair can block s; extend by a single-candidate blocker if any.
        let seed = match single_blocker(s) {
            Some(c) => s.with(c),
            None => s.clone(),
        };
        (seed, K3Case::StrongPair)
    } else if let Some((s, _, _)) = pairs.iter().find(|(_, _, any)| thirds(*any) >= 2 * n) {
        let gainer = (0..m).find(|&c| !s.contains(c) && capture_count(instance, s, &Committee::new([c])) > 0);
        let seed = match gainer {
            Some(c) => s.with(c),
            None => s.clone(),
        };
        (seed, K3Case::CoveringPair)
    } else {
        let mut seed = Committee::empty();
        if let Some(a) = single_blocker(&seed) {
            seed = Committee::new([a]);
            if let Some(b) = single_blocker(&seed) {
                // V(∅,{a}) + V({a},{b}) would cover two thirds of the voters
                // with the pair {a, b}, contradicting the branch condition.
                return Err(Error::Internal(format!(
                    "pair {{{a},{b}}} reaches two-thirds coverage outside the covering-pair case"
                )));
            }
        }
        (seed, K3Case::FromEmpty)
    };

    let improved = pareto_improve(instance, &seed, 3)?;
    let committee = pad_committee(&improved, 3, m);
    Ok(K3Outcome { committee, case, seed })
}

/// Adds the smallest missing ids until `committee` has `size` members.
/// Adding candidates never lowers an approval voter's satisfaction.
fn pad_committee(committee: &Committee, size: usize, m: usize) -> Committee {
    let mut c = committee.clone();
    for x in 0..m {
        if c.len() >= size {
            break;
        }
        c = c.with(x);
    }
    c
}
