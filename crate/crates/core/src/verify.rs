//! Exhaustive oracles.
//!
//! Blocking searches enumerate every attacker committee up to a size bound
//! and refuse to run past [`ENUMERATION_LIMIT`] rather than silently
//! truncating. Deterministic blocking uses the non-strict `V ≥ n·|S'|/K` and
//! is decided in exact integer arithmetic; lottery checks report the expected
//! capture ratio.
//!
//! The Poisson-binomial section computes `Pr[X < η]` exactly for sums of
//! independent Bernoulli variables, which turns the lower-tail bound
//! `Pr[X < η] < η/μ` and the matching bound `Pr[X < Y] < β` into numbers
//! that can be checked directly.

use crate::combos;
use crate::error::{Error, Result};
use crate::model::{capture_count, Committee, Instance, Lottery, StabilityReport, Voter};
use crate::rng::{stream, streams};
use rand::Rng;

/// Upper bound on the number of committees (or committee pairs) a single
/// exhaustive search may visit.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Largest Bernoulli count accepted by [`PoissonBinomial`].
pub const MAX_BERNOULLIS: usize = 1000;

pub(crate) fn guard(what: &'static str, needed: u128) -> Result<()> {
    if needed > ENUMERATION_LIMIT {
        Err(Error::Budget {
            what,
            needed,
            limit: ENUMERATION_LIMIT,
        })
    } else {
        Ok(())
    }
}

fn check_attacker_bound(instance: &Instance, l: usize) -> Result<()> {
    if l == 0 || l > instance.k() {
        return Err(Error::invalid(format!("attacker bound L = {l} outside [1, K = {}]", instance.k())));
    }
    guard("attacker enumeration", combos::count_up_to(instance.m(), l))
}

/// Per-voter distribution of the defender's satisfaction under a lottery:
/// `below[v][s] = Pr[sat_v(S) < s]`.
struct DefenderProfile {
    below: Vec<Vec<f64>>,
}

impl DefenderProfile {
    fn new(instance: &Instance, lottery: &Lottery) -> Self {
        let width = instance.m() + 2;
        let below = instance
            .voters()
            .iter()
            .map(|v| {
                let mut hist = vec![0.0; width];
                for (c, p) in lottery.entries() {
                    hist[v.satisfaction(c) as usize + 1] += p;
                }
                for s in 1..width {
                    hist[s] += hist[s - 1];
                }
                hist
            })
            .collect();
        DefenderProfile { below }
    }

    fn expected_capture(&self, voters: &[Voter], attacker: &Committee) -> f64 {
        voters
            .iter()
            .zip(&self.below)
            .map(|(v, below)| v.weight() as f64 * below[v.satisfaction(attacker) as usize])
            .sum()
    }
}

/// The attacker of size at most `l` with the largest expected capture
/// relative to its budget. Ties go to the first attacker in size-major
/// lexicographic order.
pub fn worst_blocking(instance: &Instance, lottery: &Lottery, l: usize) -> Result<StabilityReport> {
    check_attacker_bound(instance, l)?;
    if lottery.k() != instance.k() {
        return Err(Error::invalid(format!(
            "lottery over size-{} committees for K = {}",
            lottery.k(),
            instance.k()
        )));
    }
    for (c, _) in lottery.entries() {
        instance.check_committee(c)?;
    }
    let profile = DefenderProfile::new(instance, lottery);
    let mut best: Option<StabilityReport> = None;
    for attacker in combos::up_to(instance.m(), l) {
        let capture = profile.expected_capture(instance.voters(), &attacker);
        let budget = instance.budget(attacker.len());
        let ratio = capture / budget;
        if best.as_ref().is_none_or(|b| ratio > b.ratio) {
            best = Some(StabilityReport {
                worst_attacker: attacker,
                capture,
                budget,
                ratio,
                l_checked: l,
            });
        }
    }
    best.ok_or_else(|| Error::Internal("no attackers enumerated".into()))
}

/// Whether `attacker` blocks `committee`: `K·V(S, S') ≥ n·|S'|`.
pub fn blocks(instance: &Instance, committee: &Committee, attacker: &Committee) -> bool {
    let v = capture_count(instance, committee, attacker) as u128;
    v * instance.k() as u128 >= instance.n() as u128 * attacker.len() as u128
}

/// First blocking committee of size at most `l`, in size-major
/// lexicographic order.
pub fn find_blocking(instance: &Instance, committee: &Committee, l: usize) -> Result<Option<Committee>> {
    check_attacker_bound(instance, l)?;
    Ok(first_blocking(instance, committee, l))
}

fn first_blocking(instance: &Instance, committee: &Committee, l: usize) -> Option<Committee> {
    combos::up_to(instance.m(), l).find(|a| blocks(instance, committee, a))
}

/// No committee of size at most `l` blocks `committee`.
pub fn is_stable_committee(instance: &Instance, committee: &Committee, l: usize) -> Result<bool> {
    if committee.len() != instance.k() {
        return Err(Error::invalid(format!(
            "committee {committee} has {} members, expected K = {}",
            committee.len(),
            instance.k()
        )));
    }
    instance.check_committee(committee)?;
    Ok(find_blocking(instance, committee, l)?.is_none())
}

/// Exact lottery stability for a lottery with rational probabilities
/// `weight_i / Σ weight`: every attacker of size at most `l` must satisfy
/// `E[V(S, S')] < n·|S'|/K` strictly.
pub fn is_stable_lottery_exact(instance: &Instance, support: &[(Committee, u64)], l: usize) -> Result<bool> {
    check_attacker_bound(instance, l)?;
    if support.is_empty() || support.iter().any(|(c, w)| *w == 0 || c.len() != instance.k()) {
        return Err(Error::invalid("support must be nonempty size-K committees with positive weights"));
    }
    let total: u128 = support.iter().map(|(_, w)| *w as u128).sum();
    let k = instance.k() as u128;
    let n = instance.n() as u128;
    Ok(combos::up_to(instance.m(), l).all(|a| {
        let weighted: u128 = support
            .iter()
            .map(|(c, w)| *w as u128 * capture_count(instance, c, &a) as u128)
            .sum();
        weighted * k < n * a.len() as u128 * total
    }))
}

/// The lexicographically first stable size-`K` committee, if any.
pub fn exists_stable_committee(instance: &Instance) -> Result<Option<Committee>> {
    let (m, k) = (instance.m(), instance.k());
    guard(
        "stable committee search",
        combos::binomial(m, k).saturating_mul(combos::count_up_to(m, k)),
    )?;
    Ok(combos::of_size(m, k).find(|c| first_blocking(instance, c, k).is_none()))
}

/// Justified representation audit: the worst single-candidate deviation
/// against `committee`. The committee satisfies JR iff the ratio is below 1.
pub fn jr_audit(instance: &Instance, committee: &Committee) -> Result<StabilityReport> {
    if committee.len() != instance.k() {
        return Err(Error::invalid(format!(
            "committee {committee} has {} members, expected K = {}",
            committee.len(),
            instance.k()
        )));
    }
    worst_blocking(instance, &Lottery::point_mass(committee.clone()), 1)
}

/// Distribution of a sum of independent Bernoulli variables.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonBinomial {
    probs: Vec<f64>,
    pmf: Vec<f64>,
}

impl PoissonBinomial {
    pub fn new(probs: &[f64]) -> Result<Self> {
        if probs.len() > MAX_BERNOULLIS {
            return Err(Error::invalid(format!(
                "{} Bernoulli variables exceeds the limit of {MAX_BERNOULLIS}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        let mut pmf = vec![0.0; probs.len() + 1];
        pmf[0] = 1.0;
        for (i, &p) in probs.iter().enumerate() {
            for k in (1..=i + 1).rev() {
                pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p;
            }
            pmf[0] *= 1.0 - p;
        }
        Ok(PoissonBinomial {
            probs: probs.to_vec(),
            pmf,
        })
    }

    /// `pmf()[k] = Pr[X = k]` for `k` in `0..=ℓ`.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `Pr[X < eta]`.
    pub fn cdf_below(&self, eta: usize) -> f64 {
        let upto = eta.min(self.pmf.len());
        self.pmf[..upto].iter().sum::<f64>().min(1.0)
    }
}

/// `Pr[X < eta]` for `X` the sum of independent `Bernoulli(probs_i)`.
pub fn poisson_binomial_cdf(probs: &[f64], eta: usize) -> Result<f64> {
    Ok(PoissonBinomial::new(probs)?.cdf_below(eta))
}

/// Outcome of a numeric inequality check `lhs < rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `Pr[X < η] < η/μ` for an integer `η ≥ 1`.
pub fn lemma5_check(probs: &[f64], eta: usize) -> Result<TailCheck> {
    if eta == 0 {
        return Err(Error::invalid("threshold η must be at least 1"));
    }
    let dist = PoissonBinomial::new(probs)?;
    let mu = dist.mean();
    if !(mu > 0.0) {
        return Err(Error::invalid("mean μ must be positive"));
    }
    let lhs = dist.cdf_below(eta);
    let rhs = eta as f64 / mu;
    Ok(TailCheck {
        lhs,
        rhs,
        holds: lhs < rhs,
    })
}

/// `Pr[X < Y] < β` for `Y` independent of `X` with `E[Y] ≤ β·E[X]`, where
/// `y_pmf[k] = Pr[Y = k]`.
///
/// Only the independent coupling has this closed form,
/// `Pr[X < Y] = Σ_η Pr[Y = η]·Pr[X < η]`.
pub fn lemma1_check(probs: &[f64], beta: f64, y_pmf: &[f64]) -> Result<TailCheck> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!("β = {beta} outside (0, 1]")));
    }
    if y_pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("distribution of Y has a negative or non-finite mass"));
    }
    let total: f64 = y_pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("distribution of Y sums to {total}")));
    }
    let dist = PoissonBinomial::new(probs)?;
    let mu = dist.mean();
    let ey: f64 = y_pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    if ey > beta * mu + 1e-12 {
        return Err(Error::invalid(format!("E[Y] = {ey} exceeds β·E[X] = {}", beta * mu)));
    }
    let lhs: f64 = y_pmf
        .iter()
        .enumerate()
        .map(|(eta, p)| p * dist.cdf_below(eta))
        .sum();
    Ok(TailCheck {
        lhs,
        rhs: beta,
        holds: lhs < beta,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepSummary {
    pub trials: usize,
    /// Trials in which every individual inequality held.
    pub held: usize,
    /// Individual inequalities evaluated.
    pub checks: usize,
    /// Largest `lhs / rhs` seen.
    pub worst_ratio: f64,
}

impl SweepSummary {
    fn record(&mut self, checks: &[TailCheck]) {
        self.trials += 1;
        self.checks += checks.len();
        if checks.iter().all(|c| c.holds) {
            self.held += 1;
        }
        for c in checks {
            self.worst_ratio = self.worst_ratio.max(c.lhs / c.rhs);
        }
    }
}

/// Random probability vectors with `ℓ ≤ max_len`, each checked at every
/// integer threshold `η ∈ [1, ℓ]`.
pub fn lemma5_sweep(trials: usize, max_len: usize, seed: u64) -> Result<SweepSummary> {
    let mut rng = stream(seed, streams::LEMMA_SWEEP);
    let mut summary = SweepSummary::default();
    for _ in 0..trials {
        let len = rng.gen_range(1..=max_len);
        let probs: Vec<f64> = (0..len).map(|_| 1.0 - rng.gen::<f64>()).collect();
        let checks = (1..=len)
            .map(|eta| lemma5_check(&probs, eta))
            .collect::<Result<Vec<_>>>()?;
        summary.record(&checks);
    }
    Ok(summary)
}

/// Random `(probs, β, Y)` triples with `Y` independent of `X`. The law of
/// `Y` is a random mass function on `0..=ℓ+1`, mixed with a point mass at 0
/// where needed to bring `E[Y]` down to `β·E[X]`.
pub fn lemma1_sweep(trials: usize, max_len: usize, seed: u64) -> Result<SweepSummary> {
    let mut rng = stream(seed, streams::LEMMA_SWEEP ^ 0x100);
    let mut summary = SweepSummary::default();
    for _ in 0..trials {
        let len = rng.gen_range(1..=max_len);
        let probs: Vec<f64> = (0..len).map(|_| 1.0 - rng.gen::<f64>()).collect();
        let mu: f64 = probs.iter().sum();
        let beta = 1.0 - rng.gen::<f64>();
        let raw: Vec<f64> = (0..len + 2).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut y: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let ey: f64 = y.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        if ey > beta * mu {
            let t = beta * mu / ey;
            for p in y.iter_mut() {
                *p *= t;
            }
            y[0] += 1.0 - t;
        }
        summary.record(&[lemma1_check(&probs, beta, &y)?]);
    }
    Ok(summary)
}

/// How [`search_stable_existence`] walks approval profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileEnumeration {
    /// Every approval matrix, `2^(m·n)` per `(m, n)`.
    AllMatrices,
    /// One representative per multiset of approval sets; voter order never
    /// affects stability.
    Multisets,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchSummary {
    /// `(profile, K)` pairs examined.
    pub instances: u64,
    /// Instances without a stable committee.
    pub counterexamples: Vec<Instance>,
}

/// Checks every approval profile with `1 ≤ m ≤ max_m` candidates and
/// `1 ≤ n ≤ max_n` voters, and every `K ∈ [1, m]`, for a stable committee.
pub fn search_stable_existence(max_m: usize, max_n: usize, mode: ProfileEnumeration) -> Result<SearchSummary> {
    if max_m == 0 || max_n == 0 {
        return Err(Error::invalid("search bounds must be positive"));
    }
    if max_m * max_n > 40 {
        return Err(Error::Budget {
            what: "approval profile sweep",
            needed: 1u128 << (max_m * max_n).min(127),
            limit: 1u128 << 40,
        });
    }
    let mut summary = SearchSummary::default();
    for m in 1..=max_m {
        let sets = 1usize << m;
        for n in 1..=max_n {
            let mut masks = vec![0usize; n];
            loop {
                let voters = masks
                    .iter()
                    .map(|&mask| Voter::approval(m, (0..m).filter(|c| mask >> c & 1 == 1), 1))
                    .collect::<Result<Vec<_>>>()?;
                for k in 1..=m {
                    let instance = Instance::new(m, k, voters.clone())?;
                    summary.instances += 1;
                    if exists_stable_committee(&instance)?.is_none() {
                        summary.counterexamples.push(instance);
                    }
                }
                if !advance(&mut masks, sets, mode) {
                    break;
                }
            }
        }
    }
    Ok(summary)
}

/// Odometer step over `masks`; in multiset mode the sequence stays
/// nondecreasing.
fn advance(masks: &mut [usize], base: usize, mode: ProfileEnumeration) -> bool {
    for i in (0..masks.len()).rev() {
        if masks[i] + 1 < base {
            masks[i] += 1;
            if mode == ProfileEnumeration::Multisets {
                let v = masks[i];
                masks[i + 1..].iter_mut().for_each(|x| *x = v);
            } else {
                masks[i + 1..].iter_mut().for_each(|x| *x = 0);
            }
            return true;
        }
    }
    false
}
