//! Approximately stable lotteries by multiplicative weights.
//!
//! Stability is a zero-sum game: the defender picks a size-`K` committee,
//! the attacker picks a committee `S_a` of size at most `L`, and the attacker
//! is paid `V(S_d, S_a) - n·|S_a|/K`. Every attacker committee is an expert
//! in a multiplicative-weights learner. Each round the defender answers the
//! learner's current mixture with a committee drawn by probability matching
//! and dependent rounding, accepted once its expected payoff against the
//! mixture is negative with `ε/2` slack. The uniform mixture of the
//! defender's answers is the lottery; it is certified by exhaustive search.

use crate::combos;
use crate::error::{Error, Result};
use crate::model::{AttackLottery, Committee, Instance, Lottery, StabilityReport};
use crate::rng::{stream, streams};
use crate::rounding::{dependent_round, matched_marginals};
use crate::verify::{self, guard};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

/// Attacker committees of size `1..=L`, size-major and lexicographic within
/// each size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpertSet {
    experts: Vec<Committee>,
}

impl ExpertSet {
    pub fn new(m: usize, l: usize) -> Result<Self> {
        if l == 0 || l > m {
            return Err(Error::invalid(format!("attacker bound L = {l} outside [1, m = {m}]")));
        }
        guard("expert enumeration", combos::count_up_to(m, l))?;
        Ok(ExpertSet {
            experts: combos::up_to(m, l).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn committees(&self) -> &[Committee] {
        &self.experts
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Target approximation, in `(0, 1/5)`.
    pub epsilon: f64,
    /// Largest attacker committee considered.
    pub l: usize,
    pub seed: u64,
    /// Round cap; defaults to the regret-bound round count.
    pub max_iters: Option<usize>,
    /// Estimate capture counts from this many voters drawn by weight
    /// instead of counting exactly.
    pub sample_voters: Option<usize>,
    /// Rounds between certification attempts on the running lottery.
    pub check_every: usize,
}

impl SolverConfig {
    pub fn new(epsilon: f64, l: usize, seed: u64) -> Self {
        SolverConfig {
            epsilon,
            l,
            seed,
            max_iters: None,
            sample_voters: None,
            check_every: 1,
        }
    }

    fn validate(&self, instance: &Instance) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if self.l == 0 || self.l > instance.k() {
            return Err(Error::invalid(format!("L = {} outside [1, K = {}]", self.l, instance.k())));
        }
        if self.check_every == 0 {
            return Err(Error::invalid("check_every must be positive"));
        }
        if self.sample_voters == Some(0) {
            return Err(Error::invalid("sample_voters must be positive"));
        }
        Ok(())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.2 {
        Ok(())
    } else {
        Err(Error::invalid(format!("ε = {epsilon} outside (0, 1/5)")))
    }
}

/// `1` when every voter ranks candidates (single-candidate deviations then
/// dominate), otherwise `K`.
pub fn auto_l(instance: &Instance) -> usize {
    if instance.all_ranking() {
        1
    } else {
        instance.k()
    }
}

/// Round count `⌈16·(K/ε)²·ln N⌉` for `N` experts (at least 1).
pub fn default_rounds(k: usize, epsilon: f64, experts: usize) -> usize {
    let r = 16.0 * (k as f64 / epsilon).powi(2) * (experts as f64).ln();
    (r.ceil() as usize).max(1)
}

/// Expert gain `V(defender, attacker) - (1+ε)·n·|attacker|/K`.
pub fn gain(instance: &Instance, defender: &Committee, attacker: &Committee, epsilon: f64) -> f64 {
    crate::model::capture_count(instance, defender, attacker) as f64
        - (1.0 + epsilon) * instance.budget(attacker.len())
}

/// Draws voters with probability proportional to weight.
#[derive(Clone, Debug)]
pub struct VoterSampler {
    index: WeightedIndex<u64>,
    size: usize,
    scale: f64,
}

impl VoterSampler {
    pub fn new(instance: &Instance, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        let index = WeightedIndex::new(instance.voters().iter().map(|v| v.weight()))
            .map_err(|e| Error::invalid(format!("voter weights: {e}")))?;
        Ok(VoterSampler {
            index,
            size,
            scale: instance.n() as f64 / size as f64,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.size).map(|_| self.index.sample(rng)).collect()
    }
}

/// `(n/s)·#{sampled voters preferring attacker}` for `s` voters drawn by
/// weight; an unbiased estimate of `V(defender, attacker)`.
pub fn estimate_capture<R: Rng + ?Sized>(
    instance: &Instance,
    defender: &Committee,
    attacker: &Committee,
    sampler: &VoterSampler,
    rng: &mut R,
) -> f64 {
    let voters = instance.voters();
    let hits = sampler
        .draw(rng)
        .into_iter()
        .filter(|&i| voters[i].prefers(defender, attacker))
        .count();
    hits as f64 * sampler.scale
}

/// [`gain`] with the capture count replaced by [`estimate_capture`].
pub fn sampled_gain<R: Rng + ?Sized>(
    instance: &Instance,
    defender: &Committee,
    attacker: &Committee,
    epsilon: f64,
    sampler: &VoterSampler,
    rng: &mut R,
) -> f64 {
    estimate_capture(instance, defender, attacker, sampler, rng) - (1.0 + epsilon) * instance.budget(attacker.len())
}

fn trial_budget(epsilon: f64) -> usize {
    (64.0 / epsilon).ceil() as usize
}

/// Rounds `alpha` until `payoff(committee) < 0`.
fn round_until<R, F>(alpha: &[f64], epsilon: f64, rng: &mut R, mut payoff: F) -> Result<Committee>
where
    R: Rng + ?Sized,
    F: FnMut(&Committee) -> f64,
{
    let trials = trial_budget(epsilon);
    let mut best = f64::INFINITY;
    for _ in 0..trials {
        let committee = dependent_round(alpha, rng)?;
        let r = payoff(&committee);
        if r < 0.0 {
            return Ok(committee);
        }
        best = best.min(r);
    }
    Err(Error::SolverFailure { trials, best })
}

/// `R_ε(S_d, Δ_a) = E_{S_a}[V(S_d, S_a) - (1+ε)·n·|S_a|/K]`, exactly.
pub fn expected_gain(instance: &Instance, defender: &Committee, attack: &AttackLottery, epsilon: f64) -> f64 {
    attack
        .entries()
        .iter()
        .map(|(a, p)| p * gain(instance, defender, a, epsilon))
        .sum()
}

/// A size-`K` committee with `R_ε(S_d, Δ_a) < 0`.
///
/// Committees are drawn by probability matching and dependent rounding
/// until one is accepted. With `sampler` set the test is the estimate
/// `R̂_{2ε} < 0`, with one voter sample per draw shared by all attackers.
pub fn defender_oracle<R: Rng + ?Sized>(
    instance: &Instance,
    attack: &AttackLottery,
    epsilon: f64,
    rng: &mut R,
    sampler: Option<&VoterSampler>,
) -> Result<Committee> {
    check_epsilon(epsilon)?;
    for (a, _) in attack.entries() {
        instance.check_committee(a)?;
    }
    let alpha = matched_marginals(instance.m(), instance.k(), attack)?;
    match sampler {
        None => round_until(alpha.values(), epsilon, rng, |d| expected_gain(instance, d, attack, epsilon)),
        Some(sampler) => {
            let mut sample_rng = stream(rng.gen(), streams::VOTER_SAMPLING);
            round_until(alpha.values(), epsilon, rng, |d| {
                let sample = sampler.draw(&mut sample_rng);
                let voters = instance.voters();
                attack
                    .entries()
                    .iter()
                    .map(|(a, p)| {
                        let hits = sample.iter().filter(|&&i| voters[i].prefers(d, a)).count();
                        p * (hits as f64 * sampler.scale - (1.0 + 2.0 * epsilon) * instance.budget(a.len()))
                    })
                    .sum()
            })
        }
    }
}

/// Exact argmax of the violation ratio over attackers of size at most `l`.
pub fn best_response(instance: &Instance, lottery: &Lottery, l: usize) -> Result<StabilityReport> {
    verify::worst_blocking(instance, lottery, l)
}

/// State exposed to [`mwu_solve_observed`] after each round.
pub struct RoundInfo<'a> {
    pub round: usize,
    pub experts: &'a [Committee],
    /// The learner's mixture over `experts` used this round.
    pub distribution: &'a [f64],
    pub defender: &'a Committee,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub lottery: Lottery,
    pub report: StabilityReport,
    /// `report.ratio ≤ 1 + ε` under exhaustive verification.
    pub certified: bool,
    /// Defender committees averaged into `lottery`.
    pub rounds: usize,
}

/// Capture counts of every expert against one defender.
struct CaptureTable<'a> {
    instance: &'a Instance,
    experts: &'a [Committee],
    /// `sat[e * voters + v]`, present when small enough to cache.
    sat: Option<Vec<u32>>,
}

const TABLE_LIMIT: usize = 20_000_000;

impl<'a> CaptureTable<'a> {
    fn new(instance: &'a Instance, experts: &'a [Committee]) -> Self {
        let nv = instance.voters().len();
        let sat = (experts.len().saturating_mul(nv) <= TABLE_LIMIT).then(|| {
            experts
                .iter()
                .flat_map(|e| instance.voters().iter().map(move |v| v.satisfaction(e)))
                .collect()
        });
        CaptureTable { instance, experts, sat }
    }

    fn expert_sat(&self, e: usize, v: usize) -> u32 {
        match &self.sat {
            Some(t) => t[e * self.instance.voters().len() + v],
            None => self.instance.voters()[v].satisfaction(&self.experts[e]),
        }
    }

    /// `V(defender, e)` for every expert, exactly or from a voter sample.
    fn captures(&self, defender: &Committee, sample: Option<(&[usize], f64)>, out: &mut [f64]) {
        let voters = self.instance.voters();
        let d: Vec<u32> = voters.iter().map(|v| v.satisfaction(defender)).collect();
        for (e, slot) in out.iter_mut().enumerate() {
            *slot = match sample {
                None => voters
                    .iter()
                    .enumerate()
                    .filter(|&(v, _)| self.expert_sat(e, v) > d[v])
                    .map(|(_, voter)| voter.weight() as f64)
                    .sum(),
                Some((idx, scale)) => {
                    idx.iter().filter(|&&v| self.expert_sat(e, v) > d[v]).count() as f64 * scale
                }
            };
        }
    }
}

pub fn mwu_solve(instance: &Instance, config: &SolverConfig) -> Result<SolveOutcome> {
    mwu_solve_observed(instance, config, |_| {})
}

/// [`mwu_solve`], calling `observe` after every round.
pub fn mwu_solve_observed<F>(instance: &Instance, config: &SolverConfig, mut observe: F) -> Result<SolveOutcome>
where
    F: FnMut(&RoundInfo<'_>),
{
    config.validate(instance)?;
    let experts = ExpertSet::new(instance.m(), config.l)?;
    let experts = experts.committees();
    let n = instance.n() as f64;
    let k = instance.k();
    let eps = config.epsilon;
    let half = eps / 2.0;

    let rounds = config.max_iters.unwrap_or_else(|| default_rounds(k, eps, experts.len()));
    let eta = (0.5f64).min(((experts.len() as f64).ln() / rounds as f64).sqrt());
    let width = (2.0 + eps) * n;

    let table = CaptureTable::new(instance, experts);
    let sampler = config.sample_voters.map(|s| VoterSampler::new(instance, s)).transpose()?;
    let mut round_rng = stream(config.seed, streams::ROUNDING);
    let mut sample_rng = stream(config.seed, streams::VOTER_SAMPLING);

    let budgets: Vec<f64> = experts.iter().map(|e| instance.budget(e.len())).collect();
    let mut weights = vec![1.0f64; experts.len()];
    let mut captures = vec![0.0f64; experts.len()];
    let mut cumulative = vec![0.0f64; experts.len()];
    let mut defenders: Vec<Committee> = Vec::new();
    let mut best_prefix: Option<(usize, f64)> = None;

    for round in 1..=rounds {
        let total: f64 = weights.iter().sum();
        let distribution: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let attack = AttackLottery::new(
            experts
                .iter()
                .zip(&distribution)
                .filter(|(_, p)| **p > 0.0)
                .map(|(e, p)| (e.clone(), *p))
                .collect(),
        )?;
        let alpha = matched_marginals(instance.m(), k, &attack)?;
        let defender = match &sampler {
            None => round_until(alpha.values(), half, &mut round_rng, |d| {
                table.captures(d, None, &mut captures);
                expected_payoff(&distribution, &captures, &budgets, half)
            })?,
            Some(s) => round_until(alpha.values(), half, &mut round_rng, |d| {
                let idx = s.draw(&mut sample_rng);
                table.captures(d, Some((&idx, s.scale)), &mut captures);
                expected_payoff(&distribution, &captures, &budgets, eps)
            })?,
        };

        // Gains for the update.
        match &sampler {
            None => table.captures(&defender, None, &mut captures),
            Some(s) => {
                let idx = s.draw(&mut sample_rng);
                table.captures(&defender, Some((&idx, s.scale)), &mut captures);
            }
        }
        for ((w, v), b) in weights.iter_mut().zip(&captures).zip(&budgets) {
            let g = (v - (1.0 + half) * b).clamp(-width, width);
            *w *= 1.0 + eta * g / width;
        }
        let max_w = weights.iter().copied().fold(0.0, f64::max);
        if max_w > 1e100 || max_w < 1e-100 {
            weights.iter_mut().for_each(|w| *w /= max_w);
        }

        if sampler.is_none() {
            for (c, v) in cumulative.iter_mut().zip(&captures) {
                *c += v;
            }
        }
        observe(&RoundInfo {
            round,
            experts,
            distribution: &distribution,
            defender: &defender,
        });
        defenders.push(defender);

        if round % config.check_every == 0 || round == rounds {
            let ratio = match &sampler {
                None => cumulative
                    .iter()
                    .zip(&budgets)
                    .map(|(c, b)| c / round as f64 / b)
                    .fold(0.0, f64::max),
                Some(_) => {
                    let lottery = Lottery::uniform(k, &defenders)?;
                    verify::worst_blocking(instance, &lottery, config.l)?.ratio
                }
            };
            if best_prefix.is_none_or(|(_, r)| ratio < r) {
                best_prefix = Some((round, ratio));
            }
            if ratio <= 1.0 + eps {
                break;
            }
        }
    }

    let (prefix, _) = best_prefix.ok_or_else(|| Error::Internal("solver ran zero rounds".into()))?;
    let lottery = Lottery::uniform(k, &defenders[..prefix])?;
    let report = verify::worst_blocking(instance, &lottery, config.l)?;
    let certified = report.ratio <= 1.0 + eps;
    Ok(SolveOutcome {
        lottery,
        report,
        certified,
        rounds: prefix,
    })
}

fn expected_payoff(distribution: &[f64], captures: &[f64], budgets: &[f64], epsilon: f64) -> f64 {
    distribution
        .iter()
        .zip(captures)
        .zip(budgets)
        .map(|((p, v), b)| p * (v - (1.0 + epsilon) * b))
        .sum()
}
