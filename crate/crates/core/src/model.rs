//! Instances, preferences, committees and lotteries, plus the capture-count
//! and payoff primitives every other module is built on.
//!
//! Both preference models are reduced to a per-voter *satisfaction* level for
//! a committee, where a voter strictly prefers one committee to another iff
//! its satisfaction is strictly higher:
//!
//! * approval voters: the number of approved members;
//! * ranking voters: `m - p`, where `p` is the rank position of the best
//!   member, and `0` for the empty committee.

use crate::error::{Error, Result};
use std::fmt;

/// Candidates are numbered `0..m`.
pub type CandidateId = usize;

/// Tolerance on lottery probability mass.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// A duplicate-free, sorted set of candidates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Committee(Vec<CandidateId>);

impl Committee {
    /// Builds a committee from arbitrary ids; duplicates are dropped.
    pub fn new(members: impl IntoIterator<Item = CandidateId>) -> Self {
        let mut v: Vec<_> = members.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Committee(v)
    }

    pub fn empty() -> Self {
        Committee(Vec::new())
    }

    pub(crate) fn from_sorted_unchecked(members: Vec<CandidateId>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Committee(members)
    }

    pub fn members(&self) -> &[CandidateId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: CandidateId) -> bool {
        self.0.binary_search(&c).is_ok()
    }

    /// The committee with `c` added.
    pub fn with(&self, c: CandidateId) -> Committee {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&c) {
            v.insert(pos, c);
        }
        Committee(v)
    }

    pub fn union(&self, other: &Committee) -> Committee {
        Committee::new(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = CandidateId> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for Committee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Preference {
    /// Approved candidates, sorted ascending. May be empty.
    Approval { approves: Vec<CandidateId> },
    /// A permutation of all candidates; position 0 is the favourite.
    Ranking { order: Vec<CandidateId> },
}

/// A voter with integer multiplicity `weight`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Voter {
    pref: Preference,
    weight: u64,
    /// Per-candidate satisfaction contribution: 0/1 for approval voters,
    /// `m - position` for ranking voters.
    lookup: Vec<u32>,
}

impl Voter {
    pub fn approval(m: usize, approves: impl IntoIterator<Item = CandidateId>, weight: u64) -> Result<Self> {
        if weight == 0 {
            return Err(Error::invalid("voter weight must be at least 1"));
        }
        let mut approves: Vec<_> = approves.into_iter().collect();
        approves.sort_unstable();
        if approves.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("approval set contains duplicates"));
        }
        let mut lookup = vec![0u32; m];
        for &c in &approves {
            if c >= m {
                return Err(Error::invalid(format!("approved candidate {c} out of range (m = {m})")));
            }
            lookup[c] = 1;
        }
        Ok(Voter {
            pref: Preference::Approval { approves },
            weight,
            lookup,
        })
    }

    /// A ranking voter over `order.len()` candidates.
    pub fn ranking(order: Vec<CandidateId>, weight: u64) -> Result<Self> {
        if weight == 0 {
            return Err(Error::invalid("voter weight must be at least 1"));
        }
        let m = order.len();
        let mut lookup = vec![0u32; m];
        for (pos, &c) in order.iter().enumerate() {
            if c >= m || lookup[c] != 0 {
                return Err(Error::invalid("ranking is not a permutation of 0..m"));
            }
            lookup[c] = (m - pos) as u32;
        }
        Ok(Voter {
            pref: Preference::Ranking { order },
            weight,
            lookup,
        })
    }

    pub fn preference(&self) -> &Preference {
        &self.pref
    }

    pub fn weight(&self) -> u64 {
        self.weight
    }

    pub fn is_ranking(&self) -> bool {
        matches!(self.pref, Preference::Ranking { .. })
    }

    /// Number of candidates this voter was built for.
    pub fn m(&self) -> usize {
        self.lookup.len()
    }

    /// Satisfaction level of this voter with `committee`; strictly higher
    /// means strictly preferred.
    pub fn satisfaction(&self, committee: &Committee) -> u32 {
        match self.pref {
            Preference::Approval { .. } => committee.iter().map(|c| self.lookup[c]).sum(),
            Preference::Ranking { .. } => committee.iter().map(|c| self.lookup[c]).max().unwrap_or(0),
        }
    }

    /// Whether this voter strictly prefers `challenger` to `incumbent`.
    pub fn prefers(&self, incumbent: &Committee, challenger: &Committee) -> bool {
        self.satisfaction(challenger) > self.satisfaction(incumbent)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    m: usize,
    k: usize,
    voters: Vec<Voter>,
    n: u64,
}

impl Instance {
    pub fn new(m: usize, k: usize, voters: Vec<Voter>) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("need at least one candidate"));
        }
        if k == 0 || k > m {
            return Err(Error::invalid(format!("committee size K = {k} must lie in [1, m = {m}]")));
        }
        if voters.is_empty() {
            return Err(Error::invalid("need at least one voter"));
        }
        if let Some(v) = voters.iter().find(|v| v.m() != m) {
            return Err(Error::invalid(format!(
                "voter built for {} candidates in an instance with m = {m}",
                v.m()
            )));
        }
        let n = voters
            .iter()
            .try_fold(0u64, |acc, v| acc.checked_add(v.weight))
            .ok_or_else(|| Error::invalid("total voter weight overflows"))?;
        Ok(Instance { m, k, voters, n })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Total voter weight.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn voters(&self) -> &[Voter] {
        &self.voters
    }

    pub fn all_ranking(&self) -> bool {
        self.voters.iter().all(Voter::is_ranking)
    }

    pub fn all_approval(&self) -> bool {
        self.voters.iter().all(|v| !v.is_ranking())
    }

    /// The same instance with every voter of weight `w` replaced by `w`
    /// unit-weight copies.
    pub fn expand_weights(&self) -> Instance {
        let voters = self
            .voters
            .iter()
            .flat_map(|v| {
                std::iter::repeat_n(
                    Voter {
                        weight: 1,
                        ..v.clone()
                    },
                    v.weight as usize,
                )
            })
            .collect();
        Instance {
            voters,
            ..self.clone()
        }
    }

    pub fn check_committee(&self, c: &Committee) -> Result<()> {
        match c.members().last() {
            Some(&last) if last >= self.m => Err(Error::invalid(format!(
                "candidate {last} out of range (m = {})",
                self.m
            ))),
            _ => Ok(()),
        }
    }

    /// Satisfaction of every voter with `committee`, in voter order.
    pub fn satisfaction_profile(&self, committee: &Committee) -> Vec<u32> {
        self.voters.iter().map(|v| v.satisfaction(committee)).collect()
    }

    /// `n·|S'|/K`: the weight a coalition needs to afford `S'`.
    pub fn budget(&self, attacker_size: usize) -> f64 {
        self.n as f64 * attacker_size as f64 / self.k as f64
    }
}

/// Capture count `V(incumbent, challenger)`: total weight of voters that
/// strictly prefer `challenger`.
pub fn capture_count(instance: &Instance, incumbent: &Committee, challenger: &Committee) -> u64 {
    instance
        .voters
        .iter()
        .filter(|v| v.prefers(incumbent, challenger))
        .map(|v| v.weight)
        .sum()
}

/// Attacker payoff `V(defender, attacker) - n·|attacker|/K`.
pub fn payoff(instance: &Instance, defender: &Committee, attacker: &Committee) -> Result<f64> {
    if defender.len() != instance.k {
        return Err(Error::invalid(format!(
            "defender has {} members, expected K = {}",
            defender.len(),
            instance.k
        )));
    }
    if attacker.is_empty() || attacker.len() > instance.k {
        return Err(Error::invalid(format!(
            "attacker size {} outside [1, K = {}]",
            attacker.len(),
            instance.k
        )));
    }
    Ok(capture_count(instance, defender, attacker) as f64 - instance.budget(attacker.len()))
}

/// `E_{S ~ lottery}[V(S, attacker)]`.
pub fn expected_capture(instance: &Instance, lottery: &Lottery, attacker: &Committee) -> f64 {
    lottery
        .entries()
        .iter()
        .map(|(c, p)| p * capture_count(instance, c, attacker) as f64)
        .sum()
}

/// Expected capture relative to the budget `n·|attacker|/K`.
pub fn violation_ratio(instance: &Instance, lottery: &Lottery, attacker: &Committee) -> f64 {
    expected_capture(instance, lottery, attacker) / instance.budget(attacker.len())
}

/// Sorts by committee, merges duplicates, and checks the probabilities.
fn canonical_entries(mut entries: Vec<(Committee, f64)>) -> Result<Vec<(Committee, f64)>> {
    if entries.is_empty() {
        return Err(Error::invalid("lottery has no entries"));
    }
    if let Some((c, p)) = entries.iter().find(|(_, p)| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::invalid(format!("committee {c} has non-positive probability {p}")));
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(Committee, f64)> = Vec::with_capacity(entries.len());
    for (c, p) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == c => last.1 += p,
            _ => merged.push((c, p)),
        }
    }
    let total: f64 = merged.iter().map(|e| e.1).sum();
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::invalid(format!("lottery probabilities sum to {total}, not 1")));
    }
    if let Some((c, p)) = merged.iter().find(|(_, p)| *p > 1.0 + PROB_TOLERANCE) {
        return Err(Error::invalid(format!("committee {c} has probability {p} > 1")));
    }
    Ok(merged)
}

/// A probability distribution over committees of size exactly `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lottery {
    k: usize,
    entries: Vec<(Committee, f64)>,
}

impl Lottery {
    pub fn new(k: usize, entries: Vec<(Committee, f64)>) -> Result<Self> {
        if let Some((c, _)) = entries.iter().find(|(c, _)| c.len() != k) {
            return Err(Error::invalid(format!(
                "lottery committee {c} has {} members, expected K = {k}",
                c.len()
            )));
        }
        Ok(Lottery {
            k,
            entries: canonical_entries(entries)?,
        })
    }

    pub fn point_mass(committee: Committee) -> Self {
        Lottery {
            k: committee.len(),
            entries: vec![(committee, 1.0)],
        }
    }

    /// Uniform over the given draws; repeated committees accumulate mass.
    pub fn uniform(k: usize, draws: &[Committee]) -> Result<Self> {
        let p = 1.0 / draws.len() as f64;
        Lottery::new(k, draws.iter().map(|c| (c.clone(), p)).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Entries sorted lexicographically by committee.
    pub fn entries(&self) -> &[(Committee, f64)] {
        &self.entries
    }
}

/// A distribution over nonempty attacker committees of mixed sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackLottery {
    entries: Vec<(Committee, f64)>,
}

impl AttackLottery {
    pub fn new(entries: Vec<(Committee, f64)>) -> Result<Self> {
        if entries.iter().any(|(c, _)| c.is_empty()) {
            return Err(Error::invalid("attacker committees must be nonempty"));
        }
        Ok(AttackLottery {
            entries: canonical_entries(entries)?,
        })
    }

    pub fn entries(&self) -> &[(Committee, f64)] {
        &self.entries
    }
}

/// The worst blocking committee found for a lottery.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub worst_attacker: Committee,
    /// Expected capture count of `worst_attacker`.
    pub capture: f64,
    /// `n·|worst_attacker|/K`.
    pub budget: f64,
    pub ratio: f64,
    /// Largest attacker size searched.
    pub l_checked: usize,
}

impl StabilityReport {
    /// `ratio ≤ 1 + ε` for `ε > 0`; the strict `ratio < 1` when `ε = 0`.
    pub fn holds_at(&self, epsilon: f64) -> bool {
        if epsilon > 0.0 {
            self.ratio <= 1.0 + epsilon
        } else {
            self.ratio < 1.0
        }
    }
}
