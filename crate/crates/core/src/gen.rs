//! Instance generators: the six-voter cyclic instance with no stable
//! committee, the PAV lower-bound family, and seeded random instances.

use crate::error::{Error, Result};
use crate::model::{CandidateId, Instance, Voter};
use crate::rng::{stream, streams};
use rand::seq::SliceRandom;
use rand::Rng;

/// Six ranking voters over candidates `a..f` (ids `0..6`), `K = 3`.
///
/// Voters 1-3 rank `{a,b,c}` cyclically on top, voters 4-6 do the same with
/// `{d,e,f}`; the remaining half of each ranking is listed in id order.
pub fn cyclic_example() -> Instance {
    const ORDERS: [[CandidateId; 6]; 6] = [
        [0, 1, 2, 3, 4, 5],
        [1, 2, 0, 3, 4, 5],
        [2, 0, 1, 3, 4, 5],
        [3, 4, 5, 0, 1, 2],
        [4, 5, 3, 0, 1, 2],
        [5, 3, 4, 0, 1, 2],
    ];
    let voters = ORDERS
        .iter()
        .map(|o| Voter::ranking(o.to_vec(), 1).expect("static permutation"))
        .collect();
    Instance::new(6, 3, voters).expect("static instance")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PavFamilyParams {
    /// Scale parameter; must be a positive multiple of 8.
    pub p: usize,
    /// Total voter weight; `p²` when absent.
    pub n: Option<u64>,
}

impl PavFamilyParams {
    pub fn new(p: usize) -> Self {
        PavFamilyParams { p, n: None }
    }

    pub fn committee_size(&self) -> usize {
        self.p + self.p * self.p / 8
    }

    pub fn candidate_count(&self) -> usize {
        3 * self.p / 2 + self.p * self.p / 8
    }

    fn total_weight(&self) -> u64 {
        self.n.unwrap_or((self.p * self.p) as u64)
    }
}

/// Candidate groups of a PAV lower-bound instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PavLabels {
    /// Approved by every left-half voter.
    pub a: Vec<CandidateId>,
    /// Approved by every right-half voter.
    pub b: Vec<CandidateId>,
    /// `p/2` levels of `p/4` candidates; candidate `(level, block)` sits at
    /// index `level * p/4 + block` and is approved by left block `block`.
    pub c: Vec<CandidateId>,
    /// Candidate `j` is approved by right block `j`.
    pub d: Vec<CandidateId>,
}

/// The instance on which sequential PAV picks `A ∪ B ∪ C` while the right
/// half of the electorate can afford the strictly better `B ∪ D`.
///
/// The left half is split into `p/4` blocks and the right half into `p/2`
/// blocks of contiguous voters; each block is emitted as one weighted voter.
pub fn pav_lower_bound(params: PavFamilyParams) -> Result<(Instance, PavLabels)> {
    let p = params.p;
    if p == 0 || p % 8 != 0 {
        return Err(Error::invalid(format!("P = {p} must be a positive multiple of 8")));
    }
    let n = params.total_weight();
    let half_blocks = (p / 2) as u64;
    if n % 2 != 0 || (n / 2) % half_blocks != 0 {
        return Err(Error::invalid(format!("n = {n} must be even with n/2 divisible by P/2 = {half_blocks}")));
    }
    let half = n / 2;
    let left_blocks = p / 4;
    let right_blocks = p / 2;

    let mut next = 0..;
    let mut take = |count: usize| -> Vec<CandidateId> { (&mut next).take(count).collect() };
    let a = take(p / 2);
    let b = take(p / 2);
    let c = take((p / 2) * left_blocks);
    let d = take(right_blocks);
    let m = params.candidate_count();
    debug_assert_eq!(d.last().copied(), Some(m - 1));

    let mut voters = Vec::with_capacity(left_blocks + right_blocks);
    for block in 0..left_blocks {
        let approves = a
            .iter()
            .copied()
            .chain((0..p / 2).map(|level| c[level * left_blocks + block]));
        voters.push(Voter::approval(m, approves, half / left_blocks as u64)?);
    }
    for &dj in &d {
        let approves = b.iter().copied().chain(std::iter::once(dj));
        voters.push(Voter::approval(m, approves, half / right_blocks as u64)?);
    }
    let instance = Instance::new(m, params.committee_size(), voters)?;
    Ok((instance, PavLabels { a, b, c, d }))
}

/// Each voter approves each candidate independently with probability
/// `density`.
pub fn random_approval(m: usize, n: usize, k: usize, density: f64, seed: u64) -> Result<Instance> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::invalid(format!("density {density} outside [0, 1]")));
    }
    let mut rng = stream(seed, streams::GENERATOR);
    let voters = (0..n)
        .map(|_| {
            let approves: Vec<_> = (0..m).filter(|_| rng.gen_bool(density)).collect();
            Voter::approval(m, approves, 1)
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(m, k, voters)
}

/// Each voter ranks the candidates by an independent uniform permutation.
pub fn random_ranking(m: usize, n: usize, k: usize, seed: u64) -> Result<Instance> {
    let mut rng = stream(seed, streams::GENERATOR);
    let voters = (0..n)
        .map(|_| {
            let mut order: Vec<_> = (0..m).collect();
            order.shuffle(&mut rng);
            Voter::ranking(order, 1)
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(m, k, voters)
}
