//! JSON instance and lottery files.
//!
//! Instance:
//!
//! ```json
//! {"m": 3, "k": 2, "voters": [
//!   {"type": "approval", "approves": [0, 2]},
//!   {"type": "ranking", "ranking": [2, 0, 1], "weight": 3}
//! ]}
//! ```
//!
//! Lottery:
//!
//! ```json
//! {"k": 2, "entries": [{"members": [0, 2], "prob": 1.0}],
//!  "certified_epsilon": 0.1, "L": 2, "seed": 42}
//! ```
//!
//! Unknown fields are rejected. Lottery entries are written sorted by
//! members with duplicates merged, so equal lotteries serialize to equal
//! bytes.

use crate::error::{Error, Result};
use crate::model::{CandidateId, Committee, Instance, Lottery, Preference, Voter};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub m: usize,
    pub k: usize,
    pub voters: Vec<VoterEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum VoterEntry {
    Approval {
        approves: Vec<CandidateId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<u64>,
    },
    Ranking {
        ranking: Vec<CandidateId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<u64>,
    },
}

impl InstanceFile {
    pub fn from_instance(instance: &Instance) -> Self {
        let voters = instance
            .voters()
            .iter()
            .map(|v| {
                let weight = (v.weight() != 1).then_some(v.weight());
                match v.preference() {
                    Preference::Approval { approves } => VoterEntry::Approval {
                        approves: approves.clone(),
                        weight,
                    },
                    Preference::Ranking { order } => VoterEntry::Ranking {
                        ranking: order.clone(),
                        weight,
                    },
                }
            })
            .collect();
        InstanceFile {
            m: instance.m(),
            k: instance.k(),
            voters,
        }
    }

    pub fn to_instance(&self) -> Result<Instance> {
        let voters = self
            .voters
            .iter()
            .map(|v| match v {
                VoterEntry::Approval { approves, weight } => {
                    Voter::approval(self.m, approves.iter().copied(), weight.unwrap_or(1))
                }
                VoterEntry::Ranking { ranking, weight } => {
                    if ranking.len() != self.m {
                        return Err(Error::invalid(format!(
                            "ranking lists {} candidates, expected m = {}",
                            ranking.len(),
                            self.m
                        )));
                    }
                    Voter::ranking(ranking.clone(), weight.unwrap_or(1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Instance::new(self.m, self.k, voters)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LotteryEntry {
    pub members: Vec<CandidateId>,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LotteryFile {
    pub k: usize,
    pub entries: Vec<LotteryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified_epsilon: Option<f64>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LotteryFile {
    pub fn from_lottery(lottery: &Lottery) -> Self {
        LotteryFile {
            k: lottery.k(),
            entries: lottery
                .entries()
                .iter()
                .map(|(c, p)| LotteryEntry {
                    members: c.members().to_vec(),
                    prob: *p,
                })
                .collect(),
            certified_epsilon: None,
            l: None,
            seed: None,
        }
    }

    pub fn to_lottery(&self) -> Result<Lottery> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                if e.members.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid(format!(
                        "lottery members {:?} are not strictly ascending",
                        e.members
                    )));
                }
                Ok((Committee::new(e.members.iter().copied()), e.prob))
            })
            .collect::<Result<Vec<_>>>()?;
        Lottery::new(self.k, entries)
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::invalid(format!("malformed JSON: {e}"))
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    serde_json::from_str::<InstanceFile>(text).map_err(parse_error)?.to_instance()
}

pub fn write_instance(instance: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(instance)).expect("serializable") + "\n"
}

pub fn parse_lottery(text: &str) -> Result<LotteryFile> {
    let file: LotteryFile = serde_json::from_str(text).map_err(parse_error)?;
    file.to_lottery()?;
    Ok(file)
}

pub fn write_lottery(file: &LotteryFile) -> String {
    serde_json::to_string_pretty(file).expect("serializable") + "\n"
}
