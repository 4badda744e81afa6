//! Decentralized line and star formation over synchronous rounds.
//!
//! Nodes see only their [`LocalView`]: their own links plus digests shared by
//! direct neighbors. Each round runs view exchange, proposal, accept/reject
//! and commit; the harness applies committed operations to the ground-truth
//! tree, which nodes never read.

mod audit;
mod engine;
mod rules;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tree::Node;

pub use audit::{locality_audit, audit_trace, AuditReport, AuditViolation, Event, LogParseError, RunTrace};
pub use engine::{
    run_to_fixed_point, run_with_executor, step_round, step_round_with, ProtocolError, RoundReport, RoundState,
    RunOutcome,
};
pub use rules::{line_rule, star_rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Line,
    Star,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Line => "line",
            Protocol::Star => "star",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "line" => Ok(Protocol::Line),
            "star" => Ok(Protocol::Star),
            other => Err(format!("unknown protocol `{other}` (expected line or star)")),
        }
    }
}

/// Center-candidate score, compared by degree and then by label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Score {
    pub degree: usize,
    pub label: Node,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpToken {
    pub round: usize,
    pub proposer: Node,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Free,
    Busy(OpToken),
    LineEndpoint,
    StarCenterCandidate(Score),
}

impl Role {
    pub fn is_busy(&self) -> bool {
        matches!(self, Role::Busy(_))
    }
}

/// What a node knows when it runs its rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalView {
    pub self_id: Node,
    pub neighbor_ids: BTreeSet<Node>,
    pub neighbor_degrees: BTreeMap<Node, usize>,
    /// Neighbor sets reported by each direct neighbor.
    pub two_hop: BTreeMap<Node, BTreeSet<Node>>,
    /// Roles of this node and its direct neighbors.
    pub roles: BTreeMap<Node, Role>,
    /// Neighbor this node last received a branch from, if remembered.
    pub inward: Option<Node>,
}

impl LocalView {
    pub fn degree(&self) -> usize {
        self.neighbor_ids.len()
    }

    pub fn neighbor_degree(&self, v: Node) -> usize {
        self.neighbor_degrees.get(&v).copied().unwrap_or(0)
    }

    pub fn role(&self, v: Node) -> Role {
        self.roles.get(&v).copied().unwrap_or(Role::Free)
    }

    pub fn score(&self) -> Score {
        Score {
            degree: self.degree(),
            label: self.self_id,
        }
    }

    pub fn neighbor_score(&self, v: Node) -> Score {
        Score {
            degree: self.neighbor_degree(v),
            label: v,
        }
    }
}

/// A node's intended rewire, expressed relative to itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Proposal {
    /// Become a leaf of `toward`, handing every other neighbor to it.
    Leafize { toward: Node },
    /// Move the branch hanging from this node at neighbor `branch` onto neighbor `to`.
    Transfer { branch: Node, to: Node },
}

impl Proposal {
    /// Nodes whose links the proposal depends on; all within one hop of `proposer`.
    pub fn touched(&self, proposer: Node, neighbors: &BTreeSet<Node>) -> BTreeSet<Node> {
        match *self {
            Proposal::Leafize { .. } => {
                let mut s = neighbors.clone();
                s.insert(proposer);
                s
            }
            Proposal::Transfer { branch, to } => BTreeSet::from([proposer, branch, to]),
        }
    }
}

/// State a node shares with its neighbors at the start of a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewDigest {
    pub degree: usize,
    pub neighbors: BTreeSet<Node>,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    ViewShare,
    OpPropose,
    OpAccept,
    OpReject,
    OpCommit,
    RoleUpdate,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::ViewShare,
        MessageKind::OpPropose,
        MessageKind::OpAccept,
        MessageKind::OpReject,
        MessageKind::OpCommit,
        MessageKind::RoleUpdate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MessageKind::ViewShare => "ViewShare",
            MessageKind::OpPropose => "OpPropose",
            MessageKind::OpAccept => "OpAccept",
            MessageKind::OpReject => "OpReject",
            MessageKind::OpCommit => "OpCommit",
            MessageKind::RoleUpdate => "RoleUpdate",
        }
    }
}

impl FromStr for MessageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MessageKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown message kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    None,
    View(ViewDigest),
    Op { proposer: Node, proposal: Proposal },
    Role(Role),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub round: usize,
    pub from: Node,
    pub to: Node,
    pub kind: MessageKind,
    pub payload: Payload,
}
