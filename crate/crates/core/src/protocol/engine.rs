use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::audit::{Event, RunTrace};
use super::rules::{line_rule, star_rule};
use super::{LocalView, MessageKind, OpToken, Payload, Proposal, Protocol, ProtocolMessage, Role, Score, ViewDigest};
use crate::ops::{apply, LoggedOp, OpError, OpLogEntry, TopologyOp};
use crate::tree::{LabeledTree, Node, SuperLeaf};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("no fixed point after {rounds} rounds")]
    NoConvergence { rounds: usize, tree: Box<LabeledTree> },
    #[error("committed operation failed to apply: {0}")]
    Apply(#[from] OpError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct NodeMemory {
    inward: Option<Node>,
    backoff: bool,
}

/// Harness-side state of one simulation. Nodes only ever see their inboxes.
#[derive(Debug, Clone)]
pub struct RoundState {
    pub round: usize,
    pub tree: LabeledTree,
    pub inboxes: Vec<Vec<ProtocolMessage>>,
    pub committed_ops: Vec<TopologyOp>,
    roles: Vec<Role>,
    memory: Vec<NodeMemory>,
}

impl RoundState {
    pub fn new(tree: LabeledTree, protocol: Protocol) -> Self {
        let n = tree.n();
        let mut state = RoundState {
            round: 0,
            tree,
            inboxes: vec![Vec::new(); n + 1],
            committed_ops: Vec::new(),
            roles: vec![Role::Free; n + 1],
            memory: vec![NodeMemory::default(); n + 1],
        };
        state.refresh_roles(protocol);
        state
    }

    pub fn role(&self, v: Node) -> Role {
        self.roles[v]
    }

    fn refresh_roles(&mut self, protocol: Protocol) {
        let tree = &self.tree;
        for v in 1..=tree.n() {
            let degree = tree.nbrs(v).len();
            self.roles[v] = match protocol {
                Protocol::Line if degree == 1 => Role::LineEndpoint,
                Protocol::Star => {
                    let own = Score { degree, label: v };
                    let local_max = degree > 1
                        && tree.nbrs(v).iter().all(|&u| Score { degree: tree.nbrs(u).len(), label: u } < own);
                    if local_max {
                        Role::StarCenterCandidate(own)
                    } else {
                        Role::Free
                    }
                }
                _ => Role::Free,
            };
        }
    }
}

/// What happened in one round.
#[derive(Debug, Clone)]
pub struct RoundReport {
    pub round: usize,
    pub proposals: usize,
    pub committed: Vec<OpLogEntry>,
    pub messages: Vec<ProtocolMessage>,
    /// No proposals and nobody waiting out a backoff.
    pub quiescent: bool,
}

fn send(out: &mut Vec<ProtocolMessage>, round: usize, from: Node, to: Node, kind: MessageKind, payload: Payload) {
    out.push(ProtocolMessage {
        round,
        from,
        to,
        kind,
        payload,
    });
}

fn assemble_view(state: &RoundState, v: Node, inbox: &[ProtocolMessage]) -> LocalView {
    let mut view = LocalView {
        self_id: v,
        neighbor_ids: state.tree.nbrs(v).iter().copied().collect(),
        neighbor_degrees: BTreeMap::new(),
        two_hop: BTreeMap::new(),
        roles: BTreeMap::from([(v, state.roles[v])]),
        inward: state.memory[v].inward,
    };
    for msg in inbox {
        if let Payload::View(digest) = &msg.payload {
            view.neighbor_degrees.insert(msg.from, digest.degree);
            view.two_hop.insert(msg.from, digest.neighbors.clone());
            view.roles.insert(msg.from, digest.role);
        }
    }
    view
}

/// Turns an accepted proposal into a concrete operation on the current tree.
fn materialize(tree: &LabeledTree, proposer: Node, proposal: Proposal) -> TopologyOp {
    match proposal {
        Proposal::Leafize { toward } => TopologyOp::Leafization { node: proposer, toward },
        Proposal::Transfer { branch, to } => {
            let subtree: SuperLeaf = tree
                .subtree_rooted_at(branch, proposer)
                .expect("branch is a neighbor of the proposer");
            if subtree.is_singleton() {
                TopologyOp::LeafTransfer { leaf: branch, from: proposer, to }
            } else {
                TopologyOp::SuperLeafTransfer { subtree, from: proposer, to }
            }
        }
    }
}

/// Applies committed operations one after another.
pub fn apply_sequentially(
    tree: &LabeledTree,
    ops: &[TopologyOp],
) -> Result<(LabeledTree, Vec<OpLogEntry>), OpError> {
    let mut current = tree.clone();
    let mut log = Vec::with_capacity(ops.len());
    for op in ops {
        let (next, entry) = apply(&current, op)?;
        current = next;
        log.push(entry);
    }
    Ok((current, log))
}

pub fn step_round(state: &mut RoundState, protocol: Protocol) -> Result<RoundReport, ProtocolError> {
    step_round_with(state, protocol, |tree, ops| {
        apply_sequentially(tree, ops).map_err(ProtocolError::from)
    })
}

/// One round, with committed operations carried out by `execute`.
pub fn step_round_with<E, F>(state: &mut RoundState, protocol: Protocol, mut execute: F) -> Result<RoundReport, E>
where
    F: FnMut(&LabeledTree, &[TopologyOp]) -> Result<(LabeledTree, Vec<OpLogEntry>), E>,
{
    state.round += 1;
    let round = state.round;
    let n = state.tree.n();
    let mut messages = Vec::new();
    for inbox in state.inboxes.iter_mut() {
        inbox.clear();
    }

    // view exchange
    for v in 1..=n {
        let digest = ViewDigest {
            degree: state.tree.nbrs(v).len(),
            neighbors: state.tree.nbrs(v).iter().copied().collect(),
            role: state.roles[v],
        };
        for &u in state.tree.nbrs(v) {
            send(&mut messages, round, v, u, MessageKind::ViewShare, Payload::View(digest.clone()));
        }
    }
    deliver(state, &messages);

    // rules
    let was_backing_off = state.memory.iter().any(|m| m.backoff);
    let mut proposals: BTreeMap<Node, (Proposal, BTreeSet<Node>)> = BTreeMap::new();
    for v in 1..=n {
        if state.memory[v].backoff {
            continue;
        }
        let view = assemble_view(state, v, &state.inboxes[v]);
        let rule = match protocol {
            Protocol::Line => line_rule(&view),
            Protocol::Star => star_rule(&view),
        };
        if let Some(p) = rule {
            let touched = p.touched(v, &view.neighbor_ids);
            proposals.insert(v, (p, touched));
        }
    }
    for memory in state.memory.iter_mut() {
        memory.backoff = false;
    }
    let quiescent = proposals.is_empty() && !was_backing_off;

    // propose
    let start = messages.len();
    for (&v, (p, touched)) in &proposals {
        for &t in touched.iter().filter(|&&t| t != v) {
            let payload = Payload::Op { proposer: v, proposal: *p };
            send(&mut messages, round, v, t, MessageKind::OpPropose, payload);
        }
    }
    deliver(state, &messages[start..]);

    // each node sides with the lowest proposer touching it
    let start = messages.len();
    let mut choice: BTreeMap<Node, Node> = BTreeMap::new();
    for v in 1..=n {
        let own = proposals.contains_key(&v).then_some(v);
        let incoming = state.inboxes[v].iter().filter_map(|m| match m.payload {
            Payload::Op { proposer, .. } if m.kind == MessageKind::OpPropose => Some(proposer),
            _ => None,
        });
        let candidates: BTreeSet<Node> = incoming.chain(own).collect();
        let Some(&winner) = candidates.first() else { continue };
        choice.insert(v, winner);
        state.roles[v] = Role::Busy(OpToken { round, proposer: winner });
        for &p in candidates.iter().filter(|&&p| p != v) {
            let kind = if p == winner { MessageKind::OpAccept } else { MessageKind::OpReject };
            send(&mut messages, round, v, p, kind, Payload::None);
        }
    }
    deliver(state, &messages[start..]);

    // commit
    let start = messages.len();
    let mut committers = Vec::new();
    for (&v, (p, touched)) in &proposals {
        let accepted = touched.iter().all(|t| choice.get(t) == Some(&v));
        if accepted {
            committers.push(v);
            for &t in touched.iter().filter(|&&t| t != v) {
                let payload = Payload::Op { proposer: v, proposal: *p };
                send(&mut messages, round, v, t, MessageKind::OpCommit, payload);
            }
        } else {
            state.memory[v].backoff = true;
        }
    }
    deliver(state, &messages[start..]);

    let ops: Vec<TopologyOp> = committers
        .iter()
        .map(|&v| materialize(&state.tree, v, proposals[&v].0))
        .collect();
    let (next, committed) = execute(&state.tree, &ops)?;

    // receivers of a branch that were already interior remember where it came from
    for &v in &committers {
        if let Proposal::Transfer { to, .. } = proposals[&v].0 {
            if state.tree.nbrs(to).len() > 1 {
                state.memory[to].inward = Some(v);
            }
        }
    }
    state.tree = next;
    state.committed_ops = ops;
    state.refresh_roles(protocol);

    let start = messages.len();
    for v in 1..=n {
        for &u in state.tree.nbrs(v) {
            send(&mut messages, round, v, u, MessageKind::RoleUpdate, Payload::Role(state.roles[v]));
        }
    }
    deliver(state, &messages[start..]);

    Ok(RoundReport {
        round,
        proposals: proposals.len(),
        committed,
        messages,
        quiescent,
    })
}

fn deliver(state: &mut RoundState, messages: &[ProtocolMessage]) {
    for m in messages {
        state.inboxes[m.to].push(m.clone());
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_tree: LabeledTree,
    /// Rounds before the first quiescent one.
    pub rounds: usize,
    pub trace: RunTrace,
    pub reports: Vec<RoundReport>,
}

pub fn run_to_fixed_point(
    initial: &LabeledTree,
    protocol: Protocol,
    max_rounds: usize,
) -> Result<RunOutcome, ProtocolError> {
    run_with_executor(initial, protocol, max_rounds, |tree, ops| {
        apply_sequentially(tree, ops).map_err(ProtocolError::from)
    })
}

/// Runs rounds until one is quiescent, allowing at most `max_rounds` active rounds.
pub fn run_with_executor<E, F>(
    initial: &LabeledTree,
    protocol: Protocol,
    max_rounds: usize,
    mut execute: F,
) -> Result<RunOutcome, E>
where
    E: From<ProtocolError>,
    F: FnMut(&LabeledTree, &[TopologyOp]) -> Result<(LabeledTree, Vec<OpLogEntry>), E>,
{
    let mut state = RoundState::new(initial.clone(), protocol);
    let mut trace = RunTrace::new(initial.clone());
    let mut reports = Vec::new();
    loop {
        let report = step_round_with(&mut state, protocol, &mut execute)?;
        trace.events.push(Event::Round(report.round));
        let (before, after): (Vec<_>, Vec<_>) = report
            .messages
            .iter()
            .cloned()
            .partition(|m| m.kind != MessageKind::RoleUpdate);
        trace.events.extend(before.into_iter().map(Event::Message));
        trace
            .events
            .extend(report.committed.iter().map(|e| Event::Commit(LoggedOp::from(e))));
        trace.events.extend(after.into_iter().map(Event::Message));
        let quiescent = report.quiescent;
        reports.push(report);
        if quiescent {
            break;
        }
        if reports.len() > max_rounds {
            return Err(ProtocolError::NoConvergence {
                rounds: max_rounds,
                tree: Box::new(state.tree),
            }
            .into());
        }
    }
    Ok(RunOutcome {
        final_tree: state.tree,
        rounds: reports.len() - 1,
        trace,
        reports,
    })
}
