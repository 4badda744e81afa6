//! The four local rewiring operations.
//!
//! Every operation is pure: it checks its preconditions, builds the rewired
//! edge set, and re-validates the result as a tree before returning it with a
//! log entry. Each added edge carries a certificate path of at most two hops in
//! the tree the operation was applied to.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::tree::{canonical, Edge, LabeledTree, Node, SuperLeaf, TreeError};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TopologyOp {
    /// Turn `node` into a leaf hanging from `toward`; its other neighbors move to `toward`.
    Leafization { node: Node, toward: Node },
    /// Move `leaf` from `from` to `to`, a neighbor of `from`.
    LeafTransfer { leaf: Node, from: Node, to: Node },
    /// Rewire every outside neighbor of the subtree root except `toward` onto `toward`.
    SuperLeafization { subtree: SuperLeaf, toward: Node },
    /// Move a hanging subtree from `from` to `to`, a neighbor of `from`.
    SuperLeafTransfer { subtree: SuperLeaf, from: Node, to: Node },
}

impl TopologyOp {
    pub fn kind(&self) -> &'static str {
        match self {
            TopologyOp::Leafization { .. } => "L",
            TopologyOp::LeafTransfer { .. } => "LT",
            TopologyOp::SuperLeafization { .. } => "SL",
            TopologyOp::SuperLeafTransfer { .. } => "SLT",
        }
    }

    /// Labels named by the operation, members of a super-leaf included.
    pub fn referenced_nodes(&self) -> BTreeSet<Node> {
        match self {
            TopologyOp::Leafization { node, toward } => BTreeSet::from([*node, *toward]),
            TopologyOp::LeafTransfer { leaf, from, to } => BTreeSet::from([*leaf, *from, *to]),
            TopologyOp::SuperLeafization { subtree, toward } => {
                let mut s = subtree.members().clone();
                s.insert(*toward);
                s
            }
            TopologyOp::SuperLeafTransfer { subtree, from, to } => {
                let mut s = subtree.members().clone();
                s.insert(*from);
                s.insert(*to);
                s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpError {
    #[error("node {node} is outside 1..={n}")]
    NodeOutOfRange { node: Node, n: usize },
    #[error("{0} and {1} are not neighbors")]
    NotNeighbors(Node, Node),
    #[error("node {0} is already a leaf")]
    AlreadyLeaf(Node),
    #[error("node {0} is not a leaf")]
    NotALeaf(Node),
    #[error("leaf {leaf} is not attached to {node}")]
    NotAttachedTo { leaf: Node, node: Node },
    #[error("transfer source {0} and target {1} are not neighbors")]
    JkNotNeighbors(Node, Node),
    #[error("leaf {0} cannot be transferred onto itself")]
    TransferOntoSelf(Node),
    #[error("member {member} of the subtree has an outside neighbor {outside}")]
    SubtreeLeaks { member: Node, outside: Node },
    #[error("target {0} lies inside the subtree")]
    KInsideSubtree(Node),
    #[error("subtree rooted at {0} already hangs by a single edge")]
    RootAlreadySuperLeaf(Node),
    #[error("subtree rooted at {0} is not a super-leaf")]
    NotASuperLeaf(Node),
    #[error("subtree hangs from {found}, not {expected}")]
    WrongAttachment { expected: Node, found: Node },
    #[error("subtree rooted at {0} is malformed")]
    InvalidSuperLeaf(Node),
    #[error("result is not a tree: {0}")]
    TreeInvariantBroken(TreeError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpLogEntry {
    pub op: TopologyOp,
    pub edges_removed: Vec<Edge>,
    pub edges_added: Vec<Edge>,
    /// For each added edge, the pre-operation path between its endpoints.
    pub hop_certificate: Vec<Vec<Node>>,
}

impl OpLogEntry {
    /// Nodes whose incident edges or 2-hop relations the operation relies on.
    pub fn touched_nodes(&self) -> BTreeSet<Node> {
        let mut s: BTreeSet<Node> = self.hop_certificate.iter().flatten().copied().collect();
        for &(u, v) in &self.edges_removed {
            s.insert(u);
            s.insert(v);
        }
        s
    }

    pub fn max_certificate_hops(&self) -> usize {
        self.hop_certificate
            .iter()
            .map(|p| p.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    /// `<op> | -u-v ... | +u-v ...`
    pub fn to_log_line(&self) -> String {
        format_log_line(&self.op, &self.edges_removed, &self.edges_added)
    }
}

fn check(tree: &LabeledTree, node: Node) -> Result<(), OpError> {
    if tree.contains_node(node) {
        Ok(())
    } else {
        Err(OpError::NodeOutOfRange { node, n: tree.n() })
    }
}

fn rebuild(
    tree: &LabeledTree,
    op: TopologyOp,
    removed: Vec<Edge>,
    added: Vec<Edge>,
    hop_certificate: Vec<Vec<Node>>,
) -> Result<(LabeledTree, OpLogEntry), OpError> {
    let mut edges = tree.edge_set().clone();
    for e in &removed {
        edges.remove(e);
    }
    let next = LabeledTree::new(tree.n(), edges.into_iter().chain(added.iter().copied()))
        .map_err(OpError::TreeInvariantBroken)?;
    Ok((
        next,
        OpLogEntry {
            op,
            edges_removed: removed,
            edges_added: added,
            hop_certificate,
        },
    ))
}

pub fn leafization(tree: &LabeledTree, j: Node, k: Node) -> Result<(LabeledTree, OpLogEntry), OpError> {
    check(tree, j)?;
    check(tree, k)?;
    if j == k || !tree.has_edge(j, k) {
        return Err(OpError::NotNeighbors(j, k));
    }
    if tree.nbrs(j).len() == 1 {
        return Err(OpError::AlreadyLeaf(j));
    }
    let moved: Vec<Node> = tree.nbrs(j).iter().copied().filter(|&p| p != k).collect();
    rebuild(
        tree,
        TopologyOp::Leafization { node: j, toward: k },
        moved.iter().map(|&p| canonical(j, p)).collect(),
        moved.iter().map(|&p| canonical(k, p)).collect(),
        moved.iter().map(|&p| vec![k, j, p]).collect(),
    )
}

pub fn leaf_transfer(
    tree: &LabeledTree,
    l: Node,
    j: Node,
    k: Node,
) -> Result<(LabeledTree, OpLogEntry), OpError> {
    for v in [l, j, k] {
        check(tree, v)?;
    }
    if tree.nbrs(l).len() != 1 {
        return Err(OpError::NotALeaf(l));
    }
    if !tree.has_edge(l, j) {
        return Err(OpError::NotAttachedTo { leaf: l, node: j });
    }
    if k == l {
        return Err(OpError::TransferOntoSelf(l));
    }
    if !tree.has_edge(j, k) {
        return Err(OpError::JkNotNeighbors(j, k));
    }
    rebuild(
        tree,
        TopologyOp::LeafTransfer { leaf: l, from: j, to: k },
        vec![canonical(l, j)],
        vec![canonical(l, k)],
        vec![vec![l, j, k]],
    )
}

fn check_subtree(tree: &LabeledTree, s: &SuperLeaf) -> Result<(), OpError> {
    let root = s.root();
    if !tree.contains_node(root) || !s.contains(root) {
        return Err(OpError::InvalidSuperLeaf(root));
    }
    for &m in s.members() {
        check(tree, m)?;
    }
    Ok(())
}

fn check_interior_sealed(tree: &LabeledTree, s: &SuperLeaf) -> Result<(), OpError> {
    for &m in s.members() {
        if m == s.root() {
            continue;
        }
        if let Some(&outside) = tree.nbrs(m).iter().find(|w| !s.contains(**w)) {
            return Err(OpError::SubtreeLeaks { member: m, outside });
        }
    }
    // members must be reachable from the root inside the subtree
    let mut seen = BTreeSet::from([s.root()]);
    let mut stack = vec![s.root()];
    while let Some(u) = stack.pop() {
        for &w in tree.nbrs(u) {
            if s.contains(w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    if seen.len() != s.len() {
        return Err(OpError::InvalidSuperLeaf(s.root()));
    }
    Ok(())
}

pub fn super_leafization(
    tree: &LabeledTree,
    s: &SuperLeaf,
    k: Node,
) -> Result<(LabeledTree, OpLogEntry), OpError> {
    check_subtree(tree, s)?;
    check(tree, k)?;
    check_interior_sealed(tree, s)?;
    let root = s.root();
    if s.contains(k) {
        return Err(OpError::KInsideSubtree(k));
    }
    if !tree.has_edge(root, k) {
        return Err(OpError::NotNeighbors(root, k));
    }
    let outside: Vec<Node> = tree.nbrs(root).iter().copied().filter(|w| !s.contains(*w)).collect();
    if outside.len() == 1 {
        return Err(OpError::RootAlreadySuperLeaf(root));
    }
    let moved: Vec<Node> = outside.into_iter().filter(|&p| p != k).collect();
    rebuild(
        tree,
        TopologyOp::SuperLeafization {
            subtree: s.clone(),
            toward: k,
        },
        moved.iter().map(|&p| canonical(root, p)).collect(),
        moved.iter().map(|&p| canonical(k, p)).collect(),
        moved.iter().map(|&p| vec![k, root, p]).collect(),
    )
}

pub fn super_leaf_transfer(
    tree: &LabeledTree,
    s: &SuperLeaf,
    j: Node,
    k: Node,
) -> Result<(LabeledTree, OpLogEntry), OpError> {
    check_subtree(tree, s)?;
    check(tree, j)?;
    check(tree, k)?;
    let root = s.root();
    if !tree.is_super_leaf(s) {
        return Err(OpError::NotASuperLeaf(root));
    }
    let attachment = *tree
        .nbrs(root)
        .iter()
        .find(|w| !s.contains(**w))
        .expect("a super-leaf root has one outside neighbor");
    if attachment != j {
        return Err(OpError::WrongAttachment {
            expected: j,
            found: attachment,
        });
    }
    if s.contains(k) {
        return Err(OpError::KInsideSubtree(k));
    }
    if !tree.has_edge(j, k) {
        return Err(OpError::JkNotNeighbors(j, k));
    }
    rebuild(
        tree,
        TopologyOp::SuperLeafTransfer {
            subtree: s.clone(),
            from: j,
            to: k,
        },
        vec![canonical(root, j)],
        vec![canonical(root, k)],
        vec![vec![root, j, k]],
    )
}

/// Dispatches to the matching operation. The result is always a validated tree.
pub fn apply(tree: &LabeledTree, op: &TopologyOp) -> Result<(LabeledTree, OpLogEntry), OpError> {
    match op {
        TopologyOp::Leafization { node, toward } => leafization(tree, *node, *toward),
        TopologyOp::LeafTransfer { leaf, from, to } => leaf_transfer(tree, *leaf, *from, *to),
        TopologyOp::SuperLeafization { subtree, toward } => super_leafization(tree, subtree, *toward),
        TopologyOp::SuperLeafTransfer { subtree, from, to } => {
            super_leaf_transfer(tree, subtree, *from, *to)
        }
    }
}

/// Every operation whose preconditions hold on `tree`, built directly from the
/// definitions rather than by trial application.
pub fn enumerate_valid_ops(tree: &LabeledTree) -> Vec<TopologyOp> {
    let mut ops = Vec::new();
    for (a, b) in tree.edges() {
        for (j, k) in [(a, b), (b, a)] {
            let others: Vec<Node> = tree.nbrs(j).iter().copied().filter(|&w| w != k).collect();
            if !others.is_empty() {
                ops.push(TopologyOp::Leafization { node: j, toward: k });
            }
            if others.is_empty() {
                for &to in tree.nbrs(k).iter().filter(|&&w| w != j) {
                    ops.push(TopologyOp::LeafTransfer { leaf: j, from: k, to });
                }
            }
            // root j keeps any proper subset of its other branches, k stays outside
            let branches: Vec<SuperLeaf> = others
                .iter()
                .map(|&w| tree.subtree_rooted_at(w, j).expect("w is adjacent to j"))
                .collect();
            for mask in 0u32..(1 << branches.len()).max(1) - 1 {
                let members = branches
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .flat_map(|(_, b)| b.members().iter().copied());
                ops.push(TopologyOp::SuperLeafization {
                    subtree: SuperLeaf::new(j, members),
                    toward: k,
                });
            }
            let hanging = tree.subtree_rooted_at(j, k).expect("(j, k) is an edge");
            for &to in tree.nbrs(k).iter().filter(|&&w| w != j) {
                ops.push(TopologyOp::SuperLeafTransfer {
                    subtree: hanging.clone(),
                    from: k,
                    to,
                });
            }
        }
    }
    ops
}

fn fmt_members(s: &SuperLeaf) -> String {
    let inner: Vec<String> = s.members().iter().map(|m| m.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

impl fmt::Display for TopologyOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyOp::Leafization { node, toward } => write!(f, "L {node} {toward}"),
            TopologyOp::LeafTransfer { leaf, from, to } => write!(f, "LT {leaf} {from} {to}"),
            TopologyOp::SuperLeafization { subtree, toward } => {
                write!(f, "SL {} {} {toward}", subtree.root(), fmt_members(subtree))
            }
            TopologyOp::SuperLeafTransfer { subtree, from, to } => {
                write!(f, "SLT {} {} {from} {to}", subtree.root(), fmt_members(subtree))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse `{text}`: {reason}")]
pub struct OpParseError {
    pub text: String,
    pub reason: String,
}

fn parse_err(text: &str, reason: impl Into<String>) -> OpParseError {
    OpParseError {
        text: text.to_string(),
        reason: reason.into(),
    }
}

fn parse_members(token: &str, whole: &str) -> Result<Vec<Node>, OpParseError> {
    let inner = token
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| parse_err(whole, "member set must look like {a,b,...}"))?;
    inner
        .split(',')
        .map(|m| m.trim().parse().map_err(|_| parse_err(whole, format!("bad member `{m}`"))))
        .collect()
}

impl FromStr for TopologyOp {
    type Err = OpParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        let num = |i: usize| -> Result<Node, OpParseError> {
            tokens
                .get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(s, format!("argument {i} is not a node label")))
        };
        let arity = |expected: usize| -> Result<(), OpParseError> {
            if tokens.len() == expected {
                Ok(())
            } else {
                Err(parse_err(s, format!("expected {} arguments", expected - 1)))
            }
        };
        match tokens.first().copied() {
            Some("L") => {
                arity(3)?;
                Ok(TopologyOp::Leafization { node: num(1)?, toward: num(2)? })
            }
            Some("LT") => {
                arity(4)?;
                Ok(TopologyOp::LeafTransfer { leaf: num(1)?, from: num(2)?, to: num(3)? })
            }
            Some("SL") => {
                arity(4)?;
                let subtree = SuperLeaf::new(num(1)?, parse_members(tokens[2], s)?);
                Ok(TopologyOp::SuperLeafization { subtree, toward: num(3)? })
            }
            Some("SLT") => {
                arity(5)?;
                let subtree = SuperLeaf::new(num(1)?, parse_members(tokens[2], s)?);
                Ok(TopologyOp::SuperLeafTransfer { subtree, from: num(3)?, to: num(4)? })
            }
            _ => Err(parse_err(s, "unknown operation kind")),
        }
    }
}

fn format_edges(prefix: char, edges: &[Edge]) -> String {
    edges
        .iter()
        .map(|(u, v)| format!("{prefix}{u}-{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn format_log_line(op: &TopologyOp, removed: &[Edge], added: &[Edge]) -> String {
    format!("{op} | {} | {}", format_edges('-', removed), format_edges('+', added))
}

/// An operation line as read back from a log, without certificates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedOp {
    pub op: TopologyOp,
    pub edges_removed: Vec<Edge>,
    pub edges_added: Vec<Edge>,
}

fn parse_edges(field: &str, prefix: char, whole: &str) -> Result<Vec<Edge>, OpParseError> {
    field
        .split_whitespace()
        .map(|tok| {
            let body = tok
                .strip_prefix(prefix)
                .ok_or_else(|| parse_err(whole, format!("edge `{tok}` must start with `{prefix}`")))?;
            let (u, v) = body
                .split_once('-')
                .ok_or_else(|| parse_err(whole, format!("edge `{tok}` must look like {prefix}u-v")))?;
            match (u.parse(), v.parse()) {
                (Ok(u), Ok(v)) => Ok(canonical(u, v)),
                _ => Err(parse_err(whole, format!("bad edge `{tok}`"))),
            }
        })
        .collect()
}

impl FromStr for LoggedOp {
    type Err = OpParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 3 {
            return Err(parse_err(s, "expected `<op> | -edges | +edges`"));
        }
        Ok(LoggedOp {
            op: parts[0].trim().parse()?,
            edges_removed: parse_edges(parts[1], '-', s)?,
            edges_added: parse_edges(parts[2], '+', s)?,
        })
    }
}

impl From<&OpLogEntry> for LoggedOp {
    fn from(e: &OpLogEntry) -> Self {
        LoggedOp {
            op: e.op.clone(),
            edges_removed: e.edges_removed.clone(),
            edges_added: e.edges_added.clone(),
        }
    }
}
