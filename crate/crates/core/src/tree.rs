//! Labeled trees on nodes `1..=n`, structural queries and the text edge-list format.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Dense 1-based node label.
pub type Node = usize;

/// Undirected edge stored as `(min, max)`.
pub type Edge = (Node, Node);

pub fn canonical(u: Node, v: Node) -> Edge {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("a tree needs at least 2 nodes, got {0}")]
    TooSmall(usize),
    #[error("node {node} is outside 1..={n}")]
    NodeOutOfRange { node: Node, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(Node),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(Node, Node),
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("expected {expected} edges, found {found}")]
    WrongEdgeCount { expected: usize, found: usize },
    #[error("{0}-{1} is not an edge")]
    NotAnEdge(Node, Node),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// A validated labeled tree. Immutable; operations build new values.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LabeledTree {
    n: usize,
    edges: BTreeSet<Edge>,
    // adj[v] sorted ascending, adj[0] unused
    adj: Vec<Vec<Node>>,
}

fn check_node(node: Node, n: usize) -> Result<(), TreeError> {
    if node == 0 || node > n {
        Err(TreeError::NodeOutOfRange { node, n })
    } else {
        Ok(())
    }
}

fn count_components(n: usize, adj: &[Vec<Node>]) -> usize {
    let mut seen = vec![false; n + 1];
    let mut components = 0;
    for start in 1..=n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    components
}

/// Validates `edges` as a spanning tree on `1..=n`.
///
/// Per-edge problems (range, self-loop, duplicate) are reported first, then
/// connectivity, then the edge count.
pub fn validate_tree<I>(n: usize, edges: I) -> Result<LabeledTree, TreeError>
where
    I: IntoIterator<Item = Edge>,
{
    if n < 2 {
        return Err(TreeError::TooSmall(n));
    }
    let mut set = BTreeSet::new();
    let mut adj = vec![Vec::new(); n + 1];
    for (u, v) in edges {
        check_node(u, n)?;
        check_node(v, n)?;
        if u == v {
            return Err(TreeError::SelfLoop(u));
        }
        let e = canonical(u, v);
        if !set.insert(e) {
            return Err(TreeError::DuplicateEdge(e.0, e.1));
        }
        adj[u].push(v);
        adj[v].push(u);
    }
    let components = count_components(n, &adj);
    if components > 1 {
        return Err(TreeError::Disconnected { components });
    }
    if set.len() != n - 1 {
        return Err(TreeError::WrongEdgeCount {
            expected: n - 1,
            found: set.len(),
        });
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
    }
    Ok(LabeledTree { n, edges: set, adj })
}

impl LabeledTree {
    pub fn new<I>(n: usize, edges: I) -> Result<Self, TreeError>
    where
        I: IntoIterator<Item = Edge>,
    {
        validate_tree(n, edges)
    }

    /// Path `1-2-...-n`.
    pub fn path(n: usize) -> Result<Self, TreeError> {
        validate_tree(n, (1..n).map(|v| (v, v + 1)))
    }

    /// Star with every other node attached to `center`.
    pub fn star(n: usize, center: Node) -> Result<Self, TreeError> {
        check_node(center, n.max(1))?;
        validate_tree(n, (1..=n).filter(|&v| v != center).map(|v| (center, v)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_set(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn has_edge(&self, u: Node, v: Node) -> bool {
        self.edges.contains(&canonical(u, v))
    }

    pub fn contains_node(&self, v: Node) -> bool {
        v >= 1 && v <= self.n
    }

    pub fn neighbors(&self, v: Node) -> Result<&[Node], TreeError> {
        check_node(v, self.n)?;
        Ok(&self.adj[v])
    }

    pub fn degree(&self, v: Node) -> Result<usize, TreeError> {
        Ok(self.neighbors(v)?.len())
    }

    /// Unchecked neighbor slice; panics when `v` is out of range.
    pub(crate) fn nbrs(&self, v: Node) -> &[Node] {
        &self.adj[v]
    }

    /// Degrees indexed by label; index 0 is unused and zero.
    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn leaves(&self) -> impl Iterator<Item = Node> + '_ {
        (1..=self.n).filter(move |&v| self.adj[v].len() == 1)
    }

    /// The unique simple path from `s` to `d`, inclusive of both ends.
    pub fn path_between(&self, s: Node, d: Node) -> Result<Vec<Node>, TreeError> {
        check_node(s, self.n)?;
        check_node(d, self.n)?;
        let mut parent = vec![0; self.n + 1];
        parent[d] = d;
        let mut queue = VecDeque::from([d]);
        while let Some(u) = queue.pop_front() {
            if u == s {
                break;
            }
            for &w in &self.adj[u] {
                if parent[w] == 0 {
                    parent[w] = u;
                    queue.push_back(w);
                }
            }
        }
        let mut path = vec![s];
        let mut cur = s;
        while cur != d {
            cur = parent[cur];
            path.push(cur);
        }
        Ok(path)
    }

    pub fn hop_distance(&self, s: Node, d: Node) -> Result<usize, TreeError> {
        Ok(self.path_between(s, d)?.len() - 1)
    }

    /// Nodes whose path to `away_from` passes through `j`, rooted at `j`.
    pub fn subtree_rooted_at(&self, j: Node, away_from: Node) -> Result<SuperLeaf, TreeError> {
        check_node(j, self.n)?;
        check_node(away_from, self.n)?;
        if !self.has_edge(j, away_from) {
            return Err(TreeError::NotAnEdge(j, away_from));
        }
        let mut members = BTreeSet::from([j]);
        let mut stack = vec![(j, away_from)];
        while let Some((u, from)) = stack.pop() {
            for &w in &self.adj[u] {
                if w != from {
                    members.insert(w);
                    stack.push((w, u));
                }
            }
        }
        Ok(SuperLeaf { root: j, members })
    }

    /// Whether `candidate` hangs from the rest of the tree by exactly one edge at its root.
    pub fn is_super_leaf(&self, candidate: &SuperLeaf) -> bool {
        let members = &candidate.members;
        if members.iter().any(|&m| !self.contains_node(m)) || !members.contains(&candidate.root) {
            return false;
        }
        let mut outside_at_root = 0;
        for &m in members {
            let outside = self.adj[m].iter().filter(|w| !members.contains(w)).count();
            if m == candidate.root {
                outside_at_root = outside;
            } else if outside > 0 {
                return false;
            }
        }
        if outside_at_root != 1 {
            return false;
        }
        // connectivity of the induced subgraph
        let mut seen = BTreeSet::from([candidate.root]);
        let mut stack = vec![candidate.root];
        while let Some(u) = stack.pop() {
            for &w in &self.adj[u] {
                if members.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == members.len()
    }

    pub fn adjacency_matrix(&self) -> AdjacencyMatrix {
        AdjacencyMatrix::from_edges(self.n, self.edges())
            .expect("tree edges are in range and loop-free")
    }

    /// Sorted degree sequence, handy for shape checks.
    pub fn degree_multiset(&self) -> Vec<usize> {
        let mut d: Vec<usize> = (1..=self.n).map(|v| self.adj[v].len()).collect();
        d.sort_unstable();
        d
    }

    pub fn is_path(&self) -> bool {
        self.n == 2 || self.adj[1..].iter().all(|a| a.len() <= 2)
    }

    pub fn is_star(&self) -> bool {
        self.adj[1..].iter().any(|a| a.len() == self.n - 1)
    }
}

impl fmt::Debug for LabeledTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LabeledTree(n={}, {:?})", self.n, self.edges)
    }
}

/// Header `n=<N>` followed by one `u v` line per edge.
impl fmt::Display for LabeledTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.n)?;
        for (u, v) in &self.edges {
            writeln!(f, "{u} {v}")?;
        }
        Ok(())
    }
}

impl FromStr for LabeledTree {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lines = s
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (header_line, n) = parse_header(&mut lines)?;
        let mut edges = Vec::new();
        for (line, text) in lines {
            edges.push(parse_edge_line(line, text)?);
        }
        if edges.is_empty() && n > 2 {
            return Err(TreeError::Parse {
                line: header_line,
                reason: "no edges after header".into(),
            });
        }
        validate_tree(n, edges)
    }
}

pub(crate) fn parse_header<'a, I>(lines: &mut I) -> Result<(usize, usize), TreeError>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let (line, text) = lines.next().ok_or(TreeError::Parse {
        line: 0,
        reason: "missing `n=<N>` header".into(),
    })?;
    let n = text
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| TreeError::Parse {
            line,
            reason: format!("expected `n=<N>`, got `{text}`"),
        })?;
    Ok((line, n))
}

pub(crate) fn parse_edge_line(line: usize, text: &str) -> Result<Edge, TreeError> {
    let mut parts = text.split_whitespace().map(str::parse::<Node>);
    match (parts.next(), parts.next(), parts.next()) {
        (Some(Ok(u)), Some(Ok(v)), None) => Ok((u, v)),
        _ => Err(TreeError::Parse {
            line,
            reason: format!("expected `u v`, got `{text}`"),
        }),
    }
}

/// A subtree identified by its root and member set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SuperLeaf {
    root: Node,
    members: BTreeSet<Node>,
}

impl SuperLeaf {
    /// The root is always added to `members`.
    pub fn new<I: IntoIterator<Item = Node>>(root: Node, members: I) -> Self {
        let mut members: BTreeSet<Node> = members.into_iter().collect();
        members.insert(root);
        SuperLeaf { root, members }
    }

    pub fn singleton(root: Node) -> Self {
        SuperLeaf::new(root, [])
    }

    pub fn root(&self) -> Node {
        self.root
    }

    pub fn members(&self) -> &BTreeSet<Node> {
        &self.members
    }

    pub fn contains(&self, v: Node) -> bool {
        self.members.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }
}

/// Dense symmetric 0/1 adjacency with zero diagonal, indexed by 1-based labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    entries: Vec<u8>,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        AdjacencyMatrix {
            n,
            entries: vec![0; n * n],
        }
    }

    /// Any simple undirected graph; duplicate edges are idempotent.
    pub fn from_edges<I: IntoIterator<Item = Edge>>(n: usize, edges: I) -> Result<Self, TreeError> {
        let mut m = AdjacencyMatrix::empty(n);
        for (u, v) in edges {
            check_node(u, n)?;
            check_node(v, n)?;
            if u == v {
                return Err(TreeError::SelfLoop(u));
            }
            m.entries[(u - 1) * n + (v - 1)] = 1;
            m.entries[(v - 1) * n + (u - 1)] = 1;
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: Node, j: Node) -> u8 {
        self.entries[(i - 1) * self.n + (j - 1)]
    }

    pub fn degree(&self, i: Node) -> usize {
        (1..=self.n).map(|j| self.get(i, j) as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.entries.iter().map(|&e| e as usize).sum::<usize>() / 2
    }
}
