//! Constructive tree-to-tree planning.
//!
//! The target's lowest-leaf elimination trace fixes an order `(l_m, p_m)`. Step
//! `m` gathers `l_m` together with the subtrees already placed under it into
//! one hanging subtree, detaches it from everything else, and walks its single
//! attachment edge one hop at a time until it reaches `p_m`. Walks never enter
//! placed nodes, since those only carry edges that already belong to the target.

use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ops::{apply, LoggedOp, OpError, OpLogEntry, TopologyOp};
use crate::prufer::{encode, random_tree};
use crate::tree::{parse_edge_line, parse_header, LabeledTree, Node, SuperLeaf, TreeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("initial tree has {initial} nodes but target has {target}")]
    SizeMismatch { initial: usize, target: usize },
    #[error("step {step} failed: {source}")]
    Step { step: usize, source: OpError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformPlan {
    pub initial: LabeledTree,
    pub target: LabeledTree,
    pub steps: Vec<TopologyOp>,
}

impl TransformPlan {
    pub fn intermediate_count(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }
}

fn hanging_group(tree: &LabeledTree, leaf: Node, placed: &[bool]) -> SuperLeaf {
    let mut members = BTreeSet::from([leaf]);
    for &q in tree.nbrs(leaf) {
        if placed[q] {
            let branch = tree.subtree_rooted_at(q, leaf).expect("q is adjacent to leaf");
            members.extend(branch.members().iter().copied());
        }
    }
    SuperLeaf::new(leaf, members)
}

fn push(
    current: &mut LabeledTree,
    steps: &mut Vec<TopologyOp>,
    op: TopologyOp,
) -> Result<(), PlanError> {
    let (next, _) = apply(current, &op).map_err(|source| PlanError::Step {
        step: steps.len(),
        source,
    })?;
    *current = next;
    steps.push(op);
    Ok(())
}

pub fn plan(initial: &LabeledTree, target: &LabeledTree) -> Result<TransformPlan, PlanError> {
    if initial.n() != target.n() {
        return Err(PlanError::SizeMismatch {
            initial: initial.n(),
            target: target.n(),
        });
    }
    let n = initial.n();
    let trace = encode(target);
    let mut current = initial.clone();
    let mut steps = Vec::new();
    let mut placed = vec![false; n + 1];

    let order = trace.removed_leaves.iter().zip(trace.attachments.symbols());
    for (&leaf, &parent) in order {
        let group = hanging_group(&current, leaf, &placed);
        let outside: Vec<Node> = current
            .nbrs(leaf)
            .iter()
            .copied()
            .filter(|w| !group.contains(*w))
            .collect();
        if outside.len() > 1 {
            let toward = current.path_between(leaf, parent).expect("labels in range")[1];
            let op = if group.is_singleton() {
                TopologyOp::Leafization { node: leaf, toward }
            } else {
                TopologyOp::SuperLeafization {
                    subtree: group.clone(),
                    toward,
                }
            };
            push(&mut current, &mut steps, op)?;
        }
        loop {
            let from = *current
                .nbrs(leaf)
                .iter()
                .find(|w| !group.contains(**w))
                .expect("the group hangs by one edge");
            if from == parent {
                break;
            }
            let to = current.path_between(from, parent).expect("labels in range")[1];
            let op = if group.is_singleton() {
                TopologyOp::LeafTransfer { leaf, from, to }
            } else {
                TopologyOp::SuperLeafTransfer {
                    subtree: group.clone(),
                    from,
                    to,
                }
            };
            push(&mut current, &mut steps, op)?;
        }
        placed[leaf] = true;
    }
    debug_assert_eq!(&current, target);
    Ok(TransformPlan {
        initial: initial.clone(),
        target: target.clone(),
        steps,
    })
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub final_tree: LabeledTree,
    pub log: Vec<OpLogEntry>,
}

/// Folds the plan's steps over its initial tree.
pub fn replay(plan: &TransformPlan) -> Result<Replay, PlanError> {
    replay_with(plan, |_, _| {})
}

/// Like [`replay`], calling `visit(step_index, tree_after_step)` after each step.
pub fn replay_with<F>(plan: &TransformPlan, mut visit: F) -> Result<Replay, PlanError>
where
    F: FnMut(usize, &LabeledTree),
{
    let mut tree = plan.initial.clone();
    let mut log = Vec::with_capacity(plan.steps.len());
    for (step, op) in plan.steps.iter().enumerate() {
        let (next, entry) = apply(&tree, op).map_err(|source| PlanError::Step { step, source })?;
        visit(step, &next);
        tree = next;
        log.push(entry);
    }
    Ok(Replay {
        final_tree: tree,
        log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanLengthStats {
    pub samples: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

/// Step counts of plans between `sample` random tree pairs on `n` nodes.
pub fn plan_length_stats(n: usize, sample: usize, seed: u64) -> PlanLengthStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lengths = Vec::with_capacity(sample);
    for _ in 0..sample {
        let a = random_tree(n, &mut rng).expect("n >= 2");
        let b = random_tree(n, &mut rng).expect("n >= 2");
        lengths.push(plan(&a, &b).expect("equal sizes").steps.len());
    }
    summarize(&lengths)
}

fn summarize(lengths: &[usize]) -> PlanLengthStats {
    if lengths.is_empty() {
        return PlanLengthStats {
            samples: 0,
            min: 0,
            max: 0,
            mean: 0.0,
        };
    }
    PlanLengthStats {
        samples: lengths.len(),
        min: *lengths.iter().min().unwrap(),
        max: *lengths.iter().max().unwrap(),
        mean: lengths.iter().sum::<usize>() as f64 / lengths.len() as f64,
    }
}

#[derive(Debug, Error)]
pub enum PlanFileError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Plan file: `n=<N>`, an `initial` edge block, a `target` edge block, then
/// `steps` followed by one op log line per step.
impl fmt::Display for TransformPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.initial.n())?;
        writeln!(f, "initial")?;
        for (u, v) in self.initial.edges() {
            writeln!(f, "{u} {v}")?;
        }
        writeln!(f, "target")?;
        for (u, v) in self.target.edges() {
            writeln!(f, "{u} {v}")?;
        }
        writeln!(f, "steps")?;
        let mut tree = self.initial.clone();
        for op in &self.steps {
            match apply(&tree, op) {
                Ok((next, entry)) => {
                    writeln!(f, "{}", entry.to_log_line())?;
                    tree = next;
                }
                // an invalid step keeps its op text so replay can report it
                Err(_) => writeln!(f, "{op} | | ")?,
            }
        }
        Ok(())
    }
}

impl TransformPlan {
    pub fn parse(text: &str) -> Result<TransformPlan, PlanFileError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, n) = parse_header(&mut lines)?;
        let mut section = "";
        let mut initial = Vec::new();
        let mut target = Vec::new();
        let mut steps = Vec::new();
        for (line, text) in lines {
            match text {
                "initial" | "target" | "steps" => {
                    section = text;
                    continue;
                }
                _ => {}
            }
            match section {
                "initial" => initial.push(parse_edge_line(line, text)?),
                "target" => target.push(parse_edge_line(line, text)?),
                "steps" => {
                    let logged: LoggedOp = text.parse().map_err(|e: crate::ops::OpParseError| {
                        PlanFileError::Syntax {
                            line,
                            reason: e.to_string(),
                        }
                    })?;
                    steps.push(logged.op);
                }
                _ => {
                    return Err(PlanFileError::Syntax {
                        line,
                        reason: format!("unexpected `{text}` before a section header"),
                    })
                }
            }
        }
        Ok(TransformPlan {
            initial: LabeledTree::new(n, initial)?,
            target: LabeledTree::new(n, target)?,
            steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prufer::enumerate_trees;
    use proptest::prelude::*;

    #[test]
    fn identity_plan_is_empty() {
        let t = LabeledTree::path(6).unwrap();
        let p = plan(&t, &t).unwrap();
        assert!(p.steps.is_empty());
        assert_eq!(replay(&p).unwrap().final_tree, t);
    }

    #[test]
    fn star_to_path() {
        let star = LabeledTree::star(4, 1).unwrap();
        let path = LabeledTree::path(4).unwrap();
        let p = plan(&star, &path).unwrap();
        assert!(!p.steps.is_empty());
        assert_eq!(replay(&p).unwrap().final_tree, path);
    }

    #[test]
    fn size_mismatch() {
        let a = LabeledTree::path(4).unwrap();
        let b = LabeledTree::path(5).unwrap();
        assert_eq!(plan(&a, &b).err(), Some(PlanError::SizeMismatch { initial: 4, target: 5 }));
    }

    #[test]
    fn invalid_step_reports_its_index() {
        let t = LabeledTree::path(4).unwrap();
        let p = TransformPlan {
            initial: t.clone(),
            target: t,
            steps: vec![
                TopologyOp::LeafTransfer { leaf: 1, from: 2, to: 3 },
                TopologyOp::LeafTransfer { leaf: 3, from: 4, to: 2 },
            ],
        };
        assert!(matches!(replay(&p), Err(PlanError::Step { step: 1, source: OpError::NotALeaf(3) })));
    }

    fn op_root(op: &TopologyOp) -> Node {
        match op {
            TopologyOp::Leafization { node, .. } => *node,
            TopologyOp::LeafTransfer { leaf, .. } => *leaf,
            TopologyOp::SuperLeafization { subtree, .. } | TopologyOp::SuperLeafTransfer { subtree, .. } => {
                subtree.root()
            }
        }
    }

    #[test]
    fn placed_edges_stay_put() {
        // while step m is being worked on, every (l_i, p_i) with i < m is an edge
        let trees: Vec<_> = enumerate_trees(5).unwrap().collect();
        for target in &trees {
            let trace = encode(target);
            let pairs: Vec<(Node, Node)> = trace
                .removed_leaves
                .iter()
                .copied()
                .zip(trace.attachments.symbols().iter().copied())
                .collect();
            for initial in &trees {
                let p = plan(initial, target).unwrap();
                let mut tree = initial.clone();
                let mut last_m = 0;
                for op in &p.steps {
                    let m = pairs.iter().position(|&(l, _)| l == op_root(op)).unwrap();
                    assert!(m >= last_m, "steps follow the elimination order");
                    last_m = m;
                    for &(l, q) in &pairs[..m] {
                        assert!(tree.has_edge(l, q));
                    }
                    tree = apply(&tree, op).unwrap().0;
                }
                assert_eq!(&tree, target);
            }
        }
    }

    #[test]
    fn plan_file_roundtrip() {
        let star = LabeledTree::star(6, 3).unwrap();
        let path = LabeledTree::path(6).unwrap();
        let p = plan(&star, &path).unwrap();
        let text = p.to_string();
        assert!(text.starts_with("n=6\ninitial\n"));
        assert_eq!(TransformPlan::parse(&text).unwrap(), p);
        assert!(matches!(
            TransformPlan::parse("n=3\n1 2\n"),
            Err(PlanFileError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn length_stats() {
        let s = plan_length_stats(2, 10, 0);
        assert_eq!((s.min, s.max), (0, 0));
        let a = plan_length_stats(6, 200, 7);
        assert_eq!(a, plan_length_stats(6, 200, 7));
        assert!(a.min <= a.max && a.mean >= a.min as f64 && a.mean <= a.max as f64);
    }

    proptest! {
        #[test]
        fn random_pairs_reach_target(n in 2usize..40, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_tree(n, &mut rng).unwrap();
            let b = random_tree(n, &mut rng).unwrap();
            let p = plan(&a, &b).unwrap();
            let r = replay(&p).unwrap();
            prop_assert_eq!(r.final_tree, b);
            prop_assert!(r.log.iter().all(|e| e.max_certificate_hops() <= 2));
        }
    }
}
