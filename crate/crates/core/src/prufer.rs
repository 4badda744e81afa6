//! Prüfer codes: encoding by lowest-leaf elimination, linear-time decoding,
//! and exhaustive enumeration of labeled trees for small `n`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use thiserror::Error;

use crate::tree::{LabeledTree, Node};

/// Largest `n` accepted by [`enumerate_trees`]; 7^5 = 16807 trees.
pub const MAX_ENUMERATION_NODES: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PruferError {
    #[error("a tree needs at least 2 nodes, got {0}")]
    TooSmall(usize),
    #[error("sequence for n={n} must have length {expected}, got {found}")]
    LengthMismatch { n: usize, expected: usize, found: usize },
    #[error("symbol {symbol} is outside 1..={n}")]
    SymbolOutOfRange { symbol: Node, n: usize },
    #[error("enumeration is capped at n={cap}, requested n={n}")]
    CapExceeded { n: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PruferSequence {
    n: usize,
    symbols: Vec<Node>,
}

impl PruferSequence {
    pub fn new(n: usize, symbols: Vec<Node>) -> Result<Self, PruferError> {
        if n < 2 {
            return Err(PruferError::TooSmall(n));
        }
        if symbols.len() != n - 2 {
            return Err(PruferError::LengthMismatch {
                n,
                expected: n - 2,
                found: symbols.len(),
            });
        }
        if let Some(&symbol) = symbols.iter().find(|&&s| s == 0 || s > n) {
            return Err(PruferError::SymbolOutOfRange { symbol, n });
        }
        Ok(PruferSequence { n, symbols })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn symbols(&self) -> &[Node] {
        &self.symbols
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self, PruferError> {
        if n < 2 {
            return Err(PruferError::TooSmall(n));
        }
        let symbols = (0..n - 2).map(|_| rng.gen_range(1..=n)).collect();
        Ok(PruferSequence { n, symbols })
    }
}

/// Lowest-leaf elimination order together with the recorded attachments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationTrace {
    pub removed_leaves: Vec<Node>,
    pub attachments: PruferSequence,
}

pub fn encode(tree: &LabeledTree) -> EliminationTrace {
    let n = tree.n();
    let mut degree = tree.degrees();
    let mut removed = vec![false; n + 1];
    let mut leaves: BinaryHeap<Reverse<Node>> = tree.leaves().map(Reverse).collect();
    let mut removed_leaves = Vec::with_capacity(n.saturating_sub(2));
    let mut symbols = Vec::with_capacity(n.saturating_sub(2));
    while removed_leaves.len() + 2 < n {
        let Reverse(leaf) = leaves.pop().expect("a tree with >2 nodes has a leaf");
        let parent = *tree
            .nbrs(leaf)
            .iter()
            .find(|&&w| !removed[w])
            .expect("a leaf keeps exactly one live neighbor");
        removed[leaf] = true;
        removed_leaves.push(leaf);
        symbols.push(parent);
        degree[parent] -= 1;
        if degree[parent] == 1 {
            leaves.push(Reverse(parent));
        }
    }
    EliminationTrace {
        removed_leaves,
        attachments: PruferSequence { n, symbols },
    }
}

pub fn decode(seq: &PruferSequence) -> LabeledTree {
    let n = seq.n;
    let mut degree = vec![1usize; n + 1];
    for &s in &seq.symbols {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut ptr = (1..=n).find(|&v| degree[v] == 1).expect("some label is absent");
    let mut leaf = ptr;
    for &v in &seq.symbols {
        edges.push((leaf, v));
        degree[leaf] = 0;
        degree[v] -= 1;
        if degree[v] == 1 && v < ptr {
            leaf = v;
        } else {
            ptr += 1;
            while degree[ptr] != 1 {
                ptr += 1;
            }
            leaf = ptr;
        }
    }
    edges.push((leaf, n));
    LabeledTree::new(n, edges).expect("decoded Prüfer sequences are trees")
}

pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<LabeledTree, PruferError> {
    Ok(decode(&PruferSequence::random(n, rng)?))
}

/// Every labeled tree on `n` nodes, in lexicographic order of Prüfer code.
pub fn enumerate_trees(n: usize) -> Result<TreeEnumerator, PruferError> {
    if n < 2 {
        return Err(PruferError::TooSmall(n));
    }
    if n > MAX_ENUMERATION_NODES {
        return Err(PruferError::CapExceeded {
            n,
            cap: MAX_ENUMERATION_NODES,
        });
    }
    Ok(TreeEnumerator {
        n,
        next: Some(vec![1; n - 2]),
    })
}

pub struct TreeEnumerator {
    n: usize,
    next: Option<Vec<Node>>,
}

impl TreeEnumerator {
    pub fn total(&self) -> usize {
        self.n.pow((self.n - 2) as u32)
    }
}

impl Iterator for TreeEnumerator {
    type Item = LabeledTree;

    fn next(&mut self) -> Option<LabeledTree> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carried = true;
        for s in succ.iter_mut().rev() {
            if *s < self.n {
                *s += 1;
                carried = false;
                break;
            }
            *s = 1;
        }
        if !carried {
            self.next = Some(succ);
        }
        Some(decode(&PruferSequence {
            n: self.n,
            symbols: current,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn seq(n: usize, s: &[Node]) -> PruferSequence {
        PruferSequence::new(n, s.to_vec()).unwrap()
    }

    #[test]
    fn encode_examples() {
        let path = LabeledTree::path(4).unwrap();
        let trace = encode(&path);
        assert_eq!(trace.attachments.symbols(), &[2, 3]);
        assert_eq!(trace.removed_leaves, vec![1, 2]);
        let star = LabeledTree::star(5, 1).unwrap();
        assert_eq!(encode(&star).attachments.symbols(), &[1, 1, 1]);
        assert!(encode(&LabeledTree::path(2).unwrap()).attachments.symbols().is_empty());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode(&seq(4, &[2, 3])), LabeledTree::path(4).unwrap());
        assert_eq!(decode(&seq(5, &[1, 1, 1])), LabeledTree::star(5, 1).unwrap());
        assert_eq!(decode(&seq(2, &[])), LabeledTree::path(2).unwrap());
    }

    #[test]
    fn malformed_sequences() {
        assert_eq!(
            PruferSequence::new(4, vec![2, 5]),
            Err(PruferError::SymbolOutOfRange { symbol: 5, n: 4 })
        );
        assert_eq!(
            PruferSequence::new(4, vec![0, 1]),
            Err(PruferError::SymbolOutOfRange { symbol: 0, n: 4 })
        );
        assert!(matches!(
            PruferSequence::new(4, vec![1]),
            Err(PruferError::LengthMismatch { .. })
        ));
        assert_eq!(PruferSequence::new(1, vec![]), Err(PruferError::TooSmall(1)));
    }

    #[test]
    fn cayley_counts() {
        for (n, count) in [(2, 1), (3, 3), (4, 16), (5, 125), (6, 1296)] {
            let trees: HashSet<_> = enumerate_trees(n).unwrap().collect();
            assert_eq!(trees.len(), count, "n={n}");
        }
        assert_eq!(
            enumerate_trees(8).err(),
            Some(PruferError::CapExceeded { n: 8, cap: 7 })
        );
    }

    #[test]
    fn elimination_picks_lowest_leaf() {
        // oracle: repeatedly delete the smallest current leaf by brute force
        for tree in enumerate_trees(6).unwrap() {
            let mut edges: Vec<_> = tree.edges().collect();
            let mut alive: Vec<Node> = (1..=6).collect();
            let trace = encode(&tree);
            for (&leaf, &parent) in trace.removed_leaves.iter().zip(trace.attachments.symbols()) {
                let deg = |v: Node, es: &[(Node, Node)]| es.iter().filter(|e| e.0 == v || e.1 == v).count();
                let lowest = *alive.iter().find(|&&v| deg(v, &edges) == 1).unwrap();
                assert_eq!(leaf, lowest);
                let idx = edges.iter().position(|e| e.0 == leaf || e.1 == leaf).unwrap();
                let e = edges.remove(idx);
                assert_eq!(if e.0 == leaf { e.1 } else { e.0 }, parent);
                alive.retain(|&v| v != leaf);
            }
        }
    }

    proptest! {
        #[test]
        fn degree_law(n in 2usize..40, seed in any::<u64>()) {
            let tree = random_tree(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let trace = encode(&tree);
            for v in 1..=n {
                let count = trace.attachments.symbols().iter().filter(|&&s| s == v).count();
                prop_assert_eq!(count + 1, tree.degree(v).unwrap());
            }
        }

        #[test]
        fn roundtrip_random(n in 2usize..60, seed in any::<u64>()) {
            let s = PruferSequence::random(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let tree = decode(&s);
            prop_assert_eq!(encode(&tree).attachments, s);
        }
    }
}
