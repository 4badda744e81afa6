//! Spanning-tree topology manipulation for robot swarms.

pub mod ops;
pub mod planner;
pub mod experiment;
pub mod metrics;
pub mod protocol;
pub mod spatial;
pub mod prufer;
pub mod tree;

pub use ops::{apply, OpError, OpLogEntry, TopologyOp};
pub use planner::{plan, replay, PlanError, TransformPlan};
pub use prufer::{decode, encode, enumerate_trees, EliminationTrace, PruferSequence};
pub use tree::{validate_tree, AdjacencyMatrix, Edge, LabeledTree, Node, SuperLeaf, TreeError};
