//! Laplacian spectra, degree histograms and per-run metric series.

use std::io;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::spatial::{RangeConfig, WorldState};
use crate::tree::{AdjacencyMatrix, LabeledTree};

/// Comparison tolerance for eigenvalues.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    entries: DMatrix<f64>,
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Entry at 1-based `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i - 1, j - 1)]
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.n() == 0 {
            return Vec::new();
        }
        let mut values: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        values.sort_by(f64::total_cmp);
        values
    }
}

/// `D - A`.
pub fn laplacian(adj: &AdjacencyMatrix) -> LaplacianMatrix {
    let n = adj.n();
    let mut entries = DMatrix::zeros(n, n);
    for i in 1..=n {
        for j in 1..=n {
            if adj.get(i, j) == 1 {
                entries[(i - 1, j - 1)] = -1.0;
                entries[(i - 1, i - 1)] += 1.0;
            }
        }
    }
    LaplacianMatrix { entries }
}

/// Second-smallest Laplacian eigenvalue, clamped at zero. Zero for `n < 2`.
pub fn lambda2(lap: &LaplacianMatrix) -> f64 {
    let values = lap.eigenvalues();
    values.get(1).map_or(0.0, |v| v.max(0.0))
}

pub fn tree_lambda2(tree: &LabeledTree) -> f64 {
    lambda2(&laplacian(&tree.adjacency_matrix()))
}

/// λ2 of the graph joining every pair of robots within range, tree links or not.
pub fn lambda2_of_proximity_graph(world: &WorldState, cfg: &RangeConfig) -> f64 {
    let n = world.n();
    let pairs = (1..=n)
        .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
        .filter(|&(i, j)| world.distance(i, j) <= cfg.range);
    lambda2(&laplacian(&AdjacencyMatrix::from_edges(n, pairs).expect("labels in range")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DegreeHistogram {
    pub deg1: usize,
    pub deg2: usize,
    pub deg_ge2: usize,
}

pub fn degree_histogram(tree: &LabeledTree) -> DegreeHistogram {
    let mut h = DegreeHistogram {
        deg1: 0,
        deg2: 0,
        deg_ge2: 0,
    };
    for d in tree.degrees().into_iter().skip(1) {
        match d {
            1 => h.deg1 += 1,
            _ => {
                h.deg_ge2 += 1;
                if d == 2 {
                    h.deg2 += 1;
                }
            }
        }
    }
    h
}

/// Sum over nodes of `max(degree - 2, 0)`; zero exactly on paths.
pub fn branching_excess(tree: &LabeledTree) -> usize {
    tree.degrees().iter().skip(1).map(|&d| d.saturating_sub(2)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricRow {
    pub time: f64,
    pub round: usize,
    pub lambda2_tree: f64,
    pub lambda2_graph: f64,
    pub coverage: f64,
    pub deg1: usize,
    pub deg2: usize,
    pub deg_ge2: usize,
    pub ops_committed: usize,
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("time {next} does not follow {last}")]
    NonIncreasingTime { last: f64, next: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Rows with strictly increasing time.
#[derive(Debug, Clone, Default)]
pub struct MetricSeries {
    rows: Vec<MetricRow>,
}

impl MetricSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: MetricRow) -> Result<(), MetricError> {
        if let Some(last) = self.rows.last() {
            if row.time <= last.time {
                return Err(MetricError::NonIncreasingTime {
                    last: last.time,
                    next: row.time,
                });
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&MetricRow> {
        self.rows.last()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Header `time,round,lambda2_tree,lambda2_graph,coverage,deg1,deg2,deg_ge2,ops_committed`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), MetricError> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "time",
                "round",
                "lambda2_tree",
                "lambda2_graph",
                "coverage",
                "deg1",
                "deg2",
                "deg_ge2",
                "ops_committed",
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
