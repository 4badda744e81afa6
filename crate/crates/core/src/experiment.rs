//! Full trials: random initial swarm, decentralized rewiring with physical
//! execution, final arrangement, metrics and artifacts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use petgraph::unionfind::UnionFind;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    branching_excess, degree_histogram, lambda2_of_proximity_graph, tree_lambda2, MetricError, MetricRow,
    MetricSeries,
};
use crate::ops::OpLogEntry;
use crate::protocol::{audit_trace, run_with_executor, AuditReport, Protocol, ProtocolError, RunTrace};
use crate::spatial::{
    arrange, control_step, coverage_area, execute_ops_spatially, render_svg, write_trajectory_csv, MotionConfig,
    Observer, Point, RangeConfig, SpatialError, TargetShape, TrajectoryRow, WorldState,
};
use crate::tree::LabeledTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub protocol: Protocol,
    pub seed: u64,
    pub trials: usize,
    pub range: RangeConfig,
    pub motion: MotionConfig,
    /// Defaults to `50 * n`.
    pub max_rounds: Option<usize>,
    /// Seconds between recorded samples.
    pub sample_interval: f64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 15,
            protocol: Protocol::Line,
            seed: 0,
            trials: 5,
            range: RangeConfig::default(),
            motion: MotionConfig::default(),
            max_rounds: None,
            sample_interval: 1.0,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), TrialError> {
        if self.n < 2 {
            return Err(TrialError::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.trials < 1 {
            return Err(TrialError::Config("trials must be at least 1".into()));
        }
        if !(self.sample_interval > 0.0) {
            return Err(TrialError::Config("sample_interval must be positive".into()));
        }
        let m = &self.motion;
        if !(m.dt > 0.0 && m.v_max > 0.0 && m.gain > 0.0 && m.barrier >= 0.0) {
            return Err(TrialError::Config(format!("invalid motion settings {m:?}")));
        }
        self.range.validate()?;
        Ok(())
    }

    pub fn max_rounds(&self) -> usize {
        self.max_rounds.unwrap_or(50 * self.n)
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Side of the square arena for `n` robots.
pub fn arena_side(n: usize, cfg: &RangeConfig) -> f64 {
    let n = n as f64;
    (n * std::f64::consts::PI * cfg.range * cfg.range / (n.ln() + 2.0)).sqrt()
}

/// Uniform positions in the arena, resampled until robots closer than the
/// link distance form a connected graph, plus a uniformly weighted random
/// spanning tree of that graph.
pub fn sample_world<R: Rng>(n: usize, cfg: &RangeConfig, rng: &mut R) -> WorldState {
    let side = arena_side(n, cfg);
    loop {
        let positions: Vec<Point> = std::iter::once(Point::zeros())
            .chain((0..n).map(|_| Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side))))
            .collect();
        let mut pairs: Vec<(usize, usize)> = (1..=n)
            .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
            .filter(|&(i, j)| (positions[i] - positions[j]).norm() < cfg.link_distance())
            .collect();
        pairs.shuffle(rng);
        let mut components = UnionFind::new(n + 1);
        let edges: Vec<(usize, usize)> = pairs.into_iter().filter(|&(i, j)| components.union(i, j)).collect();
        if edges.len() == n - 1 {
            let tree = LabeledTree::new(n, edges).expect("spanning forest with n-1 edges is a tree");
            return WorldState::new(tree, positions);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub protocol: Protocol,
    pub initial_tree: LabeledTree,
    pub final_tree: LabeledTree,
    /// Rounds before the protocol went quiet.
    pub rounds: usize,
    pub ops_committed: usize,
    pub transform_time: f64,
    pub arrange_time: f64,
    pub finish_time: f64,
    pub initial_coverage: f64,
    pub final_coverage: f64,
    pub final_lambda2_tree: f64,
    pub final_lambda2_graph: f64,
    /// Smallest tree λ2 seen at any instant.
    pub min_lambda2_tree: f64,
    /// Longest link seen at any step, as a fraction of the range.
    pub max_link_ratio: f64,
    /// Per-round series; index 0 is the initial tree.
    pub round_lambda2: Vec<f64>,
    pub round_branching_excess: Vec<usize>,
    pub round_non_leaves: Vec<usize>,
    pub round_commits: Vec<usize>,
    pub audit: AuditReport,
    pub trace: RunTrace,
    pub metrics: MetricSeries,
    pub trajectory: Vec<TrajectoryRow>,
}

impl TrialOutcome {
    pub fn reached_shape(&self) -> bool {
        match self.protocol {
            Protocol::Line => self.final_tree.is_path(),
            Protocol::Star => self.final_tree.is_star(),
        }
    }

    pub fn connectivity_kept(&self) -> bool {
        self.min_lambda2_tree > 0.0 && self.max_link_ratio < 1.0
    }

    /// Every check a trial has to pass.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.reached_shape() {
            out.push(format!("final tree is not a {}", self.protocol));
        }
        if !self.connectivity_kept() {
            out.push(format!(
                "connectivity: min tree λ2 {:.3e}, longest link {:.4} R",
                self.min_lambda2_tree, self.max_link_ratio
            ));
        }
        out.extend(self.audit.violations.iter().map(|v| format!("audit {v}")));
        out
    }
}

struct Recorder<'a> {
    cfg: &'a RangeConfig,
    sample_every: u64,
    round: usize,
    ops_committed: usize,
    lambda2_tree: f64,
    min_lambda2_tree: f64,
    max_link_ratio: f64,
    metrics: MetricSeries,
    trajectory: Vec<TrajectoryRow>,
    last_snapshot: Option<f64>,
    error: Option<MetricError>,
}

impl Recorder<'_> {
    fn snapshot(&mut self, world: &WorldState) {
        if self.last_snapshot.is_some_and(|t| t >= world.time) {
            return;
        }
        self.last_snapshot = Some(world.time);
        self.trajectory.extend(TrajectoryRow::snapshot(world));
        let h = degree_histogram(&world.tree);
        let row = MetricRow {
            time: world.time,
            round: self.round,
            lambda2_tree: self.lambda2_tree,
            lambda2_graph: lambda2_of_proximity_graph(world, self.cfg),
            coverage: coverage_area(world, self.cfg),
            deg1: h.deg1,
            deg2: h.deg2,
            deg_ge2: h.deg_ge2,
            ops_committed: self.ops_committed,
        };
        if let Err(e) = self.metrics.push(row) {
            self.error.get_or_insert(e);
        }
    }
}

impl Observer for Recorder<'_> {
    fn on_step(&mut self, world: &WorldState) {
        self.max_link_ratio = self.max_link_ratio.max(world.longest_link() / self.cfg.range);
        if world.steps % self.sample_every == 0 {
            self.snapshot(world);
        }
    }

    fn on_rewire(&mut self, world: &WorldState, _entry: &OpLogEntry) {
        self.ops_committed += 1;
        self.lambda2_tree = tree_lambda2(&world.tree);
        self.min_lambda2_tree = self.min_lambda2_tree.min(self.lambda2_tree);
    }
}

/// Runs trial `trial` of `cfg` from its own seed.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutcome, TrialError> {
    cfg.validate()?;
    let seed = cfg.trial_seed(trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = sample_world(cfg.n, &cfg.range, &mut rng);
    let initial_tree = world.tree.clone();
    let lambda2_tree = tree_lambda2(&world.tree);
    let mut rec = Recorder {
        cfg: &cfg.range,
        sample_every: ((cfg.sample_interval / cfg.motion.dt).round() as u64).max(1),
        round: 0,
        ops_committed: 0,
        lambda2_tree,
        min_lambda2_tree: lambda2_tree,
        max_link_ratio: world.longest_link() / cfg.range.range,
        metrics: MetricSeries::new(),
        trajectory: Vec::new(),
        last_snapshot: None,
        error: None,
    };
    rec.snapshot(&world);
    let initial_coverage = coverage_area(&world, &cfg.range);

    let mut round_lambda2 = vec![lambda2_tree];
    let mut round_branching_excess = vec![branching_excess(&world.tree)];
    let mut round_non_leaves = vec![cfg.n - degree_histogram(&world.tree).deg1];
    let mut round_commits = vec![0];
    let outcome = run_with_executor(&initial_tree, cfg.protocol, cfg.max_rounds(), |tree, ops| {
        debug_assert_eq!(tree, &world.tree);
        let entries = execute_ops_spatially(&mut world, ops, &cfg.range, &cfg.motion, &mut rec)?;
        // every round spends one control step exchanging messages
        control_step(&mut world, &cfg.range, &cfg.motion)?;
        rec.on_step(&world);
        rec.round += 1;
        rec.snapshot(&world);
        round_lambda2.push(rec.lambda2_tree);
        round_branching_excess.push(branching_excess(&world.tree));
        round_non_leaves.push(cfg.n - degree_histogram(&world.tree).deg1);
        round_commits.push(entries.len());
        Ok::<_, TrialError>((world.tree.clone(), entries))
    })?;
    let transform_time = world.time;

    let shape = match cfg.protocol {
        Protocol::Line => TargetShape::Line,
        Protocol::Star => TargetShape::Star,
    };
    let report = arrange(&mut world, shape, &cfg.range, &cfg.motion, &mut rec)?;
    rec.snapshot(&world);
    if let Some(e) = rec.error.take() {
        return Err(e.into());
    }
    let audit = audit_trace(&outcome.trace);
    Ok(TrialOutcome {
        trial,
        seed,
        n: cfg.n,
        protocol: cfg.protocol,
        initial_tree,
        final_tree: world.tree.clone(),
        rounds: outcome.rounds,
        ops_committed: rec.ops_committed,
        transform_time,
        arrange_time: report.duration,
        finish_time: world.time,
        initial_coverage,
        final_coverage: coverage_area(&world, &cfg.range),
        final_lambda2_tree: tree_lambda2(&world.tree),
        final_lambda2_graph: lambda2_of_proximity_graph(&world, &cfg.range),
        min_lambda2_tree: rec.min_lambda2_tree,
        max_link_ratio: rec.max_link_ratio,
        round_lambda2,
        round_branching_excess,
        round_non_leaves,
        round_commits,
        audit,
        trace: outcome.trace,
        metrics: rec.metrics,
        trajectory: rec.trajectory,
    })
}

/// Every trial of `cfg`, in parallel, each with its own result, in trial order.
pub fn run_trials(cfg: &ExperimentConfig) -> Vec<Result<TrialOutcome, TrialError>> {
    (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect()
}

/// All trials of `cfg`, failing on the first trial that fails.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialOutcome>, TrialError> {
    cfg.validate()?;
    run_trials(cfg).into_iter().collect()
}

fn csv_to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Writes the metric CSV, trajectory CSV, SVG and event log of one trial.
pub fn write_artifacts(outcome: &TrialOutcome, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = format!("trial{:02}", outcome.trial);
    let paths = [
        dir.join(format!("{stem}_metrics.csv")),
        dir.join(format!("{stem}_trajectory.csv")),
        dir.join(format!("{stem}.svg")),
        dir.join(format!("{stem}_events.log")),
    ];
    outcome
        .metrics
        .write_csv(io::BufWriter::new(fs::File::create(&paths[0])?))
        .map_err(|e| match e {
            MetricError::Csv(e) => csv_to_io(e),
            other => io::Error::other(other),
        })?;
    write_trajectory_csv(&outcome.trajectory, io::BufWriter::new(fs::File::create(&paths[1])?)).map_err(csv_to_io)?;
    fs::write(&paths[2], render_svg(&outcome.trajectory, &outcome.final_tree))?;
    fs::write(&paths[3], outcome.trace.to_string())?;
    Ok(paths.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub protocols: Vec<Protocol>,
    pub seed: u64,
    pub trials: usize,
    pub range: RangeConfig,
    pub motion: MotionConfig,
    /// Defaults to `50 * n` per cell.
    pub max_rounds: Option<usize>,
    pub sample_interval: f64,
    pub out: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let base = ExperimentConfig::default();
        SweepConfig {
            sizes: vec![15, 30, 60],
            protocols: vec![Protocol::Line, Protocol::Star],
            seed: base.seed,
            trials: base.trials,
            range: base.range,
            motion: base.motion,
            max_rounds: None,
            sample_interval: base.sample_interval,
            out: PathBuf::from("sweep"),
        }
    }
}

impl SweepConfig {
    /// One experiment per (size, protocol) cell, sizes outermost.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        self.sizes
            .iter()
            .flat_map(|&n| {
                self.protocols.iter().map(move |&protocol| ExperimentConfig {
                    n,
                    protocol,
                    seed: self.seed,
                    trials: self.trials,
                    range: self.range,
                    motion: self.motion,
                    max_rounds: self.max_rounds,
                    sample_interval: self.sample_interval,
                    out: self.out.join(format!("n{n}_{protocol}")),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub protocol: Protocol,
    pub trials: usize,
    pub rounds_mean: f64,
    pub rounds_std: f64,
    pub arrange_time_mean: f64,
    pub arrange_time_std: f64,
    pub final_lambda2_mean: f64,
    pub final_lambda2_std: f64,
    pub final_coverage_mean: f64,
    pub final_coverage_std: f64,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(cell: &ExperimentConfig, outcomes: &[TrialOutcome]) -> SummaryRow {
    let col = |f: fn(&TrialOutcome) -> f64| mean_std(&outcomes.iter().map(f).collect::<Vec<_>>());
    let (rounds_mean, rounds_std) = col(|o| o.rounds as f64);
    let (arrange_time_mean, arrange_time_std) = col(|o| o.arrange_time);
    let (final_lambda2_mean, final_lambda2_std) = col(|o| o.final_lambda2_tree);
    let (final_coverage_mean, final_coverage_std) = col(|o| o.final_coverage);
    SummaryRow {
        n: cell.n,
        protocol: cell.protocol,
        trials: outcomes.len(),
        rounds_mean,
        rounds_std,
        arrange_time_mean,
        arrange_time_std,
        final_lambda2_mean,
        final_lambda2_std,
        final_coverage_mean,
        final_coverage_std,
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub cells: Vec<(ExperimentConfig, Vec<TrialOutcome>)>,
    pub summary: Vec<SummaryRow>,
}

/// Every trial of every cell, in parallel.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome, TrialError> {
    let cells = cfg.cells();
    for cell in &cells {
        cell.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cells[c].trials).map(move |t| (c, t)))
        .collect();
    let results: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(&cells[c], t))
        .collect::<Result<_, _>>()?;
    let mut results = results.into_iter();
    let cells: Vec<(ExperimentConfig, Vec<TrialOutcome>)> = cells
        .into_iter()
        .map(|cell| {
            let trials = results.by_ref().take(cell.trials).collect();
            (cell, trials)
        })
        .collect();
    let summary = cells.iter().map(|(cell, o)| summarize(cell, o)).collect();
    Ok(SweepOutcome { cells, summary })
}

pub fn write_summary_csv<W: io::Write>(rows: &[SummaryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_worlds_have_feasible_trees() {
        let cfg = RangeConfig::default();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + seed as usize;
            let w = sample_world(n, &cfg, &mut rng);
            assert_eq!(w.n(), n);
            assert!(w.longest_link() < cfg.link_distance());
            let side = arena_side(n, &cfg);
            assert!(w.robot_positions().iter().all(|p| (0.0..side).contains(&p.x) && (0.0..side).contains(&p.y)));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = RangeConfig::default();
        let a = sample_world(15, &cfg, &mut ChaCha8Rng::seed_from_u64(4));
        let b = sample_world(15, &cfg, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.tree, b.tree);
    }

    #[test]
    fn two_robots_finish_at_once() {
        let cfg = ExperimentConfig {
            n: 2,
            trials: 1,
            ..ExperimentConfig::default()
        };
        let o = run_trial(&cfg, 0).unwrap();
        assert_eq!(o.rounds, 0);
        assert!(o.reached_shape());
        assert!(o.failures().is_empty());
    }

    #[test]
    fn small_line_trial() {
        let cfg = ExperimentConfig {
            n: 8,
            trials: 1,
            seed: 3,
            ..ExperimentConfig::default()
        };
        let o = run_trial(&cfg, 0).unwrap();
        assert!(o.failures().is_empty(), "{:?}", o.failures());
        assert_eq!(o.round_lambda2.len(), o.rounds + 2);
        assert!(o.metrics.len() > 2);
        assert_eq!(o.trajectory.len() % 8, 0);
    }

    #[test]
    fn invalid_configs() {
        let bad = ExperimentConfig {
            n: 1,
            ..ExperimentConfig::default()
        };
        assert!(matches!(bad.validate(), Err(TrialError::Config(_))));
        let bad = ExperimentConfig {
            trials: 0,
            ..ExperimentConfig::default()
        };
        assert!(matches!(bad.validate(), Err(TrialError::Config(_))));
    }

    #[test]
    fn mean_and_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.2909944487358056).abs() < 1e-12);
    }

    #[test]
    fn sweep_cells_are_ordered() {
        let cells = SweepConfig::default().cells();
        assert_eq!(cells.len(), 6);
        assert_eq!((cells[0].n, cells[0].protocol), (15, Protocol::Line));
        assert_eq!((cells[5].n, cells[5].protocol), (60, Protocol::Star));
        assert!(cells[3].out.ends_with("n30_star"));
    }
}
