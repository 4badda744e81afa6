//! Planar kinematics for the swarm: range-limited links, potential-based
//! distance keeping, the contraction maneuver that makes two-hop rewires
//! physically possible, and final line/star arrangement.

mod arrange;
mod coverage;
mod render;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ops::{apply, OpError, OpLogEntry, TopologyOp};
use crate::tree::{LabeledTree, Node};

pub use arrange::{
    arrange, line_order, max_turning_angle_deg, star_center, star_gap_error, star_gaps, ArrangeReport, TargetShape,
};
pub use coverage::{coverage_area, coverage_of_points};
pub use render::{render_svg, write_trajectory_csv, TrajectoryRow};

pub type Point = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RangeConfig {
    /// Communication range.
    pub range: f64,
    /// Hold distance between linked robots.
    pub mission: f64,
    /// Per-hop distance while contracting for a rewire.
    pub transfer: f64,
    /// Safety margin.
    pub delta: f64,
}

impl Default for RangeConfig {
    fn default() -> Self {
        RangeConfig {
            range: 1.0,
            mission: 0.8,
            transfer: 0.45,
            delta: 0.05,
        }
    }
}

impl RangeConfig {
    pub fn validate(&self) -> Result<(), SpatialError> {
        let ok = self.delta > 0.0
            && self.transfer > 0.0
            && self.transfer <= self.range / 2.0 - self.delta
            && self.range / 2.0 - self.delta < self.mission
            && self.mission <= self.range;
        if ok {
            Ok(())
        } else {
            Err(SpatialError::InvalidConfig(format!(
                "need 0 < transfer <= range/2 - delta < mission <= range and delta > 0, got {self:?}"
            )))
        }
    }

    /// Largest distance at which a new link is established.
    pub fn link_distance(&self) -> f64 {
        self.range - self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    /// Speed limit (m/s).
    pub v_max: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Quadratic well stiffness (1/s).
    pub gain: f64,
    /// Weight of the range barrier.
    pub barrier: f64,
    /// Midpoint pull while straightening a line (1/s).
    pub straighten_gain: f64,
    /// Angular spreading gain for star leaves (1/s).
    pub spread_gain: f64,
    pub approach_timeout: f64,
    pub arrange_timeout: f64,
    /// Largest turning angle (degrees) accepted as straight.
    pub line_tolerance_deg: f64,
    /// Allowed relative error of star gaps when arrangement stops.
    pub star_tolerance: f64,
    /// Allowed error of link lengths against the hold distance when arrangement stops.
    pub spacing_tolerance: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            v_max: 0.1,
            dt: 0.05,
            gain: 1.0,
            barrier: 0.01,
            straighten_gain: 1.0,
            spread_gain: 1.0,
            approach_timeout: 300.0,
            arrange_timeout: 20_000.0,
            line_tolerance_deg: 1.0,
            star_tolerance: 0.02,
            spacing_tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Hold,
    /// Contracting for the operation with this group id.
    Approach(usize),
    Arrange,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Hold => "hold",
            Phase::Approach(_) => "approach",
            Phase::Arrange => "arrange",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("link {u}-{v} stretched to {distance:.4} at t={time:.2}")]
    LinkStretch { u: Node, v: Node, distance: f64, time: f64 },
    #[error("approach for `{op}` did not finish within {seconds} s")]
    ApproachTimeout { op: String, seconds: f64 },
    #[error("arrangement did not finish within {seconds} s")]
    ArrangeTimeout { seconds: f64 },
    #[error("robot {0} is busy with another maneuver")]
    PhaseBusy(Node),
    #[error("tree does not have the requested shape")]
    WrongShape,
    #[error(transparent)]
    Op(#[from] OpError),
}

#[derive(Debug, Clone)]
pub struct WorldState {
    /// Index 0 is unused.
    pub positions: Vec<Point>,
    pub tree: LabeledTree,
    pub phases: Vec<Phase>,
    pub time: f64,
    pub steps: u64,
}

impl WorldState {
    pub fn new(tree: LabeledTree, positions: Vec<Point>) -> Self {
        assert_eq!(positions.len(), tree.n() + 1, "one position per robot plus an unused slot");
        let n = tree.n();
        WorldState {
            positions,
            tree,
            phases: vec![Phase::Hold; n + 1],
            time: 0.0,
            steps: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.tree.n()
    }

    pub fn position(&self, v: Node) -> Point {
        self.positions[v]
    }

    pub fn distance(&self, u: Node, v: Node) -> f64 {
        (self.positions[u] - self.positions[v]).norm()
    }

    pub fn robot_positions(&self) -> &[Point] {
        &self.positions[1..]
    }

    pub fn longest_link(&self) -> f64 {
        self.tree
            .edges()
            .map(|(u, v)| self.distance(u, v))
            .fold(0.0, f64::max)
    }

    /// Target length of a link given the phases of its endpoints.
    pub fn link_target(&self, u: Node, v: Node, cfg: &RangeConfig) -> f64 {
        match (self.phases[u], self.phases[v]) {
            (Phase::Approach(a), Phase::Approach(b)) if a == b => cfg.transfer,
            _ => cfg.mission,
        }
    }
}

/// Well of stiffness `gain` at `target`, plus a barrier that diverges at `range`.
pub fn link_potential(d: f64, target: f64, cfg: &RangeConfig, motion: &MotionConfig) -> f64 {
    let r = cfg.range;
    let mut phi = 0.5 * motion.gain * (d - target).powi(2);
    if d > target {
        phi += motion.barrier * (1.0 / (r - d) - 1.0 / (r - target) - (d - target) / (r - target).powi(2));
    }
    phi
}

/// Derivative of [`link_potential`] with respect to the distance.
pub fn link_force(d: f64, target: f64, cfg: &RangeConfig, motion: &MotionConfig) -> f64 {
    let r = cfg.range;
    let mut f = motion.gain * (d - target);
    if d > target {
        f += motion.barrier * (1.0 / (r - d).powi(2) - 1.0 / (r - target).powi(2));
    }
    f
}

pub fn total_potential(world: &WorldState, cfg: &RangeConfig, motion: &MotionConfig) -> f64 {
    world
        .tree
        .edges()
        .map(|(u, v)| link_potential(world.distance(u, v), world.link_target(u, v, cfg), cfg, motion))
        .sum()
}

/// Negative potential gradient per robot (index 0 unused).
pub(crate) fn potential_velocities(world: &WorldState, cfg: &RangeConfig, motion: &MotionConfig) -> Vec<Point> {
    let mut vel = vec![Point::zeros(); world.n() + 1];
    for (u, v) in world.tree.edges() {
        let diff = world.positions[u] - world.positions[v];
        let d = diff.norm();
        if d < 1e-12 {
            continue;
        }
        let f = link_force(d, world.link_target(u, v, cfg), cfg, motion);
        let dir = diff / d;
        vel[u] -= dir * f;
        vel[v] += dir * f;
    }
    vel
}

/// Integrates one step with the given velocities, clamped to `v_max`, and
/// checks every link against the range.
pub(crate) fn integrate(
    world: &mut WorldState,
    velocities: &[Point],
    cfg: &RangeConfig,
    motion: &MotionConfig,
) -> Result<(), SpatialError> {
    for v in 1..=world.n() {
        let mut vel = velocities[v];
        let speed = vel.norm();
        if speed > motion.v_max {
            vel *= motion.v_max / speed;
        }
        world.positions[v] += vel * motion.dt;
    }
    world.time += motion.dt;
    world.steps += 1;
    for (u, v) in world.tree.edges() {
        let distance = world.distance(u, v);
        if distance >= cfg.range {
            return Err(SpatialError::LinkStretch {
                u,
                v,
                distance,
                time: world.time,
            });
        }
    }
    Ok(())
}

/// One step of distance keeping over the current tree links.
pub fn control_step(world: &mut WorldState, cfg: &RangeConfig, motion: &MotionConfig) -> Result<(), SpatialError> {
    let vel = potential_velocities(world, cfg, motion);
    integrate(world, &vel, cfg, motion)
}

/// Observes the world after each step and after each rewire.
pub trait Observer {
    fn on_step(&mut self, _world: &WorldState) {}
    fn on_rewire(&mut self, _world: &WorldState, _entry: &OpLogEntry) {}
}

impl Observer for () {}

/// Carries out `ops` together: participants contract toward each other until
/// every link an operation will add is shorter than the link distance, then
/// that operation rewires and its robots return to holding.
///
/// Operations must touch pairwise disjoint robots; results follow input order.
pub fn execute_ops_spatially<O: Observer + ?Sized>(
    world: &mut WorldState,
    ops: &[TopologyOp],
    cfg: &RangeConfig,
    motion: &MotionConfig,
    observer: &mut O,
) -> Result<Vec<OpLogEntry>, SpatialError> {
    struct Pending {
        op: TopologyOp,
        participants: Vec<Node>,
        pairs: Vec<(Node, Node)>,
    }
    let mut pending = Vec::with_capacity(ops.len());
    let mut claimed = std::collections::BTreeSet::new();
    for op in ops {
        let (_, dry) = apply(&world.tree, op)?;
        let participants: Vec<Node> = dry.touched_nodes().into_iter().collect();
        if let Some(&busy) = participants
            .iter()
            .find(|&&p| world.phases[p] != Phase::Hold || !claimed.insert(p))
        {
            return Err(SpatialError::PhaseBusy(busy));
        }
        pending.push(Some(Pending {
            op: op.clone(),
            participants,
            pairs: dry.edges_added,
        }));
    }
    for (group, p) in pending.iter().flatten().enumerate() {
        for &v in &p.participants {
            world.phases[v] = Phase::Approach(group);
        }
    }
    let mut results: Vec<Option<OpLogEntry>> = vec![None; ops.len()];
    let deadline = world.time + motion.approach_timeout;
    loop {
        for (i, slot) in pending.iter_mut().enumerate() {
            let ready = slot
                .as_ref()
                .is_some_and(|p| p.pairs.iter().all(|&(u, v)| world.distance(u, v) <= cfg.link_distance()));
            if ready {
                let p = slot.take().expect("checked above");
                let (next, entry) = apply(&world.tree, &p.op)?;
                world.tree = next;
                for &v in &p.participants {
                    world.phases[v] = Phase::Hold;
                }
                observer.on_rewire(world, &entry);
                results[i] = Some(entry);
            }
        }
        if let Some(p) = pending.iter().flatten().next() {
            if world.time >= deadline {
                return Err(SpatialError::ApproachTimeout {
                    op: p.op.to_string(),
                    seconds: motion.approach_timeout,
                });
            }
        } else {
            break;
        }
        control_step(world, cfg, motion)?;
        observer.on_step(world);
    }
    Ok(results.into_iter().map(|e| e.expect("every op rewired")).collect())
}

/// Single-operation form of [`execute_ops_spatially`].
pub fn execute_op_spatially<O: Observer + ?Sized>(
    world: &mut WorldState,
    op: &TopologyOp,
    cfg: &RangeConfig,
    motion: &MotionConfig,
    observer: &mut O,
) -> Result<OpLogEntry, SpatialError> {
    Ok(execute_ops_spatially(world, std::slice::from_ref(op), cfg, motion, observer)?.remove(0))
}
