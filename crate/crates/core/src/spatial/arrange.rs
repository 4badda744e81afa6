use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{integrate, potential_velocities, MotionConfig, Observer, Phase, Point, RangeConfig, SpatialError, WorldState};
use crate::tree::{LabeledTree, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetShape {
    Line,
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrangeReport {
    pub steps: u64,
    pub duration: f64,
    pub finished_at: f64,
}

/// Robots of a path from its lower-labeled end to the other.
pub fn line_order(tree: &LabeledTree) -> Option<Vec<Node>> {
    if !tree.is_path() {
        return None;
    }
    let start = tree.leaves().next()?;
    let mut order = vec![start];
    let mut prev = 0;
    let mut cur = start;
    while let Some(&next) = tree.nbrs(cur).iter().find(|&&w| w != prev) {
        order.push(next);
        prev = cur;
        cur = next;
    }
    Some(order)
}

pub fn star_center(tree: &LabeledTree) -> Option<Node> {
    let n = tree.n();
    if n == 2 {
        return Some(1);
    }
    (1..=n).find(|&v| tree.nbrs(v).len() == n - 1)
}

/// Largest turning angle between consecutive segments of the line, in degrees.
pub fn max_turning_angle_deg(world: &WorldState) -> Option<f64> {
    let order = line_order(&world.tree)?;
    let mut worst: f64 = 0.0;
    for w in order.windows(3) {
        let a = world.position(w[1]) - world.position(w[0]);
        let b = world.position(w[2]) - world.position(w[1]);
        let cos = a.dot(&b) / (a.norm() * b.norm());
        worst = worst.max(cos.clamp(-1.0, 1.0).acos().to_degrees());
    }
    Some(worst)
}

/// Angular gaps between consecutive leaves around the center, sorted by angle.
pub fn star_gaps(world: &WorldState) -> Option<Vec<f64>> {
    let center = star_center(&world.tree)?;
    let c = world.position(center);
    let mut angles: Vec<f64> = world
        .tree
        .nbrs(center)
        .iter()
        .map(|&v| {
            let d = world.position(v) - c;
            d.y.atan2(d.x)
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    let m = angles.len();
    Some(
        (0..m)
            .map(|i| {
                let next = if i + 1 == m { angles[0] + TAU } else { angles[i + 1] };
                next - angles[i]
            })
            .collect(),
    )
}

/// Largest relative deviation of a star gap from the even split.
pub fn star_gap_error(world: &WorldState) -> Option<f64> {
    let gaps = star_gaps(world)?;
    let ideal = TAU / gaps.len() as f64;
    Some(gaps.iter().map(|g| (g - ideal).abs() / ideal).fold(0.0, f64::max))
}

fn spacing_error(world: &WorldState, cfg: &RangeConfig) -> f64 {
    world
        .tree
        .edges()
        .map(|(u, v)| (world.distance(u, v) - cfg.mission).abs())
        .fold(0.0, f64::max)
}

fn arranged(world: &WorldState, shape: TargetShape, cfg: &RangeConfig, motion: &MotionConfig) -> bool {
    if spacing_error(world, cfg) > motion.spacing_tolerance {
        return false;
    }
    match shape {
        TargetShape::Line => max_turning_angle_deg(world).is_some_and(|a| a <= motion.line_tolerance_deg),
        TargetShape::Star => world.n() <= 2 || star_gap_error(world).is_some_and(|e| e <= motion.star_tolerance),
    }
}

fn line_velocities(world: &WorldState, order: &[Node], cfg: &RangeConfig, motion: &MotionConfig) -> Vec<Point> {
    let mut vel = potential_velocities(world, cfg, motion);
    for w in order.windows(3) {
        let mid = (world.position(w[0]) + world.position(w[2])) / 2.0;
        vel[w[1]] += (mid - world.position(w[1])) * motion.straighten_gain;
    }
    vel
}

fn star_velocities(world: &WorldState, center: Node, cfg: &RangeConfig, motion: &MotionConfig) -> Vec<Point> {
    let mut vel = potential_velocities(world, cfg, motion);
    let c = world.position(center);
    let mut leaves: Vec<(f64, Node)> = world
        .tree
        .nbrs(center)
        .iter()
        .map(|&v| {
            let d = world.position(v) - c;
            (d.y.atan2(d.x), v)
        })
        .collect();
    leaves.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let m = leaves.len();
    if m < 2 {
        return vel;
    }
    for i in 0..m {
        let (theta, v) = leaves[i];
        let prev = leaves[(i + m - 1) % m].0;
        let next = leaves[(i + 1) % m].0;
        let gap_prev = (theta - prev).rem_euclid(TAU);
        let gap_next = (next - theta).rem_euclid(TAU);
        let tangent = Point::new(-theta.sin(), theta.cos());
        vel[v] += tangent * (motion.spread_gain * cfg.mission * (gap_next - gap_prev) / 2.0);
    }
    vel
}

/// Straightens a path or spreads the leaves of a star evenly at the hold distance.
pub fn arrange<O: Observer + ?Sized>(
    world: &mut WorldState,
    shape: TargetShape,
    cfg: &RangeConfig,
    motion: &MotionConfig,
    observer: &mut O,
) -> Result<ArrangeReport, SpatialError> {
    let start_steps = world.steps;
    let start_time = world.time;
    let order = match shape {
        TargetShape::Line => Some(line_order(&world.tree).ok_or(SpatialError::WrongShape)?),
        TargetShape::Star => None,
    };
    let center = match shape {
        TargetShape::Star => Some(star_center(&world.tree).ok_or(SpatialError::WrongShape)?),
        TargetShape::Line => None,
    };
    for v in 1..=world.n() {
        world.phases[v] = Phase::Arrange;
    }
    let deadline = start_time + motion.arrange_timeout;
    while !arranged(world, shape, cfg, motion) {
        if world.time >= deadline {
            return Err(SpatialError::ArrangeTimeout {
                seconds: motion.arrange_timeout,
            });
        }
        let vel = match (&order, center) {
            (Some(order), _) => line_velocities(world, order, cfg, motion),
            (None, Some(c)) => star_velocities(world, c, cfg, motion),
            _ => unreachable!("shape resolved above"),
        };
        integrate(world, &vel, cfg, motion)?;
        observer.on_step(world);
    }
    for v in 1..=world.n() {
        world.phases[v] = Phase::Hold;
    }
    Ok(ArrangeReport {
        steps: world.steps - start_steps,
        duration: world.time - start_time,
        finished_at: world.time,
    })
}
