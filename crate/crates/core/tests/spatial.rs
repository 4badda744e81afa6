use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treeswarm::experiment::sample_world;
use treeswarm::metrics::{lambda2_of_proximity_graph, tree_lambda2, EIGEN_TOLERANCE};
use treeswarm::spatial::{
    arrange, control_step, coverage_area, execute_ops_spatially, total_potential, MotionConfig, Phase, RangeConfig,
    TargetShape,
};
use treeswarm::TopologyOp;

/// Largest deviation of any link from the hold distance after 10^4 free steps.
const HOLD_EPSILON: f64 = 1e-3;

#[test]
fn free_motion_settles_every_link_at_hold_distance() {
    let cfg = RangeConfig::default();
    let motion = MotionConfig::default();
    let mut w = sample_world(15, &cfg, &mut ChaCha8Rng::seed_from_u64(42));
    let mut last = total_potential(&w, &cfg, &motion);
    for _ in 0..10_000 {
        control_step(&mut w, &cfg, &motion).unwrap();
        let now = total_potential(&w, &cfg, &motion);
        assert!(now <= last + 1e-9, "energy rose from {last} to {now} at t={}", w.time);
        last = now;
    }
    let worst = w
        .tree
        .edges()
        .map(|(u, v)| (w.distance(u, v) - cfg.mission).abs())
        .fold(0.0, f64::max);
    assert!(worst < HOLD_EPSILON, "worst deviation {worst}");
}

#[test]
fn two_hop_transfer_ends_feasible() {
    let cfg = RangeConfig::default();
    let motion = MotionConfig::default();
    let mut w = sample_world(12, &cfg, &mut ChaCha8Rng::seed_from_u64(8));
    // settle first so links sit at the hold distance
    for _ in 0..4_000 {
        control_step(&mut w, &cfg, &motion).unwrap();
    }
    let (leaf, from) = w
        .tree
        .leaves()
        .find_map(|l| {
            let j = w.tree.neighbors(l).unwrap()[0];
            (w.tree.degree(j).unwrap() > 1).then_some((l, j))
        })
        .unwrap();
    let to = *w.tree.neighbors(from).unwrap().iter().find(|&&k| k != leaf).unwrap();
    let op = TopologyOp::LeafTransfer { leaf, from, to };
    execute_ops_spatially(&mut w, &[op], &cfg, &motion, &mut ()).unwrap();
    assert!(w.tree.has_edge(leaf, to));
    assert!(w.longest_link() < cfg.range);
    assert!(w.phases.iter().all(|&p| p == Phase::Hold));
}

#[test]
fn coverage_bounds_and_graph_lambda2() {
    let cfg = RangeConfig::default();
    for seed in 0..10 {
        let w = sample_world(20, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let area = coverage_area(&w, &cfg);
        let disk = std::f64::consts::PI * cfg.range * cfg.range;
        assert!(area >= disk * 0.99 && area <= 20.0 * disk * 1.01, "{area}");
        assert!(lambda2_of_proximity_graph(&w, &cfg) >= tree_lambda2(&w.tree) - EIGEN_TOLERANCE);
    }
}

#[test]
fn arranged_star_spreads_at_hold_distance() {
    let cfg = RangeConfig::default();
    let motion = MotionConfig::default();
    let n = 15;
    let mut w = sample_world(n, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
    // pull everything into a star around robot 1 by hand
    let c = w.position(1);
    for v in 2..=n {
        let d = w.position(v) - c;
        let angle = d.y.atan2(d.x);
        w.positions[v] = c + treeswarm::spatial::Point::new(angle.cos(), angle.sin()) * 0.6;
    }
    w.tree = treeswarm::LabeledTree::star(n, 1).unwrap();
    arrange(&mut w, TargetShape::Star, &cfg, &motion, &mut ()).unwrap();
    let gaps = treeswarm::spatial::star_gaps(&w).unwrap();
    let ideal = 2.0 * std::f64::consts::PI / (n - 1) as f64;
    assert!(gaps.iter().all(|g| (g - ideal).abs() <= 0.05 * ideal));
    for v in 2..=n {
        assert!((w.distance(1, v) - cfg.mission).abs() <= motion.spacing_tolerance);
    }
}
