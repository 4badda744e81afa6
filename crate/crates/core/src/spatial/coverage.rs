use super::{Point, RangeConfig, WorldState};

const CELLS_PER_RADIUS: f64 = 50.0;

/// Area of the union of disks of `radius` around `points`, rasterized on a
/// grid of cell side `radius / 50` anchored at the origin.
pub fn coverage_of_points(points: &[Point], radius: f64) -> f64 {
    if points.is_empty() || radius <= 0.0 {
        return 0.0;
    }
    let cell = radius / CELLS_PER_RADIUS;
    let lo_x = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - radius;
    let lo_y = points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - radius;
    let hi_x = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + radius;
    let hi_y = points.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + radius;
    let i0 = (lo_x / cell).floor() as i64;
    let j0 = (lo_y / cell).floor() as i64;
    let w = ((hi_x / cell).ceil() as i64 - i0 + 1) as usize;
    let h = ((hi_y / cell).ceil() as i64 - j0 + 1) as usize;
    let mut covered = vec![false; w * h];
    let r2 = radius * radius;
    for p in points {
        let ja = ((p.y - radius) / cell).floor() as i64;
        let jb = ((p.y + radius) / cell).ceil() as i64;
        for j in ja..=jb {
            let cy = (j as f64 + 0.5) * cell - p.y;
            let rem = r2 - cy * cy;
            if rem < 0.0 {
                continue;
            }
            let half = rem.sqrt();
            let ia = ((p.x - half) / cell - 0.5).ceil() as i64;
            let ib = ((p.x + half) / cell - 0.5).floor() as i64;
            let row = (j - j0) as usize * w;
            for i in ia..=ib {
                covered[row + (i - i0) as usize] = true;
            }
        }
    }
    covered.iter().filter(|&&c| c).count() as f64 * cell * cell
}

/// Area within communication range of at least one robot.
pub fn coverage_area(world: &WorldState, cfg: &RangeConfig) -> f64 {
    coverage_of_points(world.robot_positions(), cfg.range)
}
