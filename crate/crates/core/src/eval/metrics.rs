//! Exploration metrics over executed trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{geodesic_field, Action, Cell, MazeMap, Trajectory};

/// Default radius for turning a trajectory into a covered area, meters.
pub const COVERAGE_RADIUS: f64 = 0.5;

/// Distinct cells occupied by the trajectory's poses, in first-visit order.
pub fn trajectory_cells(map: &MazeMap, traj: &Trajectory) -> Result<Vec<Cell>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for p in &traj.poses {
        let c = map
            .cell_at(p.x, p.y)
            .filter(|&c| map.is_free(c))
            .ok_or_else(|| Error::Contract(format!("trajectory pose ({:.2}, {:.2}) is off the free space", p.x, p.y)))?;
        if seen.insert(c) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Average distance to trajectory: mean geodesic distance from every free
/// cell reachable from the trajectory to its nearest trajectory cell.
pub fn compute_adt(map: &MazeMap, traj: &Trajectory) -> Result<f64> {
    let field = geodesic_field(map, &trajectory_cells(map, traj)?)?;
    Ok(field.mean_finite().0)
}

/// Largest geodesic distance from the start to any pose of the trajectory.
pub fn compute_max_distance(map: &MazeMap, traj: &Trajectory) -> Result<f64> {
    let cells = trajectory_cells(map, traj)?;
    let field = geodesic_field(map, &cells[..1])?;
    Ok(cells.iter().map(|&c| field.get(c)).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionCount {
    pub collisions: usize,
    pub forwards: usize,
}

impl CollisionCount {
    /// Fraction of forward actions that collided; zero without forwards.
    pub fn rate(&self) -> f64 {
        if self.forwards == 0 {
            0.0
        } else {
            self.collisions as f64 / self.forwards as f64
        }
    }
}

pub fn compute_collision_rate(traj: &Trajectory) -> CollisionCount {
    let mut c = CollisionCount { collisions: 0, forwards: 0 };
    for (a, &hit) in traj.actions.iter().zip(&traj.collided) {
        if *a == Action::Forward {
            c.forwards += 1;
            c.collisions += usize::from(hit);
        }
    }
    c
}

/// Free cells within `radius` of any pose, as sorted cell indices.
pub fn coverage(map: &MazeMap, traj: &Trajectory, radius: f64) -> Vec<usize> {
    let cs = map.cell_size();
    let r = (radius / cs).ceil() as isize;
    let mut covered = std::collections::BTreeSet::new();
    for p in &traj.poses {
        let (px, py) = ((p.x / cs).floor() as isize, (p.y / cs).floor() as isize);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (px + dx, py + dy);
                if map.occupied_at(x, y) {
                    continue;
                }
                let c = Cell::new(x as usize, y as usize);
                let (cx, cy) = map.cell_center(c);
                if (cx - p.x).hypot(cy - p.y) <= radius + 1e-9 {
                    covered.insert(map.index(c));
                }
            }
        }
    }
    covered.into_iter().collect()
}

/// Intersection over union of two sorted index sets; two empty sets give 1.
pub fn trajectory_iou(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::testutil::open_box;
    use crate::sim::Pose;

    fn walk(cells: &[(usize, usize)]) -> Trajectory {
        let mut t = Trajectory::start(Pose::new(cells[0].0 as f64 * 0.1 + 0.05, cells[0].1 as f64 * 0.1 + 0.05, 0.0));
        for &(x, y) in &cells[1..] {
            t.push(Action::Forward, Pose::new(x as f64 * 0.1 + 0.05, y as f64 * 0.1 + 0.05, 0.0), false, None);
        }
        t
    }

    #[test]
    fn stationary_trajectory() {
        let map = open_box(12, 12);
        let t = walk(&[(3, 4)]);
        assert_eq!(compute_max_distance(&map, &t).unwrap(), 0.0);
        let single = geodesic_field(&map, &[Cell::new(3, 4)]).unwrap();
        assert_eq!(compute_adt(&map, &t).unwrap(), single.mean_finite().0);
    }

    #[test]
    fn visiting_every_cell_gives_zero_adt() {
        let map = open_box(6, 6);
        let cells: Vec<(usize, usize)> = map.free_cells().map(|c| (c.x, c.y)).collect();
        assert_eq!(compute_adt(&map, &walk(&cells)).unwrap(), 0.0);
    }

    #[test]
    fn straight_walk_max_distance() {
        let map = open_box(20, 6);
        let cells: Vec<(usize, usize)> = (1..=11).map(|x| (x, 2)).collect();
        assert!((compute_max_distance(&map, &walk(&cells)).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn collision_rate_counts_only_forwards() {
        let mut t = Trajectory::start(Pose::new(0.5, 0.5, 0.0));
        assert_eq!(compute_collision_rate(&t).rate(), 0.0);
        t.push(Action::RotateLeft, Pose::new(0.5, 0.5, 0.5), false, None);
        assert_eq!(compute_collision_rate(&t).rate(), 0.0);
        t.push(Action::Forward, Pose::new(0.5, 0.5, 0.5), true, None);
        t.push(Action::Forward, Pose::new(0.5, 0.5, 0.5), true, None);
        let c = compute_collision_rate(&t);
        assert_eq!((c.collisions, c.forwards, c.rate()), (2, 2, 1.0));
    }

    #[test]
    fn iou_extremes() {
        assert_eq!(trajectory_iou(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert_eq!(trajectory_iou(&[1, 2], &[3, 4]), 0.0);
        assert_eq!(trajectory_iou(&[1, 2, 3], &[2, 3, 4]), 0.5);
    }

    #[test]
    fn coverage_is_free_cells_near_poses() {
        let map = open_box(20, 20);
        let cov = coverage(&map, &walk(&[(10, 10)]), 0.5);
        // Cell centers within 0.5 m of a cell center: |d|² ≤ 25 cells².
        let expect = (-5i32..=5).flat_map(|dx| (-5i32..=5).map(move |dy| (dx, dy))).filter(|(dx, dy)| dx * dx + dy * dy <= 25).count();
        assert_eq!(cov.len(), expect);
        assert!(cov.iter().all(|&i| !map.occupancy()[i]));
    }
}
