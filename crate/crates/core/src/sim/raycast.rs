//! Egocentric depth sensor: rays fanned evenly across the field of view.

use serde::{Deserialize, Serialize};

use super::agent::{AgentConfig, Pose};
use super::maze::MazeMap;

/// Ray-cast depths normalized by the sensor range, ordered from the leftmost
/// ray (heading + fov/2) to the rightmost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub depths: Vec<f32>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    /// Appends the depths, widened to `f64`, onto `out`.
    pub fn extend_into(&self, out: &mut Vec<f64>) {
        out.extend(self.depths.iter().map(|&d| d as f64));
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.depths.len());
        self.extend_into(&mut v);
        v
    }
}

/// Heading offsets of each ray; endpoints included so an odd count has a
/// center ray.
pub fn ray_offsets(cfg: &AgentConfig) -> Vec<f64> {
    let n = cfg.ray_count;
    let half = cfg.fov / 2.0;
    (0..n)
        .map(|i| half - cfg.fov * i as f64 / (n - 1) as f64)
        .collect()
}

/// Distance from `(x, y)` along `angle` to the first obstacle cell, capped at
/// `max_range`. Exact grid traversal.
pub fn cast_ray(map: &MazeMap, x: f64, y: f64, angle: f64, max_range: f64) -> f64 {
    let cs = map.cell_size();
    let (dx, dy) = (angle.cos(), angle.sin());
    let mut cx = (x / cs).floor() as isize;
    let mut cy = (y / cs).floor() as isize;
    if map.occupied_at(cx, cy) {
        return 0.0;
    }
    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx != 0.0 { cs / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { cs / dy.abs() } else { f64::INFINITY };
    let mut t_max_x = if dx > 0.0 {
        ((cx + 1) as f64 * cs - x) / dx
    } else if dx < 0.0 {
        (cx as f64 * cs - x) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        ((cy + 1) as f64 * cs - y) / dy
    } else if dy < 0.0 {
        (cy as f64 * cs - y) / dy
    } else {
        f64::INFINITY
    };
    loop {
        let t = if t_max_x < t_max_y {
            let t = t_max_x;
            t_max_x += t_delta_x;
            cx += step_x;
            t
        } else {
            let t = t_max_y;
            t_max_y += t_delta_y;
            cy += step_y;
            t
        };
        if t >= max_range {
            return max_range;
        }
        if map.occupied_at(cx, cy) {
            return t.max(0.0);
        }
    }
}

pub fn observe(pose: &Pose, cfg: &AgentConfig, map: &MazeMap) -> Observation {
    let depths = ray_offsets(cfg)
        .into_iter()
        .map(|off| {
            let d = cast_ray(map, pose.x, pose.y, pose.heading + off, cfg.max_range);
            (d / cfg.max_range).clamp(0.0, 1.0) as f32
        })
        .collect();
    Observation { depths }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::maze::{Cell, RoomLabel};
    use crate::sim::testutil::open_box;
    use std::f64::consts::PI;

    #[test]
    fn open_area_reads_full_range() {
        let map = open_box(120, 120);
        let cfg = AgentConfig { max_range: 1.0, ..AgentConfig::default() };
        let obs = observe(&Pose::new(6.0, 6.0, 0.3), &cfg, &map);
        assert_eq!(obs.len(), cfg.ray_count);
        assert!(obs.depths.iter().all(|&d| d == 1.0));
    }

    #[test]
    fn wall_two_meters_ahead_reads_half() {
        // Wall cells occupy x in [3.0, 3.1); the agent stands at x = 1.0.
        let (w, h) = (40, 40);
        let mut occ = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                occ[y * w + x] = x == 0 || y == 0 || y == h - 1 || x >= 30;
            }
        }
        let mut labels = vec![RoomLabel::None; w * h];
        labels[w + 1] = RoomLabel::Target;
        let map = MazeMap::from_grid(w, h, 0.1, occ, labels, 0).unwrap();
        let cfg = AgentConfig { ray_count: 31, max_range: 4.0, ..AgentConfig::default() };
        let obs = observe(&Pose::new(1.0, 2.0, 0.0), &cfg, &map);
        assert!((obs.depths[15] - 0.5).abs() < 1e-6, "{}", obs.depths[15]);
        // Off-center rays hit the same plane at 2 / cos(offset).
        let offsets = ray_offsets(&cfg);
        for (i, off) in offsets.iter().enumerate() {
            let expect = (2.0 / off.cos() / 4.0).min(1.0);
            // Rays that clip the floor/ceiling walls first read shorter.
            assert!(obs.depths[i] as f64 <= expect + 1e-6, "ray {i}");
        }
        assert!((obs.depths[14] as f64 - 2.0 / offsets[14].cos() / 4.0).abs() < 1e-6);
    }

    #[test]
    fn mirrored_map_reverses_observation() {
        let map = crate::sim::maze::generate_maze(4, &Default::default()).unwrap();
        let (w, h) = (map.width(), map.height());
        let mut occ = vec![false; w * h];
        let mut labels = vec![RoomLabel::None; w * h];
        for y in 0..h {
            for x in 0..w {
                let src = Cell::new(w - 1 - x, y);
                occ[y * w + x] = map.is_occupied(src);
                labels[y * w + x] = map.label(src);
            }
        }
        let mirror = MazeMap::from_grid(w, h, map.cell_size(), occ, labels, 0).unwrap();
        let cfg = AgentConfig::default();
        let width_m = w as f64 * map.cell_size();
        let clear = map.clear_cells(0.15);
        for (k, c) in clear.iter().step_by(997).enumerate() {
            let (x, y) = map.cell_center(*c);
            let heading = 0.37 + k as f64;
            let a = observe(&Pose::new(x, y, heading), &cfg, &map);
            let b = observe(&Pose::new(width_m - x, y, PI - heading), &cfg, &mirror);
            let mut rev = b.depths.clone();
            rev.reverse();
            for (p, q) in a.depths.iter().zip(&rev) {
                assert!((p - q).abs() < 1e-5, "{p} vs {q}");
            }
        }
    }
}
