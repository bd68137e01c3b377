//! Brute-force shortest paths on the cell grid, used as references for the
//! Dijkstra-based geodesic field and the metrics built on it.

#![allow(dead_code)]

use rand::Rng as _;
use vmsr_core::rng::Rng;
use vmsr_core::sim::{Action, Cell, MazeMap, Pose, RoomLabel, Trajectory};

/// Random obstacle grid of at most `max_side` cells per side, with at least
/// two free cells.
pub fn random_map(rng: &mut Rng, max_side: usize) -> MazeMap {
    loop {
        let w = rng.random_range(3..=max_side);
        let h = rng.random_range(3..=max_side);
        let density = rng.random_range(0.05..0.45);
        let occ: Vec<bool> = (0..w * h).map(|_| rng.random_bool(density)).collect();
        if occ.iter().filter(|o| !**o).count() >= 2 {
            let cs = [0.1, 0.25, 1.0][rng.random_range(0..3)];
            return MazeMap::from_grid_unchecked(w, h, cs, occ, vec![RoomLabel::None; w * h], 0).unwrap();
        }
    }
}

fn free(map: &MazeMap, x: i64, y: i64) -> bool {
    x >= 0 && y >= 0 && (x as usize) < map.width() && (y as usize) < map.height() && !map.occupancy()[y as usize * map.width() + x as usize]
}

/// Directed edges of the 8-connected grid. A diagonal step needs both cells
/// it squeezes between to be free.
pub fn edges(map: &MazeMap) -> Vec<(usize, usize, f64)> {
    let w = map.width();
    let mut out = Vec::new();
    for y in 0..map.height() as i64 {
        for x in 0..w as i64 {
            if !free(map, x, y) {
                continue;
            }
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if (dx, dy) == (0, 0) || !free(map, x + dx, y + dy) {
                        continue;
                    }
                    let diagonal = dx != 0 && dy != 0;
                    if diagonal && !(free(map, x + dx, y) && free(map, x, y + dy)) {
                        continue;
                    }
                    let len = if diagonal { map.cell_size() * 2f64.sqrt() } else { map.cell_size() };
                    let (a, b) = (y as usize * w + x as usize, (y + dy) as usize * w + (x + dx) as usize);
                    out.push((a, b, len));
                }
            }
        }
    }
    out
}

/// Bellman-Ford relaxation from a single cell index.
pub fn bellman_ford(map: &MazeMap, edges: &[(usize, usize, f64)], source: usize) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; map.width() * map.height()];
    d[source] = 0.0;
    loop {
        let mut changed = false;
        for &(a, b, len) in edges {
            if d[a] + len < d[b] {
                d[b] = d[a] + len;
                changed = true;
            }
        }
        if !changed {
            return d;
        }
    }
}

/// Distance from the nearest of `sources`, as the minimum of single-source
/// runs.
pub fn nearest_source(map: &MazeMap, sources: &[Cell]) -> Vec<f64> {
    let e = edges(map);
    let mut best = vec![f64::INFINITY; map.width() * map.height()];
    for s in sources {
        let d = bellman_ford(map, &e, s.y * map.width() + s.x);
        for (b, v) in best.iter_mut().zip(d) {
            *b = b.min(v);
        }
    }
    best
}

/// Random walk over free cells with poses at cell centres.
pub fn random_walk(map: &MazeMap, rng: &mut Rng, len: usize) -> Trajectory {
    let free_cells: Vec<Cell> = map.free_cells().collect();
    let mut c = free_cells[rng.random_range(0..free_cells.len())];
    let pose = |c: Cell| {
        let (x, y) = map.cell_center(c);
        Pose::new(x, y, 0.0)
    };
    let mut traj = Trajectory::start(pose(c));
    for _ in 0..len {
        let (dx, dy) = (rng.random_range(-1..=1i64), rng.random_range(-1..=1i64));
        let (nx, ny) = (c.x as i64 + dx, c.y as i64 + dy);
        // Same corner rule as the geodesic graph.
        if free(map, nx, ny) && free(map, nx, c.y as i64) && free(map, c.x as i64, ny) {
            c = Cell::new(nx as usize, ny as usize);
        }
        traj.push(Action::Forward, pose(c), false, None);
    }
    traj
}

fn visited(map: &MazeMap, traj: &Trajectory) -> Vec<Cell> {
    let mut cells: Vec<Cell> = Vec::new();
    for p in &traj.poses {
        let c = Cell::new((p.x / map.cell_size()).floor() as usize, (p.y / map.cell_size()).floor() as usize);
        if !cells.contains(&c) {
            cells.push(c);
        }
    }
    cells
}

pub fn adt(map: &MazeMap, traj: &Trajectory) -> f64 {
    let d = nearest_source(map, &visited(map, traj));
    let finite: Vec<f64> = d.into_iter().filter(|v| v.is_finite()).collect();
    finite.iter().sum::<f64>() / finite.len() as f64
}

pub fn max_distance(map: &MazeMap, traj: &Trajectory) -> f64 {
    let cells = visited(map, traj);
    let d = nearest_source(map, &cells[..1]);
    cells.iter().map(|c| d[c.y * map.width() + c.x]).fold(0.0, f64::max)
}
