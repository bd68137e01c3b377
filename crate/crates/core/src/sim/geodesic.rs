//! Multi-source shortest paths over free cells, 8-connected with √2 diagonals.
//! Diagonal moves may not cut an obstacle corner.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::maze::{Cell, MazeMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    dist: Vec<f64>,
}

impl DistanceField {
    /// Distance in meters; `f64::INFINITY` for obstacles and unreachable cells.
    pub fn get(&self, c: Cell) -> f64 {
        self.dist[c.y * self.width + c.x]
    }

    pub fn at_point(&self, map: &MazeMap, x: f64, y: f64) -> f64 {
        map.cell_at(x, y).map_or(f64::INFINITY, |c| self.get(c))
    }

    pub fn values(&self) -> &[f64] {
        &self.dist
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Mean over finite entries, with the count of cells it covers.
    pub fn mean_finite(&self) -> (f64, usize) {
        let (sum, n) = self
            .dist
            .iter()
            .filter(|d| d.is_finite())
            .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
        if n == 0 {
            (0.0, 0)
        } else {
            (sum / n as f64, n)
        }
    }
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) const NEIGHBOURS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Whether the move from `(x, y)` by `(dx, dy)` is allowed: target free and,
/// for diagonals, both orthogonal neighbours free.
pub(crate) fn move_allowed(map: &MazeMap, x: isize, y: isize, dx: isize, dy: isize) -> bool {
    if map.occupied_at(x + dx, y + dy) {
        return false;
    }
    dx == 0 || dy == 0 || (!map.occupied_at(x + dx, y) && !map.occupied_at(x, y + dy))
}

pub fn geodesic_field(map: &MazeMap, sources: &[Cell]) -> Result<DistanceField> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("geodesic field needs at least one source".into()));
    }
    let (w, h) = (map.width(), map.height());
    let mut dist = vec![f64::INFINITY; w * h];
    let mut heap = BinaryHeap::with_capacity(sources.len() * 4);
    for &s in sources {
        if !map.is_free(s) {
            return Err(Error::InvalidArgument(format!(
                "source ({}, {}) is not a free cell",
                s.x, s.y
            )));
        }
        let i = map.index(s);
        if dist[i] > 0.0 {
            dist[i] = 0.0;
            heap.push(Entry { dist: 0.0, index: i });
        }
    }
    let straight = map.cell_size();
    let diagonal = map.cell_size() * std::f64::consts::SQRT_2;
    while let Some(Entry { dist: d, index }) = heap.pop() {
        if d > dist[index] {
            continue;
        }
        let (x, y) = ((index % w) as isize, (index / w) as isize);
        for (dx, dy) in NEIGHBOURS {
            if !move_allowed(map, x, y, dx, dy) {
                continue;
            }
            let j = (y + dy) as usize * w + (x + dx) as usize;
            let nd = d + if dx == 0 || dy == 0 { straight } else { diagonal };
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Entry { dist: nd, index: j });
            }
        }
    }
    Ok(DistanceField {
        width: w,
        height: h,
        dist,
    })
}
