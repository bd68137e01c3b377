//! Occupancy maps of procedurally generated indoor layouts.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_CELL_SIZE: f64 = 0.1;
const MAX_ATTEMPTS: usize = 64;
/// Room ids are written as single digits in the text format.
pub const MAX_ROOMS: usize = 10;

/// Integer grid coordinate; `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoomLabel {
    None,
    Room(u8),
    Target,
}

/// Parameters of the layout generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MazeSpec {
    pub width: usize,
    pub height: usize,
    pub room_count: usize,
    /// Width in cells of door gaps and of the corridors that run through them.
    pub door_width: usize,
    pub target_room_count: usize,
}

impl Default for MazeSpec {
    fn default() -> Self {
        MazeSpec {
            width: 200,
            height: 200,
            room_count: 9,
            door_width: 10,
            target_room_count: 2,
        }
    }
}

impl MazeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 20 || self.height < 20 {
            return Err(Error::InvalidArgument(format!(
                "maze must be at least 20x20 cells, got {}x{}",
                self.width, self.height
            )));
        }
        if self.room_count < 2 || self.room_count > MAX_ROOMS {
            return Err(Error::InvalidArgument(format!(
                "room_count must be in [2, {MAX_ROOMS}], got {}",
                self.room_count
            )));
        }
        if self.door_width == 0 {
            return Err(Error::InvalidArgument("door_width must be positive".into()));
        }
        if self.target_room_count == 0 || self.target_room_count > self.room_count {
            return Err(Error::InvalidArgument(format!(
                "target_room_count must be in [1, room_count], got {}",
                self.target_room_count
            )));
        }
        Ok(())
    }

    fn min_room(&self) -> usize {
        (self.door_width + 2).max(3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeMap {
    width: usize,
    height: usize,
    cell_size: f64,
    occupancy: Vec<bool>,
    labels: Vec<RoomLabel>,
    seed: u64,
}

impl MazeMap {
    /// Builds a map from raw grids and checks every map invariant.
    pub fn from_grid(
        width: usize,
        height: usize,
        cell_size: f64,
        occupancy: Vec<bool>,
        labels: Vec<RoomLabel>,
        seed: u64,
    ) -> Result<Self> {
        let map = Self::from_grid_unchecked(width, height, cell_size, occupancy, labels, seed)?;
        map.validate()?;
        Ok(map)
    }

    /// Same as [`MazeMap::from_grid`] but only checks dimensions. Useful for
    /// hand-built fixtures that intentionally lack a target room.
    pub fn from_grid_unchecked(
        width: usize,
        height: usize,
        cell_size: f64,
        occupancy: Vec<bool>,
        labels: Vec<RoomLabel>,
        seed: u64,
    ) -> Result<Self> {
        if occupancy.len() != width * height || labels.len() != width * height {
            return Err(Error::Shape(format!(
                "grid of {width}x{height} needs {} cells",
                width * height
            )));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad cell size {cell_size}")));
        }
        Ok(MazeMap {
            width,
            height,
            cell_size,
            occupancy,
            labels,
            seed,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell_of_index(&self, i: usize) -> Cell {
        Cell::new(i % self.width, i / self.width)
    }

    pub fn in_bounds(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupancy[self.index(c)]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height && !self.occupancy[self.index(c)]
    }

    /// Out-of-bounds coordinates count as obstacles.
    pub fn occupied_at(&self, x: isize, y: isize) -> bool {
        !self.in_bounds(x, y) || self.occupancy[y as usize * self.width + x as usize]
    }

    pub fn label(&self, c: Cell) -> RoomLabel {
        self.labels[self.index(c)]
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn labels(&self) -> &[RoomLabel] {
        &self.labels
    }

    /// Cell containing a metric point, if it lies inside the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<Cell> {
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let cx = (x / self.cell_size).floor() as usize;
        let cy = (y / self.cell_size).floor() as usize;
        (cx < self.width && cy < self.height).then_some(Cell::new(cx, cy))
    }

    pub fn cell_center(&self, c: Cell) -> (f64, f64) {
        (
            (c.x as f64 + 0.5) * self.cell_size,
            (c.y as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.width * self.height)
            .filter(|&i| !self.occupancy[i])
            .map(|i| self.cell_of_index(i))
    }

    pub fn free_count(&self) -> usize {
        self.occupancy.iter().filter(|o| !**o).count()
    }

    pub fn target_cells(&self) -> Vec<Cell> {
        self.free_cells()
            .filter(|&c| self.label(c) == RoomLabel::Target)
            .collect()
    }

    /// True when a disc of `radius` centered at the point overlaps no obstacle cell.
    pub fn disc_is_free(&self, x: f64, y: f64, radius: f64) -> bool {
        let cs = self.cell_size;
        let x0 = ((x - radius) / cs).floor() as isize;
        let x1 = ((x + radius) / cs).floor() as isize;
        let y0 = ((y - radius) / cs).floor() as isize;
        let y1 = ((y + radius) / cs).floor() as isize;
        let r2 = radius * radius;
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                if !self.occupied_at(cx, cy) {
                    continue;
                }
                let nx = x.clamp(cx as f64 * cs, (cx + 1) as f64 * cs);
                let ny = y.clamp(cy as f64 * cs, (cy + 1) as f64 * cs);
                let (dx, dy) = (x - nx, y - ny);
                if dx * dx + dy * dy < r2 {
                    return false;
                }
            }
        }
        true
    }

    /// Free cells whose center can hold a disc of `radius`.
    pub fn clear_cells(&self, radius: f64) -> Vec<Cell> {
        self.free_cells()
            .filter(|&c| {
                let (x, y) = self.cell_center(c);
                self.disc_is_free(x, y, radius)
            })
            .collect()
    }

    /// Configuration-space map: every cell whose center lies within `radius`
    /// of an obstacle becomes an obstacle. Labels are preserved.
    pub fn inflated(&self, radius: f64) -> MazeMap {
        let occupancy = (0..self.width * self.height)
            .map(|i| {
                let c = self.cell_of_index(i);
                let (x, y) = self.cell_center(c);
                self.occupancy[i] || !self.disc_is_free(x, y, radius)
            })
            .collect();
        MazeMap {
            occupancy,
            ..self.clone()
        }
    }

    /// Number of free cells reachable from `start` through 4-connected moves.
    pub fn flood_fill_count(&self, start: Cell) -> usize {
        if !self.is_free(start) {
            return 0;
        }
        let mut seen = vec![false; self.occupancy.len()];
        let mut queue = VecDeque::from([start]);
        seen[self.index(start)] = true;
        let mut count = 0;
        while let Some(c) = queue.pop_front() {
            count += 1;
            for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (c.x as isize + dx, c.y as isize + dy);
                if self.occupied_at(nx, ny) {
                    continue;
                }
                let n = Cell::new(nx as usize, ny as usize);
                let i = self.index(n);
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        count
    }

    pub fn validate(&self) -> Result<()> {
        for x in 0..self.width {
            for y in [0, self.height - 1] {
                if !self.is_occupied(Cell::new(x, y)) {
                    return Err(Error::Contract(format!("border cell ({x},{y}) is free")));
                }
            }
        }
        for y in 0..self.height {
            for x in [0, self.width - 1] {
                if !self.is_occupied(Cell::new(x, y)) {
                    return Err(Error::Contract(format!("border cell ({x},{y}) is free")));
                }
            }
        }
        let free = self.free_count();
        let first = self
            .free_cells()
            .next()
            .ok_or_else(|| Error::Contract("map has no free cells".into()))?;
        if self.flood_fill_count(first) != free {
            return Err(Error::Contract("free space is not connected".into()));
        }
        if !self.labels.contains(&RoomLabel::Target) {
            return Err(Error::Contract("map has no target-room cell".into()));
        }
        Ok(())
    }

    /// Serializes into the `MAZE v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * (self.height + 1) + 64);
        let _ = writeln!(
            out,
            "MAZE v1 {} {} {} {}",
            self.width, self.height, self.cell_size, self.seed
        );
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                let ch = if self.is_occupied(c) {
                    '#'
                } else {
                    match self.label(c) {
                        RoomLabel::None => '.',
                        RoomLabel::Target => 'T',
                        RoomLabel::Room(id) => char::from(b'0' + id),
                    }
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::format("MAZE v1", reason);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "MAZE" || fields[1] != "v1" {
            return Err(bad(format!("bad header {header:?}")));
        }
        let width: usize = fields[2].parse().map_err(|e| bad(format!("width: {e}")))?;
        let height: usize = fields[3].parse().map_err(|e| bad(format!("height: {e}")))?;
        let cell_size: f64 = fields[4].parse().map_err(|e| bad(format!("cell size: {e}")))?;
        let seed: u64 = fields[5].parse().map_err(|e| bad(format!("seed: {e}")))?;
        let mut occupancy = Vec::with_capacity(width * height);
        let mut labels = Vec::with_capacity(width * height);
        let mut rows = 0;
        for line in lines {
            if rows == height {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(bad("more rows than declared".into()));
            }
            if line.chars().count() != width {
                return Err(bad(format!("row {rows} has wrong length")));
            }
            for ch in line.chars() {
                let (occ, label) = match ch {
                    '#' => (true, RoomLabel::None),
                    '.' => (false, RoomLabel::None),
                    'T' => (false, RoomLabel::Target),
                    '0'..='9' => (false, RoomLabel::Room(ch as u8 - b'0')),
                    other => return Err(bad(format!("unexpected character {other:?}"))),
                };
                occupancy.push(occ);
                labels.push(label);
            }
            rows += 1;
        }
        if rows != height {
            return Err(bad(format!("expected {height} rows, found {rows}")));
        }
        MazeMap::from_grid(width, height, cell_size, occupancy, labels, seed)
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Rect {
    fn w(&self) -> usize {
        self.x1 - self.x0
    }
    fn h(&self) -> usize {
        self.y1 - self.y0
    }
    fn center(&self) -> (usize, usize) {
        ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)
    }
}

struct Node {
    rect: Rect,
    children: Option<(usize, usize)>,
}

/// Generates an indoor layout: binary space partition into `room_count`
/// leaves, one room per leaf, corridors between sibling subtrees whose
/// entrances into rooms form the door gaps. Pure in `(seed, spec)`.
pub fn generate_maze(seed: u64, spec: &MazeSpec) -> Result<MazeMap> {
    spec.validate()?;
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng::rng_from(seed, &[rng::tag("maze"), attempt as u64]);
        match try_generate(seed, spec, &mut rng) {
            Ok(map) => match map.validate() {
                Ok(()) => return Ok(map),
                Err(e) => last = e.to_string(),
            },
            Err(reason) => last = reason,
        }
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: last,
    })
}

fn try_generate(seed: u64, spec: &MazeSpec, rng: &mut rng::Rng) -> std::result::Result<MazeMap, String> {
    let (w, h) = (spec.width, spec.height);
    let room_min = spec.min_room();
    let leaf_min = room_min + 2;

    let mut nodes = vec![Node {
        rect: Rect { x0: 1, y0: 1, x1: w - 1, y1: h - 1 },
        children: None,
    }];
    let mut leaves = vec![0usize];
    while leaves.len() < spec.room_count {
        // Split the largest leaf; ties resolve to the earliest.
        let (slot, &node_id) = leaves
            .iter()
            .enumerate()
            .max_by(|a, b| {
                let (ra, rb) = (nodes[*a.1].rect, nodes[*b.1].rect);
                (ra.w() * ra.h()).cmp(&(rb.w() * rb.h())).then(b.0.cmp(&a.0))
            })
            .expect("at least one leaf");
        let r = nodes[node_id].rect;
        let horizontal_first = r.w() >= r.h();
        let mut split = None;
        for horizontal in [horizontal_first, !horizontal_first] {
            let len = if horizontal { r.w() } else { r.h() };
            if len < 2 * leaf_min {
                continue;
            }
            let lo = ((len as f64 * 0.4).round() as usize).max(leaf_min);
            let hi = ((len as f64 * 0.6).round() as usize).min(len - leaf_min);
            let at = if lo >= hi { lo.min(len - leaf_min) } else { rng.random_range(lo..=hi) };
            let (a, b) = if horizontal {
                (
                    Rect { x1: r.x0 + at, ..r },
                    Rect { x0: r.x0 + at, ..r },
                )
            } else {
                (
                    Rect { y1: r.y0 + at, ..r },
                    Rect { y0: r.y0 + at, ..r },
                )
            };
            split = Some((a, b));
            break;
        }
        let (a, b) = split.ok_or_else(|| format!("cannot split a {}x{} region further", r.w(), r.h()))?;
        let ia = nodes.len();
        nodes.push(Node { rect: a, children: None });
        nodes.push(Node { rect: b, children: None });
        nodes[node_id].children = Some((ia, ia + 1));
        leaves.splice(slot..=slot, [ia, ia + 1]);
    }

    let mut occupancy = vec![true; w * h];
    let mut labels = vec![RoomLabel::None; w * h];

    // One room per leaf, inset by at least one wall cell.
    let mut rooms: Vec<Rect> = Vec::with_capacity(leaves.len());
    let mut room_of_node = vec![usize::MAX; nodes.len()];
    for (id, &leaf) in leaves.iter().enumerate() {
        let r = nodes[leaf].rect;
        let (max_w, max_h) = (r.w() - 2, r.h() - 2);
        let pick = |max: usize, rng: &mut rng::Rng| {
            let lo = room_min.max((max as f64 * 0.6).ceil() as usize).min(max);
            rng.random_range(lo..=max)
        };
        let rw = pick(max_w, rng);
        let rh = pick(max_h, rng);
        let x0 = r.x0 + 1 + rng.random_range(0..=(max_w - rw));
        let y0 = r.y0 + 1 + rng.random_range(0..=(max_h - rh));
        let room = Rect { x0, y0, x1: x0 + rw, y1: y0 + rh };
        for y in room.y0..room.y1 {
            for x in room.x0..room.x1 {
                occupancy[y * w + x] = false;
                labels[y * w + x] = RoomLabel::Room(id as u8);
            }
        }
        rooms.push(room);
        room_of_node[leaf] = id;
    }

    // Corridors join the closest pair of rooms across each split.
    let mut subtree_rooms: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for id in (0..nodes.len()).rev() {
        match nodes[id].children {
            None => subtree_rooms[id] = vec![room_of_node[id]],
            Some((a, b)) => {
                let (ra, rb) = (&subtree_rooms[a], &subtree_rooms[b]);
                let mut best = (usize::MAX, 0, 0);
                for &i in ra {
                    for &j in rb {
                        let (ax, ay) = rooms[i].center();
                        let (bx, by) = rooms[j].center();
                        let d = ax.abs_diff(bx) + ay.abs_diff(by);
                        if d < best.0 {
                            best = (d, i, j);
                        }
                    }
                }
                let horizontal_first = rng.random_bool(0.5);
                carve_corridor(
                    &mut occupancy,
                    w,
                    h,
                    spec.door_width,
                    rooms[best.1].center(),
                    rooms[best.2].center(),
                    horizontal_first,
                );
                let mut merged = ra.clone();
                merged.extend_from_slice(rb);
                subtree_rooms[id] = merged;
            }
        }
    }

    // Target rooms.
    let mut ids: Vec<usize> = (0..rooms.len()).collect();
    for i in (1..ids.len()).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    for &t in ids.iter().take(spec.target_room_count) {
        let room = rooms[t];
        for y in room.y0..room.y1 {
            for x in room.x0..room.x1 {
                labels[y * w + x] = RoomLabel::Target;
            }
        }
    }

    MazeMap::from_grid_unchecked(w, h, DEFAULT_CELL_SIZE, occupancy, labels, seed)
        .map_err(|e| e.to_string())
}

fn carve_corridor(
    occupancy: &mut [bool],
    w: usize,
    h: usize,
    width: usize,
    a: (usize, usize),
    b: (usize, usize),
    horizontal_first: bool,
) {
    let half = width / 2;
    let band = |c: usize, limit: usize| {
        let lo = c.saturating_sub(half).max(1);
        let hi = (lo + width).min(limit - 1);
        (hi.saturating_sub(width).max(1), hi)
    };
    let mut carve = |xr: (usize, usize), yr: (usize, usize)| {
        for y in yr.0..yr.1 {
            for x in xr.0..xr.1 {
                occupancy[y * w + x] = false;
            }
        }
    };
    let span = |p: usize, q: usize, limit: usize| {
        let (lo, hi) = (p.min(q), p.max(q));
        let (blo, _) = band(lo, limit);
        let (_, bhi) = band(hi, limit);
        (blo, bhi)
    };
    let corner = if horizontal_first { (b.0, a.1) } else { (a.0, b.1) };
    if horizontal_first {
        carve(span(a.0, corner.0, w), band(a.1, h));
        carve(band(corner.0, w), span(corner.1, b.1, h));
    } else {
        carve(band(a.0, w), span(a.1, corner.1, h));
        carve(span(corner.0, b.0, w), band(corner.1, h));
    }
}

/// Connected components of room-labelled cells, grouping 4-neighbours that
/// share a label. Corridors (unlabelled free cells) separate regions.
pub fn room_region_count(map: &MazeMap) -> usize {
    let n = map.width() * map.height();
    let mut seen = vec![false; n];
    let mut regions = 0;
    for start in 0..n {
        let label = map.labels()[start];
        if seen[start] || map.occupancy()[start] || label == RoomLabel::None {
            continue;
        }
        regions += 1;
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            let c = map.cell_of_index(i);
            for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (c.x as isize + dx, c.y as isize + dy);
                if map.occupied_at(nx, ny) {
                    continue;
                }
                let j = ny as usize * map.width() + nx as usize;
                if !seen[j] && map.labels()[j] == label {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    regions
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MazeSpec {
        MazeSpec {
            width: 20,
            height: 20,
            room_count: 2,
            door_width: 2,
            target_room_count: 1,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = MazeSpec::default();
        let a = generate_maze(11, &spec).unwrap();
        let b = generate_maze(11, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
        let c = generate_maze(12, &spec).unwrap();
        assert_ne!(a.occupancy(), c.occupancy());
    }

    #[test]
    fn two_room_map_has_two_regions_and_a_corridor() {
        for seed in 0..20 {
            let map = generate_maze(seed, &small()).unwrap();
            assert_eq!(room_region_count(&map), 2, "seed {seed}");
            let corridor = map
                .free_cells()
                .filter(|&c| map.label(c) == RoomLabel::None)
                .count();
            assert!(corridor >= 1, "seed {seed}");
        }
    }

    #[test]
    fn generated_maps_satisfy_invariants() {
        for seed in 0..10 {
            let map = generate_maze(seed, &MazeSpec::default()).unwrap();
            map.validate().unwrap();
            assert!(!map.target_cells().is_empty());
        }
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let spec = MazeSpec { room_count: 1, ..small() };
        assert!(matches!(generate_maze(0, &spec), Err(Error::InvalidArgument(_))));
        let spec = MazeSpec { width: 19, ..small() };
        assert!(generate_maze(0, &spec).is_err());
        // Too many rooms for the area: BSP cannot split enough times.
        let spec = MazeSpec { room_count: 10, door_width: 6, ..small() };
        assert!(matches!(generate_maze(0, &spec), Err(Error::Generation { .. })));
    }

    #[test]
    fn text_round_trip() {
        let map = generate_maze(5, &MazeSpec::default()).unwrap();
        let back = MazeMap::from_text(&map.to_text()).unwrap();
        assert_eq!(map, back);
        assert!(map.to_text().starts_with("MAZE v1 200 200 0.1 5\n"));
    }

    #[test]
    fn malformed_text_is_rejected() {
        assert!(MazeMap::from_text("MAZE v2 3 3 0.1 0\n").is_err());
        assert!(MazeMap::from_text("MAZE v1 3 3 0.1 0\n###\n#x#\n###\n").is_err());
        // Free border cell.
        assert!(MazeMap::from_text("MAZE v1 3 3 0.1 0\n#.#\n#T#\n###\n").is_err());
    }

    #[test]
    fn inflation_grows_obstacles() {
        let map = generate_maze(3, &MazeSpec::default()).unwrap();
        let inflated = map.inflated(0.25);
        assert!(inflated.free_count() < map.free_count());
        for c in inflated.free_cells() {
            assert!(map.is_free(c));
        }
    }
}
