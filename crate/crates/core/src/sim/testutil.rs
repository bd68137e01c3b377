use super::maze::{MazeMap, RoomLabel};

/// Empty room with a one-cell border wall.
pub fn open_box(w: usize, h: usize) -> MazeMap {
    let mut occ = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            occ[y * w + x] = x == 0 || y == 0 || x == w - 1 || y == h - 1;
        }
    }
    let mut labels = vec![RoomLabel::None; w * h];
    labels[w + 1] = RoomLabel::Target;
    MazeMap::from_grid(w, h, 0.1, occ, labels, 0).unwrap()
}

/// Map from an ASCII picture using the `MAZE v1` row alphabet.
pub fn from_rows(rows: &[&str]) -> MazeMap {
    let mut text = format!("MAZE v1 {} {} 0.1 0\n", rows[0].len(), rows.len());
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    MazeMap::from_text(&text).unwrap()
}
