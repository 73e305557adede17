//! Bundled synthetic maps, generated deterministically.
//!
//! Every family comes in 32×32 and 64×64 (`open32`, `rooms64`, ...), plus
//! `two_rooms32`. Only the largest free component is kept, so every free cell
//! is reachable from every other.

use std::collections::VecDeque;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gridworld::{CellState, GridMap, MapError, Pose};

pub const FAMILIES: [&str; 6] = ["open", "rooms", "maze", "urban_grid", "urban_irregular", "construction"];

#[derive(Debug, Error)]
pub enum MapSourceError {
    #[error("unknown built-in map {0:?}")]
    UnknownBuiltin(String),
    #[error("cannot read map file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("map file {path}: {source}")]
    Parse { path: String, source: MapError },
}

/// Names of all bundled maps.
pub fn builtin_names() -> Vec<String> {
    let mut names: Vec<String> = [32, 64]
        .iter()
        .flat_map(|s| FAMILIES.iter().map(move |f| format!("{f}{s}")))
        .collect();
    names.push("two_rooms32".into());
    names
}

/// The six 64×64 benchmark maps.
pub fn benchmark_names() -> Vec<String> {
    FAMILIES.iter().map(|f| format!("{f}64")).collect()
}

pub fn builtin(name: &str) -> Option<GridMap> {
    if name == "two_rooms32" {
        return Some(two_rooms(32));
    }
    let split = name.find(|c: char| c.is_ascii_digit())?;
    let (family, size) = name.split_at(split);
    let size: usize = size.parse().ok()?;
    if size != 32 && size != 64 {
        return None;
    }
    // Each map gets its own fixed stream so families do not share layouts.
    let index = FAMILIES.iter().position(|f| *f == family)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d61_7073);
    rng.set_stream((index * 100 + size) as u64);
    let map = match family {
        "open" => open(size, &mut rng),
        "rooms" => rooms(size, &mut rng),
        "maze" => maze(size, &mut rng),
        "urban_grid" => urban_grid(size),
        "urban_irregular" => urban_irregular(size, &mut rng),
        "construction" => construction(size, &mut rng),
        _ => unreachable!("family list is exhaustive"),
    };
    Some(keep_largest_component(map))
}

/// Resolves `builtin:NAME` or a path to an ASCII map file.
pub fn resolve(source: &str) -> Result<GridMap, MapSourceError> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return builtin(name).ok_or_else(|| MapSourceError::UnknownBuiltin(name.into()));
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| MapSourceError::Io {
        path: source.into(),
        source: e,
    })?;
    GridMap::parse(&text).map_err(|e| MapSourceError::Parse {
        path: source.into(),
        source: e,
    })
}

fn bordered(size: usize) -> GridMap {
    let mut m = GridMap::new(size, size, CellState::Free);
    for i in 0..size {
        for p in [Pose::new(i, 0), Pose::new(i, size - 1), Pose::new(0, i), Pose::new(size - 1, i)] {
            m.set(p, CellState::Obstacle);
        }
    }
    m
}

fn fill(m: &mut GridMap, x0: usize, y0: usize, w: usize, h: usize, state: CellState) {
    for y in y0..(y0 + h).min(m.height()) {
        for x in x0..(x0 + w).min(m.width()) {
            m.set(Pose::new(x, y), state);
        }
    }
}

fn open(size: usize, rng: &mut impl Rng) -> GridMap {
    let mut m = bordered(size);
    for _ in 0..size / 6 {
        let x = rng.gen_range(3..size - 5);
        let y = rng.gen_range(3..size - 5);
        fill(&mut m, x, y, 2, 2, CellState::Obstacle);
    }
    m
}

fn rooms(size: usize, rng: &mut impl Rng) -> GridMap {
    let mut m = bordered(size);
    let cell = size / 4;
    for k in 1..4 {
        let c = k * cell;
        fill(&mut m, c, 0, 1, size, CellState::Obstacle);
        fill(&mut m, 0, c, size, 1, CellState::Obstacle);
    }
    // A door in every wall segment between neighbouring rooms.
    let door = (cell / 4).max(2);
    for k in 1..4 {
        let c = k * cell;
        for r in 0..4 {
            let lo = r * cell + 1;
            let at = rng.gen_range(lo..lo + cell - door);
            fill(&mut m, c, at, 1, door, CellState::Free);
            let at = rng.gen_range(lo..lo + cell - door);
            fill(&mut m, at, c, door, 1, CellState::Free);
        }
    }
    m
}

fn maze(size: usize, rng: &mut impl Rng) -> GridMap {
    // Cells are 3×3 open squares separated by 1-wide walls.
    let pitch = 4;
    let n = (size - 1) / pitch;
    let mut m = GridMap::new(size, size, CellState::Obstacle);
    let origin = |c: usize| 1 + c * pitch;
    for cy in 0..n {
        for cx in 0..n {
            fill(&mut m, origin(cx), origin(cy), 3, 3, CellState::Free);
        }
    }
    let mut visited = vec![false; n * n];
    let mut stack = vec![(0usize, 0usize)];
    visited[0] = true;
    while let Some(&(cx, cy)) = stack.last() {
        let mut options = Vec::new();
        if cx > 0 && !visited[cy * n + cx - 1] {
            options.push((cx - 1, cy));
        }
        if cx + 1 < n && !visited[cy * n + cx + 1] {
            options.push((cx + 1, cy));
        }
        if cy > 0 && !visited[(cy - 1) * n + cx] {
            options.push((cx, cy - 1));
        }
        if cy + 1 < n && !visited[(cy + 1) * n + cx] {
            options.push((cx, cy + 1));
        }
        match options.choose(rng) {
            None => {
                stack.pop();
            }
            Some(&(nx, ny)) => {
                knock(&mut m, (cx, cy), (nx, ny), pitch);
                visited[ny * n + nx] = true;
                stack.push((nx, ny));
            }
        }
    }
    // A few extra openings give the maze loops.
    for _ in 0..n * n / 8 {
        let cx = rng.gen_range(0..n - 1);
        let cy = rng.gen_range(0..n);
        if rng.gen_bool(0.5) {
            knock(&mut m, (cx, cy), (cx + 1, cy), pitch);
        } else {
            knock(&mut m, (cy, cx), (cy, cx + 1), pitch);
        }
    }
    m
}

fn knock(m: &mut GridMap, a: (usize, usize), b: (usize, usize), pitch: usize) {
    let (x0, y0) = (1 + a.0.min(b.0) * pitch, 1 + a.1.min(b.1) * pitch);
    if a.1 == b.1 {
        fill(m, x0 + 3, y0, 1, 3, CellState::Free);
    } else {
        fill(m, x0, y0 + 3, 3, 1, CellState::Free);
    }
}

fn urban_grid(size: usize) -> GridMap {
    let mut m = bordered(size);
    let (street, block) = (3, 6);
    let mut y = 1 + street;
    while y + block < size - 1 {
        let mut x = 1 + street;
        while x + block < size - 1 {
            fill(&mut m, x, y, block, block, CellState::Obstacle);
            x += block + street;
        }
        y += block + street;
    }
    m
}

fn urban_irregular(size: usize, rng: &mut impl Rng) -> GridMap {
    let mut m = bordered(size);
    let target = size * size * 3 / 10;
    let mut built = 0;
    for _ in 0..size * 20 {
        if built >= target {
            break;
        }
        let w = rng.gen_range(3..=8);
        let h = rng.gen_range(3..=8);
        let x = rng.gen_range(3..size - w - 2);
        let y = rng.gen_range(3..size - h - 2);
        // Keep a two-cell street around every building.
        let clear = (y - 2..y + h + 2).all(|yy| (x - 2..x + w + 2).all(|xx| m.is_free(Pose::new(xx, yy))));
        if clear {
            fill(&mut m, x, y, w, h, CellState::Obstacle);
            built += w * h;
        }
    }
    m
}

fn construction(size: usize, rng: &mut impl Rng) -> GridMap {
    let mut m = bordered(size);
    for _ in 0..size / 5 {
        let len = rng.gen_range(size / 6..size / 3);
        let x = rng.gen_range(2..size - 2);
        let y = rng.gen_range(2..size - 2);
        if rng.gen_bool(0.5) {
            fill(&mut m, x, y, len, 1, CellState::Obstacle);
        } else {
            fill(&mut m, x, y, 1, len, CellState::Obstacle);
        }
    }
    for _ in 0..size * size / 12 {
        let p = Pose::new(rng.gen_range(1..size - 1), rng.gen_range(1..size - 1));
        m.set(p, CellState::Obstacle);
    }
    m
}

fn two_rooms(size: usize) -> GridMap {
    let mut m = bordered(size);
    let mid = size / 2;
    fill(&mut m, mid, 0, 1, size, CellState::Obstacle);
    fill(&mut m, mid, mid - 2, 1, 4, CellState::Free);
    m
}

/// Turns every free cell outside the largest 4-connected free component
/// into an obstacle. Ties go to the component found first in row order.
pub fn keep_largest_component(mut m: GridMap) -> GridMap {
    let mut label = vec![usize::MAX; m.area()];
    let mut sizes = Vec::new();
    for start in 0..m.area() {
        let p = m.pose_at(start);
        if label[start] != usize::MAX || !m.is_free(p) {
            continue;
        }
        let id = sizes.len();
        let mut count = 0;
        let mut queue = VecDeque::from([p]);
        label[start] = id;
        while let Some(q) = queue.pop_front() {
            count += 1;
            for n in m.neighbors4(q) {
                let i = m.index(n);
                if label[i] == usize::MAX && m.is_free(n) {
                    label[i] = id;
                    queue.push_back(n);
                }
            }
        }
        sizes.push(count);
    }
    let Some(best) = (0..sizes.len()).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))) else {
        return m;
    };
    for (i, l) in label.iter().enumerate() {
        if *l != usize::MAX && *l != best {
            let p = m.pose_at(i);
            m.set(p, CellState::Obstacle);
        }
    }
    m
}
