//! Occupancy grids shared by the ground truth and every robot's local map.
//!
//! Cells are ternary and ordered `Unknown < Free < Obstacle`; merging two maps
//! is the cell-wise maximum under that order, which makes it a lattice join.
//! Movement, frontier adjacency and path costs are all 4-connected with unit
//! step cost.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum CellState {
    #[default]
    Unknown,
    Free,
    Obstacle,
}

impl CellState {
    pub fn is_known(self) -> bool {
        self != CellState::Unknown
    }

    fn symbol(self) -> char {
        match self {
            CellState::Unknown => '?',
            CellState::Free => '.',
            CellState::Obstacle => '#',
        }
    }
}

/// A cell coordinate. Poses order by row first, then column, which is the
/// deterministic tie-break used everywhere downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Pose {
    pub x: usize,
    pub y: usize,
}

impl Pose {
    pub const fn new(x: usize, y: usize) -> Self {
        Pose { x, y }
    }

    pub fn dist2(self, other: Pose) -> usize {
        let dx = self.x.abs_diff(other.x);
        let dy = self.y.abs_diff(other.y);
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Pose) -> f64 {
        (self.dist2(other) as f64).sqrt()
    }

    pub fn manhattan(self, other: Pose) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl Ord for Pose {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Pose {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("map document is empty")]
    Empty,
    #[error("line {line}: expected {expected} columns, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: illegal character {found:?}")]
    IllegalCharacter {
        line: usize,
        column: usize,
        found: char,
    },
    #[error("map dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("pose {pose} is outside the {width}x{height} map")]
    OutOfBounds {
        pose: Pose,
        width: usize,
        height: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<CellState>,
}

impl GridMap {
    /// Creates a `width` x `height` map filled with `fill`.
    ///
    /// Panics if either dimension is zero.
    pub fn new(width: usize, height: usize, fill: CellState) -> Self {
        assert!(width >= 1 && height >= 1, "grid maps need at least one cell");
        GridMap {
            width,
            height,
            cells: vec![fill; width * height],
        }
    }

    pub fn unknown(width: usize, height: usize) -> Self {
        Self::new(width, height, CellState::Unknown)
    }

    /// Same dimensions as `self`, every cell unknown.
    pub fn blank_like(&self) -> Self {
        Self::unknown(self.width, self.height)
    }

    /// Parses the ASCII map format: one row per line, `.` free, `#` obstacle.
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let mut rows: Vec<&str> = text.split('\n').collect();
        if rows.last() == Some(&"") {
            rows.pop();
        }
        if rows.is_empty() {
            return Err(MapError::Empty);
        }
        let rows: Vec<&str> = rows
            .into_iter()
            .map(|r| r.strip_suffix('\r').unwrap_or(r))
            .collect();
        let width = rows[0].chars().count();
        if width == 0 {
            return Err(MapError::Empty);
        }
        let mut cells = Vec::with_capacity(width * rows.len());
        for (i, row) in rows.iter().enumerate() {
            let line = i + 1;
            let mut found = 0;
            for (j, ch) in row.chars().enumerate() {
                let state = match ch {
                    '.' => CellState::Free,
                    '#' => CellState::Obstacle,
                    other => {
                        return Err(MapError::IllegalCharacter {
                            line,
                            column: j + 1,
                            found: other,
                        })
                    }
                };
                cells.push(state);
                found += 1;
            }
            if found != width {
                return Err(MapError::Ragged {
                    line,
                    expected: width,
                    found,
                });
            }
        }
        Ok(GridMap {
            width,
            height: rows.len(),
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn index(&self, p: Pose) -> usize {
        p.y * self.width + p.x
    }

    pub fn pose_at(&self, index: usize) -> Pose {
        Pose::new(index % self.width, index / self.width)
    }

    pub fn contains(&self, p: Pose) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn get(&self, p: Pose) -> CellState {
        self.cells[self.index(p)]
    }

    pub fn set(&mut self, p: Pose, state: CellState) {
        let i = self.index(p);
        self.cells[i] = state;
    }

    pub fn is_free(&self, p: Pose) -> bool {
        self.contains(p) && self.get(p) == CellState::Free
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    pub fn known_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_known()).count()
    }

    /// All poses in ascending (y, x) order.
    pub fn poses(&self) -> impl Iterator<Item = Pose> + '_ {
        (0..self.cells.len()).map(|i| self.pose_at(i))
    }

    /// In-bounds 4-neighbours in a fixed order: up, left, right, down.
    pub fn neighbors4(&self, p: Pose) -> impl Iterator<Item = Pose> {
        let (w, h) = (self.width, self.height);
        let up = (p.y > 0).then(|| Pose::new(p.x, p.y - 1));
        let left = (p.x > 0).then(|| Pose::new(p.x - 1, p.y));
        let right = (p.x + 1 < w).then(|| Pose::new(p.x + 1, p.y));
        let down = (p.y + 1 < h).then(|| Pose::new(p.x, p.y + 1));
        [up, left, right, down].into_iter().flatten()
    }

    /// In-bounds cells whose Euclidean distance to `center` is at most `radius`.
    pub fn disc(&self, center: Pose, radius: u32) -> impl Iterator<Item = Pose> + '_ {
        let r = radius as usize;
        let r2 = r * r;
        let x0 = center.x.saturating_sub(r);
        let y0 = center.y.saturating_sub(r);
        let x1 = (center.x + r).min(self.width - 1);
        let y1 = (center.y + r).min(self.height - 1);
        (y0..=y1)
            .flat_map(move |y| (x0..=x1).map(move |x| Pose::new(x, y)))
            .filter(move |p| p.dist2(center) <= r2)
    }

    fn check_dims(&self, other: &GridMap) -> Result<(), MapError> {
        if self.dims() != other.dims() {
            return Err(MapError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    /// Range-limited ray-cast sensing from `pose` against `truth`.
    ///
    /// A Bresenham ray is traced towards every cell of the sensor disc and
    /// each cell along it is revealed; the first obstacle on a ray is
    /// revealed and ends it. Returns the number of cells that went from
    /// unknown to known.
    pub fn sense(&mut self, truth: &GridMap, pose: Pose, radius: u32) -> Result<usize, MapError> {
        self.check_dims(truth)?;
        if !self.contains(pose) {
            return Err(MapError::OutOfBounds {
                pose,
                width: self.width,
                height: self.height,
            });
        }
        let mut revealed = 0;
        let targets: Vec<Pose> = truth.disc(pose, radius).collect();
        for target in targets {
            for cell in bresenham(pose, target) {
                let i = self.index(cell);
                let seen = truth.cells[i];
                if self.cells[i] == CellState::Unknown && seen.is_known() {
                    revealed += 1;
                }
                self.cells[i] = self.cells[i].max(seen);
                if seen == CellState::Obstacle {
                    break;
                }
            }
        }
        Ok(revealed)
    }

    /// Joins `other` into `self` cell by cell. Returns how many cells changed.
    pub fn merge_from(&mut self, other: &GridMap) -> Result<usize, MapError> {
        self.check_dims(other)?;
        let mut changed = 0;
        for (mine, theirs) in self.cells.iter_mut().zip(&other.cells) {
            if *theirs > *mine {
                *mine = *theirs;
                changed += 1;
            }
        }
        Ok(changed)
    }

    pub fn is_frontier(&self, p: Pose) -> bool {
        self.get(p) == CellState::Free
            && self
                .neighbors4(p)
                .any(|n| self.get(n) == CellState::Unknown)
    }

    /// Every free cell 4-adjacent to an unknown cell, in ascending (y, x).
    pub fn frontiers(&self) -> FrontierSet {
        FrontierSet(self.poses().filter(|&p| self.is_frontier(p)).collect())
    }

    /// Frontiers restricted to the free component containing `pose`.
    pub fn frontiers_from(&self, pose: Pose) -> FrontierSet {
        if !self.is_free(pose) {
            return FrontierSet::default();
        }
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([pose]);
        seen[self.index(pose)] = true;
        let mut found = Vec::new();
        while let Some(p) = queue.pop_front() {
            if self.is_frontier(p) {
                found.push(p);
            }
            for n in self.neighbors4(p) {
                let i = self.index(n);
                if !seen[i] && self.cells[i] == CellState::Free {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        found.sort();
        FrontierSet(found)
    }

    /// Breadth-first distances over free cells from `from`.
    pub fn distances_from(&self, from: Pose) -> DistanceField {
        let mut dist = vec![u32::MAX; self.cells.len()];
        let mut parent = vec![usize::MAX; self.cells.len()];
        if self.is_free(from) {
            let start = self.index(from);
            dist[start] = 0;
            let mut queue = VecDeque::from([from]);
            while let Some(p) = queue.pop_front() {
                let d = dist[self.index(p)];
                for n in self.neighbors4(p) {
                    let i = self.index(n);
                    if dist[i] == u32::MAX && self.cells[i] == CellState::Free {
                        dist[i] = d + 1;
                        parent[i] = self.index(p);
                        queue.push_back(n);
                    }
                }
            }
        }
        DistanceField {
            width: self.width,
            origin: from,
            dist,
            parent,
        }
    }

    /// Minimum-length 4-connected path through free cells, endpoints included.
    ///
    /// The destination itself may be unknown (but not an obstacle); every
    /// intermediate cell must be free. `None` means unreachable.
    pub fn shortest_path(&self, from: Pose, to: Pose) -> Option<Vec<Pose>> {
        if !self.is_free(from) || !self.contains(to) || self.get(to) == CellState::Obstacle {
            return None;
        }
        if from == to {
            return Some(vec![from]);
        }
        let field = self.distances_from(from);
        if let Some(path) = field.path_to(to) {
            return Some(path);
        }
        if self.get(to) != CellState::Unknown {
            return None;
        }
        // Step into an unknown goal from its nearest free neighbour.
        let best = self
            .neighbors4(to)
            .filter(|&n| field.distance(n).is_some())
            .min_by_key(|&n| (field.distance(n), n))?;
        let mut path = field.path_to(best)?;
        path.push(to);
        Some(path)
    }

    /// Unknown cells within Euclidean `radius` of `f`, ignoring occlusion.
    pub fn unknown_gain(&self, f: Pose, radius: u32) -> usize {
        self.disc(f, radius)
            .filter(|&p| self.get(p) == CellState::Unknown)
            .count()
    }

    /// Mean coordinate of all known cells, or `None` for a blank map.
    pub fn center_of_mass(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (i, c) in self.cells.iter().enumerate() {
            if c.is_known() {
                let p = self.pose_at(i);
                sx += p.x as f64;
                sy += p.y as f64;
                n += 1;
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// ASCII rendering; unknown cells print as `?` and are rejected by [`GridMap::parse`].
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|c| c.symbol()));
            out.push('\n');
        }
        out
    }
}

impl FromStr for GridMap {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii())
    }
}

/// Parses a ground-truth map document.
pub fn load_map(text: &str) -> Result<GridMap, MapError> {
    GridMap::parse(text)
}

/// Cell-wise join of two maps of the same size.
pub fn merge(a: &GridMap, b: &GridMap) -> Result<GridMap, MapError> {
    let mut out = a.clone();
    out.merge_from(b)?;
    Ok(out)
}

/// Frontier cells in ascending (y, x) order, without duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrontierSet(Vec<Pose>);

impl FrontierSet {
    /// Builds a set from arbitrary poses, sorting and deduplicating them.
    pub fn from_poses(mut poses: Vec<Pose>) -> Self {
        poses.sort();
        poses.dedup();
        FrontierSet(poses)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, p: Pose) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = Pose> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[Pose] {
        &self.0
    }
}

/// Result of a breadth-first expansion over free cells.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    origin: Pose,
    dist: Vec<u32>,
    parent: Vec<usize>,
}

impl DistanceField {
    pub fn origin(&self) -> Pose {
        self.origin
    }

    pub fn distance(&self, p: Pose) -> Option<u32> {
        let d = *self.dist.get(p.y * self.width + p.x)?;
        (d != u32::MAX).then_some(d)
    }

    pub fn path_to(&self, to: Pose) -> Option<Vec<Pose>> {
        let mut i = to.y * self.width + to.x;
        if self.dist.get(i).copied().unwrap_or(u32::MAX) == u32::MAX {
            return None;
        }
        let mut path = Vec::with_capacity(self.dist[i] as usize + 1);
        loop {
            path.push(Pose::new(i % self.width, i / self.width));
            if self.parent[i] == usize::MAX {
                break;
            }
            i = self.parent[i];
        }
        path.reverse();
        Some(path)
    }
}

/// Integer Bresenham line from `a` to `b`, both endpoints included.
pub fn bresenham(a: Pose, b: Pose) -> Vec<Pose> {
    let (mut x, mut y) = (a.x as i64, a.y as i64);
    let (x1, y1) = (b.x as i64, b.y as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push(Pose::new(x as usize, y as usize));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}
