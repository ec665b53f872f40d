//! Occupancy-grid workspace, line-of-sight geometry and grid travel.
//!
//! Cells are indexed `(col, row)` with row 0 at the lowest `y`. The plain-text
//! map format lists rows top-down (highest `y` first), the way it reads on screen.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("position ({x}, {y}) is outside the map")]
    OutOfBounds { x: f64, y: f64 },
    #[error("position ({x}, {y}) lies on an occupied cell")]
    Occupied { x: f64, y: f64 },
    #[error("no path between ({0}, {1}) and ({2}, {3})")]
    Unreachable(f64, f64, f64, f64),
    #[error("invalid map dimensions: {0}")]
    InvalidDimensions(String),
    #[error("map parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("velocity must be positive, got {0}")]
    InvalidVelocity(f64),
}

/// A point in the workspace, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Position, t: f64) -> Position {
        Position::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    resolution: f64,
    occupancy: Vec<bool>,
}

const NEIGHBORS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

impl GridMap {
    /// An obstacle-free map.
    pub fn new(width: usize, height: usize, resolution: f64) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::InvalidDimensions(format!("{width}x{height}")));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(MapError::InvalidDimensions(format!("resolution {resolution}")));
        }
        Ok(Self {
            width,
            height,
            resolution,
            occupancy: vec![false; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width_m(&self) -> f64 {
        self.width as f64 * self.resolution
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * self.resolution
    }

    pub fn cell_count(&self) -> usize {
        self.occupancy.len()
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell {
            col: index % self.width,
            row: index / self.width,
        }
    }

    pub fn set_occupied(&mut self, cell: Cell, occupied: bool) {
        let i = self.index(cell);
        self.occupancy[i] = occupied;
    }

    /// Marks every cell whose center lies inside the axis-aligned rectangle.
    pub fn fill_rect(&mut self, min: Position, max: Position) {
        for row in 0..self.height {
            for col in 0..self.width {
                let c = self.center(Cell { col, row });
                if c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y {
                    self.set_occupied(Cell { col, row }, true);
                }
            }
        }
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupancy[self.index(cell)]
    }

    pub fn contains(&self, p: Position) -> bool {
        p.x.is_finite() && p.y.is_finite() && p.x >= 0.0 && p.y >= 0.0 && p.x < self.width_m() && p.y < self.height_m()
    }

    pub fn cell_of(&self, p: Position) -> Result<Cell, MapError> {
        if !self.contains(p) {
            return Err(MapError::OutOfBounds { x: p.x, y: p.y });
        }
        let col = ((p.x / self.resolution).floor() as usize).min(self.width - 1);
        let row = ((p.y / self.resolution).floor() as usize).min(self.height - 1);
        Ok(Cell { col, row })
    }

    pub fn center(&self, cell: Cell) -> Position {
        Position::new(
            (cell.col as f64 + 0.5) * self.resolution,
            (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    /// Snaps a position to the center of the cell containing it.
    pub fn snap(&self, p: Position) -> Result<Position, MapError> {
        Ok(self.center(self.cell_of(p)?))
    }

    pub fn is_free(&self, p: Position) -> bool {
        self.cell_of(p).map(|c| !self.is_occupied(c)).unwrap_or(false)
    }

    /// Returns the free cell for `p`, or a domain error.
    pub fn free_cell(&self, p: Position) -> Result<Cell, MapError> {
        let c = self.cell_of(p)?;
        if self.is_occupied(c) {
            return Err(MapError::Occupied { x: p.x, y: p.y });
        }
        Ok(c)
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cell_count())
            .map(|i| self.cell_at(i))
            .filter(|c| !self.is_occupied(*c))
    }

    /// Length of the segment `a`–`b` that runs through occupied cells.
    pub fn los_obstacle_length(&self, a: Position, b: Position) -> Result<f64, MapError> {
        self.cell_of(a)?;
        self.cell_of(b)?;
        let len = a.distance(&b);
        if len == 0.0 {
            return Ok(0.0);
        }
        // Walk the grid-line crossings of both axes in order of the segment
        // parameter; every sub-interval between consecutive crossings lies
        // in a single cell.
        let mut xs = Crossings::new(a.x, b.x, self.resolution);
        let mut ys = Crossings::new(a.y, b.y, self.resolution);
        let mut blocked = 0.0;
        let mut t0 = 0.0;
        loop {
            let t1 = match (xs.peek(), ys.peek()) {
                (Some(x), Some(y)) if x <= y => xs.next_t(),
                (Some(_), Some(_)) | (None, Some(_)) => ys.next_t(),
                (Some(_), None) => xs.next_t(),
                (None, None) => 1.0,
            };
            if t1 - t0 > 0.0 {
                let mid = a.lerp(&b, 0.5 * (t0 + t1));
                if self.is_occupied(self.cell_of(mid)?) {
                    blocked += (t1 - t0) * len;
                }
                t0 = t1;
            }
            if t1 >= 1.0 {
                return Ok(blocked);
            }
        }
    }

    fn neighbors(&self, cell: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        NEIGHBORS.iter().filter_map(move |&(dc, dr)| {
            let col = cell.col as isize + dc;
            let row = cell.row as isize + dr;
            if col < 0 || row < 0 || col >= self.width as isize || row >= self.height as isize {
                return None;
            }
            let next = Cell {
                col: col as usize,
                row: row as usize,
            };
            if self.is_occupied(next) {
                return None;
            }
            if dc != 0 && dr != 0 {
                // no corner cutting
                let side_a = Cell {
                    col: col as usize,
                    row: cell.row,
                };
                let side_b = Cell {
                    col: cell.col,
                    row: row as usize,
                };
                if self.is_occupied(side_a) || self.is_occupied(side_b) {
                    return None;
                }
                Some((next, std::f64::consts::SQRT_2 * self.resolution))
            } else {
                Some((next, self.resolution))
            }
        })
    }

    /// Shortest 8-connected path length between two free cells, in meters.
    pub fn astar_path_length(&self, from: Cell, to: Cell) -> Option<f64> {
        if self.is_occupied(from) || self.is_occupied(to) {
            return None;
        }
        let octile = |c: Cell| {
            let dx = c.col.abs_diff(to.col) as f64;
            let dy = c.row.abs_diff(to.row) as f64;
            let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
            (hi - lo + std::f64::consts::SQRT_2 * lo) * self.resolution
        };
        let mut g = vec![f64::INFINITY; self.cell_count()];
        let mut closed = vec![false; self.cell_count()];
        let mut open = BinaryHeap::new();
        g[self.index(from)] = 0.0;
        open.push(HeapEntry {
            key: octile(from),
            index: self.index(from),
        });
        while let Some(HeapEntry { index, .. }) = open.pop() {
            if closed[index] {
                continue;
            }
            closed[index] = true;
            let cell = self.cell_at(index);
            if cell == to {
                return Some(g[index]);
            }
            for (next, cost) in self.neighbors(cell) {
                let ni = self.index(next);
                let cand = g[index] + cost;
                if cand < g[ni] {
                    g[ni] = cand;
                    open.push(HeapEntry {
                        key: cand + octile(next),
                        index: ni,
                    });
                }
            }
        }
        None
    }

    /// Dijkstra distances (meters) from `source` to every cell; unreachable
    /// and occupied cells are `INFINITY`.
    pub fn distance_field(&self, source: Cell) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.cell_count()];
        if self.is_occupied(source) {
            return dist;
        }
        let mut heap = BinaryHeap::new();
        let si = self.index(source);
        dist[si] = 0.0;
        heap.push(HeapEntry { key: 0.0, index: si });
        while let Some(HeapEntry { key, index }) = heap.pop() {
            if key > dist[index] {
                continue;
            }
            for (next, cost) in self.neighbors(self.cell_at(index)) {
                let ni = self.index(next);
                let cand = key + cost;
                if cand < dist[ni] {
                    dist[ni] = cand;
                    heap.push(HeapEntry { key: cand, index: ni });
                }
            }
        }
        dist
    }

    /// Parses the plain-text map format: a header line `width height
    /// resolution` followed by `height` rows of `.` (free) and `#` (occupied),
    /// top row first. Trailing whitespace is ignored.
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MapError::Parse {
            line: 1,
            msg: "empty map file".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(MapError::Parse {
                line: 1,
                msg: format!("expected `width height resolution`, got {header:?}"),
            });
        }
        let bad = |what: &str| MapError::Parse {
            line: 1,
            msg: format!("invalid {what}"),
        };
        let width: usize = fields[0].parse().map_err(|_| bad("width"))?;
        let height: usize = fields[1].parse().map_err(|_| bad("height"))?;
        let resolution: f64 = fields[2].parse().map_err(|_| bad("resolution"))?;
        let mut map = GridMap::new(width, height, resolution).map_err(|e| MapError::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        for r in 0..height {
            let (lineno, raw) = lines.next().ok_or(MapError::Parse {
                line: r + 2,
                msg: format!("expected {height} rows, found {r}"),
            })?;
            let row_text = raw.trim_end();
            if row_text.chars().count() != width {
                return Err(MapError::Parse {
                    line: lineno + 1,
                    msg: format!("expected {width} cells, found {}", row_text.chars().count()),
                });
            }
            let row = height - 1 - r;
            for (col, ch) in row_text.chars().enumerate() {
                let occupied = match ch {
                    '.' => false,
                    '#' => true,
                    other => {
                        return Err(MapError::Parse {
                            line: lineno + 1,
                            msg: format!("unexpected character {other:?}"),
                        })
                    }
                };
                map.set_occupied(Cell { col, row }, occupied);
            }
        }
        for (lineno, raw) in lines {
            if !raw.trim().is_empty() {
                return Err(MapError::Parse {
                    line: lineno + 1,
                    msg: "unexpected content after the last row".into(),
                });
            }
        }
        Ok(map)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.width, self.height, self.resolution);
        for r in 0..self.height {
            let row = self.height - 1 - r;
            for col in 0..self.width {
                out.push(if self.is_occupied(Cell { col, row }) { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

/// Parameters in (0, 1), ascending, where a segment coordinate running from
/// `p0` to `p1` crosses a multiple of `res`.
struct Crossings {
    p0: f64,
    d: f64,
    res: f64,
    k: f64,
    step: f64,
    next: Option<f64>,
}

impl Crossings {
    fn new(p0: f64, p1: f64, res: f64) -> Self {
        let d = p1 - p0;
        let (k, step) = if d > 0.0 {
            ((p0 / res).floor() + 1.0, 1.0)
        } else {
            ((p0 / res).ceil() - 1.0, -1.0)
        };
        let mut c = Self {
            p0,
            d,
            res,
            k,
            step,
            next: None,
        };
        if d != 0.0 {
            c.advance();
        }
        c
    }

    fn advance(&mut self) {
        self.next = None;
        loop {
            let t = (self.k * self.res - self.p0) / self.d;
            self.k += self.step;
            if t >= 1.0 {
                return;
            }
            if t > 0.0 {
                self.next = Some(t);
                return;
            }
        }
    }

    fn peek(&self) -> Option<f64> {
        self.next
    }

    fn next_t(&mut self) -> f64 {
        let t = self.next.expect("peeked");
        self.advance();
        t
    }
}

/// Line-of-sight obstacle length between two positions.
pub fn los_obstacle_length(a: Position, b: Position, map: &GridMap) -> Result<f64, MapError> {
    map.los_obstacle_length(a, b)
}

/// Travel time at constant `v_max` along the shortest 8-connected grid path.
///
/// Endpoints are snapped to cell centers for the search. The reported
/// distance is never shorter than the straight line between the endpoints.
pub fn astar_travel_time(a: Position, b: Position, map: &GridMap, v_max: f64) -> Result<f64, MapError> {
    if !(v_max.is_finite() && v_max > 0.0) {
        return Err(MapError::InvalidVelocity(v_max));
    }
    let from = map.free_cell(a)?;
    let to = map.free_cell(b)?;
    let grid = map
        .astar_path_length(from, to)
        .ok_or(MapError::Unreachable(a.x, a.y, b.x, b.y))?;
    Ok(grid.max(a.distance(&b)) / v_max)
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    key: f64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // min-heap on key, ties by lower index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Shared, cached shortest-path queries over one immutable map.
///
/// Distance fields are computed once per target cell and reused; the cache
/// is safe to share between threads.
#[derive(Debug)]
pub struct TravelOracle {
    map: Arc<GridMap>,
    fields: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl Clone for TravelOracle {
    fn clone(&self) -> Self {
        Self::new(self.map.clone())
    }
}

impl TravelOracle {
    pub fn new(map: Arc<GridMap>) -> Self {
        Self {
            map,
            fields: Mutex::new(HashMap::new()),
        }
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn shared_map(&self) -> Arc<GridMap> {
        self.map.clone()
    }

    fn field(&self, target: Cell) -> Arc<Vec<f64>> {
        let key = self.map.index(target);
        if let Some(f) = self.fields.lock().expect("travel cache poisoned").get(&key) {
            return f.clone();
        }
        let field = Arc::new(self.map.distance_field(target));
        self.fields
            .lock()
            .expect("travel cache poisoned")
            .entry(key)
            .or_insert(field)
            .clone()
    }

    /// Path distance in meters, or `None` when unreachable or off the free space.
    pub fn distance(&self, a: Position, b: Position) -> Option<f64> {
        let ca = self.map.free_cell(a).ok()?;
        let cb = self.map.free_cell(b).ok()?;
        if ca == cb {
            return Some(a.distance(&b));
        }
        let d = self.field(cb)[self.map.index(ca)];
        d.is_finite().then(|| d.max(a.distance(&b)))
    }

    pub fn travel_time(&self, a: Position, b: Position, v_max: f64) -> Option<f64> {
        self.distance(a, b).map(|d| d / v_max)
    }

    /// Waypoints from `a` to `b`: `a`, the centers of the intermediate cells,
    /// then `b`. Consecutive duplicates are removed.
    pub fn path(&self, a: Position, b: Position) -> Option<Vec<Position>> {
        let ca = self.map.free_cell(a).ok()?;
        let cb = self.map.free_cell(b).ok()?;
        let field = self.field(cb);
        if !field[self.map.index(ca)].is_finite() {
            return None;
        }
        let mut points = vec![a];
        let mut cur = ca;
        while cur != cb {
            let here = field[self.map.index(cur)];
            let next = self
                .map
                .neighbors(cur)
                .find(|(n, cost)| (field[self.map.index(*n)] + cost - here).abs() < 1e-9)
                .map(|(n, _)| n)?;
            cur = next;
            if cur != cb {
                points.push(self.map.center(cur));
            }
        }
        if points.last() != Some(&b) {
            points.push(b);
        }
        Some(points)
    }
}

pub fn polyline_length(points: &[Position]) -> f64 {
    points.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty(w: usize, h: usize) -> GridMap {
        GridMap::new(w, h, 1.0).unwrap()
    }

    #[test]
    fn los_empty_map_is_zero() {
        let m = empty(12, 4);
        let d = m
            .los_obstacle_length(Position::new(1.0, 1.0), Position::new(9.0, 1.0))
            .unwrap();
        assert_eq!(d, 0.0);
        let p = Position::new(3.3, 2.2);
        assert_eq!(m.los_obstacle_length(p, p).unwrap(), 0.0);
    }

    #[test]
    fn los_single_column_wall() {
        let mut m = empty(8, 3);
        m.set_occupied(Cell { col: 2, row: 0 }, true);
        let d = m
            .los_obstacle_length(Position::new(0.5, 0.5), Position::new(5.5, 0.5))
            .unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn los_out_of_bounds_is_error() {
        let m = empty(4, 4);
        assert!(matches!(
            m.los_obstacle_length(Position::new(0.5, 0.5), Position::new(4.0, 0.5)),
            Err(MapError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn travel_identity_and_straight_line() {
        let m = empty(12, 3);
        let a = Position::new(0.5, 0.5);
        assert_eq!(astar_travel_time(a, a, &m, 2.0).unwrap(), 0.0);
        let t = astar_travel_time(Position::new(0.0, 0.0), Position::new(10.0, 0.0), &m, 2.0).unwrap();
        assert!((t - 5.0).abs() < 1e-12);
    }

    #[test]
    fn travel_errors() {
        let mut m = empty(5, 5);
        for row in 0..5 {
            m.set_occupied(Cell { col: 2, row }, true);
        }
        let a = Position::new(0.5, 0.5);
        assert!(matches!(
            astar_travel_time(a, Position::new(4.5, 0.5), &m, 1.0),
            Err(MapError::Unreachable(..))
        ));
        assert!(matches!(
            astar_travel_time(a, Position::new(2.5, 0.5), &m, 1.0),
            Err(MapError::Occupied { .. })
        ));
    }

    #[test]
    fn parse_round_trip_and_orientation() {
        let text = "4 2 0.5\n#...  \n...#\n";
        let m = GridMap::parse(text).unwrap();
        assert!(m.is_occupied(Cell { col: 0, row: 1 }));
        assert!(m.is_occupied(Cell { col: 3, row: 0 }));
        assert_eq!(m.resolution(), 0.5);
        assert_eq!(GridMap::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = GridMap::parse("3 2 1\n...\n.x.\n").unwrap_err();
        assert_eq!(
            err,
            MapError::Parse {
                line: 3,
                msg: "unexpected character 'x'".into()
            }
        );
        assert!(matches!(
            GridMap::parse("3 2 1\n...\n"),
            Err(MapError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            GridMap::parse("3 1 0\n...\n"),
            Err(MapError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn oracle_path_matches_distance() {
        let mut m = empty(10, 10);
        for row in 0..8 {
            m.set_occupied(Cell { col: 5, row }, true);
        }
        let oracle = TravelOracle::new(Arc::new(m));
        let a = Position::new(1.5, 1.5);
        let b = Position::new(8.5, 1.5);
        let path = oracle.path(a, b).unwrap();
        let d = oracle.distance(a, b).unwrap();
        assert!((polyline_length(&path) - d).abs() < 1e-9);
        assert_eq!(path.first(), Some(&a));
        assert_eq!(path.last(), Some(&b));
    }
}
