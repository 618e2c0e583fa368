//! Planar geometry on the workspace grid.

use serde::{Deserialize, Serialize};

/// Pitch of the workspace sampling grid (metres). Percept points, masks and
/// height maps all live on this grid.
pub const CELL_PITCH: f64 = 0.005;

const EPS: f64 = 1e-9;

/// Index of a grid cell in the workspace frame.
pub type Cell = (i32, i32);

pub fn cell_of(x: f64, y: f64) -> Cell {
    (
        (x / CELL_PITCH).floor() as i32,
        (y / CELL_PITCH).floor() as i32,
    )
}

pub fn cell_center(cell: Cell) -> (f64, f64) {
    (
        (f64::from(cell.0) + 0.5) * CELL_PITCH,
        (f64::from(cell.1) + 0.5) * CELL_PITCH,
    )
}

/// Dense values over a rectangular block of cells. Lookups outside the
/// block return `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGrid<T> {
    origin: Cell,
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Clone> CellGrid<T> {
    /// Smallest block containing every cell of `cells`, filled with `fill`.
    pub fn covering(cells: &[Cell], fill: T) -> Self {
        let (mut lo, mut hi) = ((i32::MAX, i32::MAX), (i32::MIN, i32::MIN));
        for &(x, y) in cells {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        if lo.0 > hi.0 {
            return Self { origin: (0, 0), rows: 0, cols: 0, values: Vec::new() };
        }
        let rows = (hi.0 - lo.0 + 1) as usize;
        let cols = (hi.1 - lo.1 + 1) as usize;
        Self { origin: lo, rows, cols, values: vec![fill; rows * cols] }
    }

    /// Same block as `self`, filled with `fill`.
    pub fn like<U>(other: &CellGrid<U>, fill: T) -> Self {
        Self {
            origin: other.origin,
            rows: other.rows,
            cols: other.cols,
            values: vec![fill; other.rows * other.cols],
        }
    }
}

impl<T> CellGrid<T> {
    fn index(&self, (x, y): Cell) -> Option<usize> {
        let dx = usize::try_from(x - self.origin.0).ok()?;
        let dy = usize::try_from(y - self.origin.1).ok()?;
        (dx < self.rows && dy < self.cols).then_some(dx * self.cols + dy)
    }

    pub fn get(&self, cell: Cell) -> Option<&T> {
        self.index(cell).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, cell: Cell) -> Option<&mut T> {
        let i = self.index(cell)?;
        Some(&mut self.values[i])
    }

    /// Every cell of the block in ascending `(x, y)` order.
    pub fn iter(&self) -> impl Iterator<Item = (Cell, &T)> + '_ {
        let (ox, oy, cols) = (self.origin.0, self.origin.1, self.cols.max(1));
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| ((ox + (i / cols) as i32, oy + (i % cols) as i32), v))
    }
}

/// Position plus yaw, workspace frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: [f64; 3], yaw: f64) -> Self {
        Self { position, yaw }
    }
}

/// Axis-aligned rectangle in the horizontal plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn centered(center: [f64; 2], size: [f64; 2]) -> Self {
        Self {
            min: [center[0] - size[0] / 2.0, center[1] - size[1] / 2.0],
            max: [center[0] + size[0] / 2.0, center[1] + size[1] / 2.0],
        }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn depth(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.depth()
    }

    pub fn center(&self) -> [f64; 2] {
        [
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
        ]
    }

    /// True when the overlap has positive area; touching edges do not count.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min[0] < other.max[0] - EPS
            && other.min[0] < self.max[0] - EPS
            && self.min[1] < other.max[1] - EPS
            && other.min[1] < self.max[1] - EPS
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.min[0] >= self.min[0] - EPS
            && other.min[1] >= self.min[1] - EPS
            && other.max[0] <= self.max[0] + EPS
            && other.max[1] <= self.max[1] + EPS
    }

    /// Distance from an interior point to the nearest edge.
    pub fn edge_distance(&self, x: f64, y: f64) -> f64 {
        (x - self.min[0])
            .min(self.max[0] - x)
            .min(y - self.min[1])
            .min(self.max[1] - y)
    }

    /// Outward unit normal (in the plane) of the edge nearest to `(x, y)`.
    pub fn nearest_edge_normal(&self, x: f64, y: f64) -> [f64; 2] {
        let candidates = [
            (x - self.min[0], [-1.0, 0.0]),
            (self.max[0] - x, [1.0, 0.0]),
            (y - self.min[1], [0.0, -1.0]),
            (self.max[1] - y, [0.0, 1.0]),
        ];
        let mut best = candidates[0];
        for c in &candidates[1..] {
            if c.0 < best.0 {
                best = *c;
            }
        }
        best.1
    }

    /// Grid cells whose centres fall inside the rectangle.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let (x0, y0) = cell_of(self.min[0], self.min[1]);
        let (x1, y1) = cell_of(self.max[0], self.max[1]);
        (x0..=x1).flat_map(move |ix| {
            (y0..=y1).filter_map(move |iy| {
                let (cx, cy) = cell_center((ix, iy));
                if cx > self.min[0] && cx < self.max[0] && cy > self.min[1] && cy < self.max[1] {
                    Some((ix, iy))
                } else {
                    None
                }
            })
        })
    }
}

/// Footprint size of a box with horizontal extent `size` rotated by `yaw`,
/// snapped to the nearest quarter turn.
pub fn oriented_extent(size: [f64; 2], yaw: f64) -> [f64; 2] {
    let quarter = (yaw / std::f64::consts::FRAC_PI_2).round() as i64;
    if quarter.rem_euclid(2) == 1 {
        [size[1], size[0]]
    } else {
        size
    }
}
