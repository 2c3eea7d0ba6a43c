//! Occupancy grids: construction from range scans, morphological cleanup,
//! inflation for planning, and the `GRIDMAP v1` file format.

mod io;
pub mod morphology;

pub use io::{load_map, read_map, save_map, write_map, MapIoError};
pub use morphology::{morph_close_open, StructuringElement};

use thiserror::Error;

use crate::geometry::{GroundPoint, Pose2D};

pub const DEFAULT_RESOLUTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("grid dimensions {width}x{height} do not match {len} cells")]
    SizeMismatch { width: usize, height: usize, len: usize },
    #[error("grid must have at least one cell")]
    Empty,
}

/// Cell states; the discriminants are the bytes written to map files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Cell {
    Occupied = 0,
    Unknown = 205,
    Free = 254,
}

impl Cell {
    pub fn to_byte(self) -> u8 {
        self as u8
    }

    pub fn from_byte(b: u8) -> Option<Cell> {
        match b {
            0 => Some(Cell::Occupied),
            205 => Some(Cell::Unknown),
            254 => Some(Cell::Free),
            _ => None,
        }
    }
}

/// One range-sensor beam, bearing relative to the robot heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    pub bearing: f64,
    pub range: f64,
    pub max_range: f64,
}

impl Beam {
    pub fn is_hit(&self) -> bool {
        self.range < self.max_range
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Pose2D,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
}

impl OccupancyGrid {
    /// A grid with every cell `fill`.
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        fill: Cell,
    ) -> Result<Self, GridError> {
        Self::from_cells(width, height, resolution, origin, vec![fill; width * height])
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        cells: Vec<Cell>,
    ) -> Result<Self, GridError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::InvalidResolution(resolution));
        }
        if width == 0 || height == 0 {
            return Err(GridError::Empty);
        }
        if width.checked_mul(height) != Some(cells.len()) {
            return Err(GridError::SizeMismatch {
                width,
                height,
                len: cells.len(),
            });
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
            cells,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2D {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn get(&self, col: usize, row: usize) -> Cell {
        self.cells[self.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, cell: Cell) {
        let i = self.index(col, row);
        self.cells[i] = cell;
    }

    pub fn get_signed(&self, col: i64, row: i64) -> Option<Cell> {
        self.in_bounds(col, row)
            .then(|| self.get(col as usize, row as usize))
    }

    pub fn in_bounds(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    pub fn is_free(&self, col: usize, row: usize) -> bool {
        self.get(col, row) == Cell::Free
    }

    pub fn count(&self, cell: Cell) -> usize {
        self.cells.iter().filter(|c| **c == cell).count()
    }

    /// Continuous cell coordinates (cell units) of a map-frame point.
    fn to_cell_coords(&self, p: GroundPoint) -> GroundPoint {
        let local = self.origin.to_local(p);
        GroundPoint::new(local.x / self.resolution, local.y / self.resolution)
    }

    /// Signed cell index; may lie outside the grid.
    pub fn cell_of(&self, p: GroundPoint) -> (i64, i64) {
        let c = self.to_cell_coords(p);
        (c.x.floor() as i64, c.y.floor() as i64)
    }

    /// `(col, row)` of the cell containing `p`, `None` when out of bounds.
    pub fn world_to_cell(&self, p: GroundPoint) -> Option<(usize, usize)> {
        let (col, row) = self.cell_of(p);
        self.in_bounds(col, row)
            .then_some((col as usize, row as usize))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> GroundPoint {
        self.origin.transform_point(GroundPoint::new(
            (col as f64 + 0.5) * self.resolution,
            (row as f64 + 0.5) * self.resolution,
        ))
    }

    /// Cells crossed by the segment `from → to`, in traversal order.
    ///
    /// A cell is listed when the half-open segment passes through it, so a
    /// segment ending exactly on a cell boundary stops in the cell before.
    /// Indices may lie outside the grid.
    pub fn traverse(&self, from: GroundPoint, to: GroundPoint) -> Vec<(i64, i64)> {
        traverse_cells(self.to_cell_coords(from), self.to_cell_coords(to))
    }

    /// Ray-casts each beam into the grid. Cells along the beam become Free,
    /// the cell at a hit becomes Occupied. Occupied cells are never cleared.
    pub fn integrate_scan(&mut self, robot: Pose2D, scan: &[Beam]) {
        let start = robot.position();
        for beam in scan {
            if !(beam.range.is_finite() && beam.range >= 0.0) {
                continue;
            }
            let dir = robot.theta() + beam.bearing;
            let end = start + GroundPoint::new(dir.cos(), dir.sin()) * beam.range;
            let cells = self.traverse(start, end);
            let last = cells.len().saturating_sub(1);
            for (k, (col, row)) in cells.into_iter().enumerate() {
                if !self.in_bounds(col, row) {
                    continue;
                }
                let (col, row) = (col as usize, row as usize);
                if k == last && beam.is_hit() {
                    self.set(col, row, Cell::Occupied);
                } else if self.get(col, row) != Cell::Occupied {
                    self.set(col, row, Cell::Free);
                }
            }
        }
    }

    /// Copy where every Free cell within `radius` (centre to centre) of an
    /// Occupied cell is Occupied.
    pub fn inflate(&self, radius: f64) -> OccupancyGrid {
        let mut out = self.clone();
        if radius <= 0.0 {
            return out;
        }
        let reach = (radius / self.resolution + 1e-9).floor() as i64;
        let limit = radius * radius + 1e-9;
        let offsets: Vec<(i64, i64)> = (-reach..=reach)
            .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
            .filter(|(dx, dy)| {
                let (ex, ey) = (*dx as f64 * self.resolution, *dy as f64 * self.resolution);
                ex * ex + ey * ey <= limit
            })
            .collect();
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(col, row) != Cell::Occupied {
                    continue;
                }
                for (dx, dy) in &offsets {
                    let (c, r) = (col as i64 + dx, row as i64 + dy);
                    if self.get_signed(c, r) == Some(Cell::Free) {
                        out.set(c as usize, r as usize, Cell::Occupied);
                    }
                }
            }
        }
        out
    }

    /// True when every cell strictly between the two points' cells is Free.
    pub fn line_of_sight(&self, from: GroundPoint, to: GroundPoint) -> bool {
        let target = self.cell_of(to);
        self.traverse(from, to)
            .into_iter()
            .filter(|c| *c != target)
            .all(|(c, r)| self.get_signed(c, r) == Some(Cell::Free))
    }
}

/// Amanatides–Woo traversal in continuous cell coordinates.
fn traverse_cells(s: GroundPoint, e: GroundPoint) -> Vec<(i64, i64)> {
    let mut cx = s.x.floor() as i64;
    let mut cy = s.y.floor() as i64;
    let (dx, dy) = (e.x - s.x, e.y - s.y);
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    // Next boundary crossing as a segment parameter, computed from the
    // boundary index each time so long rays do not accumulate error.
    let t_at = |boundary: i64, start: f64, d: f64| -> f64 {
        if d == 0.0 {
            f64::INFINITY
        } else {
            (boundary as f64 - start) / d
        }
    };
    let next_bx = |c: i64| if dx > 0.0 { c + 1 } else { c };
    let next_by = |c: i64| if dy > 0.0 { c + 1 } else { c };
    let mut cells = vec![(cx, cy)];
    loop {
        let tx = t_at(next_bx(cx), s.x, dx);
        let ty = t_at(next_by(cy), s.y, dy);
        if tx.min(ty) >= 1.0 {
            break;
        }
        if tx < ty {
            cx += step_x;
        } else {
            cy += step_y;
        }
        cells.push((cx, cy));
        if cells.len() > 10_000_000 {
            break;
        }
    }
    cells
}
