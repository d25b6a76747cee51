//! Dense 2D grids over the table surface and the mapping between cells and millimetres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major grid of `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Grid { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch((rows, cols), (data.len(), 1)));
        }
        Ok(Grid { rows, cols, data })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn check_dims(&self, other: &Grid) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimMismatch(self.dims(), other.dims()));
        }
        Ok(())
    }

    /// Cell-wise product.
    pub fn hadamard(&self, other: &Grid) -> Result<Grid> {
        self.check_dims(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Grid { rows: self.rows, cols: self.cols, data })
    }

    /// Iterator over `((row, col), value)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let cols = self.cols;
        self.data.iter().enumerate().map(move |(i, &v)| ((i / cols, i % cols), v))
    }
}

/// Cell index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    pub fn distance(&self, other: Cell) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        (dr * dr + dc * dc).sqrt()
    }
}

/// Table rectangle `[0, width) x [0, height)` in mm, rasterized into `rows x cols` cells.
/// Rows run along y, columns along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width_mm: f64,
    pub height_mm: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridGeometry {
    pub fn new(width_mm: f64, height_mm: f64, rows: usize, cols: usize) -> Self {
        GridGeometry { width_mm, height_mm, rows, cols }
    }

    pub fn cell_width(&self) -> f64 {
        self.width_mm / self.cols as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.height_mm / self.rows as f64
    }

    pub fn zeros(&self) -> Grid {
        Grid::zeros(self.rows, self.cols)
    }

    pub fn on_table(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width_mm).contains(&x) && (0.0..=self.height_mm).contains(&y)
    }

    /// Cell containing a table point; points on the far edges map into the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        if !self.on_table(x, y) {
            return None;
        }
        let col = ((x / self.cell_width()).floor() as usize).min(self.cols - 1);
        let row = ((y / self.cell_height()).floor() as usize).min(self.rows - 1);
        Some(Cell { row, col })
    }

    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        (
            (cell.col as f64 + 0.5) * self.cell_width(),
            (cell.row as f64 + 0.5) * self.cell_height(),
        )
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(0.0, self.width_mm), y.clamp(0.0, self.height_mm))
    }
}
