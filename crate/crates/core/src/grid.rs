//! Dense row-major containers shared by every module.
//!
//! `Grid<T>` holds one value per cell of an `rows x cols` partition of the
//! area; `Tensor3` adds a trailing direction axis, stored with the direction
//! index varying fastest (axis order row, col, direction).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Binary matrix with entries in {0, 1}. Used for occupancy, sensing
/// estimates and sensor masks.
pub type BinaryMap = Grid<u8>;

/// Occupancy matrix: 1 where a cell is at least half covered by an obstacle.
pub type OccupancyGrid = Grid<u8>;

/// Soft-vote output: 0 means free, positive values are occupancy confidence.
pub type ConfidenceMap = Grid<f64>;

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Grid {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values for a {rows}x{cols} grid",
                data.len()
            )));
        }
        Ok(Grid { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Grid { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.cols + col]
    }

    #[inline]
    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut T {
        &mut self.data[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Errors unless `other` has the same dimensions.
    pub fn check_shape<U>(&self, other: &Grid<U>, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }
}

impl Grid<u8> {
    /// Number of cells equal to 1.
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    #[inline]
    pub fn is_set(&self, row: usize, col: usize) -> bool {
        *self.get(row, col) != 0
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v <= 1)
    }
}

/// Dense `rows x cols x dirs` tensor of `f64`, direction axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    rows: usize,
    cols: usize,
    dirs: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn filled(rows: usize, cols: usize, dirs: usize, value: f64) -> Self {
        Tensor3 {
            rows,
            cols,
            dirs,
            data: vec![value; rows * cols * dirs],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, dirs: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols * dirs {
            return Err(Error::shape(format!(
                "{} values for a {rows}x{cols}x{dirs} tensor",
                data.len()
            )));
        }
        Ok(Tensor3 {
            rows,
            cols,
            dirs,
            data,
        })
    }

    /// Stacks per-direction slices (all of equal shape) along the last axis.
    pub fn stack(slices: &[Grid<f64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::argument("cannot stack zero slices"))?;
        let (rows, cols, dirs) = (first.rows(), first.cols(), slices.len());
        let mut data = vec![0.0; rows * cols * dirs];
        for (d, s) in slices.iter().enumerate() {
            first.check_shape(s, "stacked slice")?;
            for (cell, &v) in s.as_slice().iter().enumerate() {
                data[cell * dirs + d] = v;
            }
        }
        Ok(Tensor3 {
            rows,
            cols,
            dirs,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dirs(&self) -> usize {
        self.dirs
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.dirs)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, dir: usize) -> f64 {
        self.data[(row * self.cols + col) * self.dirs + dir]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, dir: usize, value: f64) {
        self.data[(row * self.cols + col) * self.dirs + dir] = value;
    }

    /// All directional values of one cell.
    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.cols + col) * self.dirs;
        &self.data[start..start + self.dirs]
    }

    /// Copies out the `dir`-th directional slice.
    pub fn slice(&self, dir: usize) -> Grid<f64> {
        Grid::from_fn(self.rows, self.cols, |r, c| self.get(r, c, dir))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl FnMut(&f64) -> f64) -> Tensor3 {
        Tensor3 {
            rows: self.rows,
            cols: self.cols,
            dirs: self.dirs,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn check_shape(&self, other: &Tensor3, what: &str) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    /// Errors unless the spatial dimensions match `grid`.
    pub fn check_grid<T>(&self, grid: &Grid<T>, what: &str) -> Result<()> {
        if self.rows == grid.rows() && self.cols == grid.cols() {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: tensor {}x{} vs grid {}x{}",
                self.rows,
                self.cols,
                grid.rows(),
                grid.cols()
            )))
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stack_then_slice_recovers_each_direction() {
        let a = Grid::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        let b = a.map(|v| v * 10.0);
        let t = Tensor3::stack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(t.shape(), (2, 3, 2));
        assert_eq!(t.slice(0), a);
        assert_eq!(t.slice(1), b);
        assert_eq!(t.cell(1, 2), &[5.0, 50.0]);
    }

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Grid::<u8>::from_vec(2, 2, vec![0; 3]).is_err());
        assert!(Tensor3::from_vec(2, 2, 2, vec![0.0; 7]).is_err());
    }

    #[test]
    fn stack_rejects_mixed_shapes() {
        let a = Grid::filled(2, 2, 0.0);
        let b = Grid::filled(2, 3, 0.0);
        assert!(matches!(Tensor3::stack(&[a, b]), Err(Error::Shape(_))));
    }
}
