//! Sparse sensor deployment and masked measurements.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryMap, Grid, OccupancyGrid, Tensor3};
use crate::scenario::GridSpec;

/// Cells carrying a receiver. Exactly `k` entries are 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorMask {
    cells: BinaryMap,
    k: usize,
}

impl SensorMask {
    pub fn from_cells(cells: BinaryMap) -> Result<Self> {
        if !cells.is_binary() {
            return Err(Error::domain("sensor mask must be binary"));
        }
        let k = cells.count_ones();
        Ok(SensorMask { cells, k })
    }

    pub fn cells(&self) -> &BinaryMap {
        &self.cells
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Sensor coordinates in row-major order.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let cols = self.cells.cols();
        self.cells
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| (i / cols, i % cols))
            .collect()
    }

    pub fn into_cells(self) -> BinaryMap {
        self.cells
    }
}

/// Where receivers may be placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorPlacement {
    /// Uniform over every cell of the grid.
    #[default]
    AnyCell,
    /// Uniform over cells not covered by an obstacle.
    FreeCellsOnly,
}

fn sensor_count(n_cells: usize, rate: f64) -> Result<usize> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::domain(format!("sampling rate {rate} outside (0, 1)")));
    }
    Ok((rate * n_cells as f64).floor() as usize)
}

/// Chooses `floor(rate * N_L * N_W)` distinct cells uniformly at random.
pub fn sample_mask(spec: &GridSpec, sampling_rate: f64, seed: u64) -> Result<SensorMask> {
    let n = spec.n_cells();
    let k = sensor_count(n, sampling_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Grid::filled(spec.n_rows, spec.n_cols, 0u8);
    for i in index::sample(&mut rng, n, k) {
        cells.as_mut_slice()[i] = 1;
    }
    Ok(SensorMask { cells, k })
}

/// Like [`sample_mask`] but restricted to unoccupied cells. `K` is still
/// `floor(rate * N_L * N_W)`; it is an error if fewer free cells exist.
pub fn sample_free_mask(
    spec: &GridSpec,
    occupancy: &OccupancyGrid,
    sampling_rate: f64,
    seed: u64,
) -> Result<SensorMask> {
    if occupancy.rows() != spec.n_rows || occupancy.cols() != spec.n_cols {
        return Err(Error::shape("occupancy does not match the grid"));
    }
    let k = sensor_count(spec.n_cells(), sampling_rate)?;
    let free: Vec<usize> = occupancy
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == 0)
        .map(|(i, _)| i)
        .collect();
    if free.len() < k {
        return Err(Error::argument(format!(
            "{k} sensors requested but only {} free cells",
            free.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Grid::filled(spec.n_rows, spec.n_cols, 0u8);
    for i in index::sample(&mut rng, free.len(), k) {
        cells.as_mut_slice()[free[i]] = 1;
    }
    Ok(SensorMask { cells, k })
}

pub fn sample_with_placement(
    spec: &GridSpec,
    occupancy: &OccupancyGrid,
    placement: SensorPlacement,
    sampling_rate: f64,
    seed: u64,
) -> Result<SensorMask> {
    match placement {
        SensorPlacement::AnyCell => sample_mask(spec, sampling_rate, seed),
        SensorPlacement::FreeCellsOnly => sample_free_mask(spec, occupancy, sampling_rate, seed),
    }
}

/// A tensor observed only at sensor cells; zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMeasurements {
    pub values: Tensor3,
    pub mask: SensorMask,
}

/// Elementwise product with the mask replicated along the direction axis.
pub fn apply_mask(tensor: &Tensor3, mask: &SensorMask) -> Result<SparseMeasurements> {
    tensor.check_grid(mask.cells(), "apply_mask")?;
    let dirs = tensor.dirs();
    let mut values = tensor.clone();
    for (cell, chunk) in values.as_mut_slice().chunks_mut(dirs).enumerate() {
        if mask.cells().as_slice()[cell] == 0 {
            chunk.fill(0.0);
        }
    }
    Ok(SparseMeasurements {
        values,
        mask: mask.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_rate_on_table_grid() {
        let mask = sample_mask(&GridSpec::standard(), 0.5, 11).unwrap();
        assert_eq!(mask.k(), 2048);
        assert_eq!(mask.cells().count_ones(), 2048);
    }

    #[test]
    fn tiny_rate_gives_one_sensor() {
        let mask = sample_mask(&GridSpec::standard(), 1.0 / 4096.0, 3).unwrap();
        assert_eq!(mask.k(), 1);
        assert_eq!(mask.positions().len(), 1);
    }

    #[test]
    fn same_seed_same_mask() {
        let spec = GridSpec::standard();
        assert_eq!(sample_mask(&spec, 0.3, 5).unwrap(), sample_mask(&spec, 0.3, 5).unwrap());
        assert_ne!(sample_mask(&spec, 0.3, 5).unwrap(), sample_mask(&spec, 0.3, 6).unwrap());
    }

    #[test]
    fn rate_bounds_are_enforced() {
        let spec = GridSpec::standard();
        for rate in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(sample_mask(&spec, rate, 1), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn free_cell_mask_avoids_obstacles() {
        let spec = GridSpec::new(10.0, 10.0, 8, 8).unwrap();
        let occ = Grid::from_fn(8, 8, |r, _| u8::from(r < 4));
        let mask = sample_free_mask(&spec, &occ, 0.4, 2).unwrap();
        assert_eq!(mask.k(), 25);
        assert!(mask.positions().iter().all(|&(r, _)| r >= 4));
        assert!(sample_free_mask(&spec, &occ, 0.6, 2).is_err());
    }

    #[test]
    fn masking_semantics() {
        let t = Tensor3::from_vec(2, 2, 2, (1..=8).map(f64::from).collect()).unwrap();
        let full = SensorMask::from_cells(Grid::filled(2, 2, 1)).unwrap();
        assert_eq!(apply_mask(&t, &full).unwrap().values, t);

        let m = SensorMask::from_cells(Grid::from_vec(2, 2, vec![1, 0, 0, 1]).unwrap()).unwrap();
        let once = apply_mask(&t, &m).unwrap();
        assert_eq!(once.values.as_slice(), &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 7.0, 8.0]);
        let twice = apply_mask(&once.values, &m).unwrap();
        assert_eq!(twice.values, once.values);

        let wrong = SensorMask::from_cells(Grid::filled(3, 2, 1)).unwrap();
        assert!(matches!(apply_mask(&t, &wrong), Err(Error::Shape(_))));
    }
}
