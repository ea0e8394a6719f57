//! Discretized 2D world: grid geometry, random quadrilateral obstacle
//! layouts and their rasterization into occupancy grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::grid::{Grid, OccupancyGrid};

/// Subsamples per cell side used to approximate the half-coverage rule.
const SUBSAMPLES: usize = 4;
/// A cell is occupied when at least this many of its 16 subsamples are covered.
const OCCUPIED_SUBSAMPLES: u32 = 8;
/// Candidate polygons drawn per obstacle before giving up.
const MAX_ATTEMPTS_PER_OBSTACLE: usize = 10_000;

/// Rectangular area `[0, length] x [0, width]` split into `n_rows x n_cols`
/// cells. Row index runs along the length (x), column index along the width (y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub length_m: f64,
    pub width_m: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub bs_position: Point,
}

impl GridSpec {
    /// Grid with the base station at the area center.
    pub fn new(length_m: f64, width_m: f64, n_rows: usize, n_cols: usize) -> Result<Self> {
        let spec = GridSpec {
            length_m,
            width_m,
            n_rows,
            n_cols,
            bs_position: Point::new(length_m / 2.0, width_m / 2.0),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 100 m x 100 m area on a 64 x 64 grid.
    pub fn standard() -> Self {
        GridSpec::new(100.0, 100.0, 64, 64).expect("static grid is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0 && self.width_m > 0.0) {
            return Err(Error::Config(format!(
                "area must have positive extent, got {} x {}",
                self.length_m, self.width_m
            )));
        }
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::Config("grid needs at least one row and column".into()));
        }
        let bs = self.bs_position;
        if !(0.0..=self.length_m).contains(&bs.x) || !(0.0..=self.width_m).contains(&bs.y) {
            return Err(Error::Config(format!(
                "base station ({}, {}) outside the area",
                bs.x, bs.y
            )));
        }
        Ok(())
    }

    /// Cell extent `(dx, dy)` in meters.
    pub fn cell_size(&self) -> (f64, f64) {
        (
            self.length_m / self.n_rows as f64,
            self.width_m / self.n_cols as f64,
        )
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    /// Metric center of cell `(row, col)`; indices are zero-based.
    pub fn cell_center(&self, row: usize, col: usize) -> Result<Point> {
        if row >= self.n_rows || col >= self.n_cols {
            return Err(Error::Index {
                row,
                col,
                rows: self.n_rows,
                cols: self.n_cols,
            });
        }
        Ok(self.center_unchecked(row, col))
    }

    #[inline]
    pub(crate) fn center_unchecked(&self, row: usize, col: usize) -> Point {
        let (dx, dy) = self.cell_size();
        Point::new((row as f64 + 0.5) * dx, (col as f64 + 0.5) * dy)
    }

    /// Cell containing `p`. Points on an interior boundary belong to the
    /// cell with the larger index; the far edges belong to the last cell.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        if !(0.0..=self.length_m).contains(&p.x) || !(0.0..=self.width_m).contains(&p.y) {
            return None;
        }
        let (dx, dy) = self.cell_size();
        let r = ((p.x / dx).floor() as usize).min(self.n_rows - 1);
        let c = ((p.y / dy).floor() as usize).min(self.n_cols - 1);
        Some((r, c))
    }

    /// The cell hosting the base station.
    pub fn bs_cell(&self) -> (usize, usize) {
        self.cell_of(self.bs_position)
            .expect("validated base station lies inside the area")
    }

    /// The 4x4 regular subsample points of a cell.
    fn subsample_points(&self, row: usize, col: usize) -> impl Iterator<Item = Point> {
        let (dx, dy) = self.cell_size();
        (0..SUBSAMPLES * SUBSAMPLES).map(move |k| {
            let (a, b) = (k / SUBSAMPLES, k % SUBSAMPLES);
            Point::new(
                (row as f64 + (a as f64 + 0.5) / SUBSAMPLES as f64) * dx,
                (col as f64 + (b as f64 + 0.5) / SUBSAMPLES as f64) * dy,
            )
        })
    }
}

/// Four-vertex obstacle outline in meters.
pub type Quad = [Point; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleLayout {
    pub seed: u64,
    pub polygons: Vec<Quad>,
}

impl ObstacleLayout {
    pub fn empty(seed: u64) -> Self {
        ObstacleLayout {
            seed,
            polygons: Vec::new(),
        }
    }

    /// Checks simplicity, positive area and base-station clearance.
    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        for (i, q) in self.polygons.iter().enumerate() {
            if !quad_is_valid(q) {
                return Err(Error::domain(format!("polygon {i} is degenerate or self-intersecting")));
            }
            if geometry::contains_point(q, spec.bs_position) {
                return Err(Error::domain(format!("polygon {i} covers the base station")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn quad_is_valid(q: &Quad) -> bool {
    geometry::is_simple(q) && geometry::signed_area(q).abs() > 1e-9
}

/// Draws `n_obstacles` irregular quadrilaterals.
///
/// Each candidate is a rectangle centered uniformly in the area with sides
/// drawn from `size_bounds`, whose corners are then jittered by up to 25% of
/// the corresponding side. Candidates that self-intersect, are degenerate, or
/// touch the base-station cell are redrawn.
pub fn generate_layout(
    spec: &GridSpec,
    n_obstacles: usize,
    size_bounds: (f64, f64),
    seed: u64,
) -> Result<ObstacleLayout> {
    spec.validate()?;
    let (min_side, max_side) = size_bounds;
    let limit = spec.length_m.min(spec.width_m) / 2.0;
    if !(min_side > 0.0 && min_side <= max_side && max_side <= limit) {
        return Err(Error::argument(format!(
            "size bounds ({min_side}, {max_side}) must satisfy 0 < min <= max <= {limit}"
        )));
    }

    let (bs_row, bs_col) = spec.bs_cell();
    let mut protected: Vec<Point> = spec.subsample_points(bs_row, bs_col).collect();
    protected.push(spec.bs_position);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut polygons = Vec::with_capacity(n_obstacles);
    for idx in 0..n_obstacles {
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS_PER_OBSTACLE {
            let q = draw_quad(&mut rng, spec, min_side, max_side);
            if quad_is_valid(&q) && !protected.iter().any(|&p| geometry::contains_point(&q, p)) {
                accepted = Some(q);
                break;
            }
        }
        match accepted {
            Some(q) => polygons.push(q),
            None => {
                return Err(Error::Generation(format!(
                    "no valid placement for obstacle {idx} after {MAX_ATTEMPTS_PER_OBSTACLE} attempts"
                )))
            }
        }
    }
    Ok(ObstacleLayout { seed, polygons })
}

fn draw_quad(rng: &mut ChaCha8Rng, spec: &GridSpec, min_side: f64, max_side: f64) -> Quad {
    let center = Point::new(
        rng.gen_range(0.0..=spec.length_m),
        rng.gen_range(0.0..=spec.width_m),
    );
    let a = rng.gen_range(min_side..=max_side);
    let b = rng.gen_range(min_side..=max_side);
    let corners = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
    corners.map(|(sx, sy)| {
        let jx = rng.gen_range(-0.25..=0.25) * a;
        let jy = rng.gen_range(-0.25..=0.25) * b;
        Point::new(center.x + sx * a + jx, center.y + sy * b + jy)
    })
}

/// Rasterizes the union of the layout's polygons.
///
/// A cell is marked occupied when at least 8 of its 16 regular subsample
/// points fall inside some polygon, which approximates the at-least-half
/// coverage rule without exact polygon clipping.
pub fn rasterize(layout: &ObstacleLayout, spec: &GridSpec) -> OccupancyGrid {
    let (dx, dy) = spec.cell_size();
    let mut covered: Grid<u16> = Grid::filled(spec.n_rows, spec.n_cols, 0);
    for q in &layout.polygons {
        let (lo, hi) = geometry::bounding_box(q);
        let r0 = ((lo.x / dx).floor().max(0.0) as usize).min(spec.n_rows);
        let r1 = ((hi.x / dx).ceil().max(0.0) as usize).min(spec.n_rows);
        let c0 = ((lo.y / dy).floor().max(0.0) as usize).min(spec.n_cols);
        let c1 = ((hi.y / dy).ceil().max(0.0) as usize).min(spec.n_cols);
        for r in r0..r1 {
            for c in c0..c1 {
                let mut bits = 0u16;
                for (k, p) in spec.subsample_points(r, c).enumerate() {
                    if geometry::contains_point(q, p) {
                        bits |= 1 << k;
                    }
                }
                *covered.get_mut(r, c) |= bits;
            }
        }
    }
    covered.map(|&bits| u8::from(bits.count_ones() >= OCCUPIED_SUBSAMPLES))
}

/// Serializes an occupancy grid as text: a `rows cols` header followed by
/// one line of space-separated 0/1 values per row.
pub fn occupancy_to_ascii(grid: &OccupancyGrid) -> String {
    let mut out = format!("{} {}\n", grid.rows(), grid.cols());
    for r in 0..grid.rows() {
        let line: Vec<&str> = (0..grid.cols())
            .map(|c| if grid.is_set(r, c) { "1" } else { "0" })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn occupancy_from_ascii(text: &str) -> Result<OccupancyGrid> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::domain("empty occupancy file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::domain(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::domain(format!("header must be `rows cols`, got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::shape(format!("expected {rows} rows, found {r}")))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            match tok {
                "0" => data.push(0u8),
                "1" => data.push(1u8),
                other => return Err(Error::domain(format!("row {r}: non-binary value {other:?}"))),
            }
        }
        if data.len() - before != cols {
            return Err(Error::shape(format!(
                "row {r} has {} values, expected {cols}",
                data.len() - before
            )));
        }
    }
    if lines.next().is_some() {
        return Err(Error::shape(format!("more than {rows} rows")));
    }
    Grid::from_vec(rows, cols, data)
}

/// Scenario families used for training and validation sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioClass {
    /// 1 to 5 obstacles; training scenes.
    S1,
    /// 6 obstacles; validation scenes.
    S2,
    /// 8 obstacles; single dense validation scene.
    S3,
}

impl ScenarioClass {
    pub fn obstacle_counts(self) -> &'static [usize] {
        match self {
            ScenarioClass::S1 => &[1, 2, 3, 4, 5],
            ScenarioClass::S2 => &[6],
            ScenarioClass::S3 => &[8],
        }
    }

    /// Default number of scenes in the class.
    pub fn default_size(self) -> usize {
        match self {
            ScenarioClass::S1 => 250,
            ScenarioClass::S2 => 50,
            ScenarioClass::S3 => 1,
        }
    }

    pub fn all() -> [ScenarioClass; 3] {
        [ScenarioClass::S1, ScenarioClass::S2, ScenarioClass::S3]
    }
}
