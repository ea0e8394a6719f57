//! Directional THz radio maps over an occupancy grid.
//!
//! For every beam direction the received power of an unoccupied cell is
//! `P_T * gain + noise`, where `gain` sums a line-of-sight path (cell center
//! inside the beam sector and the straight segment free of occupied cells)
//! and single-bounce specular reflections off exposed, axis-aligned faces of
//! occupied cells. Each path's gain is free-space (Friis) loss times
//! molecular absorption `exp(-k_a * d)`; reflected paths additionally pay a
//! fixed reflection loss. Occupied cells receive the noise floor only.
//!
//! The beam pattern is an ideal flat-top sector. Reflecting faces are found
//! by casting `rays_per_beam` rays across the sector through the grid; every
//! face a ray hits first is then treated exactly with an image source.
//! Diffraction is not modeled.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::ops::Deref;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point};
use crate::grid::{Grid, OccupancyGrid, Tensor3};
use crate::scenario::GridSpec;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Relative tolerance for angular sector edges.
const SECTOR_EPS: f64 = 1e-9;
/// Parametric nudge used when a traversal starts or ends on a cell boundary.
const EDGE_EPS: f64 = 1e-9;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Friis free-space path loss in dB at distance `d` meters.
pub fn free_space_loss_db(distance_m: f64, carrier_hz: f64) -> f64 {
    20.0 * (4.0 * PI * distance_m * carrier_hz / SPEED_OF_LIGHT).log10()
}

/// Evenly spaced beam directions `d * angular_sep` for `d = 1..=n_beams`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSet {
    pub n_beams: usize,
    pub angular_sep_rad: f64,
    pub beamwidth_rad: f64,
}

impl BeamSet {
    pub fn new(n_beams: usize, angular_sep_rad: f64, beamwidth_rad: f64) -> Result<Self> {
        let beams = BeamSet {
            n_beams,
            angular_sep_rad,
            beamwidth_rad,
        };
        beams.validate()?;
        Ok(beams)
    }

    pub fn from_degrees(n_beams: usize, angular_sep_deg: f64, beamwidth_deg: f64) -> Result<Self> {
        BeamSet::new(n_beams, angular_sep_deg.to_radians(), beamwidth_deg.to_radians())
    }

    /// 18 beams, 20 degree separation, 20 degree beamwidth.
    pub fn standard() -> Self {
        BeamSet::from_degrees(18, 20.0, 20.0).expect("static beam set is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_beams == 0 {
            return Err(Error::Config("at least one beam is required".into()));
        }
        if !(self.beamwidth_rad > 0.0 && self.beamwidth_rad <= 2.0 * PI + 1e-12) {
            return Err(Error::Config(format!(
                "beamwidth {} rad outside (0, 2pi]",
                self.beamwidth_rad
            )));
        }
        if !(self.angular_sep_rad > 0.0)
            || self.n_beams as f64 * self.angular_sep_rad > 2.0 * PI + 1e-9
        {
            return Err(Error::Config(format!(
                "{} beams at {} rad separation exceed a full turn",
                self.n_beams, self.angular_sep_rad
            )));
        }
        Ok(())
    }

    pub fn directions(&self) -> Vec<f64> {
        (1..=self.n_beams)
            .map(|d| d as f64 * self.angular_sep_rad)
            .collect()
    }

    /// Whether bearing `angle` lies inside the sector centered on `direction`.
    pub fn in_sector(&self, direction: f64, angle: f64) -> bool {
        wrap_angle(angle - direction).abs() <= self.beamwidth_rad / 2.0 * (1.0 + SECTOR_EPS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    pub carrier_hz: f64,
    /// Molecular absorption coefficient in 1/m (power domain).
    pub absorption_per_m: f64,
    pub reflection_loss_db: f64,
    pub rays_per_beam: usize,
    /// Only single-interaction paths are supported.
    pub max_interactions: u32,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            tx_power_dbm: 30.0,
            noise_floor_dbm: -90.0,
            carrier_hz: 300e9,
            absorption_per_m: 0.0033,
            reflection_loss_db: 10.0,
            rays_per_beam: 80,
            max_interactions: 1,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self, beams: &BeamSet) -> Result<()> {
        if !(self.tx_power_dbm > self.noise_floor_dbm) {
            return Err(Error::Config(
                "transmit power must exceed the noise floor".into(),
            ));
        }
        if !(self.absorption_per_m >= 0.0) {
            return Err(Error::Config("absorption coefficient must be >= 0".into()));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Config("carrier frequency must be positive".into()));
        }
        if !(self.reflection_loss_db >= 0.0) {
            return Err(Error::Config("reflection loss must be >= 0 dB".into()));
        }
        if (self.rays_per_beam as f64) < beams.beamwidth_rad.to_degrees().floor() {
            return Err(Error::Config(format!(
                "rays_per_beam {} is below the beamwidth in degrees",
                self.rays_per_beam
            )));
        }
        if self.max_interactions != 1 {
            return Err(Error::Config(
                "only single-interaction paths are supported (max_interactions = 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_floor_dbm)
    }

    pub fn tx_mw(&self) -> f64 {
        dbm_to_mw(self.tx_power_dbm)
    }

    /// Linear power gain of a path of length `d`: Friis times absorption.
    pub fn path_gain(&self, distance_m: f64) -> f64 {
        let friis = SPEED_OF_LIGHT / (4.0 * PI * distance_m * self.carrier_hz);
        friis * friis * (-self.absorption_per_m * distance_m).exp()
    }

    fn reflection_factor(&self) -> f64 {
        dbm_to_mw(-self.reflection_loss_db)
    }
}

/// Received power in mW per cell and beam direction.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap(pub Tensor3);

impl Deref for RadioMap {
    type Target = Tensor3;
    fn deref(&self) -> &Tensor3 {
        &self.0
    }
}

/// Preprocessed radio map: occupied cells are exactly 1, free cells lie in
/// `[psi_min, psi_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledRadioMap(pub Tensor3);

impl Deref for ScaledRadioMap {
    type Target = Tensor3;
    fn deref(&self) -> &Tensor3 {
        &self.0
    }
}

fn check_scene(occupancy: &OccupancyGrid, spec: &GridSpec) -> Result<()> {
    spec.validate()?;
    if occupancy.rows() != spec.n_rows || occupancy.cols() != spec.n_cols {
        return Err(Error::shape(format!(
            "occupancy {}x{} vs grid {}x{}",
            occupancy.rows(),
            occupancy.cols(),
            spec.n_rows,
            spec.n_cols
        )));
    }
    let (r, c) = spec.bs_cell();
    if occupancy.is_set(r, c) {
        return Err(Error::domain("the base-station cell is occupied"));
    }
    Ok(())
}

/// Which side of an occupied cell a face lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Side {
    XMinus,
    XPlus,
    YMinus,
    YPlus,
}

/// An exposed face of an occupied cell, keyed by cell and side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct FaceKey {
    row: usize,
    col: usize,
    side: Side,
}

/// Result of casting a ray until it meets an occupied cell.
enum RayHit {
    Face(FaceKey),
    /// Entered an occupied cell exactly through a corner, or left the grid.
    None,
}

/// Precomputed per-scene geometry shared by all beam directions.
struct Tracer<'a> {
    occ: &'a OccupancyGrid,
    spec: &'a GridSpec,
    cfg: &'a RadioConfig,
    beams: &'a BeamSet,
    dx: f64,
    dy: f64,
    min_path: f64,
    /// Line-of-sight visibility from the base station to each cell center.
    visible: Grid<bool>,
    bearing: Grid<f64>,
    distance: Grid<f64>,
}

impl<'a> Tracer<'a> {
    fn new(
        occ: &'a OccupancyGrid,
        spec: &'a GridSpec,
        beams: &'a BeamSet,
        cfg: &'a RadioConfig,
    ) -> Result<Self> {
        check_scene(occ, spec)?;
        beams.validate()?;
        cfg.validate(beams)?;
        let (dx, dy) = spec.cell_size();
        let bs = spec.bs_position;
        let mut tracer = Tracer {
            occ,
            spec,
            cfg,
            beams,
            dx,
            dy,
            min_path: dx.min(dy) / 2.0,
            visible: Grid::filled(spec.n_rows, spec.n_cols, false),
            bearing: Grid::filled(spec.n_rows, spec.n_cols, 0.0),
            distance: Grid::filled(spec.n_rows, spec.n_cols, 0.0),
        };
        for r in 0..spec.n_rows {
            for c in 0..spec.n_cols {
                let p = spec.center_unchecked(r, c);
                *tracer.bearing.get_mut(r, c) = bs.bearing_to(p);
                *tracer.distance.get_mut(r, c) = bs.distance(p);
                *tracer.visible.get_mut(r, c) = !occ.is_set(r, c) && tracer.segment_clear(bs, p);
            }
        }
        Ok(tracer)
    }

    #[inline]
    fn occupied(&self, r: i64, c: i64) -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < self.spec.n_rows
            && (c as usize) < self.spec.n_cols
            && self.occ.is_set(r as usize, c as usize)
    }

    #[inline]
    fn in_grid(&self, r: i64, c: i64) -> bool {
        r >= 0 && c >= 0 && (r as usize) < self.spec.n_rows && (c as usize) < self.spec.n_cols
    }

    /// True when the open segment `p -> q` passes through no occupied cell.
    ///
    /// Cells are visited with an incremental grid walk; a crossing exactly
    /// through a cell corner steps diagonally and does not touch the two
    /// side cells.
    fn segment_clear(&self, p: Point, q: Point) -> bool {
        let (u0, v0) = (p.x / self.dx, p.y / self.dy);
        let (du, dv) = (q.x / self.dx - u0, q.y / self.dy - v0);
        let mut i = (u0 + du * EDGE_EPS).floor() as i64;
        let mut j = (v0 + dv * EDGE_EPS).floor() as i64;
        let (step_i, dt_i, mut tmax_i) = axis_setup(u0, du, i);
        let (step_j, dt_j, mut tmax_j) = axis_setup(v0, dv, j);
        let limit = self.spec.n_rows + self.spec.n_cols + 4;
        for _ in 0..limit {
            if self.occupied(i, j) {
                return false;
            }
            let t_next = tmax_i.min(tmax_j);
            if t_next >= 1.0 - EDGE_EPS {
                return true;
            }
            if (tmax_i - tmax_j).abs() <= EDGE_EPS * t_next.max(1.0) {
                i += step_i;
                j += step_j;
                tmax_i += dt_i;
                tmax_j += dt_j;
            } else if tmax_i < tmax_j {
                i += step_i;
                tmax_i += dt_i;
            } else {
                j += step_j;
                tmax_j += dt_j;
            }
        }
        true
    }

    /// Casts a ray from the base station along `angle` and reports the face
    /// of the first occupied cell it enters.
    fn cast(&self, angle: f64) -> RayHit {
        let bs = self.spec.bs_position;
        let (u0, v0) = (bs.x / self.dx, bs.y / self.dy);
        let (du, dv) = (angle.cos(), angle.sin());
        let mut i = (u0 + du * EDGE_EPS).floor() as i64;
        let mut j = (v0 + dv * EDGE_EPS).floor() as i64;
        if self.occupied(i, j) {
            // Obstacle directly adjacent to a base station on a cell corner.
            return RayHit::None;
        }
        let (step_i, dt_i, mut tmax_i) = axis_setup(u0, du, i);
        let (step_j, dt_j, mut tmax_j) = axis_setup(v0, dv, j);
        loop {
            let t_next = tmax_i.min(tmax_j);
            let side = if (tmax_i - tmax_j).abs() <= EDGE_EPS * t_next.max(1.0) {
                i += step_i;
                j += step_j;
                tmax_i += dt_i;
                tmax_j += dt_j;
                None
            } else if tmax_i < tmax_j {
                i += step_i;
                tmax_i += dt_i;
                Some(if step_i > 0 { Side::XMinus } else { Side::XPlus })
            } else {
                j += step_j;
                tmax_j += dt_j;
                Some(if step_j > 0 { Side::YMinus } else { Side::YPlus })
            };
            if !self.in_grid(i, j) {
                return RayHit::None;
            }
            if self.occupied(i, j) {
                return match side {
                    Some(side) => RayHit::Face(FaceKey {
                        row: i as usize,
                        col: j as usize,
                        side,
                    }),
                    None => RayHit::None,
                };
            }
        }
    }

    /// Line-of-sight gain for every cell in the sector of `direction`.
    fn los_gain(&self, direction: f64, gain: &mut Grid<f64>) {
        for r in 0..self.spec.n_rows {
            for c in 0..self.spec.n_cols {
                if !*self.visible.get(r, c) {
                    continue;
                }
                let d = *self.distance.get(r, c);
                let inside = d < 1e-9 || self.beams.in_sector(direction, *self.bearing.get(r, c));
                if inside {
                    *gain.get_mut(r, c) += self.cfg.path_gain(d.max(self.min_path));
                }
            }
        }
    }

    /// Faces first hit by the rays spanning the sector of `direction`.
    fn illuminated_faces(&self, direction: f64) -> BTreeSet<FaceKey> {
        let n = self.cfg.rays_per_beam.max(1);
        let bw = self.beams.beamwidth_rad;
        let mut faces = BTreeSet::new();
        for k in 0..n {
            let angle = direction - bw / 2.0 + (k as f64 + 0.5) * bw / n as f64;
            if let RayHit::Face(f) = self.cast(angle) {
                faces.insert(f);
            }
        }
        faces
    }

    /// Adds the single-bounce contribution of one face to `gain`.
    fn reflect_off(&self, face: FaceKey, direction: f64, gain: &mut Grid<f64>) {
        let bs = self.spec.bs_position;
        let (r, c) = (face.row as f64, face.col as f64);
        // Work in a frame where the face is the line `a = a0`, spanning
        // `b in [b_lo, b_hi)`, with its front side at `sign * (a - a0) > 0`.
        let (along_x, a0, b_lo, b_hi, sign) = match face.side {
            Side::XMinus => (true, r * self.dx, c * self.dy, (c + 1.0) * self.dy, -1.0),
            Side::XPlus => (true, (r + 1.0) * self.dx, c * self.dy, (c + 1.0) * self.dy, 1.0),
            Side::YMinus => (false, c * self.dy, r * self.dx, (r + 1.0) * self.dx, -1.0),
            Side::YPlus => (false, (c + 1.0) * self.dy, r * self.dx, (r + 1.0) * self.dx, 1.0),
        };
        let split = |p: Point| if along_x { (p.x, p.y) } else { (p.y, p.x) };
        let join = |a: f64, b: f64| if along_x { Point::new(a, b) } else { Point::new(b, a) };

        let (bs_a, bs_b) = split(bs);
        if sign * (bs_a - a0) <= 0.0 {
            return;
        }
        let image_a = 2.0 * a0 - bs_a;
        let refl = self.cfg.reflection_factor();

        for row in 0..self.spec.n_rows {
            for col in 0..self.spec.n_cols {
                if self.occ.is_set(row, col) {
                    continue;
                }
                let rx = self.spec.center_unchecked(row, col);
                let (rx_a, rx_b) = split(rx);
                if sign * (rx_a - a0) <= 0.0 {
                    continue;
                }
                let t = (a0 - image_a) / (rx_a - image_a);
                let hit_b = bs_b + t * (rx_b - bs_b);
                if !(hit_b >= b_lo && hit_b < b_hi) {
                    continue;
                }
                let hit = join(a0, hit_b);
                if !self.beams.in_sector(direction, bs.bearing_to(hit)) {
                    continue;
                }
                if !self.segment_clear(bs, hit) || !self.segment_clear(hit, rx) {
                    continue;
                }
                let length = (image_a - rx_a).hypot(bs_b - rx_b);
                *gain.get_mut(row, col) += self.cfg.path_gain(length.max(self.min_path)) * refl;
            }
        }
    }

    fn beam(&self, direction: f64) -> Grid<f64> {
        let mut gain = Grid::filled(self.spec.n_rows, self.spec.n_cols, 0.0);
        self.los_gain(direction, &mut gain);
        for face in self.illuminated_faces(direction) {
            self.reflect_off(face, direction, &mut gain);
        }
        let (tx, noise) = (self.cfg.tx_mw(), self.cfg.noise_mw());
        Grid::from_fn(self.spec.n_rows, self.spec.n_cols, |r, c| {
            if self.occ.is_set(r, c) {
                noise
            } else {
                tx * *gain.get(r, c) + noise
            }
        })
    }
}

/// Per-axis setup for the grid walk: step sign, parametric cell width and
/// the parameter of the first boundary crossing.
fn axis_setup(origin: f64, delta: f64, cell: i64) -> (i64, f64, f64) {
    if delta > 0.0 {
        (1, 1.0 / delta, ((cell + 1) as f64 - origin) / delta)
    } else if delta < 0.0 {
        (-1, -1.0 / delta, (cell as f64 - origin) / delta)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

/// Received power (mW) of every cell for the beam pointing at `direction`.
pub fn trace_beam(
    occupancy: &OccupancyGrid,
    spec: &GridSpec,
    direction: f64,
    beams: &BeamSet,
    cfg: &RadioConfig,
) -> Result<Grid<f64>> {
    let tracer = Tracer::new(occupancy, spec, beams, cfg)?;
    Ok(tracer.beam(direction))
}

/// Traces every beam direction and stacks the maps in direction order.
pub fn trace_all(
    occupancy: &OccupancyGrid,
    spec: &GridSpec,
    beams: &BeamSet,
    cfg: &RadioConfig,
) -> Result<RadioMap> {
    let tracer = Tracer::new(occupancy, spec, beams, cfg)?;
    let slices: Vec<Grid<f64>> = beams
        .directions()
        .par_iter()
        .map(|&theta| tracer.beam(theta))
        .collect();
    Ok(RadioMap(Tensor3::stack(&slices)?))
}

/// Affine map from received power in dB onto `[psi_min, psi_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub psi_min: f64,
    pub psi_max: f64,
    pub db_floor: f64,
    pub db_ceil: f64,
}

impl ScalingSpec {
    pub fn new(psi_min: f64, psi_max: f64, db_floor: f64, db_ceil: f64) -> Result<Self> {
        let s = ScalingSpec {
            psi_min,
            psi_max,
            db_floor,
            db_ceil,
        };
        s.validate()?;
        Ok(s)
    }

    /// Default scaling: `psi = [0.05, 0.9]`, floor at the noise level and
    /// ceiling at the strongest power any cell center can receive.
    pub fn for_scene(spec: &GridSpec, cfg: &RadioConfig) -> Result<Self> {
        ScalingSpec::new(0.05, 0.9, cfg.noise_floor_dbm, max_cell_rss_dbm(spec, cfg))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.psi_min && self.psi_min < self.psi_max && self.psi_max < 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= psi_min < psi_max < 1, got {} and {}",
                self.psi_min, self.psi_max
            )));
        }
        if !(self.db_floor < self.db_ceil) {
            return Err(Error::Config(format!(
                "need db_floor < db_ceil, got {} and {}",
                self.db_floor, self.db_ceil
            )));
        }
        Ok(())
    }

    /// Scaled value of a free cell receiving `db` dBm.
    pub fn scale_db(&self, db: f64) -> f64 {
        let clamped = db.clamp(self.db_floor, self.db_ceil);
        self.psi_min
            + (clamped - self.db_floor) / (self.db_ceil - self.db_floor) * (self.psi_max - self.psi_min)
    }

    /// Inverse of [`ScalingSpec::scale_db`] on `[psi_min, psi_max]`; values
    /// outside that range are clamped onto it first.
    pub fn unscale_value(&self, v: f64) -> f64 {
        let clamped = v.clamp(self.psi_min, self.psi_max);
        self.db_floor
            + (clamped - self.psi_min) / (self.psi_max - self.psi_min) * (self.db_ceil - self.db_floor)
    }
}

/// Strongest received power (dBm) over all cell centers: line of sight at the
/// smallest base-station distance, plus noise.
pub fn max_cell_rss_dbm(spec: &GridSpec, cfg: &RadioConfig) -> f64 {
    let (dx, dy) = spec.cell_size();
    let mut d_min = f64::INFINITY;
    for r in 0..spec.n_rows {
        for c in 0..spec.n_cols {
            d_min = d_min.min(spec.bs_position.distance(spec.center_unchecked(r, c)));
        }
    }
    let d = d_min.max(dx.min(dy) / 2.0);
    mw_to_dbm(cfg.tx_mw() * cfg.path_gain(d) + cfg.noise_mw())
}

/// Occupied cells map to 1; free cells to the affine image of their dB power.
pub fn scale(map: &RadioMap, occupancy: &OccupancyGrid, spec: &ScalingSpec) -> Result<ScaledRadioMap> {
    map.check_grid(occupancy, "scale")?;
    spec.validate()?;
    let dirs = map.dirs();
    let mut out = map.0.clone();
    for (cell, values) in out.as_mut_slice().chunks_mut(dirs).enumerate() {
        let occupied = occupancy.as_slice()[cell] != 0;
        for v in values {
            *v = if occupied { 1.0 } else { spec.scale_db(mw_to_dbm(*v)) };
        }
    }
    Ok(ScaledRadioMap(out))
}

/// Physical view of a scaled map.
#[derive(Debug, Clone, PartialEq)]
pub struct UnscaledMap {
    /// dBm per entry; occupied entries hold `db_floor`.
    pub dbm: Tensor3,
    /// 1 where the scaled value was exactly 1 (an occupied marker), else 0.
    pub occupied: Vec<u8>,
}

pub fn unscale(scaled: &Tensor3, spec: &ScalingSpec) -> Result<UnscaledMap> {
    spec.validate()?;
    if let Some(bad) = scaled.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("scaled value {bad} outside [0, 1]")));
    }
    let occupied: Vec<u8> = scaled.as_slice().iter().map(|&v| u8::from(v == 1.0)).collect();
    let dbm = scaled.map(|&v| {
        if v == 1.0 {
            spec.db_floor
        } else {
            spec.unscale_value(v)
        }
    });
    Ok(UnscaledMap { dbm, occupied })
}
