//! Non-learned reconstruction of a scaled radio map from sparse sensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryMap, Tensor3};
use crate::propagation::ScaledRadioMap;
use crate::sampling::SparseMeasurements;
use crate::scenario::GridSpec;
use crate::sensing::{hard_vote, segment_all};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdwParams {
    pub power: f64,
    pub neighbors: usize,
}

impl Default for IdwParams {
    fn default() -> Self {
        IdwParams {
            power: 2.0,
            neighbors: 8,
        }
    }
}

impl IdwParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::Config(format!("idw power {} must be positive", self.power)));
        }
        if self.neighbors == 0 {
            return Err(Error::Config("idw needs at least one neighbor".into()));
        }
        Ok(())
    }
}

/// Inverse-distance weighting over the `k` nearest sensors, per direction.
///
/// Distances are measured between cell centers in meters; equal distances
/// are broken by row-major sensor index. Sensor cells keep their measured
/// values and every output is clamped to `[0, 1]`.
pub fn reconstruct_idw(sparse: &SparseMeasurements, spec: &GridSpec, params: &IdwParams) -> Result<ScaledRadioMap> {
    params.validate()?;
    let values = &sparse.values;
    values.check_grid(sparse.mask.cells(), "reconstruct")?;
    if values.rows() != spec.n_rows || values.cols() != spec.n_cols {
        return Err(Error::shape("measurements do not match the grid"));
    }
    let sensors = sparse.mask.positions();
    if sensors.is_empty() {
        return Err(Error::argument("no sensors to interpolate from"));
    }
    let (dx, dy) = spec.cell_size();
    let (rows, cols, dirs) = values.shape();
    let k = params.neighbors.min(sensors.len());
    let mut out = Tensor3::filled(rows, cols, dirs, 0.0);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(sensors.len());
    let mut acc = vec![0.0; dirs];
    for r in 0..rows {
        for c in 0..cols {
            if sparse.mask.cells().is_set(r, c) {
                for (d, &v) in values.cell(r, c).iter().enumerate() {
                    out.set(r, c, d, v.clamp(0.0, 1.0));
                }
                continue;
            }
            cand.clear();
            cand.extend(sensors.iter().enumerate().map(|(i, &(sr, sc))| {
                let ex = (sr as f64 - r as f64) * dx;
                let ey = (sc as f64 - c as f64) * dy;
                (ex * ex + ey * ey, i)
            }));
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_dist);
                cand.truncate(k);
            }
            cand.sort_unstable_by(by_dist);
            acc.fill(0.0);
            let mut wsum = 0.0;
            for &(d2, i) in &cand {
                let w = d2.powf(-params.power / 2.0);
                wsum += w;
                let (sr, sc) = sensors[i];
                for (a, &v) in acc.iter_mut().zip(values.cell(sr, sc)) {
                    *a += w * v;
                }
            }
            for (d, a) in acc.iter().enumerate() {
                out.set(r, c, d, (a / wsum).clamp(0.0, 1.0));
            }
        }
    }
    Ok(ScaledRadioMap(out))
}

/// Reconstructs with IDW, segments each direction and hard-votes the result.
pub fn end_to_end_sense(
    sparse: &SparseMeasurements,
    spec: &GridSpec,
    params: &IdwParams,
    psi_max: f64,
) -> Result<(ScaledRadioMap, BinaryMap)> {
    let recon = reconstruct_idw(sparse, spec, params)?;
    let votes = segment_all(&recon, psi_max)?;
    let sensed = hard_vote(&votes)?;
    Ok((recon, sensed))
}
