//! Construction and sensing losses, per-element MSEs, obstacle instances and
//! average precision over mask-IoU thresholds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BinaryMap, ConfidenceMap, Grid, OccupancyGrid, Tensor3};

/// Mean over scenarios of the squared Frobenius error, divided by the
/// number of tensor elements.
pub fn mse_construction(truths: &[Tensor3], estimates: &[Tensor3]) -> Result<f64> {
    if truths.len() != estimates.len() {
        return Err(Error::shape(format!(
            "{} truths vs {} estimates",
            truths.len(),
            estimates.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::argument("no scenarios to evaluate"));
    }
    let mut total = 0.0;
    for (t, e) in truths.iter().zip(estimates) {
        t.check_shape(e, "mse_construction")?;
        let sq: f64 = t.as_slice().iter().zip(e.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
        total += sq / t.len() as f64;
    }
    Ok(total / truths.len() as f64)
}

/// Mean over scenarios of the per-cell squared error between binary maps.
pub fn mse_sensing(truths: &[OccupancyGrid], estimates: &[BinaryMap]) -> Result<f64> {
    if truths.len() != estimates.len() {
        return Err(Error::shape(format!(
            "{} truths vs {} estimates",
            truths.len(),
            estimates.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::argument("no scenarios to evaluate"));
    }
    let mut total = 0.0;
    for (t, e) in truths.iter().zip(estimates) {
        t.check_shape(e, "mse_sensing")?;
        let wrong = t.as_slice().iter().zip(e.as_slice()).filter(|(a, b)| a != b).count();
        total += wrong as f64 / t.len() as f64;
    }
    Ok(total / truths.len() as f64)
}

/// `|| truth .* (truth - estimate) ||_F^2`, unnormalized. The truth tensor
/// doubles as the weight, so occupied cells (value 1) count the most.
pub fn weighted_construction_loss(truth: &Tensor3, estimate: &Tensor3) -> Result<f64> {
    truth.check_shape(estimate, "weighted loss")?;
    for v in truth.as_slice().iter().chain(estimate.as_slice()) {
        if !(0.0..=1.0).contains(v) {
            return Err(Error::domain(format!("value {v} outside [0, 1]")));
        }
    }
    Ok(truth
        .as_slice()
        .iter()
        .zip(estimate.as_slice())
        .map(|(&w, &e)| {
            let r = w * (w - e);
            r * r
        })
        .sum())
}

/// Binary cross-entropy between the occupancy truth and a soft-vote
/// confidence map, scaled by the number of beams.
///
/// Confidences are turned into probabilities with
/// `p = min(1, c / (1 - psi_max))`, then clamped to `[clamp_eps, 1 - clamp_eps]`.
/// The result is `-n_beams * sum(S ln p + (1 - S) ln(1 - p))`, nonnegative
/// and smallest for a confident correct prediction.
pub fn occupancy_cross_entropy(
    truth: &OccupancyGrid,
    estimate: &ConfidenceMap,
    psi_max: f64,
    n_beams: usize,
    clamp_eps: f64,
) -> Result<f64> {
    truth.check_shape(estimate, "cross entropy")?;
    if !(clamp_eps > 0.0 && clamp_eps < 0.5) {
        return Err(Error::domain(format!("clamp_eps {clamp_eps} outside (0, 0.5)")));
    }
    if !(0.0..1.0).contains(&psi_max) {
        return Err(Error::domain(format!("psi_max {psi_max} outside [0, 1)")));
    }
    let span = 1.0 - psi_max;
    let mut sum = 0.0;
    for (&s, &c) in truth.as_slice().iter().zip(estimate.as_slice()) {
        if c < 0.0 || c.is_nan() {
            return Err(Error::domain(format!("negative confidence {c}")));
        }
        let p = (c / span).min(1.0).clamp(clamp_eps, 1.0 - clamp_eps);
        sum += if s == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(-(n_beams as f64) * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::argument(format!("connectivity must be 4 or 8, got {other}"))),
        }
    }

    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1)],
        }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Maximal connected sets of 1-cells, as sorted row-major cell indices.
/// Components are ordered by their first cell.
pub fn connected_components(map: &BinaryMap, connectivity: Connectivity) -> Vec<Vec<usize>> {
    let (rows, cols) = (map.rows(), map.cols());
    let n = rows * cols;
    let mut parent: Vec<usize> = (0..n).collect();
    // Single raster pass merging each cell with its already-visited neighbors.
    for r in 0..rows {
        for c in 0..cols {
            if !map.is_set(r, c) {
                continue;
            }
            let here = r * cols + c;
            for &(dr, dc) in connectivity.offsets() {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nc >= cols as i64 {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                if map.is_set(nr, nc) {
                    let a = find(&mut parent, here);
                    let b = find(&mut parent, nr * cols + nc);
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut slot_of_root = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if map.as_slice()[i] == 0 {
            continue;
        }
        let root = find(&mut parent, i);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = components.len();
            components.push(Vec::new());
        }
        components[slot_of_root[root]].push(i);
    }
    components
}

/// One detected or true obstacle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    /// Sorted row-major cell indices.
    pub cells: Vec<usize>,
    pub confidence: f64,
}

/// Obstacle instances of one scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct InstanceSet {
    pub instances: Vec<Instance>,
}

impl InstanceSet {
    /// Components of `map`, each with confidence 1.
    pub fn from_map(map: &BinaryMap, connectivity: Connectivity) -> Self {
        InstanceSet {
            instances: connected_components(map, connectivity)
                .into_iter()
                .map(|cells| Instance {
                    cells,
                    confidence: 1.0,
                })
                .collect(),
        }
    }

    /// Components of a hard-voted map scored by the mean, over the
    /// component's cells, of the fraction of directional votes that say
    /// occupied.
    pub fn from_votes(map: &BinaryMap, votes: &[BinaryMap], connectivity: Connectivity) -> Result<Self> {
        if votes.is_empty() {
            return Err(Error::argument("at least one vote map is required"));
        }
        for v in votes {
            map.check_shape(v, "instance votes")?;
        }
        let n = votes.len() as f64;
        let instances = connected_components(map, connectivity)
            .into_iter()
            .map(|cells| {
                let total: f64 = cells
                    .iter()
                    .map(|&i| votes.iter().filter(|v| v.as_slice()[i] == 1).count() as f64 / n)
                    .sum();
                let confidence = total / cells.len() as f64;
                Instance { cells, confidence }
            })
            .collect();
        Ok(InstanceSet { instances })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Intersection over union of two sorted cell-index sets.
pub fn mask_iou(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// The ten IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> Vec<f64> {
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdAp {
    pub iou_threshold: f64,
    pub ap: f64,
    pub curve: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApReport {
    pub ap: f64,
    pub per_threshold: Vec<ThresholdAp>,
}

/// Average precision over IoU thresholds 0.50:0.05:0.95.
///
/// Predictions from all scenarios are ranked together by descending
/// confidence; each is matched to the unmatched truth of its own scenario
/// with the highest mask IoU and counts as a true positive when that IoU
/// reaches the threshold. The area under the all-point interpolated
/// precision-recall curve is averaged over the thresholds. With no truths at
/// all, AP is 1 when there are also no predictions and 0 otherwise.
pub fn average_precision(predictions: &[InstanceSet], truths: &[InstanceSet]) -> Result<ApReport> {
    if predictions.len() != truths.len() {
        return Err(Error::shape(format!(
            "{} prediction sets vs {} truth sets",
            predictions.len(),
            truths.len()
        )));
    }
    let mut ranked: Vec<(usize, usize, f64)> = Vec::new();
    for (s, set) in predictions.iter().enumerate() {
        for (k, inst) in set.instances.iter().enumerate() {
            if !(0.0..=1.0).contains(&inst.confidence) {
                return Err(Error::domain(format!(
                    "confidence {} outside [0, 1]",
                    inst.confidence
                )));
            }
            ranked.push((s, k, inst.confidence));
        }
    }
    // Stable: ties keep scenario/instance order.
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2));

    // IoU of every prediction against every truth of the same scenario.
    let ious: Vec<Vec<Vec<f64>>> = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| {
            p.instances
                .iter()
                .map(|pi| t.instances.iter().map(|ti| mask_iou(&pi.cells, &ti.cells)).collect())
                .collect()
        })
        .collect();
    let n_truth: usize = truths.iter().map(InstanceSet::len).sum();

    let per_threshold: Vec<ThresholdAp> = iou_thresholds()
        .into_iter()
        .map(|thr| {
            let mut matched: Vec<Vec<bool>> = truths.iter().map(|t| vec![false; t.len()]).collect();
            let (mut tp, mut fp) = (0usize, 0usize);
            let mut curve = Vec::with_capacity(ranked.len());
            for &(s, k, conf) in &ranked {
                let best = ious[s][k]
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| !matched[s][*t])
                    .fold(None, |acc: Option<(usize, f64)>, (t, &iou)| match acc {
                        Some((_, b)) if b >= iou => acc,
                        _ => Some((t, iou)),
                    });
                match best {
                    Some((t, iou)) if iou >= thr => {
                        matched[s][t] = true;
                        tp += 1;
                    }
                    _ => fp += 1,
                }
                curve.push(PrPoint {
                    recall: if n_truth == 0 { 0.0 } else { tp as f64 / n_truth as f64 },
                    precision: tp as f64 / (tp + fp) as f64,
                    confidence: conf,
                });
            }
            let ap = if n_truth == 0 {
                if ranked.is_empty() { 1.0 } else { 0.0 }
            } else {
                interpolated_area(&curve)
            };
            ThresholdAp {
                iou_threshold: thr,
                ap,
                curve,
            }
        })
        .collect();
    let ap = per_threshold.iter().map(|t| t.ap).sum::<f64>() / per_threshold.len() as f64;
    Ok(ApReport { ap, per_threshold })
}

/// All-point interpolation: sum of recall steps times the best precision
/// achieved at that recall or beyond.
fn interpolated_area(curve: &[PrPoint]) -> f64 {
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (p, &env) in curve.iter().zip(&envelope) {
        if p.recall > prev_recall {
            area += (p.recall - prev_recall) * env;
            prev_recall = p.recall;
        }
    }
    area
}

/// Precision-recall rows `threshold,rank,confidence,recall,precision` for CSV export.
pub fn pr_curves_csv(report: &ApReport) -> String {
    let mut out = String::from("iou_threshold,rank,confidence,recall,precision\n");
    for t in &report.per_threshold {
        for (rank, p) in t.curve.iter().enumerate() {
            out.push_str(&format!(
                "{:.2},{},{},{},{}\n",
                t.iou_threshold, rank, p.confidence, p.recall, p.precision
            ));
        }
    }
    out
}

/// Builds a binary map from instance cells; handy for tests and tooling.
pub fn instances_to_map(rows: usize, cols: usize, set: &InstanceSet) -> BinaryMap {
    let mut map = Grid::filled(rows, cols, 0u8);
    for inst in &set.instances {
        for &i in &inst.cells {
            map.as_mut_slice()[i] = 1;
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(cells: &[&[usize]], conf: f64) -> InstanceSet {
        InstanceSet {
            instances: cells
                .iter()
                .map(|c| Instance {
                    cells: c.to_vec(),
                    confidence: conf,
                })
                .collect(),
        }
    }

    #[test]
    fn mse_normalization() {
        let t = Tensor3::filled(64, 64, 18, 0.3);
        let mut e = t.clone();
        assert_eq!(mse_construction(&[t.clone()], &[e.clone()]).unwrap(), 0.0);
        e.set(3, 4, 5, 1.3);
        let m = mse_construction(&[t.clone()], &[e]).unwrap();
        assert!((m - 1.0 / 73728.0).abs() < 1e-12);

        let occ = Grid::filled(64, 64, 0u8);
        let mut est = occ.clone();
        *est.get_mut(1, 1) = 1;
        assert!((mse_sensing(&[occ.clone()], &[est]).unwrap() - 1.0 / 4096.0).abs() < 1e-12);
        let all_wrong = occ.map(|_| 1u8);
        assert_eq!(mse_sensing(&[occ], &[all_wrong]).unwrap(), 1.0);
    }

    #[test]
    fn mse_scales_quadratically() {
        let t = Tensor3::from_vec(1, 2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let e1 = Tensor3::from_vec(1, 2, 2, vec![0.15, 0.1, 0.3, 0.5]).unwrap();
        let e2 = Tensor3::from_vec(1, 2, 2, vec![0.2, 0.0, 0.3, 0.6]).unwrap();
        let a = mse_construction(&[t.clone()], &[e1]).unwrap();
        let b = mse_construction(&[t], &[e2]).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-15);
    }

    #[test]
    fn mse_rejects_mismatch() {
        let a = Tensor3::filled(2, 2, 2, 0.0);
        let b = Tensor3::filled(2, 2, 3, 0.0);
        assert!(matches!(mse_construction(&[a.clone()], &[b]), Err(Error::Shape(_))));
        assert!(mse_construction(&[a.clone()], &[]).is_err());
    }

    #[test]
    fn weighted_loss_cases() {
        let ones = Tensor3::filled(4, 4, 3, 1.0);
        let zeros = Tensor3::filled(4, 4, 3, 0.0);
        assert_eq!(weighted_construction_loss(&ones, &ones).unwrap(), 0.0);
        assert_eq!(weighted_construction_loss(&ones, &zeros).unwrap(), 48.0);

        let truth_half = Tensor3::from_vec(1, 1, 1, vec![0.5]).unwrap();
        let truth_one = Tensor3::from_vec(1, 1, 1, vec![1.0]).unwrap();
        let off_half = Tensor3::from_vec(1, 1, 1, vec![0.3]).unwrap();
        let off_one = Tensor3::from_vec(1, 1, 1, vec![0.8]).unwrap();
        let a = weighted_construction_loss(&truth_half, &off_half).unwrap();
        let b = weighted_construction_loss(&truth_one, &off_one).unwrap();
        assert!((a / b - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_cases() {
        let psi_max = 0.9;
        let truth = Grid::from_vec(2, 2, vec![1u8, 0, 0, 1]).unwrap();
        let eps = 1e-7;
        let perfect = truth.map(|&s| if s == 1 { 0.1 } else { 0.0 });
        let ce = occupancy_cross_entropy(&truth, &perfect, psi_max, 18, eps).unwrap();
        let expected = 18.0 * 4.0 * eps;
        assert!((ce - expected).abs() < 1e-9, "{ce}");

        let half = truth.map(|_| 0.05);
        let ce = occupancy_cross_entropy(&truth, &half, psi_max, 18, eps).unwrap();
        assert!((ce - 18.0 * 4.0 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_flip_symmetry() {
        let psi_max = 0.8;
        let span = 1.0 - psi_max;
        let truth = Grid::from_vec(1, 4, vec![1u8, 0, 1, 0]).unwrap();
        let probs = [0.3, 0.6, 0.9, 0.05];
        let est = Grid::from_vec(1, 4, probs.iter().map(|p| p * span).collect()).unwrap();
        let flipped_truth = truth.map(|&s| 1 - s);
        let flipped_est = Grid::from_vec(1, 4, probs.iter().map(|p| (1.0 - p) * span).collect()).unwrap();
        let a = occupancy_cross_entropy(&truth, &est, psi_max, 4, 1e-7).unwrap();
        let b = occupancy_cross_entropy(&flipped_truth, &flipped_est, psi_max, 4, 1e-7).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn components_connectivity() {
        let empty = Grid::filled(4, 4, 0u8);
        assert!(connected_components(&empty, Connectivity::Eight).is_empty());
        // Two 2x2 blocks touching at a corner.
        let map = Grid::from_fn(4, 4, |r, c| u8::from((r < 2 && c < 2) || (r >= 2 && c >= 2)));
        assert_eq!(connected_components(&map, Connectivity::Four).len(), 2);
        assert_eq!(connected_components(&map, Connectivity::Eight).len(), 1);
    }

    #[test]
    fn ap_perfect_and_empty() {
        let truths = vec![set(&[&[1, 2, 3], &[10, 11]], 1.0), set(&[&[5]], 1.0)];
        let report = average_precision(&truths, &truths).unwrap();
        assert_eq!(report.ap, 1.0);
        let none = vec![InstanceSet::default(), InstanceSet::default()];
        assert_eq!(average_precision(&none, &truths).unwrap().ap, 0.0);
    }

    #[test]
    fn ap_single_instance_iou_060() {
        // Prediction {0,1,2,3}, truth {1,2,3,4}: IoU = 3/5.
        let pred = vec![set(&[&[0, 1, 2, 3]], 0.9)];
        let truth = vec![set(&[&[1, 2, 3, 4]], 1.0)];
        assert_eq!(mask_iou(&[0, 1, 2, 3], &[1, 2, 3, 4]), 0.6);
        let report = average_precision(&pred, &truth).unwrap();
        assert!((report.ap - 0.3).abs() < 1e-12);
        let tp: Vec<bool> = report.per_threshold.iter().map(|t| t.ap == 1.0).collect();
        assert_eq!(tp, [true, true, true, false, false, false, false, false, false, false]);
    }

    #[test]
    fn ap_ranks_by_confidence() {
        // A confident false positive ahead of a true positive halves precision.
        let pred = vec![InstanceSet {
            instances: vec![
                Instance { cells: vec![50], confidence: 0.9 },
                Instance { cells: vec![1, 2], confidence: 0.5 },
            ],
        }];
        let truth = vec![set(&[&[1, 2]], 1.0)];
        assert!((average_precision(&pred, &truth).unwrap().ap - 0.5).abs() < 1e-12);
    }
}
