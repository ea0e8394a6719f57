//! Voting-based obstacle sensing from multi-directional radio maps.
//!
//! Each directional map yields a preliminary occupancy vote per cell. The
//! votes are combined with a unanimity rule (`hard_vote`), its differentiable
//! surrogate (`soft_vote`) or a plain majority (`majority_vote`). The
//! majority rule's error under independent vote flips is available both
//! exactly and through the Hoeffding upper bound.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{BinaryMap, ConfidenceMap, Grid, OccupancyGrid, Tensor3};
use crate::metrics;

fn check_unit_interval<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    match values.into_iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::domain(format!("value {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn check_psi_max(psi_max: f64) -> Result<()> {
    if !(0.0..1.0).contains(&psi_max) {
        return Err(Error::domain(format!("psi_max {psi_max} outside [0, 1)")));
    }
    Ok(())
}

/// Thresholds one scaled directional map: 1 iff the value exceeds `psi_max`.
pub fn segment(slice: &Grid<f64>, psi_max: f64) -> Result<BinaryMap> {
    check_psi_max(psi_max)?;
    check_unit_interval(slice.as_slice())?;
    Ok(slice.map(|&v| u8::from(v > psi_max)))
}

/// Segments every direction of a scaled tensor.
pub fn segment_all(scaled: &Tensor3, psi_max: f64) -> Result<Vec<BinaryMap>> {
    check_psi_max(psi_max)?;
    check_unit_interval(scaled.as_slice())?;
    Ok((0..scaled.dirs())
        .map(|d| Grid::from_fn(scaled.rows(), scaled.cols(), |r, c| u8::from(scaled.get(r, c, d) > psi_max)))
        .collect())
}

fn check_votes(votes: &[BinaryMap]) -> Result<&BinaryMap> {
    let first = votes
        .first()
        .ok_or_else(|| Error::argument("at least one vote map is required"))?;
    for v in &votes[1..] {
        first.check_shape(v, "vote maps")?;
    }
    Ok(first)
}

/// Unanimity: a cell is occupied only if every vote says so.
pub fn hard_vote(votes: &[BinaryMap]) -> Result<BinaryMap> {
    let first = check_votes(votes)?;
    let mut out = first.clone();
    for v in &votes[1..] {
        for (o, &x) in out.as_mut_slice().iter_mut().zip(v.as_slice()) {
            *o &= x;
        }
    }
    Ok(out)
}

/// Differentiable unanimity: `max(0, mean over directions - psi_max)`.
/// Output lies in `[0, 1 - psi_max]`.
pub fn soft_vote(scaled: &Tensor3, psi_max: f64) -> Result<ConfidenceMap> {
    check_psi_max(psi_max)?;
    check_unit_interval(scaled.as_slice())?;
    let n = scaled.dirs() as f64;
    Ok(Grid::from_fn(scaled.rows(), scaled.cols(), |r, c| {
        let mean = scaled.cell(r, c).iter().sum::<f64>() / n;
        (mean - psi_max).max(0.0)
    }))
}

/// Strict majority: occupied iff more than half the votes are 1. Ties on an
/// even number of votes resolve to free.
pub fn majority_vote(votes: &[BinaryMap]) -> Result<BinaryMap> {
    let first = check_votes(votes)?;
    let n = votes.len();
    let mut counts = vec![0usize; first.len()];
    for v in votes {
        for (c, &x) in counts.iter_mut().zip(v.as_slice()) {
            *c += x as usize;
        }
    }
    Grid::from_vec(
        first.rows(),
        first.cols(),
        counts.into_iter().map(|c| u8::from(2 * c > n)).collect(),
    )
}

/// Hoeffding bound `exp(-2 n (1/2 - eps)^2)` on the majority-vote error.
pub fn hoeffding_bound(n_votes: usize, epsilon: f64) -> Result<f64> {
    if n_votes == 0 {
        return Err(Error::argument("need at least one vote"));
    }
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::domain(format!(
            "per-vote error probability {epsilon} must lie in [0, 0.5)"
        )));
    }
    let delta = 0.5 - epsilon;
    Ok((-2.0 * n_votes as f64 * delta * delta).exp())
}

/// Exact majority-vote error for an odd number of independent votes, each
/// wrong with probability `epsilon`: the probability that at most
/// `floor(n / 2)` votes are correct.
pub fn exact_majority_error(n_votes: usize, epsilon: f64) -> Result<f64> {
    if n_votes % 2 == 0 {
        return Err(Error::argument(format!("vote count {n_votes} must be odd")));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::domain(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let n = n_votes;
    let mut total = 0.0;
    let mut binom = 1.0; // C(n, c)
    for c in 0..=n / 2 {
        total += binom * (1.0 - epsilon).powi(c as i32) * epsilon.powi((n - c) as i32);
        binom = binom * (n - c) as f64 / (c + 1) as f64;
    }
    Ok(total)
}

/// Monte-Carlo estimate of a probability with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub rate: f64,
    pub trials: usize,
}

impl MonteCarloEstimate {
    /// Standard error of the estimate under a reference probability `p`.
    pub fn std_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Simulates `trials` independent cells with a random true state and
/// `n_votes` votes, each flipped with probability `epsilon`, and counts how
/// often [`majority_vote`] gets the cell wrong.
pub fn monte_carlo_majority_error(
    n_votes: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if n_votes == 0 || trials == 0 {
        return Err(Error::argument("need at least one vote and one trial"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::domain(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<u8> = (0..trials).map(|_| rng.gen::<bool>() as u8).collect();
    let votes: Vec<BinaryMap> = (0..n_votes)
        .map(|_| {
            let cells = truth
                .iter()
                .map(|&t| if rng.gen_bool(epsilon) { 1 - t } else { t })
                .collect();
            Grid::from_vec(1, trials, cells)
        })
        .collect::<Result<_>>()?;
    let decided = majority_vote(&votes)?;
    let wrong = decided
        .as_slice()
        .iter()
        .zip(&truth)
        .filter(|(a, b)| a != b)
        .count();
    Ok(MonteCarloEstimate {
        rate: wrong as f64 / trials as f64,
        trials,
    })
}

/// Preliminary votes from a raw (linear power) map: a cell votes occupied in
/// direction `d` when its power does not exceed `threshold_mw`.
pub fn threshold_votes(raw: &Tensor3, threshold_mw: f64) -> Vec<BinaryMap> {
    (0..raw.dirs())
        .map(|d| Grid::from_fn(raw.rows(), raw.cols(), |r, c| u8::from(raw.get(r, c, d) <= threshold_mw)))
        .collect()
}

/// Sensing error of hard voting over growing subsets of beam directions.
///
/// For each entry of `direction_counts` a subset of that many directions is
/// drawn uniformly without replacement, each selected directional map is
/// thresholded at `noise_mw + noise_tolerance_mw`, the votes are combined
/// with [`hard_vote`] and the per-cell MSE against `occupancy` is reported.
pub fn ensemble_mse_experiment(
    occupancy: &OccupancyGrid,
    raw: &Tensor3,
    noise_mw: f64,
    noise_tolerance_mw: f64,
    direction_counts: &[usize],
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    raw.check_grid(occupancy, "ensemble experiment")?;
    if let Some(&bad) = direction_counts.iter().find(|&&n| n == 0 || n > raw.dirs()) {
        return Err(Error::argument(format!(
            "direction count {bad} outside [1, {}]",
            raw.dirs()
        )));
    }
    let votes = threshold_votes(raw, noise_mw + noise_tolerance_mw);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    direction_counts
        .iter()
        .map(|&count| {
            let mut picked = index::sample(&mut rng, raw.dirs(), count).into_vec();
            picked.sort_unstable();
            let subset: Vec<BinaryMap> = picked.iter().map(|&d| votes[d].clone()).collect();
            let sensed = hard_vote(&subset)?;
            let mse = metrics::mse_sensing(std::slice::from_ref(occupancy), std::slice::from_ref(&sensed))?;
            Ok((count, mse))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(cells: &[u8]) -> BinaryMap {
        Grid::from_vec(1, cells.len(), cells.to_vec()).unwrap()
    }

    #[test]
    fn segment_boundaries() {
        let slice = Grid::from_vec(1, 4, vec![0.95, 0.9, 0.0, 1.0]).unwrap();
        assert_eq!(segment(&slice, 0.9).unwrap().as_slice(), &[1, 0, 0, 1]);
        let bad = Grid::from_vec(1, 1, vec![1.01]).unwrap();
        assert!(matches!(segment(&bad, 0.9), Err(Error::Domain(_))));
    }

    #[test]
    fn hard_vote_is_unanimity() {
        let v = [map(&[1, 1, 0, 1]), map(&[1, 0, 0, 1]), map(&[1, 1, 1, 1])];
        assert_eq!(hard_vote(&v).unwrap().as_slice(), &[1, 0, 0, 1]);
        assert!(matches!(hard_vote(&[]), Err(Error::Argument(_))));
        assert!(hard_vote(&[map(&[1]), map(&[1, 0])]).is_err());
    }

    #[test]
    fn soft_vote_values() {
        let t = Tensor3::from_vec(1, 3, 3, vec![1.0, 1.0, 1.0, 1.0, 0.5, 1.0, 0.2, 0.9, 0.3]).unwrap();
        let s = soft_vote(&t, 0.9).unwrap();
        assert!((s.get(0, 0) - 0.1).abs() < 1e-15);
        assert_eq!(*s.get(0, 1), 0.0);
        assert_eq!(*s.get(0, 2), 0.0);
    }

    #[test]
    fn majority_vote_rules() {
        let v = [map(&[1, 1, 0]), map(&[1, 0, 0]), map(&[0, 1, 0])];
        assert_eq!(majority_vote(&v).unwrap().as_slice(), &[1, 1, 0]);
        // Even tie resolves to free.
        assert_eq!(majority_vote(&[map(&[1]), map(&[0])]).unwrap().as_slice(), &[0]);
        assert_eq!(majority_vote(&[map(&[1]), map(&[1])]).unwrap().as_slice(), &[1]);
        assert!(majority_vote(&[]).is_err());
    }

    #[test]
    fn hoeffding_values() {
        assert!((hoeffding_bound(18, 0.4).unwrap() - 0.69768).abs() < 1e-5);
        assert!(hoeffding_bound(10, 0.4999999).unwrap() > 0.999_999);
        let mut prev = 1.0;
        for n in 1..200 {
            let b = hoeffding_bound(n, 0.3).unwrap();
            assert!(b < prev);
            prev = b;
        }
        assert!(prev < 1e-6);
        assert!(matches!(hoeffding_bound(5, 0.5), Err(Error::Domain(_))));
        assert!(hoeffding_bound(0, 0.1).is_err());
    }

    #[test]
    fn exact_error_values() {
        assert!((exact_majority_error(3, 0.1).unwrap() - 0.028).abs() < 1e-12);
        for eps in [0.0, 0.13, 0.5, 0.77, 1.0] {
            assert!((exact_majority_error(1, eps).unwrap() - eps).abs() < 1e-15);
        }
        assert!(exact_majority_error(3, 0.1).unwrap() <= hoeffding_bound(3, 0.1).unwrap());
        assert!((hoeffding_bound(3, 0.1).unwrap() - (-0.96f64).exp()).abs() < 1e-15);
        assert!(matches!(exact_majority_error(4, 0.1), Err(Error::Argument(_))));
    }

    #[test]
    fn exact_error_matches_enumeration() {
        // Independent oracle: sum the probability of every vote pattern with
        // a correct-vote minority.
        for n in [1usize, 3, 5, 7, 9, 11] {
            for eps in [0.05f64, 0.2, 0.45, 0.7] {
                let mut oracle = 0.0;
                for pattern in 0u32..(1 << n) {
                    let wrong = pattern.count_ones() as usize;
                    if n - wrong <= n / 2 {
                        oracle += eps.powi(wrong as i32) * (1.0 - eps).powi((n - wrong) as i32);
                    }
                }
                let exact = exact_majority_error(n, eps).unwrap();
                assert!((exact - oracle).abs() < 1e-13, "n={n} eps={eps}");
            }
        }
    }

    #[test]
    fn monte_carlo_close_to_exact() {
        let est = monte_carlo_majority_error(5, 0.3, 20_000, 1).unwrap();
        let exact = exact_majority_error(5, 0.3).unwrap();
        assert!((est.rate - exact).abs() <= 4.0 * est.std_error(exact));
    }

    #[test]
    fn single_direction_experiment_equals_segmentation() {
        let occ = Grid::from_vec(1, 3, vec![1u8, 0, 0]).unwrap();
        let raw = Tensor3::from_vec(1, 3, 1, vec![1e-12, 1e-12, 5e-12]).unwrap();
        let curve = ensemble_mse_experiment(&occ, &raw, 1e-12, 1e-15, &[1], 0).unwrap();
        assert_eq!(curve, vec![(1, 1.0 / 3.0)]);
        assert!(ensemble_mse_experiment(&occ, &raw, 1e-12, 1e-15, &[2], 0).is_err());
    }
}
