//! End-to-end runs: generate, trace, scale, sample, reconstruct, sense and
//! evaluate, plus the voting-bound experiments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::dataset::{export_dataset, ManifestFields, SceneInfo, SceneRecord};
use crate::error::{Error, Result};
use crate::grid::{BinaryMap, OccupancyGrid};
use crate::metrics::{
    average_precision, mse_construction, mse_sensing, occupancy_cross_entropy, pr_curves_csv,
    weighted_construction_loss, InstanceSet,
};
use crate::propagation::{scale, trace_all, RadioMap, ScaledRadioMap};
use crate::reconstruct::reconstruct_idw;
use crate::sampling::{apply_mask, sample_with_placement};
use crate::scenario::{generate_layout, rasterize, ObstacleLayout};
use crate::sensing::{
    ensemble_mse_experiment, exact_majority_error, hard_vote, hoeffding_bound, monte_carlo_majority_error,
    segment_all, soft_vote,
};

/// Seeds and obstacle count of one scenario, all derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenePlan {
    pub info: SceneInfo,
    pub layout_seed: u64,
    pub mask_seed: u64,
}

/// Lays out every scenario of the configured classes in order.
pub fn plan_scenes(cfg: &Config) -> Vec<ScenePlan> {
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut plans = Vec::with_capacity(cfg.dataset.n_scenarios());
    for group in &cfg.dataset.classes {
        for _ in 0..group.count {
            let seed = master.next_u64();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n_obstacles = *group
                .class
                .obstacle_counts()
                .choose(&mut rng)
                .expect("every class has an obstacle count");
            let layout_seed = rng.next_u64();
            let mask_seed = rng.next_u64();
            plans.push(ScenePlan {
                info: SceneInfo {
                    index: plans.len(),
                    class: Some(group.class),
                    seed,
                    n_obstacles,
                },
                layout_seed,
                mask_seed,
            });
        }
    }
    plans
}

pub fn scene_layout(cfg: &Config, plan: &ScenePlan) -> Result<ObstacleLayout> {
    generate_layout(
        &cfg.grid,
        plan.info.n_obstacles,
        (cfg.layout.min_side_m, cfg.layout.max_side_m),
        plan.layout_seed,
    )
    .map_err(|e| e.in_stage("gen"))
}

/// Occupancy and raw radio map of a planned scene.
pub fn trace_scene(cfg: &Config, plan: &ScenePlan) -> Result<(OccupancyGrid, RadioMap)> {
    let occupancy = rasterize(&scene_layout(cfg, plan)?, &cfg.grid);
    let beams = cfg.beam_set()?;
    let radio = trace_all(&occupancy, &cfg.grid, &beams, &cfg.radio).map_err(|e| e.in_stage("trace"))?;
    Ok((occupancy, radio))
}

pub fn simulate_scene(cfg: &Config, plan: &ScenePlan) -> Result<SceneRecord> {
    let (occupancy, radio) = trace_scene(cfg, plan)?;
    let scaling = cfg.scaling_spec().map_err(|e| e.in_stage("scale"))?;
    let scaled = scale(&radio, &occupancy, &scaling).map_err(|e| e.in_stage("scale"))?;
    let mask = sample_with_placement(
        &cfg.grid,
        &occupancy,
        cfg.sampling.placement,
        cfg.sampling.rate,
        plan.mask_seed,
    )
    .map_err(|e| e.in_stage("sample"))?;
    Ok(SceneRecord {
        info: plan.info,
        occupancy,
        radio,
        scaled,
        mask,
    })
}

/// Simulates every planned scenario; scenes run in parallel, results keep
/// plan order.
pub fn simulate(cfg: &Config) -> Result<Vec<SceneRecord>> {
    cfg.validate()?;
    plan_scenes(cfg).par_iter().map(|p| simulate_scene(cfg, p)).collect()
}

pub fn manifest_fields(cfg: &Config) -> Result<ManifestFields> {
    Ok(ManifestFields {
        master_seed: cfg.seed,
        sampling_rate: cfg.sampling.rate,
        sensor_placement: cfg.sampling.placement,
        grid: cfg.grid.clone(),
        beams: cfg.beams.clone(),
        radio: cfg.radio.clone(),
        scaling: cfg.scaling_spec()?,
    })
}

/// Reconstruction and sensing output for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneEstimate {
    pub reconstructed: ScaledRadioMap,
    pub votes: Vec<BinaryMap>,
    pub sensed: BinaryMap,
}

pub fn sense_scene(cfg: &Config, scene: &SceneRecord) -> Result<SceneEstimate> {
    let sparse = apply_mask(&scene.scaled, &scene.mask).map_err(|e| e.in_stage("sample"))?;
    let reconstructed =
        reconstruct_idw(&sparse, &cfg.grid, &cfg.reconstruction).map_err(|e| e.in_stage("reconstruct"))?;
    let votes = segment_all(&reconstructed, cfg.scaling.psi_max).map_err(|e| e.in_stage("sense"))?;
    let sensed = hard_vote(&votes).map_err(|e| e.in_stage("sense"))?;
    Ok(SceneEstimate {
        reconstructed,
        votes,
        sensed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneReport {
    #[serde(flatten)]
    pub info: SceneInfo,
    pub occupied_cells: usize,
    pub sensed_cells: usize,
    pub sensors: usize,
    pub mse_construction: f64,
    pub mse_sensing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub iou_threshold: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub master_seed: u64,
    pub n_scenarios: usize,
    pub sampling_rate: f64,
    pub mse_construction: f64,
    pub mse_sensing: f64,
    pub mean_weighted_loss: f64,
    pub mean_cross_entropy: f64,
    pub ap: f64,
    pub ap_per_threshold: Vec<ThresholdSummary>,
    pub scenarios: Vec<SceneReport>,
    #[serde(skip)]
    pub pr_csv: String,
}

/// Scores reconstructions and sensed maps against the simulated truth.
pub fn evaluate(cfg: &Config, scenes: &[SceneRecord]) -> Result<PipelineReport> {
    let estimates: Vec<SceneEstimate> = scenes.par_iter().map(|s| sense_scene(cfg, s)).collect::<Result<_>>()?;
    let eval = |e: Error| e.in_stage("eval");
    let connectivity = cfg.metrics.connectivity;
    let mut scene_reports = Vec::with_capacity(scenes.len());
    let mut truths = Vec::with_capacity(scenes.len());
    let mut predictions = Vec::with_capacity(scenes.len());
    let (mut wl, mut ce) = (0.0, 0.0);
    for (s, e) in scenes.iter().zip(&estimates) {
        let mse_c = mse_construction(std::slice::from_ref(&s.scaled.0), std::slice::from_ref(&e.reconstructed.0))
            .map_err(eval)?;
        let mse_s = mse_sensing(std::slice::from_ref(&s.occupancy), std::slice::from_ref(&e.sensed)).map_err(eval)?;
        wl += weighted_construction_loss(&s.scaled, &e.reconstructed).map_err(eval)?;
        let confidence = soft_vote(&e.reconstructed, cfg.scaling.psi_max).map_err(eval)?;
        ce += occupancy_cross_entropy(
            &s.occupancy,
            &confidence,
            cfg.scaling.psi_max,
            cfg.beams.n_beams,
            cfg.metrics.clamp_eps,
        )
        .map_err(eval)?;
        truths.push(InstanceSet::from_map(&s.occupancy, connectivity));
        predictions.push(InstanceSet::from_votes(&e.sensed, &e.votes, connectivity).map_err(eval)?);
        scene_reports.push(SceneReport {
            info: s.info,
            occupied_cells: s.occupancy.count_ones(),
            sensed_cells: e.sensed.count_ones(),
            sensors: s.mask.k(),
            mse_construction: mse_c,
            mse_sensing: mse_s,
        });
    }
    let n = scenes.len().max(1) as f64;
    let truth_maps: Vec<_> = scenes.iter().map(|s| s.scaled.0.clone()).collect();
    let recon_maps: Vec<_> = estimates.iter().map(|e| e.reconstructed.0.clone()).collect();
    let occ: Vec<_> = scenes.iter().map(|s| s.occupancy.clone()).collect();
    let sensed: Vec<_> = estimates.iter().map(|e| e.sensed.clone()).collect();
    let ap = average_precision(&predictions, &truths).map_err(eval)?;
    Ok(PipelineReport {
        master_seed: cfg.seed,
        n_scenarios: scenes.len(),
        sampling_rate: cfg.sampling.rate,
        mse_construction: mse_construction(&truth_maps, &recon_maps).map_err(eval)?,
        mse_sensing: mse_sensing(&occ, &sensed).map_err(eval)?,
        mean_weighted_loss: wl / n,
        mean_cross_entropy: ce / n,
        ap: ap.ap,
        ap_per_threshold: ap
            .per_threshold
            .iter()
            .map(|t| ThresholdSummary {
                iou_threshold: t.iou_threshold,
                ap: t.ap,
            })
            .collect(),
        scenarios: scene_reports,
        pr_csv: pr_curves_csv(&ap),
    })
}

pub const REPORT_FILE: &str = "report.json";
pub const PR_FILE: &str = "pr_curves.csv";
pub const DATASET_DIR: &str = "dataset";

/// Runs every stage and writes `report.json`, `pr_curves.csv` and, when
/// `write_dataset` is set, the binary dataset under `output_dir`.
pub fn run_pipeline(cfg: &Config, write_dataset: bool) -> Result<PipelineReport> {
    cfg.validate()?;
    let scenes = simulate(cfg)?;
    let report = evaluate(cfg, &scenes)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    if write_dataset {
        export_dataset(&scenes, &out.join(DATASET_DIR), manifest_fields(cfg)?)?;
    }
    write_json(&out.join(REPORT_FILE), &report)?;
    fs::write(out.join(PR_FILE), &report.pr_csv)?;
    Ok(report)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub epsilon: f64,
    pub n_votes: usize,
    pub hoeffding: f64,
    /// Only for odd vote counts.
    pub exact: Option<f64>,
    pub monte_carlo: Option<f64>,
    pub std_error: Option<f64>,
}

/// Hoeffding bound, exact majority error and a simulated estimate over the
/// configured epsilon and vote-count grids.
pub fn bound_table(cfg: &Config) -> Result<Vec<BoundRow>> {
    let x = &cfg.experiment;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points: Vec<(f64, usize, u64)> = x
        .epsilons
        .iter()
        .flat_map(|&eps| (1..=x.max_votes).map(move |n| (eps, n)))
        .map(|(eps, n)| (eps, n, rng.next_u64()))
        .collect();
    points
        .par_iter()
        .map(|&(eps, n, seed)| {
            let hoeffding = hoeffding_bound(n, eps)?;
            if n % 2 == 0 {
                return Ok(BoundRow {
                    epsilon: eps,
                    n_votes: n,
                    hoeffding,
                    exact: None,
                    monte_carlo: None,
                    std_error: None,
                });
            }
            let exact = exact_majority_error(n, eps)?;
            let mc = monte_carlo_majority_error(n, eps, x.mc_trials, seed)?;
            Ok(BoundRow {
                epsilon: eps,
                n_votes: n,
                hoeffding,
                exact: Some(exact),
                monte_carlo: Some(mc.rate),
                std_error: Some(mc.std_error(exact)),
            })
        })
        .collect()
}

/// Per-scene hard-vote sensing error over growing direction subsets, using
/// ground-truth thresholding of the raw maps. Scenes follow the configured
/// dataset classes.
pub fn direction_curves(cfg: &Config) -> Result<Vec<Vec<(usize, f64)>>> {
    cfg.validate()?;
    let noise = cfg.radio.noise_mw();
    plan_scenes(cfg)
        .par_iter()
        .map(|plan| {
            let (occ, radio) = trace_scene(cfg, plan)?;
            ensemble_mse_experiment(
                &occ,
                &radio,
                noise,
                cfg.experiment.noise_tolerance_mw,
                &cfg.experiment.direction_counts,
                plan.mask_seed,
            )
            .map_err(|e| e.in_stage("sense"))
        })
        .collect()
}

/// Mean of per-scene curves, point by point.
pub fn average_curve(curves: &[Vec<(usize, f64)>]) -> Vec<(usize, f64)> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .map(|(i, &(n, _))| (n, curves.iter().map(|c| c[i].1).sum::<f64>() / curves.len() as f64))
        .collect()
}

pub const BOUNDS_FILE: &str = "bounds.csv";
pub const DIRECTIONS_FILE: &str = "direction_mse.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct BoundExperiment {
    pub bounds: Vec<BoundRow>,
    pub direction_curve: Vec<(usize, f64)>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn bounds_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from("epsilon,n_votes,hoeffding,exact,monte_carlo,std_error\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epsilon,
            r.n_votes,
            r.hoeffding,
            opt(r.exact),
            opt(r.monte_carlo),
            opt(r.std_error)
        );
    }
    out
}

pub fn direction_csv(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("n_directions,mse\n");
    for (n, mse) in curve {
        let _ = writeln!(out, "{n},{mse}");
    }
    out
}

/// Writes `bounds.csv` and `direction_mse.csv` under `output_dir`. The
/// direction curve uses `experiment.direction_scenes` scenes of the first
/// configured class.
pub fn run_bound_experiment(cfg: &Config) -> Result<BoundExperiment> {
    cfg.validate()?;
    let bounds = bound_table(cfg)?;
    let mut scenes_cfg = cfg.clone();
    let class = cfg
        .dataset
        .classes
        .first()
        .map(|c| c.class)
        .ok_or_else(|| Error::Config("no scenario class configured".into()))?;
    scenes_cfg.dataset = crate::config::DatasetConfig::only(class, cfg.experiment.direction_scenes);
    let direction_curve = average_curve(&direction_curves(&scenes_cfg)?);
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join(BOUNDS_FILE), bounds_csv(&bounds))?;
    fs::write(cfg.output_dir.join(DIRECTIONS_FILE), direction_csv(&direction_curve))?;
    Ok(BoundExperiment {
        bounds,
        direction_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DatasetConfig;
    use crate::scenario::{GridSpec, ScenarioClass};

    fn small_cfg() -> Config {
        let mut cfg = Config::default();
        cfg.grid = GridSpec::new(100.0, 100.0, 24, 24).unwrap();
        cfg.dataset = DatasetConfig::only(ScenarioClass::S1, 3);
        cfg.seed = 9;
        cfg
    }

    #[test]
    fn plans_are_deterministic_and_respect_classes() {
        let cfg = Config::default();
        let a = plan_scenes(&cfg);
        assert_eq!(a, plan_scenes(&cfg));
        assert_eq!(a.len(), 301);
        assert!(a[..250].iter().all(|p| (1..=5).contains(&p.info.n_obstacles)));
        assert!(a[250..300].iter().all(|p| p.info.n_obstacles == 6));
        assert_eq!(a[300].info.n_obstacles, 8);
        assert!(a.iter().enumerate().all(|(i, p)| p.info.index == i));
    }

    #[test]
    fn small_pipeline_reports_everything() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg();
        cfg.output_dir = dir.path().to_path_buf();
        let report = run_pipeline(&cfg, true).unwrap();
        assert_eq!(report.n_scenarios, 3);
        assert!(report.mse_construction >= 0.0 && report.mse_sensing <= 1.0);
        assert!((0.0..=1.0).contains(&report.ap));
        assert_eq!(report.ap_per_threshold.len(), 10);
        assert!(dir.path().join(REPORT_FILE).exists());
        assert!(dir.path().join(PR_FILE).exists());
        assert!(dir.path().join(DATASET_DIR).join("manifest.json").exists());
    }

    #[test]
    fn full_sampling_rate_is_rejected() {
        let mut cfg = small_cfg();
        cfg.sampling.rate = 1.0;
        assert!(matches!(run_pipeline(&cfg, false), Err(Error::Config(_))));
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let err = Error::argument("x").in_stage("trace");
        assert!(err.to_string().starts_with("trace stage failed"));
    }

    #[test]
    fn bound_rows_cover_grid() {
        let mut cfg = small_cfg();
        cfg.experiment.epsilons = vec![0.2];
        cfg.experiment.max_votes = 6;
        cfg.experiment.mc_trials = 2000;
        let rows = bound_table(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.exact.is_some() == (r.n_votes % 2 == 1)));
        assert!(bounds_csv(&rows).lines().count() == 7);
    }
}
