use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use thzmap::config::DatasetConfig;
use thzmap::dataset::{
    export_dataset, import_dataset, read_binary_grid, read_tensor_f32, write_tensor_f32,
};
use thzmap::grid::Grid;
use thzmap::metrics::{average_precision, mse_construction, mse_sensing, InstanceSet};
use thzmap::pipeline::{self, plan_scenes, scene_layout};
use thzmap::propagation::{scale, trace_all};
use thzmap::reconstruct::reconstruct_idw;
use thzmap::sampling::{apply_mask, sample_with_placement, SensorMask, SensorPlacement};
use thzmap::scenario::{occupancy_from_ascii, occupancy_to_ascii, rasterize, ScenarioClass};
use thzmap::sensing::{hard_vote, segment_all};
use thzmap::{Config, Error, Result};

/// THz radio-map simulation, sparse reconstruction and obstacle sensing.
#[derive(Parser)]
#[command(name = "thzmap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file; defaults apply to missing keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sensor sampling rate in (0, 1).
    #[arg(long)]
    rate: Option<f64>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Restrict the dataset to one scenario class.
    #[arg(long, value_parser = parse_class)]
    class: Option<ScenarioClass>,
    /// Number of scenes (with --class, or for the first configured class).
    #[arg(long)]
    scenes: Option<usize>,
    /// Override any config key, e.g. `--set radio.reflection_loss_db=6`.
    #[arg(long = "set", value_name = "KEY=JSON")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate obstacle layouts and occupancy grids.
    Gen(Common),
    /// Trace per-beam received power for an occupancy grid.
    Trace {
        #[command(flatten)]
        common: Common,
        /// ASCII occupancy grid.
        #[arg(long)]
        occupancy: PathBuf,
    },
    /// Draw a sensor mask.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Occupancy grid, required for free-cell placement.
        #[arg(long)]
        occupancy: Option<PathBuf>,
    },
    /// Reconstruct a scaled map from a sensor mask by inverse-distance weighting.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scaled: PathBuf,
        #[arg(long)]
        mask: PathBuf,
    },
    /// Segment and hard-vote a scaled map into an occupancy estimate.
    Sense {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scaled: PathBuf,
    },
    /// Score an occupancy estimate, and optionally a reconstruction.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        sensed: PathBuf,
        #[arg(long, requires = "estimate_map")]
        truth_map: Option<PathBuf>,
        #[arg(long, requires = "truth_map")]
        estimate_map: Option<PathBuf>,
    },
    /// Run every stage and write reports.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Skip writing the binary dataset.
        #[arg(long)]
        no_dataset: bool,
    },
    /// Voting bound table and direction-count curve.
    BoundExperiment(Common),
    /// Simulate scenes and write a binary dataset.
    Export(Common),
    /// Verify a dataset and print a summary.
    Import {
        #[arg(long)]
        dataset: PathBuf,
    },
}

fn parse_class(s: &str) -> std::result::Result<ScenarioClass, String> {
    serde_json::from_value(Value::String(s.to_lowercase())).map_err(|_| format!("unknown class {s}"))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {part} is not inside an object")))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*part) {
                return Err(Error::Config(format!("unknown config key {key}")));
            }
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        node = obj
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown config key {key}")))?;
    }
    Ok(())
}

fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if !c.overrides.is_empty() {
        let mut doc = serde_json::to_value(&cfg)?;
        for item in &c.overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {item} is not KEY=VALUE")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value)?;
        }
        cfg = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(rate) = c.rate {
        cfg.sampling.rate = rate;
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    match (c.class, c.scenes) {
        (Some(class), n) => cfg.dataset = DatasetConfig::only(class, n.unwrap_or(class.default_size())),
        (None, Some(n)) => {
            let class = cfg.dataset.classes.first().map_or(ScenarioClass::S1, |g| g.class);
            cfg.dataset = DatasetConfig::only(class, n);
        }
        (None, None) => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_occupancy(path: &Path) -> Result<Grid<u8>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    occupancy_from_ascii(&text)
}

fn check_grid(cfg: &Config, g: &Grid<u8>) -> Result<()> {
    if (g.rows(), g.cols()) != (cfg.grid.n_rows, cfg.grid.n_cols) {
        return Err(Error::Config(format!(
            "grid file is {}x{} but config grid is {}x{}",
            g.rows(),
            g.cols(),
            cfg.grid.n_rows,
            cfg.grid.n_cols
        )));
    }
    Ok(())
}

fn print_json(v: &Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(v)?) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(c) => {
            let cfg = load_config(&c)?;
            let dir = cfg.output_dir.clone();
            fs::create_dir_all(&dir)?;
            let plans = plan_scenes(&cfg);
            for plan in &plans {
                let layout = scene_layout(&cfg, plan)?;
                let occ = rasterize(&layout, &cfg.grid);
                let stem = format!("scene_{:05}", plan.info.index);
                fs::write(dir.join(format!("{stem}_layout.json")), layout.to_json()?)?;
                fs::write(dir.join(format!("{stem}_occupancy.txt")), occupancy_to_ascii(&occ))?;
            }
            print_json(&json!({ "scenes": plans.len(), "output_dir": dir }))
        }
        Command::Trace { common, occupancy } => {
            let cfg = load_config(&common)?;
            let occ = read_occupancy(&occupancy)?;
            check_grid(&cfg, &occ)?;
            let radio = trace_all(&occ, &cfg.grid, &cfg.beam_set()?, &cfg.radio)?;
            let scaled = scale(&radio, &occ, &cfg.scaling_spec()?)?;
            fs::create_dir_all(&cfg.output_dir)?;
            write_tensor_f32(&cfg.output_dir.join("radio_map.f32"), &radio)?;
            write_tensor_f32(&cfg.output_dir.join("scaled_map.f32"), &scaled)?;
            print_json(&json!({ "shape": radio.shape(), "output_dir": cfg.output_dir }))
        }
        Command::Sample { common, occupancy } => {
            let cfg = load_config(&common)?;
            let occ = match (&occupancy, cfg.sampling.placement) {
                (Some(p), _) => read_occupancy(p)?,
                (None, SensorPlacement::AnyCell) => Grid::filled(cfg.grid.n_rows, cfg.grid.n_cols, 0),
                (None, SensorPlacement::FreeCellsOnly) => {
                    return Err(Error::Config("free-cell placement needs --occupancy".into()))
                }
            };
            check_grid(&cfg, &occ)?;
            let mask = sample_with_placement(&cfg.grid, &occ, cfg.sampling.placement, cfg.sampling.rate, cfg.seed)?;
            fs::create_dir_all(&cfg.output_dir)?;
            fs::write(cfg.output_dir.join("mask.u8"), mask.cells().as_slice())?;
            print_json(&json!({ "sensors": mask.k(), "output_dir": cfg.output_dir }))
        }
        Command::Reconstruct { common, scaled, mask } => {
            let cfg = load_config(&common)?;
            let (r, c, d) = (cfg.grid.n_rows, cfg.grid.n_cols, cfg.beams.n_beams);
            let t = read_tensor_f32(&scaled, r, c, d)?;
            let m = SensorMask::from_cells(read_binary_grid(&mask, r, c)?)?;
            let recon = reconstruct_idw(&apply_mask(&t, &m)?, &cfg.grid, &cfg.reconstruction)?;
            fs::create_dir_all(&cfg.output_dir)?;
            write_tensor_f32(&cfg.output_dir.join("reconstructed.f32"), &recon)?;
            print_json(&json!({ "sensors": m.k(), "output_dir": cfg.output_dir }))
        }
        Command::Sense { common, scaled } => {
            let cfg = load_config(&common)?;
            let t = read_tensor_f32(&scaled, cfg.grid.n_rows, cfg.grid.n_cols, cfg.beams.n_beams)?;
            let sensed = hard_vote(&segment_all(&t, cfg.scaling.psi_max)?)?;
            fs::create_dir_all(&cfg.output_dir)?;
            fs::write(cfg.output_dir.join("sensed.txt"), occupancy_to_ascii(&sensed))?;
            print_json(&json!({ "occupied_cells": sensed.count_ones(), "output_dir": cfg.output_dir }))
        }
        Command::Eval {
            common,
            truth,
            sensed,
            truth_map,
            estimate_map,
        } => {
            let cfg = load_config(&common)?;
            let t = read_occupancy(&truth)?;
            let s = read_occupancy(&sensed)?;
            let conn = cfg.metrics.connectivity;
            let ap = average_precision(&[InstanceSet::from_map(&s, conn)], &[InstanceSet::from_map(&t, conn)])?;
            let mut report = json!({
                "mse_sensing": mse_sensing(std::slice::from_ref(&t), std::slice::from_ref(&s))?,
                "ap": ap.ap,
            });
            if let (Some(tm), Some(em)) = (truth_map, estimate_map) {
                let (r, c, d) = (cfg.grid.n_rows, cfg.grid.n_cols, cfg.beams.n_beams);
                let a = read_tensor_f32(&tm, r, c, d)?;
                let b = read_tensor_f32(&em, r, c, d)?;
                report["mse_construction"] = json!(mse_construction(&[a], &[b])?);
            }
            print_json(&report)
        }
        Command::Pipeline { common, no_dataset } => {
            let cfg = load_config(&common)?;
            let report = pipeline::run_pipeline(&cfg, !no_dataset)?;
            print_json(&json!({
                "n_scenarios": report.n_scenarios,
                "mse_construction": report.mse_construction,
                "mse_sensing": report.mse_sensing,
                "ap": report.ap,
                "output_dir": cfg.output_dir,
            }))
        }
        Command::BoundExperiment(c) => {
            let cfg = load_config(&c)?;
            let result = pipeline::run_bound_experiment(&cfg)?;
            print_json(&json!({
                "bound_rows": result.bounds.len(),
                "direction_curve": result.direction_curve,
                "output_dir": cfg.output_dir,
            }))
        }
        Command::Export(c) => {
            let cfg = load_config(&c)?;
            let scenes = pipeline::simulate(&cfg)?;
            let manifest = export_dataset(&scenes, &cfg.output_dir, pipeline::manifest_fields(&cfg)?)?;
            print_json(&json!({ "n_scenarios": manifest.n_scenarios, "output_dir": cfg.output_dir }))
        }
        Command::Import { dataset } => {
            let (manifest, scenes) = import_dataset(&dataset)?;
            let occupied: usize = scenes.iter().map(|s| s.occupancy.count_ones()).sum();
            print_json(&json!({
                "n_scenarios": manifest.n_scenarios,
                "master_seed": manifest.fields.master_seed,
                "occupied_cells": occupied,
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
