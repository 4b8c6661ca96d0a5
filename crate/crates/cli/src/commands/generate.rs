//! `scengen generate`: sample hourly scenarios from a trained model.
//!
//! The hourly disaggregation profiles are rebuilt from the same dataset the
//! model was trained on; the dataset fingerprint stored in the model
//! artifact guards against mixing a model with foreign data.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use scengen::artifact::{load_model, write_scenario_set};
use scengen::dataset::{aggregate_weekly, extract_profiles, DEFAULT_MEAN_FLOOR};
use scengen::scenario::generate_set;
use scengen::{Error, Result};

use crate::settings::{
    load_panel, load_settings, overlay, overlay_opt, require, resolve_out, settings_hash,
    write_snapshot,
};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trained model artifact (model.json)
    #[arg(long)]
    model: Option<PathBuf>,
    /// The hourly CSV the model was trained on (profiles are rebuilt from it)
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    capacity: Option<PathBuf>,
    #[arg(long)]
    mean_floor: Option<f64>,
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    weeks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSettings {
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub capacity: Option<PathBuf>,
    pub mean_floor: f64,
    pub scenarios: usize,
    pub weeks: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        GenerateSettings {
            model: None,
            data: None,
            capacity: None,
            mean_floor: DEFAULT_MEAN_FLOOR,
            scenarios: 200,
            weeks: 52,
            seed: 1,
            threads: 1,
            out: None,
        }
    }
}

pub fn run(args: GenerateArgs) -> Result<()> {
    let mut s: GenerateSettings = load_settings(&args.config)?;
    overlay_opt(&mut s.model, args.model);
    overlay_opt(&mut s.data, args.data);
    overlay_opt(&mut s.capacity, args.capacity);
    overlay(&mut s.mean_floor, args.mean_floor);
    overlay(&mut s.scenarios, args.scenarios);
    overlay(&mut s.weeks, args.weeks);
    overlay(&mut s.seed, args.seed);
    overlay(&mut s.threads, args.threads);
    overlay_opt(&mut s.out, args.out);
    let out = resolve_out(None, s.out.clone(), "generate")?;
    s.out = Some(out.clone());
    let model_path = require(s.model.clone(), "model")?;
    let data = require(s.data.clone(), "data")?;

    let (model, model_hash, _) = load_model(&model_path)?;
    let panel = load_panel(&data, &s.capacity)?;
    if panel.plant_ids != model.plant_ids {
        return Err(Error::Config(format!(
            "plant set mismatch: model has {:?}, data has {:?}",
            model.plant_ids, panel.plant_ids
        )));
    }
    if panel.fingerprint() != model.dataset_hash {
        return Err(Error::Config(
            "dataset fingerprint differs from the one the model was trained on; \
             profiles would not correspond to the stored posteriors"
                .into(),
        ));
    }
    let weekly = aggregate_weekly(&panel)?;
    let profiles = extract_profiles(&panel, &weekly, s.mean_floor)?;

    let set = generate_set(
        &model,
        &model.posteriors,
        &profiles,
        s.scenarios,
        s.weeks,
        s.seed,
        s.threads,
    )?;
    let config_hash = settings_hash(&s)?;
    write_scenario_set(&out, &set, &model_hash, &config_hash)?;
    write_snapshot(&out, "generate_config.json", &s)?;
    println!(
        "generated {} scenarios × {} weeks × {} plants; clipped fraction {:.4}; outputs in {}",
        set.n_scenarios,
        set.horizon_weeks,
        set.n_plants,
        set.clipped_fraction(),
        out.display()
    );
    Ok(())
}
