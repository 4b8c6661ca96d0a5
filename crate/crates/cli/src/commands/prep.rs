//! `scengen prep`: weekly aggregation, profile extraction, and split
//! preview for an hourly dataset.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use scengen::dataset::{
    aggregate_weekly, extract_profiles, split, SplitSpec, DEFAULT_MEAN_FLOOR, HOURS_PER_WEEK,
};
use scengen::Result;

use crate::settings::{
    load_settings, overlay, overlay_opt, require, resolve_out, settings_hash, write_snapshot,
};

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hourly generation CSV (`timestamp,<plant_id>,...`)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Capacity file (`plant_id,capacity,kind`)
    #[arg(long)]
    capacity: Option<PathBuf>,
    #[arg(long)]
    mean_floor: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepSettings {
    pub data: Option<PathBuf>,
    pub capacity: Option<PathBuf>,
    pub mean_floor: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for PrepSettings {
    fn default() -> Self {
        PrepSettings {
            data: None,
            capacity: None,
            mean_floor: DEFAULT_MEAN_FLOOR,
            train_fraction: 0.8,
            seed: 0,
            out: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct PrepSummary {
    tool_version: String,
    config_hash: String,
    n_hours: usize,
    n_plants: usize,
    n_weeks: usize,
    plant_ids: Vec<String>,
    plant_kinds: Vec<String>,
    fallback_profiles: usize,
    max_profile_mean_abs_deviation: f64,
    train_weeks: usize,
    test_weeks: usize,
}

#[derive(Debug, Serialize)]
struct SplitPreview {
    tool_version: String,
    config_hash: String,
    train_indices: Vec<usize>,
    test_indices: Vec<usize>,
}

pub fn run(args: PrepArgs) -> Result<()> {
    let mut s: PrepSettings = load_settings(&args.config)?;
    overlay_opt(&mut s.data, args.data);
    overlay_opt(&mut s.capacity, args.capacity);
    overlay(&mut s.mean_floor, args.mean_floor);
    overlay(&mut s.train_fraction, args.train_fraction);
    overlay(&mut s.seed, args.seed);
    overlay_opt(&mut s.out, args.out);
    let out = resolve_out(None, s.out.clone(), "prep")?;
    s.out = Some(out.clone());
    let data = require(s.data.clone(), "data")?;

    let panel = crate::settings::load_panel(&data, &s.capacity)?;
    let weekly = aggregate_weekly(&panel)?;
    let profiles = extract_profiles(&panel, &weekly, s.mean_floor)?;
    let (train_v, test_v) = split(
        &weekly,
        &SplitSpec {
            train_fraction: s.train_fraction,
            seed: s.seed,
        },
    )?;

    fs::create_dir_all(&out)?;
    let mut wk = BufWriter::new(fs::File::create(out.join("weekly.csv"))?);
    writeln!(wk, "week,plant_id,value")?;
    for w in 0..weekly.n_weeks() {
        for (p, id) in panel.plant_ids.iter().enumerate() {
            writeln!(wk, "{w},{id},{}", weekly.values.at(w, p))?;
        }
    }
    wk.flush()?;

    let mut fallback = 0usize;
    let mut max_dev = 0.0f64;
    for w in 0..weekly.n_weeks() {
        for p in 0..weekly.n_plants() {
            if weekly.values.at(w, p) < s.mean_floor {
                fallback += 1;
            } else {
                let mean: f64 = profiles.profile(w, p).iter().sum::<f64>() / HOURS_PER_WEEK as f64;
                max_dev = max_dev.max((mean - 1.0).abs());
            }
        }
    }
    let config_hash = settings_hash(&s)?;
    let summary = PrepSummary {
        tool_version: scengen::artifact::tool_version().to_string(),
        config_hash: config_hash.clone(),
        n_hours: panel.n_hours(),
        n_plants: panel.n_plants(),
        n_weeks: weekly.n_weeks(),
        plant_ids: panel.plant_ids.clone(),
        plant_kinds: panel.plant_kinds.iter().map(ToString::to_string).collect(),
        fallback_profiles: fallback,
        max_profile_mean_abs_deviation: max_dev,
        train_weeks: train_v.n_weeks(),
        test_weeks: test_v.n_weeks(),
    };
    fs::write(
        out.join("prep_summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    let preview = SplitPreview {
        tool_version: scengen::artifact::tool_version().to_string(),
        config_hash,
        train_indices: train_v.source_weeks,
        test_indices: test_v.source_weeks,
    };
    fs::write(
        out.join("split.json"),
        serde_json::to_string_pretty(&preview)?,
    )?;
    write_snapshot(&out, "prep_config.json", &s)?;
    println!(
        "{} weeks × {} plants aggregated; {} fallback profiles; outputs in {}",
        summary.n_weeks,
        summary.n_plants,
        summary.fallback_profiles,
        out.display()
    );
    Ok(())
}
