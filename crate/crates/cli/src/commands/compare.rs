//! `scengen compare`: generate scenario sets from two model artifacts on
//! paired seeds and emit the side-by-side validation tables.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use scengen::artifact::load_model;
use scengen::dataset::{aggregate_weekly, extract_profiles, HourlyPanel, DEFAULT_MEAN_FLOOR};
use scengen::report::{
    validate_hourly, validate_weekly, write_compare_report, CompareReport, DEFAULT_SUBSAMPLE_CAP,
};
use scengen::scenario::generate_set;
use scengen::stats::{Basis, CorrReport, KsBattery};
use scengen::vae::VaeModel;
use scengen::{Error, Result};

use crate::settings::{
    load_panel, load_settings, overlay, overlay_opt, parse_basis, require, resolve_out,
    settings_hash, write_snapshot,
};

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// First model artifact (typically the rbf variant)
    #[arg(long)]
    model_a: Option<PathBuf>,
    /// Second model artifact (typically the pure baseline)
    #[arg(long)]
    model_b: Option<PathBuf>,
    /// The hourly CSV both models were trained on
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
    basis: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    subsample_cap: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSettings {
    pub model_a: Option<PathBuf>,
    pub model_b: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub capacity: Option<PathBuf>,
    pub mean_floor: f64,
    pub scenarios: usize,
    pub weeks: usize,
    pub seed: u64,
    pub basis: String,
    pub alpha: f64,
    pub subsample_cap: usize,
    pub threads: usize,
    pub out: Option<PathBuf>,
}

impl Default for CompareSettings {
    fn default() -> Self {
        CompareSettings {
            model_a: None,
            model_b: None,
            data: None,
            capacity: None,
            mean_floor: DEFAULT_MEAN_FLOOR,
            scenarios: 200,
            weeks: 52,
            seed: 1,
            basis: "weekly".into(),
            alpha: 0.05,
            subsample_cap: DEFAULT_SUBSAMPLE_CAP,
            threads: 1,
            out: None,
        }
    }
}

fn check_model(model: &VaeModel, panel: &HourlyPanel, which: &str) -> Result<()> {
    if panel.plant_ids != model.plant_ids {
        return Err(Error::Config(format!(
            "{which}: plant set differs from the data file"
        )));
    }
    if panel.fingerprint() != model.dataset_hash {
        return Err(Error::Config(format!(
            "{which}: dataset fingerprint differs from the one the model was trained on"
        )));
    }
    Ok(())
}

pub fn run(args: CompareArgs) -> Result<()> {
    let mut s: CompareSettings = load_settings(&args.config)?;
    overlay_opt(&mut s.model_a, args.model_a);
    overlay_opt(&mut s.model_b, args.model_b);
    overlay_opt(&mut s.data, args.data);
    overlay_opt(&mut s.capacity, args.capacity);
    overlay(&mut s.mean_floor, args.mean_floor);
    overlay(&mut s.scenarios, args.scenarios);
    overlay(&mut s.weeks, args.weeks);
    overlay(&mut s.seed, args.seed);
    overlay(&mut s.basis, args.basis);
    overlay(&mut s.alpha, args.alpha);
    overlay(&mut s.subsample_cap, args.subsample_cap);
    overlay(&mut s.threads, args.threads);
    overlay_opt(&mut s.out, args.out);
    let out = resolve_out(None, s.out.clone(), "compare")?;
    s.out = Some(out.clone());
    let model_a_path = require(s.model_a.clone(), "model-a")?;
    let model_b_path = require(s.model_b.clone(), "model-b")?;
    let data = require(s.data.clone(), "data")?;
    let basis = parse_basis(&s.basis)?;

    let (model_a, _, _) = load_model(&model_a_path)?;
    let (model_b, _, _) = load_model(&model_b_path)?;
    let panel = load_panel(&data, &s.capacity)?;
    check_model(&model_a, &panel, "model-a")?;
    check_model(&model_b, &panel, "model-b")?;
    let weekly = aggregate_weekly(&panel)?;
    let profiles = extract_profiles(&panel, &weekly, s.mean_floor)?;

    // Paired seeds: both variants disaggregate with the same draw stream.
    let set_a = generate_set(
        &model_a,
        &model_a.posteriors,
        &profiles,
        s.scenarios,
        s.weeks,
        s.seed,
        s.threads,
    )?;
    let set_b = generate_set(
        &model_b,
        &model_b.posteriors,
        &profiles,
        s.scenarios,
        s.weeks,
        s.seed,
        s.threads,
    )?;

    let validate = |set: &scengen::scenario::ScenarioSet| -> Result<(KsBattery, CorrReport)> {
        match basis {
            Basis::Weekly => validate_weekly(
                &weekly,
                &panel.plant_ids,
                &set.plant_ids,
                &set.pooled_weekly(),
                s.alpha,
            ),
            Basis::HourlySubsampled => {
                let samples = set.hourly_samples(s.subsample_cap, s.seed.wrapping_add(1));
                validate_hourly(
                    &panel,
                    &set.plant_ids,
                    &samples,
                    &set.pooled_hourly(),
                    s.alpha,
                    s.subsample_cap,
                    s.seed,
                )
            }
        }
    };
    let (ks_a, corr_a) = validate(&set_a)?;
    let (ks_b, corr_b) = validate(&set_b)?;

    let report = CompareReport::new(
        settings_hash(&s)?,
        model_a.variant.to_string(),
        model_b.variant.to_string(),
        basis,
        s.alpha,
        ks_a,
        ks_b,
        corr_a,
        corr_b,
    );
    write_compare_report(&out, &report)?;
    write_snapshot(&out, "compare_config.json", &s)?;
    println!(
        "ks pass rate: {}={:.3} {}={:.3}; corr mae: {}={:.4} {}={:.4}; tables in {}",
        report.variant_a,
        report.ks_a.pass_rate,
        report.variant_b,
        report.ks_b.pass_rate,
        report.variant_a,
        report.corr_a.mae,
        report.variant_b,
        report.corr_b.mae,
        out.display()
    );
    Ok(())
}
