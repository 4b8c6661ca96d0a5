//! `scengen validate`: compare a scenario directory against historical
//! data and write the report JSON plus plot-ready CSV tables.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use scengen::artifact::{read_scenario_hourly_rows, read_scenario_weekly, FORMAT_VERSION};
use scengen::dataset::aggregate_weekly;
use scengen::report::{
    density_tables, validate_hourly, validate_weekly, write_validation_report, ValidationReport,
    DEFAULT_SUBSAMPLE_CAP,
};
use scengen::stats::{Basis, PlantSamples};
use scengen::Result;

use crate::settings::{
    load_panel, load_settings, overlay, overlay_opt, parse_basis, require, resolve_out,
    settings_hash, write_snapshot,
};

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Historical hourly CSV
    #[arg(long)]
    hist: Option<PathBuf>,
    #[arg(long)]
    capacity: Option<PathBuf>,
    /// Scenario directory written by `generate`
    #[arg(long)]
    scen: Option<PathBuf>,
    /// Comparison basis: weekly (default) or hourly
    #[arg(long)]
    basis: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Per-side subsample cap for the hourly basis
    #[arg(long)]
    subsample_cap: Option<usize>,
    /// Seed of the hourly-basis subsampling
    #[arg(long)]
    seed: Option<u64>,
    /// Bins of the density tables
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSettings {
    pub hist: Option<PathBuf>,
    pub capacity: Option<PathBuf>,
    pub scen: Option<PathBuf>,
    pub basis: String,
    pub alpha: f64,
    pub subsample_cap: usize,
    pub seed: u64,
    pub bins: usize,
    pub out: Option<PathBuf>,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        ValidateSettings {
            hist: None,
            capacity: None,
            scen: None,
            basis: "weekly".into(),
            alpha: 0.05,
            subsample_cap: DEFAULT_SUBSAMPLE_CAP,
            seed: 0,
            bins: 50,
            out: None,
        }
    }
}

pub fn run(args: ValidateArgs) -> Result<()> {
    let mut s: ValidateSettings = load_settings(&args.config)?;
    overlay_opt(&mut s.hist, args.hist);
    overlay_opt(&mut s.capacity, args.capacity);
    overlay_opt(&mut s.scen, args.scen);
    overlay(&mut s.basis, args.basis);
    overlay(&mut s.alpha, args.alpha);
    overlay(&mut s.subsample_cap, args.subsample_cap);
    overlay(&mut s.seed, args.seed);
    overlay(&mut s.bins, args.bins);
    overlay_opt(&mut s.out, args.out);
    let out = resolve_out(None, s.out.clone(), "validate")?;
    s.out = Some(out.clone());
    let hist = require(s.hist.clone(), "hist")?;
    let scen = require(s.scen.clone(), "scen")?;
    let basis = parse_basis(&s.basis)?;

    let panel = load_panel(&hist, &s.capacity)?;
    let weekly = aggregate_weekly(&panel)?;

    let (meta, ks, corr, densities) = match basis {
        Basis::Weekly => {
            let (meta, pooled) = read_scenario_weekly(&scen)?;
            let (ks, corr) =
                validate_weekly(&weekly, &panel.plant_ids, &meta.plant_ids, &pooled, s.alpha)?;
            let hist_samples = PlantSamples::from_columns(&panel.plant_ids, &weekly.values);
            let scen_samples = PlantSamples::from_columns(&meta.plant_ids, &pooled);
            let densities = density_tables(&hist_samples, &scen_samples, s.bins)?;
            (meta, ks, corr, densities)
        }
        Basis::HourlySubsampled => {
            let (meta, rows) = read_scenario_hourly_rows(&scen)?;
            let scen_samples = PlantSamples::from_columns(&meta.plant_ids, &rows)
                .subsample(s.subsample_cap, s.seed.wrapping_add(1));
            let (ks, corr) = validate_hourly(
                &panel,
                &meta.plant_ids,
                &scen_samples,
                &rows,
                s.alpha,
                s.subsample_cap,
                s.seed,
            )?;
            let hist_samples = PlantSamples::from_columns(&panel.plant_ids, &panel.values)
                .subsample(s.subsample_cap, s.seed);
            let densities = density_tables(&hist_samples, &scen_samples, s.bins)?;
            (meta, ks, corr, densities)
        }
    };

    let report = ValidationReport {
        format_version: FORMAT_VERSION,
        tool_version: scengen::artifact::tool_version().to_string(),
        config_hash: settings_hash(&s)?,
        basis,
        alpha: s.alpha,
        n_scenarios: meta.n_scenarios,
        horizon_weeks: meta.horizon_weeks,
        clipped_fraction: meta.clipped_fraction,
        ks,
        corr,
    };
    write_validation_report(&out, &report, &densities)?;
    write_snapshot(&out, "validate_config.json", &s)?;
    println!(
        "ks pass rate {:.3} at alpha {}; correlation mae {:.4} (max {:.4}); report in {}",
        report.ks.pass_rate,
        report.alpha,
        report.corr.mae,
        report.corr.max_err,
        out.display()
    );
    Ok(())
}
