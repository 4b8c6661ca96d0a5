//! `scengen train`: fit a scenario model, searching the gamma grid for
//! rbf variants, and write the model artifact plus the training curve.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use scengen::artifact::save_model;
use scengen::dataset::{aggregate_weekly, split, SplitSpec};
use scengen::rbf::InverseNetConfig;
use scengen::vae::{train_gamma_grid, DataContext, TrainConfig, Variant};
use scengen::Result;

use crate::settings::{
    load_panel, load_settings, overlay, overlay_opt, require, resolve_out, settings_hash,
    write_snapshot,
};

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    capacity: Option<PathBuf>,
    /// Model variant: rbf-implicit, rbf-explicit, or pure
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kl_weight: Option<f64>,
    #[arg(long)]
    d_latent: Option<usize>,
    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Base gamma grid, comma separated (scaled by the median heuristic)
    #[arg(long, value_delimiter = ',')]
    gamma_grid: Option<Vec<f64>>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    center_cap: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub data: Option<PathBuf>,
    pub capacity: Option<PathBuf>,
    pub variant: String,
    pub train_fraction: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub kl_weight: f64,
    pub d_latent: usize,
    pub hidden: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub patience: usize,
    pub center_cap: usize,
    pub inverse_epochs: usize,
    pub inverse_batch_size: usize,
    pub inverse_learning_rate: f64,
    pub threads: usize,
    pub out: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let cfg = TrainConfig::default();
        let inv = InverseNetConfig::default();
        TrainSettings {
            data: None,
            capacity: None,
            variant: "rbf-implicit".into(),
            train_fraction: 0.8,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            seed: cfg.seed,
            kl_weight: cfg.kl_weight,
            d_latent: cfg.d_latent,
            hidden: cfg.hidden_widths,
            gamma_grid: cfg.gamma_grid,
            patience: cfg.patience,
            center_cap: cfg.center_cap,
            inverse_epochs: inv.epochs,
            inverse_batch_size: inv.batch_size,
            inverse_learning_rate: inv.learning_rate,
            threads: 1,
            out: None,
        }
    }
}

impl TrainSettings {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
            kl_weight: self.kl_weight,
            d_latent: self.d_latent,
            hidden_widths: self.hidden.clone(),
            gamma_grid: self.gamma_grid.clone(),
            patience: self.patience,
            center_cap: self.center_cap,
            inverse_net: InverseNetConfig {
                epochs: self.inverse_epochs,
                batch_size: self.inverse_batch_size,
                learning_rate: self.inverse_learning_rate,
            },
        }
    }
}

pub fn run(args: TrainArgs) -> Result<()> {
    let mut s: TrainSettings = load_settings(&args.config)?;
    overlay_opt(&mut s.data, args.data);
    overlay_opt(&mut s.capacity, args.capacity);
    overlay(&mut s.variant, args.variant);
    overlay(&mut s.train_fraction, args.train_fraction);
    overlay(&mut s.epochs, args.epochs);
    overlay(&mut s.batch_size, args.batch_size);
    overlay(&mut s.learning_rate, args.learning_rate);
    overlay(&mut s.seed, args.seed);
    overlay(&mut s.kl_weight, args.kl_weight);
    overlay(&mut s.d_latent, args.d_latent);
    overlay(&mut s.hidden, args.hidden);
    overlay(&mut s.gamma_grid, args.gamma_grid);
    overlay(&mut s.patience, args.patience);
    overlay(&mut s.center_cap, args.center_cap);
    overlay(&mut s.threads, args.threads);
    overlay_opt(&mut s.out, args.out);
    let out = resolve_out(None, s.out.clone(), "train")?;
    s.out = Some(out.clone());
    let data = require(s.data.clone(), "data")?;
    let variant: Variant = s.variant.parse()?;

    let panel = load_panel(&data, &s.capacity)?;
    let weekly = aggregate_weekly(&panel)?;
    let (train_v, test_v) = split(
        &weekly,
        &SplitSpec {
            train_fraction: s.train_fraction,
            seed: s.seed,
        },
    )?;
    let ctx = DataContext {
        dataset_hash: panel.fingerprint(),
        plant_ids: panel.plant_ids.clone(),
        plant_kinds: panel.plant_kinds.clone(),
    };
    let cfg = s.to_train_config();
    let (model, selection) = train_gamma_grid(variant, &train_v, &test_v, &cfg, &ctx, s.threads)?;

    let config_hash = settings_hash(&s)?;
    fs::create_dir_all(&out)?;
    let model_path = out.join("model.json");
    save_model(&model_path, &model, &config_hash)?;

    let mut log = BufWriter::new(fs::File::create(out.join("training_log.csv"))?);
    writeln!(
        log,
        "epoch,train_total,train_recon,train_kl,test_total,test_recon,test_kl"
    )?;
    for r in &model.training_log {
        writeln!(
            log,
            "{},{},{},{},{},{},{}",
            r.epoch,
            r.train_total,
            r.train_recon,
            r.train_kl,
            r.test_total,
            r.test_recon,
            r.test_kl
        )?;
    }
    log.flush()?;
    #[derive(Serialize)]
    struct SelectionArtifact<'a> {
        tool_version: &'a str,
        config_hash: &'a str,
        #[serde(flatten)]
        report: &'a scengen::vae::SelectionReport,
    }
    let selection_artifact = SelectionArtifact {
        tool_version: scengen::artifact::tool_version(),
        config_hash: &config_hash,
        report: &selection,
    };
    fs::write(
        out.join("selection.json"),
        serde_json::to_string_pretty(&selection_artifact)?,
    )?;
    write_snapshot(&out, "train_config.json", &s)?;

    let gamma = model
        .rbf
        .as_ref()
        .map(|l| format!("{}", l.gamma()))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "trained {} model ({} epochs logged, selected gamma {gamma}); model at {}",
        model.variant,
        model.training_log.len(),
        model_path.display()
    );
    Ok(())
}
