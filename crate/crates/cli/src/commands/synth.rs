//! `scengen synth`: write a deterministic synthetic hourly dataset.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use chrono::Duration;
use clap::Args;
use serde::{Deserialize, Serialize};

use scengen::dataset::synth::{synth_panel, SynthSpec};
use scengen::Result;

use crate::settings::{load_settings, overlay, overlay_opt, resolve_out, write_snapshot};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Settings file (JSON); explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    plants: Option<usize>,
    #[arg(long)]
    weeks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of plants that are solar (rest are wind)
    #[arg(long)]
    solar_fraction: Option<f64>,
    /// Pairwise loading of the common weekly noise factor
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub n_plants: usize,
    pub n_weeks: usize,
    pub seed: u64,
    pub solar_fraction: f64,
    pub rho: f64,
    pub out: Option<PathBuf>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        let spec = SynthSpec::default();
        SynthSettings {
            n_plants: spec.n_plants,
            n_weeks: spec.n_weeks,
            seed: spec.seed,
            solar_fraction: spec.solar_fraction,
            rho: spec.rho,
            out: None,
        }
    }
}

pub fn run(args: SynthArgs) -> Result<()> {
    let mut s: SynthSettings = load_settings(&args.config)?;
    overlay(&mut s.n_plants, args.plants);
    overlay(&mut s.n_weeks, args.weeks);
    overlay(&mut s.seed, args.seed);
    overlay(&mut s.solar_fraction, args.solar_fraction);
    overlay(&mut s.rho, args.rho);
    overlay_opt(&mut s.out, args.out);
    let out = resolve_out(None, s.out.clone(), "synth")?;
    s.out = Some(out.clone());

    let spec = SynthSpec {
        n_plants: s.n_plants,
        n_weeks: s.n_weeks,
        seed: s.seed,
        solar_fraction: s.solar_fraction,
        rho: s.rho,
    };
    let panel = synth_panel(&spec)?;

    fs::create_dir_all(&out)?;
    let data_path = out.join("data.csv");
    let mut f = BufWriter::with_capacity(1 << 20, fs::File::create(&data_path)?);
    writeln!(f, "timestamp,{}", panel.plant_ids.join(","))?;
    for h in 0..panel.n_hours() {
        let ts = panel.start + Duration::hours(h as i64);
        write!(f, "{}", ts.format("%Y-%m-%dT%H:%M:%SZ"))?;
        for p in 0..panel.n_plants() {
            write!(f, ",{}", panel.values.at(h, p))?;
        }
        writeln!(f)?;
    }
    f.flush()?;

    // Values are already per-unit; a unit capacity file preserves them
    // through ingestion and carries each plant's kind.
    let mut caps = BufWriter::new(fs::File::create(out.join("capacities.csv"))?);
    writeln!(caps, "plant_id,capacity,kind")?;
    for (id, kind) in panel.plant_ids.iter().zip(&panel.plant_kinds) {
        writeln!(caps, "{id},1,{kind}")?;
    }
    caps.flush()?;

    write_snapshot(&out, "synth_config.json", &s)?;
    println!(
        "wrote {} ({} plants × {} hours) and capacities.csv",
        data_path.display(),
        panel.n_plants(),
        panel.n_hours()
    );
    Ok(())
}
