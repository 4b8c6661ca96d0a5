//! On-disk artifacts: the model JSON file and the scenario output
//! directory (hourly CSV, weekly CSV, metadata JSON).
//!
//! All floats are written in shortest round-trip form, so saving, loading,
//! and re-saving is bitwise stable, and a rerun with the same config
//! produces byte-identical files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::HOURS_PER_WEEK;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{self, fnv1a};
use crate::scenario::{ScenarioSet, SelectionSummary};
use crate::stats::PlantSamples;
use crate::vae::VaeModel;

/// Version tag embedded in every artifact this crate writes.
pub const FORMAT_VERSION: u32 = 1;

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Hex FNV-1a of arbitrary bytes; the hash flavor used in artifacts.
pub fn content_hash(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a(bytes))
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelArtifact {
    format_version: u32,
    tool_version: String,
    /// Hash of the resolved configuration of the run that produced this.
    config_hash: String,
    model: VaeModel,
}

/// Write the model artifact as a single JSON file.
pub fn save_model(path: &Path, model: &VaeModel, config_hash: &str) -> Result<()> {
    let artifact = ModelArtifact {
        format_version: FORMAT_VERSION,
        tool_version: tool_version().to_string(),
        config_hash: config_hash.to_string(),
        model: model.clone(),
    };
    let json = serde_json::to_string_pretty(&artifact)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, json)?;
    Ok(())
}

/// Load a model artifact. Returns the model, the hash of the artifact
/// bytes (used to stamp downstream outputs), and the stored config hash.
pub fn load_model(path: &Path) -> Result<(VaeModel, String, String)> {
    let bytes = fs::read(path)?;
    let artifact: ModelArtifact = serde_json::from_slice(&bytes)?;
    if artifact.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported model format version {}",
            path.display(),
            artifact.format_version
        )));
    }
    Ok((artifact.model, content_hash(&bytes), artifact.config_hash))
}

/// Sidecar metadata written next to the scenario CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub format_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub model_hash: String,
    pub seed: u64,
    pub n_scenarios: usize,
    pub horizon_weeks: usize,
    pub plant_ids: Vec<String>,
    /// Selected historical week per (scenario, week), row-major.
    pub profile_refs: Vec<usize>,
    /// Distance summaries per (scenario, week), row-major.
    pub selections: Vec<SelectionSummary>,
    /// `(scenario, week, plant)` cells where clipping triggered.
    pub clipped_cells: Vec<[usize; 3]>,
    pub clipped_hours: u64,
    pub clipped_fraction: f64,
}

/// File names inside a scenario output directory.
pub const SCENARIO_HOURLY_CSV: &str = "scenarios.csv";
pub const SCENARIO_WEEKLY_CSV: &str = "weekly.csv";
pub const SCENARIO_META_JSON: &str = "metadata.json";

/// Write a scenario set as `scenarios.csv` (long hourly format),
/// `weekly.csv`, and `metadata.json` in `dir`.
pub fn write_scenario_set(
    dir: &Path,
    set: &ScenarioSet,
    model_hash: &str,
    config_hash: &str,
) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut hourly =
        BufWriter::with_capacity(1 << 20, fs::File::create(dir.join(SCENARIO_HOURLY_CSV))?);
    writeln!(hourly, "scenario,week,hour,plant_id,value")?;
    for s in 0..set.n_scenarios {
        for w in 0..set.horizon_weeks {
            for h in 0..HOURS_PER_WEEK {
                for (p, id) in set.plant_ids.iter().enumerate() {
                    writeln!(hourly, "{s},{w},{h},{id},{}", set.hourly(s, w, h, p))?;
                }
            }
        }
    }
    hourly.flush()?;

    let mut weekly = BufWriter::new(fs::File::create(dir.join(SCENARIO_WEEKLY_CSV))?);
    writeln!(weekly, "scenario,week,plant_id,value")?;
    for s in 0..set.n_scenarios {
        for w in 0..set.horizon_weeks {
            for (p, id) in set.plant_ids.iter().enumerate() {
                writeln!(weekly, "{s},{w},{id},{}", set.weekly(s, w, p))?;
            }
        }
    }
    weekly.flush()?;

    let mut clipped_cells = Vec::new();
    for s in 0..set.n_scenarios {
        for w in 0..set.horizon_weeks {
            for p in 0..set.n_plants {
                if set.is_clipped(s, w, p) {
                    clipped_cells.push([s, w, p]);
                }
            }
        }
    }
    let meta = ScenarioMeta {
        format_version: FORMAT_VERSION,
        tool_version: tool_version().to_string(),
        config_hash: config_hash.to_string(),
        model_hash: model_hash.to_string(),
        seed: set.seed,
        n_scenarios: set.n_scenarios,
        horizon_weeks: set.horizon_weeks,
        plant_ids: set.plant_ids.clone(),
        profile_refs: set.profile_refs.clone(),
        selections: set.selections.clone(),
        clipped_cells,
        clipped_hours: set.clipped_hours,
        clipped_fraction: set.clipped_fraction(),
    };
    fs::write(
        dir.join(SCENARIO_META_JSON),
        serde_json::to_string_pretty(&meta)?,
    )?;
    Ok(())
}

pub fn read_scenario_meta(dir: &Path) -> Result<ScenarioMeta> {
    let bytes = fs::read(dir.join(SCENARIO_META_JSON))?;
    let meta: ScenarioMeta = serde_json::from_slice(&bytes)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported scenario format version {}",
            dir.display(),
            meta.format_version
        )));
    }
    Ok(meta)
}

/// Read the pooled weekly values back: `[S·W × n_plants]`, rows in
/// (scenario, week) order.
pub fn read_scenario_weekly(dir: &Path) -> Result<(ScenarioMeta, Mat)> {
    let meta = read_scenario_meta(dir)?;
    let path = dir.join(SCENARIO_WEEKLY_CSV);
    let reader = BufReader::new(fs::File::open(&path)?);
    let p = meta.plant_ids.len();
    let rows = meta.n_scenarios * meta.horizon_weeks;
    let mut values = Vec::with_capacity(rows * p);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            continue;
        }
        let value = line
            .rsplit(',')
            .next()
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| {
                Error::Schema(format!("{}:{}: bad row '{line}'", path.display(), i + 1))
            })?;
        values.push(value);
    }
    if values.len() != rows * p {
        return Err(Error::Schema(format!(
            "{}: expected {} values, found {}",
            path.display(),
            rows * p,
            values.len()
        )));
    }
    Ok((meta, Mat::from_vec(rows, p, values)))
}

/// Read the full hourly values back: `[S·W·168 × n_plants]`, rows in
/// (scenario, week, hour) order. Sized for desk-scale runs; callers that
/// only need marginals should prefer [`read_scenario_hourly_samples`].
pub fn read_scenario_hourly_rows(dir: &Path) -> Result<(ScenarioMeta, Mat)> {
    let meta = read_scenario_meta(dir)?;
    let p = meta.plant_ids.len();
    let rows = meta.n_scenarios * meta.horizon_weeks * HOURS_PER_WEEK;
    let path = dir.join(SCENARIO_HOURLY_CSV);
    let reader = BufReader::new(fs::File::open(&path)?);
    let mut values = Vec::with_capacity(rows * p);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            continue;
        }
        let value = line
            .rsplit(',')
            .next()
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| {
                Error::Schema(format!("{}:{}: bad row '{line}'", path.display(), i + 1))
            })?;
        values.push(value);
    }
    if values.len() != rows * p {
        return Err(Error::Schema(format!(
            "{}: expected {} values, found {}",
            path.display(),
            rows * p,
            values.len()
        )));
    }
    Ok((meta, Mat::from_vec(rows, p, values)))
}

/// Stream the hourly CSV back into per-plant samples, subsampled to `cap`
/// per plant with the same seeded index draw as the in-memory path.
pub fn read_scenario_hourly_samples(dir: &Path, cap: usize, seed: u64) -> Result<PlantSamples> {
    let meta = read_scenario_meta(dir)?;
    let p = meta.plant_ids.len();
    let per_plant = meta.n_scenarios * meta.horizon_weeks * HOURS_PER_WEEK;

    // Index sets drawn exactly like PlantSamples::subsample does.
    let mut r = rng::seeded(seed, rng::stream::SUBSAMPLE);
    let chosen: Vec<Vec<usize>> = (0..p)
        .map(|_| {
            if per_plant <= cap {
                (0..per_plant).collect()
            } else {
                let mut picked = rand::seq::index::sample(&mut r, per_plant, cap).into_vec();
                picked.sort_unstable();
                picked
            }
        })
        .collect();

    let path = dir.join(SCENARIO_HOURLY_CSV);
    let reader = BufReader::new(fs::File::open(&path)?);
    let mut samples: Vec<Vec<f64>> = chosen.iter().map(|c| Vec::with_capacity(c.len())).collect();
    let mut cursor = vec![0usize; p]; // next position in chosen[p]
    let mut seen = vec![0usize; p]; // hourly rows seen so far per plant
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            continue;
        }
        let plant = (i - 1) % p;
        let row_for_plant = seen[plant];
        seen[plant] += 1;
        if cursor[plant] < chosen[plant].len() && chosen[plant][cursor[plant]] == row_for_plant {
            let value = line
                .rsplit(',')
                .next()
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::Schema(format!("{}:{}: bad row '{line}'", path.display(), i + 1))
                })?;
            samples[plant].push(value);
            cursor[plant] += 1;
        }
    }
    for (plant, c) in cursor.iter().enumerate() {
        if *c != chosen[plant].len() {
            return Err(Error::Schema(format!(
                "{}: plant {} has fewer hourly rows than metadata claims",
                path.display(),
                meta.plant_ids[plant]
            )));
        }
    }
    Ok(PlantSamples {
        plant_ids: meta.plant_ids,
        samples,
    })
}
