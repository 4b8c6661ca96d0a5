//! Shared command plumbing: config-file loading with flag overrides,
//! resolved-config snapshots, and output-directory resolution.
//!
//! Every command resolves its settings in three layers (built-in defaults,
//! then the optional `--config` JSON file, then explicit flags) and writes
//! the final result next to its outputs. Re-running a command with that
//! snapshot as `--config` reproduces the artifacts bitwise.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use scengen::artifact::content_hash;
use scengen::dataset::ingest::{ingest_csv, read_capacity_csv};
use scengen::dataset::HourlyPanel;
use scengen::stats::Basis;
use scengen::{Error, Result};

/// Environment variable holding the default output root. When a command is
/// run without `--out`, artifacts go to `$SCENGEN_OUT_ROOT/<command>`.
pub const OUT_ROOT_ENV: &str = "SCENGEN_OUT_ROOT";

/// Load settings from `--config` if given, otherwise defaults.
pub fn load_settings<T: DeserializeOwned + Default>(config: &Option<PathBuf>) -> Result<T> {
    match config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        None => Ok(T::default()),
    }
}

/// Stable hash of the resolved settings, embedded in every artifact the
/// run writes. The output directory is not part of the hash: it names
/// where artifacts land, not what gets computed, and a rerun into a fresh
/// directory must still produce identical artifact bytes.
pub fn settings_hash<T: Serialize>(settings: &T) -> Result<String> {
    let mut value = serde_json::to_value(settings)?;
    if let Some(object) = value.as_object_mut() {
        object.remove("out");
    }
    Ok(content_hash(&serde_json::to_vec(&value)?))
}

/// Write the resolved-config snapshot into the output directory.
pub fn write_snapshot<T: Serialize>(dir: &Path, name: &str, settings: &T) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), serde_json::to_string_pretty(settings)?)?;
    Ok(())
}

/// Output directory: explicit flag, then config-file value, then
/// `$SCENGEN_OUT_ROOT/<command>`.
pub fn resolve_out(
    flag: Option<PathBuf>,
    from_file: Option<PathBuf>,
    command: &str,
) -> Result<PathBuf> {
    if let Some(p) = flag.or(from_file) {
        return Ok(p);
    }
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) => Ok(PathBuf::from(root).join(command)),
        None => Err(Error::Usage(format!(
            "missing --out (or set {OUT_ROOT_ENV} for a default output root)"
        ))),
    }
}

pub fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Usage(format!("missing --{flag}")))
}

/// Ingest an hourly CSV with its optional capacity file.
pub fn load_panel(data: &Path, capacity: &Option<PathBuf>) -> Result<HourlyPanel> {
    let caps = capacity.as_deref().map(read_capacity_csv).transpose()?;
    ingest_csv(data, caps.as_ref())
}

pub fn parse_basis(s: &str) -> Result<Basis> {
    match s {
        "weekly" => Ok(Basis::Weekly),
        "hourly" => Ok(Basis::HourlySubsampled),
        other => Err(Error::Usage(format!(
            "unknown basis '{other}' (expected weekly or hourly)"
        ))),
    }
}

/// Overlay an explicit flag value onto a settings field.
pub fn overlay<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Overlay an optional flag onto an optional settings field.
pub fn overlay_opt<T>(slot: &mut Option<T>, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = Some(v);
    }
}
