//! CSV ingestion of hourly generation data.
//!
//! Input layout: header `timestamp,<id1>,<id2>,...`, one row per hour,
//! consecutive with no gaps, ISO-8601 timestamps, plain decimal values.
//! An optional capacity file (`plant_id,capacity,kind`) supplies the
//! per-unit base and the plant kind; without it each plant is normalized by
//! its observed maximum and tagged as wind.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime, TimeZone, Utc};

use super::{HourlyPanel, PlantKind, HOURS_PER_WEEK};
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Declared capacity and kind per plant id.
#[derive(Debug, Clone, Default)]
pub struct CapacityMap {
    entries: BTreeMap<String, (f64, PlantKind)>,
}

impl CapacityMap {
    pub fn insert(&mut self, plant_id: impl Into<String>, capacity: f64, kind: PlantKind) {
        self.entries.insert(plant_id.into(), (capacity, kind));
    }

    pub fn get(&self, plant_id: &str) -> Option<(f64, PlantKind)> {
        self.entries.get(plant_id).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Read a `plant_id,capacity,kind` CSV.
pub fn read_capacity_csv(path: &Path) -> Result<CapacityMap> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty capacity file", path.display())))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["plant_id", "capacity", "kind"] {
        return Err(Error::Schema(format!(
            "{}: capacity header must be 'plant_id,capacity,kind', got '{header}'",
            path.display()
        )));
    }
    let mut map = CapacityMap::default();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Schema(format!(
                "{}:{}: expected 3 fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let capacity: f64 = fields[1].parse().map_err(|_| {
            Error::Data(format!(
                "{}:{}: bad capacity '{}'",
                path.display(),
                lineno + 1,
                fields[1]
            ))
        })?;
        if capacity <= 0.0 || !capacity.is_finite() {
            return Err(Error::Data(format!(
                "{}:{}: capacity must be positive, got {capacity}",
                path.display(),
                lineno + 1
            )));
        }
        let kind = match fields[2].to_ascii_lowercase().as_str() {
            "wind" => PlantKind::Wind,
            "solar" => PlantKind::Solar,
            other => {
                return Err(Error::Schema(format!(
                    "{}:{}: kind must be wind or solar, got '{other}'",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        map.insert(fields[0], capacity, kind);
    }
    Ok(map)
}

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(Utc.from_utc_datetime(&naive));
        }
    }
    None
}

/// Ingest an hourly generation CSV and normalize it to per-unit values.
pub fn ingest_csv(path: &Path, capacities: Option<&CapacityMap>) -> Result<HourlyPanel> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols[0] != "timestamp" {
        return Err(Error::Schema(format!(
            "{}: header must be 'timestamp,<plant_id>,...', got '{header}'",
            path.display()
        )));
    }
    let plant_ids: Vec<String> = cols[1..].iter().map(|s| s.to_string()).collect();
    for (i, id) in plant_ids.iter().enumerate() {
        if id.is_empty() {
            return Err(Error::Schema(format!(
                "{}: empty plant id in header",
                path.display()
            )));
        }
        if plant_ids[..i].contains(id) {
            return Err(Error::Schema(format!(
                "{}: duplicate plant id '{id}'",
                path.display()
            )));
        }
    }
    let n_plants = plant_ids.len();

    let mut start: Option<DateTime<Utc>> = None;
    let mut raw = Vec::<f64>::new();
    let mut hour_index: usize = 0;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = lineno + 2; // 1-based, after the header
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n_plants + 1 {
            return Err(Error::Schema(format!(
                "{}:{row}: expected {} columns, got {}",
                path.display(),
                n_plants + 1,
                fields.len()
            )));
        }
        let ts = parse_timestamp(fields[0]).ok_or_else(|| {
            Error::Schema(format!(
                "{}:{row}: unparseable timestamp '{}'",
                path.display(),
                fields[0]
            ))
        })?;
        match start {
            None => {
                if ts.timestamp() % 3600 != 0 {
                    return Err(Error::Schema(format!(
                        "{}:{row}: timestamps must be on the hour, got '{}'",
                        path.display(),
                        fields[0]
                    )));
                }
                start = Some(ts);
            }
            Some(s) => {
                let expected = s + Duration::hours(hour_index as i64);
                if ts < expected {
                    return Err(Error::Gap(format!(
                        "{}:{row}: duplicate or out-of-order timestamp '{}' (expected hour {hour_index})",
                        path.display(),
                        fields[0]
                    )));
                }
                if ts > expected {
                    return Err(Error::Gap(format!(
                        "{}:{row}: missing hour {hour_index} ({})",
                        path.display(),
                        expected.to_rfc3339()
                    )));
                }
            }
        }
        for (c, field) in fields[1..].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Data(format!(
                    "{}:{row}: bad value '{field}' for plant '{}'",
                    path.display(),
                    plant_ids[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "{}:{row}: non-finite value for plant '{}'",
                    path.display(),
                    plant_ids[c]
                )));
            }
            if v < 0.0 {
                return Err(Error::Data(format!(
                    "{}:{row}: negative generation {v} for plant '{}'",
                    path.display(),
                    plant_ids[c]
                )));
            }
            raw.push(v);
        }
        hour_index += 1;
    }
    if hour_index < HOURS_PER_WEEK {
        return Err(Error::InsufficientData(format!(
            "{}: {hour_index} hourly rows, need at least {HOURS_PER_WEEK}",
            path.display()
        )));
    }

    let mut values = Mat::from_vec(hour_index, n_plants, raw);
    let mut kinds = vec![PlantKind::Wind; n_plants];
    for p in 0..n_plants {
        let declared = capacities.and_then(|c| c.get(&plant_ids[p]));
        let base = match declared {
            Some((capacity, kind)) => {
                kinds[p] = kind;
                capacity
            }
            None => {
                let observed = (0..hour_index)
                    .map(|h| values.at(h, p))
                    .fold(0.0f64, f64::max);
                // All-zero column: observed-max fallback replaced by a unit
                // capacity so nothing divides by zero.
                if observed > 0.0 {
                    observed
                } else {
                    1.0
                }
            }
        };
        for h in 0..hour_index {
            let v = values.at(h, p) / base;
            if v > 1.0 {
                return Err(Error::Data(format!(
                    "plant '{}' hour {h}: generation exceeds declared capacity ({} > {base})",
                    plant_ids[p],
                    values.at(h, p)
                )));
            }
            values.set(h, p, v);
        }
    }

    let panel = HourlyPanel {
        plant_ids,
        plant_kinds: kinds,
        start: start.expect("at least one row parsed"),
        values,
    };
    panel.validate()?;
    Ok(panel)
}
