//! Hourly generation data, weekly aggregation, disaggregation profiles, and
//! train/test splitting.
//!
//! A week is a fixed block of 168 consecutive hours counted from the start
//! of the panel; calendar alignment is deliberately ignored and a trailing
//! partial week is dropped. Profiles are multiplicative hourly-to-weekly
//! ratios, so reapplying a profile to its weekly mean reproduces the
//! original hours exactly (up to rounding).

pub mod ingest;
pub mod synth;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{self, fnv1a, fnv1a_f64};

/// Hours in one aggregation block.
pub const HOURS_PER_WEEK: usize = 168;

/// Default guard below which a weekly mean is treated as degenerate and its
/// profile replaced by the flat fallback.
pub const DEFAULT_MEAN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    Wind,
    Solar,
}

impl std::fmt::Display for PlantKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlantKind::Wind => f.write_str("wind"),
            PlantKind::Solar => f.write_str("solar"),
        }
    }
}

/// Per-plant hourly per-unit generation, normalized to [0, 1].
#[derive(Debug, Clone)]
pub struct HourlyPanel {
    pub plant_ids: Vec<String>,
    pub plant_kinds: Vec<PlantKind>,
    pub start: DateTime<Utc>,
    /// `[n_hours × n_plants]`.
    pub values: Mat,
}

impl HourlyPanel {
    pub fn n_hours(&self) -> usize {
        self.values.rows()
    }

    pub fn n_plants(&self) -> usize {
        self.values.cols()
    }

    /// Check the type invariants: unique ids, ≥ one full week, values
    /// finite in [0, 1].
    pub fn validate(&self) -> Result<()> {
        if self.plant_ids.len() != self.n_plants() || self.plant_kinds.len() != self.n_plants() {
            return Err(Error::Dimension(
                "plant metadata length != value columns".into(),
            ));
        }
        for (i, id) in self.plant_ids.iter().enumerate() {
            if self.plant_ids[..i].contains(id) {
                return Err(Error::Schema(format!("duplicate plant id '{id}'")));
            }
        }
        if self.n_hours() < HOURS_PER_WEEK {
            return Err(Error::InsufficientData(format!(
                "panel has {} hours, need at least {HOURS_PER_WEEK}",
                self.n_hours()
            )));
        }
        for &v in self.values.data() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Data(format!("per-unit value {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Stable content fingerprint; ties weekly panels, profiles, and model
    /// artifacts back to the exact data they were built from.
    pub fn fingerprint(&self) -> u64 {
        let mut h = fnv1a(self.plant_ids.join(",").as_bytes());
        for kind in &self.plant_kinds {
            h ^= fnv1a(kind.to_string().as_bytes()).rotate_left(7);
        }
        h ^ fnv1a_f64(self.values.data()).rotate_left(17)
    }
}

/// Weekly mean observations `[n_weeks × n_plants]` plus a fingerprint of
/// the hourly panel they were aggregated from.
#[derive(Debug, Clone)]
pub struct WeeklyPanel {
    pub values: Mat,
    pub source_hash: u64,
}

impl WeeklyPanel {
    pub fn n_weeks(&self) -> usize {
        self.values.rows()
    }

    pub fn n_plants(&self) -> usize {
        self.values.cols()
    }
}

/// Aggregate consecutive 168-hour blocks into weekly means; a trailing
/// partial week is dropped.
pub fn aggregate_weekly(panel: &HourlyPanel) -> Result<WeeklyPanel> {
    panel.validate()?;
    let n_weeks = panel.n_hours() / HOURS_PER_WEEK;
    if n_weeks == 0 {
        return Err(Error::InsufficientData(format!(
            "panel has {} hours, need at least {HOURS_PER_WEEK} for one week",
            panel.n_hours()
        )));
    }
    let p = panel.n_plants();
    let mut values = Mat::zeros(n_weeks, p);
    for w in 0..n_weeks {
        for h in 0..HOURS_PER_WEEK {
            let row = panel.values.row(w * HOURS_PER_WEEK + h);
            for (acc, &v) in values.row_mut(w).iter_mut().zip(row) {
                *acc += v;
            }
        }
        for acc in values.row_mut(w) {
            *acc /= HOURS_PER_WEEK as f64;
        }
    }
    Ok(WeeklyPanel {
        values,
        source_hash: panel.fingerprint(),
    })
}

/// Hourly-to-weekly ratio profiles `[n_weeks × n_plants × 168]`.
#[derive(Debug, Clone)]
pub struct ProfileStore {
    data: Vec<f64>,
    n_weeks: usize,
    n_plants: usize,
    pub mean_floor: f64,
}

impl ProfileStore {
    pub fn n_weeks(&self) -> usize {
        self.n_weeks
    }

    pub fn n_plants(&self) -> usize {
        self.n_plants
    }

    /// The 168-hour profile for (week, plant).
    pub fn profile(&self, week: usize, plant: usize) -> &[f64] {
        let base = (week * self.n_plants + plant) * HOURS_PER_WEEK;
        &self.data[base..base + HOURS_PER_WEEK]
    }
}

/// Extract the multiplicative disaggregation profiles of every (week,
/// plant). Weeks whose mean falls below `mean_floor` get the flat all-ones
/// fallback instead of a ratio against a vanishing denominator.
pub fn extract_profiles(
    panel: &HourlyPanel,
    weekly: &WeeklyPanel,
    mean_floor: f64,
) -> Result<ProfileStore> {
    if mean_floor <= 0.0 || mean_floor.is_nan() {
        return Err(Error::Config(format!(
            "mean_floor must be positive, got {mean_floor}"
        )));
    }
    if weekly.source_hash != panel.fingerprint() {
        return Err(Error::Config(
            "weekly panel was not aggregated from this hourly panel".into(),
        ));
    }
    let (n_weeks, n_plants) = (weekly.n_weeks(), weekly.n_plants());
    let mut data = vec![1.0; n_weeks * n_plants * HOURS_PER_WEEK];
    for w in 0..n_weeks {
        for p in 0..n_plants {
            let mean = weekly.values.at(w, p);
            if mean < mean_floor {
                continue; // flat fallback
            }
            let base = (w * n_plants + p) * HOURS_PER_WEEK;
            for h in 0..HOURS_PER_WEEK {
                data[base + h] = panel.values.at(w * HOURS_PER_WEEK + h, p) / mean;
            }
        }
    }
    Ok(ProfileStore {
        data,
        n_weeks,
        n_plants,
        mean_floor,
    })
}

/// How to partition weeks into train and test sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// A subset of a weekly panel that remembers the original week indices, so
/// profiles stay addressable.
#[derive(Debug, Clone)]
pub struct WeeklyView {
    pub source_weeks: Vec<usize>,
    pub values: Mat,
}

impl WeeklyView {
    pub fn n_weeks(&self) -> usize {
        self.values.rows()
    }

    pub fn n_plants(&self) -> usize {
        self.values.cols()
    }
}

/// Deterministic seeded shuffle split by whole weeks. At least one test
/// week is always held out.
pub fn split(weekly: &WeeklyPanel, spec: &SplitSpec) -> Result<(WeeklyView, WeeklyView)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must be in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let n = weekly.n_weeks();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 weeks to split, got {n}"
        )));
    }
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::seeded(spec.seed, rng::stream::SHUFFLE);
    order.shuffle(&mut r);

    let n_train = ((spec.train_fraction * n as f64).floor() as usize).clamp(1, n - 1);
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut test: Vec<usize> = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();

    let view = |weeks: Vec<usize>| WeeklyView {
        values: weekly.values.select_rows(&weeks),
        source_weeks: weeks,
    };
    Ok((view(train), view(test)))
}
