//! Validation orchestration and report artifacts: the report JSON plus the
//! plot-ready CSV tables (p-value CDF, correlation error histogram, density
//! and quantile tables, correlation scatter).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{tool_version, FORMAT_VERSION};
use crate::dataset::{HourlyPanel, WeeklyPanel};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::stats::{
    corr_compare, density_summary, ks_battery, xy_corr_table, Basis, CorrReport, DensityTable,
    KsBattery, PlantSamples, XyCorrRow, CORR_ERR_BIN_WIDTH,
};

/// Default per-side cap for hourly-basis subsampling.
pub const DEFAULT_SUBSAMPLE_CAP: usize = 2000;

/// Weekly-basis validation: historical weekly means per plant against the
/// pooled scenario weekly values.
pub fn validate_weekly(
    hist_weekly: &WeeklyPanel,
    plant_ids: &[String],
    scen_ids: &[String],
    scen_weekly_rows: &Mat,
    alpha: f64,
) -> Result<(KsBattery, CorrReport)> {
    if plant_ids != scen_ids {
        return Err(Error::Config(format!(
            "plant sets differ between history ({}) and scenarios ({})",
            plant_ids.len(),
            scen_ids.len()
        )));
    }
    let hist = PlantSamples::from_columns(plant_ids, &hist_weekly.values);
    let scen = PlantSamples::from_columns(scen_ids, scen_weekly_rows);
    let ks = ks_battery(&hist, &scen, Basis::Weekly, alpha)?;
    let corr = corr_compare(plant_ids, &hist_weekly.values, scen_weekly_rows)?;
    Ok((ks, corr))
}

/// Hourly-basis validation: both sides subsampled to `cap` values per
/// plant for the KS tests; correlations use the full hourly rows.
pub fn validate_hourly(
    hist_hourly: &HourlyPanel,
    scen_ids: &[String],
    scen_hourly_samples: &PlantSamples,
    scen_hourly_rows: &Mat,
    alpha: f64,
    cap: usize,
    seed: u64,
) -> Result<(KsBattery, CorrReport)> {
    if hist_hourly.plant_ids != scen_ids {
        return Err(Error::Config(
            "plant sets differ between history and scenarios".into(),
        ));
    }
    let hist = PlantSamples::from_columns(&hist_hourly.plant_ids, &hist_hourly.values)
        .subsample(cap, seed);
    let ks = ks_battery(&hist, scen_hourly_samples, Basis::HourlySubsampled, alpha)?;
    let corr = corr_compare(
        &hist_hourly.plant_ids,
        &hist_hourly.values,
        scen_hourly_rows,
    )?;
    Ok((ks, corr))
}

/// The full validation result written as `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub format_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub basis: Basis,
    pub alpha: f64,
    pub n_scenarios: usize,
    pub horizon_weeks: usize,
    pub clipped_fraction: f64,
    pub ks: KsBattery,
    pub corr: CorrReport,
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn write_pvalue_cdf_csv(path: &Path, battery: &KsBattery) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "p_value,cdf")?;
    let n = battery.sorted_p_values.len();
    for (i, p) in battery.sorted_p_values.iter().enumerate() {
        writeln!(f, "{p},{}", (i + 1) as f64 / n as f64)?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_corr_error_hist_csv(path: &Path, corr: &CorrReport) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "bin_lo,bin_hi,count")?;
    for (b, count) in corr.histogram.iter().enumerate() {
        let lo = b as f64 * CORR_ERR_BIN_WIDTH;
        writeln!(f, "{lo},{},{count}", lo + CORR_ERR_BIN_WIDTH)?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_density_csv(dir: &Path, table: &DensityTable) -> Result<()> {
    let id = sanitize(&table.plant_id);
    let mut f = BufWriter::new(fs::File::create(dir.join(format!("density_{id}.csv")))?);
    writeln!(f, "bin_lo,hist_density,scen_density")?;
    for ((lo, h), s) in table
        .bin_edges
        .iter()
        .zip(&table.hist_density)
        .zip(&table.scen_density)
    {
        writeln!(f, "{lo},{h},{s}")?;
    }
    f.flush()?;

    let mut q = BufWriter::new(fs::File::create(dir.join(format!("quantiles_{id}.csv")))?);
    writeln!(q, "level,hist,scen")?;
    for ((level, h), s) in table
        .quantile_levels
        .iter()
        .zip(&table.hist_quantiles)
        .zip(&table.scen_quantiles)
    {
        writeln!(q, "{level},{h},{s}")?;
    }
    q.flush()?;
    Ok(())
}

pub fn write_xy_corr_csv(path: &Path, rows: &[XyCorrRow]) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "plant_a,plant_b,hist_r,variant_a_r,variant_b_r")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{}",
            r.plant_a, r.plant_b, r.hist_r, r.variant_a_r, r.variant_b_r
        )?;
    }
    f.flush()?;
    Ok(())
}

/// Write `report.json` plus all plot-ready CSVs into `dir`.
pub fn write_validation_report(
    dir: &Path,
    report: &ValidationReport,
    densities: &[DensityTable],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    write_pvalue_cdf_csv(&dir.join("pvalue_cdf.csv"), &report.ks)?;
    write_corr_error_hist_csv(&dir.join("corr_error_hist.csv"), &report.corr)?;
    for table in densities {
        write_density_csv(dir, table)?;
    }
    Ok(())
}

/// Density tables for every plant from aligned sample sets.
pub fn density_tables(
    hist: &PlantSamples,
    scen: &PlantSamples,
    n_bins: usize,
) -> Result<Vec<DensityTable>> {
    hist.plant_ids
        .iter()
        .map(|id| density_summary(hist, scen, id, n_bins))
        .collect()
}

/// Side-by-side comparison of two model variants, written as
/// `comparison.json` plus the per-variant p-value CDFs, error histograms,
/// and the correlation scatter table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub format_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub variant_a: String,
    pub variant_b: String,
    pub basis: Basis,
    pub alpha: f64,
    pub ks_a: KsBattery,
    pub ks_b: KsBattery,
    pub corr_a: CorrReport,
    pub corr_b: CorrReport,
}

impl CompareReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config_hash: String,
        variant_a: String,
        variant_b: String,
        basis: Basis,
        alpha: f64,
        ks_a: KsBattery,
        ks_b: KsBattery,
        corr_a: CorrReport,
        corr_b: CorrReport,
    ) -> Self {
        CompareReport {
            format_version: FORMAT_VERSION,
            tool_version: tool_version().to_string(),
            config_hash,
            variant_a,
            variant_b,
            basis,
            alpha,
            ks_a,
            ks_b,
            corr_a,
            corr_b,
        }
    }
}

pub fn write_compare_report(dir: &Path, report: &CompareReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("comparison.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    write_pvalue_cdf_csv(&dir.join("pvalue_cdf_a.csv"), &report.ks_a)?;
    write_pvalue_cdf_csv(&dir.join("pvalue_cdf_b.csv"), &report.ks_b)?;
    write_corr_error_hist_csv(&dir.join("corr_error_hist_a.csv"), &report.corr_a)?;
    write_corr_error_hist_csv(&dir.join("corr_error_hist_b.csv"), &report.corr_b)?;
    // The scatter is defined on the plants common to both correlation
    // reports (zero-variance exclusions are per-side).
    if report.corr_a.plant_ids == report.corr_b.plant_ids {
        let rows = xy_corr_table(
            &report.corr_a.plant_ids,
            &report.corr_a.hist_corr,
            &report.corr_a.gen_corr,
            &report.corr_b.gen_corr,
        )?;
        write_xy_corr_csv(&dir.join("xy_corr.csv"), &rows)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn toy_battery() -> KsBattery {
        let data = vec![
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            vec![0.2, 0.4, 0.6, 0.8, 0.9, 0.3],
        ];
        let ids: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let hist = PlantSamples {
            plant_ids: ids.clone(),
            samples: data.clone(),
        };
        stats::ks_battery(&hist, &hist.clone(), Basis::Weekly, 0.05).unwrap()
    }

    fn toy_corr() -> CorrReport {
        let rows = Mat::from_rows(&[
            vec![0.1, 0.9],
            vec![0.4, 0.6],
            vec![0.7, 0.2],
            vec![0.3, 0.5],
        ]);
        let ids: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        corr_compare(&ids, &rows, &rows.clone()).unwrap()
    }

    #[test]
    fn report_files_are_written_and_stable() {
        let report = ValidationReport {
            format_version: FORMAT_VERSION,
            tool_version: tool_version().to_string(),
            config_hash: "deadbeef".into(),
            basis: Basis::Weekly,
            alpha: 0.05,
            n_scenarios: 2,
            horizon_weeks: 3,
            clipped_fraction: 0.0,
            ks: toy_battery(),
            corr: toy_corr(),
        };
        let ids: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let hist = PlantSamples {
            plant_ids: ids.clone(),
            samples: vec![vec![0.1, 0.5, 0.9, 0.4], vec![0.2, 0.6, 0.3, 0.8]],
        };
        let tables = density_tables(&hist, &hist.clone(), 10).unwrap();

        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_validation_report(d1.path(), &report, &tables).unwrap();
        write_validation_report(d2.path(), &report, &tables).unwrap();
        for name in [
            "report.json",
            "pvalue_cdf.csv",
            "corr_error_hist.csv",
            "density_a.csv",
            "quantiles_b.csv",
        ] {
            let a = fs::read(d1.path().join(name)).unwrap();
            let b = fs::read(d2.path().join(name)).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, b, "{name} not reproducible");
        }
    }

    #[test]
    fn compare_report_emits_scatter_table() {
        let report = CompareReport::new(
            "c0ffee".into(),
            "rbf-implicit".into(),
            "pure".into(),
            Basis::Weekly,
            0.05,
            toy_battery(),
            toy_battery(),
            toy_corr(),
            toy_corr(),
        );
        let dir = tempfile::tempdir().unwrap();
        write_compare_report(dir.path(), &report).unwrap();
        let scatter = fs::read_to_string(dir.path().join("xy_corr.csv")).unwrap();
        assert!(scatter.starts_with("plant_a,plant_b"));
        assert_eq!(scatter.lines().count(), 2); // header + 1 pair
    }

    #[test]
    fn sanitize_keeps_safe_chars() {
        assert_eq!(sanitize("wind_001"), "wind_001");
        assert_eq!(sanitize("a/b c"), "a_b_c");
    }
}
