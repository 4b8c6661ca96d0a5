//! Statistical validation of generated scenarios against history.
//!
//! Per-plant marginals are compared with the two-sample Kolmogorov-Smirnov
//! test (asymptotic p-values), spatial structure with pairwise Pearson
//! correlation matrices, and shapes with binned densities and quantile
//! tables. Everything is pure and deterministic so reports are bitwise
//! reproducible.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng;

/// Which values the comparison runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    #[serde(rename = "weekly")]
    Weekly,
    #[serde(rename = "hourly-subsampled")]
    HourlySubsampled,
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Basis::Weekly => f.write_str("weekly"),
            Basis::HourlySubsampled => f.write_str("hourly-subsampled"),
        }
    }
}

/// Per-plant sample vectors with their ids, aligned by position.
#[derive(Debug, Clone)]
pub struct PlantSamples {
    pub plant_ids: Vec<String>,
    pub samples: Vec<Vec<f64>>,
}

impl PlantSamples {
    /// Columns of a `[rows × plants]` matrix.
    pub fn from_columns(plant_ids: &[String], rows: &Mat) -> Self {
        let samples = (0..rows.cols())
            .map(|p| (0..rows.rows()).map(|r| rows.at(r, p)).collect())
            .collect();
        PlantSamples {
            plant_ids: plant_ids.to_vec(),
            samples,
        }
    }

    /// Seeded uniform subsample (without replacement) of each plant's
    /// vector down to at most `cap` values.
    pub fn subsample(&self, cap: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed, rng::stream::SUBSAMPLE);
        let samples = self
            .samples
            .iter()
            .map(|s| {
                if s.len() <= cap {
                    s.clone()
                } else {
                    let mut picked = index::sample(&mut r, s.len(), cap).into_vec();
                    picked.sort_unstable();
                    picked.into_iter().map(|i| s[i]).collect()
                }
            })
            .collect();
        PlantSamples {
            plant_ids: self.plant_ids.clone(),
            samples,
        }
    }
}

/// One two-sample KS comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsResult {
    pub plant_id: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n_hist: usize,
    pub n_gen: usize,
    pub basis: Basis,
}

/// The KS statistic `D = sup |ECDF_a − ECDF_b|` and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 5 || b.len() < 5 {
        return Err(Error::Usage(format!(
            "ks_two_sample needs at least 5 points per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.total_cmp(v));
    ys.sort_by(|u, v| u.total_cmp(v));

    let (n, m) = (xs.len(), ys.len());
    let mut i = 0usize;
    let mut j = 0usize;
    let mut ecdf_x = 0.0;
    let mut ecdf_y = 0.0;
    let mut d = 0.0f64;
    while i < n && j < m {
        // Settle duplicate runs so the ECDFs are evaluated after the full
        // jump at each distinct value.
        while i + 1 < n && xs[i + 1] == xs[i] {
            i += 1;
        }
        while j + 1 < m && ys[j + 1] == ys[j] {
            j += 1;
        }
        let t = xs[i].min(ys[j]);
        if xs[i] == t {
            ecdf_x = (i + 1) as f64 / n as f64;
            i += 1;
        }
        if ys[j] == t {
            ecdf_y = (j + 1) as f64 / m as f64;
            j += 1;
        }
        d = d.max((ecdf_x - ecdf_y).abs());
    }
    // Whichever side is exhausted, the other keeps jumping toward 1 while
    // the exhausted ECDF is already 1; the remaining gap is 1 - min(...),
    // which cannot exceed the gap already seen at the crossover. No further
    // sweep needed.
    Ok((d, ks_p_value(d, n, m)))
}

/// Asymptotic Kolmogorov p-value with the small-sample λ correction:
/// `n_e = nm/(n+m)`, `λ = (√n_e + 0.12 + 0.11/√n_e)·D`,
/// `p = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
pub fn ks_p_value(d: f64, n: usize, m: usize) -> f64 {
    let n_e = (n as f64 * m as f64) / (n + m) as f64;
    let sqrt_ne = n_e.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    // Below λ ≈ 0.2 the survival function is 1 to well under 1e-12 and the
    // alternating series stops converging; return the limit directly.
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        p += sign * term;
        if term < 1e-10 {
            break;
        }
        sign = -sign;
    }
    (2.0 * p).clamp(0.0, 1.0)
}

/// KS tests for every plant plus the pass rate and the sorted p-values
/// (the p-value CDF table).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsBattery {
    pub results: Vec<KsResult>,
    pub alpha: f64,
    pub pass_rate: f64,
    pub sorted_p_values: Vec<f64>,
    pub basis: Basis,
}

pub fn ks_battery(
    hist: &PlantSamples,
    scen: &PlantSamples,
    basis: Basis,
    alpha: f64,
) -> Result<KsBattery> {
    if hist.plant_ids != scen.plant_ids {
        return Err(Error::Config(format!(
            "plant sets differ: historical {:?} vs scenario {:?}",
            hist.plant_ids, scen.plant_ids
        )));
    }
    let mut results = Vec::with_capacity(hist.plant_ids.len());
    for (p, id) in hist.plant_ids.iter().enumerate() {
        let (statistic, p_value) = ks_two_sample(&hist.samples[p], &scen.samples[p])?;
        results.push(KsResult {
            plant_id: id.clone(),
            statistic,
            p_value,
            n_hist: hist.samples[p].len(),
            n_gen: scen.samples[p].len(),
            basis,
        });
    }
    let passed = results.iter().filter(|r| r.p_value > alpha).count();
    let mut sorted_p_values: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    sorted_p_values.sort_by(|a, b| a.total_cmp(b));
    Ok(KsBattery {
        pass_rate: passed as f64 / results.len().max(1) as f64,
        results,
        alpha,
        sorted_p_values,
        basis,
    })
}

/// Pairwise correlation comparison between history and scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrReport {
    /// Plants included (positive variance on both sides).
    pub plant_ids: Vec<String>,
    /// Plants dropped because one side had zero variance.
    pub excluded: Vec<String>,
    pub hist_corr: Mat,
    pub gen_corr: Mat,
    /// |hist − gen| per unordered pair, upper-triangle row-major order.
    pub abs_errors: Vec<f64>,
    pub mae: f64,
    pub max_err: f64,
    /// Counts of abs_errors in bins of width 0.01 over [0, 1].
    pub histogram: Vec<u32>,
}

/// Width of a correlation-error histogram bin.
pub const CORR_ERR_BIN_WIDTH: f64 = 0.01;

fn column_variances(rows: &Mat) -> Vec<f64> {
    let means = rows.col_means();
    let mut vars = vec![0.0; rows.cols()];
    for r in 0..rows.rows() {
        for (c, (&m, v)) in means.iter().zip(vars.iter_mut()).enumerate() {
            let d = rows.at(r, c) - m;
            *v += d * d;
        }
    }
    for v in &mut vars {
        *v /= rows.rows() as f64;
    }
    vars
}

/// Pearson correlation matrix of the columns, exactly symmetric with a
/// unit diagonal. Caller guarantees positive variance per column.
pub fn corr_matrix(rows: &Mat) -> Mat {
    let p = rows.cols();
    let means = rows.col_means();
    let mut cov = Mat::zeros(p, p);
    for r in 0..rows.rows() {
        let row = rows.row(r);
        for i in 0..p {
            let di = row[i] - means[i];
            for j in i..p {
                let v = cov.at(i, j) + di * (row[j] - means[j]);
                cov.set(i, j, v);
            }
        }
    }
    let mut corr = Mat::zeros(p, p);
    for i in 0..p {
        corr.set(i, i, 1.0);
        for j in (i + 1)..p {
            let r = cov.at(i, j) / (cov.at(i, i) * cov.at(j, j)).sqrt();
            corr.set(i, j, r);
            corr.set(j, i, r);
        }
    }
    corr
}

pub fn corr_compare(plant_ids: &[String], hist_rows: &Mat, scen_rows: &Mat) -> Result<CorrReport> {
    if hist_rows.cols() != scen_rows.cols() || hist_rows.cols() != plant_ids.len() {
        return Err(Error::Dimension(format!(
            "corr_compare: {} ids, {} historical columns, {} scenario columns",
            plant_ids.len(),
            hist_rows.cols(),
            scen_rows.cols()
        )));
    }
    if plant_ids.len() < 2 {
        return Err(Error::Usage("corr_compare needs at least 2 plants".into()));
    }
    let hist_vars = column_variances(hist_rows);
    let scen_vars = column_variances(scen_rows);
    let mut keep = Vec::new();
    let mut excluded = Vec::new();
    for (p, id) in plant_ids.iter().enumerate() {
        if hist_vars[p] > 0.0 && scen_vars[p] > 0.0 {
            keep.push(p);
        } else {
            excluded.push(id.clone());
        }
    }
    if keep.len() < 2 {
        return Err(Error::Data(
            "fewer than 2 plants with positive variance on both sides".into(),
        ));
    }
    let kept_ids: Vec<String> = keep.iter().map(|&p| plant_ids[p].clone()).collect();
    let hist_kept = keep_columns(hist_rows, &keep);
    let scen_kept = keep_columns(scen_rows, &keep);
    let hist_corr = corr_matrix(&hist_kept);
    let gen_corr = corr_matrix(&scen_kept);

    let k = keep.len();
    let mut abs_errors = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            abs_errors.push((hist_corr.at(i, j) - gen_corr.at(i, j)).abs());
        }
    }
    let mae = abs_errors.iter().sum::<f64>() / abs_errors.len() as f64;
    let max_err = abs_errors.iter().cloned().fold(0.0f64, f64::max);
    let n_bins = (1.0 / CORR_ERR_BIN_WIDTH) as usize;
    let mut histogram = vec![0u32; n_bins];
    for &e in &abs_errors {
        let bin = ((e / CORR_ERR_BIN_WIDTH) as usize).min(n_bins - 1);
        histogram[bin] += 1;
    }
    Ok(CorrReport {
        plant_ids: kept_ids,
        excluded,
        hist_corr,
        gen_corr,
        abs_errors,
        mae,
        max_err,
        histogram,
    })
}

fn keep_columns(rows: &Mat, keep: &[usize]) -> Mat {
    let mut out = Mat::zeros(rows.rows(), keep.len());
    for r in 0..rows.rows() {
        for (c, &src) in keep.iter().enumerate() {
            out.set(r, c, rows.at(r, src));
        }
    }
    out
}

/// Aligned binned densities and quantiles for one plant, plot-ready.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityTable {
    pub plant_id: String,
    /// Lower edge of each bin; bins cover [0, 1] uniformly.
    pub bin_edges: Vec<f64>,
    pub hist_density: Vec<f64>,
    pub scen_density: Vec<f64>,
    /// Quantile levels (fractions) shared by both sides.
    pub quantile_levels: Vec<f64>,
    pub hist_quantiles: Vec<f64>,
    pub scen_quantiles: Vec<f64>,
}

/// Quantile levels reported by [`density_summary`]: 1%, 5%, 10%, …, 95%, 99%.
pub fn quantile_levels() -> Vec<f64> {
    let mut levels = vec![0.01];
    for k in 1..=19 {
        levels.push(k as f64 * 0.05);
    }
    levels.push(0.99);
    levels
}

fn quantiles(sample: &[f64], levels: &[f64]) -> Vec<f64> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    levels
        .iter()
        .map(|&q| {
            let idx = ((q * sorted.len() as f64).ceil() as usize).saturating_sub(1);
            sorted[idx.min(sorted.len() - 1)]
        })
        .collect()
}

fn binned_density(sample: &[f64], n_bins: usize) -> Vec<f64> {
    let width = 1.0 / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &v in sample {
        let bin = ((v / width) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    let n = sample.len() as f64;
    counts.iter().map(|&c| c as f64 / (n * width)).collect()
}

pub fn density_summary(
    hist: &PlantSamples,
    scen: &PlantSamples,
    plant_id: &str,
    n_bins: usize,
) -> Result<DensityTable> {
    let p = hist
        .plant_ids
        .iter()
        .position(|id| id == plant_id)
        .ok_or_else(|| Error::Usage(format!("unknown plant '{plant_id}'")))?;
    let ps = scen
        .plant_ids
        .iter()
        .position(|id| id == plant_id)
        .ok_or_else(|| Error::Usage(format!("unknown plant '{plant_id}' in scenarios")))?;
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be positive".into()));
    }
    let levels = quantile_levels();
    let width = 1.0 / n_bins as f64;
    Ok(DensityTable {
        plant_id: plant_id.to_string(),
        bin_edges: (0..n_bins).map(|b| b as f64 * width).collect(),
        hist_density: binned_density(&hist.samples[p], n_bins),
        scen_density: binned_density(&scen.samples[ps], n_bins),
        hist_quantiles: quantiles(&hist.samples[p], &levels),
        scen_quantiles: quantiles(&scen.samples[ps], &levels),
        quantile_levels: levels,
    })
}

/// One row of the historical-vs-variant correlation scatter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XyCorrRow {
    pub plant_a: String,
    pub plant_b: String,
    pub hist_r: f64,
    pub variant_a_r: f64,
    pub variant_b_r: f64,
}

/// Per-pair rows for plotting historical correlation against the two
/// model variants.
pub fn xy_corr_table(
    plant_ids: &[String],
    hist_corr: &Mat,
    gen_corr_a: &Mat,
    gen_corr_b: &Mat,
) -> Result<Vec<XyCorrRow>> {
    let p = plant_ids.len();
    for (name, m) in [
        ("historical", hist_corr),
        ("variant a", gen_corr_a),
        ("variant b", gen_corr_b),
    ] {
        if m.rows() != p || m.cols() != p {
            return Err(Error::Dimension(format!(
                "{name} correlation matrix is {}×{}, expected {p}×{p}",
                m.rows(),
                m.cols()
            )));
        }
    }
    let mut rows = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            rows.push(XyCorrRow {
                plant_a: plant_ids[i].clone(),
                plant_b: plant_ids[j].clone(),
                hist_r: hist_corr.at(i, j),
                variant_a_r: gen_corr_a.at(i, j),
                variant_b_r: gen_corr_b.at(i, j),
            });
        }
    }
    Ok(rows)
}
