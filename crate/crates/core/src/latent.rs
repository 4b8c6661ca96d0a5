//! Latent-space similarity against stored training posteriors.
//!
//! Each training observation leaves behind a diagonal Gaussian posterior
//! (μ_n, σ²_n). A sampled latent point is matched to the most similar
//! posterior by squared Mahalanobis distance, and that posterior's week
//! index selects the hourly disaggregation profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Variance floor applied when the store is built; collapsed posteriors
/// would otherwise dominate the distance or divide by zero.
pub const VAR_FLOOR: f64 = 1e-6;

/// Per-training-observation posteriors with diagonal covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentPosteriorStore {
    /// `[n_train × d_latent]` posterior means.
    pub mus: Mat,
    /// `[n_train × d_latent]` posterior variances, floored at [`VAR_FLOOR`].
    pub vars: Mat,
    /// Original week index of each posterior, into the profile store.
    pub week_refs: Vec<usize>,
}

impl LatentPosteriorStore {
    pub fn new(mus: Mat, vars: Mat, week_refs: Vec<usize>) -> Result<Self> {
        if mus.rows() != vars.rows() || mus.cols() != vars.cols() {
            return Err(Error::Dimension(
                "posterior mean/variance shapes differ".into(),
            ));
        }
        if week_refs.len() != mus.rows() {
            return Err(Error::Dimension(
                "one week ref per posterior required".into(),
            ));
        }
        let vars = vars.map(|v| v.max(VAR_FLOOR));
        Ok(LatentPosteriorStore {
            mus,
            vars,
            week_refs,
        })
    }

    pub fn len(&self) -> usize {
        self.mus.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_latent(&self) -> usize {
        self.mus.cols()
    }
}

/// Squared Mahalanobis distance with diagonal covariance:
/// `D² = Σ_j (z_j − μ_j)² / σ²_j`.
pub fn mahalanobis_sq(z: &[f64], mu: &[f64], var: &[f64]) -> Result<f64> {
    if z.len() != mu.len() || z.len() != var.len() {
        return Err(Error::Dimension(format!(
            "mahalanobis_sq: lengths {} / {} / {} differ",
            z.len(),
            mu.len(),
            var.len()
        )));
    }
    let mut d2 = 0.0;
    for ((&zj, &mj), &vj) in z.iter().zip(mu).zip(var) {
        debug_assert!(vj > 0.0);
        let diff = zj - mj;
        d2 += diff * diff / vj;
    }
    Ok(d2)
}

/// Outcome of a profile selection: the winning posterior, its week, and a
/// distance summary recorded in scenario metadata.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileChoice {
    pub index: usize,
    pub week_ref: usize,
    pub d2_min: f64,
    /// Gap to the runner-up distance (0 when the store has one posterior).
    pub d2_margin: f64,
}

/// Exhaustive argmin of D² over the store; ties break to the lowest index.
pub fn select_profile(store: &LatentPosteriorStore, z: &[f64]) -> Result<ProfileChoice> {
    if store.is_empty() {
        return Err(Error::Usage("posterior store is empty".into()));
    }
    if z.len() != store.d_latent() {
        return Err(Error::Dimension(format!(
            "latent point has {} dims, store has {}",
            z.len(),
            store.d_latent()
        )));
    }
    let mut best = 0usize;
    let mut best_d2 = f64::INFINITY;
    let mut second = f64::INFINITY;
    for n in 0..store.len() {
        let d2 = mahalanobis_sq(z, store.mus.row(n), store.vars.row(n))?;
        if d2 < best_d2 {
            second = best_d2;
            best_d2 = d2;
            best = n;
        } else if d2 < second {
            second = d2;
        }
    }
    let d2_margin = if second.is_finite() {
        second - best_d2
    } else {
        0.0
    };
    Ok(ProfileChoice {
        index: best,
        week_ref: store.week_refs[best],
        d2_min: best_d2,
        d2_margin,
    })
}
