//! Radial basis function feature layer and its learned inverse mapping.
//!
//! An observation `x` is mapped to the vector of kernel values
//! `exp(-γ‖x − c_i‖²)` against a fixed set of centers drawn from the
//! training observations. Because γ and the centers are not trained, the
//! feature matrix of the training set can be computed once and reused for
//! every epoch; the cache carries a fingerprint so any later change to γ or
//! the centers is caught instead of silently serving stale features.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Mat};
use crate::nn::{
    adam_step, backward, forward, Activation, AdamState, DenseLayer, MseLoss, ScalarLoss,
};
use crate::rng::{self, fnv1a_f64};

/// Fixed kernel feature layer: centers `[M × n_plants]` and γ > 0.
#[derive(Debug, Serialize, Deserialize)]
pub struct RbfLayer {
    centers: Mat,
    gamma: f64,
    #[serde(skip)]
    cache: Option<FeatureCache>,
    #[serde(skip, default)]
    eval_count: AtomicU64,
}

#[derive(Debug, Clone)]
struct FeatureCache {
    features: Mat,
    fingerprint: u64,
}

impl Clone for RbfLayer {
    fn clone(&self) -> Self {
        RbfLayer {
            centers: self.centers.clone(),
            gamma: self.gamma,
            cache: self.cache.clone(),
            eval_count: AtomicU64::new(self.eval_count.load(Ordering::Relaxed)),
        }
    }
}

impl RbfLayer {
    pub fn new(centers: Mat, gamma: f64) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::Config(format!(
                "rbf gamma must be positive and finite, got {gamma}"
            )));
        }
        if centers.rows() == 0 {
            return Err(Error::Config("rbf layer needs at least one center".into()));
        }
        Ok(RbfLayer {
            centers,
            gamma,
            cache: None,
            eval_count: AtomicU64::new(0),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Change γ. Any existing feature cache becomes stale and will be
    /// rejected on next use.
    pub fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::Config(format!(
                "rbf gamma must be positive and finite, got {gamma}"
            )));
        }
        self.gamma = gamma;
        Ok(())
    }

    pub fn centers(&self) -> &Mat {
        &self.centers
    }

    pub fn n_centers(&self) -> usize {
        self.centers.rows()
    }

    pub fn input_width(&self) -> usize {
        self.centers.cols()
    }

    /// Number of individual kernel evaluations performed so far.
    pub fn eval_count(&self) -> u64 {
        self.eval_count.load(Ordering::Relaxed)
    }

    /// Kernel features for a batch `[B × n_plants] -> [B × M]`; every entry
    /// lies in (0, 1].
    pub fn features(&self, x: &Mat) -> Result<Mat> {
        if x.cols() != self.input_width() {
            return Err(Error::Dimension(format!(
                "rbf layer expects width {}, got {}",
                self.input_width(),
                x.cols()
            )));
        }
        if !x.is_finite() {
            return Err(Error::Numeric("non-finite input to rbf features".into()));
        }
        let mut out = Mat::zeros(x.rows(), self.n_centers());
        for b in 0..x.rows() {
            let xb = x.row(b);
            let row = out.row_mut(b);
            for (i, f) in row.iter_mut().enumerate() {
                *f = (-self.gamma * sq_dist(xb, self.centers.row(i))).exp();
            }
        }
        self.eval_count
            .fetch_add((x.rows() * self.n_centers()) as u64, Ordering::Relaxed);
        Ok(out)
    }

    fn fingerprint(&self, training: &Mat) -> u64 {
        let mut acc = fnv1a_f64(&[self.gamma]);
        acc ^= fnv1a_f64(self.centers.data()).rotate_left(1);
        acc ^= fnv1a_f64(training.data()).rotate_left(2);
        acc
    }

    /// Compute and store the training-set feature matrix once.
    pub fn precompute(&mut self, training: &Mat) -> Result<()> {
        let features = self.features(training)?;
        let fingerprint = self.fingerprint(training);
        self.cache = Some(FeatureCache {
            features,
            fingerprint,
        });
        Ok(())
    }

    /// The precomputed training features, validated against the current γ,
    /// centers, and training matrix.
    pub fn cached_features(&self, training: &Mat) -> Result<&Mat> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Usage("rbf features not precomputed".into()))?;
        if cache.fingerprint != self.fingerprint(training) {
            return Err(Error::StaleCache(
                "rbf feature cache no longer matches gamma/centers/training set".into(),
            ));
        }
        Ok(&cache.features)
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}

/// Pick kernel centers from the training observations: all of them when
/// `n ≤ cap`, otherwise a seeded uniform subsample without replacement
/// (kept in data order).
pub fn select_centers(training: &Mat, cap: usize, seed: u64) -> Result<Mat> {
    if cap < 2 {
        return Err(Error::Config(format!("center cap must be ≥ 2, got {cap}")));
    }
    if training.rows() == 0 {
        return Err(Error::InsufficientData(
            "no training observations for center selection".into(),
        ));
    }
    if training.rows() <= cap {
        return Ok(training.clone());
    }
    let mut r = rng::seeded(seed, rng::stream::CENTERS);
    let mut picked: Vec<usize> = index::sample(&mut r, training.rows(), cap).into_vec();
    picked.sort_unstable();
    Ok(training.select_rows(&picked))
}

/// Scale a base γ grid by the median pairwise squared distance of the
/// training observations, making the grid scale-free.
pub fn gamma_grid(training: &Mat, base: &[f64]) -> Vec<f64> {
    let med = median_pairwise_sq_dist(training);
    let scale = if med > 0.0 { 1.0 / med } else { 1.0 };
    base.iter().map(|&g| g * scale).collect()
}

fn median_pairwise_sq_dist(training: &Mat) -> f64 {
    let n = training.rows();
    if n < 2 {
        return 0.0;
    }
    // Stride down to at most 512 rows; pairwise cost stays bounded and the
    // selection is deterministic.
    let max_rows = 512;
    let stride = n.div_ceil(max_rows);
    let rows: Vec<usize> = (0..n).step_by(stride).collect();
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (i, &a) in rows.iter().enumerate() {
        for &b in &rows[i + 1..] {
            dists.push(sq_dist(training.row(a), training.row(b)));
        }
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    dists[dists.len() / 2]
}

/// Configuration of the standalone inverse-mapping network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseNetConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for InverseNetConfig {
    fn default() -> Self {
        InverseNetConfig {
            epochs: 300,
            batch_size: 16,
            learning_rate: 1e-3,
        }
    }
}

/// Training summary stored with the inverse network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseTrainReport {
    pub final_loss: f64,
    pub epochs: usize,
}

/// A dense stack regressing kernel features back to the variable space,
/// trained separately and then frozen inside the decoder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseNet {
    pub stack: Vec<DenseLayer>,
    pub report: InverseTrainReport,
}

impl InverseNet {
    pub fn output_width(&self) -> usize {
        self.stack.last().map_or(0, DenseLayer::output_width)
    }
}

/// Train the inverse mapping `features -> observations` on MSE. Requires
/// the layer's features to be precomputed for `training`.
pub fn train_inverse_net(
    layer: &RbfLayer,
    training: &Mat,
    config: &InverseNetConfig,
    seed: u64,
) -> Result<InverseNet> {
    let features = layer.cached_features(training)?.clone();
    let n_plants = training.cols();
    let hidden = 2 * n_plants;

    let mut init_rng = rng::seeded(seed, rng::stream::INVERSE_NET);
    let mut stack = vec![
        DenseLayer::glorot(layer.n_centers(), hidden, Activation::Relu, &mut init_rng),
        DenseLayer::glorot(hidden, hidden, Activation::Relu, &mut init_rng),
        DenseLayer::glorot(hidden, n_plants, Activation::Sigmoid, &mut init_rng),
    ];
    let mut state = AdamState::new(&stack, config.learning_rate);
    let mut shuffle_rng = rng::seeded(seed.wrapping_add(1), rng::stream::INVERSE_NET);

    let n = features.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut final_loss = f64::INFINITY;
    for _epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let x = features.select_rows(chunk);
            let y = training.select_rows(chunk);
            let loss = MseLoss { target: y };
            let (out, cache) = forward(&stack, &x)?;
            let value = loss.value(&out);
            if !value.is_finite() {
                return Err(Error::Training(format!(
                    "inverse net diverged (loss {value}), last finite loss {final_loss}"
                )));
            }
            let (grads, _) = backward(&stack, &cache, &loss.grad(&out))?;
            adam_step(&mut stack, &grads, &mut state, &[])?;
        }
        let (out, _) = forward(&stack, &features)?;
        final_loss = MseLoss {
            target: training.clone(),
        }
        .value(&out);
    }
    Ok(InverseNet {
        stack,
        report: InverseTrainReport {
            final_loss,
            epochs: config.epochs,
        },
    })
}
