//! The weekly scenario model: a variational autoencoder whose encoder can
//! be fronted by the fixed kernel feature layer, with a choice of decoder
//! construction.
//!
//! Three variants share one structure and one interface:
//!
//! * `rbf-implicit`: kernel features enter the encoder; the decoder learns
//!   the mapping back to variable space end to end (the default).
//! * `rbf-explicit`: same encoder; the decoder routes through a frozen,
//!   separately trained inverse-mapping network.
//! * `pure`: no kernel layer at all; raw weekly observations enter the
//!   encoder. The ablation baseline.
//!
//! The network is hand-differentiated: [`VaeModel::forward_full`] and
//! [`VaeModel::backward_full`] implement the exact chain rule through the
//! reparameterization `z = μ + exp(logvar/2) ⊙ ε`, and
//! [`grad_check_full`] verifies it against central finite differences.

mod train;

pub use train::{train, train_gamma_grid, DataContext, SelectionEntry, SelectionReport};

use serde::{Deserialize, Serialize};

use crate::dataset::PlantKind;
use crate::error::{Error, Result};
use crate::latent::LatentPosteriorStore;
use crate::linalg::Mat;
use crate::nn::{self, DenseLayer, ForwardCache, GradCheckReport, LayerGrads};
use crate::rbf::{InverseNetConfig, RbfLayer};

/// Floor on log σ² so that σ² = exp(logvar) never drops below 1e-6.
pub const LOGVAR_MIN: f64 = -13.815510557964274;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "rbf-implicit")]
    RbfImplicit,
    #[serde(rename = "rbf-explicit")]
    RbfExplicit,
    #[serde(rename = "pure")]
    Pure,
}

impl Variant {
    pub fn uses_rbf(self) -> bool {
        !matches!(self, Variant::Pure)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::RbfImplicit => f.write_str("rbf-implicit"),
            Variant::RbfExplicit => f.write_str("rbf-explicit"),
            Variant::Pure => f.write_str("pure"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf-implicit" => Ok(Variant::RbfImplicit),
            "rbf-explicit" => Ok(Variant::RbfExplicit),
            "pure" => Ok(Variant::Pure),
            other => Err(Error::Usage(format!(
                "unknown variant '{other}' (expected rbf-implicit, rbf-explicit, or pure)"
            ))),
        }
    }
}

/// Training hyperparameters. `gamma_grid` holds the base grid; it is scaled
/// by the median pairwise squared distance of the training set at train
/// time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub kl_weight: f64,
    pub d_latent: usize,
    pub hidden_widths: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub patience: usize,
    pub center_cap: usize,
    pub inverse_net: InverseNetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            kl_weight: 1.0,
            d_latent: 8,
            hidden_widths: vec![64],
            gamma_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            patience: 50,
            center_cap: 512,
            inverse_net: InverseNetConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.d_latent == 0 {
            return Err(Error::Config(
                "epochs, batch_size, d_latent must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 || self.learning_rate.is_nan() {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.kl_weight < 0.0 {
            return Err(Error::Config("kl_weight must be ≥ 0".into()));
        }
        if self.gamma_grid.is_empty() || self.gamma_grid.iter().any(|&g| g <= 0.0 || g.is_nan()) {
            return Err(Error::Config(
                "gamma_grid must be non-empty and positive".into(),
            ));
        }
        if self.center_cap < 2 {
            return Err(Error::Config("center_cap must be ≥ 2".into()));
        }
        Ok(())
    }
}

/// One line of the training curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_total: f64,
    pub train_recon: f64,
    pub train_kl: f64,
    pub test_total: f64,
    pub test_recon: f64,
    pub test_kl: f64,
}

/// Loss decomposition: `total = recon + kl_weight·kl`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// The assembled (and, after [`train`], fitted) model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VaeModel {
    pub variant: Variant,
    pub rbf: Option<RbfLayer>,
    /// Encoder hidden stack; both heads read its last output.
    pub trunk: Vec<DenseLayer>,
    pub mu_head: DenseLayer,
    pub logvar_head: DenseLayer,
    /// Decoder stack; the trailing `frozen_tail` layers are never updated.
    pub decoder: Vec<DenseLayer>,
    pub frozen_tail: usize,
    pub d_latent: usize,
    pub n_plants: usize,
    pub plant_ids: Vec<String>,
    pub plant_kinds: Vec<PlantKind>,
    pub posteriors: LatentPosteriorStore,
    pub training_log: Vec<EpochRecord>,
    pub config: TrainConfig,
    pub dataset_hash: u64,
}

impl VaeModel {
    /// Encoder input width: number of kernel centers for rbf variants, raw
    /// plant count for the pure variant.
    pub fn encoder_input_width(&self) -> usize {
        match &self.rbf {
            Some(layer) => layer.n_centers(),
            None => self.n_plants,
        }
    }

    /// The encoder front end: kernel features for rbf variants, identity
    /// for the pure variant.
    pub fn front(&self, x: &Mat) -> Result<Mat> {
        if x.cols() != self.n_plants {
            return Err(Error::Dimension(format!(
                "expected {} plants, got {} columns",
                self.n_plants,
                x.cols()
            )));
        }
        match &self.rbf {
            Some(layer) => layer.features(x),
            None => Ok(x.clone()),
        }
    }

    /// Deterministic encoding of raw observations to (μ, logvar).
    pub fn encode(&self, x: &Mat) -> Result<(Mat, Mat)> {
        let front = self.front(x)?;
        self.encode_front(&front)
    }

    /// Encode pre-featurized input (the training path, which reads the
    /// kernel cache instead of re-evaluating kernels).
    pub fn encode_front(&self, front: &Mat) -> Result<(Mat, Mat)> {
        let (h_last, _) = nn::forward(&self.trunk, front)?;
        let (mu, _) = self.mu_head.forward(&h_last)?;
        let (lv_raw, _) = self.logvar_head.forward(&h_last)?;
        Ok((mu, lv_raw.map(|v| v.max(LOGVAR_MIN))))
    }

    /// Decode latent points to weekly per-unit values in [0, 1].
    pub fn decode(&self, z: &Mat) -> Result<Mat> {
        if z.cols() != self.d_latent {
            return Err(Error::Dimension(format!(
                "latent width {} does not match d_latent {}",
                z.cols(),
                self.d_latent
            )));
        }
        let (x_hat, _) = nn::forward(&self.decoder, z)?;
        Ok(x_hat)
    }

    /// Deterministic reconstruction error (z = μ): mean squared error of
    /// decode(encode(x)) against x.
    pub fn reconstruction_mse(&self, x: &Mat) -> Result<f64> {
        let (mu, _) = self.encode(x)?;
        let x_hat = self.decode(&mu)?;
        let n = x.data().len() as f64;
        Ok(x.data()
            .iter()
            .zip(x_hat.data())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
    }

    /// Deterministic loss evaluation with ε = 0 (z = μ), used for the
    /// per-epoch curve.
    pub fn eval_parts(&self, front: &Mat, x: &Mat, kl_weight: f64) -> Result<LossParts> {
        let eps = Mat::zeros(front.rows(), self.d_latent);
        let (_, parts) = self.forward_full(front, x, &eps, kl_weight)?;
        Ok(parts)
    }

    pub(crate) fn forward_full(
        &self,
        front: &Mat,
        x: &Mat,
        eps: &Mat,
        kl_weight: f64,
    ) -> Result<(FullTrace, LossParts)> {
        let (h_last, trunk_cache) = nn::forward(&self.trunk, front)?;
        let (mu, mu_pre) = self.mu_head.forward(&h_last)?;
        let (lv_raw, _) = self.logvar_head.forward(&h_last)?;
        let lv = lv_raw.map(|v| v.max(LOGVAR_MIN));
        let z = reparameterize(&mu, &lv, eps)?;
        let (x_hat, dec_cache) = nn::forward(&self.decoder, &z)?;
        let parts = loss(x, &x_hat, &mu, &lv, kl_weight)?;
        Ok((
            FullTrace {
                trunk_cache,
                h_last,
                mu,
                mu_pre,
                lv_raw,
                lv,
                dec_cache,
                x_hat,
            },
            parts,
        ))
    }

    pub(crate) fn backward_full(
        &self,
        x: &Mat,
        eps: &Mat,
        trace: &FullTrace,
        kl_weight: f64,
    ) -> Result<VaeGrads> {
        let batch = x.rows() as f64;
        let n_elems = x.data().len() as f64;

        // Reconstruction term: d recon / d x_hat = 2 (x̂ − x) / (B·P).
        let mut d_xhat = trace.x_hat.clone();
        for (v, &t) in d_xhat.data_mut().iter_mut().zip(x.data()) {
            *v = 2.0 * (*v - t) / n_elems;
        }
        let (decoder, dz) = nn::backward(&self.decoder, &trace.dec_cache, &d_xhat)?;

        // Through the reparameterization: dz/dμ = I,
        // dz/dlogvar = ½ exp(logvar/2) ⊙ ε. The KL term adds μ/B to dμ and
        // (exp(logvar) − 1)/(2B) to dlogvar, both scaled by kl_weight. The
        // logvar path is dead where the variance floor clamps.
        let mut d_mu = dz.clone();
        for (v, &m) in d_mu.data_mut().iter_mut().zip(trace.mu.data()) {
            *v += kl_weight * m / batch;
        }
        let mut d_lv = Mat::zeros(dz.rows(), dz.cols());
        for i in 0..dz.data().len() {
            let raw = trace.lv_raw.data()[i];
            if raw < LOGVAR_MIN {
                continue;
            }
            let lv = trace.lv.data()[i];
            let through_z = dz.data()[i] * 0.5 * (0.5 * lv).exp() * eps.data()[i];
            let through_kl = kl_weight * (lv.exp() - 1.0) / (2.0 * batch);
            d_lv.data_mut()[i] = through_z + through_kl;
        }

        let head_cache = |pre: &Mat| ForwardCache {
            inputs: vec![trace.h_last.clone()],
            pre: vec![pre.clone()],
        };
        let (mut mu_grads, dh_mu) = nn::backward(
            std::slice::from_ref(&self.mu_head),
            &head_cache(&trace.mu_pre),
            &d_mu,
        )?;
        let (mut lv_grads, dh_lv) = nn::backward(
            std::slice::from_ref(&self.logvar_head),
            &head_cache(&trace.lv_raw),
            &d_lv,
        )?;
        let mut dh = dh_mu;
        for (v, &w) in dh.data_mut().iter_mut().zip(dh_lv.data()) {
            *v += w;
        }
        let (trunk, _) = nn::backward(&self.trunk, &trace.trunk_cache, &dh)?;
        Ok(VaeGrads {
            trunk,
            mu_head: mu_grads.remove(0),
            logvar_head: lv_grads.remove(0),
            decoder,
        })
    }
}

#[derive(Debug)]
pub(crate) struct FullTrace {
    pub trunk_cache: ForwardCache,
    pub h_last: Mat,
    pub mu: Mat,
    pub mu_pre: Mat,
    pub lv_raw: Mat,
    pub lv: Mat,
    pub dec_cache: ForwardCache,
    pub x_hat: Mat,
}

#[derive(Debug)]
pub(crate) struct VaeGrads {
    pub trunk: Vec<LayerGrads>,
    pub mu_head: LayerGrads,
    pub logvar_head: LayerGrads,
    pub decoder: Vec<LayerGrads>,
}

/// `z = μ + exp(logvar/2) ⊙ ε`, with ε injected by the caller.
pub fn reparameterize(mu: &Mat, logvar: &Mat, eps: &Mat) -> Result<Mat> {
    if mu.rows() != logvar.rows()
        || mu.cols() != logvar.cols()
        || mu.rows() != eps.rows()
        || mu.cols() != eps.cols()
    {
        return Err(Error::Dimension(
            "reparameterize: μ/logvar/ε shapes differ".into(),
        ));
    }
    let mut z = mu.clone();
    for ((v, &lv), &e) in z.data_mut().iter_mut().zip(logvar.data()).zip(eps.data()) {
        *v += (0.5 * lv).exp() * e;
    }
    Ok(z)
}

/// The training objective: mean squared reconstruction error plus the
/// weighted KL divergence `−½ Σ_j (1 + logvar − μ² − exp(logvar))`,
/// averaged over the batch.
pub fn loss(x: &Mat, x_hat: &Mat, mu: &Mat, logvar: &Mat, kl_weight: f64) -> Result<LossParts> {
    if x.rows() != x_hat.rows() || x.cols() != x_hat.cols() {
        return Err(Error::Dimension("loss: x and x_hat shapes differ".into()));
    }
    if mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.rows() != x.rows() {
        return Err(Error::Dimension(
            "loss: μ/logvar shapes inconsistent with batch".into(),
        ));
    }
    for m in [x, x_hat, mu, logvar] {
        if !m.is_finite() {
            return Err(Error::Numeric("non-finite input to loss".into()));
        }
    }
    let n = x.data().len() as f64;
    let recon = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    let mut kl = 0.0;
    for r in 0..mu.rows() {
        let mut per_sample = 0.0;
        for (&m, &lv) in mu.row(r).iter().zip(logvar.row(r)) {
            per_sample += 1.0 + lv - m * m - lv.exp();
        }
        kl += -0.5 * per_sample;
    }
    kl /= mu.rows() as f64;
    Ok(LossParts {
        total: recon + kl_weight * kl,
        recon,
        kl,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ParamGroup {
    Trunk(usize),
    MuHead,
    LogvarHead,
    Decoder(usize),
}

fn layer_of(model: &VaeModel, group: ParamGroup) -> &DenseLayer {
    match group {
        ParamGroup::Trunk(i) => &model.trunk[i],
        ParamGroup::MuHead => &model.mu_head,
        ParamGroup::LogvarHead => &model.logvar_head,
        ParamGroup::Decoder(i) => &model.decoder[i],
    }
}

fn layer_of_mut(model: &mut VaeModel, group: ParamGroup) -> &mut DenseLayer {
    match group {
        ParamGroup::Trunk(i) => &mut model.trunk[i],
        ParamGroup::MuHead => &mut model.mu_head,
        ParamGroup::LogvarHead => &mut model.logvar_head,
        ParamGroup::Decoder(i) => &mut model.decoder[i],
    }
}

fn grad_of(grads: &VaeGrads, group: ParamGroup) -> &LayerGrads {
    match group {
        ParamGroup::Trunk(i) => &grads.trunk[i],
        ParamGroup::MuHead => &grads.mu_head,
        ParamGroup::LogvarHead => &grads.logvar_head,
        ParamGroup::Decoder(i) => &grads.decoder[i],
    }
}

fn all_groups(model: &VaeModel) -> Vec<ParamGroup> {
    let mut groups: Vec<ParamGroup> = (0..model.trunk.len()).map(ParamGroup::Trunk).collect();
    groups.push(ParamGroup::MuHead);
    groups.push(ParamGroup::LogvarHead);
    groups.extend((0..model.decoder.len()).map(ParamGroup::Decoder));
    groups
}

/// Finite-difference check of the full training objective (reconstruction +
/// weighted KL, through the reparameterization with fixed injected ε)
/// against the hand-written backward pass, over every parameter of every
/// layer.
pub fn grad_check_full(
    model: &VaeModel,
    x: &Mat,
    eps: &Mat,
    kl_weight: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let front = model.front(x)?;
    let (trace, _) = model.forward_full(&front, x, eps, kl_weight)?;
    let analytic = model.backward_full(x, eps, &trace, kl_weight)?;

    let mut work = model.clone();
    let eval = |m: &VaeModel| -> Result<f64> {
        let (_, parts) = m.forward_full(&front, x, eps, kl_weight)?;
        Ok(parts.total)
    };

    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    for group in all_groups(model) {
        let n_weights = layer_of(model, group).weights.data().len();
        let n_biases = layer_of(model, group).biases.len();
        for i in 0..n_weights + n_biases {
            let read = |m: &VaeModel| {
                let l = layer_of(m, group);
                if i < n_weights {
                    l.weights.data()[i]
                } else {
                    l.biases[i - n_weights]
                }
            };
            let write = |m: &mut VaeModel, v: f64| {
                let l = layer_of_mut(m, group);
                if i < n_weights {
                    l.weights.data_mut()[i] = v;
                } else {
                    l.biases[i - n_weights] = v;
                }
            };
            let orig = read(&work);
            write(&mut work, orig + nn::FD_STEP);
            let plus = eval(&work)?;
            write(&mut work, orig - nn::FD_STEP);
            let minus = eval(&work)?;
            write(&mut work, orig);
            let numeric = (plus - minus) / (2.0 * nn::FD_STEP);
            let g = grad_of(&analytic, group);
            let a = if i < n_weights {
                g.weights.data()[i]
            } else {
                g.biases[i - n_weights]
            };
            max_rel = max_rel.max(nn::rel_error(a, numeric));
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        checked_params: checked,
        passed: max_rel < tolerance,
    })
}
