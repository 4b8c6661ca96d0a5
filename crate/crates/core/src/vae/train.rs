//! Training loop, gamma grid search, and model selection.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EpochRecord, TrainConfig, VaeModel, Variant};
use crate::dataset::{PlantKind, WeeklyView};
use crate::error::{Error, Result};
use crate::latent::LatentPosteriorStore;
use crate::linalg::Mat;
use crate::nn::{adam_step, Activation, AdamState, DenseLayer};
use crate::rbf::{self, RbfLayer};
use crate::rng;
use crate::stats;

/// Metadata tying a trained model back to its dataset.
#[derive(Debug, Clone)]
pub struct DataContext {
    pub dataset_hash: u64,
    pub plant_ids: Vec<String>,
    pub plant_kinds: Vec<PlantKind>,
}

/// Seed of the deterministic prior draw used only for the KS tie-break in
/// model selection.
const TIE_BREAK_SEED: u64 = 0x5e1ec7;
const TIE_BREAK_DRAWS: usize = 256;

fn mirrored_decoder_widths(hidden: &[usize]) -> Vec<usize> {
    hidden.iter().rev().copied().collect()
}

fn assemble(
    variant: Variant,
    rbf: Option<RbfLayer>,
    inverse_tail: Option<Vec<DenseLayer>>,
    n_plants: usize,
    config: &TrainConfig,
    ctx: &DataContext,
) -> Result<VaeModel> {
    let input_width = match &rbf {
        Some(layer) => {
            if layer.input_width() != n_plants {
                return Err(Error::Config(format!(
                    "rbf centers have width {}, data has {} plants",
                    layer.input_width(),
                    n_plants
                )));
            }
            layer.n_centers()
        }
        None => n_plants,
    };

    let mut init_rng = rng::seeded(config.seed, rng::stream::INIT);
    let mut trunk = Vec::new();
    let mut w = input_width;
    for &h in &config.hidden_widths {
        trunk.push(DenseLayer::glorot(w, h, Activation::Relu, &mut init_rng));
        w = h;
    }
    let mu_head = DenseLayer::glorot(w, config.d_latent, Activation::Identity, &mut init_rng);
    let logvar_head = DenseLayer::glorot(w, config.d_latent, Activation::Identity, &mut init_rng);

    let mut decoder = Vec::new();
    let mut dw = config.d_latent;
    for &h in &mirrored_decoder_widths(&config.hidden_widths) {
        decoder.push(DenseLayer::glorot(dw, h, Activation::Relu, &mut init_rng));
        dw = h;
    }
    let frozen_tail = match inverse_tail {
        Some(tail) => {
            // Bridge into the frozen inverse network's feature-space input;
            // sigmoid keeps the bridge output in the kernel value range.
            let m = tail[0].input_width();
            decoder.push(DenseLayer::glorot(
                dw,
                m,
                Activation::Sigmoid,
                &mut init_rng,
            ));
            let n = tail.len();
            decoder.extend(tail);
            n
        }
        None => {
            decoder.push(DenseLayer::glorot(
                dw,
                n_plants,
                Activation::Sigmoid,
                &mut init_rng,
            ));
            0
        }
    };

    Ok(VaeModel {
        variant,
        rbf,
        trunk,
        mu_head,
        logvar_head,
        decoder,
        frozen_tail,
        d_latent: config.d_latent,
        n_plants,
        plant_ids: ctx.plant_ids.clone(),
        plant_kinds: ctx.plant_kinds.clone(),
        posteriors: LatentPosteriorStore::new(
            Mat::zeros(0, config.d_latent),
            Mat::zeros(0, config.d_latent),
            vec![],
        )?,
        training_log: vec![],
        config: config.clone(),
        dataset_hash: ctx.dataset_hash,
    })
}

struct ParamSnapshot {
    trunk: Vec<DenseLayer>,
    mu_head: DenseLayer,
    logvar_head: DenseLayer,
    decoder: Vec<DenseLayer>,
}

impl ParamSnapshot {
    fn take(model: &VaeModel) -> Self {
        ParamSnapshot {
            trunk: model.trunk.clone(),
            mu_head: model.mu_head.clone(),
            logvar_head: model.logvar_head.clone(),
            decoder: model.decoder.clone(),
        }
    }

    fn restore(self, model: &mut VaeModel) {
        model.trunk = self.trunk;
        model.mu_head = self.mu_head;
        model.logvar_head = self.logvar_head;
        model.decoder = self.decoder;
    }
}

fn params_finite(model: &VaeModel) -> bool {
    let layer_ok = |l: &DenseLayer| l.weights.is_finite() && l.biases.iter().all(|b| b.is_finite());
    model.trunk.iter().all(layer_ok)
        && layer_ok(&model.mu_head)
        && layer_ok(&model.logvar_head)
        && model.decoder.iter().all(layer_ok)
}

/// Train one model of the given variant on the train view, tracking test
/// loss per epoch with early stopping, then store the training-set
/// posteriors from a final deterministic pass. Bitwise reproducible for a
/// fixed config.
pub fn train(
    variant: Variant,
    train_view: &WeeklyView,
    test_view: &WeeklyView,
    rbf: Option<RbfLayer>,
    config: &TrainConfig,
    ctx: &DataContext,
) -> Result<VaeModel> {
    config.validate()?;
    if train_view.n_weeks() < 4 {
        return Err(Error::InsufficientData(format!(
            "training needs ≥ 4 weeks, got {}",
            train_view.n_weeks()
        )));
    }
    if train_view.n_plants() != test_view.n_plants() {
        return Err(Error::Dimension(
            "train and test views have different plant counts".into(),
        ));
    }
    if variant.uses_rbf() != rbf.is_some() {
        return Err(Error::Config(if variant.uses_rbf() {
            format!("variant {variant} requires an rbf layer")
        } else {
            format!("variant {variant} does not take an rbf layer")
        }));
    }
    let n_plants = train_view.n_plants();

    // Kernel features are fixed for the whole run: compute them once for
    // each side, before any epoch.
    let (rbf, front_train, front_test, inverse_tail) = match rbf {
        Some(mut layer) => {
            layer.precompute(&train_view.values)?;
            let front_train = layer.cached_features(&train_view.values)?.clone();
            let front_test = layer.features(&test_view.values)?;
            let tail = if variant == Variant::RbfExplicit {
                let net = rbf::train_inverse_net(
                    &layer,
                    &train_view.values,
                    &config.inverse_net,
                    config.seed,
                )?;
                Some(net.stack)
            } else {
                None
            };
            (Some(layer), front_train, front_test, tail)
        }
        None => (
            None,
            train_view.values.clone(),
            test_view.values.clone(),
            None,
        ),
    };

    let mut model = assemble(variant, rbf, inverse_tail, n_plants, config, ctx)?;
    let frozen: Vec<usize> =
        (model.decoder.len() - model.frozen_tail..model.decoder.len()).collect();

    let mut trunk_state = AdamState::new(&model.trunk, config.learning_rate);
    let mut mu_state = AdamState::new(std::slice::from_ref(&model.mu_head), config.learning_rate);
    let mut lv_state = AdamState::new(
        std::slice::from_ref(&model.logvar_head),
        config.learning_rate,
    );
    let mut dec_state = AdamState::new(&model.decoder, config.learning_rate);

    let mut shuffle_rng = rng::seeded(config.seed, rng::stream::SHUFFLE);
    let mut eps_rng = rng::seeded(config.seed, rng::stream::EPSILON);

    let n_train = train_view.n_weeks();
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut best: Option<(f64, ParamSnapshot)> = None;
    let mut epochs_since_best = 0usize;
    let mut last_finite: Option<(f64, f64)> = None;

    for epoch in 0..config.epochs {
        // Numeric failures inside an epoch are divergence: report them as
        // training errors carrying the last finite losses.
        let diverged = |msg: String, last: &Option<(f64, f64)>| {
            Error::Training(format!(
                "diverged at epoch {epoch} ({msg}); last finite (train, test) = {last:?}"
            ))
        };
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let front_b = front_train.select_rows(batch);
            let x_b = train_view.values.select_rows(batch);
            let mut eps = Mat::zeros(batch.len(), config.d_latent);
            for v in eps.data_mut() {
                *v = StandardNormal.sample(&mut eps_rng);
            }
            let (trace, parts) = match model.forward_full(&front_b, &x_b, &eps, config.kl_weight) {
                Ok(v) => v,
                Err(Error::Numeric(msg)) => return Err(diverged(msg, &last_finite)),
                Err(e) => return Err(e),
            };
            if !parts.total.is_finite() {
                return Err(diverged(format!("loss {}", parts.total), &last_finite));
            }
            if parts.kl < -1e-9 {
                return Err(Error::Numeric(format!(
                    "KL divergence went negative ({}) at epoch {epoch}",
                    parts.kl
                )));
            }
            let grads = model.backward_full(&x_b, &eps, &trace, config.kl_weight)?;
            let step = |stack: &mut [DenseLayer],
                        grads: &[crate::nn::LayerGrads],
                        state: &mut AdamState,
                        frozen: &[usize],
                        last: &Option<(f64, f64)>| {
                adam_step(stack, grads, state, frozen).map_err(|e| match e {
                    Error::Numeric(msg) => diverged(msg, last),
                    other => other,
                })
            };
            step(
                &mut model.trunk,
                &grads.trunk,
                &mut trunk_state,
                &[],
                &last_finite,
            )?;
            step(
                std::slice::from_mut(&mut model.mu_head),
                std::slice::from_ref(&grads.mu_head),
                &mut mu_state,
                &[],
                &last_finite,
            )?;
            step(
                std::slice::from_mut(&mut model.logvar_head),
                std::slice::from_ref(&grads.logvar_head),
                &mut lv_state,
                &[],
                &last_finite,
            )?;
            step(
                &mut model.decoder,
                &grads.decoder,
                &mut dec_state,
                &frozen,
                &last_finite,
            )?;
        }

        if !params_finite(&model) {
            return Err(Error::Training(format!(
                "parameters became non-finite after epoch {epoch}; last finite (train, test) = {last_finite:?}"
            )));
        }
        let train_parts = model.eval_parts(&front_train, &train_view.values, config.kl_weight)?;
        let test_parts = model.eval_parts(&front_test, &test_view.values, config.kl_weight)?;
        if !train_parts.total.is_finite() || !test_parts.total.is_finite() {
            return Err(Error::Training(format!(
                "evaluation loss diverged at epoch {epoch}; last finite (train, test) = {last_finite:?}"
            )));
        }
        last_finite = Some((train_parts.total, test_parts.total));
        model.training_log.push(EpochRecord {
            epoch,
            train_total: train_parts.total,
            train_recon: train_parts.recon,
            train_kl: train_parts.kl,
            test_total: test_parts.total,
            test_recon: test_parts.recon,
            test_kl: test_parts.kl,
        });

        let improved = best.as_ref().is_none_or(|(b, _)| test_parts.total < *b);
        if improved {
            best = Some((test_parts.total, ParamSnapshot::take(&model)));
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= config.patience {
                break;
            }
        }
    }

    if let Some((_, snapshot)) = best {
        snapshot.restore(&mut model);
    }

    // Posteriors from a final deterministic pass over the training set.
    let (mus, logvars) = model.encode_front(&front_train)?;
    let vars = logvars.map(f64::exp);
    model.posteriors = LatentPosteriorStore::new(mus, vars, train_view.source_weeks.clone())?;
    Ok(model)
}

/// One candidate's metrics in the selection report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub gamma: Option<f64>,
    pub test_mse: f64,
    /// Filled only when the tie-break had to run.
    pub ks_pass_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub entries: Vec<SelectionEntry>,
    pub selected: usize,
}

fn tie_break_ks_pass_rate(model: &VaeModel, test_view: &WeeklyView) -> Result<f64> {
    let mut r = rng::seeded(TIE_BREAK_SEED, rng::stream::EPSILON);
    let mut z = Mat::zeros(TIE_BREAK_DRAWS, model.d_latent);
    for v in z.data_mut() {
        *v = StandardNormal.sample(&mut r);
    }
    let decoded = model.decode(&z)?;
    let mut passed = 0usize;
    for p in 0..model.n_plants {
        let hist: Vec<f64> = (0..test_view.n_weeks())
            .map(|w| test_view.values.at(w, p))
            .collect();
        let gen: Vec<f64> = (0..TIE_BREAK_DRAWS).map(|s| decoded.at(s, p)).collect();
        let (_, p_value) = stats::ks_two_sample(&hist, &gen)?;
        if p_value > 0.05 {
            passed += 1;
        }
    }
    Ok(passed as f64 / model.n_plants as f64)
}

/// Rank trained candidates by test reconstruction MSE; break exact ties by
/// KS pass rate on the test weeks, then by lower gamma.
pub fn select_model(
    candidates: Vec<VaeModel>,
    test_view: &WeeklyView,
) -> Result<(VaeModel, SelectionReport)> {
    if candidates.is_empty() {
        return Err(Error::Usage("select_model: no candidates".into()));
    }
    let mut entries: Vec<SelectionEntry> = Vec::with_capacity(candidates.len());
    for model in &candidates {
        entries.push(SelectionEntry {
            gamma: model.rbf.as_ref().map(RbfLayer::gamma),
            test_mse: model.reconstruction_mse(&test_view.values)?,
            ks_pass_rate: None,
        });
    }
    let mut best = 0usize;
    for i in 1..candidates.len() {
        if entries[i].test_mse < entries[best].test_mse {
            best = i;
        } else if entries[i].test_mse == entries[best].test_mse {
            // The KS tie-break needs at least 5 test weeks; below that it
            // degenerates to the gamma rule.
            if test_view.n_weeks() >= 5 {
                if entries[best].ks_pass_rate.is_none() {
                    entries[best].ks_pass_rate =
                        Some(tie_break_ks_pass_rate(&candidates[best], test_view)?);
                }
                if entries[i].ks_pass_rate.is_none() {
                    entries[i].ks_pass_rate =
                        Some(tie_break_ks_pass_rate(&candidates[i], test_view)?);
                }
            }
            let (a, b) = (
                entries[i].ks_pass_rate.unwrap_or(0.0),
                entries[best].ks_pass_rate.unwrap_or(0.0),
            );
            if a > b {
                best = i;
            } else if a == b {
                let (gi, gb) = (entries[i].gamma, entries[best].gamma);
                if let (Some(gi), Some(gb)) = (gi, gb) {
                    if gi < gb {
                        best = i;
                    }
                }
            }
        }
    }
    let report = SelectionReport {
        entries,
        selected: best,
    };
    let model = candidates
        .into_iter()
        .nth(best)
        .expect("selected index in range");
    Ok((model, report))
}

/// Full estimation pass: pick centers, scale the gamma grid, train one
/// candidate per gamma (optionally in parallel; results are identical to
/// sequential), and keep the best per [`select_model`]. The pure variant
/// trains a single candidate.
pub fn train_gamma_grid(
    variant: Variant,
    train_view: &WeeklyView,
    test_view: &WeeklyView,
    config: &TrainConfig,
    ctx: &DataContext,
    n_threads: usize,
) -> Result<(VaeModel, SelectionReport)> {
    config.validate()?;
    if !variant.uses_rbf() {
        let model = train(variant, train_view, test_view, None, config, ctx)?;
        let report = SelectionReport {
            entries: vec![SelectionEntry {
                gamma: None,
                test_mse: model.reconstruction_mse(&test_view.values)?,
                ks_pass_rate: None,
            }],
            selected: 0,
        };
        return Ok((model, report));
    }

    let centers = rbf::select_centers(&train_view.values, config.center_cap, config.seed)?;
    let gammas = rbf::gamma_grid(&train_view.values, &config.gamma_grid);

    let train_one = |gamma: f64| -> Result<VaeModel> {
        let layer = RbfLayer::new(centers.clone(), gamma)?;
        train(variant, train_view, test_view, Some(layer), config, ctx)
    };

    let candidates: Vec<VaeModel> = if n_threads <= 1 || gammas.len() == 1 {
        gammas
            .iter()
            .map(|&g| train_one(g))
            .collect::<Result<Vec<_>>>()?
    } else {
        let mut slots: Vec<Option<Result<VaeModel>>> = (0..gammas.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let chunk = gammas.len().div_ceil(n_threads);
            let mut rest = slots.as_mut_slice();
            let mut offset = 0;
            let mut handles = Vec::new();
            while !rest.is_empty() {
                let take = chunk.min(rest.len());
                let (head, tail) = rest.split_at_mut(take);
                rest = tail;
                let gammas = &gammas;
                let train_one = &train_one;
                let base = offset;
                handles.push(scope.spawn(move || {
                    for (i, slot) in head.iter_mut().enumerate() {
                        *slot = Some(train_one(gammas[base + i]));
                    }
                }));
                offset += take;
            }
            for h in handles {
                h.join().expect("candidate training thread panicked");
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every slot filled"))
            .collect::<Result<Vec<_>>>()?
    };

    select_model(candidates, test_view)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{synth_panel, SynthSpec};
    use crate::dataset::{aggregate_weekly, split, SplitSpec};

    fn toy_data(
        n_plants: usize,
        n_weeks: usize,
        seed: u64,
    ) -> (WeeklyView, WeeklyView, DataContext) {
        let spec = SynthSpec {
            n_plants,
            n_weeks,
            seed,
            solar_fraction: 0.25,
            rho: 0.6,
        };
        let panel = synth_panel(&spec).unwrap();
        let weekly = aggregate_weekly(&panel).unwrap();
        let (train_v, test_v) = split(
            &weekly,
            &SplitSpec {
                train_fraction: 0.75,
                seed,
            },
        )
        .unwrap();
        let ctx = DataContext {
            dataset_hash: panel.fingerprint(),
            plant_ids: panel.plant_ids.clone(),
            plant_kinds: panel.plant_kinds.clone(),
        };
        (train_v, test_v, ctx)
    }

    fn toy_config(epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 8,
            d_latent: 3,
            hidden_widths: vec![16],
            seed,
            kl_weight: 0.05,
            patience: epochs,
            ..Default::default()
        }
    }

    #[test]
    fn training_reduces_loss_and_is_reproducible() {
        let (train_v, test_v, ctx) = toy_data(4, 16, 9);
        let cfg = toy_config(40, 9);
        let model = train(Variant::Pure, &train_v, &test_v, None, &cfg, &ctx).unwrap();
        let log = &model.training_log;
        assert!(log.last().unwrap().train_total < log[0].train_total);
        assert_eq!(model.posteriors.len(), train_v.n_weeks());
        assert_eq!(model.posteriors.week_refs, train_v.source_weeks);

        let model2 = train(Variant::Pure, &train_v, &test_v, None, &cfg, &ctx).unwrap();
        assert_eq!(
            serde_json::to_string(&model).unwrap(),
            serde_json::to_string(&model2).unwrap()
        );
    }

    #[test]
    fn rbf_variant_trains_and_counts_kernel_evaluations_once() {
        let (train_v, test_v, ctx) = toy_data(4, 16, 3);
        let centers = rbf::select_centers(&train_v.values, 512, 3).unwrap();

        let run = |epochs: usize| -> u64 {
            let layer = RbfLayer::new(centers.clone(), 5.0).unwrap();
            let cfg = toy_config(epochs, 3);
            let model = train(
                Variant::RbfImplicit,
                &train_v,
                &test_v,
                Some(layer),
                &cfg,
                &ctx,
            )
            .unwrap();
            model.rbf.as_ref().unwrap().eval_count()
        };
        // Kernel evaluations are independent of the number of epochs: the
        // training features are precomputed once and the test features once.
        assert_eq!(run(2), run(6));
    }

    #[test]
    fn divergence_reports_last_finite_losses() {
        let (train_v, test_v, ctx) = toy_data(4, 16, 2);
        let mut cfg = toy_config(50, 2);
        // A destructive learning rate overflows the parameters; Adam's
        // scale-invariant steps need an extreme value to get there.
        cfg.learning_rate = 1e300;
        let err = train(Variant::Pure, &train_v, &test_v, None, &cfg, &ctx).unwrap_err();
        match err {
            Error::Training(msg) => assert!(msg.contains("last finite"), "{msg}"),
            other => panic!("expected training error, got {other:?}"),
        }
    }

    #[test]
    fn zero_kl_weight_reconstructs_at_least_as_well() {
        let (train_v, test_v, ctx) = toy_data(4, 16, 5);
        let mut ae_cfg = toy_config(60, 5);
        ae_cfg.kl_weight = 0.0;
        let mut vae_cfg = toy_config(60, 5);
        vae_cfg.kl_weight = 1.0;
        let ae = train(Variant::Pure, &train_v, &test_v, None, &ae_cfg, &ctx).unwrap();
        let vae = train(Variant::Pure, &train_v, &test_v, None, &vae_cfg, &ctx).unwrap();
        let ae_recon = ae.training_log.last().unwrap().train_recon;
        let vae_recon = vae.training_log.last().unwrap().train_recon;
        assert!(
            ae_recon <= vae_recon + 1e-12,
            "autoencoder recon {ae_recon} vs regularized {vae_recon}"
        );
    }

    #[test]
    fn explicit_variant_keeps_its_tail_frozen() {
        let (train_v, test_v, ctx) = toy_data(4, 16, 11);
        let centers = rbf::select_centers(&train_v.values, 512, 11).unwrap();
        let layer = RbfLayer::new(centers, 8.0).unwrap();
        let mut cfg = toy_config(10, 11);
        cfg.inverse_net.epochs = 40;

        // Reproduce the frozen tail exactly: the inverse net trained on the
        // same features and seed.
        let mut probe = RbfLayer::new(layer.centers().clone(), layer.gamma()).unwrap();
        probe.precompute(&train_v.values).unwrap();
        let expected_tail =
            rbf::train_inverse_net(&probe, &train_v.values, &cfg.inverse_net, cfg.seed)
                .unwrap()
                .stack;

        let model = train(
            Variant::RbfExplicit,
            &train_v,
            &test_v,
            Some(layer),
            &cfg,
            &ctx,
        )
        .unwrap();
        assert_eq!(model.frozen_tail, 3);
        let tail_start = model.decoder.len() - model.frozen_tail;
        for (trained, expected) in model.decoder[tail_start..].iter().zip(&expected_tail) {
            assert_eq!(trained.weights.data(), expected.weights.data());
            assert_eq!(trained.biases, expected.biases);
        }
    }

    #[test]
    fn variant_rbf_mismatch_is_a_config_error() {
        let (train_v, test_v, ctx) = toy_data(4, 16, 2);
        let cfg = toy_config(2, 2);
        assert!(matches!(
            train(Variant::RbfImplicit, &train_v, &test_v, None, &cfg, &ctx),
            Err(Error::Config(_))
        ));
        let layer = RbfLayer::new(train_v.values.clone(), 1.0).unwrap();
        assert!(matches!(
            train(Variant::Pure, &train_v, &test_v, Some(layer), &cfg, &ctx),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn too_few_training_weeks_is_rejected() {
        let (train_v, test_v, ctx) = toy_data(4, 16, 2);
        let small = WeeklyView {
            source_weeks: train_v.source_weeks[..3].to_vec(),
            values: train_v.values.select_rows(&[0, 1, 2]),
        };
        let cfg = toy_config(2, 2);
        assert!(matches!(
            train(Variant::Pure, &small, &test_v, None, &cfg, &ctx),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn select_model_prefers_lower_test_mse() {
        let (train_v, test_v, ctx) = toy_data(4, 16, 7);
        let brief = train(
            Variant::Pure,
            &train_v,
            &test_v,
            None,
            &toy_config(3, 7),
            &ctx,
        )
        .unwrap();
        let longer = train(
            Variant::Pure,
            &train_v,
            &test_v,
            None,
            &toy_config(60, 7),
            &ctx,
        )
        .unwrap();
        let mse_brief = brief.reconstruction_mse(&test_v.values).unwrap();
        let mse_longer = longer.reconstruction_mse(&test_v.values).unwrap();
        assert!(mse_longer < mse_brief);

        let (best, report) = select_model(vec![brief, longer], &test_v).unwrap();
        assert_eq!(report.selected, 1);
        assert_eq!(best.reconstruction_mse(&test_v.values).unwrap(), mse_longer);
    }

    #[test]
    fn select_model_single_candidate_and_empty_list() {
        let (train_v, test_v, ctx) = toy_data(4, 16, 7);
        let model = train(
            Variant::Pure,
            &train_v,
            &test_v,
            None,
            &toy_config(3, 7),
            &ctx,
        )
        .unwrap();
        let (_, report) = select_model(vec![model], &test_v).unwrap();
        assert_eq!(report.selected, 0);
        assert!(matches!(
            select_model(vec![], &test_v),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn exact_tie_breaks_to_lower_gamma() {
        let (train_v, test_v, ctx) = toy_data(4, 24, 13);
        let centers = rbf::select_centers(&train_v.values, 512, 13).unwrap();
        let cfg = toy_config(4, 13);
        // Identical models except for a gamma so extreme that features are
        // indistinguishable: same training result, same MSE.
        let make = |gamma: f64| {
            let layer = RbfLayer::new(centers.clone(), gamma).unwrap();
            train(
                Variant::RbfImplicit,
                &train_v,
                &test_v,
                Some(layer),
                &cfg,
                &ctx,
            )
            .unwrap()
        };
        let a = make(1e9);
        let b = make(2e9);
        let mse_a = a.reconstruction_mse(&test_v.values).unwrap();
        let mse_b = b.reconstruction_mse(&test_v.values).unwrap();
        assert_eq!(mse_a, mse_b, "tie setup failed");
        let (best, report) = select_model(vec![b, a], &test_v).unwrap();
        assert_eq!(best.rbf.as_ref().unwrap().gamma(), 1e9);
        assert!(report.entries.iter().all(|e| e.ks_pass_rate.is_some()));
    }

    #[test]
    fn grid_search_parallel_matches_sequential() {
        let (train_v, test_v, ctx) = toy_data(3, 14, 17);
        let mut cfg = toy_config(6, 17);
        cfg.gamma_grid = vec![0.1, 1.0, 10.0];
        let (seq, seq_report) =
            train_gamma_grid(Variant::RbfImplicit, &train_v, &test_v, &cfg, &ctx, 1).unwrap();
        let (par, par_report) =
            train_gamma_grid(Variant::RbfImplicit, &train_v, &test_v, &cfg, &ctx, 3).unwrap();
        assert_eq!(seq_report.selected, par_report.selected);
        assert_eq!(
            serde_json::to_string(&seq).unwrap(),
            serde_json::to_string(&par).unwrap()
        );
    }
}
