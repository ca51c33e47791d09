//! Gradient-descent training for every objective, with optional projection of
//! each weight matrix back onto the unit Frobenius sphere after each step.
//!
//! | objective               | init        | pretrain | loss                          | projection |
//! |-------------------------|-------------|----------|-------------------------------|------------|
//! | `oc_fixed_center`       | autoencoder | yes      | fixed-center + weight decay   | no         |
//! | `oc_joint`              | unit norm   | no       | pairwise one-class            | yes        |
//! | `ai_svdd`               | unit norm   | no       | signed pairwise (BC-loss)     | yes        |
//! | `oc_joint_regularized`  | Glorot      | no       | pairwise one-class + decay    | no         |

use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::dataset::{stratified_label_batches, EmbeddingDataset, NORMAL};
use crate::error::{Result, SvddError};
use crate::metrics::ScoreReport;
use crate::network::{
    frobenius_norm, init_network_with, AutoencoderNetwork, EncoderNetwork, GradientSet, NetworkOptions,
    DEFAULT_SLOPE,
};
use crate::objectives::{bc_loss_and_grad, oc_loss, oc_loss_grad, plain_center, score, signed_center, Center};
use crate::rng::derive_seed;

const STREAM_INIT: u64 = 0;
const STREAM_AUTOENCODER: u64 = 1;
const STREAM_PRETRAIN_BATCHES: u64 = 1 << 20;
const STREAM_BATCHES: u64 = 2 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Objective {
    OcFixedCenter,
    OcJoint,
    AiSvdd,
    /// Joint one-class loss with weight decay instead of the norm constraint.
    OcJointRegularized,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::OcFixedCenter,
        Objective::OcJoint,
        Objective::AiSvdd,
        Objective::OcJointRegularized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::OcFixedCenter => "oc_fixed_center",
            Objective::OcJoint => "oc_joint",
            Objective::AiSvdd => "ai_svdd",
            Objective::OcJointRegularized => "oc_joint_regularized",
        }
    }

    pub fn is_constrained(self) -> bool {
        matches!(self, Objective::OcJoint | Objective::AiSvdd)
    }

    pub fn uses_labels(self) -> bool {
        self == Objective::AiSvdd
    }

    pub fn uses_lambda(self) -> bool {
        matches!(self, Objective::OcFixedCenter | Objective::OcJointRegularized)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = SvddError;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| {
                SvddError::InvalidConfig(format!(
                    "unknown objective '{s}' (expected one of oc_fixed_center, oc_joint, ai_svdd, oc_joint_regularized)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: Objective,
    /// Weight decay; ignored by the constrained objectives.
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_size: usize,
    pub latent_size: usize,
    /// Number of hidden layers of width `hidden_size`; 0 gives a single linear layer.
    pub hidden_layers: usize,
    pub seed: u64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub use_bias: bool,
    pub slope: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::AiSvdd,
            lambda: 1e-4,
            learning_rate: 0.001,
            epochs: 3,
            batch_size: 64,
            hidden_size: 512,
            latent_size: 64,
            hidden_layers: 1,
            seed: 0,
            pretrain_epochs: 10,
            pretrain_lr: 0.001,
            use_bias: false,
            slope: DEFAULT_SLOPE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SvddError::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.objective == Objective::AiSvdd && self.batch_size < 2 {
            return bad("ai_svdd needs a batch size of at least 2".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.hidden_size == 0 || self.latent_size == 0 {
            return bad("hidden and latent sizes must be positive".into());
        }
        if self.objective == Objective::OcFixedCenter && self.pretrain_epochs == 0 {
            return bad("oc_fixed_center needs at least one pretraining epoch".into());
        }
        if !(self.pretrain_lr > 0.0 && self.pretrain_lr.is_finite()) {
            return bad(format!("pretraining learning rate must be positive, got {}", self.pretrain_lr));
        }
        if !(self.slope.is_finite() && self.slope >= 0.0) {
            return bad(format!("activation slope must be non-negative, got {}", self.slope));
        }
        Ok(())
    }

    /// Layer widths from the input dimension to the latent dimension.
    pub fn shape(&self, input_dim: usize) -> Vec<usize> {
        let mut s = vec![input_dim];
        s.extend(std::iter::repeat_n(self.hidden_size, self.hidden_layers));
        s.push(self.latent_size);
        s
    }

    fn network_options(&self, constrained: bool) -> NetworkOptions {
        NetworkOptions {
            constrained,
            use_bias: self.use_bias,
            slope: self.slope,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    /// Batch loss at the parameters before the update.
    pub loss: f64,
    /// Layer Frobenius norms after the update.
    pub layer_norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub objective: Objective,
    pub steps: Vec<StepRecord>,
    /// Mean reconstruction loss per pretraining epoch (empty when not pretrained).
    pub pretrain_losses: Vec<f64>,
    pub network: EncoderNetwork,
    pub center: Center,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Mean batch loss for each epoch.
    pub fn epoch_losses(&self) -> Vec<f64> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for r in &self.steps {
            if out.len() <= r.epoch {
                out.resize(r.epoch + 1, (0.0, 0));
            }
            out[r.epoch].0 += r.loss;
            out[r.epoch].1 += 1;
        }
        out.into_iter().map(|(s, k)| s / k.max(1) as f64).collect()
    }

    /// Columns `step,epoch,loss,norm_0,...,norm_{L-1}`.
    pub fn to_csv(&self) -> String {
        let layers = self.network.num_layers();
        let mut s = String::from("step,epoch,loss");
        for l in 0..layers {
            let _ = write!(s, ",norm_{l}");
        }
        s.push('\n');
        for r in &self.steps {
            let _ = write!(s, "{},{},{}", r.step, r.epoch, r.loss);
            for n in &r.layer_norms {
                let _ = write!(s, ",{n}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainResult {
    pub autoencoder: AutoencoderNetwork,
    pub epoch_losses: Vec<f64>,
}

fn check_finite(loss: f64, step: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(SvddError::Divergence { step })
    }
}

fn sgd_update(net: &EncoderNetwork, grad: &GradientSet, lr: f64) -> Result<EncoderNetwork> {
    if !grad.matches(net) {
        return Err(SvddError::DimensionMismatch("gradient shapes do not match the network".into()));
    }
    let mut out = net.clone();
    for (w, g) in out.weights_mut().iter_mut().zip(&grad.weights) {
        w.scaled_add(-lr, g);
    }
    if let (Some(bs), Some(gs)) = (out.biases_mut(), &grad.biases) {
        for (b, g) in bs.iter_mut().zip(gs) {
            b.scaled_add(-lr, g);
        }
    }
    Ok(out)
}

/// One gradient step `W <- W - lr * grad`, followed when `constrained` by
/// `W <- W / ||W||_F` for every weight matrix. Biases are never projected.
pub fn pgd_step(net: &EncoderNetwork, grad: &GradientSet, lr: f64, constrained: bool) -> Result<EncoderNetwork> {
    let mut out = sgd_update(net, grad, lr)?;
    if constrained {
        for (layer, w) in out.weights_mut().iter_mut().enumerate() {
            let norm = frobenius_norm(w);
            if norm == 0.0 || !norm.is_finite() {
                return Err(SvddError::ProjectionUndefined { layer });
            }
            *w /= norm;
        }
    }
    out.set_constrained(constrained);
    Ok(out)
}

/// Autoencoder pretraining by plain gradient descent on the reconstruction MSE.
pub fn pretrain_autoencoder(ds: &EmbeddingDataset, cfg: &TrainConfig) -> Result<PretrainResult> {
    if cfg.pretrain_epochs == 0 {
        return Err(SvddError::InvalidConfig("pretraining needs at least one epoch".into()));
    }
    let mut ae = AutoencoderNetwork::init(
        &cfg.shape(ds.dim()),
        derive_seed(cfg.seed, STREAM_AUTOENCODER),
        cfg.network_options(false),
    )?;
    let ones = vec![NORMAL; ds.len()];
    let mut epoch_losses = Vec::with_capacity(cfg.pretrain_epochs);
    let mut step = 0;
    for epoch in 0..cfg.pretrain_epochs {
        let batches = stratified_label_batches(
            &ones,
            cfg.batch_size,
            derive_seed(cfg.seed, STREAM_PRETRAIN_BATCHES + epoch as u64),
        )?;
        let mut total = 0.0;
        for idx in &batches {
            let x = ds.vectors().select(ndarray::Axis(0), idx);
            let (loss, ge, gd) = ae.loss_and_grad(x.view())?;
            check_finite(loss, step)?;
            total += loss;
            ae = AutoencoderNetwork::new(
                sgd_update(&ae.encoder, &ge, cfg.pretrain_lr)?,
                sgd_update(&ae.decoder, &gd, cfg.pretrain_lr)?,
            )?;
            step += 1;
        }
        epoch_losses.push(total / batches.len() as f64);
    }
    log::debug!("pretraining losses per epoch: {epoch_losses:?}");
    Ok(PretrainResult {
        autoencoder: ae,
        epoch_losses,
    })
}

/// Plain mean of the encoder outputs over `ds`, held fixed afterwards.
pub fn fixed_center_from_pretrain(ae: &AutoencoderNetwork, ds: &EmbeddingDataset) -> Result<Center> {
    let z = ae.encoder.forward(ds.vectors())?;
    Ok(Center::fixed(plain_center(z.view())?.vector))
}

/// Loss and parameter gradient of `objective` on one batch.
///
/// `center` is used only by `oc_fixed_center`; `labels` only by `ai_svdd`
/// (the other objectives treat every row as normal).
pub fn batch_loss_and_grad(
    net: &EncoderNetwork,
    objective: Objective,
    x: ArrayView2<'_, f64>,
    labels: &[i8],
    center: Option<&Center>,
    lambda: f64,
) -> Result<(f64, GradientSet)> {
    let z = net.forward(x)?;
    let ones;
    let labels = if objective.uses_labels() {
        labels
    } else {
        ones = vec![NORMAL; z.nrows()];
        &ones
    };
    let (mut loss, upstream): (f64, Array2<f64>) = match objective {
        Objective::OcFixedCenter => {
            let c = center.ok_or_else(|| SvddError::InvalidConfig("oc_fixed_center needs a center".into()))?;
            let lv = oc_loss(z.view(), c, None, 0.0)?;
            (lv.data_term, oc_loss_grad(z.view(), c)?)
        }
        Objective::OcJoint | Objective::AiSvdd | Objective::OcJointRegularized => bc_loss_and_grad(z.view(), labels)?,
    };
    let mut grad = net.backward(x, upstream.view())?;
    if objective.uses_lambda() && lambda > 0.0 {
        loss += 0.5 * lambda * net.weight_sq_norm();
        grad.add_weight_decay(net, lambda);
    }
    Ok((loss, grad))
}

fn initial_network(ds: &EmbeddingDataset, cfg: &TrainConfig) -> Result<(EncoderNetwork, Option<Center>, Vec<f64>)> {
    match cfg.objective {
        Objective::OcFixedCenter => {
            let pre = pretrain_autoencoder(ds, cfg)?;
            let c = fixed_center_from_pretrain(&pre.autoencoder, ds)?;
            Ok((pre.autoencoder.encoder, Some(c), pre.epoch_losses))
        }
        obj => {
            let net = init_network_with(
                &cfg.shape(ds.dim()),
                derive_seed(cfg.seed, STREAM_INIT),
                cfg.network_options(obj.is_constrained()),
            )?;
            Ok((net, None, Vec::new()))
        }
    }
}

/// Full training pipeline for `cfg.objective`.
pub fn train(ds: &EmbeddingDataset, cfg: &TrainConfig) -> Result<TrainTrace> {
    cfg.validate()?;
    let (net, center, pretrain_losses) = initial_network(ds, cfg)?;
    train_from(ds, cfg, net, center, pretrain_losses)
}

/// Training from a given initial network; `center` is required for `oc_fixed_center`.
pub fn train_from(
    ds: &EmbeddingDataset,
    cfg: &TrainConfig,
    mut net: EncoderNetwork,
    center: Option<Center>,
    pretrain_losses: Vec<f64>,
) -> Result<TrainTrace> {
    cfg.validate()?;
    if net.input_dim() != ds.dim() {
        return Err(SvddError::DimensionMismatch(format!(
            "network input dimension {} but data dimension {}",
            net.input_dim(),
            ds.dim()
        )));
    }
    let objective = cfg.objective;
    let labels: Vec<i8> = if objective.uses_labels() {
        if ds.label_sum() <= 0 {
            return Err(SvddError::DegenerateCenter(ds.label_sum()));
        }
        ds.labels().to_vec()
    } else {
        vec![NORMAL; ds.len()]
    };
    if objective == Objective::OcFixedCenter && center.is_none() {
        return Err(SvddError::InvalidConfig("oc_fixed_center needs a fixed center".into()));
    }
    let constrained = objective.is_constrained();
    let mut steps = Vec::new();
    for epoch in 0..cfg.epochs {
        let batches = stratified_label_batches(
            &labels,
            cfg.batch_size,
            derive_seed(cfg.seed, STREAM_BATCHES + epoch as u64),
        )?;
        for idx in &batches {
            let x = ds.vectors().select(ndarray::Axis(0), idx);
            let yb: Vec<i8> = idx.iter().map(|&i| labels[i]).collect();
            let (loss, grad) = batch_loss_and_grad(&net, objective, x.view(), &yb, center.as_ref(), cfg.lambda)?;
            let step = steps.len();
            check_finite(loss, step)?;
            net = pgd_step(&net, &grad, cfg.learning_rate, constrained)?;
            let layer_norms = net.layer_norms();
            debug_assert!(!constrained || layer_norms.iter().all(|n| (n - 1.0).abs() <= 1e-6));
            steps.push(StepRecord {
                step,
                epoch,
                loss,
                layer_norms,
            });
        }
        if let Some(last) = steps.last() {
            log::debug!("{objective} epoch {epoch}: last batch loss {}", last.loss);
        }
    }
    let z = net.forward(ds.vectors())?;
    let center = match objective {
        Objective::OcFixedCenter => center.expect("checked above"),
        Objective::AiSvdd => signed_center(z.view(), &labels)?,
        Objective::OcJoint | Objective::OcJointRegularized => plain_center(z.view())?,
    };
    Ok(TrainTrace {
        objective,
        steps,
        pretrain_losses,
        network: net,
        center,
    })
}

/// Scores `test` by distance to `c` in the latent space of `net`.
pub fn infer(net: &EncoderNetwork, c: &Center, test: &EmbeddingDataset) -> Result<ScoreReport> {
    let z = net.forward(test.vectors())?;
    let scores = score(z.view(), c)?;
    ScoreReport::new(test.ids().to_vec(), test.labels().to_vec(), scores)
}
