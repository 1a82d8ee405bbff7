//! Loss, metrics, Adam and the mini-batch training loop.

mod adam;
mod metrics;

pub use adam::{adam_step, AdamState};
pub use metrics::{loss_half_mse, loss_half_mse_grad, metrics_compute, MetricsReport};

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Model, NnError};
use crate::tensor::{Rng, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("{targets} targets but {predictions} predictions")]
    LengthMismatch { targets: usize, predictions: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 512,
            max_epochs: 50,
            patience: 5,
            validation_fraction: 0.1,
            seed: 42,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning rate {} must be finite and non-negative", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation fraction {} outside [0, 1)", self.validation_fraction));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad(format!("betas ({}, {}) must lie in (0, 1)", self.beta1, self.beta2));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        Ok(())
    }
}

/// Per-epoch losses. `val_loss` is measured on the monitoring set: the
/// validation split when there is one, otherwise the training rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainHistory {
    /// Columns `epoch, train_loss, val_loss`, epochs counted from 1.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "train_loss", "val_loss"])?;
        for (e, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            out.write_record([(e + 1).to_string(), format!("{t:.6}"), format!("{v:.6}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    waited: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            waited: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.waited = 0;
            return StopDecision::Improved;
        }
        self.waited += 1;
        if self.waited >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }
}

/// Rows and targets of one training or evaluation set.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub x: &'a Tensor,
    pub y: &'a [f64],
}

impl<'a> Samples<'a> {
    pub fn new(x: &'a Tensor, y: &'a [f64]) -> Result<Self, TrainError> {
        let rows = match x.shape() {
            &[r, _] => r,
            s => return Err(TrainError::Config(format!("features must be [rows x F], got {s:?}"))),
        };
        if rows != y.len() {
            return Err(TrainError::LengthMismatch {
                targets: y.len(),
                predictions: rows,
            });
        }
        Ok(Self { x, y })
    }

    fn rows(&self) -> usize {
        self.y.len()
    }
}

const PREDICT_CHUNK: usize = 4096;
const SPLIT_STREAM: u64 = 1;
const BATCH_STREAM: u64 = 2;

/// Trains with a validation slice carved from `data`: the last
/// `validation_fraction` of a seeded shuffle.
pub fn train_model(model: Model, data: Samples<'_>, config: &TrainConfig) -> Result<(Model, TrainHistory), TrainError> {
    config.validate()?;
    let n = data.rows();
    if n == 0 {
        return Err(TrainError::Empty("training set"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::derive(config.seed, &[SPLIT_STREAM]).shuffle(&mut order);
    let mut n_val = (n as f64 * config.validation_fraction).round() as usize;
    if config.validation_fraction > 0.0 && n_val == 0 && n >= 2 {
        n_val = 1;
    }
    n_val = n_val.min(n - 1);
    if n_val == 0 {
        return fit(model, data, None, config);
    }
    let (tr, va) = order.split_at(n - n_val);
    let (tx, ty) = subset(data, tr)?;
    let (vx, vy) = subset(data, va)?;
    fit(model, Samples { x: &tx, y: &ty }, Some(Samples { x: &vx, y: &vy }), config)
}

/// Trains against an explicit validation set (or the training rows when `None`).
pub fn train_model_with_validation(
    model: Model,
    train: Samples<'_>,
    validation: Option<Samples<'_>>,
    config: &TrainConfig,
) -> Result<(Model, TrainHistory), TrainError> {
    config.validate()?;
    if train.rows() == 0 {
        return Err(TrainError::Empty("training set"));
    }
    if validation.is_some_and(|v| v.rows() == 0) {
        return Err(TrainError::Empty("validation set"));
    }
    fit(model, train, validation, config)
}

fn subset(data: Samples<'_>, rows: &[usize]) -> Result<(Tensor, Vec<f64>), TrainError> {
    Ok((data.x.select_rows(rows)?, rows.iter().map(|&r| data.y[r]).collect()))
}

/// Mean half-squared error of the model on `s`.
pub fn evaluate_loss(model: &Model, s: Samples<'_>) -> Result<f64, TrainError> {
    let p = model.predict(s.x, PREDICT_CHUNK)?;
    loss_half_mse(s.y, &p)
}

fn non_finite(e: NnError, epoch: usize, batch: usize) -> TrainError {
    match e {
        NnError::Tensor(TensorError::NonFinite { .. }) => TrainError::NonFinite { epoch, batch },
        other => other.into(),
    }
}

fn fit(mut model: Model, train: Samples<'_>, val: Option<Samples<'_>>, config: &TrainConfig) -> Result<(Model, TrainHistory), TrainError> {
    let mut history = TrainHistory::default();
    if config.max_epochs == 0 {
        return Ok((model, history));
    }
    let monitor = val.unwrap_or(train);
    let n = train.rows();
    let mut rng = Rng::derive(config.seed, &[BATCH_STREAM]);
    let mut state = AdamState::new(&model.params());
    let mut stopper = EarlyStopper::new(config.patience);
    let mut best: Vec<Tensor> = model.params().into_iter().cloned().collect();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.max_epochs {
        rng.shuffle(&mut order);
        let mut weighted = 0.0;
        for (batch, rows) in order.chunks(config.batch_size).enumerate() {
            let x = train.x.select_rows(rows)?;
            let y: Vec<f64> = rows.iter().map(|&r| train.y[r]).collect();
            let (out, cache) = model.forward(&x).map_err(|e| non_finite(e, epoch, batch))?;
            let loss = loss_half_mse(&y, out.data()).map_err(|_| TrainError::NonFinite { epoch, batch })?;
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch });
            }
            weighted += loss * rows.len() as f64;
            let dy = Tensor::new(out.shape(), loss_half_mse_grad(&y, out.data())?)?;
            let (_, grads) = model.backward(&cache, &dy).map_err(|e| non_finite(e, epoch, batch))?;
            adam_step(&mut model.params_mut(), &grads, &mut state, config)?;
        }
        let monitored = evaluate_loss(&model, monitor).map_err(|e| match e {
            TrainError::Nn(inner) => non_finite(inner, epoch, usize::MAX),
            TrainError::Config(_) => TrainError::NonFinite { epoch, batch: usize::MAX },
            other => other,
        })?;
        history.train_loss.push(weighted / n as f64);
        history.val_loss.push(monitored);
        match stopper.observe(epoch, monitored) {
            StopDecision::Improved => {
                best = model.params().into_iter().cloned().collect();
            }
            StopDecision::Continue => {}
            StopDecision::Stop => {
                history.stopped_early = epoch + 1 < config.max_epochs;
                break;
            }
        }
    }
    history.best_epoch = stopper.best_epoch();
    for (dst, src) in model.params_mut().into_iter().zip(best) {
        *dst = src;
    }
    Ok((model, history))
}
