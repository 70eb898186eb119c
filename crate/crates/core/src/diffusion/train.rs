use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointHeader};
use super::net::{DenoiserNet, NetConfig, DEFAULT_BASE_CHANNELS};
use super::noise::{fill_normal, stream, Purpose};
use super::optim::AdamW;
use super::schedule::{NoiseSchedule, DEFAULT_TIMESTEPS};
use crate::codec::{vector_to_grid, CodecSpec};
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::table::Table;

/// Stand-ins for the unstated library defaults; echoed in every run log.
pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.01;
pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub sample_every: usize,
    pub sample_count: usize,
    pub timesteps: usize,
    pub base_channels: usize,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            seed,
            sample_every: 5,
            sample_count: 5000,
            timesteps: DEFAULT_TIMESTEPS,
            base_channels: DEFAULT_BASE_CHANNELS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.sample_every == 0
            || self.sample_count == 0
            || self.timesteps < 2
            || self.base_channels == 0
        {
            return Err(Error::Config(
                "batch size, sample cadence, sample count, timesteps and channels must be positive"
                    .into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || self.weight_decay < 0.0 {
            return Err(Error::Config(
                "learning rate must be positive and weight decay non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn net_config(&self, height: usize, width: usize) -> NetConfig {
        NetConfig::new(height, width, self.base_channels)
    }
}

/// Anything that maps noisy grids and timesteps to a noise estimate.
pub trait NoisePredictor {
    fn predict_noise(&self, x: &[f64], t: &[usize]) -> Vec<f64>;
}

impl NoisePredictor for DenoiserNet {
    fn predict_noise(&self, x: &[f64], t: &[usize]) -> Vec<f64> {
        self.predict(x, t)
    }
}

/// Which slice of the keyed noise stream a batch draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchKey {
    pub seed: u64,
    pub epoch: u64,
    pub batch: u64,
}

/// Timesteps, noise and noised inputs for one batch.
pub struct NoiseDraw {
    pub t: Vec<usize>,
    pub eps: Vec<f64>,
    pub xt: Vec<f64>,
}

pub fn draw_noise(
    batch: &[f64],
    cells: usize,
    schedule: &NoiseSchedule,
    key: BatchKey,
) -> Result<NoiseDraw> {
    let n = batch.len() / cells;
    let mut t = Vec::with_capacity(n);
    let mut eps = vec![0.0; batch.len()];
    let mut xt = Vec::with_capacity(batch.len());
    for item in 0..n {
        let mut rng = stream(key.seed, Purpose::TrainItem, key.epoch, key.batch, item as u64);
        let step = rng.random_range(1..=schedule.timesteps);
        let e = &mut eps[item * cells..(item + 1) * cells];
        fill_normal(&mut rng, e);
        xt.extend(schedule.forward_noise(&batch[item * cells..(item + 1) * cells], step, e)?);
        t.push(step);
    }
    Ok(NoiseDraw { t, eps, xt })
}

fn mse(pred: &[f64], eps: &[f64]) -> f64 {
    pred.iter()
        .zip(eps)
        .map(|(p, e)| (p - e) * (p - e))
        .sum::<f64>()
        / eps.len() as f64
}

/// Epsilon-prediction loss: mean over the batch of the per-item mean squared error.
///
/// Every item has the same number of cells, so the mean of per-item means is
/// the mean over all cells.
pub fn loss<P: NoisePredictor>(
    predictor: &P,
    batch: &[f64],
    cells: usize,
    schedule: &NoiseSchedule,
    key: BatchKey,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Numeric("loss of an empty batch".into()));
    }
    let draw = draw_noise(batch, cells, schedule, key)?;
    let pred = predictor.predict_noise(&draw.xt, &draw.t);
    let l = mse(&pred, &draw.eps);
    if !l.is_finite() {
        return Err(Error::Numeric("non-finite loss: activations overflowed".into()));
    }
    Ok(l)
}

/// Loss plus its gradient, accumulated into `grads`.
pub fn loss_and_grad(
    net: &DenoiserNet,
    batch: &[f64],
    schedule: &NoiseSchedule,
    key: BatchKey,
    grads: &mut [f64],
) -> Result<f64> {
    let cells = net.config().cells();
    if batch.is_empty() {
        return Err(Error::Numeric("loss of an empty batch".into()));
    }
    let draw = draw_noise(batch, cells, schedule, key)?;
    let fwd = net.forward(&draw.xt, &draw.t);
    let l = mse(&fwd.output, &draw.eps);
    if !l.is_finite() {
        return Err(Error::Numeric("non-finite loss: activations overflowed".into()));
    }
    let scale = 2.0 / draw.eps.len() as f64;
    let d: Vec<f64> = fwd
        .output
        .iter()
        .zip(&draw.eps)
        .map(|(p, e)| scale * (p - e))
        .collect();
    net.backward(&fwd, &d, grads);
    Ok(l)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_seconds: f64,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub losses: Vec<EpochLoss>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Diverged {
        epoch: usize,
        batch: usize,
        last_good: Box<Checkpoint>,
        losses: Vec<EpochLoss>,
    },
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Setup(e) => e,
            d @ TrainError::Diverged { .. } => Error::Numeric(d.to_string()),
        }
    }
}

/// Encode every row as a flat `n × cells` grid batch.
pub fn encode_grids(table: &Table, layout: &Layout, spec: &CodecSpec) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(table.len() * layout.height() * layout.width());
    for row in table.rows() {
        let v = spec.encode_row(row)?;
        out.extend(vector_to_grid(&v, layout)?.values);
    }
    Ok(out)
}

/// Fit the denoiser with AdamW on epsilon-prediction MSE.
///
/// `on_checkpoint` fires every `sample_every` epochs and after the last epoch.
pub fn train(
    table: &Table,
    layout: &Layout,
    spec: &CodecSpec,
    cfg: &TrainConfig,
    on_checkpoint: &mut dyn FnMut(&Checkpoint, &[EpochLoss]) -> Result<()>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    layout.validate(spec)?;
    if table.is_empty() {
        return Err(Error::Config("training table is empty".into()).into());
    }
    let data = encode_grids(table, layout, spec)?;
    let net_cfg = cfg.net_config(layout.height(), layout.width());
    let cells = net_cfg.cells();
    let schedule = NoiseSchedule::with_timesteps(cfg.timesteps)?;
    let mut net = DenoiserNet::new(net_cfg, cfg.seed)?;
    let mut opt = AdamW::new(net.param_count(), cfg.learning_rate, cfg.weight_decay);
    let header = CheckpointHeader::new(net.config(), &schedule, cfg, spec, layout, net.param_specs());
    let snapshot = |net: &DenoiserNet, epochs: usize| {
        let mut h = header.clone();
        h.epochs_completed = epochs;
        Checkpoint::new(h, net.params().to_vec())
    };
    let mut last_good = snapshot(&net, 0);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut grads = vec![0.0; net.param_count()];
    let mut order: Vec<usize> = (0..table.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size * cells);
    let start = Instant::now();

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream(cfg.seed, Purpose::Shuffle, epoch as u64, 0, 0));
        let mut total = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            for &i in idx {
                batch.extend_from_slice(&data[i * cells..(i + 1) * cells]);
            }
            grads.fill(0.0);
            let key = BatchKey {
                seed: cfg.seed,
                epoch: epoch as u64,
                batch: bi as u64,
            };
            let l = match loss_and_grad(&net, &batch, &schedule, key, &mut grads) {
                Ok(l) if grads.iter().all(|g| g.is_finite()) => l,
                _ => {
                    return Err(TrainError::Diverged {
                        epoch,
                        batch: bi,
                        last_good: Box::new(last_good),
                        losses,
                    })
                }
            };
            opt.step(net.params_mut(), &grads);
            total += l * idx.len() as f64;
        }
        let entry = EpochLoss {
            epoch: epoch + 1,
            mean_loss: total / table.len() as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        log::info!("epoch {} mean loss {:.6}", entry.epoch, entry.mean_loss);
        losses.push(entry);
        if (epoch + 1) % cfg.sample_every == 0 || epoch + 1 == cfg.epochs {
            last_good = snapshot(&net, epoch + 1);
            on_checkpoint(&last_good, &losses)?;
        }
    }
    if cfg.epochs == 0 {
        on_checkpoint(&last_good, &losses)?;
    }
    Ok(TrainOutcome {
        checkpoint: last_good,
        losses,
    })
}

pub fn loss_log_csv(losses: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,mean_loss,wall_seconds\n");
    for l in losses {
        out.push_str(&format!("{},{},{:.3}\n", l.epoch, l.mean_loss, l.wall_seconds));
    }
    out
}
