use rayon::prelude::*;

use super::checkpoint::Checkpoint;
use super::noise::{fill_normal, stream, Purpose};
use super::schedule::NoiseSchedule;
use super::train::NoisePredictor;
use crate::codec::{Grid, GRID_RANGE};
use crate::error::{Error, Result};

/// Chains denoised together per predictor call.
pub const SAMPLE_CHUNK: usize = 128;

#[derive(Clone, Copy, Debug)]
pub struct SampleOptions {
    pub seed: u64,
    /// Clamp the final grids to the grid range.
    pub clamp: bool,
}

/// Draw `n` grids from a checkpointed model.
pub fn sample(ckpt: &Checkpoint, n: usize, opts: SampleOptions) -> Result<Vec<Grid>> {
    let net = ckpt.net()?;
    let cfg = ckpt.header.net.clone();
    sample_with(&net, &ckpt.header.schedule, cfg.grid_height, cfg.grid_width, n, opts)
}

/// Ancestral sampling:
/// `x_{t-1} = (x_t − β_t/√(1−ᾱ_t)·ε̂) / √α_t + √β_t·z`, with `z = 0` at the last step.
///
/// Chain `i` draws its noise from its own keyed stream, so results do not
/// depend on chunking or thread count.
pub fn sample_with<P: NoisePredictor + Sync>(
    predictor: &P,
    schedule: &NoiseSchedule,
    height: usize,
    width: usize,
    n: usize,
    opts: SampleOptions,
) -> Result<Vec<Grid>> {
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let cells = height * width;
    let chunks: Vec<(usize, usize)> = (0..n)
        .step_by(SAMPLE_CHUNK)
        .map(|s| (s, (s + SAMPLE_CHUNK).min(n)))
        .collect();
    let parts: Vec<Result<Vec<f64>>> = chunks
        .par_iter()
        .map(|&(lo, hi)| run_chunk(predictor, schedule, cells, lo, hi, opts.seed))
        .collect();
    let mut grids = Vec::with_capacity(n);
    for part in parts {
        for g in part?.chunks(cells) {
            let mut values = g.to_vec();
            if opts.clamp {
                for v in &mut values {
                    *v = v.clamp(GRID_RANGE.0, GRID_RANGE.1);
                }
            }
            grids.push(Grid::from_values(height, width, values)?);
        }
    }
    Ok(grids)
}

fn run_chunk<P: NoisePredictor>(
    predictor: &P,
    schedule: &NoiseSchedule,
    cells: usize,
    lo: usize,
    hi: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let m = hi - lo;
    let mut rngs: Vec<_> = (lo..hi)
        .map(|i| stream(seed, Purpose::Sample, i as u64, 0, 0))
        .collect();
    let mut x = vec![0.0; m * cells];
    for (k, rng) in rngs.iter_mut().enumerate() {
        fill_normal(rng, &mut x[k * cells..(k + 1) * cells]);
    }
    let mut z = vec![0.0; cells];
    for t in (1..=schedule.timesteps).rev() {
        let eps = predictor.predict_noise(&x, &vec![t; m]);
        let (beta, alpha, ab) = (schedule.beta(t), schedule.alpha(t), schedule.alpha_bar(t));
        let coef = beta / (1.0 - ab).sqrt();
        let inv = 1.0 / alpha.sqrt();
        let sigma = beta.sqrt();
        for (k, rng) in rngs.iter_mut().enumerate() {
            let xs = &mut x[k * cells..(k + 1) * cells];
            let es = &eps[k * cells..(k + 1) * cells];
            if t > 1 {
                fill_normal(rng, &mut z);
            }
            for j in 0..cells {
                let mean = (xs[j] - coef * es[j]) * inv;
                xs[j] = if t > 1 { mean + sigma * z[j] } else { mean };
            }
            if xs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite sample in chain {} at step {t}",
                    lo + k
                )));
            }
        }
    }
    Ok(x)
}
