use rand::seq::index;
use serde::Serialize;

use super::net::{DenoiserNet, NetConfig};
use super::noise::{fill_normal, stream, Purpose};
use super::schedule::NoiseSchedule;
use super::train::{loss, loss_and_grad, BatchKey};
use crate::error::{Error, Result};

pub const GRADCHECK_STEP: f64 = 1e-4;
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;
/// Denominator floor, so parameters with vanishing gradient are judged on
/// absolute error.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub params: usize,
    pub seed: u64,
    pub step: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            params: 256,
            seed: 7,
            step: GRADCHECK_STEP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < GRADCHECK_TOLERANCE
    }
}

/// The tiny fixture net and a 4-item batch of seeded grids in [−1, 1].
pub fn fixture(config: NetConfig, seed: u64) -> Result<(DenoiserNet, Vec<f64>)> {
    let net = DenoiserNet::new(config, seed)?;
    let mut batch = vec![0.0; 4 * net.config().cells()];
    fill_normal(&mut stream(seed, Purpose::GradCheck, 1, 0, 0), &mut batch);
    for v in &mut batch {
        *v = v.tanh();
    }
    Ok((net, batch))
}

/// Max relative error between backprop and central differences.
pub fn grad_check(
    net: &DenoiserNet,
    batch: &[f64],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    grad_check_with_fault(net, batch, opts, &|_| {})
}

/// As [`grad_check`], with `fault` applied to the analytic gradient first.
pub fn grad_check_with_fault(
    net: &DenoiserNet,
    batch: &[f64],
    opts: &GradCheckOptions,
    fault: &dyn Fn(&mut [f64]),
) -> Result<GradCheckReport> {
    let total = net.param_count();
    if opts.params == 0 || total == 0 {
        return Err(Error::Config("gradient check needs at least one parameter".into()));
    }
    let schedule = NoiseSchedule::with_timesteps(100)?;
    let key = BatchKey {
        seed: opts.seed,
        epoch: 0,
        batch: 0,
    };
    let cells = net.config().cells();
    let mut grads = vec![0.0; total];
    loss_and_grad(net, batch, &schedule, key, &mut grads)?;
    fault(&mut grads);

    let mut rng = stream(opts.seed, Purpose::GradCheck, 2, 0, 0);
    let mut chosen = index::sample(&mut rng, total, opts.params.min(total)).into_vec();
    chosen.sort_unstable();

    let mut probe = net.clone();
    let mut worst = (0.0f64, 0usize, 0.0, 0.0);
    for &i in &chosen {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + opts.step;
        let up = loss(&probe, batch, cells, &schedule, key)?;
        probe.params_mut()[i] = orig - opts.step;
        let down = loss(&probe, batch, cells, &schedule, key)?;
        probe.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * opts.step);
        let analytic = grads[i];
        let rel = (analytic - numeric).abs()
            / analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
        if rel > worst.0 || worst.0.is_nan() || rel.is_nan() {
            worst = (rel, i, analytic, numeric);
        }
    }
    let name = net
        .param_specs()
        .iter()
        .find(|s| s.range().contains(&worst.1))
        .map(|s| format!("{}[{}]", s.name, worst.1 - s.offset))
        .unwrap_or_default();
    Ok(GradCheckReport {
        checked: chosen.len(),
        max_relative_error: if worst.0.is_nan() { f64::INFINITY } else { worst.0 },
        worst_parameter: name,
        analytic: worst.2,
        numeric: worst.3,
    })
}
