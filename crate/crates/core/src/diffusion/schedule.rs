use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear beta schedule and its cumulative products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    #[serde(skip)]
    betas: Vec<f64>,
    #[serde(skip)]
    alphas_cumprod: Vec<f64>,
}

pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;
pub const DEFAULT_TIMESTEPS: usize = 1000;

impl NoiseSchedule {
    pub fn linear(timesteps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if timesteps < 2 {
            return Err(Error::Config("schedule needs at least 2 timesteps".into()));
        }
        if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::Config(format!(
                "betas must satisfy 0 < start <= end < 1, got {beta_start}..{beta_end}"
            )));
        }
        let betas: Vec<f64> = (0..timesteps)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (timesteps - 1) as f64)
            .collect();
        let mut alphas_cumprod = Vec::with_capacity(timesteps);
        let mut acc = 1.0;
        for b in &betas {
            acc *= 1.0 - b;
            alphas_cumprod.push(acc);
        }
        Ok(NoiseSchedule {
            timesteps,
            beta_start,
            beta_end,
            betas,
            alphas_cumprod,
        })
    }

    /// Default endpoints, rescaled by `1000 / T` so shorter chains still end
    /// near pure noise.
    pub fn with_timesteps(timesteps: usize) -> Result<Self> {
        let scale = DEFAULT_TIMESTEPS as f64 / timesteps.max(1) as f64;
        Self::linear(
            timesteps,
            DEFAULT_BETA_START * scale,
            (DEFAULT_BETA_END * scale).min(0.999),
        )
    }

    /// Rebuild the derived tables after deserialization.
    pub fn rebuild(&self) -> Result<Self> {
        Self::linear(self.timesteps, self.beta_start, self.beta_end)
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.timesteps {
            return Err(Error::Numeric(format!(
                "timestep {t} outside 1..={}",
                self.timesteps
            )));
        }
        Ok(t - 1)
    }

    /// `beta_t` for `1 <= t <= T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.betas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alphas_cumprod[t - 1]
    }

    /// `sqrt(ᾱ_t)·x0 + sqrt(1 − ᾱ_t)·eps`.
    pub fn forward_noise(&self, x0: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>> {
        let i = self.index(t)?;
        if x0.len() != eps.len() {
            return Err(Error::Numeric("noise and signal shapes differ".into()));
        }
        let ab = self.alphas_cumprod[i];
        let (s, n) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x0.iter().zip(eps).map(|(x, e)| s * x + n * e).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::noise::{fill_normal, stream, Purpose};

    #[test]
    fn schedule_invariants() {
        for t in [100, 1000] {
            let s = NoiseSchedule::with_timesteps(t).unwrap();
            for i in 1..=t {
                assert!(s.beta(i) > 0.0 && s.beta(i) < 1.0);
                if i > 1 {
                    assert!(s.beta(i) >= s.beta(i - 1));
                    assert!(s.alpha_bar(i) < s.alpha_bar(i - 1));
                }
            }
            assert!(s.alpha_bar(t) < 0.05, "T={t}: {}", s.alpha_bar(t));
        }
    }

    #[test]
    fn forward_noise_endpoints() {
        let s = NoiseSchedule::with_timesteps(100).unwrap();
        let eps = vec![0.3, -1.2, 2.0];
        let zero = s.forward_noise(&[0.0; 3], 50, &eps).unwrap();
        let k = (1.0 - s.alpha_bar(50)).sqrt();
        for (z, e) in zero.iter().zip(&eps) {
            assert_eq!(*z, k * e);
        }
        assert!(s.forward_noise(&[0.0; 3], 0, &eps).is_err());
        assert!(s.forward_noise(&[0.0; 3], 101, &eps).is_err());
        // the limit ᾱ → 1 is the identity on x0
        let tiny = NoiseSchedule::linear(2, 1e-300, 1e-300).unwrap();
        assert_eq!(tiny.forward_noise(&[0.7, -0.2], 1, &[5.0, 5.0]).unwrap(), [0.7, -0.2]);
    }

    #[test]
    fn forward_variance_approaches_one() {
        let s = NoiseSchedule::with_timesteps(1000).unwrap();
        let mut rng = stream(11, Purpose::GradCheck, 0, 0, 0);
        let mut eps = vec![0.0; 10_000];
        fill_normal(&mut rng, &mut eps);
        let x0 = vec![0.8; 10_000];
        let xt = s.forward_noise(&x0, 1000, &eps).unwrap();
        let mean = xt.iter().sum::<f64>() / xt.len() as f64;
        let var = xt.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / xt.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn forward_noise_is_deterministic() {
        let s = NoiseSchedule::with_timesteps(100).unwrap();
        let draw = || {
            let mut e = vec![0.0; 110];
            fill_normal(&mut stream(5, Purpose::TrainItem, 1, 2, 3), &mut e);
            let x0: Vec<f64> = (0..110).map(|i| (i as f64 / 55.0) - 1.0).collect();
            s.forward_noise(&x0, 50, &e).unwrap()
        };
        let (a, b) = (draw(), draw());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
