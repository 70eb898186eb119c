//! Small convolutional U-Net noise predictor.
//!
//! ```text
//! grid H×W ─pad→ P×P ─b0→ C@P ──────────────────────────────┐ skip
//!                       └─b1 (stride 2)→ 2C@P/2 ──────────┐ │ skip
//!                                 └─b2 (stride 2)→ 2C@P/4  │ │
//!                                              └─b3→ 2C@P/4│ │
//!                          up ×2, concat ←─────────────────┘ │
//!                                 └─b4→ 2C@P/2               │
//!                          up ×2, concat ←───────────────────┘
//!                                 └─b5→ C@P ─out→ 1@P ─crop→ H×W
//! ```
//!
//! Every `b*` block is conv3×3 → + timestep projection → group norm → SiLU.
//! The timestep enters as a sinusoidal embedding passed through a one-layer
//! MLP.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::noise::{stream, Purpose};
use super::tensor::{
    conv3x3, conv3x3_backward, group_norm, group_norm_backward, silu, silu_grad, upsample2,
    upsample2_backward, Act, GroupNormCache,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Silu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Silu => silu(x),
            Activation::Identity => x,
        }
    }

    fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Silu => silu_grad(x),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub grid_height: usize,
    pub grid_width: usize,
    /// Zero-padded working resolution; both must be multiples of 4.
    pub padded_height: usize,
    pub padded_width: usize,
    pub base_channels: usize,
    pub time_dim: usize,
    pub groups: usize,
    pub activation: Activation,
    pub norm: bool,
}

pub const DEFAULT_BASE_CHANNELS: usize = 32;
pub const DEFAULT_GROUPS: usize = 4;

impl NetConfig {
    pub fn new(grid_height: usize, grid_width: usize, base_channels: usize) -> Self {
        NetConfig {
            grid_height,
            grid_width,
            padded_height: 16.max(grid_height.next_multiple_of(4)),
            padded_width: 16.max(grid_width.next_multiple_of(4)),
            base_channels,
            time_dim: 4 * base_channels,
            groups: DEFAULT_GROUPS.min(base_channels),
            activation: Activation::Silu,
            norm: true,
        }
    }

    /// The gradient-check fixture: under 5,000 parameters.
    pub fn tiny(grid_height: usize, grid_width: usize) -> Self {
        NetConfig {
            base_channels: 4,
            time_dim: 16,
            groups: 2,
            ..Self::new(grid_height, grid_width, 4)
        }
    }

    /// Tiny net with identity activations and no normalization.
    pub fn tiny_linear(grid_height: usize, grid_width: usize) -> Self {
        NetConfig {
            activation: Activation::Identity,
            norm: false,
            ..Self::tiny(grid_height, grid_width)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.base_channels;
        if c == 0 || self.time_dim < 2 || !self.time_dim.is_multiple_of(2) {
            return Err(Error::Config(
                "base channels must be positive and the time embedding even".into(),
            ));
        }
        if !self.padded_height.is_multiple_of(4)
            || !self.padded_width.is_multiple_of(4)
            || self.padded_height < self.grid_height
            || self.padded_width < self.grid_width
        {
            return Err(Error::Config(format!(
                "padded size {}×{} must be multiples of 4 covering the {}×{} grid",
                self.padded_height, self.padded_width, self.grid_height, self.grid_width
            )));
        }
        if self.norm && (self.groups == 0 || !c.is_multiple_of(self.groups)) {
            return Err(Error::Config(format!(
                "{} groups do not divide {c} channels",
                self.groups
            )));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.grid_height * self.grid_width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Default)]
struct Builder {
    specs: Vec<ParamSpec>,
    total: usize,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.total;
        let spec = ParamSpec {
            name,
            shape,
            offset,
        };
        self.total += spec.len();
        self.specs.push(spec);
        offset
    }
}

#[derive(Clone, Debug)]
struct Block {
    cin: usize,
    cout: usize,
    stride: usize,
    weight: usize,
    bias: usize,
    temb: Option<(usize, usize)>,
    norm: Option<(usize, usize)>,
    activation: Activation,
}

struct BlockCache {
    input: Act,
    gn: Option<GroupNormCache>,
    pre_act: Option<Act>,
}

/// Activations retained by [`DenoiserNet::forward`] for the backward pass.
pub struct Forward {
    /// Predicted noise, `n × cells`, row-major per item.
    pub output: Vec<f64>,
    n: usize,
    emb: Vec<f64>,
    hidden: Vec<f64>,
    temb: Vec<f64>,
    caches: Vec<BlockCache>,
}

#[derive(Clone, Debug)]
pub struct DenoiserNet {
    config: NetConfig,
    specs: Vec<ParamSpec>,
    params: Vec<f64>,
    blocks: Vec<Block>,
    mlp: (usize, usize),
}

const B0: usize = 0;
const B1: usize = 1;
const B2: usize = 2;
const B3: usize = 3;
const B4: usize = 4;
const B5: usize = 5;
const OUT: usize = 6;

impl DenoiserNet {
    /// Build with seeded uniform(±1/sqrt(fan_in)) weights, zero biases and
    /// unit norm gains.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        let mut rng = stream(seed, Purpose::Init, 0, 0, 0);
        for block in net.blocks.clone().iter() {
            let bound = 1.0 / ((block.cin * 9) as f64).sqrt();
            let len = block.cout * block.cin * 9;
            for v in &mut net.params[block.weight..block.weight + len] {
                *v = rng.random_range(-bound..bound);
            }
            if let Some((w, _)) = block.temb {
                let bound = 1.0 / (net.config.time_dim as f64).sqrt();
                for v in &mut net.params[w..w + block.cout * net.config.time_dim] {
                    *v = rng.random_range(-bound..bound);
                }
            }
            if let Some((g, _)) = block.norm {
                net.params[g..g + block.cout].fill(1.0);
            }
        }
        let e = net.config.time_dim;
        let bound = 1.0 / (e as f64).sqrt();
        let w = net.mlp.0;
        for v in &mut net.params[w..w + e * e] {
            *v = rng.random_range(-bound..bound);
        }
        Ok(net)
    }

    /// Same architecture with every parameter zero.
    pub fn zeroed(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let c = config.base_channels;
        let e = config.time_dim;
        let mut b = Builder::default();
        let mlp_w = b.add("time_mlp.weight".into(), vec![e, e]);
        let mlp_b = b.add("time_mlp.bias".into(), vec![e]);
        let plan: [(&str, usize, usize, usize, bool); 7] = [
            ("enc0", 1, c, 1, true),
            ("down1", c, 2 * c, 2, true),
            ("down2", 2 * c, 2 * c, 2, true),
            ("mid", 2 * c, 2 * c, 1, true),
            ("up1", 4 * c, 2 * c, 1, true),
            ("up0", 3 * c, c, 1, true),
            ("out", c, 1, 1, false),
        ];
        let mut blocks = Vec::with_capacity(plan.len());
        for (name, cin, cout, stride, full) in plan {
            let weight = b.add(format!("{name}.conv.weight"), vec![cout, cin, 3, 3]);
            let bias = b.add(format!("{name}.conv.bias"), vec![cout]);
            let temb = full.then(|| {
                (
                    b.add(format!("{name}.temb.weight"), vec![cout, e]),
                    b.add(format!("{name}.temb.bias"), vec![cout]),
                )
            });
            let norm = (full && config.norm).then(|| {
                (
                    b.add(format!("{name}.norm.gamma"), vec![cout]),
                    b.add(format!("{name}.norm.beta"), vec![cout]),
                )
            });
            blocks.push(Block {
                cin,
                cout,
                stride,
                weight,
                bias,
                temb,
                norm,
                activation: if full {
                    config.activation
                } else {
                    Activation::Identity
                },
            });
        }
        Ok(DenoiserNet {
            config,
            params: vec![0.0; b.total],
            specs: b.specs,
            blocks,
            mlp: (mlp_w, mlp_b),
        })
    }

    pub fn from_parts(config: NetConfig, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        if params.len() != net.params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} parameters, architecture needs {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn param_specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn time_embedding(&self, t: &[usize]) -> Vec<f64> {
        let e = self.config.time_dim;
        let half = e / 2;
        let mut out = vec![0.0; t.len() * e];
        for (row, &step) in out.chunks_mut(e).zip(t) {
            for i in 0..half {
                let freq = (-(10_000f64).ln() * i as f64 / half as f64).exp();
                let arg = step as f64 * freq;
                row[i] = arg.sin();
                row[half + i] = arg.cos();
            }
        }
        out
    }

    fn pad(&self, x: &[f64], n: usize) -> Act {
        let cfg = &self.config;
        let (gh, gw) = (cfg.grid_height, cfg.grid_width);
        let (ph, pw) = (cfg.padded_height, cfg.padded_width);
        let mut a = Act::zeros(1, n, ph, pw);
        for b in 0..n {
            for r in 0..gh {
                let src = &x[b * gh * gw + r * gw..][..gw];
                a.data[b * ph * pw + r * pw..][..gw].copy_from_slice(src);
            }
        }
        a
    }

    fn crop(&self, a: &Act) -> Vec<f64> {
        let cfg = &self.config;
        let (gh, gw) = (cfg.grid_height, cfg.grid_width);
        let (ph, pw) = (a.h, a.w);
        let mut out = vec![0.0; a.n * gh * gw];
        for b in 0..a.n {
            for r in 0..gh {
                out[b * gh * gw + r * gw..][..gw]
                    .copy_from_slice(&a.data[b * ph * pw + r * pw..][..gw]);
            }
        }
        out
    }

    fn block_forward(&self, bi: usize, x: Act, temb: &[f64]) -> (Act, BlockCache) {
        let blk = &self.blocks[bi];
        let p = &self.params;
        let wlen = blk.cout * blk.cin * 9;
        let mut z = conv3x3(
            &x,
            &p[blk.weight..blk.weight + wlen],
            &p[blk.bias..blk.bias + blk.cout],
            blk.cout,
            blk.stride,
        );
        if let Some((tw, tb)) = blk.temb {
            let e = self.config.time_dim;
            let hw = z.h * z.w;
            let plane = z.plane();
            for b in 0..z.n {
                let emb = &temb[b * e..(b + 1) * e];
                for co in 0..blk.cout {
                    let wrow = &p[tw + co * e..tw + (co + 1) * e];
                    let shift = p[tb + co] + wrow.iter().zip(emb).map(|(a, b)| a * b).sum::<f64>();
                    for v in &mut z.data[co * plane + b * hw..][..hw] {
                        *v += shift;
                    }
                }
            }
        }
        let (normed, gn) = match blk.norm {
            Some((g, bt)) => {
                let (y, cache) = group_norm(
                    &z,
                    self.config.groups,
                    &p[g..g + blk.cout],
                    &p[bt..bt + blk.cout],
                );
                (y, Some(cache))
            }
            None => (z, None),
        };
        let (out, pre_act) = match blk.activation {
            Activation::Identity => (normed, None),
            act => {
                let mut y = normed.clone();
                for v in &mut y.data {
                    *v = act.apply(*v);
                }
                (y, Some(normed))
            }
        };
        (
            out,
            BlockCache {
                input: x,
                gn,
                pre_act,
            },
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn block_backward(
        &self,
        bi: usize,
        cache: &BlockCache,
        mut dy: Act,
        temb: &[f64],
        dtemb: &mut [f64],
        grads: &mut [f64],
        need_dx: bool,
    ) -> Option<Act> {
        let blk = &self.blocks[bi];
        let p = &self.params;
        if let Some(pre) = &cache.pre_act {
            for (d, &x) in dy.data.iter_mut().zip(&pre.data) {
                *d *= blk.activation.grad(x);
            }
        }
        let dz = match (blk.norm, &cache.gn) {
            (Some((g, bt)), Some(gn)) => {
                let (dgamma, rest) = grads[g..].split_at_mut(blk.cout);
                let dbeta = &mut rest[bt - g - blk.cout..][..blk.cout];
                group_norm_backward(
                    &dy,
                    gn,
                    self.config.groups,
                    &p[g..g + blk.cout],
                    dgamma,
                    dbeta,
                )
            }
            _ => dy,
        };
        if let Some((tw, tb)) = blk.temb {
            let e = self.config.time_dim;
            let hw = dz.h * dz.w;
            let plane = dz.plane();
            for b in 0..dz.n {
                let emb = &temb[b * e..(b + 1) * e];
                for co in 0..blk.cout {
                    let dshift: f64 = dz.data[co * plane + b * hw..][..hw].iter().sum();
                    grads[tb + co] += dshift;
                    for k in 0..e {
                        grads[tw + co * e + k] += dshift * emb[k];
                        dtemb[b * e + k] += dshift * p[tw + co * e + k];
                    }
                }
            }
        }
        let wlen = blk.cout * blk.cin * 9;
        let (dw, rest) = grads[blk.weight..].split_at_mut(wlen);
        let db = &mut rest[blk.bias - blk.weight - wlen..][..blk.cout];
        conv3x3_backward(
            &cache.input,
            &p[blk.weight..blk.weight + wlen],
            &dz,
            blk.stride,
            dw,
            db,
            need_dx,
        )
    }

    /// Predict the noise in `x` (`n × cells` noisy grids) at timesteps `t`.
    pub fn forward(&self, x: &[f64], t: &[usize]) -> Forward {
        let n = t.len();
        assert_eq!(x.len(), n * self.config.cells(), "input batch shape");
        let e = self.config.time_dim;
        let emb = self.time_embedding(t);
        let (mw, mb) = self.mlp;
        let p = &self.params;
        let mut hidden = vec![0.0; n * e];
        for b in 0..n {
            for o in 0..e {
                let wrow = &p[mw + o * e..mw + (o + 1) * e];
                hidden[b * e + o] = p[mb + o]
                    + wrow
                        .iter()
                        .zip(&emb[b * e..(b + 1) * e])
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
            }
        }
        let temb: Vec<f64> = hidden
            .iter()
            .map(|&h| self.config.activation.apply(h))
            .collect();

        let mut caches = Vec::with_capacity(7);
        let input = self.pad(x, n);
        let (h0, c) = self.block_forward(B0, input, &temb);
        caches.push(c);
        let (h1, c) = self.block_forward(B1, h0.clone(), &temb);
        caches.push(c);
        let (h2, c) = self.block_forward(B2, h1.clone(), &temb);
        caches.push(c);
        let (h3, c) = self.block_forward(B3, h2, &temb);
        caches.push(c);
        let cat1 = Act::concat(&upsample2(&h3), &h1);
        let (h4, c) = self.block_forward(B4, cat1, &temb);
        caches.push(c);
        let cat0 = Act::concat(&upsample2(&h4), &h0);
        let (h5, c) = self.block_forward(B5, cat0, &temb);
        caches.push(c);
        let (out, c) = self.block_forward(OUT, h5, &temb);
        caches.push(c);
        Forward {
            output: self.crop(&out),
            n,
            emb,
            hidden,
            temb,
            caches,
        }
    }

    pub fn predict(&self, x: &[f64], t: &[usize]) -> Vec<f64> {
        self.forward(x, t).output
    }

    /// Accumulate `d loss / d params` into `grads` given `d loss / d output`.
    pub fn backward(&self, fwd: &Forward, d_output: &[f64], grads: &mut [f64]) {
        assert_eq!(grads.len(), self.params.len());
        let cfg = &self.config;
        let n = fwd.n;
        let c = cfg.base_channels;
        let e = cfg.time_dim;
        let mut dtemb = vec![0.0; n * e];
        let temb = &fwd.temb;

        let mut dout = Act::zeros(1, n, cfg.padded_height, cfg.padded_width);
        let (gh, gw) = (cfg.grid_height, cfg.grid_width);
        let pw = cfg.padded_width;
        for b in 0..n {
            for r in 0..gh {
                dout.data[b * cfg.padded_height * pw + r * pw..][..gw]
                    .copy_from_slice(&d_output[b * gh * gw + r * gw..][..gw]);
            }
        }
        let c_ = &fwd.caches;
        let dh5 = self
            .block_backward(OUT, &c_[OUT], dout, temb, &mut dtemb, grads, true)
            .expect("dx");
        let dcat0 = self
            .block_backward(B5, &c_[B5], dh5, temb, &mut dtemb, grads, true)
            .expect("dx");
        let (dup4, dh0_skip) = dcat0.split(2 * c);
        let dh4 = upsample2_backward(&dup4);
        let dcat1 = self
            .block_backward(B4, &c_[B4], dh4, temb, &mut dtemb, grads, true)
            .expect("dx");
        let (dup3, dh1_skip) = dcat1.split(2 * c);
        let dh3 = upsample2_backward(&dup3);
        let dh2 = self
            .block_backward(B3, &c_[B3], dh3, temb, &mut dtemb, grads, true)
            .expect("dx");
        let mut dh1 = self
            .block_backward(B2, &c_[B2], dh2, temb, &mut dtemb, grads, true)
            .expect("dx");
        dh1.add_assign(&dh1_skip);
        let mut dh0 = self
            .block_backward(B1, &c_[B1], dh1, temb, &mut dtemb, grads, true)
            .expect("dx");
        dh0.add_assign(&dh0_skip);
        self.block_backward(B0, &c_[B0], dh0, temb, &mut dtemb, grads, false);

        let (mw, mb) = self.mlp;
        for b in 0..n {
            for o in 0..e {
                let dh = dtemb[b * e + o] * cfg.activation.grad(fwd.hidden[b * e + o]);
                grads[mb + o] += dh;
                for k in 0..e {
                    grads[mw + o * e + k] += dh * fwd.emb[b * e + k];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_net_is_small_and_shape_preserving() {
        let net = DenoiserNet::new(NetConfig::tiny(10, 11), 3).unwrap();
        assert!(net.param_count() <= 5_000, "{}", net.param_count());
        let x: Vec<f64> = (0..2 * 110).map(|i| (i as f64 * 0.37).sin()).collect();
        for t in [1, 50, 100] {
            let out = net.predict(&x, &[t, t]);
            assert_eq!(out.len(), x.len());
            assert!(out.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn param_specs_tile_the_buffer() {
        let net = DenoiserNet::new(NetConfig::new(10, 11, 8), 0).unwrap();
        let mut next = 0;
        for s in net.param_specs() {
            assert_eq!(s.offset, next);
            next += s.len();
        }
        assert_eq!(next, net.param_count());
    }

    #[test]
    fn items_are_independent_of_batch_company() {
        let net = DenoiserNet::new(NetConfig::tiny(10, 11), 9).unwrap();
        let a: Vec<f64> = (0..110).map(|i| (i as f64 * 0.1).cos()).collect();
        let b: Vec<f64> = (0..110).map(|i| (i as f64 * 0.3).sin()).collect();
        let alone = net.predict(&a, &[7]);
        let both = net.predict(&[a.clone(), b].concat(), &[7, 40]);
        for (x, y) in alone.iter().zip(&both[..110]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = NetConfig::new(10, 11, 6);
        assert!(DenoiserNet::new(cfg.clone(), 0).is_err());
        cfg.groups = 3;
        assert!(DenoiserNet::new(cfg.clone(), 0).is_ok());
        cfg.padded_height = 10;
        assert!(DenoiserNet::new(cfg, 0).is_err());
    }
}
