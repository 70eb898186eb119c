//! Dense activations in channel-major `[C, N, H, W]` order and the handful of
//! layer primitives the denoiser needs, each with its backward pass.
//!
//! Channel-major storage lets a 3×3 convolution over a whole batch run as a
//! single `(Cout × Cin·9) · (Cin·9 × N·H·W)` product, and channel concatenation
//! is plain buffer concatenation.

#[derive(Clone, Debug, PartialEq)]
pub struct Act {
    pub c: usize,
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Act {
    pub fn zeros(c: usize, n: usize, h: usize, w: usize) -> Self {
        Act {
            c,
            n,
            h,
            w,
            data: vec![0.0; c * n * h * w],
        }
    }

    pub fn plane(&self) -> usize {
        self.n * self.h * self.w
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.plane();
        &mut self.data[c * p..(c + 1) * p]
    }

    pub fn concat(a: &Act, b: &Act) -> Act {
        assert_eq!((a.n, a.h, a.w), (b.n, b.h, b.w), "concat shape mismatch");
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Act {
            c: a.c + b.c,
            n: a.n,
            h: a.h,
            w: a.w,
            data,
        }
    }

    /// Split along channels into the first `c` channels and the rest.
    pub fn split(self, c: usize) -> (Act, Act) {
        let cut = c * self.plane();
        let mut data = self.data;
        let rest = data.split_off(cut);
        (
            Act {
                c,
                n: self.n,
                h: self.h,
                w: self.w,
                data,
            },
            Act {
                c: self.c - c,
                n: self.n,
                h: self.h,
                w: self.w,
                data: rest,
            },
        )
    }

    pub fn add_assign(&mut self, other: &Act) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `C = A·B + beta·C` with explicit strides; `C` is row-major.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the callers size `a`, `b` and `c` for the given dimensions and
    // strides; `c` is row-major m×n and does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn out_size(size: usize, stride: usize) -> usize {
    // 3×3 kernel, padding 1
    (size + 2 - 3) / stride + 1
}

fn im2col(x: &Act, stride: usize) -> (Vec<f64>, usize, usize) {
    let (ho, wo) = (out_size(x.h, stride), out_size(x.w, stride));
    let np = x.n * ho * wo;
    let mut cols = vec![0.0; x.c * 9 * np];
    for ci in 0..x.c {
        let src = x.channel(ci);
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ci * 9 + ky * 3 + kx) * np..][..np];
                for b in 0..x.n {
                    let img = &src[b * x.h * x.w..][..x.h * x.w];
                    for oy in 0..ho {
                        let iy = (oy * stride + ky) as isize - 1;
                        if iy < 0 || iy >= x.h as isize {
                            continue;
                        }
                        let src_row = &img[iy as usize * x.w..][..x.w];
                        let dst = &mut row[(b * ho + oy) * wo..][..wo];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * stride + kx) as isize - 1;
                            if ix >= 0 && ix < x.w as isize {
                                *d = src_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    (cols, ho, wo)
}

fn col2im(cols: &[f64], dx: &mut Act, stride: usize, ho: usize, wo: usize) {
    let np = dx.n * ho * wo;
    let (h, w, n) = (dx.h, dx.w, dx.n);
    for ci in 0..dx.c {
        let dst = dx.channel_mut(ci);
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ci * 9 + ky * 3 + kx) * np..][..np];
                for b in 0..n {
                    let img = &mut dst[b * h * w..][..h * w];
                    for oy in 0..ho {
                        let iy = (oy * stride + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst_row = &mut img[iy as usize * w..][..w];
                        let src = &row[(b * ho + oy) * wo..][..wo];
                        for (ox, s) in src.iter().enumerate() {
                            let ix = (ox * stride + kx) as isize - 1;
                            if ix >= 0 && ix < w as isize {
                                dst_row[ix as usize] += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 3×3 convolution with padding 1. `weight` is `[cout, cin, 3, 3]`.
pub fn conv3x3(x: &Act, weight: &[f64], bias: &[f64], cout: usize, stride: usize) -> Act {
    let k = x.c * 9;
    debug_assert_eq!(weight.len(), cout * k);
    let (cols, ho, wo) = im2col(x, stride);
    let np = x.n * ho * wo;
    let mut out = Act::zeros(cout, x.n, ho, wo);
    for (co, &b) in bias.iter().enumerate() {
        out.channel_mut(co).fill(b);
    }
    gemm(cout, k, np, weight, k, 1, &cols, np, 1, 1.0, &mut out.data);
    out
}

/// Accumulates weight and bias gradients; returns the input gradient.
pub fn conv3x3_backward(
    x: &Act,
    weight: &[f64],
    dout: &Act,
    stride: usize,
    dweight: &mut [f64],
    dbias: &mut [f64],
    need_dx: bool,
) -> Option<Act> {
    let cout = dout.c;
    let k = x.c * 9;
    let (cols, ho, wo) = im2col(x, stride);
    let np = x.n * ho * wo;
    debug_assert_eq!((dout.h, dout.w), (ho, wo));
    for (co, db) in dbias.iter_mut().enumerate() {
        *db += dout.channel(co).iter().sum::<f64>();
    }
    // dW += dout · colsᵀ
    gemm(cout, np, k, &dout.data, np, 1, &cols, 1, np, 1.0, dweight);
    if !need_dx {
        return None;
    }
    // dcols = Wᵀ · dout
    let mut dcols = cols;
    gemm(k, cout, np, weight, 1, k, &dout.data, np, 1, 0.0, &mut dcols);
    let mut dx = Act::zeros(x.c, x.n, x.h, x.w);
    col2im(&dcols, &mut dx, stride, ho, wo);
    Some(dx)
}

pub fn upsample2(x: &Act) -> Act {
    let (h2, w2) = (x.h * 2, x.w * 2);
    let mut out = Act::zeros(x.c, x.n, h2, w2);
    for (src, dst) in x
        .data
        .chunks(x.h * x.w)
        .zip(out.data.chunks_mut(h2 * w2))
    {
        for y in 0..h2 {
            for xx in 0..w2 {
                dst[y * w2 + xx] = src[(y / 2) * x.w + xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward(dout: &Act) -> Act {
    let (h, w) = (dout.h / 2, dout.w / 2);
    let mut dx = Act::zeros(dout.c, dout.n, h, w);
    for (src, dst) in dout
        .data
        .chunks(dout.h * dout.w)
        .zip(dx.data.chunks_mut(h * w))
    {
        for y in 0..dout.h {
            for xx in 0..dout.w {
                dst[(y / 2) * w + xx / 2] += src[y * dout.w + xx];
            }
        }
    }
    dx
}

/// Per-sample group normalization statistics kept for the backward pass.
pub struct GroupNormCache {
    pub xhat: Act,
    pub inv_std: Vec<f64>,
}

pub const GN_EPS: f64 = 1e-5;

pub fn group_norm(
    x: &Act,
    groups: usize,
    gamma: &[f64],
    beta: &[f64],
) -> (Act, GroupNormCache) {
    let cpg = x.c / groups;
    let hw = x.h * x.w;
    let count = (cpg * hw) as f64;
    let mut xhat = Act::zeros(x.c, x.n, x.h, x.w);
    let mut inv_std = vec![0.0; x.n * groups];
    let plane = x.plane();
    for b in 0..x.n {
        for g in 0..groups {
            let chans = g * cpg..(g + 1) * cpg;
            let mut mean = 0.0;
            for c in chans.clone() {
                mean += x.data[c * plane + b * hw..][..hw].iter().sum::<f64>();
            }
            mean /= count;
            let mut var = 0.0;
            for c in chans.clone() {
                var += x.data[c * plane + b * hw..][..hw]
                    .iter()
                    .map(|v| (v - mean) * (v - mean))
                    .sum::<f64>();
            }
            var /= count;
            let is = 1.0 / (var + GN_EPS).sqrt();
            inv_std[b * groups + g] = is;
            for c in chans {
                let src = &x.data[c * plane + b * hw..][..hw];
                let dst = &mut xhat.data[c * plane + b * hw..][..hw];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = (s - mean) * is;
                }
            }
        }
    }
    let mut y = xhat.clone();
    for c in 0..x.c {
        let (g, bt) = (gamma[c], beta[c]);
        for v in y.channel_mut(c) {
            *v = *v * g + bt;
        }
    }
    (y, GroupNormCache { xhat, inv_std })
}

pub fn group_norm_backward(
    dy: &Act,
    cache: &GroupNormCache,
    groups: usize,
    gamma: &[f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Act {
    let xhat = &cache.xhat;
    let cpg = dy.c / groups;
    let hw = dy.h * dy.w;
    let count = (cpg * hw) as f64;
    let plane = dy.plane();
    for c in 0..dy.c {
        let (d, xh) = (dy.channel(c), xhat.channel(c));
        dgamma[c] += d.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>();
        dbeta[c] += d.iter().sum::<f64>();
    }
    let mut dx = Act::zeros(dy.c, dy.n, dy.h, dy.w);
    for b in 0..dy.n {
        for g in 0..groups {
            let chans = g * cpg..(g + 1) * cpg;
            let (mut sum_d, mut sum_dx) = (0.0, 0.0);
            for c in chans.clone() {
                let off = c * plane + b * hw;
                for i in 0..hw {
                    let dxh = dy.data[off + i] * gamma[c];
                    sum_d += dxh;
                    sum_dx += dxh * xhat.data[off + i];
                }
            }
            let is = cache.inv_std[b * groups + g];
            for c in chans {
                let off = c * plane + b * hw;
                for i in 0..hw {
                    let dxh = dy.data[off + i] * gamma[c];
                    dx.data[off + i] =
                        is / count * (count * dxh - sum_d - xhat.data[off + i] * sum_dx);
                }
            }
        }
    }
    dx
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(c: usize, n: usize, h: usize, w: usize) -> Act {
        let mut a = Act::zeros(c, n, h, w);
        for (i, v) in a.data.iter_mut().enumerate() {
            *v = ((i * 37 % 11) as f64 - 5.0) / 7.0;
        }
        a
    }

    // Direct nested-loop convolution, independent of im2col/gemm.
    fn naive_conv(x: &Act, wgt: &[f64], bias: &[f64], cout: usize, stride: usize) -> Act {
        let (ho, wo) = (out_size(x.h, stride), out_size(x.w, stride));
        let mut out = Act::zeros(cout, x.n, ho, wo);
        for co in 0..cout {
            for b in 0..x.n {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut s = bias[co];
                        for ci in 0..x.c {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let iy = (oy * stride + ky) as isize - 1;
                                    let ix = (ox * stride + kx) as isize - 1;
                                    if iy < 0 || ix < 0 || iy >= x.h as isize || ix >= x.w as isize {
                                        continue;
                                    }
                                    let xv = x.data[((ci * x.n + b) * x.h + iy as usize) * x.w
                                        + ix as usize];
                                    s += wgt[((co * x.c + ci) * 3 + ky) * 3 + kx] * xv;
                                }
                            }
                        }
                        out.data[((co * x.n + b) * ho + oy) * wo + ox] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_loops() {
        for stride in [1, 2] {
            let x = ramp(3, 2, 6, 4);
            let cout = 5;
            let wgt: Vec<f64> = (0..cout * 27).map(|i| ((i % 13) as f64 - 6.0) / 10.0).collect();
            let bias: Vec<f64> = (0..cout).map(|i| i as f64 * 0.1).collect();
            let fast = conv3x3(&x, &wgt, &bias, cout, stride);
            let slow = naive_conv(&x, &wgt, &bias, cout, stride);
            assert_eq!((fast.h, fast.w), (slow.h, slow.w));
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // without bias the conv is bilinear: <conv(x), dy> = <x, dx> = <w, dw>
        for stride in [1, 2] {
            let x = ramp(2, 3, 4, 6);
            let cout = 3;
            let wgt: Vec<f64> = (0..cout * 18).map(|i| ((i % 7) as f64 - 3.0) / 5.0).collect();
            let y = conv3x3(&x, &wgt, &vec![0.0; cout], cout, stride);
            let dy = ramp(cout, 3, y.h, y.w);
            let mut dw = vec![0.0; wgt.len()];
            let mut db = vec![0.0; cout];
            let dx = conv3x3_backward(&x, &wgt, &dy, stride, &mut dw, &mut db, true).unwrap();
            let lhs: f64 = y.data.iter().zip(&dy.data).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data.iter().zip(&dx.data).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10);
            let rhs_w: f64 = wgt.iter().zip(&dw).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs_w).abs() < 1e-10);
        }
    }

    #[test]
    fn upsample_adjoint() {
        let x = ramp(2, 2, 3, 3);
        let y = upsample2(&x);
        let dy = ramp(2, 2, 6, 6);
        let dx = upsample2_backward(&dy);
        let lhs: f64 = y.data.iter().zip(&dy.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&dx.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn group_norm_normalizes() {
        let x = ramp(4, 2, 3, 3);
        let (y, _) = group_norm(&x, 2, &[1.0; 4], &[0.0; 4]);
        let plane = y.plane();
        for b in 0..2 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|c| y.data[c * plane + b * 9..][..9].to_vec())
                .collect();
            let mean = vals.iter().sum::<f64>() / 18.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 18.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn concat_split_inverse() {
        let a = ramp(2, 2, 2, 2);
        let b = ramp(3, 2, 2, 2);
        let (x, y) = Act::concat(&a, &b).split(2);
        assert_eq!(x, a);
        assert_eq!(y, b);
    }
}
