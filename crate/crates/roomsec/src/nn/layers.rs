//! Layer primitives with exact analytic backward passes.
//!
//! Convolution and dense layers parallelize over disjoint output regions
//! (per batch item forward, per output channel for weight gradients), so
//! results are bit-identical for any thread count. Batch norm and pooling
//! are cheap relative to convolution and stay sequential.

use rand_chacha::ChaCha8Rng;

use super::tensor::{Scalar, Tensor};
use super::NnError;
use crate::exec;
use crate::util;

/// 3x3 convolution, stride 1, zero padding 1 (same spatial size).
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    /// [C_out, C_in, 3, 3]
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn c_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape()[1]
    }

    /// He-normal weights, zero bias.
    pub fn new_he(c_in: usize, c_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / (9 * c_in) as f64).sqrt();
        let data = (0..c_out * c_in * 9)
            .map(|_| T::from_f64_(util::standard_normal(rng) * std))
            .collect();
        Self {
            weight: Tensor::from_vec(&[c_out, c_in, 3, 3], data),
            bias: vec![T::zero(); c_out],
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (n, c_in, h, w) = x.dims4();
        if c_in != self.c_in() {
            return Err(NnError::ChannelMismatch {
                expected: self.c_in(),
                got: c_in,
            });
        }
        let c_out = self.c_out();
        let mut y = Tensor::zeros(&[n, c_out, h, w]);
        let xs = x.data();
        let ws = self.weight.data();
        let plane = h * w;
        exec::par_chunks_mut(y.data_mut(), c_out * plane, |ni, y_item| {
            let x_item = &xs[ni * c_in * plane..(ni + 1) * c_in * plane];
            for co in 0..c_out {
                let y_plane = &mut y_item[co * plane..(co + 1) * plane];
                let b = self.bias[co];
                for v in y_plane.iter_mut() {
                    *v = b;
                }
                for ci in 0..c_in {
                    let x_plane = &x_item[ci * plane..(ci + 1) * plane];
                    let k = &ws[(co * c_in + ci) * 9..(co * c_in + ci) * 9 + 9];
                    for i in 0..h {
                        let y_row = &mut y_plane[i * w..(i + 1) * w];
                        for ky in 0..3usize {
                            let r = (i + ky).wrapping_sub(1);
                            if r >= h {
                                continue;
                            }
                            let x_row = &x_plane[r * w..(r + 1) * w];
                            stencil_row(y_row, x_row, k[ky * 3], k[ky * 3 + 1], k[ky * 3 + 2]);
                        }
                    }
                }
            }
        });
        Ok(y)
    }

    /// Gradients w.r.t. input, weights, and bias.
    pub fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Vec<T>) {
        let (n, c_in, h, w) = x.dims4();
        let c_out = self.c_out();
        debug_assert_eq!(dy.shape(), &[n, c_out, h, w]);
        let plane = h * w;
        let xs = x.data();
        let dys = dy.data();
        let ws = self.weight.data();

        // dx is the correlation of dy with the flipped kernel; each batch
        // item writes a disjoint region.
        let mut dx = Tensor::zeros(&[n, c_in, h, w]);
        exec::par_chunks_mut(dx.data_mut(), c_in * plane, |ni, dx_item| {
            let dy_item = &dys[ni * c_out * plane..(ni + 1) * c_out * plane];
            for ci in 0..c_in {
                let dx_plane = &mut dx_item[ci * plane..(ci + 1) * plane];
                for co in 0..c_out {
                    let dy_plane = &dy_item[co * plane..(co + 1) * plane];
                    let k = &ws[(co * c_in + ci) * 9..(co * c_in + ci) * 9 + 9];
                    for i in 0..h {
                        let dx_row = &mut dx_plane[i * w..(i + 1) * w];
                        for ky in 0..3usize {
                            // dy row feeding dx row i through kernel row ky.
                            let r = (i + 1).wrapping_sub(ky);
                            if r >= h {
                                continue;
                            }
                            let dy_row = &dy_plane[r * w..(r + 1) * w];
                            stencil_row(
                                dx_row,
                                dy_row,
                                k[ky * 3 + 2],
                                k[ky * 3 + 1],
                                k[ky * 3],
                            );
                        }
                    }
                }
            }
        });

        // dw: per output channel (disjoint slices), batch summed in order.
        let mut dw = Tensor::zeros(&[c_out, c_in, 3, 3]);
        exec::par_chunks_mut(dw.data_mut(), c_in * 9, |co, dw_slice| {
            for ni in 0..n {
                let x_item = &xs[ni * c_in * plane..(ni + 1) * c_in * plane];
                let dy_plane = &dys[(ni * c_out + co) * plane..(ni * c_out + co + 1) * plane];
                for ci in 0..c_in {
                    let x_plane = &x_item[ci * plane..(ci + 1) * plane];
                    for i in 0..h {
                        let dy_row = &dy_plane[i * w..(i + 1) * w];
                        for ky in 0..3usize {
                            let r = (i + ky).wrapping_sub(1);
                            if r >= h {
                                continue;
                            }
                            let x_row = &x_plane[r * w..(r + 1) * w];
                            let (s0, s1, s2) = dots3(dy_row, x_row);
                            let base = ci * 9 + ky * 3;
                            dw_slice[base] = dw_slice[base] + s0;
                            dw_slice[base + 1] = dw_slice[base + 1] + s1;
                            dw_slice[base + 2] = dw_slice[base + 2] + s2;
                        }
                    }
                }
            }
        });

        let mut db = vec![T::zero(); c_out];
        for ni in 0..n {
            for (co, dbv) in db.iter_mut().enumerate() {
                let dy_plane = &dys[(ni * c_out + co) * plane..(ni * c_out + co + 1) * plane];
                *dbv = *dbv + dy_plane.iter().copied().sum();
            }
        }
        (dx, dw, db)
    }
}

/// Dot product with four independent accumulators; the single-chain
/// version is FMA-latency bound.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = k * 4;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in chunks * 4..n {
        tail = tail + a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// One kernel row applied horizontally with zero padding:
/// `y[j] += w0 x[j-1] + w1 x[j] + w2 x[j+1]`.
#[inline]
fn stencil_row<T: Scalar>(y: &mut [T], x: &[T], w0: T, w1: T, w2: T) {
    let n = y.len();
    let x = &x[..n];
    if n == 1 {
        y[0] = y[0] + w1 * x[0];
        return;
    }
    y[0] = y[0] + w1 * x[0] + w2 * x[1];
    for (yv, win) in y[1..n - 1].iter_mut().zip(x.windows(3)) {
        *yv = *yv + w0 * win[0] + w1 * win[1] + w2 * win[2];
    }
    y[n - 1] = y[n - 1] + w0 * x[n - 2] + w1 * x[n - 1];
}

/// The three shifted dot products of one kernel row:
/// `(sum dy[j] x[j-1], sum dy[j] x[j], sum dy[j] x[j+1])` with zero edges.
#[inline]
fn dots3<T: Scalar>(dy: &[T], x: &[T]) -> (T, T, T) {
    let n = dy.len();
    let x = &x[..n];
    if n == 1 {
        return (T::zero(), dy[0] * x[0], T::zero());
    }
    let mut s0 = dy[n - 1] * x[n - 2];
    let mut s1 = dy[0] * x[0] + dy[n - 1] * x[n - 1];
    let mut s2 = dy[0] * x[1];
    for (&g, win) in dy[1..n - 1].iter().zip(x.windows(3)) {
        s0 = s0 + g * win[0];
        s1 = s1 + g * win[1];
        s2 = s2 + g * win[2];
    }
    (s0, s1, s2)
}

/// Per-channel batch normalization over (N, H, W).
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

/// Saved batch statistics for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub mean: Vec<T>,
    pub inv_std: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize, momentum: f64, eps: f64) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::from_f64_(momentum),
            eps: T::from_f64_(eps),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Train-mode forward with per-channel batch statistics (biased
    /// variance). Running statistics update only when `update_running` is
    /// set; the gradient checker turns it off to keep the loss pure.
    pub fn forward_train(
        &mut self,
        x: &Tensor<T>,
        update_running: bool,
    ) -> Result<(Tensor<T>, BnCache<T>), NnError> {
        let (n, c, h, w) = x.dims4();
        debug_assert_eq!(c, self.channels());
        let m = n * h * w;
        if m < 2 {
            return Err(NnError::BatchTooSmall(m));
        }
        let plane = h * w;
        let inv_m = T::from_f64_(1.0 / m as f64);

        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        let xs = x.data();
        for ci in 0..c {
            let mut s = T::zero();
            for ni in 0..n {
                let p = &xs[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                s = s + p.iter().copied().sum();
            }
            let mu = s * inv_m;
            let mut v = T::zero();
            for ni in 0..n {
                let p = &xs[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                for &xv in p {
                    let d = xv - mu;
                    v = v + d * d;
                }
            }
            mean[ci] = mu;
            var[ci] = v * inv_m;
        }

        if update_running {
            let mom = self.momentum;
            let rem = T::one() - mom;
            for ci in 0..c {
                self.running_mean[ci] = mom * self.running_mean[ci] + rem * mean[ci];
                self.running_var[ci] = mom * self.running_var[ci] + rem * var[ci];
            }
        }

        let inv_std: Vec<T> = var.iter().map(|&v| (v + self.eps).sqrt().recip()).collect();
        let mut y = Tensor::zeros(&[n, c, h, w]);
        let ys = y.data_mut();
        for ni in 0..n {
            for ci in 0..c {
                let g = self.gamma[ci] * inv_std[ci];
                let b = self.beta[ci] - g * mean[ci];
                let base = (ni * c + ci) * plane;
                for i in 0..plane {
                    ys[base + i] = g * xs[base + i] + b;
                }
            }
        }
        Ok((y, BnCache { mean, inv_std }))
    }

    /// Inference-mode forward using running statistics.
    pub fn forward_infer(&self, x: &Tensor<T>) -> Tensor<T> {
        let (n, c, h, w) = x.dims4();
        debug_assert_eq!(c, self.channels());
        let plane = h * w;
        let xs = x.data();
        let mut y = Tensor::zeros(&[n, c, h, w]);
        let ys = y.data_mut();
        for ci in 0..c {
            let inv = (self.running_var[ci] + self.eps).sqrt().recip();
            let g = self.gamma[ci] * inv;
            let b = self.beta[ci] - g * self.running_mean[ci];
            for ni in 0..n {
                let base = (ni * c + ci) * plane;
                for i in 0..plane {
                    ys[base + i] = g * xs[base + i] + b;
                }
            }
        }
        y
    }

    /// Full batch-norm backward, including the batch-statistics terms:
    /// dx = gamma * inv_std / M * (M dy - sum dy - xhat * sum(dy xhat)).
    pub fn backward(
        &self,
        x: &Tensor<T>,
        dy: &Tensor<T>,
        cache: &BnCache<T>,
    ) -> (Tensor<T>, Vec<T>, Vec<T>) {
        let (n, c, h, w) = x.dims4();
        let plane = h * w;
        let m = T::from_f64_((n * h * w) as f64);
        let xs = x.data();
        let dys = dy.data();

        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        let mut dx = Tensor::zeros(&[n, c, h, w]);
        let dxs = dx.data_mut();
        for ci in 0..c {
            let mu = cache.mean[ci];
            let istd = cache.inv_std[ci];
            let mut s1 = T::zero(); // sum dy
            let mut s2 = T::zero(); // sum dy * xhat
            for ni in 0..n {
                let base = (ni * c + ci) * plane;
                for i in 0..plane {
                    let g = dys[base + i];
                    s1 = s1 + g;
                    s2 = s2 + g * (xs[base + i] - mu) * istd;
                }
            }
            dgamma[ci] = s2;
            dbeta[ci] = s1;
            let scale = self.gamma[ci] * istd / m;
            for ni in 0..n {
                let base = (ni * c + ci) * plane;
                for i in 0..plane {
                    let xhat = (xs[base + i] - mu) * istd;
                    dxs[base + i] = scale * (m * dys[base + i] - s1 - xhat * s2);
                }
            }
        }
        (dx, dgamma, dbeta)
    }
}

/// ReLU; the mask for backward is recovered from the output sign.
pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// dx = dy where the forward output was positive.
pub fn relu_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(y.shape(), dy.shape());
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&yv, &gv)| if yv > T::zero() { gv } else { T::zero() })
        .collect();
    Tensor::from_vec(y.shape(), data)
}

/// 2x2 max pooling with stride 2; odd edges behave as -inf padding, so the
/// output is ceil(dim / 2). Ties route the gradient to the first element
/// in window scan order.
pub fn maxpool2x2<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
    let (n, c, h, w) = x.dims4();
    let oh = h.div_ceil(2);
    let ow = w.div_ceil(2);
    let plane = h * w;
    let oplane = oh * ow;
    let xs = x.data();
    let mut y = Tensor::zeros(&[n, c, oh, ow]);
    let ys = y.data_mut();
    let mut argmax = vec![0u32; n * c * oplane];
    for nc in 0..n * c {
        let x_base = nc * plane;
        let y_base = nc * oplane;
        for oi in 0..oh {
            for oj in 0..ow {
                let mut best = T::neg_infinity();
                let mut best_idx = 0usize;
                for di in 0..2 {
                    let r = oi * 2 + di;
                    if r >= h {
                        continue;
                    }
                    for dj in 0..2 {
                        let cidx = oj * 2 + dj;
                        if cidx >= w {
                            continue;
                        }
                        let idx = x_base + r * w + cidx;
                        if xs[idx] > best {
                            best = xs[idx];
                            best_idx = idx;
                        }
                    }
                }
                ys[y_base + oi * ow + oj] = best;
                argmax[y_base + oi * ow + oj] = best_idx as u32;
            }
        }
    }
    (y, argmax)
}

/// Route pooled gradients back to their argmax positions.
pub fn maxpool2x2_backward<T: Scalar>(
    dy: &Tensor<T>,
    argmax: &[u32],
    input_shape: &[usize],
) -> Tensor<T> {
    let mut dx = Tensor::zeros(input_shape);
    let dxs = dx.data_mut();
    for (&g, &idx) in dy.data().iter().zip(argmax) {
        dxs[idx as usize] = dxs[idx as usize] + g;
    }
    dx
}

/// Fully connected layer: y = W x + b.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    /// [out, in], row-major.
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new_he(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / n_in as f64).sqrt();
        let data = (0..n_out * n_in)
            .map(|_| T::from_f64_(util::standard_normal(rng) * std))
            .collect();
        Self {
            weight: Tensor::from_vec(&[n_out, n_in], data),
            bias: vec![T::zero(); n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn n_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let (n, n_in) = x.dims2();
        debug_assert_eq!(n_in, self.n_in());
        let n_out = self.n_out();
        let xs = x.data();
        let ws = self.weight.data();
        let mut y = Tensor::zeros(&[n, n_out]);
        exec::par_chunks_mut(y.data_mut(), n_out, |ni, y_row| {
            let x_row = &xs[ni * n_in..(ni + 1) * n_in];
            for (o, yv) in y_row.iter_mut().enumerate() {
                let w_row = &ws[o * n_in..(o + 1) * n_in];
                *yv = self.bias[o] + dot(w_row, x_row);
            }
        });
        y
    }

    pub fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Vec<T>) {
        let (n, n_in) = x.dims2();
        let n_out = self.n_out();
        let xs = x.data();
        let dys = dy.data();
        let ws = self.weight.data();

        let mut dx = Tensor::zeros(&[n, n_in]);
        exec::par_chunks_mut(dx.data_mut(), n_in, |ni, dx_row| {
            let dy_row = &dys[ni * n_out..(ni + 1) * n_out];
            for (o, &g) in dy_row.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                let w_row = &ws[o * n_in..(o + 1) * n_in];
                for (dxv, &wv) in dx_row.iter_mut().zip(w_row) {
                    *dxv = *dxv + g * wv;
                }
            }
        });

        let mut dw = Tensor::zeros(&[n_out, n_in]);
        exec::par_chunks_mut(dw.data_mut(), n_in, |o, dw_row| {
            for ni in 0..n {
                let g = dys[ni * n_out + o];
                if g == T::zero() {
                    continue;
                }
                let x_row = &xs[ni * n_in..(ni + 1) * n_in];
                for (dwv, &xv) in dw_row.iter_mut().zip(x_row) {
                    *dwv = *dwv + g * xv;
                }
            }
        });

        let mut db = vec![T::zero(); n_out];
        for ni in 0..n {
            for (o, dbv) in db.iter_mut().enumerate() {
                *dbv = *dbv + dys[ni * n_out + o];
            }
        }
        (dx, dw, db)
    }
}

/// Feature-wise conditioning: y = relu(h * s) + b, elementwise.
/// Returns the output and the gate mask (h * s > 0) for backward.
pub fn film_forward<T: Scalar>(
    h: &Tensor<T>,
    s: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<bool>), NnError> {
    if h.shape() != s.shape() || h.shape() != b.shape() {
        return Err(NnError::ShapeMismatch {
            expected: h.shape().to_vec(),
            got: if h.shape() != s.shape() {
                s.shape().to_vec()
            } else {
                b.shape().to_vec()
            },
        });
    }
    let mut mask = vec![false; h.len()];
    let data = h
        .data()
        .iter()
        .zip(s.data())
        .zip(b.data())
        .zip(mask.iter_mut())
        .map(|(((&hv, &sv), &bv), m)| {
            let p = hv * sv;
            if p > T::zero() {
                *m = true;
                p + bv
            } else {
                bv
            }
        })
        .collect();
    Ok((Tensor::from_vec(h.shape(), data), mask))
}

/// Gradients of [`film_forward`]: dh = dy s 1[hs>0], ds = dy h 1[hs>0],
/// db = dy.
pub fn film_backward<T: Scalar>(
    h: &Tensor<T>,
    s: &Tensor<T>,
    dy: &Tensor<T>,
    mask: &[bool],
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let mut dh = Tensor::zeros(h.shape());
    let mut ds = Tensor::zeros(h.shape());
    for i in 0..h.len() {
        if mask[i] {
            let g = dy.data()[i];
            dh.data_mut()[i] = g * s.data()[i];
            ds.data_mut()[i] = g * h.data()[i];
        }
    }
    (dh, ds, dy.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::derived_rng;

    fn t4(n: usize, c: usize, h: usize, w: usize, f: impl Fn(usize) -> f64) -> Tensor<f64> {
        Tensor::from_vec(&[n, c, h, w], (0..n * c * h * w).map(f).collect())
    }

    /// Nested-loop convolution oracle, independent of the production path.
    fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64]) -> Tensor<f64> {
        let (n, c_in, h, wd) = x.dims4();
        let c_out = w.shape()[0];
        let mut y = Tensor::zeros(&[n, c_out, h, wd]);
        for ni in 0..n {
            for co in 0..c_out {
                for i in 0..h as isize {
                    for j in 0..wd as isize {
                        let mut acc = b[co];
                        for ci in 0..c_in {
                            for ky in 0..3isize {
                                for kx in 0..3isize {
                                    let r = i + ky - 1;
                                    let c = j + kx - 1;
                                    if r < 0 || r >= h as isize || c < 0 || c >= wd as isize {
                                        continue;
                                    }
                                    let xi = ((ni * c_in + ci) * h as usize + r as usize) * wd
                                        + c as usize;
                                    let wi = ((co * c_in + ci) * 3 + ky as usize) * 3 + kx as usize;
                                    acc += x.data()[xi] * w.data()[wi];
                                }
                            }
                        }
                        let yi = ((ni * c_out + co) * h + i as usize) * wd + j as usize;
                        y.data_mut()[yi] = acc;
                    }
                }
            }
        }
        y
    }

    #[test]
    fn conv_identity_kernel_passes_input_through() {
        let mut conv = Conv2d::<f64> {
            weight: Tensor::zeros(&[1, 1, 3, 3]),
            bias: vec![0.0],
        };
        conv.weight.data_mut()[4] = 1.0; // center tap
        let x = t4(1, 1, 5, 7, |i| (i as f64 * 0.37).sin());
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_all_ones_kernel_padding_arithmetic() {
        let conv = Conv2d::<f64> {
            weight: Tensor::from_vec(&[1, 1, 3, 3], vec![1.0; 9]),
            bias: vec![0.0],
        };
        let c = 0.5;
        let x = t4(1, 1, 4, 5, |_| c);
        let y = conv.forward(&x).unwrap();
        // Interior sums 9 contributors, corners 4.
        assert!((y.data()[1 * 5 + 2] - 9.0 * c).abs() < 1e-12);
        assert!((y.data()[0] - 4.0 * c).abs() < 1e-12);
        assert!((y.data()[4] - 4.0 * c).abs() < 1e-12);
        // Edge (non-corner) sums 6.
        assert!((y.data()[2] - 6.0 * c).abs() < 1e-12);
    }

    #[test]
    fn conv_matches_nested_loop_oracle() {
        let mut rng = derived_rng(31, &[]);
        let conv = Conv2d::<f64>::new_he(2, 3, &mut rng);
        let x = t4(2, 2, 5, 6, |i| ((i * 2654435761) % 1000) as f64 / 500.0 - 1.0);
        let y = conv.forward(&x).unwrap();
        let want = conv_oracle(&x, &conv.weight, &conv.bias);
        for (a, b) in y.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let mut rng = derived_rng(32, &[]);
        let conv = Conv2d::<f64>::new_he(3, 2, &mut rng);
        let x = t4(1, 2, 4, 4, |_| 0.0);
        assert!(matches!(
            conv.forward(&x),
            Err(NnError::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = derived_rng(33, &[]);
        let mut conv = Conv2d::<f64>::new_he(2, 2, &mut rng);
        let x = t4(1, 2, 4, 5, |i| ((i * 7919) % 100) as f64 / 50.0 - 1.0);
        // Loss = sum(y * g) for a fixed random g.
        let g = t4(1, 2, 4, 5, |i| ((i * 104729) % 100) as f64 / 50.0 - 1.0);
        let loss = |conv: &Conv2d<f64>, x: &Tensor<f64>| -> f64 {
            let y = conv.forward(x).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        };
        let (dx, dw, db) = conv.backward(&x, &g);
        let eps = 1e-6;

        for idx in [0usize, 7, 15, 30] {
            let mut xp = x.clone();
            xp.data_mut()[idx] += eps;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= eps;
            let num = (loss(&conv, &xp) - loss(&conv, &xm)) / (2.0 * eps);
            assert!((num - dx.data()[idx]).abs() < 1e-6, "dx[{idx}]");
        }
        for idx in [0usize, 5, 17, 35] {
            let orig = conv.weight.data()[idx];
            conv.weight.data_mut()[idx] = orig + eps;
            let lp = loss(&conv, &x);
            conv.weight.data_mut()[idx] = orig - eps;
            let lm = loss(&conv, &x);
            conv.weight.data_mut()[idx] = orig;
            let num = (lp - lm) / (2.0 * eps);
            assert!((num - dw.data()[idx]).abs() < 1e-6, "dw[{idx}]");
        }
        for idx in 0..2 {
            let orig = conv.bias[idx];
            conv.bias[idx] = orig + eps;
            let lp = loss(&conv, &x);
            conv.bias[idx] = orig - eps;
            let lm = loss(&conv, &x);
            conv.bias[idx] = orig;
            let num = (lp - lm) / (2.0 * eps);
            assert!((num - db[idx]).abs() < 1e-6, "db[{idx}]");
        }
    }

    #[test]
    fn batchnorm_constant_input_zeroes_out() {
        let mut bn = BatchNorm::<f64>::new(2, 0.9, 1e-5);
        let x = t4(2, 2, 2, 2, |_| 3.25);
        let (y, _) = bn.forward_train(&x, true).unwrap();
        assert!(y.data().iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn batchnorm_train_output_is_standardized() {
        let mut bn = BatchNorm::<f64>::new(3, 0.9, 1e-8);
        let x = t4(4, 3, 5, 5, |i| ((i * 31) % 17) as f64 - 8.0);
        let (y, _) = bn.forward_train(&x, true).unwrap();
        let (n, c, h, w) = y.dims4();
        let plane = h * w;
        for ci in 0..c {
            let mut vals = Vec::new();
            for ni in 0..n {
                let base = (ni * c + ci) * plane;
                vals.extend_from_slice(&y.data()[base..base + plane]);
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-6, "mean {m}");
            assert!((v - 1.0).abs() < 1e-4, "var {v}");
        }
    }

    #[test]
    fn batchnorm_rejects_single_value_batches() {
        let mut bn = BatchNorm::<f64>::new(1, 0.9, 1e-5);
        let x = t4(1, 1, 1, 1, |_| 1.0);
        assert!(matches!(
            bn.forward_train(&x, true),
            Err(NnError::BatchTooSmall(1))
        ));
    }

    #[test]
    fn batchnorm_zero_variance_channel_survives_via_eps() {
        let mut bn = BatchNorm::<f64>::new(1, 0.9, 1e-5);
        let x = t4(2, 1, 2, 2, |_| 7.0);
        let (y, cache) = bn.forward_train(&x, true).unwrap();
        assert!(y.data().iter().all(|v| v.is_finite()));
        assert!(cache.inv_std[0].is_finite());
    }

    #[test]
    fn batchnorm_backward_matches_finite_differences() {
        let mut bn = BatchNorm::<f64>::new(2, 0.9, 1e-5);
        let x = t4(2, 2, 3, 3, |i| ((i * 37) % 23) as f64 / 11.0 - 1.0);
        let g = t4(2, 2, 3, 3, |i| ((i * 61) % 19) as f64 / 9.0 - 1.0);
        let loss = |bn: &mut BatchNorm<f64>, x: &Tensor<f64>| -> f64 {
            let (y, _) = bn.forward_train(x, false).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        };
        let (y0, cache) = bn.forward_train(&x, false).unwrap();
        let _ = y0;
        let (dx, dgamma, dbeta) = bn.backward(&x, &g, &cache);
        let eps = 1e-6;
        for idx in [0usize, 5, 20, 35] {
            let mut xp = x.clone();
            xp.data_mut()[idx] += eps;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= eps;
            let num = (loss(&mut bn, &xp) - loss(&mut bn, &xm)) / (2.0 * eps);
            let rel = (num - dx.data()[idx]).abs() / num.abs().max(1e-8);
            assert!(rel < 1e-4, "dx[{idx}]: analytic {} numeric {num}", dx.data()[idx]);
        }
        for ci in 0..2 {
            let orig = bn.gamma[ci];
            bn.gamma[ci] = orig + eps;
            let lp = loss(&mut bn, &x);
            bn.gamma[ci] = orig - eps;
            let lm = loss(&mut bn, &x);
            bn.gamma[ci] = orig;
            let num = (lp - lm) / (2.0 * eps);
            assert!((num - dgamma[ci]).abs() < 1e-5, "dgamma[{ci}]");

            let orig = bn.beta[ci];
            bn.beta[ci] = orig + eps;
            let lp = loss(&mut bn, &x);
            bn.beta[ci] = orig - eps;
            let lm = loss(&mut bn, &x);
            bn.beta[ci] = orig;
            let num = (lp - lm) / (2.0 * eps);
            assert!((num - dbeta[ci]).abs() < 1e-5, "dbeta[{ci}]");
        }
    }

    #[test]
    fn maxpool_single_window() {
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let (y, argmax) = maxpool2x2(&x);
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(argmax, vec![3]);
    }

    #[test]
    fn maxpool_ceil_output_for_odd_width() {
        let x = Tensor::<f64>::zeros(&[1, 1, 4, 25]);
        let (y, _) = maxpool2x2(&x);
        assert_eq!(y.shape(), &[1, 1, 2, 13]);
    }

    #[test]
    fn maxpool_shift_equivariance() {
        let x = t4(1, 1, 4, 6, |i| ((i * 17) % 13) as f64);
        let shifted = x.map(|v| v + 5.0);
        let (y, _) = maxpool2x2(&x);
        let (ys, _) = maxpool2x2(&shifted);
        for (a, b) in y.data().iter().zip(ys.data()) {
            assert!((b - a - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn maxpool_backward_routes_to_first_argmax_on_ties() {
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![2.0, 2.0, 2.0, 2.0]);
        let (_, argmax) = maxpool2x2(&x);
        assert_eq!(argmax, vec![0]); // first in scan order
        let dy = Tensor::from_vec(&[1, 1, 1, 1], vec![1.5]);
        let dx = maxpool2x2_backward(&dy, &argmax, &[1, 1, 2, 2]);
        assert_eq!(dx.data(), &[1.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dense_backward_matches_finite_differences() {
        let mut rng = derived_rng(51, &[]);
        let mut fc = Dense::<f64>::new_he(4, 3, &mut rng);
        let x = Tensor::from_vec(&[2, 4], (0..8).map(|i| i as f64 / 4.0 - 1.0).collect());
        let g = Tensor::from_vec(&[2, 3], (0..6).map(|i| (i as f64).cos()).collect());
        let loss = |fc: &Dense<f64>, x: &Tensor<f64>| -> f64 {
            let y = fc.forward(x);
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        };
        let (dx, dw, db) = fc.backward(&x, &g);
        let eps = 1e-6;
        for idx in 0..8 {
            let mut xp = x.clone();
            xp.data_mut()[idx] += eps;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= eps;
            let num = (loss(&fc, &xp) - loss(&fc, &xm)) / (2.0 * eps);
            assert!((num - dx.data()[idx]).abs() < 1e-6);
        }
        for idx in 0..12 {
            let orig = fc.weight.data()[idx];
            fc.weight.data_mut()[idx] = orig + eps;
            let lp = loss(&fc, &x);
            fc.weight.data_mut()[idx] = orig - eps;
            let lm = loss(&fc, &x);
            fc.weight.data_mut()[idx] = orig;
            assert!(((lp - lm) / (2.0 * eps) - dw.data()[idx]).abs() < 1e-6);
        }
        for idx in 0..3 {
            let orig = fc.bias[idx];
            fc.bias[idx] = orig + eps;
            let lp = loss(&fc, &x);
            fc.bias[idx] = orig - eps;
            let lm = loss(&fc, &x);
            fc.bias[idx] = orig;
            assert!(((lp - lm) / (2.0 * eps) - db[idx]).abs() < 1e-6);
        }
    }

    #[test]
    fn film_identity_conditioning_is_plain_relu() {
        let h = Tensor::from_vec(&[1, 4], vec![-1.0, 2.0, 0.0, 0.5]);
        let s = Tensor::from_vec(&[1, 4], vec![1.0; 4]);
        let b = Tensor::from_vec(&[1, 4], vec![0.0; 4]);
        let (y, _) = film_forward(&h, &s, &b).unwrap();
        assert_eq!(y.data(), relu(&h).data());
    }

    #[test]
    fn film_zero_gate_passes_bias_only() {
        let h = Tensor::from_vec(&[1, 3], vec![-1.0, 2.0, 5.0]);
        let s = Tensor::from_vec(&[1, 3], vec![0.0; 3]);
        let b = Tensor::from_vec(&[1, 3], vec![0.3, -0.4, 0.9]);
        let (y, _) = film_forward(&h, &s, &b).unwrap();
        assert_eq!(y.data(), b.data());
    }

    #[test]
    fn film_direct_evaluation() {
        // relu([-1*3, 2*0.5]) + [0.1, -0.2] = [0.1, 0.8]
        let h = Tensor::from_vec(&[1, 2], vec![-1.0, 2.0]);
        let s = Tensor::from_vec(&[1, 2], vec![3.0, 0.5]);
        let b = Tensor::from_vec(&[1, 2], vec![0.1, -0.2]);
        let (y, mask) = film_forward(&h, &s, &b).unwrap();
        assert!((y.data()[0] - 0.1f64).abs() < 1e-15);
        assert!((y.data()[1] - 0.8f64).abs() < 1e-15);
        assert_eq!(mask, vec![false, true]);
    }

    #[test]
    fn film_backward_gradients() {
        let h = Tensor::from_vec(&[1, 2], vec![-1.0, 2.0]);
        let s = Tensor::from_vec(&[1, 2], vec![3.0, 0.5]);
        let b = Tensor::from_vec(&[1, 2], vec![0.1, -0.2]);
        let (_, mask) = film_forward(&h, &s, &b).unwrap();
        let dy = Tensor::from_vec(&[1, 2], vec![1.0, 1.0]);
        let (dh, ds, db) = film_backward(&h, &s, &dy, &mask);
        // Gate closed at index 0: only bias gradient flows.
        assert_eq!(dh.data(), &[0.0, 0.5]);
        assert_eq!(ds.data(), &[0.0, 2.0]);
        assert_eq!(db.data(), &[1.0, 1.0]);
    }

    #[test]
    fn film_rejects_shape_mismatch() {
        let h = Tensor::<f64>::zeros(&[1, 2]);
        let s = Tensor::<f64>::zeros(&[1, 3]);
        let b = Tensor::<f64>::zeros(&[1, 2]);
        assert!(matches!(
            film_forward(&h, &s, &b),
            Err(NnError::ShapeMismatch { .. })
        ));
    }
}
