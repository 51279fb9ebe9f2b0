//! Shared-trunk MLP with two scalar heads (area, latency), trained with exact
//! backpropagation. All parameters live in one flat buffer so a single Adam
//! instance can update them.
//!
//! Layout of `params`: for each trunk layer `W (in x hidden)` then `b (hidden)`;
//! then the area head `w (hidden)`, `b (1)`; then the latency head likewise.
//! Weight rows are indexed by input unit, so a forward pass is a sequence of
//! contiguous axpys and zero inputs (one-hot features, dead ReLUs) are skipped.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng as _, RngCore};
use serde::{Deserialize, Serialize};

use crate::math::sqrt;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input_dim: usize,
    pub hidden: usize,
    pub trunk_layers: usize,
    /// Dropout rate on the last trunk layer, the input of both heads.
    pub dropout: f64,
    pub params: Vec<f64>,
}

/// Targets for one sample, already standardized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    pub area: f64,
    pub latency: f64,
}

/// Mean losses over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchLoss {
    pub total: f64,
    pub area_mse: f64,
    pub latency_mse: f64,
}

#[derive(Debug, Clone)]
pub struct Scratch {
    z: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    keep: Vec<Vec<f64>>,
    dh: Vec<f64>,
    dz: Vec<f64>,
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (xc, yc) = (x.chunks_exact(8), y.chunks_exact(8));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for k in 0..8 {
            acc[k] += a[k] * b[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

impl Mlp {
    /// Fan-in scaled uniform initialization.
    pub fn new(input_dim: usize, hidden: usize, trunk_layers: usize, dropout: f64, seed: u64) -> Self {
        assert!(trunk_layers >= 1 && hidden >= 1 && input_dim >= 1);
        let mut mlp = Mlp { input_dim, hidden, trunk_layers, dropout, params: Vec::new() };
        let mut rng = rng::rng(seed);
        let mut params = Vec::with_capacity(mlp.param_count());
        let mut init = |fan_in: usize, n: usize, params: &mut Vec<f64>| {
            let bound = 1.0 / sqrt(fan_in as f64);
            params.extend((0..n).map(|_| rng.gen_range(-bound..bound)));
        };
        for l in 0..trunk_layers {
            let fan_in = mlp.layer_inputs(l);
            init(fan_in, fan_in * hidden + hidden, &mut params);
        }
        for _ in 0..2 {
            init(hidden, hidden + 1, &mut params);
        }
        mlp.params = params;
        mlp
    }

    pub fn param_count(&self) -> usize {
        (0..self.trunk_layers).map(|l| self.layer_inputs(l) * self.hidden + self.hidden).sum::<usize>()
            + 2 * (self.hidden + 1)
    }

    fn layer_inputs(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden
        }
    }

    /// (weight offset, bias offset) of trunk layer `l`.
    fn trunk_offsets(&self, l: usize) -> (usize, usize) {
        let w = (0..l).map(|j| self.layer_inputs(j) * self.hidden + self.hidden).sum::<usize>();
        (w, w + self.layer_inputs(l) * self.hidden)
    }

    /// Weight offset of head 0 (area) or 1 (latency); bias follows the weights.
    fn head_offset(&self, head: usize) -> usize {
        let (_, b) = self.trunk_offsets(self.trunk_layers - 1);
        b + self.hidden + head * (self.hidden + 1)
    }

    pub fn scratch(&self) -> Scratch {
        let layers = || vec![vec![0.0; self.hidden]; self.trunk_layers];
        Scratch { z: layers(), h: layers(), keep: layers(), dh: vec![0.0; self.hidden], dz: vec![0.0; self.hidden] }
    }

    /// Runs the trunk; `dropout_rng` enables training-mode dropout on the
    /// last layer.
    fn trunk_forward(&self, x: &[f64], s: &mut Scratch, mut dropout_rng: Option<&mut Rng>) {
        let h = self.hidden;
        let keep_scale = 1.0 / (1.0 - self.dropout);
        for l in 0..self.trunk_layers {
            let (w, b) = self.trunk_offsets(l);
            let (prev, rest) = s.h.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &prev[l - 1] };
            let z = &mut s.z[l];
            z.copy_from_slice(&self.params[b..b + h]);
            for (i, &a) in input.iter().enumerate() {
                if a != 0.0 {
                    axpy(a, &self.params[w + i * h..w + (i + 1) * h], z);
                }
            }
            let keep = &mut s.keep[l];
            match dropout_rng.as_deref_mut() {
                Some(r) if self.dropout > 0.0 && l + 1 == self.trunk_layers => {
                    let threshold = (self.dropout * 4_294_967_296.0) as u64;
                    for k in keep.iter_mut() {
                        *k = if u64::from(r.next_u32()) < threshold { 0.0 } else { keep_scale };
                    }
                }
                _ => keep.iter_mut().for_each(|k| *k = 1.0),
            }
            for ((out, &zj), &kj) in rest[0].iter_mut().zip(z.iter()).zip(keep.iter()) {
                *out = if zj > 0.0 { zj * kj } else { 0.0 };
            }
        }
    }

    fn heads(&self, s: &Scratch) -> (f64, f64) {
        let last = &s.h[self.trunk_layers - 1];
        let h = self.hidden;
        let a = self.head_offset(0);
        let l = self.head_offset(1);
        (dot(&self.params[a..a + h], last) + self.params[a + h], dot(&self.params[l..l + h], last) + self.params[l + h])
    }

    /// Inference (dropout off): standardized (area, latency).
    pub fn forward(&self, x: &[f64], s: &mut Scratch) -> (f64, f64) {
        assert_eq!(x.len(), self.input_dim);
        self.trunk_forward(x, s, None);
        self.heads(s)
    }

    /// Loss `mean((area - t_a)^2) + lambda * mean((lat - t_l)^2)` over the batch;
    /// its gradient is written into `grad` (overwritten).
    pub fn loss_and_grad(
        &self,
        batch: &[(&[f64], Targets)],
        lambda: f64,
        mut dropout_rng: Option<&mut Rng>,
        grad: &mut [f64],
        s: &mut Scratch,
    ) -> BatchLoss {
        assert_eq!(grad.len(), self.params.len());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let h = self.hidden;
        let n = batch.len().max(1) as f64;
        let mut loss = BatchLoss::default();
        let (ha, hl) = (self.head_offset(0), self.head_offset(1));
        for (x, t) in batch {
            debug_assert_eq!(x.len(), self.input_dim);
            self.trunk_forward(x, s, dropout_rng.as_deref_mut());
            let (ya, yl) = self.heads(s);
            let (ea, el) = (ya - t.area, yl - t.latency);
            loss.area_mse += ea * ea / n;
            loss.latency_mse += el * el / n;
            let dya = 2.0 * ea / n;
            let dyl = 2.0 * lambda * el / n;

            let last = &s.h[self.trunk_layers - 1];
            axpy(dya, last, &mut grad[ha..ha + h]);
            grad[ha + h] += dya;
            axpy(dyl, last, &mut grad[hl..hl + h]);
            grad[hl + h] += dyl;
            for j in 0..h {
                s.dh[j] = dya * self.params[ha + j] + dyl * self.params[hl + j];
            }

            for l in (0..self.trunk_layers).rev() {
                let (w, b) = self.trunk_offsets(l);
                for j in 0..h {
                    s.dz[j] = if s.z[l][j] > 0.0 { s.dh[j] * s.keep[l][j] } else { 0.0 };
                }
                axpy(1.0, &s.dz, &mut grad[b..b + h]);
                let input: &[f64] = if l == 0 { x } else { &s.h[l - 1] };
                for (i, &a) in input.iter().enumerate() {
                    if a != 0.0 {
                        axpy(a, &s.dz, &mut grad[w + i * h..w + (i + 1) * h]);
                    }
                }
                if l > 0 {
                    for i in 0..h {
                        // Units that were zero (inactive or dropped) pass no gradient.
                        s.dh[i] = if s.h[l - 1][i] != 0.0 { dot(&self.params[w + i * h..w + (i + 1) * h], &s.dz) } else { 0.0 };
                    }
                }
            }
        }
        loss.total = loss.area_mse + lambda * loss.latency_mse;
        loss
    }
}
