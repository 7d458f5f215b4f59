//! Stacked LSTM regressor with a linear scalar head.
//!
//! Parameters live in one flat vector. Layer `l` owns a gate matrix of shape
//! `4H x (in_l + H)` (row-major, gate blocks in the order input, forget,
//! candidate, output) followed by a `4H` bias. The head is `H` weights and
//! one bias.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::error::{PredictorError, Result};
use super::windows::neurons_per_layer;
use crate::num::Scalar;
use crate::simnet::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub steps: usize,
    pub dropout: f64,
}

impl Default for LstmConfig {
    /// 3 layers sized for 10-step windows over 6000 samples, 20% dropout.
    fn default() -> Self {
        LstmConfig {
            input: 1,
            hidden: neurons_per_layer(10, 6000, 3).expect("nonzero"),
            layers: 3,
            steps: 10,
            dropout: 0.2,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.layers == 0 || self.steps == 0 {
            return Err(PredictorError::InvalidArgument("LSTM dimensions must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(PredictorError::InvalidArgument(format!(
                "dropout {} not in [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.input
        } else {
            self.hidden
        }
    }

    fn layer_size(&self, l: usize) -> usize {
        let h4 = 4 * self.hidden;
        h4 * (self.layer_in(l) + self.hidden) + h4
    }

    fn layer_offset(&self, l: usize) -> usize {
        (0..l).map(|k| self.layer_size(k)).sum()
    }

    fn head_offset(&self) -> usize {
        self.layer_offset(self.layers)
    }

    pub fn param_count(&self) -> usize {
        self.head_offset() + self.hidden + 1
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmModel<T> {
    cfg: LstmConfig,
    params: Vec<T>,
}

#[derive(Clone, Debug, Default)]
struct LayerCache<T> {
    /// `[x_t; h_{t-1}]` per step, laid out `[t][feature][batch]`.
    xh: Vec<T>,
    /// Activated gates `[i, f, g, o]`, `[t][4H][batch]`.
    gates: Vec<T>,
    /// Cell states `c_{-1} = 0, c_0, ..., c_{T-1}`, `[t][H][batch]`.
    c: Vec<T>,
    tanh_c: Vec<T>,
    h: Vec<T>,
}

/// Activations of one batched forward pass, reused across batches.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache<T> {
    batch: usize,
    layers: Vec<LayerCache<T>>,
    /// Dropout scale per layer output, `[t][H][batch]`; empty at inference.
    masks: Vec<Vec<T>>,
    head_in: Vec<T>,
    /// One prediction per window of the batch.
    pub outputs: Vec<T>,
}

/// Scratch buffers for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct BackwardScratch<T> {
    dh_above: Vec<T>,
    dx_below: Vec<T>,
    dh_next: Vec<T>,
    dc_next: Vec<T>,
    dz: Vec<T>,
    dxh: Vec<T>,
}

impl<T: Scalar> LstmModel<T> {
    /// All-zero parameters.
    pub fn zeros(cfg: LstmConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(LstmModel {
            params: vec![T::zero(); cfg.param_count()],
            cfg,
        })
    }

    /// Uniform `+-1/sqrt(fan_in)` weights, zero biases except the forget
    /// gate (1.0).
    pub fn init(cfg: LstmConfig, rng: &mut SimRng) -> Result<Self> {
        let mut m = Self::zeros(cfg)?;
        let h = cfg.hidden;
        for l in 0..cfg.layers {
            let cols = cfg.layer_in(l) + h;
            let bound = 1.0 / (cols as f64).sqrt();
            let off = cfg.layer_offset(l);
            for w in &mut m.params[off..off + 4 * h * cols] {
                *w = T::lit(rng.random_range(-bound..=bound));
            }
            let b = off + 4 * h * cols;
            for v in &mut m.params[b + h..b + 2 * h] {
                *v = T::one();
            }
        }
        let bound = 1.0 / (h as f64).sqrt();
        let ho = cfg.head_offset();
        for w in &mut m.params[ho..ho + h] {
            *w = T::lit(rng.random_range(-bound..=bound));
        }
        Ok(m)
    }

    pub fn from_params(cfg: LstmConfig, params: Vec<T>) -> Result<Self> {
        cfg.validate()?;
        if params.len() != cfg.param_count() {
            return Err(PredictorError::LengthMismatch(params.len(), cfg.param_count()));
        }
        Ok(LstmModel { cfg, params })
    }

    pub fn config(&self) -> &LstmConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Inference on one window: no dropout, zero initial states.
    pub fn forward(&self, window: &[T]) -> T {
        let mut cache = ForwardCache::default();
        self.forward_batch(&[window], &mut cache);
        cache.outputs[0]
    }

    /// Inference on many windows at once.
    pub fn predict_many(&self, windows: &[&[T]]) -> Vec<T> {
        let mut cache = ForwardCache::default();
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(64) {
            self.forward_batch(chunk, &mut cache);
            out.extend_from_slice(&cache.outputs);
        }
        out
    }

    /// Forward pass over a batch of windows keeping activations for
    /// [`Self::backward_batch`]. Dropout is applied when masks were drawn by
    /// [`Self::sample_masks`] for this batch size; otherwise the cache's
    /// masks are discarded.
    pub fn forward_batch(&self, windows: &[&[T]], cache: &mut ForwardCache<T>) {
        let cfg = self.cfg;
        let (h, s, nb) = (cfg.hidden, cfg.steps, windows.len());
        assert!(nb > 0, "empty batch");
        for w in windows {
            assert_eq!(w.len(), s * cfg.input, "window length must equal steps");
        }
        if cache.batch != nb {
            cache.masks.clear();
        }
        cache.batch = nb;
        let dropout = !cache.masks.is_empty();
        cache.layers.resize_with(cfg.layers, Default::default);
        for l in 0..cfg.layers {
            let inn = cfg.layer_in(l);
            let cols = inn + h;
            let off = cfg.layer_offset(l);
            let w = &self.params[off..off + 4 * h * cols];
            let b = &self.params[off + 4 * h * cols..off + 4 * h * cols + 4 * h];
            let (below, rest) = cache.layers.split_at_mut(l);
            let lc = &mut rest[0];
            lc.xh.resize(s * cols * nb, T::zero());
            lc.gates.resize(s * 4 * h * nb, T::zero());
            lc.c.resize((s + 1) * h * nb, T::zero());
            lc.tanh_c.resize(s * h * nb, T::zero());
            lc.h.resize(s * h * nb, T::zero());
            lc.c[..h * nb].fill(T::zero());
            for t in 0..s {
                let xh = &mut lc.xh[t * cols * nb..(t + 1) * cols * nb];
                if l == 0 {
                    for (bi, win) in windows.iter().enumerate() {
                        for k in 0..inn {
                            xh[k * nb + bi] = win[t * inn + k];
                        }
                    }
                } else {
                    let prev = &below[l - 1].h[t * h * nb..(t + 1) * h * nb];
                    if dropout {
                        let m = &cache.masks[l - 1][t * h * nb..(t + 1) * h * nb];
                        for ((x, &p), &mk) in xh[..h * nb].iter_mut().zip(prev).zip(m) {
                            *x = p * mk;
                        }
                    } else {
                        xh[..h * nb].copy_from_slice(prev);
                    }
                }
                if t == 0 {
                    xh[inn * nb..].fill(T::zero());
                } else {
                    xh[inn * nb..].copy_from_slice(&lc.h[(t - 1) * h * nb..t * h * nb]);
                }
                let z = &mut lc.gates[t * 4 * h * nb..(t + 1) * 4 * h * nb];
                for r in 0..4 * h {
                    let zr = &mut z[r * nb..(r + 1) * nb];
                    zr.fill(b[r]);
                    let wr = &w[r * cols..(r + 1) * cols];
                    for (c, &wc) in wr.iter().enumerate() {
                        axpy(wc, &xh[c * nb..(c + 1) * nb], zr);
                    }
                }
                for v in &mut z[..2 * h * nb] {
                    *v = sigmoid(*v);
                }
                for v in &mut z[2 * h * nb..3 * h * nb] {
                    *v = v.tanh();
                }
                for v in &mut z[3 * h * nb..] {
                    *v = sigmoid(*v);
                }
                let (c_prev, c_next) = lc.c[t * h * nb..(t + 2) * h * nb].split_at_mut(h * nb);
                let tc = &mut lc.tanh_c[t * h * nb..(t + 1) * h * nb];
                let hh = &mut lc.h[t * h * nb..(t + 1) * h * nb];
                let (gi, rest) = z.split_at(h * nb);
                let (gf, rest) = rest.split_at(h * nb);
                let (gg, go) = rest.split_at(h * nb);
                for k in 0..h * nb {
                    let c = gf[k] * c_prev[k] + gi[k] * gg[k];
                    c_next[k] = c;
                    let th = c.tanh();
                    tc[k] = th;
                    hh[k] = go[k] * th;
                }
            }
        }
        let top = &cache.layers[cfg.layers - 1].h[(s - 1) * h * nb..s * h * nb];
        cache.head_in.clear();
        cache.head_in.extend_from_slice(top);
        if dropout {
            let m = &cache.masks[cfg.layers - 1][(s - 1) * h * nb..s * h * nb];
            for (x, &mk) in cache.head_in.iter_mut().zip(m) {
                *x *= mk;
            }
        }
        let ho = cfg.head_offset();
        cache.outputs.clear();
        cache.outputs.resize(nb, self.params[ho + h]);
        for j in 0..h {
            axpy(self.params[ho + j], &cache.head_in[j * nb..(j + 1) * nb], &mut cache.outputs);
        }
    }

    /// Draws fresh inverted-dropout masks for a batch of `batch` windows
    /// (one value per layer output, step and unit). A zero rate clears them.
    pub fn sample_masks(&self, cache: &mut ForwardCache<T>, batch: usize, rng: &mut SimRng) {
        let p = self.cfg.dropout;
        cache.batch = batch;
        if p == 0.0 {
            cache.masks.clear();
            return;
        }
        let keep = T::lit(1.0 / (1.0 - p));
        let n = self.cfg.steps * self.cfg.hidden * batch;
        cache.masks.resize_with(self.cfg.layers, Vec::new);
        for m in &mut cache.masks {
            m.resize(n, T::zero());
            for v in m.iter_mut() {
                *v = if rng.random_bool(p) { T::zero() } else { keep };
            }
        }
    }

    /// Accumulates `d output[b]` = `dy[b]` back through the cached pass into
    /// `grad` (same layout as the parameters).
    pub fn backward_batch(&self, cache: &ForwardCache<T>, dy: &[T], grad: &mut [T], sc: &mut BackwardScratch<T>) {
        let cfg = self.cfg;
        let (h, s, nb) = (cfg.hidden, cfg.steps, cache.batch);
        assert_eq!(dy.len(), nb);
        let dropout = !cache.masks.is_empty();
        let ho = cfg.head_offset();
        for j in 0..h {
            grad[ho + j] += dot(dy, &cache.head_in[j * nb..(j + 1) * nb]);
        }
        grad[ho + h] += dy.iter().fold(T::zero(), |a, &d| a + d);

        sc.dh_above.clear();
        sc.dh_above.resize(s * h * nb, T::zero());
        for j in 0..h {
            let wj = self.params[ho + j];
            for (bi, &dyb) in dy.iter().enumerate().take(nb) {
                let k = (s - 1) * h * nb + j * nb + bi;
                let mut d = dyb * wj;
                if dropout {
                    d *= cache.masks[cfg.layers - 1][k];
                }
                sc.dh_above[k] = d;
            }
        }
        sc.dz.resize(4 * h * nb, T::zero());
        for l in (0..cfg.layers).rev() {
            let inn = cfg.layer_in(l);
            let cols = inn + h;
            let off = cfg.layer_offset(l);
            let w = &self.params[off..off + 4 * h * cols];
            let (gw, gb) = grad[off..off + 4 * h * cols + 4 * h].split_at_mut(4 * h * cols);
            let lc = &cache.layers[l];
            sc.dh_next.clear();
            sc.dh_next.resize(h * nb, T::zero());
            sc.dc_next.clear();
            sc.dc_next.resize(h * nb, T::zero());
            sc.dx_below.clear();
            sc.dx_below.resize(s * h * nb, T::zero());
            for t in (0..s).rev() {
                let g = &lc.gates[t * 4 * h * nb..(t + 1) * 4 * h * nb];
                let hn = h * nb;
                for k in 0..hn {
                    let (gi, gf, gg, go) = (g[k], g[hn + k], g[2 * hn + k], g[3 * hn + k]);
                    let tc = lc.tanh_c[t * hn + k];
                    let dh = sc.dh_above[t * hn + k] + sc.dh_next[k];
                    let d_o = dh * tc;
                    let dc = dh * go * (T::one() - tc * tc) + sc.dc_next[k];
                    let c_prev = lc.c[t * hn + k];
                    sc.dc_next[k] = dc * gf;
                    sc.dz[k] = dc * gg * gi * (T::one() - gi);
                    sc.dz[hn + k] = dc * c_prev * gf * (T::one() - gf);
                    sc.dz[2 * hn + k] = dc * gi * (T::one() - gg * gg);
                    sc.dz[3 * hn + k] = d_o * go * (T::one() - go);
                }
                let xh = &lc.xh[t * cols * nb..(t + 1) * cols * nb];
                sc.dxh.clear();
                sc.dxh.resize(cols * nb, T::zero());
                for r in 0..4 * h {
                    let dzr = &sc.dz[r * nb..(r + 1) * nb];
                    gb[r] += dzr.iter().fold(T::zero(), |a, &d| a + d);
                    let wr = &w[r * cols..(r + 1) * cols];
                    let gwr = &mut gw[r * cols..(r + 1) * cols];
                    for c in 0..cols {
                        let xc = &xh[c * nb..(c + 1) * nb];
                        gwr[c] += dot(dzr, xc);
                        axpy(wr[c], dzr, &mut sc.dxh[c * nb..(c + 1) * nb]);
                    }
                }
                sc.dh_next.copy_from_slice(&sc.dxh[inn * nb..]);
                if l > 0 {
                    let below = &mut sc.dx_below[t * hn..(t + 1) * hn];
                    if dropout {
                        let m = &cache.masks[l - 1][t * hn..(t + 1) * hn];
                        for ((d, &x), &mk) in below.iter_mut().zip(&sc.dxh[..hn]).zip(m) {
                            *d = x * mk;
                        }
                    } else {
                        below.copy_from_slice(&sc.dxh[..hn]);
                    }
                }
            }
            std::mem::swap(&mut sc.dh_above, &mut sc.dx_below);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::seeded_rng;

    fn tiny(hidden: usize, layers: usize, steps: usize) -> LstmConfig {
        LstmConfig {
            input: 1,
            hidden,
            layers,
            steps,
            dropout: 0.0,
        }
    }

    #[test]
    fn default_shape() {
        let c = LstmConfig::default();
        assert_eq!((c.hidden, c.layers, c.steps), (30, 3, 10));
        // 4*30*(1+30)+120 + 2*(4*30*60+120) + 31
        assert_eq!(c.param_count(), 3840 + 2 * 7320 + 31);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = LstmModel::<f64>::zeros(LstmConfig::default()).unwrap();
        assert_eq!(m.forward(&[0.3; 10]), 0.0);
    }

    #[test]
    fn inference_is_deterministic() {
        let m = LstmModel::<f64>::init(LstmConfig::default(), &mut seeded_rng(5)).unwrap();
        let w: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(m.forward(&w).to_bits(), m.forward(&w).to_bits());
        let m2 = LstmModel::<f64>::init(LstmConfig::default(), &mut seeded_rng(5)).unwrap();
        assert_eq!(m, m2);
    }

    fn sig(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    /// 1 layer, 2 units, 2 steps, evaluated gate by gate by hand.
    #[test]
    fn matches_hand_recurrence() {
        let cfg = tiny(2, 1, 2);
        let p: Vec<f64> = (0..cfg.param_count()).map(|k| ((k * 7 % 11) as f64 - 5.0) / 10.0).collect();
        let m = LstmModel::from_params(cfg, p.clone()).unwrap();
        let x = [0.4, -0.7];
        // rows of W are [w_x, w_h1, w_h2]; 8 rows, then 8 biases, then head
        let wrow = |r: usize| [p[3 * r], p[3 * r + 1], p[3 * r + 2]];
        let bias = |r: usize| p[24 + r];
        let (mut h, mut c) = ([0.0f64; 2], [0.0f64; 2]);
        for &xt in &x {
            let z: Vec<f64> = (0..8)
                .map(|r| {
                    let w = wrow(r);
                    bias(r) + w[0] * xt + w[1] * h[0] + w[2] * h[1]
                })
                .collect();
            let mut nh = [0.0; 2];
            for j in 0..2 {
                let i = sig(z[j]);
                let f = sig(z[2 + j]);
                let g = z[4 + j].tanh();
                let o = sig(z[6 + j]);
                c[j] = f * c[j] + i * g;
                nh[j] = o * c[j].tanh();
            }
            h = nh;
        }
        let expected = p[32] * h[0] + p[33] * h[1] + p[34];
        assert!((m.forward(&x) - expected).abs() < 1e-12);
    }

    fn loss(m: &LstmModel<f64>, x: &[f64], y: f64) -> f64 {
        let d = m.forward(x) - y;
        d * d
    }

    /// Analytic BPTT against central differences on random parameter points.
    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = tiny(3, 2, 4);
        let mut rng = seeded_rng(11);
        let mut worst = 0.0f64;
        for point in 0..20 {
            let mut m = LstmModel::<f64>::zeros(cfg).unwrap();
            for v in m.params_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            let y = rng.random_range(0.0..1.0);
            let mut cache = ForwardCache::default();
            m.forward_batch(&[&x], &mut cache);
            let mut grad = vec![0.0; cfg.param_count()];
            let dy = [2.0 * (cache.outputs[0] - y)];
            m.backward_batch(&cache, &dy, &mut grad, &mut BackwardScratch::default());
            for (k, &g) in grad.iter().enumerate() {
                let eps = 1e-6;
                let orig = m.params()[k];
                m.params_mut()[k] = orig + eps;
                let lp = loss(&m, &x, y);
                m.params_mut()[k] = orig - eps;
                let lm = loss(&m, &x, y);
                m.params_mut()[k] = orig;
                let num = (lp - lm) / (2.0 * eps);
                let rel = (g - num).abs() / (g.abs() + num.abs()).max(1e-7);
                worst = worst.max(rel);
                assert!(rel < 1e-4, "point {point} param {k}: analytic {} numeric {num}", grad[k]);
            }
        }
        assert!(worst < 1e-4);
    }

    /// A batch gradient equals the sum of single-window gradients, and
    /// batched outputs equal one-at-a-time outputs.
    #[test]
    fn batch_matches_single_windows() {
        let cfg = tiny(4, 3, 5);
        let m = LstmModel::<f64>::init(cfg, &mut seeded_rng(8)).unwrap();
        let mut rng = seeded_rng(9);
        let xs: Vec<Vec<f64>> = (0..7).map(|_| (0..5).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let dy: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut cache = ForwardCache::default();
        let mut sc = BackwardScratch::default();
        m.forward_batch(&refs, &mut cache);
        let mut g_batch = vec![0.0; cfg.param_count()];
        m.backward_batch(&cache, &dy, &mut g_batch, &mut sc);
        let mut g_single = vec![0.0; cfg.param_count()];
        for (b, x) in refs.iter().enumerate() {
            assert!((m.forward(x) - cache.outputs[b]).abs() < 1e-14);
            let mut c1 = ForwardCache::default();
            m.forward_batch(&[x], &mut c1);
            m.backward_batch(&c1, &dy[b..b + 1], &mut g_single, &mut sc);
        }
        for (a, b) in g_batch.iter().zip(&g_single) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn dropout_masks_are_inverted() {
        let cfg = LstmConfig::default();
        let m = LstmModel::<f64>::init(cfg, &mut seeded_rng(1)).unwrap();
        let mut cache = ForwardCache::default();
        m.sample_masks(&mut cache, 4, &mut seeded_rng(2));
        let all: Vec<f64> = cache.masks.concat();
        assert!(all.iter().all(|&v| v == 0.0 || (v - 1.25).abs() < 1e-12));
        let dropped = all.iter().filter(|&&v| v == 0.0).count() as f64 / all.len() as f64;
        assert!((dropped - 0.2).abs() < 0.05);
    }
}
