//! Stacked GRU classifier with full backpropagation through time.
//!
//! The sequence is the 48 SoC values, one scalar per step. Per layer and
//! step:
//!
//! ```text
//! z_t = sigma(U_z x_t + W_z s_{t-1} + b_z)
//! r_t = sigma(U_r x_t + W_r s_{t-1} + b_r)
//! h_t = tanh(U_h x_t + W_h (s_{t-1} . r_t) + b_h)
//! s_t = (1 - z_t) . h_t + z_t . s_{t-1}
//! ```
//!
//! with `.` the elementwise product and `s_0 = 0`. Hidden layers pass the
//! activated state upward (with dropout between layers in training); the
//! classification head is `softmax(V s_T + b_o)` on the last layer's final
//! state.

use rand::Rng;

use crate::dataset::Label;
use crate::seed::stream_rng;

use super::{
    one_hot, sigmoid, softmax, Activation, ArchSpec, DetectorError, InitKind, Matrix, Prediction,
    TrainConfig, OUTPUT_WIDTH,
};

/// Gate parameters of one GRU layer. `U_*` maps the layer input, `W_*`
/// the previous hidden state; widths are `n x in` and `n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer {
    pub u_z: Matrix,
    pub w_z: Matrix,
    pub b_z: Vec<f64>,
    pub u_r: Matrix,
    pub w_r: Matrix,
    pub b_r: Vec<f64>,
    pub u_h: Matrix,
    pub w_h: Matrix,
    pub b_h: Vec<f64>,
}

impl GruLayer {
    fn new(n: usize, in_dim: usize, init: InitKind, rng: &mut impl Rng) -> Self {
        let mut gate = |rows, cols| {
            let mut m = Matrix::zeros(rows, cols);
            init.fill(&mut m, rng);
            m
        };
        GruLayer {
            u_z: gate(n, in_dim),
            w_z: gate(n, n),
            b_z: vec![0.0; n],
            u_r: gate(n, in_dim),
            w_r: gate(n, n),
            b_r: vec![0.0; n],
            u_h: gate(n, in_dim),
            w_h: gate(n, n),
            b_h: vec![0.0; n],
        }
    }

    pub fn width(&self) -> usize {
        self.w_z.rows
    }

    pub fn input_width(&self) -> usize {
        self.u_z.cols
    }
}

/// Gradient counterpart of [`GruLayer`].
#[derive(Debug, Clone)]
pub struct GruLayerGrads {
    pub u_z: Matrix,
    pub w_z: Matrix,
    pub b_z: Vec<f64>,
    pub u_r: Matrix,
    pub w_r: Matrix,
    pub b_r: Vec<f64>,
    pub u_h: Matrix,
    pub w_h: Matrix,
    pub b_h: Vec<f64>,
}

/// The GRU detector: stacked layers plus the softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    pub layers: Vec<GruLayer>,
    /// Classification projection, 2 x last-layer-width.
    pub head_v: Matrix,
    pub head_b: Vec<f64>,
    /// Activation applied to states passed between stacked layers.
    pub hidden_activation: Activation,
}

/// Gradients for every [`Gru`] parameter, in the same layout.
#[derive(Debug, Clone)]
pub struct GruGrads {
    pub layers: Vec<GruLayerGrads>,
    pub head_v: Matrix,
    pub head_b: Vec<f64>,
}

impl GruGrads {
    fn zeros_like(gru: &Gru) -> Self {
        GruGrads {
            layers: gru
                .layers
                .iter()
                .map(|l| GruLayerGrads {
                    u_z: Matrix::zeros(l.u_z.rows, l.u_z.cols),
                    w_z: Matrix::zeros(l.w_z.rows, l.w_z.cols),
                    b_z: vec![0.0; l.b_z.len()],
                    u_r: Matrix::zeros(l.u_r.rows, l.u_r.cols),
                    w_r: Matrix::zeros(l.w_r.rows, l.w_r.cols),
                    b_r: vec![0.0; l.b_r.len()],
                    u_h: Matrix::zeros(l.u_h.rows, l.u_h.cols),
                    w_h: Matrix::zeros(l.w_h.rows, l.w_h.cols),
                    b_h: vec![0.0; l.b_h.len()],
                })
                .collect(),
            head_v: Matrix::zeros(gru.head_v.rows, gru.head_v.cols),
            head_b: vec![0.0; gru.head_b.len()],
        }
    }

    fn scale(&mut self, factor: f64) {
        let scale_m = |m: &mut Matrix| m.data.iter_mut().for_each(|w| *w *= factor);
        let scale_v = |v: &mut [f64]| v.iter_mut().for_each(|w| *w *= factor);
        for l in &mut self.layers {
            scale_m(&mut l.u_z);
            scale_m(&mut l.w_z);
            scale_v(&mut l.b_z);
            scale_m(&mut l.u_r);
            scale_m(&mut l.w_r);
            scale_v(&mut l.b_r);
            scale_m(&mut l.u_h);
            scale_m(&mut l.w_h);
            scale_v(&mut l.b_h);
        }
        scale_m(&mut self.head_v);
        scale_v(&mut self.head_b);
    }

    pub(super) fn visit(&self, f: &mut impl FnMut(f64)) {
        for l in &self.layers {
            l.u_z.data.iter().for_each(|&w| f(w));
            l.w_z.data.iter().for_each(|&w| f(w));
            l.b_z.iter().for_each(|&w| f(w));
            l.u_r.data.iter().for_each(|&w| f(w));
            l.w_r.data.iter().for_each(|&w| f(w));
            l.b_r.iter().for_each(|&w| f(w));
            l.u_h.data.iter().for_each(|&w| f(w));
            l.w_h.data.iter().for_each(|&w| f(w));
            l.b_h.iter().for_each(|&w| f(w));
        }
        self.head_v.data.iter().for_each(|&w| f(w));
        self.head_b.iter().for_each(|&w| f(w));
    }
}

/// Per-step forward values of one layer.
struct StepCache {
    z: Vec<f64>,
    r: Vec<f64>,
    h: Vec<f64>,
    s: Vec<f64>,
}

/// Forward cache for one sample.
pub struct GruCache {
    /// `inputs[l][t]` is the vector layer `l` consumed at step `t`.
    inputs: Vec<Vec<Vec<f64>>>,
    steps: Vec<Vec<StepCache>>,
    /// Scaled dropout masks for layer outputs below the top, per step.
    masks: Vec<Vec<Vec<f64>>>,
    probs: Vec<f64>,
}

impl GruCache {
    pub fn prediction(&self) -> Prediction {
        Prediction {
            probs: [self.probs[0], self.probs[1]],
        }
    }
}

impl Gru {
    /// Freshly initialized network: gate weights from `init`, biases zero.
    /// The first layer consumes scalar steps (input width 1).
    pub fn new(arch: &ArchSpec, init: InitKind, seed: u64) -> Self {
        let mut rng = stream_rng(seed, &[0x92u64]);
        let mut layers = Vec::with_capacity(arch.hidden_layers);
        let mut in_dim = 1;
        for _ in 0..arch.hidden_layers {
            layers.push(GruLayer::new(arch.width, in_dim, init, &mut rng));
            in_dim = arch.width;
        }
        let mut head_v = Matrix::zeros(OUTPUT_WIDTH, arch.width);
        init.fill(&mut head_v, &mut rng);
        Gru {
            layers,
            head_v,
            head_b: vec![0.0; OUTPUT_WIDTH],
            hidden_activation: arch.hidden_activation,
        }
    }

    /// Widths of the stacked layers.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(GruLayer::width).collect()
    }

    /// Inference forward pass over the full sequence; dropout is identity.
    pub fn forward(&self, sequence: &[f64]) -> Result<Prediction, DetectorError> {
        Ok(self.forward_cached(sequence, 0.0, 0)?.prediction())
    }

    /// Forward pass retaining all per-step values for BPTT.
    pub fn forward_cached(
        &self,
        sequence: &[f64],
        dropout_rate: f64,
        mask_seed: u64,
    ) -> Result<GruCache, DetectorError> {
        let expected = self.layers[0].input_width();
        if expected != 1 {
            return Err(DetectorError::DimensionMismatch {
                expected: 1,
                got: expected,
            });
        }
        if sequence.is_empty() {
            return Err(DetectorError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let t_len = sequence.len();
        let n_layers = self.layers.len();
        let mut rng = stream_rng(mask_seed, &[0xd406]);
        let keep = 1.0 - dropout_rate;

        let mut inputs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_layers);
        let mut steps: Vec<Vec<StepCache>> = Vec::with_capacity(n_layers);
        let mut masks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_layers.saturating_sub(1));

        let mut layer_inputs: Vec<Vec<f64>> = sequence.iter().map(|&x| vec![x]).collect();
        for (l, layer) in self.layers.iter().enumerate() {
            let n = layer.width();
            let mut s = vec![0.0; n];
            let mut layer_steps = Vec::with_capacity(t_len);
            let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(t_len);
            for x in &layer_inputs {
                let step = self.step(layer, x, &s)?;
                s = step.s.clone();
                if l + 1 < n_layers {
                    outputs.push(s.iter().map(|&v| self.hidden_activation.apply(v)).collect());
                }
                layer_steps.push(step);
            }
            inputs.push(std::mem::take(&mut layer_inputs));
            steps.push(layer_steps);

            if l + 1 < n_layers {
                let mut layer_masks = Vec::with_capacity(t_len);
                for out in &mut outputs {
                    let mask: Vec<f64> = if dropout_rate > 0.0 {
                        (0..n)
                            .map(|_| {
                                if rng.gen_range(0.0..1.0) < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    } else {
                        vec![1.0; n]
                    };
                    for (o, m) in out.iter_mut().zip(&mask) {
                        *o *= m;
                    }
                    layer_masks.push(mask);
                }
                masks.push(layer_masks);
                layer_inputs = outputs;
            }
        }

        let final_state = &steps[n_layers - 1][t_len - 1].s;
        let mut logits = vec![0.0; OUTPUT_WIDTH];
        self.head_v.matvec(final_state, &mut logits);
        for (z, b) in logits.iter_mut().zip(&self.head_b) {
            *z += b;
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(DetectorError::NonFinite("gru logits"));
        }
        Ok(GruCache {
            inputs,
            steps,
            masks,
            probs: softmax(&logits),
        })
    }

    /// One recurrence step of one layer.
    fn step(&self, layer: &GruLayer, x: &[f64], s_prev: &[f64]) -> Result<StepCache, DetectorError> {
        if x.len() != layer.input_width() {
            return Err(DetectorError::DimensionMismatch {
                expected: layer.input_width(),
                got: x.len(),
            });
        }
        let n = layer.width();
        let mut z = vec![0.0; n];
        let mut r = vec![0.0; n];
        layer.u_z.matvec(x, &mut z);
        layer.u_r.matvec(x, &mut r);
        let mut zs = vec![0.0; n];
        let mut rs = vec![0.0; n];
        layer.w_z.matvec(s_prev, &mut zs);
        layer.w_r.matvec(s_prev, &mut rs);
        for i in 0..n {
            z[i] = sigmoid(z[i] + zs[i] + layer.b_z[i]);
            r[i] = sigmoid(r[i] + rs[i] + layer.b_r[i]);
        }
        let gated: Vec<f64> = s_prev.iter().zip(&r).map(|(&s, &ri)| s * ri).collect();
        let mut h = vec![0.0; n];
        layer.u_h.matvec(x, &mut h);
        let mut hg = vec![0.0; n];
        layer.w_h.matvec(&gated, &mut hg);
        for i in 0..n {
            h[i] = (h[i] + hg[i] + layer.b_h[i]).tanh();
        }
        let s: Vec<f64> = (0..n)
            .map(|i| (1.0 - z[i]) * h[i] + z[i] * s_prev[i])
            .collect();
        if s.iter().any(|v| !v.is_finite()) {
            return Err(DetectorError::NonFinite("gru state"));
        }
        Ok(StepCache { z, r, h, s })
    }

    /// Mean loss and gradients over a batch, BPTT through all steps.
    pub(super) fn batch_gradients(
        &self,
        batch: &[(&[f64], Label)],
        config: &TrainConfig,
        dropout_seed: u64,
    ) -> Result<(f64, GruGrads), DetectorError> {
        let mut grads = GruGrads::zeros_like(self);
        let mut total_loss = 0.0;
        for (i, (features, label)) in batch.iter().enumerate() {
            let sample_seed = crate::seed::derive_seed(dropout_seed, &[i as u64]);
            let cache = self.forward_cached(features, config.dropout_rate, sample_seed)?;
            let target = one_hot(*label);
            let (loss, dlogits) = config.loss.value_and_logit_grad(&cache.probs, &target);
            if !loss.is_finite() {
                return Err(DetectorError::NonFinite("gru loss"));
            }
            total_loss += loss;
            self.backward(&cache, &dlogits, &mut grads);
        }
        let scale = 1.0 / batch.len() as f64;
        grads.scale(scale);
        Ok((total_loss * scale, grads))
    }

    /// Accumulates one sample's gradients given the logit gradient.
    fn backward(&self, cache: &GruCache, dlogits: &[f64], grads: &mut GruGrads) {
        let n_layers = self.layers.len();
        let t_len = cache.steps[0].len();

        // Head.
        let final_state = &cache.steps[n_layers - 1][t_len - 1].s;
        grads.head_v.add_outer(dlogits, final_state);
        for (b, &d) in grads.head_b.iter_mut().zip(dlogits) {
            *b += d;
        }

        // dL/d output_t of the layer being processed, for every step.
        // For the top layer only the head contributes, via s_T directly.
        let mut upper: Vec<Vec<f64>> = vec![vec![0.0; self.layers[n_layers - 1].width()]; t_len];
        self.head_v
            .matvec_transpose_add(dlogits, &mut upper[t_len - 1]);

        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let n = layer.width();
            let in_dim = layer.input_width();
            let g = &mut grads.layers[l];
            // Gradients w.r.t. this layer's inputs, to pass below.
            let mut dx_all: Vec<Vec<f64>> = vec![vec![0.0; in_dim]; t_len];
            let mut ds_next = vec![0.0; n];

            for t in (0..t_len).rev() {
                let step = &cache.steps[l][t];
                let x = &cache.inputs[l][t];
                let zero = vec![0.0; n];
                let s_prev: &[f64] = if t == 0 { &zero } else { &cache.steps[l][t - 1].s };

                // Incoming gradient on s_t: recurrent + from above.
                let mut ds: Vec<f64> = ds_next.clone();
                if l + 1 == n_layers {
                    for (d, &u) in ds.iter_mut().zip(&upper[t]) {
                        *d += u;
                    }
                } else {
                    // Above layer saw mask * act(s_t).
                    for i in 0..n {
                        let mask = cache.masks[l][t][i];
                        if mask == 0.0 {
                            continue;
                        }
                        let act_out = self.hidden_activation.apply(step.s[i]);
                        ds[i] += upper[t][i]
                            * mask
                            * self.hidden_activation.derivative_from_output(act_out);
                    }
                }

                // s_t = (1 - z).h + z.s_prev
                let mut ds_prev = vec![0.0; n];
                let mut dah = vec![0.0; n];
                let mut daz = vec![0.0; n];
                for i in 0..n {
                    let dz = ds[i] * (s_prev[i] - step.h[i]);
                    let dh = ds[i] * (1.0 - step.z[i]);
                    ds_prev[i] += ds[i] * step.z[i];
                    dah[i] = dh * (1.0 - step.h[i] * step.h[i]);
                    daz[i] = dz * step.z[i] * (1.0 - step.z[i]);
                }

                // Candidate gate: ah = U_h x + W_h (s_prev . r) + b_h.
                let gated: Vec<f64> = s_prev.iter().zip(&step.r).map(|(&s, &r)| s * r).collect();
                g.u_h.add_outer(&dah, x);
                g.w_h.add_outer(&dah, &gated);
                for (b, &d) in g.b_h.iter_mut().zip(&dah) {
                    *b += d;
                }
                let mut dgated = vec![0.0; n];
                layer.w_h.matvec_transpose_add(&dah, &mut dgated);
                let mut dar = vec![0.0; n];
                for i in 0..n {
                    ds_prev[i] += dgated[i] * step.r[i];
                    let dr = dgated[i] * s_prev[i];
                    dar[i] = dr * step.r[i] * (1.0 - step.r[i]);
                }

                // Update gate: az = U_z x + W_z s_prev + b_z.
                g.u_z.add_outer(&daz, x);
                g.w_z.add_outer(&daz, s_prev);
                for (b, &d) in g.b_z.iter_mut().zip(&daz) {
                    *b += d;
                }
                layer.w_z.matvec_transpose_add(&daz, &mut ds_prev);

                // Reset gate: ar = U_r x + W_r s_prev + b_r.
                g.u_r.add_outer(&dar, x);
                g.w_r.add_outer(&dar, s_prev);
                for (b, &d) in g.b_r.iter_mut().zip(&dar) {
                    *b += d;
                }
                layer.w_r.matvec_transpose_add(&dar, &mut ds_prev);

                // Input gradient through all three gates.
                layer.u_h.matvec_transpose_add(&dah, &mut dx_all[t]);
                layer.u_z.matvec_transpose_add(&daz, &mut dx_all[t]);
                layer.u_r.matvec_transpose_add(&dar, &mut dx_all[t]);

                ds_next = ds_prev;
            }

            if l > 0 {
                upper = dx_all;
            }
        }
    }

    pub(super) fn visit_params_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for l in &mut self.layers {
            l.u_z.data.iter_mut().for_each(&mut *f);
            l.w_z.data.iter_mut().for_each(&mut *f);
            l.b_z.iter_mut().for_each(&mut *f);
            l.u_r.data.iter_mut().for_each(&mut *f);
            l.w_r.data.iter_mut().for_each(&mut *f);
            l.b_r.iter_mut().for_each(&mut *f);
            l.u_h.data.iter_mut().for_each(&mut *f);
            l.w_h.data.iter_mut().for_each(&mut *f);
            l.b_h.iter_mut().for_each(&mut *f);
        }
        self.head_v.data.iter_mut().for_each(&mut *f);
        self.head_b.iter_mut().for_each(&mut *f);
    }

    pub(super) fn visit_weight_rows_mut(&mut self, f: &mut impl FnMut(&mut [f64])) {
        for l in &mut self.layers {
            for m in [
                &mut l.u_z, &mut l.w_z, &mut l.u_r, &mut l.w_r, &mut l.u_h, &mut l.w_h,
            ] {
                for r in 0..m.rows {
                    f(m.row_mut(r));
                }
            }
        }
        for r in 0..self.head_v.rows {
            f(self.head_v.row_mut(r));
        }
    }
}
