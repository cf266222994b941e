//! Multi-layer perceptron with manual backprop.

use rand::Rng;

use crate::dataset::Label;
use crate::seed::stream_rng;

use super::{
    one_hot, softmax, Activation, ArchSpec, DetectorError, InitKind, Matrix, Prediction,
    TrainConfig, INPUT_WIDTH, OUTPUT_WIDTH,
};

/// One dense layer: `out = weights * in + bias`, weights are out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn new(out_dim: usize, in_dim: usize, init: InitKind, rng: &mut impl Rng) -> Self {
        let mut weights = Matrix::zeros(out_dim, in_dim);
        init.fill(&mut weights, rng);
        DenseLayer {
            weights,
            bias: vec![0.0; out_dim],
        }
    }
}

/// Gradient counterpart of [`DenseLayer`].
#[derive(Debug, Clone)]
pub struct DenseGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// The MLP detector: input 48, `hidden_layers` x `width` hidden units,
/// softmax output of width 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// Hidden layers followed by the output layer.
    pub layers: Vec<DenseLayer>,
    pub hidden_activation: Activation,
}

/// Gradients for every [`Mlp`] parameter, in the same layout.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrad>,
}

impl MlpGrads {
    fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            layers: mlp
                .layers
                .iter()
                .map(|l| DenseGrad {
                    weights: Matrix::zeros(l.weights.rows, l.weights.cols),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for w in &mut layer.weights.data {
                *w *= factor;
            }
            for b in &mut layer.bias {
                *b *= factor;
            }
        }
    }

    pub(super) fn visit(&self, f: &mut impl FnMut(f64)) {
        for layer in &self.layers {
            for &w in &layer.weights.data {
                f(w);
            }
            for &b in &layer.bias {
                f(b);
            }
        }
    }
}

/// Forward-pass cache: post-activation (and post-dropout) values per layer.
pub struct MlpCache {
    input: Vec<f64>,
    /// Hidden outputs after activation and dropout, one per hidden layer.
    hidden: Vec<Vec<f64>>,
    /// Dropout keep-masks (already scaled), parallel to `hidden`.
    masks: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl MlpCache {
    pub fn prediction(&self) -> Prediction {
        Prediction {
            probs: [self.probs[0], self.probs[1]],
        }
    }
}

impl Mlp {
    /// Freshly initialized network: weights from `init`, biases zero.
    pub fn new(arch: &ArchSpec, init: InitKind, seed: u64) -> Self {
        let mut rng = stream_rng(seed, &[0x317b]);
        let mut sizes = vec![INPUT_WIDTH];
        sizes.extend(std::iter::repeat_n(arch.width, arch.hidden_layers));
        sizes.push(OUTPUT_WIDTH);
        let layers = sizes
            .windows(2)
            .map(|pair| DenseLayer::new(pair[1], pair[0], init, &mut rng))
            .collect();
        Mlp {
            layers,
            hidden_activation: arch.hidden_activation,
        }
    }

    /// Layer widths including input and output.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weights.cols];
        sizes.extend(self.layers.iter().map(|l| l.weights.rows));
        sizes
    }

    /// Inference forward pass; dropout is identity.
    pub fn forward(&self, x: &[f64]) -> Result<Prediction, DetectorError> {
        Ok(self.forward_cached(x, 0.0, 0)?.prediction())
    }

    /// Forward pass retaining activations; dropout applied to hidden
    /// activations when `dropout_rate > 0`.
    pub fn forward_cached(
        &self,
        x: &[f64],
        dropout_rate: f64,
        mask_seed: u64,
    ) -> Result<MlpCache, DetectorError> {
        let expected = self.layers[0].weights.cols;
        if x.len() != expected {
            return Err(DetectorError::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        let mut rng = stream_rng(mask_seed, &[0xd409]);
        let keep = 1.0 - dropout_rate;
        let n_hidden = self.layers.len() - 1;

        let mut hidden = Vec::with_capacity(n_hidden);
        let mut masks = Vec::with_capacity(n_hidden);
        let mut current = x.to_vec();
        for layer in &self.layers[..n_hidden] {
            let mut pre = vec![0.0; layer.weights.rows];
            layer.weights.matvec(&current, &mut pre);
            for (p, b) in pre.iter_mut().zip(&layer.bias) {
                *p = self.hidden_activation.apply(*p + b);
            }
            let mask: Vec<f64> = if dropout_rate > 0.0 {
                (0..pre.len())
                    .map(|_| {
                        if rng.gen_range(0.0..1.0) < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect()
            } else {
                vec![1.0; pre.len()]
            };
            for (p, m) in pre.iter_mut().zip(&mask) {
                *p *= m;
            }
            if pre.iter().any(|v| !v.is_finite()) {
                return Err(DetectorError::NonFinite("mlp hidden activation"));
            }
            hidden.push(pre.clone());
            masks.push(mask);
            current = pre;
        }

        let out_layer = self.layers.last().unwrap();
        let mut logits = vec![0.0; OUTPUT_WIDTH];
        out_layer.weights.matvec(&current, &mut logits);
        for (z, b) in logits.iter_mut().zip(&out_layer.bias) {
            *z += b;
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(DetectorError::NonFinite("mlp logits"));
        }
        Ok(MlpCache {
            input: x.to_vec(),
            hidden,
            masks,
            probs: softmax(&logits),
        })
    }

    /// Mean loss and gradients over a batch.
    pub(super) fn batch_gradients(
        &self,
        batch: &[(&[f64], Label)],
        config: &TrainConfig,
        dropout_seed: u64,
    ) -> Result<(f64, MlpGrads), DetectorError> {
        let mut grads = MlpGrads::zeros_like(self);
        let mut total_loss = 0.0;
        for (i, (features, label)) in batch.iter().enumerate() {
            let sample_seed = crate::seed::derive_seed(dropout_seed, &[i as u64]);
            let cache = self.forward_cached(features, config.dropout_rate, sample_seed)?;
            let target = one_hot(*label);
            let (loss, dlogits) = config.loss.value_and_logit_grad(&cache.probs, &target);
            if !loss.is_finite() {
                return Err(DetectorError::NonFinite("mlp loss"));
            }
            total_loss += loss;
            self.backward(&cache, &dlogits, &mut grads);
        }
        let scale = 1.0 / batch.len() as f64;
        grads.scale(scale);
        Ok((total_loss * scale, grads))
    }

    /// Accumulates one sample's gradients given the logit gradient.
    fn backward(&self, cache: &MlpCache, dlogits: &[f64], grads: &mut MlpGrads) {
        let n_hidden = self.layers.len() - 1;
        let out_idx = n_hidden;
        let last_hidden: &[f64] = if n_hidden == 0 {
            &cache.input
        } else {
            &cache.hidden[n_hidden - 1]
        };

        grads.layers[out_idx].weights.add_outer(dlogits, last_hidden);
        for (b, &d) in grads.layers[out_idx].bias.iter_mut().zip(dlogits) {
            *b += d;
        }

        // Gradient with respect to the current layer's (post-dropout) output.
        let mut dout = vec![0.0; last_hidden.len()];
        self.layers[out_idx]
            .weights
            .matvec_transpose_add(dlogits, &mut dout);

        for l in (0..n_hidden).rev() {
            // Through dropout, then the activation.
            let mut dpre = vec![0.0; cache.hidden[l].len()];
            for (j, dp) in dpre.iter_mut().enumerate() {
                let mask = cache.masks[l][j];
                if mask == 0.0 {
                    continue;
                }
                // hidden[l][j] is post-dropout; undo the scale to get the
                // activation output the derivative needs.
                let act_out = cache.hidden[l][j] / mask;
                *dp = dout[j] * mask * self.hidden_activation.derivative_from_output(act_out);
            }
            let below: &[f64] = if l == 0 { &cache.input } else { &cache.hidden[l - 1] };
            grads.layers[l].weights.add_outer(&dpre, below);
            for (b, &d) in grads.layers[l].bias.iter_mut().zip(&dpre) {
                *b += d;
            }
            if l > 0 {
                dout = vec![0.0; below.len()];
                self.layers[l].weights.matvec_transpose_add(&dpre, &mut dout);
            }
        }
    }

    pub(super) fn visit_params_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for layer in &mut self.layers {
            for w in &mut layer.weights.data {
                f(w);
            }
            for b in &mut layer.bias {
                f(b);
            }
        }
    }

    pub(super) fn visit_weight_rows_mut(&mut self, f: &mut impl FnMut(&mut [f64])) {
        for layer in &mut self.layers {
            for r in 0..layer.weights.rows {
                f(layer.weights.row_mut(r));
            }
        }
    }
}
