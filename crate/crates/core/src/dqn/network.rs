use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::Rng;

use crate::error::{usage, Error, Result};

/// Layer shapes of a shared-trunk two-head network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub k_yaw: usize,
    pub k_pitch: usize,
}

impl Architecture {
    pub fn new(input: usize, hidden: Vec<usize>, k_yaw: usize, k_pitch: usize) -> Result<Self> {
        if input == 0 || k_yaw == 0 || k_pitch == 0 || hidden.contains(&0) {
            return usage("network layer sizes must be positive");
        }
        Ok(Self {
            input,
            hidden,
            k_yaw,
            k_pitch,
        })
    }

    /// Width of the last trunk layer (the input when the trunk is empty).
    pub fn trunk_out(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input)
    }

    /// `(rows, cols)` of every weight matrix in storage order: trunk layers,
    /// then the yaw head, then the pitch head.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden.len() + 2);
        let mut fan_in = self.input;
        for &h in &self.hidden {
            shapes.push((h, fan_in));
            fan_in = h;
        }
        shapes.push((self.k_yaw, fan_in));
        shapes.push((self.k_pitch, fan_in));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }

    /// Offsets of (weights, bias) for every layer. Weights are column-major.
    pub(crate) fn offsets(&self) -> Vec<(usize, usize)> {
        let mut at = 0;
        self.layer_shapes()
            .iter()
            .map(|&(r, c)| {
                let w = at;
                let b = w + r * c;
                at = b + r;
                (w, b)
            })
            .collect()
    }
}

/// Shared-trunk MLP with ReLU hidden layers and one linear head per rate
/// axis. All parameters live in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    arch: Architecture,
    params: Vec<f64>,
}

/// Activations kept from a batch forward pass for back-propagation.
pub(crate) struct ForwardCache {
    /// Input followed by every post-activation trunk output; columns are samples.
    pub layers: Vec<DMatrix<f64>>,
    pub q_yaw: DMatrix<f64>,
    pub q_pitch: DMatrix<f64>,
}

impl QNetwork {
    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.param_count();
        Self { arch, params: vec![0.0; n] }
    }

    /// Uniform fan-in initialisation: weights and biases in ±1/√fan_in.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut params = Vec::with_capacity(arch.param_count());
        for (rows, cols) in arch.layer_shapes() {
            let bound = 1.0 / (cols as f64).sqrt();
            for _ in 0..rows * cols + rows {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self { arch, params }
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return usage(format!("expected {} parameters, got {}", arch.param_count(), params.len()));
        }
        Ok(Self { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn weights(&self, layer: usize) -> (DMatrixView<'_, f64>, DMatrixView<'_, f64>) {
        let (rows, cols) = self.arch.layer_shapes()[layer];
        let (w, b) = self.arch.offsets()[layer];
        (
            DMatrixView::from_slice(&self.params[w..w + rows * cols], rows, cols),
            DMatrixView::from_slice(&self.params[b..b + rows], rows, 1),
        )
    }

    fn affine(&self, layer: usize, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (w, b) = self.weights(layer);
        let mut z = w * x;
        for mut col in z.column_iter_mut() {
            col += &b;
        }
        z
    }

    /// Forward pass over a batch whose columns are input vectors.
    pub(crate) fn forward_cached(&self, x: DMatrix<f64>) -> ForwardCache {
        let n_trunk = self.arch.hidden.len();
        let mut layers = Vec::with_capacity(n_trunk + 1);
        layers.push(x);
        for l in 0..n_trunk {
            let mut z = self.affine(l, &layers[l]);
            z.apply(|v| *v = v.max(0.0));
            layers.push(z);
        }
        let feat = &layers[n_trunk];
        let q_yaw = self.affine(n_trunk, feat);
        let q_pitch = self.affine(n_trunk + 1, feat);
        ForwardCache { layers, q_yaw, q_pitch }
    }

    pub(crate) fn stack(&self, inputs: &[&[f64]]) -> Result<DMatrix<f64>> {
        let n = self.arch.input;
        if let Some(bad) = inputs.iter().find(|s| s.len() != n) {
            return usage(format!("network input has {} values, expected {n}", bad.len()));
        }
        Ok(DMatrix::from_iterator(n, inputs.len(), inputs.iter().flat_map(|s| s.iter().copied())))
    }

    /// Q-values of both heads for one state.
    pub fn forward(&self, s: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let cache = self.forward_cached(self.stack(&[s])?);
        Ok((cache.q_yaw.as_slice().to_vec(), cache.q_pitch.as_slice().to_vec()))
    }

    /// Q-values for a batch; columns of the returned matrices are samples.
    pub fn forward_batch(&self, inputs: &[&[f64]]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let cache = self.forward_cached(self.stack(inputs)?);
        Ok((cache.q_yaw, cache.q_pitch))
    }

    /// Gradient of ½·mean_i[(Q_yaw(s_i, a_i) − y_i)² + (Q_pitch(s_i, b_i) − z_i)²]
    /// with respect to the flat parameters, plus the loss itself.
    pub fn loss_gradient(&self, inputs: &[&[f64]], actions: &[(usize, usize)], targets: &[(f64, f64)]) -> Result<(f64, Vec<f64>)> {
        let n = inputs.len();
        if n == 0 || actions.len() != n || targets.len() != n {
            return usage("batch, actions and targets must be non-empty and aligned");
        }
        if actions.iter().any(|&(a, b)| a >= self.arch.k_yaw || b >= self.arch.k_pitch) {
            return usage("action index outside the head size");
        }
        let cache = self.forward_cached(self.stack(inputs)?);
        let scale = 1.0 / n as f64;
        let mut d_yaw = DMatrix::zeros(self.arch.k_yaw, n);
        let mut d_pitch = DMatrix::zeros(self.arch.k_pitch, n);
        let mut loss = 0.0;
        for (i, (&(a, b), &(ty, tp))) in actions.iter().zip(targets).enumerate() {
            let ey = cache.q_yaw[(a, i)] - ty;
            let ep = cache.q_pitch[(b, i)] - tp;
            loss += 0.5 * (ey * ey + ep * ep);
            d_yaw[(a, i)] = ey * scale;
            d_pitch[(b, i)] = ep * scale;
        }
        loss *= scale;
        if !loss.is_finite() {
            return Err(Error::NonFinite { quantity: "TD loss" });
        }

        let mut grad = vec![0.0; self.params.len()];
        let offsets = self.arch.offsets();
        let shapes = self.arch.layer_shapes();
        let n_trunk = self.arch.hidden.len();
        let feat = &cache.layers[n_trunk];

        let write_layer = |layer: usize, dz: &DMatrix<f64>, x: &DMatrix<f64>, grad: &mut [f64]| {
            let (rows, cols) = shapes[layer];
            let (w, b) = offsets[layer];
            let dw = dz * x.transpose();
            for (g, v) in grad[w..w + rows * cols].iter_mut().zip(dw.as_slice()) {
                *g += v;
            }
            let db: DVector<f64> = dz.column_sum();
            for (g, v) in grad[b..b + rows].iter_mut().zip(db.iter()) {
                *g += v;
            }
        };

        write_layer(n_trunk, &d_yaw, feat, &mut grad);
        write_layer(n_trunk + 1, &d_pitch, feat, &mut grad);
        let (wy, _) = self.weights(n_trunk);
        let (wp, _) = self.weights(n_trunk + 1);
        let mut delta = wy.transpose() * &d_yaw + wp.transpose() * &d_pitch;
        for l in (0..n_trunk).rev() {
            // ReLU derivative from the post-activation value.
            delta.zip_apply(&cache.layers[l + 1], |d, a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            });
            write_layer(l, &delta, &cache.layers[l], &mut grad);
            if l > 0 {
                let (w, _) = self.weights(l);
                delta = w.transpose() * &delta;
            }
        }
        Ok((loss, grad))
    }
}

/// Greedy index with ties resolved toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
