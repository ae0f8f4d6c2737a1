//! Feedforward multilayer perceptrons and NARX regressor construction: the
//! function approximators for the plant model and the controller.
//!
//! Hidden layers use tanh, the output layer is linear. Parameters flatten in
//! a fixed order — for each layer, weights row-major then biases — and the
//! parameter Jacobian columns follow that same order.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Pcg;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Multilayer perceptron. `layer_sizes` = input, hidden..., output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix<T>>,
    biases: Vec<Vec<T>>,
}

impl<T: Real> Mlp<T> {
    /// Weights drawn uniformly in +-1/sqrt(fan_in), biases zero,
    /// deterministic in the seed.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::BadShape("need at least input and output layers".into()));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::BadShape("zero-width layer".into()));
        }
        let mut rng = Pcg::new(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 1..layer_sizes.len() {
            let fan_in = layer_sizes[l - 1];
            let bound = T::one() / T::of_usize(fan_in).sqrt();
            weights.push(Matrix::from_fn(layer_sizes[l], fan_in, |_, _| {
                rng.uniform_in(-bound, bound)
            }));
            biases.push(vec![T::zero(); layer_sizes[l]]);
        }
        Ok(Mlp { layer_sizes: layer_sizes.to_vec(), weights, biases })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().zip(&self.biases).map(|(w, b)| w.rows() * w.cols() + b.len()).sum()
    }

    /// Parameters in flattening order: per layer, weights row-major then
    /// biases.
    pub fn flatten(&self) -> Vec<T> {
        let mut theta = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            theta.extend_from_slice(w.data());
            theta.extend_from_slice(b);
        }
        theta
    }

    /// Inverse of [`Mlp::flatten`].
    pub fn unflatten(&mut self, theta: &[T]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::BadShape(format!(
                "{} parameters for a network with {}",
                theta.len(),
                self.param_count()
            )));
        }
        let mut at = 0;
        for l in 0..self.n_layers() {
            let (rows, cols) = (self.weights[l].rows(), self.weights[l].cols());
            self.weights[l] = Matrix::new(rows, cols, theta[at..at + rows * cols].to_vec());
            at += rows * cols;
            self.biases[l] = theta[at..at + rows].to_vec();
            at += rows;
        }
        Ok(())
    }

    fn forward_cached(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        if x.len() != self.n_inputs() {
            return Err(Error::BadShape(format!(
                "input length {} for network input size {}",
                x.len(),
                self.n_inputs()
            )));
        }
        // activations[0] = x, activations[l] = layer l output (post tanh for
        // hidden layers, linear for the last)
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let mut z = self.weights[l].matvec(acts.last().unwrap());
            for (zi, bi) in z.iter_mut().zip(&self.biases[l]) {
                *zi = *zi + *bi;
            }
            if l + 1 < self.n_layers() {
                for zi in z.iter_mut() {
                    *zi = zi.tanh();
                }
            }
            acts.push(z);
        }
        Ok(acts)
    }

    /// `y = W_L tanh(... tanh(W_1 x + b_1) ...) + b_L`.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(x)?.pop().unwrap())
    }

    /// Exact reverse-mode derivatives of `forward` at `(theta, x)`:
    /// `(dy/dtheta, dy/dx)` with parameter columns in flattening order.
    pub fn jacobians(&self, x: &[T]) -> Result<(Matrix<T>, Matrix<T>)> {
        let acts = self.forward_cached(x)?;
        let n_out = self.n_outputs();
        let n_layers = self.n_layers();
        let mut jp = Matrix::zeros(n_out, self.param_count());
        let mut jx = Matrix::zeros(n_out, self.n_inputs());

        // parameter offsets per layer
        let mut offsets = Vec::with_capacity(n_layers);
        let mut at = 0;
        for l in 0..n_layers {
            offsets.push(at);
            at += self.weights[l].rows() * self.weights[l].cols() + self.biases[l].len();
        }

        for out in 0..n_out {
            // delta at the linear output layer
            let mut delta = vec![T::zero(); n_out];
            delta[out] = T::one();
            for l in (0..n_layers).rev() {
                let input_act = &acts[l];
                let w = &self.weights[l];
                let base = offsets[l];
                let cols = w.cols();
                // dW and db for this layer
                for r in 0..w.rows() {
                    let dr = delta[r];
                    if dr != T::zero() {
                        for c in 0..cols {
                            jp[(out, base + r * cols + c)] = dr * input_act[c];
                        }
                    }
                    jp[(out, base + w.rows() * cols + r)] = dr;
                }
                // propagate to the layer input
                let mut prev = vec![T::zero(); cols];
                for r in 0..w.rows() {
                    let dr = delta[r];
                    if dr == T::zero() {
                        continue;
                    }
                    for c in 0..cols {
                        prev[c] = prev[c] + w[(r, c)] * dr;
                    }
                }
                if l > 0 {
                    // input_act are tanh outputs: tanh' = 1 - a^2
                    for (p, &a) in prev.iter_mut().zip(input_act.iter()) {
                        *p = *p * (T::one() - a * a);
                    }
                    delta = prev;
                } else {
                    for c in 0..cols {
                        jx[(out, c)] = prev[c];
                    }
                }
            }
        }
        Ok((jp, jx))
    }

    pub fn jacobian_params(&self, x: &[T]) -> Result<Matrix<T>> {
        Ok(self.jacobians(x)?.0)
    }

    pub fn jacobian_input(&self, x: &[T]) -> Result<Matrix<T>> {
        Ok(self.jacobians(x)?.1)
    }

    pub fn to_json(&self) -> MlpJson {
        MlpJson {
            layer_sizes: self.layer_sizes.clone(),
            weights: self.weights.iter().map(|w| w.data().iter().map(|x| x.as_f64()).collect()).collect(),
            biases: self.biases.iter().map(|b| b.iter().map(|x| x.as_f64()).collect()).collect(),
        }
    }

    pub fn from_json(j: &MlpJson) -> Result<Self> {
        let mut mlp = Mlp::init(&j.layer_sizes, 0)?;
        if j.weights.len() != mlp.n_layers() || j.biases.len() != mlp.n_layers() {
            return Err(Error::BadShape("layer count mismatch in model JSON".into()));
        }
        for l in 0..mlp.n_layers() {
            let (rows, cols) = (mlp.weights[l].rows(), mlp.weights[l].cols());
            if j.weights[l].len() != rows * cols || j.biases[l].len() != rows {
                return Err(Error::BadShape("weight block size mismatch in model JSON".into()));
            }
            mlp.weights[l] = Matrix::new(rows, cols, j.weights[l].iter().map(|&x| T::c(x)).collect());
            mlp.biases[l] = j.biases[l].iter().map(|&x| T::c(x)).collect();
        }
        Ok(mlp)
    }
}

/// Serialized MLP: weights row-major per layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpJson {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// NARX lag structure: regressor
/// `phi(t) = (y(t-1)..y(t-na), u(t-nk)..u(t-nk-nb+1))`, channels interleaved
/// channel-major within each lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarxConfig {
    pub na: usize,
    pub nb: usize,
    pub nk: usize,
    pub n_outputs: usize,
    pub n_inputs: usize,
}

impl NarxConfig {
    pub fn new(na: usize, nb: usize, nk: usize, n_outputs: usize, n_inputs: usize) -> Result<Self> {
        if nb < 1 {
            return Err(Error::BadShape("nb must be >= 1".into()));
        }
        if n_outputs == 0 || n_inputs == 0 {
            return Err(Error::BadShape("channel counts must be >= 1".into()));
        }
        Ok(NarxConfig { na, nb, nk, n_outputs, n_inputs })
    }

    pub fn regressor_len(&self) -> usize {
        self.na * self.n_outputs + self.nb * self.n_inputs
    }

    /// Earliest time index with a full regressor.
    pub fn min_t(&self) -> usize {
        self.na.max(self.nk + self.nb - 1)
    }
}

/// Assemble the NARX regressor at time `t` from output and input histories
/// (one row per step).
pub fn build_regressor<T: Real>(
    y_hist: &Matrix<T>,
    u_hist: &Matrix<T>,
    t: usize,
    cfg: &NarxConfig,
) -> Result<Vec<T>> {
    assert_eq!(y_hist.cols(), cfg.n_outputs, "output channel count");
    assert_eq!(u_hist.cols(), cfg.n_inputs, "input channel count");
    if t < cfg.min_t() {
        return Err(Error::InsufficientHistory { need: cfg.min_t(), got: t });
    }
    // latest indices touched: y at t-1, u at t-nk (may equal t when nk = 0)
    if t > y_hist.rows() || t.saturating_sub(cfg.nk) >= u_hist.rows() {
        return Err(Error::InsufficientHistory { need: t + 1, got: y_hist.rows().min(u_hist.rows()) });
    }
    let mut phi = Vec::with_capacity(cfg.regressor_len());
    for lag in 1..=cfg.na {
        phi.extend_from_slice(y_hist.row(t - lag));
    }
    for j in 0..cfg.nb {
        phi.extend_from_slice(u_hist.row(t - cfg.nk - j));
    }
    Ok(phi)
}

/// Per-channel affine normalization, std floored at 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Real> Normalizer<T> {
    pub fn identity(n: usize) -> Self {
        Normalizer { mean: vec![T::zero(); n], std: vec![T::one(); n] }
    }

    /// Fit on the rows `range` of `data`.
    pub fn fit(data: &Matrix<T>, range: std::ops::Range<usize>) -> Self {
        let n = range.len().max(1);
        let cols = data.cols();
        let mut mean = vec![T::zero(); cols];
        for k in range.clone() {
            for (j, m) in mean.iter_mut().enumerate() {
                *m = *m + data[(k, j)];
            }
        }
        for m in mean.iter_mut() {
            *m = *m / T::of_usize(n);
        }
        let mut var = vec![T::zero(); cols];
        for k in range {
            for (j, v) in var.iter_mut().enumerate() {
                let d = data[(k, j)] - mean[j];
                *v = *v + d * d;
            }
        }
        let floor = T::c(1e-12);
        let std = var.iter().map(|&v| (v / T::of_usize(n)).sqrt().max(floor)).collect();
        Normalizer { mean, std }
    }

    /// Scale-only variant: zero means, channel spreads kept.
    pub fn scale_only(&self) -> Self {
        Normalizer { mean: vec![T::zero(); self.mean.len()], std: self.std.clone() }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn normalize(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(self.mean.iter().zip(&self.std)).map(|(&v, (&m, &s))| (v - m) / s).collect()
    }

    pub fn denormalize(&self, z: &[T]) -> Vec<T> {
        z.iter().zip(self.mean.iter().zip(&self.std)).map(|(&v, (&m, &s))| v * s + m).collect()
    }

    pub fn to_json(&self) -> NormalizerJson {
        NormalizerJson {
            mean: self.mean.iter().map(|x| x.as_f64()).collect(),
            std: self.std.iter().map(|x| x.as_f64()).collect(),
        }
    }

    pub fn from_json(j: &NormalizerJson) -> Self {
        Normalizer {
            mean: j.mean.iter().map(|&x| T::c(x)).collect(),
            std: j.std.iter().map(|&x| T::c(x)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizerJson {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Divergence guard for free-run prediction.
const FREE_RUN_LIMIT: f64 = 1e9;

/// An MLP over the NARX regressor with per-channel normalization of the
/// output and input histories.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxModel<T> {
    pub mlp: Mlp<T>,
    pub cfg: NarxConfig,
    pub y_norm: Normalizer<T>,
    pub u_norm: Normalizer<T>,
}

impl<T: Real> NarxModel<T> {
    pub fn new(mlp: Mlp<T>, cfg: NarxConfig, y_norm: Normalizer<T>, u_norm: Normalizer<T>) -> Result<Self> {
        if mlp.n_inputs() != cfg.regressor_len() || mlp.n_outputs() != cfg.n_outputs {
            return Err(Error::BadShape(format!(
                "network {}->{} does not fit regressor {} -> {} outputs",
                mlp.n_inputs(),
                mlp.n_outputs(),
                cfg.regressor_len(),
                cfg.n_outputs
            )));
        }
        if y_norm.len() != cfg.n_outputs || u_norm.len() != cfg.n_inputs {
            return Err(Error::BadShape("normalizer channel counts do not match".into()));
        }
        Ok(NarxModel { mlp, cfg, y_norm, u_norm })
    }

    /// Per-slot normalization of the full regressor, in regressor order.
    pub fn phi_norm(&self) -> Normalizer<T> {
        let mut mean = Vec::with_capacity(self.cfg.regressor_len());
        let mut std = Vec::with_capacity(self.cfg.regressor_len());
        for _ in 0..self.cfg.na {
            mean.extend_from_slice(&self.y_norm.mean);
            std.extend_from_slice(&self.y_norm.std);
        }
        for _ in 0..self.cfg.nb {
            mean.extend_from_slice(&self.u_norm.mean);
            std.extend_from_slice(&self.u_norm.std);
        }
        Normalizer { mean, std }
    }

    /// Prediction from a raw (unnormalized) regressor.
    pub fn predict_raw(&self, phi_raw: &[T]) -> Result<Vec<T>> {
        let z = self.phi_norm().normalize(phi_raw);
        Ok(self.y_norm.denormalize(&self.mlp.forward(&z)?))
    }

    /// `d y_raw / d phi_raw` at one regressor, chain rule through both
    /// normalizations.
    pub fn jacobian_input_raw(&self, phi_raw: &[T]) -> Result<Matrix<T>> {
        let pn = self.phi_norm();
        let z = pn.normalize(phi_raw);
        let j = self.mlp.jacobian_input(&z)?;
        Ok(Matrix::from_fn(j.rows(), j.cols(), |i, c| {
            j[(i, c)] * self.y_norm.std[i] / pn.std[c]
        }))
    }

    /// One-step (series-parallel) prediction at time `t` from measured
    /// histories.
    pub fn one_step(&self, y_hist: &Matrix<T>, u_hist: &Matrix<T>, t: usize) -> Result<Vec<T>> {
        let phi = build_regressor(y_hist, u_hist, t, &self.cfg)?;
        self.predict_raw(&phi)
    }

    /// Free-run (parallel) prediction: predictions are fed back as the
    /// output history. Rows `0..min_t` of the result are copied from
    /// `y_init`.
    pub fn free_run(&self, u: &Matrix<T>, y_init: &Matrix<T>) -> Result<Matrix<T>> {
        let n = u.rows();
        let start = self.cfg.min_t();
        if y_init.rows() < start {
            return Err(Error::InsufficientHistory { need: start, got: y_init.rows() });
        }
        let limit = T::c(FREE_RUN_LIMIT);
        let mut y_hat = Matrix::zeros(n, self.cfg.n_outputs);
        for k in 0..start.min(n) {
            for j in 0..self.cfg.n_outputs {
                y_hat[(k, j)] = y_init[(k, j)];
            }
        }
        for t in start..n {
            let pred = {
                let phi = build_regressor(&y_hat, u, t, &self.cfg)?;
                self.predict_raw(&phi)?
            };
            for (j, &p) in pred.iter().enumerate() {
                if p.abs() > limit {
                    return Err(Error::Overflow(format!("free run diverged at step {t}")));
                }
                y_hat[(t, j)] = p;
            }
        }
        Ok(y_hat)
    }
}
