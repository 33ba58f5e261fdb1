//! Fully-connected network with an extended forward pass.
//!
//! The network maps a concatenated input (x, z) of length d + K to a scalar.
//! Besides the value u(x, z), the extended pass produces the spatial gradient
//! d/dx u(x, z) restricted to the first `d` input coordinates, propagated
//! exactly through the layer recursion (no numerical approximation). The
//! reverse pass accumulates parameter gradients of any scalar built from both
//! the value and the spatial gradient, which is what a penalized variational
//! loss needs.
//!
//! Hidden layers use tanh; the output layer is affine. Parameter gradients
//! flatten in a fixed order (layer-major, weights row-major, then bias) so
//! checkpoints, optimizer state, and finite-difference checks agree entry for
//! entry.

mod loss;

pub use loss::{batch_loss_and_grad, grad_params, sample_loss};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{stream_id, RngStream};

/// Hidden-layer activation. The output layer is always affine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// Value and spatial gradient of a scalar field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEval {
    pub value: f64,
    /// Gradient with respect to the first `d` input coordinates only.
    pub spatial_grad: Vec<f64>,
}

/// Parameter-space gradient, one entry per scalar parameter.
///
/// Order: for each affine layer in turn, the weight matrix row-major, then
/// the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatGradient {
    pub values: Vec<f64>,
}

impl FlatGradient {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Weights and biases of the fully-connected network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    /// weights[l] has shape layer_sizes[l+1] x layer_sizes[l], row-major.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    // Minimum shape is [input, hidden, output]: at least one tanh layer.
    if layer_sizes.len() < 3 || layer_sizes.iter().any(|&n| n == 0) {
        return Err(Error::InvalidLayerSizes(layer_sizes.to_vec()));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::InvalidLayerSizes(layer_sizes.to_vec()));
    }
    Ok(())
}

impl MlpParams {
    /// Build from explicit weights and biases, validating the shape chain.
    pub fn new(layer_sizes: Vec<usize>, weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        validate_layer_sizes(&layer_sizes)?;
        let num_layers = layer_sizes.len() - 1;
        if weights.len() != num_layers {
            return Err(Error::DimensionMismatch {
                context: "weight layer count",
                expected: num_layers,
                got: weights.len(),
            });
        }
        if biases.len() != num_layers {
            return Err(Error::DimensionMismatch {
                context: "bias layer count",
                expected: num_layers,
                got: biases.len(),
            });
        }
        for l in 0..num_layers {
            let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
            if weights[l].len() != n_in * n_out {
                return Err(Error::DimensionMismatch {
                    context: "weight matrix entries",
                    expected: n_in * n_out,
                    got: weights[l].len(),
                });
            }
            if biases[l].len() != n_out {
                return Err(Error::DimensionMismatch {
                    context: "bias entries",
                    expected: n_out,
                    got: biases[l].len(),
                });
            }
            if weights[l].iter().chain(biases[l].iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "network parameter", sample: None });
            }
        }
        Ok(Self { layer_sizes, weights, biases, activation: Activation::Tanh })
    }

    /// All-zero network of the given shape.
    pub fn zeros(layer_sizes: Vec<usize>) -> Result<Self> {
        validate_layer_sizes(&layer_sizes)?;
        let weights = (0..layer_sizes.len() - 1)
            .map(|l| vec![0.0; layer_sizes[l] * layer_sizes[l + 1]])
            .collect();
        let biases = (0..layer_sizes.len() - 1)
            .map(|l| vec![0.0; layer_sizes[l + 1]])
            .collect();
        Ok(Self { layer_sizes, weights, biases, activation: Activation::Tanh })
    }

    /// Seeded initialization: weights uniform on (-w, w) with
    /// w = sqrt(6 / (fan_in + fan_out)), biases zero. Deterministic in `seed`.
    pub fn init(layer_sizes: Vec<usize>, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes)?;
        let mut rng = RngStream::new(seed, stream_id::INIT);
        for l in 0..params.num_layers() {
            let (n_in, n_out) = (params.layer_sizes[l], params.layer_sizes[l + 1]);
            let half_width = (6.0 / (n_in + n_out) as f64).sqrt();
            for w in params.weights[l].iter_mut() {
                *w = rng.uniform_open(-half_width, half_width);
            }
        }
        Ok(params)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Number of affine layers.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        (0..self.num_layers())
            .map(|l| self.layer_sizes[l + 1] * (self.layer_sizes[l] + 1))
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }

    /// Flatten into the documented layer-major order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.num_layers() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten) for the same shape.
    pub fn from_flat(layer_sizes: Vec<usize>, flat: &[f64]) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes)?;
        if flat.len() != params.param_count() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector",
                expected: params.param_count(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for l in 0..params.num_layers() {
            let nw = params.weights[l].len();
            params.weights[l].copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = params.biases[l].len();
            params.biases[l].copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(params)
    }

    /// Apply `update[i]` additively to parameter `i` (flat order).
    pub fn apply_update(&mut self, update: impl Fn(usize) -> f64) {
        let mut idx = 0;
        for l in 0..self.num_layers() {
            for w in self.weights[l].iter_mut() {
                *w += update(idx);
                idx += 1;
            }
            for b in self.biases[l].iter_mut() {
                *b += update(idx);
                idx += 1;
            }
        }
    }

    /// Scale the output layer (weights and bias) by `s`, which scales the
    /// realized function and its gradients by exactly `s`.
    pub fn scale_output(&mut self, s: f64) {
        let l = self.num_layers() - 1;
        for w in self.weights[l].iter_mut() {
            *w *= s;
        }
        for b in self.biases[l].iter_mut() {
            *b *= s;
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Evaluate the network at `input`.
    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        self.check_input(input)?;
        let mut ws = EvalWorkspace::new(self, 0);
        self.forward_value(input, &mut ws);
        Ok(ws.acts[self.num_layers()][0])
    }

    /// Evaluate the network and its exact gradient with respect to the first
    /// `d` input coordinates.
    pub fn forward_with_spatial_grad(&self, input: &[f64], d: usize) -> Result<NetworkEval> {
        self.check_input(input)?;
        if d == 0 || d > self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "spatial dimension",
                expected: self.input_dim(),
                got: d,
            });
        }
        let mut ws = EvalWorkspace::new(self, d);
        self.forward_extended(input, &mut ws);
        Ok(NetworkEval {
            value: ws.acts[self.num_layers()][0],
            spatial_grad: ws.jac[self.num_layers() - 1][..d].to_vec(),
        })
    }

    /// Value-only pass writing activations into `ws.acts`.
    pub(crate) fn forward_value(&self, input: &[f64], ws: &mut EvalWorkspace) {
        debug_assert_eq!(input.len(), self.input_dim());
        let num_layers = self.num_layers();
        ws.acts[0].copy_from_slice(input);
        for l in 0..num_layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let b = &self.biases[l];
            let (head, tail) = ws.acts.split_at_mut(l + 1);
            let prev = &head[l];
            let next = &mut tail[0];
            let last = l + 1 == num_layers;
            for i in 0..n_out {
                let row = &w[i * n_in..(i + 1) * n_in];
                let mut s = b[i];
                for k in 0..n_in {
                    s += row[k] * prev[k];
                }
                next[i] = if last { s } else { s.tanh() };
            }
        }
    }

    /// Extended pass: activations plus pre-activation spatial Jacobians.
    ///
    /// `ws.jac[l]` receives d(z^{l+1})/dx, shape layer_sizes[l+1] x d
    /// row-major, where z is the pre-activation of affine layer l.
    pub(crate) fn forward_extended(&self, input: &[f64], ws: &mut EvalWorkspace) {
        debug_assert_eq!(input.len(), self.input_dim());
        let d = ws.spatial_dim;
        let num_layers = self.num_layers();
        ws.acts[0].copy_from_slice(input);
        for l in 0..num_layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let b = &self.biases[l];
            let last = l + 1 == num_layers;
            {
                let (head, tail) = ws.acts.split_at_mut(l + 1);
                let prev = &head[l];
                let next = &mut tail[0];
                for i in 0..n_out {
                    let row = &w[i * n_in..(i + 1) * n_in];
                    let mut s = b[i];
                    for k in 0..n_in {
                        s += row[k] * prev[k];
                    }
                    next[i] = if last { s } else { s.tanh() };
                }
            }
            if l == 0 {
                // d(z^1)/dx is the first d columns of the first weight matrix.
                let jac = &mut ws.jac[0];
                for i in 0..n_out {
                    let row = &w[i * n_in..(i + 1) * n_in];
                    jac[i * d..(i + 1) * d].copy_from_slice(&row[..d]);
                }
            } else {
                // Post-activation Jacobian of the previous layer, then chain.
                let acts_prev = &ws.acts[l];
                {
                    let (jh, jt) = ws.jac.split_at_mut(l);
                    let jac_prev = &jh[l - 1];
                    let g_prev = &mut ws.g_prev;
                    for k in 0..n_in {
                        let dact = 1.0 - acts_prev[k] * acts_prev[k];
                        for j in 0..d {
                            g_prev[k * d + j] = dact * jac_prev[k * d + j];
                        }
                    }
                    let jac = &mut jt[0];
                    for i in 0..n_out {
                        let row = &w[i * n_in..(i + 1) * n_in];
                        let out = &mut jac[i * d..(i + 1) * d];
                        out.fill(0.0);
                        for k in 0..n_in {
                            let wk = row[k];
                            let gp = &g_prev[k * d..(k + 1) * d];
                            for j in 0..d {
                                out[j] += wk * gp[j];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Reverse pass through the extended computation.
    ///
    /// Seeds: `bar_value` is dLoss/d(value); `bar_grad`, when present, is
    /// dLoss/d(spatial_grad). Accumulates (+=) parameter adjoints into `grad`
    /// in flat order. Requires the matching forward pass to have filled `ws`.
    pub(crate) fn backward_into(
        &self,
        ws: &mut EvalWorkspace,
        bar_value: f64,
        bar_grad: Option<&[f64]>,
        grad: &mut [f64],
    ) {
        debug_assert_eq!(grad.len(), self.param_count());
        let d = ws.spatial_dim;
        let num_layers = self.num_layers();
        let with_jac = bar_grad.is_some();

        ws.bar_a.fill(0.0);
        ws.bar_a[0] = bar_value;
        if let Some(bg) = bar_grad {
            ws.bar_gz[..d].copy_from_slice(bg);
        }

        let mut offset_end = self.param_count();
        for l in (0..num_layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let last = l + 1 == num_layers;
            let block = n_out * (n_in + 1);
            let offset = offset_end - block;
            let (wgrad, bgrad) = grad[offset..offset_end].split_at_mut(n_out * n_in);

            // Adjoint of the pre-activation z^{l+1}: chain through tanh for
            // hidden layers (the second term carries the curvature of the
            // Jacobian path), identity on the output layer.
            {
                let acts_out = &ws.acts[l + 1];
                for i in 0..n_out {
                    if last {
                        ws.bar_z[i] = ws.bar_a[i];
                        if with_jac {
                            for j in 0..d {
                                ws.bar_jz[i * d + j] = ws.bar_gz[i * d + j];
                            }
                        }
                    } else {
                        let a = acts_out[i];
                        let dact = 1.0 - a * a;
                        let mut bz = dact * ws.bar_a[i];
                        if with_jac {
                            let ddact = -2.0 * a * dact;
                            let jz = &ws.jac[l][i * d..(i + 1) * d];
                            let bg = &ws.bar_gz[i * d..(i + 1) * d];
                            let mut curv = 0.0;
                            for j in 0..d {
                                curv += jz[j] * bg[j];
                                ws.bar_jz[i * d + j] = dact * bg[j];
                            }
                            bz += ddact * curv;
                        }
                        ws.bar_z[i] = bz;
                    }
                }
            }

            // Post-activation Jacobian of the input to this layer, needed for
            // the weight adjoint of the Jacobian path.
            if with_jac {
                let g_prev = &mut ws.g_prev;
                if l == 0 {
                    g_prev[..n_in * d].fill(0.0);
                    for k in 0..d.min(n_in) {
                        g_prev[k * d + k] = 1.0;
                    }
                } else {
                    let acts_prev = &ws.acts[l];
                    let jac_prev = &ws.jac[l - 1];
                    for k in 0..n_in {
                        let dact = 1.0 - acts_prev[k] * acts_prev[k];
                        for j in 0..d {
                            g_prev[k * d + j] = dact * jac_prev[k * d + j];
                        }
                    }
                }
            }

            ws.bar_a_prev[..n_in].fill(0.0);
            if with_jac {
                ws.bar_gz_prev[..n_in * d].fill(0.0);
            }
            let a_prev = &ws.acts[l];
            for i in 0..n_out {
                let bz = ws.bar_z[i];
                let w_row = &w[i * n_in..(i + 1) * n_in];
                let wg_row = &mut wgrad[i * n_in..(i + 1) * n_in];
                if with_jac {
                    let bjz = &ws.bar_jz[i * d..(i + 1) * d];
                    for k in 0..n_in {
                        let gp = &ws.g_prev[k * d..(k + 1) * d];
                        let mut s = bz * a_prev[k];
                        for j in 0..d {
                            s += bjz[j] * gp[j];
                        }
                        wg_row[k] += s;
                        ws.bar_a_prev[k] += w_row[k] * bz;
                        let bgp = &mut ws.bar_gz_prev[k * d..(k + 1) * d];
                        for j in 0..d {
                            bgp[j] += w_row[k] * bjz[j];
                        }
                    }
                } else {
                    for k in 0..n_in {
                        wg_row[k] += bz * a_prev[k];
                        ws.bar_a_prev[k] += w_row[k] * bz;
                    }
                }
                bgrad[i] += bz;
            }

            std::mem::swap(&mut ws.bar_a, &mut ws.bar_a_prev);
            if with_jac {
                std::mem::swap(&mut ws.bar_gz, &mut ws.bar_gz_prev);
            }
            offset_end = offset;
        }
    }
}

/// Reusable buffers for the extended forward/backward passes. Construct once
/// per worker and reuse across samples; all sizing comes from the network
/// shape and the spatial dimension.
#[derive(Debug, Clone)]
pub(crate) struct EvalWorkspace {
    spatial_dim: usize,
    /// acts[i] = post-activation of level i (acts[0] is the input).
    acts: Vec<Vec<f64>>,
    /// jac[l] = pre-activation spatial Jacobian of affine layer l.
    jac: Vec<Vec<f64>>,
    g_prev: Vec<f64>,
    bar_a: Vec<f64>,
    bar_a_prev: Vec<f64>,
    bar_z: Vec<f64>,
    bar_jz: Vec<f64>,
    bar_gz: Vec<f64>,
    bar_gz_prev: Vec<f64>,
}

impl EvalWorkspace {
    pub(crate) fn new(params: &MlpParams, spatial_dim: usize) -> Self {
        let sizes = &params.layer_sizes;
        let max_width = *sizes.iter().max().unwrap();
        let d = spatial_dim;
        Self {
            spatial_dim: d,
            acts: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            jac: sizes[1..].iter().map(|&n| vec![0.0; n * d.max(1)]).collect(),
            g_prev: vec![0.0; max_width * d.max(1)],
            bar_a: vec![0.0; max_width],
            bar_a_prev: vec![0.0; max_width],
            bar_z: vec![0.0; max_width],
            bar_jz: vec![0.0; max_width * d.max(1)],
            bar_gz: vec![0.0; max_width * d.max(1)],
            bar_gz_prev: vec![0.0; max_width * d.max(1)],
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.acts[self.acts.len() - 1][0]
    }

    pub(crate) fn spatial_grad(&self) -> &[f64] {
        let last = self.jac.len() - 1;
        &self.jac[last][..self.spatial_dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{max_rel_err, rel_err};

    #[test]
    fn init_rejects_bad_shapes() {
        assert!(MlpParams::init(vec![3, 1], 0).is_err());
        assert!(MlpParams::init(vec![3, 0, 1], 0).is_err());
        assert!(MlpParams::init(vec![], 0).is_err());
        assert!(MlpParams::init(vec![3, 4, 2], 0).is_err());
    }

    #[test]
    fn init_biases_zero() {
        let p = MlpParams::init(vec![3, 4, 1], 7).unwrap();
        for b in p.biases() {
            assert!(b.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn init_deterministic() {
        let a = MlpParams::init(vec![2, 8, 8, 1], 1).unwrap();
        let b = MlpParams::init(vec![2, 8, 8, 1], 1).unwrap();
        assert_eq!(a, b);
        let c = MlpParams::init(vec![2, 8, 8, 1], 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_respects_fan_bound() {
        let p = MlpParams::init(vec![2, 8, 8, 1], 1).unwrap();
        let bound = (6.0f64 / (2 + 8) as f64).sqrt();
        assert!(p.weights()[0].iter().all(|w| w.abs() <= bound));
        let bound2 = (6.0f64 / (8 + 8) as f64).sqrt();
        assert!(p.weights()[1].iter().all(|w| w.abs() <= bound2));
    }

    #[test]
    fn zero_network_evaluates_to_zero() {
        let p = MlpParams::zeros(vec![3, 4, 4, 1]).unwrap();
        assert_eq!(p.forward(&[0.3, -0.2, 0.9]).unwrap(), 0.0);
        let e = p.forward_with_spatial_grad(&[0.3, -0.2, 0.9], 2).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.spatial_grad, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_input_reaches_output_bias() {
        // With zero hidden biases every pre-activation at the origin is zero,
        // so the output is exactly the last-layer bias.
        let mut p = MlpParams::init(vec![3, 5, 5, 1], 9).unwrap();
        p.biases[2][0] = 0.37;
        assert_eq!(p.forward(&[0.0, 0.0, 0.0]).unwrap(), 0.37);
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let p = MlpParams::init(vec![3, 4, 1], 7).unwrap();
        assert!(p.forward(&[1.0, 2.0]).is_err());
        assert!(p.forward_with_spatial_grad(&[1.0, 2.0, 3.0], 4).is_err());
        assert!(p.forward_with_spatial_grad(&[1.0, 2.0, 3.0], 0).is_err());
    }

    /// Straight-line re-evaluation of the layer recursion, kept deliberately
    /// separate from the workspace implementation.
    fn forward_oracle(p: &MlpParams, input: &[f64]) -> f64 {
        let mut a: Vec<f64> = input.to_vec();
        for l in 0..p.num_layers() {
            let n_in = p.layer_sizes()[l];
            let n_out = p.layer_sizes()[l + 1];
            let mut next = vec![0.0; n_out];
            for i in 0..n_out {
                let mut s = p.biases()[l][i];
                for k in 0..n_in {
                    s += p.weights()[l][i * n_in + k] * a[k];
                }
                next[i] = if l + 1 == p.num_layers() { s } else { s.tanh() };
            }
            a = next;
        }
        a[0]
    }

    #[test]
    fn forward_matches_independent_recursion() {
        let p = MlpParams::init(vec![4, 7, 6, 1], 123).unwrap();
        let mut rng = RngStream::new(5, 0);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform_open(-2.0, 2.0)).collect();
            let got = p.forward(&x).unwrap();
            let want = forward_oracle(&p, &x);
            assert!((got - want).abs() <= 1e-14 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn spatial_grad_linear_case() {
        // Hidden layer embeds the input unchanged (identity rows, tanh'(0)=1
        // at the origin), output applies an affine map, so at x = 0 the
        // spatial gradient is exactly the first d entries of the output row.
        let d_in = 3;
        let mut weights = vec![vec![0.0; d_in * d_in], vec![0.0; d_in]];
        for i in 0..d_in {
            weights[0][i * d_in + i] = 1.0;
        }
        weights[1] = vec![0.7, -1.3, 0.25];
        let biases = vec![vec![0.0; d_in], vec![0.4]];
        let p = MlpParams::new(vec![d_in, d_in, 1], weights, biases).unwrap();
        let e = p.forward_with_spatial_grad(&[0.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(e.value, 0.4);
        assert_eq!(e.spatial_grad, vec![0.7, -1.3]);
    }

    #[test]
    fn spatial_grad_matches_finite_differences() {
        let p = MlpParams::init(vec![5, 8, 8, 1], 21).unwrap();
        let mut rng = RngStream::new(77, 0);
        for _ in 0..10 {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform_open(-1.0, 1.0)).collect();
            let d = 3;
            let got = p.forward_with_spatial_grad(&x, d).unwrap();
            assert_eq!(got.value, p.forward(&x).unwrap());
            let fd = crate::gradcheck::fd_spatial_grad(&p, &x, d).unwrap();
            for j in 0..d {
                assert!(
                    rel_err(got.spatial_grad[j], fd[j]) <= 1e-6,
                    "component {j}: {} vs {}",
                    got.spatial_grad[j],
                    fd[j]
                );
            }
        }
    }

    #[test]
    fn full_input_gradient_via_backward_matches_fd() {
        // d equal to the full input width exercises the Jacobian path through
        // every coordinate.
        let p = MlpParams::init(vec![4, 6, 6, 1], 33).unwrap();
        let x = [0.3, -0.8, 0.1, 0.55];
        let got = p.forward_with_spatial_grad(&x, 4).unwrap();
        let fd = crate::gradcheck::fd_spatial_grad(&p, &x, 4).unwrap();
        assert!(max_rel_err(&got.spatial_grad, &fd) <= 1e-6);
    }

    #[test]
    fn flatten_round_trips() {
        let p = MlpParams::init(vec![3, 5, 4, 1], 3).unwrap();
        let flat = p.flatten();
        assert_eq!(flat.len(), p.param_count());
        let q = MlpParams::from_flat(vec![3, 5, 4, 1], &flat).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn scale_output_scales_value_and_grad() {
        let p = MlpParams::init(vec![3, 6, 1], 11).unwrap();
        let mut q = p.clone();
        q.scale_output(2.0);
        let x = [0.2, -0.4, 0.6];
        let ep = p.forward_with_spatial_grad(&x, 3).unwrap();
        let eq = q.forward_with_spatial_grad(&x, 3).unwrap();
        assert_eq!(eq.value, 2.0 * ep.value);
        for j in 0..3 {
            assert_eq!(eq.spatial_grad[j], 2.0 * ep.spatial_grad[j]);
        }
    }
}
