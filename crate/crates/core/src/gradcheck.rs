//! Finite-difference verification of the analytic gradients.
//!
//! These checks derive derivatives from loss *values* only, so they are
//! independent of the reverse-mode path they validate. The same routines back
//! the `gradcheck` CLI subcommand and the test suites.

use crate::error::Result;
use crate::gradnet::{grad_params, sample_loss, MlpParams};
use crate::problems::{sample_batch, Batch, BatchStreams, ProblemSpec};

/// Relative error with a small absolute floor for near-zero entries.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Componentwise maximum of [`rel_err`] over two equal-length slices.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch in max_rel_err");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| rel_err(x, y))
        .fold(0.0, f64::max)
}

/// Central finite differences of the network value with respect to the first
/// `d` input coordinates, step 1e-5 * max(1, |x_i|).
pub fn fd_spatial_grad(params: &MlpParams, input: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; d];
    let mut x = input.to_vec();
    for (j, g) in grad.iter_mut().enumerate() {
        let h = 1e-5 * input[j].abs().max(1.0);
        x[j] = input[j] + h;
        let fp = params.forward(&x)?;
        x[j] = input[j] - h;
        let fm = params.forward(&x)?;
        x[j] = input[j];
        *g = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Mean of [`sample_loss`] over a batch, the quantity whose parameter
/// gradient `grad_params` computes.
pub fn batch_mean_loss(problem: &ProblemSpec, params: &MlpParams, batch: &Batch) -> Result<f64> {
    let mut total = 0.0;
    for m in 0..batch.len() {
        let s = batch.boundary.as_ref().map(|b| b[m].as_slice());
        total += sample_loss(problem, params, &batch.interior[m], s, &batch.stochastic[m])?;
    }
    Ok(total / batch.len() as f64)
}

/// Central finite differences of the batch-mean loss over every parameter,
/// step `h_rel * max(1, |theta_i|)`.
pub fn fd_param_grad(
    problem: &ProblemSpec,
    params: &MlpParams,
    batch: &Batch,
    h_rel: f64,
) -> Result<Vec<f64>> {
    let flat = params.flatten();
    let sizes = params.layer_sizes().to_vec();
    let mut grad = vec![0.0; flat.len()];
    let mut work = flat.clone();
    for (i, g) in grad.iter_mut().enumerate() {
        let h = h_rel * flat[i].abs().max(1.0);
        work[i] = flat[i] + h;
        let lp = batch_mean_loss(problem, &MlpParams::from_flat(sizes.clone(), &work)?, batch)?;
        work[i] = flat[i] - h;
        let lm = batch_mean_loss(problem, &MlpParams::from_flat(sizes.clone(), &work)?, batch)?;
        work[i] = flat[i];
        *g = (lp - lm) / (2.0 * h);
    }
    Ok(grad)
}

/// Outcome of a full gradient check on one problem.
#[derive(Debug, Clone, Copy)]
pub struct GradcheckReport {
    /// Max relative error of `grad_params` against parameter-space finite
    /// differences (step 1e-4 relative).
    pub param_grad_max_rel: f64,
    /// Max relative error of the spatial gradient against input-space finite
    /// differences (step 1e-5 relative).
    pub spatial_grad_max_rel: f64,
}

impl GradcheckReport {
    pub fn passes(&self) -> bool {
        self.param_grad_max_rel <= 1e-5 && self.spatial_grad_max_rel <= 1e-6
    }
}

/// Run the standard gradient check for `problem`: a seeded [d+K, 8, 8, 1]
/// network, a batch of 4, parameter and spatial finite-difference oracles.
///
/// `corrupt` injects a deliberate error into the analytic gradient before
/// comparison; it exists so the check itself can be tested end to end.
pub fn run_gradcheck(problem: &ProblemSpec, seed: u64, corrupt: bool) -> Result<GradcheckReport> {
    let d = problem.spatial_dim;
    let input_dim = d + problem.stochastic_dim;
    let params = MlpParams::init(vec![input_dim, 8, 8, 1], seed)?;

    let mut streams = BatchStreams::from_seed(seed);
    let batch = sample_batch(problem, 4, &mut streams)?;

    let mut analytic = grad_params(problem, &params, &batch)?;
    if corrupt {
        analytic.values[0] += 1e-2 * analytic.values[0].abs().max(1.0);
    }
    let fd = fd_param_grad(problem, &params, &batch, 1e-4)?;
    let param_grad_max_rel = max_rel_err(&analytic.values, &fd);

    let mut spatial_grad_max_rel = 0.0f64;
    let mut input = vec![0.0; input_dim];
    for m in 0..batch.len() {
        input[..d].copy_from_slice(&batch.interior[m]);
        input[d..].copy_from_slice(&batch.stochastic[m]);
        let eval = params.forward_with_spatial_grad(&input, d)?;
        let fd = fd_spatial_grad(&params, &input, d)?;
        spatial_grad_max_rel = spatial_grad_max_rel.max(max_rel_err(&eval.spatial_grad, &fd));
    }

    Ok(GradcheckReport { param_grad_max_rel, spatial_grad_max_rel })
}
