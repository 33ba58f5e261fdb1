//! Penalized variational loss and its exact parameter gradient.
//!
//! One sample triple (x, s, z) contributes
//!   I(x, z, u(x,z), grad u(x,z)) + beta |u(s,z) - g(s,z)|^2,
//! with the boundary term dropped for problems with natural boundary
//! conditions. The batch gradient is the parameter gradient of the batch
//! mean, computed by reverse accumulation through the extended forward pass
//! (including the path through the spatial gradient).
//!
//! Per-sample work fans out to worker threads in fixed-size chunks and the
//! chunk partials are merged in index order, so results are bit-identical
//! run to run regardless of scheduling.

use rayon::prelude::*;

use super::{EvalWorkspace, FlatGradient, MlpParams};
use crate::error::{Error, Result};
use crate::field::{NetworkField, RandomField};
use crate::problems::{Batch, ProblemSpec};

/// Fixed chunk size of the gradient reduction.
const GRAD_CHUNK: usize = 64;

fn check_network_shape(problem: &ProblemSpec, params: &MlpParams) -> Result<()> {
    if params.input_dim() != problem.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "network input width (d + K)",
            expected: problem.input_dim(),
            got: params.input_dim(),
        });
    }
    Ok(())
}

/// Loss of a single sample triple for an arbitrary field.
///
/// `s` must be present exactly when the problem carries Dirichlet data.
pub fn field_sample_loss(
    problem: &ProblemSpec,
    field: &dyn RandomField,
    x: &[f64],
    s: Option<&[f64]>,
    z: &[f64],
) -> Result<f64> {
    let eval = field.eval(x, z);
    let mut loss = problem.lagrangian.value(x, z, eval.value, &eval.spatial_grad);
    if let Some(bspec) = &problem.boundary {
        let s = s.ok_or_else(|| {
            Error::InvalidInput(format!("problem {} requires a boundary sample", problem.id))
        })?;
        let diff = field.value(s, z) - (bspec.data)(s, z);
        loss += bspec.penalty_beta * diff * diff;
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite { what: "sample loss", sample: None });
    }
    Ok(loss)
}

/// Loss of a single sample triple for the network `params`.
pub fn sample_loss(
    problem: &ProblemSpec,
    params: &MlpParams,
    x: &[f64],
    s: Option<&[f64]>,
    z: &[f64],
) -> Result<f64> {
    check_network_shape(problem, params)?;
    if x.len() != problem.spatial_dim {
        return Err(Error::DimensionMismatch {
            context: "interior point",
            expected: problem.spatial_dim,
            got: x.len(),
        });
    }
    if z.len() != problem.stochastic_dim {
        return Err(Error::DimensionMismatch {
            context: "stochastic vector",
            expected: problem.stochastic_dim,
            got: z.len(),
        });
    }
    let field = NetworkField::new(params, problem.spatial_dim);
    field_sample_loss(problem, &field, x, s, z)
}

/// Gradient of the batch-mean loss with respect to every network parameter.
pub fn grad_params(problem: &ProblemSpec, params: &MlpParams, batch: &Batch) -> Result<FlatGradient> {
    Ok(batch_loss_and_grad(problem, params, batch)?.1)
}

/// Batch-mean loss together with its parameter gradient, sharing one fused
/// pass over the samples.
pub fn batch_loss_and_grad(
    problem: &ProblemSpec,
    params: &MlpParams,
    batch: &Batch,
) -> Result<(f64, FlatGradient)> {
    check_network_shape(problem, params)?;
    let n = batch.len();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if problem.has_boundary_term() != batch.boundary.is_some() {
        return Err(Error::InvalidInput(format!(
            "batch boundary samples {} for problem {}",
            if batch.boundary.is_some() { "provided" } else { "missing" },
            problem.id
        )));
    }

    let d = problem.spatial_dim;
    let param_count = params.param_count();
    let ranges: Vec<(usize, usize)> = (0..n)
        .step_by(GRAD_CHUNK)
        .map(|start| (start, (start + GRAD_CHUNK).min(n)))
        .collect();

    let partials: Result<Vec<(f64, Vec<f64>)>> = ranges
        .par_iter()
        .map(|&(start, end)| {
            let mut ws = EvalWorkspace::new(params, d);
            let mut ws_boundary = EvalWorkspace::new(params, 0);
            let mut grad = vec![0.0; param_count];
            let mut d_grad = vec![0.0; d];
            let mut input = vec![0.0; problem.input_dim()];
            let mut loss_sum = 0.0;
            for m in start..end {
                let x = &batch.interior[m];
                let z = &batch.stochastic[m];
                input[..d].copy_from_slice(x);
                input[d..].copy_from_slice(z);
                params.forward_extended(&input, &mut ws);
                let u = ws.value();
                let interior = problem.lagrangian.value(x, z, u, ws.spatial_grad());
                if !interior.is_finite() {
                    return Err(Error::NonFinite { what: "lagrangian", sample: Some(m) });
                }
                loss_sum += interior;
                let du = problem.lagrangian.partials(x, z, u, ws.spatial_grad(), &mut d_grad);
                params.backward_into(&mut ws, du, Some(&d_grad), &mut grad);

                if let (Some(bspec), Some(boundary)) = (&problem.boundary, &batch.boundary) {
                    let s = &boundary[m];
                    input[..d].copy_from_slice(s);
                    params.forward_value(&input, &mut ws_boundary);
                    let diff = ws_boundary.value() - (bspec.data)(s, z);
                    let penalty = bspec.penalty_beta * diff * diff;
                    if !penalty.is_finite() {
                        return Err(Error::NonFinite { what: "boundary penalty", sample: Some(m) });
                    }
                    loss_sum += penalty;
                    params.backward_into(
                        &mut ws_boundary,
                        2.0 * bspec.penalty_beta * diff,
                        None,
                        &mut grad,
                    );
                }
            }
            Ok((loss_sum, grad))
        })
        .collect();

    let mut grad = vec![0.0; param_count];
    let mut loss = 0.0;
    for (chunk_loss, chunk_grad) in partials? {
        loss += chunk_loss;
        for (g, c) in grad.iter_mut().zip(&chunk_grad) {
            *g += c;
        }
    }
    let inv_n = 1.0 / n as f64;
    loss *= inv_n;
    for g in &mut grad {
        *g *= inv_n;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { what: "gradient", sample: None });
    }
    Ok((loss, FlatGradient { values: grad }))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::error::Error;
    use crate::gradcheck::{fd_param_grad, max_rel_err};
    use crate::problems::{
        make_problem, sample_batch, BatchStreams, Lagrangian, ProblemSpec, ZLaw,
    };
    use crate::sampling::DomainDescriptor;

    /// Lagrangian that is identically zero; gradients must vanish.
    struct ZeroLagrangian;

    impl Lagrangian for ZeroLagrangian {
        fn value(&self, _: &[f64], _: &[f64], _: f64, _: &[f64]) -> f64 {
            0.0
        }
        fn partials(&self, _: &[f64], _: &[f64], _: f64, _: &[f64], d_grad: &mut [f64]) -> f64 {
            d_grad.fill(0.0);
            0.0
        }
    }

    /// Wraps another Lagrangian, scaling value and partials by `alpha`.
    struct ScaledLagrangian {
        inner: Arc<dyn Lagrangian>,
        alpha: f64,
    }

    impl Lagrangian for ScaledLagrangian {
        fn value(&self, x: &[f64], z: &[f64], u: f64, g: &[f64]) -> f64 {
            self.alpha * self.inner.value(x, z, u, g)
        }
        fn partials(&self, x: &[f64], z: &[f64], u: f64, g: &[f64], d_grad: &mut [f64]) -> f64 {
            let du = self.inner.partials(x, z, u, g, d_grad);
            for v in d_grad.iter_mut() {
                *v *= self.alpha;
            }
            self.alpha * du
        }
    }

    fn synthetic_zero_problem() -> ProblemSpec {
        let mut p = make_problem("p3_dirichlet", 2).unwrap();
        p.lagrangian = Arc::new(ZeroLagrangian);
        p.boundary = None;
        p
    }

    #[test]
    fn p3_zero_network_loss_vanishes() {
        let p = make_problem("p3_dirichlet", 2).unwrap();
        let params = MlpParams::zeros(vec![4, 8, 1]).unwrap();
        let loss =
            sample_loss(&p, &params, &[0.5, 0.5], Some(&[0.0, 0.5]), &[0.0, 0.0]).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn p2_zero_network_loss_vanishes() {
        let p = make_problem("p2_neumann", 2).unwrap();
        let params = MlpParams::zeros(vec![4, 8, 1]).unwrap();
        let loss = sample_loss(&p, &params, &[0.0, 0.0], None, &[0.5, 0.5]).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn p3_exact_field_interior_value() {
        // At the exact solution with x = (1/2, 1/2), z = 0 the gradient term
        // vanishes by symmetry and the interior reduces to -2 pi^2 / 3.
        let p = make_problem("p3_dirichlet", 2).unwrap();
        let loss = field_sample_loss(
            &p,
            p.exact.as_ref(),
            &[0.5, 0.5],
            Some(&[0.0, 0.5]),
            &[0.0, 0.0],
        )
        .unwrap();
        let expected = -2.0 * PI * PI / 3.0;
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
        assert!((expected - (-6.5797)).abs() < 1e-4);
    }

    #[test]
    fn sample_loss_requires_boundary_point_for_dirichlet() {
        let p = make_problem("p3_dirichlet", 2).unwrap();
        let params = MlpParams::zeros(vec![4, 8, 1]).unwrap();
        assert!(matches!(
            sample_loss(&p, &params, &[0.5, 0.5], None, &[0.0, 0.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn sample_loss_rejects_shape_mismatches() {
        let p = make_problem("p3_dirichlet", 2).unwrap();
        let params = MlpParams::zeros(vec![5, 8, 1]).unwrap();
        assert!(sample_loss(&p, &params, &[0.5, 0.5], Some(&[0.0, 0.5]), &[0.0, 0.0]).is_err());
        let params = MlpParams::zeros(vec![4, 8, 1]).unwrap();
        assert!(sample_loss(&p, &params, &[0.5], Some(&[0.0, 0.5]), &[0.0, 0.0]).is_err());
        assert!(sample_loss(&p, &params, &[0.5, 0.5], Some(&[0.0, 0.5]), &[0.0]).is_err());
    }

    #[test]
    fn zero_lagrangian_gives_zero_gradient() {
        let p = synthetic_zero_problem();
        let params = MlpParams::init(vec![4, 8, 8, 1], 3).unwrap();
        let batch = Batch::new(
            &p,
            vec![vec![0.25, 0.5], vec![0.75, 0.25]],
            None,
            vec![vec![0.1, -0.2], vec![0.3, 0.4]],
        )
        .unwrap();
        let g = grad_params(&p, &params, &batch).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_batch_has_identical_gradient() {
        let p = make_problem("p3_dirichlet", 2).unwrap();
        let params = MlpParams::init(vec![4, 8, 8, 1], 5).unwrap();
        let x = vec![0.3, 0.6];
        let s = vec![1.0, 0.4];
        let z = vec![0.2, -0.5];
        let single = Batch::new(&p, vec![x.clone()], Some(vec![s.clone()]), vec![z.clone()]).unwrap();
        let doubled = Batch::new(
            &p,
            vec![x.clone(), x],
            Some(vec![s.clone(), s]),
            vec![z.clone(), z],
        )
        .unwrap();
        let g1 = grad_params(&p, &params, &single).unwrap();
        let g2 = grad_params(&p, &params, &doubled).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn gradient_matches_finite_differences_on_p3() {
        let p = make_problem("p3_dirichlet", 2).unwrap();
        let params = MlpParams::init(vec![4, 8, 8, 1], 11).unwrap();
        let mut streams = BatchStreams::from_seed(13);
        let batch = sample_batch(&p, 4, &mut streams).unwrap();
        let analytic = grad_params(&p, &params, &batch).unwrap();
        let fd = fd_param_grad(&p, &params, &batch, 1e-4).unwrap();
        let err = max_rel_err(&analytic.values, &fd);
        assert!(err <= 1e-5, "max rel err {err}");
    }

    #[test]
    fn gradient_scales_with_lagrangian() {
        let base = make_problem("p3_dirichlet", 2).unwrap();
        let params = MlpParams::init(vec![4, 8, 8, 1], 7).unwrap();
        let mut streams = BatchStreams::from_seed(17);
        let batch = sample_batch(&base, 6, &mut streams).unwrap();

        let mut interior_only = make_problem("p3_dirichlet", 2).unwrap();
        interior_only.boundary = None;
        let mut batch_no_boundary = batch.clone();
        batch_no_boundary.boundary = None;
        let g1 = grad_params(&interior_only, &params, &batch_no_boundary).unwrap();

        // Powers of two scale bit-exactly; other factors only up to rounding.
        for alpha in [2.0, 0.25] {
            let mut scaled = make_problem("p3_dirichlet", 2).unwrap();
            scaled.lagrangian =
                Arc::new(ScaledLagrangian { inner: interior_only.lagrangian.clone(), alpha });
            scaled.boundary = None;
            let g2 = grad_params(&scaled, &params, &batch_no_boundary).unwrap();
            for (a, b) in g1.values.iter().zip(&g2.values) {
                assert_eq!(alpha * a, *b);
            }
        }
        let mut scaled = make_problem("p3_dirichlet", 2).unwrap();
        scaled.lagrangian =
            Arc::new(ScaledLagrangian { inner: interior_only.lagrangian.clone(), alpha: 1.7 });
        scaled.boundary = None;
        let g2 = grad_params(&scaled, &params, &batch_no_boundary).unwrap();
        for (a, b) in g1.values.iter().zip(&g2.values) {
            assert!((1.7 * a - b).abs() <= 1e-14 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn repeated_calls_are_bit_identical() {
        let p = make_problem("p4_langevin", 3).unwrap();
        let params = MlpParams::init(vec![4, 8, 8, 1], 19).unwrap();
        let mut streams = BatchStreams::from_seed(23);
        let batch = sample_batch(&p, 130, &mut streams).unwrap();
        let (l1, g1) = batch_loss_and_grad(&p, &params, &batch).unwrap();
        let (l2, g2) = batch_loss_and_grad(&p, &params, &batch).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn non_finite_lagrangian_reports_sample_index() {
        struct ExplodingLagrangian;
        impl Lagrangian for ExplodingLagrangian {
            fn value(&self, x: &[f64], _: &[f64], _: f64, _: &[f64]) -> f64 {
                if x[0] > 0.5 {
                    f64::NAN
                } else {
                    0.0
                }
            }
            fn partials(&self, _: &[f64], _: &[f64], _: f64, _: &[f64], d: &mut [f64]) -> f64 {
                d.fill(0.0);
                0.0
            }
        }
        let mut p = make_problem("p3_dirichlet", 2).unwrap();
        p.lagrangian = Arc::new(ExplodingLagrangian);
        p.boundary = None;
        let params = MlpParams::init(vec![4, 8, 1], 1).unwrap();
        let batch = Batch::new(
            &p,
            vec![vec![0.25, 0.5], vec![0.75, 0.5]],
            None,
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        match batch_loss_and_grad(&p, &params, &batch) {
            Err(Error::NonFinite { what, sample }) => {
                assert_eq!(what, "lagrangian");
                assert_eq!(sample, Some(1));
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn batch_mean_matches_sample_losses() {
        let p = make_problem("p2_neumann", 3).unwrap();
        let params = MlpParams::init(vec![6, 8, 8, 1], 29).unwrap();
        let mut streams = BatchStreams::from_seed(31);
        let batch = sample_batch(&p, 10, &mut streams).unwrap();
        let (fused, _) = batch_loss_and_grad(&p, &params, &batch).unwrap();
        let oracle = crate::gradcheck::batch_mean_loss(&p, &params, &batch).unwrap();
        assert!((fused - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
    }

    #[test]
    fn zero_dimension_guard_on_synthetic_problem() {
        // A problem whose bounds are broken is rejected at construction.
        assert!(DomainDescriptor::hypercube(1.0, 0.0, 2).is_err());
        assert!(matches!(ZLaw::UniformBox { a: 0.0, b: 1.0, dim: 2 }.dim(), 2));
    }
}
