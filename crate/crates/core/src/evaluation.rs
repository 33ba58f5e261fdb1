//! Accuracy and distribution diagnostics: relative L2 mean error against the
//! exact solution, kernel density estimates of solution marginals, joint
//! histograms, and first-order-optimality residuals (the directional
//! derivative of the loss functional, which vanishes at a minimizer).
//!
//! Compared quantities always share their Monte-Carlo draws (common random
//! numbers): the numerator and denominator of the relative error use the same
//! (X, Z) pairs, and both sides of a directional difference use the same
//! sample set.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{CutoffField, NetworkField, RandomField, ScaledField};
use crate::gradnet::{MlpParams, NetworkEval};
use crate::problems::ProblemSpec;
use crate::sampling::RngStream;

/// Step used for the symmetric directional-derivative estimate. The loss
/// functionals here are quadratic in the perturbation, so the central
/// difference is exact up to rounding; 1e-4 balances cancellation error.
pub const GATEAUX_EPS: f64 = 1e-4;

/// Relative L2 mean error report with the Monte-Carlo estimates behind it.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub problem_id: String,
    pub n_samples: usize,
    /// E = numerator / denominator.
    pub rel_l2_error: f64,
    /// Mean of (u_theta - u)^2 over the paired draws.
    pub numerator: f64,
    pub numerator_std_error: f64,
    /// Mean of u^2 over the same draws.
    pub denominator: f64,
    pub denominator_std_error: f64,
    pub wall_time_secs: f64,
}

/// Relative L2 mean error of the network against the exact solution.
pub fn relative_l2_error(
    problem: &ProblemSpec,
    params: &MlpParams,
    n: usize,
    rng: &mut RngStream,
) -> Result<EvalReport> {
    let field = NetworkField::new(params, problem.spatial_dim);
    relative_l2_error_field(problem, &field, n, rng)
}

/// Relative L2 mean error of an arbitrary field against the exact solution.
///
/// Numerator and denominator are estimated on the same `n` paired (X, Z)
/// draws, so a field equal to the exact solution scores exactly zero.
pub fn relative_l2_error_field(
    problem: &ProblemSpec,
    field: &dyn RandomField,
    n: usize,
    rng: &mut RngStream,
) -> Result<EvalReport> {
    if n < 1000 {
        return Err(Error::TooFewSamples { needed: 1000, got: n });
    }
    let start = std::time::Instant::now();
    let xs = problem.domain.sample_interior(rng, n)?;
    let zs = problem.z_law.sample(rng, n)?;
    let exact = problem.exact.as_ref();

    let terms: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let u = field.value(&xs[i], &zs[i]);
            let u_star = exact.value(&xs[i], &zs[i]);
            let diff = u - u_star;
            (diff * diff, u_star * u_star)
        })
        .collect();

    let inv_n = 1.0 / n as f64;
    let mut num_sum = 0.0;
    let mut den_sum = 0.0;
    for &(a, b) in &terms {
        num_sum += a;
        den_sum += b;
    }
    let numerator = num_sum * inv_n;
    let denominator = den_sum * inv_n;
    if !(denominator > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    let mut num_var = 0.0;
    let mut den_var = 0.0;
    for &(a, b) in &terms {
        num_var += (a - numerator) * (a - numerator);
        den_var += (b - denominator) * (b - denominator);
    }
    let scale = 1.0 / (n.saturating_sub(1).max(1) as f64);
    Ok(EvalReport {
        problem_id: problem.id.clone(),
        n_samples: n,
        rel_l2_error: numerator / denominator,
        numerator,
        numerator_std_error: (num_var * scale * inv_n).sqrt(),
        denominator,
        denominator_std_error: (den_var * scale * inv_n).sqrt(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Draws of u(x, Z) at a fixed evaluation point.
pub fn marginal_samples(
    problem: &ProblemSpec,
    field: &dyn RandomField,
    x: &[f64],
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if x.len() != problem.spatial_dim {
        return Err(Error::DimensionMismatch {
            context: "evaluation point",
            expected: problem.spatial_dim,
            got: x.len(),
        });
    }
    let zs = problem.z_law.sample(rng, n)?;
    Ok(zs.iter().map(|z| field.value(x, z)).collect())
}

/// Gaussian-kernel density estimate on a grid of u-values.
#[derive(Debug, Clone, Serialize)]
pub struct DensityExport {
    /// Evaluation point the samples came from (set by the caller; may be
    /// empty for free-standing sample sets).
    pub point: Vec<f64>,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub n_samples: usize,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = p * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Silverman bandwidth: 0.9 * min(sigma, IQR / 1.34) * n^(-1/5), falling back
/// to sigma alone when the interquartile range collapses.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return Err(Error::PointMass);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN samples"));
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sigma.min(iqr / 1.34) } else { sigma };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Gaussian-kernel KDE of `samples` evaluated at `grid`.
pub fn kde_pdf(samples: &[f64], grid: &[f64]) -> Result<DensityExport> {
    let h = silverman_bandwidth(samples)?;
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * samples.len() as f64);
    let density: Vec<f64> = grid
        .par_iter()
        .map(|&g| {
            let mut s = 0.0;
            for &x in samples {
                let t = (g - x) / h;
                s += (-0.5 * t * t).exp();
            }
            s * norm
        })
        .collect();
    Ok(DensityExport {
        point: Vec::new(),
        grid: grid.to_vec(),
        density,
        bandwidth: h,
        n_samples: samples.len(),
    })
}

/// Evenly spaced grid covering the sample range plus `pad_bandwidths` times
/// the Silverman bandwidth on each side.
pub fn kde_grid(samples: &[f64], points: usize, pad_bandwidths: f64) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min) - pad_bandwidths * h;
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + pad_bandwidths * h;
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}

/// Normalized joint histogram of (u(x1, Z), u(x2, Z)) over shared draws.
#[derive(Debug, Clone, Serialize)]
pub struct JointHistogram {
    /// Bin edges, length bins + 1.
    pub u1_edges: Vec<f64>,
    pub u2_edges: Vec<f64>,
    /// Probability mass per cell, mass[i][j] for (u1 bin i, u2 bin j);
    /// sums to 1.
    pub mass: Vec<Vec<f64>>,
    pub n_samples: usize,
}

/// Sturges' rule bin count.
pub fn sturges_bins(n: usize) -> usize {
    ((n.max(1) as f64).log2().ceil() as usize + 1).max(1)
}

/// Paired draws (u(x1, Z_i), u(x2, Z_i)) with shared Z.
pub fn joint_pairs(
    problem: &ProblemSpec,
    field: &dyn RandomField,
    x1: &[f64],
    x2: &[f64],
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<(f64, f64)>> {
    for x in [x1, x2] {
        if x.len() != problem.spatial_dim {
            return Err(Error::DimensionMismatch {
                context: "evaluation point",
                expected: problem.spatial_dim,
                got: x.len(),
            });
        }
    }
    let zs = problem.z_law.sample(rng, n)?;
    Ok(zs.iter().map(|z| (field.value(x1, z), field.value(x2, z))).collect())
}

fn hist_edges(values: impl Iterator<Item = f64> + Clone, bins: usize) -> Vec<f64> {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    // Degenerate range: center one unit-wide box on the point mass.
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let step = (hi - lo) / bins as f64;
    (0..=bins).map(|i| if i == bins { hi } else { lo + step * i as f64 }).collect()
}

fn bin_index(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    let lo = edges[0];
    let hi = edges[bins];
    let idx = ((v - lo) / (hi - lo) * bins as f64) as usize;
    idx.min(bins - 1)
}

/// Normalized 2D histogram of paired solution values at two points.
pub fn joint_histogram(
    problem: &ProblemSpec,
    field: &dyn RandomField,
    x1: &[f64],
    x2: &[f64],
    n: usize,
    bins: usize,
    rng: &mut RngStream,
) -> Result<JointHistogram> {
    if n == 0 || bins == 0 {
        return Err(Error::InvalidInput("need n >= 1 and bins >= 1".into()));
    }
    let pairs = joint_pairs(problem, field, x1, x2, n, rng)?;
    let u1_edges = hist_edges(pairs.iter().map(|p| p.0), bins);
    let u2_edges = hist_edges(pairs.iter().map(|p| p.1), bins);
    let mut counts = vec![vec![0usize; bins]; bins];
    for &(a, b) in &pairs {
        counts[bin_index(&u1_edges, a)][bin_index(&u2_edges, b)] += 1;
    }
    let inv_n = 1.0 / n as f64;
    let mass = counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 * inv_n).collect())
        .collect();
    Ok(JointHistogram { u1_edges, u2_edges, mass, n_samples: n })
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl ResidualEstimate {
    /// |estimate| in standard-error units (0 when the error is 0).
    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            if self.estimate == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.estimate.abs() / self.std_error
        }
    }
}

/// A seeded random network direction, made admissible for its problem and
/// normalized to unit size.
///
/// For Dirichlet problems the network is multiplied by a polynomial cutoff
/// vanishing on the boundary, so perturbing any candidate along the direction
/// leaves the boundary data intact. The *admissible* field (after the cutoff)
/// is scaled so E[v^2 + |grad v|^2] = 1 over the problem's sampling law;
/// normalizing before the cutoff would leave the effective perturbation
/// orders of magnitude smaller than unit size and bury the quadratic
/// loss-gap signal under Monte-Carlo noise.
pub struct TestDirection {
    params: MlpParams,
    spatial_dim: usize,
    cutoff_domain: Option<crate::sampling::DomainDescriptor>,
    scale: f64,
}

impl TestDirection {
    fn raw(&self) -> NetworkField<'_> {
        NetworkField::new(&self.params, self.spatial_dim)
    }
}

impl RandomField for TestDirection {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        match self.cutoff_domain {
            Some(domain) => ScaledField {
                inner: CutoffField { inner: self.raw(), domain },
                scale: self.scale,
            }
            .eval(x, z),
            None => ScaledField { inner: self.raw(), scale: self.scale }.eval(x, z),
        }
    }

    fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        match self.cutoff_domain {
            Some(domain) => {
                self.scale
                    * CutoffField { inner: self.raw(), domain }.value(x, z)
            }
            None => self.scale * self.raw().value(x, z),
        }
    }
}

/// Build an admissible, normalized random test direction for `problem`.
pub fn test_direction(problem: &ProblemSpec, seed: u64) -> Result<TestDirection> {
    let params = MlpParams::init(vec![problem.input_dim(), 8, 8, 1], seed)?;
    normalize_direction(problem, params, seed)
}

fn normalize_direction(
    problem: &ProblemSpec,
    params: MlpParams,
    seed: u64,
) -> Result<TestDirection> {
    let mut direction = TestDirection {
        params,
        spatial_dim: problem.spatial_dim,
        cutoff_domain: problem.has_boundary_term().then_some(problem.domain),
        scale: 1.0,
    };
    let mut rng = RngStream::new(seed, crate::sampling::stream_id::DIRECTION);
    let n = 4096;
    let xs = problem.domain.sample_interior(&mut rng, n)?;
    let zs = problem.z_law.sample(&mut rng, n)?;
    let mut norm_sq = 0.0;
    for (x, z) in xs.iter().zip(&zs) {
        let e = direction.eval(x, z);
        norm_sq += e.value * e.value + e.spatial_grad.iter().map(|g| g * g).sum::<f64>();
    }
    norm_sq /= n as f64;
    if norm_sq < 1e-24 {
        return Err(Error::DegenerateDirection);
    }
    direction.scale = 1.0 / norm_sq.sqrt();
    Ok(direction)
}

struct SampleSet {
    xs: Vec<Vec<f64>>,
    ss: Option<Vec<Vec<f64>>>,
    zs: Vec<Vec<f64>>,
}

fn draw_samples(problem: &ProblemSpec, n: usize, rng: &mut RngStream) -> Result<SampleSet> {
    let xs = problem.domain.sample_interior(rng, n)?;
    let ss = if problem.has_boundary_term() {
        Some(problem.domain.sample_boundary(rng, n)?)
    } else {
        None
    };
    let zs = problem.z_law.sample(rng, n)?;
    Ok(SampleSet { xs, ss, zs })
}

/// Per-sample loss contribution of a (value, gradient) pair at one triple.
fn combined_loss(
    problem: &ProblemSpec,
    x: &[f64],
    z: &[f64],
    value: f64,
    grad: &[f64],
    boundary_value: Option<f64>,
    boundary_point: Option<&[f64]>,
) -> f64 {
    let mut loss = problem.lagrangian.value(x, z, value, grad);
    if let (Some(bspec), Some(ub), Some(s)) = (&problem.boundary, boundary_value, boundary_point) {
        let diff = ub - (bspec.data)(s, z);
        loss += bspec.penalty_beta * diff * diff;
    }
    loss
}

fn mean_and_std_error(ts: &[f64]) -> ResidualEstimate {
    let n = ts.len();
    let mean = ts.iter().sum::<f64>() / n as f64;
    let var = ts.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>()
        / (n.saturating_sub(1).max(1) as f64);
    ResidualEstimate { estimate: mean, std_error: (var / n as f64).sqrt(), n_samples: n }
}

/// Symmetric-difference estimate of the directional derivative of the loss
/// functional at `u` along `v`, with its Monte-Carlo standard error.
/// Statistically zero at a minimizer.
///
/// For Dirichlet problems `v` must be admissible (vanish on the boundary);
/// [`test_direction`] constructs such directions.
pub fn gateaux_residual(
    problem: &ProblemSpec,
    u: &dyn RandomField,
    v: &dyn RandomField,
    n: usize,
    rng: &mut RngStream,
) -> Result<ResidualEstimate> {
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: n });
    }
    let w = v;
    let samples = draw_samples(problem, n, rng)?;
    let eps = GATEAUX_EPS;

    let ts: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = &samples.xs[i];
            let z = &samples.zs[i];
            let ue = u.eval(x, z);
            let we = w.eval(x, z);
            let s = samples.ss.as_ref().map(|ss| ss[i].as_slice());
            let (ub, wb) = match s {
                Some(s) => (Some(u.value(s, z)), Some(w.value(s, z))),
                None => (None, None),
            };
            let mut grad = vec![0.0; problem.spatial_dim];
            let mut side = |sign: f64| {
                for (g, (&bu, &bw)) in grad.iter_mut().zip(ue.spatial_grad.iter().zip(&we.spatial_grad))
                {
                    *g = bu + sign * eps * bw;
                }
                combined_loss(
                    problem,
                    x,
                    z,
                    ue.value + sign * eps * we.value,
                    &grad,
                    ub.map(|bu| bu + sign * eps * wb.unwrap()),
                    s,
                )
            };
            let t = (side(1.0) - side(-1.0)) / (2.0 * eps);
            if !t.is_finite() {
                return Err(Error::NonFinite { what: "directional derivative", sample: Some(i) });
            }
            Ok(t)
        })
        .collect();

    Ok(mean_and_std_error(&ts?))
}

/// Empirical loss gap J(u + eps v) - J(u) on common random numbers, with its
/// standard error. Nonnegative in expectation when `u` minimizes J.
///
/// As with [`gateaux_residual`], `v` must be admissible for Dirichlet
/// problems.
pub fn loss_gap(
    problem: &ProblemSpec,
    u: &dyn RandomField,
    v: &dyn RandomField,
    eps: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<ResidualEstimate> {
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: n });
    }
    let w = v;
    let samples = draw_samples(problem, n, rng)?;

    let ts: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = &samples.xs[i];
            let z = &samples.zs[i];
            let ue = u.eval(x, z);
            let we = w.eval(x, z);
            let s = samples.ss.as_ref().map(|ss| ss[i].as_slice());
            let (ub, wb) = match s {
                Some(s) => (Some(u.value(s, z)), Some(w.value(s, z))),
                None => (None, None),
            };
            let base = combined_loss(problem, x, z, ue.value, &ue.spatial_grad, ub, s);
            let grad: Vec<f64> = ue
                .spatial_grad
                .iter()
                .zip(&we.spatial_grad)
                .map(|(&bu, &bw)| bu + eps * bw)
                .collect();
            let shifted = combined_loss(
                problem,
                x,
                z,
                ue.value + eps * we.value,
                &grad,
                ub.map(|bu| bu + eps * wb.unwrap()),
                s,
            );
            let t = shifted - base;
            if !t.is_finite() {
                return Err(Error::NonFinite { what: "loss gap", sample: Some(i) });
            }
            Ok(t)
        })
        .collect();

    Ok(mean_and_std_error(&ts?))
}
