//! The four built-in benchmarks.
//!
//! * `p1_1d_lognormal` — 1D Dirichlet problem on (-1, 1) with a log-normal
//!   diffusivity driven by a 10-dimensional Gaussian harmonic expansion;
//!   exact solution by composite Gauss-Legendre quadrature.
//! * `p2_neumann` — d-dimensional reaction-diffusion energy on [0, 1]^d with
//!   natural boundary conditions (no penalty term).
//! * `p3_dirichlet` — 2D Dirichlet problem on [0, 1]^2 with an affine random
//!   diffusivity.
//! * `p4_langevin` — equilibrium density of overdamped Langevin dynamics on
//!   the unit ball, diffusivity exp(-V) with a random quadratic potential.

use std::f64::consts::PI;
use std::sync::Arc;

use super::quadrature::{composite_gl, gauss_legendre};
use super::{BoundarySpec, ProblemOptions, ProblemSpec, QuadraticLagrangian, ZLaw};
use crate::error::{Error, Result};
use crate::field::RandomField;
use crate::gradnet::NetworkEval;
use crate::sampling::{DomainDescriptor, RngStream};

/// Number of harmonic pairs in the 1D log-normal field (K = 2 * harmonics).
pub const P1_HARMONICS: usize = 5;
/// Default total node budget for the 1D exact-solution quadrature.
pub const P1_QUAD_NODES: usize = 1024;
/// Panel count of the composite rule.
pub const P1_QUAD_PANELS: usize = 8;

const P1_FIELD_SCALE: f64 = 0.1;

/// Gaussian potential V(x, z) = 5^{-1/2} sum_k A_k cos(pi k x) + B_k sin(pi k x)
/// with z = (A_1..A_5, B_1..B_5).
pub fn p1_potential(x: f64, z: &[f64]) -> f64 {
    debug_assert_eq!(z.len(), 2 * P1_HARMONICS);
    let mut sum = 0.0;
    // cos/sin of pi k x by angle addition from the k = 1 pair.
    let (s1, c1) = (PI * x).sin_cos();
    let (mut sk, mut ck) = (s1, c1);
    for k in 0..P1_HARMONICS {
        sum += z[k] * ck + z[P1_HARMONICS + k] * sk;
        let s_next = sk * c1 + ck * s1;
        let c_next = ck * c1 - sk * s1;
        sk = s_next;
        ck = c_next;
    }
    sum / (P1_HARMONICS as f64).sqrt()
}

/// Log-normal diffusivity exp(0.1 V(x, z)).
pub fn p1_kappa(x: f64, z: &[f64]) -> f64 {
    (P1_FIELD_SCALE * p1_potential(x, z)).exp()
}

/// Analytic covariance kernel of the potential:
/// cov(x1, x2) = 5^{-1} sum_k cos(pi k (x2 - x1)).
pub fn p1_cov_kernel(x1: f64, x2: f64) -> f64 {
    (1..=P1_HARMONICS)
        .map(|k| (PI * k as f64 * (x2 - x1)).cos())
        .sum::<f64>()
        / P1_HARMONICS as f64
}

/// Monte-Carlo estimate of Cov(V(x1, Z), V(x2, Z)) over `n_mc` draws.
pub fn covariance_check_p1(x1: f64, x2: f64, n_mc: usize, rng: &mut RngStream) -> f64 {
    let mut sum1 = 0.0;
    let mut sum2 = 0.0;
    let mut sum12 = 0.0;
    let mut z = vec![0.0; 2 * P1_HARMONICS];
    for _ in 0..n_mc {
        for v in &mut z {
            *v = rng.normal();
        }
        let v1 = p1_potential(x1, &z);
        let v2 = p1_potential(x2, &z);
        sum1 += v1;
        sum2 += v2;
        sum12 += v1 * v2;
    }
    let n = n_mc as f64;
    sum12 / n - (sum1 / n) * (sum2 / n)
}

/// Exact solution of the 1D problem at (x, z):
/// u(x, z) = (int_{-1}^{1} kappa^{-1})^{-1} int_{-1}^{x} kappa^{-1},
/// both integrals by a matched composite Gauss-Legendre rule with `n_nodes`
/// total nodes split over 8 panels.
pub fn exact_1d_quadrature(z: &[f64], x: f64, n_nodes: usize) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::QuadratureOutOfDomain(x));
    }
    if n_nodes < 64 {
        return Err(Error::InvalidInput(format!("need n_nodes >= 64, got {n_nodes}")));
    }
    let per_panel = n_nodes.div_ceil(P1_QUAD_PANELS);
    let (nodes, weights) = gauss_legendre(per_panel);
    let inv_kappa = |t: f64| 1.0 / p1_kappa(t, z);
    let denom = composite_gl(inv_kappa, -1.0, 1.0, P1_QUAD_PANELS, &nodes, &weights);
    let numer = composite_gl(inv_kappa, -1.0, x, P1_QUAD_PANELS, &nodes, &weights);
    Ok(numer / denom)
}

/// Exact solution of the 1D problem with cached quadrature nodes.
struct P1Exact {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl P1Exact {
    fn new(n_nodes: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n_nodes.div_ceil(P1_QUAD_PANELS));
        Self { nodes, weights }
    }
}

impl RandomField for P1Exact {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        let inv_kappa = |t: f64| 1.0 / p1_kappa(t, z);
        let denom = composite_gl(inv_kappa, -1.0, 1.0, P1_QUAD_PANELS, &self.nodes, &self.weights);
        let numer = composite_gl(inv_kappa, -1.0, x[0], P1_QUAD_PANELS, &self.nodes, &self.weights);
        NetworkEval {
            value: numer / denom,
            // d/dx of the partial integral is the integrand itself.
            spatial_grad: vec![inv_kappa(x[0]) / denom],
        }
    }
}

pub(super) fn p1_lognormal(d: usize, opts: &ProblemOptions) -> Result<ProblemSpec> {
    if d != 1 {
        return Err(Error::InvalidDimension { id: "p1_1d_lognormal".into(), dim: d });
    }
    let kappa: super::ScalarFn = Arc::new(|x: &[f64], z: &[f64]| p1_kappa(x[0], z));
    Ok(ProblemSpec {
        id: "p1_1d_lognormal".into(),
        spatial_dim: 1,
        stochastic_dim: 2 * P1_HARMONICS,
        domain: DomainDescriptor::interval(-1.0, 1.0)?,
        z_law: ZLaw::IidStdNormal { dim: 2 * P1_HARMONICS },
        kappa: kappa.clone(),
        lagrangian: Arc::new(QuadraticLagrangian { kappa, source: None, reaction: None }),
        boundary: Some(BoundarySpec {
            // u(-1) = 0, u(+1) = 1.
            data: Arc::new(|s: &[f64], _z: &[f64]| if s[0] > 0.0 { 1.0 } else { 0.0 }),
            penalty_beta: 50.0,
        }),
        exact: Arc::new(P1Exact::new(opts.p1_quad_nodes)),
    })
}

/// Exact solution u = sum_i cos(pi x_i) / kappa(z) of the Neumann benchmark.
struct P2Exact {
    dim: usize,
}

impl RandomField for P2Exact {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        let kappa = p2_kappa(self.dim, z);
        let value = x.iter().map(|&c| (PI * c).cos()).sum::<f64>() / kappa;
        let spatial_grad = x.iter().map(|&c| -PI * (PI * c).sin() / kappa).collect();
        NetworkEval { value, spatial_grad }
    }
}

fn p2_kappa(d: usize, z: &[f64]) -> f64 {
    (d + 1) as f64 + z.iter().sum::<f64>()
}

pub(super) fn p2_neumann(d: usize) -> Result<ProblemSpec> {
    if d == 0 {
        return Err(Error::InvalidDimension { id: "p2_neumann".into(), dim: d });
    }
    let kappa: super::ScalarFn = Arc::new(move |_x: &[f64], z: &[f64]| p2_kappa(d, z));
    let source: super::ScalarFn = Arc::new(|x: &[f64], _z: &[f64]| {
        2.0 * PI * PI * x.iter().map(|&c| (PI * c).cos()).sum::<f64>()
    });
    let reaction: super::ScalarFn = Arc::new(move |_x: &[f64], z: &[f64]| PI * PI * p2_kappa(d, z));
    Ok(ProblemSpec {
        id: "p2_neumann".into(),
        spatial_dim: d,
        stochastic_dim: d,
        domain: DomainDescriptor::hypercube(0.0, 1.0, d)?,
        z_law: ZLaw::UniformBox { a: 0.0, b: 1.0, dim: d },
        kappa: kappa.clone(),
        lagrangian: Arc::new(QuadraticLagrangian {
            kappa,
            source: Some(source),
            reaction: Some(reaction),
        }),
        boundary: None,
        exact: Arc::new(P2Exact { dim: d }),
    })
}

/// Exact solution u = sin(pi x1) sin(pi x2) / kappa(z) of the 2D Dirichlet
/// benchmark.
struct P3Exact;

impl RandomField for P3Exact {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        let kappa = 3.0 + z[0] + z[1];
        let (s1, c1) = (PI * x[0]).sin_cos();
        let (s2, c2) = (PI * x[1]).sin_cos();
        NetworkEval {
            value: s1 * s2 / kappa,
            spatial_grad: vec![PI * c1 * s2 / kappa, PI * s1 * c2 / kappa],
        }
    }
}

pub(super) fn p3_dirichlet(d: usize) -> Result<ProblemSpec> {
    if d != 2 {
        return Err(Error::InvalidDimension { id: "p3_dirichlet".into(), dim: d });
    }
    let kappa: super::ScalarFn = Arc::new(|_x: &[f64], z: &[f64]| 3.0 + z[0] + z[1]);
    let source: super::ScalarFn =
        Arc::new(|x: &[f64], _z: &[f64]| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin());
    Ok(ProblemSpec {
        id: "p3_dirichlet".into(),
        spatial_dim: 2,
        stochastic_dim: 2,
        domain: DomainDescriptor::hypercube(0.0, 1.0, 2)?,
        z_law: ZLaw::UniformBox { a: -1.0, b: 1.0, dim: 2 },
        kappa: kappa.clone(),
        lagrangian: Arc::new(QuadraticLagrangian { kappa, source: Some(source), reaction: None }),
        boundary: Some(BoundarySpec {
            data: Arc::new(|_s: &[f64], _z: &[f64]| 0.0),
            penalty_beta: 500.0,
        }),
        exact: Arc::new(P3Exact),
    })
}

/// Exact solution u = exp(V), V = z (1 + |x|^2), of the Langevin benchmark.
struct P4Exact;

impl RandomField for P4Exact {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        let norm_sq: f64 = x.iter().map(|c| c * c).sum();
        let value = (z[0] * (1.0 + norm_sq)).exp();
        let spatial_grad = x.iter().map(|&c| 2.0 * z[0] * c * value).collect();
        NetworkEval { value, spatial_grad }
    }
}

pub(super) fn p4_langevin(d: usize) -> Result<ProblemSpec> {
    if d == 0 {
        return Err(Error::InvalidDimension { id: "p4_langevin".into(), dim: d });
    }
    let kappa: super::ScalarFn = Arc::new(|x: &[f64], z: &[f64]| {
        let norm_sq: f64 = x.iter().map(|c| c * c).sum();
        (-z[0] * (1.0 + norm_sq)).exp()
    });
    // Forcing consistent with the exact solution: -div(kappa grad e^V) = -2 d z.
    let source: super::ScalarFn = Arc::new(move |_x: &[f64], z: &[f64]| -2.0 * d as f64 * z[0]);
    Ok(ProblemSpec {
        id: "p4_langevin".into(),
        spatial_dim: d,
        stochastic_dim: 1,
        domain: DomainDescriptor::unit_ball(d)?,
        z_law: ZLaw::UniformScalar { a: 0.0, b: 1.0 },
        kappa: kappa.clone(),
        lagrangian: Arc::new(QuadraticLagrangian { kappa, source: Some(source), reaction: None }),
        boundary: Some(BoundarySpec {
            // On the sphere |s| = 1 the exact solution reduces to e^{2z}.
            data: Arc::new(|_s: &[f64], z: &[f64]| (2.0 * z[0]).exp()),
            penalty_beta: 500.0,
        }),
        exact: Arc::new(P4Exact),
    })
}
