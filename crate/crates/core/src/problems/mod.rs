//! Built-in benchmark problems: random fields, interior Lagrangians, boundary
//! data, stochastic laws, and exact-solution oracles.
//!
//! Every problem minimizes E[I(x, u, grad u; kappa(x, Z))] over random fields
//! u(x, Z), optionally plus a boundary penalty beta * E[|u(S, Z) - g(S, Z)|^2]
//! that soft-enforces Dirichlet data. Problems with natural boundary
//! conditions carry no boundary term at all.

mod benchmarks;
pub mod quadrature;

pub use benchmarks::{
    covariance_check_p1, exact_1d_quadrature, p1_cov_kernel, p1_kappa, p1_potential,
    P1_HARMONICS, P1_QUAD_NODES, P1_QUAD_PANELS,
};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::RandomField;
use crate::sampling::{stream_id, DomainDescriptor, RngStream};

/// Shared scalar callback on (x, z).
pub type ScalarFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Interior integrand I(x, z, u, grad u) with the analytic partial
/// derivatives the reverse pass consumes.
pub trait Lagrangian: Send + Sync {
    fn value(&self, x: &[f64], z: &[f64], u: f64, grad_u: &[f64]) -> f64;

    /// Writes dI/d(grad u) into `d_grad` and returns dI/du.
    fn partials(&self, x: &[f64], z: &[f64], u: f64, grad_u: &[f64], d_grad: &mut [f64]) -> f64;
}

/// The quadratic family
/// I = 1/2 kappa |grad u|^2 + 1/2 reaction u^2 - source u,
/// whose Euler-Lagrange equation is
/// -div(kappa grad u) + reaction u = source.
pub struct QuadraticLagrangian {
    pub kappa: ScalarFn,
    pub source: Option<ScalarFn>,
    pub reaction: Option<ScalarFn>,
}

impl Lagrangian for QuadraticLagrangian {
    fn value(&self, x: &[f64], z: &[f64], u: f64, grad_u: &[f64]) -> f64 {
        let kappa = (self.kappa)(x, z);
        let grad_sq: f64 = grad_u.iter().map(|g| g * g).sum();
        let mut val = 0.5 * kappa * grad_sq;
        if let Some(r) = &self.reaction {
            val += 0.5 * r(x, z) * u * u;
        }
        if let Some(f) = &self.source {
            val -= f(x, z) * u;
        }
        val
    }

    fn partials(&self, x: &[f64], z: &[f64], u: f64, grad_u: &[f64], d_grad: &mut [f64]) -> f64 {
        let kappa = (self.kappa)(x, z);
        for (dg, &g) in d_grad.iter_mut().zip(grad_u) {
            *dg = kappa * g;
        }
        let mut du = 0.0;
        if let Some(r) = &self.reaction {
            du += r(x, z) * u;
        }
        if let Some(f) = &self.source {
            du -= f(x, z);
        }
        du
    }
}

/// Dirichlet boundary data and its penalty weight.
pub struct BoundarySpec {
    pub data: ScalarFn,
    pub penalty_beta: f64,
}

/// Law of the stochastic vector Z.
#[derive(Debug, Clone, PartialEq)]
pub enum ZLaw {
    IidStdNormal { dim: usize },
    UniformBox { a: f64, b: f64, dim: usize },
    UniformScalar { a: f64, b: f64 },
}

impl ZLaw {
    pub fn dim(&self) -> usize {
        match self {
            Self::IidStdNormal { dim } | Self::UniformBox { dim, .. } => *dim,
            Self::UniformScalar { .. } => 1,
        }
    }

    pub fn sample(&self, rng: &mut RngStream, n: usize) -> Result<Vec<Vec<f64>>> {
        match *self {
            Self::IidStdNormal { dim } => crate::sampling::standard_normal_vec(rng, dim, n),
            Self::UniformBox { a, b, dim } => crate::sampling::uniform_box(rng, a, b, dim, n),
            Self::UniformScalar { a, b } => crate::sampling::uniform_box(rng, a, b, 1, n),
        }
    }

    /// Support membership (a dimension check for unbounded laws).
    pub fn contains(&self, z: &[f64]) -> bool {
        if z.len() != self.dim() {
            return false;
        }
        match *self {
            Self::IidStdNormal { .. } => z.iter().all(|v| v.is_finite()),
            Self::UniformBox { a, b, .. } | Self::UniformScalar { a, b } => {
                z.iter().all(|&v| a <= v && v <= b)
            }
        }
    }
}

/// One benchmark problem, fully wired.
pub struct ProblemSpec {
    pub id: String,
    pub spatial_dim: usize,
    pub stochastic_dim: usize,
    pub domain: DomainDescriptor,
    pub z_law: ZLaw,
    /// Diffusivity kappa(x, z); strictly positive on domain x support.
    pub kappa: ScalarFn,
    pub lagrangian: Arc<dyn Lagrangian>,
    /// Present exactly when the problem carries Dirichlet data.
    pub boundary: Option<BoundarySpec>,
    pub exact: Arc<dyn RandomField>,
}

impl ProblemSpec {
    /// Network input width d + K.
    pub fn input_dim(&self) -> usize {
        self.spatial_dim + self.stochastic_dim
    }

    pub fn has_boundary_term(&self) -> bool {
        self.boundary.is_some()
    }

    pub fn penalty_beta(&self) -> f64 {
        self.boundary.as_ref().map_or(0.0, |b| b.penalty_beta)
    }

    /// Override the penalty weight. A positive weight requires Dirichlet
    /// data; problems with natural boundary conditions only accept zero.
    pub fn set_penalty_beta(&mut self, beta: f64) -> Result<()> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidConfig(format!("penalty_beta must be >= 0, got {beta}")));
        }
        match (&mut self.boundary, beta) {
            (Some(b), beta) if beta > 0.0 => b.penalty_beta = beta,
            (Some(_), _) => {
                return Err(Error::InvalidConfig(
                    "penalty_beta = 0 would drop the Dirichlet boundary term".into(),
                ))
            }
            (None, beta) if beta > 0.0 => {
                return Err(Error::InvalidConfig(format!(
                    "problem {} has natural boundary conditions; penalty_beta must be 0",
                    self.id
                )))
            }
            (None, _) => {}
        }
        Ok(())
    }
}

/// A mini-batch of sample triples.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub interior: Vec<Vec<f64>>,
    /// Absent for problems with natural boundary conditions.
    pub boundary: Option<Vec<Vec<f64>>>,
    pub stochastic: Vec<Vec<f64>>,
}

impl Batch {
    pub fn new(
        problem: &ProblemSpec,
        interior: Vec<Vec<f64>>,
        boundary: Option<Vec<Vec<f64>>>,
        stochastic: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = interior.len();
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        if stochastic.len() != n {
            return Err(Error::DimensionMismatch {
                context: "stochastic batch length",
                expected: n,
                got: stochastic.len(),
            });
        }
        if problem.has_boundary_term() != boundary.is_some() {
            return Err(Error::InvalidInput(format!(
                "boundary samples {} for problem {}",
                if boundary.is_some() { "provided" } else { "missing" },
                problem.id
            )));
        }
        if let Some(b) = &boundary {
            if b.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "boundary batch length",
                    expected: n,
                    got: b.len(),
                });
            }
            for s in b {
                if !problem.domain.on_boundary(s, 1e-12) {
                    return Err(Error::InvalidInput(format!("point {s:?} not on boundary")));
                }
            }
        }
        for x in &interior {
            if !problem.domain.contains_interior(x) {
                return Err(Error::InvalidInput(format!("point {x:?} not in domain interior")));
            }
        }
        for z in &stochastic {
            if !problem.z_law.contains(z) {
                return Err(Error::InvalidInput(format!("vector {z:?} outside Z support")));
            }
        }
        Ok(Self { interior, boundary, stochastic })
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }
}

/// Independent streams for the three batch components.
#[derive(Debug, Clone)]
pub struct BatchStreams {
    pub interior: RngStream,
    pub boundary: RngStream,
    pub stochastic: RngStream,
}

impl BatchStreams {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            interior: RngStream::new(seed, stream_id::INTERIOR),
            boundary: RngStream::new(seed, stream_id::BOUNDARY),
            stochastic: RngStream::new(seed, stream_id::STOCHASTIC),
        }
    }
}

/// Draw a mini-batch of `n` sample triples for `problem`.
pub fn sample_batch(problem: &ProblemSpec, n: usize, streams: &mut BatchStreams) -> Result<Batch> {
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let interior = problem.domain.sample_interior(&mut streams.interior, n)?;
    let boundary = if problem.has_boundary_term() {
        Some(problem.domain.sample_boundary(&mut streams.boundary, n)?)
    } else {
        None
    };
    let stochastic = problem.z_law.sample(&mut streams.stochastic, n)?;
    Batch::new(problem, interior, boundary, stochastic)
}

/// Stable ids of the built-in problems.
pub const PROBLEM_IDS: [&str; 4] = ["p1_1d_lognormal", "p2_neumann", "p3_dirichlet", "p4_langevin"];

/// Tunables for problem construction.
#[derive(Debug, Clone)]
pub struct ProblemOptions {
    /// Total Gauss-Legendre node budget for the 1D exact-solution quadrature.
    pub p1_quad_nodes: usize,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        Self { p1_quad_nodes: P1_QUAD_NODES }
    }
}

/// Build a benchmark by id with default options.
pub fn make_problem(id: &str, d: usize) -> Result<ProblemSpec> {
    make_problem_with(id, d, &ProblemOptions::default())
}

/// Build a benchmark by id.
pub fn make_problem_with(id: &str, d: usize, opts: &ProblemOptions) -> Result<ProblemSpec> {
    match id {
        "p1_1d_lognormal" => benchmarks::p1_lognormal(d, opts),
        "p2_neumann" => benchmarks::p2_neumann(d),
        "p3_dirichlet" => benchmarks::p3_dirichlet(d),
        "p4_langevin" => benchmarks::p4_langevin(d),
        _ => Err(Error::UnknownProblem(id.to_string())),
    }
}
