//! Seedable random streams and the geometric samplers the trainer needs:
//! uniform boxes, box boundaries, unit spheres, unit balls, Gaussian vectors.
//!
//! Every sampler draws from an [`RngStream`], a (seed, stream id) pair backed
//! by a counter-based generator. Streams with equal (seed, stream id) replay
//! the same sequence; distinct stream ids are independent. The trainer derives
//! one stream per purpose (interior points, boundary points, stochastic
//! vectors, initialization, evaluation) from a single run seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Well-known stream ids. The trainer and CLI derive all streams from the run
/// seed with these ids so runs are reproducible end to end.
pub mod stream_id {
    /// Interior sample points X.
    pub const INTERIOR: u64 = 0;
    /// Boundary sample points S.
    pub const BOUNDARY: u64 = 1;
    /// Stochastic vectors Z.
    pub const STOCHASTIC: u64 = 2;
    /// Network weight initialization.
    pub const INIT: u64 = 3;
    /// Held-out evaluation draws.
    pub const EVAL: u64 = 4;
    /// Random test directions for residual diagnostics.
    pub const DIRECTION: u64 = 5;
}

/// A deterministic, seedable random stream.
///
/// Single-owner: one stream must not be drawn from concurrently. Use distinct
/// stream ids for concurrent work.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw from the open interval (0, 1).
    ///
    /// The underlying generator yields [0, 1); zero is rejected so interior
    /// samples stay strictly inside their domain.
    pub fn uniform_open01(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform draw from the open interval (a, b).
    pub fn uniform_open(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.uniform_open01()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Bernoulli(1/2) draw.
    pub fn coin(&mut self) -> bool {
        self.rng.random()
    }
}

fn check_bounds(a: f64, b: f64) -> Result<()> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidBounds { a, b });
    }
    Ok(())
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be >= 1".into()));
    }
    Ok(())
}

/// `n` i.i.d. uniform points in the open box (a, b)^d.
pub fn uniform_box(rng: &mut RngStream, a: f64, b: f64, d: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    check_bounds(a, b)?;
    check_dim(d)?;
    Ok((0..n)
        .map(|_| (0..d).map(|_| rng.uniform_open(a, b)).collect())
        .collect())
}

/// `n` uniform points on the boundary of [a, b]^d.
///
/// One of the 2d facets is chosen uniformly (all facets of a cube have equal
/// area), then the remaining coordinates are uniform on the facet. For d = 1
/// this degenerates to choosing a or b with probability 1/2 each.
pub fn box_boundary(rng: &mut RngStream, a: f64, b: f64, d: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    check_bounds(a, b)?;
    check_dim(d)?;
    Ok((0..n)
        .map(|_| {
            let facet = rng.index(2 * d);
            let fixed_coord = facet / 2;
            let fixed_value = if facet % 2 == 0 { a } else { b };
            (0..d)
                .map(|i| if i == fixed_coord { fixed_value } else { rng.uniform_open(a, b) })
                .collect()
        })
        .collect())
}

/// `n` uniform points on the unit sphere in R^d: a standard normal vector
/// scaled to unit norm. Degenerate draws (norm below 1e-100) are redrawn.
pub fn uniform_sphere(rng: &mut RngStream, d: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    check_dim(d)?;
    Ok((0..n).map(|_| sphere_point(rng, d)).collect())
}

fn sphere_point(rng: &mut RngStream, d: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm >= 1e-100 {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}

/// `n` uniform points in the open unit ball in R^d.
///
/// Uses direction-radius sampling: a uniform sphere direction scaled by
/// R = U^{1/d}, the inverse CDF of P(R <= r) = r^d. This avoids the rejection
/// sampling whose acceptance rate collapses in high dimension.
pub fn uniform_ball(rng: &mut RngStream, d: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    check_dim(d)?;
    Ok((0..n)
        .map(|_| loop {
            let mut point = sphere_point(rng, d);
            let radius = rng.uniform_open01().powf(1.0 / d as f64);
            for x in &mut point {
                *x *= radius;
            }
            // Rounding can push U^{1/d} to 1.0 for U close to 1; redraw so
            // interior points stay strictly inside.
            if point.iter().map(|x| x * x).sum::<f64>() < 1.0 {
                return point;
            }
        })
        .collect())
}

/// `n` vectors of `k` i.i.d. standard normal entries.
pub fn standard_normal_vec(rng: &mut RngStream, k: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    check_dim(k)?;
    Ok((0..n)
        .map(|_| (0..k).map(|_| rng.normal()).collect())
        .collect())
}

/// Domain of a variational problem: interior and boundary samplers plus
/// membership predicates for the supported geometries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainDescriptor {
    Interval { a: f64, b: f64 },
    Hypercube { a: f64, b: f64, dim: usize },
    UnitBall { dim: usize },
}

impl DomainDescriptor {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        check_bounds(a, b)?;
        Ok(Self::Interval { a, b })
    }

    pub fn hypercube(a: f64, b: f64, dim: usize) -> Result<Self> {
        check_bounds(a, b)?;
        check_dim(dim)?;
        Ok(Self::Hypercube { a, b, dim })
    }

    pub fn unit_ball(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::UnitBall { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Interval { .. } => 1,
            Self::Hypercube { dim, .. } | Self::UnitBall { dim } => *dim,
        }
    }

    /// `n` uniform interior points.
    pub fn sample_interior(&self, rng: &mut RngStream, n: usize) -> Result<Vec<Vec<f64>>> {
        match *self {
            Self::Interval { a, b } => uniform_box(rng, a, b, 1, n),
            Self::Hypercube { a, b, dim } => uniform_box(rng, a, b, dim, n),
            Self::UnitBall { dim } => uniform_ball(rng, dim, n),
        }
    }

    /// `n` uniform boundary points.
    pub fn sample_boundary(&self, rng: &mut RngStream, n: usize) -> Result<Vec<Vec<f64>>> {
        match *self {
            Self::Interval { a, b } => box_boundary(rng, a, b, 1, n),
            Self::Hypercube { a, b, dim } => box_boundary(rng, a, b, dim, n),
            Self::UnitBall { dim } => uniform_sphere(rng, dim, n),
        }
    }

    /// Strict interior membership.
    pub fn contains_interior(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match *self {
            Self::Interval { a, b } => a < x[0] && x[0] < b,
            Self::Hypercube { a, b, .. } => x.iter().all(|&c| a < c && c < b),
            Self::UnitBall { .. } => x.iter().map(|c| c * c).sum::<f64>() < 1.0,
        }
    }

    /// Boundary membership within `tol` (exactly on the facet for boxes,
    /// unit norm within `tol` for the sphere).
    pub fn on_boundary(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match *self {
            Self::Interval { a, b } => x[0] == a || x[0] == b,
            Self::Hypercube { a, b, .. } => {
                x.iter().any(|&c| c == a || c == b) && x.iter().all(|&c| a <= c && c <= b)
            }
            Self::UnitBall { .. } => {
                (x.iter().map(|c| c * c).sum::<f64>().sqrt() - 1.0).abs() <= tol
            }
        }
    }
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against Uniform(0, 1).
pub fn ks_statistic_uniform01(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN samples"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let hi = (i as f64 + 1.0) / n - x;
        let lo = x - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}
