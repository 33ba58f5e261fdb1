//! Random-field abstraction: anything that maps (x, z) to a value and a
//! spatial gradient. Networks, exact solutions, and the combinators the
//! residual diagnostics need (scaling, perturbation, boundary cutoffs) all
//! implement or wrap [`RandomField`].

use crate::gradnet::{MlpParams, NetworkEval};
use crate::sampling::DomainDescriptor;

pub trait RandomField: Send + Sync {
    /// Value and spatial gradient at (x, z).
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval;

    /// Value only; override when it is cheaper than a full eval.
    fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        self.eval(x, z).value
    }
}

impl<T: RandomField + ?Sized> RandomField for &T {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        (**self).eval(x, z)
    }
    fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        (**self).value(x, z)
    }
}

impl<T: RandomField + ?Sized> RandomField for std::sync::Arc<T> {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        (**self).eval(x, z)
    }
    fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        (**self).value(x, z)
    }
}

/// A network realization viewed as a random field: the input is the
/// concatenation (x, z).
#[derive(Debug, Clone, Copy)]
pub struct NetworkField<'a> {
    params: &'a MlpParams,
    spatial_dim: usize,
}

impl<'a> NetworkField<'a> {
    pub fn new(params: &'a MlpParams, spatial_dim: usize) -> Self {
        assert!(
            spatial_dim >= 1 && spatial_dim < params.input_dim(),
            "spatial dimension {spatial_dim} incompatible with input width {}",
            params.input_dim()
        );
        Self { params, spatial_dim }
    }

    pub fn params(&self) -> &MlpParams {
        self.params
    }

    fn stack(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        let mut input = Vec::with_capacity(x.len() + z.len());
        input.extend_from_slice(x);
        input.extend_from_slice(z);
        input
    }
}

impl RandomField for NetworkField<'_> {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        self.params
            .forward_with_spatial_grad(&self.stack(x, z), self.spatial_dim)
            .expect("network field input shape")
    }

    fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        self.params.forward(&self.stack(x, z)).expect("network field input shape")
    }
}

/// A field given by a closure returning value and gradient together.
pub struct AnalyticField<F>(pub F)
where
    F: Fn(&[f64], &[f64]) -> NetworkEval + Send + Sync;

impl<F> RandomField for AnalyticField<F>
where
    F: Fn(&[f64], &[f64]) -> NetworkEval + Send + Sync,
{
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        (self.0)(x, z)
    }
}

/// `scale * inner`.
pub struct ScaledField<F: RandomField> {
    pub inner: F,
    pub scale: f64,
}

impl<F: RandomField> RandomField for ScaledField<F> {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        let mut e = self.inner.eval(x, z);
        e.value *= self.scale;
        for g in &mut e.spatial_grad {
            *g *= self.scale;
        }
        e
    }

    fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        self.scale * self.inner.value(x, z)
    }
}

/// `base + eps * direction`.
pub struct PerturbedField<'a> {
    pub base: &'a dyn RandomField,
    pub direction: &'a dyn RandomField,
    pub eps: f64,
}

impl RandomField for PerturbedField<'_> {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        let mut e = self.base.eval(x, z);
        let d = self.direction.eval(x, z);
        e.value += self.eps * d.value;
        for (g, dg) in e.spatial_grad.iter_mut().zip(&d.spatial_grad) {
            *g += self.eps * dg;
        }
        e
    }

    fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        self.base.value(x, z) + self.eps * self.direction.value(x, z)
    }
}

/// `inner` multiplied by a polynomial cutoff that vanishes on the domain
/// boundary, making the field an admissible test direction for Dirichlet
/// problems: (x-a)(b-x) per coordinate on boxes, 1 - |x|^2 on the ball.
pub struct CutoffField<F: RandomField> {
    pub inner: F,
    pub domain: DomainDescriptor,
}

impl DomainDescriptor {
    /// Cutoff value and gradient at `x`.
    fn cutoff(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match *self {
            DomainDescriptor::Interval { a, b } => {
                let c = (x[0] - a) * (b - x[0]);
                (c, vec![a + b - 2.0 * x[0]])
            }
            DomainDescriptor::Hypercube { a, b, dim } => {
                let factors: Vec<f64> = (0..dim).map(|i| (x[i] - a) * (b - x[i])).collect();
                // Prefix/suffix products avoid dividing by vanishing factors.
                let mut prefix = vec![1.0; dim + 1];
                for i in 0..dim {
                    prefix[i + 1] = prefix[i] * factors[i];
                }
                let mut suffix = vec![1.0; dim + 1];
                for i in (0..dim).rev() {
                    suffix[i] = suffix[i + 1] * factors[i];
                }
                let grad = (0..dim)
                    .map(|i| (a + b - 2.0 * x[i]) * prefix[i] * suffix[i + 1])
                    .collect();
                (prefix[dim], grad)
            }
            DomainDescriptor::UnitBall { dim } => {
                let norm_sq: f64 = x.iter().map(|c| c * c).sum();
                (1.0 - norm_sq, (0..dim).map(|i| -2.0 * x[i]).collect())
            }
        }
    }
}

impl<F: RandomField> RandomField for CutoffField<F> {
    fn eval(&self, x: &[f64], z: &[f64]) -> NetworkEval {
        let e = self.inner.eval(x, z);
        let (c, dc) = self.domain.cutoff(x);
        let spatial_grad = e
            .spatial_grad
            .iter()
            .zip(&dc)
            .map(|(&g, &gc)| c * g + e.value * gc)
            .collect();
        NetworkEval { value: c * e.value, spatial_grad }
    }

    fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        self.domain.cutoff(x).0 * self.inner.value(x, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::max_rel_err;

    #[test]
    fn network_field_matches_forward() {
        let p = MlpParams::init(vec![4, 6, 1], 3).unwrap();
        let f = NetworkField::new(&p, 2);
        let x = [0.2, -0.1];
        let z = [0.4, 0.9];
        let e = f.eval(&x, &z);
        assert_eq!(e.value, p.forward(&[0.2, -0.1, 0.4, 0.9]).unwrap());
        assert_eq!(e.value, f.value(&x, &z));
        assert_eq!(e.spatial_grad.len(), 2);
    }

    #[test]
    fn cutoff_vanishes_on_box_boundary_with_correct_gradient() {
        let p = MlpParams::init(vec![4, 6, 1], 5).unwrap();
        let f = CutoffField {
            inner: NetworkField::new(&p, 2),
            domain: DomainDescriptor::hypercube(0.0, 1.0, 2).unwrap(),
        };
        let z = [0.1, -0.3];
        assert_eq!(f.value(&[0.0, 0.7], &z), 0.0);
        assert_eq!(f.value(&[0.4, 1.0], &z), 0.0);

        // Gradient against finite differences of the cutoff product.
        let x = [0.3, 0.6];
        let e = f.eval(&x, &z);
        let h = 1e-6;
        let mut fd = vec![0.0; 2];
        for j in 0..2 {
            let mut xp = x;
            xp[j] += h;
            let mut xm = x;
            xm[j] -= h;
            fd[j] = (f.value(&xp, &z) - f.value(&xm, &z)) / (2.0 * h);
        }
        assert!(max_rel_err(&e.spatial_grad, &fd) < 1e-6);
    }

    #[test]
    fn cutoff_vanishes_on_sphere() {
        let p = MlpParams::init(vec![4, 6, 1], 5).unwrap();
        let f = CutoffField {
            inner: NetworkField::new(&p, 3),
            domain: DomainDescriptor::unit_ball(3).unwrap(),
        };
        let s = [0.0, 1.0, 0.0];
        assert_eq!(f.value(&s, &[0.5]), 0.0);
    }

    #[test]
    fn perturbed_and_scaled_compose() {
        let p = MlpParams::init(vec![3, 5, 1], 1).unwrap();
        let q = MlpParams::init(vec![3, 5, 1], 2).unwrap();
        let fp = NetworkField::new(&p, 2);
        let fq = NetworkField::new(&q, 2);
        let pert = PerturbedField { base: &fp, direction: &fq, eps: 0.25 };
        let x = [0.3, 0.4];
        let z = [0.8];
        assert!((pert.value(&x, &z) - (fp.value(&x, &z) + 0.25 * fq.value(&x, &z))).abs() < 1e-15);
        let scaled = ScaledField { inner: &fq, scale: -2.0 };
        assert_eq!(scaled.value(&x, &z), -2.0 * fq.value(&x, &z));
        let es = scaled.eval(&x, &z);
        let eq = fq.eval(&x, &z);
        for j in 0..2 {
            assert_eq!(es.spatial_grad[j], -2.0 * eq.spatial_grad[j]);
        }
    }
}
