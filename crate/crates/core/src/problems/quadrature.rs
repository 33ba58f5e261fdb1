//! Gauss-Legendre quadrature: node/weight generation and composite rules.
//! Backs the 1D benchmark's exact-solution evaluation.

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// via Newton iteration on the Legendre recurrence. Nodes ascend.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Newton starts near +1; store mirrored so nodes ascend.
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Composite Gauss-Legendre integral of `f` over [lo, hi] split into `panels`
/// equal panels, using the supplied base rule per panel.
pub fn composite_gl(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    panels: usize,
    nodes: &[f64],
    weights: &[f64],
) -> f64 {
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let mid = a + 0.5 * width;
        let half = 0.5 * width;
        let mut panel_sum = 0.0;
        for (&t, &w) in nodes.iter().zip(weights) {
            panel_sum += w * f(mid + half * t);
        }
        total += panel_sum * half;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [1usize, 2, 5, 16, 128] {
            let (_, w) = gauss_legendre(n);
            let sum: f64 = w.iter().sum();
            assert!((sum - 2.0).abs() < 1e-13, "n={n} sum={sum}");
        }
    }

    #[test]
    fn two_point_rule_is_exact() {
        let (x, w) = gauss_legendre(2);
        let t = 1.0 / 3.0f64.sqrt();
        assert!((x[0] + t).abs() < 1e-14 && (x[1] - t).abs() < 1e-14);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn integrates_high_degree_polynomials_exactly() {
        // n-point GL is exact for degree 2n-1.
        let (x, w) = gauss_legendre(8);
        let integral = composite_gl(|t| t.powi(14), -1.0, 1.0, 1, &x, &w);
        assert!((integral - 2.0 / 15.0).abs() < 1e-14);
        let odd = composite_gl(|t| t.powi(15), -1.0, 1.0, 1, &x, &w);
        assert!(odd.abs() < 1e-15);
    }

    #[test]
    fn composite_matches_smooth_integral() {
        let (x, w) = gauss_legendre(16);
        let integral = composite_gl(f64::exp, 0.0, 1.0, 4, &x, &w);
        assert!((integral - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }
}
