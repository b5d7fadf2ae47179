//! Gauss–Legendre rules and composite panel quadrature.

use std::sync::OnceLock;

/// Largest number of nodes served from the rule table.
pub const MAX_POINTS: usize = 96;

#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_rule(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    if n == 1 {
        return GaussRule { nodes, weights: vec![2.0] };
    }
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// The `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> &'static GaussRule {
    static TABLE: OnceLock<Vec<GaussRule>> = OnceLock::new();
    assert!((1..=MAX_POINTS).contains(&n), "Gauss rule size {n} unsupported");
    &TABLE.get_or_init(|| (1..=MAX_POINTS).map(compute_rule).collect())[n - 1]
}

/// Nodes and weights of the `n`-point rule mapped to `[a, b]`.
pub fn gauss_on(n: usize, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let rule = gauss_legendre(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.nodes.iter().zip(&rule.weights).map(move |(&x, &w)| (m + h * x, h * w))
}

/// Composite rule: `panels` equal panels on `[a, b]`, `n` points each.
pub fn composite(n: usize, panels: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    (0..panels).flat_map(|k| gauss_on(n, a + k as f64 * h, a + (k + 1) as f64 * h)).collect()
}

/// Integrates `f` over `[a, b]` with the composite rule.
pub fn integrate(f: impl Fn(f64) -> f64, n: usize, panels: usize, a: f64, b: f64) -> f64 {
    composite(n, panels, a, b).into_iter().map(|(x, w)| w * f(x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in 1..=20 {
            for d in 0..(2 * n) {
                let approx: f64 = gauss_on(n, 0.0, 1.0).map(|(x, w)| w * x.powi(d as i32)).sum();
                assert_relative_eq!(approx, 1.0 / (d as f64 + 1.0), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn weights_sum_to_two_for_large_rules() {
        for n in [40, 64, MAX_POINTS] {
            let s: f64 = gauss_legendre(n).weights.iter().sum();
            assert_relative_eq!(s, 2.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn composite_integrates_smooth_functions() {
        let v = integrate(f64::sin, 8, 4, 0.0, std::f64::consts::PI);
        assert_relative_eq!(v, 2.0, max_relative = 1e-14);
    }
}
