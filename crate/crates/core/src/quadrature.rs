//! Radial quadrature helpers shared by the norm, mass and energy computations.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;

/// Surface area of the unit sphere in `R^dim`; 2 for `dim = 1`.
pub fn sphere_area(dim: usize) -> f64 {
    // 2 pi^{N/2} / Gamma(N/2), with Gamma at half-integers by recurrence.
    let half = dim as f64 / 2.0;
    2.0 * PI.powf(half) / gamma_half_integer(dim)
}

fn gamma_half_integer(dim: usize) -> f64 {
    // Gamma(dim / 2)
    if dim % 2 == 0 {
        (1..dim / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < dim as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Composite Simpson weights for `n` equally spaced samples with spacing `h`.
///
/// An even number of intervals uses pure Simpson; an odd count closes the last
/// three intervals with the Simpson 3/8 rule. `n = 2` falls back to the trapezoid.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => return w,
        2 => {
            w[0] = h / 2.0;
            w[1] = h / 2.0;
            return w;
        }
        3 => {
            w[0] = h / 3.0;
            w[1] = 4.0 * h / 3.0;
            w[2] = h / 3.0;
            return w;
        }
        _ => {}
    }
    let intervals = n - 1;
    let simpson_end = if intervals % 2 == 0 { n - 1 } else { n - 4 };
    for i in (0..simpson_end).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if intervals % 2 == 1 {
        let s = simpson_end;
        let c = 3.0 * h / 8.0;
        w[s] += c;
        w[s + 1] += 3.0 * c;
        w[s + 2] += 3.0 * c;
        w[s + 3] += c;
    }
    w
}

/// Composite Simpson integral of equally spaced samples.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    simpson_weights(values.len(), h)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

/// Uniform radial grid on `[0, r_max]` with Simpson weights that include the
/// surface measure `omega_N r^{N-1}`.
#[derive(Debug, Clone)]
pub struct RadialQuadrature {
    pub dim: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialQuadrature {
    pub fn uniform(dim: usize, r_max: f64, n: usize) -> Self {
        assert!(n >= 3, "radial quadrature needs at least three nodes");
        let h = r_max / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
        let omega = sphere_area(dim);
        let weights = simpson_weights(n, h)
            .into_iter()
            .zip(&nodes)
            .map(|(w, &r)| w * omega * radial_power(r, dim))
            .collect();
        Self {
            dim,
            nodes,
            weights,
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| if w == 0.0 { 0.0 } else { w * f(r) })
            .sum()
    }

    pub fn integrate_samples(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// `r^{N-1}` with the convention `0^0 = 1`.
pub fn radial_power(r: f64, dim: usize) -> f64 {
    if dim == 1 {
        1.0
    } else {
        r.powi(dim as i32 - 1)
    }
}

/// Fixed-order Gauss-Legendre rule mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        let rule = GaussLegendre::new(order).expect("Gauss-Legendre order must be at least 2");
        let (nodes, weights): (Vec<f64>, Vec<f64>) = rule.iter().map(|&(x, w)| (x, w)).unzip();
        Self { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0, epsilon = 1e-15);
        assert_relative_eq!(sphere_area(2), 2.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, epsilon = 1e-13);
        assert_relative_eq!(sphere_area(5), 8.0 * PI * PI / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn simpson_is_exact_on_cubics_for_both_parities() {
        for n in [5usize, 6, 7, 10, 11] {
            let h = 2.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n)
                .map(|i| {
                    let x = i as f64 * h;
                    x * x * x - 2.0 * x + 1.0
                })
                .collect();
            assert_relative_eq!(simpson(&v, h), 4.0 - 4.0 + 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let g = GaussRule::new(6);
        assert_relative_eq!(g.integrate(0.0, 2.0, |x| x.powi(9)), 102.4, epsilon = 1e-11);
    }

    #[test]
    fn radial_volume_of_unit_ball() {
        let q = RadialQuadrature::uniform(3, 1.0, 101);
        assert_relative_eq!(q.integrate(|_| 1.0), 4.0 * PI / 3.0, epsilon = 1e-12);
    }
}
