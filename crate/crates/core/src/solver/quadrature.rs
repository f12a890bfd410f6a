//! Composite Gauss-Legendre quadrature.

/// Nodes per panel of the composite rule.
const PANEL_NODES: usize = 16;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: usize,
}

impl GaussLegendre {
    /// A composite rule using about `points` nodes in total.
    pub fn new(points: usize) -> Self {
        let per_panel = points.clamp(1, PANEL_NODES);
        let panels = points.div_ceil(per_panel).max(1);
        let (nodes, weights) = legendre_nodes(per_panel);
        Self {
            nodes,
            weights,
            panels,
        }
    }

    pub fn points(&self) -> usize {
        self.nodes.len() * self.panels
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        let h = (b - a) / self.panels as f64;
        let mut total = 0.0;
        for k in 0..self.panels {
            let lo = a + h * k as f64;
            let mid = lo + 0.5 * h;
            let half = 0.5 * h;
            let mut s = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + half * x);
            }
            total += half * s;
        }
        total
    }
}

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z_old = z;
            z = z_old - p1 / dp;
            if (z - z_old).abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16] {
            let (_, w) = legendre_nodes(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let q = GaussLegendre::new(16);
        let v = q.integrate(0.0, 2.0, |x| x.powi(7) - 3.0 * x * x);
        assert!((v - (256.0 / 8.0 - 8.0)).abs() < 1e-11);
    }

    #[test]
    fn smooth_integrand() {
        let q = GaussLegendre::new(64);
        assert_eq!(q.points(), 64);
        let v = q.integrate(0.0, 3.0, |x| (-x * x).exp());
        let reference = 0.886_207_348_259_521_1; // sqrt(pi)/2 * erf(3)
        assert!((v - reference).abs() < 1e-12, "{v}");
    }
}
