use std::sync::OnceLock;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of P_n found by Newton iteration from the
    /// Chebyshev-like initial guesses; weights from the derivative formula.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// 10-point rule used by the one-factor Gaussian integral.
    pub fn ten() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(10))
    }

    /// 6-point rule used by the nested conditioned quadrature.
    pub fn six() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(6))
    }

    /// Composite rule: `[a, b]` split into `panels` equal pieces. Calls
    /// `visit(z, w)` for every node.
    #[inline]
    pub fn for_each_node(&self, a: f64, b: f64, panels: usize, mut visit: impl FnMut(f64, f64)) {
        let h = (b - a) / panels as f64;
        let half = 0.5 * h;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                visit(mid + half * x, half * w);
            }
        }
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_integrate_polynomials() {
        for n in [2, 6, 10, 20] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14);
            // exact for degree 2n - 1
            let deg = 2 * n - 1;
            let approx: f64 = r
                .nodes
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(deg as i32 - 1))
                .sum();
            let exact = 2.0 / deg as f64;
            assert!((approx - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn composite_rule_integrates_exp() {
        let r = GaussLegendre::ten();
        let mut acc = 0.0;
        r.for_each_node(0.0, 3.0, 4, |z, w| acc += w * z.exp());
        assert!((acc - (3f64.exp() - 1.0)).abs() < 1e-12);
    }
}
