//! Gauss–Jacobi rules on `[0, 1]` via the Golub–Welsch eigenvalue method.

use nalgebra::DMatrix;

use crate::special::ln_gamma;

/// Nodes and weights integrating `u^β (1-u)^α p(u)` exactly on `[0,1]` for
/// polynomials `p` of degree at most `2n - 1`.
#[derive(Debug, Clone)]
pub struct JacobiRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl JacobiRule {
    /// `alpha` weights the `u = 1` end, `beta` the `u = 0` end. Both must exceed `-1`.
    pub fn new(n: usize, alpha: f64, beta: f64) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        assert!(alpha > -1.0 && beta > -1.0, "Jacobi exponents must exceed -1");
        let s = alpha + beta;
        // total mass of (1-x)^α (1+x)^β on [-1,1]
        let ln_mu0 = (s + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
            - ln_gamma(s + 2.0);
        let mu0 = ln_mu0.exp();

        let diag = |k: usize| -> f64 {
            let kf = k as f64;
            if k == 0 {
                (beta - alpha) / (s + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * kf + s) * (2.0 * kf + s + 2.0))
            }
        };
        let off = |k: usize| -> f64 {
            // coefficient b_k for k >= 1
            let kf = k as f64;
            let t = 2.0 * kf + s;
            let sq = if k == 1 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + s).powi(2) * (3.0 + s))
            } else {
                4.0 * kf * (kf + alpha) * (kf + beta) * (kf + s) / (t * t * (t + 1.0) * (t - 1.0))
            };
            sq.sqrt()
        };

        let mut jm = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            jm[(k, k)] = diag(k);
            if k + 1 < n {
                let b = off(k + 1);
                jm[(k, k + 1)] = b;
                jm[(k + 1, k)] = b;
            }
        }
        let eig = jm.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = eig.eigenvalues[i];
                let v0 = eig.eigenvectors[(0, i)];
                (x, v0 * v0 * mu0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let scale = 2f64.powf(-(s + 1.0));
        Self {
            nodes: pairs.iter().map(|p| 0.5 * (p.0 + 1.0)).collect(),
            weights: pairs.iter().map(|p| p.1 * scale).collect(),
        }
    }

    pub fn legendre(n: usize) -> Self {
        Self::new(n, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;
    use approx::assert_relative_eq;

    fn beta_fn(a: f64, b: f64) -> f64 {
        gamma(a) * gamma(b) / gamma(a + b)
    }

    #[test]
    fn integrates_monomials_exactly() {
        for &(alpha, beta) in &[(0.0, 0.0), (0.0, 1.0), (-0.5, -0.5), (-0.75, -0.75), (0.5, -0.5), (2.0, 0.0), (0.0, -0.75)] {
            let n = 12;
            let rule = JacobiRule::new(n, alpha, beta);
            for k in 0..(2 * n) {
                let got: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(u, w)| w * u.powi(k as i32))
                    .sum();
                let expected = beta_fn(beta + 1.0 + k as f64, alpha + 1.0);
                assert_relative_eq!(got, expected, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn large_legendre_rule_is_accurate() {
        let rule = JacobiRule::legendre(128);
        let total: f64 = rule.weights.iter().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-13);
        let m: f64 = rule.nodes.iter().zip(&rule.weights).map(|(u, w)| w * u.powi(100)).sum();
        assert_relative_eq!(m, 1.0 / 101.0, max_relative = 1e-12);
        assert!(rule.nodes.iter().all(|&u| u > 0.0 && u < 1.0));
    }
}
