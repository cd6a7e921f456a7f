//! Gamma-function helpers and Dirichlet-type integrals.

use std::f64::consts::PI;

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// `ln ∫_0^1 s^{b-1} (1 - s^q)^r ds = ln[ Γ(b/q) Γ(r+1) / (q Γ(b/q + r + 1)) ]`.
pub fn ln_radial_beta(b: f64, q: f64, r: f64) -> f64 {
    let bq = b / q;
    ln_gamma(bq) + ln_gamma(r + 1.0) - ln_gamma(bq + r + 1.0) - q.ln()
}

/// Logarithm of the moment `∫ |z^α|² (1 - S(z)^q)^r dV` over the power-sum domain
/// `{S(z) = Σ_j |z_j|^{2 a_j} < 1}`.
///
/// With `t_j = |z_j|^{2a_j}` the integral is a Dirichlet integral over the simplex:
/// `Π_j (π / a_j) Γ(b_j) / Γ(B) · ∫_0^1 s^{B-1} (1 - s^q)^r ds`, where
/// `b_j = (α_j + 1)/a_j` and `B = Σ b_j`.
pub fn ln_power_sum_moment(exponents: &[f64], q: f64, alpha: &[u32], r: f64) -> f64 {
    debug_assert_eq!(exponents.len(), alpha.len());
    let mut acc = 0.0;
    let mut big_b = 0.0;
    for (&a, &k) in exponents.iter().zip(alpha) {
        let b = (k as f64 + 1.0) / a;
        big_b += b;
        acc += PI.ln() - a.ln() + ln_gamma(b);
    }
    if q == 1.0 {
        acc + ln_gamma(r + 1.0) - ln_gamma(big_b + r + 1.0)
    } else {
        acc - ln_gamma(big_b) + ln_radial_beta(big_b, q, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_matches_factorials() {
        let mut f = 1.0;
        for k in 1..20 {
            f *= k as f64;
            assert_relative_eq!(gamma(k as f64 + 1.0), f, max_relative = 1e-13);
            assert_relative_eq!(ln_gamma(k as f64 + 1.0), f.ln(), max_relative = 1e-13);
        }
        assert_relative_eq!(gamma(0.5), PI.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn disk_moments_match_factorial_formula() {
        // π k! Γ(r+1) / Γ(k+r+2)
        for r in [0.0, 1.0, 2.0, 0.5] {
            for k in 0..30u32 {
                let expected = PI * gamma(k as f64 + 1.0) * gamma(r + 1.0) / gamma(k as f64 + r + 2.0);
                let got = ln_power_sum_moment(&[1.0], 1.0, &[k], r).exp();
                assert_relative_eq!(got, expected, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn linear_defining_function_on_disk() {
        // ∫ |z|^{2k} (1 - |z|) dA = 2π / ((2k+2)(2k+3))
        for k in 0..10u32 {
            let kf = k as f64;
            let expected = 2.0 * PI / ((2.0 * kf + 2.0) * (2.0 * kf + 3.0));
            let got = ln_power_sum_moment(&[1.0], 0.5, &[k], 1.0).exp();
            assert_relative_eq!(got, expected, max_relative = 1e-12);
        }
    }
}
