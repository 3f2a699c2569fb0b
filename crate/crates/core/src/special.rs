//! Gamma-family helpers on top of `statrs`.

use statrs::function::gamma;

pub use statrs::function::gamma::{digamma, gamma};

/// 1/Γ(x), continuous through the poles at non-positive integers.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x.abs() < 0.5 {
        // 1/Γ(x) = x/Γ(1+x) avoids the reflection formula near the pole.
        return x / gamma::gamma(1.0 + x);
    }
    1.0 / gamma::gamma(x)
}

/// d/dx 1/Γ(x) = −ψ(x)/Γ(x).
pub fn rgamma_prime(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let y = 1.0 + x;
        return (1.0 - x * gamma::digamma(y)) / gamma::gamma(y);
    }
    -gamma::digamma(x) * rgamma(x)
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma::gamma_lr(a, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgamma_matches_known_values() {
        assert!((rgamma(0.5) - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-2.0), 0.0);
        assert!((rgamma(1e-9) - 1e-9).abs() < 1e-17);
        assert!((rgamma(3.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rgamma_prime_matches_central_difference() {
        for &x in &[1e-6, 0.1, 0.3, 0.49, 0.51, 0.9, 1.4, 1.99] {
            let d = 1e-5;
            let fd = (rgamma(x + d) - rgamma(x - d)) / (2.0 * d);
            assert!((rgamma_prime(x) - fd).abs() < 1e-8, "x={x}");
        }
        // 1/Γ(x) = x + γx² + ..., so the slope at 0 is 1
        assert!((rgamma_prime(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_p_limits() {
        assert_eq!(gamma_p(0.5, 0.0), 0.0);
        // P(1, x) = 1 − e^{−x}
        for &x in &[0.01, 1.0, 5.0, 20.0] {
            assert!((gamma_p(1.0, x) + (-x).exp_m1()).abs() < 1e-14);
        }
    }
}
