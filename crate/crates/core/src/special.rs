//! Small special-function toolbox: factorials, generalized Laguerre
//! polynomials, quadrature wavefunctions and the normal distribution.

use std::f64::consts::{FRAC_2_PI, SQRT_2};

/// n! as a float. Exact up to 22!.
pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Binomial coefficient C(n, k) as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// (k−1)!! for even k, i.e. the k-th moment of a unit-variance normal;
/// zero for odd k.
pub fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(f64::from).product()
}

/// Generalized Laguerre polynomial L_n^α(z) by the upward recurrence
/// (k+1) L_{k+1} = (2k+1+α−z) L_k − (k+α) L_{k−1}.
pub fn laguerre(n: u32, alpha: u32, z: f64) -> f64 {
    let a = f64::from(alpha);
    let (mut prev, mut cur) = (1.0, 1.0 + a - z);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = f64::from(k);
        let next = ((2.0 * k + 1.0 + a - z) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Power-series coefficients of L_n^α: entry k multiplies z^k.
pub fn laguerre_coefficients(n: u32, alpha: u32) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(n + alpha, n - k) / factorial(k)
        })
        .collect()
}

/// Coefficients of the polynomial part h_n of the quadrature wavefunction
/// φ_n(x) = h_n(x) (2/π)^{1/4} e^{−x²} in the X = (a + a†)/2 convention.
///
/// h_0 = 1, h_1 = 2x, h_{n+1} = (2/√(n+1)) x h_n − √(n/(n+1)) h_{n−1}.
pub fn wavefunction_poly(n: u32) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 2.0];
    for k in 1..n {
        let k = f64::from(k);
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += 2.0 / (k + 1.0).sqrt() * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= (k / (k + 1.0)).sqrt() * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// φ_n(x), normalized so that ∫φ_n² dx = 1.
pub fn wavefunction(n: u32, x: f64) -> f64 {
    let h = eval_poly(&wavefunction_poly(n), x);
    h * FRAC_2_PI.sqrt().sqrt() * (-x * x).exp()
}

/// Horner evaluation; `coeffs[k]` multiplies x^k.
pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Density of N(0, var) at x.
pub fn normal_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Standard normal CDF Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn laguerre_examples() {
        for alpha in 0..4 {
            assert_eq!(laguerre(0, alpha, 3.7), 1.0);
        }
        assert_eq!(laguerre(1, 0, 0.25), 0.75);
        assert!((laguerre(2, 0, 2.0) + 1.0).abs() < 1e-15);
        // L_2^1(z) = (z² − 6z + 6)/2
        let z = 1.3;
        assert!((laguerre(2, 1, z) - (z * z - 6.0 * z + 6.0) / 2.0).abs() < 1e-14);
    }

    // Rodrigues-free oracle: the explicit sum Σ (−1)^k C(n+α, n−k) z^k / k!.
    proptest! {
        #[test]
        fn recurrence_matches_explicit_sum(n in 0u32..8, alpha in 0u32..5, z in 0.0f64..12.0) {
            let explicit = eval_poly(&laguerre_coefficients(n, alpha), z);
            let scale = 1.0 + explicit.abs();
            prop_assert!((laguerre(n, alpha, z) - explicit).abs() < 1e-11 * scale * 10f64.powi(n as i32 / 3));
        }
    }

    #[test]
    fn wavefunctions_are_orthonormal() {
        // Fine Riemann sum; the integrands decay like e^{−2x²}.
        let h = 1e-3;
        for n in 0..4 {
            for m in 0..4 {
                let s: f64 = (-8000..=8000)
                    .map(|i| {
                        let x = f64::from(i) * h;
                        wavefunction(n, x) * wavefunction(m, x)
                    })
                    .sum::<f64>()
                    * h;
                let expect = if n == m { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-10, "{n} {m}: {s}");
            }
        }
    }

    #[test]
    fn low_wavefunctions() {
        let c = FRAC_2_PI.sqrt().sqrt();
        let x = 0.37;
        assert!((wavefunction(0, x) - c * (-x * x).exp()).abs() < 1e-15);
        assert!((wavefunction(1, x) - c * 2.0 * x * (-x * x).exp()).abs() < 1e-15);
    }

    #[test]
    fn normal_helpers() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((normal_pdf(0.0, 0.25) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert_eq!(gaussian_moment(4), 3.0);
        assert_eq!(gaussian_moment(3), 0.0);
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(factorial(5), 120.0);
    }
}
