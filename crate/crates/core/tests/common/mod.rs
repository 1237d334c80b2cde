//! Independent oracles for the elliptic kernel: Jacobi functions via their
//! theta-series representation and the complete integral via direct
//! quadrature of its defining integral.  These deliberately share no code
//! with the AGM/Landen implementation they check.
#![allow(dead_code)] // shared between test binaries; each uses a subset

use num_complex::Complex64;

/// K(k) by composite Simpson quadrature of the defining integral
/// int_0^{pi/2} dtheta / sqrt(1 - k^2 sin^2 theta).
pub fn quadrature_k(k: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let m = k * k;
    let f = |t: f64| 1.0 / (1.0 - m * t.sin() * t.sin()).sqrt();
    let h = std::f64::consts::FRAC_PI_2 / n as f64;
    let mut acc = f(0.0) + f(std::f64::consts::FRAC_PI_2);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

fn theta1(v: Complex64, q: f64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..24 {
        let e = (n as f64 + 0.5) * (n as f64 + 0.5);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * q.powf(e) * ((2 * n + 1) as f64 * v).sin();
    }
    2.0 * sum
}

fn theta2(v: Complex64, q: f64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..24 {
        let e = (n as f64 + 0.5) * (n as f64 + 0.5);
        sum += q.powf(e) * ((2 * n + 1) as f64 * v).cos();
    }
    2.0 * sum
}

fn theta3(v: Complex64, q: f64) -> Complex64 {
    let mut sum = Complex64::new(1.0, 0.0);
    for n in 1..24 {
        sum += 2.0 * q.powi(n * n) * ((2 * n) as f64 * v).cos();
    }
    sum
}

fn theta4(v: Complex64, q: f64) -> Complex64 {
    let mut sum = Complex64::new(1.0, 0.0);
    for n in 1..24 {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sum += 2.0 * sign * q.powi(n * n) * ((2 * n) as f64 * v).cos();
    }
    sum
}

/// sn, cn, dn by theta series.  Valid for 0 < k < 1 and arguments with
/// moderate imaginary part (the series is summed to 24 terms).
pub fn theta_jacobi(
    u: Complex64,
    big_k: f64,
    big_k_prime: f64,
) -> (Complex64, Complex64, Complex64) {
    let q = (-std::f64::consts::PI * big_k_prime / big_k).exp();
    let v = u * std::f64::consts::FRAC_PI_2 / big_k;
    let zero = Complex64::new(0.0, 0.0);
    let t10 = theta1(v, q);
    let t20 = theta2(v, q);
    let t30 = theta3(v, q);
    let t40 = theta4(v, q);
    let t2z = theta2(zero, q);
    let t3z = theta3(zero, q);
    let t4z = theta4(zero, q);
    let sn = (t3z / t2z) * (t10 / t40);
    let cn = (t4z / t2z) * (t20 / t40);
    let dn = (t4z / t3z) * (t30 / t40);
    (sn, cn, dn)
}
