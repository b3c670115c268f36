//! Special functions and slowly converging series.

use std::f64::consts::PI;

pub use libm::{erf, erfc};
pub use statrs::function::beta::beta_reg;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

use crate::quad;

// B_{2j} / (2j)! for j = 1..=8.
const BERNOULLI_OVER_FACT: [f64; 8] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40320.0,
    5.0 / 66.0 / 3628800.0,
    -691.0 / 2730.0 / 479001600.0,
    7.0 / 6.0 / 87178291200.0,
    -3617.0 / 510.0 / 20922789888000.0,
];

/// Hurwitz zeta `ζ(s, q) = Σ_{k≥0} (q+k)^{-s}` for `s > 1`, `q > 0`.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0 && q > 0.0, "hurwitz_zeta needs s > 1, q > 0");
    let n = if q < 16.0 { 16 - q as usize } else { 0 };
    let mut head = 0.0;
    for k in 0..n {
        head += (q + k as f64).powf(-s);
    }
    let a = q + n as f64;
    let mut tail = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // Euler–Maclaurin: Σ_j B_{2j}/(2j)! · s(s+1)…(s+2j−2) · a^{−s−2j+1}
    let mut rising = s;
    let mut pow = a.powf(-s - 1.0);
    let a2 = a * a;
    for (j, c) in BERNOULLI_OVER_FACT.iter().enumerate() {
        let term = c * rising * pow;
        tail += term;
        if term.abs() < 1e-18 * tail.abs() {
            break;
        }
        let k = 2.0 * j as f64 + 1.0;
        rising *= (s + k) * (s + k + 1.0);
        pow /= a2;
    }
    head + tail
}

/// Riemann zeta for `s > 1`.
pub fn zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper normal tail `P[Z > z]`, accurate far in the tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `Σ_{n>m} f(n)` for a smooth `f` that decays at least like `x^{-1-α}`.
///
/// Terms up to a cutoff are summed directly; the remainder uses
/// Euler–Maclaurin with the integral computed under `x = A·u^{-1/α}`, which
/// turns a pure power tail into a constant integrand on `(0, 1]`.
pub fn tail_sum(f: impl Fn(f64) -> f64, alpha: f64, m: u64) -> f64 {
    const CUTOFF: u64 = 4096;
    let start = m + 1;
    let a_int = start.max(CUTOFF);
    let mut head = 0.0;
    for n in start..a_int {
        head += f(n as f64);
    }
    let a = a_int as f64;
    let integral = quad::integrate(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let x = a * u.powf(-1.0 / alpha);
            f(x) * (a / alpha) * u.powf(-1.0 / alpha - 1.0)
        },
        0.0,
        1.0,
        1e-15,
        1e-13,
    )
    .value;
    let h = 1e-2 * a;
    let d1 = (8.0 * (f(a + h) - f(a - h)) - (f(a + 2.0 * h) - f(a - 2.0 * h))) / (12.0 * h);
    head + integral + 0.5 * f(a) - d1 / 12.0
}

/// `Σ_{n>m} e^{-λn} n^{-3/2}` for `λ ≥ 0`.
pub fn exp_power_tail(lambda: f64, m: u64) -> f64 {
    assert!(lambda >= 0.0);
    if lambda == 0.0 {
        return hurwitz_zeta(1.5, m as f64 + 1.0);
    }
    let mut sum = 0.0;
    let mut n = m + 1;
    loop {
        let x = n as f64;
        if n >= 1024 && lambda * x <= 1.0 {
            return sum + exp_power_from(lambda, x);
        }
        let t = (-lambda * x).exp() * x.powf(-1.5);
        sum += t;
        if t <= 1e-18 * sum {
            return sum;
        }
        n += 1;
    }
}

// Σ_{n≥a} e^{-λn} n^{-3/2} by Euler–Maclaurin around the closed-form integral.
fn exp_power_from(lambda: f64, a: f64) -> f64 {
    let f = |x: f64| (-lambda * x).exp() * x.powf(-1.5);
    let d1 = -f(a) * (lambda + 1.5 / a);
    let integral =
        2.0 * (-lambda * a).exp() / a.sqrt() - 2.0 * (PI * lambda).sqrt() * erfc((lambda * a).sqrt());
    integral + 0.5 * f(a) - d1 / 12.0
}
