//! Reference implementations used only by tests. Nothing here calls into the
//! library's numerics, so agreement with it is a genuine cross-check.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

pub fn ln_fact(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn ln_choose(n: usize, k: usize) -> f64 {
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// `ln Gamma(n + 1/2)` from `(2n)! sqrt(pi) / (4^n n!)`.
pub fn ln_gamma_half(n: usize) -> f64 {
    ln_fact(2 * n) + 0.5 * PI.ln() - n as f64 * 4f64.ln() - ln_fact(n)
}

pub fn poisson(d: usize, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if d == 0 { 1.0 } else { 0.0 };
    }
    (d as f64 * lambda.ln() - lambda - ln_fact(d)).exp()
}

/// Record probability for equal Poissonian modes: a Poissonian count total
/// times the Beta-like split weight.
pub fn plr_reference(nbar: f64, eps: f64, l: usize, r: usize) -> f64 {
    let d = l + r;
    let split = ln_choose(d, l) + ln_gamma_half(r) + ln_gamma_half(l) - PI.ln() - ln_fact(d);
    poisson(d, 2.0 * eps * nbar) * split.exp()
}

/// Periodic trapezoid mean of `f` over one period; exact for trigonometric
/// polynomials of degree below `n`.
pub fn periodic_mean(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..n).map(|i| f(TAU * i as f64 / n as f64)).sum::<f64>() / n as f64
}

/// Full-period mean of `(1 + R cos t)^r (1 - R cos t)^l`.
pub fn asym_mean(rr: f64, l: usize, r: usize) -> f64 {
    periodic_mean(2 * (l + r) + 64, |t| {
        let c = rr * t.cos();
        (1.0 + c).powi(r as i32) * (1.0 - c).powi(l as i32)
    })
}

/// Ascending series for `J0`; accurate to ~1e-13 for `|x| <= 15`.
pub fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..200 {
        term *= q / (m as f64 * m as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-3) {
            break;
        }
    }
    sum
}

/// `<l, r| U |k1, k2>` for the balanced splitter `a -> (a + b)/sqrt2`,
/// `b -> (a - b)/sqrt2`, by expanding the creation-operator polynomial.
pub fn splitter_element(k1: usize, k2: usize, l: usize, r: usize) -> f64 {
    if k1 + k2 != l + r {
        return 0.0;
    }
    let mut c = 0.0;
    for i in 0..=k1 {
        let j = match l.checked_sub(i) {
            Some(j) if j <= k2 => j,
            _ => continue,
        };
        let sign = if (k2 - j) % 2 == 0 { 1.0 } else { -1.0 };
        c += sign * (ln_choose(k1, i) + ln_choose(k2, j)).exp();
    }
    let d = (k1 + k2) as f64;
    c * (0.5 * (ln_fact(l) + ln_fact(r) - ln_fact(k1) - ln_fact(k2)) - 0.5 * d * 2f64.ln()).exp()
}

/// Exact `(l, r)` record probability for `|N, N>` with fraction `eps` of each
/// mode leaked and the leaked light combined on a balanced splitter.
pub fn plr_fock_reference(n: usize, eps: f64, l: usize, r: usize) -> f64 {
    let keep = |k: usize| (ln_choose(n, k) + k as f64 * eps.ln() + (n - k) as f64 * (1.0 - eps).ln()).exp();
    let d = l + r;
    (0..=d)
        .filter(|k1| *k1 <= n && d - k1 <= n)
        .map(|k1| keep(k1) * keep(d - k1) * splitter_element(k1, d - k1, l, r).powi(2))
        .sum()
}

/// Normalized samples of `f` on the `n`-point phase grid.
pub fn phase_samples(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|i| f(TAU * i as f64 / n as f64)).collect();
    let mass = v.iter().sum::<f64>() * TAU / n as f64;
    v.into_iter().map(|x| x / mass).collect()
}

/// Modulus of the first circular Fourier coefficient of a normalized grid.
pub fn first_harmonic(v: &[f64]) -> f64 {
    let n = v.len();
    let h = TAU / n as f64;
    let (mut c, mut s) = (0.0, 0.0);
    for (i, x) in v.iter().enumerate() {
        c += x * (h * i as f64).cos();
        s += x * (h * i as f64).sin();
    }
    (c * h).hypot(s * h)
}

/// Chi-square survival function for `k` degrees of freedom via the
/// Wilson-Hilferty cube-root normal approximation.
pub fn chi2_sf(x: f64, k: usize) -> f64 {
    let k = k as f64;
    let z = ((x / k).cbrt() - (1.0 - 2.0 / (9.0 * k))) / (2.0 / (9.0 * k)).sqrt();
    0.5 * erfc(z / 2f64.sqrt())
}

fn erfc(x: f64) -> f64 {
    // Numerical Recipes erfcc, relative error below 1.2e-7
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807 + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}
