//! Special functions: log-factorials, a double-double accumulator, the scaled
//! Legendre recurrence, Bessel J0 and Gauss-Legendre nodes.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;

const FACT_TABLE_LEN: usize = 171;

fn ln_fact_table() -> &'static [f64; FACT_TABLE_LEN] {
    static TABLE: OnceLock<[f64; FACT_TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; FACT_TABLE_LEN];
        let mut f = 1.0f64;
        for (n, slot) in t.iter_mut().enumerate().skip(1) {
            f *= n as f64;
            *slot = f.ln();
        }
        t
    })
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn ln_factorial(n: usize) -> f64 {
    if n < FACT_TABLE_LEN {
        ln_fact_table()[n]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n, "ln_binomial: k > n");
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// log of the Poisson mass e^{-lambda} lambda^k / k!.
pub fn ln_poisson(k: usize, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * lambda.ln() - lambda - ln_factorial(k)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Unnormalized double-double number, hi + lo with |lo| <= ulp(hi)/2.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let r = self.sub(Dd::from_f64(b).mul_f64(q1));
        let q2 = r.hi / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            self.neg()
        } else {
            self
        }
    }
}

/// Scaled Legendre values `Q_n = s^n P_n(1/s)` for `n = 0..=n_max`, where `s2 = s^2`.
///
/// The scaling keeps every term finite when `s -> 0` and satisfies
/// `Q_{n+1} = ((2n+1) Q_n - n s^2 Q_{n-1}) / (n+1)` with `Q_0 = Q_1 = 1`.
pub fn legendre_scaled(n_max: usize, s2: f64) -> Vec<Dd> {
    let mut q = Vec::with_capacity(n_max + 1);
    q.push(Dd::ONE);
    if n_max == 0 {
        return q;
    }
    q.push(Dd::ONE);
    let s2 = Dd::from_f64(s2);
    for n in 1..n_max {
        let a = q[n].mul_f64((2 * n + 1) as f64);
        let b = q[n - 1].mul(s2).mul_f64(n as f64);
        q.push(a.sub(b).div_f64((n + 1) as f64));
    }
    q
}

/// Mean over a full period of `(1 + R cos t)^r (1 - R cos t)^l` from scaled
/// Legendre values `q` (length at least `l + r + 1`).
///
/// Returns the value together with the sum of absolute terms, whose ratio
/// bounds the cancellation suffered by the alternating sum.
pub fn legendre_mix_sum(l: usize, r: usize, q: &[Dd]) -> (f64, f64) {
    let (lo, hi) = if l <= r { (l, r) } else { (r, l) };
    let d = lo + hi;
    assert!(q.len() > d, "legendre_mix_sum: need {} scaled values", d + 1);
    let mut acc = Dd::ZERO;
    let mut abs_acc = 0.0;
    // c = C(lo, j) (-2)^j, built exactly in double-double.
    let mut c = Dd::ONE;
    for j in 0..=lo {
        let term = c.mul(q[d - j]);
        abs_acc += term.to_f64().abs();
        acc = acc.add(term);
        c = c.mul_f64(-2.0 * (lo - j) as f64).div_f64((j + 1) as f64);
    }
    let v = if lo % 2 == 1 { acc.neg() } else { acc };
    (v.to_f64(), abs_acc)
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-8 {
        return 1.0 - 0.25 * ax * ax;
    }
    if ax <= 25.0 {
        j0_miller(ax)
    } else {
        j0_asymptotic(ax)
    }
}

// Backward recurrence normalized with J0 + 2 sum J_{2k} = 1.
fn j0_miller(x: f64) -> f64 {
    let mut m = (x + 30.0 + 6.0 * x.sqrt()) as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let mut jp1 = 0.0f64;
    let mut j = 1e-30f64;
    let mut norm = 0.0f64;
    let mut j0 = 0.0;
    for k in (1..=m).rev() {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        let idx = k - 1;
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * j;
        }
        if idx == 0 {
            j0 = j;
            norm += j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
        }
    }
    j0 / norm
}

// Hankel expansion; terms shrink until k ~ 2x so 25 leaves ample headroom.
fn j0_asymptotic(x: f64) -> f64 {
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut t = 1.0f64;
    for k in 1..=60usize {
        let a = (2 * k - 1) as f64;
        t *= a * a / (k as f64 * z);
        if k % 2 == 0 {
            p += if (k / 2) % 2 == 1 { -t } else { t };
        } else {
            q += if ((k + 1) / 2) % 2 == 1 { -t } else { t };
        }
        if t < 1e-17 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = -z;
        xs[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_keeps_bits_a_double_loses() {
        let a = Dd::from_f64(1.0).add(Dd::from_f64(1e-20));
        let b = a.sub(Dd::ONE);
        assert!((b.to_f64() - 1e-20).abs() < 1e-35);
        let third = Dd::ONE.div_f64(3.0);
        let back = third.mul_f64(3.0).sub(Dd::ONE);
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn scaled_legendre_at_unit_argument() {
        // s = 1 gives P_n(1) = 1
        let q = legendre_scaled(30, 1.0);
        for v in q {
            assert!((v.to_f64() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn j0_known_values() {
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j0(10.0) + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-14);
        assert!((bessel_j0(30.0) + 0.086_367_983_581_040_22).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((s - 2.0 / 23.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
