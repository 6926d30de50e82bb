//! Exact truncated two-mode Fock-space simulator.
//!
//! States are dense `(n_cut + 1)^2` arrays of complex amplitudes. Photon-number
//! conserving operations are exact; anything that would push amplitude past
//! the cutoff is reported as [`Error::TruncationOverflow`].

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special::{ln_binomial, ln_factorial};

// Amplitudes below this magnitude squared are not counted as support.
const SUPPORT_EPS: f64 = 1e-28;

#[derive(Debug, Clone, PartialEq)]
pub struct FockState2 {
    n_cut: usize,
    amps: Vec<Complex64>,
}

/// Two-mode linear coupling: `a^dag -> cos t a^dag + e^{i xi} sin t b^dag`,
/// `b^dag -> -e^{-i xi} sin t a^dag + cos t b^dag`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCoupling {
    pub theta: f64,
    pub xi: f64,
}

impl LinearCoupling {
    pub fn balanced() -> Self {
        LinearCoupling { theta: FRAC_PI_4, xi: 0.0 }
    }

    /// Coupling that moves a fraction `eps` of the intensity of mode 1 into mode 2.
    pub fn leakage(eps: f64) -> Self {
        LinearCoupling {
            theta: eps.sqrt().asin(),
            xi: PI,
        }
    }
}

impl FockState2 {
    pub fn zero(n_cut: usize) -> Self {
        FockState2 {
            n_cut,
            amps: vec![Complex64::new(0.0, 0.0); (n_cut + 1) * (n_cut + 1)],
        }
    }

    pub fn fock(n1: usize, n2: usize, n_cut: usize) -> Result<Self> {
        if n1 > n_cut || n2 > n_cut {
            return Err(Error::TruncationOverflow { n_cut });
        }
        let mut s = FockState2::zero(n_cut);
        s.set(n1, n2, Complex64::new(1.0, 0.0));
        Ok(s)
    }

    /// Product of truncated coherent states (not renormalized after truncation).
    pub fn coherent(alpha: Complex64, beta: Complex64, n_cut: usize) -> Self {
        let col = |z: Complex64| -> Vec<Complex64> {
            let pre = (-0.5 * z.norm_sqr()).exp();
            (0..=n_cut)
                .map(|n| {
                    if z.norm() == 0.0 {
                        return Complex64::new(if n == 0 { pre } else { 0.0 }, 0.0);
                    }
                    let mag = pre * (n as f64 * z.norm().ln() - 0.5 * ln_factorial(n)).exp();
                    Complex64::from_polar(mag, n as f64 * z.arg())
                })
                .collect()
        };
        let (ca, cb) = (col(alpha), col(beta));
        let mut s = FockState2::zero(n_cut);
        for n1 in 0..=n_cut {
            for n2 in 0..=n_cut {
                s.set(n1, n2, ca[n1] * cb[n2]);
            }
        }
        s
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }

    #[inline]
    fn idx(&self, n1: usize, n2: usize) -> usize {
        n1 * (self.n_cut + 1) + n2
    }

    pub fn amp(&self, n1: usize, n2: usize) -> Complex64 {
        if n1 > self.n_cut || n2 > self.n_cut {
            return Complex64::new(0.0, 0.0);
        }
        self.amps[self.idx(n1, n2)]
    }

    pub fn set(&mut self, n1: usize, n2: usize, v: Complex64) {
        let i = self.idx(n1, n2);
        self.amps[i] = v;
    }

    fn iter_nonzero(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let w = self.n_cut + 1;
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(move |(i, a)| (i / w, i % w, *a))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0) {
            return Err(Error::DegenerateDistribution);
        }
        let k = 1.0 / n.sqrt();
        Ok(FockState2 {
            n_cut: self.n_cut,
            amps: self.amps.iter().map(|a| a * k).collect(),
        })
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockState2) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for n1 in 0..=self.n_cut.min(other.n_cut) {
            for n2 in 0..=self.n_cut.min(other.n_cut) {
                acc += self.amp(n1, n2).conj() * other.amp(n1, n2);
            }
        }
        acc
    }

    pub fn fidelity(&self, other: &FockState2) -> f64 {
        self.inner(other).norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }

    /// Largest total photon number carrying non-negligible amplitude.
    pub fn max_total(&self) -> usize {
        self.iter_nonzero()
            .filter(|(_, _, a)| a.norm_sqr() > SUPPORT_EPS)
            .map(|(n1, n2, _)| n1 + n2)
            .max()
            .unwrap_or(0)
    }

    /// Probability of each total photon number.
    pub fn total_distribution(&self) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.n_cut + 1];
        for (n1, n2, a) in self.iter_nonzero() {
            out[n1 + n2] += a.norm_sqr();
        }
        out
    }

    pub fn apply_beam_splitter(&self, c: LinearCoupling) -> Result<FockState2> {
        if self.max_total() > self.n_cut {
            return Err(Error::TruncationOverflow { n_cut: self.n_cut });
        }
        let (cs, ss) = (c.theta.cos(), c.theta.sin());
        let (lc, lsn) = (cs.abs().ln(), ss.abs().ln());
        let (sgc, sgs) = (cs.signum(), ss.signum());
        let mut out = FockState2::zero(self.n_cut);
        for (n, m, a) in self.iter_nonzero() {
            if n + m > self.n_cut {
                continue;
            }
            let pre = -0.5 * (ln_factorial(n) + ln_factorial(m));
            for i in 0..=n {
                for j in 0..=m {
                    let pc = i + m - j;
                    let ps = n - i + j;
                    if (pc > 0 && cs == 0.0) || (ps > 0 && ss == 0.0) {
                        continue;
                    }
                    let p = i + j;
                    let q = n + m - p;
                    let mut lg = pre + ln_binomial(n, i) + ln_binomial(m, j);
                    lg += 0.5 * (ln_factorial(p) + ln_factorial(q));
                    if pc > 0 {
                        lg += pc as f64 * lc;
                    }
                    if ps > 0 {
                        lg += ps as f64 * lsn;
                    }
                    let mut sign = 1.0;
                    if pc % 2 == 1 {
                        sign *= sgc;
                    }
                    if ps % 2 == 1 {
                        sign *= sgs;
                    }
                    if j % 2 == 1 {
                        sign = -sign;
                    }
                    let phase = Complex64::from_polar(sign * lg.exp(), c.xi * (n as f64 - p as f64));
                    let k = out.idx(p, q);
                    out.amps[k] += a * phase;
                }
            }
        }
        Ok(out)
    }

    /// `(a + sign e^{i xi} b)` applied to the state, unnormalized.
    pub fn apply_jump(&self, sign: i32, xi: f64) -> FockState2 {
        let coef = Complex64::from_polar(if sign >= 0 { 1.0 } else { -1.0 }, xi);
        let mut out = FockState2::zero(self.n_cut);
        for (n1, n2, a) in self.iter_nonzero() {
            if n1 > 0 {
                let k = out.idx(n1 - 1, n2);
                out.amps[k] += a * (n1 as f64).sqrt();
            }
            if n2 > 0 {
                let k = out.idx(n1, n2 - 1);
                out.amps[k] += a * coef * (n2 as f64).sqrt();
            }
        }
        out
    }

    /// No-count evolution: each basis state scaled by `(1 - eps)^((n1 + n2) / 2)`.
    pub fn apply_decay(&self, eps: f64) -> Result<FockState2> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::invalid(format!("leakage {eps} outside [0, 1)")));
        }
        let l = 0.5 * (1.0 - eps).ln();
        let mut out = self.clone();
        for n1 in 0..=self.n_cut {
            for n2 in 0..=self.n_cut {
                let k = out.idx(n1, n2);
                out.amps[k] *= ((n1 + n2) as f64 * l).exp();
            }
        }
        Ok(out)
    }

    /// Phase shifter `e^{i chi n2}` on the second mode.
    pub fn apply_phase(&self, chi: f64) -> FockState2 {
        let mut out = self.clone();
        for n1 in 0..=self.n_cut {
            for n2 in 0..=self.n_cut {
                let k = out.idx(n1, n2);
                out.amps[k] *= Complex64::from_polar(1.0, chi * n2 as f64);
            }
        }
        out
    }
}

/// Same-detector over different-detector odds for the first two counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HomRatio {
    Finite(f64),
    Infinite,
}

pub fn hom_same_detector_ratio(n: usize, m: usize) -> Result<HomRatio> {
    if n + m < 2 {
        return Err(Error::invalid("need at least two photons"));
    }
    let psi = FockState2::fock(n, m, n.max(m) + 2)?;
    let half = 0.5f64;
    let p = |s1: i32, s2: i32| psi.apply_jump(s1, 0.0).apply_jump(s2, 0.0).norm_sqr() * half * half;
    let same = p(1, 1) + p(-1, -1);
    let diff = p(1, -1) + p(-1, 1);
    if diff <= 1e-14 * same {
        return Ok(HomRatio::Infinite);
    }
    Ok(HomRatio::Finite(same / diff))
}

/// Table of exact record probabilities `P[l][r]` for `|N>|N>` after each mode
/// leaks a fraction `eps` into its own ancilla and the ancillae are combined
/// on a balanced splitter with phase `xi`.
pub fn plr_exact_table(n: usize, eps: f64, xi: f64, n_cut: usize) -> Result<Vec<Vec<f64>>> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!("leakage {eps} outside [0, 1)")));
    }
    if n_cut < 2 * n {
        return Err(Error::TruncationOverflow { n_cut });
    }
    // cavity mode 1, ancilla mode 2
    let leaked = FockState2::fock(n, 0, n_cut)?.apply_beam_splitter(LinearCoupling::leakage(eps))?;
    let w: Vec<f64> = (0..=n).map(|k| leaked.amp(n - k, k).norm_sqr()).collect();
    let mut table = vec![vec![0.0; 2 * n + 1]; 2 * n + 1];
    let combiner = LinearCoupling { theta: FRAC_PI_4, xi };
    for k1 in 0..=n {
        for k2 in 0..=n {
            let weight = w[k1] * w[k2];
            if weight == 0.0 {
                continue;
            }
            // distinct (k1, k2) leave orthogonal cavity states, so no cross terms
            let out = FockState2::fock(k1, k2, n_cut)?.apply_beam_splitter(combiner)?;
            let d = k1 + k2;
            for l in 0..=d {
                table[l][d - l] += weight * out.amp(l, d - l).norm_sqr();
            }
        }
    }
    Ok(table)
}

pub fn plr_exact(n: usize, eps: f64, l: usize, r: usize) -> Result<f64> {
    if l + r > 2 * n {
        return Ok(0.0);
    }
    Ok(plr_exact_table(n, eps, 0.0, 2 * n + 2)?[l][r])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditionResult {
    /// Probability that every photon leaves through the first port.
    pub p0: f64,
    /// Probability of `n` photons in the first port, `n = 0..=total`.
    pub distribution: Vec<f64>,
}

fn port_distribution(s: &FockState2, total: usize) -> Vec<f64> {
    (0..=total).map(|k| s.amp(k, total - k).norm_sqr()).collect()
}

pub fn fock_addition_basic(n: usize) -> Result<AdditionResult> {
    let out = FockState2::fock(n, n, 2 * n)?.apply_beam_splitter(LinearCoupling::balanced())?;
    let distribution = port_distribution(&out, 2 * n);
    Ok(AdditionResult {
        p0: distribution[2 * n],
        distribution,
    })
}

fn peak_of_product(offsets: &[f64]) -> f64 {
    // all detections on the cos^2 port; offsets are the tau values
    let g = crate::phase_dist::PhaseGrid::from_fn(crate::phase_dist::DEFAULT_N_GRID, |d| {
        offsets.iter().map(|t| (0.5 * (d - t)).cos().powi(2)).product()
    })
    .expect("nonnegative");
    g.coordinate(g.argmax())
}

/// Addition after sacrificing `w` photons to localize the relative phase.
///
/// With `w = 2` the second detection is taken behind a pi/2 phase shift. The
/// relative phase is then rotated from the density peak to pi so that the
/// balanced combiner sends the field to the first port.
pub fn fock_addition_localized(n: usize, w: usize) -> Result<AdditionResult> {
    if !(1..=2).contains(&w) || w > 2 * n {
        return Err(Error::invalid(format!("sacrificed photons {w} must be 1 or 2 and at most 2N")));
    }
    let mut psi = FockState2::fock(n, n, 2 * n)?;
    let taus: Vec<f64> = if w == 1 { vec![0.0] } else { vec![0.0, -FRAC_PI_2] };
    for t in &taus {
        psi = psi.apply_jump(1, -t);
    }
    let psi = psi.normalized()?;
    let delta0 = peak_of_product(&taus);
    let out = psi
        .apply_phase(PI - delta0)
        .apply_beam_splitter(LinearCoupling::balanced())?;
    let total = 2 * n - w;
    let distribution = port_distribution(&out, total);
    Ok(AdditionResult {
        p0: distribution[total],
        distribution,
    })
}

/// Fidelity with the best NOON state after an equal split of `d` detections,
/// a pi/2 shift and a balanced combiner. With no detections the raw input is compared.
pub fn noon_fidelity(n: usize, d: usize) -> Result<f64> {
    if d % 2 == 1 {
        return Err(Error::InvalidRecord(format!("{d} detections cannot split equally")));
    }
    if d > 2 * n {
        return Err(Error::InvalidRecord(format!("{d} detections exceed {} photons", 2 * n)));
    }
    let total = 2 * n - d;
    let mut psi = FockState2::fock(n, n, 2 * n)?;
    if d == 0 {
        let a = psi.amp(total, 0).norm();
        let b = psi.amp(0, total).norm();
        return Ok(if total == 0 { 1.0 } else { 0.5 * (a + b).powi(2) });
    }
    for _ in 0..d / 2 {
        psi = psi.apply_jump(1, 0.0).apply_jump(-1, 0.0);
    }
    let out = psi
        .normalized()?
        .apply_phase(FRAC_PI_2)
        .apply_beam_splitter(LinearCoupling::balanced())?;
    let a = out.amp(total, 0).norm();
    let b = out.amp(0, total).norm();
    Ok(0.5 * (a + b).powi(2))
}

/// Wrap into [0, 2pi).
pub fn wrap_phase(x: f64) -> f64 {
    x.rem_euclid(TAU)
}
