//! Spatial interference of two condensates detected atom by atom.
//!
//! A detection at `x` applies `e^{ikx} a + e^{-ikx} b`. The state is tracked
//! through the coefficients of the detection polynomial, from which the next
//! detection density `1 + V cos(2kx - phi)` follows.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optical::{Detector, OutcomeRecord};
use crate::phase_dist::PhaseGrid;
use crate::rng::{sha256_hex, stream};
use crate::special::ln_binomial;

const ROOT_TOL: f64 = 1e-14;
const NEWTON_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeParams {
    pub v: f64,
    pub phi: f64,
    pub k: f64,
    /// False when `v == 0` and `phi` carries the placeholder 0.
    pub phi_defined: bool,
}

impl FringeParams {
    pub fn new(v: f64, phi: f64, k: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("fringe visibility {v} outside [0, 1]")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("wavenumber {k} must be positive")));
        }
        Ok(FringeParams {
            v,
            phi: phi.rem_euclid(TAU),
            k,
            phi_defined: v > 0.0,
        })
    }

    /// Normalized density on [0, pi/k).
    pub fn density(&self, x: f64) -> f64 {
        self.k / PI * (1.0 + self.v * (2.0 * self.k * x - self.phi).cos())
    }

    pub fn cdf_scaled(&self, x: f64) -> f64 {
        x + self.v / (2.0 * self.k) * ((2.0 * self.k * x - self.phi).sin() + self.phi.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CondensateKind {
    Fock(usize),
    Poissonian(f64),
    Thermal(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensateSpec {
    pub first: CondensateKind,
    pub second: CondensateKind,
}

impl CondensateSpec {
    pub fn poissonian(nbar: f64, mbar: f64) -> Self {
        CondensateSpec {
            first: CondensateKind::Poissonian(nbar),
            second: CondensateKind::Poissonian(mbar),
        }
    }

    pub fn fock(n: usize, m: usize) -> Self {
        CondensateSpec {
            first: CondensateKind::Fock(n),
            second: CondensateKind::Fock(m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        use CondensateKind::*;
        match (self.first, self.second) {
            (Thermal(_), _) | (_, Thermal(_)) => Err(Error::UnsupportedSpec(
                "thermal condensates: the omitted no-detection evolution does not cancel".into(),
            )),
            (Poissonian(a), Poissonian(b)) if a > 0.0 && b > 0.0 => Ok(()),
            (Poissonian(_), Poissonian(_)) => Err(Error::invalid("Poissonian means must be positive")),
            (Fock(_), Fock(_)) => Ok(()),
            _ => Err(Error::UnsupportedSpec("mixed Fock and Poissonian condensates".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomRecord {
    pub k: f64,
    pub positions: Vec<f64>,
    /// Fringe after each detection.
    pub history: Vec<FringeParams>,
}

impl AtomRecord {
    pub fn new(k: f64) -> Self {
        AtomRecord {
            k,
            positions: Vec::new(),
            history: Vec::new(),
        }
    }

    pub fn from_positions(k: f64, positions: &[f64]) -> Self {
        AtomRecord {
            k,
            positions: positions.to_vec(),
            history: Vec::new(),
        }
    }

    pub fn hash(&self) -> String {
        let bytes: Vec<u8> = self.positions.iter().flat_map(|x| x.to_bits().to_le_bytes()).collect();
        sha256_hex(&bytes)
    }

    /// Optical record with `tau = 2kx`, folding the back half of the period
    /// onto the other port.
    pub fn as_optical(&self) -> OutcomeRecord {
        let mut rec = OutcomeRecord::default();
        for x in &self.positions {
            let t = (2.0 * self.k * x).rem_euclid(TAU);
            if t < PI {
                rec.push(Detector::Right, t);
            } else {
                rec.push(Detector::Left, t - PI);
            }
        }
        rec
    }
}

/// Detection-polynomial coefficients, rescaled after every update.
#[derive(Debug, Clone)]
pub struct FringeTracker {
    spec: CondensateSpec,
    k: f64,
    coeffs: Vec<Complex64>,
}

impl FringeTracker {
    pub fn new(spec: CondensateSpec, k: f64) -> Result<Self> {
        spec.validate()?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("wavenumber {k} must be positive")));
        }
        Ok(FringeTracker {
            spec,
            k,
            coeffs: vec![Complex64::new(1.0, 0.0)],
        })
    }

    pub fn detections(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn observe(&mut self, x: f64) -> Result<()> {
        let r = self.detections();
        let ep = Complex64::from_polar(1.0, self.k * x);
        let em = ep.conj();
        let mut next = vec![Complex64::new(0.0, 0.0); r + 2];
        match (self.spec.first, self.spec.second) {
            (CondensateKind::Poissonian(n), CondensateKind::Poissonian(m)) => {
                // index j counts factors taken from the first mode
                let (sp, sq) = ((n / (n + m)).sqrt(), (m / (n + m)).sqrt());
                for (j, c) in self.coeffs.iter().enumerate() {
                    next[j + 1] += c * ep * sp;
                    next[j] += c * em * sq;
                }
            }
            (CondensateKind::Fock(n), CondensateKind::Fock(m)) => {
                if r >= n + m {
                    return Err(Error::InvalidRecord("more detections than atoms".into()));
                }
                // amplitude j sits on |n - j, m - r + j>
                for (j, c) in self.coeffs.iter().enumerate() {
                    if n > j {
                        next[j + 1] += c * ep * ((n - j) as f64).sqrt();
                    }
                    if m + j > r {
                        next[j] += c * em * ((m + j - r) as f64).sqrt();
                    }
                }
            }
            _ => unreachable!("validated"),
        }
        let top = next.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::numerical("fringe coefficients vanished", top));
        }
        for c in &mut next {
            *c /= top;
        }
        self.coeffs = next;
        Ok(())
    }

    pub fn fringe(&self) -> FringeParams {
        let r = self.detections();
        let norm: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        let z = match (self.spec.first, self.spec.second) {
            (CondensateKind::Poissonian(n), CondensateKind::Poissonian(m)) => {
                let rr = 2.0 * (n * m).sqrt() / (n + m);
                let s: Complex64 = (1..=r).map(|j| self.coeffs[j - 1] * self.coeffs[j].conj()).sum();
                s * rr / norm
            }
            (CondensateKind::Fock(n), CondensateKind::Fock(m)) => {
                let left = (n + m - r) as f64;
                if left == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    let mut s = Complex64::new(0.0, 0.0);
                    for j in 0..r {
                        if n > j {
                            let w = (((n - j) * (m + j + 1 - r)) as f64).sqrt();
                            s += self.coeffs[j + 1].conj() * self.coeffs[j] * w;
                        }
                    }
                    s * 2.0 / (left * norm)
                }
            }
            _ => unreachable!("validated"),
        };
        // z = V e^{-i phi}
        let v = z.norm().min(1.0);
        let phi = if v > 0.0 { (-z.arg()).rem_euclid(TAU) } else { 0.0 };
        FringeParams {
            v,
            phi,
            k: self.k,
            phi_defined: v > 0.0,
        }
    }

    /// Relative-phase density `|sum_j d_j e^{-i j delta}|^2` (coherent inputs only).
    pub fn phase_density(&self, n_grid: usize) -> Result<PhaseGrid> {
        if !matches!(self.spec.first, CondensateKind::Poissonian(_)) {
            return Err(Error::UnsupportedSpec("phase density needs Poissonian condensates".into()));
        }
        PhaseGrid::from_fn(n_grid, |d| {
            self.coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * Complex64::from_polar(1.0, -(j as f64) * d))
                .sum::<Complex64>()
                .norm_sqr()
        })?
        .normalize()
    }
}

/// Fringe after replaying every position of the record.
pub fn update_fringe(rec: &AtomRecord, spec: &CondensateSpec) -> Result<FringeParams> {
    let mut t = FringeTracker::new(*spec, rec.k)?;
    for x in &rec.positions {
        t.observe(*x)?;
    }
    Ok(t.fringe())
}

/// Invert the fringe distribution function at `u` in [0, 1).
pub fn sample_position(f: &FringeParams, u: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::invalid(format!("uniform variate {u} outside [0, 1)")));
    }
    let period = PI / f.k;
    let target = u * period;
    let g = |x: f64| f.cdf_scaled(x) - target;
    let (mut lo, mut hi) = (0.0, period);
    let mut x = target;
    for _ in 0..NEWTON_CAP {
        let gx = g(x);
        if gx.abs() <= ROOT_TOL * period {
            return Ok(x);
        }
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dg = 1.0 + f.v * (2.0 * f.k * x - f.phi).cos();
        let step = x - gx / dg;
        x = if dg > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= ROOT_TOL * period || hi - lo < f64::EPSILON * period {
            return Ok(mid);
        }
        if gm > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn run_interference<R: Rng>(spec: &CondensateSpec, d_total: usize, k: f64, rng: &mut R) -> Result<AtomRecord> {
    if d_total == 0 {
        return Err(Error::invalid("need at least one detection"));
    }
    let mut t = FringeTracker::new(*spec, k)?;
    let mut rec = AtomRecord::new(k);
    for _ in 0..d_total {
        let x = sample_position(&t.fringe(), rng.random::<f64>())?;
        t.observe(x)?;
        rec.positions.push(x);
        rec.history.push(t.fringe());
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityStats {
    /// Entry `i` describes the fringe after `i + 1` detections.
    pub mean_v: Vec<f64>,
    pub std_v: Vec<f64>,
    pub record_hashes: Vec<String>,
}

impl VisibilityStats {
    /// `-2 D ln(mean V)` after `D` detections.
    pub fn rate(&self, d: usize) -> f64 {
        -2.0 * d as f64 * self.mean_v[d - 1].ln()
    }
}

/// Independent seeded runs; run `i` draws from stream `i` of `seed`.
pub fn run_batch(spec: &CondensateSpec, d_total: usize, runs: usize, k: f64, seed: u64) -> Result<Vec<AtomRecord>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|i| run_interference(spec, d_total, k, &mut stream(seed, i)))
        .collect()
}

impl VisibilityStats {
    /// Reduction in run order, so thread count never changes a digit.
    pub fn from_records(recs: &[AtomRecord]) -> Result<Self> {
        let d_total = recs.first().map(|r| r.history.len()).unwrap_or(0);
        if d_total == 0 || recs.iter().any(|r| r.history.len() != d_total) {
            return Err(Error::invalid("records need equal, nonzero histories"));
        }
        let mut sum = vec![0.0; d_total];
        let mut sq = vec![0.0; d_total];
        for r in recs {
            for (i, f) in r.history.iter().enumerate() {
                sum[i] += f.v;
                sq[i] += f.v * f.v;
            }
        }
        let n = recs.len() as f64;
        let mean_v: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std_v = sq
            .iter()
            .zip(&mean_v)
            .map(|(s, m)| (s / n - m * m).max(0.0).sqrt())
            .collect();
        Ok(VisibilityStats {
            mean_v,
            std_v,
            record_hashes: recs.iter().map(|r| r.hash()).collect(),
        })
    }
}

pub fn visibility_statistics(spec: &CondensateSpec, d_total: usize, runs: usize, k: f64, seed: u64) -> Result<VisibilityStats> {
    VisibilityStats::from_records(&run_batch(spec, d_total, runs, k, seed)?)
}

/// Joint density of the positions, averaged directly over the relative phase
/// of two Poissonian condensates.
pub fn joint_density(positions: &[f64], spec: &CondensateSpec, k: f64) -> Result<f64> {
    spec.validate()?;
    let (n, m) = match (spec.first, spec.second) {
        (CondensateKind::Poissonian(n), CondensateKind::Poissonian(m)) => (n, m),
        _ => return Err(Error::UnsupportedSpec("joint density needs Poissonian condensates".into())),
    };
    let rr = 2.0 * (n * m).sqrt() / (n + m);
    // trigonometric polynomial of degree D in delta: trapezoid is exact
    let nodes = 2 * positions.len() + 8;
    let mut acc = 0.0;
    for i in 0..nodes {
        let d = TAU * i as f64 / nodes as f64;
        acc += positions
            .iter()
            .map(|x| k / PI * (1.0 + rr * (2.0 * k * x - d).cos()))
            .product::<f64>();
    }
    Ok(acc / nodes as f64)
}

pub fn gaussian_visibility(sigma: f64) -> f64 {
    (-0.5 * sigma * sigma).exp()
}

/// Width band `(sqrt(1/2M), sqrt(1/M))` after `M` detections at each of two settings.
pub fn width_prediction(m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::invalid("need at least one detection per setting"));
    }
    let m = m as f64;
    Ok(((0.5 / m).sqrt(), (1.0 / m).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSettingEvent {
    pub l1: usize,
    pub r1: usize,
    pub l2: usize,
    pub r2: usize,
    pub probability: f64,
    pub density: PhaseGrid,
}

/// Outcomes of `M` detections at offset 0 and `M` at offset pi/2 for equal
/// Poissonian condensates, keeping those more probable than `1/(M+1)^2`.
pub fn dual_setting_likely_events(m: usize, n_grid: usize) -> Result<Vec<DualSettingEvent>> {
    if m == 0 {
        return Err(Error::invalid("need at least one detection per setting"));
    }
    let mut out = Vec::new();
    let floor = 1.0 / ((m + 1) * (m + 1)) as f64;
    for l1 in 0..=m {
        for l2 in 0..=m {
            let (r1, r2) = (m - l1, m - l2);
            let shape = |d: f64| {
                let a = 0.5 * d;
                let b = 0.5 * (d - 0.5 * PI);
                a.cos().powi(2 * r1 as i32)
                    * a.sin().powi(2 * l1 as i32)
                    * b.cos().powi(2 * r2 as i32)
                    * b.sin().powi(2 * l2 as i32)
            };
            let g = PhaseGrid::from_fn(n_grid, shape)?;
            let mean = g.values().iter().sum::<f64>() / n_grid as f64;
            let p = (ln_binomial(m, l1) + ln_binomial(m, l2)).exp() * mean;
            if p > floor {
                out.push(DualSettingEvent {
                    l1,
                    r1,
                    l2,
                    r2,
                    probability: p,
                    density: g.normalize()?,
                });
            }
        }
    }
    Ok(out)
}

/// Posterior over the relative phase from the classical likelihood
/// `prod_j cos^2(k x_j - delta/2)`.
pub fn bayesian_posterior(rec: &AtomRecord, n_grid: usize) -> Result<PhaseGrid> {
    bayesian_update(&PhaseGrid::uniform(n_grid), &rec.positions, rec.k)
}

pub fn bayesian_update(prior: &PhaseGrid, positions: &[f64], k: f64) -> Result<PhaseGrid> {
    let n = prior.n_grid();
    let logs: Vec<f64> = (0..n)
        .map(|i| {
            let d = prior.coordinate(i);
            prior.values()[i].ln() + positions.iter().map(|x| (k * x - 0.5 * d).cos().powi(2).ln()).sum::<f64>()
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::DegenerateDistribution);
    }
    PhaseGrid::new(logs.into_iter().map(|x| (x - m).exp()).collect())?.normalize()
}
