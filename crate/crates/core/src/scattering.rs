//! Relative-position localization of two particles by scattered light.
//!
//! Two models: a rubber cavity whose interferometer ports give `cos^2` and
//! `sin^2` factors in `sqrt(2) k dr / 2`, and free particles watched by an
//! observer who only distinguishes forward from deflected photons.

use std::f64::consts::{PI, SQRT_2, TAU};

use rand::Rng;

use crate::error::{Error, Result};
use crate::phase_dist::SeparationGrid;
use crate::rng::sha256_hex;
use crate::special::{bessel_j0, gauss_legendre};

pub const TRAPEZOID_NODES: usize = 512;
pub const DEFAULT_VIEW: f64 = 0.02;
pub const THERMAL_TAIL: f64 = 1e-10;
const THERMAL_TERM_CAP: usize = 200_000;
// Beyond this the 512-point trapezoid no longer resolves the full circle.
const J0_SWITCH: f64 = 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterModel {
    RubberCavity,
    FreeParticle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterEvent {
    Left,
    Right,
    Forward,
    Deflect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRecord {
    pub model: ScatterModel,
    pub events: Vec<ScatterEvent>,
}

impl ScatterRecord {
    pub fn new(model: ScatterModel, events: Vec<ScatterEvent>) -> Result<Self> {
        let ok = events.iter().all(|e| match model {
            ScatterModel::RubberCavity => matches!(e, ScatterEvent::Left | ScatterEvent::Right),
            ScatterModel::FreeParticle => matches!(e, ScatterEvent::Forward | ScatterEvent::Deflect),
        });
        if !ok {
            return Err(Error::InvalidRecord(format!("event kinds do not belong to the {model:?} model")));
        }
        Ok(ScatterRecord { model, events })
    }

    /// `f` forward events followed by `s` deflections.
    pub fn free(f: usize, s: usize) -> Self {
        let mut events = vec![ScatterEvent::Forward; f];
        events.extend(std::iter::repeat_n(ScatterEvent::Deflect, s));
        ScatterRecord {
            model: ScatterModel::FreeParticle,
            events,
        }
    }

    pub fn rubber(l: usize, r: usize) -> Self {
        let mut events = vec![ScatterEvent::Left; l];
        events.extend(std::iter::repeat_n(ScatterEvent::Right, r));
        ScatterRecord {
            model: ScatterModel::RubberCavity,
            events,
        }
    }

    pub fn count(&self, kind: ScatterEvent) -> usize {
        self.events.iter().filter(|e| **e == kind).count()
    }

    pub fn forward(&self) -> usize {
        self.count(ScatterEvent::Forward)
    }

    pub fn deflect(&self) -> usize {
        self.count(ScatterEvent::Deflect)
    }

    pub fn hash(&self) -> String {
        let bytes: Vec<u8> = self
            .events
            .iter()
            .map(|e| match e {
                ScatterEvent::Left => b'L',
                ScatterEvent::Right => b'R',
                ScatterEvent::Forward => b'F',
                ScatterEvent::Deflect => b'S',
            })
            .collect();
        sha256_hex(&bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightSpec {
    Mono { k: f64 },
    Thermal { k: f64, nbar: f64 },
}

impl LightSpec {
    pub fn validate(&self) -> Result<()> {
        let (k, nbar) = match *self {
            LightSpec::Mono { k } => (k, 1.0),
            LightSpec::Thermal { k, nbar } => (k, nbar),
        };
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("photon momentum {k} must be positive")));
        }
        if !(nbar > 0.0 && nbar.is_finite()) {
            return Err(Error::invalid(format!("mean photon number {nbar} must be positive")));
        }
        Ok(())
    }

    pub fn k(&self) -> f64 {
        match *self {
            LightSpec::Mono { k } | LightSpec::Thermal { k, .. } => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleEnsemble {
    pub lower: f64,
    pub upper: f64,
    /// Thermal spread of each particle.
    pub d: f64,
    /// Width of the Gaussian smoothing the separation prior; `d / sqrt 2` by default.
    pub smoothing: f64,
}

impl ParticleEnsemble {
    pub fn new(lower: f64, upper: f64, d: f64) -> Result<Self> {
        let e = ParticleEnsemble {
            lower,
            upper,
            d,
            smoothing: d / SQRT_2,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.upper > self.lower) || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(Error::invalid(format!("region [{}, {}] is empty", self.lower, self.upper)));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::invalid(format!("thermal spread {} must be positive", self.d)));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::invalid("smoothing width must be non-negative"));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    /// Separation prior on `[-L, L]`: the triangle from two uniform positions,
    /// smoothed by a Gaussian of width `smoothing`.
    pub fn prior(&self, n_grid: usize) -> Result<SeparationGrid> {
        self.validate()?;
        let l = self.length();
        let tri = SeparationGrid::from_fn(n_grid, -l, l, |x| (l - x.abs()).max(0.0))?;
        let h = tri.step();
        let s = self.smoothing;
        if s < 1e-3 * h {
            return tri.normalize();
        }
        let reach = ((8.0 * s / h).ceil() as usize).min(n_grid);
        let kernel: Vec<f64> = (0..=reach).map(|m| (-0.5 * (m as f64 * h / s).powi(2)).exp()).collect();
        // normalization over the infinite lattice so the grid edge acts as a mask
        let total = kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>();
        let t = tri.values();
        let vals = (0..n_grid)
            .map(|i| {
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(n_grid - 1);
                (lo..=hi).map(|j| t[j] * kernel[i.abs_diff(j)]).sum::<f64>() / total
            })
            .collect();
        SeparationGrid::new(vals, -l, l)?.normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewCone {
    pub eps: f64,
}

impl ViewCone {
    pub fn new(eps: f64) -> Result<Self> {
        if !(0.0..PI / 2.0).contains(&eps) {
            return Err(Error::invalid(format!("view half-angle {eps} outside [0, pi/2)")));
        }
        Ok(ViewCone { eps })
    }
}

impl Default for ViewCone {
    fn default() -> Self {
        ViewCone { eps: DEFAULT_VIEW }
    }
}

pub fn rubber_cavity_density(rec: &ScatterRecord, k: f64, n_grid: usize, lower: f64, upper: f64) -> Result<SeparationGrid> {
    if rec.model != ScatterModel::RubberCavity {
        return Err(Error::InvalidRecord("rubber-cavity density needs a rubber-cavity record".into()));
    }
    if !(k > 0.0) {
        return Err(Error::invalid("photon momentum must be positive"));
    }
    let (l, r) = (rec.count(ScatterEvent::Left) as f64, rec.count(ScatterEvent::Right) as f64);
    let logs: Vec<f64> = (0..n_grid)
        .map(|i| {
            let x = lower + (upper - lower) * i as f64 / (n_grid - 1).max(1) as f64;
            let a = 0.5 * SQRT_2 * k * x;
            let (s, c) = a.sin_cos();
            xlny(2.0 * r, c.abs()) + xlny(2.0 * l, s.abs())
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::DegenerateDistribution);
    }
    SeparationGrid::new(logs.iter().map(|v| (v - m).exp()).collect(), lower, upper)?.normalize()
}

fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

// (1/2pi) int_0^{2pi} cos^2(z sin t / 2) dt
fn full_circle_cos2(z: f64) -> f64 {
    if z.abs() > J0_SWITCH {
        return 0.5 * (1.0 + bessel_j0(z));
    }
    // nodes i, n/2 - i, n/2 + i, n - i share |sin|
    let n = TRAPEZOID_NODES;
    let q = n / 4;
    let f = |i: usize| (0.5 * z * (TAU * i as f64 / n as f64).sin()).cos().powi(2);
    let inner: f64 = (1..q).map(f).sum();
    (2.0 * (f(0) + f(q)) + 4.0 * inner) / n as f64
}

// (1/2pi) int_{-eps}^{eps} cos^2(z sin t / 2) dt
fn window_cos2(z: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    let n = 24 + (2.0 * z.abs() * eps) as usize;
    let (x, w) = gauss_legendre(n);
    let s: f64 = x
        .iter()
        .zip(&w)
        .map(|(x, w)| w * (0.5 * z * (eps * x).sin()).cos().powi(2))
        .sum();
    s * eps / TAU
}

pub fn deflect_factor_mono(k: f64, dr: f64, eps: f64) -> f64 {
    let z = k * dr;
    full_circle_cos2(z) - window_cos2(z, eps)
}

pub fn forward_factor_mono(k: f64, dr: f64, eps: f64) -> f64 {
    let z = k * dr;
    (1.0 - full_circle_cos2(z)) + window_cos2(z, eps)
}

/// Photon-number weights `nbar^n / (1+nbar)^{n+1}` up to the tail cut.
pub fn bose_einstein_weights(nbar: f64) -> Result<Vec<f64>> {
    let q = nbar / (1.0 + nbar);
    let mut w = Vec::new();
    let mut p = 1.0 / (1.0 + nbar);
    let mut tail = q;
    while tail >= THERMAL_TAIL {
        if w.len() > THERMAL_TERM_CAP {
            return Err(Error::numerical("Bose-Einstein sum did not reach its tail cut", tail));
        }
        w.push(p);
        p *= q;
        tail *= q;
    }
    w.push(p);
    Ok(w)
}

/// Forward and deflect factors on every grid coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterFactors {
    pub forward: Vec<f64>,
    pub deflect: Vec<f64>,
}

impl ScatterFactors {
    pub fn new(light: &LightSpec, view: &ViewCone, grid: &SeparationGrid) -> Result<Self> {
        light.validate()?;
        let eps = view.eps;
        // factors are even in the separation; evaluate each |x| once
        let n = grid.n_grid();
        let symmetric = grid.lower() == -grid.upper();
        let half = if symmetric { n.div_ceil(2) } else { n };
        let xs: Vec<f64> = (0..half).map(|i| grid.coordinate(i).abs()).collect();
        let mut deflect: Vec<f64> = match *light {
            LightSpec::Mono { k } => xs.iter().map(|x| deflect_factor_mono(k, *x, eps)).collect(),
            LightSpec::Thermal { k, nbar } => {
                let w = bose_einstein_weights(nbar)?;
                // n = 0 passes undeflected
                xs.iter()
                    .map(|x| {
                        w.iter()
                            .enumerate()
                            .skip(1)
                            .map(|(n, p)| p * deflect_factor_mono(n as f64 * k, *x, eps))
                            .sum()
                    })
                    .collect()
            }
        };
        if symmetric {
            for i in half..n {
                deflect.push(deflect[n - 1 - i]);
            }
        }
        let forward = deflect.iter().map(|d| 1.0 - d).collect();
        Ok(ScatterFactors { forward, deflect })
    }

    pub fn of(&self, e: ScatterEvent) -> Result<&[f64]> {
        match e {
            ScatterEvent::Forward => Ok(&self.forward),
            ScatterEvent::Deflect => Ok(&self.deflect),
            _ => Err(Error::InvalidRecord("rubber-cavity event in a free-particle record".into())),
        }
    }
}

pub fn free_particle_density(
    rec: &ScatterRecord,
    light: &LightSpec,
    ens: &ParticleEnsemble,
    view: &ViewCone,
    n_grid: usize,
) -> Result<SeparationGrid> {
    if rec.model != ScatterModel::FreeParticle {
        return Err(Error::InvalidRecord("free-particle density needs a free-particle record".into()));
    }
    let prior = ens.prior(n_grid)?;
    let fac = ScatterFactors::new(light, view, &prior)?;
    let (f, s) = (rec.forward() as i32, rec.deflect() as i32);
    let w: Vec<f64> = fac.forward.iter().zip(&fac.deflect).map(|(a, b)| a.powi(f) * b.powi(s)).collect();
    prior.weighted(&w)?.normalize()
}

/// `(p_forward, p_deflect)` for the next packet given the current density.
pub fn event_probabilities(fac: &ScatterFactors, density: &SeparationGrid) -> Result<(f64, f64)> {
    let trap = |f: &[f64]| {
        let v = density.values();
        let n = v.len();
        let s: f64 = (0..n)
            .map(|i| {
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                w * v[i] * f[i]
            })
            .sum();
        s * density.step()
    };
    let pf = trap(&fac.forward);
    let pd = trap(&fac.deflect);
    let t = pf + pd;
    if !(t > 0.0) {
        return Err(Error::DegenerateDistribution);
    }
    Ok((pf / t, pd / t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRun {
    pub record: ScatterRecord,
    /// Density before any packet, then after each one.
    pub history: Vec<SeparationGrid>,
}

pub fn sample_scatter_run<R: Rng>(
    fac: &ScatterFactors,
    prior: &SeparationGrid,
    n_packets: usize,
    rng: &mut R,
) -> Result<ScatterRun> {
    let mut history = vec![prior.clone()];
    let mut events = Vec::with_capacity(n_packets);
    for _ in 0..n_packets {
        let cur = history.last().expect("non-empty");
        let (_, pd) = event_probabilities(fac, cur)?;
        let e = if rng.random::<f64>() < pd {
            ScatterEvent::Deflect
        } else {
            ScatterEvent::Forward
        };
        let f = fac.of(e)?;
        let next = cur.weighted(f)?.normalize()?;
        events.push(e);
        history.push(next);
    }
    Ok(ScatterRun {
        record: ScatterRecord {
            model: ScatterModel::FreeParticle,
            events,
        },
        history,
    })
}
