//! Densities over relative phase (periodic) and relative separation (bounded),
//! plus the visibility functional and a wrapped-Gaussian fit.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_N_GRID: usize = 4096;

// Secondary maxima below this fraction of the main peak are treated as ripple.
const PEAK_FLOOR: f64 = 0.2;

/// Nonnegative density on a uniform periodic grid over [0, 2pi).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    values: Vec<f64>,
}

impl PhaseGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("phase grid needs at least one point"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("phase grid value {v} is not a finite nonnegative number")));
        }
        Ok(PhaseGrid { values })
    }

    pub fn uniform(n_grid: usize) -> Self {
        PhaseGrid {
            values: vec![1.0 / TAU; n_grid],
        }
    }

    /// Sample `f` at the grid nodes. Negative or non-finite samples are rejected.
    pub fn from_fn(n_grid: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..n_grid).map(|i| f(TAU * i as f64 / n_grid as f64)).collect();
        PhaseGrid::new(values)
    }

    pub fn n_grid(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn step(&self) -> f64 {
        TAU / self.values.len() as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        TAU * (i % self.values.len()) as f64 / self.values.len() as f64
    }

    pub fn at(&self, i: isize) -> f64 {
        let n = self.values.len() as isize;
        self.values[i.rem_euclid(n) as usize]
    }

    pub fn mass(&self) -> f64 {
        self.step() * self.values.iter().sum::<f64>()
    }

    pub fn normalize(&self) -> Result<PhaseGrid> {
        let m = self.mass();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::DegenerateDistribution);
        }
        Ok(PhaseGrid {
            values: self.values.iter().map(|v| v / m).collect(),
        })
    }

    /// Circular shift by `k` bins: new[i] = old[i - k].
    pub fn rotate(&self, k: isize) -> PhaseGrid {
        let n = self.values.len();
        let mut out = vec![0.0; n];
        for (i, v) in self.values.iter().enumerate() {
            let j = (i as isize + k).rem_euclid(n as isize) as usize;
            out[j] = *v;
        }
        PhaseGrid { values: out }
    }

    /// Index of the largest value; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn scale(&self, a: f64) -> PhaseGrid {
        PhaseGrid {
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    /// Largest absolute bin difference after normalizing both grids.
    pub fn max_abs_diff(&self, other: &PhaseGrid) -> Result<f64> {
        check_same(self, other)?;
        let a = self.normalize()?;
        let b = other.normalize()?;
        Ok(a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max))
    }

    /// Local maxima above `floor * max`, as bin indices.
    pub fn peaks(&self, floor: f64) -> Vec<usize> {
        let n = self.values.len() as isize;
        let top = self.values[self.argmax()];
        let mut out = Vec::new();
        for i in 0..n {
            let v = self.at(i);
            if v < floor * top || v == 0.0 {
                continue;
            }
            // plateaus count once, at their left edge
            let mut j = i + 1;
            while j < i + n && self.at(j) == v {
                j += 1;
            }
            if v > self.at(i - 1) && v > self.at(j) {
                out.push(i as usize);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,density\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{}\n", fmt17(self.coordinate(i)), fmt17(*v)));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GridJson {
            domain: Domain::Phase {
                n_grid: self.values.len(),
            },
            values: self.values.clone(),
        })
        .expect("grid serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: GridJson = serde_json::from_str(s).map_err(|e| Error::invalid(e.to_string()))?;
        match g.domain {
            Domain::Phase { n_grid } if n_grid == g.values.len() => PhaseGrid::new(g.values),
            _ => Err(Error::invalid("json does not hold a phase grid")),
        }
    }
}

/// Nonnegative density on a uniform grid over [lower, upper], endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationGrid {
    values: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl SeparationGrid {
    pub fn new(values: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("separation grid needs at least two points"));
        }
        if !(upper > lower) {
            return Err(Error::invalid(format!("separation bounds [{lower}, {upper}] are empty")));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("separation value {v} is not a finite nonnegative number")));
        }
        Ok(SeparationGrid { values, lower, upper })
    }

    pub fn from_fn(n_grid: usize, lower: f64, upper: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = (upper - lower) / (n_grid.max(2) - 1) as f64;
        let values = (0..n_grid).map(|i| f(lower + h * i as f64)).collect();
        SeparationGrid::new(values, lower, upper)
    }

    pub fn n_grid(&self) -> usize {
        self.values.len()
    }
    pub fn lower(&self) -> f64 {
        self.lower
    }
    pub fn upper(&self) -> f64 {
        self.upper
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.values.len() - 1) as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.lower + self.step() * i as f64
    }

    /// Trapezoidal integral.
    pub fn mass(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        self.step() * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    pub fn normalize(&self) -> Result<SeparationGrid> {
        let m = self.mass();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::DegenerateDistribution);
        }
        Ok(SeparationGrid {
            values: self.values.iter().map(|v| v / m).collect(),
            lower: self.lower,
            upper: self.upper,
        })
    }

    /// Pointwise product with per-node weights.
    pub fn weighted(&self, w: &[f64]) -> Result<SeparationGrid> {
        if w.len() != self.values.len() {
            return Err(Error::GridMismatch {
                left: self.values.len(),
                right: w.len(),
            });
        }
        let values = self.values.iter().zip(w).map(|(v, w)| v * w).collect();
        SeparationGrid::new(values, self.lower, self.upper)
    }

    pub fn map_values(&self, f: impl Fn(f64, f64) -> f64) -> Result<SeparationGrid> {
        let values = (0..self.values.len()).map(|i| f(self.coordinate(i), self.values[i])).collect();
        SeparationGrid::new(values, self.lower, self.upper)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Trapezoidal L1 distance between the normalized densities.
    pub fn l1_distance(&self, other: &SeparationGrid) -> Result<f64> {
        if self.values.len() != other.values.len() || self.lower != other.lower || self.upper != other.upper {
            return Err(Error::GridMismatch {
                left: self.values.len(),
                right: other.values.len(),
            });
        }
        let a = self.normalize()?;
        let b = other.normalize()?;
        let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
        Ok(SeparationGrid::new(d, self.lower, self.upper)?.mass())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("separation,density\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{}\n", fmt17(self.coordinate(i)), fmt17(*v)));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GridJson {
            domain: Domain::Separation {
                lower: self.lower,
                upper: self.upper,
            },
            values: self.values.clone(),
        })
        .expect("grid serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: GridJson = serde_json::from_str(s).map_err(|e| Error::invalid(e.to_string()))?;
        match g.domain {
            Domain::Separation { lower, upper } => SeparationGrid::new(g.values, lower, upper),
            _ => Err(Error::invalid("json does not hold a separation grid")),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Domain {
    Phase { n_grid: usize },
    Separation { lower: f64, upper: f64 },
}

#[derive(Serialize, Deserialize)]
struct GridJson {
    domain: Domain,
    values: Vec<f64>,
}

/// Seventeen significant digits, enough to round-trip any f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub mean: f64,
    pub sigma: f64,
    pub goodness: f64,
}

fn check_same(a: &PhaseGrid, b: &PhaseGrid) -> Result<()> {
    if a.n_grid() != b.n_grid() {
        return Err(Error::GridMismatch {
            left: a.n_grid(),
            right: b.n_grid(),
        });
    }
    Ok(())
}

/// Modulus of the first circular Fourier coefficient of the normalized density.
pub fn visibility_of_grid(g: &PhaseGrid) -> Result<f64> {
    let total: f64 = g.values.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateDistribution);
    }
    let (mut re, mut im) = (0.0, 0.0);
    for (i, v) in g.values.iter().enumerate() {
        let (s, c) = g.coordinate(i).sin_cos();
        re += v * c;
        im += v * s;
    }
    Ok((re.hypot(im) / total).min(1.0))
}

pub fn pointwise_product(a: &PhaseGrid, b: &PhaseGrid) -> Result<PhaseGrid> {
    check_same(a, b)?;
    Ok(PhaseGrid {
        values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
    })
}

/// Signed distance from `b` to `a` on the circle, in (-pi, pi].
pub fn circular_delta(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

fn half_max_sigma(g: &PhaseGrid, i0: usize) -> f64 {
    let n = g.n_grid() as isize;
    let half = 0.5 * g.values[i0];
    let walk = |dir: isize| {
        let mut k = 0isize;
        while k < n / 2 && g.at(i0 as isize + dir * (k + 1)) > half {
            k += 1;
        }
        k
    };
    let fwhm = (walk(1) + walk(-1) + 1) as f64 * g.step();
    (fwhm / (8.0 * 2f64.ln()).sqrt()).clamp(g.step(), PI)
}

fn wrapped(x: f64, mu: f64, sigma: f64) -> (f64, f64, f64) {
    // value, d/dmu, d/dsigma of sum_k exp(-(x - mu + 2 pi k)^2 / 2 sigma^2)
    let mut v = 0.0;
    let mut dmu = 0.0;
    let mut ds = 0.0;
    for k in -3..=3 {
        let z = x - mu + TAU * k as f64;
        let e = (-0.5 * z * z / (sigma * sigma)).exp();
        v += e;
        dmu += e * z / (sigma * sigma);
        ds += e * z * z / (sigma * sigma * sigma);
    }
    (v, dmu, ds)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *slot = det(m) / d;
    }
    Some(out)
}

/// Least-squares wrapped Gaussian fit after recentering on the largest bin.
pub fn fit_gaussian(g: &PhaseGrid) -> Result<GaussianFit> {
    let g = g.normalize()?;
    let n = g.n_grid();
    let i0 = g.argmax();
    let sigma0 = half_max_sigma(&g, i0);
    let x0 = g.coordinate(i0);
    for p in g.peaks(PEAK_FLOOR) {
        let sep = circular_delta(g.coordinate(p), x0).abs();
        if sep > 4.0 * sigma0 {
            return Err(Error::BimodalDistribution {
                first: x0,
                second: g.coordinate(p),
            });
        }
    }

    let xs: Vec<f64> = (0..n).map(|i| circular_delta(g.coordinate(i), x0)).collect();
    let ys = g.values();
    let mut p = [ys[i0], 0.0, sigma0];
    let resid = |p: &[f64; 3]| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = p[0] * wrapped(*x, p[1], p[2]).0 - y;
                r * r
            })
            .sum()
    };
    let mut cost = resid(&p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (x, y) in xs.iter().zip(ys) {
            let (v, dmu, ds) = wrapped(*x, p[1], p[2]);
            let jac = [v, p[0] * dmu, p[0] * ds];
            let r = p[0] * v - y;
            for a in 0..3 {
                jtr[a] += jac[a] * r;
                for b in 0..3 {
                    jtj[a][b] += jac[a] * jac[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] *= 1.0 + lambda;
            }
            let Some(step) = solve3(m, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] - step[0], p[1] - step[1], (p[2] - step[2]).max(1e-3 * g.step())];
            let c = resid(&trial);
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                p = trial;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if !(p[2].is_finite() && p[2] > 0.0) {
        return Err(Error::numerical("fit_gaussian", cost));
    }
    Ok(GaussianFit {
        mean: (x0 + p[1]).rem_euclid(TAU),
        sigma: p[2].abs(),
        goodness: (cost * g.step()).sqrt(),
    })
}
