//! Two-mode interference: record probabilities, localizing densities,
//! visibilities and sequential trajectories.
//!
//! A detection at the `Right` port behind a phase offset `tau` multiplies the
//! relative-phase density by `1 + R cos(delta - tau)`, a `Left` detection by
//! `1 - R cos(delta - tau)`. `R = 1` for equal intensities.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::phase_dist::{PhaseGrid, DEFAULT_N_GRID};
use crate::rng::{sha256_hex, RunRng};
use crate::special::{
    gauss_legendre, legendre_mix_sum, legendre_scaled, ln_binomial, ln_gamma, ln_poisson, log_sum_exp, Dd,
};

// Largest total count handled by the Legendre sum before switching to the
// trapezoid form, and the cancellation the double-double sum may absorb.
const LEGENDRE_MAX_D: usize = 300;
const LEGENDRE_MAX_CANCEL: f64 = 1e16;

const TAIL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Fock(usize),
    Poissonian(f64),
    Thermal(f64),
    AsymPoissonian { nbar: f64, mbar: f64 },
}

impl InitialState {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialState::Fock(_) => true,
            InitialState::Poissonian(n) | InitialState::Thermal(n) => n > 0.0 && n.is_finite(),
            InitialState::AsymPoissonian { nbar, mbar } => {
                nbar > 0.0 && mbar > 0.0 && nbar.is_finite() && mbar.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("intensities of {self:?} must be positive")))
        }
    }

    /// Mean photon number summed over both modes.
    pub fn total_intensity(&self) -> f64 {
        match *self {
            InitialState::Fock(n) => 2.0 * n as f64,
            InitialState::Poissonian(n) | InitialState::Thermal(n) => 2.0 * n,
            InitialState::AsymPoissonian { nbar, mbar } => nbar + mbar,
        }
    }

    /// Fringe contrast ceiling set by the intensity ratio.
    pub fn asymmetry(&self) -> f64 {
        match *self {
            InitialState::AsymPoissonian { nbar, mbar } => AsymmetryRatio::from_intensities(nbar, mbar).0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymmetryRatio(pub f64);

impl AsymmetryRatio {
    pub fn from_intensities(nbar: f64, mbar: f64) -> Self {
        AsymmetryRatio(2.0 * (nbar * mbar).sqrt() / (nbar + mbar))
    }

    /// Intensities with total `total` that produce this ratio, larger one first.
    pub fn intensities(&self, total: f64) -> (f64, f64) {
        let s = (1.0 - self.0 * self.0).max(0.0).sqrt();
        (0.5 * total * (1.0 + s), 0.5 * total * (1.0 - s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub detector: Detector,
    pub tau: f64,
}

impl Detection {
    /// Density factor `1 +- R cos(delta - tau)`.
    #[inline]
    pub fn factor(&self, r: f64, delta: f64) -> f64 {
        let c = r * (delta - self.tau).cos();
        match self.detector {
            Detector::Right => 1.0 + c,
            Detector::Left => 1.0 - c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutcomeRecord {
    pub events: Vec<Detection>,
}

impl OutcomeRecord {
    /// `l` left and `r` right counts, all at zero offset.
    pub fn counts(l: usize, r: usize) -> Self {
        let mut events = vec![
            Detection {
                detector: Detector::Left,
                tau: 0.0
            };
            l
        ];
        events.extend(std::iter::repeat_n(
            Detection {
                detector: Detector::Right,
                tau: 0.0,
            },
            r,
        ));
        OutcomeRecord { events }
    }

    pub fn push(&mut self, detector: Detector, tau: f64) {
        self.events.push(Detection { detector, tau });
    }

    pub fn l(&self) -> usize {
        self.events.iter().filter(|e| e.detector == Detector::Left).count()
    }

    pub fn r(&self) -> usize {
        self.events.len() - self.l()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Same record with detector labels swapped and every offset moved by pi.
    pub fn mirrored(&self) -> Self {
        OutcomeRecord {
            events: self
                .events
                .iter()
                .map(|e| Detection {
                    detector: match e.detector {
                        Detector::Left => Detector::Right,
                        Detector::Right => Detector::Left,
                    },
                    tau: e.tau + PI,
                })
                .collect(),
        }
    }

    pub fn hash(&self) -> String {
        let mut bytes = Vec::with_capacity(9 * self.events.len());
        for e in &self.events {
            bytes.push(match e.detector {
                Detector::Left => b'L',
                Detector::Right => b'R',
            });
            bytes.extend_from_slice(&e.tau.to_bits().to_le_bytes());
        }
        sha256_hex(&bytes)
    }
}

fn log_density_values(rec: &OutcomeRecord, r: f64, n_grid: usize) -> Vec<f64> {
    (0..n_grid)
        .map(|i| {
            let d = TAU * i as f64 / n_grid as f64;
            rec.events.iter().map(|e| e.factor(r, d).ln()).sum::<f64>()
        })
        .collect()
}

fn grid_from_logs(logs: Vec<f64>) -> Result<PhaseGrid> {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::DegenerateDistribution);
    }
    PhaseGrid::new(logs.into_iter().map(|x| (x - m).exp()).collect())?.normalize()
}

/// Normalized relative-phase density after the record.
pub fn localizing_density(rec: &OutcomeRecord, state: &InitialState, n_grid: usize) -> Result<PhaseGrid> {
    state.validate()?;
    if let InitialState::Thermal(_) = state {
        return thermal_density_record(rec, n_grid);
    }
    grid_from_logs(log_density_values(rec, state.asymmetry(), n_grid))
}

// Nodes in psi on [0, pi]; the intensity split u = (1 + cos psi)/2 gives R = sin psi.
fn psi_nodes(n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.iter()
        .zip(&w)
        .map(|(x, w)| {
            let psi = 0.5 * PI * (x + 1.0);
            (psi, 0.5 * PI * w * psi.sin())
        })
        .collect()
}

// log weights over (psi node, delta bin) for a thermal pair.
fn thermal_logs(rec: &OutcomeRecord, nodes: &[(f64, f64)], n_grid: usize) -> Vec<Vec<f64>> {
    nodes
        .iter()
        .map(|(psi, w)| {
            let r = psi.sin();
            let lw = w.ln();
            (0..n_grid)
                .map(|i| {
                    let d = TAU * i as f64 / n_grid as f64;
                    lw + rec.events.iter().map(|e| e.factor(r, d).ln()).sum::<f64>()
                })
                .collect()
        })
        .collect()
}

fn thermal_marginal(rec: &OutcomeRecord, nq: usize, n_grid: usize) -> Vec<f64> {
    let logs = thermal_logs(rec, &psi_nodes(nq), n_grid);
    let m = logs
        .iter()
        .flat_map(|row| row.iter())
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0.0; n_grid];
    for row in &logs {
        for (o, x) in out.iter_mut().zip(row) {
            *o += (x - m).exp();
        }
    }
    out
}

/// Relative-phase density for two thermal modes. The intensity integral is
/// reduced to the split variable and done by Gauss-Legendre quadrature, with
/// the node count doubled until two successive rules agree.
pub fn thermal_density_record(rec: &OutcomeRecord, n_grid: usize) -> Result<PhaseGrid> {
    let mut nq = (rec.len() + 16).max(32);
    let mut prev = PhaseGrid::new(thermal_marginal(rec, nq, n_grid))?.normalize()?;
    let mut resid = f64::INFINITY;
    while nq <= 4096 {
        nq *= 2;
        let next = PhaseGrid::new(thermal_marginal(rec, nq, n_grid))?.normalize()?;
        let scale = next.values().iter().cloned().fold(0.0, f64::max);
        resid = next.max_abs_diff(&prev)? / scale;
        if resid < 1e-12 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::numerical("thermal_density", resid))
}

pub fn thermal_density(l: usize, r: usize, n_grid: usize) -> Result<PhaseGrid> {
    if l + r == 0 {
        return Err(Error::invalid("thermal density needs at least one detection"));
    }
    thermal_density_record(&OutcomeRecord::counts(l, r), n_grid)
}

/// Contrast of the next-detection rate as a phase offset is swept.
///
/// The rate is `A + Re(B e^{-i tau})` exactly, so the sweep extremes are
/// `A +- |B|` and the returned visibility is `|B| / A`.
pub fn sweep_visibility(rec: &OutcomeRecord, state: &InitialState, n_grid: usize) -> Result<f64> {
    state.validate()?;
    let (mut a, mut br, mut bi) = (0.0, 0.0, 0.0);
    let mut acc = |r: f64, w: f64, d: f64| {
        a += w;
        br += w * r * d.cos();
        bi += w * r * d.sin();
    };
    match state {
        InitialState::Thermal(_) => {
            let nodes = psi_nodes((rec.len() + 16).max(64));
            let logs = thermal_logs(rec, &nodes, n_grid);
            let m = logs.iter().flat_map(|r| r.iter()).cloned().fold(f64::NEG_INFINITY, f64::max);
            for ((psi, _), row) in nodes.iter().zip(&logs) {
                for (i, x) in row.iter().enumerate() {
                    acc(psi.sin(), (x - m).exp(), TAU * i as f64 / n_grid as f64);
                }
            }
        }
        _ => {
            let r = state.asymmetry();
            let g = grid_from_logs(log_density_values(rec, r, n_grid))?;
            for (i, w) in g.values().iter().enumerate() {
                acc(r, *w, g.coordinate(i));
            }
        }
    }
    if !(a > 0.0) {
        return Err(Error::DegenerateDistribution);
    }
    Ok(br.hypot(bi) / a)
}

fn validate_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("leakage {eps} outside (0, 1)")));
    }
    Ok(())
}

/// log of `D!/(l! r!) Gamma(r + 1/2) Gamma(l + 1/2) / (pi Gamma(D + 1))`.
pub fn ln_ratio_weight(l: usize, r: usize) -> f64 {
    let d = l + r;
    ln_binomial(d, l) + ln_gamma(r as f64 + 0.5) + ln_gamma(l as f64 + 0.5) - PI.ln() - ln_gamma(d as f64 + 1.0)
}

/// Record probability for equal Poissonian modes of mean `nbar`.
pub fn plr_poissonian(nbar: f64, eps: f64, l: usize, r: usize) -> Result<f64> {
    validate_eps(eps)?;
    if !(nbar >= 0.0) {
        return Err(Error::invalid("mean photon number must be nonnegative"));
    }
    Ok((ln_poisson(l + r, 2.0 * eps * nbar) + ln_ratio_weight(l, r)).exp())
}

/// Approximate record probability for the Fock input `|N>|N>`.
pub fn plr_fock_approx(n: usize, eps: f64, l: usize, r: usize) -> Result<f64> {
    plr_poissonian(n as f64, eps, l, r)
}

pub fn plr_thermal(nbar: f64, eps: f64, l: usize, r: usize) -> Result<f64> {
    validate_eps(eps)?;
    if !(nbar > 0.0) {
        return Err(Error::invalid("mean photon number must be positive"));
    }
    let x = eps * nbar;
    let d = (l + r) as f64;
    Ok((d * x.ln() - (d + 2.0) * x.ln_1p()).exp())
}

/// Full-period mean of `(1 + R cos t)^r (1 - R cos t)^l`, as a logarithm.
pub struct AsymMeans {
    r: f64,
    q: Vec<Dd>,
}

impl AsymMeans {
    pub fn new(r: f64, d_max: usize) -> Self {
        let n = d_max.min(LEGENDRE_MAX_D);
        AsymMeans {
            r,
            q: legendre_scaled(n, 1.0 - r * r),
        }
    }

    pub fn ln_mean(&self, l: usize, r: usize) -> f64 {
        let d = l + r;
        if d == 0 || self.r == 0.0 {
            return 0.0;
        }
        if d < self.q.len() {
            let (v, abs) = legendre_mix_sum(l, r, &self.q);
            if v > 0.0 && abs / v < LEGENDRE_MAX_CANCEL {
                return v.ln();
            }
        }
        trapezoid_ln_mean(l, r, self.r)
    }
}

/// Periodic trapezoid in log space; exact for trigonometric polynomials of
/// degree below the node count.
pub fn trapezoid_ln_mean(l: usize, r: usize, rr: f64) -> f64 {
    let n = 2 * (l + r) + 8;
    let logs: Vec<f64> = (0..n)
        .map(|i| {
            let c = rr * (TAU * i as f64 / n as f64).cos();
            let mut s = 0.0;
            if r > 0 {
                s += r as f64 * (1.0 + c).ln();
            }
            if l > 0 {
                s += l as f64 * (1.0 - c).ln();
            }
            s
        })
        .collect();
    log_sum_exp(&logs) - (n as f64).ln()
}

fn ln_plr_asym(means: &AsymMeans, lambda: f64, l: usize, r: usize) -> f64 {
    let d = l + r;
    ln_poisson(d, lambda) + ln_binomial(d, l) - d as f64 * std::f64::consts::LN_2 + means.ln_mean(l, r)
}

/// Record probability for Poissonian modes of unequal means.
pub fn plr_asymmetric(nbar: f64, mbar: f64, eps: f64, l: usize, r: usize) -> Result<f64> {
    validate_eps(eps)?;
    InitialState::AsymPoissonian { nbar, mbar }.validate()?;
    let rr = AsymmetryRatio::from_intensities(nbar, mbar).0;
    let means = AsymMeans::new(rr, l + r);
    Ok(ln_plr_asym(&means, eps * (nbar + mbar), l, r).exp())
}

/// Closed-form visibility after `l`, `r` counts for symmetric Poissonian/Fock
/// or thermal inputs.
pub fn visibility_closed_form(state: &InitialState, l: usize, r: usize) -> Result<f64> {
    let d = (l + r) as f64;
    let diff = (r as f64 - l as f64).abs();
    match state {
        InitialState::Fock(_) | InitialState::Poissonian(_) => Ok(diff / (d + 1.0)),
        InitialState::Thermal(_) => Ok(diff / (d + 2.0)),
        InitialState::AsymPoissonian { .. } => Err(Error::UnsupportedSpec(
            "no closed form for unequal intensities; use visibility_asymmetric".into(),
        )),
    }
}

/// Mean visibility over both halves of a record split at random.
pub fn split_visibility(l: usize, r: usize) -> Result<f64> {
    let d = l + r;
    if d == 0 {
        return Err(Error::invalid("split visibility needs at least one count"));
    }
    let (lf, rf) = (l as f64, r as f64);
    let cross = if l == 0 || r == 0 {
        0.0
    } else {
        4.0 * (lf * rf).sqrt()
            * (ln_gamma(rf + 1.0) + ln_gamma(lf + 1.0) - ln_gamma(rf + 0.5) - ln_gamma(lf + 0.5)).exp()
    };
    Ok(((rf - lf).powi(2) + cross) / (d as f64 * (d as f64 + 1.0)))
}

fn v_tilde_from(a: f64, b: f64, rr: f64) -> f64 {
    // the Poissonian and combinatorial prefactors of (r+1)P_{l,r+1} and
    // (l+1)P_{l+1,r} coincide, leaving the two means
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    ((ea - eb) / (ea + eb)).abs() / rr
}

fn v_tilde(means: &AsymMeans, rr: f64, l: usize, r: usize) -> f64 {
    v_tilde_from(means.ln_mean(l, r + 1), means.ln_mean(l + 1, r), rr)
}

/// Rescaled visibility for unequal Poissonian intensities.
pub fn visibility_asymmetric(nbar: f64, mbar: f64, eps: f64, l: usize, r: usize) -> Result<f64> {
    validate_eps(eps)?;
    InitialState::AsymPoissonian { nbar, mbar }.validate()?;
    let rr = AsymmetryRatio::from_intensities(nbar, mbar).0;
    let means = AsymMeans::new(rr, l + r + 1);
    Ok(v_tilde(&means, rr, l, r))
}

fn poisson_cutoff(lambda: f64) -> usize {
    (lambda + 10.0 * lambda.sqrt() + 25.0).ceil() as usize
}

/// Expected visibility at each value of the total mean count `x` in `sweep`
/// (`2 eps N` for equal modes, `eps (N + M)` otherwise).
///
/// With `restrict_single_valued` only records with `|l - r| >= R (l + r)` are
/// averaged, renormalized by their total probability.
pub fn expected_visibility_curve(state: &InitialState, sweep: &[f64], restrict_single_valued: bool) -> Result<Vec<f64>> {
    state.validate()?;
    if let Some(x) = sweep.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::invalid(format!("sweep value {x} must be nonnegative")));
    }
    if let InitialState::Thermal(_) = state {
        return Ok(sweep.iter().map(|x| thermal_expected(x / 2.0, restrict_single_valued)).collect());
    }
    let rr = state.asymmetry();
    let d_max = sweep.iter().map(|x| poisson_cutoff(*x)).max().unwrap_or(0);
    // means depend on R only, so one table serves the whole sweep
    let means = AsymMeans::new(rr, d_max + 1);
    let table: Vec<Vec<f64>> = (0..=d_max + 1)
        .map(|d| (0..=d).map(|l| means.ln_mean(l, d - l)).collect())
        .collect();
    Ok(sweep
        .iter()
        .map(|&x| poissonian_expected(&table, rr, x, restrict_single_valued))
        .collect())
}

fn poissonian_expected(table: &[Vec<f64>], rr: f64, x: f64, restrict: bool) -> f64 {
    let d_max = poisson_cutoff(x);
    let (mut num, mut den) = (0.0, 0.0);
    for d in 0..=d_max {
        let ln_pd = ln_poisson(d, x) - d as f64 * std::f64::consts::LN_2;
        for l in 0..=d {
            let r = d - l;
            if restrict && ((l as f64 - r as f64).abs() < rr * d as f64 - 1e-12) {
                continue;
            }
            let p = (ln_pd + ln_binomial(d, l) + table[d][l]).exp();
            if p == 0.0 {
                continue;
            }
            num += p * v_tilde_from(table[d + 1][l], table[d + 1][l + 1], rr);
            den += p;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn thermal_expected(y: f64, restrict: bool) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let (mut num, mut den, mut seen) = (0.0, 0.0, 0.0);
    let mut d = 0usize;
    while 1.0 - seen > TAIL * 1e-2 && d < 1_000_000 {
        let p = (d as f64 * y.ln() - (d as f64 + 2.0) * y.ln_1p()).exp();
        for l in 0..=d {
            let r = d - l;
            seen += p;
            if restrict && l != 0 && r != 0 {
                continue;
            }
            num += p * (r as f64 - l as f64).abs() / (d as f64 + 2.0);
            den += p;
        }
        d += 1;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Probability, given `d` counts, that the record satisfies `|l - r| >= R d`.
pub fn p_single_valued(rr: f64, d: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&rr) {
        return Err(Error::invalid(format!("asymmetry {rr} outside [0, 1]")));
    }
    let means = AsymMeans::new(rr, d);
    let mut total = 0.0;
    for l in 0..=d {
        let r = d - l;
        if (l as f64 - r as f64).abs() >= rr * d as f64 - 1e-12 {
            total += (ln_binomial(d, l) - d as f64 * std::f64::consts::LN_2 + means.ln_mean(l, r)).exp();
        }
    }
    Ok(total)
}

/// `sum_{l,r} P_{l,r} density_{l,r}`, normalized by the retained probability.
pub fn mixing_washout(state: &InitialState, eps: f64, n_grid: usize) -> Result<PhaseGrid> {
    validate_eps(eps)?;
    state.validate()?;
    let mut acc = vec![0.0; n_grid];
    let mut mass = 0.0;
    let mut add = |p: f64, g: &PhaseGrid| {
        mass += p;
        for (a, v) in acc.iter_mut().zip(g.values()) {
            *a += p * v;
        }
    };
    match *state {
        InitialState::Thermal(nbar) => {
            let y = eps * nbar;
            let q = y / (1.0 + y);
            let mut d = 1usize;
            add(plr_thermal(nbar, eps, 0, 0)?, &PhaseGrid::uniform(n_grid));
            while (d as f64 + 1.0) * q.powi(d as i32) > 1e-12 {
                for l in 0..=d {
                    add(plr_thermal(nbar, eps, l, d - l)?, &thermal_density(l, d - l, n_grid)?);
                }
                d += 1;
            }
        }
        _ => {
            let lambda = eps * state.total_intensity();
            let rr = state.asymmetry();
            let means = AsymMeans::new(rr, poisson_cutoff(lambda));
            for d in 0..=poisson_cutoff(lambda) {
                for l in 0..=d {
                    let p = ln_plr_asym(&means, lambda, l, d - l).exp();
                    if p < 1e-300 {
                        continue;
                    }
                    add(p, &localizing_density(&OutcomeRecord::counts(l, d - l), state, n_grid)?);
                }
            }
        }
    }
    if !(mass > 0.0) {
        return Err(Error::DegenerateDistribution);
    }
    PhaseGrid::new(acc.into_iter().map(|v| v / mass).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeModeResult {
    pub delta12: f64,
    pub delta23: f64,
    pub delta13: f64,
    pub density13: PhaseGrid,
    pub record_probability_locked: f64,
    pub record_probability_free: f64,
}

/// Modes 1 and 2 are locked at `delta0`; `rec` is taken on modes 2 and 3.
/// The (1, 3) density is obtained by marginalizing the joint phase
/// distribution over mode 2.
pub fn three_mode_transitivity(delta0: f64, rec: &OutcomeRecord, n_grid: usize) -> Result<ThreeModeResult> {
    let state = InitialState::Poissonian(1.0);
    let g23 = localizing_density(rec, &state, n_grid)?;
    let lock = ((delta0.rem_euclid(TAU)) / TAU * n_grid as f64).round() as usize % n_grid;
    let mut p12 = vec![0.0; n_grid];
    p12[lock] = 1.0;
    // joint over (d12, d23) with d13 = d12 + d23
    let mut p13 = vec![0.0; n_grid];
    for (i, a) in p12.iter().enumerate() {
        if *a == 0.0 {
            continue;
        }
        for (j, b) in g23.values().iter().enumerate() {
            p13[(i + j) % n_grid] += a * b;
        }
    }
    let density13 = PhaseGrid::new(p13)?.normalize()?;
    let unnorm = |d: f64| rec.events.iter().map(|e| 0.5 * e.factor(1.0, d)).product::<f64>();
    let h = 1.0 / n_grid as f64;
    let free: f64 = (0..n_grid).map(|j| h * unnorm(TAU * j as f64 / n_grid as f64)).sum();
    let mut locked = 0.0;
    for (i, a) in p12.iter().enumerate() {
        for j in 0..n_grid {
            // the record only sees theta3 - theta2
            locked += a * h * unnorm(TAU * ((i + j) % n_grid) as f64 / n_grid as f64 - TAU * i as f64 / n_grid as f64);
        }
    }
    Ok(ThreeModeResult {
        delta12: TAU * lock as f64 / n_grid as f64,
        delta23: g23.coordinate(g23.argmax()),
        delta13: density13.coordinate(density13.argmax()),
        density13,
        record_probability_locked: locked,
        record_probability_free: free,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub state: InitialState,
    pub eps_total: f64,
    pub random_tau: bool,
    pub efficiency: f64,
    pub n_grid: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            state: InitialState::Poissonian(100.0),
            eps_total: 0.2,
            random_tau: false,
            efficiency: 1.0,
            n_grid: DEFAULT_N_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub record: OutcomeRecord,
    pub lost: usize,
    /// Spectral visibility of the density after each detection.
    pub visibility: Vec<f64>,
    pub density: PhaseGrid,
}

// Weights over (split node, delta bin); a single row for coherent inputs.
// Grid cosines and sines are tabulated once so updates need no trig calls.
struct Posterior {
    rows: Vec<(f64, Vec<f64>)>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Posterior {
    fn new(state: &InitialState, n_grid: usize) -> Self {
        let rows = match state {
            InitialState::Thermal(_) => psi_nodes(48)
                .into_iter()
                .map(|(psi, w)| (psi.sin(), vec![w; n_grid]))
                .collect(),
            _ => vec![(state.asymmetry(), vec![1.0; n_grid])],
        };
        let angles = (0..n_grid).map(|i| TAU * i as f64 / n_grid as f64);
        Posterior {
            rows,
            cos: angles.clone().map(f64::cos).collect(),
            sin: angles.map(f64::sin).collect(),
        }
    }

    // cos(delta_i - tau) for every bin
    fn shifted_cos(&self, tau: f64) -> impl Iterator<Item = f64> + '_ {
        let (st, ct) = tau.sin_cos();
        self.cos.iter().zip(&self.sin).map(move |(c, s)| c * ct + s * st)
    }

    fn p_right(&self, tau: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (rr, w) in &self.rows {
            for (v, c) in w.iter().zip(self.shifted_cos(tau)) {
                num += v * 0.5 * (1.0 + rr * c);
                den += v;
            }
        }
        num / den
    }

    fn update(&mut self, det: Detection) {
        let sign = match det.detector {
            Detector::Right => 1.0,
            Detector::Left => -1.0,
        };
        let shifted: Vec<f64> = self.shifted_cos(det.tau).collect();
        let mut top = 0.0f64;
        for (rr, w) in &mut self.rows {
            for (v, c) in w.iter_mut().zip(&shifted) {
                *v *= 1.0 + sign * *rr * c;
                top = top.max(*v);
            }
        }
        for (_, w) in &mut self.rows {
            for v in w.iter_mut() {
                *v /= top;
            }
        }
    }

    fn marginal(&self) -> Vec<f64> {
        let n = self.rows[0].1.len();
        let mut out = vec![0.0; n];
        for (_, w) in &self.rows {
            for (o, v) in out.iter_mut().zip(w) {
                *o += v;
            }
        }
        out
    }

    // modulus of the first harmonic of the normalized marginal
    fn visibility(&self) -> f64 {
        let m = self.marginal();
        let (mut a, mut c, mut s) = (0.0, 0.0, 0.0);
        for ((v, cv), sv) in m.iter().zip(&self.cos).zip(&self.sin) {
            a += v;
            c += v * cv;
            s += v * sv;
        }
        c.hypot(s) / a
    }
}

fn sample_event_count(state: &InitialState, eps: f64, rng: &mut RunRng) -> Result<usize> {
    let poisson = |lambda: f64, rng: &mut RunRng| -> Result<usize> {
        if lambda <= 0.0 {
            return Ok(0);
        }
        let p = Poisson::new(lambda).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(p.sample(rng) as usize)
    };
    match *state {
        InitialState::Fock(n) => {
            let b = Binomial::new(2 * n as u64, eps).map_err(|e| Error::invalid(e.to_string()))?;
            Ok(b.sample(rng) as usize)
        }
        InitialState::Thermal(nbar) => {
            // sum of two exponential intensities
            let g = Gamma::new(2.0, nbar).map_err(|e| Error::invalid(e.to_string()))?;
            let s: f64 = g.sample(rng);
            poisson(eps * s, rng)
        }
        _ => poisson(eps * state.total_intensity(), rng),
    }
}

/// One sequential run: the number of emitted photons is drawn first, each is
/// lost with probability `1 - efficiency`, and each detected photon picks its
/// port from the current posterior and then updates it.
pub fn run_trajectory(cfg: &TrajectoryConfig, rng: &mut RunRng) -> Result<Trajectory> {
    cfg.state.validate()?;
    validate_eps(cfg.eps_total)?;
    if !(cfg.efficiency > 0.0 && cfg.efficiency <= 1.0) {
        return Err(Error::invalid(format!("efficiency {} outside (0, 1]", cfg.efficiency)));
    }
    if cfg.n_grid < 8 {
        return Err(Error::invalid("trajectory grid needs at least 8 points"));
    }
    let n = cfg.n_grid;
    let emitted = sample_event_count(&cfg.state, cfg.eps_total, rng)?;
    let mut post = Posterior::new(&cfg.state, n);
    let mut record = OutcomeRecord::default();
    let mut visibility = Vec::new();
    let mut lost = 0;
    for _ in 0..emitted {
        if rng.random::<f64>() >= cfg.efficiency {
            lost += 1;
            continue;
        }
        let tau = if cfg.random_tau { rng.random::<f64>() * TAU } else { 0.0 };
        let p = post.p_right(tau);
        let detector = if rng.random::<f64>() < p { Detector::Right } else { Detector::Left };
        let det = Detection { detector, tau };
        post.update(det);
        record.events.push(det);
        visibility.push(post.visibility());
    }
    Ok(Trajectory {
        record,
        lost,
        visibility,
        density: PhaseGrid::new(post.marginal())?.normalize()?,
    })
}
