//! The acceptance suite behind `relational verify`.

use std::f64::consts::TAU;
use std::time::Instant;

use rayon::prelude::*;

use crate::bec::{bayesian_posterior, run_batch, CondensateSpec, FringeTracker, VisibilityStats};
use crate::error::Result;
use crate::fock::{fock_addition_basic, fock_addition_localized, hom_same_detector_ratio, plr_exact_table, HomRatio};
use crate::optical::{
    expected_visibility_curve, mixing_washout, plr_fock_approx, run_trajectory, split_visibility, sweep_visibility,
    visibility_closed_form, AsymMeans, AsymmetryRatio, InitialState, OutcomeRecord, TrajectoryConfig,
};
use crate::phase_dist::{visibility_of_grid, PhaseGrid};
use crate::rng::stream;
use crate::scattering::{
    deflect_factor_mono, forward_factor_mono, free_particle_density, LightSpec, ParticleEnsemble, ScatterRecord,
    ViewCone,
};
use crate::special::{bessel_j0, gauss_legendre, ln_factorial};

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub limit_seconds: f64,
}

impl std::fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {:>2} {} [{}] {} ({:.2}s of {:.0}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds,
            self.limit_seconds
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

const SUITE: [(usize, &str, f64, Check); 10] = [
    (1, "closed-form visibilities", 1.0, closed_form_visibilities),
    (2, "Fock approximation vs exact oracle", 30.0, fock_approximation),
    (3, "asymmetric Legendre sum vs quadrature", 60.0, asymmetric_means),
    (4, "Hong-Ou-Mandel ratios", 5.0, hom_ratios),
    (5, "Fock addition", 60.0, fock_addition),
    (6, "condensate Monte Carlo", 300.0, condensate_monte_carlo),
    (7, "Gaussian visibility error ladder", 1.0, error_ladder),
    (8, "scattering densities", 30.0, scattering),
    (9, "mixing washout", 10.0, washout),
    (10, "determinism across thread counts", 300.0, determinism),
];

pub fn run_criterion(id: usize) -> Option<CriterionReport> {
    let (id, title, limit, check) = *SUITE.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
    let seconds = start.elapsed().as_secs_f64();
    Some(CriterionReport {
        id,
        title,
        passed: ok && seconds < limit,
        detail,
        seconds,
        limit_seconds: limit,
    })
}

pub fn run_all() -> Vec<CriterionReport> {
    (1..=SUITE.len()).filter_map(run_criterion).collect()
}

fn closed_form_visibilities() -> Result<(bool, String)> {
    let p = visibility_closed_form(&InitialState::Poissonian(1.0), 0, 1)?;
    let t = sweep_visibility(&OutcomeRecord::counts(0, 1), &InitialState::Thermal(1.0), 4096)?;
    let mut ok = p == 0.5 && (t - 1.0 / 3.0).abs() < 1e-12;
    let mut lambdas = Vec::new();
    for (d, want) in [(2usize, 1.27), (4, 1.13), (10, 1.05)] {
        let lam = split_visibility(d / 2, d / 2)? * (d as f64 + 1.0) / d as f64;
        ok &= (lam - want).abs() <= 0.005;
        lambdas.push(format!("{lam:.5}"));
    }
    Ok((ok, format!("V_pois(0,1)={p} V_th(0,1)={t:.15} lambda={}", lambdas.join("/"))))
}

fn fock_approximation() -> Result<(bool, String)> {
    let n = 20;
    let mut ok = true;
    let mut parts = Vec::new();
    for eps in [0.05, 0.1, 0.2] {
        let table = plr_exact_table(n, eps, 0.0, 2 * n + 2)?;
        let mut worst: f64 = 0.0;
        for (l, row) in table.iter().enumerate() {
            for (r, exact) in row.iter().enumerate() {
                if *exact > 1e-4 {
                    worst = worst.max((exact - plr_fock_approx(n, eps, l, r)?).abs() / exact);
                }
            }
        }
        ok &= worst <= eps;
        parts.push(format!("eps={eps}: {worst:.4} ({:.2} eps)", worst / eps));
    }
    Ok((ok, parts.join(", ")))
}

/// Worst relative error of `ln_mean` against panel Gauss-Legendre quadrature
/// of the full-period mean, over `l + r <= 20` and the three test asymmetries.
pub fn asymmetric_worst_error(ln_mean: &dyn Fn(f64, usize, usize) -> f64) -> f64 {
    let (x, w) = gauss_legendre(24);
    let panels = 16;
    let mut worst: f64 = 0.0;
    for rr in [0.2, 0.57, 0.94] {
        for d in 0..=20usize {
            for l in 0..=d {
                let r = d - l;
                let h = TAU / panels as f64;
                let mut s = 0.0;
                for p in 0..panels {
                    for (xi, wi) in x.iter().zip(&w) {
                        let t = h * (p as f64 + 0.5 * (xi + 1.0));
                        let c = rr * t.cos();
                        s += 0.5 * h * wi * (1.0 + c).powi(r as i32) * (1.0 - c).powi(l as i32);
                    }
                }
                let quad = s / TAU;
                let got = ln_mean(rr, l, r).exp();
                worst = worst.max((got - quad).abs() / quad);
            }
        }
    }
    worst
}

fn asymmetric_means() -> Result<(bool, String)> {
    let worst = asymmetric_worst_error(&|rr, l, r| AsymMeans::new(rr, l + r).ln_mean(l, r));
    let mut ok = worst <= 1e-8;
    let mut vis = Vec::new();
    for (rr, want) in [(0.94, 0.98), (0.57, 0.94), (0.2, 0.81)] {
        let (nbar, mbar) = AsymmetryRatio(rr).intensities(1.0);
        let v = expected_visibility_curve(&InitialState::AsymPoissonian { nbar, mbar }, &[100.0], true)?[0];
        ok &= (v - want).abs() <= 0.01;
        vis.push(format!("R={rr}: {v:.4}"));
    }
    Ok((ok, format!("worst rel err {worst:.2e}; restricted V at 100: {}", vis.join(", "))))
}

fn hom_ratios() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for total in 2..=12usize {
        for n in 0..=total {
            let m = total - n;
            let (nf, mf) = (n as f64, m as f64);
            let den = nf * nf + mf * mf - nf - mf;
            let got = hom_same_detector_ratio(n, m)?;
            match got {
                HomRatio::Infinite => ok &= den == 0.0,
                HomRatio::Finite(v) => {
                    let want = (den + 4.0 * nf * mf) / den;
                    let e = ((v - want) / want).abs();
                    ok &= den != 0.0 && e <= 1e-10;
                    worst = worst.max(e);
                }
            }
        }
    }
    Ok((ok, format!("worst rel err {worst:.2e}")))
}

fn fock_addition() -> Result<(bool, String)> {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut worst_w1: f64 = 0.0;
    for n in 1..=20usize {
        let want = (ln_factorial(2 * n) - 2.0 * n as f64 * 2f64.ln() - 2.0 * ln_factorial(n)).exp();
        let p0 = fock_addition_basic(n)?.p0;
        worst = worst.max((p0 - want).abs());
        let w1 = fock_addition_localized(n, 1)?.p0 / p0;
        worst_w1 = worst_w1.max((w1 - 2.0).abs());
    }
    ok &= worst <= 1e-10 && worst_w1 <= 1e-10;
    let r2 = fock_addition_localized(2, 2)?.p0 / fock_addition_basic(2)?.p0;
    let r30 = fock_addition_localized(30, 2)?.p0 / fock_addition_basic(30)?.p0;
    ok &= (r2 - 2.6).abs() <= 0.05 && (r30 - 2.9).abs() <= 0.05;
    Ok((
        ok,
        format!("P0 err {worst:.1e}, W=1 ratio err {worst_w1:.1e}, W=2 ratio N=2 {r2:.4} N=30 {r30:.4}"),
    ))
}

fn condensate_monte_carlo() -> Result<(bool, String)> {
    let spec = CondensateSpec::poissonian(1000.0, 1000.0);
    let stats = VisibilityStats::from_records(&run_batch(&spec, 50, 5000, 1.0, 7)?)?;
    let first = stats.mean_v[0];
    let rates: Vec<f64> = (10..=50).map(|d| stats.rate(d)).collect();
    let (lo, hi) = rates.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    let mut worst_bayes: f64 = 0.0;
    let eq = CondensateSpec::poissonian(1.0, 1.0);
    for rec in run_batch(&eq, 20, 100, 1.0, 11)? {
        let mut t = FringeTracker::new(eq, 1.0)?;
        for x in &rec.positions {
            t.observe(*x)?;
        }
        let q = t.phase_density(1024)?;
        worst_bayes = worst_bayes.max(q.max_abs_diff(&bayesian_posterior(&rec, 1024)?)?);
    }
    let ok = (first - 0.5).abs() <= 1e-15 && lo >= 0.8 && hi <= 2.0 && worst_bayes <= 1e-10;
    Ok((
        ok,
        format!(
            "mean V(1)={first}, -2D ln V over D=10..50 in [{lo:.4}, {hi:.4}], mean V(50)={:.4}, posterior diff {worst_bayes:.1e}",
            stats.mean_v[49]
        ),
    ))
}

/// Fractional error of `e^{-sigma^2/2}` with `sigma^2 = 2/r` against the grid
/// visibility of `cos^{2r}(delta/2)`.
pub fn ladder_error(r: usize) -> Result<f64> {
    let g = PhaseGrid::from_fn(4096, |d| (0.5 * d).cos().powi(2 * r as i32))?;
    let v = visibility_of_grid(&g)?;
    Ok(((-1.0 / r as f64).exp() - v).abs() / v)
}

fn error_ladder() -> Result<(bool, String)> {
    let e: Vec<f64> = [1usize, 2, 3, 7, 23].iter().map(|r| ladder_error(*r)).collect::<Result<_>>()?;
    let ok = (e[0] - 0.26).abs() <= 0.01
        && (e[1] - 0.09).abs() <= 0.01
        && (e[2] - 0.04).abs() <= 0.01
        && e[3] < 0.01
        && e[4] < 0.001;
    Ok((
        ok,
        format!("r=1,2,3,7,23: {:.4} {:.4} {:.4} {:.4} {:.5}", e[0], e[1], e[2], e[3], e[4]),
    ))
}

fn scattering() -> Result<(bool, String)> {
    let k = 5.0;
    let mut bessel: f64 = 0.0;
    for i in 0..=4000 {
        let dr = -4.0 + 8.0 * i as f64 / 4000.0;
        let j = bessel_j0(k * dr);
        bessel = bessel
            .max((deflect_factor_mono(k, dr, 0.0) - 0.5 * (1.0 + j)).abs())
            .max((forward_factor_mono(k, dr, 0.0) - 0.5 * (1.0 - j)).abs());
    }
    let ens = ParticleEnsemble::new(0.0, 2.0, 0.2 * TAU / k)?;
    let light = LightSpec::Mono { k };
    let view = ViewCone::default();
    let n_grid = 2001;
    let all_s = free_particle_density(&ScatterRecord::free(0, 5), &light, &ens, &view, n_grid)?;
    let peak_at_origin = all_s.coordinate(all_s.argmax()).abs() < 0.5 * all_s.step();
    let mut asym: f64 = 0.0;
    for (f, s) in [(0, 5), (5, 0), (2, 3), (3, 2), (1, 1)] {
        let g = free_particle_density(&ScatterRecord::free(f, s), &light, &ens, &view, n_grid)?;
        let v = g.values();
        let top = v.iter().cloned().fold(0.0, f64::max);
        for i in 0..v.len() {
            asym = asym.max((v[i] - v[v.len() - 1 - i]).abs() / top);
        }
    }
    let rec = ScatterRecord::free(2, 3);
    let base = free_particle_density(&rec, &light, &ens, &ViewCone::new(0.0)?, n_grid)?;
    let mut sweep: f64 = 0.0;
    for i in 1..=10 {
        let g = free_particle_density(&rec, &light, &ens, &ViewCone::new(0.005 * i as f64)?, n_grid)?;
        sweep = sweep.max(g.l1_distance(&base)?);
    }
    let ok = bessel <= 1e-9 && peak_at_origin && asym <= 1e-12 && sweep < 0.01;
    Ok((
        ok,
        format!(
            "J0 err {bessel:.1e}, all-deflected peak at origin {peak_at_origin}, asymmetry {asym:.1e}, eps-sweep L1 {sweep:.4}"
        ),
    ))
}

fn washout() -> Result<(bool, String)> {
    let g = mixing_washout(&InitialState::Poissonian(100.0), 0.01, 1024)?;
    let mean = g.values().iter().sum::<f64>() / g.n_grid() as f64;
    let dev = g.values().iter().map(|v| (v - mean).abs() / mean).fold(0.0, f64::max);
    Ok((dev <= 1e-8, format!("max relative deviation {dev:.2e}")))
}

fn hashes_with_threads(threads: usize) -> Result<Vec<String>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::Error::Io(e.to_string()))?;
    pool.install(|| {
        let mut h = VisibilityStats::from_records(&run_batch(&CondensateSpec::poissonian(1000.0, 1000.0), 50, 400, 1.0, 7)?)?
            .record_hashes;
        let tc = TrajectoryConfig {
            state: InitialState::Poissonian(50.0),
            random_tau: true,
            efficiency: 0.8,
            n_grid: 256,
            ..TrajectoryConfig::default()
        };
        let opt: Vec<String> = (0..200u64)
            .into_par_iter()
            .map(|i| Ok(run_trajectory(&tc, &mut stream(7, i))?.record.hash()))
            .collect::<Result<_>>()?;
        h.extend(opt);
        Ok(h)
    })
}

fn determinism() -> Result<(bool, String)> {
    let one = hashes_with_threads(1)?;
    let four = hashes_with_threads(4)?;
    let again = hashes_with_threads(4)?;
    let ok = one == four && four == again;
    Ok((ok, format!("{} record hashes, 1 vs 4 threads identical: {}", one.len(), one == four)))
}
