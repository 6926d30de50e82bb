//! Acceptance suite. Each criterion compares library output with reference
//! values computed here, prints one line, and the process exits non-zero if
//! any criterion fails.

mod common;

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use common::*;
use relational::bec::{bayesian_posterior, run_batch, CondensateSpec, FringeTracker};
use relational::fock::{fock_addition_basic, fock_addition_localized, hom_same_detector_ratio, plr_exact_table, HomRatio};
use relational::optical::{
    expected_visibility_curve, localizing_density, mixing_washout, plr_asymmetric, plr_fock_approx, run_trajectory,
    split_visibility, sweep_visibility, visibility_closed_form, AsymmetryRatio, InitialState, OutcomeRecord,
    TrajectoryConfig,
};
use relational::phase_dist::{visibility_of_grid, PhaseGrid};
use relational::rng::stream;
use relational::scattering::{
    deflect_factor_mono, forward_factor_mono, free_particle_density, sample_scatter_run, LightSpec,
    ParticleEnsemble, ScatterFactors, ScatterRecord, ViewCone,
};

type Outcome = Result<(bool, String), relational::Error>;

fn closed_form() -> Outcome {
    let pois = visibility_closed_form(&InitialState::Poissonian(10.0), 0, 1)?;
    let pois_grid = visibility_of_grid(&localizing_density(&OutcomeRecord::counts(0, 1), &InitialState::Poissonian(10.0), 4096)?)?;
    let reference = first_harmonic(&phase_samples(4096, |d| (0.5 * d).cos().powi(2)));
    let thermal = sweep_visibility(&OutcomeRecord::counts(0, 1), &InitialState::Thermal(1.0), 4096)?;
    let mut ok = pois == 0.5 && (pois_grid - reference).abs() < 1e-12 && (reference - 0.5).abs() < 1e-12;
    ok &= (thermal - 1.0 / 3.0).abs() < 1e-12;
    let mut lams = Vec::new();
    for (d, want) in [(2usize, 1.27), (4, 1.13), (10, 1.05)] {
        let h = d / 2;
        let hf = h as f64;
        // cross term 4 sqrt(rl) Gamma(r+1)Gamma(l+1) / (Gamma(r+1/2)Gamma(l+1/2)) at l = r
        let cross = 4.0 * hf * (2.0 * ln_fact(h) - 2.0 * ln_gamma_half(h)).exp();
        let reference = cross / (d as f64 * (d as f64 + 1.0));
        let got = split_visibility(h, h)?;
        let lam = got * (d as f64 + 1.0) / d as f64;
        ok &= (got - reference).abs() < 1e-12 && (lam - want).abs() <= 0.005;
        lams.push(format!("{lam:.5}"));
    }
    Ok((ok, format!("V_pois(0,1)={pois} V_th(0,1)={thermal:.15} lambda(2,4,10)={}", lams.join("/"))))
}

fn fock_approximation() -> Outcome {
    let n = 20;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut oracle_gap: f64 = 0.0;
    let mut formula_gap: f64 = 0.0;
    for eps in [0.05, 0.1, 0.2] {
        let table = plr_exact_table(n, eps, 0.0, 2 * n + 2)?;
        let mut worst: f64 = 0.0;
        for (l, row) in table.iter().enumerate() {
            for (r, exact) in row.iter().enumerate() {
                if l + r > 2 * n {
                    continue;
                }
                if l + r <= 12 {
                    oracle_gap = oracle_gap.max((exact - plr_fock_reference(n, eps, l, r)).abs());
                }
                let approx = plr_reference(n as f64, eps, l, r);
                formula_gap = formula_gap.max((approx - plr_fock_approx(n, eps, l, r)?).abs() / approx.max(1e-300));
                if *exact > 1e-4 {
                    worst = worst.max((exact - approx).abs() / exact);
                }
            }
        }
        ok &= worst <= eps;
        parts.push(format!("eps={eps}: {worst:.4} = {:.2} eps", worst / eps));
    }
    ok &= oracle_gap < 1e-10 && formula_gap < 1e-10;
    Ok((
        ok,
        format!(
            "max rel err {} (limit 1.0 eps); oracle vs reference {oracle_gap:.1e}, formula vs reference {formula_gap:.1e}",
            parts.join(", ")
        ),
    ))
}

// Restricted expected visibility at total mean count `x`, from direct
// quadrature of the two-mode means.
fn restricted_expected(rr: f64, x: f64) -> f64 {
    let d_max = (x + 10.0 * x.sqrt() + 25.0) as usize;
    let means: Vec<Vec<f64>> = (0..=d_max + 1)
        .map(|d| (0..=d).map(|l| asym_mean(rr, l, d - l)).collect())
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for d in 0..=d_max {
        for l in 0..=d {
            let r = d - l;
            if ((l as f64) - (r as f64)).abs() < rr * d as f64 - 1e-12 {
                continue;
            }
            let p = poisson(d, x) * (ln_choose(d, l) - d as f64 * 2f64.ln()).exp() * means[d][l];
            let a = means[d + 1][l];
            let b = means[d + 1][l + 1];
            num += p * ((a - b) / (a + b)).abs() / rr;
            den += p;
        }
    }
    num / den
}

fn asymmetric() -> Outcome {
    let (nbar_total, eps) = (40.0, 0.1);
    let mut worst: f64 = 0.0;
    for rr in [0.2, 0.57, 0.94] {
        let (nbar, mbar) = AsymmetryRatio(rr).intensities(nbar_total);
        for d in 0..=20usize {
            for l in 0..=d {
                let r = d - l;
                let reference = poisson(d, eps * nbar_total)
                    * (ln_choose(d, l) - d as f64 * 2f64.ln()).exp()
                    * asym_mean(rr, l, r);
                let got = plr_asymmetric(nbar, mbar, eps, l, r)?;
                worst = worst.max((got - reference).abs() / reference);
            }
        }
    }
    let mut ok = worst <= 1e-8;
    let mut vis = Vec::new();
    for (rr, want) in [(0.94, 0.98), (0.57, 0.94), (0.2, 0.81)] {
        let (nbar, mbar) = AsymmetryRatio(rr).intensities(1.0);
        let got = expected_visibility_curve(&InitialState::AsymPoissonian { nbar, mbar }, &[100.0], true)?[0];
        let reference = restricted_expected(rr, 100.0);
        ok &= (got - reference).abs() < 1e-9 && (got - want).abs() <= 0.01;
        vis.push(format!("R={rr}: {got:.4}"));
    }
    Ok((ok, format!("worst rel err vs quadrature {worst:.2e}; restricted V at 100: {}", vis.join(", "))))
}

fn hom() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for total in 2..=12usize {
        for n in 0..=total {
            let m = total - n;
            let (nf, mf) = (n as f64, m as f64);
            let den = nf * nf + mf * mf - nf - mf;
            match hom_same_detector_ratio(n, m)? {
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
    Ok((ok, format!("worst rel err {worst:.2e} over 2 <= N+M <= 12")))
}

fn addition() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_w1: f64 = 0.0;
    for n in 1..=20usize {
        let want = (ln_fact(2 * n) - 2.0 * n as f64 * 2f64.ln() - 2.0 * ln_fact(n)).exp();
        let p0 = fock_addition_basic(n)?.p0;
        worst = worst.max((p0 - want).abs());
        worst_w1 = worst_w1.max((fock_addition_localized(n, 1)?.p0 / p0 - 2.0).abs());
    }
    let r2 = fock_addition_localized(2, 2)?.p0 / fock_addition_basic(2)?.p0;
    let r30 = fock_addition_localized(30, 2)?.p0 / fock_addition_basic(30)?.p0;
    let ok = worst <= 1e-10 && worst_w1 <= 1e-10 && (r2 - 2.6).abs() <= 0.05 && (r30 - 2.9).abs() <= 0.05;
    Ok((ok, format!("P0 err {worst:.1e}, W=1 doubling err {worst_w1:.1e}, W=2 ratio {r2:.4} (N=2) {r30:.4} (N=30)")))
}

// Posterior proportional to prod_j cos^2(k x_j - delta/2), in log form.
fn reference_posterior(positions: &[f64], k: f64, n: usize) -> Vec<f64> {
    let logs: Vec<f64> = (0..n)
        .map(|i| {
            let d = TAU * i as f64 / n as f64;
            positions.iter().map(|x| (k * x - 0.5 * d).cos().powi(2).ln()).sum()
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    phase_samples(n, |d| (logs[(d / TAU * n as f64).round() as usize % n] - m).exp())
}

fn condensate() -> Outcome {
    let runs = 5000;
    let recs = run_batch(&CondensateSpec::poissonian(1000.0, 1000.0), 50, runs, 1.0, 7)?;
    let mean_v: Vec<f64> = (0..50)
        .map(|d| recs.iter().map(|r| r.history[d].v).sum::<f64>() / runs as f64)
        .collect();
    let first_exact = recs.iter().all(|r| (r.history[0].v - 0.5).abs() <= 1e-15);
    let rates: Vec<f64> = (10..=50).map(|d| -2.0 * d as f64 * mean_v[d - 1].ln()).collect();
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().cloned().fold(0.0, f64::max);
    let spec = CondensateSpec::poissonian(1.0, 1.0);
    let mut worst: f64 = 0.0;
    for rec in run_batch(&spec, 20, 100, 1.0, 11)? {
        let mut t = FringeTracker::new(spec, 1.0)?;
        for x in &rec.positions {
            t.observe(*x)?;
        }
        let quantum = t.phase_density(1024)?;
        let lib = bayesian_posterior(&rec, 1024)?;
        let reference = reference_posterior(&rec.positions, 1.0, 1024);
        for i in 0..1024 {
            worst = worst
                .max((quantum.values()[i] - reference[i]).abs())
                .max((lib.values()[i] - reference[i]).abs());
        }
    }
    let ok = first_exact && (mean_v[0] - 0.5).abs() <= 1e-15 && lo >= 0.8 && hi <= 2.0 && worst <= 1e-10;
    Ok((
        ok,
        format!(
            "mean V(1)={}, -2D ln V for D=10..50 in [{lo:.4}, {hi:.4}], mean V(50)={:.4}, posterior diff {worst:.1e}",
            mean_v[0], mean_v[49]
        ),
    ))
}

fn ladder() -> Outcome {
    let mut errs = Vec::new();
    let mut ok = true;
    for r in [1usize, 2, 3, 7, 23] {
        let g = PhaseGrid::from_fn(4096, |d| (0.5 * d).cos().powi(2 * r as i32))?;
        let v = visibility_of_grid(&g)?;
        // the first harmonic of cos^{2r}(delta/2) is r/(r+1) exactly
        let exact = r as f64 / (r as f64 + 1.0);
        ok &= (v - exact).abs() < 1e-12;
        let gauss = relational::bec::gaussian_visibility((2.0 / r as f64).sqrt());
        ok &= (gauss - (-1.0 / r as f64).exp()).abs() < 1e-15;
        errs.push((gauss - v).abs() / v);
    }
    ok &= (errs[0] - 0.26).abs() <= 0.01
        && (errs[1] - 0.09).abs() <= 0.01
        && (errs[2] - 0.04).abs() <= 0.01
        && errs[3] < 0.01
        && errs[4] < 0.001;
    Ok((
        ok,
        format!(
            "r=1,2,3,7,23: {:.4} {:.4} {:.4} {:.4} {:.5}",
            errs[0], errs[1], errs[2], errs[3], errs[4]
        ),
    ))
}

fn scattering() -> Outcome {
    let k = 5.0;
    let mut bessel: f64 = 0.0;
    for i in 0..=2000 {
        let dr = -2.5 + 5.0 * i as f64 / 2000.0;
        let j = j0_series(k * dr);
        bessel = bessel
            .max((deflect_factor_mono(k, dr, 0.0) - 0.5 * (1.0 + j)).abs())
            .max((forward_factor_mono(k, dr, 0.0) - 0.5 * (1.0 - j)).abs());
    }
    let ens = ParticleEnsemble::new(0.0, 2.0, 0.2 * TAU / k)?;
    let light = LightSpec::Mono { k };
    let n_grid = 2001;
    let all_s = free_particle_density(&ScatterRecord::free(0, 5), &light, &ens, &ViewCone::default(), n_grid)?;
    let top = all_s.values().iter().cloned().fold(0.0, f64::max);
    let peak_at_origin = all_s.values()[n_grid / 2] == top && all_s.coordinate(n_grid / 2).abs() < 1e-12;
    let mut asym: f64 = 0.0;
    let thermal = LightSpec::Thermal { k, nbar: 5.0 };
    let cases = [(0, 5, light), (5, 0, light), (2, 3, light), (3, 2, light), (1, 1, light), (3, 2, thermal), (0, 5, thermal)];
    for (f, s, light) in cases {
        let g = free_particle_density(&ScatterRecord::free(f, s), &light, &ens, &ViewCone::default(), n_grid)?;
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
        sweep = sweep.max(l1(g.values(), base.values(), g.step()));
    }
    let ok = bessel <= 1e-9 && peak_at_origin && asym <= 1e-12 && sweep < 0.01;
    Ok((
        ok,
        format!(
            "J0 err {bessel:.1e}, all-deflected peak at origin {peak_at_origin}, asymmetry {asym:.1e}, eps-sweep L1 {sweep:.4} (limit 0.01)"
        ),
    ))
}

// Trapezoid L1 distance between two densities on one uniform grid.
fn l1(a: &[f64], b: &[f64], h: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    h * (d.iter().sum::<f64>() - 0.5 * (d[0] + d[d.len() - 1]))
}

fn washout() -> Outcome {
    let (n, nbar, eps) = (512, 100.0, 0.01);
    let g = mixing_washout(&InitialState::Poissonian(nbar), eps, n)?;
    let lib_dev = g.values().iter().map(|v| (v * TAU - 1.0).abs()).fold(0.0, f64::max);
    // reference: the same sum assembled from closed-form sin/cos powers
    let mut acc = vec![0.0; n];
    let mut mass = 0.0;
    for d in 0..=40usize {
        for l in 0..=d {
            let r = d - l;
            let p = plr_reference(nbar, eps, l, r);
            let dens = phase_samples(n, |x| (0.5 * x).sin().powi(2 * l as i32) * (0.5 * x).cos().powi(2 * r as i32));
            for (a, v) in acc.iter_mut().zip(&dens) {
                *a += p * v;
            }
            mass += p;
        }
    }
    let ref_dev = acc.iter().map(|v| (v / mass * TAU - 1.0).abs()).fold(0.0, f64::max);
    let ok = lib_dev <= 1e-8 && ref_dev <= 1e-8;
    Ok((ok, format!("max deviation from uniform: library {lib_dev:.1e}, reference {ref_dev:.1e}")))
}

fn hashes(threads: usize) -> Result<Vec<String>, relational::Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| {
        let mut h: Vec<String> = run_batch(&CondensateSpec::poissonian(1000.0, 1000.0), 50, 300, 1.0, 7)?
            .iter()
            .map(|r| r.hash())
            .collect();
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
            .collect::<Result<_, relational::Error>>()?;
        h.extend(opt);
        let light = LightSpec::Mono { k: 5.0 };
        let prior = ParticleEnsemble::new(0.0, 2.0, 0.2 * TAU / 5.0)?.prior(501)?;
        let fac = ScatterFactors::new(&light, &ViewCone::default(), &prior)?;
        let sc: Vec<String> = (0..200u64)
            .into_par_iter()
            .map(|i| Ok(sample_scatter_run(&fac, &prior, 5, &mut stream(7, i))?.record.hash()))
            .collect::<Result<_, relational::Error>>()?;
        h.extend(sc);
        Ok(h)
    })
}

fn determinism() -> Outcome {
    let one = hashes(1)?;
    let four = hashes(4)?;
    let again = hashes(4)?;
    let ok = one == four && four == again;
    Ok((ok, format!("{} record hashes, identical across 1 and 4 threads and reruns: {ok}", one.len())))
}

type Check = fn() -> Outcome;

const SUITE: [(usize, &str, f64, Check); 10] = [
    (1, "closed-form visibilities", 1.0, closed_form),
    (2, "Fock approximation vs exact oracle", 30.0, fock_approximation),
    (3, "asymmetric Legendre sum vs quadrature", 60.0, asymmetric),
    (4, "Hong-Ou-Mandel ratios", 5.0, hom),
    (5, "Fock addition", 60.0, addition),
    (6, "condensate Monte Carlo", 300.0, condensate),
    (7, "Gaussian visibility error ladder", 1.0, ladder),
    (8, "scattering densities", 30.0, scattering),
    (9, "mixing washout", 10.0, washout),
    (10, "determinism across thread counts", 300.0, determinism),
];

fn main() -> ExitCode {
    let mut all = true;
    for (id, title, limit, check) in SUITE {
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let pass = ok && secs < limit;
        all &= pass;
        println!(
            "criterion {id:>2} {} {title}: {detail} ({secs:.2}s, limit {limit:.0}s)",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
