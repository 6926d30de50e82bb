use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ModelConfig, Scenario};
use super::manifest::{write_atomic, RunManifest};
use crate::bec::{run_batch, VisibilityStats};
use crate::error::Result;
use crate::fock::plr_exact_table;
use crate::optical::{plr_fock_approx, run_trajectory, TrajectoryConfig};
use crate::phase_dist::{fmt17, visibility_of_grid};
use crate::rng::stream;
use crate::scattering::{
    event_probabilities, free_particle_density, rubber_cavity_density, sample_scatter_run, ScatterFactors,
    ScatterRecord, ViewCone,
};

/// Execute a validated config: write data files and the manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let start = Instant::now();
    let mut m = RunManifest::new(cfg);
    let files = match cfg.scenario {
        Scenario::Optical => run_optical(cfg, &mut m)?,
        Scenario::Bec => run_bec(cfg, &mut m)?,
        Scenario::Scattering => run_scattering(cfg, &mut m)?,
        Scenario::Oracle => run_oracle(cfg, &mut m)?,
    };
    let dir = &cfg.output.dir;
    for (name, body) in files {
        let path = dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        m.outputs.push(path);
    }
    let manifest_path: PathBuf = dir.join(format!("{}.manifest.json", cfg.stem()));
    m.outputs.push(manifest_path.clone());
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    write_atomic(&manifest_path, m.to_json().as_bytes())?;
    Ok(m)
}

type Files = Vec<(String, String)>;

fn run_optical(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<Files> {
    let o = cfg.optical.clone().expect("validated");
    let tc = TrajectoryConfig {
        state: cfg.initial_state()?,
        eps_total: o.eps_total,
        random_tau: o.random_tau,
        efficiency: o.efficiency,
        n_grid: o.n_grid,
    };
    let rows: Vec<(String, usize, usize, usize, f64, f64)> = (0..cfg.n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let t = run_trajectory(&tc, &mut stream(cfg.seed, i))?;
            let v = visibility_of_grid(&t.density)?;
            let peak = t.density.coordinate(t.density.argmax());
            Ok((t.record.hash(), t.record.l(), t.record.r(), t.lost, v, peak))
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("run,l,r,lost,visibility,peak\n");
    let mut mean_v = 0.0;
    for (i, (h, l, r, lost, v, peak)) in rows.iter().enumerate() {
        writeln!(csv, "{i},{l},{r},{lost},{},{}", fmt17(*v), fmt17(*peak)).unwrap();
        m.record_hashes.push(h.clone());
        mean_v += v;
    }
    m.summary.insert("mean_visibility".into(), mean_v / rows.len() as f64);
    Ok(vec![(format!("{}_runs.csv", cfg.stem()), csv)])
}

fn run_bec(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<Files> {
    let b = cfg.bec.clone().unwrap_or_default();
    let spec = cfg.condensate()?;
    let recs = run_batch(&spec, b.detections, cfg.n_runs, b.k, cfg.seed)?;
    let stats = VisibilityStats::from_records(&recs)?;
    let mut agg = String::from("detections,mean_v,std_v,rate\n");
    for d in 1..=b.detections {
        writeln!(
            agg,
            "{d},{},{},{}",
            fmt17(stats.mean_v[d - 1]),
            fmt17(stats.std_v[d - 1]),
            fmt17(stats.rate(d))
        )
        .unwrap();
    }
    m.summary.insert("mean_v_first".into(), stats.mean_v[0]);
    m.summary.insert("mean_v_last".into(), stats.mean_v[b.detections - 1]);
    m.summary.insert("rate_last".into(), stats.rate(b.detections));
    m.record_hashes = stats.record_hashes;
    let mut files = vec![(format!("{}_aggregate.csv", cfg.stem()), agg)];
    if b.per_run_csv {
        let mut per = String::from("run,detection,x,v,phi\n");
        for (i, r) in recs.iter().enumerate() {
            for (j, (x, f)) in r.positions.iter().zip(&r.history).enumerate() {
                writeln!(per, "{i},{},{},{},{}", j + 1, fmt17(*x), fmt17(f.v), fmt17(f.phi)).unwrap();
            }
        }
        files.push((format!("{}_runs.csv", cfg.stem()), per));
    }
    Ok(files)
}

fn run_scattering(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<Files> {
    let s = cfg.scattering.clone().unwrap_or_default();
    let stem = cfg.stem();
    if s.model == ModelConfig::Rubber {
        let rec = ScatterRecord::rubber(s.left, s.right);
        let l = s.upper - s.lower;
        let g = rubber_cavity_density(&rec, s.k, s.n_grid, -l, l)?;
        m.record_hashes.push(rec.hash());
        return Ok(vec![(format!("{stem}_density.csv"), g.to_csv())]);
    }
    let light = cfg.light()?;
    let ens = cfg.ensemble()?;
    let view = ViewCone::new(s.view)?;
    let Some(packets) = s.packets else {
        let rec = ScatterRecord::free(s.forward, s.deflect);
        let g = free_particle_density(&rec, &light, &ens, &view, s.n_grid)?;
        m.record_hashes.push(rec.hash());
        m.summary.insert("argmax_separation".into(), g.coordinate(g.argmax()));
        return Ok(vec![(format!("{stem}_density.csv"), g.to_csv())]);
    };
    let prior = ens.prior(s.n_grid)?;
    let fac = ScatterFactors::new(&light, &view, &prior)?;
    let runs: Vec<ScatterRecord> = (0..cfg.n_runs as u64)
        .into_par_iter()
        .map(|i| Ok(sample_scatter_run(&fac, &prior, packets, &mut stream(cfg.seed, i))?.record))
        .collect::<Result<_>>()?;
    let mut counts = vec![0usize; packets + 1];
    let mut csv = String::from("run,forward,deflect\n");
    for (i, r) in runs.iter().enumerate() {
        writeln!(csv, "{i},{},{}", r.forward(), r.deflect()).unwrap();
        counts[r.deflect()] += 1;
        m.record_hashes.push(r.hash());
    }
    let mut hist = String::from("forward,deflect,count,fraction\n");
    for (sd, c) in counts.iter().enumerate() {
        writeln!(hist, "{},{sd},{c},{}", packets - sd, fmt17(*c as f64 / runs.len() as f64)).unwrap();
    }
    let (_, pd) = event_probabilities(&fac, &prior)?;
    m.summary.insert("first_packet_deflect_probability".into(), pd);
    Ok(vec![(format!("{stem}_runs.csv"), csv), (format!("{stem}_histogram.csv"), hist)])
}

/// Phase-density peak `2 arccos sqrt(r / (l + r))` of an `(l, r)` record.
pub fn delta0(l: usize, r: usize) -> f64 {
    2.0 * (r as f64 / (l + r) as f64).sqrt().acos()
}

fn run_oracle(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<Files> {
    let o = cfg.oracle.clone().unwrap_or_default();
    let table = plr_exact_table(o.n, o.eps, 0.0, 2 * o.n + 2)?;
    let mut csv = String::from("l,r,delta0,p_exact,p_approx\n");
    let mut worst: f64 = 0.0;
    for d in 1..=2 * o.n {
        for l in 0..=d {
            let r = d - l;
            let exact = table[l][r];
            let approx = plr_fock_approx(o.n, o.eps, l, r)?;
            if exact > 1e-4 {
                worst = worst.max((exact - approx).abs() / exact);
            }
            writeln!(csv, "{l},{r},{},{},{}", fmt17(delta0(l, r)), fmt17(exact), fmt17(approx)).unwrap();
        }
    }
    m.summary.insert("max_relative_error_p_gt_1e-4".into(), worst);
    m.summary.insert("p_no_counts".into(), table[0][0]);
    Ok(vec![(format!("{}_plr.csv", cfg.stem()), csv)])
}
