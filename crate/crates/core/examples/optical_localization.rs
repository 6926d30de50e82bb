//! One photon-counting trajectory: the relative phase of two coherent
//! beams sharpens as detections accumulate.

use relational::optical::{run_trajectory, InitialState, TrajectoryConfig};
use relational::phase_dist::fit_gaussian;
use relational::rng::stream;

fn main() -> relational::Result<()> {
    let cfg = TrajectoryConfig {
        state: InitialState::Poissonian(100.0),
        eps_total: 0.2,
        random_tau: true,
        ..TrajectoryConfig::default()
    };
    let t = run_trajectory(&cfg, &mut stream(42, 0))?;
    println!("detections: {} left, {} right", t.record.l(), t.record.r());
    for d in [1, 2, 5, 10, 20, 40] {
        if let Some(v) = t.visibility.get(d - 1) {
            println!("after {d:>2}: visibility {v:.4}");
        }
    }
    match fit_gaussian(&t.density) {
        Ok(fit) => println!("final peak at {:.4} rad, width {:.4}", fit.mean, fit.sigma),
        Err(e) => println!("no single peak: {e}"),
    }
    Ok(())
}
