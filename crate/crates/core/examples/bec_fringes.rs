//! Atoms from two condensates build up an interference fringe; the mean
//! visibility over many runs approaches one.

use relational::bec::{run_interference, visibility_statistics, CondensateSpec};
use relational::rng::stream;

fn main() -> relational::Result<()> {
    let spec = CondensateSpec::poissonian(1000.0, 1000.0);
    let rec = run_interference(&spec, 10, 1.0, &mut stream(7, 0))?;
    for (x, f) in rec.positions.iter().zip(&rec.history) {
        println!("x = {x:.4}  ->  V = {:.4}, phi = {:.4}", f.v, f.phi);
    }
    let stats = visibility_statistics(&spec, 50, 2000, 1.0, 7)?;
    for d in [1, 10, 25, 50] {
        println!("D = {d:>2}: mean V {:.4} (sd {:.4})", stats.mean_v[d - 1], stats.std_v[d - 1]);
    }
    Ok(())
}
