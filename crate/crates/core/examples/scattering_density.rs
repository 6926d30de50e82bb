//! Separation density of two particles after light scattering, for
//! monochromatic and thermal light.

use std::f64::consts::TAU;

use relational::scattering::{free_particle_density, LightSpec, ParticleEnsemble, ScatterRecord, ViewCone};

fn main() -> relational::Result<()> {
    let k = 5.0;
    let ens = ParticleEnsemble::new(0.0, 2.0, 0.2 * TAU / k)?;
    let rec = ScatterRecord::free(3, 2);
    for light in [LightSpec::Mono { k }, LightSpec::Thermal { k, nbar: 5.0 }] {
        let g = free_particle_density(&rec, &light, &ens, &ViewCone::default(), 801)?;
        println!("{light:?}");
        for i in (0..g.n_grid()).step_by(80) {
            let v = g.values()[i];
            println!("  {:>7.3}  {:.4}  {}", g.coordinate(i), v, "#".repeat((v * 20.0) as usize));
        }
    }
    Ok(())
}
