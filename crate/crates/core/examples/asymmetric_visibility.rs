//! Expected visibility against total intensity when the two beams differ in
//! strength, with and without restricting to single-peaked records.

use relational::optical::{expected_visibility_curve, AsymmetryRatio, InitialState};

fn main() -> relational::Result<()> {
    let sweep = [1.0, 5.0, 20.0, 50.0, 100.0];
    for rr in [0.94, 0.57, 0.2] {
        let (nbar, mbar) = AsymmetryRatio(rr).intensities(1.0);
        let state = InitialState::AsymPoissonian { nbar, mbar };
        let all = expected_visibility_curve(&state, &sweep, false)?;
        let single = expected_visibility_curve(&state, &sweep, true)?;
        println!("R = {rr}");
        for ((s, a), b) in sweep.iter().zip(&all).zip(&single) {
            println!("  intensity {s:>5}: all {a:.4}  single-peaked {b:.4}");
        }
    }
    Ok(())
}
