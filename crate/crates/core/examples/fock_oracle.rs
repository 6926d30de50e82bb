//! Exact Fock-space checks: two-photon bunching and the record probabilities
//! of leaked Fock states against the coherent-state approximation.

use relational::fock::{hom_same_detector_ratio, plr_exact, FockState2, LinearCoupling};
use relational::optical::plr_fock_approx;

fn main() -> relational::Result<()> {
    let out = FockState2::fock(1, 1, 4)?.apply_beam_splitter(LinearCoupling::balanced())?;
    println!("|1,1> through a balanced splitter: P(1,1) = {:.2e}", out.amp(1, 1).norm_sqr());
    for (n, m) in [(1, 1), (2, 2), (3, 1), (5, 5)] {
        println!("same-detector ratio ({n},{m}): {:?}", hom_same_detector_ratio(n, m)?);
    }
    let (n, eps) = (20, 0.2);
    println!("\nN={n}, eps={eps}");
    println!("  l  r        exact       approx");
    for (l, r) in [(2, 2), (4, 0), (3, 5), (6, 6)] {
        println!("{l:>3}{r:>3}  {:.5e}  {:.5e}", plr_exact(n, eps, l, r)?, plr_fock_approx(n, eps, l, r)?);
    }
    Ok(())
}
