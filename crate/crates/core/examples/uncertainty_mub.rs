//! Conditional probabilities between a random basis and its unbiased partner.

use bitraj::linalg::{c, CMatrix};
use bitraj::phenomena::uncertainty_matrix;
use bitraj::quantum::{device_from_hermitian, mub_partner};
use bitraj::SystemSpec;

fn main() -> bitraj::Result<()> {
    let d = 3;
    let obs = CMatrix::from_fn(d, d, |i, j| c((i + 2 * j) as f64 * 0.3, if i < j { 0.4 } else if i > j { -0.4 } else { 0.0 }));
    let obs = (&obs + obs.adjoint()) * c(0.5, 0.0);
    let k = device_from_hermitian("K", &obs, None)?;
    let l = mub_partner(&k)?;
    let sys = SystemSpec::free(d)?;
    for (name, other) in [("K|K", &k), ("K|L", &l)] {
        let m = uncertainty_matrix(&sys, &k, other, 0.4)?;
        println!("C^({name}), time variation {:.1e}", m.time_variation);
        for row in &m.c {
            println!("  {}", row.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("  "));
        }
    }
    Ok(())
}
