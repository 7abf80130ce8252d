//! Reduced dynamics of a qubit coupled to a spin bath, exact versus the
//! bi-trajectory sum on finer and finer slice grids.

use bitraj::linalg::{c, pauli_x, pauli_z};
use bitraj::master::{dynamical_map_bitraj, dynamical_map_bitraj_transfer, dynamical_map_exact, OpenSpec};
use bitraj::{State, SystemSpec};

fn main() -> bitraj::Result<()> {
    let up = State::basis(2, 0, 0.0)?;
    let open = OpenSpec::new(
        SystemSpec::new(pauli_z() * c(0.5, 0.0))?,
        SystemSpec::new(pauli_x() * c(0.5, 0.0))?,
        vec![(pauli_x() * c(0.6, 0.0), pauli_z())],
        up.clone(),
        up,
    )?;
    let t = 2.0;
    let exact = dynamical_map_exact(&open, t)?;
    for n in [2, 4, 8] {
        let m = dynamical_map_bitraj(&open, t, n)?;
        println!("n = {n:>3} (enumerated)  residual {:.3e}  Choi min {:.1e}", m.max_abs_diff(&exact), m.choi_min_eigenvalue());
    }
    for n in [16, 32, 64] {
        let m = dynamical_map_bitraj_transfer(&open, t, n)?;
        println!("n = {n:>3} (nested)      residual {:.3e}  trace err {:.1e}", m.max_abs_diff(&exact), m.trace_preservation_error());
    }
    Ok(())
}
