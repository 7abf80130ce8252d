//! Off-diagonal weight of a table, and the surrogate process when it vanishes.

use bitraj::biprob::biprob_table;
use bitraj::linalg::{diag, from_real_rows, pauli_x, pauli_z};
use bitraj::master::{classical_diagnostic, CLASSICAL_THRESHOLD};
use bitraj::quantum::device_from_hermitian;
use bitraj::{Schedule, State, SystemSpec};

fn main() -> bitraj::Result<()> {
    let z = device_from_hermitian("Z", &pauli_z(), None)?;
    let x = device_from_hermitian("X", &pauli_x(), None)?;
    let rho = State::new(from_real_rows(&[&[0.6, 0.3], &[0.3, 0.4]]), 0.0)?;
    let frozen = SystemSpec::new(diag(&[0.0, 1.0]))?;

    let zz = Schedule::from_pairs(vec![(1.0, z.clone()), (2.0, z.clone()), (3.0, z.clone())], rho)?;
    let d = classical_diagnostic(&biprob_table(&frozen, &zz)?, CLASSICAL_THRESHOLD)?;
    println!("Z,Z,Z  off-diagonal {:.2e}  surrogate {:?}", d.offdiag_mass, d.surrogate);

    let xz = Schedule::from_pairs(vec![(1.0, x), (2.0, z)], State::basis(2, 0, 0.0)?)?;
    let d = classical_diagnostic(&biprob_table(&SystemSpec::free(2)?, &xz)?, CLASSICAL_THRESHOLD)?;
    println!("X,Z    off-diagonal {:.6}  classical {}", d.offdiag_mass, d.consistent);
    Ok(())
}
