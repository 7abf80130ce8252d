//! Two qubits: tables factorize until a coupling is switched on, and the
//! co-interference of X,Y schedules is −Im·Im.

use bitraj::composite::{co_interference, factorization_delta, CoInterferenceQuery, CompositeSpec, Coupling};
use bitraj::linalg::{pauli_x, pauli_y, pauli_z};
use bitraj::quantum::device_from_hermitian;
use bitraj::{Schedule, State, SystemSpec};

fn main() -> bitraj::Result<()> {
    let up = State::basis(2, 0, 0.0)?;
    let x = device_from_hermitian("X", &pauli_x(), None)?;
    let y = device_from_hermitian("Y", &pauli_y(), None)?;
    let xx = Schedule::from_pairs(vec![(0.5, x.clone()), (1.0, x.clone())], up.clone())?;

    let free = CompositeSpec::uncoupled(SystemSpec::free(2)?, SystemSpec::free(2)?);
    println!("uncoupled factorization delta {:.2e}", factorization_delta(&free, &xx, &xx)?);
    let coupled = CompositeSpec::new(
        vec![SystemSpec::free(2)?, SystemSpec::free(2)?],
        vec![Coupling::new(pauli_z(), pauli_z(), 1.0)],
    )?;
    println!("coupled factorization delta   {:.6}", factorization_delta(&coupled, &xx, &xx)?);

    let yx = Schedule::from_pairs(vec![(1.0, y), (2.0, x)], up)?;
    let q = CoInterferenceQuery {
        position: 0,
        a_pair: (0, 1),
        b_pair: (0, 1),
        fixed_a: vec![0],
        fixed_b: vec![0],
    };
    let ci = co_interference(&free, &yx, &yx, &q)?;
    println!("Φ = {:.6}, −Im Q_A Im Q_B = {:.6}", ci.phi, ci.phi_from_imaginary);
    Ok(())
}
