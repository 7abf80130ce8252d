//! X then Z on a free qubit: coarse graining X completely is not the same as
//! adding up the X outcomes.

use bitraj::coarse::{faux_coarse_prob, interference_term, quantum_coarse_prob, CoarseSchedule, Resolution};
use bitraj::linalg::{pauli_x, pauli_z};
use bitraj::quantum::device_from_hermitian;
use bitraj::{Schedule, State, SystemSpec};

fn main() -> bitraj::Result<()> {
    let free = SystemSpec::free(2)?;
    let x = device_from_hermitian("X", &pauli_x(), None)?;
    let z = device_from_hermitian("Z", &pauli_z(), None)?;
    let fine = Schedule::from_pairs(vec![(1.0, x.clone()), (2.0, z)], State::basis(2, 0, 0.0)?)?;
    let coarse = CoarseSchedule::from_schedule(fine.clone()).with_resolution(0, Resolution::full(&x))?;

    println!("P(any X, up) quantum = {:.6}", quantum_coarse_prob(&free, &coarse, &[0, 0])?);
    println!("P(any X, up) faux    = {:.6}", faux_coarse_prob(&free, &coarse, &[0, 0])?);
    let term = interference_term(&free, &fine, 0, (0, 1), &[0])?;
    println!("Re Q(+,up; -,up) = {:.6}, from probabilities {:.6}", term.re_q, term.phenomenological);
    Ok(())
}
