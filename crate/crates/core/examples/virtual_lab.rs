//! Samples measurement records and recovers an interference term from counts.

use bitraj::coarse::{CoarseSchedule, Resolution};
use bitraj::lab::{empirical_distribution, reconstruct_interference, sample_coarse, sample_sequences};
use bitraj::linalg::{pauli_x, pauli_z};
use bitraj::quantum::device_from_hermitian;
use bitraj::{Schedule, State, SystemSpec};

fn main() -> bitraj::Result<()> {
    let free = SystemSpec::free(2)?;
    let x = device_from_hermitian("X", &pauli_x(), None)?;
    let z = device_from_hermitian("Z", &pauli_z(), None)?;
    let s = Schedule::from_pairs(vec![(1.0, x.clone()), (2.0, z)], State::basis(2, 0, 0.0)?)?;
    let n = 100_000;

    let fine = sample_sequences(&free, &s, n, 7)?;
    for (seq, count) in &fine.counts {
        println!("{:<12} {count}", s.labels_of(seq).join("|"));
    }
    let joined = CoarseSchedule::from_schedule(s.clone()).with_resolution(0, Resolution::pair(&x, 0, 1)?)?;
    let coarse = sample_coarse(&free, &joined, n, 8)?;
    let est = reconstruct_interference(&empirical_distribution(&fine), &empirical_distribution(&coarse), 0, (0, 1), &[0])?;
    println!("Re Q estimate {:.5} ± {:.5} (exact 0.25)", est.value, est.std_error);
    Ok(())
}
