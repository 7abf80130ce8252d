//! Sharp fine-grained readings chain like a Markov process; a coarse one
//! does not.

use bitraj::linalg::{diag, from_real_rows};
use bitraj::phenomena::{coarse_markov_delta, markov_delta, InitSpec};
use bitraj::quantum::device_from_hermitian;
use bitraj::{Resolution, SystemSpec};

fn main() -> bitraj::Result<()> {
    let g = SystemSpec::new(from_real_rows(&[&[0.0, 0.9, 0.4], &[0.9, 0.3, 0.7], &[0.4, 0.7, -0.6]]))?;
    let n = device_from_hermitian("N", &diag(&[2.0, 1.0, 0.0]), None)?;
    let times = [0.5, 1.0, 2.0];

    let init = InitSpec::uniform(&n, 0.0)?;
    let fine = markov_delta(&g, &n, &times, &init)?;
    println!("fine:   delta {:.2e} over {} sequences ({} excluded)", fine.delta, fine.sequences, fine.excluded);

    let joined = Resolution::pair(&n, 0, 1)?;
    let coarse = coarse_markov_delta(&g, &n, &joined, &times, &InitSpec::sharp(&n, 0, 0.0)?)?;
    println!("coarse: delta {:.6} over {} sequences", coarse.delta, coarse.sequences);
    Ok(())
}
