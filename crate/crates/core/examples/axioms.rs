//! Builds a qutrit table and prints the structural checks it satisfies.

use bitraj::biprob::{biprob_table, property_report};
use bitraj::linalg::{diag, from_real_rows};
use bitraj::quantum::device_from_hermitian;
use bitraj::{Schedule, State, SystemSpec};

fn main() -> bitraj::Result<()> {
    let sys = SystemSpec::new(from_real_rows(&[&[0.0, 0.5, 0.1], &[0.5, 0.3, 0.2], &[0.1, 0.2, -0.4]]))?;
    let n = device_from_hermitian("N", &diag(&[2.0, 1.0, 0.0]), None)?;
    let g = device_from_hermitian("G", &from_real_rows(&[&[0.0, 0.9, 0.4], &[0.9, 0.3, 0.7], &[0.4, 0.7, -0.6]]), None)?;
    let s = Schedule::from_pairs(vec![(0.5, n.clone()), (1.0, g), (2.0, n)], State::new(diag(&[0.5, 0.3, 0.2]), 0.0)?)?;

    let table = biprob_table(&sys, &s)?;
    println!("{} x {} cells, total {:.12}", table.size(), table.size(), table.total());
    let r = property_report(&sys, &s)?;
    println!("normalization   {:.2e}", r.normalization_error);
    println!("bi-consistency  {:.2e}", r.max_biconsistency_error);
    println!("causality       {:.2e}", r.max_causality_violation);
    println!("hermitian       {:.2e}", r.max_hermitianity_error);
    println!("min Gram eig    {:.2e}", r.min_gram_eigenvalue);
    println!("‖Q‖₁            {:.6}", r.l1_norm);
    Ok(())
}
