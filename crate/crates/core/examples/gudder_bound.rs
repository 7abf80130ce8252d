//! The table as an inner product on sequences, and ‖Q‖₁ against its
//! exponential bound as the measurement grid is refined.

use bitraj::biprob::{biprob_table, gudder_metric, uniform_bound_check};
use bitraj::linalg::{c, from_real_rows, pauli_x};
use bitraj::quantum::device_from_hermitian;
use bitraj::{Schedule, State, SystemSpec};

fn main() -> bitraj::Result<()> {
    let h = pauli_x() * c(0.7, 0.0);
    let sys = SystemSpec::new(h.clone())?;
    let dev = device_from_hermitian("F", &from_real_rows(&[&[1.0, 0.4], &[0.4, -0.2]]), None)?;
    let init = State::basis(2, 0, 0.0)?;

    let s = Schedule::from_pairs(vec![(0.5, dev.clone()), (1.0, dev.clone())], init.clone())?;
    let g = gudder_metric(&biprob_table(&sys, &s)?);
    println!("metric trace {:.12}", g.trace());

    let ub = uniform_bound_check(&sys, &h, &dev, &init, 1.5, 6)?;
    for (n, l1) in &ub.l1_series {
        println!("n = {n}  ‖Q‖₁ = {l1:.6}");
    }
    println!("bound {:.4} (sup rate {:.4}), all below: {}", ub.bound, ub.sup_rate, ub.all_below_bound);
    Ok(())
}
