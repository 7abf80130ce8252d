//! Survival of |↑⟩ under a Rabi drive as the number of checks grows.

use std::f64::consts::PI;

use bitraj::linalg::{c, pauli_x, pauli_z};
use bitraj::phenomena::{zeno_rate, zeno_scan};
use bitraj::quantum::device_from_hermitian;
use bitraj::SystemSpec;

fn main() -> bitraj::Result<()> {
    let sys = SystemSpec::new(pauli_x() * c(0.5, 0.0))?;
    let z = device_from_hermitian("Z", &pauli_z(), None)?;
    let ns = [1, 10, 100, 1000];
    let series = zeno_scan(&sys, &z, 0, PI, &ns)?;
    for (n, p) in ns.iter().zip(&series.survival) {
        let closed = (PI / (2.0 * *n as f64)).cos().powi(2 * *n as i32);
        println!("n = {n:>4}  survival {p:.10}  cos^2n {closed:.10}");
    }
    let rate = zeno_rate(&sys, &z, 0, 0.0)?;
    println!("v = {:.12} (finite differences {:.8})", rate.v, rate.v_finite_difference);
    Ok(())
}
