#![allow(dead_code)]

use bitraj::linalg::{self, c, CMatrix, CVector};
use bitraj::quantum::{device_from_hermitian, Device};
use bitraj::{Schedule, State, SystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> CMatrix {
    let m = CMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&m + m.adjoint()) * c(0.5 * scale, 0.0)
}

pub fn unitary(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    linalg::expm_hermitian(&hermitian(rng, d, 3.0), 1.0)
}

pub fn system(rng: &mut ChaCha8Rng, d: usize) -> SystemSpec {
    SystemSpec::new(hermitian(rng, d, 1.0)).unwrap()
}

pub fn state(rng: &mut ChaCha8Rng, d: usize, pure: bool, t: f64) -> State {
    if pure {
        let v = CVector::from_fn(d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        State::pure(&v.normalize(), t).unwrap()
    } else {
        let w = CMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rho = &w * w.adjoint();
        let tr = rho.trace();
        State::new(rho / tr, t).unwrap()
    }
}

/// A generic observable (every outcome rank one), or a two-level one with
/// a degenerate eigenspace when `coarse` is set.
pub fn device(rng: &mut ChaCha8Rng, d: usize, name: &str, coarse: bool) -> Device {
    if coarse && d > 2 {
        let u = unitary(rng, d);
        let split = rng.gen_range(1..d);
        let vals: Vec<f64> = (0..d).map(|k| if k < split { 1.0 } else { -1.0 }).collect();
        device_from_hermitian(name, &(&u * linalg::diag(&vals) * u.adjoint()), None).unwrap()
    } else {
        device_from_hermitian(name, &hermitian(rng, d, 1.0), None).unwrap()
    }
}

pub fn times(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
    t.sort_by(f64::total_cmp);
    t
}

pub fn schedule(rng: &mut ChaCha8Rng, d: usize, n: usize, coarse_every: Option<usize>) -> Schedule {
    let ts = times(rng, n);
    let entries = ts
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let coarse = coarse_every.is_some_and(|k| j % k == 0);
            (t, device(rng, d, &format!("D{j}"), coarse))
        })
        .collect();
    let pure = rng.gen_bool(0.5);
    let init = state(rng, d, pure, 0.0);
    Schedule::from_pairs(entries, init).unwrap()
}

pub fn pauli(name: &str) -> Device {
    let m = match name {
        "X" => linalg::pauli_x(),
        "Y" => linalg::pauli_y(),
        _ => linalg::pauli_z(),
    };
    device_from_hermitian(name, &m, None).unwrap()
}

pub fn up() -> State {
    State::basis(2, 0, 0.0).unwrap()
}
