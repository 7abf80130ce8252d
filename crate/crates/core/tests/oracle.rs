//! Tables checked against an independent Schrödinger-picture chain and
//! against closed forms worked out by hand.

mod common;

use std::f64::consts::PI;

use bitraj::biprob::{biprob_table, BiProbTable};
use bitraj::lab::born_chain_probability;
use bitraj::linalg::{c, expm_hermitian, pauli_x, pauli_z, CMatrix};
use num_complex::Complex64 as C64;
use bitraj::phenomena::{uncertainty_matrix, zeno_scan};
use bitraj::quantum::mub_partner;
use bitraj::{Schedule, SystemSpec};
use common::*;
use proptest::prelude::*;

/// `Q(p, m) = tr(Πp_n U … Πp_1 U ρ U† Πm_1 … U† Πm_n)`, propagating the
/// two branches forward in the lab frame.
fn schroedinger_q(h: &CMatrix, s: &Schedule, plus: &[usize], minus: &[usize]) -> C64 {
    let step = |dt: f64| expm_hermitian(h, dt);
    let mut left = s.init().density().clone();
    let mut right = CMatrix::identity(s.dim(), s.dim());
    let mut now = 0.0;
    for (k, e) in s.entries().iter().enumerate() {
        let u = step(e.time - now);
        now = e.time;
        left = e.device.projector(plus[k]) * &u * left;
        right = e.device.projector(minus[k]) * &u * right;
    }
    // left = A ρ, right = B  →  Q = tr(A ρ B†)
    (left * right.adjoint()).trace()
}

fn worst_against_oracle(h: &CMatrix, s: &Schedule, t: &BiProbTable) -> f64 {
    let mut worst = 0.0f64;
    for p in 0..t.size() {
        for m in 0..t.size() {
            let q = schroedinger_q(h, s, &t.decode(p), &t.decode(m));
            worst = worst.max((q - t.at(p, m)).norm());
        }
    }
    worst
}

#[test]
fn random_tables_match_lab_frame_chain() {
    let mut r = rng(21);
    for i in 0..40 {
        let d = 2 + i % 3;
        let sys = system(&mut r, d);
        let s = schedule(&mut r, d, 1 + i % 3, (i % 2 == 1).then_some(1));
        let t = biprob_table(&sys, &s).unwrap();
        let worst = worst_against_oracle(sys.hamiltonian(), &s, &t);
        assert!(worst <= 1e-10, "config {i}: {worst:e}");
    }
}

#[test]
fn diagonal_is_chained_born_probability() {
    let mut r = rng(22);
    for i in 0..30 {
        let d = 2 + i % 3;
        let sys = system(&mut r, d);
        let s = schedule(&mut r, d, 1 + i % 3, (i % 3 == 0).then_some(2));
        let t = biprob_table(&sys, &s).unwrap();
        for (code, p) in t.diagonal().into_iter().enumerate() {
            let born = born_chain_probability(&sys, &s, &t.decode(code)).unwrap();
            assert!((p - born).abs() <= 1e-10, "config {i} code {code}: {p} vs {born}");
        }
    }
}

#[test]
fn free_qubit_x_then_z_from_up() {
    // |⟨±|↑⟩|² = ½ and |⟨↑|±⟩|², |⟨↓|±⟩|² = ½, with ⟨↓|−⟩ = −1/√2.
    // Q((x⁺, z), (x⁻, z)) = ⟨z|x⁺⟩⟨x⁺|↑⟩ (⟨z|x⁻⟩⟨x⁻|↑⟩)*
    let free = SystemSpec::free(2).unwrap();
    let s = Schedule::from_pairs(vec![(1.0, pauli("X")), (2.0, pauli("Z"))], up()).unwrap();
    let t = biprob_table(&free, &s).unwrap();
    let sign = |x: usize, z: usize| if x == 1 && z == 1 { -1.0 } else { 1.0 };
    for xp in 0..2 {
        for xm in 0..2 {
            for zp in 0..2 {
                for zm in 0..2 {
                    let expected = if zp == zm { 0.25 * sign(xp, zp) * sign(xm, zm) } else { 0.0 };
                    let got = t.at(t.encode(&[xp, zp]), t.encode(&[xm, zm]));
                    assert!((got - c(expected, 0.0)).norm() <= 1e-12, "{xp}{zp};{xm}{zm}: {got}");
                }
            }
        }
    }
}

#[test]
fn rabi_survival_is_cosine_squared() {
    let sys = SystemSpec::new(pauli_x() * c(0.5, 0.0)).unwrap();
    for &t in &[0.3, 1.0, 2.2, PI] {
        let s = Schedule::from_pairs(vec![(t, pauli("Z"))], up()).unwrap();
        let p = biprob_table(&sys, &s).unwrap().diagonal()[0];
        assert!((p - (t / 2.0).cos().powi(2)).abs() <= 1e-12);
    }
}

#[test]
fn zeno_survival_matches_product_of_cosines() {
    let sys = SystemSpec::new(pauli_x() * c(0.5, 0.0)).unwrap();
    let ns = [1, 2, 10, 100, 200];
    let series = zeno_scan(&sys, &pauli("Z"), 0, PI, &ns).unwrap();
    for (&n, &p) in ns.iter().zip(&series.survival) {
        let closed = (PI / (2.0 * n as f64)).cos().powi(2 * n as i32);
        if n == 100 {
            assert!((closed - 0.9756269141438981).abs() <= 1e-14);
        }
        assert!((p - closed).abs() <= 1e-10, "n={n}: {p} vs {closed}");
    }
}

#[test]
fn static_z_dephases_nothing() {
    // [H, σz] = 0: repeated Z readings agree, so every two-time cell with
    // different outcomes on either branch vanishes.
    let sys = SystemSpec::new(pauli_z()).unwrap();
    let mut r = rng(23);
    let s = Schedule::from_pairs(vec![(0.4, pauli("Z")), (1.1, pauli("Z"))], state(&mut r, 2, false, 0.0)).unwrap();
    let t = biprob_table(&sys, &s).unwrap();
    for p in 0..4 {
        for m in 0..4 {
            let (a, b) = (t.decode(p), t.decode(m));
            if a[0] != a[1] || b[0] != b[1] {
                assert!(t.at(p, m).norm() <= 1e-14);
            }
        }
    }
}

#[test]
fn mub_conditional_probabilities_are_flat() {
    let mut r = rng(24);
    for d in 2..=5 {
        let k = device(&mut r, d, "K", false);
        let l = mub_partner(&k).unwrap();
        let m = uncertainty_matrix(&SystemSpec::free(d).unwrap(), &k, &l, 0.7).unwrap();
        for v in m.c.iter().flatten() {
            assert!((v - 1.0 / d as f64).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tables_match_oracle(seed in any::<u64>(), d in 2usize..4, n in 1usize..4) {
        let mut r = rng(seed);
        let sys = system(&mut r, d);
        let s = schedule(&mut r, d, n, Some(2));
        let t = biprob_table(&sys, &s).unwrap();
        prop_assert!(worst_against_oracle(sys.hamiltonian(), &s, &t) <= 1e-10);
    }
}
