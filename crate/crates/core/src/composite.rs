//! Tensor-product systems: factorization of independent subsystems,
//! co-interference and the relations between identical subsystems.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::biprob::{self, Chain, Limits, Schedule};
use crate::coarse;
use crate::error::{ensure, Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::quantum::{self, State, SystemSpec};

/// `λ · V_left ⊗ V_right` between two factors.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub left: usize,
    pub right: usize,
    pub op_left: CMatrix,
    pub op_right: CMatrix,
    pub strength: f64,
}

impl Coupling {
    /// Coupling between factors 0 and 1.
    pub fn new(op_left: CMatrix, op_right: CMatrix, strength: f64) -> Self {
        Coupling {
            left: 0,
            right: 1,
            op_left,
            op_right,
            strength,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompositeSpec {
    factors: Vec<SystemSpec>,
    couplings: Vec<Coupling>,
}

impl CompositeSpec {
    pub fn new(factors: Vec<SystemSpec>, couplings: Vec<Coupling>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::InvalidArgument("a composite needs at least two factors".into()));
        }
        for (k, cp) in couplings.iter().enumerate() {
            if cp.left == cp.right || cp.left >= factors.len() || cp.right >= factors.len() {
                return Err(Error::InvalidArgument(format!(
                    "coupling {k}: factors ({}, {}) are invalid",
                    cp.left, cp.right
                )));
            }
            if !cp.strength.is_finite() {
                return Err(Error::InvalidArgument(format!("coupling {k}: non-finite strength")));
            }
            for (op, f) in [(&cp.op_left, cp.left), (&cp.op_right, cp.right)] {
                let d = factors[f].dim();
                if op.nrows() != d || op.ncols() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: op.nrows(),
                    });
                }
                let asym = linalg::hermitian_asymmetry(op);
                if asym > quantum::HERMITIAN_TOL {
                    return Err(Error::NotHermitian { max_asymmetry: asym });
                }
            }
        }
        Ok(CompositeSpec { factors, couplings })
    }

    pub fn uncoupled(a: SystemSpec, b: SystemSpec) -> Self {
        CompositeSpec {
            factors: vec![a, b],
            couplings: Vec::new(),
        }
    }

    pub fn factors(&self) -> &[SystemSpec] {
        &self.factors
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn is_independent(&self) -> bool {
        self.couplings.iter().all(|cp| cp.strength == 0.0)
    }

    fn pair(&self) -> Result<(&SystemSpec, &SystemSpec)> {
        match self.factors.as_slice() {
            [a, b] => Ok((a, b)),
            _ => Err(Error::InvalidArgument(format!(
                "expected two factors, found {}",
                self.factors.len()
            ))),
        }
    }
}

/// `op` acting on factor `at`, identity elsewhere.
fn embed(dims: &[usize], at: usize, op: &CMatrix) -> CMatrix {
    dims.iter().enumerate().fold(linalg::identity(1), |acc, (k, &d)| {
        if k == at {
            linalg::kron(&acc, op)
        } else {
            linalg::kron(&acc, &linalg::identity(d))
        }
    })
}

/// Total Hamiltonian `Σ H_k + Σ λ V_left ⊗ V_right` on the tensor product.
pub fn compose(spec: &CompositeSpec) -> Result<SystemSpec> {
    let dims: Vec<usize> = spec.factors.iter().map(SystemSpec::dim).collect();
    let total: usize = dims.iter().product();
    if total > quantum::MAX_DIM {
        return Err(Error::DimensionTooLarge {
            dim: total,
            cap: quantum::MAX_DIM,
        });
    }
    let mut h = CMatrix::zeros(total, total);
    for (k, f) in spec.factors.iter().enumerate() {
        h += embed(&dims, k, f.hamiltonian());
    }
    for cp in &spec.couplings {
        h += embed(&dims, cp.left, &cp.op_left) * embed(&dims, cp.right, &cp.op_right) * c(cp.strength, 0.0);
    }
    // Kronecker round-off can leave ~1e-17 asymmetry; remove it.
    let h = (&h + h.adjoint()) * c(0.5, 0.0);
    SystemSpec::new(h)
}

pub fn product_state(a: &State, b: &State) -> Result<State> {
    if a.time_tag() != b.time_tag() {
        return Err(Error::InvalidState(format!(
            "factor states are tagged at different times ({} and {})",
            a.time_tag(),
            b.time_tag()
        )));
    }
    State::new(linalg::kron(a.density(), b.density()), a.time_tag())
}

/// Devices deployed in tandem at the shared times, initialized in the
/// product of both metrics. Tandem outcome `(a, b)` has index `a·|Ω_B| + b`.
pub fn tandem_schedule(a: &Schedule, b: &Schedule) -> Result<Schedule> {
    if a.len() != b.len() {
        return Err(Error::InvalidSchedule(format!(
            "subsystem schedules have {} and {} entries",
            a.len(),
            b.len()
        )));
    }
    let mut pairs = Vec::with_capacity(a.len());
    for (k, (ea, eb)) in a.entries().iter().zip(b.entries()).enumerate() {
        if ea.time != eb.time {
            return Err(Error::InvalidSchedule(format!(
                "entry {k}: subsystem times {} and {} differ",
                ea.time, eb.time
            )));
        }
        pairs.push((ea.time, quantum::tensor_device(&ea.device, &eb.device)?));
    }
    Schedule::from_pairs(pairs, product_state(a.init(), b.init())?)
}

/// `max |Q_AB(a⁺∧b⁺, a⁻∧b⁻) − Q_A(a⁺, a⁻) Q_B(b⁺, b⁻)|` over all bi-sequences.
pub fn factorization_delta(spec: &CompositeSpec, sched_a: &Schedule, sched_b: &Schedule) -> Result<f64> {
    factorization_delta_with(spec, sched_a, sched_b, &Limits::from_env())
}

pub fn factorization_delta_with(
    spec: &CompositeSpec,
    sched_a: &Schedule,
    sched_b: &Schedule,
    limits: &Limits,
) -> Result<f64> {
    let (sys_a, sys_b) = spec.pair()?;
    let joint = compose(spec)?;
    let tandem = tandem_schedule(sched_a, sched_b)?;
    let q_ab = biprob::biprob_table_with(&joint, &tandem, limits)?;
    let q_a = biprob::biprob_table_with(sys_a, sched_a, limits)?;
    let q_b = biprob::biprob_table_with(sys_b, sched_b, limits)?;
    let rb = sched_b.radices();

    let split = |code: usize| {
        let seq = q_ab.decode(code);
        let a: Vec<usize> = seq.iter().zip(&rb).map(|(&k, &r)| k / r).collect();
        let b: Vec<usize> = seq.iter().zip(&rb).map(|(&k, &r)| k % r).collect();
        (q_a.encode(&a), q_b.encode(&b))
    };
    let codes: Vec<(usize, usize)> = (0..q_ab.size()).map(split).collect();
    let mut worst = 0.0f64;
    for (p, &(pa, pb)) in codes.iter().enumerate() {
        for (m, &(ma, mb)) in codes.iter().enumerate() {
            let product = q_a.at(pa, ma) * q_b.at(pb, mb);
            worst = worst.max((q_ab.at(p, m) - product).norm());
        }
    }
    Ok(worst)
}

/// Where to evaluate a co-interference term: the pairs sit at `position`,
/// every other entry is fixed per subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct CoInterferenceQuery {
    pub position: usize,
    pub a_pair: (usize, usize),
    pub b_pair: (usize, usize),
    pub fixed_a: Vec<usize>,
    pub fixed_b: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoInterference {
    /// `I_AB − I_A I_B`.
    pub phi: f64,
    /// `−Im Q_A · Im Q_B`.
    pub phi_from_imaginary: f64,
    pub i_ab: f64,
    pub q_a: (f64, f64),
    pub q_b: (f64, f64),
}

fn with_at(fixed: &[usize], position: usize, k: usize) -> Vec<usize> {
    let mut s = fixed.to_vec();
    s.insert(position, k);
    s
}

pub fn co_interference(
    spec: &CompositeSpec,
    sched_a: &Schedule,
    sched_b: &Schedule,
    query: &CoInterferenceQuery,
) -> Result<CoInterference> {
    if !spec.is_independent() {
        return Err(Error::NotIndependent("subsystems are coupled".into()));
    }
    let (sys_a, sys_b) = spec.pair()?;
    let n = sched_a.len();
    if query.position >= n {
        return Err(Error::IndexOutOfRange {
            index: query.position,
            len: n,
        });
    }
    if query.a_pair.0 == query.a_pair.1 || query.b_pair.0 == query.b_pair.1 {
        return Err(Error::InvalidArgument(
            "co-interference needs two distinct outcomes per subsystem".into(),
        ));
    }
    let subsystem_q = |sys: &SystemSpec, s: &Schedule, pair: (usize, usize), fixed: &[usize]| -> Result<C64> {
        if fixed.len() + 1 != s.len() {
            return Err(Error::SequenceLength {
                expected: s.len().saturating_sub(1),
                found: fixed.len(),
            });
        }
        let bi = biprob::BiSequence::new(with_at(fixed, query.position, pair.0), with_at(fixed, query.position, pair.1));
        biprob::biprob(sys, s, &bi)
    };
    let q_a = subsystem_q(sys_a, sched_a, query.a_pair, &query.fixed_a)?;
    let q_b = subsystem_q(sys_b, sched_b, query.b_pair, &query.fixed_b)?;

    // Joint interference through a which-subsystem coarse device joining
    // a⁺∧b⁺ with a⁻∧b⁻ at the position.
    let joint = compose(spec)?;
    let tandem = tandem_schedule(sched_a, sched_b)?;
    let rb = sched_b.radices();
    let fixed: Vec<usize> = query
        .fixed_a
        .iter()
        .zip(&query.fixed_b)
        .enumerate()
        .map(|(k, (&a, &b))| {
            let entry = if k < query.position { k } else { k + 1 };
            a * rb[entry] + b
        })
        .collect();
    let r = rb[query.position];
    let plus = query.a_pair.0 * r + query.b_pair.0;
    let minus = query.a_pair.1 * r + query.b_pair.1;
    let i_ab = coarse::interference_term(&joint, &tandem, query.position, (plus, minus), &fixed)?.phenomenological;

    let phi = i_ab - q_a.re * q_b.re;
    let phi_from_imaginary = -q_a.im * q_b.im;
    ensure("co-interference identity", (phi - phi_from_imaginary).abs(), 1e-10)?;
    Ok(CoInterference {
        phi,
        phi_from_imaginary,
        i_ab,
        q_a: (q_a.re, q_a.im),
        q_b: (q_b.re, q_b.im),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdenticalRelations {
    pub phi_ab: f64,
    pub phi_aa: f64,
    pub phi_bb: f64,
    /// The same-pair term with the B pair reversed; equals `−phi_aa`.
    pub phi_swapped: f64,
    /// `| |Φ_AB| − √|Φ_AA| √|Φ_BB| |`.
    pub product_error: f64,
    pub antisymmetry_error: f64,
    /// `max(Φ_AA, Φ_BB)`, which must not be positive.
    pub max_same_pair_phi: f64,
}

impl IdenticalRelations {
    pub fn holds(&self, tol: f64) -> bool {
        self.product_error <= tol && self.antisymmetry_error <= tol && self.max_same_pair_phi <= tol
    }
}

/// Relations between co-interference terms of two identical, independent
/// subsystems running the same schedule. `query.a_pair`/`fixed_a` and
/// `query.b_pair`/`fixed_b` choose the two alternatives compared.
pub fn identical_relations_check(
    spec: &CompositeSpec,
    schedule: &Schedule,
    query: &CoInterferenceQuery,
) -> Result<IdenticalRelations> {
    let (a, b) = spec.pair()?;
    if a.dim() != b.dim() {
        return Err(Error::NotIdentical(format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    let diff = linalg::max_abs_diff(a.hamiltonian(), b.hamiltonian());
    if diff > 1e-12 {
        return Err(Error::NotIdentical(format!("Hamiltonians differ by {diff:e}")));
    }
    let run = |q: &CoInterferenceQuery| co_interference(spec, schedule, schedule, q).map(|r| r.phi);
    let same_a = CoInterferenceQuery {
        b_pair: query.a_pair,
        fixed_b: query.fixed_a.clone(),
        ..query.clone()
    };
    let same_b = CoInterferenceQuery {
        a_pair: query.b_pair,
        fixed_a: query.fixed_b.clone(),
        ..query.clone()
    };
    let swapped = CoInterferenceQuery {
        b_pair: (query.a_pair.1, query.a_pair.0),
        ..same_a.clone()
    };
    let phi_ab = run(query)?;
    let phi_aa = run(&same_a)?;
    let phi_bb = run(&same_b)?;
    let phi_swapped = run(&swapped)?;
    Ok(IdenticalRelations {
        phi_ab,
        phi_aa,
        phi_bb,
        phi_swapped,
        product_error: (phi_ab.abs() - phi_aa.abs().sqrt() * phi_bb.abs().sqrt()).abs(),
        antisymmetry_error: (phi_swapped + phi_aa).abs(),
        max_same_pair_phi: phi_aa.max(phi_bb),
    })
}

/// Probability of the tandem readout with the alternatives in `block`
/// merged at `position`, and the same value assembled from subsystem
/// bi-probabilities as `Σ Re[Q_A Q_B]` over the block.
pub fn which_subsystem_prob(
    spec: &CompositeSpec,
    sched_a: &Schedule,
    sched_b: &Schedule,
    position: usize,
    block: &[(usize, usize)],
    fixed: &[(usize, usize)],
) -> Result<(f64, f64)> {
    let (sys_a, sys_b) = spec.pair()?;
    let joint = compose(spec)?;
    let tandem = tandem_schedule(sched_a, sched_b)?;
    let rb = sched_b.radices();
    if position >= tandem.len() || fixed.len() + 1 != tandem.len() {
        return Err(Error::SequenceLength {
            expected: tandem.len().saturating_sub(1),
            found: fixed.len(),
        });
    }
    let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(tandem.len());
    let mut k = 0;
    for j in 0..tandem.len() {
        if j == position {
            blocks.push(block.iter().map(|&(a, b)| a * rb[j] + b).collect());
        } else {
            let (a, b) = fixed[k];
            blocks.push(vec![a * rb[j] + b]);
            k += 1;
        }
    }
    let direct = Chain::new(&joint, &tandem)?.prob_blocks(&blocks);

    let chain_a = Chain::new(sys_a, sched_a)?;
    let chain_b = Chain::new(sys_b, sched_b)?;
    let seq = |side: fn(&(usize, usize)) -> usize, at: &(usize, usize)| -> Vec<usize> {
        with_at(&fixed.iter().map(side).collect::<Vec<_>>(), position, side(at))
    };
    let mut assembled = 0.0;
    for p in block {
        for m in block {
            let qa = chain_a.q(&seq(|x| x.0, p), &seq(|x| x.0, m));
            let qb = chain_b.q(&seq(|x| x.1, p), &seq(|x| x.1, m));
            assembled += (qa * qb).re;
        }
    }
    Ok((direct, assembled))
}
