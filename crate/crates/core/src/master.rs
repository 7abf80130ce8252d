//! System-level bi-probabilities over basis coordinates, open-system
//! dynamical maps, two-time moments and the classical-limit diagnostic.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::biprob::{self, BiProbTable, Limits, Schedule};
use crate::error::{ensure, Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, ZERO};
use crate::quantum::{self, Device, Dynamics, State, SystemSpec};

/// Generalized Gell-Mann matrices: `d² − 1` traceless Hermitian generators
/// with `tr(T_a T_b) = 2δ_ab`, ordered symmetric, antisymmetric, diagonal.
pub fn gellmann_generators(d: usize) -> Result<Vec<CMatrix>> {
    if d < 2 {
        return Err(Error::InvalidArgument("generators need d ≥ 2".into()));
    }
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = c(1.0, 0.0);
            m[(k, j)] = c(1.0, 0.0);
            out.push(m);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = c(0.0, -1.0);
            m[(k, j)] = c(0.0, 1.0);
            out.push(m);
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut diag = vec![norm; l];
        diag.push(-(l as f64) * norm);
        diag.resize(d, 0.0);
        out.push(linalg::diag(&diag));
    }
    Ok(out)
}

/// A space-time coordinate: a time and a unitary basis change `S`. The
/// projector for basis index `η` is `U(τ⁰,0)† S† |η⟩⟨η| S U(τ⁰,0)`.
#[derive(Debug, Clone)]
pub struct CoordTau {
    pub time: f64,
    basis: CMatrix,
}

impl CoordTau {
    pub fn new(time: f64, basis: CMatrix) -> Result<Self> {
        if !basis.is_square() {
            return Err(Error::DimensionMismatch {
                expected: basis.nrows(),
                found: basis.ncols(),
            });
        }
        let err = linalg::max_abs_diff(&(basis.adjoint() * &basis), &linalg::identity(basis.nrows()));
        if err > 1e-10 {
            return Err(Error::InvalidArgument(format!("basis change is not unitary ({err:e})")));
        }
        Ok(CoordTau { time, basis })
    }

    /// `S = exp(i Σ_ℓ τ^ℓ T_ℓ)` over the generalized Gell-Mann generators.
    pub fn from_generators(time: f64, coords: &[f64], d: usize) -> Result<Self> {
        let gens = gellmann_generators(d)?;
        if coords.len() != gens.len() {
            return Err(Error::SequenceLength {
                expected: gens.len(),
                found: coords.len(),
            });
        }
        let g = gens
            .iter()
            .zip(coords)
            .fold(CMatrix::zeros(d, d), |acc, (t, &x)| acc + t * c(x, 0.0));
        CoordTau::new(time, linalg::expm_hermitian(&g, -1.0))
    }

    pub fn identity(time: f64, d: usize) -> Self {
        CoordTau {
            time,
            basis: linalg::identity(d),
        }
    }

    /// Coordinate whose basis vectors (at reference time 0) are the columns of `vectors`.
    fn from_reference_vectors<D: Dynamics + ?Sized>(system: &D, time: f64, vectors: &CMatrix) -> Result<Self> {
        // S† |η⟩ = U(τ⁰,0) v_η  ⇒  S = (U V)†.
        CoordTau::new(time, (system.propagator(time, 0.0) * vectors).adjoint())
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    fn projectors<D: Dynamics + ?Sized>(&self, system: &D) -> Vec<CMatrix> {
        let u = system.propagator(self.time, 0.0);
        let frame = self.basis.clone() * &u;
        (0..self.dim())
            .map(|eta| {
                let v: CVector = frame.row(eta).adjoint();
                linalg::outer(&v)
            })
            .collect()
    }
}

struct CoordChain {
    family: Vec<Vec<CMatrix>>,
    dim: usize,
}

impl CoordChain {
    fn new<D: Dynamics + ?Sized>(system: &D, coords: &[CoordTau]) -> Result<Self> {
        let dim = system.dim();
        if let Some(bad) = coords.iter().find(|t| t.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        if coords.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::InvalidSchedule("coordinates must be chronological".into()));
        }
        Ok(CoordChain {
            family: coords.iter().map(|t| t.projectors(system)).collect(),
            dim,
        })
    }

    fn operator(&self, seq: &[usize]) -> CMatrix {
        biprob::chain_operator(&self.family, seq, self.dim)
    }
}

/// `tr[P_{τn}(η⁺_n)⋯P_{τ0}(η⁺_0) P_{τ0}(η⁻_0)⋯P_{τn}(η⁻_n)]`; index 0 is the
/// initial slot.
pub fn system_biprob<D: Dynamics + ?Sized>(system: &D, coords: &[CoordTau], plus: &[usize], minus: &[usize]) -> Result<C64> {
    let chain = CoordChain::new(system, coords)?;
    for seq in [plus, minus] {
        if seq.len() != coords.len() {
            return Err(Error::SequenceLength {
                expected: coords.len(),
                found: seq.len(),
            });
        }
        if let Some(&bad) = seq.iter().find(|&&k| k >= chain.dim) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: chain.dim,
            });
        }
    }
    Ok(linalg::trace_with_adjoint(&chain.operator(plus), &chain.operator(minus)))
}

/// Orthonormal basis adapted to a device: for each outcome, an orthonormal
/// basis of its projector's range. Returns the basis (columns) and the
/// outcome owning each column.
fn adapted_basis(device: &Device) -> (CMatrix, Vec<usize>) {
    let d = device.dim();
    let mut cols = Vec::with_capacity(d);
    let mut owner = Vec::with_capacity(d);
    for (k, p) in device.projectors().iter().enumerate() {
        let (vals, vecs) = linalg::eigh(p);
        for (j, v) in vals.iter().enumerate() {
            if *v > 0.5 {
                cols.push(vecs.column(j).into_owned());
                owner.push(k);
            }
        }
    }
    (CMatrix::from_columns(&cols), owner)
}

/// Largest deviation between device bi-probabilities and their assembly from
/// system bi-probabilities over eigenbasis coordinates, weighted by the
/// spectrum of the initial metric.
pub fn observable_restriction_delta<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule) -> Result<f64> {
    observable_restriction_delta_with(system, schedule, &Limits::from_env())
}

pub fn observable_restriction_delta_with<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule, limits: &Limits) -> Result<f64> {
    let d = schedule.dim();
    let n = schedule.len();
    limits.check((d as u128).pow(2 * n as u32 + 1))?;
    let reference = biprob::biprob_table_with(system, schedule, limits)?;

    let (weights, rho_vecs) = linalg::eigh(schedule.init().density());
    let mut coords = vec![CoordTau::from_reference_vectors(system, schedule.init().time_tag(), &rho_vecs)?];
    let mut owners = Vec::with_capacity(n);
    for e in schedule.entries() {
        let (basis, owner) = adapted_basis(&e.device);
        // Device projectors are Schrödinger-picture; the coordinate frame adds U.
        coords.push(CoordTau::new(e.time, basis.adjoint())?);
        owners.push(owner);
    }
    let chain = CoordChain::new(system, &coords)?;

    // Operators P_{τn}(η_n)⋯P_{τ1}(η_1) for every η sequence, tagged with
    // the device outcome code they restrict to.
    let etas = biprob::all_sequences(&vec![d; n]);
    let tagged: Vec<(usize, CMatrix)> = etas
        .par_iter()
        .map(|eta| {
            let f: Vec<usize> = eta.iter().zip(&owners).map(|(&h, o)| o[h]).collect();
            let mut op = linalg::identity(d);
            for (ps, &k) in chain.family[1..].iter().zip(eta) {
                op = &ps[k] * op;
            }
            (reference.encode(&f), op)
        })
        .collect();

    let size = reference.size();
    let mut assembled = vec![ZERO; size * size];
    for (eta0, &w) in weights.iter().enumerate() {
        if w.abs() < 1e-300 {
            continue;
        }
        let p0 = &chain.family[0][eta0];
        let left: Vec<CMatrix> = tagged.par_iter().map(|(_, op)| op * p0).collect();
        for (a, (fp, _)) in tagged.iter().enumerate() {
            for (m, (fm, _)) in tagged.iter().enumerate() {
                // Q_τ(η⁺, η⁻ | η₀, η₀) = tr[A⁺ P₀ P₀ A⁻†].
                assembled[fp * size + fm] += linalg::trace_with_adjoint(&left[a], &left[m]) * w;
            }
        }
    }
    Ok(reference
        .values()
        .iter()
        .zip(&assembled)
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm())))
}

/// A linear map on `d × d` operators acting on column-major vectorizations:
/// `vec(X)[i + d·j] = X[i, j]`.
#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

pub fn vectorize(x: &CMatrix) -> CVector {
    CVector::from_iterator(x.len(), x.iter().copied())
}

pub fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_iterator(d, d, v.iter().copied())
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: matrix.nrows(),
            });
        }
        Ok(Superoperator { dim, matrix })
    }

    /// Builds the matrix column by column from the images of `|i⟩⟨j|`.
    pub fn from_fn(dim: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let mut matrix = CMatrix::zeros(dim * dim, dim * dim);
        for j in 0..dim {
            for i in 0..dim {
                let mut e = CMatrix::zeros(dim, dim);
                e[(i, j)] = c(1.0, 0.0);
                let image = vectorize(&f(&e));
                matrix.set_column(i + dim * j, &image);
            }
        }
        Superoperator { dim, matrix }
    }

    /// `X ↦ A X B†`.
    pub fn conjugation(a: &CMatrix, b: &CMatrix) -> Self {
        Superoperator {
            dim: a.nrows(),
            matrix: linalg::kron(&b.map(|z| z.conj()), a),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Superoperator {
            dim,
            matrix: linalg::identity(dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        unvectorize(&(&self.matrix * vectorize(x)), self.dim)
    }

    /// `‖Λ†(1) − 1‖_max`.
    pub fn trace_preservation_error(&self) -> f64 {
        let id = vectorize(&linalg::identity(self.dim));
        let dual = self.matrix.adjoint() * &id;
        (dual - id).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// `Σ_ij |i⟩⟨j| ⊗ Λ(|i⟩⟨j|)`.
    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        let mut out = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let image = unvectorize(&self.matrix.column(i + d * j).into_owned(), d);
                out.view_mut((i * d, j * d), (d, d)).copy_from(&image);
            }
        }
        out
    }

    pub fn choi_min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.choi())
    }

    pub fn max_abs_diff(&self, other: &Superoperator) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.dim,
            "vectorization": "column-major",
            "matrix": linalg::matrix_serde::to_rows(&self.matrix),
        })
    }
}

/// An observed system O coupled to an environment E through
/// `H = H₀⊗1 + 1⊗H_E + Σ_α H_α⊗F_α`, both initialized at time 0.
#[derive(Debug, Clone)]
pub struct OpenSpec {
    pub system: SystemSpec,
    pub environment: SystemSpec,
    /// `(H_α on O, F_α on E)`.
    pub couplings: Vec<(CMatrix, CMatrix)>,
    pub env_state: State,
    pub obs_state: State,
}

impl OpenSpec {
    pub fn new(
        system: SystemSpec,
        environment: SystemSpec,
        couplings: Vec<(CMatrix, CMatrix)>,
        env_state: State,
        obs_state: State,
    ) -> Result<Self> {
        let (d_o, d_e) = (system.dim(), environment.dim());
        for (k, (h, f)) in couplings.iter().enumerate() {
            for (m, d) in [(h, d_o), (f, d_e)] {
                if m.nrows() != d || m.ncols() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: m.nrows(),
                    });
                }
                let asym = linalg::hermitian_asymmetry(m);
                if asym > quantum::HERMITIAN_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "coupling {k}: operator not Hermitian ({asym:e})"
                    )));
                }
            }
        }
        if env_state.dim() != d_e || obs_state.dim() != d_o {
            return Err(Error::DimensionMismatch {
                expected: d_e,
                found: env_state.dim(),
            });
        }
        Ok(OpenSpec {
            system,
            environment,
            couplings,
            env_state,
            obs_state,
        })
    }

    pub fn joint_hamiltonian(&self) -> CMatrix {
        let (d_o, d_e) = (self.system.dim(), self.environment.dim());
        let mut h = linalg::kron(self.system.hamiltonian(), &linalg::identity(d_e))
            + linalg::kron(&linalg::identity(d_o), self.environment.hamiltonian());
        for (ho, fe) in &self.couplings {
            h += linalg::kron(ho, fe);
        }
        (&h + h.adjoint()) * c(0.5, 0.0)
    }
}

/// `Λ_t(X) = tr_E[e^{−itH} (X ⊗ ρ_E) e^{itH}]`.
pub fn dynamical_map_exact(open: &OpenSpec, t: f64) -> Result<Superoperator> {
    let joint = SystemSpec::new(open.joint_hamiltonian())?;
    let u = joint.propagator(t, 0.0);
    let ud = u.adjoint();
    let (d_o, d_e) = (open.system.dim(), open.environment.dim());
    let rho_e = open.env_state.density();
    Ok(Superoperator::from_fn(d_o, |x| {
        linalg::partial_trace_second(&(&u * linalg::kron(x, rho_e) * &ud), d_o, d_e)
    }))
}

/// Environment device whose outcomes fix every coupling observable, with the
/// value of each `F_α` per outcome.
fn environment_device(open: &OpenSpec) -> Result<(Device, Vec<Vec<f64>>)> {
    let fs: Vec<&CMatrix> = open.couplings.iter().map(|(_, f)| f).collect();
    let d_e = open.environment.dim();
    if fs.is_empty() {
        return Ok((Device::trivial(d_e), vec![vec![]]));
    }
    let mut worst = 0.0f64;
    for (i, a) in fs.iter().enumerate() {
        for b in &fs[i + 1..] {
            worst = worst.max(linalg::max_abs(&linalg::commutator(a, b)));
        }
    }
    if worst > 1e-10 {
        return Err(Error::NonCommutingCouplings(worst));
    }
    // A generic combination separates every joint eigenspace.
    let combo = fs
        .iter()
        .enumerate()
        .fold(CMatrix::zeros(d_e, d_e), |acc, (k, f)| {
            acc + *f * c(1.0 / (k as f64 + std::f64::consts::SQRT_2), 0.0)
        });
    let device = quantum::device_from_hermitian("E", &combo, None)?;
    let values = device
        .projectors()
        .iter()
        .map(|p| {
            let rank = p.trace().re;
            fs.iter().map(|f| linalg::trace_product(f, p).re / rank).collect()
        })
        .collect();
    Ok((device, values))
}

/// Per-slice propagators `V_j(b) = exp(−iΔs(H₀ + Σ_α f_α(b) H_α))`.
fn slice_propagators(open: &OpenSpec, values: &[Vec<f64>], ds: f64) -> Vec<CMatrix> {
    values
        .iter()
        .map(|fv| {
            let mut h = open.system.hamiltonian().clone();
            for ((ho, _), &f) in open.couplings.iter().zip(fv) {
                h += ho * c(f, 0.0);
            }
            linalg::expm_hermitian(&h, ds)
        })
        .collect()
}

/// Midpoint slice times `s_j = (j − ½)Δs`.
fn slice_times(t: f64, slices: usize) -> Vec<f64> {
    let ds = t / slices as f64;
    (1..=slices).map(|j| (j as f64 - 0.5) * ds).collect()
}

/// The map as an average over environment bi-trajectories:
/// `Λ(X) = Σ_{b⁺,b⁻} Q_E(b⁺,b⁻) V(b⁺) X V(b⁻)†`, with `Q_E` the environment
/// bi-probability of the coupling device on the slice grid.
pub fn dynamical_map_bitraj(open: &OpenSpec, t: f64, slices: usize) -> Result<Superoperator> {
    dynamical_map_bitraj_with(open, t, slices, &Limits::from_env())
}

pub fn dynamical_map_bitraj_with(open: &OpenSpec, t: f64, slices: usize, limits: &Limits) -> Result<Superoperator> {
    if slices == 0 {
        return Err(Error::InvalidArgument("at least one slice is required".into()));
    }
    let (device, values) = environment_device(open)?;
    let times = slice_times(t, slices);
    let env_schedule = Schedule::from_pairs(
        times.iter().map(|&s| (s, device.clone())).collect(),
        State::new(open.env_state.density().clone(), 0.0)?,
    )?;
    let q = biprob::biprob_table_with(&open.environment, &env_schedule, limits)?;
    let steps = slice_propagators(open, &values, t / slices as f64);
    let d_o = open.system.dim();

    // V(b) = V(b_n)⋯V(b_1) for every environment sequence, in code order.
    let mut ops = vec![linalg::identity(d_o)];
    for _ in 0..slices {
        ops = ops
            .par_iter()
            .flat_map_iter(|a| steps.iter().map(move |v| v * a))
            .collect();
    }
    let conj_ops: Vec<CMatrix> = ops.iter().map(|v| v.map(|z| z.conj())).collect();
    // Σ_m Q(p,m) conj(V_m) per row, then Σ_p (…) ⊗ V_p in a fixed tree.
    let terms: Vec<CMatrix> = (0..q.size())
        .into_par_iter()
        .map(|p| {
            let mut w = CMatrix::zeros(d_o, d_o);
            for (m, vm) in conj_ops.iter().enumerate() {
                w += vm * q.at(p, m);
            }
            linalg::kron(&w, &ops[p])
        })
        .collect();
    let matrix = linalg::pairwise_sum(&terms).expect("at least one environment sequence");
    Superoperator::from_matrix(d_o, matrix)
}

/// The same environment average evaluated by nested sums over slices:
/// `K_j = Σ_b V_j(b) ⊗ P^E_{s_j}(b)` and `Λ(X) = tr_E[K (X ⊗ ρ_E) K†]` with
/// `K = K_n⋯K_1`. Expanding the product reproduces the bi-trajectory sum
/// term by term, so no table is enumerated.
pub fn dynamical_map_bitraj_transfer(open: &OpenSpec, t: f64, slices: usize) -> Result<Superoperator> {
    if slices == 0 {
        return Err(Error::InvalidArgument("at least one slice is required".into()));
    }
    let (device, values) = environment_device(open)?;
    let steps = slice_propagators(open, &values, t / slices as f64);
    let (d_o, d_e) = (open.system.dim(), open.environment.dim());
    let mut k_total = linalg::identity(d_o * d_e);
    for s in slice_times(t, slices) {
        let env = quantum::heisenberg_projectors(&device, &open.environment, s)?;
        let k_j = steps
            .iter()
            .zip(env.projectors())
            .fold(CMatrix::zeros(d_o * d_e, d_o * d_e), |acc, (v, p)| acc + linalg::kron(v, p));
        k_total = k_j * k_total;
    }
    let kd = k_total.adjoint();
    let rho_e = open.env_state.density();
    Ok(Superoperator::from_fn(d_o, |x| {
        linalg::partial_trace_second(&(&k_total * linalg::kron(x, rho_e) * &kd), d_o, d_e)
    }))
}

/// Piecewise-constant driving `H(s) = H₀ + g(s) H₁`, with `g` constant on
/// each listed interval and zero elsewhere.
#[derive(Debug, Clone)]
pub struct DrivenSystem {
    h0: CMatrix,
    h1: CMatrix,
    /// `(start, end, amplitude)`, sorted and non-overlapping.
    pieces: Vec<(f64, f64, f64)>,
}

impl DrivenSystem {
    pub fn new(h0: CMatrix, h1: CMatrix, mut pieces: Vec<(f64, f64, f64)>) -> Result<Self> {
        for m in [&h0, &h1] {
            let asym = linalg::hermitian_asymmetry(m);
            if asym > quantum::HERMITIAN_TOL {
                return Err(Error::NotHermitian { max_asymmetry: asym });
            }
        }
        if h0.shape() != h1.shape() {
            return Err(Error::DimensionMismatch {
                expected: h0.nrows(),
                found: h1.nrows(),
            });
        }
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pieces.iter().any(|p| !(p.1 > p.0)) || pieces.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::InvalidArgument("driving intervals must be non-empty and disjoint".into()));
        }
        Ok(DrivenSystem { h0, h1, pieces })
    }

    fn amplitude(&self, s: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| p.0 <= s && s < p.1)
            .map_or(0.0, |p| p.2)
    }

    /// Forward evolution from `a` to `b ≥ a`.
    fn evolve(&self, a: f64, b: f64) -> CMatrix {
        let mut cuts = vec![a, b];
        for p in &self.pieces {
            for x in [p.0, p.1] {
                if x > a && x < b {
                    cuts.push(x);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        let mut u = linalg::identity(self.h0.nrows());
        for w in cuts.windows(2) {
            let g = self.amplitude(0.5 * (w[0] + w[1]));
            let h = &self.h0 + &self.h1 * c(g, 0.0);
            u = linalg::expm_hermitian(&h, w[1] - w[0]) * u;
        }
        u
    }
}

impl Dynamics for DrivenSystem {
    fn dim(&self) -> usize {
        self.h0.nrows()
    }

    fn propagator(&self, t: f64, t0: f64) -> CMatrix {
        if t >= t0 {
            self.evolve(t0, t)
        } else {
            self.evolve(t, t0).adjoint()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutatorMoments {
    /// `tr([F₂(t₂), F₁(t₁)] ρ)`.
    pub direct: (f64, f64),
    /// `Σ (f₂⁺f₁⁺ − f₁⁻f₂⁻) Q(f⁺, f⁻)`.
    pub from_biprob: (f64, f64),
    pub anticommutator_direct: (f64, f64),
    pub anticommutator_from_biprob: (f64, f64),
}

impl CommutatorMoments {
    pub fn commutator(&self) -> C64 {
        c(self.direct.0, self.direct.1)
    }
}

/// Two-time commutator and anticommutator moments, directly and as second
/// moments of the two-time bi-probability.
pub fn two_time_commutator(
    system: &SystemSpec,
    obs_late: &CMatrix,
    obs_early: &CMatrix,
    t_late: f64,
    t_early: f64,
    state: &State,
) -> Result<CommutatorMoments> {
    if !(t_late > t_early) {
        return Err(Error::InvalidSchedule("the later observable must come strictly later".into()));
    }
    let f2 = quantum::device_from_hermitian("F2", obs_late, None)?;
    let f1 = quantum::device_from_hermitian("F1", obs_early, None)?;
    let heis = |f: &CMatrix, t: f64| {
        let u = system.propagator(t, 0.0);
        u.adjoint() * f * u
    };
    let a2 = heis(obs_late, t_late);
    let a1 = heis(obs_early, t_early);
    let rho = state.density();
    let comm = linalg::trace_product(&(&a2 * &a1 - &a1 * &a2), rho);
    let anti = linalg::trace_product(&(&a2 * &a1 + &a1 * &a2), rho);

    let schedule = Schedule::from_pairs(vec![(t_early, f1.clone()), (t_late, f2.clone())], state.clone())?;
    let table = biprob::biprob_table(system, &schedule)?;
    let v1 = f1.values().expect("spectral device");
    let v2 = f2.values().expect("spectral device");
    let (mut bc, mut ba) = (ZERO, ZERO);
    for p in 0..table.size() {
        let sp = table.decode(p);
        let plus = v2[sp[1]] * v1[sp[0]];
        for m in 0..table.size() {
            let sm = table.decode(m);
            let minus = v1[sm[0]] * v2[sm[1]];
            let q = table.at(p, m);
            bc += q * (plus - minus);
            ba += q * (plus + minus);
        }
    }
    ensure("commutator route disagreement", (comm - bc).norm(), 1e-10)?;
    ensure("anticommutator route disagreement", (anti - ba).norm(), 1e-10)?;
    Ok(CommutatorMoments {
        direct: (comm.re, comm.im),
        from_biprob: (bc.re, bc.im),
        anticommutator_direct: (anti.re, anti.im),
        anticommutator_from_biprob: (ba.re, ba.im),
    })
}

pub const CLASSICAL_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalDiagnostic {
    /// `Σ_{f⁺ ≠ f⁻} |Q(f⁺, f⁻)|`.
    pub offdiag_mass: f64,
    pub threshold: f64,
    /// The diagonal as a single-trajectory distribution, when the table is
    /// concentrated on it.
    pub surrogate: Option<Vec<f64>>,
    /// Largest Kolmogorov-consistency violation of the surrogate under
    /// summing out any single entry.
    pub consistency_error: Option<f64>,
    pub consistent: bool,
}

pub fn classical_diagnostic(table: &BiProbTable, threshold: f64) -> Result<ClassicalDiagnostic> {
    let n = table.size();
    let mut offdiag_mass = 0.0;
    for p in 0..n {
        for m in 0..n {
            if p != m {
                offdiag_mass += table.at(p, m).norm();
            }
        }
    }
    if offdiag_mass > threshold {
        return Ok(ClassicalDiagnostic {
            offdiag_mass,
            threshold,
            surrogate: None,
            consistency_error: None,
            consistent: false,
        });
    }
    let diag = table.diagonal();
    let mut worst = 0.0f64;
    let radices = table.schedule().radices();
    for j in 0..radices.len() {
        let shorter = table.marginalize_pair(j)?.diagonal();
        let mut summed = vec![0.0; shorter.len()];
        for (code, &p) in diag.iter().enumerate() {
            let mut seq = table.decode(code);
            seq.remove(j);
            let short_code = seq.iter().zip(radices.iter().enumerate().filter(|(k, _)| *k != j)).fold(0, |acc, (&k, (_, &r))| acc * r + k);
            summed[short_code] += p;
        }
        for (a, b) in summed.iter().zip(&shorter) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(ClassicalDiagnostic {
        offdiag_mass,
        threshold,
        surrogate: Some(diag),
        consistency_error: Some(worst),
        consistent: worst <= 1e-9,
    })
}
