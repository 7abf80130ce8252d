//! Devices, states, Hamiltonians and propagators.
//!
//! Projectors attached to a [`Device`] are the `t = 0` (Schrödinger frame)
//! operators. Time dependence enters only through
//! [`heisenberg_projectors`], which conjugates them with `U(t, 0)`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};

/// Operations refuse Hilbert dimensions above this unless explicitly overridden.
pub const MAX_DIM: usize = 64;

/// Tolerance for the projector-family invariants.
pub const DEVICE_TOL: f64 = 1e-10;

/// Hermiticity tolerance for Hamiltonians and input observables.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default degeneracy grouping tolerance, relative to the spectral range.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

/// Anything that supplies unitary propagators on a fixed Hilbert space.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;

    /// `U(t, t0)`, defined for either time order.
    fn propagator(&self, t: f64, t0: f64) -> CMatrix;
}

fn check_dim(dim: usize, allow_large: bool) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if dim > MAX_DIM && !allow_large {
        return Err(Error::DimensionTooLarge { dim, cap: MAX_DIM });
    }
    Ok(())
}

/// A closed system with a time-independent Hamiltonian (ħ = 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SystemSpecRaw", into = "SystemSpecRaw")]
pub struct SystemSpec {
    hamiltonian: CMatrix,
    energies: Vec<f64>,
    eigenvectors: CMatrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSpecRaw {
    dim: usize,
    #[serde(with = "linalg::matrix_serde")]
    hamiltonian: CMatrix,
}

impl TryFrom<SystemSpecRaw> for SystemSpec {
    type Error = Error;

    fn try_from(raw: SystemSpecRaw) -> Result<Self> {
        if raw.hamiltonian.nrows() != raw.dim {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                found: raw.hamiltonian.nrows(),
            });
        }
        SystemSpec::new(raw.hamiltonian)
    }
}

impl From<SystemSpec> for SystemSpecRaw {
    fn from(s: SystemSpec) -> Self {
        SystemSpecRaw {
            dim: s.dim(),
            hamiltonian: s.hamiltonian,
        }
    }
}

impl SystemSpec {
    pub fn new(hamiltonian: CMatrix) -> Result<Self> {
        Self::build(hamiltonian, false)
    }

    /// Same as [`SystemSpec::new`] but without the dimension cap.
    pub fn new_large(hamiltonian: CMatrix) -> Result<Self> {
        Self::build(hamiltonian, true)
    }

    fn build(hamiltonian: CMatrix, allow_large: bool) -> Result<Self> {
        check_dim(hamiltonian.nrows(), allow_large)?;
        if !hamiltonian.is_square() {
            return Err(Error::DimensionMismatch {
                expected: hamiltonian.nrows(),
                found: hamiltonian.ncols(),
            });
        }
        let asym = linalg::hermitian_asymmetry(&hamiltonian);
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian { max_asymmetry: asym });
        }
        let (energies, eigenvectors) = linalg::eigh(&hamiltonian);
        Ok(SystemSpec {
            hamiltonian,
            energies,
            eigenvectors,
        })
    }

    /// The free system `H = 0`.
    pub fn free(dim: usize) -> Result<Self> {
        Self::new(CMatrix::zeros(dim, dim))
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvectors of the Hamiltonian as columns, matching [`Self::energies`].
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }
}

impl Dynamics for SystemSpec {
    fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    fn propagator(&self, t: f64, t0: f64) -> CMatrix {
        let dt = t - t0;
        linalg::spectral_apply(&self.energies, &self.eigenvectors, |e| {
            C64::from_polar(1.0, -e * dt)
        })
    }
}

/// `U(t, t0) = exp(-i (t - t0) H)`.
pub fn propagator(system: &SystemSpec, t: f64, t0: f64) -> CMatrix {
    system.propagator(t, t0)
}

/// A measurement outcome. Labels identify outcomes; equality is by index in
/// the owning device, never by comparing `value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub label: String,
    pub value: Option<f64>,
}

impl Outcome {
    pub fn labelled(label: impl Into<String>) -> Self {
        Outcome {
            label: label.into(),
            value: None,
        }
    }

    pub fn valued(label: impl Into<String>, value: f64) -> Self {
        Outcome {
            label: label.into(),
            value: Some(value),
        }
    }
}

/// A named complete family of orthogonal projectors.
#[derive(Debug, Clone)]
pub struct Device {
    name: String,
    outcomes: Vec<Outcome>,
    projectors: Vec<CMatrix>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct DeviceRaw {
    name: String,
    outcomes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(with = "linalg::matrix_serde::vec")]
    projectors: Vec<CMatrix>,
}

impl Serialize for Device {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let values = if self.outcomes.iter().all(|o| o.value.is_some()) {
            Some(self.outcomes.iter().filter_map(|o| o.value).collect())
        } else {
            None
        };
        DeviceRaw {
            name: self.name.clone(),
            outcomes: self.outcomes.iter().map(|o| o.label.clone()).collect(),
            values,
            projectors: self.projectors.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Device {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = DeviceRaw::deserialize(d)?;
        let outcomes = match raw.values {
            Some(values) if values.len() == raw.outcomes.len() => raw
                .outcomes
                .into_iter()
                .zip(values)
                .map(|(l, v)| Outcome::valued(l, v))
                .collect(),
            Some(_) => return Err(serde::de::Error::custom("values/outcomes length mismatch")),
            None => raw.outcomes.into_iter().map(Outcome::labelled).collect(),
        };
        Device::new(raw.name, outcomes, raw.projectors).map_err(serde::de::Error::custom)
    }
}

impl Device {
    /// Validated constructor: every invariant must hold to [`DEVICE_TOL`].
    pub fn new(name: impl Into<String>, outcomes: Vec<Outcome>, projectors: Vec<CMatrix>) -> Result<Self> {
        let device = Self::from_parts_unchecked(name, outcomes, projectors)?;
        check_dim(device.dim, false)?;
        device.check()?;
        Ok(device)
    }

    /// Builds a device with only structural checks (matching counts and
    /// square projectors of one dimension). Use [`validate_device`] to
    /// inspect the projector invariants.
    pub fn from_parts_unchecked(
        name: impl Into<String>,
        outcomes: Vec<Outcome>,
        projectors: Vec<CMatrix>,
    ) -> Result<Self> {
        let name = name.into();
        if outcomes.is_empty() || outcomes.len() != projectors.len() {
            return Err(Error::InvalidDevice {
                name,
                reason: format!(
                    "{} outcomes for {} projectors",
                    outcomes.len(),
                    projectors.len()
                ),
            });
        }
        let dim = projectors[0].nrows();
        if projectors.iter().any(|p| p.nrows() != dim || p.ncols() != dim) {
            return Err(Error::InvalidDevice {
                name,
                reason: "projectors must be square and share one dimension".into(),
            });
        }
        for (i, a) in outcomes.iter().enumerate() {
            if outcomes[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::InvalidDevice {
                    name,
                    reason: format!("duplicate outcome label `{}`", a.label),
                });
            }
        }
        Ok(Device {
            name,
            outcomes,
            projectors,
            dim,
        })
    }

    fn check(&self) -> Result<()> {
        let report = validate_device(self);
        if let Some((what, value)) = report.worst_violation(DEVICE_TOL) {
            return Err(Error::InvalidDevice {
                name: self.name.clone(),
                reason: format!("{what} violation {value:e}"),
            });
        }
        Ok(())
    }

    /// Device whose projectors are given as the rank-1 projectors onto the
    /// columns of a unitary.
    pub fn from_basis(name: impl Into<String>, labels: &[&str], basis: &CMatrix) -> Result<Self> {
        let projectors = (0..basis.ncols())
            .map(|j| linalg::outer(&basis.column(j).into_owned()))
            .collect();
        let outcomes = labels.iter().map(|l| Outcome::labelled(*l)).collect();
        Device::new(name, outcomes, projectors)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn outcome_count(&self) -> usize {
        self.outcomes.len()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.outcomes.iter().map(|o| o.label.as_str()).collect()
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn projector(&self, index: usize) -> &CMatrix {
        &self.projectors[index]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.outcomes
            .iter()
            .position(|o| o.label == label)
            .ok_or_else(|| Error::UnknownOutcome {
                device: self.name.clone(),
                label: label.to_string(),
            })
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.outcomes.len() {
            Ok(())
        } else {
            Err(Error::OutcomeOutOfRange {
                device: self.name.clone(),
                index,
                count: self.outcomes.len(),
            })
        }
    }

    pub fn rank(&self, index: usize) -> usize {
        self.projectors[index].trace().re.round() as usize
    }

    pub fn is_fine_grained(&self) -> bool {
        (0..self.projectors.len()).all(|k| self.rank(k) == 1)
    }

    /// Outcome values, when every outcome carries one.
    pub fn values(&self) -> Option<Vec<f64>> {
        self.outcomes.iter().map(|o| o.value).collect()
    }

    /// The observable `Σ f P(f)`; requires numeric outcome values.
    pub fn observable(&self) -> Result<CMatrix> {
        let values = self.values().ok_or_else(|| Error::InvalidDevice {
            name: self.name.clone(),
            reason: "outcomes carry no numeric values".into(),
        })?;
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for (v, p) in values.iter().zip(&self.projectors) {
            acc += p * c(*v, 0.0);
        }
        Ok(acc)
    }

    /// Unit vectors spanning each rank-1 projector.
    pub fn basis_vectors(&self) -> Result<Vec<CVector>> {
        if !self.is_fine_grained() {
            return Err(Error::NotFineGrained(self.name.clone()));
        }
        Ok(self.projectors.iter().map(range_vector).collect())
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub(crate) fn with_projectors(&self, projectors: Vec<CMatrix>) -> Device {
        Device {
            name: self.name.clone(),
            outcomes: self.outcomes.clone(),
            projectors,
            dim: self.dim,
        }
    }

    /// The trivial one-outcome device with the identity projector.
    pub fn trivial(dim: usize) -> Device {
        Device {
            name: "1".into(),
            outcomes: vec![Outcome::labelled("1")],
            projectors: vec![linalg::identity(dim)],
            dim,
        }
    }
}

/// Unit vector spanning the range of a rank-1 projector (largest column, normalized).
fn range_vector(p: &CMatrix) -> CVector {
    let best = (0..p.ncols())
        .max_by(|&a, &b| p.column(a).norm().total_cmp(&p.column(b).norm()))
        .unwrap_or(0);
    let col = p.column(best).into_owned();
    let n = col.norm();
    col / c(n, 0.0)
}

/// Maximum violation of each projector-family invariant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub hermiticity: f64,
    pub idempotence: f64,
    pub orthogonality: f64,
    pub completeness: f64,
    pub fine_grained: bool,
}

impl ValidationReport {
    pub fn worst_violation(&self, tol: f64) -> Option<(&'static str, f64)> {
        [
            ("hermiticity", self.hermiticity),
            ("idempotence", self.idempotence),
            ("orthogonality", self.orthogonality),
            ("completeness", self.completeness),
        ]
        .into_iter()
        .filter(|(_, v)| *v > tol)
        .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.worst_violation(tol).is_none()
    }
}

pub fn validate_device(device: &Device) -> ValidationReport {
    let ps = &device.projectors;
    let hermiticity = ps.iter().map(linalg::hermitian_asymmetry).fold(0.0, f64::max);
    let idempotence = ps
        .iter()
        .map(|p| linalg::max_abs_diff(&(p * p), p))
        .fold(0.0, f64::max);
    let mut orthogonality = 0.0f64;
    for (i, a) in ps.iter().enumerate() {
        for (j, b) in ps.iter().enumerate() {
            if i != j {
                orthogonality = orthogonality.max(linalg::max_abs(&(a * b)));
            }
        }
    }
    let sum = ps
        .iter()
        .fold(CMatrix::zeros(device.dim, device.dim), |acc, p| acc + p);
    let completeness = linalg::max_abs_diff(&sum, &linalg::identity(device.dim));
    ValidationReport {
        hermiticity,
        idempotence,
        orthogonality,
        completeness,
        fine_grained: device.is_fine_grained(),
    }
}

fn format_value(v: f64) -> String {
    let rounded = (v * 1e9).round() / 1e9;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}

/// Spectral device of a Hermitian matrix. Eigenvalues closer than
/// `degeneracy_tol * (λmax - λmin)` share one projector. Outcomes are ordered
/// by decreasing eigenvalue.
pub fn device_from_hermitian(
    name: impl Into<String>,
    matrix: &CMatrix,
    degeneracy_tol: Option<f64>,
) -> Result<Device> {
    let name = name.into();
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            expected: matrix.nrows(),
            found: matrix.ncols(),
        });
    }
    let asym = linalg::hermitian_asymmetry(matrix);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian { max_asymmetry: asym });
    }
    check_dim(matrix.nrows(), false)?;
    let (vals, vecs) = linalg::eigh(matrix);
    let range = vals.last().unwrap() - vals.first().unwrap();
    let tol = degeneracy_tol.unwrap_or(DEFAULT_DEGENERACY_TOL) * range;

    // Groups of consecutive (ascending) eigenvalues separated by at most `tol`.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..vals.len() {
        match groups.last_mut() {
            Some(g) if vals[k] - vals[*g.last().unwrap()] <= tol => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    groups.reverse();

    let dim = matrix.nrows();
    let mut outcomes = Vec::with_capacity(groups.len());
    let mut projectors = Vec::with_capacity(groups.len());
    for g in &groups {
        let mean = g.iter().map(|&k| vals[k]).sum::<f64>() / g.len() as f64;
        let mut p = CMatrix::zeros(dim, dim);
        for &k in g {
            p += linalg::outer(&vecs.column(k).into_owned());
        }
        outcomes.push(Outcome::valued(format_value(mean), mean));
        projectors.push(p);
    }
    Device::new(name, outcomes, projectors)
}

/// Conjugates every projector into the Heisenberg picture at time `t`:
/// `P(f) -> U(t,0)† P(f) U(t,0)`.
pub fn heisenberg_projectors<D: Dynamics + ?Sized>(device: &Device, system: &D, t: f64) -> Result<Device> {
    if device.dim != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: device.dim,
        });
    }
    let u = system.propagator(t, 0.0);
    let ud = u.adjoint();
    Ok(device.with_projectors(device.projectors.iter().map(|p| &ud * p * &u).collect()))
}

/// Discrete-Fourier partner of a perfectly fine-grained device: with `|k⟩`
/// the device basis, the partner basis is `|j⟩⊥ = d^{-1/2} Σ_k ω^{jk} |k⟩`.
pub fn mub_partner(device: &Device) -> Result<Device> {
    let basis = device.basis_vectors()?;
    let d = basis.len();
    let norm = 1.0 / (d as f64).sqrt();
    let projectors = (0..d)
        .map(|j| {
            let mut v = CVector::zeros(device.dim);
            for (k, bk) in basis.iter().enumerate() {
                let phase = C64::from_polar(norm, 2.0 * PI * ((j * k) % d) as f64 / d as f64);
                v += bk * phase;
            }
            linalg::outer(&v)
        })
        .collect();
    let outcomes = (0..d).map(|j| Outcome::labelled(j.to_string())).collect();
    Device::new(format!("{}_perp", device.name), outcomes, projectors)
}

/// Devices deployed in tandem on the two factors of a tensor product.
pub fn tensor_device(a: &Device, b: &Device) -> Result<Device> {
    let mut outcomes = Vec::with_capacity(a.outcome_count() * b.outcome_count());
    let mut projectors = Vec::with_capacity(outcomes.capacity());
    for (oa, pa) in a.outcomes.iter().zip(&a.projectors) {
        for (ob, pb) in b.outcomes.iter().zip(&b.projectors) {
            outcomes.push(Outcome::labelled(format!("{}∧{}", oa.label, ob.label)));
            projectors.push(linalg::kron(pa, pb));
        }
    }
    let dim = a.dim * b.dim;
    check_dim(dim, false)?;
    Ok(Device {
        name: format!("{}∧{}", a.name, b.name),
        outcomes,
        projectors,
        dim,
    })
}

/// Outcome permutation `perm` with `P_b(perm[k]) = P_a(k)`, if one exists.
pub fn equivalent_relabeling(a: &Device, b: &Device, tol: f64) -> Option<Vec<usize>> {
    if a.dim != b.dim || a.outcome_count() != b.outcome_count() {
        return None;
    }
    let mut perm = Vec::with_capacity(a.outcome_count());
    let mut used = vec![false; b.outcome_count()];
    for pa in &a.projectors {
        let hit = (0..b.outcome_count())
            .find(|&j| !used[j] && linalg::max_abs_diff(pa, &b.projectors[j]) <= tol)?;
        used[hit] = true;
        perm.push(hit);
    }
    Some(perm)
}

/// A density operator entering bi-probabilities as the metric, tagged with
/// the initialization time. The density is expressed in the reference frame
/// `t = 0`, like device projectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "StateRaw", into = "StateRaw")]
pub struct State {
    density: CMatrix,
    time_tag: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRaw {
    #[serde(with = "linalg::matrix_serde")]
    density: CMatrix,
    #[serde(default)]
    time: f64,
}

impl TryFrom<StateRaw> for State {
    type Error = Error;
    fn try_from(raw: StateRaw) -> Result<Self> {
        State::new(raw.density, raw.time)
    }
}

impl From<State> for StateRaw {
    fn from(s: State) -> Self {
        StateRaw {
            density: s.density,
            time: s.time_tag,
        }
    }
}

pub const STATE_TOL: f64 = 1e-10;

impl State {
    pub fn new(density: CMatrix, time_tag: f64) -> Result<Self> {
        if !density.is_square() || density.nrows() == 0 {
            return Err(Error::InvalidState("density must be square and non-empty".into()));
        }
        let asym = linalg::hermitian_asymmetry(&density);
        if asym > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian ({asym:e})")));
        }
        let tr = density.trace();
        if (tr - c(1.0, 0.0)).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min = linalg::min_eigenvalue(&density);
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        if !time_tag.is_finite() {
            return Err(Error::InvalidState("non-finite time tag".into()));
        }
        Ok(State { density, time_tag })
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &CVector, time_tag: f64) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        State::new(linalg::outer(&(psi / c(n, 0.0))), time_tag)
    }

    pub fn basis(dim: usize, index: usize, time_tag: f64) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, len: dim });
        }
        let mut psi = CVector::zeros(dim);
        psi[index] = c(1.0, 0.0);
        State::pure(&psi, time_tag)
    }

    pub fn maximally_mixed(dim: usize, time_tag: f64) -> Result<Self> {
        State::new(linalg::identity(dim) * c(1.0 / dim as f64, 0.0), time_tag)
    }

    pub fn density(&self) -> &CMatrix {
        &self.density
    }

    pub fn time_tag(&self) -> f64 {
        self.time_tag
    }

    pub fn dim(&self) -> usize {
        self.density.nrows()
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.density, &self.density).re
    }

    pub fn rank(&self) -> usize {
        linalg::numerical_rank(&self.density, 1e-10)
    }
}

/// Energy variance `⟨ψ|H²|ψ⟩ - ⟨ψ|H|ψ⟩²` in a unit vector.
pub fn energy_variance(hamiltonian: &CMatrix, psi: &CVector) -> f64 {
    let h_psi = hamiltonian * psi;
    let mean = psi.dotc(&h_psi).re;
    // ‖(H − ⟨H⟩)ψ‖² avoids the cancellation in ⟨H²⟩ − ⟨H⟩².
    (h_psi - psi * c(mean, 0.0)).norm_squared()
}
