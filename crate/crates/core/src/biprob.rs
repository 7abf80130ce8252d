//! Exact bi-probability tables over measurement histories.
//!
//! A bi-sequence `(f⁺, f⁻)` is encoded as two mixed-radix integers over the
//! per-entry outcome counts, entry 0 most significant. A table is a dense
//! `N × N` array with the plus code selecting the row.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, ZERO};
use crate::quantum::{self, Device, Dynamics, State};

/// Default cap on the number of complex entries in an enumerated table.
pub const DEFAULT_MAX_TABLE: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_MAX_TABLE`].
pub const MAX_TABLE_ENV: &str = "BITRAJ_MAX_TABLE";

/// Size guard for exponential enumerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// `None` disables the guard.
    pub max_table: Option<u64>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_table: Some(DEFAULT_MAX_TABLE),
        }
    }
}

impl Limits {
    /// The default guard, replaced by `BITRAJ_MAX_TABLE` when that parses as an integer.
    pub fn from_env() -> Self {
        match std::env::var(MAX_TABLE_ENV).ok().and_then(|v| v.trim().parse().ok()) {
            Some(n) => Limits { max_table: Some(n) },
            None => Limits::default(),
        }
    }

    pub fn unlimited() -> Self {
        Limits { max_table: None }
    }

    pub fn check(&self, entries: u128) -> Result<()> {
        match self.max_table {
            Some(limit) if entries > limit as u128 => Err(Error::TableTooLarge { entries, limit }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub time: f64,
    pub device: Device,
}

/// Chronological device deployments plus the initialization metric.
///
/// Equal consecutive times are accepted and mean back-to-back measurements
/// with no evolution in between.
#[derive(Debug, Clone, Serialize)]
pub struct Schedule {
    entries: Vec<ScheduleEntry>,
    init: State,
}

impl Schedule {
    pub fn new(entries: Vec<ScheduleEntry>, init: State) -> Result<Self> {
        let dim = init.dim();
        let mut last = init.time_tag();
        for (k, e) in entries.iter().enumerate() {
            if !e.time.is_finite() {
                return Err(Error::InvalidSchedule(format!("entry {k}: non-finite time")));
            }
            if e.time < last {
                return Err(Error::InvalidSchedule(format!(
                    "entry {k}: time {} precedes {}",
                    e.time, last
                )));
            }
            if e.device.dim() != dim {
                return Err(Error::InvalidSchedule(format!(
                    "entry {k}: device `{}` has dimension {}, state has {dim}",
                    e.device.name(),
                    e.device.dim()
                )));
            }
            last = e.time;
        }
        Ok(Schedule { entries, init })
    }

    /// Convenience constructor from `(time, device)` pairs.
    pub fn from_pairs(pairs: Vec<(f64, Device)>, init: State) -> Result<Self> {
        Schedule::new(
            pairs
                .into_iter()
                .map(|(time, device)| ScheduleEntry { time, device })
                .collect(),
            init,
        )
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn init(&self) -> &State {
        &self.init
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.init.dim()
    }

    pub fn radices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.device.outcome_count()).collect()
    }

    /// Number of single sequences, `∏ |Ω_j|`.
    pub fn sequence_count(&self) -> u128 {
        self.entries
            .iter()
            .map(|e| e.device.outcome_count() as u128)
            .product()
    }

    pub fn without(&self, position: usize) -> Result<Schedule> {
        if position >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: position,
                len: self.len(),
            });
        }
        let mut entries = self.entries.clone();
        entries.remove(position);
        Ok(Schedule {
            entries,
            init: self.init.clone(),
        })
    }

    pub fn with_init(&self, init: State) -> Result<Schedule> {
        Schedule::new(self.entries.clone(), init)
    }

    /// Replaces the device at `position`, keeping its time.
    pub fn with_device(&self, position: usize, device: Device) -> Result<Schedule> {
        if position >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: position,
                len: self.len(),
            });
        }
        let mut entries = self.entries.clone();
        entries[position].device = device;
        Schedule::new(entries, self.init.clone())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schedule serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn labels_of(&self, seq: &[usize]) -> Vec<String> {
        seq.iter()
            .zip(&self.entries)
            .map(|(&k, e)| e.device.outcomes()[k].label.clone())
            .collect()
    }

    pub fn indices_of(&self, labels: &[&str]) -> Result<Vec<usize>> {
        if labels.len() != self.len() {
            return Err(Error::SequenceLength {
                expected: self.len(),
                found: labels.len(),
            });
        }
        labels
            .iter()
            .zip(&self.entries)
            .map(|(l, e)| e.device.index_of(l))
            .collect()
    }

    pub(crate) fn check_sequence(&self, seq: &[usize]) -> Result<()> {
        if seq.len() != self.len() {
            return Err(Error::SequenceLength {
                expected: self.len(),
                found: seq.len(),
            });
        }
        for (&k, e) in seq.iter().zip(&self.entries) {
            e.device.check_index(k)?;
        }
        Ok(())
    }
}

/// A pair of outcome sequences, stored as outcome indices per entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BiSequence {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

impl BiSequence {
    pub fn new(plus: Vec<usize>, minus: Vec<usize>) -> Self {
        BiSequence { plus, minus }
    }

    pub fn diagonal(seq: Vec<usize>) -> Self {
        BiSequence {
            minus: seq.clone(),
            plus: seq,
        }
    }

    pub fn from_labels(schedule: &Schedule, plus: &[&str], minus: &[&str]) -> Result<Self> {
        Ok(BiSequence {
            plus: schedule.indices_of(plus)?,
            minus: schedule.indices_of(minus)?,
        })
    }
}

/// Heisenberg projectors for every schedule entry.
pub(crate) fn heisenberg_family<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule) -> Result<Vec<Vec<CMatrix>>> {
    if system.dim() != schedule.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: schedule.dim(),
        });
    }
    schedule
        .entries
        .iter()
        .map(|e| Ok(quantum::heisenberg_projectors(&e.device, system, e.time)?.projectors().to_vec()))
        .collect()
}

/// `P_n(f_n) ⋯ P_1(f_1)`.
pub(crate) fn chain_operator(family: &[Vec<CMatrix>], seq: &[usize], dim: usize) -> CMatrix {
    let mut acc = linalg::identity(dim);
    for (ps, &k) in family.iter().zip(seq) {
        acc = &ps[k] * acc;
    }
    acc
}

/// `tr[A⁺ ρ A⁻†]`.
pub(crate) fn sandwich(plus: &CMatrix, rho: &CMatrix, minus: &CMatrix) -> C64 {
    linalg::trace_with_adjoint(&(plus * rho), minus)
}

/// A single bi-probability `tr[P_n(f⁺_n)⋯P_1(f⁺_1) ρ P_1(f⁻_1)⋯P_n(f⁻_n)]`.
pub fn biprob<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule, bi: &BiSequence) -> Result<C64> {
    schedule.check_sequence(&bi.plus)?;
    schedule.check_sequence(&bi.minus)?;
    let family = heisenberg_family(system, schedule)?;
    let d = schedule.dim();
    let plus = chain_operator(&family, &bi.plus, d);
    let minus = chain_operator(&family, &bi.minus, d);
    Ok(sandwich(&plus, schedule.init.density(), &minus))
}

/// The chained Born-rule probability of one fine-grained sequence.
pub fn sequence_probability<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule, seq: &[usize]) -> Result<f64> {
    Ok(biprob(system, schedule, &BiSequence::diagonal(seq.to_vec()))?.re)
}

/// Heisenberg projector family plus metric, for evaluating many chains on
/// one schedule. Blocks select sums of projectors at each entry.
#[derive(Debug, Clone)]
pub(crate) struct Chain {
    pub family: Vec<Vec<CMatrix>>,
    pub rho: CMatrix,
    pub dim: usize,
}

impl Chain {
    pub fn new<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule) -> Result<Self> {
        Ok(Chain {
            family: heisenberg_family(system, schedule)?,
            rho: schedule.init.density().clone(),
            dim: schedule.dim(),
        })
    }

    pub fn operator(&self, seq: &[usize]) -> CMatrix {
        chain_operator(&self.family, seq, self.dim)
    }

    pub fn operator_blocks(&self, blocks: &[Vec<usize>]) -> CMatrix {
        let mut acc = linalg::identity(self.dim);
        for (ps, block) in self.family.iter().zip(blocks) {
            let mut p = CMatrix::zeros(self.dim, self.dim);
            for &k in block {
                p += &ps[k];
            }
            acc = p * acc;
        }
        acc
    }

    pub fn q(&self, plus: &[usize], minus: &[usize]) -> C64 {
        sandwich(&self.operator(plus), &self.rho, &self.operator(minus))
    }

    pub fn prob(&self, seq: &[usize]) -> f64 {
        let a = self.operator(seq);
        sandwich(&a, &self.rho, &a).re
    }

    pub fn prob_blocks(&self, blocks: &[Vec<usize>]) -> f64 {
        let a = self.operator_blocks(blocks);
        sandwich(&a, &self.rho, &a).re
    }
}

/// Every sequence over the given radices, entry 0 most significant.
pub(crate) fn all_sequences(radices: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(radices.len())];
    for &r in radices {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..r).map(move |k| {
                    let mut t = s.clone();
                    t.push(k);
                    t
                })
            })
            .collect();
    }
    out
}

/// Factor `ρ = W W†` keeping only the numerically nonzero spectrum.
pub(crate) fn density_factor(rho: &CMatrix) -> CMatrix {
    let (vals, vecs) = linalg::eigh(rho);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 1e-14 * scale).collect();
    CMatrix::from_fn(rho.nrows(), keep.len().max(1), |i, j| match keep.get(j) {
        Some(&k) => vecs[(i, k)] * vals[k].sqrt(),
        None => ZERO,
    })
}

/// `A_p W` for every sequence code `p`, in code order.
fn amplitude_blocks(family: &[Vec<CMatrix>], w: &CMatrix) -> Vec<CMatrix> {
    let mut level = vec![w.clone()];
    for ps in family {
        level = level
            .par_iter()
            .flat_map_iter(|a| ps.iter().map(move |p| p * a))
            .collect();
    }
    level
}

#[derive(Debug, Clone)]
pub struct BiProbTable {
    schedule: Schedule,
    radices: Vec<usize>,
    size: usize,
    values: Vec<C64>,
}

pub fn biprob_table<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule) -> Result<BiProbTable> {
    biprob_table_with(system, schedule, &Limits::from_env())
}

pub fn biprob_table_with<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule, limits: &Limits) -> Result<BiProbTable> {
    let n_seq = schedule.sequence_count();
    limits.check(n_seq * n_seq)?;
    let family = heisenberg_family(system, schedule)?;
    let w = density_factor(schedule.init.density());
    let blocks = amplitude_blocks(&family, &w);
    let size = blocks.len();
    let mut values = vec![ZERO; size * size];
    values.par_chunks_mut(size).enumerate().for_each(|(p, row)| {
        for (m, slot) in row.iter_mut().enumerate() {
            *slot = linalg::trace_with_adjoint(&blocks[p], &blocks[m]);
        }
    });
    Ok(BiProbTable {
        schedule: schedule.clone(),
        radices: schedule.radices(),
        size,
        values,
    })
}

impl BiProbTable {
    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn len(&self) -> usize {
        self.radices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radices.is_empty()
    }

    /// Number of single sequences (rows).
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn encode(&self, seq: &[usize]) -> usize {
        seq.iter().zip(&self.radices).fold(0, |acc, (&k, &r)| acc * r + k)
    }

    pub fn decode(&self, mut code: usize) -> Vec<usize> {
        let mut seq = vec![0; self.radices.len()];
        for j in (0..self.radices.len()).rev() {
            seq[j] = code % self.radices[j];
            code /= self.radices[j];
        }
        seq
    }

    pub fn at(&self, plus_code: usize, minus_code: usize) -> C64 {
        self.values[plus_code * self.size + minus_code]
    }

    pub fn get(&self, bi: &BiSequence) -> Result<C64> {
        self.schedule.check_sequence(&bi.plus)?;
        self.schedule.check_sequence(&bi.minus)?;
        Ok(self.at(self.encode(&bi.plus), self.encode(&bi.minus)))
    }

    pub fn get_labels(&self, plus: &[&str], minus: &[&str]) -> Result<C64> {
        self.get(&BiSequence::from_labels(&self.schedule, plus, minus)?)
    }

    /// Diagonal `Q(f, f)`, real parts, in code order.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size).map(|p| self.at(p, p).re).collect()
    }

    pub fn total(&self) -> C64 {
        linalg::pairwise_sum_scalars(&self.values)
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).sum()
    }

    /// Sums out `f⁺_j` and `f⁻_j` independently at `position`.
    pub fn marginalize_pair(&self, position: usize) -> Result<BiProbTable> {
        let schedule = self.schedule.without(position)?;
        let radices = schedule.radices();
        let size: usize = radices.iter().product();
        // Codes split as high · r_j · low + digit · low + rest.
        let low: usize = self.radices[position + 1..].iter().product();
        let r = self.radices[position];
        let collapse = |code: usize| (code / (low * r)) * low + code % low;
        let mut values = vec![ZERO; size * size];
        for p in 0..self.size {
            let np = collapse(p);
            for m in 0..self.size {
                values[np * size + collapse(m)] += self.at(p, m);
            }
        }
        Ok(BiProbTable {
            schedule,
            radices,
            size,
            values,
        })
    }

    pub fn max_hermitianity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in 0..self.size {
            for m in p..self.size {
                worst = worst.max((self.at(m, p) - self.at(p, m).conj()).norm());
            }
        }
        worst
    }

    /// Largest `|Q|` over entries whose final outcomes differ.
    pub fn max_causality_violation(&self) -> f64 {
        let Some(&last) = self.radices.last() else {
            return 0.0;
        };
        let mut worst = 0.0f64;
        for p in 0..self.size {
            for m in 0..self.size {
                if p % last != m % last {
                    worst = worst.max(self.at(p, m).norm());
                }
            }
        }
        worst
    }

    /// `M[p, m] = Q(p, m)` with bi-sequence codes as indices.
    pub fn gram_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.size, self.size, |p, m| self.at(p, m))
    }

    /// Largest deviation of a diagonal entry from a non-negative real number.
    pub fn max_diagonal_negativity(&self) -> f64 {
        (0..self.size)
            .map(|p| {
                let z = self.at(p, p);
                (-z.re).max(z.im.abs()).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &BiProbTable) -> Result<f64> {
        if self.radices != other.radices {
            return Err(Error::InvalidArgument("tables have different shapes".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm())))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<_> = (0..self.size)
            .flat_map(|p| (0..self.size).map(move |m| (p, m)))
            .map(|(p, m)| {
                let z = self.at(p, m);
                serde_json::json!({
                    "plus": self.schedule.labels_of(&self.decode(p)),
                    "minus": self.schedule.labels_of(&self.decode(m)),
                    "re": z.re,
                    "im": z.im,
                })
            })
            .collect();
        serde_json::json!({
            "schedule_digest": self.schedule.digest(),
            "entries": entries,
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let n = self.len();
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..n).map(|j| format!("plus_{j}")).collect();
        header.extend((0..n).map(|j| format!("minus_{j}")));
        header.push("re".into());
        header.push("im".into());
        w.write_record(&header)?;
        for p in 0..self.size {
            let plus = self.schedule.labels_of(&self.decode(p));
            for m in 0..self.size {
                let z = self.at(p, m);
                let mut rec = plus.clone();
                rec.extend(self.schedule.labels_of(&self.decode(m)));
                rec.push(z.re.to_string());
                rec.push(z.im.to_string());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn marginalize_pair(table: &BiProbTable, position: usize) -> Result<BiProbTable> {
    table.marginalize_pair(position)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyReport {
    pub normalization_error: f64,
    pub max_biconsistency_error: f64,
    pub max_causality_violation: f64,
    pub max_hermitianity_error: f64,
    pub min_gram_eigenvalue: f64,
    pub max_diagonal_negativity: f64,
    pub l1_norm: f64,
}

pub fn property_report<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule) -> Result<PropertyReport> {
    property_report_with(system, schedule, &Limits::from_env())
}

pub fn property_report_with<D: Dynamics + ?Sized>(
    system: &D,
    schedule: &Schedule,
    limits: &Limits,
) -> Result<PropertyReport> {
    let table = biprob_table_with(system, schedule, limits)?;
    report_for_table(system, &table, limits)
}

/// Property checks for an existing table; shorter tables for bi-consistency
/// are recomputed from scratch.
pub fn report_for_table<D: Dynamics + ?Sized>(system: &D, table: &BiProbTable, limits: &Limits) -> Result<PropertyReport> {
    let schedule = table.schedule();
    let mut max_biconsistency_error = 0.0f64;
    for j in 0..schedule.len() {
        let marginal = table.marginalize_pair(j)?;
        let fresh = biprob_table_with(system, &schedule.without(j)?, limits)?;
        max_biconsistency_error = max_biconsistency_error.max(marginal.max_abs_diff(&fresh)?);
    }
    Ok(PropertyReport {
        normalization_error: (table.total() - c(1.0, 0.0)).norm(),
        max_biconsistency_error,
        max_causality_violation: table.max_causality_violation(),
        max_hermitianity_error: table.max_hermitianity_error(),
        min_gram_eigenvalue: linalg::min_eigenvalue(&table.gram_matrix()),
        max_diagonal_negativity: table.max_diagonal_negativity(),
        l1_norm: table.l1_norm(),
    })
}

/// Inner-product realization of a table.
#[derive(Debug, Clone)]
pub struct GudderMetric {
    pub metric: CMatrix,
    /// Outcome labels of each basis sequence, in code order.
    pub basis_labels: Vec<Vec<String>>,
    pub rank: usize,
}

pub fn gudder_metric(table: &BiProbTable) -> GudderMetric {
    let metric = table.gram_matrix();
    let rank = linalg::numerical_rank(&metric, 1e-10);
    let basis_labels = (0..table.size())
        .map(|p| table.schedule().labels_of(&table.decode(p)))
        .collect();
    GudderMetric {
        metric,
        basis_labels,
        rank,
    }
}

impl GudderMetric {
    /// `⟨e_m| M |e_p⟩`, i.e. the metric entry reproducing `Q(p, m)`.
    pub fn inner(&self, plus_code: usize, minus_code: usize) -> C64 {
        self.metric[(plus_code, minus_code)]
    }

    pub fn trace(&self) -> C64 {
        self.metric.trace()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformBound {
    /// `(n, ‖Q‖₁)` for grids with `n` equispaced measurements.
    pub l1_series: Vec<(usize, f64)>,
    pub bound: f64,
    /// `sup_f v(f)` entering the bound.
    pub sup_rate: f64,
    /// Largest drop `‖Q_n‖₁ − ‖Q_m‖₁` over nested grids (`n` divides `m`).
    pub max_refinement_drop: f64,
    pub all_below_bound: bool,
}

/// Tables for the device on grids `s_j = jT/n`, `n = 1..=n_grid`, compared
/// against `|Ω|² exp(2|Ω| T sup_f v(f))`.
pub fn uniform_bound_check<D: Dynamics + ?Sized>(
    system: &D,
    hamiltonian: &CMatrix,
    device: &Device,
    init: &State,
    horizon: f64,
    n_grid: usize,
) -> Result<UniformBound> {
    uniform_bound_check_with(system, hamiltonian, device, init, horizon, n_grid, &Limits::from_env())
}

pub fn uniform_bound_check_with<D: Dynamics + ?Sized>(
    system: &D,
    hamiltonian: &CMatrix,
    device: &Device,
    init: &State,
    horizon: f64,
    n_grid: usize,
    limits: &Limits,
) -> Result<UniformBound> {
    if n_grid < 2 {
        return Err(Error::InvalidArgument("n_grid must be at least 2".into()));
    }
    let basis = device.basis_vectors()?;
    let omega = device.outcome_count() as f64;
    let sup_rate = basis
        .iter()
        .map(|v| quantum::energy_variance(hamiltonian, v).sqrt())
        .fold(0.0, f64::max);
    let bound = omega * omega * (2.0 * omega * sup_rate * horizon).exp();
    let t0 = init.time_tag();

    let mut l1_series = Vec::with_capacity(n_grid);
    for n in 1..=n_grid {
        let pairs = (1..=n)
            .map(|j| (t0 + j as f64 * horizon / n as f64, device.clone()))
            .collect();
        let schedule = Schedule::from_pairs(pairs, init.clone())?;
        l1_series.push((n, biprob_table_with(system, &schedule, limits)?.l1_norm()));
    }
    let mut max_refinement_drop = f64::NEG_INFINITY;
    for &(n, a) in &l1_series {
        for &(m, b) in &l1_series {
            if m > n && m % n == 0 {
                max_refinement_drop = max_refinement_drop.max(a - b);
            }
        }
    }
    let all_below_bound = l1_series.iter().all(|&(_, l1)| l1 <= bound);
    Ok(UniformBound {
        l1_series,
        bound,
        sup_rate,
        max_refinement_drop,
        all_below_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_x, pauli_y, pauli_z, I};
    use crate::quantum::{device_from_hermitian, SystemSpec};
    use proptest::prelude::*;

    fn dev(name: &str, m: &CMatrix) -> Device {
        device_from_hermitian(name, m, None).unwrap()
    }

    fn up() -> State {
        State::basis(2, 0, 0.0).unwrap()
    }

    fn xz_schedule() -> Schedule {
        Schedule::from_pairs(
            vec![(1.0, dev("X", &pauli_x())), (2.0, dev("Z", &pauli_z()))],
            up(),
        )
        .unwrap()
    }

    #[test]
    fn single_entry_causality() {
        let sys = SystemSpec::new(pauli_x() * c(0.7, 0.0)).unwrap();
        let s = Schedule::from_pairs(vec![(0.4, dev("Z", &pauli_z()))], up()).unwrap();
        let q = biprob(&sys, &s, &BiSequence::new(vec![0], vec![1])).unwrap();
        assert!(q.norm() < 1e-15);
    }

    #[test]
    fn xz_off_diagonal_quarter() {
        let sys = SystemSpec::free(2).unwrap();
        let s = xz_schedule();
        let bi = BiSequence::from_labels(&s, &["1", "1"], &["-1", "1"]).unwrap();
        let q = biprob(&sys, &s, &bi).unwrap();
        assert!((q - c(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn yx_imaginary_quarter() {
        let sys = SystemSpec::free(2).unwrap();
        let s = Schedule::from_pairs(
            vec![(1.0, dev("Y", &pauli_y())), (2.0, dev("X", &pauli_x()))],
            up(),
        )
        .unwrap();
        let bi = BiSequence::from_labels(&s, &["1", "1"], &["-1", "1"]).unwrap();
        let q = biprob(&sys, &s, &bi).unwrap();
        assert!((q - I * 0.25).norm() < 1e-15, "{q}");
    }

    #[test]
    fn mixed_qubit_single_z() {
        let sys = SystemSpec::free(2).unwrap();
        let s = Schedule::from_pairs(vec![(1.0, dev("Z", &pauli_z()))], State::maximally_mixed(2, 0.0).unwrap()).unwrap();
        let t = biprob_table(&sys, &s).unwrap();
        assert!(t.diagonal().iter().all(|p| (p - 0.5).abs() < 1e-15));
        assert!(t.at(0, 1).norm() < 1e-15 && t.at(1, 0).norm() < 1e-15);
    }

    #[test]
    fn xz_table_shape() {
        let t = biprob_table(&SystemSpec::free(2).unwrap(), &xz_schedule()).unwrap();
        assert_eq!(t.values().len(), 16);
        let diag: f64 = t.diagonal().iter().sum();
        assert!((diag - 1.0).abs() < 1e-15);
        assert!(t.diagonal().iter().all(|p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn marginalize_to_scalar() {
        let sys = SystemSpec::new(pauli_y()).unwrap();
        let s = Schedule::from_pairs(vec![(1.0, dev("Z", &pauli_z()))], up()).unwrap();
        let t = biprob_table(&sys, &s).unwrap().marginalize_pair(0).unwrap();
        assert_eq!(t.size(), 1);
        assert!((t.at(0, 0) - c(1.0, 0.0)).norm() < 1e-14);
        assert!(t.marginalize_pair(0).is_err());
    }

    #[test]
    fn code_roundtrip() {
        let q = dev("N", &linalg::diag(&[0.0, 1.0, 2.0]));
        let s = Schedule::from_pairs(
            vec![(1.0, q.clone().renamed("A")), (2.0, q)],
            State::basis(3, 0, 0.0).unwrap(),
        )
        .unwrap();
        let t = biprob_table(&SystemSpec::free(3).unwrap(), &s).unwrap();
        for code in 0..t.size() {
            assert_eq!(t.encode(&t.decode(code)), code);
        }
        assert_eq!(t.decode(5), vec![1, 2]);
    }

    #[test]
    fn size_guard() {
        let z = dev("Z", &pauli_z());
        let pairs = (1..=12).map(|k| (k as f64, z.clone())).collect();
        let s = Schedule::from_pairs(pairs, up()).unwrap();
        let sys = SystemSpec::free(2).unwrap();
        assert!(matches!(
            biprob_table_with(&sys, &s, &Limits::default()),
            Err(Error::TableTooLarge { entries: 16_777_216, .. })
        ));
        assert!(biprob_table_with(&sys, &s, &Limits { max_table: Some(100) }).is_err());
    }

    #[test]
    fn l1_is_one_for_commuting() {
        let h = linalg::diag(&[0.3, -1.2, 0.5]);
        let sys = SystemSpec::new(h.clone()).unwrap();
        let d = dev("H", &h);
        let rho = State::new(linalg::from_real_rows(&[&[0.5, 0.2, 0.0], &[0.2, 0.3, 0.1], &[0.0, 0.1, 0.2]]), 0.0).unwrap();
        let s = Schedule::from_pairs(vec![(0.5, d.clone()), (1.5, d.clone()), (2.0, d)], rho).unwrap();
        let r = property_report(&sys, &s).unwrap();
        assert!((r.l1_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gudder_single_fine_entry_is_diagonal() {
        let sys = SystemSpec::new(pauli_x() * c(0.3, 0.0)).unwrap();
        let s = Schedule::from_pairs(vec![(1.0, dev("Z", &pauli_z()))], up()).unwrap();
        let g = gudder_metric(&biprob_table(&sys, &s).unwrap());
        assert!(g.metric[(0, 1)].norm() < 1e-15);
        let p_up = (0.3f64).cos().powi(2);
        assert!((g.metric[(0, 0)].re - p_up).abs() < 1e-14);
        assert!((g.trace() - c(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(g.basis_labels, vec![vec!["1".to_string()], vec!["-1".to_string()]]);
    }

    #[test]
    fn uniform_bound_frozen_and_rabi() {
        let z = dev("Z", &pauli_z());
        let free = SystemSpec::free(2).unwrap();
        let r = uniform_bound_check(&free, free.hamiltonian(), &z, &up(), 1.0, 4).unwrap();
        assert!((r.bound - 4.0).abs() < 1e-15);
        assert!(r.l1_series.iter().all(|(_, l1)| (l1 - 1.0).abs() < 1e-12));

        let h = pauli_x() * c(0.5, 0.0);
        let rabi = SystemSpec::new(h.clone()).unwrap();
        let r = uniform_bound_check(&rabi, &h, &z, &up(), 1.0, 6).unwrap();
        assert!((r.sup_rate - 0.5).abs() < 1e-15);
        assert!((r.bound - 4.0 * 2f64.exp()).abs() < 1e-12);
        assert!(r.all_below_bound);
        assert!(r.max_refinement_drop <= 1e-10);
    }

    fn random_hermitian(d: usize, xs: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = c(xs[k], xs[k + 1]);
                k += 2;
            }
        }
        (&m + m.adjoint()) * c(0.5, 0.0)
    }

    fn random_state(d: usize, xs: &[f64]) -> State {
        let a = random_hermitian(d, xs);
        let rho = &a * a.adjoint();
        let tr = rho.trace();
        State::new(rho / tr, 0.0).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn axioms_hold(
            d in 2usize..=3,
            n in 1usize..=3,
            xs in proptest::collection::vec(-1.0f64..1.0, 4 * 2 * 16),
            times in proptest::collection::vec(0.0f64..2.0, 3),
        ) {
            let h = random_hermitian(d, &xs[0..]);
            let sys = SystemSpec::new(h).unwrap();
            let init = random_state(d, &xs[32..]);
            let obs = random_hermitian(d, &xs[64..]);
            let dev = device_from_hermitian("F", &obs, None).unwrap();
            let obs2 = random_hermitian(d, &xs[96..]);
            let dev2 = device_from_hermitian("G", &obs2, None).unwrap();
            let mut ts: Vec<f64> = times[..n].to_vec();
            ts.sort_by(f64::total_cmp);
            let pairs = ts.iter().enumerate()
                .map(|(k, &t)| (t, if k % 2 == 0 { dev.clone() } else { dev2.clone() }))
                .collect();
            let s = Schedule::from_pairs(pairs, init).unwrap();
            let r = property_report(&sys, &s).unwrap();
            prop_assert!(r.normalization_error <= 1e-8);
            prop_assert!(r.max_biconsistency_error <= 1e-10);
            prop_assert!(r.max_causality_violation <= 1e-12);
            prop_assert!(r.max_hermitianity_error <= 1e-10);
            prop_assert!(r.min_gram_eigenvalue >= -1e-10);
            prop_assert!(r.max_diagonal_negativity <= 1e-10);
            prop_assert!(r.l1_norm >= 1.0 - 1e-10);

            let t = biprob_table(&sys, &s).unwrap();
            let diag = t.diagonal();
            for p in 0..t.size() {
                for m in 0..t.size() {
                    prop_assert!(t.at(p, m).norm_sqr() <= diag[p] * diag[m] + 1e-12);
                }
            }
            let g = gudder_metric(&t);
            prop_assert!((g.trace() - c(1.0, 0.0)).norm() <= 1e-10);
            if n == 1 {
                prop_assert!(g.rank <= d);
            }
        }
    }
}
