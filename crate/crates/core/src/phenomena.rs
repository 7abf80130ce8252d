//! Phenomenological laws as executable checks: Bayes conditionals,
//! Markovianity, initialization metrics, Zeno scans, uncertainty matrices
//! and stationarity.

use rayon::prelude::*;
use serde::Serialize;

use crate::biprob::{self, Chain, Schedule};
use crate::coarse::{self, Resolution};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::quantum::{self, Device, Dynamics, State, SystemSpec};

/// Conditioning events below this probability are treated as null.
pub const NULL_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct InitWeight {
    pub device: Device,
    pub outcome: usize,
    pub weight: f64,
}

/// Probabilities that the experiment was initialized with each outcome of
/// perfectly fine-grained devices at `time`.
#[derive(Debug, Clone)]
pub struct InitSpec {
    weights: Vec<InitWeight>,
    time: f64,
}

impl InitSpec {
    pub fn new(weights: Vec<InitWeight>, time: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidState("no initialization weights".into()));
        }
        let mut total = 0.0;
        for w in &weights {
            if !(w.weight >= 0.0) {
                return Err(Error::InvalidState(format!("negative weight {}", w.weight)));
            }
            if !w.device.is_fine_grained() {
                return Err(Error::NotFineGrained(w.device.name().to_string()));
            }
            w.device.check_index(w.outcome)?;
            total += w.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("weights sum to {total}")));
        }
        Ok(InitSpec { weights, time })
    }

    /// All weight on one outcome.
    pub fn sharp(device: &Device, outcome: usize, time: f64) -> Result<Self> {
        InitSpec::new(
            vec![InitWeight {
                device: device.clone(),
                outcome,
                weight: 1.0,
            }],
            time,
        )
    }

    pub fn uniform(device: &Device, time: f64) -> Result<Self> {
        let n = device.outcome_count();
        InitSpec::new(
            (0..n)
                .map(|k| InitWeight {
                    device: device.clone(),
                    outcome: k,
                    weight: 1.0 / n as f64,
                })
                .collect(),
            time,
        )
    }

    pub fn weights(&self) -> &[InitWeight] {
        &self.weights
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// `ρ = Σ p(K,k) P^K_{t₀}(k)` with Heisenberg-picture projectors.
pub fn init_metric<D: Dynamics + ?Sized>(init: &InitSpec, system: &D) -> Result<State> {
    let d = system.dim();
    let mut rho = CMatrix::zeros(d, d);
    for w in &init.weights {
        let h = quantum::heisenberg_projectors(&w.device, system, init.time)?;
        rho += h.projector(w.outcome) * c(w.weight, 0.0);
    }
    State::new(rho, init.time)
}

/// `P(given, query) / P(given)`, with `query` the outcome at entry `given.len()`.
pub fn conditional_prob<D: Dynamics + ?Sized>(
    system: &D,
    schedule: &Schedule,
    given: &[usize],
    query: usize,
) -> Result<f64> {
    let m = given.len();
    if m >= schedule.len() {
        return Err(Error::IndexOutOfRange {
            index: m,
            len: schedule.len(),
        });
    }
    let prefix = Schedule::new(schedule.entries()[..m].to_vec(), schedule.init().clone())?;
    let extended = Schedule::new(schedule.entries()[..=m].to_vec(), schedule.init().clone())?;
    let p_given = biprob::sequence_probability(system, &prefix, given)?;
    if p_given <= NULL_PROBABILITY {
        return Err(Error::NullConditioning { probability: p_given });
    }
    let mut seq = given.to_vec();
    seq.push(query);
    Ok(biprob::sequence_probability(system, &extended, &seq)? / p_given)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovReport {
    /// `max |P(k_n..k_1) − P(k_1) ∏ P(k_j | k_{j−1})|` over included sequences.
    pub delta: f64,
    pub sequences: usize,
    /// Sequences skipped because a conditioning event had null probability.
    pub excluded: usize,
}

/// Markov factorization check for a perfectly fine-grained device deployed
/// at `times`, conditionals taken from two-time experiments.
pub fn markov_delta<D: Dynamics + ?Sized>(system: &D, device: &Device, times: &[f64], init: &InitSpec) -> Result<MarkovReport> {
    if !device.is_fine_grained() {
        return Err(Error::NotFineGrained(device.name().to_string()));
    }
    markov_core(system, device, times, &init_metric(init, system)?)
}

/// The same comparison for a coarse-grained device, where factorization
/// generally fails.
pub fn coarse_markov_delta<D: Dynamics + ?Sized>(
    system: &D,
    device: &Device,
    res: &Resolution,
    times: &[f64],
    init: &InitSpec,
) -> Result<MarkovReport> {
    let coarse = coarse::coarse_device(device, res)?;
    markov_core(system, &coarse, times, &init_metric(init, system)?)
}

fn markov_core<D: Dynamics + ?Sized>(system: &D, device: &Device, times: &[f64], rho: &State) -> Result<MarkovReport> {
    if times.is_empty() {
        return Err(Error::InvalidSchedule("no measurement times".into()));
    }
    let schedule = Schedule::from_pairs(times.iter().map(|&t| (t, device.clone())).collect(), rho.clone())?;
    let full = Chain::new(system, &schedule)?;
    let r = device.outcome_count();

    // Two-time experiments for each neighbouring pair of times.
    let mut singles = Vec::with_capacity(times.len());
    let mut pairs = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        let one = Schedule::from_pairs(vec![(times[j], device.clone())], rho.clone())?;
        let chain = Chain::new(system, &one)?;
        singles.push((0..r).map(|k| chain.prob(&[k])).collect::<Vec<_>>());
        if j > 0 {
            let two = Schedule::from_pairs(vec![(times[j - 1], device.clone()), (times[j], device.clone())], rho.clone())?;
            let chain = Chain::new(system, &two)?;
            pairs.push(
                (0..r)
                    .map(|a| (0..r).map(|b| chain.prob(&[a, b])).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            );
        }
    }

    let mut report = MarkovReport {
        delta: 0.0,
        sequences: 0,
        excluded: 0,
    };
    for seq in biprob::all_sequences(&schedule.radices()) {
        report.sequences += 1;
        let mut factorized = singles[0][seq[0]];
        let mut null = false;
        for j in 1..seq.len() {
            let p_prev = singles[j - 1][seq[j - 1]];
            if p_prev <= NULL_PROBABILITY {
                null = true;
                break;
            }
            factorized *= pairs[j - 1][seq[j - 1]][seq[j]] / p_prev;
        }
        if null {
            report.excluded += 1;
            continue;
        }
        report.delta = report.delta.max((full.prob(&seq) - factorized).abs());
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZenoSeries {
    pub n_values: Vec<usize>,
    pub survival: Vec<f64>,
    /// `v(k₀, 0)`.
    pub rate: f64,
}

fn rank_one(device: &Device, k: usize) -> Result<CVector> {
    device.check_index(k)?;
    if device.rank(k) != 1 {
        return Err(Error::InvalidArgument(format!(
            "outcome `{}` of `{}` has a degenerate projector",
            device.outcomes()[k].label,
            device.name()
        )));
    }
    let vals = linalg::eigh(device.projector(k));
    Ok(vals.1.column(device.dim() - 1).into_owned())
}

/// Survival of outcome `k0` under `n` equispaced measurements on `[0, T]`:
/// `∏_j tr[P_{s_{j+1}}(k₀) P_{s_j}(k₀)]` with `s_j = jT/n`.
pub fn zeno_scan(system: &SystemSpec, device: &Device, k0: usize, horizon: f64, n_list: &[usize]) -> Result<ZenoSeries> {
    rank_one(device, k0)?;
    if n_list.contains(&0) {
        return Err(Error::InvalidArgument("step counts must be positive".into()));
    }
    let survival = n_list
        .par_iter()
        .map(|&n| {
            let projector = |j: usize| -> Result<CMatrix> {
                let s = j as f64 * horizon / n as f64;
                Ok(quantum::heisenberg_projectors(device, system, s)?.projector(k0).clone())
            };
            let mut prev = projector(0)?;
            let mut acc = 1.0;
            for j in 1..=n {
                let next = projector(j)?;
                acc *= linalg::trace_product(&next, &prev).re;
                prev = next;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ZenoSeries {
        n_values: n_list.to_vec(),
        survival,
        rate: zeno_rate(system, device, k0, 0.0)?.v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZenoRate {
    /// From the energy variance.
    pub v: f64,
    /// From finite differences of the one-step survival.
    pub v_finite_difference: f64,
    /// Estimated coefficient of the term linear in the step.
    pub linear_term: f64,
}

pub const ZENO_STEPS: (f64, f64) = (1e-3, 2e-3);

/// Short-time survival rate `v(k, t)` with `1 − v²Δt²` the leading decay.
pub fn zeno_rate(system: &SystemSpec, device: &Device, k: usize, t: f64) -> Result<ZenoRate> {
    let basis = rank_one(device, k)?;
    let psi = system.propagator(t, 0.0).adjoint() * basis;
    let v = quantum::energy_variance(system.hamiltonian(), &psi).sqrt();

    // 1 − S(h) = Σ_{a,b} w_a w_b 2 sin²((E_a − E_b)h/2), free of cancellation.
    let weights: Vec<f64> = (0..system.dim())
        .map(|a| system.eigenvectors().column(a).dotc(&psi).norm_sqr())
        .collect();
    let energies = system.energies();
    let loss = |h: f64| {
        let mut acc = 0.0;
        for (a, wa) in weights.iter().enumerate() {
            for (b, wb) in weights.iter().enumerate() {
                acc += wa * wb * 2.0 * ((energies[a] - energies[b]) * h / 2.0).sin().powi(2);
            }
        }
        acc
    };
    let (h1, h2) = ZENO_STEPS;
    let g1 = loss(h1);
    let g2 = loss(h2);
    // 1 − S(h) = v²h² + O(h⁴): eliminate the h⁴ term between h and 2h.
    let v2 = (4.0 * g1 / (h1 * h1) - g2 / (h2 * h2)) / 3.0;
    let v_finite_difference = v2.max(0.0).sqrt();
    let linear_term = -(2.0 * g1 / h1 - g2 / h2);

    if (v_finite_difference - v).abs() > 1e-4 * v + 1e-6 {
        return Err(Error::ContractViolation {
            what: "zeno rate finite-difference agreement".into(),
            value: (v_finite_difference - v).abs(),
            tolerance: 1e-4 * v + 1e-6,
        });
    }
    if linear_term.abs() > 1e-6 {
        return Err(Error::ContractViolation {
            what: "linear survival term".into(),
            value: linear_term.abs(),
            tolerance: 1e-6,
        });
    }
    Ok(ZenoRate {
        v,
        v_finite_difference,
        linear_term,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyMatrix {
    /// `c[k][l] = tr[P^L_t(l) P^K_t(k)]`.
    pub c: Vec<Vec<f64>>,
    /// Largest change of any entry between `t` and `t + 1`.
    pub time_variation: f64,
    /// Largest deviation of a row or column sum from 1.
    pub stochasticity_error: f64,
}

fn uncertainty_at(system: &SystemSpec, k_dev: &Device, l_dev: &Device, t: f64) -> Result<Vec<Vec<f64>>> {
    let k = quantum::heisenberg_projectors(k_dev, system, t)?;
    let l = quantum::heisenberg_projectors(l_dev, system, t)?;
    Ok(k.projectors()
        .iter()
        .map(|pk| l.projectors().iter().map(|pl| linalg::trace_product(pl, pk).re).collect())
        .collect())
}

pub fn uncertainty_matrix(system: &SystemSpec, k_dev: &Device, l_dev: &Device, t: f64) -> Result<UncertaintyMatrix> {
    for d in [k_dev, l_dev] {
        if !d.is_fine_grained() {
            return Err(Error::NotFineGrained(d.name().to_string()));
        }
    }
    let c = uncertainty_at(system, k_dev, l_dev, t)?;
    let later = uncertainty_at(system, k_dev, l_dev, t + 1.0)?;
    let time_variation = c
        .iter()
        .flatten()
        .zip(later.iter().flatten())
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let mut stochasticity_error = 0.0f64;
    for row in &c {
        stochasticity_error = stochasticity_error.max((row.iter().sum::<f64>() - 1.0).abs());
    }
    for l in 0..l_dev.outcome_count() {
        let col: f64 = c.iter().map(|row| row[l]).sum();
        stochasticity_error = stochasticity_error.max((col - 1.0).abs());
    }
    Ok(UncertaintyMatrix {
        c,
        time_variation,
        stochasticity_error,
    })
}

/// Permutation `σ` with `c[k][σ(k)] = 1` for all `k`, if `c` is a
/// permutation matrix within `tol`.
pub fn permutation_of(c: &[Vec<f64>], tol: f64) -> Option<Vec<usize>> {
    let n = c.len();
    let mut perm = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for row in c {
        if row.len() != n {
            return None;
        }
        let hit = (0..n).find(|&l| !used[l] && (row[l] - 1.0).abs() <= tol)?;
        if (0..n).any(|l| l != hit && row[l].abs() > tol) {
            return None;
        }
        used[hit] = true;
        perm.push(hit);
    }
    Some(perm)
}

/// Largest difference in sequence probabilities between a schedule and the
/// same experiment shifted by `shift` in time, with the initial state
/// carried along so that it is prepared identically at `t₀ + shift`.
pub fn stationarity_delta<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule, shift: f64) -> Result<f64> {
    let t0 = schedule.init().time_tag();
    let u0 = system.propagator(t0, 0.0);
    let u1 = system.propagator(t0 + shift, 0.0);
    let prepared = &u0 * schedule.init().density() * u0.adjoint();
    let shifted_rho = u1.adjoint() * prepared * &u1;
    let shifted_rho = (&shifted_rho + shifted_rho.adjoint()) * c(0.5, 0.0);
    let pairs = schedule
        .entries()
        .iter()
        .map(|e| (e.time + shift, e.device.clone()))
        .collect();
    let shifted = Schedule::from_pairs(pairs, State::new(shifted_rho, t0 + shift)?)?;

    let a = Chain::new(system, schedule)?;
    let b = Chain::new(system, &shifted)?;
    Ok(biprob::all_sequences(&schedule.radices())
        .iter()
        .map(|s| (a.prob(s) - b.prob(s)).abs())
        .fold(0.0, f64::max))
}
