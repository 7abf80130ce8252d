//! Monte-Carlo sequential measurements with the Born rule and collapse,
//! and the replay from frequencies to interference terms and uncertainty
//! matrices.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::biprob::{self, Schedule};
use crate::coarse::CoarseSchedule;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::quantum::{self, Device, Dynamics, State};

/// Branches whose probability falls below this are never drawn.
const PROBABILITY_FLOOR: f64 = 1e-300;
/// A sampled sequence with exact probability at or below this falsifies the sampler.
const IMPOSSIBLE: f64 = 1e-15;
const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRun {
    pub schedule_digest: String,
    pub seed: u64,
    pub n_samples: usize,
    /// Outcome codes per sequence; absent sequences were never observed.
    #[serde(serialize_with = "serialize_counts")]
    pub counts: BTreeMap<Vec<usize>, u64>,
    /// Outcome labels per schedule entry.
    pub labels: Vec<Vec<String>>,
}

fn serialize_counts<S: serde::Serializer>(counts: &BTreeMap<Vec<usize>, u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Cell<'a> {
        sequence: &'a [usize],
        count: u64,
    }
    s.collect_seq(counts.iter().map(|(k, &v)| Cell { sequence: k, count: v }))
}

impl SampleRun {
    pub fn count(&self, seq: &[usize]) -> u64 {
        self.counts.get(seq).copied().unwrap_or(0)
    }

    pub fn radices(&self) -> Vec<usize> {
        self.labels.iter().map(Vec::len).collect()
    }
}

/// Schrödinger-picture step data: the propagator into each entry's time
/// and the entry's projectors.
struct Protocol {
    steps: Vec<CMatrix>,
    projectors: Vec<Vec<CMatrix>>,
    start: CMatrix,
}

impl Protocol {
    fn new<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule) -> Result<Self> {
        if system.dim() != schedule.dim() {
            return Err(Error::DimensionMismatch {
                expected: system.dim(),
                found: schedule.dim(),
            });
        }
        let init = schedule.init();
        let u0 = system.propagator(init.time_tag(), 0.0);
        let start = &u0 * init.density() * u0.adjoint();
        let mut prev = init.time_tag();
        let mut steps = Vec::with_capacity(schedule.len());
        for e in schedule.entries() {
            steps.push(system.propagator(e.time, prev));
            prev = e.time;
        }
        Ok(Protocol {
            steps,
            projectors: schedule.entries().iter().map(|e| e.device.projectors().to_vec()).collect(),
            start,
        })
    }

    fn trial(&self, rng: &mut ChaCha8Rng, seq: &mut [usize]) {
        let mut rho = self.start.clone();
        for (j, (u, ps)) in self.steps.iter().zip(&self.projectors).enumerate() {
            rho = u * rho * u.adjoint();
            let branches: Vec<(CMatrix, f64)> = ps
                .iter()
                .map(|p| {
                    let post = p * &rho * p;
                    let w = post.trace().re;
                    (post, w)
                })
                .collect();
            let total: f64 = branches.iter().map(|b| b.1.max(0.0)).sum();
            let mut u01 = rng.gen::<f64>() * total;
            let mut pick = None;
            for (k, (_, w)) in branches.iter().enumerate() {
                if *w <= PROBABILITY_FLOOR {
                    continue;
                }
                pick = Some(k);
                if u01 < *w {
                    break;
                }
                u01 -= w;
            }
            let k = pick.expect("some branch has positive probability");
            seq[j] = k;
            let (post, w) = &branches[k];
            rho = post / linalg::c(*w, 0.0);
        }
    }
}

/// Chained Born-collapse probability of a sequence, evolving the state in
/// the Schrödinger picture between entries.
pub fn born_chain_probability<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule, seq: &[usize]) -> Result<f64> {
    schedule.check_sequence(seq)?;
    let protocol = Protocol::new(system, schedule)?;
    let mut rho = protocol.start.clone();
    let mut prob = 1.0;
    for ((u, ps), &k) in protocol.steps.iter().zip(&protocol.projectors).zip(seq) {
        rho = u * rho * u.adjoint();
        let post = &ps[k] * &rho * &ps[k];
        let w = post.trace().re;
        if w <= PROBABILITY_FLOOR {
            return Ok(0.0);
        }
        prob *= w;
        rho = post / linalg::c(w, 0.0);
    }
    Ok(prob)
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Samples `n_samples` independent sequential runs of the schedule. Trial
/// `i` draws from its own stream keyed by `(seed, i)`, so counts do not
/// depend on how trials are spread over workers.
pub fn sample_sequences<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule, n_samples: usize, seed: u64) -> Result<SampleRun> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let protocol = Protocol::new(system, schedule)?;
    let n = schedule.len();
    let chunks = n_samples.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut local = BTreeMap::new();
            let mut seq = vec![0; n];
            for trial in c * CHUNK..((c + 1) * CHUNK).min(n_samples) {
                protocol.trial(&mut trial_rng(seed, trial as u64), &mut seq);
                *local.entry(seq.clone()).or_insert(0u64) += 1;
            }
            local
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    for seq in counts.keys() {
        let exact = biprob::sequence_probability(system, schedule, seq)?;
        if exact <= IMPOSSIBLE {
            return Err(Error::ContractViolation {
                what: format!("sampled sequence {seq:?} has exact probability {exact:e}"),
                value: exact,
                tolerance: IMPOSSIBLE,
            });
        }
    }
    Ok(SampleRun {
        schedule_digest: schedule.digest(),
        seed,
        n_samples,
        counts,
        labels: schedule
            .entries()
            .iter()
            .map(|e| e.device.labels().into_iter().map(str::to_string).collect())
            .collect(),
    })
}

/// Same as [`sample_sequences`] inside a pool capped at `threads` workers.
pub fn sample_sequences_with_threads<D: Dynamics + ?Sized>(
    system: &D,
    schedule: &Schedule,
    n_samples: usize,
    seed: u64,
    threads: usize,
) -> Result<SampleRun> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| sample_sequences(system, schedule, n_samples, seed))
}

/// Samples the coarse-grained devices of a coarse schedule.
pub fn sample_coarse<D: Dynamics + ?Sized>(system: &D, schedule: &CoarseSchedule, n_samples: usize, seed: u64) -> Result<SampleRun> {
    sample_sequences(system, &schedule.effective_schedule()?, n_samples, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDist {
    pub n_samples: usize,
    pub radices: Vec<usize>,
    /// Indexed by mixed-radix code, entry 0 most significant.
    pub probabilities: Vec<f64>,
    pub std_errors: Vec<f64>,
}

impl EmpiricalDist {
    pub fn encode(&self, seq: &[usize]) -> Result<usize> {
        if seq.len() != self.radices.len() {
            return Err(Error::SequenceLength {
                expected: self.radices.len(),
                found: seq.len(),
            });
        }
        let mut code = 0;
        for (&k, &r) in seq.iter().zip(&self.radices) {
            if k >= r {
                return Err(Error::IndexOutOfRange { index: k, len: r });
            }
            code = code * r + k;
        }
        Ok(code)
    }

    pub fn probability(&self, seq: &[usize]) -> Result<f64> {
        Ok(self.probabilities[self.encode(seq)?])
    }

    pub fn std_error(&self, seq: &[usize]) -> Result<f64> {
        Ok(self.std_errors[self.encode(seq)?])
    }
}

/// Normalized counts with binomial standard errors `√(p̂(1−p̂)/n)`, over
/// every cell of the schedule.
pub fn empirical_distribution(run: &SampleRun) -> EmpiricalDist {
    let radices = run.radices();
    let cells: usize = radices.iter().product();
    let n = run.n_samples as f64;
    let mut probabilities = vec![0.0; cells];
    for (seq, &count) in &run.counts {
        let code = seq.iter().zip(&radices).fold(0, |acc, (&k, &r)| acc * r + k);
        probabilities[code] = count as f64 / n;
    }
    let std_errors = probabilities.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    EmpiricalDist {
        n_samples: run.n_samples,
        radices,
        probabilities,
        std_errors,
    }
}

/// CSV rows `sequence,count,p,sigma` with the sequence as labels joined by `|`.
pub fn write_sample_csv<W: Write>(run: &SampleRun, out: W) -> Result<()> {
    let dist = empirical_distribution(run);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sequence", "count", "p", "sigma"])?;
    for seq in biprob::all_sequences(&dist.radices) {
        let code = dist.encode(&seq)?;
        let label = seq
            .iter()
            .zip(&run.labels)
            .map(|(&k, l)| l[k].as_str())
            .collect::<Vec<_>>()
            .join("|");
        w.write_record([
            label,
            run.count(&seq).to_string(),
            dist.probabilities[code].to_string(),
            dist.std_errors[code].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|value − exact|` in units of the standard error.
    pub fn deviation(&self, exact: f64) -> f64 {
        let diff = (self.value - exact).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// `½[P(f⁺∨f⁻) − P(f⁺) − P(f⁻)]` from a fine run and an independent run in
/// which the pair was merged by `Resolution::pair` (block 0) at `position`.
/// `fixed` lists the outcomes at every other position.
pub fn reconstruct_interference(
    fine: &EmpiricalDist,
    coarse: &EmpiricalDist,
    position: usize,
    pair: (usize, usize),
    fixed: &[usize],
) -> Result<Estimate> {
    let n = fine.radices.len();
    if position >= n {
        return Err(Error::IndexOutOfRange { index: position, len: n });
    }
    if fixed.len() + 1 != n {
        return Err(Error::SequenceLength {
            expected: n - 1,
            found: fixed.len(),
        });
    }
    if pair.0 == pair.1 {
        return Err(Error::InvalidArgument("interference needs two distinct outcomes".into()));
    }
    let with = |k: usize| {
        let mut s = fixed.to_vec();
        s.insert(position, k);
        s
    };
    let (sp, sm, sc) = (with(pair.0), with(pair.1), with(0));
    let (pp, pm, pc) = (fine.probability(&sp)?, fine.probability(&sm)?, coarse.probability(&sc)?);
    let (ep, em, ec) = (fine.std_error(&sp)?, fine.std_error(&sm)?, coarse.std_error(&sc)?);
    // The two fine cells share one multinomial: cov = −p⁺p⁻/n.
    let var = 0.25 * (ec * ec + ep * ep + em * em - 2.0 * pp * pm / fine.n_samples as f64);
    Ok(Estimate {
        value: 0.5 * (pc - pp - pm),
        std_error: var.max(0.0).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalUncertainty {
    /// `c[k][l]`: frequency of `k` at `t + Δt` given `l` at `t`.
    pub c: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    /// `reversed[l][k]`: frequency of `l` at `t + Δt` given `k` at `t`.
    pub reversed: Vec<Vec<f64>>,
    pub reversed_std_errors: Vec<Vec<f64>>,
    /// Conditioning outcomes never observed, `(device, outcome)`.
    pub excluded: Vec<(String, usize)>,
}

fn conditional_frequencies(run: &SampleRun, first: usize, second: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<usize>) {
    let mut c = vec![vec![0.0; first]; second];
    let mut err = vec![vec![0.0; first]; second];
    let mut excluded = Vec::new();
    for a in 0..first {
        let total: u64 = (0..second).map(|b| run.count(&[a, b])).sum();
        if total == 0 {
            excluded.push(a);
            continue;
        }
        for b in 0..second {
            let p = run.count(&[a, b]) as f64 / total as f64;
            c[b][a] = p;
            err[b][a] = (p * (1.0 - p) / total as f64).sqrt();
        }
    }
    (c, err, excluded)
}

/// Conditional frequencies of `K` at `t + Δt` after `L` at `t`, and of the
/// reversed order, from a maximally mixed preparation at time 0. `Δt = 0`
/// runs the idealized same-time chain.
pub fn estimate_uncertainty<D: Dynamics + ?Sized>(
    system: &D,
    dev_k: &Device,
    dev_l: &Device,
    t: f64,
    dt: f64,
    n_samples: usize,
    seed: u64,
) -> Result<EmpiricalUncertainty> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("Δt must be non-negative, got {dt}")));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t must be non-negative, got {t}")));
    }
    let init = State::maximally_mixed(system.dim(), 0.0)?;
    let forward = Schedule::from_pairs(vec![(t, dev_l.clone()), (t + dt, dev_k.clone())], init.clone())?;
    let backward = Schedule::from_pairs(vec![(t, dev_k.clone()), (t + dt, dev_l.clone())], init)?;
    let run_f = sample_sequences(system, &forward, n_samples, seed)?;
    let run_b = sample_sequences(system, &backward, n_samples, seed.wrapping_add(1))?;
    let (nk, nl) = (dev_k.outcome_count(), dev_l.outcome_count());
    let (c, std_errors, ex_l) = conditional_frequencies(&run_f, nl, nk);
    let (reversed, reversed_std_errors, ex_k) = conditional_frequencies(&run_b, nk, nl);
    let mut excluded: Vec<(String, usize)> = ex_l.into_iter().map(|l| (dev_l.name().to_string(), l)).collect();
    excluded.extend(ex_k.into_iter().map(|k| (dev_k.name().to_string(), k)));
    Ok(EmpiricalUncertainty {
        c,
        std_errors,
        reversed,
        reversed_std_errors,
        excluded,
    })
}

/// Exact finite-`Δt` conditional `P(k at t+Δt | l at t)` for the same
/// maximally mixed preparation, `None` where the conditioning outcome is null.
pub fn exact_conditional<D: Dynamics + ?Sized>(system: &D, dev_k: &Device, dev_l: &Device, t: f64, dt: f64) -> Result<Vec<Vec<Option<f64>>>> {
    let init = State::maximally_mixed(system.dim(), 0.0)?;
    let k = quantum::heisenberg_projectors(dev_k, system, t + dt)?;
    let l = quantum::heisenberg_projectors(dev_l, system, t)?;
    let rho = init.density();
    Ok(k
        .projectors()
        .iter()
        .map(|pk| {
            l.projectors()
                .iter()
                .map(|pl| {
                    let pl_rho = linalg::trace_product(pl, rho).re;
                    (pl_rho > 1e-14).then(|| (pk * pl * rho * pl).trace().re / pl_rho)
                })
                .collect()
        })
        .collect())
}
