//! Resolutions, quantum and faux coarse-grained readouts, interference terms
//! and the pair-wise recurrence.

use std::collections::HashMap;

use serde::Serialize;

use crate::biprob::{self, Chain, Schedule, ScheduleEntry};
use crate::error::{ensure, Error, Result};
use crate::linalg::CMatrix;
use crate::quantum::{Device, Dynamics, Outcome, State};

/// Largest block the recurrence will expand.
pub const MAX_BLOCK: usize = 12;

/// A partition of a device's outcomes into labelled blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    device: String,
    base_outcomes: Vec<String>,
    blocks: Vec<Vec<usize>>,
    block_labels: Vec<String>,
}

impl Resolution {
    /// `blocks` hold outcome indices of `device`.
    pub fn new(device: &Device, blocks: Vec<Vec<usize>>, block_labels: Vec<String>) -> Result<Self> {
        let n = device.outcome_count();
        if blocks.is_empty() {
            return Err(Error::InvalidResolution("at least one block is required".into()));
        }
        if blocks.len() != block_labels.len() {
            return Err(Error::InvalidResolution(format!(
                "{} blocks but {} labels",
                blocks.len(),
                block_labels.len()
            )));
        }
        let mut seen = vec![false; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidResolution(format!("block {b} is empty")));
            }
            for &k in block {
                device.check_index(k)?;
                if std::mem::replace(&mut seen[k], true) {
                    return Err(Error::InvalidResolution(format!(
                        "outcome `{}` appears in more than one block",
                        device.outcomes()[k].label
                    )));
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidResolution(format!(
                "outcome `{}` is not covered",
                device.outcomes()[k].label
            )));
        }
        for (i, l) in block_labels.iter().enumerate() {
            if block_labels[..i].contains(l) {
                return Err(Error::InvalidResolution(format!("duplicate block label `{l}`")));
            }
        }
        Ok(Resolution {
            device: device.name().to_string(),
            base_outcomes: device.labels().into_iter().map(String::from).collect(),
            blocks,
            block_labels,
        })
    }

    pub fn from_labels(device: &Device, blocks: &[&[&str]], block_labels: &[&str]) -> Result<Self> {
        let idx = blocks
            .iter()
            .map(|b| b.iter().map(|l| device.index_of(l)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Resolution::new(device, idx, block_labels.iter().map(|s| s.to_string()).collect())
    }

    /// Blocks labelled by joining member labels with `∨`.
    pub fn with_joined_labels(device: &Device, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let labels = blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|&k| device.outcomes().get(k).map_or("?", |o| o.label.as_str()))
                    .collect::<Vec<_>>()
                    .join("∨")
            })
            .collect();
        Resolution::new(device, blocks, labels)
    }

    pub fn singletons(device: &Device) -> Self {
        Resolution::with_joined_labels(device, (0..device.outcome_count()).map(|k| vec![k]).collect())
            .expect("singletons partition")
    }

    /// One block holding every outcome.
    pub fn full(device: &Device) -> Self {
        Resolution::with_joined_labels(device, vec![(0..device.outcome_count()).collect()])
            .expect("single block partition")
    }

    /// Block 0 is `{a, b}`; every other outcome is a singleton, in order.
    pub fn pair(device: &Device, a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidResolution("pair needs two distinct outcomes".into()));
        }
        device.check_index(a)?;
        device.check_index(b)?;
        let mut blocks = vec![vec![a.min(b), a.max(b)]];
        blocks.extend((0..device.outcome_count()).filter(|&k| k != a && k != b).map(|k| vec![k]));
        Resolution::with_joined_labels(device, blocks)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_labels(&self) -> &[String] {
        &self.block_labels
    }

    pub fn base_outcomes(&self) -> &[String] {
        &self.base_outcomes
    }

    pub fn device_name(&self) -> &str {
        &self.device
    }

    pub fn block_index(&self, label: &str) -> Result<usize> {
        self.block_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownOutcome {
                device: format!("{} (resolved)", self.device),
                label: label.to_string(),
            })
    }

    fn fits(&self, device: &Device) -> bool {
        self.base_outcomes.len() == device.outcome_count()
            && self.base_outcomes.iter().zip(device.outcomes()).all(|(a, o)| *a == o.label)
    }
}

impl Serialize for Resolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let blocks: Vec<Vec<&str>> = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&k| self.base_outcomes[k].as_str()).collect())
            .collect();
        serde_json::json!({
            "device": self.device,
            "blocks": blocks,
            "block_labels": self.block_labels,
        })
        .serialize(s)
    }
}

/// One projector per block, the sum of its members.
pub fn coarse_device(device: &Device, res: &Resolution) -> Result<Device> {
    if !res.fits(device) {
        return Err(Error::InvalidResolution(format!(
            "resolution for `{}` does not match device `{}`",
            res.device,
            device.name()
        )));
    }
    let d = device.dim();
    let projectors = res
        .blocks
        .iter()
        .map(|b| b.iter().fold(CMatrix::zeros(d, d), |acc, &k| acc + device.projector(k)))
        .collect();
    let outcomes = res.block_labels.iter().map(Outcome::labelled).collect();
    Device::new(format!("{}~", device.name()), outcomes, projectors)
}

#[derive(Debug, Clone)]
pub struct CoarseEntry {
    pub time: f64,
    pub device: Device,
    pub resolution: Option<Resolution>,
}

/// A schedule whose entries may carry a resolution. Outcomes at resolved
/// entries are block indices; elsewhere they are fine outcome indices.
#[derive(Debug, Clone)]
pub struct CoarseSchedule {
    fine: Schedule,
    resolutions: Vec<Option<Resolution>>,
}

impl CoarseSchedule {
    pub fn new(entries: Vec<CoarseEntry>, init: State) -> Result<Self> {
        let mut fine = Vec::with_capacity(entries.len());
        let mut resolutions = Vec::with_capacity(entries.len());
        for (k, e) in entries.into_iter().enumerate() {
            if let Some(r) = &e.resolution {
                if !r.fits(&e.device) {
                    return Err(Error::InvalidResolution(format!(
                        "entry {k}: resolution for `{}` does not match device `{}`",
                        r.device,
                        e.device.name()
                    )));
                }
            }
            fine.push(ScheduleEntry {
                time: e.time,
                device: e.device,
            });
            resolutions.push(e.resolution);
        }
        Ok(CoarseSchedule {
            fine: Schedule::new(fine, init)?,
            resolutions,
        })
    }

    /// Every entry unresolved.
    pub fn from_schedule(schedule: Schedule) -> Self {
        let n = schedule.len();
        CoarseSchedule {
            fine: schedule,
            resolutions: vec![None; n],
        }
    }

    pub fn with_resolution(mut self, position: usize, res: Resolution) -> Result<Self> {
        let device = &self
            .fine
            .entries()
            .get(position)
            .ok_or(Error::IndexOutOfRange {
                index: position,
                len: self.resolutions.len(),
            })?
            .device;
        if !res.fits(device) {
            return Err(Error::InvalidResolution(format!(
                "entry {position}: resolution does not match device `{}`",
                device.name()
            )));
        }
        self.resolutions[position] = Some(res);
        Ok(self)
    }

    pub fn fine_schedule(&self) -> &Schedule {
        &self.fine
    }

    pub fn resolutions(&self) -> &[Option<Resolution>] {
        &self.resolutions
    }

    pub fn len(&self) -> usize {
        self.resolutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resolutions.is_empty()
    }

    /// The schedule actually deployed, with coarse devices at resolved entries.
    pub fn effective_schedule(&self) -> Result<Schedule> {
        let entries = self
            .fine
            .entries()
            .iter()
            .zip(&self.resolutions)
            .map(|(e, r)| {
                Ok(ScheduleEntry {
                    time: e.time,
                    device: match r {
                        Some(r) => coarse_device(&e.device, r)?,
                        None => e.device.clone(),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Schedule::new(entries, self.fine.init().clone())
    }

    /// Fine outcome sets selected by a coarse outcome assignment.
    pub fn member_blocks(&self, outcomes: &[usize]) -> Result<Vec<Vec<usize>>> {
        if outcomes.len() != self.len() {
            return Err(Error::SequenceLength {
                expected: self.len(),
                found: outcomes.len(),
            });
        }
        outcomes
            .iter()
            .zip(&self.resolutions)
            .zip(self.fine.entries())
            .map(|((&k, r), e)| match r {
                Some(r) => r.blocks.get(k).cloned().ok_or_else(|| Error::OutcomeOutOfRange {
                    device: format!("{} (resolved)", e.device.name()),
                    index: k,
                    count: r.blocks.len(),
                }),
                None => {
                    e.device.check_index(k)?;
                    Ok(vec![k])
                }
            })
            .collect()
    }

    /// Maps per-entry labels (block labels at resolved entries) to indices.
    pub fn indices_of(&self, labels: &[&str]) -> Result<Vec<usize>> {
        if labels.len() != self.len() {
            return Err(Error::SequenceLength {
                expected: self.len(),
                found: labels.len(),
            });
        }
        labels
            .iter()
            .zip(&self.resolutions)
            .zip(self.fine.entries())
            .map(|((l, r), e)| match r {
                Some(r) => r.block_index(l),
                None => e.device.index_of(l),
            })
            .collect()
    }
}

fn product(blocks: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(blocks.len())];
    for b in blocks {
        out = out
            .into_iter()
            .flat_map(|s| {
                b.iter().map(move |&k| {
                    let mut t = s.clone();
                    t.push(k);
                    t
                })
            })
            .collect();
    }
    out
}

/// Probability of a coarse readout on a proper coarse-grained device.
pub fn quantum_coarse_prob<D: Dynamics + ?Sized>(system: &D, cs: &CoarseSchedule, outcomes: &[usize]) -> Result<f64> {
    let blocks = cs.member_blocks(outcomes)?;
    Ok(Chain::new(system, &cs.fine)?.prob_blocks(&blocks))
}

/// Fine readout followed by classical merging of the block members.
pub fn faux_coarse_prob<D: Dynamics + ?Sized>(system: &D, cs: &CoarseSchedule, outcomes: &[usize]) -> Result<f64> {
    let blocks = cs.member_blocks(outcomes)?;
    let chain = Chain::new(system, &cs.fine)?;
    Ok(product(&blocks).iter().map(|s| chain.prob(s)).sum())
}

/// `Σ_{p ≠ m} Re Q(p, m)` over fine sequences inside the selected blocks:
/// the amount by which the quantum coarse value exceeds the faux one.
pub fn cross_term_sum<D: Dynamics + ?Sized>(system: &D, cs: &CoarseSchedule, outcomes: &[usize]) -> Result<f64> {
    let blocks = cs.member_blocks(outcomes)?;
    let chain = Chain::new(system, &cs.fine)?;
    let seqs = product(&blocks);
    let mut acc = 0.0;
    for (i, p) in seqs.iter().enumerate() {
        for m in &seqs[i + 1..] {
            acc += 2.0 * chain.q(p, m).re;
        }
    }
    Ok(acc)
}

/// Both routes to one interference term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferenceTerm {
    /// `Re Q` of the bi-sequence differing only at the chosen position.
    pub re_q: f64,
    pub im_q: f64,
    /// `½[P(f⁺∨f⁻) − P(f⁺) − P(f⁻)]`.
    pub phenomenological: f64,
}

/// Interference between `pair.0` and `pair.1` at `position`, all other
/// entries fixed to `fixed` (length `n − 1`, in schedule order).
pub fn interference_term<D: Dynamics + ?Sized>(
    system: &D,
    schedule: &Schedule,
    position: usize,
    pair: (usize, usize),
    fixed: &[usize],
) -> Result<InterferenceTerm> {
    let n = schedule.len();
    if position >= n {
        return Err(Error::IndexOutOfRange { index: position, len: n });
    }
    if fixed.len() + 1 != n {
        return Err(Error::SequenceLength {
            expected: n.saturating_sub(1),
            found: fixed.len(),
        });
    }
    if pair.0 == pair.1 {
        return Err(Error::InvalidArgument(
            "interference needs two distinct outcomes at the position".into(),
        ));
    }
    let with = |k: usize| {
        let mut s = fixed.to_vec();
        s.insert(position, k);
        s
    };
    let plus = with(pair.0);
    let minus = with(pair.1);
    schedule.check_sequence(&plus)?;
    schedule.check_sequence(&minus)?;

    let chain = Chain::new(system, schedule)?;
    let q = chain.q(&plus, &minus);
    let mut joined: Vec<Vec<usize>> = plus.iter().map(|&k| vec![k]).collect();
    joined[position] = vec![pair.0, pair.1];
    let phenomenological = 0.5 * (chain.prob_blocks(&joined) - chain.prob(&plus) - chain.prob(&minus));
    ensure("interference route disagreement", (q.re - phenomenological).abs(), 1e-10)?;
    Ok(InterferenceTerm {
        re_q: q.re,
        im_q: q.im,
        phenomenological,
    })
}

/// Evaluates the coarse probability through the pair-wise recurrence and
/// checks it against the direct value.
pub fn pairwise_decompose<D: Dynamics + ?Sized>(system: &D, cs: &CoarseSchedule, outcomes: &[usize]) -> Result<f64> {
    let blocks = cs.member_blocks(outcomes)?;
    if let Some(b) = blocks.iter().find(|b| b.len() > MAX_BLOCK) {
        return Err(Error::BlockTooLarge {
            size: b.len(),
            limit: MAX_BLOCK,
        });
    }
    let chain = Chain::new(system, &cs.fine)?;
    let mut memo = HashMap::new();
    let value = recurrence(&chain, blocks.clone(), &mut memo);
    let direct = chain.prob_blocks(&blocks);
    ensure("pair-wise recurrence mismatch", (value - direct).abs(), 1e-9)?;
    Ok(value)
}

fn recurrence(chain: &Chain, blocks: Vec<Vec<usize>>, memo: &mut HashMap<Vec<Vec<usize>>, f64>) -> f64 {
    if let Some(&v) = memo.get(&blocks) {
        return v;
    }
    let last = blocks.len().saturating_sub(1);
    let target = blocks
        .iter()
        .enumerate()
        .find(|(j, b)| b.len() > 2 || (*j == last && b.len() > 1));
    let value = match target {
        None => chain.prob_blocks(&blocks),
        Some((j, block)) => {
            let block = block.clone();
            let with = |sub: Vec<usize>| {
                let mut b = blocks.clone();
                b[j] = sub;
                b
            };
            let singles: Vec<f64> = block.iter().map(|&f| recurrence(chain, with(vec![f]), memo)).collect();
            let mut acc: f64 = singles.iter().sum();
            // The latest readout never interferes, so only interior entries
            // pick up pair terms.
            if j != last {
                for a in 0..block.len() {
                    for b in a + 1..block.len() {
                        let joint = recurrence(chain, with(vec![block[a], block[b]]), memo);
                        acc += joint - singles[a] - singles[b];
                    }
                }
            }
            acc
        }
    };
    memo.insert(blocks, value);
    value
}

/// Largest difference between inserting a device that resolves nothing at
/// `position` and deleting that entry, over all remaining outcomes.
pub fn extreme_coarse_delta<D: Dynamics + ?Sized>(system: &D, schedule: &Schedule, position: usize) -> Result<f64> {
    let deleted = schedule.without(position)?;
    let full = Resolution::full(&schedule.entries()[position].device);
    let cs = CoarseSchedule::from_schedule(schedule.clone()).with_resolution(position, full)?;
    let with_chain = Chain::new(system, cs.fine_schedule())?;
    let without_chain = Chain::new(system, &deleted)?;
    let mut worst = 0.0f64;
    for seq in biprob::all_sequences(&deleted.radices()) {
        let mut outcomes = seq.clone();
        outcomes.insert(position, 0);
        let a = with_chain.prob_blocks(&cs.member_blocks(&outcomes)?);
        let b = without_chain.prob(&seq);
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}
