//! Verb dispatch and report assembly.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, ResolvedTolerances, SCHEMA_VERSION};
use crate::biprob::{self, Limits, Schedule};
use crate::coarse::{self, CoarseSchedule, Resolution};
use crate::composite::{self, CoInterferenceQuery};
use crate::error::{Error, Result};
use crate::lab;
use crate::linalg;
use crate::master::{self, Superoperator};
use crate::phenomena;
use crate::quantum::{Device, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Verb {
    Table,
    Verify,
    Coarse,
    Compose,
    Markov,
    Zeno,
    Uncertainty,
    MapCompare,
    Sample,
    Classical,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Table => "table",
            Verb::Verify => "verify",
            Verb::Coarse => "coarse",
            Verb::Compose => "compose",
            Verb::Markov => "markov",
            Verb::Zeno => "zeno",
            Verb::Uncertainty => "uncertainty",
            Verb::MapCompare => "map-compare",
            Verb::Sample => "sample",
            Verb::Classical => "classical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contract {
    pub name: String,
    pub value: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub bound: f64,
    pub pass: bool,
}

impl Contract {
    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Contract {
            name: name.into(),
            value,
            relation: "<=",
            bound,
            pass: value <= bound,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Contract {
            name: name.into(),
            value,
            relation: ">=",
            bound,
            pass: value >= bound,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub json: Value,
    pub contracts: Vec<Contract>,
    pub artifacts: Vec<Artifact>,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub limits: Limits,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    tol: ResolvedTolerances,
    limits: &'a Limits,
    devices: BTreeMap<String, Device>,
    contracts: Vec<Contract>,
    artifacts: Vec<Artifact>,
}

impl Ctx<'_> {
    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.artifacts.push(Artifact {
            name: name.to_string(),
            bytes,
        });
        Ok(())
    }

    fn json_artifact(&mut self, name: &str, value: &Value) -> Result<()> {
        self.artifacts.push(Artifact {
            name: name.to_string(),
            bytes: serde_json::to_vec_pretty(value)?,
        });
        Ok(())
    }

    fn require<T: Clone>(&self, value: &Option<T>, field: &str) -> Result<T> {
        value.clone().ok_or_else(|| Error::Config {
            pointer: format!("/params/{field}"),
            message: "required for this command".into(),
        })
    }

    fn system_and_schedule(&self) -> Result<(SystemSpec, CoarseSchedule)> {
        let sys = self.cfg.system()?;
        let cs = self.cfg.schedule(&sys, &self.devices)?;
        Ok((sys, cs))
    }
}

/// Runs one verb; contract failures are reported, not raised.
pub fn execute(cfg: &ExperimentConfig, verb: Verb, opts: &RunOptions) -> Result<Report> {
    if let Some(cmd) = &cfg.command {
        if cmd != verb.name() {
            return Err(Error::Config {
                pointer: "/command".into(),
                message: format!("config is for `{cmd}` but `{}` was requested", verb.name()),
            });
        }
    }
    let mut ctx = Ctx {
        cfg,
        tol: cfg.tolerances.resolve(),
        limits: &opts.limits,
        devices: cfg.devices()?,
        contracts: Vec::new(),
        artifacts: Vec::new(),
    };
    let results = match verb {
        Verb::Table => table(&mut ctx)?,
        Verb::Verify => verify(&mut ctx)?,
        Verb::Coarse => coarse_verb(&mut ctx)?,
        Verb::Compose => compose(&mut ctx)?,
        Verb::Markov => markov(&mut ctx)?,
        Verb::Zeno => zeno(&mut ctx)?,
        Verb::Uncertainty => uncertainty(&mut ctx)?,
        Verb::MapCompare => map_compare(&mut ctx)?,
        Verb::Sample => sample(&mut ctx)?,
        Verb::Classical => classical(&mut ctx)?,
    };
    let pass = ctx.contracts.iter().all(|c| c.pass);
    let json = json!({
        "schema_version": SCHEMA_VERSION,
        "verb": verb.name(),
        "config_digest": cfg.digest(),
        "config": cfg,
        "tolerances": ctx.tol,
        "results": results,
        "contracts": ctx.contracts,
        "pass": pass,
    });
    Ok(Report {
        json,
        contracts: ctx.contracts,
        artifacts: ctx.artifacts,
        pass,
    })
}

fn seq_label(schedule: &Schedule, seq: &[usize]) -> String {
    schedule.labels_of(seq).join("|")
}

fn table(ctx: &mut Ctx) -> Result<Value> {
    let (sys, cs) = ctx.system_and_schedule()?;
    let schedule = cs.effective_schedule()?;
    let t = biprob::biprob_table_with(&sys, &schedule, ctx.limits)?;
    let total = t.total();
    ctx.contracts
        .push(Contract::at_most("normalization", (total - linalg::c(1.0, 0.0)).norm(), ctx.tol.normalization));
    let mut csv = Vec::new();
    t.write_csv(&mut csv)?;
    ctx.artifacts.push(Artifact {
        name: "table.csv".into(),
        bytes: csv,
    });
    ctx.json_artifact("table.json", &t.to_json())?;
    Ok(json!({
        "schedule_digest": schedule.digest(),
        "sequences": t.size(),
        "entries": t.size() * t.size(),
        "total": [total.re, total.im],
        "l1_norm": t.l1_norm(),
    }))
}

fn verify(ctx: &mut Ctx) -> Result<Value> {
    let (sys, cs) = ctx.system_and_schedule()?;
    let schedule = cs.effective_schedule()?;
    let t = biprob::biprob_table_with(&sys, &schedule, ctx.limits)?;
    let r = biprob::report_for_table(&sys, &t, ctx.limits)?;
    let tol = ctx.tol;
    ctx.contracts.extend([
        Contract::at_most("normalization", r.normalization_error, tol.normalization),
        Contract::at_most("biconsistency", r.max_biconsistency_error, tol.biconsistency),
        Contract::at_most("causality", r.max_causality_violation, tol.causality),
        Contract::at_most("hermitianity", r.max_hermitianity_error, tol.hermitianity),
        Contract::at_least("gram_min_eigenvalue", r.min_gram_eigenvalue, -tol.psd),
    ]);
    Ok(json!({ "schedule_digest": schedule.digest(), "properties": r }))
}

fn coarse_verb(ctx: &mut Ctx) -> Result<Value> {
    let (sys, cs) = ctx.system_and_schedule()?;
    let eff = cs.effective_schedule()?;
    let mut rows = Vec::new();
    let (mut worst_rec, mut worst_cross) = (0.0f64, 0.0f64);
    let mut cells = Vec::new();
    for seq in biprob::all_sequences(&eff.radices()) {
        let quantum = coarse::quantum_coarse_prob(&sys, &cs, &seq)?;
        let faux = coarse::faux_coarse_prob(&sys, &cs, &seq)?;
        let cross = coarse::cross_term_sum(&sys, &cs, &seq)?;
        let rec = coarse::pairwise_decompose(&sys, &cs, &seq)?;
        worst_rec = worst_rec.max((rec - quantum).abs());
        worst_cross = worst_cross.max((quantum - faux - cross).abs());
        let label = seq_label(&eff, &seq);
        rows.push(vec![label.clone(), quantum.to_string(), faux.to_string(), (quantum - faux).to_string(), rec.to_string()]);
        cells.push(json!({"sequence": label, "quantum": quantum, "faux": faux, "interference": quantum - faux, "recurrence": rec}));
    }
    ctx.contracts.push(Contract::at_most("recurrence", worst_rec, ctx.tol.recurrence));
    ctx.contracts.push(Contract::at_most("cross_terms", worst_cross, ctx.tol.recurrence));
    ctx.csv("coarse.csv", &["sequence", "quantum", "faux", "interference", "recurrence"], rows)?;
    Ok(json!({ "cells": cells }))
}

fn label_indices(device: &Device, labels: &[String]) -> Result<Vec<usize>> {
    labels.iter().map(|l| device.index_of(l)).collect()
}

fn pair_of(device: &Device, pair: &[String; 2]) -> Result<(usize, usize)> {
    Ok((device.index_of(&pair[0])?, device.index_of(&pair[1])?))
}

/// Indices for the entries other than `position`, from labels.
fn fixed_of(schedule: &Schedule, position: usize, labels: &[String]) -> Result<Vec<usize>> {
    let others: Vec<&Device> = schedule
        .entries()
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != position)
        .map(|(_, e)| &e.device)
        .collect();
    if others.len() != labels.len() {
        return Err(Error::SequenceLength {
            expected: others.len(),
            found: labels.len(),
        });
    }
    others.iter().zip(labels).map(|(d, l)| d.index_of(l)).collect()
}

fn compose(ctx: &mut Ctx) -> Result<Value> {
    let (spec, a, b) = ctx.cfg.composite(&ctx.devices)?;
    let delta = composite::factorization_delta_with(&spec, &a, &b, ctx.limits)?;
    let independent = spec.is_independent();
    if independent {
        ctx.contracts.push(Contract::at_most("factorization", delta, ctx.tol.factorization));
    }
    let p = &ctx.cfg.params;
    let mut co = Value::Null;
    if let (Some(position), Some(pa), Some(pb)) = (p.position, &p.pair, &p.b_pair) {
        if !independent {
            return Err(Error::NotIndependent("co-interference needs uncoupled factors".into()));
        }
        let dev_a = &a.entries().get(position).ok_or(Error::IndexOutOfRange { index: position, len: a.len() })?.device;
        let dev_b = &b.entries()[position].device;
        let query = CoInterferenceQuery {
            position,
            a_pair: pair_of(dev_a, pa)?,
            b_pair: pair_of(dev_b, pb)?,
            fixed_a: fixed_of(&a, position, p.fixed.as_deref().unwrap_or_default())?,
            fixed_b: fixed_of(&b, position, p.fixed_b.as_deref().unwrap_or_default())?,
        };
        let ci = composite::co_interference(&spec, &a, &b, &query)?;
        ctx.contracts.push(Contract::at_most(
            "co_interference",
            (ci.phi - ci.phi_from_imaginary).abs(),
            ctx.tol.co_interference,
        ));
        co = serde_json::to_value(ci)?;
    }
    Ok(json!({
        "independent": independent,
        "factorization_delta": delta,
        "co_interference": co,
    }))
}

fn markov(ctx: &mut Ctx) -> Result<Value> {
    let sys = ctx.cfg.system()?;
    let device = ctx.cfg.param_device(&ctx.devices, "device")?.clone();
    let times = ctx.require(&ctx.cfg.params.times, "times")?;
    let init = ctx.cfg.init_spec(&ctx.devices)?;
    let (report, coarse) = match &ctx.cfg.params.blocks {
        Some(blocks) => {
            let idx = blocks.iter().map(|b| label_indices(&device, b)).collect::<Result<Vec<_>>>()?;
            let res = Resolution::with_joined_labels(&device, idx)?;
            (phenomena::coarse_markov_delta(&sys, &device, &res, &times, &init)?, true)
        }
        None => (phenomena::markov_delta(&sys, &device, &times, &init)?, false),
    };
    if !coarse && device.is_fine_grained() {
        ctx.contracts.push(Contract::at_most("markov", report.delta, ctx.tol.markov));
    }
    Ok(json!({ "coarse": coarse, "fine_grained": device.is_fine_grained(), "report": report }))
}

fn zeno(ctx: &mut Ctx) -> Result<Value> {
    let sys = ctx.cfg.system()?;
    let device = ctx.cfg.param_device(&ctx.devices, "device")?.clone();
    let outcome = ctx.require(&ctx.cfg.params.outcome, "outcome")?;
    let k0 = device.index_of(&outcome)?;
    let horizon = ctx.require(&ctx.cfg.params.t, "t")?;
    let n_list = ctx.require(&ctx.cfg.params.n_list, "n_list")?;
    let series = phenomena::zeno_scan(&sys, &device, k0, horizon, &n_list)?;
    let rate = phenomena::zeno_rate(&sys, &device, k0, 0.0)?;
    let out_of_range = series
        .survival
        .iter()
        .fold(0.0f64, |acc, &s| acc.max((-s).max(s - 1.0)).max(0.0));
    ctx.contracts.push(Contract::at_most("survival_in_unit_interval", out_of_range, 1e-12));
    ctx.contracts.push(Contract::at_most("linear_term", rate.linear_term.abs(), 1e-6));
    let rows = series
        .n_values
        .iter()
        .zip(&series.survival)
        .map(|(n, s)| vec![n.to_string(), s.to_string()])
        .collect();
    ctx.csv("zeno.csv", &["n", "survival"], rows)?;
    Ok(json!({ "series": series, "rate": rate }))
}

fn uncertainty(ctx: &mut Ctx) -> Result<Value> {
    let sys = ctx.cfg.system()?;
    let k = ctx.cfg.param_device(&ctx.devices, "device")?.clone();
    let l = ctx.cfg.param_device(&ctx.devices, "device_l")?.clone();
    let t = ctx.cfg.params.t.unwrap_or(0.0);
    let m = phenomena::uncertainty_matrix(&sys, &k, &l, t)?;
    ctx.contracts.push(Contract::at_most("stochasticity", m.stochasticity_error, ctx.tol.uncertainty));
    ctx.contracts.push(Contract::at_most("time_invariance", m.time_variation, ctx.tol.uncertainty));
    let mut rows = Vec::new();
    for (ki, row) in m.c.iter().enumerate() {
        for (li, v) in row.iter().enumerate() {
            rows.push(vec![k.labels()[ki].to_string(), l.labels()[li].to_string(), v.to_string()]);
        }
    }
    ctx.csv("uncertainty.csv", &["k", "l", "c"], rows)?;
    let mut empirical = Value::Null;
    if let Some(n) = ctx.cfg.params.n_samples {
        let dt = ctx.cfg.params.dt.unwrap_or(0.0);
        let seed = ctx.cfg.params.seed.unwrap_or(0);
        let est = lab::estimate_uncertainty(&sys, &k, &l, t, dt, n, seed)?;
        let exact = lab::exact_conditional(&sys, &k, &l, t, dt)?;
        let mut worst = 0.0f64;
        for (ki, row) in exact.iter().enumerate() {
            for (li, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    let e = lab::Estimate {
                        value: est.c[ki][li],
                        std_error: est.std_errors[ki][li],
                    };
                    worst = worst.max(e.deviation(*v));
                }
            }
        }
        ctx.contracts.push(Contract::at_most("empirical_sigma", worst, ctx.tol.sigma));
        empirical = json!({ "dt": dt, "seed": seed, "n_samples": n, "estimate": est, "max_sigma_deviation": worst });
    }
    Ok(json!({ "matrix": m, "empirical": empirical }))
}

fn map_compare(ctx: &mut Ctx) -> Result<Value> {
    let open = ctx.cfg.open(&ctx.devices)?;
    let t = ctx.require(&ctx.cfg.params.t, "t")?;
    let slices = ctx.cfg.params.slices.clone().unwrap_or_else(|| vec![1]);
    let evaluation = ctx.cfg.params.evaluation.clone().unwrap_or_else(|| "auto".into());
    let exact = master::dynamical_map_exact(&open, t)?;
    // Exact for every slicing when the coupling observables are constants
    // of the environment's own motion.
    let static_env = open
        .couplings
        .iter()
        .all(|(_, f)| linalg::max_abs(&linalg::commutator(open.environment.hamiltonian(), f)) <= 1e-12);
    let mut rows = Vec::new();
    let mut per_slice = Vec::new();
    let mut last: Option<Superoperator> = None;
    for &n in &slices {
        let (map, used) = match evaluation.as_str() {
            "enumerate" => (master::dynamical_map_bitraj_with(&open, t, n, ctx.limits)?, "enumerate"),
            "transfer" => (master::dynamical_map_bitraj_transfer(&open, t, n)?, "transfer"),
            "auto" => match master::dynamical_map_bitraj_with(&open, t, n, ctx.limits) {
                Ok(m) => (m, "enumerate"),
                Err(Error::TableTooLarge { .. }) => (master::dynamical_map_bitraj_transfer(&open, t, n)?, "transfer"),
                Err(e) => return Err(e),
            },
            other => {
                return Err(Error::Config {
                    pointer: "/params/evaluation".into(),
                    message: format!("unknown evaluation `{other}` (enumerate, transfer, auto)"),
                })
            }
        };
        let residual = map.max_abs_diff(&exact);
        let tp = map.trace_preservation_error();
        let choi = map.choi_min_eigenvalue();
        ctx.contracts.push(Contract::at_most(format!("trace_preservation[{n}]"), tp, ctx.tol.trace_preservation));
        ctx.contracts.push(Contract::at_least(format!("choi_min_eigenvalue[{n}]"), choi, -ctx.tol.choi));
        if static_env {
            ctx.contracts.push(Contract::at_most(format!("residual[{n}]"), residual, ctx.tol.map_residual));
        }
        rows.push(vec![n.to_string(), used.to_string(), residual.to_string(), tp.to_string(), choi.to_string()]);
        per_slice.push(json!({"slices": n, "evaluation": used, "residual": residual, "trace_preservation_error": tp, "choi_min_eigenvalue": choi}));
        last = Some(map);
    }
    ctx.csv("map.csv", &["slices", "evaluation", "residual", "trace_preservation_error", "choi_min_eigenvalue"], rows)?;
    ctx.json_artifact("map_exact.json", &exact.to_json())?;
    if let Some(m) = last {
        ctx.json_artifact("map_bitraj.json", &m.to_json())?;
    }
    Ok(json!({ "t": t, "static_environment": static_env, "slices": per_slice }))
}

fn sample(ctx: &mut Ctx) -> Result<Value> {
    let (sys, cs) = ctx.system_and_schedule()?;
    let eff = cs.effective_schedule()?;
    let n = ctx.cfg.params.n_samples.unwrap_or(10_000);
    let seed = ctx.cfg.params.seed.unwrap_or(0);
    let run = lab::sample_sequences(&sys, &eff, n, seed)?;
    let dist = lab::empirical_distribution(&run);
    let exact = biprob::biprob_table_with(&sys, &eff, ctx.limits)?.diagonal();
    let within = exact
        .iter()
        .enumerate()
        .filter(|&(code, &p)| {
            let e = lab::Estimate {
                value: dist.probabilities[code],
                std_error: dist.std_errors[code],
            };
            e.deviation(p) <= ctx.tol.sigma
        })
        .count();
    let coverage = within as f64 / exact.len() as f64;
    ctx.contracts.push(Contract::at_least("coverage", coverage, ctx.tol.coverage));
    let mut csv = Vec::new();
    lab::write_sample_csv(&run, &mut csv)?;
    ctx.artifacts.push(Artifact {
        name: "sample.csv".into(),
        bytes: csv,
    });
    ctx.json_artifact("sample.json", &serde_json::to_value(&run)?)?;

    let p = &ctx.cfg.params;
    let mut interference = Value::Null;
    if let (Some(position), Some(pair)) = (p.position, &p.pair) {
        if cs.resolutions().iter().any(Option::is_some) {
            return Err(Error::InvalidArgument("interference replay needs a fine-grained schedule".into()));
        }
        let device = &eff.entries().get(position).ok_or(Error::IndexOutOfRange { index: position, len: eff.len() })?.device;
        let pair_idx = pair_of(device, pair)?;
        let fixed = fixed_of(&eff, position, p.fixed.as_deref().unwrap_or_default())?;
        let merged = cs.clone().with_resolution(position, Resolution::pair(device, pair_idx.0, pair_idx.1)?)?;
        let coarse_run = lab::sample_coarse(&sys, &merged, n, seed.wrapping_add(1))?;
        let est = lab::reconstruct_interference(&dist, &lab::empirical_distribution(&coarse_run), position, pair_idx, &fixed)?;
        let exact_re = coarse::interference_term(&sys, &eff, position, pair_idx, &fixed)?.re_q;
        ctx.contracts.push(Contract::at_most("interference_sigma", est.deviation(exact_re), ctx.tol.interference_sigma));
        interference = json!({ "estimate": est, "exact_re_q": exact_re });
    }
    Ok(json!({
        "schedule_digest": run.schedule_digest,
        "seed": seed,
        "n_samples": n,
        "coverage": coverage,
        "interference": interference,
    }))
}

fn classical(ctx: &mut Ctx) -> Result<Value> {
    let (sys, cs) = ctx.system_and_schedule()?;
    let eff = cs.effective_schedule()?;
    let t = biprob::biprob_table_with(&sys, &eff, ctx.limits)?;
    let threshold = ctx.cfg.params.threshold.unwrap_or(master::CLASSICAL_THRESHOLD);
    let d = master::classical_diagnostic(&t, threshold)?;
    if let Some(err) = d.consistency_error {
        ctx.contracts.push(Contract::at_most("kolmogorov_consistency", err, ctx.tol.consistency));
    }
    ctx.csv(
        "classical.csv",
        &["offdiag_mass", "threshold", "consistent"],
        vec![vec![d.offdiag_mass.to_string(), threshold.to_string(), d.consistent.to_string()]],
    )?;
    Ok(serde_json::to_value(&d)?)
}
