//! Strict JSON experiment configs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::biprob::Schedule;
use crate::coarse::{CoarseEntry, CoarseSchedule, Resolution};
use crate::composite::{CompositeSpec, Coupling};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::phenomena::{self, InitSpec, InitWeight};
use crate::quantum::{self, Device, Outcome, State, SystemSpec};

pub const SCHEMA_VERSION: u32 = 1;

fn config_err(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        pointer: pointer.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> num_complex::Complex64 {
        match self {
            Entry::Real(x) => c(x, 0.0),
            Entry::Complex([re, im]) => c(re, im),
        }
    }
}

/// Rows of real or `[re, im]` entries, or one of `sigma_x`, `sigma_y`,
/// `sigma_z`, `identity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Named(String),
    Rows(Vec<Vec<Entry>>),
}

impl MatrixInput {
    pub fn to_matrix(&self, dim: Option<usize>, pointer: &str) -> Result<CMatrix> {
        let m = match self {
            MatrixInput::Named(name) => match name.as_str() {
                "sigma_x" => linalg::pauli_x(),
                "sigma_y" => linalg::pauli_y(),
                "sigma_z" => linalg::pauli_z(),
                "identity" => linalg::identity(dim.ok_or_else(|| config_err(pointer, "identity needs a known dimension"))?),
                other => return Err(config_err(pointer, format!("unknown named matrix `{other}`"))),
            },
            MatrixInput::Rows(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(config_err(pointer, "matrix must be square"));
                }
                if rows.iter().flatten().any(|e| !e.value().re.is_finite() || !e.value().im.is_finite()) {
                    return Err(config_err(pointer, "non-finite matrix entry"));
                }
                CMatrix::from_fn(n, n, |i, j| rows[i][j].value())
            }
        };
        if let Some(d) = dim {
            if m.nrows() != d {
                return Err(config_err(pointer, format!("expected a {d}×{d} matrix, found {}×{}", m.nrows(), m.ncols())));
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub dim: usize,
    /// Defaults to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixInput>,
    /// Lifts the dimension cap.
    #[serde(default)]
    pub large: bool,
}

impl SystemConfig {
    pub fn build(&self, pointer: &str) -> Result<SystemSpec> {
        let h = match &self.hamiltonian {
            Some(m) => m.to_matrix(Some(self.dim), &format!("{pointer}/hamiltonian"))?,
            None => CMatrix::zeros(self.dim, self.dim),
        };
        let spec = if self.large {
            SystemSpec::new_large(h)
        } else {
            SystemSpec::new(h)
        };
        spec.map_err(|e| config_err(pointer, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub name: String,
    /// A Hermitian observable; its eigenspaces become outcomes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projectors: Option<Vec<MatrixInput>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Discrete-Fourier partner of another fine-grained device.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mub_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryConfig {
    pub time: f64,
    pub device: String,
    /// Blocks of outcome labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub device: String,
    pub outcome: String,
    pub weight: f64,
}

/// Exactly one of `density`, `pure`, `basis`, `maximally_mixed`, `weights`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(default)]
    pub time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<MatrixInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pure: Option<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub maximally_mixed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<WeightConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(default)]
    pub left: Option<usize>,
    #[serde(default)]
    pub right: Option<usize>,
    pub op_left: MatrixInput,
    pub op_right: MatrixInput,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeConfig {
    pub factors: Vec<SystemConfig>,
    #[serde(default)]
    pub couplings: Vec<CouplingConfig>,
    /// One schedule per factor, at equal times.
    pub schedules: Vec<Vec<EntryConfig>>,
    pub inits: Vec<InitConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenCouplingConfig {
    pub system: MatrixInput,
    pub environment: MatrixInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenConfig {
    pub environment: SystemConfig,
    #[serde(default)]
    pub couplings: Vec<OpenCouplingConfig>,
    pub env_state: InitConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<Vec<usize>>,
    /// `enumerate`, `transfer` or `auto`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_l: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_pair: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_b: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

macro_rules! tolerances {
    ($($name:ident = $default:expr),* $(,)?) => {
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct Tolerances {
            $(#[serde(default, skip_serializing_if = "Option::is_none")] pub $name: Option<f64>,)*
        }

        #[derive(Debug, Clone, Copy, PartialEq, Serialize)]
        pub struct ResolvedTolerances {
            $(pub $name: f64,)*
        }

        impl Tolerances {
            pub fn resolve(&self) -> ResolvedTolerances {
                ResolvedTolerances { $($name: self.$name.unwrap_or($default),)* }
            }
        }
    };
}

tolerances! {
    normalization = 1e-8,
    biconsistency = 1e-10,
    causality = 1e-12,
    hermitianity = 1e-10,
    psd = 1e-10,
    recurrence = 1e-9,
    factorization = 1e-9,
    co_interference = 1e-10,
    markov = 1e-10,
    uncertainty = 1e-10,
    map_residual = 1e-10,
    trace_preservation = 1e-8,
    choi = 1e-9,
    consistency = 1e-9,
    sigma = 4.0,
    interference_sigma = 3.0,
    coverage = 0.999,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub devices: Vec<DeviceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<CompositeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<OpenConfig>,
    #[serde(default)]
    pub schedule: Vec<EntryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Parses and validates a config; errors carry a JSON-pointer location.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let mut pointer = pointer_of(e.path());
        let message = e.inner().to_string();
        if let Some(rest) = message.strip_prefix("missing field `") {
            if let Some(field) = rest.split('`').next() {
                pointer.push('/');
                pointer.push_str(field);
            }
        }
        config_err(pointer, message)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

fn check_device(names: &[&str], name: &str, pointer: String, context: &str) -> Result<()> {
    if names.contains(&name) {
        Ok(())
    } else {
        Err(config_err(pointer, format!("unknown device `{name}` {context}")))
    }
}

impl ExperimentConfig {
    /// Schema version and referential integrity of device names.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(
                "/schema_version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let names: Vec<&str> = self.devices.iter().map(|d| d.name.as_str()).collect();
        for (i, d) in self.devices.iter().enumerate() {
            if names[..i].contains(&d.name.as_str()) {
                return Err(config_err(format!("/devices/{i}/name"), format!("duplicate device name `{}`", d.name)));
            }
            let sources = [d.matrix.is_some(), d.projectors.is_some(), d.mub_of.is_some()];
            if sources.iter().filter(|&&b| b).count() != 1 {
                return Err(config_err(
                    format!("/devices/{i}"),
                    "exactly one of `matrix`, `projectors`, `mub_of` is required",
                ));
            }
            if let Some(base) = &d.mub_of {
                check_device(&names, base, format!("/devices/{i}/mub_of"), &format!("in device entry {i}"))?;
            }
        }
        for (i, e) in self.schedule.iter().enumerate() {
            check_device(&names, &e.device, format!("/schedule/{i}/device"), &format!("in schedule entry {i}"))?;
        }
        if let Some(comp) = &self.composite {
            for (f, sched) in comp.schedules.iter().enumerate() {
                for (i, e) in sched.iter().enumerate() {
                    check_device(
                        &names,
                        &e.device,
                        format!("/composite/schedules/{f}/{i}/device"),
                        &format!("in schedule entry {i} of factor {f}"),
                    )?;
                }
            }
        }
        let inits = self
            .init
            .iter()
            .map(|i| ("/init".to_string(), i))
            .chain(self.composite.iter().flat_map(|c| c.inits.iter().enumerate().map(|(k, i)| (format!("/composite/inits/{k}"), i))))
            .chain(self.open.iter().map(|o| ("/open/env_state".to_string(), &o.env_state)));
        for (ptr, init) in inits {
            let given = [
                init.density.is_some(),
                init.pure.is_some(),
                init.basis.is_some(),
                init.maximally_mixed,
                init.weights.is_some(),
            ];
            if given.iter().filter(|&&b| b).count() != 1 {
                return Err(config_err(
                    ptr,
                    "exactly one of `density`, `pure`, `basis`, `maximally_mixed`, `weights` is required",
                ));
            }
            for (i, w) in init.weights.iter().flatten().enumerate() {
                check_device(&names, &w.device, format!("{ptr}/weights/{i}/device"), &format!("in init weight {i}"))?;
            }
        }
        for (field, value) in [("device", &self.params.device), ("device_l", &self.params.device_l)] {
            if let Some(name) = value {
                check_device(&names, name, format!("/params/{field}"), "in params")?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical re-serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn system(&self) -> Result<SystemSpec> {
        self.system
            .as_ref()
            .ok_or_else(|| config_err("/system", "this command needs a system"))?
            .build("/system")
    }

    pub fn devices(&self) -> Result<BTreeMap<String, Device>> {
        let mut out = BTreeMap::new();
        // Partners are built after their base devices.
        let (plain, partners): (Vec<_>, Vec<_>) = self.devices.iter().enumerate().partition(|(_, d)| d.mub_of.is_none());
        for (i, d) in plain.into_iter().chain(partners) {
            let ptr = format!("/devices/{i}");
            let wrap = |e: Error| config_err(ptr.clone(), e.to_string());
            let device = if let Some(m) = &d.matrix {
                let m = m.to_matrix(None, &format!("{ptr}/matrix"))?;
                let dev = quantum::device_from_hermitian(&d.name, &m, None).map_err(wrap)?;
                match &d.outcomes {
                    Some(labels) => relabel(&dev, labels, &ptr)?,
                    None => dev,
                }
            } else if let Some(ps) = &d.projectors {
                let projectors = ps
                    .iter()
                    .enumerate()
                    .map(|(k, p)| p.to_matrix(None, &format!("{ptr}/projectors/{k}")))
                    .collect::<Result<Vec<_>>>()?;
                let labels = d
                    .outcomes
                    .clone()
                    .unwrap_or_else(|| (0..projectors.len()).map(|k| k.to_string()).collect());
                let outcomes = match &d.values {
                    Some(v) if v.len() == labels.len() => labels.iter().zip(v).map(|(l, &x)| Outcome::valued(l.clone(), x)).collect(),
                    Some(_) => return Err(config_err(format!("{ptr}/values"), "one value per outcome is required")),
                    None => labels.iter().map(|l| Outcome::labelled(l.clone())).collect(),
                };
                Device::new(&d.name, outcomes, projectors).map_err(wrap)?
            } else {
                let base: &Device = out.get(d.mub_of.as_deref().unwrap_or_default()).expect("validated reference");
                quantum::mub_partner(base).map_err(wrap)?.renamed(&d.name)
            };
            out.insert(d.name.clone(), device);
        }
        Ok(out)
    }

    pub fn init_state(&self, system: &SystemSpec, devices: &BTreeMap<String, Device>) -> Result<State> {
        let init = self.init.as_ref().ok_or_else(|| config_err("/init", "this command needs an initial state"))?;
        build_state(init, system, devices, "/init")
    }

    pub fn schedule(&self, system: &SystemSpec, devices: &BTreeMap<String, Device>) -> Result<CoarseSchedule> {
        if self.schedule.is_empty() {
            return Err(config_err("/schedule", "this command needs a non-empty schedule"));
        }
        let init = self.init_state(system, devices)?;
        build_schedule(&self.schedule, init, devices, "/schedule")
    }

    pub fn composite(&self, devices: &BTreeMap<String, Device>) -> Result<(CompositeSpec, Schedule, Schedule)> {
        let comp = self.composite.as_ref().ok_or_else(|| config_err("/composite", "this command needs a composite"))?;
        if comp.factors.len() != 2 || comp.schedules.len() != 2 || comp.inits.len() != 2 {
            return Err(config_err("/composite", "exactly two factors, schedules and inits are required"));
        }
        let factors = comp
            .factors
            .iter()
            .enumerate()
            .map(|(k, f)| f.build(&format!("/composite/factors/{k}")))
            .collect::<Result<Vec<_>>>()?;
        let couplings = comp
            .couplings
            .iter()
            .enumerate()
            .map(|(k, cp)| {
                let ptr = format!("/composite/couplings/{k}");
                let left = cp.left.unwrap_or(0);
                let right = cp.right.unwrap_or(1);
                let dims = |i: usize| factors.get(i).map(SystemSpec::dim);
                Ok(Coupling {
                    left,
                    right,
                    op_left: cp.op_left.to_matrix(dims(left), &format!("{ptr}/op_left"))?,
                    op_right: cp.op_right.to_matrix(dims(right), &format!("{ptr}/op_right"))?,
                    strength: cp.strength,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut schedules = Vec::with_capacity(2);
        for k in 0..2 {
            let state = build_state(&comp.inits[k], &factors[k], devices, &format!("/composite/inits/{k}"))?;
            let cs = build_schedule(&comp.schedules[k], state, devices, &format!("/composite/schedules/{k}"))?;
            schedules.push(cs.effective_schedule()?);
        }
        let spec = CompositeSpec::new(factors, couplings).map_err(|e| config_err("/composite", e.to_string()))?;
        let b = schedules.pop().expect("two schedules");
        let a = schedules.pop().expect("two schedules");
        Ok((spec, a, b))
    }

    pub fn open(&self, devices: &BTreeMap<String, Device>) -> Result<crate::master::OpenSpec> {
        let open = self.open.as_ref().ok_or_else(|| config_err("/open", "this command needs an open-system block"))?;
        let system = self.system()?;
        let environment = open.environment.build("/open/environment")?;
        let couplings = open
            .couplings
            .iter()
            .enumerate()
            .map(|(k, cp)| {
                let ptr = format!("/open/couplings/{k}");
                Ok((
                    cp.system.to_matrix(Some(system.dim()), &format!("{ptr}/system"))?,
                    cp.environment.to_matrix(Some(environment.dim()), &format!("{ptr}/environment"))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let env_state = build_state(&open.env_state, &environment, devices, "/open/env_state")?;
        let obs_state = self.init_state(&system, devices)?;
        crate::master::OpenSpec::new(system, environment, couplings, env_state, obs_state).map_err(|e| config_err("/open", e.to_string()))
    }

    pub fn init_spec(&self, devices: &BTreeMap<String, Device>) -> Result<InitSpec> {
        let init = self.init.as_ref().ok_or_else(|| config_err("/init", "this command needs an initial state"))?;
        let weights = init
            .weights
            .as_ref()
            .ok_or_else(|| config_err("/init/weights", "this command needs init weights"))?;
        init_spec_of(weights, init.time, devices, "/init")
    }

    pub fn param_device<'a>(&self, devices: &'a BTreeMap<String, Device>, field: &str) -> Result<&'a Device> {
        let name = match field {
            "device" => self.params.device.as_ref(),
            _ => self.params.device_l.as_ref(),
        };
        let name = name.ok_or_else(|| config_err(format!("/params/{field}"), "required for this command"))?;
        Ok(&devices[name])
    }
}

fn relabel(dev: &Device, labels: &[String], ptr: &str) -> Result<Device> {
    if labels.len() != dev.outcome_count() {
        return Err(config_err(
            format!("{ptr}/outcomes"),
            format!("{} labels for {} eigenspaces", labels.len(), dev.outcome_count()),
        ));
    }
    let outcomes = dev
        .outcomes()
        .iter()
        .zip(labels)
        .map(|(o, l)| match o.value {
            Some(v) => Outcome::valued(l.clone(), v),
            None => Outcome::labelled(l.clone()),
        })
        .collect();
    Device::new(dev.name(), outcomes, dev.projectors().to_vec()).map_err(|e| config_err(ptr, e.to_string()))
}

fn init_spec_of(weights: &[WeightConfig], time: f64, devices: &BTreeMap<String, Device>, ptr: &str) -> Result<InitSpec> {
    let ws = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let device = devices[&w.device].clone();
            let outcome = device
                .index_of(&w.outcome)
                .map_err(|e| config_err(format!("{ptr}/weights/{i}/outcome"), e.to_string()))?;
            Ok(InitWeight {
                device,
                outcome,
                weight: w.weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    InitSpec::new(ws, time).map_err(|e| config_err(ptr, e.to_string()))
}

fn build_state(init: &InitConfig, system: &SystemSpec, devices: &BTreeMap<String, Device>, ptr: &str) -> Result<State> {
    let d = system.dim();
    let wrap = |e: Error| config_err(ptr, e.to_string());
    if let Some(m) = &init.density {
        State::new(m.to_matrix(Some(d), &format!("{ptr}/density"))?, init.time).map_err(wrap)
    } else if let Some(v) = &init.pure {
        if v.len() != d {
            return Err(config_err(format!("{ptr}/pure"), format!("expected {d} amplitudes, found {}", v.len())));
        }
        let psi = CVector::from_iterator(d, v.iter().map(|e| e.value()));
        State::pure(&psi, init.time).map_err(wrap)
    } else if let Some(k) = init.basis {
        State::basis(d, k, init.time).map_err(wrap)
    } else if init.maximally_mixed {
        State::maximally_mixed(d, init.time).map_err(wrap)
    } else {
        let spec = init_spec_of(init.weights.as_deref().unwrap_or_default(), init.time, devices, ptr)?;
        phenomena::init_metric(&spec, system).map_err(wrap)
    }
}

fn build_schedule(entries: &[EntryConfig], init: State, devices: &BTreeMap<String, Device>, ptr: &str) -> Result<CoarseSchedule> {
    let coarse = entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let device = devices[&e.device].clone();
            let resolution = match &e.resolution {
                None => None,
                Some(blocks) => {
                    let rptr = format!("{ptr}/{i}/resolution");
                    let idx = blocks
                        .iter()
                        .map(|b| b.iter().map(|l| device.index_of(l)).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()
                        .map_err(|err| config_err(rptr.clone(), err.to_string()))?;
                    let res = match &e.block_labels {
                        Some(labels) => Resolution::new(&device, idx, labels.clone()),
                        None => Resolution::with_joined_labels(&device, idx),
                    };
                    Some(res.map_err(|err| config_err(rptr, err.to_string()))?)
                }
            };
            Ok(CoarseEntry {
                time: e.time,
                device,
                resolution,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CoarseSchedule::new(coarse, init).map_err(|e| config_err(ptr, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "system": {"dim": 2},
        "devices": [{"name": "Z", "matrix": "sigma_z"}, {"name": "X", "matrix": [[0, 1], [1, 0]]}],
        "schedule": [{"time": 1.0, "device": "Z"}, {"time": 2.0, "device": "X"}],
        "init": {"basis": 0}
    }"#;

    fn pointer(text: &str) -> (String, String) {
        match parse_config_str(text) {
            Err(Error::Config { pointer, message }) => (pointer, message),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_parses() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let sys = cfg.system().unwrap();
        let devices = cfg.devices().unwrap();
        let cs = cfg.schedule(&sys, &devices).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(devices["Z"].labels(), vec!["1", "-1"]);
        assert_eq!(cfg.digest(), parse_config_str(MINIMAL).unwrap().digest());
    }

    #[test]
    fn missing_dim_points_at_field() {
        let (p, m) = pointer(r#"{"schema_version": 1, "system": {"hamiltonian": "sigma_x"}}"#);
        assert_eq!(p, "/system/dim");
        assert!(m.contains("missing field"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let (p, _) = pointer(r#"{"schema_version": 1, "system": {"dim": 2, "spin": 1}}"#);
        assert_eq!(p, "/system/spin");
        let (p, m) = pointer(r#"{"schema_version": 1, "colour": "red"}"#);
        assert_eq!(p, "/colour");
        assert!(m.contains("unknown field"));
    }

    #[test]
    fn unknown_device_names_entry() {
        let text = MINIMAL.replace(r#"{"time": 2.0, "device": "X"}"#, r#"{"time": 2.0, "device": "W"}"#);
        let (p, m) = pointer(&text);
        assert_eq!(p, "/schedule/1/device");
        assert!(m.contains("schedule entry 1") && m.contains("`W`"));
    }

    #[test]
    fn schema_version_checked() {
        let (p, _) = pointer(&MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 7"));
        assert_eq!(p, "/schema_version");
        let (p, _) = pointer(r#"{"system": {"dim": 2}}"#);
        assert_eq!(p, "/schema_version");
    }

    #[test]
    fn bad_matrix_shape() {
        let text = MINIMAL.replace("\"system\": {\"dim\": 2}", "\"system\": {\"dim\": 3, \"hamiltonian\": \"sigma_x\"}");
        let cfg = parse_config_str(&text).unwrap();
        match cfg.system() {
            Err(Error::Config { pointer, .. }) => assert_eq!(pointer, "/system/hamiltonian"),
            other => panic!("{other:?}"),
        }
    }
}
