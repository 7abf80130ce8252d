//! Bi-trajectory quantum mechanics: bi-probability tables over measurement
//! histories, coarse-graining, composite systems, dynamical phenomena, open
//! system maps and a simulated laboratory.

pub mod biprob;
pub mod cli;
pub mod coarse;
pub mod composite;
pub mod error;
pub mod lab;
pub mod linalg;
pub mod master;
pub mod phenomena;
pub mod quantum;

pub use biprob::{BiProbTable, BiSequence, Limits, Schedule, ScheduleEntry};
pub use coarse::{CoarseEntry, CoarseSchedule, Resolution};
pub use composite::{CompositeSpec, Coupling};
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use quantum::{Device, Dynamics, Outcome, State, SystemSpec};
