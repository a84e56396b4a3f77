pub mod campaign;
pub mod cfg;
pub mod elab;
pub mod fault;
pub mod frontend;
pub mod kernel;
pub mod logic;
pub mod oracle;
pub mod report;
pub mod stimulus;
pub mod vdg;
pub mod wave;

pub use campaign::run_campaign;
pub use elab::{elaborate, RtlGraph, SignalId};
pub use fault::{enumerate_faults, parse_fault_list, Counters, Fault, FaultDb, FaultStatus, StuckAt};
pub use frontend::{lint_subset, parse_design, Diagnostic, SourceUnit};
pub use kernel::{simulate, Design, Mode, Options, SimError, SimResult};
pub use logic::LogicVec;
pub use report::{diff_reports, Report};
pub use stimulus::{parse_stimulus, Stimulus};
