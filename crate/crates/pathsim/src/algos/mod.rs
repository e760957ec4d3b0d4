//! The two analytics kernels: level-synchronous breadth-first search and
//! remote-min connected components, both expressed as fork-join thread
//! swarms over the simulated memory.

mod bfs;
mod cc;

pub use bfs::{bfs, BfsResult, UNREACHED};
pub use cc::{
    cc_hooking_migration_check, connected_components, connected_components_traced, CcCheckReport,
    CcIterationTrace, CcResult, CcTrace, DEFAULT_MAX_ITER,
};

pub(crate) use bfs::spawn_bfs_root;
pub(crate) use cc::spawn_cc_root;

use crate::exec::Schedule;
use crate::machine::MachineConfig;

/// Execution options shared by the kernels.
#[derive(Debug, Clone, Copy)]
pub struct KernelOptions {
    pub schedule: Schedule,
    /// Maximum live worker threads a kernel keeps in flight per phase wave.
    pub worker_budget: u64,
}

impl KernelOptions {
    pub fn for_machine(cfg: &MachineConfig) -> KernelOptions {
        KernelOptions {
            schedule: Schedule::Fifo,
            worker_budget: default_worker_budget(cfg),
        }
    }

    pub fn with_budget(mut self, budget: u64) -> KernelOptions {
        self.worker_budget = budget.max(1);
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> KernelOptions {
        self.schedule = schedule;
        self
    }
}

/// Default per-job thread budget: one sixteenth of the machine's hardware
/// contexts, so around sixteen concurrent jobs fill the system.
pub fn default_worker_budget(cfg: &MachineConfig) -> u64 {
    (cfg.contexts_per_node() * cfg.nodes as u64 / 16).max(1)
}
