//! Machine description: topology counts, the cost model, memory views,
//! global addressing and per-node hardware event counters.
//!
//! Everything here is immutable after construction except [`CounterSet`],
//! whose cells are only ever incremented while a workload runs.

use std::cell::Cell;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{SimError, SimResult};

/// Node index within the simulated system.
pub type NodeId = usize;

/// Every word in the simulated memory is 64 bits.
pub const WORD_BYTES: u64 = 8;

/// Configuration of the simulated machine.
///
/// Counts describe the topology; `cost_*` fields are the simulated-cycle
/// charges used by the execution engine. All counts and rates must be
/// strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MachineConfig {
    pub nodes: usize,
    pub cores_per_node: usize,
    pub contexts_per_core: usize,
    pub msps_per_node: usize,
    pub channel_bandwidth_bytes_per_sec: f64,
    pub clock_hz: f64,
    /// Simulated cycles per local word access.
    pub cost_local_access: u64,
    /// Simulated cycles per thread migration.
    pub cost_migration: u64,
    /// Simulated cycles per memory-side remote operation.
    pub cost_remote_op: u64,
    /// Fixed at 8: all integers are 64 bits wide.
    pub word_bytes: u64,
    /// Per-node memory capacity in 64-bit words.
    pub node_capacity_words: u64,
}

impl MachineConfig {
    pub fn contexts_per_node(&self) -> u64 {
        (self.cores_per_node as u64) * (self.contexts_per_core as u64)
    }

    pub fn total_contexts(&self) -> u64 {
        self.contexts_per_node() * self.nodes as u64
    }

    /// Validate all invariants; returns the config on success.
    pub fn validated(self) -> SimResult<MachineConfig> {
        fn positive(name: &str, v: u64) -> SimResult<()> {
            if v == 0 {
                return Err(SimError::InvalidArgument(format!("{name} must be positive")));
            }
            Ok(())
        }
        positive("nodes", self.nodes as u64)?;
        positive("cores_per_node", self.cores_per_node as u64)?;
        positive("contexts_per_core", self.contexts_per_core as u64)?;
        positive("msps_per_node", self.msps_per_node as u64)?;
        positive("cost_local_access", self.cost_local_access)?;
        positive("cost_migration", self.cost_migration)?;
        positive("cost_remote_op", self.cost_remote_op)?;
        positive("node_capacity_words", self.node_capacity_words)?;
        if self.channel_bandwidth_bytes_per_sec.is_nan()
            || self.channel_bandwidth_bytes_per_sec <= 0.0
        {
            return Err(SimError::InvalidArgument(
                "channel_bandwidth_bytes_per_sec must be positive".into(),
            ));
        }
        if self.clock_hz.is_nan() || self.clock_hz <= 0.0 {
            return Err(SimError::InvalidArgument("clock_hz must be positive".into()));
        }
        if self.word_bytes != WORD_BYTES {
            return Err(SimError::InvalidArgument(format!(
                "word_bytes must be {WORD_BYTES}"
            )));
        }
        Ok(self)
    }

    /// Parse a flat `key = value` machine description file.
    pub fn from_kv_file(path: &Path) -> SimResult<MachineConfig> {
        let text = fs::read_to_string(path)?;
        let mut cfg = default_pathfinder_config(8)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            cfg.apply_override(line).map_err(|e| {
                SimError::InvalidArgument(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        }
        cfg.validated()
    }

    /// Apply a single `key = value` (or `key=value`) override.
    pub fn apply_override(&mut self, kv: &str) -> SimResult<()> {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| SimError::InvalidArgument(format!("expected key=value, got {kv:?}")))?;
        let key = key.trim();
        let value = value.trim();
        fn as_u64(v: &str) -> SimResult<u64> {
            v.parse::<u64>()
                .map_err(|_| SimError::InvalidArgument(format!("expected integer, got {v:?}")))
        }
        fn as_f64(v: &str) -> SimResult<f64> {
            v.parse::<f64>()
                .map_err(|_| SimError::InvalidArgument(format!("expected number, got {v:?}")))
        }
        match key {
            "nodes" => self.nodes = as_u64(value)? as usize,
            "cores_per_node" => self.cores_per_node = as_u64(value)? as usize,
            "contexts_per_core" => self.contexts_per_core = as_u64(value)? as usize,
            "msps_per_node" => self.msps_per_node = as_u64(value)? as usize,
            "channel_bandwidth_bytes_per_sec" => {
                self.channel_bandwidth_bytes_per_sec = as_f64(value)?
            }
            "clock_hz" => self.clock_hz = as_f64(value)?,
            "cost_local_access" => self.cost_local_access = as_u64(value)?,
            "cost_migration" => self.cost_migration = as_u64(value)?,
            "cost_remote_op" => self.cost_remote_op = as_u64(value)?,
            "word_bytes" => self.word_bytes = as_u64(value)?,
            "node_capacity_words" => self.node_capacity_words = as_u64(value)?,
            other => {
                return Err(SimError::InvalidArgument(format!(
                    "unknown machine config key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Render as the flat `key = value` file format.
    pub fn to_kv_string(&self) -> String {
        format!(
            "nodes = {}\n\
             cores_per_node = {}\n\
             contexts_per_core = {}\n\
             msps_per_node = {}\n\
             channel_bandwidth_bytes_per_sec = {}\n\
             clock_hz = {}\n\
             cost_local_access = {}\n\
             cost_migration = {}\n\
             cost_remote_op = {}\n\
             word_bytes = {}\n\
             node_capacity_words = {}\n",
            self.nodes,
            self.cores_per_node,
            self.contexts_per_core,
            self.msps_per_node,
            self.channel_bandwidth_bytes_per_sec,
            self.clock_hz,
            self.cost_local_access,
            self.cost_migration,
            self.cost_remote_op,
            self.word_bytes,
            self.node_capacity_words,
        )
    }
}

/// Default machine description with `nodes` nodes: 24 cores per node with 64
/// thread contexts each, 8 memory-side processors per node, 2 GB/s channels
/// and a 225 MHz clock. The cost model defaults to 1 cycle per local word
/// access, 60 per migration and 3 per remote operation; only the ratios
/// matter and all three are configurable.
pub fn default_pathfinder_config(nodes: usize) -> SimResult<MachineConfig> {
    if nodes == 0 {
        return Err(SimError::InvalidArgument("nodes must be >= 1".into()));
    }
    MachineConfig {
        nodes,
        cores_per_node: 24,
        contexts_per_core: 64,
        msps_per_node: 8,
        channel_bandwidth_bytes_per_sec: 2e9,
        clock_hz: 225e6,
        cost_local_access: 1,
        cost_migration: 60,
        cost_remote_op: 3,
        word_bytes: WORD_BYTES,
        // 64 GiB of 8-byte words per node.
        node_capacity_words: (64u64 << 30) / WORD_BYTES,
    }
    .validated()
}

/// Address interpretation mode.
///
/// * `Replicated` (view 0): one independent copy per node, read without
///   migration ("constants" plus per-node flags).
/// * `Absolute` (view 1): the allocation lives wholly on one node.
/// * `Striped` (view 2): consecutive 64-bit elements on consecutive nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum View {
    Replicated,
    Absolute,
    Striped,
}

impl View {
    /// The hardware view number (0, 1 or 2).
    pub fn number(self) -> u8 {
        match self {
            View::Replicated => 0,
            View::Absolute => 1,
            View::Striped => 2,
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            View::Replicated => "replicated",
            View::Absolute => "absolute",
            View::Striped => "striped",
        };
        f.write_str(s)
    }
}

/// Opaque allocation handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AllocId(pub(crate) u32);

/// A global address: (view, allocation, element index).
///
/// Addresses are (handle, index) pairs rather than flat physical addresses;
/// view semantics are preserved exactly while the bit-field encoding is not
/// modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalAddress {
    pub view: View,
    pub alloc: AllocId,
    pub index: u64,
}

/// Per-node tallies of hardware events plus simulated cycles.
///
/// All counters are monotonically non-decreasing during a run; the system
/// total of each counter equals its sum over nodes. Updates are atomic per
/// counter (the engine runs logical threads on a single execution stream).
pub struct CounterSet {
    nodes: usize,
    msps: usize,
    migrations: Vec<Cell<u64>>,
    local_reads: Vec<Cell<u64>>,
    local_writes: Vec<Cell<u64>>,
    remote_min: Vec<Cell<u64>>,
    remote_add: Vec<Cell<u64>>,
    remote_write: Vec<Cell<u64>>,
    /// Core-side cycle tally per node.
    core_cycles: Vec<Cell<u64>>,
    /// Busy cycles per memory-side processor queue, `nodes * msps` flat.
    /// The queues drain in parallel with the cores; a node's clock is the
    /// larger of its core tally and its busiest queue.
    msp_busy: Vec<Cell<u64>>,
}

/// Which kind of memory-side remote operation a counter update refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemoteKind {
    Min,
    Add,
    Write,
}

impl CounterSet {
    pub fn new(nodes: usize, msps: usize) -> CounterSet {
        let zeroed = |n: usize| (0..n).map(|_| Cell::new(0)).collect::<Vec<_>>();
        CounterSet {
            nodes,
            msps,
            migrations: zeroed(nodes),
            local_reads: zeroed(nodes),
            local_writes: zeroed(nodes),
            remote_min: zeroed(nodes),
            remote_add: zeroed(nodes),
            remote_write: zeroed(nodes),
            core_cycles: zeroed(nodes),
            msp_busy: zeroed(nodes * msps),
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub(crate) fn bump_migrations(&self, node: NodeId) {
        self.migrations[node].set(self.migrations[node].get() + 1);
    }

    pub(crate) fn bump_local_reads(&self, node: NodeId, by: u64) {
        self.local_reads[node].set(self.local_reads[node].get() + by);
    }

    pub(crate) fn bump_local_writes(&self, node: NodeId, by: u64) {
        self.local_writes[node].set(self.local_writes[node].get() + by);
    }

    pub(crate) fn bump_remote(&self, node: NodeId, kind: RemoteKind) {
        let v = match kind {
            RemoteKind::Min => &self.remote_min[node],
            RemoteKind::Add => &self.remote_add[node],
            RemoteKind::Write => &self.remote_write[node],
        };
        v.set(v.get() + 1);
    }

    pub(crate) fn advance_core_cycles(&self, node: NodeId, by: u64) {
        self.core_cycles[node].set(self.core_cycles[node].get() + by);
    }

    pub(crate) fn add_msp_busy(&self, node: NodeId, queue: usize, by: u64) {
        let slot = node * self.msps + queue;
        self.msp_busy[slot].set(self.msp_busy[slot].get() + by);
    }

    /// Node clock: core tally or busiest MSP queue, whichever is later.
    pub fn node_cycles(&self, node: NodeId) -> u64 {
        let msp = (0..self.msps)
            .map(|q| self.msp_busy[node * self.msps + q].get())
            .max()
            .unwrap_or(0);
        self.core_cycles[node].get().max(msp)
    }

    /// Current simulated clock: the maximum per-node clock.
    pub fn clock_cycles(&self) -> u64 {
        (0..self.nodes).map(|n| self.node_cycles(n)).max().unwrap_or(0)
    }

    /// Immutable copy of all counters.
    pub fn snapshot(&self) -> CounterSnapshot {
        let copy = |v: &Vec<Cell<u64>>| v.iter().map(Cell::get).collect::<Vec<u64>>();
        CounterSnapshot {
            msps: self.msps,
            migrations: copy(&self.migrations),
            local_reads: copy(&self.local_reads),
            local_writes: copy(&self.local_writes),
            remote_min: copy(&self.remote_min),
            remote_add: copy(&self.remote_add),
            remote_write: copy(&self.remote_write),
            core_cycles: copy(&self.core_cycles),
            msp_busy: copy(&self.msp_busy),
        }
    }
}

/// Plain-data copy of a [`CounterSet`], used for per-phase and per-job deltas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CounterSnapshot {
    pub msps: usize,
    pub migrations: Vec<u64>,
    pub local_reads: Vec<u64>,
    pub local_writes: Vec<u64>,
    pub remote_min: Vec<u64>,
    pub remote_add: Vec<u64>,
    pub remote_write: Vec<u64>,
    pub core_cycles: Vec<u64>,
    pub msp_busy: Vec<u64>,
}

fn vec_delta(later: &[u64], earlier: &[u64]) -> Vec<u64> {
    later
        .iter()
        .zip(earlier)
        .map(|(l, e)| l.checked_sub(*e).expect("counters are non-decreasing"))
        .collect()
}

impl CounterSnapshot {
    /// Element-wise `self - earlier`. Panics if any counter decreased.
    pub fn delta(&self, earlier: &CounterSnapshot) -> CounterSnapshot {
        CounterSnapshot {
            msps: self.msps,
            migrations: vec_delta(&self.migrations, &earlier.migrations),
            local_reads: vec_delta(&self.local_reads, &earlier.local_reads),
            local_writes: vec_delta(&self.local_writes, &earlier.local_writes),
            remote_min: vec_delta(&self.remote_min, &earlier.remote_min),
            remote_add: vec_delta(&self.remote_add, &earlier.remote_add),
            remote_write: vec_delta(&self.remote_write, &earlier.remote_write),
            core_cycles: vec_delta(&self.core_cycles, &earlier.core_cycles),
            msp_busy: vec_delta(&self.msp_busy, &earlier.msp_busy),
        }
    }

    pub fn total_migrations(&self) -> u64 {
        self.migrations.iter().sum()
    }

    pub fn total_local_reads(&self) -> u64 {
        self.local_reads.iter().sum()
    }

    pub fn total_local_writes(&self) -> u64 {
        self.local_writes.iter().sum()
    }

    pub fn total_remote_min(&self) -> u64 {
        self.remote_min.iter().sum()
    }

    pub fn total_remote_add(&self) -> u64 {
        self.remote_add.iter().sum()
    }

    pub fn total_remote_write(&self) -> u64 {
        self.remote_write.iter().sum()
    }

    pub fn total_remote_ops(&self) -> u64 {
        self.total_remote_min() + self.total_remote_add() + self.total_remote_write()
    }

    /// Node clock at the moment of this snapshot.
    pub fn node_cycles(&self, node: NodeId) -> u64 {
        let msp = (0..self.msps)
            .map(|q| self.msp_busy[node * self.msps + q])
            .max()
            .unwrap_or(0);
        self.core_cycles[node].max(msp)
    }

    /// Simulated time elapsed between `earlier` and this snapshot: the
    /// largest per-node clock advance.
    pub fn makespan_since(&self, earlier: &CounterSnapshot) -> u64 {
        (0..self.core_cycles.len())
            .map(|n| self.node_cycles(n) - earlier.node_cycles(n))
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_context_counts() {
        let cfg = default_pathfinder_config(8).unwrap();
        assert_eq!(cfg.contexts_per_node(), 1536);
        assert_eq!(cfg.total_contexts(), 8 * 1536);

        let one = default_pathfinder_config(1).unwrap();
        assert_eq!(one.contexts_per_node(), 1536);
        assert_eq!(one.total_contexts(), 1536);

        // 32 * 24 * 64, checked by independent arithmetic.
        let wide = default_pathfinder_config(32).unwrap();
        let oracle: u64 = (0..32u64).map(|_| 24 * 64).sum();
        assert_eq!(oracle, 49152);
        assert_eq!(wide.total_contexts(), oracle);
    }

    #[test]
    fn zero_nodes_rejected() {
        assert!(matches!(
            default_pathfinder_config(0),
            Err(SimError::InvalidArgument(_))
        ));
    }

    #[test]
    fn word_size_pinned() {
        let mut cfg = default_pathfinder_config(2).unwrap();
        assert_eq!(cfg.word_bytes, 8);
        cfg.apply_override("word_bytes = 4").unwrap();
        assert!(cfg.validated().is_err());
    }

    #[test]
    fn kv_round_trip_and_overrides() {
        let mut cfg = default_pathfinder_config(8).unwrap();
        cfg.apply_override("nodes = 32").unwrap();
        cfg.apply_override("cost_migration=100").unwrap();
        let cfg = cfg.validated().unwrap();
        assert_eq!(cfg.nodes, 32);
        assert_eq!(cfg.cost_migration, 100);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("machine.cfg");
        std::fs::write(&path, cfg.to_kv_string()).unwrap();
        let reread = MachineConfig::from_kv_file(&path).unwrap();
        assert_eq!(reread, cfg);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = default_pathfinder_config(2).unwrap();
        assert!(cfg.apply_override("frobnicate = 3").is_err());
        assert!(cfg.apply_override("no_equals_sign").is_err());
    }

    #[test]
    fn snapshot_totals_are_node_sums() {
        let c = CounterSet::new(3, 2);
        c.bump_migrations(1);
        c.bump_migrations(2);
        c.bump_local_reads(0, 5);
        c.bump_remote(2, RemoteKind::Min);
        let s = c.snapshot();
        assert_eq!(s.total_migrations(), s.migrations.iter().sum::<u64>());
        assert_eq!(s.total_migrations(), 2);
        assert_eq!(s.total_local_reads(), 5);
        assert_eq!(s.total_remote_min(), 1);
    }

    #[test]
    fn node_clock_is_max_of_core_and_busiest_queue() {
        let c = CounterSet::new(2, 2);
        c.advance_core_cycles(0, 10);
        c.add_msp_busy(0, 1, 25);
        c.add_msp_busy(1, 0, 4);
        assert_eq!(c.node_cycles(0), 25);
        assert_eq!(c.node_cycles(1), 4);
        assert_eq!(c.clock_cycles(), 25);
        c.advance_core_cycles(0, 20);
        assert_eq!(c.node_cycles(0), 30);
    }
}
