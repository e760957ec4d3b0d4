//! Simulated global memory with view semantics, read-triggered thread
//! migration and memory-side remote operations.
//!
//! `SimMemory` holds the word storage, the allocation table, the hardware
//! event counters and the thread-context occupancy book-keeping. The costed
//! operations threads perform live on [`crate::exec::Ctx`]; this module
//! supplies their state transitions (`apply_*`) plus raw host-side access
//! (`peek`/`poke`) used for loading data before any timings and for reading
//! results back out.

use std::cell::{Cell, RefCell};

use crate::error::{SimError, SimResult};
use crate::machine::{
    AllocId, CounterSet, GlobalAddress, MachineConfig, NodeId, RemoteKind, View,
};

struct Allocation {
    view: View,
    len: u64,
    /// Owning node; meaningful for the Absolute view only.
    home: NodeId,
    /// Placement slot standing in for the allocation's physical address;
    /// freed slots are reused, so a repeated allocate/free sequence lands
    /// on identical placements.
    salt: u32,
    /// Striped/Absolute: `len` words. Replicated: `len` words per node.
    words: Vec<Cell<u64>>,
}

/// The simulated memory of one machine instance.
pub struct SimMemory {
    cfg: MachineConfig,
    counters: CounterSet,
    allocs: RefCell<Vec<Option<Allocation>>>,
    free_salts: RefCell<std::collections::BinaryHeap<std::cmp::Reverse<u32>>>,
    next_salt: Cell<u32>,
    used_words: Vec<Cell<u64>>,
    occupancy: Vec<Cell<u64>>,
    live_threads: Cell<u64>,
    peak_live_threads: Cell<u64>,
}

/// Counter increments produced by one operation, mirrored into per-job
/// tallies by the engine.
#[derive(Debug, Default, Clone, Copy)]
pub struct OpCounts {
    pub migrations: u64,
    pub local_reads: u64,
    pub local_writes: u64,
    pub remote_min: u64,
    pub remote_add: u64,
    pub remote_write: u64,
}

/// Core-side cycle charge produced by one operation: occupies an issue
/// slot on `node` for `cycles` simulated cycles. Memory-side charges go
/// straight to the per-queue busy tallies, which drain in parallel.
#[derive(Debug, Clone, Copy)]
pub struct OpCost {
    pub node: NodeId,
    pub cycles: u64,
}

/// Outcome of one state transition: optional value, where the thread now
/// lives, what it cost and what it counted.
pub struct Applied {
    pub value: u64,
    pub new_node: NodeId,
    pub counts: OpCounts,
    pub cost: Option<OpCost>,
}

impl SimMemory {
    pub fn new(cfg: MachineConfig) -> SimMemory {
        let nodes = cfg.nodes;
        SimMemory {
            counters: CounterSet::new(nodes, cfg.msps_per_node),
            allocs: RefCell::new(Vec::new()),
            free_salts: RefCell::new(std::collections::BinaryHeap::new()),
            next_salt: Cell::new(0),
            used_words: (0..nodes).map(|_| Cell::new(0)).collect(),
            occupancy: (0..nodes).map(|_| Cell::new(0)).collect(),
            live_threads: Cell::new(0),
            peak_live_threads: Cell::new(0),
            cfg,
        }
    }

    pub fn config(&self) -> &MachineConfig {
        &self.cfg
    }

    pub fn counters(&self) -> &CounterSet {
        &self.counters
    }

    pub fn nodes(&self) -> usize {
        self.cfg.nodes
    }

    /// Number of words of a striped allocation of length `len` that land on
    /// `node`: balanced within 1 across the system.
    pub fn striped_words_on_node(&self, len: u64, node: NodeId) -> u64 {
        let n = self.cfg.nodes as u64;
        let node = node as u64;
        if node >= len {
            return 0;
        }
        (len - node - 1) / n + 1
    }

    fn charge_words(&self, demand: &[(NodeId, u64)]) -> SimResult<()> {
        for &(node, words) in demand {
            let used = self.used_words[node].get();
            let available = self.cfg.node_capacity_words.saturating_sub(used);
            if words > available {
                return Err(SimError::AllocationFailure {
                    node,
                    requested: words,
                    available,
                });
            }
        }
        for &(node, words) in demand {
            self.used_words[node].set(self.used_words[node].get() + words);
        }
        Ok(())
    }

    /// Allocate `len` words under `view`, every element initialized to
    /// `init`. Absolute-view allocations land on node 0; use
    /// [`SimMemory::alloc_absolute_on`] to place them elsewhere.
    pub fn alloc(&self, view: View, len: u64, init: u64) -> SimResult<AllocId> {
        match view {
            View::Absolute => self.alloc_absolute_on(0, len, init),
            _ => self.alloc_inner(view, len, 0, init),
        }
    }

    /// Allocate an Absolute-view block wholly on `node`.
    pub fn alloc_absolute_on(&self, node: NodeId, len: u64, init: u64) -> SimResult<AllocId> {
        if node >= self.cfg.nodes {
            return Err(SimError::InvalidArgument(format!(
                "node {node} out of range (nodes = {})",
                self.cfg.nodes
            )));
        }
        self.alloc_inner(View::Absolute, len, node, init)
    }

    fn alloc_inner(&self, view: View, len: u64, home: NodeId, init: u64) -> SimResult<AllocId> {
        if len == 0 {
            return Err(SimError::InvalidArgument(
                "allocation length must be >= 1".into(),
            ));
        }
        let nodes = self.cfg.nodes;
        let demand: Vec<(NodeId, u64)> = match view {
            View::Striped => (0..nodes)
                .map(|n| (n, self.striped_words_on_node(len, n)))
                .filter(|&(_, w)| w > 0)
                .collect(),
            View::Replicated => (0..nodes).map(|n| (n, len)).collect(),
            View::Absolute => vec![(home, len)],
        };
        self.charge_words(&demand)?;
        let storage_len = match view {
            View::Replicated => len
                .checked_mul(nodes as u64)
                .ok_or_else(|| SimError::InvalidArgument("allocation too large".into()))?,
            _ => len,
        };
        let words = (0..storage_len).map(|_| Cell::new(init)).collect();
        let salt = match self.free_salts.borrow_mut().pop() {
            Some(std::cmp::Reverse(s)) => s,
            None => {
                let s = self.next_salt.get();
                self.next_salt.set(s + 1);
                s
            }
        };
        let mut table = self.allocs.borrow_mut();
        let id = AllocId(table.len() as u32);
        table.push(Some(Allocation {
            view,
            len,
            home,
            salt,
            words,
        }));
        Ok(id)
    }

    /// Release an allocation, returning its words to the per-node capacity.
    pub fn free(&self, id: AllocId) -> SimResult<()> {
        let mut table = self.allocs.borrow_mut();
        let slot = table
            .get_mut(id.0 as usize)
            .ok_or_else(|| SimError::InvalidAddress(format!("unknown allocation {:?}", id)))?;
        let alloc = slot
            .take()
            .ok_or_else(|| SimError::InvalidAddress(format!("double free of {:?}", id)))?;
        let nodes = self.cfg.nodes;
        match alloc.view {
            View::Striped => {
                for n in 0..nodes {
                    let w = self.striped_words_on_node(alloc.len, n);
                    self.used_words[n].set(self.used_words[n].get() - w);
                }
            }
            View::Replicated => {
                for n in 0..nodes {
                    self.used_words[n].set(self.used_words[n].get() - alloc.len);
                }
            }
            View::Absolute => {
                self.used_words[alloc.home].set(self.used_words[alloc.home].get() - alloc.len);
            }
        }
        self.free_salts
            .borrow_mut()
            .push(std::cmp::Reverse(alloc.salt));
        Ok(())
    }

    pub fn used_words_on(&self, node: NodeId) -> u64 {
        self.used_words[node].get()
    }

    /// Build an address into `alloc`, validating the handle and bounds.
    pub fn addr(&self, alloc: AllocId, index: u64) -> SimResult<GlobalAddress> {
        let table = self.allocs.borrow();
        let a = lookup(&table, alloc)?;
        if index >= a.len {
            return Err(SimError::InvalidAddress(format!(
                "index {index} out of bounds for allocation of length {}",
                a.len
            )));
        }
        Ok(GlobalAddress {
            view: a.view,
            alloc,
            index,
        })
    }

    pub fn alloc_len(&self, alloc: AllocId) -> SimResult<u64> {
        let table = self.allocs.borrow();
        Ok(lookup(&table, alloc)?.len)
    }

    pub fn alloc_view(&self, alloc: AllocId) -> SimResult<View> {
        let table = self.allocs.borrow();
        Ok(lookup(&table, alloc)?.view)
    }

    /// Home node of the Absolute-view allocation `alloc`.
    pub fn alloc_home(&self, alloc: AllocId) -> SimResult<NodeId> {
        let table = self.allocs.borrow();
        Ok(lookup(&table, alloc)?.home)
    }

    /// Resolve `addr` to the node owning it. Replicated addresses resolve to
    /// the querying context's `current` node. Pure in (addr, table, current).
    pub fn home_node(&self, addr: GlobalAddress, current: NodeId) -> SimResult<NodeId> {
        self.resolve(addr, current).map(|r| r.node)
    }

    fn resolve(&self, addr: GlobalAddress, current: NodeId) -> SimResult<Resolved> {
        let table = self.allocs.borrow();
        let a = lookup(&table, addr.alloc)?;
        if a.view != addr.view {
            return Err(SimError::InvalidAddress(format!(
                "address view {} does not match allocation view {}",
                addr.view, a.view
            )));
        }
        if addr.index >= a.len {
            return Err(SimError::InvalidAddress(format!(
                "index {} out of bounds for allocation of length {}",
                addr.index, a.len
            )));
        }
        let nodes = self.cfg.nodes as u64;
        let (node, local_offset, word) = match a.view {
            View::Striped => (
                (addr.index % nodes) as NodeId,
                addr.index / nodes,
                addr.index,
            ),
            View::Absolute => (a.home, addr.index, addr.index),
            View::Replicated => (
                current,
                addr.index,
                current as u64 * a.len + addr.index,
            ),
        };
        // Queue selection hashes (placement, local offset): separate live
        // allocations sit at separate physical placements, and structured
        // id patterns (power-of-two strides, clustered hot vertices)
        // spread across the memory-side processors. One cell always maps
        // to one queue, so same-word operations still serialize.
        let mixed = (local_offset ^ ((a.salt as u64) << 17) ^ (local_offset >> 7))
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Ok(Resolved {
            node,
            word,
            queue: (mixed >> 32) as usize % self.cfg.msps_per_node,
        })
    }

    fn word_get(&self, alloc: AllocId, word: u64) -> u64 {
        let table = self.allocs.borrow();
        table[alloc.0 as usize].as_ref().unwrap().words[word as usize].get()
    }

    fn word_set(&self, alloc: AllocId, word: u64, value: u64) {
        let table = self.allocs.borrow();
        table[alloc.0 as usize].as_ref().unwrap().words[word as usize].set(value);
    }

    // ---- raw host access (loading inputs, reading results; uncounted) ----

    /// Read a word without counting events. Replicated addresses need an
    /// explicit node.
    pub fn peek_on(&self, addr: GlobalAddress, node: NodeId) -> SimResult<u64> {
        let r = self.resolve(addr, node)?;
        Ok(self.word_get(addr.alloc, r.word))
    }

    /// Read a Striped/Absolute word without counting events.
    pub fn peek(&self, addr: GlobalAddress) -> SimResult<u64> {
        if addr.view == View::Replicated {
            return Err(SimError::InvalidArgument(
                "peek on a replicated address requires a node; use peek_on".into(),
            ));
        }
        self.peek_on(addr, 0)
    }

    /// Write a word without counting events (data loading happens before any
    /// timings).
    pub fn poke(&self, addr: GlobalAddress, value: u64) -> SimResult<()> {
        if addr.view == View::Replicated {
            return Err(SimError::InvalidArgument(
                "poke on a replicated address requires a node; use poke_on".into(),
            ));
        }
        let r = self.resolve(addr, 0)?;
        self.word_set(addr.alloc, r.word, value);
        Ok(())
    }

    pub fn poke_on(&self, addr: GlobalAddress, node: NodeId, value: u64) -> SimResult<()> {
        let r = self.resolve(addr, node)?;
        self.word_set(addr.alloc, r.word, value);
        Ok(())
    }

    /// Copy a whole Striped/Absolute allocation out in element order.
    pub fn peek_all(&self, alloc: AllocId) -> SimResult<Vec<u64>> {
        let len = self.alloc_len(alloc)?;
        let view = self.alloc_view(alloc)?;
        if view == View::Replicated {
            return Err(SimError::InvalidArgument(
                "peek_all is not defined for replicated allocations".into(),
            ));
        }
        (0..len)
            .map(|i| self.peek(self.addr(alloc, i)?))
            .collect()
    }

    // ---- context occupancy ----

    pub fn live_threads(&self) -> u64 {
        self.live_threads.get()
    }

    /// High-water mark of simultaneously live threads.
    pub fn peak_live_threads(&self) -> u64 {
        self.peak_live_threads.get()
    }

    pub fn occupancy_on(&self, node: NodeId) -> u64 {
        self.occupancy[node].get()
    }

    /// Claim a hardware context on `node`; fails when the system is out of
    /// thread contexts.
    pub(crate) fn acquire_context(&self, node: NodeId) -> SimResult<()> {
        let live = self.live_threads.get();
        if live + 1 > self.cfg.total_contexts() {
            return Err(SimError::ContextExhaustion {
                demanded: live + 1,
                capacity: self.cfg.total_contexts(),
                job_set: None,
            });
        }
        self.live_threads.set(live + 1);
        if live + 1 > self.peak_live_threads.get() {
            self.peak_live_threads.set(live + 1);
        }
        self.occupancy[node].set(self.occupancy[node].get() + 1);
        Ok(())
    }

    pub(crate) fn move_context(&self, from: NodeId, to: NodeId) {
        self.occupancy[from].set(self.occupancy[from].get() - 1);
        self.occupancy[to].set(self.occupancy[to].get() + 1);
    }

    pub(crate) fn release_context(&self, node: NodeId) {
        self.occupancy[node].set(self.occupancy[node].get() - 1);
        self.live_threads.set(self.live_threads.get() - 1);
    }

    // ---- costed state transitions, driven by exec::Ctx ----

    /// Read one word. A remote Striped/Absolute read migrates the thread to
    /// the home node first; Replicated reads never migrate.
    pub(crate) fn apply_read(&self, current: NodeId, addr: GlobalAddress) -> SimResult<Applied> {
        let r = self.resolve(addr, current)?;
        let mut counts = OpCounts::default();
        let mut cycles = 0;
        if r.node != current {
            debug_assert!(addr.view != View::Replicated);
            self.move_context(current, r.node);
            self.counters.bump_migrations(r.node);
            counts.migrations = 1;
            cycles += self.cfg.cost_migration;
        }
        self.counters.bump_local_reads(r.node, 1);
        counts.local_reads = 1;
        cycles += self.cfg.cost_local_access;
        Ok(Applied {
            value: self.word_get(addr.alloc, r.word),
            new_node: r.node,
            counts,
            cost: Some(OpCost {
                node: r.node,
                cycles,
            }),
        })
    }

    /// Write one word. Writes never migrate: a remote write is handled by
    /// the destination's memory-side processor. A Replicated write targets
    /// only the copy on the writer's current node.
    pub(crate) fn apply_write(
        &self,
        current: NodeId,
        addr: GlobalAddress,
        value: u64,
    ) -> SimResult<Applied> {
        let r = self.resolve(addr, current)?;
        self.word_set(addr.alloc, r.word, value);
        let mut counts = OpCounts::default();
        if r.node == current {
            self.counters.bump_local_writes(r.node, 1);
            counts.local_writes = 1;
        } else {
            self.counters.bump_remote(r.node, RemoteKind::Write);
            counts.remote_write = 1;
            self.counters
                .add_msp_busy(r.node, r.queue, self.cfg.cost_remote_op);
        }
        Ok(Applied {
            value,
            new_node: current,
            counts,
            // The issuing core spends an issue slot either way.
            cost: Some(OpCost {
                node: current,
                cycles: self.cfg.cost_local_access,
            }),
        })
    }

    /// Atomic read-modify-write executed by the home node's memory-side
    /// processor; the issuing thread never migrates.
    pub(crate) fn apply_remote_rmw(
        &self,
        current: NodeId,
        addr: GlobalAddress,
        op: RemoteRmw,
    ) -> SimResult<Applied> {
        let r = self.resolve(addr, current)?;
        let old = self.word_get(addr.alloc, r.word);
        let (new, kind, result) = match op {
            RemoteRmw::Min(v) => (old.min(v), RemoteKind::Min, old.min(v)),
            RemoteRmw::Add(v) => (old.wrapping_add(v), RemoteKind::Add, old.wrapping_add(v)),
            RemoteRmw::ClaimIfEquals { expected, new } => {
                if old == expected {
                    (new, RemoteKind::Write, 1)
                } else {
                    (old, RemoteKind::Write, 0)
                }
            }
        };
        self.word_set(addr.alloc, r.word, new);
        self.counters.bump_remote(r.node, kind);
        let mut counts = OpCounts::default();
        match kind {
            RemoteKind::Min => counts.remote_min = 1,
            RemoteKind::Add => counts.remote_add = 1,
            RemoteKind::Write => counts.remote_write = 1,
        }
        self.counters
            .add_msp_busy(r.node, r.queue, self.cfg.cost_remote_op);
        Ok(Applied {
            value: result,
            new_node: current,
            counts,
            cost: Some(OpCost {
                node: current,
                cycles: self.cfg.cost_local_access,
            }),
        })
    }

    /// Explicit migration (the changed-flag reduction walks nodes this way).
    pub(crate) fn apply_migrate(&self, current: NodeId, to: NodeId) -> SimResult<Applied> {
        if to >= self.cfg.nodes {
            return Err(SimError::InvalidArgument(format!(
                "node {to} out of range"
            )));
        }
        let mut counts = OpCounts::default();
        let mut cost = None;
        if to != current {
            self.move_context(current, to);
            self.counters.bump_migrations(to);
            counts.migrations = 1;
            cost = Some(OpCost {
                node: to,
                cycles: self.cfg.cost_migration,
            });
        }
        Ok(Applied {
            value: 0,
            new_node: to,
            counts,
            cost,
        })
    }

    /// Per-node local loop over the elements of striped allocations that
    /// live on `node`: for each local element index `i`, reads `reads_per`
    /// words and writes `writes_per` words. Used by the striped bulk
    /// helpers; the closure does the actual element work via peek/poke and
    /// this records the events and cost.
    pub(crate) fn apply_striped_local_loop(
        &self,
        node: NodeId,
        elements: u64,
        reads_per: u64,
        writes_per: u64,
    ) -> Applied {
        let reads = elements * reads_per;
        let writes = elements * writes_per;
        self.counters.bump_local_reads(node, reads);
        self.counters.bump_local_writes(node, writes);
        let counts = OpCounts {
            local_reads: reads,
            local_writes: writes,
            ..OpCounts::default()
        };
        Applied {
            value: elements,
            new_node: node,
            counts,
            cost: Some(OpCost {
                node,
                cycles: (reads + writes).max(1) * self.cfg.cost_local_access,
            }),
        }
    }

    /// Element indices of a striped allocation homed on `node`.
    pub fn striped_local_indices(
        &self,
        alloc: AllocId,
        node: NodeId,
    ) -> SimResult<impl Iterator<Item = u64>> {
        let len = self.alloc_len(alloc)?;
        if self.alloc_view(alloc)? != View::Striped {
            return Err(SimError::InvalidArgument(
                "striped_local_indices requires a striped allocation".into(),
            ));
        }
        let nodes = self.cfg.nodes as u64;
        Ok((node as u64..len).step_by(nodes as usize))
    }
}

pub(crate) enum RemoteRmw {
    Min(u64),
    Add(u64),
    ClaimIfEquals { expected: u64, new: u64 },
}

struct Resolved {
    node: NodeId,
    word: u64,
    queue: usize,
}

fn lookup(table: &[Option<Allocation>], id: AllocId) -> SimResult<&Allocation> {
    table
        .get(id.0 as usize)
        .and_then(|slot| slot.as_ref())
        .ok_or_else(|| SimError::InvalidAddress(format!("unknown allocation {id:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::default_pathfinder_config;

    fn mem(nodes: usize) -> SimMemory {
        SimMemory::new(default_pathfinder_config(nodes).unwrap())
    }

    #[test]
    fn striped_allocation_is_balanced() {
        let m = mem(8);
        let id = m.alloc(View::Striped, 8, 0).unwrap();
        for n in 0..8 {
            assert_eq!(m.striped_words_on_node(m.alloc_len(id).unwrap(), n), 1);
        }

        let m4 = mem(4);
        let id = m4.alloc(View::Striped, 10, 7).unwrap();
        let counts: Vec<u64> = (0..4)
            .map(|n| m4.striped_words_on_node(m4.alloc_len(id).unwrap(), n))
            .collect();
        assert_eq!(counts, vec![3, 3, 2, 2]);
        for i in 0..10 {
            assert_eq!(m4.peek(m4.addr(id, i).unwrap()).unwrap(), 7);
        }
    }

    #[test]
    fn replicated_allocation_has_independent_copies() {
        let m = mem(4);
        let id = m.alloc(View::Replicated, 1, 0).unwrap();
        let addr = m.addr(id, 0).unwrap();
        m.poke_on(addr, 2, 9).unwrap();
        for n in 0..4 {
            let expect = if n == 2 { 9 } else { 0 };
            assert_eq!(m.peek_on(addr, n).unwrap(), expect);
        }
    }

    #[test]
    fn home_node_examples() {
        let m = mem(8);
        let id = m.alloc(View::Striped, 16, 0).unwrap();
        assert_eq!(m.home_node(m.addr(id, 0).unwrap(), 3).unwrap(), 0);
        assert_eq!(m.home_node(m.addr(id, 9).unwrap(), 3).unwrap(), 1);

        let m32 = mem(32);
        let id = m32.alloc(View::Striped, 4096, 0).unwrap();
        assert_eq!(m32.home_node(m32.addr(id, 4095).unwrap(), 0).unwrap(), 31);

        // Pure function of (addr, table): repeated calls agree.
        let a = m32.addr(id, 1234).unwrap();
        assert_eq!(
            m32.home_node(a, 0).unwrap(),
            m32.home_node(a, 17).unwrap()
        );
    }

    #[test]
    fn allocation_failure_on_capacity() {
        let mut cfg = default_pathfinder_config(2).unwrap();
        cfg.node_capacity_words = 4;
        let m = SimMemory::new(cfg.validated().unwrap());
        assert!(m.alloc(View::Striped, 8, 0).is_ok());
        match m.alloc(View::Striped, 2, 0) {
            Err(SimError::AllocationFailure { .. }) => {}
            other => panic!("expected allocation failure, got {other:?}"),
        }
    }

    #[test]
    fn free_returns_capacity() {
        let mut cfg = default_pathfinder_config(2).unwrap();
        cfg.node_capacity_words = 4;
        let m = SimMemory::new(cfg.validated().unwrap());
        let id = m.alloc(View::Striped, 8, 0).unwrap();
        m.free(id).unwrap();
        assert_eq!(m.used_words_on(0), 0);
        assert!(m.alloc(View::Striped, 8, 0).is_ok());
        assert!(m.free(id).is_err());
    }

    #[test]
    fn unknown_handle_is_invalid_address() {
        let m = mem(2);
        let id = m.alloc(View::Striped, 4, 0).unwrap();
        m.free(id).unwrap();
        assert!(matches!(
            m.addr(id, 0),
            Err(SimError::InvalidAddress(_))
        ));
    }

    #[test]
    fn out_of_bounds_index_rejected() {
        let m = mem(2);
        let id = m.alloc(View::Striped, 4, 0).unwrap();
        assert!(m.addr(id, 4).is_err());
        assert!(m.addr(id, 3).is_ok());
    }
}
