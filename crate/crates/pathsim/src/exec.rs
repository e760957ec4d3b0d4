//! Deterministic execution engine for simulated threads.
//!
//! Logical threads are hand-polled futures advanced in lock-step rounds: in
//! each round every runnable thread performs exactly one memory operation
//! and then yields back to the scheduler. Determinism comes from the round
//! structure plus a fixed poll order (task id order for [`Schedule::Fifo`],
//! a seeded shuffle for [`Schedule::Seeded`]). A fixed seed and scheduler
//! give bit-identical counters run to run.
//!
//! Simulated time:
//!
//! * core side: the ops issued by threads on a node in one round share its
//!   issue bandwidth of one instruction per core per cycle, so a round
//!   with `k` ops whose largest cost is `c` advances the node's core tally
//!   by `ceil(k / cores_per_node) - 1 + c` cycles (latencies overlap
//!   across thread contexts, issue slots do not — oversubscription slows
//!   everyone);
//! * memory side: each remote operation adds its cost to the busy tally of
//!   one MSP queue on the home node, and the queues drain in parallel with
//!   the cores — a node's clock is the larger of its core tally and its
//!   busiest queue.
//!
//! The simulated makespan of a run is the maximum per-node clock delta.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::future::Future;
use std::hash::{BuildHasherDefault, Hasher};
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, RawWaker, RawWakerVTable, Waker};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{SimError, SimResult};
use crate::machine::{AllocId, GlobalAddress, NodeId, View};
use crate::memsys::{Applied, OpCost, OpCounts, RemoteRmw, SimMemory};

/// Scheduler policy. Both are deterministic; `Seeded` explores alternative
/// interleavings for concurrency testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Poll runnable tasks in task-id (spawn) order every round.
    Fifo,
    /// Shuffle the runnable set each round with a seeded generator.
    Seeded(u64),
}

pub type TaskId = u64;
type TaskFuture = Pin<Box<dyn Future<Output = SimResult<()>>>>;

/// Index of a registered job, used to attribute events to queries.
pub type JobId = usize;

/// Per-job event tally maintained by the engine.
#[derive(Debug, Clone, Default)]
pub struct JobTally {
    pub migrations: u64,
    pub local_reads: u64,
    pub local_writes: u64,
    pub remote_min: u64,
    pub remote_add: u64,
    pub remote_write: u64,
    /// Simulated clock (relative to the run start) when the job's root task
    /// was spawned / completed.
    pub start_cycles: u64,
    pub end_cycles: Option<u64>,
}

impl JobTally {
    fn absorb(&mut self, c: &OpCounts) {
        self.migrations += c.migrations;
        self.local_reads += c.local_reads;
        self.local_writes += c.local_writes;
        self.remote_min += c.remote_min;
        self.remote_add += c.remote_add;
        self.remote_write += c.remote_write;
    }

    pub fn total_remote_ops(&self) -> u64 {
        self.remote_min + self.remote_add + self.remote_write
    }
}

struct Task {
    fut: TaskFuture,
    /// Signalled when the task completes.
    wg: Option<WaitGroup>,
    /// Set on job root tasks; completion stamps the job's end clock.
    job_root: Option<JobId>,
}

/// Task ids are sequential; a multiplicative mix is plenty for the hot
/// task-map lookups.
#[derive(Default)]
struct TaskIdHasher(u64);

impl Hasher for TaskIdHasher {
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 ^ b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
    }
    fn write_u64(&mut self, i: u64) {
        self.0 = i.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

type TaskMap = HashMap<TaskId, Task, BuildHasherDefault<TaskIdHasher>>;

struct EngState {
    tasks: TaskMap,
    /// Runnable next round (requeues, spawns and wakes).
    next: Vec<TaskId>,
    next_id: TaskId,
    spawned: Vec<(TaskId, Task)>,
    /// Core-op costs recorded this round, per node.
    round_core: Vec<Vec<u64>>,
    /// Whether the task being polled should run again next round.
    requeue_current: bool,
    error: Option<SimError>,
    finished_roots: Vec<JobId>,
    rng: Option<ChaCha8Rng>,
}

pub(crate) struct EngineCore {
    pub mem: Rc<SimMemory>,
    st: RefCell<EngState>,
    jobs: RefCell<Vec<JobTally>>,
    /// Per-node cycle tallies at engine creation; the run clock is relative
    /// to these.
    base_cycles: Vec<u64>,
}

impl EngineCore {
    fn record(&self, applied: &Applied, job: Option<JobId>) {
        if let Some(j) = job {
            self.jobs.borrow_mut()[j].absorb(&applied.counts);
        }
        if let Some(OpCost { node, cycles }) = applied.cost {
            self.st.borrow_mut().round_core[node].push(cycles);
        }
    }

    fn clock(&self) -> u64 {
        let counters = self.mem.counters();
        (0..self.mem.nodes())
            .map(|n| counters.node_cycles(n) - self.base_cycles[n])
            .max()
            .unwrap_or(0)
    }
}

/// Handle a task uses to perform simulated-memory operations, migrate,
/// spawn children and wait for them. One `Ctx` is one simulated thread; it
/// occupies a hardware context on its current node until it is dropped.
pub struct Ctx {
    core: Rc<EngineCore>,
    tid: TaskId,
    node: NodeId,
    alive: bool,
    job: Option<JobId>,
}

impl Drop for Ctx {
    fn drop(&mut self) {
        if self.alive {
            self.core.mem.release_context(self.node);
            self.alive = false;
        }
    }
}

impl Ctx {
    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn thread_id(&self) -> TaskId {
        self.tid
    }

    pub fn mem(&self) -> &SimMemory {
        &self.core.mem
    }

    /// Release this thread's context early. Any further operation fails
    /// with a use-after-termination error.
    pub fn terminate(&mut self) {
        if self.alive {
            self.core.mem.release_context(self.node);
            self.alive = false;
        }
    }

    fn check_alive(&self) -> SimResult<()> {
        if self.alive {
            Ok(())
        } else {
            Err(SimError::UseAfterTermination(self.tid))
        }
    }

    fn finish_op(&mut self, applied: Applied) -> u64 {
        self.node = applied.new_node;
        self.core.record(&applied, self.job);
        applied.value
    }

    /// Read one word; remote Striped/Absolute reads migrate this thread.
    pub async fn read(&mut self, addr: GlobalAddress) -> SimResult<u64> {
        self.check_alive()?;
        let applied = self.core.mem.apply_read(self.node, addr)?;
        let v = self.finish_op(applied);
        yield_once().await;
        Ok(v)
    }

    /// Write one word; never migrates.
    pub async fn write(&mut self, addr: GlobalAddress, value: u64) -> SimResult<()> {
        self.check_alive()?;
        let applied = self.core.mem.apply_write(self.node, addr, value)?;
        self.finish_op(applied);
        yield_once().await;
        Ok(())
    }

    /// Atomic fetch-min executed by the home node's memory-side processor.
    pub async fn remote_min(&mut self, addr: GlobalAddress, value: u64) -> SimResult<()> {
        self.check_alive()?;
        let applied = self
            .core
            .mem
            .apply_remote_rmw(self.node, addr, RemoteRmw::Min(value))?;
        self.finish_op(applied);
        yield_once().await;
        Ok(())
    }

    /// Atomic fetch-add executed by the home node's memory-side processor.
    pub async fn remote_add(&mut self, addr: GlobalAddress, value: u64) -> SimResult<()> {
        self.check_alive()?;
        let applied = self
            .core
            .mem
            .apply_remote_rmw(self.node, addr, RemoteRmw::Add(value))?;
        self.finish_op(applied);
        yield_once().await;
        Ok(())
    }

    /// Compare-style remote write: stores `new` iff the word still equals
    /// `expected`, returning whether the claim won. Never migrates.
    pub async fn remote_claim(
        &mut self,
        addr: GlobalAddress,
        expected: u64,
        new: u64,
    ) -> SimResult<bool> {
        self.check_alive()?;
        let applied = self.core.mem.apply_remote_rmw(
            self.node,
            addr,
            RemoteRmw::ClaimIfEquals { expected, new },
        )?;
        let won = self.finish_op(applied) == 1;
        yield_once().await;
        Ok(won)
    }

    /// Move this thread to `node` (no-op when already there).
    pub async fn migrate_to(&mut self, node: NodeId) -> SimResult<()> {
        self.check_alive()?;
        let applied = self.core.mem.apply_migrate(self.node, node)?;
        self.finish_op(applied);
        yield_once().await;
        Ok(())
    }

    /// Write `f(i)` to every element `i` of a striped allocation that lives
    /// on this thread's node, as one local loop.
    pub async fn fill_striped_local(
        &mut self,
        alloc: AllocId,
        f: impl Fn(u64) -> u64,
    ) -> SimResult<()> {
        self.check_alive()?;
        let mem = &self.core.mem;
        let mut elements = 0;
        for i in mem.striped_local_indices(alloc, self.node)? {
            mem.poke(mem.addr(alloc, i)?, f(i))?;
            elements += 1;
        }
        let applied = mem.apply_striped_local_loop(self.node, elements, 0, 1);
        self.finish_op(applied);
        yield_once().await;
        Ok(())
    }

    /// Copy the elements of `src` homed on this node into `dst`
    /// element-wise (both striped, same length), as one local loop.
    pub async fn copy_striped_local(&mut self, src: AllocId, dst: AllocId) -> SimResult<()> {
        self.check_alive()?;
        let mem = &self.core.mem;
        if mem.alloc_len(src)? != mem.alloc_len(dst)? {
            return Err(SimError::InvalidArgument(
                "copy_striped_local requires equal lengths".into(),
            ));
        }
        let mut elements = 0;
        for i in mem.striped_local_indices(src, self.node)? {
            let v = mem.peek(mem.addr(src, i)?)?;
            mem.poke(mem.addr(dst, i)?, v)?;
            elements += 1;
        }
        let applied = mem.apply_striped_local_loop(self.node, elements, 1, 1);
        self.finish_op(applied);
        yield_once().await;
        Ok(())
    }

    /// Compare the elements of `a` and `b` homed on this node; returns true
    /// if any differ. One local loop.
    pub async fn compare_striped_local(&mut self, a: AllocId, b: AllocId) -> SimResult<bool> {
        self.check_alive()?;
        let mem = &self.core.mem;
        if mem.alloc_len(a)? != mem.alloc_len(b)? {
            return Err(SimError::InvalidArgument(
                "compare_striped_local requires equal lengths".into(),
            ));
        }
        let mut elements = 0;
        let mut any = false;
        for i in mem.striped_local_indices(a, self.node)? {
            let va = mem.peek(mem.addr(a, i)?)?;
            let vb = mem.peek(mem.addr(b, i)?)?;
            any |= va != vb;
            elements += 1;
        }
        let applied = mem.apply_striped_local_loop(self.node, elements, 2, 0);
        self.finish_op(applied);
        yield_once().await;
        Ok(any)
    }

    /// Logical OR over all per-node copies of a replicated boolean flag: a
    /// single thread visits the nodes in order starting from its current
    /// node, short-circuiting on the first true. At most `nodes - 1`
    /// migrations.
    pub async fn reduce_or_replicated(&mut self, flag: AllocId) -> SimResult<bool> {
        self.check_alive()?;
        let mem = &self.core.mem;
        if mem.alloc_view(flag)? != View::Replicated {
            return Err(SimError::InvalidArgument(
                "reduce_or_replicated requires a replicated allocation".into(),
            ));
        }
        let addr = self.core.mem.addr(flag, 0)?;
        let nodes = self.core.mem.nodes();
        let start = self.node;
        for k in 0..nodes {
            let n = (start + k) % nodes;
            self.migrate_to(n).await?;
            if self.read(addr).await? != 0 {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Store `value` into every per-node copy of a replicated allocation's
    /// element 0 by visiting the nodes in order.
    pub async fn broadcast_replicated(&mut self, flag: AllocId, value: u64) -> SimResult<()> {
        self.check_alive()?;
        let mem = &self.core.mem;
        if mem.alloc_view(flag)? != View::Replicated {
            return Err(SimError::InvalidArgument(
                "broadcast_replicated requires a replicated allocation".into(),
            ));
        }
        let addr = self.core.mem.addr(flag, 0)?;
        let nodes = self.core.mem.nodes();
        let start = self.node;
        for k in 0..nodes {
            let n = (start + k) % nodes;
            self.migrate_to(n).await?;
            self.write(addr, value).await?;
        }
        Ok(())
    }

    /// Launch a thread whose initial context lives on the same node as
    /// `addr` (for replicated addresses: this thread's node). Fails with
    /// context exhaustion when the system is out of hardware contexts.
    pub fn spawn_at<F, Fut>(
        &self,
        addr: GlobalAddress,
        wg: Option<&WaitGroup>,
        body: F,
    ) -> SimResult<TaskId>
    where
        F: FnOnce(Ctx) -> Fut,
        Fut: Future<Output = SimResult<()>> + 'static,
    {
        self.check_alive()?;
        let home = self.core.mem.home_node(addr, self.node)?;
        spawn_inner(&self.core, home, self.job, wg, None, body)
    }

    /// Launch a thread directly on `node`.
    pub fn spawn_on<F, Fut>(
        &self,
        node: NodeId,
        wg: Option<&WaitGroup>,
        body: F,
    ) -> SimResult<TaskId>
    where
        F: FnOnce(Ctx) -> Fut,
        Fut: Future<Output = SimResult<()>> + 'static,
    {
        self.check_alive()?;
        spawn_inner(&self.core, node, self.job, wg, None, body)
    }

    /// Block until every task registered on `wg` has completed.
    pub fn wait<'a>(&'a mut self, wg: &'a WaitGroup) -> WaitFuture<'a> {
        WaitFuture { ctx: self, wg }
    }
}

fn spawn_inner<F, Fut>(
    core: &Rc<EngineCore>,
    node: NodeId,
    job: Option<JobId>,
    wg: Option<&WaitGroup>,
    job_root: Option<JobId>,
    body: F,
) -> SimResult<TaskId>
where
    F: FnOnce(Ctx) -> Fut,
    Fut: Future<Output = SimResult<()>> + 'static,
{
    core.mem.acquire_context(node)?;
    let tid = {
        let mut st = core.st.borrow_mut();
        let tid = st.next_id;
        st.next_id += 1;
        tid
    };
    let ctx = Ctx {
        core: Rc::clone(core),
        tid,
        node,
        alive: true,
        job,
    };
    if let Some(wg) = wg {
        wg.inner.remaining.set(wg.inner.remaining.get() + 1);
    }
    let task = Task {
        fut: Box::pin(body(ctx)),
        wg: wg.cloned(),
        job_root,
    };
    core.st.borrow_mut().spawned.push((tid, task));
    Ok(tid)
}

/// Completion counter used for fork-join phases.
#[derive(Clone)]
pub struct WaitGroup {
    inner: Rc<WgInner>,
}

struct WgInner {
    remaining: Cell<usize>,
    waiter: Cell<Option<TaskId>>,
}

impl WaitGroup {
    pub fn new() -> WaitGroup {
        WaitGroup {
            inner: Rc::new(WgInner {
                remaining: Cell::new(0),
                waiter: Cell::new(None),
            }),
        }
    }

    pub fn remaining(&self) -> usize {
        self.inner.remaining.get()
    }
}

impl Default for WaitGroup {
    fn default() -> Self {
        WaitGroup::new()
    }
}

pub struct WaitFuture<'a> {
    ctx: &'a mut Ctx,
    wg: &'a WaitGroup,
}

impl Future for WaitFuture<'_> {
    type Output = ();

    fn poll(self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<()> {
        if self.wg.inner.remaining.get() == 0 {
            Poll::Ready(())
        } else {
            self.wg.inner.waiter.set(Some(self.ctx.tid));
            self.ctx.core.st.borrow_mut().requeue_current = false;
            Poll::Pending
        }
    }
}

struct YieldOnce {
    polled: bool,
}

fn yield_once() -> YieldOnce {
    YieldOnce { polled: false }
}

impl Future for YieldOnce {
    type Output = ();

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<()> {
        if self.polled {
            Poll::Ready(())
        } else {
            self.polled = true;
            Poll::Pending
        }
    }
}

/// The round-based scheduler. One engine drives one run to completion.
pub struct Engine {
    core: Rc<EngineCore>,
}

impl Drop for Engine {
    fn drop(&mut self) {
        // Tasks hold the core through their Ctx; dropping them here breaks
        // the reference cycle if the engine is abandoned mid-run.
        let mut st = self.core.st.borrow_mut();
        st.tasks.clear();
        st.spawned.clear();
    }
}

impl Engine {
    pub fn new(mem: Rc<SimMemory>, schedule: Schedule) -> Engine {
        let nodes = mem.nodes();
        let base_cycles = (0..nodes).map(|n| mem.counters().node_cycles(n)).collect();
        let rng = match schedule {
            Schedule::Fifo => None,
            Schedule::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Engine {
            core: Rc::new(EngineCore {
                mem,
                st: RefCell::new(EngState {
                    tasks: TaskMap::default(),
                    next: Vec::new(),
                    next_id: 0,
                    spawned: Vec::new(),
                    round_core: (0..nodes).map(|_| Vec::new()).collect(),
                    requeue_current: true,
                    error: None,
                    finished_roots: Vec::new(),
                    rng,
                }),
                jobs: RefCell::new(Vec::new()),
                base_cycles,
            }),
        }
    }

    pub fn mem(&self) -> &Rc<SimMemory> {
        &self.core.mem
    }

    /// Register a job for event attribution; returns its id.
    pub fn register_job(&self) -> JobId {
        let mut jobs = self.core.jobs.borrow_mut();
        jobs.push(JobTally {
            start_cycles: self.core.clock(),
            ..JobTally::default()
        });
        jobs.len() - 1
    }

    pub fn job_tallies(&self) -> Vec<JobTally> {
        self.core.jobs.borrow().clone()
    }

    /// Simulated cycles elapsed since this engine was created (max over
    /// per-node tallies).
    pub fn clock_cycles(&self) -> u64 {
        self.core.clock()
    }

    /// Spawn a top-level task on `node`, optionally as the root of `job`.
    pub fn spawn_root_on<F, Fut>(
        &self,
        node: NodeId,
        job: Option<JobId>,
        body: F,
    ) -> SimResult<TaskId>
    where
        F: FnOnce(Ctx) -> Fut,
        Fut: Future<Output = SimResult<()>> + 'static,
    {
        spawn_inner(&self.core, node, job, None, job, body)
    }

    /// Drive all tasks to completion. The first task error aborts the run:
    /// remaining tasks are dropped (their contexts released) and the error
    /// is returned.
    pub fn run(&mut self) -> SimResult<()> {
        let waker = noop_waker();
        let mut cx = Context::from_waker(&waker);
        let mut batch: Vec<TaskId> = Vec::new();
        loop {
            {
                let mut st = self.core.st.borrow_mut();
                let st = &mut *st;
                batch.clear();
                batch.append(&mut st.next);
                for (tid, task) in st.spawned.drain(..) {
                    st.tasks.insert(tid, task);
                    batch.push(tid);
                }
                batch.sort_unstable();
                if let Some(rng) = st.rng.as_mut() {
                    batch.shuffle(rng);
                }
                if batch.is_empty() {
                    if st.tasks.is_empty() {
                        return Ok(());
                    }
                    // Tasks remain but none are runnable and nothing can
                    // wake them.
                    let live = st.tasks.len();
                    st.tasks.clear();
                    return Err(SimError::Stalled { live });
                }
            }

            for &tid in &batch {
                let mut task = {
                    let mut st = self.core.st.borrow_mut();
                    st.requeue_current = true;
                    match st.tasks.remove(&tid) {
                        Some(t) => t,
                        None => continue,
                    }
                };
                match task.fut.as_mut().poll(&mut cx) {
                    Poll::Pending => {
                        let mut st = self.core.st.borrow_mut();
                        let requeue = st.requeue_current;
                        if requeue {
                            st.next.push(tid);
                        }
                        st.tasks.insert(tid, task);
                    }
                    Poll::Ready(result) => {
                        let mut st = self.core.st.borrow_mut();
                        if let Some(wg) = task.wg.take() {
                            let left = wg.inner.remaining.get() - 1;
                            wg.inner.remaining.set(left);
                            if left == 0 {
                                if let Some(waiter) = wg.inner.waiter.take() {
                                    st.next.push(waiter);
                                }
                            }
                        }
                        if let Some(job) = task.job_root {
                            st.finished_roots.push(job);
                        }
                        if let Err(e) = result {
                            if st.error.is_none() {
                                st.error = Some(e);
                            }
                        }
                        drop(task);
                    }
                }
            }

            self.flush_round();

            let mut st = self.core.st.borrow_mut();
            if !st.finished_roots.is_empty() {
                let clock = {
                    let counters = self.core.mem.counters();
                    (0..self.core.mem.nodes())
                        .map(|n| counters.node_cycles(n) - self.core.base_cycles[n])
                        .max()
                        .unwrap_or(0)
                };
                let mut jobs = self.core.jobs.borrow_mut();
                for job in st.finished_roots.drain(..) {
                    jobs[job].end_cycles = Some(clock);
                }
            }
            if let Some(err) = st.error.take() {
                st.tasks.clear();
                st.next.clear();
                st.spawned.clear();
                return Err(err);
            }
        }
    }

    /// Apply this round's recorded core costs to the per-node tallies.
    fn flush_round(&mut self) {
        let mut st = self.core.st.borrow_mut();
        let st = &mut *st;
        let cores = self.core.mem.config().cores_per_node as u64;
        let counters = self.core.mem.counters();

        for node in 0..self.core.mem.nodes() {
            let costs = &mut st.round_core[node];
            if costs.is_empty() {
                continue;
            }
            let k = costs.len() as u64;
            let max = *costs.iter().max().unwrap();
            costs.clear();
            counters.advance_core_cycles(node, k.div_ceil(cores) - 1 + max);
        }
    }
}

fn noop_waker() -> Waker {
    fn clone(_: *const ()) -> RawWaker {
        RawWaker::new(std::ptr::null(), &VTABLE)
    }
    fn noop(_: *const ()) {}
    static VTABLE: RawWakerVTable = RawWakerVTable::new(clone, noop, noop, noop);
    unsafe { Waker::from_raw(RawWaker::new(std::ptr::null(), &VTABLE)) }
}
