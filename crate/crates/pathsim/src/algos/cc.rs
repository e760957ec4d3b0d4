//! Connected components by min-label hooking through memory-side
//! fetch-min, with pointer-jumping compression.
//!
//! Each iteration: snapshot the labels, clear the per-node changed flags,
//! hook — every vertex pushes its label to all neighbors with `remote_min`
//! (no thread ever migrates for this) — detect changes node-locally,
//! OR-reduce the changed flags with a migrating walk, stop if nothing
//! moved, otherwise compress every label chain by pointer jumping. The
//! compression is where migrations happen, bounded by the depth of each
//! label tree.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{SimError, SimResult};
use crate::exec::{Ctx, Engine, JobId, WaitGroup};
use crate::graph::Graph;
use crate::machine::{AllocId, CounterSnapshot, View};
use crate::memsys::SimMemory;
use crate::oracle;

use super::KernelOptions;

/// Iteration cap; far above the pointer-jumped convergence bound of
/// log2(n) for any graph that fits in memory.
pub const DEFAULT_MAX_ITER: u64 = 64;

/// Result of one connected-components run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcResult {
    /// Component label per vertex; when converged, the minimum vertex id
    /// of the component.
    pub labels: Vec<u64>,
    pub iterations: u64,
    pub converged: bool,
}

/// Per-iteration counter deltas recorded when tracing is on, with the
/// hooking and compress phases tagged separately.
#[derive(Debug, Clone)]
pub struct CcIterationTrace {
    pub hooking: CounterSnapshot,
    pub changed: bool,
    /// Labels as they stood right before the compress phase.
    pub pre_compress_labels: Option<Vec<u64>>,
    pub compress: Option<CounterSnapshot>,
}

#[derive(Debug, Clone, Default)]
pub struct CcTrace {
    pub iterations: Vec<CcIterationTrace>,
}

/// Verdict of [`cc_hooking_migration_check`].
#[derive(Debug, Clone)]
pub struct CcCheckReport {
    pub ok: bool,
    pub details: Vec<String>,
}

pub fn connected_components(
    mem: &Rc<SimMemory>,
    graph: &Rc<Graph>,
    max_iter: u64,
    opts: &KernelOptions,
) -> SimResult<CcResult> {
    run_cc(mem, graph, max_iter, opts, false).map(|(r, _)| r)
}

/// As [`connected_components`], also returning the per-phase trace.
pub fn connected_components_traced(
    mem: &Rc<SimMemory>,
    graph: &Rc<Graph>,
    max_iter: u64,
    opts: &KernelOptions,
) -> SimResult<(CcResult, CcTrace)> {
    run_cc(mem, graph, max_iter, opts, true).map(|(r, t)| (r, t.expect("tracing was on")))
}

fn run_cc(
    mem: &Rc<SimMemory>,
    graph: &Rc<Graph>,
    max_iter: u64,
    opts: &KernelOptions,
    traced: bool,
) -> SimResult<(CcResult, Option<CcTrace>)> {
    let mut engine = Engine::new(Rc::clone(mem), opts.schedule);
    let out = Rc::new(RefCell::new(None));
    spawn_cc_root(
        &engine,
        None,
        graph,
        max_iter,
        opts.worker_budget,
        traced,
        Some(Rc::clone(&out)),
    )?;
    engine.run()?;
    let result = out.borrow_mut().take().expect("cc root stores its result");
    Ok(result)
}

/// Slot a kernel root fills with its result once the engine run finishes.
pub(crate) type OutSlot<T> = Option<Rc<RefCell<Option<T>>>>;

/// Spawn the kernel as a root task on an existing engine; the orchestrator
/// runs on node 0, where the changed-flag reduction also lands.
pub(crate) fn spawn_cc_root(
    engine: &Engine,
    job: Option<JobId>,
    graph: &Rc<Graph>,
    max_iter: u64,
    budget: u64,
    traced: bool,
    out: OutSlot<(CcResult, Option<CcTrace>)>,
) -> SimResult<()> {
    if max_iter == 0 {
        return Err(SimError::InvalidArgument("max_iter must be >= 1".into()));
    }
    let g = Rc::clone(graph);
    engine.spawn_root_on(0, job, move |ctx| async move {
        cc_root(ctx, g, max_iter, budget, traced, out).await
    })?;
    Ok(())
}

async fn cc_root(
    mut ctx: Ctx,
    g: Rc<Graph>,
    max_iter: u64,
    budget: u64,
    traced: bool,
    out: OutSlot<(CcResult, Option<CcTrace>)>,
) -> SimResult<()> {
    let n = g.nvertices;
    let nodes = ctx.mem().nodes();
    let (labels, prev, changed) = {
        let mem = ctx.mem();
        (
            mem.alloc(View::Striped, n, 0)?,
            mem.alloc(View::Striped, n, 0)?,
            mem.alloc(View::Replicated, 1, 0)?,
        )
    };
    let active_nodes = nodes.min(n as usize);

    // labels[v] <- v, as parallel per-node local loops.
    let wg = WaitGroup::new();
    for node in 0..active_nodes {
        ctx.spawn_on(node, Some(&wg), move |mut w| async move {
            w.fill_striped_local(labels, |i| i).await
        })?;
    }
    ctx.wait(&wg).await;

    let mut trace = traced.then(CcTrace::default);
    let mut iterations = 0u64;
    let mut converged = false;

    for _ in 0..max_iter {
        iterations += 1;

        // Snapshot: prev <- labels, per-node local copies (no migrations).
        let wg = WaitGroup::new();
        for node in 0..active_nodes {
            ctx.spawn_on(node, Some(&wg), move |mut w| async move {
                w.copy_striped_local(labels, prev).await
            })?;
        }
        ctx.wait(&wg).await;

        // changed <- false on all nodes.
        ctx.broadcast_replicated(changed, 0).await?;

        // Hooking: push every vertex's label onto its neighbors.
        let hook_before = ctx.mem().counters().snapshot();
        spawn_vertex_waves(&mut ctx, &g, budget, move |worker, g, v| async move {
            hook_worker(worker, g, v, labels).await
        })
        .await?;
        let hooking = ctx.mem().counters().snapshot().delta(&hook_before);

        // Change detection, node-local; a difference flips the node's own
        // copy of the flag.
        let wg = WaitGroup::new();
        for node in 0..active_nodes {
            ctx.spawn_on(node, Some(&wg), move |mut w| async move {
                if w.compare_striped_local(prev, labels).await? {
                    let addr = w.mem().addr(changed, 0)?;
                    w.write(addr, 1).await?;
                }
                Ok(())
            })?;
        }
        ctx.wait(&wg).await;

        let any_changed = ctx.reduce_or_replicated(changed).await?;
        if !any_changed {
            converged = true;
            if let Some(t) = trace.as_mut() {
                t.iterations.push(CcIterationTrace {
                    hooking,
                    changed: false,
                    pre_compress_labels: None,
                    compress: None,
                });
            }
            break;
        }

        // Compress: pointer-jump every label chain to its root.
        let pre_labels = if traced {
            Some(ctx.mem().peek_all(labels)?)
        } else {
            None
        };
        let comp_before = ctx.mem().counters().snapshot();
        spawn_vertex_waves(&mut ctx, &g, budget, move |worker, _g, v| async move {
            compress_worker(worker, v, labels).await
        })
        .await?;
        let compress = ctx.mem().counters().snapshot().delta(&comp_before);
        if let Some(t) = trace.as_mut() {
            t.iterations.push(CcIterationTrace {
                hooking,
                changed: true,
                pre_compress_labels: pre_labels,
                compress: Some(compress),
            });
        }
    }

    let mem = ctx.mem();
    let label_vec = mem.peek_all(labels)?;
    mem.free(labels)?;
    mem.free(prev)?;
    mem.free(changed)?;
    if let Some(out) = out {
        *out.borrow_mut() = Some((
            CcResult {
                labels: label_vec,
                iterations,
                converged,
            },
            trace,
        ));
    }
    Ok(())
}

/// Launch one worker per vertex, at the vertex's home node, in waves of at
/// most `budget` live workers.
async fn spawn_vertex_waves<F, Fut>(
    ctx: &mut Ctx,
    g: &Rc<Graph>,
    budget: u64,
    body: F,
) -> SimResult<()>
where
    F: Fn(Ctx, Rc<Graph>, u64) -> Fut + Copy + 'static,
    Fut: std::future::Future<Output = SimResult<()>> + 'static,
{
    let n = g.nvertices;
    let budget = budget.max(1);
    let mut start = 0u64;
    while start < n {
        let end = (start + budget).min(n);
        let wg = WaitGroup::new();
        for v in start..end {
            let g2 = Rc::clone(g);
            let addr = g.record_addr(ctx.mem(), v)?;
            ctx.spawn_at(addr, Some(&wg), move |worker| body(worker, g2, v))?;
        }
        ctx.wait(&wg).await;
        start = end;
    }
    Ok(())
}

async fn hook_worker(mut ctx: Ctx, g: Rc<Graph>, v: u64, labels: AllocId) -> SimResult<()> {
    let label_v = ctx.read(ctx.mem().addr(labels, v)?).await?;
    let mut nbrs = Vec::new();
    g.neighbors(&mut ctx, v, &mut nbrs).await?;
    for j in nbrs {
        let addr = ctx.mem().addr(labels, j)?;
        ctx.remote_min(addr, label_v).await?;
    }
    Ok(())
}

/// `while labels[v] != labels[labels[v]] { labels[v] = labels[labels[v]] }`
/// — chasing the chain migrates to each label's home; writing back is a
/// remote write and stays put. Migration count is bounded by the chain
/// depth.
async fn compress_worker(mut ctx: Ctx, v: u64, labels: AllocId) -> SimResult<()> {
    let own = ctx.mem().addr(labels, v)?;
    let mut a = ctx.read(own).await?;
    if a == v {
        return Ok(());
    }
    loop {
        let b = ctx.read(ctx.mem().addr(labels, a)?).await?;
        if b == a {
            break;
        }
        ctx.write(own, b).await?;
        a = b;
    }
    Ok(())
}

/// Verify the migration structure of a traced run: (a) hooking phases must
/// perform zero migrations — the fetch-min rides the memory-side
/// processors and edge blocks are home-local; (b) each compress phase may
/// migrate at most the summed depths of the pre-compress label forest.
pub fn cc_hooking_migration_check(trace: &CcTrace) -> CcCheckReport {
    let mut details = Vec::new();
    let mut ok = true;
    for (i, it) in trace.iterations.iter().enumerate() {
        let hm = it.hooking.total_migrations();
        if hm != 0 {
            ok = false;
            details.push(format!("iteration {i}: hooking performed {hm} migrations"));
        }
        if let (Some(pre), Some(comp)) = (&it.pre_compress_labels, &it.compress) {
            let bound = oracle::forest_depth_sum(pre);
            let cm = comp.total_migrations();
            if cm > bound {
                ok = false;
                details.push(format!(
                    "iteration {i}: compress migrated {cm} times, forest depth bound {bound}"
                ));
            } else {
                details.push(format!(
                    "iteration {i}: compress migrations {cm} <= depth bound {bound}"
                ));
            }
        }
    }
    CcCheckReport { ok, details }
}
