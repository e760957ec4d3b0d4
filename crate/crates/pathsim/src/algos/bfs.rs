//! Level-synchronous breadth-first search.
//!
//! Each frontier vertex gets a worker thread launched on its home node
//! (`spawn_at`), which reads the edge block locally and claims unvisited
//! neighbors through an atomic compare-style remote write on the parent
//! array — no migrations, remote work rides the memory-side processors.
//! Levels are written with plain remote writes; the next frontier is the
//! set of won claims, sorted by vertex id so claim order is deterministic
//! under the FIFO scheduler.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{SimError, SimResult};
use crate::exec::{Ctx, Engine, JobId, WaitGroup};
use crate::graph::Graph;
use crate::machine::AllocId;
use crate::memsys::SimMemory;

use super::KernelOptions;

/// Sentinel level/parent for unreached vertices.
pub const UNREACHED: u64 = u64::MAX;

/// Result of one search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfsResult {
    pub source: u64,
    /// Level per vertex; `UNREACHED` outside the source's component.
    pub levels: Vec<u64>,
    /// Claiming parent per vertex; the source's parent is itself.
    pub parents: Vec<u64>,
    pub levels_count: u64,
}

/// Run one search to completion on a fresh engine.
pub fn bfs(
    mem: &Rc<SimMemory>,
    graph: &Rc<Graph>,
    source: u64,
    opts: &KernelOptions,
) -> SimResult<BfsResult> {
    if source >= graph.nvertices {
        return Err(SimError::InvalidArgument(format!(
            "source {source} out of range for {} vertices",
            graph.nvertices
        )));
    }
    let mut engine = Engine::new(Rc::clone(mem), opts.schedule);
    let out = Rc::new(RefCell::new(None));
    spawn_bfs_root(
        &engine,
        None,
        graph,
        source,
        opts.worker_budget,
        Some(Rc::clone(&out)),
    )?;
    engine.run()?;
    let result = out.borrow_mut().take().expect("bfs root stores its result");
    Ok(result)
}

/// Spawn the search as a root task on an existing engine (the query engine
/// runs many of these concurrently). The root starts on the source's home
/// node.
pub(crate) fn spawn_bfs_root(
    engine: &Engine,
    job: Option<JobId>,
    graph: &Rc<Graph>,
    source: u64,
    budget: u64,
    out: super::cc::OutSlot<BfsResult>,
) -> SimResult<()> {
    if source >= graph.nvertices {
        return Err(SimError::InvalidArgument(format!(
            "source {source} out of range for {} vertices",
            graph.nvertices
        )));
    }
    let g = Rc::clone(graph);
    let home = (source % engine.mem().nodes() as u64) as usize;
    engine.spawn_root_on(home, job, move |ctx| async move {
        bfs_root(ctx, g, source, budget, out).await
    })?;
    Ok(())
}

async fn bfs_root(
    mut ctx: Ctx,
    g: Rc<Graph>,
    source: u64,
    budget: u64,
    out: super::cc::OutSlot<BfsResult>,
) -> SimResult<()> {
    let n = g.nvertices;
    let (levels, parents) = {
        let mem = ctx.mem();
        (
            mem.alloc(crate::machine::View::Striped, n, UNREACHED)?,
            mem.alloc(crate::machine::View::Striped, n, UNREACHED)?,
        )
    };

    ctx.write(ctx.mem().addr(parents, source)?, source).await?;
    ctx.write(ctx.mem().addr(levels, source)?, 0).await?;

    let mut frontier = vec![source];
    let mut level = 0u64;
    let budget = budget.max(1) as usize;
    while !frontier.is_empty() {
        let next = Rc::new(RefCell::new(Vec::new()));
        for chunk in frontier.chunks(budget) {
            let wg = WaitGroup::new();
            for &v in chunk {
                let g = Rc::clone(&g);
                let next = Rc::clone(&next);
                let addr = g.record_addr(ctx.mem(), v)?;
                ctx.spawn_at(addr, Some(&wg), move |worker| async move {
                    bfs_worker(worker, g, v, level, levels, parents, next).await
                })?;
            }
            ctx.wait(&wg).await;
        }
        frontier = Rc::try_unwrap(next)
            .map_err(|_| ())
            .expect("all workers joined")
            .into_inner();
        frontier.sort_unstable();
        level += 1;
    }

    let mem = ctx.mem();
    let level_vec = mem.peek_all(levels)?;
    let parent_vec = mem.peek_all(parents)?;
    mem.free(levels)?;
    mem.free(parents)?;
    if let Some(out) = out {
        let levels_count = level_vec
            .iter()
            .filter(|&&l| l != UNREACHED)
            .max()
            .map_or(0, |&m| m + 1);
        *out.borrow_mut() = Some(BfsResult {
            source,
            levels: level_vec,
            parents: parent_vec,
            levels_count,
        });
    }
    Ok(())
}

async fn bfs_worker(
    mut ctx: Ctx,
    g: Rc<Graph>,
    v: u64,
    level: u64,
    levels: AllocId,
    parents: AllocId,
    next: Rc<RefCell<Vec<u64>>>,
) -> SimResult<()> {
    let mut nbrs = Vec::new();
    g.neighbors(&mut ctx, v, &mut nbrs).await?;
    for u in nbrs {
        let parent_addr = ctx.mem().addr(parents, u)?;
        if ctx.remote_claim(parent_addr, UNREACHED, v).await? {
            let level_addr = ctx.mem().addr(levels, u)?;
            ctx.write(level_addr, level + 1).await?;
            next.borrow_mut().push(u);
        }
    }
    Ok(())
}
