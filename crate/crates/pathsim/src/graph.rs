//! Striped loose-sparse-row graph storage over simulated memory.
//!
//! The per-vertex records (degree, edge-block offset) are striped arrays,
//! so vertex `v` lives on node `v mod nodes`; its edge block is an array of
//! neighbor ids stored wholly on the same node. Both (i, j) and (j, i) are
//! materialized for every undirected edge.

use std::rc::Rc;

use crate::error::{SimError, SimResult};
use crate::exec::Ctx;
use crate::machine::{AllocId, GlobalAddress, NodeId, View};
use crate::memsys::SimMemory;

/// An immutable graph resident in simulated memory. Concurrent read
/// iteration from many threads is safe; there are no updates after build.
pub struct Graph {
    pub nvertices: u64,
    /// Directed edge count: twice the undirected edge count.
    pub nedges_directed: u64,
    /// Striped array: degree of each vertex.
    degree: AllocId,
    /// Striped array: offset of each vertex's edge block within its home
    /// node's block heap.
    block_ref: AllocId,
    /// One Absolute-view heap per node holding the concatenated edge blocks
    /// of the vertices homed there.
    heaps: Vec<AllocId>,
}

impl Graph {
    /// Build from a canonical (deduplicated, self-loop-free, (min, max)
    /// sorted) undirected edge list. Neighbor blocks are materialized in
    /// both directions, each block sorted ascending by id. The stores are
    /// raw: the graph is loaded before any timings.
    pub fn build(mem: &SimMemory, nvertices: u64, edges: &[(u64, u64)]) -> SimResult<Graph> {
        if nvertices == 0 {
            return Err(SimError::InvalidArgument(
                "graph must have at least one vertex".into(),
            ));
        }
        let mut prev: Option<(u64, u64)> = None;
        for &(i, j) in edges {
            if i >= j {
                return Err(SimError::InvalidArgument(format!(
                    "edge ({i}, {j}) is not canonical (need i < j)"
                )));
            }
            if j >= nvertices {
                return Err(SimError::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range for {nvertices} vertices"
                )));
            }
            if let Some(p) = prev {
                if p >= (i, j) {
                    return Err(SimError::InvalidArgument(
                        "edge list is not sorted and deduplicated".into(),
                    ));
                }
            }
            prev = Some((i, j));
        }

        let n = nvertices as usize;
        let mut adjacency: Vec<Vec<u64>> = vec![Vec::new(); n];
        for &(i, j) in edges {
            adjacency[i as usize].push(j);
            adjacency[j as usize].push(i);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }

        let nodes = mem.nodes();
        let degree = mem.alloc(View::Striped, nvertices, 0)?;
        let block_ref = mem.alloc(View::Striped, nvertices, 0)?;

        // Per-node heap sizes: total degree of the vertices homed there.
        let mut heap_len = vec![0u64; nodes];
        for (v, nbrs) in adjacency.iter().enumerate() {
            heap_len[v % nodes] += nbrs.len() as u64;
        }
        let heaps: Vec<AllocId> = (0..nodes)
            .map(|node| mem.alloc_absolute_on(node, heap_len[node].max(1), 0))
            .collect::<SimResult<_>>()?;

        let mut cursor = vec![0u64; nodes];
        let mut nedges_directed = 0u64;
        for (v, nbrs) in adjacency.iter().enumerate() {
            let node = v % nodes;
            let v = v as u64;
            mem.poke(mem.addr(degree, v)?, nbrs.len() as u64)?;
            mem.poke(mem.addr(block_ref, v)?, cursor[node])?;
            for (k, &u) in nbrs.iter().enumerate() {
                mem.poke(mem.addr(heaps[node], cursor[node] + k as u64)?, u)?;
            }
            cursor[node] += nbrs.len() as u64;
            nedges_directed += nbrs.len() as u64;
        }
        debug_assert_eq!(nedges_directed, 2 * edges.len() as u64);

        Ok(Graph {
            nvertices,
            nedges_directed,
            degree,
            block_ref,
            heaps,
        })
    }

    pub fn home_of(&self, mem: &SimMemory, v: u64) -> NodeId {
        (v % mem.nodes() as u64) as NodeId
    }

    /// Address of vertex `v`'s record; spawning a thread at this address
    /// places it on the vertex's home node.
    pub fn record_addr(&self, mem: &SimMemory, v: u64) -> SimResult<GlobalAddress> {
        self.check_vertex(v)?;
        mem.addr(self.degree, v)
    }

    fn check_vertex(&self, v: u64) -> SimResult<()> {
        if v >= self.nvertices {
            return Err(SimError::InvalidArgument(format!(
                "vertex {v} out of range for {} vertices",
                self.nvertices
            )));
        }
        Ok(())
    }

    /// Degree of `v`, read through the simulated memory (migrates the
    /// thread to `v`'s home node if it is remote).
    pub async fn degree(&self, ctx: &mut Ctx, v: u64) -> SimResult<u64> {
        self.check_vertex(v)?;
        ctx.read(ctx.mem().addr(self.degree, v)?).await
    }

    /// Read the neighbor ids of `v` into `out`, exactly once each. The
    /// first access migrates the thread to `v`'s home node if remote; the
    /// edge-block words are read one per issue slot and are all local, so
    /// a full iteration performs at most one migration.
    pub async fn neighbors(&self, ctx: &mut Ctx, v: u64, out: &mut Vec<u64>) -> SimResult<()> {
        self.check_vertex(v)?;
        out.clear();
        let deg = ctx.read(ctx.mem().addr(self.degree, v)?).await?;
        if deg == 0 {
            return Ok(());
        }
        let offset = ctx.read(ctx.mem().addr(self.block_ref, v)?).await?;
        let heap = self.heaps[(v % ctx.mem().nodes() as u64) as usize];
        out.reserve(deg as usize);
        for k in 0..deg {
            let word = ctx.read(ctx.mem().addr(heap, offset + k)?).await?;
            out.push(word);
        }
        Ok(())
    }

    /// Adjacency copied out through raw host access, for oracles and
    /// verification.
    pub fn host_adjacency(&self, mem: &SimMemory) -> SimResult<Vec<Vec<u64>>> {
        let nodes = mem.nodes();
        let mut adj = Vec::with_capacity(self.nvertices as usize);
        for v in 0..self.nvertices {
            let deg = mem.peek(mem.addr(self.degree, v)?)?;
            let offset = mem.peek(mem.addr(self.block_ref, v)?)?;
            let heap = self.heaps[(v % nodes as u64) as usize];
            let mut nbrs = Vec::with_capacity(deg as usize);
            for k in 0..deg {
                nbrs.push(mem.peek(mem.addr(heap, offset + k)?)?);
            }
            adj.push(nbrs);
        }
        Ok(adj)
    }

    pub fn host_degree(&self, mem: &SimMemory, v: u64) -> SimResult<u64> {
        self.check_vertex(v)?;
        mem.peek(mem.addr(self.degree, v)?)
    }

    /// Release the graph's allocations.
    pub fn free(self, mem: &SimMemory) -> SimResult<()> {
        mem.free(self.degree)?;
        mem.free(self.block_ref)?;
        for h in self.heaps {
            mem.free(h)?;
        }
        Ok(())
    }
}

/// Load a graph from the edge file format written by `generate`.
pub fn load(mem: &SimMemory, path: &std::path::Path) -> SimResult<Graph> {
    let (meta, edges) = crate::edgefile::read_edges(path)?;
    Graph::build(mem, meta.nvertices, &edges)
}

/// Convenience wrapper used by tests: a fresh memory plus built graph.
pub fn build_on(
    mem: &Rc<SimMemory>,
    nvertices: u64,
    edges: &[(u64, u64)],
) -> SimResult<Rc<Graph>> {
    Ok(Rc::new(Graph::build(mem, nvertices, edges)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{Engine, Schedule};
    use crate::machine::default_pathfinder_config;
    use std::cell::RefCell;

    fn mem(nodes: usize) -> Rc<SimMemory> {
        Rc::new(SimMemory::new(default_pathfinder_config(nodes).unwrap()))
    }

    #[test]
    fn single_edge_colocation() {
        let m = mem(2);
        let g = Graph::build(&m, 2, &[(0, 1)]).unwrap();
        assert_eq!(g.host_degree(&m, 0).unwrap(), 1);
        assert_eq!(g.host_degree(&m, 1).unwrap(), 1);
        assert_eq!(g.home_of(&m, 0), 0);
        assert_eq!(g.home_of(&m, 1), 1);
        // Each vertex's block heap lives on its home node.
        assert_eq!(m.alloc_home(g.heaps[0]).unwrap(), 0);
        assert_eq!(m.alloc_home(g.heaps[1]).unwrap(), 1);
        assert_eq!(g.nedges_directed, 2);
    }

    #[test]
    fn empty_graph_has_zero_degrees() {
        let m = mem(4);
        let g = Graph::build(&m, 4, &[]).unwrap();
        for v in 0..4 {
            assert_eq!(g.host_degree(&m, v).unwrap(), 0);
        }
        assert_eq!(g.nedges_directed, 0);
    }

    #[test]
    fn path_graph_degrees_single_node() {
        let m = mem(1);
        let g = Graph::build(&m, 3, &[(0, 1), (1, 2)]).unwrap();
        let degs: Vec<u64> = (0..3).map(|v| g.host_degree(&m, v).unwrap()).collect();
        assert_eq!(degs, vec![1, 2, 1]);
        assert_eq!(g.nedges_directed, 4);
    }

    #[test]
    fn directed_symmetry_and_handshake() {
        let edges = crate::rmat::canonicalize(
            &crate::rmat::generate_edges(&crate::rmat::RmatParams::new(6, 4, 2)).unwrap(),
        );
        let m = mem(4);
        let g = Graph::build(&m, 64, &edges).unwrap();
        let adj = g.host_adjacency(&m).unwrap();
        let total: u64 = adj.iter().map(|n| n.len() as u64).sum();
        assert_eq!(total, g.nedges_directed);
        assert_eq!(total % 2, 0);
        for (i, nbrs) in adj.iter().enumerate() {
            for &j in nbrs {
                assert!(adj[j as usize].contains(&(i as u64)));
            }
        }
    }

    #[test]
    fn rebuild_is_identical() {
        let edges = crate::rmat::canonicalize(
            &crate::rmat::generate_edges(&crate::rmat::RmatParams::new(7, 8, 9)).unwrap(),
        );
        let m1 = mem(8);
        let m2 = mem(8);
        let g1 = Graph::build(&m1, 128, &edges).unwrap();
        let g2 = Graph::build(&m2, 128, &edges).unwrap();
        assert_eq!(
            g1.host_adjacency(&m1).unwrap(),
            g2.host_adjacency(&m2).unwrap()
        );
    }

    #[test]
    fn non_canonical_edges_rejected() {
        let m = mem(2);
        assert!(Graph::build(&m, 4, &[(1, 0)]).is_err());
        assert!(Graph::build(&m, 4, &[(2, 2)]).is_err());
        assert!(Graph::build(&m, 4, &[(0, 1), (0, 1)]).is_err());
        assert!(Graph::build(&m, 2, &[(0, 3)]).is_err());
    }

    #[test]
    fn neighbors_iteration_migrates_at_most_once() {
        // Star graph: center 0 with k leaves, 8 nodes.
        let k = 12u64;
        let edges: Vec<(u64, u64)> = (1..=k).map(|l| (0, l)).collect();
        let m = mem(8);
        let g = Rc::new(Graph::build(&m, k + 1, &edges).unwrap());

        // Thread starting away from the center's home: exactly 1 migration
        // for the full iteration.
        let mut engine = Engine::new(Rc::clone(&m), Schedule::Fifo);
        let out = Rc::new(RefCell::new(Vec::new()));
        let (g2, out2) = (Rc::clone(&g), Rc::clone(&out));
        engine
            .spawn_root_on(3, None, move |mut ctx| async move {
                let mut nbrs = Vec::new();
                g2.neighbors(&mut ctx, 0, &mut nbrs).await?;
                *out2.borrow_mut() = nbrs;
                Ok(())
            })
            .unwrap();
        engine.run().unwrap();
        assert_eq!(*out.borrow(), (1..=k).collect::<Vec<u64>>());
        assert_eq!(m.counters().snapshot().total_migrations(), 1);

        // Thread already on the home node: zero migrations.
        let before = m.counters().snapshot();
        let mut engine = Engine::new(Rc::clone(&m), Schedule::Fifo);
        let g2 = Rc::clone(&g);
        engine
            .spawn_root_on(0, None, move |mut ctx| async move {
                assert_eq!(g2.degree(&mut ctx, 0).await?, k);
                let mut out = Vec::new();
                g2.neighbors(&mut ctx, 0, &mut out).await?;
                assert_eq!(out.len(), k as usize);
                Ok(())
            })
            .unwrap();
        engine.run().unwrap();
        let delta = m.counters().snapshot().delta(&before);
        assert_eq!(delta.total_migrations(), 0);
    }

    #[test]
    fn degree_zero_vertex_empty_iteration() {
        let m = mem(2);
        let g = Rc::new(Graph::build(&m, 4, &[(0, 1)]).unwrap());
        let mut engine = Engine::new(Rc::clone(&m), Schedule::Fifo);
        let g2 = Rc::clone(&g);
        engine
            .spawn_root_on(0, None, move |mut ctx| async move {
                assert_eq!(g2.degree(&mut ctx, 3).await?, 0);
                let mut out = vec![99];
                g2.neighbors(&mut ctx, 3, &mut out).await?;
                assert!(out.is_empty());
                Ok(())
            })
            .unwrap();
        engine.run().unwrap();
        assert!(m.counters().snapshot().total_migrations() <= 1);
    }

    #[test]
    fn out_of_range_vertex_rejected() {
        let m = mem(2);
        let g = Graph::build(&m, 4, &[]).unwrap();
        assert!(g.host_degree(&m, 4).is_err());
        assert!(g.record_addr(&m, 4).is_err());
    }
}
