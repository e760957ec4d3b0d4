//! Independent reference implementations used to check the simulated
//! kernels: a union-find for connected components, a textbook FIFO
//! breadth-first search, and a label-forest depth calculator. These operate
//! on plain host-side adjacency and never touch the simulated memory path
//! they are used to verify.

/// Sentinel for unreached vertices in level/parent arrays.
pub const UNREACHED: u64 = u64::MAX;

/// Union-find with path halving.
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Component labels via union-find: every vertex is labeled with the
/// minimum vertex id of its component.
pub fn union_find_components(nvertices: u64, edges: &[(u64, u64)]) -> Vec<u64> {
    let n = nvertices as usize;
    let mut uf = UnionFind::new(n);
    for &(i, j) in edges {
        uf.union(i as usize, j as usize);
    }
    let mut min_label = vec![u64::MAX; n];
    for v in 0..n {
        let r = uf.find(v);
        min_label[r] = min_label[r].min(v as u64);
    }
    (0..n).map(|v| min_label[uf.find(v)]).collect()
}

/// Host-side adjacency from a canonical edge list.
pub fn adjacency(nvertices: u64, edges: &[(u64, u64)]) -> Vec<Vec<u64>> {
    let mut adj = vec![Vec::new(); nvertices as usize];
    for &(i, j) in edges {
        adj[i as usize].push(j);
        adj[j as usize].push(i);
    }
    for nbrs in &mut adj {
        nbrs.sort_unstable();
    }
    adj
}

/// Textbook FIFO breadth-first search; returns per-vertex levels with
/// [`UNREACHED`] for vertices outside the source's component.
pub fn reference_bfs_levels(adj: &[Vec<u64>], source: u64) -> Vec<u64> {
    let mut levels = vec![UNREACHED; adj.len()];
    let mut queue = std::collections::VecDeque::new();
    levels[source as usize] = 0;
    queue.push_back(source);
    while let Some(v) = queue.pop_front() {
        let next = levels[v as usize] + 1;
        for &u in &adj[v as usize] {
            if levels[u as usize] == UNREACHED {
                levels[u as usize] = next;
                queue.push_back(u);
            }
        }
    }
    levels
}

/// Depth of every vertex in the label forest `parent(v) = labels[v]`
/// (roots satisfy `labels[r] == r`), summed. Labels must be
/// non-increasing (`labels[v] <= v`), which the min-hooking kernel
/// guarantees; chains therefore terminate.
pub fn forest_depth_sum(labels: &[u64]) -> u64 {
    let mut depth = vec![u64::MAX; labels.len()];
    let mut total = 0u64;
    for v in 0..labels.len() {
        let mut chain = Vec::new();
        let mut x = v;
        while depth[x] == u64::MAX && labels[x] as usize != x {
            chain.push(x);
            x = labels[x] as usize;
        }
        let base = if labels[x] as usize == x { 0 } else { depth[x] };
        if depth[x] == u64::MAX {
            depth[x] = 0;
        }
        for (k, &y) in chain.iter().rev().enumerate() {
            depth[y] = base + k as u64 + 1;
        }
        total += depth[v];
    }
    total
}

/// Check a BFS level array against the reference plus the parent property:
/// every reached non-source vertex has a reached parent one level closer
/// that is actually a neighbor.
pub fn check_bfs(
    adj: &[Vec<u64>],
    source: u64,
    levels: &[u64],
    parents: &[u64],
) -> Result<(), String> {
    let expect = reference_bfs_levels(adj, source);
    if levels != expect.as_slice() {
        let v = levels
            .iter()
            .zip(&expect)
            .position(|(a, b)| a != b)
            .unwrap();
        return Err(format!(
            "level mismatch at vertex {v}: got {}, reference {}",
            levels[v], expect[v]
        ));
    }
    if parents[source as usize] != source {
        return Err("source parent must be the source itself".into());
    }
    for v in 0..levels.len() {
        if v as u64 == source {
            continue;
        }
        match levels[v] {
            UNREACHED => {
                if parents[v] != UNREACHED {
                    return Err(format!("unreached vertex {v} has a parent"));
                }
            }
            l => {
                let p = parents[v];
                if p == UNREACHED {
                    return Err(format!("reached vertex {v} lacks a parent"));
                }
                if levels[p as usize] + 1 != l {
                    return Err(format!(
                        "parent of {v} is at level {}, expected {}",
                        levels[p as usize],
                        l - 1
                    ));
                }
                if adj[v].binary_search(&p).is_err() {
                    return Err(format!("parent {p} of {v} is not a neighbor"));
                }
            }
        }
    }
    Ok(())
}

/// Check converged component labels: the partition must equal the
/// union-find partition and every label must be its component's minimum
/// vertex id.
pub fn check_cc(nvertices: u64, edges: &[(u64, u64)], labels: &[u64]) -> Result<(), String> {
    let expect = union_find_components(nvertices, edges);
    if labels != expect.as_slice() {
        let v = labels
            .iter()
            .zip(&expect)
            .position(|(a, b)| a != b)
            .unwrap();
        return Err(format!(
            "label mismatch at vertex {v}: got {}, oracle {}",
            labels[v], expect[v]
        ));
    }
    Ok(())
}
