//! Sequential reference algorithms. Everything the distributed protocols
//! compute is checked against these.

use std::collections::{BTreeSet, VecDeque};

use petgraph::graph::UnGraph;
use petgraph::visit::EdgeRef;

use crate::bfs::TreeView;
use crate::graph::{Graph, PortMap};

/// Marks an unreachable vertex in [`bfs_distances_without`].
pub const UNREACHABLE: u64 = u64::MAX;

pub fn bfs_distances(graph: &Graph, source: usize) -> Vec<u64> {
    bfs_distances_without(graph, source, None, None)
}

/// BFS from `source`, optionally ignoring one edge and one vertex.
fn bfs_distances_without(
    graph: &Graph,
    source: usize,
    skip_edge: Option<(usize, usize)>,
    skip_vertex: Option<usize>,
) -> Vec<u64> {
    let mut dist = vec![UNREACHABLE; graph.n()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in graph.neighbors(u) {
            if Some(v) == skip_vertex || skip_edge.is_some_and(|(a, b)| (a, b) == (u, v) || (a, b) == (v, u)) {
                continue;
            }
            if dist[v] == UNREACHABLE {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// All-pairs distances by a BFS from every vertex, and the diameter.
pub fn oracle_apsp(graph: &Graph) -> (Vec<Vec<u64>>, u64) {
    let matrix: Vec<Vec<u64>> = (0..graph.n()).map(|u| bfs_distances(graph, u)).collect();
    let diameter = matrix.iter().flatten().copied().max().unwrap_or(0);
    (matrix, diameter)
}

/// Exact girth by edge deletion: for each edge `{u, v}`, the shortest cycle
/// through it is `dist_{G - uv}(u, v) + 1`. Zero for acyclic graphs.
pub fn oracle_girth(graph: &Graph) -> u64 {
    graph
        .edges()
        .iter()
        .filter_map(|&(u, v)| {
            let d = bfs_distances_without(graph, u, Some((u, v)), None)[v];
            (d != UNREACHABLE).then(|| d + 1)
        })
        .min()
        .unwrap_or(0)
}

/// Girth from per-root BFS cycle detection: every non-tree edge `{x, y}` met
/// from root `r` closes a walk of length `d(x) + d(y) + 1`; the minimum over
/// all roots is the girth.
pub fn girth_by_bfs(graph: &Graph) -> u64 {
    let mut best = None::<u64>;
    for root in 0..graph.n() {
        let mut dist = vec![UNREACHABLE; graph.n()];
        let mut parent = vec![usize::MAX; graph.n()];
        dist[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in graph.neighbors(u) {
                if dist[v] == UNREACHABLE {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                } else if parent[u] != v {
                    let len = dist[u] + dist[v] + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
    }
    best.unwrap_or(0)
}

/// Length of the shortest cycle through `v`, if any.
pub fn shortest_cycle_through(graph: &Graph, v: usize) -> Option<u64> {
    let nbrs = graph.neighbors(v);
    let mut best = None::<u64>;
    for (i, &x) in nbrs.iter().enumerate() {
        let dist = bfs_distances_without(graph, x, None, Some(v));
        for &y in &nbrs[i + 1..] {
            if dist[y] != UNREACHABLE {
                let len = dist[y] + 2;
                best = Some(best.map_or(len, |b| b.min(len)));
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cuts {
    /// Bridges as `(u, v)` with `u < v`.
    pub bridges: BTreeSet<(usize, usize)>,
    pub articulations: BTreeSet<usize>,
    pub biconnected: bool,
}

/// Bridges and articulation points by depth-first low-link.
pub fn oracle_cuts(graph: &Graph) -> Cuts {
    let g: UnGraph<(), ()> = UnGraph::from_edges(graph.edges().iter().map(|&(u, v)| (u as u32, v as u32)));
    let mut g = g;
    while g.node_count() < graph.n() {
        g.add_node(());
    }
    let bridges = petgraph::algo::bridges(&g)
        .map(|e| {
            let (a, b) = (e.source().index(), e.target().index());
            (a.min(b), a.max(b))
        })
        .collect();
    let articulations: BTreeSet<usize> = petgraph::algo::articulation_points::articulation_points(&g)
        .into_iter()
        .map(|v| v.index())
        .collect();
    let biconnected = articulations.is_empty();
    Cuts { bridges, articulations, biconnected }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub distances: Vec<Vec<u64>>,
    pub diameter: u64,
    pub girth: u64,
    pub cuts: Cuts,
}

pub fn oracle_report(graph: &Graph) -> OracleReport {
    let (distances, diameter) = oracle_apsp(graph);
    OracleReport {
        distances,
        diameter,
        girth: oracle_girth(graph),
        cuts: oracle_cuts(graph),
    }
}

/// The Trav walk executed centrally over an ordered tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceWalk {
    /// Vertices in visit order; each appears exactly twice.
    pub visits: Vec<usize>,
    /// `(visits before the first visit, visits before the second visit)`.
    pub nu: Vec<(u64, u64)>,
    /// The k-th vertex visited after an even number of visits gets number k.
    pub numbers: Vec<u64>,
}

pub fn reference_trav(ports: &PortMap, trees: &[TreeView], root: usize) -> ReferenceWalk {
    let n = trees.len();
    let parent_of = |u: usize| trees[u].parent.map(|p| ports.neighbor(u, p));
    let children_of = |u: usize| -> Vec<usize> { trees[u].children.iter().map(|&c| ports.neighbor(u, c)).collect() };

    let mut visits = Vec::with_capacity(2 * n);
    let mut nu = vec![(0, 0); n];
    let mut seen = vec![0u8; n];
    let mut at = Some(root);
    while let Some(u) = at {
        let k = visits.len() as u64;
        visits.push(u);
        seen[u] += 1;
        at = if seen[u] == 1 {
            nu[u].0 = k;
            Some(children_of(u).first().copied().unwrap_or(u))
        } else {
            nu[u].1 = k;
            match parent_of(u) {
                None => None,
                Some(p) => {
                    let siblings = children_of(p);
                    let i = siblings.iter().position(|&s| s == u).expect("child of its parent");
                    // A brother's first visit, or the parent's second.
                    Some(siblings.get(i + 1).copied().unwrap_or(p))
                }
            }
        };
    }
    let mut numbers = vec![0; n];
    let mut next = 1;
    for (k, &u) in visits.iter().enumerate() {
        if k % 2 == 0 {
            numbers[u] = next;
            next += 1;
        }
    }
    ReferenceWalk { visits, nu, numbers }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubePath {
    pub pass: bool,
    /// Largest `dist(v_k, v_{k+1})`.
    pub max_consecutive: u64,
    /// `dist(v_n, v_1)`: the numbering closes into a cycle of the cube when
    /// this is at most 3.
    pub closure: u64,
}

/// Checks that `numbering` (vertex -> number in `1..=n`) is a Hamiltonian
/// path of the cube of the graph.
pub fn check_cube_path(graph: &Graph, numbering: &[u64]) -> CubePath {
    let n = graph.n();
    let mut by_number = vec![usize::MAX; n];
    let mut bijective = numbering.len() == n;
    for (v, &k) in numbering.iter().enumerate() {
        if k == 0 || k as usize > n || by_number[k as usize - 1] != usize::MAX {
            bijective = false;
            break;
        }
        by_number[k as usize - 1] = v;
    }
    if !bijective {
        return CubePath { pass: false, max_consecutive: UNREACHABLE, closure: UNREACHABLE };
    }
    let dist_from = |u: usize| bfs_distances(graph, u);
    let max_consecutive = by_number
        .windows(2)
        .map(|w| dist_from(w[0])[w[1]])
        .max()
        .unwrap_or(0);
    let closure = dist_from(by_number[n - 1])[by_number[0]];
    CubePath { pass: max_consecutive <= 3, max_consecutive, closure }
}
