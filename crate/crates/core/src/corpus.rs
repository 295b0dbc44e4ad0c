//! Test corpora: every labelled connected graph up to a size, and seeded
//! random families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{generate, Graph, GraphKind, PortMap, PortPolicy};

/// Every connected graph on exactly `n` labelled vertices, led by vertex 0.
/// Feasible up to `n = 6` (2^15 edge subsets).
pub fn all_connected_graphs(n: usize) -> Vec<Graph> {
    assert!((1..=7).contains(&n), "exhaustive enumeration is limited to n <= 7");
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    (0u64..1 << pairs.len())
        .filter_map(|mask| {
            let edges: Vec<_> = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            Graph::new(n, &edges, 0).ok()
        })
        .collect()
}

/// One protocol input: a graph with its leader and port numbering.
#[derive(Debug, Clone)]
pub struct Case {
    pub label: String,
    pub graph: Graph,
    pub ports: PortMap,
}

/// `assignments` random port numberings of `graph`, each with a random leader.
pub fn port_variants(label: &str, graph: &Graph, assignments: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..assignments)
        .map(|i| {
            let leader = rng.gen_range(0..graph.n());
            let graph = graph.clone().with_leader(leader).expect("leader in range");
            let ports = PortMap::assign(&graph, PortPolicy::Random, rng.gen());
            Case { label: format!("{label} ports#{i} leader={leader}"), graph, ports }
        })
        .collect()
}

/// `count` random connected graphs with `n` drawn from `sizes` and an edge
/// probability chosen so the average degree lands between about 1.5 and 6.
pub fn random_graphs(count: usize, sizes: std::ops::RangeInclusive<usize>, seed: u64) -> Vec<(String, Graph)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(sizes.clone());
            let degree: f64 = rng.gen_range(1.5..6.0);
            let p = (degree / (n.max(2) - 1) as f64).min(1.0);
            let s: u64 = rng.gen();
            let label = format!("random:{n}:{p:.4}:{s}");
            (label, generate(GraphKind::RandomConnected { n, p }, s).expect("valid parameters"))
        })
        .collect()
}

pub fn random_trees(count: usize, sizes: std::ops::RangeInclusive<usize>, seed: u64) -> Vec<(String, Graph)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(sizes.clone());
            let s: u64 = rng.gen();
            (format!("tree:{n}:{s}"), generate(GraphKind::RandomTree(n), s).expect("valid parameters"))
        })
        .collect()
}
