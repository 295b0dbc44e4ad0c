//! The full protocol run, with per-vertex outputs reassembled into graph-level
//! answers indexed by vertex.

use std::collections::BTreeSet;

use crate::bfs::TreeView;
use crate::engine::{Metrics, Trace};
use crate::enumeration::TravState;
use crate::error::RunError;
use crate::graph::{Graph, PortMap};
use crate::node::{self, GlobalValues, PhaseRounds, Preset, Stage, StageOptions};
use crate::waves::WaveLog;

#[derive(Debug, Clone, Copy, Default)]
pub struct PipelineOptions {
    pub max_rounds: Option<u64>,
    pub record_trace: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub trees: Vec<TreeView>,
    pub numbers: Vec<u64>,
    pub levels: Vec<u64>,
    /// Units received on each vertex's two visits during numbering.
    pub visit_counts: Vec<TravState>,
    /// Network size as learned by the leader.
    pub n_at_leader: u64,
    /// `distances[u][v]`, by vertex index.
    pub distances: Vec<Vec<u64>>,
    pub eccentricities: Vec<u64>,
    pub cycle_candidates: Vec<Option<u64>>,
    pub cut_edges: BTreeSet<(usize, usize)>,
    pub cut_vertices: BTreeSet<usize>,
    /// What every vertex read from the final broadcast.
    pub global: GlobalValues,
    /// Completion rounds as seen by the leader.
    pub rounds: PhaseRounds,
    pub wave_logs: Vec<WaveLog>,
    pub trace: Option<Trace>,
    pub metrics: Metrics,
}

impl PipelineResult {
    pub fn diameter(&self) -> u64 {
        self.global.diameter
    }

    pub fn girth(&self) -> u64 {
        self.global.girth
    }

    pub fn biconnected(&self) -> bool {
        self.global.biconnected
    }
}

pub fn run_pipeline(graph: &Graph, ports: &PortMap, options: PipelineOptions) -> Result<PipelineResult, RunError> {
    let n = graph.n();
    let out = node::run_stage(
        graph,
        ports,
        Stage::Aggregate,
        Preset::none(n),
        Some(StageOptions { max_rounds: options.max_rounds, record_trace: options.record_trace }),
    )?;
    let nodes = &out.nodes;

    let mut trees = Vec::with_capacity(n);
    let mut numbers = Vec::with_capacity(n);
    let mut levels = Vec::with_capacity(n);
    let mut locals = Vec::with_capacity(n);
    let mut wave_logs = Vec::with_capacity(n);
    for (u, node) in nodes.iter().enumerate() {
        trees.push(need(u, node.tree().cloned())?);
        numbers.push(need(u, node.number())?);
        levels.push(need(u, node.level())?);
        locals.push(need(u, node.local_results().cloned())?);
        wave_logs.push(need(u, node.wave_log().cloned())?);
    }

    let mut vertex_of = vec![usize::MAX; n];
    for (u, &k) in numbers.iter().enumerate() {
        let slot = (k as usize).checked_sub(1).and_then(|i| vertex_of.get_mut(i));
        match slot {
            Some(s) if *s == usize::MAX => *s = u,
            _ => return Err(RunError::NumberingNotBijective(k)),
        }
    }

    let mut distances = vec![vec![0; n]; n];
    for (u, local) in locals.iter().enumerate() {
        if local.dist_vector.len() != n {
            return Err(RunError::MissingOutput(u));
        }
        for (i, &d) in local.dist_vector.iter().enumerate() {
            distances[u][vertex_of[i]] = d;
        }
    }

    let mut cut_edges = BTreeSet::new();
    for &(u, v) in graph.edges() {
        let at_u = locals[u].cut_edge_flags[ports.port_to(u, v).expect("edge has ports").index()];
        let at_v = locals[v].cut_edge_flags[ports.port_to(v, u).expect("edge has ports").index()];
        if at_u != at_v {
            return Err(RunError::EndpointDisagreement(u, v));
        }
        if at_u {
            cut_edges.insert((u, v));
        }
    }
    let cut_vertices = (0..n).filter(|&u| locals[u].is_cut).collect();

    let leader = &nodes[graph.leader()];
    let global = need(graph.leader(), leader.aggregated())?;
    for (u, node) in nodes.iter().enumerate() {
        let got = need(u, node.received())?;
        if got.diameter != global.diameter {
            return Err(RunError::BroadcastDisagreement("diameter"));
        }
        if got.girth != global.girth {
            return Err(RunError::BroadcastDisagreement("girth"));
        }
        if got.biconnected != global.biconnected {
            return Err(RunError::BroadcastDisagreement("biconnected"));
        }
    }

    Ok(PipelineResult {
        n_at_leader: need(graph.leader(), leader.network_size())?,
        rounds: leader.rounds(),
        visit_counts: nodes.iter().map(|n| n.trav_state()).collect(),
        eccentricities: locals.iter().map(|l| l.eccentricity).collect(),
        cycle_candidates: locals.iter().map(|l| l.cycle_length).collect(),
        trees,
        numbers,
        levels,
        distances,
        cut_edges,
        cut_vertices,
        global,
        wave_logs,
        trace: out.trace,
        metrics: out.metrics,
    })
}

fn need<T>(u: usize, x: Option<T>) -> Result<T, RunError> {
    x.ok_or(RunError::MissingOutput(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind, PortPolicy};
    use crate::oracles;

    fn run(g: &Graph) -> PipelineResult {
        let p = PortMap::assign(g, PortPolicy::AdjacencyOrder, 0);
        run_pipeline(g, &p, PipelineOptions::default()).unwrap()
    }

    #[test]
    fn complete_and_cycle() {
        let k4 = generate(GraphKind::Complete(4), 0).unwrap();
        let r = run(&k4);
        assert_eq!((r.diameter(), r.girth(), r.biconnected()), (1, 3, true));
        let c5 = generate(GraphKind::Cycle(5), 0).unwrap();
        let r = run(&c5);
        assert_eq!((r.diameter(), r.girth(), r.biconnected()), (2, 5, true));
        assert!(r.cut_edges.is_empty());
    }

    #[test]
    fn trees_have_no_girth() {
        let g = generate(GraphKind::Path(6), 0).unwrap();
        let r = run(&g);
        assert_eq!(r.girth(), 0);
        assert_eq!(r.diameter(), 5);
        assert_eq!(r.cut_edges.len(), 5);
        assert_eq!(r.cut_vertices, (1..5).collect());
        assert!(!r.biconnected());
    }

    #[test]
    fn single_vertex_and_single_edge() {
        let r = run(&Graph::new(1, &[], 0).unwrap());
        assert_eq!(r.distances, vec![vec![0]]);
        assert_eq!((r.diameter(), r.girth(), r.biconnected()), (0, 0, true));
        let r = run(&generate(GraphKind::Path(2), 0).unwrap());
        assert_eq!(r.cut_edges, BTreeSet::from([(0, 1)]));
        assert!(r.cut_vertices.is_empty());
        assert!(r.biconnected());
    }

    #[test]
    fn random_graphs_match_oracles() {
        for seed in 0..40 {
            let g = generate(GraphKind::RandomConnected { n: 14, p: 0.18 }, seed).unwrap();
            let g = g.clone().with_leader(seed as usize % g.n()).unwrap();
            let p = PortMap::assign(&g, PortPolicy::Random, seed);
            let r = run_pipeline(&g, &p, PipelineOptions::default()).unwrap();
            let o = oracles::oracle_report(&g);
            assert_eq!(r.distances, o.distances, "seed {seed}");
            assert_eq!(r.diameter(), o.diameter);
            assert_eq!(r.girth(), o.girth, "seed {seed}");
            assert_eq!(r.cut_edges, o.cuts.bridges);
            assert_eq!(r.cut_vertices, o.cuts.articulations);
            assert_eq!(r.biconnected(), o.cuts.biconnected);
            assert_eq!(r.n_at_leader, 14);
        }
    }
}
