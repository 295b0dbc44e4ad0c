//! Leader-rooted BFS spanning tree via the Start/Accept/Reject/OK handshake.

use std::collections::BTreeSet;

use crate::engine::{RoundContext, Signal};
use crate::error::{ProtocolError, RunError};
use crate::graph::{Graph, Port, PortMap};
use crate::node::{self, Preset, Stage};

/// A vertex's local view of the spanning tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeView {
    /// `None` exactly at the leader.
    pub parent: Option<Port>,
    /// Children in ascending port order.
    pub children: Vec<Port>,
    pub nontree: Vec<Port>,
}

impl TreeView {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn first_child(&self) -> Option<Port> {
        self.children.first().copied()
    }

    pub fn last_child(&self) -> Option<Port> {
        self.children.last().copied()
    }

    /// The child following `child` in port order.
    pub fn next_child(&self, child: Port) -> Option<Port> {
        let i = self.children.iter().position(|&c| c == child)?;
        self.children.get(i + 1).copied()
    }
}

/// Per-vertex BFS automaton.
#[derive(Debug, Clone)]
pub struct Bfs {
    leader: bool,
    /// Round in which this vertex emitted its own STARTs.
    started_at: Option<u64>,
    parent: Option<Port>,
    awaiting: BTreeSet<Port>,
    children: Vec<Port>,
    nontree: BTreeSet<Port>,
    children_known: bool,
    oks: usize,
    done_at: Option<u64>,
}

impl Bfs {
    pub fn new(leader: bool) -> Self {
        Bfs {
            leader,
            started_at: None,
            parent: None,
            awaiting: BTreeSet::new(),
            children: Vec::new(),
            nontree: BTreeSet::new(),
            children_known: false,
            oks: 0,
            done_at: None,
        }
    }

    /// Leader only: flood START on every port.
    pub fn launch<E>(&mut self, ctx: &mut RoundContext<'_, E>) -> Result<(), ProtocolError> {
        debug_assert!(self.leader);
        self.started_at = Some(ctx.round());
        for i in 0..ctx.degree() {
            let p = Port::from_index(i);
            ctx.send(p, Signal::Start)?;
            self.awaiting.insert(p);
        }
        self.try_finish(ctx)
    }

    /// Handles this round's BFS-family arrivals.
    pub fn step<E>(
        &mut self,
        ctx: &mut RoundContext<'_, E>,
        arrivals: &[(Port, Signal)],
    ) -> Result<(), ProtocolError> {
        let round = ctx.round();
        let starts: Vec<Port> = arrivals
            .iter()
            .filter(|(_, s)| *s == Signal::Start)
            .map(|&(p, _)| p)
            .collect();
        match self.started_at {
            None if !starts.is_empty() => {
                if self.leader {
                    return Err(ProtocolError::Violation("leader received START before launching".into()));
                }
                let parent = starts[0];
                self.parent = Some(parent);
                self.started_at = Some(round);
                ctx.send(parent, Signal::Accept)?;
                for &p in &starts[1..] {
                    ctx.send(p, Signal::Reject)?;
                    self.nontree.insert(p);
                }
                for i in 0..ctx.degree() {
                    let p = Port::from_index(i);
                    if !starts.contains(&p) {
                        ctx.send(p, Signal::Start)?;
                        self.awaiting.insert(p);
                    }
                }
            }
            None => {}
            Some(t) => {
                if !starts.is_empty() && round != t + 1 {
                    return Err(ProtocolError::Violation(format!(
                        "START at round {round}, joined at {t}"
                    )));
                }
                for &p in &starts {
                    ctx.send(p, Signal::Reject)?;
                    self.nontree.insert(p);
                }
            }
        }
        for &(p, s) in arrivals {
            match s {
                Signal::Start => {}
                Signal::Accept => {
                    if !self.awaiting.remove(&p) {
                        return Err(ProtocolError::Violation(format!("unexpected ACCEPT on port {p}")));
                    }
                    self.children.push(p);
                }
                Signal::Reject => {
                    if !self.awaiting.remove(&p) {
                        return Err(ProtocolError::Violation(format!("unexpected REJECT on port {p}")));
                    }
                    self.nontree.insert(p);
                }
                Signal::OkBfs => {
                    if !self.children_known || !self.children.contains(&p) {
                        return Err(ProtocolError::Violation(format!("OK from non-child port {p}")));
                    }
                    self.oks += 1;
                }
                other => unreachable!("{other} routed to BFS"),
            }
        }
        self.try_finish(ctx)
    }

    fn try_finish<E>(&mut self, ctx: &mut RoundContext<'_, E>) -> Result<(), ProtocolError> {
        let round = ctx.round();
        let Some(t) = self.started_at else { return Ok(()) };
        if !self.children_known && round >= t + 2 {
            if !self.awaiting.is_empty() {
                return Err(ProtocolError::Violation(format!(
                    "no reply on {} port(s) two rounds after START",
                    self.awaiting.len()
                )));
            }
            self.children.sort_unstable();
            self.children_known = true;
        }
        if self.children_known && self.done_at.is_none() && self.oks == self.children.len() {
            if let Some(parent) = self.parent {
                ctx.send(parent, Signal::OkBfs)?;
            }
            self.done_at = Some(round);
        }
        Ok(())
    }

    /// Round in which the leader learned completion, or in which a
    /// non-leader sent its OK.
    pub fn done_at(&self) -> Option<u64> {
        self.done_at
    }

    pub fn tree(&self) -> Option<TreeView> {
        self.children_known.then(|| TreeView {
            parent: self.parent,
            children: self.children.clone(),
            nontree: self.nontree.iter().copied().collect(),
        })
    }
}

/// Runs the BFS phase alone. Returns each vertex's tree view and the round in
/// which the leader detected completion.
pub fn run_bfs(graph: &Graph, ports: &PortMap) -> Result<(Vec<TreeView>, u64), RunError> {
    let out = node::run_stage(graph, ports, Stage::Bfs, Preset::none(graph.n()), None)?;
    let trees = out
        .nodes
        .iter()
        .enumerate()
        .map(|(u, n)| n.tree().cloned().ok_or(RunError::MissingOutput(u)))
        .collect::<Result<_, _>>()?;
    let done = out.nodes[graph.leader()].rounds().bfs.ok_or(RunError::MissingOutput(graph.leader()))?;
    Ok((trees, done))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind, PortPolicy};
    use crate::oracles;

    fn tree_depth(graph: &Graph, ports: &PortMap, trees: &[TreeView], mut u: usize) -> usize {
        let mut depth = 0;
        while let Some(p) = trees[u].parent {
            u = ports.neighbor(u, p);
            depth += 1;
            assert!(depth <= graph.n());
        }
        depth
    }

    #[test]
    fn star_centre_leader() {
        let g = generate(GraphKind::Star(4), 0).unwrap();
        let p = PortMap::assign(&g, PortPolicy::AdjacencyOrder, 0);
        let (trees, _) = run_bfs(&g, &p).unwrap();
        assert_eq!(trees[0].children, (1..=4).map(Port::new).collect::<Vec<_>>());
        for leaf in 1..=4 {
            assert_eq!(trees[leaf].parent, Some(Port::new(1)));
            assert!(trees[leaf].is_leaf());
        }
    }

    #[test]
    fn c4_opposite_vertex_picks_lower_port() {
        // 0-1-2-3-0, leader 0; vertex 2 hears START from 1 and 3 in the same round.
        let g = generate(GraphKind::Cycle(4), 0).unwrap();
        let p = PortMap::assign(&g, PortPolicy::AdjacencyOrder, 0);
        let (trees, done) = run_bfs(&g, &p).unwrap();
        assert_eq!(trees[2].parent, Some(Port::new(1)));
        assert_eq!(p.neighbor(2, Port::new(1)), 1);
        assert_eq!(trees[2].nontree, vec![Port::new(2)]);
        assert_eq!(trees[3].nontree, vec![Port::new(2)]);
        let tree_edges: usize = trees.iter().map(|t| t.children.len()).sum();
        assert_eq!(tree_edges, 3);
        // ecc(leader) = 2, so completion is at 2 * 2 + 2.
        assert_eq!(done, 6);

        // Swap vertex 2's ports: now 3 is on port 1 and becomes the parent.
        let swapped = p.with_overrides(&g, "2 1 3\n2 2 1\n").unwrap();
        let (trees, _) = run_bfs(&g, &swapped).unwrap();
        assert_eq!(swapped.neighbor(2, trees[2].parent.unwrap()), 3);
    }

    #[test]
    fn tree_paths_are_shortest_paths() {
        for seed in 0..20 {
            let g = generate(GraphKind::RandomConnected { n: 18, p: 0.2 }, seed).unwrap();
            let g = g.clone().with_leader(seed as usize % g.n()).unwrap();
            let p = PortMap::assign(&g, PortPolicy::Random, seed);
            let (trees, done) = run_bfs(&g, &p).unwrap();
            let dist = oracles::bfs_distances(&g, g.leader());
            for u in 0..g.n() {
                assert_eq!(tree_depth(&g, &p, &trees, u), dist[u] as usize);
                for &c in &trees[u].children {
                    let v = p.neighbor(u, c);
                    assert_eq!(trees[v].parent.map(|q| p.neighbor(v, q)), Some(u));
                }
            }
            let ecc = *dist.iter().max().unwrap();
            assert!(done <= 2 * ecc + 3);
            assert!(done <= 2 * g.n() as u64 + 3);
        }
    }

    #[test]
    fn single_vertex() {
        let g = Graph::new(1, &[], 0).unwrap();
        let p = PortMap::assign(&g, PortPolicy::AdjacencyOrder, 0);
        let (trees, done) = run_bfs(&g, &p).unwrap();
        assert_eq!(trees, vec![TreeView::default()]);
        assert!(done <= 3);
    }
}
