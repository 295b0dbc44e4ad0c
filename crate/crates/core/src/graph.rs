//! Anonymous port-numbered networks with a distinguished leader.
//!
//! Vertex indices exist only on the harness side: they label results and let
//! the oracles compare against the distributed outputs. Processes see nothing
//! but their own ports.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::GraphError;

/// A local port number, `1..=deg(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Port(u32);

impl Port {
    /// Panics on zero: ports are 1-based.
    pub fn new(p: u32) -> Self {
        assert!(p >= 1, "ports are numbered from 1");
        Port(p)
    }

    pub fn from_index(i: usize) -> Self {
        Port(i as u32 + 1)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A simple connected undirected graph with a leader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    leader: usize,
}

impl Graph {
    /// Validates and builds a graph on `n` vertices.
    pub fn new(n: usize, edge_list: &[(usize, usize)], leader: usize) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if leader >= n {
            return Err(GraphError::LeaderOutOfRange { leader, n });
        }
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edge_list {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let graph = Graph {
            adjacency,
            edges: seen.into_iter().collect(),
            leader,
        };
        if !graph.is_connected() {
            return Err(GraphError::DisconnectedGraph);
        }
        Ok(graph)
    }

    /// Builds a graph whose vertex count is inferred from the edge list
    /// (indices must be dense in `0..n`).
    pub fn from_edges(edge_list: &[(usize, usize)], leader: usize) -> Result<Self, GraphError> {
        let n = edge_list
            .iter()
            .map(|&(u, v)| u.max(v) + 1)
            .max()
            .unwrap_or(1);
        Self::new(n, edge_list, leader)
    }

    pub fn with_leader(mut self, leader: usize) -> Result<Self, GraphError> {
        if leader >= self.n() {
            return Err(GraphError::LeaderOutOfRange { leader, n: self.n() });
        }
        self.leader = leader;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn leader(&self) -> usize {
        self.leader
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbours of `u` in ascending index order.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n()
    }

    /// Serializes to the edge-list text format.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n(), self.m(), self.leader);
        for &(u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    /// Parses the edge-list text format: a header `n m leader`, then `m`
    /// lines `u v`. Lines starting with `#` and blank lines are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut lines = data_lines(text);
        let (line_no, header) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            msg: "missing header `n m leader`".into(),
        })?;
        let head = parse_fields(line_no, header, 3)?;
        let (n, m, leader) = (head[0], head[1], head[2]);
        let mut edge_list = Vec::with_capacity(m);
        for (line_no, line) in lines {
            let f = parse_fields(line_no, line, 2)?;
            edge_list.push((f[0], f[1]));
        }
        if edge_list.len() != m {
            return Err(GraphError::Parse {
                line: 1,
                msg: format!("header declares {m} edges, found {}", edge_list.len()),
            });
        }
        Self::new(n, &edge_list, leader)
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_fields(line: usize, text: &str, count: usize) -> Result<Vec<usize>, GraphError> {
    let fields = text
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>().map_err(|e| GraphError::Parse {
                line,
                msg: format!("`{t}`: {e}"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if fields.len() != count {
        return Err(GraphError::Parse {
            line,
            msg: format!("expected {count} fields, found {}", fields.len()),
        });
    }
    Ok(fields)
}

/// Per-vertex bijections between incident edges and `1..=deg(u)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortMap {
    /// `targets[u][p - 1]` is the neighbour reached from `u` through port `p`.
    targets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortPolicy {
    AdjacencyOrder,
    Random,
}

impl FromStr for PortPolicy {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adjacency" | "adjacency_order" => Ok(PortPolicy::AdjacencyOrder),
            "random" => Ok(PortPolicy::Random),
            other => Err(GraphError::InvalidParams(format!("unknown port policy `{other}`"))),
        }
    }
}

impl PortMap {
    pub fn assign(graph: &Graph, policy: PortPolicy, seed: u64) -> Self {
        let mut targets: Vec<Vec<usize>> = (0..graph.n()).map(|u| graph.neighbors(u).to_vec()).collect();
        if policy == PortPolicy::Random {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for list in &mut targets {
                list.shuffle(&mut rng);
            }
        }
        PortMap { targets }
    }

    /// Builds a port map from explicit per-vertex target lists, checking that
    /// each list is a permutation of the vertex's neighbours.
    pub fn from_targets(graph: &Graph, targets: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        if targets.len() != graph.n() {
            return Err(GraphError::InvalidPorts(format!(
                "{} vertex entries for {} vertices",
                targets.len(),
                graph.n()
            )));
        }
        for (u, list) in targets.iter().enumerate() {
            let mut sorted = list.clone();
            sorted.sort_unstable();
            if sorted != graph.neighbors(u) {
                return Err(GraphError::InvalidPorts(format!(
                    "ports of vertex {u} are not a bijection onto its incident edges"
                )));
            }
        }
        Ok(PortMap { targets })
    }

    /// Applies a port file (`u port v` per line) on top of `self`. Every
    /// vertex mentioned must have all of its ports listed.
    pub fn with_overrides(&self, graph: &Graph, text: &str) -> Result<Self, GraphError> {
        let mut partial: Vec<Option<Vec<Option<usize>>>> = vec![None; graph.n()];
        for (line_no, line) in data_lines(text) {
            let f = parse_fields(line_no, line, 3)?;
            let (u, p, v) = (f[0], f[1], f[2]);
            if u >= graph.n() {
                return Err(GraphError::VertexOutOfRange { vertex: u, n: graph.n() });
            }
            let deg = graph.degree(u);
            if p == 0 || p > deg {
                return Err(GraphError::InvalidPorts(format!(
                    "line {line_no}: port {p} outside 1..={deg} at vertex {u}"
                )));
            }
            let slots = partial[u].get_or_insert_with(|| vec![None; deg]);
            if slots[p - 1].replace(v).is_some() {
                return Err(GraphError::InvalidPorts(format!(
                    "line {line_no}: port {p} of vertex {u} assigned twice"
                )));
            }
        }
        let mut targets = self.targets.clone();
        for (u, slots) in partial.into_iter().enumerate() {
            if let Some(slots) = slots {
                targets[u] = slots
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| {
                        v.ok_or_else(|| {
                            GraphError::InvalidPorts(format!("vertex {u} is missing port {}", i + 1))
                        })
                    })
                    .collect::<Result<_, _>>()?;
            }
        }
        Self::from_targets(graph, targets)
    }

    pub fn degree(&self, u: usize) -> usize {
        self.targets[u].len()
    }

    pub fn neighbor(&self, u: usize, port: Port) -> usize {
        self.targets[u][port.index()]
    }

    pub fn port_to(&self, u: usize, v: usize) -> Option<Port> {
        self.targets[u].iter().position(|&w| w == v).map(Port::from_index)
    }

    /// Ports of `u` in order, paired with the neighbour they reach.
    pub fn ports(&self, u: usize) -> impl Iterator<Item = (Port, usize)> + '_ {
        self.targets[u].iter().enumerate().map(|(i, &v)| (Port::from_index(i), v))
    }

    /// Serializes as a port file (`u port v`).
    pub fn to_port_file(&self) -> String {
        let mut out = String::new();
        for (u, list) in self.targets.iter().enumerate() {
            for (i, v) in list.iter().enumerate() {
                out.push_str(&format!("{u} {} {v}\n", i + 1));
            }
        }
        out
    }
}

/// Graph families understood by [`generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    Path(usize),
    Cycle(usize),
    Complete(usize),
    /// Star with the given number of leaves; the centre is vertex 0.
    Star(usize),
    RandomTree(usize),
    RandomConnected { n: usize, p: f64 },
    /// K_{1,3} with every edge subdivided: centre 0, mid vertices 1..=3,
    /// leaves 4..=6.
    SubdividedClaw,
}

/// A graph family plus an optional seed carried in its textual form
/// (`random:20:0.2:7`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GraphKind,
    pub seed: Option<u64>,
}

impl FromStr for GeneratorSpec {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || GraphError::InvalidParams(format!("cannot parse generator spec `{s}`"));
        let int = |i: usize| -> Result<usize, GraphError> {
            parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad())
        };
        let seed_at = |i: usize| -> Result<Option<u64>, GraphError> {
            parts.get(i).map(|t| t.parse().map_err(|_| bad())).transpose()
        };
        let (kind, seed, arity) = match parts[0] {
            "path" => (GraphKind::Path(int(1)?), None, 2),
            "cycle" => (GraphKind::Cycle(int(1)?), None, 2),
            "complete" => (GraphKind::Complete(int(1)?), None, 2),
            "star" => (GraphKind::Star(int(1)?), None, 2),
            "tree" | "random_tree" => (GraphKind::RandomTree(int(1)?), seed_at(2)?, 3),
            "random" | "random_connected" => {
                let p: f64 = parts.get(2).ok_or_else(bad)?.parse().map_err(|_| bad())?;
                (GraphKind::RandomConnected { n: int(1)?, p }, seed_at(3)?, 4)
            }
            "claw" | "subdivided_claw" => (GraphKind::SubdividedClaw, None, 1),
            _ => return Err(bad()),
        };
        if parts.len() > arity {
            return Err(bad());
        }
        Ok(GeneratorSpec { kind, seed })
    }
}

impl GeneratorSpec {
    pub fn generate(&self, default_seed: u64) -> Result<Graph, GraphError> {
        generate(self.kind, self.seed.unwrap_or(default_seed))
    }
}

/// Generates a graph of the given family, led by vertex 0. Deterministic in
/// `(kind, seed)`.
pub fn generate(kind: GraphKind, seed: u64) -> Result<Graph, GraphError> {
    let invalid = |msg: &str| Err(GraphError::InvalidParams(msg.to_string()));
    let edges: Vec<(usize, usize)> = match kind {
        GraphKind::Path(n) => {
            if n == 0 {
                return invalid("path needs n >= 1");
            }
            return Graph::new(n, &(1..n).map(|i| (i - 1, i)).collect::<Vec<_>>(), 0);
        }
        GraphKind::Cycle(n) => {
            if n < 3 {
                return invalid("cycle needs n >= 3");
            }
            (0..n).map(|i| (i, (i + 1) % n)).collect()
        }
        GraphKind::Complete(n) => {
            if n == 0 {
                return invalid("complete graph needs n >= 1");
            }
            return Graph::new(
                n,
                &(0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect::<Vec<_>>(),
                0,
            );
        }
        GraphKind::Star(leaves) => {
            return Graph::new(leaves + 1, &(1..=leaves).map(|v| (0, v)).collect::<Vec<_>>(), 0);
        }
        GraphKind::SubdividedClaw => vec![(0, 1), (0, 2), (0, 3), (1, 4), (2, 5), (3, 6)],
        GraphKind::RandomTree(n) => {
            if n == 0 {
                return invalid("tree needs n >= 1");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            return Graph::new(n, &random_tree_edges(n, &mut rng), 0);
        }
        GraphKind::RandomConnected { n, p } => {
            if n == 0 {
                return invalid("random graph needs n >= 1");
            }
            if !(0.0..=1.0).contains(&p) {
                return invalid("edge probability must lie in [0, 1]");
            }
            return random_connected(n, p, seed);
        }
    };
    Graph::from_edges(&edges, 0)
}

const CONNECT_RETRIES: usize = 100;

fn random_connected(n: usize, p: f64, seed: u64) -> Result<Graph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = Vec::new();
    for _ in 0..CONNECT_RETRIES {
        sample = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|_| rng.gen_bool(p))
            .collect();
        if let Ok(g) = Graph::new(n, &sample, 0) {
            return Ok(g);
        }
    }
    let mut merged: BTreeSet<(usize, usize)> = sample.into_iter().collect();
    for (u, v) in random_tree_edges(n, &mut rng) {
        merged.insert((u.min(v), u.max(v)));
    }
    Graph::new(n, &merged.into_iter().collect::<Vec<_>>(), 0)
}

/// Uniform random labelled tree via a Prüfer sequence.
fn random_tree_edges(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => return Vec::new(),
        2 => return vec![(0, 1)],
        _ => {}
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let leaf = leaves.pop_first().expect("prufer decoding always has a leaf");
        edges.push((leaf, c));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let last: Vec<usize> = leaves.into_iter().collect();
    edges.push((last[0], last[1]));
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_examples() {
        let p3 = Graph::new(3, &[(0, 1), (1, 2)], 0).unwrap();
        assert_eq!(p3.m(), 2);
        assert_eq!(p3.neighbors(1), &[0, 2]);
        let tri = Graph::new(3, &[(0, 1), (1, 2), (2, 0)], 0).unwrap();
        assert_eq!(tri.m(), 3);
        assert_eq!(
            Graph::new(4, &[(0, 1), (2, 3)], 0),
            Err(GraphError::DisconnectedGraph)
        );
    }

    #[test]
    fn build_rejections() {
        assert_eq!(Graph::new(2, &[(0, 0)], 0), Err(GraphError::SelfLoop(0)));
        assert_eq!(
            Graph::new(2, &[(0, 1), (1, 0)], 0),
            Err(GraphError::DuplicateEdge(0, 1))
        );
        assert_eq!(
            Graph::new(2, &[(0, 1)], 2),
            Err(GraphError::LeaderOutOfRange { leader: 2, n: 2 })
        );
        assert_eq!(
            Graph::new(2, &[(0, 5)], 0),
            Err(GraphError::VertexOutOfRange { vertex: 5, n: 2 })
        );
        assert_eq!(Graph::new(0, &[], 0), Err(GraphError::Empty));
        assert!(Graph::new(1, &[], 0).is_ok());
    }

    #[test]
    fn generators() {
        let c5 = generate(GraphKind::Cycle(5), 0).unwrap();
        assert_eq!((c5.n(), c5.m()), (5, 5));
        let claw = generate(GraphKind::SubdividedClaw, 0).unwrap();
        assert_eq!((claw.n(), claw.m()), (7, 6));
        assert_eq!(claw.degree(0), 3);
        assert!((1..=3).all(|v| claw.degree(v) == 2));
        assert!((4..=6).all(|v| claw.degree(v) == 1));
        let a = generate(GraphKind::RandomConnected { n: 20, p: 0.2 }, 7).unwrap();
        let b = generate(GraphKind::RandomConnected { n: 20, p: 0.2 }, 7).unwrap();
        assert_eq!(a, b);
        assert!(generate(GraphKind::Cycle(2), 0).is_err());
        // p = 0 never connects; the spanning-tree fallback must kick in.
        let sparse = generate(GraphKind::RandomConnected { n: 12, p: 0.0 }, 3).unwrap();
        assert_eq!(sparse.m(), 11);
        let t = generate(GraphKind::RandomTree(40), 9).unwrap();
        assert_eq!(t.m(), 39);
    }

    #[test]
    fn generator_spec_parsing() {
        let s: GeneratorSpec = "random:20:0.2:7".parse().unwrap();
        assert_eq!(s.kind, GraphKind::RandomConnected { n: 20, p: 0.2 });
        assert_eq!(s.seed, Some(7));
        assert_eq!("path:4".parse::<GeneratorSpec>().unwrap().kind, GraphKind::Path(4));
        assert_eq!(
            "claw".parse::<GeneratorSpec>().unwrap().kind,
            GraphKind::SubdividedClaw
        );
        assert!("path".parse::<GeneratorSpec>().is_err());
        assert!("path:4:1".parse::<GeneratorSpec>().is_err());
        assert!("wheel:5".parse::<GeneratorSpec>().is_err());
        assert!("cycle:2".parse::<GeneratorSpec>().unwrap().generate(0).is_err());
    }

    #[test]
    fn ports_star_adjacency_order() {
        let star = generate(GraphKind::Star(3), 0).unwrap();
        let ports = PortMap::assign(&star, PortPolicy::AdjacencyOrder, 0);
        let at_center: Vec<_> = ports.ports(0).collect();
        assert_eq!(
            at_center,
            vec![(Port::new(1), 1), (Port::new(2), 2), (Port::new(3), 3)]
        );
        assert_eq!(ports.port_to(2, 0), Some(Port::new(1)));
    }

    #[test]
    fn ports_random_deterministic_and_bijective() {
        let g = generate(GraphKind::RandomConnected { n: 15, p: 0.3 }, 1).unwrap();
        let a = PortMap::assign(&g, PortPolicy::Random, 42);
        let b = PortMap::assign(&g, PortPolicy::Random, 42);
        assert_eq!(a, b);
        for u in 0..g.n() {
            let mut reached: Vec<usize> = a.ports(u).map(|(_, v)| v).collect();
            reached.sort_unstable();
            assert_eq!(reached, g.neighbors(u));
        }
    }

    #[test]
    fn edge_list_round_trip_and_comments() {
        let text = "# a triangle\n3 3 1\n0 1\n# middle comment\n1 2\n\n2 0\n";
        let g = Graph::parse_edge_list(text).unwrap();
        assert_eq!((g.n(), g.m(), g.leader()), (3, 3, 1));
        assert_eq!(Graph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
        assert!(matches!(
            Graph::parse_edge_list("3 2 0\n0 1\n"),
            Err(GraphError::Parse { .. })
        ));
        assert!(matches!(
            Graph::parse_edge_list("2 1 0\n0 x\n"),
            Err(GraphError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn port_file_overrides() {
        let star = generate(GraphKind::Star(3), 0).unwrap();
        let base = PortMap::assign(&star, PortPolicy::AdjacencyOrder, 0);
        let over = base.with_overrides(&star, "0 1 3\n0 2 1\n0 3 2\n").unwrap();
        assert_eq!(over.neighbor(0, Port::new(1)), 3);
        assert_eq!(over.neighbor(1, Port::new(1)), 0);
        assert!(base.with_overrides(&star, "0 1 3\n").is_err());
        assert!(base.with_overrides(&star, "0 1 1\n0 2 1\n0 3 2\n").is_err());
        assert!(base.with_overrides(&star, "0 4 1\n").is_err());
    }
}
