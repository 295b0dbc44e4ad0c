//! Property-by-property comparison of a protocol run against the centralized
//! oracles.

use std::fmt;

use crate::error::RunError;
use crate::graph::{Graph, PortMap};
use crate::oracles::{self, UNREACHABLE};
use crate::pipeline::{run_pipeline, PipelineOptions, PipelineResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub property: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<13} {}", self.property, if self.pass { "PASS" } else { "FAIL" })?;
        if !self.detail.is_empty() {
            write!(f, "  {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Verification {
    pub checks: Vec<Check>,
    /// Vertices whose own cycle candidate differs from the shortest cycle
    /// through them. Informational: only the global minimum must match.
    pub notes: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn check(property: &'static str, pass: bool, detail: impl FnOnce() -> String) -> Check {
    Check { property, pass, detail: if pass { String::new() } else { detail() } }
}

pub fn verify(graph: &Graph, result: &PipelineResult) -> Verification {
    let oracle = oracles::oracle_report(graph);
    let cube = oracles::check_cube_path(graph, &result.numbers);
    let n = graph.n() as u64;
    let mut checks = vec![
        check("numbering", cube.pass, || {
            if cube.max_consecutive == UNREACHABLE {
                "not a bijection onto 1..=n".into()
            } else {
                format!("consecutive numbers {} apart", cube.max_consecutive)
            }
        }),
        check("network-size", result.n_at_leader == n, || format!("leader learned {}", result.n_at_leader)),
    ];
    let wrong_pair = (0..graph.n())
        .flat_map(|u| (0..graph.n()).map(move |v| (u, v)))
        .find(|&(u, v)| result.distances[u][v] != oracle.distances[u][v]);
    checks.push(check("apsp", wrong_pair.is_none(), || {
        let (u, v) = wrong_pair.expect("failing check has a witness");
        format!("d({u},{v}) = {} expected {}", result.distances[u][v], oracle.distances[u][v])
    }));
    checks.push(check("diameter", result.diameter() == oracle.diameter, || {
        format!("got {} expected {}", result.diameter(), oracle.diameter)
    }));
    checks.push(check("girth", result.girth() == oracle.girth, || {
        format!("got {} expected {}", result.girth(), oracle.girth)
    }));
    checks.push(check("cut-edges", result.cut_edges == oracle.cuts.bridges, || {
        format!("got {:?} expected {:?}", result.cut_edges, oracle.cuts.bridges)
    }));
    checks.push(check("cut-vertices", result.cut_vertices == oracle.cuts.articulations, || {
        format!("got {:?} expected {:?}", result.cut_vertices, oracle.cuts.articulations)
    }));
    checks.push(check("biconnected", result.biconnected() == oracle.cuts.biconnected, || {
        format!("got {} expected {}", result.biconnected(), oracle.cuts.biconnected)
    }));

    let notes = (0..graph.n())
        .filter_map(|v| {
            let own = result.cycle_candidates[v];
            let through = oracles::shortest_cycle_through(graph, v);
            (own != through).then(|| format!("vertex {v}: candidate {own:?}, shortest cycle through it {through:?}"))
        })
        .collect();
    Verification { checks, notes }
}

/// Runs the protocol and verifies it.
pub fn run_and_verify(graph: &Graph, ports: &PortMap) -> Result<(PipelineResult, Verification), RunError> {
    let result = run_pipeline(graph, ports, PipelineOptions::default())?;
    let v = verify(graph, &result);
    Ok((result, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind, PortPolicy};

    #[test]
    fn claw_passes_everything() {
        let g = generate(GraphKind::SubdividedClaw, 0).unwrap();
        let p = PortMap::assign(&g, PortPolicy::Random, 1);
        let (_, v) = run_and_verify(&g, &p).unwrap();
        assert!(v.passed(), "{:?}", v.failures().collect::<Vec<_>>());
        assert_eq!(v.checks.len(), 8);
    }

    #[test]
    fn tampered_result_is_caught() {
        let g = generate(GraphKind::Cycle(6), 0).unwrap();
        let p = PortMap::assign(&g, PortPolicy::AdjacencyOrder, 0);
        let (mut r, _) = run_and_verify(&g, &p).unwrap();
        r.global.girth = 4;
        r.distances[0][3] = 2;
        let v = verify(&g, &r);
        let failed: Vec<_> = v.failures().map(|c| c.property).collect();
        assert_eq!(failed, vec!["apsp", "girth"]);
    }
}
