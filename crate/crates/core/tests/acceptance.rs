//! Acceptance suite. Each criterion is its own test and also prints one
//! `PASS`/`FAIL` line straight to stdout, so the verdicts show up even when
//! libtest captures output.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use wavecast::corpus::{self, Case};
use wavecast::graph::{generate, Graph, GraphKind, PortMap, PortPolicy};
use wavecast::oracles;
use wavecast::pipeline::{run_pipeline, PipelineOptions, PipelineResult};
use wavecast::waves::start_schedule;

const EXHAUSTIVE_MAX_N: usize = 6;
const RANDOM_GRAPHS: usize = 500;
const RANDOM_TREES: usize = 100;
const PORT_ASSIGNMENTS: usize = 3;
const CORPUS_TIME_LIMIT: Duration = Duration::from_secs(120);
const SCALING_SIZES: [usize; 5] = [16, 32, 64, 128, 256];
const N256_TIME_LIMIT: Duration = Duration::from_secs(30);
/// Allowed growth of rounds/n from one size to the next.
const RATIO_SLACK: f64 = 1.20;

fn report(criterion: u32, title: &str, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let verdict = if pass { "PASS" } else { "FAIL" };
    writeln!(out, "[acceptance] criterion {criterion} {verdict}: {title} ({detail})").unwrap();
}

/// Per-case failures, tagged by criterion.
#[derive(Default)]
struct CaseFindings {
    label: String,
    failures: Vec<(u32, String)>,
    closure: Option<u64>,
    /// Vertices whose cycle candidate differs from the shortest cycle through them.
    candidate_mismatches: usize,
    vertices: usize,
}

struct CorpusRun {
    cases: usize,
    elapsed: Duration,
    findings: Vec<CaseFindings>,
}

impl CorpusRun {
    fn failures(&self, criterion: u32) -> Vec<String> {
        self.findings
            .iter()
            .flat_map(|f| {
                f.failures
                    .iter()
                    .filter(move |(c, _)| *c == criterion)
                    .map(move |(_, msg)| format!("{}: {msg}", f.label))
            })
            .collect()
    }
}

fn build_corpus() -> Vec<Case> {
    let mut seed = 0u64;
    let mut next_seed = || {
        seed += 1;
        seed
    };
    let mut cases = Vec::new();
    for n in 1..=EXHAUSTIVE_MAX_N {
        for (i, g) in corpus::all_connected_graphs(n).into_iter().enumerate() {
            cases.extend(corpus::port_variants(&format!("exhaustive n={n} #{i}"), &g, PORT_ASSIGNMENTS, next_seed()));
        }
    }
    for (label, g) in corpus::random_graphs(RANDOM_GRAPHS, 7..=64, 0xACCE) {
        cases.extend(corpus::port_variants(&label, &g, PORT_ASSIGNMENTS, next_seed()));
    }
    for (label, g) in corpus::random_trees(RANDOM_TREES, 1..=128, 0x7EE) {
        cases.extend(corpus::port_variants(&label, &g, PORT_ASSIGNMENTS, next_seed()));
    }
    cases
}

fn examine(case: &Case) -> CaseFindings {
    let mut f = CaseFindings { label: case.label.clone(), ..Default::default() };
    let g = &case.graph;
    let r = match run_pipeline(g, &case.ports, PipelineOptions::default()) {
        Ok(r) => r,
        Err(e) => {
            for c in 1..=5 {
                f.failures.push((c, format!("run failed: {e}")));
            }
            return f;
        }
    };
    check_enumeration(case, &r, &mut f);
    check_parity(&r, &mut f);
    let oracle = oracles::oracle_report(g);
    check_apsp(g, &r, &oracle, &mut f);
    check_wave_model(g, &r, &mut f);
    check_outputs(&r, &oracle, &mut f);
    f.vertices = g.n();
    f.candidate_mismatches = (0..g.n())
        .filter(|&v| r.cycle_candidates[v] != oracles::shortest_cycle_through(g, v))
        .count();
    let cube = oracles::check_cube_path(g, &r.numbers);
    if !cube.pass {
        f.failures.push((7, format!("consecutive numbers {} apart", cube.max_consecutive)));
    }
    f.closure = Some(cube.closure);
    f
}

fn check_enumeration(case: &Case, r: &PipelineResult, f: &mut CaseFindings) {
    let walk = oracles::reference_trav(&case.ports, &r.trees, case.graph.leader());
    if r.numbers != walk.numbers {
        f.failures.push((1, format!("numbers {:?} expected {:?}", r.numbers, walk.numbers)));
    }
    let mut sorted = r.numbers.clone();
    sorted.sort_unstable();
    if sorted != (1..=case.graph.n() as u64).collect::<Vec<_>>() {
        f.failures.push((1, "numbering is not a bijection onto 1..=n".into()));
    }
    let cube = oracles::check_cube_path(&case.graph, &r.numbers);
    if !cube.pass {
        f.failures.push((1, format!("consecutive numbers {} apart", cube.max_consecutive)));
    }
}

fn check_parity(r: &PipelineResult, f: &mut CaseFindings) {
    for (v, counts) in r.visit_counts.iter().enumerate() {
        let (Some(first), Some(second)) = (counts.p_first, counts.p_second) else {
            f.failures.push((2, format!("vertex {v} missing visit counts")));
            continue;
        };
        if first % 2 != r.levels[v] % 2 {
            f.failures.push((2, format!("vertex {v}: first count {first}, level {}", r.levels[v])));
        }
        if (first % 2 == 0) == (second % 2 == 0) {
            f.failures.push((2, format!("vertex {v}: counts ({first}, {second})")));
        }
    }
}

fn check_apsp(g: &Graph, r: &PipelineResult, oracle: &oracles::OracleReport, f: &mut CaseFindings) {
    if r.distances != oracle.distances {
        f.failures.push((3, "distance matrix differs from the oracle".into()));
    }
    let mut vertex_of = vec![0; g.n()];
    for (v, &k) in r.numbers.iter().enumerate() {
        vertex_of[k as usize - 1] = v;
    }
    for (v, log) in r.wave_logs.iter().enumerate() {
        let Some(t1) = log.t1 else {
            f.failures.push((3, format!("vertex {v} never learned t_1")));
            continue;
        };
        for (i, rec) in log.records.iter().enumerate() {
            let expected = start_schedule(t1, i as u64 + 1) + oracle.distances[v][vertex_of[i]];
            if rec.first_arrival != expected {
                f.failures.push((3, format!("vertex {v} wave {}: tau {} expected {expected}", i + 1, rec.first_arrival)));
            }
        }
    }
}

fn check_wave_model(g: &Graph, r: &PipelineResult, f: &mut CaseFindings) {
    for (v, log) in r.wave_logs.iter().enumerate() {
        if log.records.len() != g.n() {
            f.failures.push((4, format!("vertex {v} saw {} waves", log.records.len())));
        }
        for (i, rec) in log.records.iter().enumerate() {
            if rec.arrivals.iter().any(|&(_, o)| o > 1) {
                f.failures.push((4, format!("vertex {v} wave {}: offset outside {{0, 1}}", i + 1)));
            }
        }
        for (i, pair) in log.records.windows(2).enumerate() {
            if pair[1].first_arrival < pair[0].first_arrival + 2 {
                f.failures.push((4, format!("vertex {v}: waves {} and {} less than 2 rounds apart", i + 1, i + 2)));
            }
        }
    }
}

fn check_outputs(r: &PipelineResult, oracle: &oracles::OracleReport, f: &mut CaseFindings) {
    let checks = [
        ("diameter", r.diameter() == oracle.diameter),
        ("girth", r.girth() == oracle.girth),
        ("cut edges", r.cut_edges == oracle.cuts.bridges),
        ("cut vertices", r.cut_vertices == oracle.cuts.articulations),
        ("biconnected", r.biconnected() == oracle.cuts.biconnected),
    ];
    for (what, ok) in checks {
        if !ok {
            f.failures.push((5, format!("{what} differs from the oracle")));
        }
    }
}

fn corpus_run() -> &'static CorpusRun {
    static RUN: OnceLock<CorpusRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let cases = build_corpus();
        let findings: Vec<CaseFindings> = cases.par_iter().map(examine).collect();
        CorpusRun { cases: cases.len(), elapsed: start.elapsed(), findings }
    })
}

fn corpus_criterion(criterion: u32, title: &str) {
    let run = corpus_run();
    let failures = run.failures(criterion);
    let detail = match failures.first() {
        None => format!("{} cases", run.cases),
        Some(first) => format!("{} failure(s) over {} cases; first: {first}", failures.len(), run.cases),
    };
    report(criterion, title, failures.is_empty(), &detail);
    assert!(failures.is_empty(), "{detail}");
}

#[test]
fn criterion_1_enumeration_matches_reference_walk() {
    corpus_criterion(1, "numbering is a bijection, matches the reference walk, consecutive numbers within 3");
    let run = corpus_run();
    let pass = run.elapsed < CORPUS_TIME_LIMIT;
    report(
        1,
        "corpus runtime under 2 minutes",
        pass,
        &format!("{:.1}s for {} cases", run.elapsed.as_secs_f64(), run.cases),
    );
    assert!(pass);
}

#[test]
fn criterion_2_visit_count_parity() {
    corpus_criterion(2, "first-visit parity equals level parity, exactly one count even");
}

#[test]
fn criterion_3_apsp_and_arrival_times() {
    corpus_criterion(3, "distance matrices and per-wave arrival times exact");
}

#[test]
fn criterion_4_wave_model() {
    corpus_criterion(4, "offsets in {0,1}, first arrivals at least 2 apart, n waves per vertex");
}

#[test]
fn criterion_5_global_outputs() {
    corpus_criterion(5, "diameter, girth, cut edges, cut vertices and biconnectivity exact");
    let run = corpus_run();
    let vertices: usize = run.findings.iter().map(|f| f.vertices).sum();
    let differing: usize = run.findings.iter().map(|f| f.candidate_mismatches).sum();
    // Per-vertex candidates may come from closed walks; only the minimum must be exact.
    report(
        5,
        "per-vertex cycle candidate vs shortest cycle through the vertex (statistic)",
        true,
        &format!("{differing} of {vertices} vertices differ"),
    );
}

#[test]
fn criterion_6_linear_rounds() {
    let mut lines = Vec::new();
    let mut pass = true;
    for family in ["random", "path"] {
        let mut previous: Option<f64> = None;
        for &n in &SCALING_SIZES {
            let g = match family {
                "path" => generate(GraphKind::Path(n), 0).unwrap(),
                _ => generate(GraphKind::RandomConnected { n, p: 4.0 / (n - 1) as f64 }, n as u64).unwrap(),
            };
            let ports = PortMap::assign(&g, PortPolicy::Random, n as u64);
            let start = Instant::now();
            let r = run_pipeline(&g, &ports, PipelineOptions::default()).expect("pipeline run");
            let elapsed = start.elapsed();
            let m = &r.metrics;
            let rounds = m.rounds_total;
            let ratio = rounds as f64 / n as f64;
            let bound = 40 * n as u64 + 50;
            let mut ok = rounds <= bound && m.alphabet_used <= 16 && m.bit_rounds() <= 4 * rounds;
            if let Some(prev) = previous {
                ok &= ratio <= prev * RATIO_SLACK;
            }
            if n == 256 {
                ok &= elapsed < N256_TIME_LIMIT;
            }
            pass &= ok;
            lines.push(format!(
                "{family} n={n}: rounds={rounds} (bound {bound}) rounds/n={ratio:.2} alphabet={} bit_rounds={} time={:.2}s{}",
                m.alphabet_used,
                m.bit_rounds(),
                elapsed.as_secs_f64(),
                if ok { "" } else { " <- violation" }
            ));
            previous = Some(ratio);
        }
    }
    let mut out = std::io::stdout().lock();
    for l in &lines {
        writeln!(out, "[acceptance]   {l}").unwrap();
    }
    drop(out);
    report(
        6,
        "rounds <= 40n+50, rounds/n grows at most 20% per doubling, bit_rounds <= 4 rounds, n=256 under 30s",
        pass,
        &format!("{} runs", lines.len()),
    );
    assert!(pass, "{lines:#?}");
}

#[test]
fn criterion_7_cube_hamiltonian_path() {
    corpus_criterion(7, "every numbering is a Hamiltonian path of the cube");
    let run = corpus_run();
    let closures: Vec<u64> = run.findings.iter().filter_map(|f| f.closure).collect();
    let closed = closures.iter().filter(|&&c| c <= 3).count();
    let worst = closures.iter().copied().max().unwrap_or(0);
    // The closing distance is a reported statistic, not a pass condition.
    report(
        7,
        "cycle closure dist(v_n, v_1) <= 3 (statistic)",
        true,
        &format!("{closed}/{} numberings close, worst closing distance {worst}", closures.len()),
    );
    if closed < closures.len() {
        let mut out = std::io::stdout().lock();
        for f in run.findings.iter().filter(|f| f.closure.is_some_and(|c| c > 3)).take(5) {
            writeln!(out, "[acceptance]   finding: {} closes at distance {}", f.label, f.closure.unwrap()).unwrap();
        }
    }
}

#[test]
fn criterion_8_determinism() {
    let mut pass = true;
    let specs = ["cycle:5", "random:40:0.1:7", "tree:60:3", "complete:6", "claw"];
    for spec in specs {
        let runs: Vec<(String, String)> = (0..2)
            .map(|_| {
                let g = spec.parse::<wavecast::GeneratorSpec>().unwrap().generate(11).unwrap();
                let ports = PortMap::assign(&g, PortPolicy::Random, 5);
                let r = run_pipeline(&g, &ports, PipelineOptions { record_trace: true, ..Default::default() }).unwrap();
                let outputs = format!(
                    "{:?} {:?} {} {} {:?} {:?} {}",
                    r.numbers,
                    r.distances,
                    r.diameter(),
                    r.girth(),
                    r.cut_edges,
                    r.cut_vertices,
                    r.metrics.export()
                );
                (r.trace.unwrap().export(), outputs)
            })
            .collect();
        pass &= runs[0] == runs[1];
    }
    report(8, "repeated runs give byte-identical traces and outputs", pass, &format!("{} inputs", specs.len()));
    assert!(pass);
}
