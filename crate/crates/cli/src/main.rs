use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use wavecast::corpus::{self, Case};
use wavecast::graph::{GeneratorSpec, Graph, PortMap, PortPolicy};
use wavecast::pipeline::{run_pipeline, PipelineOptions, PipelineResult};
use wavecast::verify::{verify, Verification};
use wavecast::{GraphError, RunError};

/// Constant-alphabet protocols on anonymous synchronous networks.
#[derive(Parser)]
#[command(name = "wavecast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol pipeline and print the requested outputs.
    Run(RunArgs),
    /// Run the pipeline and diff every output against the oracles.
    Verify(VerifyArgs),
    /// Write a generated graph in edge-list format.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Edge-list file.
    #[arg(long, conflicts_with = "gen")]
    graph: Option<PathBuf>,
    /// Generator spec, e.g. `cycle:5` or `random:20:0.2:7`.
    #[arg(long)]
    gen: Option<GeneratorSpec>,
    /// Port file with `u port v` lines overriding the port policy.
    #[arg(long)]
    ports: Option<PathBuf>,
    /// Leader vertex; overrides the one in the input.
    #[arg(long)]
    leader: Option<usize>,
    #[arg(long, default_value = "adjacency")]
    port_policy: PortPolicy,
    /// Seed for random port numberings and unseeded generator specs.
    #[arg(long, env = "WAVECAST_SEED", default_value_t = 0)]
    seed: u64,
    /// Round budget; defaults to 64n + 64.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_rounds: Option<u64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Task {
    Enumerate,
    Apsp,
    Diameter,
    Girth,
    CutEdges,
    CutVertices,
    Biconnected,
    All,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Tsv,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Outputs to print; repeat or comma-separate.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    task: Vec<Task>,
    /// Write the delivery and output trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also check every output against the oracles.
    #[arg(long)]
    verify: bool,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Sweep the standard corpus instead of a single input.
    #[arg(long)]
    corpus: bool,
    /// Largest n of the exhaustive part of the corpus.
    #[arg(long, default_value_t = 6)]
    max_n: usize,
    #[arg(long, default_value_t = 500)]
    random: usize,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Port assignments per corpus graph.
    #[arg(long, default_value_t = 3)]
    assignments: usize,
}

#[derive(Args)]
struct GenerateArgs {
    spec: GeneratorSpec,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, env = "WAVECAST_SEED", default_value_t = 0)]
    seed: u64,
}

const EXIT_MISMATCH: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure { code: EXIT_INPUT, message: e.to_string() }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = match &e {
            RunError::Graph(_) | RunError::ZeroBudget => EXIT_INPUT,
            RunError::RoundBudgetExceeded(_) => EXIT_BUDGET,
            e if e.is_invariant_violation() => EXIT_INVARIANT,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure { code: EXIT_INPUT, message: format!("{}: {e}", path.display()) })
}

fn write(path: &PathBuf, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure { code: EXIT_INPUT, message: format!("{}: {e}", path.display()) })
}

fn load(input: &InputArgs) -> Result<(Graph, PortMap), Failure> {
    let mut graph = match (&input.graph, &input.gen) {
        (Some(path), _) => Graph::parse_edge_list(&read(path)?)?,
        (None, Some(spec)) => spec.generate(input.seed)?,
        (None, None) => {
            return Err(Failure { code: EXIT_INPUT, message: "one of --graph or --gen is required".into() })
        }
    };
    if let Some(leader) = input.leader {
        graph = graph.with_leader(leader)?;
    }
    let mut ports = PortMap::assign(&graph, input.port_policy, input.seed);
    if let Some(path) = &input.ports {
        ports = ports.with_overrides(&graph, &read(path)?)?;
    }
    Ok((graph, ports))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Generate(args) => cmd_generate(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<u8, Failure> {
    let (graph, ports) = load(&args.input)?;
    let options = PipelineOptions { max_rounds: args.input.max_rounds, record_trace: args.trace.is_some() };
    let result = run_pipeline(&graph, &ports, options)?;
    if let (Some(path), Some(trace)) = (&args.trace, &result.trace) {
        write(path, &trace.export())?;
    }
    let wants = |t: Task| args.task.contains(&t) || args.task.contains(&Task::All);
    let mut out = String::new();
    if wants(Task::Enumerate) {
        out += &numbering(&result, args.format);
    }
    if wants(Task::Apsp) {
        out += &matrix(&result, args.format);
    }
    if wants(Task::Diameter) {
        writeln!(out, "diameter {}", result.diameter()).unwrap();
    }
    if wants(Task::Girth) {
        writeln!(out, "girth {}", result.girth()).unwrap();
    }
    if wants(Task::CutEdges) {
        let edges: Vec<String> = result.cut_edges.iter().map(|(u, v)| format!("{u}-{v}")).collect();
        writeln!(out, "cut-edges {}", list_or_none(&edges)).unwrap();
    }
    if wants(Task::CutVertices) {
        let vertices: Vec<String> = result.cut_vertices.iter().map(usize::to_string).collect();
        writeln!(out, "cut-vertices {}", list_or_none(&vertices)).unwrap();
    }
    if wants(Task::Biconnected) {
        writeln!(out, "biconnected {}", if result.biconnected() { "yes" } else { "no" }).unwrap();
    }
    out += &result.metrics.export();
    writeln!(out, "rounds_per_n {:.3}", result.metrics.rounds_total as f64 / graph.n() as f64).unwrap();
    let mut code = 0;
    if args.verify {
        let v = verify(&graph, &result);
        out += &verification_report(&v);
        if !v.passed() {
            code = EXIT_MISMATCH;
        }
    }
    print!("{out}");
    Ok(code)
}

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none".into()
    } else {
        items.join(" ")
    }
}

fn numbering(r: &PipelineResult, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Table => writeln!(out, "{:>6} {:>6} {:>6}", "vertex", "number", "level").unwrap(),
        Format::Tsv => writeln!(out, "vertex\tnumber\tlevel").unwrap(),
    }
    for (v, (&k, &level)) in r.numbers.iter().zip(&r.levels).enumerate() {
        match format {
            Format::Table => writeln!(out, "{v:>6} {k:>6} {level:>6}").unwrap(),
            Format::Tsv => writeln!(out, "{v}\t{k}\t{level}").unwrap(),
        }
    }
    out
}

/// Distance matrix with rows and columns ordered by vertex number.
fn matrix(r: &PipelineResult, format: Format) -> String {
    let n = r.numbers.len();
    let mut by_number = vec![0; n];
    for (v, &k) in r.numbers.iter().enumerate() {
        by_number[k as usize - 1] = v;
    }
    let width = n.to_string().len().max(2);
    let mut out = String::new();
    match format {
        Format::Table => {
            writeln!(out, "distances (rows and columns by vertex number)").unwrap();
            write!(out, "{:>width$}", "").unwrap();
            for k in 1..=n {
                write!(out, " {k:>width$}").unwrap();
            }
            out.push('\n');
            for (i, &u) in by_number.iter().enumerate() {
                write!(out, "{:>width$}", i + 1).unwrap();
                for &v in &by_number {
                    write!(out, " {:>width$}", r.distances[u][v]).unwrap();
                }
                out.push('\n');
            }
        }
        Format::Tsv => {
            let header: Vec<String> = (1..=n).map(|k| k.to_string()).collect();
            writeln!(out, "number\t{}", header.join("\t")).unwrap();
            for (i, &u) in by_number.iter().enumerate() {
                let row: Vec<String> = by_number.iter().map(|&v| r.distances[u][v].to_string()).collect();
                writeln!(out, "{}\t{}", i + 1, row.join("\t")).unwrap();
            }
        }
    }
    out
}

fn verification_report(v: &Verification) -> String {
    let mut out = String::new();
    for c in &v.checks {
        writeln!(out, "check {c}").unwrap();
    }
    for note in &v.notes {
        writeln!(out, "note {note}").unwrap();
    }
    writeln!(out, "verify {}", if v.passed() { "PASS" } else { "FAIL" }).unwrap();
    out
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, Failure> {
    if !args.corpus {
        let (graph, ports) = load(&args.input)?;
        let options = PipelineOptions { max_rounds: args.input.max_rounds, record_trace: false };
        let result = run_pipeline(&graph, &ports, options)?;
        let v = verify(&graph, &result);
        print!("{}", verification_report(&v));
        return Ok(if v.passed() { 0 } else { EXIT_MISMATCH });
    }
    if !(1..=7).contains(&args.max_n) {
        return Err(Failure { code: EXIT_INPUT, message: "--max-n must lie in 1..=7".into() });
    }
    let seed = args.input.seed;
    let mut cases: Vec<Case> = Vec::new();
    let mut k = 0;
    let mut variants = |label: &str, g: &Graph| {
        k += 1;
        corpus::port_variants(label, g, args.assignments, seed.wrapping_mul(1_000_003).wrapping_add(k))
    };
    for n in 1..=args.max_n {
        for (i, g) in corpus::all_connected_graphs(n).iter().enumerate() {
            cases.extend(variants(&format!("exhaustive n={n} #{i}"), g));
        }
    }
    for (label, g) in corpus::random_graphs(args.random, 7..=64, seed) {
        cases.extend(variants(&label, &g));
    }
    for (label, g) in corpus::random_trees(args.trees, 1..=128, seed) {
        cases.extend(variants(&label, &g));
    }
    let outcomes: Vec<Result<Verification, RunError>> = cases
        .par_iter()
        .map(|c| run_pipeline(&c.graph, &c.ports, PipelineOptions::default()).map(|r| verify(&c.graph, &r)))
        .collect();

    let mut failed = 0usize;
    let mut worst = 0u8;
    for (case, outcome) in cases.iter().zip(&outcomes) {
        match outcome {
            Ok(v) if v.passed() => {}
            Ok(v) => {
                failed += 1;
                worst = worst.max(EXIT_MISMATCH);
                for c in v.failures() {
                    println!("mismatch {}: {c}", case.label);
                }
            }
            Err(e) => {
                failed += 1;
                let f = Failure::from(e.clone());
                worst = worst.max(f.code);
                println!("error {}: {}", case.label, f.message);
            }
        }
    }
    let properties = ["numbering", "network-size", "apsp", "diameter", "girth", "cut-edges", "cut-vertices", "biconnected"];
    for p in properties {
        let bad = outcomes
            .iter()
            .filter(|o| match o {
                Ok(v) => v.checks.iter().any(|c| c.property == p && !c.pass),
                Err(_) => true,
            })
            .count();
        println!("{p:<13} {}  ({bad} of {} cases failed)", if bad == 0 { "PASS" } else { "FAIL" }, cases.len());
    }
    println!("corpus {}  ({} cases, {failed} failed)", if failed == 0 { "PASS" } else { "FAIL" }, cases.len());
    Ok(worst)
}

fn cmd_generate(args: GenerateArgs) -> Result<u8, Failure> {
    let graph = args.spec.generate(args.seed)?;
    let text = graph.to_edge_list();
    match &args.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}
