//! The per-vertex automaton that chains every phase: BFS, numbering,
//! Dist-Cal, waves, convergecast and the final broadcast.
//!
//! Each phase speaks its own sub-alphabet, so a vertex can tell which phase a
//! signal belongs to without any extra marker. The leader starts each phase
//! in the round it detects the end of the previous one.

use std::fmt;

use crate::bfs::{Bfs, TreeView};
use crate::engine::{self, Metrics, Process, RoundContext, Signal, Trace};
use crate::enumeration::{Trav, TravState};
use crate::error::{ProtocolError, RunError};
use crate::graph::{Graph, Port, PortMap};
use crate::unary::{Broadcast, Convergecast, DistCal};
use crate::waves::{self, LocalResults, WaveLog, WaveState};

/// Number of convergecast and broadcast frames.
pub const AGGREGATE_FRAMES: usize = 3;

/// How far a run goes. `Aggregate` includes the final broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Bfs,
    Enumerate,
    DistCal,
    Waves,
    Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Bfs,
    Enumerate,
    DistCal,
    Waves,
    Aggregate,
    Broadcast,
    Done,
}

impl Phase {
    fn of(signal: Signal) -> Result<Phase, ProtocolError> {
        use Signal::*;
        Ok(match signal {
            Start | Accept | Reject | OkBfs => Phase::Bfs,
            NumOne | NumEnd => Phase::Enumerate,
            DistOne | DistEnd | DistOk => Phase::DistCal,
            Wave => Phase::Waves,
            AggMax | AggOne | AggEndMax => Phase::Aggregate,
            ValOne | ValEnd => Phase::Broadcast,
            PhaseGo => return Err(ProtocolError::Violation("PHASE_GO is not part of any phase".into())),
        })
    }

    fn name(self) -> &'static str {
        match self {
            Phase::Bfs => "bfs",
            Phase::Enumerate => "enumeration",
            Phase::DistCal => "dist-cal",
            Phase::Waves => "waves",
            Phase::Aggregate => "convergecast",
            Phase::Broadcast => "broadcast",
            Phase::Done => "done",
        }
    }

    fn last_of(stage: Stage) -> Phase {
        match stage {
            Stage::Bfs => Phase::Bfs,
            Stage::Enumerate => Phase::Enumerate,
            Stage::DistCal => Phase::DistCal,
            Stage::Waves => Phase::Waves,
            Stage::Aggregate => Phase::Broadcast,
        }
    }
}

/// State handed to every vertex up front, skipping the phases that would
/// otherwise compute it.
#[derive(Debug, Clone, Default)]
pub struct Preset {
    pub trees: Option<Vec<TreeView>>,
    /// Requires `trees`.
    pub numbers: Option<Vec<u64>>,
}

impl Preset {
    pub fn none(_n: usize) -> Self {
        Preset::default()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseRounds {
    pub bfs: Option<u64>,
    pub enumerate: Option<u64>,
    pub dist_cal: Option<u64>,
    /// Round of the first wave.
    pub t1: Option<u64>,
    pub waves: Option<u64>,
    pub aggregate: Option<u64>,
    pub broadcast: Option<u64>,
}

/// Final values every vertex reads from the broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalValues {
    pub diameter: u64,
    pub girth: u64,
    pub biconnected: bool,
}

impl GlobalValues {
    fn from_frames(frames: &[u64]) -> Self {
        GlobalValues { diameter: frames[0], girth: frames[1], biconnected: frames[2] == 1 }
    }
}

/// Local outputs written to the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeEvent {
    Tree { parent: Option<Port>, children: Vec<Port> },
    Number(u64),
    Level(u64),
    Waves { records: usize, eccentricity: u64, cycle: Option<u64>, is_cut: bool },
    Aggregated(GlobalValues),
    Received(GlobalValues),
}

impl fmt::Display for NodeEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeEvent::Tree { parent, children } => {
                match parent {
                    Some(p) => write!(f, "tree parent={p}")?,
                    None => write!(f, "tree parent=-")?,
                }
                let children: Vec<String> = children.iter().map(|c| c.to_string()).collect();
                write!(f, " children={}", if children.is_empty() { "-".into() } else { children.join(",") })
            }
            NodeEvent::Number(k) => write!(f, "number {k}"),
            NodeEvent::Level(d) => write!(f, "level {d}"),
            NodeEvent::Waves { records, eccentricity, cycle, is_cut } => {
                write!(f, "waves {records} ecc={eccentricity} cycle=")?;
                match cycle {
                    Some(c) => write!(f, "{c}")?,
                    None => write!(f, "-")?,
                }
                write!(f, " cut={}", u8::from(*is_cut))
            }
            NodeEvent::Aggregated(v) => write!(
                f,
                "aggregate diameter={} girth={} biconnected={}",
                v.diameter,
                v.girth,
                u8::from(v.biconnected)
            ),
            NodeEvent::Received(v) => write!(
                f,
                "values diameter={} girth={} biconnected={}",
                v.diameter,
                v.girth,
                u8::from(v.biconnected)
            ),
        }
    }
}

/// One vertex running the whole pipeline up to a target stage.
#[derive(Debug, Clone)]
pub struct Node {
    leader: bool,
    degree: usize,
    last: Phase,
    phase: Phase,
    bfs: Bfs,
    tree: Option<TreeView>,
    trav: Option<Trav>,
    number: Option<u64>,
    /// Leader only.
    n: Option<u64>,
    dist: Option<DistCal>,
    waves: Option<WaveState>,
    local: Option<LocalResults>,
    conv: Option<Convergecast>,
    aggregated: Option<GlobalValues>,
    bcast: Option<Broadcast>,
    rounds: PhaseRounds,
}

impl Node {
    pub fn new(leader: bool, degree: usize, stage: Stage) -> Self {
        Node {
            leader,
            degree,
            last: Phase::last_of(stage),
            phase: Phase::Bfs,
            bfs: Bfs::new(leader),
            tree: None,
            trav: None,
            number: None,
            n: None,
            dist: None,
            waves: None,
            local: None,
            conv: None,
            aggregated: None,
            bcast: None,
            rounds: PhaseRounds::default(),
        }
    }

    fn with_preset(mut self, tree: Option<TreeView>, number: Option<u64>, n: u64) -> Self {
        if let Some(tree) = tree {
            self.install_tree(tree);
            self.phase = Phase::Enumerate;
            if let Some(k) = number {
                self.number = Some(k);
                if self.leader {
                    self.n = Some(n);
                }
                self.phase = Phase::DistCal;
            }
        }
        if self.phase > self.last {
            self.phase = Phase::Done;
        }
        self
    }

    fn install_tree(&mut self, tree: TreeView) {
        self.trav = Some(Trav::new(&tree));
        self.dist = Some(DistCal::new(&tree));
        self.conv = Some(Convergecast::new(&tree, AGGREGATE_FRAMES));
        self.bcast = Some(Broadcast::new(&tree, AGGREGATE_FRAMES));
        self.tree = Some(tree);
    }

    pub fn is_leader(&self) -> bool {
        self.leader
    }

    pub fn tree(&self) -> Option<&TreeView> {
        self.tree.as_ref()
    }

    pub fn number(&self) -> Option<u64> {
        self.number
    }

    pub fn level(&self) -> Option<u64> {
        self.dist.as_ref().and_then(DistCal::level)
    }

    pub fn trav_state(&self) -> TravState {
        self.trav.as_ref().map(Trav::state).unwrap_or_default()
    }

    /// Leader only: the network size learned during numbering.
    pub fn network_size(&self) -> Option<u64> {
        self.n
    }

    pub fn rounds(&self) -> PhaseRounds {
        self.rounds
    }

    pub fn wave_log(&self) -> Option<&WaveLog> {
        self.waves.as_ref().map(WaveState::log)
    }

    pub fn local_results(&self) -> Option<&LocalResults> {
        self.local.as_ref()
    }

    /// Leader only: the values it computed from the convergecast.
    pub fn aggregated(&self) -> Option<GlobalValues> {
        self.aggregated
    }

    /// Values this vertex read from the final broadcast (the leader reports
    /// what it sent).
    pub fn received(&self) -> Option<GlobalValues> {
        self.bcast.as_ref().and_then(Broadcast::values).map(GlobalValues::from_frames)
    }

    fn advance(&mut self, from: Phase) {
        debug_assert_eq!(self.phase, from);
        self.phase = if from >= self.last {
            Phase::Done
        } else {
            match from {
                Phase::Bfs => Phase::Enumerate,
                Phase::Enumerate => Phase::DistCal,
                Phase::DistCal => Phase::Waves,
                Phase::Waves => Phase::Aggregate,
                Phase::Aggregate => Phase::Broadcast,
                Phase::Broadcast | Phase::Done => Phase::Done,
            }
        };
    }

    fn sort_arrivals(&self, ctx: &RoundContext<'_, NodeEvent>) -> Result<[Vec<(Port, Signal)>; 6], ProtocolError> {
        let mut by_phase: [Vec<(Port, Signal)>; 6] = Default::default();
        for (p, s) in ctx.inbox() {
            let family = Phase::of(s)?;
            if family < self.phase {
                if family == Phase::Waves {
                    return Err(ProtocolError::ArrivalOutsideWindow(format!(
                        "WAVE on port {p} during {}",
                        self.phase.name()
                    )));
                }
                return Err(ProtocolError::PhaseRegression(family.name()));
            }
            let early_aggregate = family == Phase::Aggregate && self.phase == Phase::Waves;
            if family > self.phase && !early_aggregate {
                return Err(ProtocolError::Violation(format!(
                    "{s} on port {p} while still in {}",
                    self.phase.name()
                )));
            }
            by_phase[family as usize].push((p, s));
        }
        if ctx.self_received().is_some() && self.phase != Phase::Enumerate {
            return Err(ProtocolError::Violation("self-delivery outside numbering".into()));
        }
        Ok(by_phase)
    }

    fn launch_enumeration(&mut self, ctx: &mut RoundContext<'_, NodeEvent>) -> Result<(), ProtocolError> {
        self.trav.as_mut().expect("tree known").launch(ctx)
    }

    fn launch_dist_cal(&mut self, ctx: &mut RoundContext<'_, NodeEvent>) -> Result<(), ProtocolError> {
        self.dist.as_mut().expect("tree known").launch(ctx)?;
        self.after_dist_step(ctx);
        Ok(())
    }

    fn after_dist_step(&mut self, ctx: &mut RoundContext<'_, NodeEvent>) {
        let dist = self.dist.as_ref().expect("tree known");
        if let (Some(level), true) = (dist.level(), self.waves.is_none() && self.last >= Phase::Waves) {
            let number = self.number.expect("numbered before Dist-Cal");
            self.waves = Some(WaveState::new(number, level, self.degree));
        }
        let Some(done) = dist.done_at() else { return };
        if self.rounds.dist_cal.is_some() {
            return;
        }
        self.rounds.dist_cal = Some(done);
        ctx.emit(NodeEvent::Level(dist.level().expect("level known when done")));
        if self.leader {
            if let Some(w) = &mut self.waves {
                let t1 = done + 2;
                w.set_t1(t1);
                self.rounds.t1 = Some(t1);
            }
        }
        self.advance(Phase::DistCal);
    }

    fn finish_waves(&mut self, ctx: &mut RoundContext<'_, NodeEvent>) -> Result<(), ProtocolError> {
        let w = self.waves.as_ref().expect("waves running");
        let log = w.log();
        let local = LocalResults::from_log(log, self.degree)?;
        let count = local.wave_count() as u64;
        if let Some(n) = self.n {
            if n != count {
                return Err(ProtocolError::WaveCountMismatch { records: count as usize, n: n as usize });
            }
        }
        self.rounds.waves = log.quiescent_at;
        if self.rounds.t1.is_none() {
            self.rounds.t1 = log.t1;
        }
        ctx.emit(NodeEvent::Waves {
            records: local.wave_count(),
            eccentricity: local.eccentricity,
            cycle: local.cycle_length,
            is_cut: local.is_cut,
        });
        if let Some(conv) = &mut self.conv {
            conv.set_own_values(vec![
                local.eccentricity,
                waves::girth_submission(local.cycle_length, count),
                u64::from(local.is_cut),
            ]);
        }
        self.local = Some(local);
        self.advance(Phase::Waves);
        Ok(())
    }
}

impl Process for Node {
    type Event = NodeEvent;

    fn on_round(&mut self, ctx: &mut RoundContext<'_, NodeEvent>) -> Result<(), ProtocolError> {
        let round = ctx.round();
        let [bfs_in, num_in, dist_in, wave_in, agg_in, val_in] = self.sort_arrivals(ctx)?;
        // Set when the leader starts a phase this round; its automaton must
        // not be stepped again in the same round.
        let mut launched = false;

        if round == 0 && self.leader {
            launched = true;
            match self.phase {
                Phase::Bfs => self.bfs.launch(ctx)?,
                Phase::Enumerate => self.launch_enumeration(ctx)?,
                Phase::DistCal => self.launch_dist_cal(ctx)?,
                _ => launched = false,
            }
        }

        if self.phase == Phase::Bfs {
            if !launched {
                self.bfs.step(ctx, &bfs_in)?;
            }
            if let Some(done) = self.bfs.done_at() {
                let tree = self.bfs.tree().expect("children known once done");
                ctx.emit(NodeEvent::Tree { parent: tree.parent, children: tree.children.clone() });
                self.install_tree(tree);
                self.rounds.bfs = Some(done);
                self.advance(Phase::Bfs);
                if self.leader && self.phase == Phase::Enumerate {
                    self.launch_enumeration(ctx)?;
                    launched = true;
                }
            }
        }

        if self.phase == Phase::Enumerate && !launched {
            let from_self = ctx.self_received();
            let trav = self.trav.as_mut().expect("tree known");
            trav.step(ctx, &num_in, from_self)?;
            if let Some(k) = trav.number() {
                if self.number.is_none() {
                    self.number = Some(k);
                    ctx.emit(NodeEvent::Number(k));
                }
            }
            if let Some(done) = trav.finished_at() {
                if self.leader {
                    self.n = trav.network_size();
                }
                self.rounds.enumerate = Some(done);
                self.advance(Phase::Enumerate);
                if self.leader && self.phase == Phase::DistCal {
                    self.launch_dist_cal(ctx)?;
                    launched = true;
                }
            }
        }

        if self.phase == Phase::DistCal && !launched {
            self.dist.as_mut().expect("tree known").step(ctx, &dist_in)?;
            self.after_dist_step(ctx);
        }

        if self.phase == Phase::Waves {
            let arrivals: Vec<Port> = wave_in.iter().map(|a| a.0).collect();
            let w = self.waves.as_mut().expect("level known before waves");
            if w.step(ctx, &arrivals)? {
                self.finish_waves(ctx)?;
            }
        }

        if matches!(self.phase, Phase::Waves | Phase::Aggregate) {
            let conv = self.conv.as_mut().expect("tree known");
            conv.step(ctx, &agg_in)?;
            if let Some(done) = conv.done_at() {
                self.rounds.aggregate = Some(done);
                if self.leader {
                    let r = conv.results().expect("done");
                    let n = self.n.expect("leader knows n");
                    let values = GlobalValues {
                        diameter: r[0],
                        girth: waves::girth_from_max(r[1], n),
                        biconnected: r[2] == 0,
                    };
                    self.aggregated = Some(values);
                    ctx.emit(NodeEvent::Aggregated(values));
                    let frames = [values.diameter, values.girth, u64::from(values.biconnected)];
                    self.bcast.as_mut().expect("tree known").launch(ctx, &frames)?;
                    launched = true;
                }
                self.advance(Phase::Aggregate);
            }
        } else if !agg_in.is_empty() {
            return Err(ProtocolError::Violation("convergecast frame outside the aggregation window".into()));
        }

        if self.phase == Phase::Broadcast {
            let bcast = self.bcast.as_mut().expect("tree known");
            if !launched {
                bcast.step(ctx, &val_in)?;
            }
            if let Some(done) = bcast.done_at() {
                self.rounds.broadcast = Some(done);
                let values = GlobalValues::from_frames(bcast.values().expect("done"));
                ctx.emit(NodeEvent::Received(values));
                self.advance(Phase::Broadcast);
            }
        }
        Ok(())
    }

    fn is_terminated(&self) -> bool {
        self.phase == Phase::Done
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StageOptions {
    /// Defaults to the engine's budget for the graph size.
    pub max_rounds: Option<u64>,
    pub record_trace: bool,
}

pub struct StageOutcome {
    pub nodes: Vec<Node>,
    pub trace: Option<Trace>,
    pub metrics: Metrics,
}

/// Runs every vertex up to and including `stage`.
pub fn run_stage(
    graph: &Graph,
    ports: &PortMap,
    stage: Stage,
    preset: Preset,
    options: Option<StageOptions>,
) -> Result<StageOutcome, RunError> {
    let options = options.unwrap_or_default();
    let n = graph.n();
    if preset.numbers.is_some() && preset.trees.is_none() {
        return Err(RunError::Graph(crate::error::GraphError::InvalidParams(
            "preset numbers need preset trees".into(),
        )));
    }
    let nodes = (0..n)
        .map(|u| {
            Node::new(u == graph.leader(), graph.degree(u), stage).with_preset(
                preset.trees.as_ref().map(|t| t[u].clone()),
                preset.numbers.as_ref().map(|k| k[u]),
                n as u64,
            )
        })
        .collect();
    let budget = options.max_rounds.unwrap_or_else(|| engine::default_round_budget(n));
    let out = engine::run_protocol(graph, ports, nodes, budget, options.record_trace)?;
    Ok(StageOutcome { nodes: out.processes, trace: out.trace, metrics: out.metrics })
}
