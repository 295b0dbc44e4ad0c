//! Barrier-synchronized round engine.
//!
//! Every signal emitted in round `r` is in its recipient's inbox in round
//! `r + 1`. A handler that reacts to an inbox of round `t` therefore emits
//! into round `t`'s outbox, and the reaction is seen at `t + 1`. Every
//! round count in this crate uses that convention.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::error::{ProtocolError, RunError};
use crate::graph::{Graph, Port, PortMap};

/// The closed signal alphabet shared by every protocol phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Signal {
    Start = 0,
    Accept,
    Reject,
    OkBfs,
    NumOne,
    NumEnd,
    DistOne,
    DistEnd,
    DistOk,
    Wave,
    AggMax,
    AggOne,
    AggEndMax,
    ValOne,
    ValEnd,
    PhaseGo,
}

pub const ALPHABET_SIZE: usize = 16;

impl Signal {
    pub const ALL: [Signal; ALPHABET_SIZE] = [
        Signal::Start,
        Signal::Accept,
        Signal::Reject,
        Signal::OkBfs,
        Signal::NumOne,
        Signal::NumEnd,
        Signal::DistOne,
        Signal::DistEnd,
        Signal::DistOk,
        Signal::Wave,
        Signal::AggMax,
        Signal::AggOne,
        Signal::AggEndMax,
        Signal::ValOne,
        Signal::ValEnd,
        Signal::PhaseGo,
    ];

    /// 4-bit wire code.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Signal> {
        Signal::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Signal::Start => "START",
            Signal::Accept => "ACCEPT",
            Signal::Reject => "REJECT",
            Signal::OkBfs => "OK_BFS",
            Signal::NumOne => "NUM_ONE",
            Signal::NumEnd => "NUM_END",
            Signal::DistOne => "DIST_ONE",
            Signal::DistEnd => "DIST_END",
            Signal::DistOk => "DIST_OK",
            Signal::Wave => "WAVE",
            Signal::AggMax => "AGG_MAX",
            Signal::AggOne => "AGG_ONE",
            Signal::AggEndMax => "AGG_ENDMAX",
            Signal::ValOne => "VAL_ONE",
            Signal::ValEnd => "VAL_END",
            Signal::PhaseGo => "PHASE_GO",
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A per-vertex automaton driven by the engine.
///
/// Handlers must be pure functions of local state and inbox; they never see
/// vertex indices.
pub trait Process {
    type Event: fmt::Display;

    fn on_round(&mut self, ctx: &mut RoundContext<'_, Self::Event>) -> Result<(), ProtocolError>;

    /// Local part of the global termination predicate. The engine stops once
    /// every process reports termination and no signal is in flight.
    fn is_terminated(&self) -> bool;
}

/// One process's view of one round.
pub struct RoundContext<'a, E> {
    round: u64,
    inbox: &'a [Option<Signal>],
    self_inbox: Option<Signal>,
    outbox: &'a mut [Option<Signal>],
    self_out: &'a mut Option<Signal>,
    events: &'a mut Vec<E>,
}

impl<'a, E> RoundContext<'a, E> {
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn degree(&self) -> usize {
        self.inbox.len()
    }

    pub fn received(&self, port: Port) -> Option<Signal> {
        self.inbox[port.index()]
    }

    /// Signals delivered on ports this round, in port order.
    pub fn inbox(&self) -> impl Iterator<Item = (Port, Signal)> + '_ {
        self.inbox
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (Port::from_index(i), s)))
    }

    pub fn self_received(&self) -> Option<Signal> {
        self.self_inbox
    }

    pub fn sent(&self, port: Port) -> Option<Signal> {
        self.outbox[port.index()]
    }

    pub fn send(&mut self, port: Port, signal: Signal) -> Result<(), ProtocolError> {
        let slot = &mut self.outbox[port.index()];
        if slot.is_some() {
            return Err(ProtocolError::ChannelOverflow(port));
        }
        *slot = Some(signal);
        Ok(())
    }

    /// Schedules a signal to this same process for the next round. Costs no
    /// channel and no metered symbol.
    pub fn send_self(&mut self, signal: Signal) -> Result<(), ProtocolError> {
        if self.self_out.is_some() {
            return Err(ProtocolError::SelfOverflow);
        }
        *self.self_out = Some(signal);
        Ok(())
    }

    pub fn emit(&mut self, event: E) {
        self.events.push(event);
    }
}

/// A channel delivery, stamped with the round in which it is received.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub round: u64,
    pub from: usize,
    pub to: usize,
    pub signal: Signal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputEvent {
    pub round: u64,
    pub vertex: usize,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub deliveries: Vec<Delivery>,
    pub outputs: Vec<OutputEvent>,
}

impl Trace {
    /// Line-delimited export. Deliveries are `round edge_u edge_v dir signal`
    /// with `edge_u < edge_v` and `dir` `>` for `u -> v`, `<` otherwise;
    /// output events are `round vertex out text`. Lines are ordered by round.
    pub fn export(&self) -> String {
        let mut out = String::new();
        let mut outputs = self.outputs.iter().peekable();
        for d in &self.deliveries {
            while let Some(o) = outputs.next_if(|o| o.round < d.round) {
                writeln!(out, "{} {} out {}", o.round, o.vertex, o.text).unwrap();
            }
            let (u, v, dir) = if d.from < d.to {
                (d.from, d.to, '>')
            } else {
                (d.to, d.from, '<')
            };
            writeln!(out, "{} {u} {v} {dir} {}", d.round, d.signal).unwrap();
        }
        for o in outputs {
            writeln!(out, "{} {} out {}", o.round, o.vertex, o.text).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    pub rounds_total: u64,
    /// Symbols carried per directed channel `(from, to)`.
    pub symbols_per_channel: BTreeMap<(usize, usize), u64>,
    pub alphabet_used: usize,
}

impl Metrics {
    pub fn symbols_total(&self) -> u64 {
        self.symbols_per_channel.values().sum()
    }

    /// Bits needed to encode one symbol of the alphabet actually used.
    pub fn bits_per_symbol(&self) -> u32 {
        match self.alphabet_used {
            0 => 0,
            1 => 1,
            k => usize::BITS - (k - 1).leading_zeros(),
        }
    }

    /// Upper bound on bit rounds: each round carries one symbol per channel.
    pub fn bit_rounds(&self) -> u64 {
        self.rounds_total * self.bits_per_symbol() as u64
    }

    pub fn export(&self) -> String {
        let max_channel = self.symbols_per_channel.values().max().copied().unwrap_or(0);
        format!(
            "rounds_total {}\nalphabet_used {}\nbits_per_symbol {}\nbit_rounds {}\nsymbols_total {}\nmax_symbols_per_channel {}\n",
            self.rounds_total,
            self.alphabet_used,
            self.bits_per_symbol(),
            self.bit_rounds(),
            self.symbols_total(),
            max_channel,
        )
    }
}

/// Default round budget for a network of `n` vertices.
pub fn default_round_budget(n: usize) -> u64 {
    64 * n as u64 + 64
}

/// The simulated network: processes, channels, and the in-flight signals.
pub struct Network<P: Process> {
    /// `links[u][p - 1] = (v, q)`: port `p` of `u` is port `q` of `v`.
    links: Vec<Vec<(usize, Port)>>,
    processes: Vec<P>,
    inbox: Vec<Vec<Option<Signal>>>,
    self_inbox: Vec<Option<Signal>>,
    round: u64,
    trace: Option<Trace>,
    metrics: Metrics,
    seen: [bool; ALPHABET_SIZE],
}

impl<P: Process> Network<P> {
    pub fn new(graph: &Graph, ports: &PortMap, processes: Vec<P>, record_trace: bool) -> Self {
        assert_eq!(processes.len(), graph.n(), "one process per vertex");
        let links = (0..graph.n())
            .map(|u| {
                ports
                    .ports(u)
                    .map(|(_, v)| (v, ports.port_to(v, u).expect("port maps cover both endpoints")))
                    .collect()
            })
            .collect::<Vec<Vec<_>>>();
        let inbox = links.iter().map(|l| vec![None; l.len()]).collect();
        Network {
            links,
            processes,
            inbox,
            self_inbox: vec![None; graph.n()],
            round: 0,
            trace: record_trace.then(Trace::default),
            metrics: Metrics::default(),
            seen: [false; ALPHABET_SIZE],
        }
    }

    /// Index of the next round to execute.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn processes(&self) -> &[P] {
        &self.processes
    }

    pub fn in_flight(&self) -> bool {
        self.self_inbox.iter().any(Option::is_some)
            || self.inbox.iter().flatten().any(Option::is_some)
    }

    pub fn inbox_of(&self, u: usize) -> &[Option<Signal>] {
        &self.inbox[u]
    }

    /// Executes one round: every handler runs once on its inbox, and every
    /// emitted signal lands in the recipient's inbox for the next round.
    #[allow(clippy::needless_range_loop)]
    pub fn advance_round(&mut self) -> Result<(), RunError> {
        let round = self.round;
        let mut next: Vec<Vec<Option<Signal>>> =
            self.links.iter().map(|l| vec![None; l.len()]).collect();
        let mut next_self = vec![None; self.processes.len()];
        for u in 0..self.processes.len() {
            let mut outbox = vec![None; self.links[u].len()];
            let mut events = Vec::new();
            let mut ctx = RoundContext {
                round,
                inbox: &self.inbox[u],
                self_inbox: self.self_inbox[u],
                outbox: &mut outbox,
                self_out: &mut next_self[u],
                events: &mut events,
            };
            self.processes[u]
                .on_round(&mut ctx)
                .map_err(|source| RunError::Process { vertex: u, round, source })?;
            for (i, signal) in outbox.into_iter().enumerate() {
                let Some(signal) = signal else { continue };
                let (v, q) = self.links[u][i];
                next[v][q.index()] = Some(signal);
                *self.metrics.symbols_per_channel.entry((u, v)).or_default() += 1;
                self.seen[signal.code() as usize] = true;
                if let Some(trace) = &mut self.trace {
                    trace.deliveries.push(Delivery { round: round + 1, from: u, to: v, signal });
                }
            }
            if let Some(trace) = &mut self.trace {
                trace.outputs.extend(events.into_iter().map(|e| OutputEvent {
                    round,
                    vertex: u,
                    text: e.to_string(),
                }));
            }
        }
        self.inbox = next;
        self.self_inbox = next_self;
        self.round += 1;
        self.metrics.rounds_total = self.round;
        self.metrics.alphabet_used = self.seen.iter().filter(|&&s| s).count();
        Ok(())
    }

    fn done(&self) -> bool {
        !self.in_flight() && self.processes.iter().all(P::is_terminated)
    }

    /// Runs until global termination or until `max_rounds` rounds have run.
    pub fn run(mut self, max_rounds: u64) -> Result<RunOutcome<P>, RunError> {
        if max_rounds == 0 {
            return Err(RunError::ZeroBudget);
        }
        loop {
            if self.round >= max_rounds {
                return Err(RunError::RoundBudgetExceeded(max_rounds));
            }
            self.advance_round()?;
            if self.done() {
                break;
            }
        }
        Ok(RunOutcome {
            processes: self.processes,
            trace: self.trace,
            metrics: self.metrics,
        })
    }
}

pub struct RunOutcome<P> {
    pub processes: Vec<P>,
    pub trace: Option<Trace>,
    pub metrics: Metrics,
}

/// Builds a network and runs it to termination.
pub fn run_protocol<P: Process>(
    graph: &Graph,
    ports: &PortMap,
    processes: Vec<P>,
    max_rounds: u64,
    record_trace: bool,
) -> Result<RunOutcome<P>, RunError> {
    Network::new(graph, ports, processes, record_trace).run(max_rounds)
}
