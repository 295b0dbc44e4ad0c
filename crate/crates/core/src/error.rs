use thiserror::Error;

use crate::graph::Port;

/// Errors raised while building, generating or parsing graphs and port maps.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph must have at least one vertex")]
    Empty,
    #[error("vertex {vertex} out of range for a graph of {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("leader {leader} out of range for a graph of {n} vertices")]
    LeaderOutOfRange { leader: usize, n: usize },
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("invalid port assignment: {0}")]
    InvalidPorts(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A contract violation detected locally by a process handler.
///
/// Handlers are anonymous, so these carry only port-level context; the
/// engine attaches the vertex and round when it surfaces them.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("two signals emitted on port {0} in one round")]
    ChannelOverflow(Port),
    #[error("two self-deliveries scheduled in one round")]
    SelfOverflow,
    #[error("visit counts ({0}, {1}) do not have exactly one even member")]
    ParityViolation(u64, u64),
    #[error("wave arrival outside the {{d, d+1}} window: {0}")]
    ArrivalOutsideWindow(String),
    #[error("unary framing violation on port {port}: {msg}")]
    FramingViolation { port: Port, msg: &'static str },
    #[error("wave emission round {emit} is not after the inference round {now}")]
    ScheduleInfeasible { emit: u64, now: u64 },
    #[error("counted {records} waves but the network has {n} vertices")]
    WaveCountMismatch { records: usize, n: usize },
    #[error("signal of an earlier phase received: {0}")]
    PhaseRegression(&'static str),
    #[error("protocol violation: {0}")]
    Violation(String),
}

/// Errors produced by a simulation run.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("vertex {vertex}, round {round}: {source}")]
    Process {
        vertex: usize,
        round: u64,
        #[source]
        source: ProtocolError,
    },
    #[error("round budget of {0} rounds exceeded")]
    RoundBudgetExceeded(u64),
    #[error("max_rounds must be positive")]
    ZeroBudget,
    #[error("endpoints of edge {{{0}, {1}}} disagree on its cut-edge flag")]
    EndpointDisagreement(usize, usize),
    #[error("vertices disagree on a broadcast value: {0}")]
    BroadcastDisagreement(&'static str),
    #[error("numbering is not a bijection onto 1..=n (number {0} repeated or out of range)")]
    NumberingNotBijective(u64),
    #[error("vertex {0} finished without a required output")]
    MissingOutput(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl RunError {
    /// True for violations of the protocol's own correctness invariants, as
    /// opposed to bad input or a too-small budget.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            RunError::Process { .. }
                | RunError::EndpointDisagreement(..)
                | RunError::BroadcastDisagreement(_)
                | RunError::MissingOutput(_)
                | RunError::NumberingNotBijective(_)
        )
    }
}
