//! Vertex numbering by a token train riding the Trav walk.
//!
//! The walk visits every vertex twice: on arrival, and again after its
//! subtree is done (a leaf re-visits itself through a self-delivered loop).
//! The train is a run of `NUM_ONE` closed by `NUM_END`. Every visited vertex
//! appends one unit, so the train a vertex receives on its j-th visit carries
//! exactly as many units as there were visits before it. Hops to a next
//! brother are routed through the common parent, which relays the train
//! verbatim without counting a visit.
//!
//! Routing is static once the tree is known. Each inlet (a port or the self
//! loop) feeds exactly one outlet, and every directed tree edge carries at
//! most one train, so overlapping train segments never contend for a
//! channel.

use std::collections::BTreeMap;

use crate::bfs::TreeView;
use crate::engine::{RoundContext, Signal};
use crate::error::{ProtocolError, RunError};
use crate::graph::{Graph, Port, PortMap};
use crate::node::{self, Preset, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visit {
    First,
    Second,
}

/// Where the walk goes after a visit ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hop {
    FirstChild(Port),
    /// Towards the next brother; physically sent to the parent, which relays.
    NextBrotherViaParent(Port),
    Parent(Port),
    SelfLoop,
    Stop,
}

/// Successor of a visit in the Trav walk. `has_next_brother` is knowledge of
/// the parent's child order; the vertex itself sends to its parent either way.
pub fn trav_next(visit: Visit, tree: &TreeView, has_next_brother: bool) -> Hop {
    match visit {
        Visit::First => match tree.first_child() {
            Some(c) => Hop::FirstChild(c),
            None => Hop::SelfLoop,
        },
        Visit::Second => match tree.parent {
            None => Hop::Stop,
            Some(p) if has_next_brother => Hop::NextBrotherViaParent(p),
            Some(p) => Hop::Parent(p),
        },
    }
}

/// The number of a vertex from the unit counts of its two visits: whichever
/// count is even, halved, plus one.
pub fn number_from_counts(first: u64, second: u64) -> Result<u64, ProtocolError> {
    match (first.is_multiple_of(2), second.is_multiple_of(2)) {
        (true, false) => Ok(first / 2 + 1),
        (false, true) => Ok(second / 2 + 1),
        _ => Err(ProtocolError::ParityViolation(first, second)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Link {
    Port(Port),
    SelfLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Visit(Visit),
    Relay,
}

#[derive(Debug, Clone)]
struct Route {
    role: Role,
    /// `None` at the end of the walk.
    outlet: Option<Link>,
    units: u64,
    ended: bool,
}

/// Snapshot of a vertex's visit bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TravState {
    pub visits_seen: u8,
    /// Units received during the first visit.
    pub p_first: Option<u64>,
    /// Units received during the second visit.
    pub p_second: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Trav {
    leader: bool,
    routes: BTreeMap<Link, Route>,
    first_outlet: Link,
    pending_end: Vec<Link>,
    state: TravState,
    number: Option<u64>,
    finished_at: Option<u64>,
}

impl Trav {
    pub fn new(tree: &TreeView) -> Self {
        let leader = tree.parent.is_none();
        let mut routes = BTreeMap::new();
        let first_outlet = match trav_next(Visit::First, tree, false) {
            Hop::FirstChild(c) => Link::Port(c),
            _ => Link::SelfLoop,
        };
        if let Some(parent) = tree.parent {
            routes.insert(Link::Port(parent), Route::new(Role::Visit(Visit::First), Some(first_outlet)));
        }
        for pair in tree.children.windows(2) {
            routes.insert(Link::Port(pair[0]), Route::new(Role::Relay, Some(Link::Port(pair[1]))));
        }
        let second_inlet = tree.last_child().map_or(Link::SelfLoop, Link::Port);
        routes.insert(
            second_inlet,
            Route::new(Role::Visit(Visit::Second), tree.parent.map(Link::Port)),
        );
        Trav {
            leader,
            routes,
            first_outlet,
            pending_end: Vec::new(),
            state: TravState::default(),
            number: None,
            finished_at: None,
        }
    }

    /// Leader only: its first visit receives an empty train, so it emits a
    /// one-unit train to its successor.
    pub fn launch<E>(&mut self, ctx: &mut RoundContext<'_, E>) -> Result<(), ProtocolError> {
        debug_assert!(self.leader);
        self.state.p_first = Some(0);
        self.state.visits_seen = 1;
        send(ctx, self.first_outlet, Signal::NumOne)?;
        self.pending_end.push(self.first_outlet);
        Ok(())
    }

    pub fn step<E>(
        &mut self,
        ctx: &mut RoundContext<'_, E>,
        arrivals: &[(Port, Signal)],
        from_self: Option<Signal>,
    ) -> Result<(), ProtocolError> {
        for link in std::mem::take(&mut self.pending_end) {
            send(ctx, link, Signal::NumEnd)?;
            if self.second_outlet() == Some(Some(link)) {
                self.finished_at = Some(ctx.round());
            }
        }
        let inputs = arrivals
            .iter()
            .map(|&(p, s)| (Link::Port(p), s))
            .chain(from_self.map(|s| (Link::SelfLoop, s)));
        for (inlet, signal) in inputs {
            let route = self.routes.get_mut(&inlet).ok_or_else(|| {
                ProtocolError::Violation(format!("train arrived on an inlet with no route ({inlet:?})"))
            })?;
            if route.ended {
                return Err(ProtocolError::Violation("second train on one inlet".into()));
            }
            match (route.role, signal) {
                (Role::Relay, _) => {
                    route.ended = signal == Signal::NumEnd;
                    send(ctx, route.outlet.expect("relays always have an outlet"), signal)?
                }
                (Role::Visit(_), Signal::NumOne) => {
                    route.units += 1;
                    if let Some(out) = route.outlet {
                        send(ctx, out, Signal::NumOne)?;
                    }
                }
                (Role::Visit(visit), Signal::NumEnd) => {
                    let units = route.units;
                    let outlet = route.outlet;
                    route.ended = true;
                    self.record_visit(visit, units)?;
                    match outlet {
                        Some(out) => {
                            send(ctx, out, Signal::NumOne)?;
                            self.pending_end.push(out);
                        }
                        None => self.finished_at = Some(ctx.round()),
                    }
                }
                (_, other) => unreachable!("{other} routed to enumeration"),
            }
        }
        Ok(())
    }

    fn second_outlet(&self) -> Option<Option<Link>> {
        self.routes
            .values()
            .find(|r| r.role == Role::Visit(Visit::Second))
            .map(|r| r.outlet)
    }

    fn record_visit(&mut self, visit: Visit, units: u64) -> Result<(), ProtocolError> {
        self.state.visits_seen += 1;
        match visit {
            Visit::First => self.state.p_first = Some(units),
            Visit::Second => {
                self.state.p_second = Some(units);
                let first = self.state.p_first.ok_or_else(|| {
                    ProtocolError::Violation("second visit before the first".into())
                })?;
                let k = number_from_counts(first, units)?;
                if self.number.replace(k).is_some() {
                    return Err(ProtocolError::Violation("number assigned twice".into()));
                }
            }
        }
        Ok(())
    }

    pub fn state(&self) -> TravState {
        self.state
    }

    pub fn number(&self) -> Option<u64> {
        self.number
    }

    /// Round of the last act of this vertex in the walk: forwarding the
    /// end of its second-visit train, or, at the leader, receiving it.
    pub fn finished_at(&self) -> Option<u64> {
        self.finished_at
    }

    /// Leader only: the network size, from the second-visit count `2n - 1`.
    pub fn network_size(&self) -> Option<u64> {
        if !self.leader {
            return None;
        }
        self.state.p_second.map(|p| p.div_ceil(2))
    }
}

impl Route {
    fn new(role: Role, outlet: Option<Link>) -> Self {
        Route { role, outlet, units: 0, ended: false }
    }
}

fn send<E>(ctx: &mut RoundContext<'_, E>, link: Link, signal: Signal) -> Result<(), ProtocolError> {
    match link {
        Link::Port(p) => ctx.send(p, signal),
        Link::SelfLoop => ctx.send_self(signal),
    }
}

/// Result of a standalone enumeration run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub numbers: Vec<u64>,
    pub counts: Vec<TravState>,
    /// Network size as learned by the leader.
    pub n_known_at_leader: u64,
    pub completion_round: u64,
}

/// Runs the numbering phase over a given spanning tree.
pub fn run_enumeration(graph: &Graph, ports: &PortMap, trees: &[TreeView]) -> Result<Enumeration, RunError> {
    let mut preset = Preset::none(graph.n());
    preset.trees = Some(trees.to_vec());
    let out = node::run_stage(graph, ports, Stage::Enumerate, preset, None)?;
    let numbers = out
        .nodes
        .iter()
        .enumerate()
        .map(|(u, n)| n.number().ok_or(RunError::MissingOutput(u)))
        .collect::<Result<_, _>>()?;
    let counts = out.nodes.iter().map(|n| n.trav_state()).collect();
    let leader = &out.nodes[graph.leader()];
    Ok(Enumeration {
        numbers,
        counts,
        n_known_at_leader: leader.network_size().ok_or(RunError::MissingOutput(graph.leader()))?,
        completion_round: leader.rounds().enumerate.ok_or(RunError::MissingOutput(graph.leader()))?,
    })
}
