//! Unary-framed tree protocols: distance-from-leader broadcast, max
//! convergecast, and value broadcast.
//!
//! Values travel as runs of unit signals. Dist-Cal grows its run by one per
//! tree level; the convergecast frame is `AGG_MAX AGG_ONE* AGG_ENDMAX`; the
//! broadcast frame is `VAL_ONE* VAL_END`.

use std::collections::VecDeque;

use crate::bfs::TreeView;
use crate::engine::{self, Process, RoundContext, Signal};
use crate::error::{ProtocolError, RunError};
use crate::graph::{Graph, Port, PortMap};
use crate::node::{self, Preset, Stage};

/// Distance from the leader, counted in units received from the parent.
#[derive(Debug, Clone)]
pub struct DistCal {
    parent: Option<Port>,
    children: Vec<Port>,
    units: u64,
    level: Option<u64>,
    end_pending: bool,
    end_sent: bool,
    oks: usize,
    done_at: Option<u64>,
}

impl DistCal {
    pub fn new(tree: &TreeView) -> Self {
        DistCal {
            parent: tree.parent,
            children: tree.children.clone(),
            units: 0,
            level: None,
            end_pending: false,
            end_sent: false,
            oks: 0,
            done_at: None,
        }
    }

    /// Leader only: send `1` then `End` to every child.
    pub fn launch<E>(&mut self, ctx: &mut RoundContext<'_, E>) -> Result<(), ProtocolError> {
        self.level = Some(0);
        self.grow(ctx)?;
        self.try_finish(ctx)
    }

    fn grow<E>(&mut self, ctx: &mut RoundContext<'_, E>) -> Result<(), ProtocolError> {
        for &c in &self.children {
            ctx.send(c, Signal::DistOne)?;
        }
        if self.children.is_empty() {
            self.end_sent = true;
        } else {
            self.end_pending = true;
        }
        Ok(())
    }

    pub fn step<E>(
        &mut self,
        ctx: &mut RoundContext<'_, E>,
        arrivals: &[(Port, Signal)],
    ) -> Result<(), ProtocolError> {
        if std::mem::take(&mut self.end_pending) {
            for &c in &self.children {
                ctx.send(c, Signal::DistEnd)?;
            }
            self.end_sent = true;
        }
        for &(p, s) in arrivals {
            match s {
                Signal::DistOne | Signal::DistEnd if Some(p) != self.parent || self.level.is_some() => {
                    return Err(ProtocolError::Violation(format!("stray {s} on port {p}")));
                }
                Signal::DistOne => {
                    self.units += 1;
                    for &c in &self.children {
                        ctx.send(c, Signal::DistOne)?;
                    }
                }
                Signal::DistEnd => {
                    self.level = Some(self.units);
                    self.grow(ctx)?;
                }
                Signal::DistOk => {
                    if !self.children.contains(&p) {
                        return Err(ProtocolError::Violation(format!("DIST_OK from non-child port {p}")));
                    }
                    self.oks += 1;
                }
                other => unreachable!("{other} routed to Dist-Cal"),
            }
        }
        self.try_finish(ctx)
    }

    fn try_finish<E>(&mut self, ctx: &mut RoundContext<'_, E>) -> Result<(), ProtocolError> {
        if self.end_sent && self.done_at.is_none() && self.oks == self.children.len() {
            if let Some(parent) = self.parent {
                ctx.send(parent, Signal::DistOk)?;
            }
            self.done_at = Some(ctx.round());
        }
        Ok(())
    }

    pub fn level(&self) -> Option<u64> {
        self.level
    }

    /// Leader: round completion was detected. Others: round OK was sent.
    pub fn done_at(&self) -> Option<u64> {
        self.done_at
    }
}

/// Runs Dist-Cal alone over a given tree. Returns levels and the leader's
/// completion round.
pub fn run_dist_cal(graph: &Graph, ports: &PortMap, trees: &[TreeView]) -> Result<(Vec<u64>, u64), RunError> {
    let mut preset = Preset::none(graph.n());
    preset.trees = Some(trees.to_vec());
    preset.numbers = Some(vec![0; graph.n()]);
    let out = node::run_stage(graph, ports, Stage::DistCal, preset, None)?;
    let levels = out
        .nodes
        .iter()
        .enumerate()
        .map(|(u, n)| n.level().ok_or(RunError::MissingOutput(u)))
        .collect::<Result<_, _>>()?;
    let done = out.nodes[graph.leader()].rounds().dist_cal.ok_or(RunError::MissingOutput(graph.leader()))?;
    Ok((levels, done))
}

/// Reassembles unary frames arriving on one channel.
#[derive(Debug, Clone, Default)]
struct FrameReader {
    open: Option<u64>,
    opened: usize,
    values: Vec<u64>,
}

impl FrameReader {
    fn feed(&mut self, port: Port, signal: Signal) -> Result<(), ProtocolError> {
        let violation = |msg| ProtocolError::FramingViolation { port, msg };
        match signal {
            Signal::AggMax => {
                if self.open.is_some() {
                    return Err(violation("MAX inside an open frame"));
                }
                self.open = Some(0);
                self.opened += 1;
            }
            Signal::AggOne => *self.open.as_mut().ok_or_else(|| violation("unit before MAX"))? += 1,
            Signal::AggEndMax => {
                let v = self.open.take().ok_or_else(|| violation("ENDMAX before MAX"))?;
                self.values.push(v);
            }
            other => unreachable!("{other} fed to a convergecast frame"),
        }
        Ok(())
    }

    fn started(&self, frame: usize) -> bool {
        self.opened > frame
    }

    fn value(&self, frame: usize) -> Option<u64> {
        self.values.get(frame).copied()
    }
}

#[derive(Debug, Clone, Copy)]
enum Outgoing {
    Idle,
    Streaming { sent: u64 },
}

/// Max convergecast of one or more consecutive frames up the tree.
///
/// A vertex opens frame `k` once it knows its own values and every child has
/// opened frame `k`. It then streams units while any child is still
/// streaming, and once every child has closed the frame it tops up to the
/// subtree maximum and closes its own frame.
#[derive(Debug, Clone)]
pub struct Convergecast {
    parent: Option<Port>,
    children: Vec<Port>,
    readers: Vec<FrameReader>,
    frames: usize,
    own: Option<Vec<u64>>,
    frame: usize,
    outgoing: Outgoing,
    results: Vec<u64>,
    done_at: Option<u64>,
}

impl Convergecast {
    pub fn new(tree: &TreeView, frames: usize) -> Self {
        Convergecast {
            parent: tree.parent,
            children: tree.children.clone(),
            readers: vec![FrameReader::default(); tree.children.len()],
            frames,
            own: None,
            frame: 0,
            outgoing: Outgoing::Idle,
            results: Vec::new(),
            done_at: None,
        }
    }

    pub fn has_own_values(&self) -> bool {
        self.own.is_some()
    }

    pub fn set_own_values(&mut self, values: Vec<u64>) {
        assert_eq!(values.len(), self.frames);
        self.own = Some(values);
    }

    pub fn step<E>(
        &mut self,
        ctx: &mut RoundContext<'_, E>,
        arrivals: &[(Port, Signal)],
    ) -> Result<(), ProtocolError> {
        for &(p, s) in arrivals {
            let i = self
                .children
                .iter()
                .position(|&c| c == p)
                .ok_or(ProtocolError::FramingViolation { port: p, msg: "frame from a non-child" })?;
            self.readers[i].feed(p, s)?;
        }
        if self.done_at.is_some() {
            return Ok(());
        }
        let Some(own) = &self.own else { return Ok(()) };
        let k = self.frame;
        let all_started = self.readers.iter().all(|r| r.started(k));
        let closed: Option<Vec<u64>> = self.readers.iter().map(|r| r.value(k)).collect();
        let subtree_max = closed.map(|vals| vals.into_iter().fold(own[k], u64::max));

        let Some(parent) = self.parent else {
            // The leader only consumes.
            if let Some(m) = subtree_max {
                self.close_frame(m, ctx.round());
                // Frames already closed by every child resolve in one round.
                return self.step(ctx, &[]);
            }
            return Ok(());
        };
        match self.outgoing {
            Outgoing::Idle => {
                if all_started {
                    ctx.send(parent, Signal::AggMax)?;
                    self.outgoing = Outgoing::Streaming { sent: 0 };
                }
            }
            Outgoing::Streaming { sent } => match subtree_max {
                None => {
                    ctx.send(parent, Signal::AggOne)?;
                    self.outgoing = Outgoing::Streaming { sent: sent + 1 };
                }
                Some(m) if sent > m => {
                    return Err(ProtocolError::Violation(format!(
                        "streamed {sent} units but the subtree maximum is {m}"
                    )));
                }
                Some(m) if sent < m => {
                    ctx.send(parent, Signal::AggOne)?;
                    self.outgoing = Outgoing::Streaming { sent: sent + 1 };
                }
                Some(m) => {
                    ctx.send(parent, Signal::AggEndMax)?;
                    self.outgoing = Outgoing::Idle;
                    self.close_frame(m, ctx.round());
                }
            },
        }
        Ok(())
    }

    fn close_frame(&mut self, value: u64, round: u64) {
        self.results.push(value);
        self.frame += 1;
        if self.frame == self.frames {
            self.done_at = Some(round);
        }
    }

    /// Per-frame subtree maxima; at the leader these are the global maxima.
    pub fn results(&self) -> Option<&[u64]> {
        self.done_at.map(|_| self.results.as_slice())
    }

    pub fn done_at(&self) -> Option<u64> {
        self.done_at
    }
}

/// Pipelined unary broadcast of one or more values down the tree.
#[derive(Debug, Clone)]
pub struct Broadcast {
    children: Vec<Port>,
    frames: usize,
    queue: VecDeque<Signal>,
    units: u64,
    values: Vec<u64>,
    done_at: Option<u64>,
}

impl Broadcast {
    pub fn new(tree: &TreeView, frames: usize) -> Self {
        Broadcast {
            children: tree.children.clone(),
            frames,
            queue: VecDeque::new(),
            units: 0,
            values: Vec::new(),
            done_at: None,
        }
    }

    /// Leader only: queue the frames; the first signal goes out this round.
    pub fn launch<E>(&mut self, ctx: &mut RoundContext<'_, E>, values: &[u64]) -> Result<(), ProtocolError> {
        assert_eq!(values.len(), self.frames);
        self.values = values.to_vec();
        for &v in values {
            self.queue.extend(std::iter::repeat_n(Signal::ValOne, v as usize));
            self.queue.push_back(Signal::ValEnd);
        }
        self.step(ctx, &[])
    }

    pub fn step<E>(
        &mut self,
        ctx: &mut RoundContext<'_, E>,
        arrivals: &[(Port, Signal)],
    ) -> Result<(), ProtocolError> {
        if self.done_at.is_some() {
            if let Some(&(p, s)) = arrivals.first() {
                return Err(ProtocolError::Violation(format!("{s} on port {p} after the broadcast ended")));
            }
            return Ok(());
        }
        let outgoing = match arrivals {
            [] => self.queue.pop_front(),
            [(_, s)] => {
                match s {
                    Signal::ValOne => self.units += 1,
                    Signal::ValEnd => self.values.push(std::mem::take(&mut self.units)),
                    other => unreachable!("{other} routed to broadcast"),
                }
                Some(*s)
            }
            _ => return Err(ProtocolError::Violation("broadcast arrived on several ports".into())),
        };
        if let Some(s) = outgoing {
            for &c in &self.children {
                ctx.send(c, s)?;
            }
        }
        if self.values.len() == self.frames && self.queue.is_empty() {
            self.done_at = Some(ctx.round());
        }
        Ok(())
    }

    pub fn values(&self) -> Option<&[u64]> {
        self.done_at.map(|_| self.values.as_slice())
    }

    pub fn done_at(&self) -> Option<u64> {
        self.done_at
    }
}

/// A vertex in a standalone convergecast: its local value becomes known at
/// `ready_at`.
pub struct ConvergecastProcess {
    inner: Convergecast,
    value: u64,
    ready_at: u64,
    leader: bool,
}

impl Process for ConvergecastProcess {
    type Event = String;

    fn on_round(&mut self, ctx: &mut RoundContext<'_, String>) -> Result<(), ProtocolError> {
        if ctx.round() >= self.ready_at && !self.inner.has_own_values() {
            self.inner.set_own_values(vec![self.value]);
        }
        let arrivals: Vec<_> = ctx.inbox().collect();
        self.inner.step(ctx, &arrivals)
    }

    fn is_terminated(&self) -> bool {
        !self.leader || self.inner.done_at().is_some()
    }
}

/// Max of `values` (one per vertex, known from `ready_at[u]`) gathered at the
/// leader. Returns the maximum and the round the leader learned it.
pub fn max_convergecast(
    graph: &Graph,
    ports: &PortMap,
    trees: &[TreeView],
    values: &[u64],
    ready_at: &[u64],
) -> Result<(u64, u64), RunError> {
    let procs = (0..graph.n())
        .map(|u| ConvergecastProcess {
            inner: Convergecast::new(&trees[u], 1),
            value: values[u],
            ready_at: ready_at[u],
            leader: trees[u].parent.is_none(),
        })
        .collect();
    let budget = engine::default_round_budget(graph.n()) + ready_at.iter().max().copied().unwrap_or(0)
        + 2 * values.iter().max().copied().unwrap_or(0);
    let out = engine::run_protocol(graph, ports, procs, budget, false)?;
    let root = &out.processes[graph.leader()].inner;
    let max = root.results().ok_or(RunError::MissingOutput(graph.leader()))?[0];
    Ok((max, root.done_at().unwrap_or(0)))
}

pub struct BroadcastProcess {
    inner: Broadcast,
    value: Option<u64>,
}

impl Process for BroadcastProcess {
    type Event = String;

    fn on_round(&mut self, ctx: &mut RoundContext<'_, String>) -> Result<(), ProtocolError> {
        if let Some(v) = self.value.take() {
            return self.inner.launch(ctx, &[v]);
        }
        let arrivals: Vec<_> = ctx.inbox().collect();
        self.inner.step(ctx, &arrivals)
    }

    fn is_terminated(&self) -> bool {
        self.inner.done_at().is_some()
    }
}

/// Broadcasts `value` from the leader. Returns what each vertex read and the
/// number of rounds the run took.
pub fn broadcast_value(
    graph: &Graph,
    ports: &PortMap,
    trees: &[TreeView],
    value: u64,
) -> Result<(Vec<u64>, u64), RunError> {
    let procs = (0..graph.n())
        .map(|u| BroadcastProcess {
            inner: Broadcast::new(&trees[u], 1),
            value: (u == graph.leader()).then_some(value),
        })
        .collect();
    let budget = engine::default_round_budget(graph.n()) + value;
    let out = engine::run_protocol(graph, ports, procs, budget, false)?;
    let read = out
        .processes
        .iter()
        .enumerate()
        .map(|(u, p)| p.inner.values().map(|v| v[0]).ok_or(RunError::MissingOutput(u)))
        .collect::<Result<_, _>>()?;
    Ok((read, out.metrics.rounds_total))
}
