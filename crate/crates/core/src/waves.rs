//! Anonymous waves started in numbering order, and everything a vertex can
//! read off their arrival times.
//!
//! Vertex `v_i` starts its wave at `t_1 + 5(i - 1)`. Consecutive sources are
//! at most 3 apart, so at every vertex the first arrivals of consecutive
//! waves are at least 2 rounds apart while each wave's arrivals span at most
//! 2 rounds. Waves carry no identity: a vertex numbers them by counting.

use petgraph::unionfind::UnionFind;

use crate::engine::{RoundContext, Signal};
use crate::error::ProtocolError;
use crate::graph::Port;

/// Rounds between consecutive wave starts.
pub const WAVE_SPACING: u64 = 5;
/// Silent rounds after the last arrival before a vertex declares the wave
/// phase over.
pub const QUIESCENCE_ROUNDS: u64 = 8;

/// Emission round of the wave started by the vertex numbered `number`.
pub fn start_schedule(t1: u64, number: u64) -> u64 {
    t1 + WAVE_SPACING * (number - 1)
}

/// Arrivals of one wave at one vertex.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WaveRecord {
    pub first_arrival: u64,
    /// `(port, offset)` with offset 0 for arrivals at `first_arrival` and 1
    /// for the round after.
    pub arrivals: Vec<(Port, u8)>,
}

impl WaveRecord {
    fn ports_at(&self, offset: u8) -> impl Iterator<Item = Port> + '_ {
        self.arrivals.iter().filter(move |a| a.1 == offset).map(|a| a.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WaveLog {
    pub records: Vec<WaveRecord>,
    pub t1: Option<u64>,
    pub quiescent_at: Option<u64>,
}

/// Per-vertex wave automaton.
#[derive(Debug, Clone)]
pub struct WaveState {
    number: u64,
    level: u64,
    degree: usize,
    emit_at: Option<u64>,
    emitted: bool,
    last_activity: Option<u64>,
    log: WaveLog,
}

impl WaveState {
    pub fn new(number: u64, level: u64, degree: usize) -> Self {
        WaveState {
            number,
            level,
            degree,
            emit_at: None,
            emitted: false,
            last_activity: None,
            log: WaveLog::default(),
        }
    }

    /// Leader only: fix `t_1`, the round of the first wave.
    pub fn set_t1(&mut self, t1: u64) {
        self.log.t1 = Some(t1);
        self.emit_at = Some(start_schedule(t1, self.number));
    }

    pub fn log(&self) -> &WaveLog {
        &self.log
    }

    pub fn is_quiescent(&self) -> bool {
        self.log.quiescent_at.is_some()
    }

    /// Handles this round's WAVE arrivals. Returns true in the round the
    /// vertex reaches quiescence.
    pub fn step<E>(&mut self, ctx: &mut RoundContext<'_, E>, arrivals: &[Port]) -> Result<bool, ProtocolError> {
        let round = ctx.round();
        if self.is_quiescent() {
            if !arrivals.is_empty() {
                return Err(ProtocolError::ArrivalOutsideWindow(format!(
                    "wave arrival at round {round} after quiescence"
                )));
            }
            return Ok(false);
        }
        if !arrivals.is_empty() {
            self.on_arrivals(ctx, arrivals)?;
        }
        if self.emit_at == Some(round) {
            if !arrivals.is_empty() {
                return Err(ProtocolError::ArrivalOutsideWindow(format!(
                    "wave arrived in the round of this vertex's own emission ({round})"
                )));
            }
            if self.log.records.len() as u64 + 1 != self.number {
                return Err(ProtocolError::Violation(format!(
                    "own wave would be wave {} but this vertex is number {}",
                    self.log.records.len() + 1,
                    self.number
                )));
            }
            for i in 0..self.degree {
                ctx.send(Port::from_index(i), Signal::Wave)?;
            }
            self.emitted = true;
            self.log.records.push(WaveRecord { first_arrival: round, arrivals: Vec::new() });
            self.last_activity = Some(round);
        }
        if let Some(last) = self.last_activity {
            if self.emitted && round >= last + QUIESCENCE_ROUNDS {
                self.log.quiescent_at = Some(round);
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn on_arrivals<E>(&mut self, ctx: &mut RoundContext<'_, E>, arrivals: &[Port]) -> Result<(), ProtocolError> {
        let round = ctx.round();
        self.last_activity = Some(round);
        if let Some(current) = self.log.records.last_mut() {
            if round == current.first_arrival + 1 {
                if current.arrivals.is_empty() {
                    return Err(ProtocolError::ArrivalOutsideWindow(format!(
                        "own wave echoed back at round {round}"
                    )));
                }
                current.arrivals.extend(arrivals.iter().map(|&p| (p, 1)));
                return Ok(());
            }
        }
        // First arrival of a new wave.
        let t1 = match self.log.t1 {
            Some(t1) => t1,
            None => {
                let t1 = round.checked_sub(self.level).ok_or_else(|| {
                    ProtocolError::ArrivalOutsideWindow(format!("first wave at round {round} precedes level {}", self.level))
                })?;
                let emit = start_schedule(t1, self.number);
                if emit <= round {
                    return Err(ProtocolError::ScheduleInfeasible { emit, now: round });
                }
                self.log.t1 = Some(t1);
                self.emit_at = Some(emit);
                t1
            }
        };
        let index = self.log.records.len() as u64 + 1;
        let elapsed = round.checked_sub(start_schedule(t1, index));
        if index == self.number || !matches!(elapsed, Some(d) if d >= 1) {
            return Err(ProtocolError::ArrivalOutsideWindow(format!(
                "arrival at round {round} cannot be wave {index}"
            )));
        }
        for i in 0..self.degree {
            let p = Port::from_index(i);
            if !arrivals.contains(&p) {
                ctx.send(p, Signal::Wave)?;
            }
        }
        self.log.records.push(WaveRecord {
            first_arrival: round,
            arrivals: arrivals.iter().map(|&p| (p, 0)).collect(),
        });
        Ok(())
    }
}

/// Everything a vertex derives locally from its wave log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalResults {
    /// `dist_vector[i - 1]` is the distance to the vertex numbered `i`.
    pub dist_vector: Vec<u64>,
    pub eccentricity: u64,
    /// Shortest detected cycle candidate.
    pub cycle_length: Option<u64>,
    /// Indexed by port.
    pub cut_edge_flags: Vec<bool>,
    pub is_cut: bool,
}

impl LocalResults {
    pub fn from_log(log: &WaveLog, degree: usize) -> Result<Self, ProtocolError> {
        let dist_vector = finalize_distances(log)?;
        Ok(LocalResults {
            eccentricity: dist_vector.iter().copied().max().unwrap_or(0),
            cycle_length: detect_cycle_length(log)?,
            cut_edge_flags: cut_edge_flags(log, degree),
            is_cut: cut_vertex_partition(log, degree).1,
            dist_vector,
        })
    }

    pub fn wave_count(&self) -> usize {
        self.dist_vector.len()
    }
}

/// Distance to each wave's source: `tau_i - t_1 - 5(i - 1)`.
pub fn finalize_distances(log: &WaveLog) -> Result<Vec<u64>, ProtocolError> {
    let t1 = log
        .t1
        .ok_or_else(|| ProtocolError::Violation("distances requested before t_1 is known".into()))?;
    log.records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.first_arrival
                .checked_sub(start_schedule(t1, i as u64 + 1))
                .ok_or_else(|| ProtocolError::ArrivalOutsideWindow(format!("wave {} arrived before it started", i + 1)))
        })
        .collect()
}

/// Shortest cycle length this vertex can certify: two simultaneous first
/// arrivals at distance `d` close a walk of length `2d`; a first arrival
/// plus a next-round arrival on another port close one of length `2d + 1`.
pub fn detect_cycle_length(log: &WaveLog) -> Result<Option<u64>, ProtocolError> {
    let distances = finalize_distances(log)?;
    Ok(log
        .records
        .iter()
        .zip(distances)
        .filter(|&(_, d)| d >= 1)
        .flat_map(|(r, d)| {
            let zeros: Vec<Port> = r.ports_at(0).collect();
            let ones: Vec<Port> = r.ports_at(1).collect();
            let even = (zeros.len() >= 2).then_some(2 * d);
            let odd = zeros
                .iter()
                .any(|z| ones.iter().any(|o| o != z))
                .then_some(2 * d + 1);
            [even, odd]
        })
        .flatten()
        .min())
}

/// Port `e` is a cut edge iff in no wave does another port deliver in the
/// same round as `e` or in the round after.
pub fn cut_edge_flags(log: &WaveLog, degree: usize) -> Vec<bool> {
    (0..degree)
        .map(Port::from_index)
        .map(|e| {
            !log.records.iter().any(|r| {
                r.arrivals.iter().any(|&(p, o)| {
                    p == e && r.arrivals.iter().any(|&(q, oq)| q != e && (oq == o || oq == o + 1))
                })
            })
        })
        .collect()
}

/// Merges, per wave, every port that delivered it (all arrivals of a wave
/// fall within two consecutive rounds, so each pair is related). The vertex
/// is a cut vertex iff its ports end in more than one class.
pub fn cut_vertex_partition(log: &WaveLog, degree: usize) -> (UnionFind<usize>, bool) {
    let mut classes = UnionFind::new(degree);
    for r in &log.records {
        if let Some((&(first, _), rest)) = r.arrivals.split_first() {
            for &(p, _) in rest {
                classes.union(first.index(), p.index());
            }
        }
    }
    let is_cut = degree >= 2 && (1..degree).any(|i| !classes.equiv(0, i));
    (classes, is_cut)
}

/// Value a vertex submits to the girth convergecast: `2n - c_v`, or 0 with
/// no cycle candidate. Candidates never exceed `2n - 1`, so a positive
/// submission always means a cycle was seen.
pub fn girth_submission(cycle_length: Option<u64>, n: u64) -> u64 {
    cycle_length.map_or(0, |c| 2 * n - c)
}

/// Girth from the convergecast maximum; 0 when the graph is acyclic.
pub fn girth_from_max(max: u64, n: u64) -> u64 {
    if max == 0 {
        0
    } else {
        2 * n - max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: u32) -> Port {
        Port::new(i)
    }

    fn log(t1: u64, records: Vec<(u64, Vec<(u32, u8)>)>) -> WaveLog {
        WaveLog {
            records: records
                .into_iter()
                .map(|(tau, arr)| WaveRecord {
                    first_arrival: tau,
                    arrivals: arr.into_iter().map(|(q, o)| (p(q), o)).collect(),
                })
                .collect(),
            t1: Some(t1),
            quiescent_at: None,
        }
    }

    #[test]
    fn schedule() {
        assert_eq!(start_schedule(7, 1), 7);
        assert_eq!(start_schedule(10, 4), 25);
        assert_eq!(start_schedule(3, 2), 8);
    }

    #[test]
    fn distances_from_arrival_times() {
        // P2: vertex 1 (number 2, level 1) hears wave 1 at t1 + 1.
        let l = log(10, vec![(11, vec![(1, 0)]), (15, vec![])]);
        assert_eq!(finalize_distances(&l).unwrap(), vec![1, 0]);
        let l = log(0, vec![(0, vec![]), (5, vec![(1, 0)]), (10 + 4, vec![(1, 0)])]);
        assert_eq!(finalize_distances(&l).unwrap()[2], 4);
    }

    #[test]
    fn triangle_cycle_candidate() {
        // Each neighbour's wave arrives directly and again one round later
        // through the third vertex.
        let l = log(0, vec![(0, vec![]), (6, vec![(1, 0), (2, 1)]), (11, vec![(2, 0), (1, 1)])]);
        assert_eq!(detect_cycle_length(&l).unwrap(), Some(3));
        assert_eq!(cut_edge_flags(&l, 2), vec![false, false]);
    }

    #[test]
    fn c6_antipodal_candidate() {
        let l = log(0, vec![(3, vec![(1, 0), (2, 0)]), (5 + 2, vec![(1, 0)])]);
        assert_eq!(detect_cycle_length(&l).unwrap(), Some(6));
    }

    #[test]
    fn tree_vertex_has_no_candidate() {
        let l = log(0, vec![(1, vec![(1, 0)]), (5, vec![]), (11, vec![(2, 0)])]);
        assert_eq!(detect_cycle_length(&l).unwrap(), None);
        assert_eq!(cut_edge_flags(&l, 2), vec![true, true]);
        assert!(cut_vertex_partition(&l, 2).1);
    }

    #[test]
    fn offset_one_alone_does_not_clear_an_edge() {
        // Port 2 delivers only at offset 1 after port 1 at offset 0.
        let l = log(0, vec![(2, vec![(1, 0), (2, 1)])]);
        assert_eq!(cut_edge_flags(&l, 2), vec![false, true]);
        assert!(!cut_vertex_partition(&l, 2).1);
    }

    #[test]
    fn degree_one_is_never_cut() {
        let l = log(0, vec![(1, vec![(1, 0)])]);
        assert!(!cut_vertex_partition(&l, 1).1);
        assert!(!cut_vertex_partition(&WaveLog::default(), 0).1);
    }

    enum Harness {
        Waves(WaveState),
        /// Sends WAVE on port 1 in the listed rounds; done once all are sent.
        Raw(Vec<u64>),
    }

    impl crate::engine::Process for Harness {
        type Event = String;

        fn on_round(&mut self, ctx: &mut RoundContext<'_, String>) -> Result<(), ProtocolError> {
            match self {
                Harness::Waves(w) => {
                    let arrivals: Vec<Port> = ctx.inbox().map(|a| a.0).collect();
                    w.step(ctx, &arrivals).map(|_| ())
                }
                Harness::Raw(rounds) => {
                    if rounds.contains(&ctx.round()) {
                        ctx.send(p(1), Signal::Wave)?;
                        rounds.retain(|&r| r != ctx.round());
                    }
                    Ok(())
                }
            }
        }

        fn is_terminated(&self) -> bool {
            match self {
                Harness::Waves(w) => w.is_quiescent(),
                Harness::Raw(rounds) => rounds.is_empty(),
            }
        }
    }

    /// Leader with `t_1 = 0` on one end of an edge, a scripted sender on the other.
    fn against_script(rounds: Vec<u64>) -> Result<WaveLog, ProtocolError> {
        use crate::graph::{generate, GraphKind, PortMap, PortPolicy};
        let g = generate(GraphKind::Path(2), 0).unwrap();
        let ports = PortMap::assign(&g, PortPolicy::AdjacencyOrder, 0);
        let mut leader = WaveState::new(1, 0, 1);
        leader.set_t1(0);
        let procs = vec![Harness::Waves(leader), Harness::Raw(rounds)];
        match crate::engine::run_protocol(&g, &ports, procs, 40, false) {
            Ok(out) => match &out.processes[0] {
                Harness::Waves(w) => Ok(w.log().clone()),
                Harness::Raw(_) => unreachable!(),
            },
            Err(crate::error::RunError::Process { source, .. }) => Err(source),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn live_window_checks() {
        // Wave 2 from the neighbour, on schedule: t1 + 5 + 1.
        let log = against_script(vec![5]).unwrap();
        assert_eq!(finalize_distances(&log).unwrap(), vec![0, 1]);
        assert_eq!(log.quiescent_at, Some(6 + QUIESCENCE_ROUNDS));
        assert!(matches!(against_script(vec![0]), Err(ProtocolError::ArrivalOutsideWindow(_))));
        assert!(matches!(against_script(vec![2]), Err(ProtocolError::ArrivalOutsideWindow(_))));
        assert!(matches!(against_script(vec![5, 20]), Err(ProtocolError::ArrivalOutsideWindow(_))));
    }

    #[test]
    fn late_first_wave_is_infeasible() {
        // Number 2 at level 9 would infer t1 = round - 9 and owe its wave
        // before the current round.
        use crate::graph::{generate, GraphKind, PortMap, PortPolicy};
        let g = generate(GraphKind::Path(2), 0).unwrap();
        let ports = PortMap::assign(&g, PortPolicy::AdjacencyOrder, 0);
        let procs = vec![Harness::Raw(vec![10]), Harness::Waves(WaveState::new(2, 9, 1))];
        let err = crate::engine::run_protocol(&g, &ports, procs, 40, false).err().unwrap();
        assert!(matches!(
            err,
            crate::error::RunError::Process { source: ProtocolError::ScheduleInfeasible { .. }, .. }
        ));
    }

    #[test]
    fn girth_encoding() {
        assert_eq!(girth_submission(None, 5), 0);
        assert_eq!(girth_submission(Some(5), 5), 5);
        assert_eq!(girth_from_max(5, 5), 5);
        assert_eq!(girth_from_max(0, 9), 0);
        assert_eq!(girth_from_max(girth_submission(Some(3), 9), 9), 3);
    }
}
