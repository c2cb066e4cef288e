//! Earliest-arrival single-agent planning under move and stay constraints,
//! searching over (vertex, safe interval) states.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::model::{
    time_key, Agent, AgentId, Constraint, Instance, MotionEvent, TemporalPlan, VertexId,
};

/// Open windows `(lo, hi)` during which staying at a vertex is forbidden,
/// merged and sorted.
fn merge_windows(mut ws: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    ws.retain(|w| w.0 < w.1);
    ws.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in ws {
        match out.last_mut() {
            Some(last) if w.0 < last.1 => last.1 = last.1.max(w.1),
            _ => out.push(w),
        }
    }
    out
}

/// Closed gaps `[a, b]` between windows, starting at time 0.
fn gaps(windows: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut cur = 0.0f64;
    for &(lo, hi) in windows {
        if hi <= 0.0 {
            continue;
        }
        if lo >= cur {
            out.push((cur, lo.max(cur)));
        }
        cur = cur.max(hi);
        if cur.is_infinite() {
            return out;
        }
    }
    out.push((cur, f64::INFINITY));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Slot {
    Gap(usize),
    Transient(i64),
    LateTransient,
}

#[derive(Clone, Copy)]
struct State {
    vertex: usize,
    time: f64,
    /// Latest departure time from this state.
    leave_by: f64,
    parent: Option<(usize, f64)>,
}

#[derive(PartialEq)]
struct Open(f64, usize);

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Planner<'a> {
    instance: &'a Instance,
    agent: Agent,
    moves: HashMap<(usize, usize), Vec<(f64, f64)>>,
    windows: Vec<Vec<(f64, f64)>>,
    gaps: Vec<Vec<(f64, f64)>>,
    /// After this time nothing changes except unbounded bans.
    settle: f64,
}

impl<'a> Planner<'a> {
    fn new(instance: &'a Instance, agent: Agent, constraints: &[Constraint]) -> Option<Self> {
        let n = instance.num_vertices();
        let mut moves: HashMap<(usize, usize), Vec<(f64, f64)>> = HashMap::new();
        let mut raw: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n];
        let mut settle: f64 = 0.0;
        for c in constraints.iter().filter(|c| c.agent == agent.id) {
            let u = instance.vertex_index(c.from)?;
            let v = instance.vertex_index(c.to)?;
            settle = settle.max(c.t_lo);
            if c.t_hi.is_finite() {
                settle = settle.max(c.t_hi);
            }
            if c.is_stay() {
                raw[u].push((c.t_lo, c.t_hi));
            } else {
                moves.entry((u, v)).or_default().push((c.t_lo, c.t_hi));
            }
        }
        for ivs in moves.values_mut() {
            ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let windows: Vec<_> = raw.into_iter().map(merge_windows).collect();
        let gaps = windows.iter().map(|w| gaps(w)).collect();
        Some(Planner {
            instance,
            agent,
            moves,
            windows,
            gaps,
            settle,
        })
    }

    /// Departure-time pieces within `[from, until]` not banned on `(u, v)`,
    /// as `(start, end, end_inclusive)`.
    fn departures(&self, u: usize, v: usize, from: f64, until: f64) -> Vec<(f64, f64, bool)> {
        let bans = self.moves.get(&(u, v)).map(Vec::as_slice).unwrap_or(&[]);
        let mut out = Vec::new();
        let mut cur = from;
        for &(lo, hi) in bans {
            if hi <= cur {
                continue;
            }
            if lo > until {
                break;
            }
            if lo > cur {
                out.push((cur, lo, false));
            }
            cur = cur.max(hi);
            if cur > until || cur.is_infinite() {
                return out;
            }
        }
        if cur <= until {
            out.push((cur, until, true));
        }
        out
    }

    fn plan(&self) -> Option<TemporalPlan> {
        let inst = self.instance;
        let start = inst.vertex_index(self.agent.start)?;
        let goal = inst.vertex_index(self.agent.goal)?;
        let mut states: Vec<State> = Vec::new();
        let mut index: HashMap<(usize, Slot), usize> = HashMap::new();
        let mut heap = BinaryHeap::new();

        let gi = self.gaps[start]
            .iter()
            .position(|g| g.0 <= 0.0 && 0.0 <= g.1)?;
        states.push(State {
            vertex: start,
            time: 0.0,
            leave_by: self.gaps[start][gi].1,
            parent: None,
        });
        index.insert((start, Slot::Gap(gi)), 0);
        heap.push(Open(0.0, 0));
        let mut closed = vec![false];

        while let Some(Open(t, si)) = heap.pop() {
            if closed[si] {
                continue;
            }
            closed[si] = true;
            let st = states[si];
            if st.vertex == goal && st.leave_by.is_infinite() {
                return Some(self.reconstruct(&states, si));
            }
            for &(v, _) in inst.neighbors(st.vertex) {
                let d = inst.move_duration(&self.agent, st.vertex, v);
                for (s, arrival) in self.arrivals(st.vertex, v, t, st.leave_by, d) {
                    let Some((slot, leave_by)) = self.slot_at(v, arrival) else {
                        continue;
                    };
                    let key = (v, slot);
                    let cand = State {
                        vertex: v,
                        time: arrival,
                        leave_by,
                        parent: Some((si, s)),
                    };
                    match index.get(&key) {
                        Some(&k) if closed[k] || states[k].time <= arrival => {}
                        Some(&k) => {
                            states[k] = cand;
                            heap.push(Open(arrival, k));
                        }
                        None => {
                            let k = states.len();
                            states.push(cand);
                            closed.push(false);
                            index.insert(key, k);
                            heap.push(Open(arrival, k));
                        }
                    }
                }
            }
        }
        None
    }

    /// Candidate (departure, arrival) pairs for moving u -> v when present at
    /// u during `[t, leave_by]`.
    fn arrivals(&self, u: usize, v: usize, t: f64, leave_by: f64, d: f64) -> Vec<(f64, f64)> {
        let pieces = self.departures(u, v, t, leave_by);
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut push = |s: f64| {
            if !out.iter().any(|&(x, _)| x == s) {
                out.push((s, s + d));
            }
        };
        let ok = |s: f64| {
            pieces
                .iter()
                .any(|&(a, b, incl)| s >= a && (s < b || (incl && s == b)))
        };
        // Earliest arrival in each gap of v.
        for &(g0, g1) in &self.gaps[v] {
            for &(a, b, incl) in &pieces {
                let s = (g0 - d).max(a);
                if (s < b || (incl && s == b)) && s + d <= g1 {
                    push(s);
                    break;
                }
            }
        }
        // Passing through v inside a window: earliest entry, and entries timed
        // to leave v when one of its outgoing bans ends or a neighbor's gap opens.
        for &(lo, hi) in &self.windows[v] {
            let mut targets: Vec<f64> = Vec::new();
            for &(a, b, _) in &pieces {
                if a + d > lo && a + d < hi {
                    targets.push(a + d);
                }
                let _ = b;
            }
            for &(x, _) in self.instance.neighbors(v) {
                if let Some(bans) = self.moves.get(&(v, x)) {
                    targets.extend(bans.iter().map(|b| b.1).filter(|h| h.is_finite()));
                }
                let dx = self.instance.move_duration(&self.agent, v, x);
                targets.extend(self.gaps[x].iter().map(|g| g.0 - dx));
            }
            for arr in targets {
                if arr > lo && arr < hi && ok(arr - d) {
                    push(arr - d);
                }
            }
        }
        out
    }

    fn slot_at(&self, v: usize, t: f64) -> Option<(Slot, f64)> {
        if let Some(i) = self.gaps[v].iter().position(|g| g.0 <= t && t <= g.1) {
            return Some((Slot::Gap(i), self.gaps[v][i].1));
        }
        if t > self.settle {
            Some((Slot::LateTransient, t))
        } else {
            Some((Slot::Transient(time_key(t)), t))
        }
    }

    fn reconstruct(&self, states: &[State], mut si: usize) -> TemporalPlan {
        let agent = self.agent.id;
        let mut events = Vec::new();
        while let Some((pi, s)) = states[si].parent {
            let (p, c) = (&states[pi], &states[si]);
            let (u, v) = (
                self.instance.vertex(p.vertex).id,
                self.instance.vertex(c.vertex).id,
            );
            events.push(MotionEvent {
                agent,
                from: u,
                to: v,
                t_start: s,
                t_end: c.time,
            });
            if s > p.time {
                events.push(MotionEvent {
                    agent,
                    from: u,
                    to: u,
                    t_start: p.time,
                    t_end: s,
                });
            }
            si = pi;
        }
        events.reverse();
        TemporalPlan::new(agent, events)
    }
}

/// Earliest-arriving plan for one agent that respects its constraints and
/// can park at the goal forever; `None` when no such plan exists.
pub fn shortest_temporal_plan(
    instance: &Instance,
    agent: AgentId,
    constraints: &[Constraint],
) -> Option<TemporalPlan> {
    let a = *instance.agent(agent)?;
    Planner::new(instance, a, constraints)?.plan()
}

/// Checks a plan against the agent's constraints: no move starts inside a
/// banned interval, no positive-length stay (including parking) overlaps a
/// stay window.
pub fn respects_constraints(plan: &TemporalPlan, constraints: &[Constraint]) -> bool {
    let mine: Vec<&Constraint> = constraints
        .iter()
        .filter(|c| c.agent == plan.agent)
        .collect();
    let park_at: Option<(VertexId, f64)> = plan.events.last().map(|e| (e.to, e.t_end));
    for e in &plan.events {
        for c in &mine {
            if e.is_wait() {
                if c.is_stay() && c.from == e.from && c.forbids_stay(e.t_start, e.t_end) {
                    return false;
                }
            } else if !c.is_stay() && c.from == e.from && c.to == e.to && c.forbids_start(e.t_start)
            {
                return false;
            }
        }
    }
    if let Some((v, t)) = park_at {
        if mine
            .iter()
            .any(|c| c.is_stay() && c.from == v && c.forbids_stay(t, f64::INFINITY))
        {
            return false;
        }
    }
    true
}
