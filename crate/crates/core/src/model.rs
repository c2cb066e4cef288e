//! Instances, temporal plans, constraints and collisions.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Time comparison tolerance (time-units).
pub const EPS_T: f64 = 1e-6;
/// Geometric tolerance (length-units).
pub const EPS_G: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Quantized time key used wherever times must compare as set members.
pub fn time_key(t: f64) -> i64 {
    (t / EPS_T).round() as i64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    pub pos: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    pub radius: f64,
    pub speed: f64,
    pub start: VertexId,
    pub goal: VertexId,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(VertexId),
    #[error("non-finite coordinates for vertex {0}")]
    NonFiniteCoordinate(VertexId),
    #[error("edge ({0}, {1}) references an unknown vertex")]
    UnknownEdgeEndpoint(VertexId, VertexId),
    #[error("self-loop edge at vertex {0}")]
    SelfLoop(VertexId),
    #[error("edge ({0}, {1}) has zero length")]
    ZeroLengthEdge(VertexId, VertexId),
    #[error("duplicate agent id {0}")]
    DuplicateAgent(AgentId),
    #[error("agent {0} must have positive finite radius and speed")]
    BadAgentParameters(AgentId),
    #[error("agent {0} starts or ends at an unknown vertex")]
    UnknownAgentVertex(AgentId),
    #[error("vertex {0} is the start of more than one agent")]
    SharedStart(VertexId),
    #[error("vertex {0} is the goal of more than one agent")]
    SharedGoal(VertexId),
    #[error("solution has no plans")]
    EmptySolution,
}

/// A graph with 2D vertex positions plus the agents moving on it.
///
/// Vertices and agents keep the caller's ids; algorithms address them through
/// dense indices (`vertex_index`, agent position in `agents()`).
#[derive(Clone, Debug)]
pub struct Instance {
    vertices: Vec<Vertex>,
    edges: Vec<(VertexId, VertexId)>,
    agents: Vec<Agent>,
    index: HashMap<VertexId, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Instance {
    pub fn new(
        vertices: Vec<Vertex>,
        edges: Vec<(VertexId, VertexId)>,
        agents: Vec<Agent>,
    ) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if !v.pos.x.is_finite() || !v.pos.y.is_finite() {
                return Err(ModelError::NonFiniteCoordinate(v.id));
            }
            if index.insert(v.id, i).is_some() {
                return Err(ModelError::DuplicateVertex(v.id));
            }
        }

        let mut adjacency = vec![Vec::new(); vertices.len()];
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(edges.len());
        for &(u, v) in &edges {
            let (Some(&iu), Some(&iv)) = (index.get(&u), index.get(&v)) else {
                return Err(ModelError::UnknownEdgeEndpoint(u, v));
            };
            if u == v {
                return Err(ModelError::SelfLoop(u));
            }
            let len = vertices[iu].pos.dist(vertices[iv].pos);
            if len <= 0.0 {
                return Err(ModelError::ZeroLengthEdge(u, v));
            }
            let key = (iu.min(iv), iu.max(iv));
            if seen.insert(key) {
                adjacency[iu].push((iv, len));
                adjacency[iv].push((iu, len));
                kept.push((u, v));
            }
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(n, _)| vertices[n].id);
        }

        let mut agent_ids = HashSet::new();
        let mut starts = HashSet::new();
        let mut goals = HashSet::new();
        for a in &agents {
            if !agent_ids.insert(a.id) {
                return Err(ModelError::DuplicateAgent(a.id));
            }
            let ok = |x: f64| x.is_finite() && x > 0.0;
            if !ok(a.radius) || !ok(a.speed) {
                return Err(ModelError::BadAgentParameters(a.id));
            }
            if !index.contains_key(&a.start) || !index.contains_key(&a.goal) {
                return Err(ModelError::UnknownAgentVertex(a.id));
            }
            if !starts.insert(a.start) {
                return Err(ModelError::SharedStart(a.start));
            }
            if !goals.insert(a.goal) {
                return Err(ModelError::SharedGoal(a.goal));
            }
        }

        Ok(Instance {
            vertices,
            edges: kept,
            agents,
            index,
            adjacency,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, id: VertexId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn vertex(&self, idx: usize) -> &Vertex {
        &self.vertices[idx]
    }

    pub fn position(&self, id: VertexId) -> Option<Point> {
        self.vertex_index(id).map(|i| self.vertices[i].pos)
    }

    /// Neighbors of a dense vertex index with the edge length, ordered by vertex id.
    pub fn neighbors(&self, idx: usize) -> &[(usize, f64)] {
        &self.adjacency[idx]
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        match (self.vertex_index(u), self.vertex_index(v)) {
            (Some(iu), Some(iv)) => self.adjacency[iu].iter().any(|&(n, _)| n == iv),
            _ => false,
        }
    }

    pub fn agent_index(&self, id: AgentId) -> Option<usize> {
        self.agents.iter().position(|a| a.id == id)
    }

    pub fn agent(&self, id: AgentId) -> Option<&Agent> {
        self.agents.iter().find(|a| a.id == id)
    }

    /// Straight-line distance between two dense vertex indices.
    pub fn euclid(&self, a: usize, b: usize) -> f64 {
        self.vertices[a].pos.dist(self.vertices[b].pos)
    }

    /// Duration of traversing `u -> v` for `agent`.
    pub fn move_duration(&self, agent: &Agent, u: usize, v: usize) -> f64 {
        self.euclid(u, v) / agent.speed
    }

    /// Shortest traversal time from the agent's start to its goal ignoring
    /// every other agent, or `None` if the goal is disconnected.
    pub fn shortest_duration(&self, agent: &Agent) -> Option<f64> {
        let s = self.vertex_index(agent.start)?;
        let g = self.vertex_index(agent.goal)?;
        self.shortest_distances(g)[s].map(|d| d / agent.speed)
    }

    /// Single-source graph distances (length-units) from `source`.
    pub fn shortest_distances(&self, source: usize) -> Vec<Option<f64>> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        struct D(f64);
        impl PartialEq for D {
            fn eq(&self, o: &Self) -> bool {
                self.cmp(o).is_eq()
            }
        }
        impl Eq for D {}
        impl PartialOrd for D {
            fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for D {
            fn cmp(&self, o: &Self) -> std::cmp::Ordering {
                self.0.total_cmp(&o.0)
            }
        }

        let mut dist: Vec<Option<f64>> = vec![None; self.vertices.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = Some(0.0);
        heap.push(Reverse((D(0.0), source)));
        while let Some(Reverse((D(d), u))) = heap.pop() {
            if dist[u].is_some_and(|x| d > x) {
                continue;
            }
            for &(v, len) in &self.adjacency[u] {
                let nd = d + len;
                if dist[v].is_none_or(|x| nd < x) {
                    dist[v] = Some(nd);
                    heap.push(Reverse((D(nd), v)));
                }
            }
        }
        dist
    }
}

/// One edge traversal (`from != to`) or wait (`from == to`) over `[t_start, t_end)`.
///
/// Collisions may also carry a parking pseudo-event: a wait at the goal with
/// `t_end == f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionEvent {
    pub agent: AgentId,
    pub from: VertexId,
    pub to: VertexId,
    pub t_start: f64,
    pub t_end: f64,
}

impl MotionEvent {
    pub fn is_wait(&self) -> bool {
        self.from == self.to
    }

    pub fn is_parking(&self) -> bool {
        self.t_end.is_infinite()
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalPlan {
    pub agent: AgentId,
    pub events: Vec<MotionEvent>,
}

impl TemporalPlan {
    pub fn new(agent: AgentId, events: Vec<MotionEvent>) -> Self {
        TemporalPlan { agent, events }
    }

    /// Individual makespan; an agent that starts on its goal finishes at 0.
    pub fn end_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t_end)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub plans: Vec<TemporalPlan>,
    pub makespan: f64,
}

impl Solution {
    pub fn new(plans: Vec<TemporalPlan>) -> Result<Self, ModelError> {
        let makespan = makespan(&plans)?;
        Ok(Solution { plans, makespan })
    }
}

/// Maximum plan end time.
pub fn makespan(plans: &[TemporalPlan]) -> Result<f64, ModelError> {
    if plans.is_empty() {
        return Err(ModelError::EmptySolution);
    }
    Ok(plans.iter().map(TemporalPlan::end_time).fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PlanViolation {
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("event {0} belongs to another agent")]
    WrongAgent(usize),
    #[error("event {0} references an unknown vertex")]
    UnknownVertex(usize),
    #[error("plan does not start at time 0 (event 0)")]
    BadStartTime,
    #[error("plan does not start at the agent's start vertex (event 0)")]
    BadStartVertex,
    #[error("plan does not end at the agent's goal vertex (event {0})")]
    BadGoalVertex(usize),
    #[error("empty plan but the agent's start is not its goal")]
    EmptyPlan,
    #[error("non-positive or non-finite duration at event {0}")]
    NonPositiveDuration(usize),
    #[error("event {0} moves along a non-edge")]
    NotAnEdge(usize),
    #[error("duration mismatch at event {0}")]
    DurationMismatch(usize),
    #[error("chain break at event {0}")]
    ChainBreak(usize),
}

/// Single-agent validity: chaining, timing and graph membership.
pub fn check_plan(plan: &TemporalPlan, instance: &Instance) -> Result<(), PlanViolation> {
    let agent = instance
        .agent(plan.agent)
        .ok_or(PlanViolation::UnknownAgent(plan.agent))?;
    let Some(first) = plan.events.first() else {
        return if agent.start == agent.goal {
            Ok(())
        } else {
            Err(PlanViolation::EmptyPlan)
        };
    };
    if first.t_start.abs() > EPS_T {
        return Err(PlanViolation::BadStartTime);
    }
    if first.from != agent.start {
        return Err(PlanViolation::BadStartVertex);
    }
    for (i, e) in plan.events.iter().enumerate() {
        if e.agent != plan.agent {
            return Err(PlanViolation::WrongAgent(i));
        }
        let (Some(pu), Some(pv)) = (instance.position(e.from), instance.position(e.to)) else {
            return Err(PlanViolation::UnknownVertex(i));
        };
        if e.t_start >= e.t_end || e.t_start.is_nan() || !e.t_end.is_finite() {
            return Err(PlanViolation::NonPositiveDuration(i));
        }
        if i > 0 {
            let prev = &plan.events[i - 1];
            if prev.to != e.from || prev.t_end != e.t_start {
                return Err(PlanViolation::ChainBreak(i));
            }
        }
        if !e.is_wait() {
            if !instance.has_edge(e.from, e.to) {
                return Err(PlanViolation::NotAnEdge(i));
            }
            let expected = pu.dist(pv) / agent.speed;
            // Files carry 6 decimals, so each endpoint may be off by EPS_T / 2.
            if (e.duration() - expected).abs() > 2.0 * EPS_T {
                return Err(PlanViolation::DurationMismatch(i));
            }
        }
    }
    let last = plan.events.len() - 1;
    if plan.events[last].to != agent.goal {
        return Err(PlanViolation::BadGoalVertex(last));
    }
    Ok(())
}

/// Position of the agent's center at time `t` (parked at start before the
/// plan, parked at goal after it).
pub fn plan_position(plan: &TemporalPlan, instance: &Instance, t: f64) -> Point {
    let agent = instance
        .agent(plan.agent)
        .expect("plan agent belongs to instance");
    let pos = |v: VertexId| {
        instance
            .position(v)
            .expect("plan vertex belongs to instance")
    };
    let Some(first) = plan.events.first() else {
        return pos(agent.start);
    };
    if t < first.t_start {
        return pos(first.from);
    }
    // Events are ordered and contiguous; locate the active one.
    let idx = plan.events.partition_point(|e| e.t_end <= t);
    match plan.events.get(idx) {
        None => pos(plan.events.last().unwrap().to),
        Some(e) => {
            let a = pos(e.from);
            let b = pos(e.to);
            let f = ((t - e.t_start) / e.duration()).clamp(0.0, 1.0);
            Point::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f)
        }
    }
}

/// Collision-avoidance constraint on one agent.
///
/// With `from != to` the agent may not start traversing `from -> to` at any
/// time in `[t_lo, t_hi)`. With `from == to` the agent may not stay at `from`
/// for a positive duration overlapping `(t_lo, t_hi)`; parking there from a
/// time before `t_hi` is forbidden as well.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint {
    pub agent: AgentId,
    pub from: VertexId,
    pub to: VertexId,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Constraint {
    pub fn is_stay(&self) -> bool {
        self.from == self.to
    }

    /// Does starting the move at `t` fall inside the forbidden interval?
    pub fn forbids_start(&self, t: f64) -> bool {
        t >= self.t_lo && t < self.t_hi
    }

    /// Does a stay over `[s, e)` (possibly `e = inf`) overlap the window?
    pub fn forbids_stay(&self, s: f64, e: f64) -> bool {
        s < self.t_hi && e > self.t_lo && e > s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collision {
    pub event_i: MotionEvent,
    pub event_j: MotionEvent,
    pub contact_time: f64,
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn position_interpolates_and_parks() {
        let inst = two_vertex();
        let plan = TemporalPlan::new(AgentId(0), vec![ev(0, 0, 1, 0.0, 1.0)]);
        assert_eq!(plan_position(&plan, &inst, 0.5), Point::new(0.5, 0.0));
        assert_eq!(plan_position(&plan, &inst, 7.0), Point::new(1.0, 0.0));
        assert_eq!(plan_position(&plan, &inst, 0.0), Point::new(0.0, 0.0));
    }

    #[test]
    fn position_during_initial_wait() {
        let inst = figure1(0.2);
        let tau = 2.0 * SQRT2 * 0.2;
        let plan = TemporalPlan::new(
            AgentId(1),
            vec![ev(1, 1, 1, 0.0, tau), ev(1, 1, 4, tau, tau + SQRT2)],
        );
        assert_eq!(plan_position(&plan, &inst, 0.3), Point::new(0.0, 0.0));
        assert_eq!(plan_position(&plan, &inst, tau), Point::new(0.0, 0.0));
        let end = plan_position(&plan, &inst, tau + SQRT2);
        assert_eq!(end, Point::new(1.0, 1.0));
    }

    #[test]
    fn check_plan_accepts_well_formed() {
        let inst = figure1(0.2);
        let plan = TemporalPlan::new(
            AgentId(1),
            vec![ev(1, 1, 2, 0.0, 1.0), ev(1, 2, 4, 1.0, 2.0)],
        );
        assert_eq!(check_plan(&plan, &inst), Ok(()));
    }

    #[test]
    fn check_plan_reports_chain_break() {
        let inst = figure1(0.2);
        let plan = TemporalPlan::new(
            AgentId(1),
            vec![ev(1, 1, 2, 0.0, 1.0), ev(1, 2, 4, 1.5, 2.5)],
        );
        assert_eq!(check_plan(&plan, &inst), Err(PlanViolation::ChainBreak(1)));
    }

    #[test]
    fn check_plan_reports_duration_mismatch() {
        let inst = two_vertex();
        let plan = TemporalPlan::new(AgentId(0), vec![ev(0, 0, 1, 0.0, 0.9)]);
        let err = check_plan(&plan, &inst).unwrap_err();
        assert_eq!(err, PlanViolation::DurationMismatch(0));
        assert_eq!(err.to_string(), "duration mismatch at event 0");
    }

    #[test]
    fn check_plan_rejects_wrong_endpoints_and_non_edges() {
        let inst = figure1(0.2);
        let p = TemporalPlan::new(AgentId(1), vec![ev(1, 2, 4, 0.0, 1.0)]);
        assert_eq!(check_plan(&p, &inst), Err(PlanViolation::BadStartVertex));
        let p = TemporalPlan::new(AgentId(1), vec![ev(1, 1, 2, 0.0, 1.0)]);
        assert_eq!(check_plan(&p, &inst), Err(PlanViolation::BadGoalVertex(0)));
        let p = TemporalPlan::new(AgentId(1), vec![]);
        assert_eq!(check_plan(&p, &inst), Err(PlanViolation::EmptyPlan));
        let p = TemporalPlan::new(AgentId(1), vec![ev(1, 1, 1, 0.0, 0.0)]);
        assert_eq!(
            check_plan(&p, &inst),
            Err(PlanViolation::NonPositiveDuration(0))
        );
    }

    #[test]
    fn makespan_is_max_end() {
        let p1 = TemporalPlan::new(AgentId(1), vec![ev(1, 1, 4, 0.0, 1.414)]);
        let p2 = TemporalPlan::new(
            AgentId(2),
            vec![ev(2, 2, 2, 0.0, 0.566), ev(2, 2, 3, 0.566, 1.980)],
        );
        assert_eq!(makespan(&[p1.clone(), p2]).unwrap(), 1.980);
        let single = TemporalPlan::new(AgentId(1), vec![ev(1, 1, 2, 0.0, 2.0)]);
        assert_eq!(makespan(&[single]).unwrap(), 2.0);
        assert_eq!(makespan(&[]), Err(ModelError::EmptySolution));
        // An agent sitting on its goal contributes 0.
        let empty = TemporalPlan::new(AgentId(3), vec![]);
        assert_eq!(makespan(&[empty]).unwrap(), 0.0);
    }

    #[test]
    fn instance_validation() {
        let v = |id, x, y| Vertex {
            id: VertexId(id),
            pos: Point::new(x, y),
        };
        let a = |id, s, g| Agent {
            id: AgentId(id),
            radius: 0.1,
            speed: 1.0,
            start: VertexId(s),
            goal: VertexId(g),
        };
        let verts = vec![v(0, 0.0, 0.0), v(1, 1.0, 0.0)];
        let e01 = vec![(VertexId(0), VertexId(1))];
        assert_eq!(
            Instance::new(verts.clone(), vec![(VertexId(0), VertexId(0))], vec![]).unwrap_err(),
            ModelError::SelfLoop(VertexId(0))
        );
        assert_eq!(
            Instance::new(verts.clone(), vec![(VertexId(0), VertexId(7))], vec![]).unwrap_err(),
            ModelError::UnknownEdgeEndpoint(VertexId(0), VertexId(7))
        );
        assert_eq!(
            Instance::new(verts.clone(), e01.clone(), vec![a(0, 0, 1), a(1, 0, 0)]).unwrap_err(),
            ModelError::SharedStart(VertexId(0))
        );
        assert_eq!(
            Instance::new(verts.clone(), e01.clone(), vec![a(0, 0, 1), a(1, 1, 1)]).unwrap_err(),
            ModelError::SharedGoal(VertexId(1))
        );
        let mut bad = a(0, 0, 1);
        bad.speed = 0.0;
        assert_eq!(
            Instance::new(verts.clone(), e01.clone(), vec![bad]).unwrap_err(),
            ModelError::BadAgentParameters(AgentId(0))
        );
        assert_eq!(
            Instance::new(vec![v(0, f64::NAN, 0.0)], vec![], vec![]).unwrap_err(),
            ModelError::NonFiniteCoordinate(VertexId(0))
        );
        assert_eq!(
            Instance::new(
                vec![v(0, 0.0, 0.0), v(1, 0.0, 0.0)],
                vec![(VertexId(0), VertexId(1))],
                vec![]
            )
            .unwrap_err(),
            ModelError::ZeroLengthEdge(VertexId(0), VertexId(1))
        );
    }

    #[test]
    fn shortest_duration_on_fixture() {
        let inst = figure1(0.2);
        let d = inst.shortest_duration(&inst.agents()[0]).unwrap();
        assert!((d - SQRT2).abs() < 1e-12);
    }

    #[test]
    fn constraint_predicates() {
        let c = Constraint {
            agent: AgentId(1),
            from: VertexId(1),
            to: VertexId(4),
            t_lo: 0.0,
            t_hi: 0.5,
        };
        assert!(c.forbids_start(0.0));
        assert!(!c.forbids_start(0.5));
        let s = Constraint {
            to: VertexId(1),
            ..c
        };
        assert!(s.is_stay());
        assert!(s.forbids_stay(0.4, f64::INFINITY));
        assert!(!s.forbids_stay(0.5, f64::INFINITY));
        assert!(!s.forbids_stay(0.2, 0.2));
    }
}
