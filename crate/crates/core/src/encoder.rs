//! Propositional encoding of per-agent decision diagrams, incremental
//! augmentation as the diagrams grow, and mutex clauses for collisions.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    time_key, AgentId, Constraint, Instance, ModelError, MotionEvent, Solution, TemporalPlan,
    VertexId,
};
use crate::rdd::Rdd;
use crate::sat::{Lit, SatError, SatResult, Solver};

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("event {0:?} has no variable in the current encoding")]
    Unmapped(EventKey),
    #[error("model selects {count} successors for agent {agent} at vertex {vertex}")]
    Branching {
        agent: AgentId,
        vertex: VertexId,
        count: usize,
    },
    #[error("model does not select the start node of agent {0}")]
    MissingStart(AgentId),
    #[error("no decision diagram for agent {0}")]
    MissingAgent(AgentId),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Identity of an encoded event: an edge variable, or a terminal variable
/// (the agent stays at its goal from that time on).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKey {
    Edge {
        agent: AgentId,
        from: VertexId,
        to: VertexId,
        tq_from: i64,
        tq_to: i64,
    },
    Terminal {
        agent: AgentId,
        vertex: VertexId,
        tq: i64,
    },
}

impl EventKey {
    pub fn of_event(e: &MotionEvent) -> EventKey {
        if e.is_parking() {
            EventKey::Terminal {
                agent: e.agent,
                vertex: e.from,
                tq: time_key(e.t_start),
            }
        } else {
            EventKey::Edge {
                agent: e.agent,
                from: e.from,
                to: e.to,
                tq_from: time_key(e.t_start),
                tq_to: time_key(e.t_end),
            }
        }
    }
}

/// A resolved collision: one constraint per side plus the mutex between the
/// two colliding events.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintPair {
    pub first: Constraint,
    pub second: Constraint,
    pub mutex: (EventKey, EventKey),
}

type NodeKey = (VertexId, i64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Succ {
    Edge(usize),
    Terminal(u32),
}

struct NodeInfo {
    var: u32,
    vertex: VertexId,
    time: f64,
    out: Vec<Succ>,
    incoming: Vec<u32>,
    activation: Option<u32>,
}

struct EdgeInfo {
    var: u32,
    from: usize,
    to: usize,
}

struct AgentEncoding {
    agent: AgentId,
    start: VertexId,
    goal: VertexId,
    nodes: Vec<NodeInfo>,
    node_index: HashMap<NodeKey, usize>,
    edges: Vec<EdgeInfo>,
    edge_index: HashMap<(NodeKey, NodeKey), usize>,
    terminals: Vec<u32>,
    terminal_times: Vec<f64>,
    terminal_index: HashMap<NodeKey, u32>,
    terminal_activation: Option<u32>,
}

impl AgentEncoding {
    fn succ_var(&self, s: Succ) -> u32 {
        match s {
            Succ::Edge(e) => self.edges[e].var,
            Succ::Terminal(v) => v,
        }
    }
}

pub struct EncodingState {
    pub solver: Solver,
    pub mu: f64,
    agents: Vec<AgentEncoding>,
    active: BTreeSet<u32>,
    mutexes: HashSet<(EventKey, EventKey)>,
    mutex_list: Vec<(EventKey, EventKey)>,
    /// Per constraint pair and side: how many edges and terminals of the
    /// constrained agent were already checked against the constraint.
    coverage: Vec<[(usize, usize); 2]>,
    missing_goal: bool,
    labels: Vec<String>,
    activation_vars: usize,
}

impl EncodingState {
    fn new(instance: &Instance, mu: f64, seed: u64) -> Self {
        let agents = instance
            .agents()
            .iter()
            .map(|a| AgentEncoding {
                agent: a.id,
                start: a.start,
                goal: a.goal,
                nodes: Vec::new(),
                node_index: HashMap::new(),
                edges: Vec::new(),
                edge_index: HashMap::new(),
                terminals: Vec::new(),
                terminal_times: Vec::new(),
                terminal_index: HashMap::new(),
                terminal_activation: None,
            })
            .collect();
        EncodingState {
            solver: Solver::with_seed(seed),
            mu,
            agents,
            active: BTreeSet::new(),
            mutexes: HashSet::new(),
            mutex_list: Vec::new(),
            coverage: Vec::new(),
            missing_goal: false,
            labels: vec![String::new()],
            activation_vars: 0,
        }
    }

    fn var(&mut self, label: impl FnOnce() -> String) -> u32 {
        let v = self.solver.new_var();
        self.labels.push(label());
        v
    }

    fn clause(&mut self, lits: &[Lit]) -> Result<(), EncodeError> {
        Ok(self.solver.add_clause(lits)?)
    }

    pub fn num_vars(&self) -> u32 {
        self.solver.num_vars()
    }

    pub fn num_clauses(&self) -> usize {
        self.solver.num_clauses()
    }

    /// Variables that stand for nodes, edges and terminals (excluding the
    /// activation literals used for growing disjunctions).
    pub fn num_model_vars(&self) -> usize {
        self.solver.num_vars() as usize - self.activation_vars
    }

    pub fn mutex_count(&self) -> usize {
        self.mutex_list.len()
    }

    pub fn mutexes(&self) -> &[(EventKey, EventKey)] {
        &self.mutex_list
    }

    /// True when some agent has no goal decision, so the formula is
    /// unsatisfiable without consulting the solver.
    pub fn missing_goal(&self) -> bool {
        self.missing_goal
    }

    pub fn var_of(&self, key: &EventKey) -> Option<u32> {
        match *key {
            EventKey::Edge {
                agent,
                from,
                to,
                tq_from,
                tq_to,
            } => {
                let a = self.agents.iter().find(|a| a.agent == agent)?;
                a.edge_index
                    .get(&((from, tq_from), (to, tq_to)))
                    .map(|&e| a.edges[e].var)
            }
            EventKey::Terminal { agent, vertex, tq } => {
                let a = self.agents.iter().find(|a| a.agent == agent)?;
                a.terminal_index.get(&(vertex, tq)).copied()
            }
        }
    }

    pub fn solve(&mut self) -> SatResult {
        if self.missing_goal {
            return SatResult::Unsat;
        }
        let assumptions: Vec<Lit> = self.active.iter().map(|&v| Lit::neg(v)).collect();
        self.solver.solve_with_assumptions(&assumptions)
    }

    /// DIMACS text of the database plus a sidecar naming every variable.
    /// Activation literals appear as units in the CNF so it stands alone.
    pub fn dimacs_with_names(&self) -> (String, String) {
        let mut cnf = String::new();
        let clauses = self.solver.clauses();
        let _ = writeln!(
            cnf,
            "p cnf {} {}",
            self.solver.num_vars(),
            clauses.len() + self.active.len()
        );
        for c in clauses {
            for l in c {
                let _ = write!(cnf, "{} ", l.to_dimacs());
            }
            cnf.push_str("0\n");
        }
        for &v in &self.active {
            let _ = writeln!(cnf, "-{v} 0");
        }
        let mut names = String::new();
        for (v, l) in self.labels.iter().enumerate().skip(1) {
            let _ = writeln!(names, "{v}\t{l}");
        }
        (cnf, names)
    }

    /// Ensures the clause `(lits ∨ act)` for a growing disjunction: retires
    /// the previous activation literal and emits a fresh one.
    fn refresh_disjunction(
        &mut self,
        old: Option<u32>,
        mut lits: Vec<Lit>,
    ) -> Result<u32, EncodeError> {
        if let Some(a) = old {
            self.active.remove(&a);
            self.clause(&[Lit::pos(a)])?;
        }
        let act = self.var(|| "activation".to_string());
        self.activation_vars += 1;
        self.active.insert(act);
        lits.push(Lit::pos(act));
        self.clause(&lits)?;
        Ok(act)
    }

    fn augment_agent(&mut self, ai: usize, rdd: &Rdd) -> Result<(), EncodeError> {
        let agent = self.agents[ai].agent;
        let mut dirty: Vec<usize> = Vec::new();

        let mut local: Vec<usize> = Vec::with_capacity(rdd.nodes().len());
        for n in rdd.nodes() {
            let key = (n.vertex, time_key(n.time));
            if let Some(&i) = self.agents[ai].node_index.get(&key) {
                local.push(i);
                continue;
            }
            let (v, t) = (n.vertex, n.time);
            let var = self.var(|| format!("X agent {agent} vertex {v} t {t:.6}"));
            let a = &mut self.agents[ai];
            let i = a.nodes.len();
            a.nodes.push(NodeInfo {
                var,
                vertex: n.vertex,
                time: n.time,
                out: Vec::new(),
                incoming: Vec::new(),
                activation: None,
            });
            a.node_index.insert(key, i);
            local.push(i);
            dirty.push(i);
            if n.vertex == a.start && key.1 == 0 {
                self.clause(&[Lit::pos(var)])?;
            }
        }

        for e in rdd.edges() {
            let (s, d) = (local[e.from], local[e.to]);
            let a = &self.agents[ai];
            let (sk, dk) = (
                (a.nodes[s].vertex, time_key(a.nodes[s].time)),
                (a.nodes[d].vertex, time_key(a.nodes[d].time)),
            );
            if a.edge_index.contains_key(&(sk, dk)) {
                continue;
            }
            let (sv, st, dv, dt) = (
                a.nodes[s].vertex,
                a.nodes[s].time,
                a.nodes[d].vertex,
                a.nodes[d].time,
            );
            let var = self.var(|| format!("E agent {agent} {sv}@{st:.6} -> {dv}@{dt:.6}"));
            let (xs, xd) = (self.agents[ai].nodes[s].var, self.agents[ai].nodes[d].var);
            self.clause(&[Lit::neg(var), Lit::pos(xd)])?;
            self.clause(&[Lit::neg(var), Lit::pos(xs)])?;
            let others: Vec<u32> = {
                let a = &self.agents[ai];
                a.nodes[s].out.iter().map(|&o| a.succ_var(o)).collect()
            };
            for o in others {
                self.clause(&[Lit::neg(var), Lit::neg(o)])?;
            }
            let incoming = self.agents[ai].nodes[d].incoming.clone();
            for o in incoming {
                self.clause(&[Lit::neg(var), Lit::neg(o)])?;
            }
            let a = &mut self.agents[ai];
            let ei = a.edges.len();
            a.edges.push(EdgeInfo {
                var,
                from: s,
                to: d,
            });
            a.edge_index.insert((sk, dk), ei);
            a.nodes[s].out.push(Succ::Edge(ei));
            a.nodes[d].incoming.push(var);
            dirty.push(s);
        }

        let goal = self.agents[ai].goal;
        let mut terminals_grew = false;
        let mut any_goal = false;
        for &i in &local {
            if self.agents[ai].nodes[i].vertex != goal {
                continue;
            }
            any_goal = true;
            let key = (goal, time_key(self.agents[ai].nodes[i].time));
            if self.agents[ai].terminal_index.contains_key(&key) {
                continue;
            }
            let t = self.agents[ai].nodes[i].time;
            let var = self.var(|| format!("T agent {agent} vertex {goal} t {t:.6}"));
            let x = self.agents[ai].nodes[i].var;
            self.clause(&[Lit::neg(var), Lit::pos(x)])?;
            let (others, terms): (Vec<u32>, Vec<u32>) = {
                let a = &self.agents[ai];
                (
                    a.nodes[i].out.iter().map(|&o| a.succ_var(o)).collect(),
                    a.terminals.clone(),
                )
            };
            for o in others.into_iter().chain(terms) {
                self.clause(&[Lit::neg(var), Lit::neg(o)])?;
            }
            let a = &mut self.agents[ai];
            a.terminals.push(var);
            a.terminal_times.push(t);
            a.terminal_index.insert(key, var);
            a.nodes[i].out.push(Succ::Terminal(var));
            dirty.push(i);
            terminals_grew = true;
        }
        if !any_goal {
            self.missing_goal = true;
        }

        dirty.sort_unstable();
        dirty.dedup();
        for i in dirty {
            let (old, lits) = {
                let a = &self.agents[ai];
                let n = &a.nodes[i];
                let mut lits = vec![Lit::neg(n.var)];
                lits.extend(n.out.iter().map(|&o| Lit::pos(a.succ_var(o))));
                (n.activation, lits)
            };
            let act = self.refresh_disjunction(old, lits)?;
            self.agents[ai].nodes[i].activation = Some(act);
        }
        if terminals_grew {
            let old = self.agents[ai].terminal_activation;
            let lits = self.agents[ai]
                .terminals
                .iter()
                .map(|&v| Lit::pos(v))
                .collect();
            let act = self.refresh_disjunction(old, lits)?;
            self.agents[ai].terminal_activation = Some(act);
        }
        Ok(())
    }
}

/// Fresh encoding of the diagrams for makespan `mu`; mutexes of earlier
/// constraint pairs are re-emitted where both events are still encoded.
pub fn encode_basic(
    rdds: &[Rdd],
    instance: &Instance,
    pairs: &[ConstraintPair],
    mu: f64,
) -> Result<EncodingState, EncodeError> {
    encode_basic_seeded(rdds, instance, pairs, mu, 0)
}

pub fn encode_basic_seeded(
    rdds: &[Rdd],
    instance: &Instance,
    pairs: &[ConstraintPair],
    mu: f64,
    seed: u64,
) -> Result<EncodingState, EncodeError> {
    let mut state = EncodingState::new(instance, mu, seed);
    augment_basic(&mut state, rdds, pairs)?;
    Ok(state)
}

/// Adds variables and clauses for diagram elements not yet encoded, then
/// emits pending mutexes: the colliding pair of each constraint pair, and
/// every encoded event that one side's constraint covers against the other
/// side's event.
pub fn augment_basic(
    state: &mut EncodingState,
    rdds: &[Rdd],
    pairs: &[ConstraintPair],
) -> Result<(), EncodeError> {
    state.missing_goal = false;
    for ai in 0..state.agents.len() {
        let agent = state.agents[ai].agent;
        let rdd = rdds
            .iter()
            .find(|r| r.agent == agent)
            .ok_or(EncodeError::MissingAgent(agent))?;
        state.augment_agent(ai, rdd)?;
    }
    for (pi, p) in pairs.iter().enumerate() {
        let (a, b) = p.mutex;
        if state.var_of(&a).is_some() && state.var_of(&b).is_some() {
            add_mutex(state, a, b)?;
        }
        if state.coverage.len() <= pi {
            state.coverage.resize(pi + 1, [(0, 0); 2]);
        }
        cover(state, pi, 0, &p.first, b)?;
        cover(state, pi, 1, &p.second, a)?;
    }
    Ok(())
}

/// Slack kept from constraint bounds so that only events strictly inside
/// the forbidden set are paired.
const COVER_MARGIN: f64 = 1e-9;

/// Every action the constraint forbids collides with the partner event, so
/// each encoded edge or terminal it covers gets a mutex with the partner.
fn cover(
    state: &mut EncodingState,
    pi: usize,
    side: usize,
    c: &Constraint,
    partner: EventKey,
) -> Result<(), EncodeError> {
    let Some(pv) = state.var_of(&partner) else {
        return Ok(());
    };
    let Some(ai) = state.agents.iter().position(|a| a.agent == c.agent) else {
        return Ok(());
    };
    let (lo, hi) = (c.t_lo + COVER_MARGIN, c.t_hi - COVER_MARGIN);
    let (e0, t0) = state.coverage[pi][side];
    let a = &state.agents[ai];
    let mut covered: Vec<(EventKey, u32)> = Vec::new();
    for e in &a.edges[e0..] {
        let (s, d) = (&a.nodes[e.from], &a.nodes[e.to]);
        if s.vertex != c.from || d.vertex != c.to {
            continue;
        }
        let hit = if c.is_stay() {
            s.time < hi && d.time > lo
        } else {
            s.time >= lo && s.time < hi
        };
        if hit {
            let key = EventKey::Edge {
                agent: a.agent,
                from: s.vertex,
                to: d.vertex,
                tq_from: time_key(s.time),
                tq_to: time_key(d.time),
            };
            covered.push((key, e.var));
        }
    }
    if c.is_stay() && c.from == a.goal {
        for (&v, &t) in a.terminals[t0..].iter().zip(&a.terminal_times[t0..]) {
            if t < hi {
                let key = EventKey::Terminal {
                    agent: a.agent,
                    vertex: a.goal,
                    tq: time_key(t),
                };
                covered.push((key, v));
            }
        }
    }
    state.coverage[pi][side] = (a.edges.len(), a.terminals.len());
    for (key, v) in covered {
        let pair = if key <= partner {
            (key, partner)
        } else {
            (partner, key)
        };
        if state.mutexes.insert(pair) {
            state.mutex_list.push(pair);
            state.clause(&[Lit::neg(v), Lit::neg(pv)])?;
        }
    }
    Ok(())
}

/// Emits `¬a ∨ ¬b` once per unordered pair.
pub fn add_mutex(state: &mut EncodingState, a: EventKey, b: EventKey) -> Result<bool, EncodeError> {
    let va = state.var_of(&a).ok_or(EncodeError::Unmapped(a))?;
    let vb = state.var_of(&b).ok_or(EncodeError::Unmapped(b))?;
    let key = if a <= b { (a, b) } else { (b, a) };
    if !state.mutexes.insert(key) {
        return Ok(false);
    }
    state.mutex_list.push(key);
    state.clause(&[Lit::neg(va), Lit::neg(vb)])?;
    Ok(true)
}

/// Mutex clauses for collisions given as event pairs.
pub fn add_collision_mutexes(
    state: &mut EncodingState,
    collisions: &[(MotionEvent, MotionEvent)],
) -> Result<usize, EncodeError> {
    let mut added = 0;
    for (a, b) in collisions {
        if add_mutex(state, EventKey::of_event(a), EventKey::of_event(b))? {
            added += 1;
        }
    }
    Ok(added)
}

/// Reads one plan per agent off the last satisfying assignment.
pub fn extract_solution(state: &EncodingState) -> Result<Solution, EncodeError> {
    let s = &state.solver;
    let mut plans = Vec::with_capacity(state.agents.len());
    for a in &state.agents {
        let start = a
            .node_index
            .get(&(a.start, 0))
            .copied()
            .filter(|&i| s.model_value(a.nodes[i].var))
            .ok_or(EncodeError::MissingStart(a.agent))?;
        let mut events = Vec::new();
        let mut cur = start;
        loop {
            let n = &a.nodes[cur];
            let chosen: Vec<Succ> = n
                .out
                .iter()
                .copied()
                .filter(|&o| s.model_value(a.succ_var(o)))
                .collect();
            if chosen.len() != 1 || events.len() > a.nodes.len() {
                return Err(EncodeError::Branching {
                    agent: a.agent,
                    vertex: n.vertex,
                    count: chosen.len(),
                });
            }
            match chosen[0] {
                Succ::Terminal(_) => break,
                Succ::Edge(e) => {
                    let edge = &a.edges[e];
                    debug_assert_eq!(edge.from, cur);
                    let to = &a.nodes[edge.to];
                    events.push(MotionEvent {
                        agent: a.agent,
                        from: n.vertex,
                        to: to.vertex,
                        t_start: n.time,
                        t_end: to.time,
                    });
                    cur = edge.to;
                }
            }
        }
        plans.push(TemporalPlan::new(a.agent, events));
    }
    Ok(Solution::new(plans)?)
}
