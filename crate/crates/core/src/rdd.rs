//! Real decision diagrams: per-agent graphs of (vertex, time) decisions that
//! are sufficient for makespan-bounded search under a set of constraints.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{time_key, AgentId, Constraint, Instance, VertexId, EPS_T};

#[derive(Debug, Error, PartialEq)]
pub enum RddError {
    #[error("no decision beyond makespan {0}")]
    NoNextMakespan(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RddNode {
    pub vertex: VertexId,
    pub time: f64,
}

/// Edge between node indices of the owning [`Rdd`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RddEdge {
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug)]
pub struct Rdd {
    pub agent: AgentId,
    nodes: Vec<RddNode>,
    edges: Vec<RddEdge>,
    index: HashMap<(VertexId, i64), usize>,
    frontier: f64,
}

impl Rdd {
    fn empty(agent: AgentId) -> Self {
        Rdd {
            agent,
            nodes: Vec::new(),
            edges: Vec::new(),
            index: HashMap::new(),
            frontier: f64::INFINITY,
        }
    }

    pub fn nodes(&self) -> &[RddNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RddEdge] {
        &self.edges
    }

    pub fn node(&self, idx: usize) -> RddNode {
        self.nodes[idx]
    }

    pub fn find(&self, vertex: VertexId, time: f64) -> Option<usize> {
        self.index.get(&(vertex, time_key(time))).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smallest lower bound on the completion time of any decision dropped by
    /// pruning.
    pub fn frontier(&self) -> f64 {
        self.frontier
    }

    pub fn goal_nodes(&self, instance: &Instance) -> Vec<usize> {
        let Some(agent) = instance.agent(self.agent) else {
            return Vec::new();
        };
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].vertex == agent.goal)
            .collect()
    }

    /// Text table of nodes and edges, times with 6 decimals.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rdd agent {}", self.agent);
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{}\t{:.6}", n.vertex, n.time);
        }
        let _ = writeln!(out, "edges {}", self.edges.len());
        for e in &self.edges {
            let (a, b) = (self.nodes[e.from], self.nodes[e.to]);
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{}\t{:.6}",
                a.vertex, a.time, b.vertex, b.time
            );
        }
        out
    }
}

#[derive(PartialEq)]
struct Open {
    time: f64,
    vertex: VertexId,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.vertex.cmp(&self.vertex))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Builds one diagram per agent, in instance agent order.
pub fn build_rdds(instance: &Instance, constraints: &[Constraint], mu_max: f64) -> Vec<Rdd> {
    instance
        .agents()
        .iter()
        .map(|a| build_rdd(instance, a.id, constraints, mu_max))
        .collect()
}

pub fn build_rdd(
    instance: &Instance,
    agent_id: AgentId,
    constraints: &[Constraint],
    mu_max: f64,
) -> Rdd {
    let mut rdd = Rdd::empty(agent_id);
    let Some(agent) = instance.agent(agent_id).cloned() else {
        return rdd;
    };
    let (Some(start), Some(goal)) = (
        instance.vertex_index(agent.start),
        instance.vertex_index(agent.goal),
    ) else {
        return rdd;
    };

    let mut moves: HashMap<(VertexId, VertexId), Vec<(f64, f64)>> = HashMap::new();
    let mut stays: HashMap<VertexId, Vec<(f64, f64)>> = HashMap::new();
    for c in constraints.iter().filter(|c| c.agent == agent_id) {
        if c.is_stay() {
            stays.entry(c.from).or_default().push((c.t_lo, c.t_hi));
        } else {
            moves
                .entry((c.from, c.to))
                .or_default()
                .push((c.t_lo, c.t_hi));
        }
    }

    let bound = mu_max + EPS_T;
    let lb = |v: usize| instance.euclid(v, goal) / agent.speed;
    let mut edge_set: HashSet<RddEdge> = HashSet::new();
    let mut heap = BinaryHeap::new();

    // Inserts (v, t) unless pruned; returns its index.
    let insert = |rdd: &mut Rdd, heap: &mut BinaryHeap<Open>, v: usize, t: f64| -> Option<usize> {
        let est = t + lb(v);
        if est > bound {
            rdd.frontier = rdd.frontier.min(est);
            return None;
        }
        let vertex = instance.vertex(v).id;
        let key = (vertex, time_key(t));
        if let Some(&i) = rdd.index.get(&key) {
            return Some(i);
        }
        let i = rdd.nodes.len();
        rdd.nodes.push(RddNode { vertex, time: t });
        rdd.index.insert(key, i);
        heap.push(Open {
            time: t,
            vertex,
            node: i,
        });
        Some(i)
    };

    if insert(&mut rdd, &mut heap, start, 0.0).is_none() {
        return rdd;
    }

    while let Some(Open {
        time: t,
        vertex: u_id,
        node,
    }) = heap.pop()
    {
        if t > bound {
            continue;
        }
        let u = instance.vertex_index(u_id).expect("node vertex exists");
        let mut waits: Vec<f64> = Vec::new();
        for &(v, _) in instance.neighbors(u) {
            let v_id = instance.vertex(v).id;
            let d = instance.move_duration(&agent, u, v);
            if let Some(to) = insert(&mut rdd, &mut heap, v, t + d) {
                edge_set
                    .insert(RddEdge { from: node, to })
                    .then(|| rdd.edges.push(RddEdge { from: node, to }));
            }
            if let Some(ivs) = moves.get(&(u_id, v_id)) {
                waits.extend(
                    ivs.iter()
                        .filter(|&&(lo, hi)| t >= lo && t < hi && hi.is_finite())
                        .map(|&(_, hi)| hi),
                );
            }
            // Arrive at v right when a stay window there closes.
            if let Some(ivs) = stays.get(&v_id) {
                waits.extend(
                    ivs.iter()
                        .filter(|&&(_, hi)| hi.is_finite() && t + d < hi && hi - d > t)
                        .map(|&(_, hi)| hi - d),
                );
            }
        }
        for w in waits {
            if time_key(w) == time_key(t) {
                continue;
            }
            if let Some(to) = insert(&mut rdd, &mut heap, u, w) {
                edge_set
                    .insert(RddEdge { from: node, to })
                    .then(|| rdd.edges.push(RddEdge { from: node, to }));
            }
        }
    }
    rdd
}

/// Smallest decision time (or pruned completion bound) strictly beyond `mu`.
pub fn next_makespan(rdds: &[Rdd], mu: f64) -> Result<f64, RddError> {
    let threshold = mu + EPS_T;
    rdds.iter()
        .flat_map(|r| {
            r.nodes
                .iter()
                .map(|n| n.time)
                .chain(std::iter::once(r.frontier))
        })
        .filter(|&t| t > threshold && t.is_finite())
        .min_by(f64::total_cmp)
        .ok_or(RddError::NoNextMakespan(mu))
}
