//! Continuous-time conflict-based search minimizing makespan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::geometry::{collision_constraints, validate_plans};
use crate::model::{Collision, Constraint, Instance, Solution, TemporalPlan};
use crate::report::{RunLogEntry, SolveError};
use crate::sipp::shortest_temporal_plan;

#[derive(Clone, Debug, Default)]
pub struct CcbsOptions {
    pub deadline: Option<Instant>,
}

impl CcbsOptions {
    pub fn with_timeout(timeout: Duration) -> Self {
        CcbsOptions {
            deadline: Some(Instant::now() + timeout),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CcbsReport {
    pub solution: Solution,
    pub expanded: usize,
    pub generated: usize,
    pub log: Vec<RunLogEntry>,
}

#[derive(Clone, Debug)]
pub struct CtNode {
    pub constraints: Vec<Constraint>,
    pub plans: Vec<TemporalPlan>,
    pub mu: f64,
}

struct Queued {
    mu: f64,
    n_constraints: usize,
    seq: usize,
    node: CtNode,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .mu
            .total_cmp(&self.mu)
            .then_with(|| other.n_constraints.cmp(&self.n_constraints))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn node_mu(plans: &[TemporalPlan]) -> f64 {
    plans.iter().map(TemporalPlan::end_time).fold(0.0, f64::max)
}

/// The collision CCBS branches on: earliest contact, then lowest agent ids.
pub fn pick_collision(collisions: &[Collision], instance: &Instance) -> Option<Collision> {
    let idx = |c: &Collision| {
        (
            instance.agent_index(c.event_i.agent).unwrap_or(usize::MAX),
            instance.agent_index(c.event_j.agent).unwrap_or(usize::MAX),
        )
    };
    collisions
        .iter()
        .min_by(|a, b| {
            a.contact_time
                .total_cmp(&b.contact_time)
                .then_with(|| idx(a).cmp(&idx(b)))
        })
        .copied()
}

pub fn ccbs(instance: &Instance, opts: &CcbsOptions) -> Result<CcbsReport, SolveError> {
    let internal = |e: &dyn std::fmt::Display| SolveError::Internal(e.to_string());
    let mut plans = Vec::with_capacity(instance.agents().len());
    for a in instance.agents() {
        let p = shortest_temporal_plan(instance, a.id, &[]).ok_or_else(|| {
            SolveError::NoSolution(format!("goal of agent {} is unreachable", a.id))
        })?;
        plans.push(p);
    }
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    let root = CtNode {
        constraints: Vec::new(),
        mu: node_mu(&plans),
        plans,
    };
    heap.push(Queued {
        mu: root.mu,
        n_constraints: 0,
        seq,
        node: root,
    });
    let mut expanded = 0;
    let mut generated = 1;
    let mut log = Vec::new();

    while let Some(Queued { node, .. }) = heap.pop() {
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(SolveError::Timeout);
        }
        let started = Instant::now();
        expanded += 1;
        let solution = Solution::new(node.plans.clone()).map_err(|e| internal(&e))?;
        let collisions = validate_plans(&solution, instance).map_err(|e| internal(&e))?;
        log.push(RunLogEntry {
            mu: node.mu,
            vars: 0,
            clauses: node.constraints.len(),
            collisions: collisions.len(),
            elapsed: started.elapsed(),
        });
        let Some(c) = pick_collision(&collisions, instance) else {
            return Ok(CcbsReport {
                solution,
                expanded,
                generated,
                log,
            });
        };
        let (ci, cj) = collision_constraints(&c, instance).map_err(|e| internal(&e))?;
        for (mut con, ev) in [(ci, c.event_i), (cj, c.event_j)] {
            if !con.is_stay() {
                con.t_lo = con.t_lo.max(ev.t_start);
            }
            let ai = instance
                .agent_index(con.agent)
                .ok_or_else(|| SolveError::Internal(format!("unknown agent {}", con.agent)))?;
            let mut constraints = node.constraints.clone();
            constraints.push(con);
            let Some(plan) = shortest_temporal_plan(instance, con.agent, &constraints) else {
                continue;
            };
            let mut plans = node.plans.clone();
            plans[ai] = plan;
            let mu = node_mu(&plans);
            seq += 1;
            generated += 1;
            heap.push(Queued {
                mu,
                n_constraints: constraints.len(),
                seq,
                node: CtNode {
                    constraints,
                    plans,
                    mu,
                },
            });
        }
    }
    Err(SolveError::NoSolution("constraint tree exhausted".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{Agent, AgentId, Point, Vertex, VertexId};

    #[test]
    fn figure1_optimum() {
        let inst = figure1(0.2);
        let rep = ccbs(&inst, &CcbsOptions::default()).unwrap();
        assert!((rep.solution.makespan - 1.979899).abs() < 1e-6);
        assert!((rep.log[0].mu - std::f64::consts::SQRT_2).abs() < 1e-9);
        assert_eq!(rep.generated, 3);
        assert!(validate_plans(&rep.solution, &inst).unwrap().is_empty());
    }

    #[test]
    fn single_agent_returns_root() {
        let inst = two_vertex();
        let rep = ccbs(&inst, &CcbsOptions::default()).unwrap();
        assert_eq!(rep.expanded, 1);
        assert_eq!(rep.solution.makespan, 1.0);
    }

    #[test]
    fn disjoint_corridors_return_root() {
        let vs = vec![
            Vertex {
                id: VertexId(0),
                pos: Point::new(0.0, 0.0),
            },
            Vertex {
                id: VertexId(1),
                pos: Point::new(2.0, 0.0),
            },
            Vertex {
                id: VertexId(2),
                pos: Point::new(0.0, 5.0),
            },
            Vertex {
                id: VertexId(3),
                pos: Point::new(3.0, 5.0),
            },
        ];
        let a = |id, s, g| Agent {
            id: AgentId(id),
            radius: 0.3,
            speed: 1.0,
            start: VertexId(s),
            goal: VertexId(g),
        };
        let inst = Instance::new(
            vs,
            vec![(VertexId(0), VertexId(1)), (VertexId(2), VertexId(3))],
            vec![a(0, 0, 1), a(1, 2, 3)],
        )
        .unwrap();
        let rep = ccbs(&inst, &CcbsOptions::default()).unwrap();
        assert_eq!(rep.expanded, 1);
        assert_eq!(rep.solution.makespan, 3.0);
    }

    #[test]
    fn child_makespan_never_drops() {
        let inst = figure1(0.3);
        let rep = ccbs(&inst, &CcbsOptions::default()).unwrap();
        for w in rep.log.windows(2) {
            assert!(w[1].mu >= w[0].mu - 1e-6);
        }
    }
}
