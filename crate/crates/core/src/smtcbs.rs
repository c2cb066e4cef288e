//! SMT-CBS: lazy SAT-based search over makespan bounds.
//!
//! For a fixed bound the decision diagrams are encoded without any
//! inter-agent constraints. Each model is checked geometrically; every
//! collision becomes a mutex clause and a pair of constraints that grow the
//! diagrams with the waits needed to avoid it. When the formula turns
//! unsatisfiable, the bound moves to the next reachable decision time.

use std::time::{Duration, Instant};

use crate::encoder::{
    add_mutex, augment_basic, encode_basic_seeded, extract_solution, ConstraintPair, EventKey,
};
use crate::geometry::{collision_constraints, validate_plans};
use crate::model::{check_plan, Collision, Constraint, Instance, Solution, EPS_T};
use crate::rdd::{build_rdds, next_makespan};
use crate::report::{RunLogEntry, SolveError};
use crate::sat::SatResult;

#[derive(Clone, Debug)]
pub struct SmtOptions {
    pub mu_ceiling: f64,
    pub deadline: Option<Instant>,
    pub seed: u64,
}

impl Default for SmtOptions {
    fn default() -> Self {
        SmtOptions {
            mu_ceiling: 1e6,
            deadline: None,
            seed: 0,
        }
    }
}

impl SmtOptions {
    pub fn with_timeout(timeout: Duration) -> Self {
        SmtOptions {
            deadline: Some(Instant::now() + timeout),
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SatCall {
    pub mu: f64,
    pub vars: usize,
    pub clauses: usize,
    pub verdict: SatResult,
    /// Collisions found in the model (0 when unsatisfiable).
    pub collisions: usize,
    pub elapsed: Duration,
    /// For satisfiable calls: makespan of the extracted plans and whether
    /// every plan passed the single-agent check within the bound.
    pub model_makespan: Option<f64>,
    pub model_valid: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct SmtCbsReport {
    pub solution: Solution,
    pub sat_calls: Vec<SatCall>,
    pub mu_schedule: Vec<f64>,
    pub pairs: Vec<ConstraintPair>,
    /// Every collision that was turned into a mutex.
    pub collisions: Vec<Collision>,
}

impl SmtCbsReport {
    pub fn iterations(&self) -> usize {
        self.sat_calls.len()
    }

    pub fn mutex_count(&self) -> usize {
        self.collisions.len()
    }

    pub fn final_mu(&self) -> f64 {
        *self.mu_schedule.last().expect("at least one bound tried")
    }

    pub fn run_log(&self) -> Vec<RunLogEntry> {
        self.sat_calls
            .iter()
            .map(|c| RunLogEntry {
                mu: c.mu,
                vars: c.vars,
                clauses: c.clauses,
                collisions: c.collisions,
                elapsed: c.elapsed,
            })
            .collect()
    }
}

pub enum FixedOutcome {
    Solved(Solution),
    Unsat { next_mu: f64 },
}

fn flatten(pairs: &[ConstraintPair]) -> Vec<Constraint> {
    pairs.iter().flat_map(|p| [p.first, p.second]).collect()
}

fn deadline_passed(opts: &SmtOptions) -> bool {
    opts.deadline.is_some_and(|d| Instant::now() >= d)
}

/// The inner loop for one makespan bound. `pairs` accumulates across calls.
pub fn smt_cbs_fixed(
    instance: &Instance,
    pairs: &mut Vec<ConstraintPair>,
    collisions_seen: &mut Vec<Collision>,
    mu: f64,
    opts: &SmtOptions,
    calls: &mut Vec<SatCall>,
) -> Result<FixedOutcome, SolveError> {
    let internal = |e: &dyn std::fmt::Display| SolveError::Internal(e.to_string());
    let mut rdds = build_rdds(instance, &flatten(pairs), mu);
    let mut state =
        encode_basic_seeded(&rdds, instance, pairs, mu, opts.seed).map_err(|e| internal(&e))?;
    state.solver.set_deadline(opts.deadline);
    loop {
        if deadline_passed(opts) {
            return Err(SolveError::Timeout);
        }
        let started = Instant::now();
        let verdict = state.solve();
        let mut call = SatCall {
            mu,
            vars: state.num_vars() as usize,
            clauses: state.num_clauses(),
            verdict,
            collisions: 0,
            elapsed: started.elapsed(),
            model_makespan: None,
            model_valid: None,
        };
        match verdict {
            SatResult::Unknown => {
                calls.push(call);
                return Err(SolveError::Timeout);
            }
            SatResult::Unsat => {
                calls.push(call);
                break;
            }
            SatResult::Sat => {}
        }
        let solution = extract_solution(&state).map_err(|e| internal(&e))?;
        let bad_plan = solution
            .plans
            .iter()
            .find_map(|p| check_plan(p, instance).err());
        let valid = bad_plan.is_none() && solution.makespan <= mu + EPS_T;
        call.model_makespan = Some(solution.makespan);
        call.model_valid = Some(valid);
        if !valid {
            calls.push(call);
            return Err(SolveError::Internal(match bad_plan {
                Some(v) => format!("extracted plan is invalid: {v}"),
                None => format!("model makespan {} exceeds bound {mu}", solution.makespan),
            }));
        }
        let collisions = validate_plans(&solution, instance).map_err(|e| internal(&e))?;
        call.collisions = collisions.len();
        calls.push(call);
        if collisions.is_empty() {
            return Ok(FixedOutcome::Solved(solution));
        }
        for c in &collisions {
            let (first, second) = collision_constraints(c, instance).map_err(|e| internal(&e))?;
            let mutex = (
                EventKey::of_event(&c.event_i),
                EventKey::of_event(&c.event_j),
            );
            add_mutex(&mut state, mutex.0, mutex.1).map_err(|e| internal(&e))?;
            pairs.push(ConstraintPair {
                first,
                second,
                mutex,
            });
            collisions_seen.push(*c);
        }
        rdds = build_rdds(instance, &flatten(pairs), mu);
        augment_basic(&mut state, &rdds, pairs).map_err(|e| internal(&e))?;
    }
    let next_mu = next_makespan(&rdds, mu).map_err(|e| SolveError::NoSolution(e.to_string()))?;
    Ok(FixedOutcome::Unsat { next_mu })
}

/// Lower bound on the makespan: the longest of the agents' individual
/// shortest plans.
pub fn initial_makespan(instance: &Instance) -> Result<f64, SolveError> {
    let mut mu: f64 = 0.0;
    for a in instance.agents() {
        let d = instance.shortest_duration(a).ok_or_else(|| {
            SolveError::NoSolution(format!("goal of agent {} is unreachable", a.id))
        })?;
        mu = mu.max(d);
    }
    Ok(mu)
}

pub fn smt_cbs(instance: &Instance, opts: &SmtOptions) -> Result<SmtCbsReport, SolveError> {
    let mut mu = initial_makespan(instance)?;
    let mut pairs = Vec::new();
    let mut collisions = Vec::new();
    let mut calls = Vec::new();
    let mut schedule = Vec::new();
    loop {
        schedule.push(mu);
        match smt_cbs_fixed(instance, &mut pairs, &mut collisions, mu, opts, &mut calls)? {
            FixedOutcome::Solved(solution) => {
                return Ok(SmtCbsReport {
                    solution,
                    sat_calls: calls,
                    mu_schedule: schedule,
                    pairs,
                    collisions,
                });
            }
            FixedOutcome::Unsat { next_mu } => {
                if next_mu > opts.mu_ceiling {
                    return Err(SolveError::ResourceLimit(next_mu));
                }
                mu = next_mu;
            }
        }
    }
}
