//! Plumbing behind the `mapfr` binary: running a solver on an instance,
//! validation reports, and benchmark tables.

pub mod bench;

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use mapfr::ccbs::{ccbs, CcbsOptions};
use mapfr::geometry::validate_plans_with_slack;
use mapfr::io::grid::{build_graph, make_instance};
use mapfr::io::movingai::{parse_map, parse_scen};
use mapfr::io::text::parse_instance;
use mapfr::model::{check_plan, Instance, Solution, TemporalPlan};
use mapfr::report::{RunLogEntry, SolveError};
use mapfr::smtcbs::{smt_cbs, SmtOptions};

/// Exit codes shared by all subcommands.
pub mod exit {
    pub const SOLVED: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const TIMEOUT: i32 = 2;
    pub const NO_SOLUTION: i32 = 3;
    pub const INVALID: i32 = 4;
}

/// Solution files carry 6 decimals; collisions shallower than this are
/// rounding artifacts.
pub const FILE_SLACK: f64 = 1e-5;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Smtcbs,
    Ccbs,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Smtcbs => "smtcbs",
            Algo::Ccbs => "ccbs",
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub struct SolveRun {
    pub solution: Solution,
    pub log: Vec<RunLogEntry>,
    pub runtime: Duration,
}

/// Runs one solver; `runtime` covers the solve call only.
pub fn run_solver(
    instance: &Instance,
    algo: Algo,
    timeout: Duration,
    seed: u64,
) -> Result<SolveRun, SolveError> {
    let started = Instant::now();
    let (solution, log) = match algo {
        Algo::Smtcbs => {
            let mut opts = SmtOptions::with_timeout(timeout);
            opts.seed = seed;
            let r = smt_cbs(instance, &opts)?;
            let log = r.run_log();
            (r.solution, log)
        }
        Algo::Ccbs => {
            let r = ccbs(instance, &CcbsOptions::with_timeout(timeout))?;
            (r.solution, r.log)
        }
    };
    Ok(SolveRun {
        solution,
        log,
        runtime: started.elapsed(),
    })
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    parse_instance(&read_file(path)?).with_context(|| format!("{}", path.display()))
}

pub fn load_grid_instance(
    map_path: &Path,
    scen_path: &Path,
    agents: usize,
    neighborhood: u32,
    radius: f64,
    speed: f64,
) -> Result<Instance> {
    let map =
        parse_map(&read_file(map_path)?).with_context(|| format!("{}", map_path.display()))?;
    let entries =
        parse_scen(&read_file(scen_path)?).with_context(|| format!("{}", scen_path.display()))?;
    let graph = build_graph(&map, neighborhood)?;
    Ok(make_instance(
        &graph, &map, &entries, agents, radius, speed,
    )?)
}

/// One line that the benchmark parent reads back from a solve worker.
pub fn summary_line(makespan: f64, runtime: Duration) -> String {
    format!(
        "makespan {makespan:.6} runtime_s {:.6}",
        runtime.as_secs_f64()
    )
}

pub fn parse_summary_line(text: &str) -> Option<(f64, f64)> {
    text.lines().find_map(|l| {
        let f: Vec<&str> = l.split_whitespace().collect();
        match f[..] {
            ["makespan", m, "runtime_s", r] => Some((m.parse().ok()?, r.parse().ok()?)),
            _ => None,
        }
    })
}

pub struct ValidationReport {
    pub ok: bool,
    pub text: String,
}

/// Per-plan checks followed by the pairwise geometric check. Agents missing
/// from the solution get an empty plan.
pub fn validate(instance: &Instance, mut plans: Vec<TemporalPlan>) -> Result<ValidationReport> {
    let mut text = String::new();
    let mut ok = true;
    for a in instance.agents() {
        if !plans.iter().any(|p| p.agent == a.id) {
            plans.push(TemporalPlan::new(a.id, Vec::new()));
        }
    }
    for p in &plans {
        if let Err(v) = check_plan(p, instance) {
            ok = false;
            let _ = writeln!(text, "agent {}: {v}", p.agent);
        }
    }
    if !ok {
        return Ok(ValidationReport { ok, text });
    }
    let solution = Solution::new(plans)?;
    let collisions = validate_plans_with_slack(&solution, instance, FILE_SLACK)?;
    for c in &collisions {
        let (a, b) = (&c.event_i, &c.event_j);
        let _ = writeln!(
            text,
            "collision: agent {} {}->{} [{:.6}, {:.6}) with agent {} {}->{} [{:.6}, {:.6}) at t={:.6}",
            a.agent, a.from, a.to, a.t_start, a.t_end, b.agent, b.from, b.to, b.t_start, b.t_end, c.contact_time
        );
    }
    if collisions.is_empty() {
        let _ = writeln!(text, "valid, makespan {:.6}", solution.makespan);
    }
    Ok(ValidationReport {
        ok: collisions.is_empty(),
        text,
    })
}

pub fn solve_exit_code(e: &SolveError) -> i32 {
    match e {
        SolveError::Timeout => exit::TIMEOUT,
        SolveError::NoSolution(_) | SolveError::ResourceLimit(_) => exit::NO_SOLUTION,
        SolveError::Internal(_) => exit::USAGE,
    }
}

pub fn ensure_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        bail!("--{name} must be a positive number, got {v}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_round_trip() {
        let line = summary_line(1.979899, Duration::from_millis(1500));
        assert_eq!(
            parse_summary_line(&format!("noise\n{line}\n")),
            Some((1.979899, 1.5))
        );
        assert_eq!(parse_summary_line("makespan x runtime_s 1"), None);
    }
}
