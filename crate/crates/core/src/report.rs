//! Errors shared by the solvers and the tab-separated run log.

use std::fmt::Write as _;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("makespan {0} exceeds the configured ceiling")]
    ResourceLimit(f64),
    #[error("time limit reached")]
    Timeout,
    #[error("internal consistency error: {0}")]
    Internal(String),
}

/// One solver step: a SAT call for SMT-CBS, a node expansion for CCBS.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLogEntry {
    pub mu: f64,
    pub vars: usize,
    pub clauses: usize,
    pub collisions: usize,
    pub elapsed: Duration,
}

pub const RUN_LOG_HEADER: &str = "mu\tvars\tclauses\tcollisions\telapsed_s";

impl RunLogEntry {
    pub fn tsv(&self) -> String {
        format!(
            "{:.6}\t{}\t{}\t{}\t{:.6}",
            self.mu,
            self.vars,
            self.clauses,
            self.collisions,
            self.elapsed.as_secs_f64()
        )
    }
}

pub fn run_log_tsv(entries: &[RunLogEntry]) -> String {
    let mut out = String::from(RUN_LOG_HEADER);
    out.push('\n');
    for e in entries {
        let _ = writeln!(out, "{}", e.tsv());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_layout() {
        let e = RunLogEntry {
            mu: 1.0 / 3.0,
            vars: 10,
            clauses: 20,
            collisions: 1,
            elapsed: Duration::from_millis(1500),
        };
        assert_eq!(
            run_log_tsv(&[e]),
            "mu\tvars\tclauses\tcollisions\telapsed_s\n0.333333\t10\t20\t1\t1.500000\n"
        );
    }
}
