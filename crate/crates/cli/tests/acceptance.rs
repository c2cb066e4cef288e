//! Acceptance checks. Each criterion prints one PASS/FAIL line to stderr
//! (bypassing output capture); the test fails if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mapfr::ccbs::{ccbs, CcbsOptions};
use mapfr::encoder::{
    add_mutex, augment_basic, encode_basic, extract_solution, ConstraintPair, EventKey,
};
use mapfr::geometry::{collision_constraints, unsafe_interval, validate_plans};
use mapfr::model::{
    check_plan, AgentId, Constraint, Instance, MotionEvent, Solution, VertexId, EPS_T,
};
use mapfr::rdd::{build_rdds, next_makespan};
use mapfr::report::SolveError;
use mapfr::sat::{Lit, SatResult, Solver};
use mapfr::smtcbs::{initial_makespan, smt_cbs, SmtCbsReport, SmtOptions};
use mapfr_cli::bench::{read_csv, success_rates, Outcome, CSV_HEADER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{figure1, random_corpus, SQRT2};

const FIG1_MAKESPAN: f64 = 1.979899;
const FIG1_WAIT: f64 = 0.565685;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn report(n: usize, v: &Verdict, failures: &mut Vec<usize>) {
    let status = if v.pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {n}: {status} {}", v.detail);
    if !v.pass {
        failures.push(n);
    }
}

/// Exactly one agent waits, over [0, FIG1_WAIT).
fn single_initial_wait(s: &Solution) -> bool {
    let waits: Vec<&MotionEvent> = s
        .plans
        .iter()
        .flat_map(|p| &p.events)
        .filter(|e| e.is_wait())
        .collect();
    waits.len() == 1 && waits[0].t_start.abs() < 1e-9 && (waits[0].t_end - FIG1_WAIT).abs() < 1e-3
}

fn criterion1() -> Verdict {
    let inst = figure1(0.2);
    let started = Instant::now();
    let smt = smt_cbs(&inst, &SmtOptions::default());
    let cc = ccbs(&inst, &CcbsOptions::default());
    let elapsed = started.elapsed();
    let (Ok(smt), Ok(cc)) = (smt, cc) else {
        return verdict(false, "a solver returned an error");
    };
    let ok = |s: &Solution| (s.makespan - FIG1_MAKESPAN).abs() < 1e-3 && single_initial_wait(s);
    verdict(
        ok(&smt.solution) && ok(&cc.solution) && elapsed < Duration::from_secs(1),
        format!(
            "smtcbs {:.6} ccbs {:.6} in {:.3}s",
            smt.solution.makespan,
            cc.solution.makespan,
            elapsed.as_secs_f64()
        ),
    )
}

/// Smallest start offset (sampled) of a1's diagonal move such that the two
/// moves keep their centers at least 2r apart.
fn sampled_tau_plus(r: f64, step: f64) -> f64 {
    // a1: (0,0) -> (1,1) starting at s; a2: (1,0) -> (0,1) over [0, √2).
    let d = SQRT2;
    let min_dist = |s: f64| {
        let (lo, hi) = (s.max(0.0), (s + d).min(d));
        if lo >= hi {
            return f64::INFINITY;
        }
        // relative position a1 - a2 at time t is p0 + v t
        let u = 1.0 / SQRT2;
        let p0 = (-u * s - 1.0, -u * s);
        let v = (2.0 * u, 0.0);
        let at = |t: f64| ((p0.0 + v.0 * t).powi(2) + (p0.1 + v.1 * t).powi(2)).sqrt();
        let vv = v.0 * v.0 + v.1 * v.1;
        let t_star = (-(p0.0 * v.0 + p0.1 * v.1) / vv).clamp(lo, hi);
        at(lo).min(at(hi)).min(at(t_star))
    };
    let mut s = 0.0;
    while min_dist(s) < 2.0 * r {
        s += step;
    }
    s
}

fn criterion2() -> Verdict {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    let mut ok = true;
    for r in [0.1, 0.2, 0.3] {
        let inst = figure1(r);
        let mv = MotionEvent {
            agent: AgentId(1),
            from: VertexId(1),
            to: VertexId(4),
            t_start: 0.0,
            t_end: SQRT2,
        };
        let fixed = MotionEvent {
            agent: AgentId(2),
            from: VertexId(2),
            to: VertexId(3),
            t_start: 0.0,
            t_end: SQRT2,
        };
        let Ok(Some(iv)) = unsafe_interval(&mv, &fixed, &inst) else {
            return verdict(false, format!("no unsafe interval at r={r}"));
        };
        let expected = 2.0 * SQRT2 * r;
        let oracle = sampled_tau_plus(r, 1e-5);
        worst = worst.max((iv.hi - expected).abs());
        ok &= (iv.hi - expected).abs() <= 1e-5 && (iv.hi - oracle).abs() <= 1e-5 + 1e-9;
        details.push(format!("r={r} tau+={:.7}", iv.hi));
    }
    let elapsed = started.elapsed();
    verdict(
        ok && elapsed < Duration::from_secs(1),
        format!(
            "{} max err {worst:.1e} in {:.3}s",
            details.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

struct CorpusRun {
    verdict: Verdict,
    smt_reports: Vec<Result<SmtCbsReport, SolveError>>,
    instances: Vec<Instance>,
}

fn criterion3() -> CorpusRun {
    let corpus = random_corpus(120, 7);
    let started = Instant::now();
    let mut agree = 0;
    let mut invalid = 0;
    let mut reports = Vec::new();
    let mut instances = Vec::new();
    for case in &corpus {
        let inst = &case.instance;
        let a = ccbs(inst, &CcbsOptions::with_timeout(Duration::from_secs(60)));
        let b = smt_cbs(inst, &SmtOptions::with_timeout(Duration::from_secs(60)));
        if let (Ok(x), Ok(y)) = (&a, &b) {
            let clean = |s: &Solution| validate_plans(s, inst).is_ok_and(|c| c.is_empty());
            if !clean(&x.solution) || !clean(&y.solution) {
                invalid += 1;
            } else if (x.solution.makespan - y.solution.makespan).abs() <= 1e-4 {
                agree += 1;
            }
        }
        reports.push(b);
        instances.push(inst.clone());
    }
    let elapsed = started.elapsed();
    CorpusRun {
        verdict: verdict(
            agree == corpus.len() && elapsed < Duration::from_secs(300),
            format!(
                "{agree}/{} agree, {invalid} invalid, {:.1}s",
                corpus.len(),
                elapsed.as_secs_f64()
            ),
        ),
        smt_reports: reports,
        instances,
    }
}

fn criterion4(run: &CorpusRun) -> Verdict {
    let mut models = 0;
    let mut bad = 0;
    for (r, inst) in run.smt_reports.iter().zip(&run.instances) {
        let Ok(r) = r else {
            bad += 1;
            continue;
        };
        for c in r.sat_calls.iter().filter(|c| c.verdict == SatResult::Sat) {
            models += 1;
            let within = c.model_makespan.is_some_and(|m| m <= c.mu + EPS_T);
            if c.model_valid != Some(true) || !within {
                bad += 1;
            }
        }
        // The returned solution is the last model; re-check it from scratch.
        if r.solution
            .plans
            .iter()
            .any(|p| check_plan(p, inst).is_err())
            || r.solution.makespan > r.final_mu() + EPS_T
        {
            bad += 1;
        }
    }
    verdict(
        models > 0 && bad == 0,
        format!("{models} models checked, {bad} exceptions"),
    )
}

fn criterion5() -> Verdict {
    let inst = figure1(0.2);
    let rdds = build_rdds(&inst, &[], SQRT2);
    let Ok(mut state) = encode_basic(&rdds, &inst, &[], SQRT2) else {
        return verdict(false, "encoding failed");
    };
    if state.solve() != SatResult::Sat {
        return verdict(false, "mutex-free encoding is not SAT");
    }
    let Ok(sol) = extract_solution(&state) else {
        return verdict(false, "extraction failed");
    };
    let collisions = validate_plans(&sol, &inst).map(|c| c.len()).unwrap_or(0);
    verdict(
        collisions > 0,
        format!("SAT at mu=1.414214, {collisions} collision(s) in the extracted plans"),
    )
}

/// Every assignment of `n` variables, 64 at a time; true if some
/// assignment satisfies all clauses.
fn brute_force_sat(n: u32, clauses: &[Vec<Lit>]) -> bool {
    let words = (1u64 << n).div_ceil(64);
    let valid_mask = if n >= 6 {
        u64::MAX
    } else {
        (1u64 << (1u64 << n)) - 1
    };
    let lane_patterns: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    for w in 0..words {
        // bit b of word w is assignment number w*64 + b; variable v is bit v-1
        let value = |v: u32| -> u64 {
            let bit = v - 1;
            if bit < 6 {
                lane_patterns[bit as usize]
            } else if (w >> (bit - 6)) & 1 == 1 {
                u64::MAX
            } else {
                0
            }
        };
        let mut all = valid_mask;
        for c in clauses {
            let mut any = 0u64;
            for &l in c {
                let x = value(l.var());
                any |= if l.is_positive() { x } else { !x };
            }
            all &= any;
            if all == 0 {
                break;
            }
        }
        if all != 0 {
            return true;
        }
    }
    false
}

fn pigeonhole(pigeons: u32, holes: u32) -> (u32, Vec<Vec<Lit>>) {
    let var = |p: u32, h: u32| p * holes + h + 1;
    let mut clauses: Vec<Vec<Lit>> = (0..pigeons)
        .map(|p| (0..holes).map(|h| Lit::pos(var(p, h))).collect())
        .collect();
    for h in 0..holes {
        for p in 0..pigeons {
            for q in p + 1..pigeons {
                clauses.push(vec![Lit::neg(var(p, h)), Lit::neg(var(q, h))]);
            }
        }
    }
    (pigeons * holes, clauses)
}

fn solve_cnf(n: u32, clauses: &[Vec<Lit>]) -> (SatResult, bool) {
    let mut s = Solver::new();
    for _ in 0..n {
        s.new_var();
    }
    for c in clauses {
        s.add_clause(c).expect("variables allocated");
    }
    let r = s.solve();
    let model_ok = r != SatResult::Sat || clauses.iter().all(|c| c.iter().any(|&l| s.lit_true(l)));
    (r, model_ok)
}

fn criterion6() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases: Vec<(u32, Vec<Vec<Lit>>)> = (0..200)
        .map(|_| {
            let n = rng.gen_range(3..=20u32);
            let m = (4.26 * n as f64 * rng.gen_range(0.7..1.3)).round() as usize;
            let clauses = (0..m)
                .map(|_| {
                    (0..3)
                        .map(|_| Lit::new(rng.gen_range(1..=n), rng.gen_bool(0.5)))
                        .collect()
                })
                .collect();
            (n, clauses)
        })
        .collect();
    cases.push(pigeonhole(3, 2));
    let (mut sat, mut mismatches, mut bad_models) = (0, 0, 0);
    for (n, clauses) in &cases {
        let expected = brute_force_sat(*n, clauses);
        let (r, model_ok) = solve_cnf(*n, clauses);
        let got = match r {
            SatResult::Sat => Some(true),
            SatResult::Unsat => Some(false),
            SatResult::Unknown => None,
        };
        if got != Some(expected) {
            mismatches += 1;
        }
        if !model_ok {
            bad_models += 1;
        }
        sat += expected as usize;
    }
    let pigeon_unsat = solve_cnf(6, &pigeonhole(3, 2).1).0 == SatResult::Unsat;
    let elapsed = started.elapsed();
    verdict(
        mismatches == 0 && bad_models == 0 && pigeon_unsat && elapsed < Duration::from_secs(30),
        format!(
            "{} formulas ({sat} SAT), {mismatches} verdict mismatches, {bad_models} bad models, {:.2}s",
            cases.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
}

fn criterion7() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_mapfr");
    let data = data_dir();
    let map = data.join("empty-16-16.map");
    let scens = data.join("scens");
    let scen = scens.join("empty-16-16-random-1.scen");
    let mut details = Vec::new();
    let mut ok = true;
    for algo in ["smtcbs", "ccbs"] {
        let started = Instant::now();
        let out = Command::new(exe)
            .args([
                "solve",
                "--neighborhood",
                "3",
                "--agents",
                "5",
                "--timeout",
                "120",
                "--algo",
                algo,
            ])
            .arg("--map")
            .arg(&map)
            .arg("--scen")
            .arg(&scen)
            .output()
            .expect("run mapfr");
        let elapsed = started.elapsed();
        let solved = out.status.code() == Some(0) && elapsed < Duration::from_secs(120);
        ok &= solved;
        details.push(format!(
            "{algo} {} {:.2}s",
            if solved { "solved" } else { "failed" },
            elapsed.as_secs_f64()
        ));
    }
    let dir = tempfile::tempdir().expect("temp dir");
    let csv_path = dir.path().join("bench.csv");
    let status = Command::new(exe)
        .args([
            "bench",
            "--neighborhood",
            "3",
            "--agents-min",
            "5",
            "--agents-max",
            "5",
        ])
        .args(["--algos", "smtcbs,ccbs", "--timeout", "120"])
        .arg("--map")
        .arg(&map)
        .arg("--scens")
        .arg(&scens)
        .arg("--out")
        .arg(&csv_path)
        .output()
        .expect("run mapfr bench")
        .status;
    let text = std::fs::read_to_string(&csv_path).unwrap_or_default();
    let rows = read_csv(text.as_bytes());
    let well_formed = status.code() == Some(0)
        && text.lines().next() == Some(CSV_HEADER)
        && rows.as_ref().is_ok_and(|rows| {
            rows.len() == 4
                && rows.iter().all(|r| r.outcome == Outcome::Solved)
                && success_rates(rows)
                    .values()
                    .all(|per| per.values().all(|t| t.rate() == 1.0))
        });
    ok &= well_formed;
    details.push(format!(
        "bench CSV {}",
        if well_formed {
            "well-formed"
        } else {
            "malformed"
        }
    ));
    verdict(ok, details.join(", "))
}

fn flatten(pairs: &[ConstraintPair]) -> Vec<Constraint> {
    pairs.iter().flat_map(|p| [p.first, p.second]).collect()
}

/// Replays the SMT-CBS loop on the Figure-1 instance; at every state the
/// incrementally grown encoding and a fresh one must agree.
fn criterion8() -> Verdict {
    let inst = figure1(0.2);
    let Ok(mut mu) = initial_makespan(&inst) else {
        return verdict(false, "no initial makespan");
    };
    let mut pairs: Vec<ConstraintPair> = Vec::new();
    let (mut states, mut mismatches) = (0, 0);
    'bounds: for _ in 0..50 {
        let mut rdds = build_rdds(&inst, &flatten(&pairs), mu);
        let mut state = encode_basic(&rdds, &inst, &pairs, mu).expect("encode");
        loop {
            let incremental = state.solve();
            let scratch = encode_basic(&build_rdds(&inst, &flatten(&pairs), mu), &inst, &pairs, mu)
                .expect("encode")
                .solve();
            states += 1;
            mismatches += (incremental != scratch) as usize;
            if incremental != SatResult::Sat {
                match next_makespan(&rdds, mu) {
                    Ok(next) => {
                        mu = next;
                        continue 'bounds;
                    }
                    Err(_) => break 'bounds,
                }
            }
            let sol = extract_solution(&state).expect("extract");
            let collisions = validate_plans(&sol, &inst).expect("validate");
            if collisions.is_empty() {
                break 'bounds;
            }
            for c in &collisions {
                let (first, second) = collision_constraints(c, &inst).expect("constraints");
                let mutex = (
                    EventKey::of_event(&c.event_i),
                    EventKey::of_event(&c.event_j),
                );
                add_mutex(&mut state, mutex.0, mutex.1).expect("mutex");
                pairs.push(ConstraintPair {
                    first,
                    second,
                    mutex,
                });
            }
            rdds = build_rdds(&inst, &flatten(&pairs), mu);
            augment_basic(&mut state, &rdds, &pairs).expect("augment");
        }
    }
    verdict(
        states >= 2 && mismatches == 0,
        format!("{states} states compared, {mismatches} mismatches"),
    )
}

#[test]
fn acceptance_criteria() {
    let mut failures = Vec::new();
    report(1, &criterion1(), &mut failures);
    report(2, &criterion2(), &mut failures);
    let corpus = criterion3();
    report(3, &corpus.verdict, &mut failures);
    report(4, &criterion4(&corpus), &mut failures);
    report(5, &criterion5(), &mut failures);
    report(6, &criterion6(), &mut failures);
    report(7, &criterion7(), &mut failures);
    report(8, &criterion8(), &mut failures);
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
