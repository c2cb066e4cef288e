//! Benchmark sweeps: every run is a separate `mapfr solve` process so a
//! crash or a runaway solver cannot take the sweep down.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::{exit, load_grid_instance, parse_summary_line, read_file, validate, Algo};
use mapfr::io::text::parse_solution;

pub const CSV_HEADER: &str = "benchmark,K,agents,scenario,algo,outcome,runtime_s,makespan";

/// Extra wall-clock allowed past the timeout before a worker is killed.
pub const KILL_GRACE: Duration = Duration::from_secs(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Solved,
    Timeout,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub benchmark: String,
    #[serde(rename = "K")]
    pub k: u32,
    pub agents: usize,
    pub scenario: usize,
    pub algo: Algo,
    pub outcome: Outcome,
    pub runtime_s: f64,
    pub makespan: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// The `mapfr` executable used for workers.
    pub exe: PathBuf,
    pub map: PathBuf,
    /// Scenario files; a row's `scenario` is the 1-based position here.
    pub scens: Vec<PathBuf>,
    pub neighborhood: u32,
    pub agents_min: usize,
    pub agents_max: usize,
    pub algos: Vec<Algo>,
    pub timeout: Duration,
    pub radius: f64,
    pub speed: f64,
    pub seed: u64,
    pub jobs: usize,
    /// Re-validate the solution of every n-th run when it is solved (0 disables).
    pub verify_every: usize,
}

struct Job {
    agents: usize,
    scenario: usize,
    algo: Algo,
}

/// Sorted `.scen` files of a directory.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scen"))
        .collect();
    out.sort();
    if out.is_empty() {
        bail!("no .scen files in {}", dir.display());
    }
    Ok(out)
}

pub fn benchmark_name(map: &Path) -> String {
    map.file_stem()
        .map_or_else(|| "map".to_string(), |s| s.to_string_lossy().into_owned())
}

fn wait_with_deadline(
    child: &mut Child,
    limit: Duration,
) -> Result<Option<std::process::ExitStatus>> {
    let started = Instant::now();
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Some(status));
        }
        if started.elapsed() > limit {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(None);
        }
        std::thread::sleep(Duration::from_millis(5));
    }
}

static TMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

fn temp_solution_path() -> PathBuf {
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("mapfr-bench-{}-{n}.sol", std::process::id()))
}

fn run_job(cfg: &SweepConfig, job: &Job, verify: bool) -> BenchRow {
    let mut row = BenchRow {
        benchmark: benchmark_name(&cfg.map),
        k: cfg.neighborhood,
        agents: job.agents,
        scenario: job.scenario,
        algo: job.algo,
        outcome: Outcome::Error,
        runtime_s: 0.0,
        makespan: None,
    };
    let scen = &cfg.scens[job.scenario - 1];
    let sol_path = verify.then(temp_solution_path);
    let mut cmd = Command::new(&cfg.exe);
    cmd.arg("solve")
        .arg("--map")
        .arg(&cfg.map)
        .arg("--scen")
        .arg(scen)
        .args(["--agents", &job.agents.to_string()])
        .args(["--neighborhood", &cfg.neighborhood.to_string()])
        .args(["--radius", &cfg.radius.to_string()])
        .args(["--speed", &cfg.speed.to_string()])
        .args(["--algo", job.algo.name()])
        .args(["--timeout", &cfg.timeout.as_secs_f64().to_string()])
        .args(["--seed", &cfg.seed.to_string()])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    if let Some(p) = &sol_path {
        cmd.arg("--out").arg(p);
    }
    let started = Instant::now();
    let Ok(mut child) = cmd.spawn() else {
        return row;
    };
    let status = wait_with_deadline(&mut child, cfg.timeout + KILL_GRACE);
    let wall = started.elapsed().as_secs_f64();
    let mut stdout = String::new();
    if let Some(mut out) = child.stdout.take() {
        let _ = out.read_to_string(&mut stdout);
    }
    row.runtime_s = wall;
    match status {
        Ok(None) => row.outcome = Outcome::Timeout,
        Ok(Some(s)) if s.code() == Some(exit::TIMEOUT) => row.outcome = Outcome::Timeout,
        Ok(Some(s)) if s.code() == Some(exit::SOLVED) => {
            if let Some((makespan, runtime)) = parse_summary_line(&stdout) {
                row.outcome = Outcome::Solved;
                row.runtime_s = runtime;
                row.makespan = Some(makespan);
            }
        }
        _ => {}
    }
    if let Some(p) = sol_path {
        if row.outcome == Outcome::Solved
            && !verify_solution(cfg, scen, job.agents, &p).unwrap_or(false)
        {
            row.outcome = Outcome::Error;
            row.makespan = None;
        }
        let _ = std::fs::remove_file(p);
    }
    row
}

fn verify_solution(cfg: &SweepConfig, scen: &Path, agents: usize, sol: &Path) -> Result<bool> {
    let instance = load_grid_instance(
        &cfg.map,
        scen,
        agents,
        cfg.neighborhood,
        cfg.radius,
        cfg.speed,
    )?;
    let plans = parse_solution(&read_file(sol)?)?;
    Ok(validate(&instance, plans)?.ok)
}

/// Runs the sweep; rows come back in (agents, scenario, algo) order
/// regardless of `jobs`. `progress` sees each row as it finishes.
pub fn run_sweep(cfg: &SweepConfig, progress: &(dyn Fn(&BenchRow) + Sync)) -> Vec<BenchRow> {
    let mut queue = VecDeque::new();
    for agents in cfg.agents_min..=cfg.agents_max {
        for scenario in 1..=cfg.scens.len() {
            for &algo in &cfg.algos {
                queue.push_back((
                    queue.len(),
                    Job {
                        agents,
                        scenario,
                        algo,
                    },
                ));
            }
        }
    }
    let total = queue.len();
    let queue = Mutex::new(queue);
    let results: Mutex<Vec<Option<BenchRow>>> = Mutex::new(vec![None; total]);
    std::thread::scope(|s| {
        for _ in 0..cfg.jobs.max(1) {
            s.spawn(|| loop {
                let Some((idx, job)) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                let verify = cfg.verify_every > 0 && idx % cfg.verify_every == 0;
                let row = run_job(cfg, &job, verify);
                progress(&row);
                results.lock().unwrap()[idx] = Some(row);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .flatten()
        .collect()
}

pub fn write_csv(rows: &[BenchRow], w: impl std::io::Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wtr.write_record(CSV_HEADER.split(','))?;
    }
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv(r: impl std::io::Read) -> Result<Vec<BenchRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        bail!("unexpected CSV header '{}'", header.join(","));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        let row: BenchRow = rec.with_context(|| format!("CSV record {}", i + 1))?;
        if (row.outcome == Outcome::Solved) != row.makespan.is_some() {
            bail!(
                "CSV record {}: makespan must be present exactly for solved runs",
                i + 1
            );
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Tally {
    pub solved: usize,
    pub total: usize,
}

impl Tally {
    pub fn rate(self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.solved as f64 / self.total as f64
        }
    }
}

pub type SeriesKey = (String, u32, Algo);

/// Solved/total per (benchmark, K, algo) and agent count.
pub fn success_rates(rows: &[BenchRow]) -> BTreeMap<SeriesKey, BTreeMap<usize, Tally>> {
    let mut out: BTreeMap<SeriesKey, BTreeMap<usize, Tally>> = BTreeMap::new();
    for r in rows {
        let t = out
            .entry((r.benchmark.clone(), r.k, r.algo))
            .or_default()
            .entry(r.agents)
            .or_default();
        t.total += 1;
        if r.outcome == Outcome::Solved {
            t.solved += 1;
        }
    }
    out
}

/// Runtimes of solved runs per algorithm, ascending.
pub fn sorted_runtimes(rows: &[BenchRow]) -> BTreeMap<Algo, Vec<f64>> {
    let mut out: BTreeMap<Algo, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.outcome == Outcome::Solved) {
        out.entry(r.algo).or_default().push(r.runtime_s);
    }
    for v in out.values_mut() {
        v.sort_by(f64::total_cmp);
    }
    out
}

pub fn summary_text(rows: &[BenchRow]) -> String {
    let mut out = String::from("benchmark\tK\talgo\tagents\tsolved\ttotal\tsuccess_rate\n");
    for ((bench, k, algo), per_agents) in success_rates(rows) {
        for (agents, t) in per_agents {
            let _ = writeln!(
                out,
                "{bench}\t{k}\t{algo}\t{agents}\t{}\t{}\t{:.3}",
                t.solved,
                t.total,
                t.rate()
            );
        }
    }
    for (algo, times) in sorted_runtimes(rows) {
        let list: Vec<String> = times.iter().map(|t| format!("{t:.3}")).collect();
        let _ = writeln!(out, "sorted runtimes {algo}: {}", list.join(" "));
    }
    out
}

/// Tab-separated plot series as (file name, contents): success rate against
/// agent count per (benchmark, K, algo), and sorted runtimes per algo.
pub fn plot_series(rows: &[BenchRow]) -> Result<Vec<(String, String)>> {
    if rows.is_empty() {
        bail!("no benchmark rows");
    }
    let mut files = Vec::new();
    for ((bench, k, algo), per_agents) in success_rates(rows) {
        let mut s = String::from("agents\tsuccess_rate\n");
        for (agents, t) in per_agents {
            let _ = writeln!(s, "{agents}\t{:.6}", t.rate());
        }
        files.push((format!("success_{bench}_K{k}_{algo}.tsv"), s));
    }
    let runtimes = sorted_runtimes(rows);
    let mut algos: Vec<Algo> = rows.iter().map(|r| r.algo).collect();
    algos.sort();
    algos.dedup();
    for algo in algos {
        let mut s = String::from("rank\truntime_s\n");
        for (i, t) in runtimes.get(&algo).into_iter().flatten().enumerate() {
            let _ = writeln!(s, "{}\t{t:.6}", i + 1);
        }
        files.push((format!("runtimes_{algo}.tsv"), s));
    }
    Ok(files)
}
