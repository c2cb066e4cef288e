use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mapfr::io::grid::{DEFAULT_RADIUS, DEFAULT_SPEED};
use mapfr::io::text::{parse_solution, write_solution};
use mapfr::report::run_log_tsv;
use mapfr_cli::bench::{self, SweepConfig};
use mapfr_cli::{
    ensure_positive, exit, load_grid_instance, load_instance, read_file, run_solver,
    solve_exit_code, summary_line, validate, Algo,
};

#[derive(Parser)]
#[command(
    name = "mapfr",
    version,
    about = "Makespan-optimal multi-agent path finding with continuous time"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance.
    Solve(SolveArgs),
    /// Check a solution file against an instance.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Run a benchmark sweep over scenario files.
    Bench(BenchArgs),
    /// Turn a benchmark CSV into tab-separated plot series.
    Plotdata {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GridArgs {
    /// Neighborhood exponent K (2^K move directions).
    #[arg(long, default_value_t = 3)]
    neighborhood: u32,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    #[arg(long, default_value_t = DEFAULT_SPEED)]
    speed: f64,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance in the VERTICES/EDGES/AGENTS text format.
    #[arg(long, conflicts_with_all = ["map", "scen"], required_unless_present = "map")]
    instance: Option<PathBuf>,
    #[arg(long, requires = "scen")]
    map: Option<PathBuf>,
    #[arg(long, requires = "map")]
    scen: Option<PathBuf>,
    /// Number of scenario entries to use as agents.
    #[arg(long, default_value_t = 1)]
    agents: usize,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_enum, default_value_t = Algo::Smtcbs)]
    algo: Algo,
    /// Seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    /// Solution file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run log (tab-separated) to write.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    map: PathBuf,
    /// Directory of .scen files.
    #[arg(long)]
    scens: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1)]
    agents_min: usize,
    #[arg(long)]
    agents_max: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Algo::Smtcbs, Algo::Ccbs])]
    algos: Vec<Algo>,
    /// Seconds per run.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    /// CSV file to write.
    #[arg(long)]
    out: PathBuf,
    /// Parallel workers.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Re-validate the solution of every n-th run (0 disables).
    #[arg(long, default_value_t = 10)]
    verify_every: usize,
}

fn timeout_of(secs: f64) -> Result<Duration> {
    ensure_positive("timeout", secs)?;
    Duration::try_from_secs_f64(secs).context("--timeout out of range")
}

fn cmd_solve(a: SolveArgs) -> Result<i32> {
    ensure_positive("radius", a.grid.radius)?;
    ensure_positive("speed", a.grid.speed)?;
    let timeout = timeout_of(a.timeout)?;
    let instance = match (&a.instance, &a.map, &a.scen) {
        (Some(p), _, _) => load_instance(p)?,
        (None, Some(m), Some(s)) => load_grid_instance(
            m,
            s,
            a.agents,
            a.grid.neighborhood,
            a.grid.radius,
            a.grid.speed,
        )?,
        _ => bail!("give --instance or both --map and --scen"),
    };
    let run = match run_solver(&instance, a.algo, timeout, a.seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return Ok(solve_exit_code(&e));
        }
    };
    if let Some(p) = &a.out {
        std::fs::write(p, write_solution(&run.solution))
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    if let Some(p) = &a.log {
        std::fs::write(p, run_log_tsv(&run.log))
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    println!("{}", summary_line(run.solution.makespan, run.runtime));
    Ok(exit::SOLVED)
}

fn cmd_validate(instance: PathBuf, solution: PathBuf) -> Result<i32> {
    let instance = load_instance(&instance)?;
    let plans = parse_solution(&read_file(&solution)?)
        .with_context(|| format!("{}", solution.display()))?;
    let report = validate(&instance, plans)?;
    print!("{}", report.text);
    Ok(if report.ok {
        exit::SOLVED
    } else {
        exit::INVALID
    })
}

fn cmd_bench(a: BenchArgs) -> Result<i32> {
    ensure_positive("radius", a.grid.radius)?;
    ensure_positive("speed", a.grid.speed)?;
    if a.agents_min == 0 || a.agents_min > a.agents_max {
        bail!("need 1 <= --agents-min <= --agents-max");
    }
    if a.algos.is_empty() {
        bail!("--algos is empty");
    }
    let cfg = SweepConfig {
        exe: std::env::current_exe().context("cannot locate the mapfr executable")?,
        map: a.map,
        scens: bench::scenario_files(&a.scens)?,
        neighborhood: a.grid.neighborhood,
        agents_min: a.agents_min,
        agents_max: a.agents_max,
        algos: a.algos,
        timeout: timeout_of(a.timeout)?,
        radius: a.grid.radius,
        speed: a.grid.speed,
        seed: a.seed,
        jobs: a.jobs,
        verify_every: a.verify_every,
    };
    // Fail on bad inputs before launching any worker.
    load_grid_instance(
        &cfg.map,
        &cfg.scens[0],
        1,
        cfg.neighborhood,
        cfg.radius,
        cfg.speed,
    )?;
    println!(
        "radius {} speed {} timeout_s {}",
        cfg.radius,
        cfg.speed,
        cfg.timeout.as_secs_f64()
    );
    let rows = bench::run_sweep(&cfg, &|r| {
        eprintln!(
            "{} agents {} scenario {} {:?} {:.3}s",
            r.algo, r.agents, r.scenario, r.outcome, r.runtime_s
        )
    });
    let file = std::fs::File::create(&a.out)
        .with_context(|| format!("cannot write {}", a.out.display()))?;
    bench::write_csv(&rows, file)?;
    print!("{}", bench::summary_text(&rows));
    Ok(exit::SOLVED)
}

fn cmd_plotdata(csv: PathBuf, out: PathBuf) -> Result<i32> {
    let file =
        std::fs::File::open(&csv).with_context(|| format!("cannot read {}", csv.display()))?;
    let rows = bench::read_csv(file).with_context(|| format!("{}", csv.display()))?;
    let files = bench::plot_series(&rows)?;
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    for (name, content) in files {
        let p = out.join(&name);
        std::fs::write(&p, content).with_context(|| format!("cannot write {}", p.display()))?;
        println!("{}", p.display());
    }
    Ok(exit::SOLVED)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::SOLVED
            };
            return ExitCode::from(code as u8);
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Validate { instance, solution } => cmd_validate(instance, solution),
        Command::Bench(a) => cmd_bench(a),
        Command::Plotdata { csv, out } => cmd_plotdata(csv, out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::USAGE as u8)
        }
    }
}
