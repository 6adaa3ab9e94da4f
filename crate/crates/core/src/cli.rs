//! The `mapf-ltm` command line.

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use crate::anytime::{solve_oneshot, Mode, PeStatus, RestartStrategy, SolveConfig};
use crate::grid::parse_map;
use crate::instance::{parse_scen, Solution};
use crate::report::{emit_reports, solution_coords, InstanceInfo, ReportTargets, RunReport, SCHEMA_VERSION};
use crate::traffic::Ltm;
use crate::validate::{sol_lower_bound, sum_of_loss, validate_solution, LossConvention};

pub const EXIT_SOLVED: i32 = 0;
pub const EXIT_UNSOLVED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Oneshot,
    Pe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossArg {
    FromVertex,
    BothEndpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RestartArg {
    Root,
    NearGoal,
    Resume,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn nonneg_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
        _ => Err(format!("`{s}` is not a non-negative number")),
    }
}

/// Anytime LaCAM* with a lightweight traffic map.
#[derive(Debug, Parser)]
#[command(name = "mapf-ltm", version)]
struct Args {
    /// MovingAI .map file
    #[arg(long)]
    map: PathBuf,
    /// MovingAI .scen file
    #[arg(long)]
    scen: PathBuf,
    /// Number of agents taken from the scenario
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    agents: u64,
    #[arg(long, value_enum, default_value = "oneshot")]
    mode: ModeArg,
    /// One-shot time limit in seconds
    #[arg(long, default_value = "30", value_parser = positive_f64)]
    time_limit: f64,
    /// PE: seconds per action
    #[arg(long, default_value = "0.1", value_parser = positive_f64)]
    exec_time: f64,
    /// PE: actions committed per window
    #[arg(long, default_value = "5", value_parser = clap::value_parser!(u64).range(1..))]
    commit: u64,
    #[arg(long, default_value = "10", value_parser = clap::value_parser!(u64).range(1..))]
    budget_factor: u64,
    #[arg(long, default_value = "0", value_parser = nonneg_f64)]
    w_lb: f64,
    #[arg(long, default_value = "10", value_parser = positive_f64)]
    w_ub: f64,
    #[arg(long, default_value = "0")]
    seed: u64,
    /// Plain LaCAM* baseline: uniform traffic map, no budgets
    #[arg(long)]
    disable_ltm: bool,
    /// Restart strategy for runs after the first
    #[arg(long, value_enum)]
    restart: Option<RestartArg>,
    /// PE: give up after this many seconds
    #[arg(long, value_parser = positive_f64)]
    max_wall: Option<f64>,
    /// Sum-of-loss convention for reported metrics; the solver always optimizes from-vertex
    #[arg(long, value_enum, default_value = "from-vertex")]
    loss: LossArg,
    /// JSON report
    #[arg(long)]
    output: Option<PathBuf>,
    /// Coverage CSV
    #[arg(long)]
    coverage: Option<PathBuf>,
    /// Final traffic map CSV
    #[arg(long)]
    dump_ltm: Option<PathBuf>,
    /// Paths file, one line per agent
    #[arg(long)]
    paths: Option<PathBuf>,
}

fn init_logging() {
    let level = match std::env::var("LTM_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        Ok("off") | Err(_) => log::LevelFilter::Off,
        Ok(_) => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).try_init();
}

fn read(path: &PathBuf, flag: &str) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{flag} {}: {e}", path.display()))
}

/// Runs the command line and returns the process exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_SOLVED };
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    match run(&args) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
    }
}

fn run(args: &Args) -> Result<i32, String> {
    let started = Instant::now();
    if args.w_lb >= args.w_ub {
        return Err(format!("--w-lb ({}) must be below --w-ub ({})", args.w_lb, args.w_ub));
    }
    let grid = parse_map(&read(&args.map, "--map")?).map_err(|e| format!("--map {}: {e}", args.map.display()))?;
    let grid = Arc::new(grid);
    let instance = parse_scen(&read(&args.scen, "--scen")?, args.agents as usize, grid.clone())
        .map_err(|e| format!("--scen {}: {e}", args.scen.display()))?;

    let cfg = SolveConfig {
        mode: match args.mode {
            ModeArg::Oneshot => Mode::Oneshot,
            ModeArg::Pe => Mode::Pe,
        },
        time_limit: args.time_limit,
        exec_time: args.exec_time,
        commit: args.commit as usize,
        budget_factor: args.budget_factor,
        w_lb: args.w_lb,
        w_ub: args.w_ub,
        seed: args.seed,
        disable_ltm: args.disable_ltm,
        restart: args.restart.map(|r| match r {
            RestartArg::Root => RestartStrategy::Root,
            RestartArg::NearGoal => RestartStrategy::NearGoal,
            RestartArg::Resume => RestartStrategy::Resume,
        }),
        max_wall: args.max_wall,
        first_window_generation_cap: None,
    };
    cfg.validate().map_err(|e| e.to_string())?;
    log::info!("{} agents, {} vertices, mode {:?}", instance.num_agents(), grid.num_vertices(), cfg.mode);

    let (solution, events, iterations, windows, stop, ltm): (Option<Solution>, _, _, _, String, Ltm) = match cfg.mode {
        Mode::Oneshot => {
            let r = solve_oneshot(&instance, &cfg).map_err(|e| e.to_string())?;
            let stop = serde_json::to_value(r.stop).unwrap().as_str().unwrap().to_string();
            (r.solution, r.events, r.iterations, Vec::new(), stop, r.ltm)
        }
        Mode::Pe => {
            let mut session = crate::anytime::PeSession::new(&instance, &cfg).map_err(|e| e.to_string())?;
            while session.step_window() == PeStatus::Running {}
            let ltm = session.ltm().clone();
            let trace = session.finish();
            let stop = serde_json::to_value(trace.status).unwrap().as_str().unwrap().to_string();
            let sol = (trace.status == PeStatus::Solved).then(|| trace.solution());
            (sol, Vec::new(), Vec::new(), trace.windows, stop, ltm)
        }
    };

    let convention = match args.loss {
        LossArg::FromVertex => LossConvention::FromVertex,
        LossArg::BothEndpoints => LossConvention::BothEndpoints,
    };
    let validation = solution.as_ref().map(|s| validate_solution(&instance, s));
    let metrics = solution
        .as_ref()
        .and_then(|s| sum_of_loss(&instance, s, convention).ok());
    let ok = validation.as_ref().is_some_and(|v| v.ok);
    let name = |p: &PathBuf| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        instance: InstanceInfo { map: name(&args.map), scen: name(&args.scen), agents: instance.num_agents() },
        config: cfg.clone(),
        seed: cfg.seed,
        status: if ok { "solved" } else { "unsolved" }.to_string(),
        stop,
        events,
        iterations,
        windows,
        metrics,
        validation,
        solution: solution.as_ref().map(|s| solution_coords(&grid, s)),
        ltm_dump: args.dump_ltm.as_ref().map(|p| p.display().to_string()),
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    let targets = ReportTargets {
        output: args.output.clone(),
        coverage: args.coverage.clone(),
        dump_ltm: args.dump_ltm.clone(),
        paths: args.paths.clone(),
    };
    emit_reports(&report, &grid, &ltm, sol_lower_bound(&instance), &targets).map_err(|e| e.to_string())?;
    match &report.metrics {
        Some(m) => println!("sol={} lb={} ratio={:.4} makespan={}", m.sol, m.sol_lower_bound, m.sol_ratio, m.makespan),
        None => println!("unsolved ({})", report.stop),
    }
    Ok(if ok { EXIT_SOLVED } else { EXIT_UNSOLVED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_agents_is_an_input_error() {
        assert_eq!(run_cli(["mapf-ltm", "--map", "a.map", "--scen", "a.scen", "--agents", "0"]), EXIT_INPUT);
    }

    #[test]
    fn missing_map_is_an_input_error() {
        let code = run_cli(["mapf-ltm", "--map", "/nonexistent.map", "--scen", "x.scen", "--agents", "1"]);
        assert_eq!(code, EXIT_INPUT);
    }

    #[test]
    fn flag_errors_name_the_flag() {
        let e = Args::try_parse_from(["mapf-ltm", "--map", "a", "--scen", "b", "--agents", "0"]).unwrap_err();
        assert!(e.to_string().contains("--agents"), "{e}");
        let e = Args::try_parse_from(["mapf-ltm", "--map", "a", "--scen", "b", "--agents", "1", "--exec-time", "0"])
            .unwrap_err();
        assert!(e.to_string().contains("--exec-time"), "{e}");
    }
}
