//! `lbn-mobo` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lbn_mobo::optimizer::report::{compare, report, COMPARE_FILE};
use lbn_mobo::optimizer::{resume_with, run_with, Mode, RunConfig, RunOptions, RunState};
use lbn_mobo::problems::{builtin_problems, ProblemSpec};
use lbn_mobo::Error;

const OUTPUT_ROOT_ENV: &str = "LBN_MOBO_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "lbn-mobo", version, about = "Large-batch neural multi-objective Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a new run from a config file and/or flags.
    Run(RunArgs),
    /// Continue an interrupted run.
    Resume {
        run_dir: PathBuf,
        /// Extend or shorten the number of iterations.
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Export hv_evolution.csv, pareto_front.csv and an SVG of the front.
    Report {
        run_dir: Option<PathBuf>,
        /// Output directory (defaults to the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Merge the hypervolume histories of several runs.
        #[arg(long, num_args = 2.., value_name = "RUN_DIR", conflicts_with = "run_dir")]
        compare: Option<Vec<PathBuf>>,
    },
    /// Built-in benchmark problems.
    Problems {
        #[command(subcommand)]
        action: ProblemsAction,
    },
    /// Parse and check a config file, then print it fully resolved.
    ValidateConfig { config: PathBuf },
}

#[derive(Subcommand)]
enum ProblemsAction {
    List,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// zdt1, zdt2, zdt3, dtlz1 or dtlz4.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Number of objectives (DTLZ only).
    #[arg(long)]
    objectives: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    init: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory; defaults to $LBN_MOBO_OUTPUT_ROOT/<problem>-<mode>-s<seed>.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// NSGA-II generations per acquisition seed.
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Skip retraining the surrogate after the last batch.
    #[arg(long)]
    no_final_train: bool,
    #[arg(long)]
    quiet: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::Config(_) | Error::Load { .. } => 2,
        _ => 1,
    }
}

fn problem_from_flags(name: &str, dim: Option<usize>, objectives: Option<usize>) -> Result<ProblemSpec, Error> {
    let variant = |prefix: &str| name[prefix.len()..].parse::<u8>().ok();
    if name.starts_with("zdt") {
        let v = variant("zdt").ok_or_else(|| Error::Config(format!("unknown problem {name:?}")))?;
        let default_dim = if v == 3 { 6 } else { 30 };
        Ok(ProblemSpec::Zdt {
            variant: v,
            dim: dim.unwrap_or(default_dim),
        })
    } else if name.starts_with("dtlz") {
        let v = variant("dtlz").ok_or_else(|| Error::Config(format!("unknown problem {name:?}")))?;
        Ok(ProblemSpec::Dtlz {
            variant: v,
            dim: dim.unwrap_or(6),
            objectives: objectives.unwrap_or(3),
        })
    } else {
        Err(Error::Config(format!(
            "unknown problem {name:?}; see `lbn-mobo problems list`"
        )))
    }
}

fn build_config(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let name = args
                .problem
                .as_deref()
                .ok_or_else(|| Error::Config("either --config or --problem is required".into()))?;
            let problem = problem_from_flags(name, args.dim, args.objectives)?;
            RunConfig::new(problem, 1000, 10, PathBuf::new())
        }
    };
    if args.config.is_some() {
        if let Some(name) = &args.problem {
            cfg.problem = problem_from_flags(name, args.dim, args.objectives)?;
        } else if args.dim.is_some() || args.objectives.is_some() {
            match &mut cfg.problem {
                ProblemSpec::Zdt { dim, .. } => *dim = args.dim.unwrap_or(*dim),
                ProblemSpec::Dtlz { dim, objectives, .. } => {
                    *dim = args.dim.unwrap_or(*dim);
                    *objectives = args.objectives.unwrap_or(*objectives);
                }
                ProblemSpec::External { .. } => {
                    return Err(Error::Config("--dim/--objectives do not apply to external problems".into()))
                }
            }
        }
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(b) = args.batch {
        cfg.batch_size = b;
    }
    if let Some(q) = args.iters {
        cfg.iterations = q;
    }
    if args.init.is_some() {
        cfg.init_size = args.init;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if let Some(g) = args.generations {
        cfg.acquisition.nsga.generations = g;
    }
    if let Some(e) = args.epochs {
        cfg.surrogate.train.epochs = e;
    }
    if args.no_final_train {
        cfg.train_final_surrogate = false;
    }
    if let Some(o) = &args.output {
        cfg.output_dir = o.clone();
    } else if cfg.output_dir.as_os_str().is_empty() {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        cfg.output_dir = root.join(format!("{}-{}-s{}", cfg.problem.name(), cfg.mode, cfg.master_seed));
    }
    Ok(cfg)
}

fn print_summary(state: &RunState) {
    println!("{:>9} {:>14} {:>12} {:>10} {:>12}", "iteration", "hypervolume", "std_error", "front", "dataset");
    for m in &state.history {
        println!(
            "{:>9} {:>14.6} {:>12.3e} {:>10} {:>12}",
            m.iteration, m.hv_estimate, m.hv_std_error, m.front_size, m.dataset_size
        );
    }
    println!("snapshots in {}", state.config.output_dir.display());
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let cfg = build_config(&args)?;
    let opts = RunOptions {
        stop_after: None,
        progress: !args.quiet,
    };
    let state = run_with(&cfg, &opts).map_err(|e| resumable(e, &cfg.output_dir))?;
    print_summary(&state);
    Ok(())
}

fn resumable(e: Error, dir: &Path) -> Error {
    if exit_code(&e) == 1 {
        eprintln!(
            "completed iterations are saved; continue with `lbn-mobo resume {}`",
            dir.display()
        );
    }
    e
}

fn cmd_resume(run_dir: PathBuf, iters: Option<usize>, threads: Option<usize>, quiet: bool) -> Result<(), Error> {
    let replacement = if iters.is_some() || threads.is_some() {
        let mut cfg = RunConfig::load(&run_dir.join("config.toml"))?;
        if let Some(q) = iters {
            cfg.iterations = q;
        }
        if threads.is_some() {
            cfg.threads = threads;
        }
        Some(cfg)
    } else {
        None
    };
    let opts = RunOptions {
        stop_after: None,
        progress: !quiet,
    };
    let state = resume_with(&run_dir, replacement.as_ref(), &opts).map_err(|e| resumable(e, &run_dir))?;
    print_summary(&state);
    Ok(())
}

fn cmd_report(run_dir: Option<PathBuf>, out: Option<PathBuf>, runs: Option<Vec<PathBuf>>) -> Result<(), Error> {
    if let Some(runs) = runs {
        let labelled: Vec<(String, PathBuf)> = runs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let label = p
                    .file_name()
                    .map(|s| s.to_string_lossy().replace(',', "_"))
                    .unwrap_or_else(|| format!("run{i}"));
                (label, p.clone())
            })
            .collect();
        let table = compare(&labelled)?;
        let path = out.unwrap_or_else(|| PathBuf::from(COMPARE_FILE));
        std::fs::write(&path, table)?;
        println!("wrote {}", path.display());
        return Ok(());
    }
    let run_dir = run_dir.ok_or_else(|| Error::Argument("report needs a run directory or --compare".into()))?;
    let out = out.unwrap_or_else(|| run_dir.clone());
    let summary = report(&run_dir, &out)?;
    println!(
        "iterations 0..={}  final hypervolume {:.6}  front size {}",
        summary.iterations, summary.final_hv, summary.front_size
    );
    for f in summary.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_validate(path: PathBuf) -> Result<(), Error> {
    let cfg = RunConfig::load(&path)?.resolve()?;
    print!("{}", cfg.to_toml()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Resume {
            run_dir,
            iters,
            threads,
            quiet,
        } => cmd_resume(run_dir, iters, threads, quiet),
        Command::Report { run_dir, out, compare } => cmd_report(run_dir, out, compare),
        Command::Problems {
            action: ProblemsAction::List,
        } => {
            for (name, about) in builtin_problems() {
                println!("{name:<8} {about}");
            }
            Ok(())
        }
        Command::ValidateConfig { config } => cmd_validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Evaluation { stderr: Some(s), .. } = &e {
                if !s.trim().is_empty() {
                    eprintln!("evaluator stderr:\n{s}");
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
