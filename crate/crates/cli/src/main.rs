use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cirl_core::domains::{resolve_game_spec, GameSpec, PRESET_HELP};
use cirl_core::eval::{
    exact_outcome, monte_carlo, run_experiment, ExperimentConfig, HumanBehavior, SolverKind, DEFAULT_ENUMERATION_CAP,
};
use cirl_core::exact::{adapted_value_iteration, reduced_pomdp_vi, ExactConfig, DEFAULT_BYTE_BUDGET};
use cirl_core::irl::irl_pipeline;
use cirl_core::pbvi::{pbvi_solve, Budget, PbviConfig, PbviVariant};
use cirl_core::policy_file::{load_policy, save_policy, PolicyBody, PolicyFile};
use cirl_core::pomcp::{Pomcp, PomcpConfig, PomcpVariant};
use cirl_core::{CirlError, CirlGame, HumanModel};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cirl", version, about = "Solve, evaluate and serve CIRL games")]
struct Cli {
    /// Worker threads for parallel solvers (default: all cores).
    #[arg(long, global = true, env = "CIRL_THREADS")]
    threads: Option<usize>,
    /// Output format for results and errors.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    Vi,
    ViBaseline,
    Pbvi,
    PbviBaseline,
    Pomcp,
    PomcpBaseline,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HumanKind {
    /// Best-responds to the robot's plan through her model.
    Pedagogic,
    /// Demonstrates as if alone, through her model.
    Demonstrator,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a game and write a policy file.
    Solve {
        #[arg(long, help = format!("spec file or preset: {PRESET_HELP}"))]
        game: String,
        #[arg(long, value_enum)]
        solver: Solver,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Human model the robot plans against (overrides the spec).
        #[arg(long)]
        human_model: Option<HumanModel>,
        /// Plan budget for exact solvers, in bytes.
        #[arg(long, default_value_t = DEFAULT_BYTE_BUDGET)]
        byte_budget: u64,
        /// PBVI expansion rounds.
        #[arg(long, default_value_t = 8)]
        rounds: usize,
        /// POMCP simulations per move.
        #[arg(long, default_value_t = 30_000)]
        simulations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment suite from a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Evaluate a policy file against a simulated human.
    Eval {
        #[arg(long)]
        game: String,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value = "rational")]
        human_model: HumanModel,
        #[arg(long, value_enum, default_value_t = HumanKind::Pedagogic)]
        human: HumanKind,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the IRL baseline (demonstrator + robot) and write its policy.
    Irl {
        #[arg(long)]
        game: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BYTE_BUDGET)]
        byte_budget: u64,
    },
    /// Start the session service.
    Serve {
        #[arg(long, env = "CIRL_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "CIRL_DATA_DIR", default_value = "cirl-data")]
        data_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Check game specs, policy files or experiment configs.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn load_game(arg: &str, model: Option<&HumanModel>) -> Result<CirlGame> {
    let mut spec = resolve_game_spec(arg)?;
    if let Some(m) = model {
        spec = spec.with_human_model(m.clone());
    }
    Ok(spec.build()?)
}

fn emit(format: Format, text: String, value: serde_json::Value) {
    match format {
        Format::Text => println!("{text}"),
        Format::Json => println!("{value}"),
    }
}

fn write_policy(file: &PolicyFile, out: Option<&Path>) -> Result<()> {
    if let Some(path) = out {
        save_policy(file, path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve(cli: &Cli, game: &str, solver: Solver, out: Option<&Path>, model: Option<&HumanModel>, budget: u64, rounds: usize, sims: usize, seed: u64) -> Result<()> {
    let g = load_game(game, model)?;
    let exact = ExactConfig { byte_budget: budget, ..ExactConfig::default() };
    let (kind, value, body, elapsed) = match solver {
        Solver::Vi | Solver::ViBaseline => {
            let (kind, sol) = if solver == Solver::Vi {
                (SolverKind::Vi, adapted_value_iteration(&g, &exact)?)
            } else {
                (SolverKind::ViBaseline, reduced_pomdp_vi(&g, &exact)?)
            };
            (kind, Some(sol.value), PolicyBody::Plan { graph: sol.policy }, sol.elapsed)
        }
        Solver::Pbvi | Solver::PbviBaseline => {
            let (kind, variant) = if solver == Solver::Pbvi {
                (SolverKind::Pbvi, PbviVariant::Adapted)
            } else {
                (SolverKind::PbviBaseline, PbviVariant::Baseline)
            };
            let sol = pbvi_solve(&g, &PbviConfig::new(variant, Budget::Expansions(rounds), seed))?;
            (kind, Some(sol.value), PolicyBody::Plan { graph: sol.policy }, sol.elapsed)
        }
        Solver::Pomcp | Solver::PomcpBaseline => {
            let (kind, variant) = if solver == Solver::Pomcp {
                (SolverKind::Pomcp, PomcpVariant::Adapted)
            } else {
                (SolverKind::PomcpBaseline, PomcpVariant::Baseline)
            };
            let config = PomcpConfig::new(variant, sims, seed);
            let start = std::time::Instant::now();
            let mut tree = Pomcp::new(&g, config.clone())?;
            tree.search()?;
            (kind, tree.root_value(), PolicyBody::Pomcp { config }, start.elapsed())
        }
    };
    let file = PolicyFile::new(&g, kind, value, body);
    write_policy(&file, out)?;
    let shown = value.map_or("n/a".to_owned(), |v| format!("{v}"));
    emit(
        cli.format,
        shown,
        json!({"status": "ok", "game": g.name(), "solver": kind.name(), "value": value, "elapsed_s": elapsed.as_secs_f64()}),
    );
    eprintln!("{} {} solved in {:.3}s", g.name(), kind.name(), elapsed.as_secs_f64());
    Ok(())
}

fn eval(cli: &Cli, game: &str, policy: &Path, model: &HumanModel, human: HumanKind, episodes: usize, seed: u64) -> Result<()> {
    let file = load_policy(policy).with_context(|| format!("reading {}", policy.display()))?;
    let g = load_game(game, None)?;
    file.check_game(&g)?;
    let behavior = match human {
        HumanKind::Pedagogic => HumanBehavior::Pedagogic(model.clone()),
        HumanKind::Demonstrator => HumanBehavior::demonstrator(&g, model)?,
    };
    let robot = file.robot();
    let mc = monte_carlo(&g, &robot, &behavior, episodes, seed)?;
    let exact = match exact_outcome(&g, &robot, &behavior, DEFAULT_ENUMERATION_CAP) {
        Ok(o) => Some(o),
        Err(e) if e.is_resource() || matches!(e, CirlError::InvalidArgument(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mut text = format!(
        "success {:.4} ± {:.4}  return {:.4} ± {:.4}  ({} episodes)",
        mc.success_rate, mc.success_se, mc.mean_return, mc.std_return, mc.episodes
    );
    if let Some(o) = &exact {
        text.push_str(&format!("\nexact success {:.6}  exact return {:.6}", o.success, o.expected_return));
    }
    emit(
        cli.format,
        text,
        json!({
            "status": "ok",
            "episodes": mc.episodes,
            "success_rate": mc.success_rate,
            "success_se": mc.success_se,
            "mean_return": mc.mean_return,
            "std_return": mc.std_return,
            "errors": mc.errors,
            "exact_success": exact.map(|o| o.success),
            "exact_return": exact.map(|o| o.expected_return),
        }),
    );
    Ok(())
}

fn validate(cli: &Cli, files: &[PathBuf]) -> Result<()> {
    for path in files {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CirlError::Parse(format!("{}: {e}", path.display())))?;
        let what = if value.get("policy").is_some() {
            PolicyFile::from_json(&text)?;
            "policy"
        } else if value.get("suite").is_some() {
            let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| CirlError::Parse(e.to_string()))?;
            cfg.validate()?;
            "experiment"
        } else {
            GameSpec::from_json(&text)?.build()?;
            "game"
        };
        emit(cli.format, format!("{}: valid {what}", path.display()), json!({"status": "ok", "file": path, "kind": what}));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
    }
    match &cli.command {
        Command::Solve { game, solver, out, human_model, byte_budget, rounds, simulations, seed } => solve(
            cli,
            game,
            *solver,
            out.as_deref(),
            human_model.as_ref(),
            *byte_budget,
            *rounds,
            *simulations,
            *seed,
        ),
        Command::Bench { config, output_dir } => {
            let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| CirlError::Parse(e.to_string()))?;
            if output_dir.is_some() {
                cfg.output_dir = output_dir.clone();
            }
            let rows = run_experiment(&cfg)?;
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string(&rows)?),
                Format::Text => {
                    let mut out = Vec::new();
                    cirl_core::eval::write_csv(&rows, &mut out)?;
                    print!("{}", String::from_utf8_lossy(&out));
                }
            }
            Ok(())
        }
        Command::Eval { game, policy, human_model, human, episodes, seed } => {
            eval(cli, game, policy, human_model, *human, *episodes, *seed)
        }
        Command::Irl { game, out, byte_budget } => {
            let g = load_game(game, None)?;
            let sol = irl_pipeline(&g, &ExactConfig { byte_budget: *byte_budget, ..ExactConfig::default() })?;
            let value = sol.robot.value;
            let file = PolicyFile::new(&g, SolverKind::Irl, Some(value), PolicyBody::Irl { graph: sol.robot.policy, human: sol.human });
            write_policy(&file, out.as_deref())?;
            emit(cli.format, format!("{value}"), json!({"status": "ok", "game": g.name(), "solver": "irl", "value": value}));
            Ok(())
        }
        Command::Serve { port, data_dir, host } => {
            let addr = SocketAddr::new(*host, *port);
            eprintln!("listening on http://{addr} (data in {})", data_dir.display());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(cirl_service::serve(addr, data_dir))?;
            Ok(())
        }
        Command::Validate { files } => validate(cli, files),
    }
}

/// 2 for bad input, 3 for resource caps, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CirlError>() {
        Some(e) if e.is_resource() => 3,
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            match cli.format {
                Format::Json => println!("{}", json!({"status": "error", "exit_code": code, "message": format!("{err:#}")})),
                Format::Text => eprintln!("error: {err:#}"),
            }
            ExitCode::from(code)
        }
    }
}
