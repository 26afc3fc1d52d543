//! Command-line frontend for the plan-to-learn pipeline.
//!
//! Exit codes: 0 success, 1 goal unsolvable, 2 missing or unreadable file,
//! 3 domain already extended, 4 resource limit exceeded, 70 any other error.

use clap::{Args, Parser, Subcommand};
use propplan_core::agent::{run, AgentConfig, AgentError, Termination};
use propplan_core::eval::{
    evaluate, generate_testsets, write_metrics_csv, write_metrics_json,
};
use propplan_core::learn::{extend, LearnError, TypePropertyPair};
use propplan_core::pddl::{parse_domain, parse_problem, print_domain};
use propplan_core::perception::ClassifierModel;
use propplan_core::planner::{
    plan_outcome, PlanOutcome, PlannerError, PlanningProblem, SearchLimits,
};
use propplan_core::sim::{generate_world, WorldConfig};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_UNSOLVABLE: u8 = 1;
const EXIT_MISSING_FILE: u8 = 2;
const EXIT_ALREADY_EXTENDED: u8 = 3;
const EXIT_RESOURCE_LIMIT: u8 = 4;
const EXIT_OTHER: u8 = 70;

#[derive(Parser)]
#[command(name = "propplan", version, about = "Plan-to-learn pipeline over a STRIPS PDDL subset")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extend a base domain with observation/exploration/training schemas
    Extend(ExtendArgs),
    /// Find a plan for a PDDL problem against a domain
    Plan(PlanArgs),
    /// Generate a simulated grid world and dump it as JSON
    GenEnv(GenEnvArgs),
    /// Run the full plan-execute-observe-replan loop
    Run(RunArgs),
    /// Evaluate trained models on fresh test sets from the world
    Eval(EvalArgs),
}

#[derive(Args)]
struct ExtendArgs {
    /// Base domain file
    #[arg(long)]
    domain: PathBuf,
    /// Type/property pair as TYPE:PROPERTY (repeatable)
    #[arg(long = "pair", required = true)]
    pairs: Vec<String>,
    /// Observations per polarity required by Sufficient_Obs
    #[arg(long, default_value_t = 50)]
    n_min: usize,
    /// Closeness predicate required by Observe
    #[arg(long, default_value = "Close_To")]
    closeness_pred: String,
    /// Output file for the extended domain (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional JSON report of what the extension did
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    problem: PathBuf,
    /// Output file for the plan, one action per line (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Search node budget
    #[arg(long, default_value_t = 1 << 20)]
    max_expansions: usize,
}

#[derive(Args)]
struct GenEnvArgs {
    /// World config (TOML, the [world] table of a run config or bare keys)
    #[arg(long)]
    config: PathBuf,
    /// Output JSON file (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Base (unextended) domain file
    #[arg(long)]
    domain: PathBuf,
    /// Run config (TOML with [agent] and [world] tables)
    #[arg(long)]
    config: PathBuf,
    /// Directory for run artifacts
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write a step-by-step trace log
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Run config (TOML with [agent] and [world] tables)
    #[arg(long)]
    config: PathBuf,
    /// Trained models (models.json from a run)
    #[arg(long)]
    models: PathBuf,
    /// Directory for metrics.csv / metrics.json
    #[arg(long)]
    out_dir: PathBuf,
    /// Seed for the evaluation walk
    #[arg(long, default_value_t = 0xdead)]
    testset_seed: u64,
    /// Random-walk steps used to collect test views
    #[arg(long, default_value_t = 400)]
    walk_steps: usize,
    /// Cap on entries per test set
    #[arg(long, default_value_t = 200)]
    cap: usize,
}

#[derive(Deserialize)]
struct RunFile {
    #[serde(default)]
    agent: AgentConfig,
    world: WorldConfig,
}

/// World config file: either a bare WorldConfig or a full run config.
#[derive(Deserialize)]
#[serde(untagged)]
enum WorldFile {
    Run(RunFile),
    Bare(WorldConfig),
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn other(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_OTHER, message: message.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure { code: EXIT_MISSING_FILE, message: e.to_string() }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure { code: EXIT_MISSING_FILE, message: format!("{}: {e}", path.display()) })
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure { code: EXIT_MISSING_FILE, message: format!("{}: {e}", p.display()) }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_pairs(specs: &[String]) -> Result<Vec<TypePropertyPair>, Failure> {
    specs
        .iter()
        .map(|s| match s.split_once(':') {
            Some((t, p)) if !t.is_empty() && !p.is_empty() => {
                Ok(TypePropertyPair::new(t, p))
            }
            _ => Err(Failure::other(format!(
                "bad pair {s:?}: expected TYPE:PROPERTY"
            ))),
        })
        .collect()
}

fn agent_failure(e: AgentError) -> Failure {
    let code = match &e {
        AgentError::Learn(LearnError::AlreadyExtended(_)) => EXIT_ALREADY_EXTENDED,
        AgentError::Unsolvable(_) => EXIT_UNSOLVABLE,
        AgentError::Planner(PlannerError::NodeBudgetExceeded { .. }) => EXIT_RESOURCE_LIMIT,
        AgentError::Trace(_) => EXIT_MISSING_FILE,
        _ => EXIT_OTHER,
    };
    Failure { code, message: e.to_string() }
}

fn cmd_extend(args: &ExtendArgs) -> Result<(), Failure> {
    let domain = parse_domain(&read_file(&args.domain)?)
        .map_err(|e| Failure::other(e.to_string()))?;
    let pairs = parse_pairs(&args.pairs)?;
    let (extended, report) = extend(&domain, &pairs, args.n_min, &args.closeness_pred)
        .map_err(|e| {
            let code = match e {
                LearnError::AlreadyExtended(_) => EXIT_ALREADY_EXTENDED,
                _ => EXIT_OTHER,
            };
            Failure { code, message: e.to_string() }
        })?;
    write_output(args.out.as_deref(), &print_domain(&extended))?;
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Failure::other(e.to_string()))?;
        write_output(Some(path), &format!("{json}\n"))?;
    }
    Ok(())
}

fn cmd_plan(args: &PlanArgs) -> Result<(), Failure> {
    let domain = parse_domain(&read_file(&args.domain)?)
        .map_err(|e| Failure::other(e.to_string()))?;
    let problem = parse_problem(&read_file(&args.problem)?, &domain)
        .map_err(|e| Failure::other(e.to_string()))?;
    let mut full = domain;
    for (o, ty) in &problem.objects {
        full.constants.insert(o.clone(), ty.clone());
    }
    let planning = PlanningProblem {
        domain: full,
        init: problem.init,
        goal: problem.goal,
    };
    let limits = SearchLimits { max_expansions: args.max_expansions };
    match plan_outcome(&planning, limits) {
        Ok(PlanOutcome::Plan(plan)) => {
            let text: String =
                plan.steps.iter().map(|s| format!("{}\n", s.id())).collect();
            write_output(args.out.as_deref(), &text)
        }
        Ok(PlanOutcome::Unsolvable) => Err(Failure {
            code: EXIT_UNSOLVABLE,
            message: "goal is unsolvable".into(),
        }),
        Err(PlannerError::NodeBudgetExceeded { budget }) => Err(Failure {
            code: EXIT_RESOURCE_LIMIT,
            message: format!("search exceeded the node budget of {budget}"),
        }),
        Err(e) => Err(Failure::other(e.to_string())),
    }
}

fn load_world_config(path: &Path) -> Result<WorldConfig, Failure> {
    let text = read_file(path)?;
    let parsed: WorldFile = toml::from_str(&text)
        .map_err(|e| Failure::other(format!("{}: {e}", path.display())))?;
    Ok(match parsed {
        WorldFile::Run(r) => r.world,
        WorldFile::Bare(w) => w,
    })
}

fn load_run_config(path: &Path) -> Result<RunFile, Failure> {
    let text = read_file(path)?;
    toml::from_str(&text).map_err(|e| Failure::other(format!("{}: {e}", path.display())))
}

fn cmd_gen_env(args: &GenEnvArgs) -> Result<(), Failure> {
    let cfg = load_world_config(&args.config)?;
    let world = generate_world(&cfg).map_err(|e| Failure::other(e.to_string()))?;
    let json = serde_json::to_string_pretty(&world.dump_json())
        .map_err(|e| Failure::other(e.to_string()))?;
    write_output(args.out.as_deref(), &format!("{json}\n"))
}

/// File stem for a (possibly quoted) reified pair, e.g. `tv_is_turned_on`.
fn pair_stem(type_name: &str, prop_name: &str) -> String {
    format!("{}_{}", type_name.trim_matches('"'), prop_name.trim_matches('"'))
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let domain = parse_domain(&read_file(&args.domain)?)
        .map_err(|e| Failure::other(e.to_string()))?;
    let cfg = load_run_config(&args.config)?;
    fs::create_dir_all(&args.out_dir)?;
    let mut trace_file = if args.trace {
        Some(fs::File::create(args.out_dir.join("trace.log"))?)
    } else {
        None
    };
    let trace: Option<&mut dyn std::io::Write> =
        trace_file.as_mut().map(|f| f as &mut dyn std::io::Write);
    let out = run(&domain, &cfg.agent, &cfg.world, trace).map_err(agent_failure)?;

    fs::write(args.out_dir.join("extended.pddl"), print_domain(&out.extended))?;
    let report = serde_json::to_string_pretty(&out.report)
        .map_err(|e| Failure::other(e.to_string()))?;
    fs::write(args.out_dir.join("report.json"), format!("{report}\n"))?;
    let models: Vec<&ClassifierModel> = out.models.values().collect();
    let models_json =
        serde_json::to_string_pretty(&models).map_err(|e| Failure::other(e.to_string()))?;
    fs::write(args.out_dir.join("models.json"), format!("{models_json}\n"))?;
    fs::write(
        args.out_dir.join("world.json"),
        format!(
            "{}\n",
            serde_json::to_string_pretty(&out.world.dump_json())
                .map_err(|e| Failure::other(e.to_string()))?
        ),
    )?;
    let data_dir = args.out_dir.join("datasets");
    fs::create_dir_all(&data_dir)?;
    for ((t, p), set) in &out.datasets {
        set.write_csv(&data_dir.join(format!("{}.csv", pair_stem(t, p))))
            .map_err(|e| Failure::other(e.to_string()))?;
    }

    println!(
        "termination: {:?} after {} iterations ({} replans)",
        out.report.termination, out.report.iterations, out.report.replans
    );
    for (key, n) in &out.report.dataset_sizes {
        println!("dataset {key}: {n} samples");
    }
    if out.report.termination == Termination::Budget {
        return Err(Failure {
            code: EXIT_RESOURCE_LIMIT,
            message: "run hit the iteration budget before finishing".into(),
        });
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let cfg = load_run_config(&args.config)?;
    let models_text = read_file(&args.models)?;
    let models: Vec<ClassifierModel> = serde_json::from_str(&models_text)
        .map_err(|e| Failure::other(format!("{}: {e}", args.models.display())))?;
    let models: BTreeMap<(String, String), ClassifierModel> = models
        .into_iter()
        .map(|m| ((m.type_name.clone(), m.prop_name.clone()), m))
        .collect();
    let world = generate_world(&cfg.world).map_err(|e| Failure::other(e.to_string()))?;
    let sets = generate_testsets(
        &world,
        &cfg.agent.pairs,
        args.testset_seed,
        args.walk_steps,
        args.cap,
    );
    let report = evaluate(&models, &sets).map_err(|e| Failure::other(e.to_string()))?;
    fs::create_dir_all(&args.out_dir)?;
    write_metrics_csv(&report, &args.out_dir.join("metrics.csv"))
        .map_err(|e| Failure::other(e.to_string()))?;
    write_metrics_json(&report, &args.out_dir.join("metrics.json"))
        .map_err(|e| Failure::other(e.to_string()))?;
    println!(
        "weighted precision {:.4}, weighted recall {:.4}",
        report.weighted_precision, report.weighted_recall
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Extend(a) => cmd_extend(a),
        Command::Plan(a) => cmd_plan(a),
        Command::GenEnv(a) => cmd_gen_env(a),
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
