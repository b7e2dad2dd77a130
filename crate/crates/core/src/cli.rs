//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain failure (validation errors, a failed
//! stage, provider refusal), 2 bad input (unreadable or malformed files,
//! invalid flags).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::crew::{default_templates_dir, Crew, TemplateSet};
use crate::environment::{EnvironmentSpec, LoadOptions};
use crate::provider::{
    ChatProvider, HttpProvider, ProviderConfig, ProviderError, ReplayProvider, Transcript,
};
use crate::script::{parse_script, DurationModel};
use crate::validator::{validate_with, Diagnostic, ValidateOptions};
use crate::workflow::{render_storyboard, run::slug, Pipeline, Run, RunError, Stage, WorkflowConfig};

/// The shipped full environment, used when `--env` is not given.
pub const BUILTIN_ENVIRONMENT: &str = include_str!("../environment/full.json");

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "filmcrew", version, about = "Turn a story idea into a camera-annotated film script")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Environment catalog (defaults to the built-in full world).
    #[arg(long, global = true)]
    pub env: Option<PathBuf>,
    /// Prompt template directory.
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
    /// TOML config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Require the environment to have the full world's counts.
    #[arg(long, global = true)]
    pub strict_counts: bool,
    #[arg(long, global = true)]
    pub ccv_max: Option<usize>,
    #[arg(long, global = true)]
    pub debate_rounds: Option<usize>,
    /// Run critique loops for M+1 rounds.
    #[arg(long, global = true)]
    pub compat_loop_guard: bool,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub base_url: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Name of the environment variable holding the API key.
    #[arg(long, global = true)]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the whole pipeline for a topic.
    Produce(ProduceArgs),
    /// Check a script against the environment.
    Validate {
        script: PathBuf,
        /// Also flag events without a shot.
        #[arg(long)]
        require_shots: bool,
    },
    /// Write a timed storyboard for a script.
    Render(RenderArgs),
    /// Inspect the environment catalog.
    Env {
        #[command(subcommand)]
        command: EnvCommand,
    },
}

#[derive(Debug, Args)]
pub struct ProduceArgs {
    #[arg(long, required_unless_present = "resume")]
    pub topic: Option<String>,
    /// Serve model replies from a recorded transcript (file or directory).
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Copy the run's transcript into this directory when done, for later replay.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Continue an interrupted run.
    #[arg(long, conflicts_with = "run_dir")]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    /// Stop after this stage (crash injection for tests).
    #[arg(long, hide = true, value_parser = parse_stage)]
    pub halt_after: Option<Stage>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub script: PathBuf,
    /// Words per second.
    #[arg(long, default_value_t = DurationModel::default().words_per_second)]
    pub rate: f64,
    /// Shortest line duration, seconds.
    #[arg(long, default_value_t = DurationModel::default().floor_seconds)]
    pub floor: f64,
    /// Duration of a movement, seconds.
    #[arg(long, default_value_t = DurationModel::default().move_seconds)]
    pub move_seconds: f64,
    /// Output file; `-` for stdout.
    #[arg(long, default_value = "storyboard.txt")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EnvCommand {
    List,
    Stats,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    Stage::parse(s).ok_or_else(|| {
        format!(
            "unknown stage {s:?}; one of {}",
            Stage::ALL.map(Stage::as_str).join(", ")
        )
    })
}

/// Settings file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub env: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub run_dir: Option<PathBuf>,
    pub strict_counts: bool,
    pub provider: ProviderConfig,
    pub workflow: WorkflowConfig,
}

/// Resolved settings: file config overlaid with flags.
#[derive(Debug)]
pub struct CliConfig {
    pub env: Option<PathBuf>,
    pub templates: PathBuf,
    pub runs_root: PathBuf,
    pub strict_counts: bool,
    pub provider: ProviderConfig,
    pub workflow: WorkflowConfig,
}

struct Failure {
    code: i32,
    message: String,
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn domain(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_DOMAIN,
        message: message.into(),
    }
}

impl CliConfig {
    fn resolve(g: &GlobalArgs) -> Result<Self, Failure> {
        let file = match &g.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
                toml::from_str::<FileConfig>(&text).map_err(|e| input(format!("{}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        let mut provider = file.provider;
        if let Some(m) = &g.model {
            provider.model_name = m.clone();
        }
        if let Some(u) = &g.base_url {
            provider.base_url = u.clone();
        }
        if let Some(t) = g.temperature {
            provider.temperature = t;
        }
        if let Some(k) = &g.api_key_env {
            provider.api_key_env_var = k.clone();
        }
        provider.check().map_err(|e| input(e.to_string()))?;
        let mut workflow = file.workflow;
        if let Some(m) = g.ccv_max {
            workflow.ccv_max = m;
            workflow.actor_ccv_max = m;
        }
        if let Some(r) = g.debate_rounds {
            workflow.debate_rounds = r;
        }
        workflow.compat_loop_guard |= g.compat_loop_guard;
        if workflow.ccv_max == 0 || workflow.actor_ccv_max == 0 {
            return Err(input("ccv_max must be at least 1"));
        }
        Ok(CliConfig {
            env: g.env.clone().or(file.env),
            templates: g.templates.clone().or(file.templates).unwrap_or_else(default_templates_dir),
            runs_root: file.run_dir.unwrap_or_else(|| PathBuf::from("runs")),
            strict_counts: g.strict_counts || file.strict_counts,
            provider,
            workflow,
        })
    }

    fn load_env(&self) -> Result<EnvironmentSpec, Failure> {
        let options = LoadOptions {
            strict_counts: self.strict_counts,
        };
        let text = match &self.env {
            Some(p) => fs::read_to_string(p).map_err(|e| input(format!("{}: {e}", p.display())))?,
            None => BUILTIN_ENVIRONMENT.to_string(),
        };
        EnvironmentSpec::from_json_str(&text, options).map_err(|e| input(e.to_string()))
    }

    fn validate_options(&self, require_shots: bool) -> ValidateOptions {
        ValidateOptions {
            static_repeat_limit: self.workflow.static_repeat_limit,
            require_shots,
        }
    }
}

struct Out {
    quiet: bool,
    json: bool,
}

impl Out {
    fn line(&self, s: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", s.as_ref());
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.global.quiet);
    match dispatch(&cli) {
        Ok(code) => code,
        Err(f) => {
            if cli.global.json {
                println!("{}", json!({"error": f.message, "exit": f.code}));
            } else {
                eprintln!("error: {}", f.message);
            }
            f.code
        }
    }
}

fn init_logging(quiet: bool) {
    let default = if quiet { "error" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .without_time()
        .try_init();
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    let config = CliConfig::resolve(&cli.global)?;
    let out = Out {
        quiet: cli.global.quiet,
        json: cli.global.json,
    };
    match &cli.command {
        Command::Produce(args) => produce(&config, args, &out),
        Command::Validate {
            script,
            require_shots,
        } => validate_cmd(&config, script, *require_shots, &out),
        Command::Render(args) => render(&config, args, &out),
        Command::Env { command } => env_cmd(&config, command, &out),
    }
}

fn read_script_file(path: &Path) -> Result<crate::script::AnnotatedScript, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    parse_script(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn print_diagnostics(diagnostics: &[Diagnostic], out: &Out) {
    for d in diagnostics {
        if out.json {
            if !out.quiet {
                println!("{}", d.to_record());
            }
        } else {
            out.line(d.to_string());
        }
    }
}

fn validate_cmd(config: &CliConfig, path: &Path, require_shots: bool, out: &Out) -> Result<i32, Failure> {
    let env = config.load_env()?;
    let script = read_script_file(path)?;
    let diagnostics = validate_with(&script, &env, &config.validate_options(require_shots));
    print_diagnostics(&diagnostics, out);
    Ok(if diagnostics.iter().any(Diagnostic::is_error) {
        EXIT_DOMAIN
    } else {
        EXIT_OK
    })
}

fn render(config: &CliConfig, args: &RenderArgs, out: &Out) -> Result<i32, Failure> {
    let model = DurationModel::new(args.rate, args.floor, args.move_seconds).map_err(|e| input(e.to_string()))?;
    let env = config.load_env()?;
    let script = read_script_file(&args.script)?;
    let diagnostics = validate_with(&script, &env, &config.validate_options(false));
    let blocking: Vec<Diagnostic> = diagnostics.into_iter().filter(Diagnostic::is_error).collect();
    if !blocking.is_empty() {
        if !out.json {
            for d in &blocking {
                eprintln!("{d}");
            }
        }
        return Err(domain(format!("{} blocking diagnostic(s); storyboard not written", blocking.len())));
    }
    let board = render_storyboard(&script, &env, &model);
    if args.out.as_os_str() == "-" {
        print!("{board}");
    } else {
        fs::write(&args.out, &board).map_err(|e| input(format!("{}: {e}", args.out.display())))?;
        if out.json {
            println!("{}", json!({"storyboard": args.out}));
        } else {
            out.line(format!("wrote {}", args.out.display()));
        }
    }
    Ok(EXIT_OK)
}

fn env_cmd(config: &CliConfig, command: &EnvCommand, out: &Out) -> Result<i32, Failure> {
    let env = config.load_env()?;
    let capacities: Vec<_> = env
        .locations
        .iter()
        .map(|l| json!({"name": l.name, "capacity": l.capacity, "positions": l.positions.len()}))
        .collect();
    match command {
        EnvCommand::Stats => {
            let stats = env.stats();
            if out.json {
                println!("{}", json!({"stats": stats, "locations": capacities}));
            } else {
                out.line(stats.to_string());
                for l in &env.locations {
                    out.line(format!("  {}: capacity {}, {} positions", l.name, l.capacity, l.positions.len()));
                }
            }
        }
        EnvCommand::List => {
            if out.json {
                let actions: Vec<_> = env
                    .actions
                    .iter()
                    .map(|a| json!({"name": a.canonical_name, "state": a.required_state, "effect": a.state_effect}))
                    .collect();
                let shots: Vec<_> = env
                    .shots
                    .iter()
                    .map(|s| json!({"name": s.canonical_name, "kind": s.kind}))
                    .collect();
                println!("{}", json!({"locations": capacities, "actions": actions, "shots": shots}));
            } else {
                out.line("Locations:");
                for l in &env.locations {
                    out.line(format!("  {} (capacity {})", l.name, l.capacity));
                }
                out.line("Actions:");
                for a in &env.actions {
                    out.line(format!("  {} [{}]", a.canonical_name, a.required_state));
                }
                out.line("Shots:");
                for s in &env.shots {
                    let kind = match s.kind {
                        crate::environment::ShotKind::Static => "static",
                        crate::environment::ShotKind::Dynamic => "dynamic",
                    };
                    out.line(format!("  {} [{kind}]", s.canonical_name));
                }
            }
        }
    }
    Ok(EXIT_OK)
}

fn provider_failure(e: ProviderError) -> Failure {
    match e {
        ProviderError::Transcript { .. } => input(e.to_string()),
        _ => domain(e.to_string()),
    }
}

fn run_failure(e: RunError) -> Failure {
    match e {
        RunError::InvalidArtifact { .. } | RunError::Io { .. } => input(e.to_string()),
        _ => domain(e.to_string()),
    }
}

fn produce(config: &CliConfig, args: &ProduceArgs, out: &Out) -> Result<i32, Failure> {
    let env = config.load_env()?;
    let templates = TemplateSet::load(&config.templates).map_err(|e| input(e.to_string()))?;

    // Refuse early, before any run directory is touched.
    if args.replay.is_none() {
        let var = &config.provider.api_key_env_var;
        if std::env::var(var).map_or(true, |k| k.trim().is_empty()) {
            return Err(domain(
                ProviderError::Auth(format!("environment variable {var} is not set")).to_string(),
            ));
        }
    }
    let replay = match &args.replay {
        Some(p) => Some(ReplayProvider::load(p).map_err(|e| input(e.to_string()))?),
        None => None,
    };

    let mut run = match (&args.resume, &args.topic) {
        (Some(dir), _) => Run::resume(dir).map_err(run_failure)?,
        (None, Some(topic)) => {
            let dir = args
                .run_dir
                .clone()
                .unwrap_or_else(|| config.runs_root.join(slug(topic)));
            let model = if replay.is_some() {
                "replay".to_string()
            } else {
                config.provider.model_name.clone()
            };
            Run::create(&dir, topic, &config.workflow, &model).map_err(run_failure)?
        }
        (None, None) => return Err(input("--topic is required")),
    };
    if run.state().is_complete() {
        out.line(format!("{} is already complete", run.dir().display()));
        return Ok(EXIT_OK);
    }

    let transcript = Transcript::open(&run.transcript_path()).map_err(provider_failure)?;
    let provider: Arc<dyn ChatProvider> = match replay {
        Some(r) => {
            let r = r.with_transcript(transcript);
            r.skip(&run.state().consumed_calls());
            Arc::new(r)
        }
        None => Arc::new(HttpProvider::new(config.provider.clone(), transcript).map_err(provider_failure)?),
    };
    let crew = Crew::new(provider, Arc::new(templates));
    let pipeline = Pipeline::new(&env, crew, run.state().config.clone());

    let result = run.execute(&pipeline, args.halt_after);
    let state = run.state();
    match result {
        Ok(bundle) => {
            if let Some(dest) = &args.record {
                fs::create_dir_all(dest).map_err(|e| input(format!("{}: {e}", dest.display())))?;
                fs::copy(run.transcript_path(), dest.join("transcript.jsonl"))
                    .map_err(|e| input(format!("{}: {e}", dest.display())))?;
            }
            if out.json {
                println!(
                    "{}",
                    json!({
                        "run_dir": run.dir(),
                        "completed": state.completed,
                        "calls": state.total_calls(),
                        "validator": bundle.as_ref().map(|b| b.summary()),
                        "warnings": state.warnings,
                    })
                );
            } else {
                for w in &state.warnings {
                    out.line(format!("warning: {w}"));
                }
                out.line(run.dir().display().to_string());
            }
            Ok(EXIT_OK)
        }
        Err(e) => {
            let stage = e.stage().map_or("setup".into(), |s| s.to_string());
            Err(Failure {
                code: EXIT_DOMAIN,
                message: format!("{e} [stage: {stage}; run dir: {}]", run.dir().display()),
            })
        }
    }
}
