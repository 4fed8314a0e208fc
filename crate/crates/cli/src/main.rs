//! `dsa` — run, verify, and report on decentralized secure aggregation.
//!
//! Subcommands:
//!   run     simulate one aggregation round and write its transcript
//!   verify  run the information-theoretic check suite and write a report
//!   rates   print measured rates against the optimal region
//!   replay  re-execute a transcript file and compare event-for-event
//!
//! Every flag has a config-file equivalent (flat `key=value` lines with a
//! `schema-version=1` key); flags override file values. The enumeration
//! budget resolves as flag, then config file, then the DSA_BUDGET
//! environment variable, then the built-in default.
//!
//! Exit codes: 0 success; 1 check failure, disagreement, or replay
//! mismatch; 2 usage or parameter errors (including the trivial regime);
//! 3 enumeration budget exceeded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dsa_core::*;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_USAGE,
        }
    }

    fn failure(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_FAILURE,
        }
    }

    fn budget(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_BUDGET,
        }
    }
}

impl From<VerifierError> for CliError {
    fn from(err: VerifierError) -> Self {
        match err {
            VerifierError::Oracle(OracleError::BudgetExceeded { required, budget }) => {
                CliError::budget(format!(
                    "enumeration needs {required} worlds, budget is {budget}; \
                     raise --budget or DSA_BUDGET, or shrink the parameters"
                ))
            }
            other => CliError::usage(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dsa",
    version,
    about = "Decentralized secure aggregation: simulate rounds, verify security, report rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one aggregation round and write its transcript
    Run(RunArgs),
    /// Run information-theoretic checks against the implemented scheme
    Verify(VerifyArgs),
    /// Print measured rate triples against the optimal region
    Rates(RatesArgs),
    /// Re-execute a transcript file and compare event-for-event
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Number of users K
    #[arg(long)]
    users: Option<u16>,
    /// Collusion threshold T
    #[arg(long)]
    collusion: Option<u16>,
    /// Ring modulus q
    #[arg(long)]
    modulus: Option<u64>,
    /// Symbols per input vector L
    #[arg(long)]
    len: Option<u32>,
    /// Run seed; doubles as the epoch identifier
    #[arg(long)]
    seed: Option<u64>,
    /// File with one input vector per user (decimal symbols, one line each)
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Delivery order: round-robin or seeded-shuffle
    #[arg(long)]
    order: Option<String>,
    /// Transcript output path
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Config file with key=value defaults for these flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long)]
    users: Option<u16>,
    #[arg(long)]
    collusion: Option<u16>,
    #[arg(long)]
    modulus: Option<u64>,
    #[arg(long)]
    len: Option<u32>,
    /// Enumeration budget in worlds
    #[arg(long)]
    budget: Option<u64>,
    /// Comma-separated check names (default: all)
    #[arg(long)]
    checks: Option<String>,
    /// Report output path
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct RatesArgs {
    /// Single K or an inclusive sweep A..B
    #[arg(long)]
    users: Option<String>,
    #[arg(long)]
    collusion: Option<u16>,
    #[arg(long)]
    modulus: Option<u64>,
    #[arg(long)]
    len: Option<u32>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ReplayArgs {
    /// Transcript file to re-execute
    transcript: PathBuf,
}

/// Config-file values; flags take precedence over these.
struct Settings {
    file: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            for (number, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::usage(format!(
                        "{}:{}: expected key=value",
                        path.display(),
                        number + 1
                    ))
                })?;
                file.insert(key.trim().to_string(), value.trim().to_string());
            }
            match file.get("schema-version").map(String::as_str) {
                Some("1") => {}
                Some(other) => {
                    return Err(CliError::usage(format!(
                        "unsupported config schema-version `{other}`"
                    )))
                }
                None => {
                    return Err(CliError::usage(format!(
                        "{}: missing schema-version key",
                        path.display()
                    )))
                }
            }
        }
        Ok(Self { file })
    }

    fn resolve<T: std::str::FromStr + Clone>(
        &self,
        key: &str,
        flag: Option<T>,
        default: Option<T>,
    ) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(raw) = self.file.get(key) {
            return raw
                .parse()
                .map_err(|_| CliError::usage(format!("invalid config value {key}={raw}")));
        }
        default.ok_or_else(|| CliError::usage(format!("missing required parameter --{key}")))
    }
}

fn resolve_format(settings: &Settings, flag: Option<Format>) -> Result<Format, CliError> {
    if let Some(f) = flag {
        return Ok(f);
    }
    match settings.file.get("format").map(String::as_str) {
        Some("machine") => Ok(Format::Machine),
        Some("text") | None => Ok(Format::Text),
        Some(other) => Err(CliError::usage(format!("invalid config value format={other}"))),
    }
}

fn parse_params(
    settings: &Settings,
    users: Option<u16>,
    collusion: Option<u16>,
    modulus: Option<u64>,
    len: Option<u32>,
) -> Result<ProtocolParams, CliError> {
    let users: u16 = settings.resolve("users", users, None)?;
    let collusion: u16 = settings.resolve("collusion", collusion, Some(0))?;
    let modulus: u64 = settings.resolve("modulus", modulus, Some(2))?;
    let len: u32 = settings.resolve("len", len, Some(1))?;
    let ring = RingParams::new(modulus, len).map_err(|e| CliError::usage(e.to_string()))?;
    ProtocolParams::new(users, collusion, ring).map_err(|e| CliError::usage(e.to_string()))
}

fn symbols_csv(v: &RingVector) -> String {
    v.coords()
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn read_input_file(path: &Path, params: &ProtocolParams) -> Result<Vec<RingVector>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut inputs = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let coords: Vec<u64> = line
            .split([',', ' ', '\t'])
            .filter(|tok| !tok.is_empty())
            .map(|tok| {
                tok.parse::<u64>().map_err(|_| {
                    CliError::usage(format!(
                        "{}:{}: invalid symbol `{tok}`",
                        path.display(),
                        number + 1
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        inputs.push(
            RingVector::new(params.ring(), coords).map_err(|e| {
                CliError::usage(format!("{}:{}: {e}", path.display(), number + 1))
            })?,
        );
    }
    Ok(inputs)
}

fn cmd_run(args: RunArgs) -> Result<u8, CliError> {
    let settings = Settings::load(args.config.as_deref())?;
    let params = parse_params(&settings, args.users, args.collusion, args.modulus, args.len)?;
    let seed: u64 = settings.resolve("seed", args.seed, Some(0))?;
    let order_name: String =
        settings.resolve("order", args.order, Some("round-robin".to_string()))?;
    let order = match order_name.as_str() {
        "round-robin" => DeliveryOrder::RoundRobin,
        "seeded-shuffle" => DeliveryOrder::SeededShuffle,
        other => return Err(CliError::usage(format!("unknown delivery order `{other}`"))),
    };
    let out: PathBuf = settings.resolve(
        "out",
        args.out,
        Some(PathBuf::from("dsa-transcript.txt")),
    )?;
    let format = resolve_format(&settings, args.format)?;

    let input_path: Option<PathBuf> = match &args.inputs {
        Some(p) => Some(p.clone()),
        None => settings.file.get("inputs").map(PathBuf::from),
    };
    let input_mode = match input_path {
        Some(path) => InputMode::Explicit(read_input_file(&path, &params)?),
        None => InputMode::Random,
    };

    let config = SimConfig::new(params, seed, input_mode, order)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let transcript = run_simulation(&config).map_err(|e| CliError::failure(e.to_string()))?;
    std::fs::write(&out, transcript.to_text())
        .map_err(|e| CliError::failure(format!("cannot write {}: {e}", out.display())))?;

    let agreed = transcript.agreed_result();
    match format {
        Format::Text => {
            println!("run: {params} seed={seed} order={order_name}");
            match agreed {
                Some(sum) => println!("recovered sum: {sum}"),
                None => println!("recovered sum: DISAGREEMENT"),
            }
            println!(
                "agreement: {}/{} users",
                transcript
                    .results()
                    .iter()
                    .filter(|(_, v)| Some(*v) == agreed)
                    .count(),
                params.users()
            );
            println!("transcript written to {}", out.display());
        }
        Format::Machine => {
            println!(
                "users={} collusion={} modulus={} len={} seed={seed}",
                params.users(),
                params.collusion(),
                params.ring().modulus(),
                params.ring().len()
            );
            match agreed {
                Some(sum) => println!("sum={}", symbols_csv(sum)),
                None => println!("sum=-"),
            }
            println!("agree={}", agreed.is_some());
            println!("transcript={}", out.display());
        }
    }
    Ok(if agreed.is_some() { 0 } else { EXIT_FAILURE })
}

fn resolve_budget(settings: &Settings, flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(raw) = settings.file.get("budget") {
        return raw
            .parse()
            .map_err(|_| CliError::usage(format!("invalid config value budget={raw}")));
    }
    match std::env::var("DSA_BUDGET") {
        Ok(raw) => raw
            .parse()
            .map_err(|_| CliError::usage(format!("invalid DSA_BUDGET value `{raw}`"))),
        Err(_) => Ok(DEFAULT_WORLD_BUDGET),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, CliError> {
    let settings = Settings::load(args.config.as_deref())?;
    let params = parse_params(&settings, args.users, args.collusion, args.modulus, args.len)?;
    let budget = resolve_budget(&settings, args.budget)?;
    let out: PathBuf = settings.resolve("out", args.out, Some(PathBuf::from("dsa-report.txt")))?;
    let format = resolve_format(&settings, args.format)?;

    let checks_spec: Option<String> = match args.checks {
        Some(s) => Some(s),
        None => settings.file.get("checks").cloned(),
    };
    let kinds: Vec<CheckKind> = match checks_spec {
        None => CheckKind::ALL.to_vec(),
        Some(spec) => spec
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|name| CheckKind::parse(name).map_err(|e| CliError::usage(e.to_string())))
            .collect::<Result<_, _>>()?,
    };

    let reports = run_checks(&params, &OptimalScheme, budget, &kinds)?;

    let mut file_text = String::new();
    let _ = write!(file_text, "{}", render_machine(&reports));
    let _ = write!(file_text, "{}", render_summary(&reports));
    std::fs::write(&out, &file_text)
        .map_err(|e| CliError::failure(format!("cannot write {}: {e}", out.display())))?;

    match format {
        Format::Text => {
            println!("verify: {params} budget={budget}");
            print!("{}", render_summary(&reports));
            println!("report written to {}", out.display());
        }
        Format::Machine => print!("{}", render_machine(&reports)),
    }
    Ok(if reports.iter().all(CheckReport::pass) {
        0
    } else {
        EXIT_FAILURE
    })
}

fn parse_user_range(spec: &str) -> Result<(u16, u16), CliError> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u16 = lo
            .parse()
            .map_err(|_| CliError::usage(format!("invalid user range `{spec}`")))?;
        let hi: u16 = hi
            .parse()
            .map_err(|_| CliError::usage(format!("invalid user range `{spec}`")))?;
        if lo > hi {
            return Err(CliError::usage(format!("empty user range `{spec}`")));
        }
        Ok((lo, hi))
    } else {
        let k: u16 = spec
            .parse()
            .map_err(|_| CliError::usage(format!("invalid user count `{spec}`")))?;
        Ok((k, k))
    }
}

fn cmd_rates(args: RatesArgs) -> Result<u8, CliError> {
    let settings = Settings::load(args.config.as_deref())?;
    let spec: String = settings.resolve("users", args.users, None)?;
    let collusion: u16 = settings.resolve("collusion", args.collusion, Some(0))?;
    let modulus: u64 = settings.resolve("modulus", args.modulus, Some(2))?;
    let len: u32 = settings.resolve("len", args.len, Some(1))?;
    let ring = RingParams::new(modulus, len).map_err(|e| CliError::usage(e.to_string()))?;
    let (lo, hi) = parse_user_range(&spec)?;
    let format = resolve_format(&settings, args.format)?;

    if format == Format::Text {
        println!(
            "{:<4} {:<4} {:<6} {:<6} {:<9} {:<12} optimal",
            "K", "T", "R_X", "R_Z", "R_ZSigma", "bound"
        );
    }
    for k in lo..=hi {
        let params =
            ProtocolParams::new(k, collusion, ring).map_err(|e| CliError::usage(e.to_string()))?;
        let rates = measure_rates(&params);
        let report = check_rate_region(&params, &rates);
        let member = report.instances[..3].iter().all(|i| i.pass);
        let optimal = report.instances[3].pass;
        let corner = k - 1;
        match format {
            Format::Text => println!(
                "{:<4} {:<4} {:<6} {:<6} {:<9} {:<12} {}",
                k,
                collusion,
                rates.r_x,
                rates.r_z,
                rates.r_z_sigma,
                format!("(1,1,{corner})"),
                if optimal { "yes" } else { "no" }
            ),
            Format::Machine => println!(
                "k={k} t={collusion} rx={} rz={} rzs={} member={member} optimal={optimal}",
                rates.r_x, rates.r_z, rates.r_z_sigma
            ),
        }
    }
    Ok(0)
}

fn cmd_replay(args: ReplayArgs) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(&args.transcript).map_err(|e| {
        CliError::usage(format!("cannot read {}: {e}", args.transcript.display()))
    })?;
    let transcript = Transcript::from_text(&text).map_err(|e| CliError::usage(e.to_string()))?;
    let matches = replay(&transcript).map_err(|e| CliError::failure(e.to_string()))?;
    if matches {
        println!("replay: transcript verified");
        Ok(0)
    } else {
        println!("replay: MISMATCH against deterministic re-execution");
        Ok(EXIT_FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Rates(args) => cmd_rates(args),
        Command::Replay(args) => cmd_replay(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
