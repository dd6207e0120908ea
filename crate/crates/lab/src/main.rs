use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use occtime::chains_coupling;
use occtime::config::parse_count;
use occtime::{io, Count, ExperimentConfig, Kind, LabError, LabResult};

/// Occupation-time experiments for intermittent interval maps and
/// null-recurrent chains.
#[derive(Parser)]
#[command(name = "occtime", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Darling-Kac law of S_n(M)/c(n).
    Dk(RunArgs),
    /// Ratio of the occupation times of the two cusps.
    Ratio(RunArgs),
    /// Duality between occupation times and return-time sums.
    Duality(RunArgs),
    /// Preimage sequences of the fixed points and their sums.
    IterateSums(RunArgs),
    /// Slowly varying pair with an oscillating ratio.
    Oscillating(RunArgs),
    /// Iid pair against the sums of the other.
    SumsMaxima(RunArgs),
    /// Tower over a renewal chain.
    Renewal(RunArgs),
    /// Fraction of time in the middle interval.
    MassEscape(RunArgs),
    /// Partial sums of iterates of two fixed-point functions.
    CompareSums(RunArgs),
    /// Print the card of an experiment kind.
    Describe { kind: String },
}

fn list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected {N} comma-separated numbers"))
}

fn counts(s: &str) -> Result<Vec<Count>, String> {
    s.split(',').map(|x| parse_count(x).map(Count)).collect()
}

fn count(s: &str) -> Result<Count, String> {
    parse_count(s).map(Count)
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML config (JSON for a .json extension); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    /// Orbit length, e.g. 1e6.
    #[arg(long = "n")]
    n_steps: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Comma-separated checkpoints.
    #[arg(long)]
    checkpoints: Option<String>,
    #[arg(long)]
    delta_a: Option<f64>,
    #[arg(long)]
    delta_b: Option<f64>,
    /// M = (lo, hi) as `lo,hi`.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    record_returns: bool,
    #[arg(long)]
    zeta: Option<f64>,
    /// Tail exponents `a,b,c`.
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    psi: Option<String>,
    /// identical or independent.
    #[arg(long)]
    coupling: Option<String>,
    #[arg(long)]
    cutoff: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    depth: Option<f64>,
    /// f(x) = x - coef x^power as `coef,power`.
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Output directory (default: $OCCTIME_OUT_DIR, else ./occtime-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn flag<T>(name: &str, v: Option<&String>, parse: impl Fn(&str) -> Result<T, String>) -> LabResult<Option<T>> {
    v.map(|s| parse(s).map_err(|e| LabError::Validation(format!("--{name}: {e}")))).transpose()
}

impl RunArgs {
    fn to_config(&self, kind: Option<Kind>) -> LabResult<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let (Some(k), Some(f)) = (kind, file.kind) {
            if k != f {
                return Err(LabError::Validation(format!("config file is for {f}, not {k}")));
            }
        }
        let flags = ExperimentConfig {
            kind,
            seed: flag("seed", self.seed.as_ref(), count)?,
            c: self.c,
            p0: self.p0,
            p1: self.p1,
            n_steps: flag("n", self.n_steps.as_ref(), count)?,
            n_trials: flag("trials", self.trials.as_ref(), count)?,
            checkpoints: flag("checkpoints", self.checkpoints.as_ref(), counts)?,
            delta_a: self.delta_a,
            delta_b: self.delta_b,
            m: flag("m", self.m.as_ref(), list::<2>)?,
            epsilon: self.epsilon,
            record_returns: self.record_returns.then_some(true),
            zeta: self.zeta,
            phi: flag("phi", self.phi.as_ref(), list::<3>)?,
            psi: flag("psi", self.psi.as_ref(), list::<3>)?,
            coupling: flag("coupling", self.coupling.as_ref(), chains_coupling)?,
            cutoff: flag("cutoff", self.cutoff.as_ref(), count)?,
            levels: flag("levels", self.levels.as_ref(), count)?,
            depth: self.depth,
            f: flag("f", self.f.as_ref(), list::<2>)?,
            g: flag("g", self.g.as_ref(), list::<2>)?,
            kappa: self.kappa,
            out: self.out.clone(),
        };
        Ok(file.overlay(flags))
    }
}

fn execute(cli: Cli) -> LabResult<()> {
    let (kind, args) = match cli.command {
        Command::Describe { kind } => {
            write!(std::io::stdout().lock(), "{}", occtime::describe::describe(&kind)?)?;
            return Ok(());
        }
        Command::Run(a) => (None, a),
        Command::Dk(a) => (Some(Kind::Dk), a),
        Command::Ratio(a) => (Some(Kind::Ratio), a),
        Command::Duality(a) => (Some(Kind::Duality), a),
        Command::IterateSums(a) => (Some(Kind::IterateSums), a),
        Command::Oscillating(a) => (Some(Kind::Oscillating), a),
        Command::SumsMaxima(a) => (Some(Kind::SumsMaxima), a),
        Command::Renewal(a) => (Some(Kind::Renewal), a),
        Command::MassEscape(a) => (Some(Kind::MassEscape), a),
        Command::CompareSums(a) => (Some(Kind::CompareSums), a),
    };
    let cfg = args.to_config(kind)?;
    let result = occtime::run(&cfg)?;
    let dir = result.config.output_dir();
    io::write_result(&result, &dir)?;
    let text = serde_json::to_string_pretty(&io::sidecar(&result))?;
    writeln!(std::io::stdout().lock(), "{text}")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
