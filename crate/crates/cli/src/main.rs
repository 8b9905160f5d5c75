//! `smallball`: batch runner for concentration, smoothing and structure
//! harnesses. Each run writes one result file (JSON or CSV) and, when an
//! output path is given, a manifest beside it.

mod commands;
mod output;
mod params;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use params::{ExperimentConfig, Params};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] smallball::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

macro_rules! compute_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Compute(e.into())
            }
        }
    )*};
}

compute_errors!(
    smallball::dist::Error,
    smallball::concentration::Error,
    smallball::infdiv::Error,
    smallball::gap::Error,
    smallball::inverse::Error
);

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "smallball", version, about = "Concentration functions and inverse Littlewood-Offord harnesses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Result file; a manifest is written to `<out>.manifest.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `json` or `csv` (default: the extension of `--out`, else json; csv
    /// for sweeps).
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: $SMALLBALL_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Inputs {
    /// Law of X: a JSON file `{"atoms": [...], "weights": [...]}` or `rademacher`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<String>,
    /// Coefficient vector: a JSON file `{"d": 1, "entries": [...]}`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    /// Atomic measure `{"d": 1, "atoms": [...], "masses": [...]}` (beta only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
}

/// Declares a flag struct whose provided values become run parameters.
macro_rules! flags {
    ($name:ident { $($field:ident $(= $long:literal)?),* $(,)? }) => {
        #[derive(Debug, Clone, Default, Args, Serialize)]
        pub struct $name {
            #[command(flatten)]
            #[serde(skip)]
            pub inputs: Inputs,
            $(
                #[arg(long $(= $long)?)]
                #[serde(skip_serializing_if = "Option::is_none" $(, rename = $long)?)]
                pub $field: Option<String>,
            )*
        }
    };
}

flags!(QArgs { tau, method, samples });
flags!(SmoothArgs { lambda, op, t, delta, samples });
flags!(Lemma1Args { tau, kappa, delta, variant, samples });
flags!(Thm1Args { tau, kappa, delta, r, m, samples });
flags!(FitArgs { tol, n_prime, rank_cap, volume_cap });
flags!(Thm2Args { tau, eps, theta, a_exp = "A", b_exp = "B", rho_n, n_prime, rank_cap, ratio_threshold, volume_cap, samples });
flags!(Thm3Args { taus, deltas, rank_cap, samples });
flags!(Thm4Args { taus, deltas, a_exp = "A", b_exp = "B", rank_cap, samples });
flags!(BetaArgs { scale, r, m, tau });
flags!(PlantArgs { rank, generators, limits, n, d, noise, outlier_fraction });
flags!(SweepArgs { target, param, values, samples });

#[derive(Debug, Subcommand)]
enum Command {
    /// Concentration function Q(F, τ) of X or of S_a (exact, Monte Carlo or auto).
    Q(QArgs),
    /// The smoothing law H^λ: `--op cf|sample|zero|esseen|q`.
    Smooth(SmoothArgs),
    /// Q(F_a, τ) against the smoothed bound (`--variant lemma1|eq11366`).
    Lemma1(Lemma1Args),
    /// Q(F_a, τ) against the β_{r,m} bound.
    Thm1(Thm1Args),
    /// Fit a low-rank progression to the entries of a.
    Fit(FitArgs),
    /// Structural harness with per-coordinate cardinality bound.
    Thm2(Thm2Args),
    /// Product K₁ region harness, logarithmic form.
    Thm3(Thm3Args),
    /// Product K₁ region harness, log n form.
    Thm4(Thm4Args),
    /// β_{r,m}(W, τ) by candidate search.
    Beta(BetaArgs),
    /// Deterministic planted instance.
    Plant(PlantArgs),
    /// Parameter grid over one target, long-form CSV.
    Sweep {
        #[command(flatten)]
        args: SweepArgs,
        /// Extra target parameters, `key=value`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the command named in `--config`.
    Run,
}

fn flag_map<T: Serialize>(args: &T) -> BTreeMap<String, Value> {
    match serde_json::to_value(args).expect("flags serialize") {
        Value::Object(m) => m.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}

fn input_map(inputs: &Inputs) -> BTreeMap<String, String> {
    flag_map(inputs)
        .into_iter()
        .filter_map(|(k, v)| v.as_str().map(|s| (k, s.to_string())))
        .collect()
}

fn split_command(command: &Command) -> Result<(Option<&'static str>, Inputs, BTreeMap<String, Value>), CliError> {
    macro_rules! split {
        ($name:literal, $a:expr) => {
            (Some($name), $a.inputs.clone(), flag_map($a))
        };
    }
    Ok(match command {
        Command::Q(a) => split!("q", a),
        Command::Smooth(a) => split!("smooth", a),
        Command::Lemma1(a) => split!("lemma1", a),
        Command::Thm1(a) => split!("thm1", a),
        Command::Fit(a) => split!("fit", a),
        Command::Thm2(a) => split!("thm2", a),
        Command::Thm3(a) => split!("thm3", a),
        Command::Thm4(a) => split!("thm4", a),
        Command::Beta(a) => split!("beta", a),
        Command::Plant(a) => split!("plant", a),
        Command::Sweep { args, set } => {
            let mut flags = flag_map(args);
            for kv in set {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv}")))?;
                flags.insert(k.to_string(), Value::String(v.to_string()));
            }
            (Some("sweep"), args.inputs.clone(), flags)
        }
        Command::Run => (None, Inputs::default(), BTreeMap::new()),
    })
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let env = std::env::var("SMALLBALL_THREADS").ok();
    let threads = match (flag, env) {
        (Some(n), _) => Some(n),
        (None, Some(s)) => Some(
            s.parse()
                .map_err(|_| CliError::Usage(format!("SMALLBALL_THREADS={s} is not a thread count")))?,
        ),
        (None, None) => None,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let (name, inputs, flags) = split_command(&cli.command)?;
    let name = match (name, cfg.command.as_deref()) {
        (Some(n), _) => n.to_string(),
        (None, Some(n)) => n.to_string(),
        (None, None) => return Err(CliError::Usage("`run` needs a config with a command".into())),
    };
    let mut params = Params::new(&cfg, input_map(&inputs), flags);
    params.validate()?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let out = cli.out.or(cfg.out.clone());
    // explicit format, else the output extension, else csv for sweeps
    let from_extension = out
        .as_ref()
        .and_then(|p| p.extension())
        .and_then(|e| e.to_str())
        .filter(|e| *e == "json" || *e == "csv")
        .map(str::to_string);
    let format = cli
        .format
        .or(cfg.format.clone())
        .or(from_extension)
        .unwrap_or_else(|| if name == "sweep" { "csv" } else { "json" }.to_string());
    if format != "json" && format != "csv" {
        return Err(CliError::Usage(format!("unknown format {format}")));
    }

    let result = commands::dispatch(&name, &mut params, seed)?;
    let body = output::render(&result, &name, &params, seed, &format)?;
    match &out {
        Some(path) => {
            std::fs::write(path, &body)?;
            output::write_manifest(path, &name, &params, seed, &format)?;
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(body.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
