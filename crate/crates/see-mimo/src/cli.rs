//! `see-mimo solve` and `see-mimo sweep`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use see_mimo_core::channel::generate_layout;
use see_mimo_core::{Precoder, SystemConfig};

use crate::config::{self, ConfigError};
use crate::harness::{self, Algorithm, HarnessError, RunManifest, SweepSpec};

/// Success.
pub const EXIT_OK: i32 = 0;
/// Runtime failure not covered by the other codes.
pub const EXIT_FAILURE: i32 = 1;
/// Bad config, spec or arguments.
pub const EXIT_INVALID: i32 = 2;
/// `--strict` and the solver did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "see-mimo",
    version,
    about = "Secure energy-efficient power allocation for massive MIMO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one random instance and print the solution as JSON.
    Solve(SolveArgs),
    /// Run a builtin figure sweep or a JSON spec and write CSV files.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML file with SystemConfig fields.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a field, e.g. `--set max_power=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Master seed. Beats SEE_MIMO_SEED and the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Algorithm to run.
    #[arg(long, value_enum, default_value = "alg1")]
    alg: Algorithm,
    /// Precoder.
    #[arg(long, value_parser = parse_scheme, default_value = "zf")]
    scheme: Precoder,
    /// Exit with status 3 when the solver does not converge.
    #[arg(long)]
    strict: bool,
    /// Pretty-print the JSON.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Figure name (fig2 to fig9) or path to a JSON sweep spec or manifest.
    target: String,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
    /// Trials per point.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write every trial to `<name>_trials.csv`.
    #[arg(long)]
    dump_trials: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

fn parse_scheme(s: &str) -> Result<Precoder, String> {
    match s.to_ascii_lowercase().as_str() {
        "mrt" => Ok(Precoder::Mrt),
        "zf" => Ok(Precoder::Zf),
        _ => Err(format!("unknown scheme `{s}` (expected mrt or zf)")),
    }
}

/// Solution summary printed by `solve`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolveOutput {
    /// Algorithm that ran.
    pub algorithm: Algorithm,
    /// Precoder.
    pub scheme: Precoder,
    /// Master seed of the instance.
    pub seed: u64,
    /// Noise-normalized eavesdropper gain of the instance.
    pub eve_gain: f64,
    /// Stopping rule met.
    pub converged: bool,
    /// QoS multipliers blew up.
    pub infeasible: bool,
    /// Cell division fell back to a single group.
    pub fell_back: bool,
    /// Transmit powers in W.
    pub powers: Vec<f64>,
    /// Per-user secure rates in bit/s/Hz.
    pub secure_rates: Vec<f64>,
    /// Secure EE in bit/s/Hz/W.
    pub ee_sec: f64,
    /// Active antennas.
    pub m_active: usize,
    /// Iterations used.
    pub iterations: usize,
    /// Length of the iteration trace.
    pub trace_len: usize,
    /// Multipliers of the last sweep.
    pub multipliers: Multipliers,
    /// Final antenna-selection price, when selection ran.
    pub theta: Option<f64>,
}

/// Multipliers reported by `solve`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Multipliers {
    /// Power-budget multiplier of the single group.
    pub psi: f64,
    /// Central and edge budget multipliers, with cell division.
    pub group_psi: Option<[f64; 2]>,
    /// QoS multipliers.
    pub gamma: Vec<f64>,
    /// Efficiency parameter.
    pub q: f64,
}

/// Failure of a command, with its exit status.
#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Invalid(String),
    #[error("solver did not converge")]
    NotConverged,
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) | Failure::Invalid(_) => EXIT_INVALID,
            Failure::Harness(HarnessError::Io { .. }) => EXIT_FAILURE,
            Failure::Harness(_) => EXIT_INVALID,
            Failure::NotConverged => EXIT_NOT_CONVERGED,
            Failure::Other(_) => EXIT_FAILURE,
        }
    }
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let c = &args.config;
    let cfg = config::resolve(
        SystemConfig::default(),
        c.config.as_deref(),
        &c.sets,
        c.seed,
    )?;
    cfg.validate_for(args.scheme).map_err(ConfigError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let layout = generate_layout(&cfg, &mut rng).map_err(ConfigError::from)?;
    let cfg = SystemConfig {
        eve_gain: layout.eve_gain,
        ..cfg
    };
    let sol =
        args.alg
            .solve(&cfg, &layout, args.scheme)
            .map_err(|e| match e {
                see_mimo_core::Error::InvalidConfig(_)
                | see_mimo_core::Error::InvalidDimension(_) => Failure::Invalid(e.to_string()),
                e => Failure::Other(e.into()),
            })?;
    let out = SolveOutput {
        algorithm: args.alg,
        scheme: args.scheme,
        seed: cfg.seed,
        eve_gain: cfg.eve_gain,
        converged: sol.converged,
        infeasible: sol.infeasible,
        fell_back: sol.fell_back,
        powers: sol.p.clone(),
        secure_rates: sol.report.rate_sec.clone(),
        ee_sec: sol.report.ee_sec,
        m_active: sol.antennas,
        iterations: sol.iterations(),
        trace_len: sol.trace.len(),
        multipliers: Multipliers {
            psi: sol.dual.psi,
            group_psi: sol.groups.map(|g| [g.psi1, g.psi2]),
            gamma: sol.dual.gamma.clone(),
            q: sol.dual.q,
        },
        theta: sol.theta,
    };
    let json = if args.pretty {
        serde_json::to_string_pretty(&out)
    } else {
        serde_json::to_string(&out)
    }
    .map_err(anyhow::Error::from)?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{json}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            return Err(anyhow::Error::from(e).into())
        }
        _ => {}
    }
    if args.strict && !sol.converged {
        return Err(Failure::NotConverged);
    }
    Ok(())
}

/// A JSON file holding either a bare spec or a manifest written earlier.
#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    Manifest(Box<RunManifest>),
    Spec(Box<SweepSpec>),
}

fn load_spec(target: &str) -> Result<(String, SweepSpec), Failure> {
    if harness::FIGURES.contains(&target) {
        return Ok((target.to_owned(), harness::builtin_figure(target)?));
    }
    let path = Path::new(target);
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::Invalid(format!(
            "`{target}` is neither a figure name ({}) nor a readable spec file: {e}",
            harness::FIGURES.join(", ")
        ))
    })?;
    let file: SpecFile = serde_json::from_str(&text)
        .map_err(|e| Failure::Invalid(format!("invalid sweep spec {target}: {e}")))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("sweep")
        .trim_end_matches(".manifest")
        .to_owned();
    Ok(match file {
        SpecFile::Manifest(m) => (m.name, m.spec),
        SpecFile::Spec(s) => (stem, *s),
    })
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let (name, mut spec) = load_spec(&args.target)?;
    let c = &args.config;
    spec.base = config::resolve(spec.base, c.config.as_deref(), &c.sets, c.seed)?;
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    spec.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(anyhow::Error::from)?;
    let (_, manifest) =
        pool.install(|| harness::run_sweep_to_dir(&spec, &name, &args.out, args.dump_trials))?;
    eprintln!(
        "wrote {} ({} rows) and {}",
        manifest.outputs.csv.display(),
        spec.values.len() * spec.algorithms.len() * spec.schemes.len(),
        manifest.outputs.manifest.display()
    );
    Ok(())
}

/// Parse `args` (including the program name), run and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
