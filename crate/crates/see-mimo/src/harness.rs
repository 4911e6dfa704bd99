//! Monte-Carlo sweeps: one random layout per trial, every requested
//! algorithm and scheme at every sweep point, then mean and spread.
//!
//! Trial `t` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `t`, so
//! results do not depend on how trials are scheduled. The layout of trial
//! `t` is shared across sweep points, algorithms and schemes.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use see_mimo_core::antenna_selection::{solve_algorithm3, solve_algorithm4};
use see_mimo_core::cell_division::solve_algorithm2;
use see_mimo_core::channel::{generate_layout, UserLayout};
use see_mimo_core::power_alloc::{equal_power_baseline, solve_algorithm1};
use see_mimo_core::{PowerSolution, Precoder, SystemConfig};

/// CSV header of a sweep table.
pub const CSV_HEADER: &str = "x_variable,x_value,algorithm,scheme,mean_ee_sec_bps_hz_per_w,std_ee_sec,convergence_rate,mean_iters,mean_m_active";

/// Quantity on the x-axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    /// Array size `M`.
    AntennaCount,
    /// Power budget `P_max` in W.
    MaxPower,
}

impl Variable {
    /// Column value in the CSV.
    pub fn label(self) -> &'static str {
        match self {
            Variable::AntennaCount => "antenna_count",
            Variable::MaxPower => "max_power_w",
        }
    }

    fn apply(self, base: &SystemConfig, x: f64) -> SystemConfig {
        match self {
            Variable::AntennaCount => base.with_antennas(x as usize),
            Variable::MaxPower => SystemConfig {
                max_power: x,
                ..base.clone()
            },
        }
    }
}

/// Allocation method compared in a sweep.
#[derive(
    Clone,
    Copy,
    Debug,
    PartialEq,
    Eq,
    Hash,
    PartialOrd,
    Ord,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// `P_max / K` for everybody.
    #[serde(alias = "equal_power")]
    #[value(alias = "equal-power")]
    Equal,
    /// Power allocation on the full array.
    Alg1,
    /// Power allocation with cell division.
    Alg2,
    /// Power allocation with antenna selection.
    Alg3,
    /// Cell division and antenna selection together.
    Alg4,
}

impl Algorithm {
    /// Every algorithm in table order.
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Equal,
        Algorithm::Alg1,
        Algorithm::Alg2,
        Algorithm::Alg3,
        Algorithm::Alg4,
    ];

    /// Column value in the CSV.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Equal => "equal",
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::Alg3 => "alg3",
            Algorithm::Alg4 => "alg4",
        }
    }

    /// Run on one instance. `cfg.eve_gain` should already come from `layout`.
    pub fn solve(
        self,
        cfg: &SystemConfig,
        layout: &UserLayout,
        scheme: Precoder,
    ) -> see_mimo_core::Result<PowerSolution> {
        match self {
            Algorithm::Equal => equal_power_baseline(cfg, scheme),
            Algorithm::Alg1 => solve_algorithm1(cfg, scheme),
            Algorithm::Alg2 => solve_algorithm2(cfg, layout, scheme),
            Algorithm::Alg3 => solve_algorithm3(cfg, scheme),
            Algorithm::Alg4 => solve_algorithm4(cfg, layout, scheme),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn default_trials() -> usize {
    1000
}

/// What to sweep and how often.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// x-axis quantity.
    pub variable: Variable,
    /// Sweep points, strictly increasing.
    pub values: Vec<f64>,
    /// Algorithms to run at each point.
    pub algorithms: Vec<Algorithm>,
    /// Precoders to run at each point.
    pub schemes: Vec<Precoder>,
    /// Monte-Carlo trials per point.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Everything else. `base.seed` is the master seed.
    #[serde(default)]
    pub base: SystemConfig,
}

/// Sweep errors. Per-trial solver errors are not among them: those are
/// counted as failures in the table.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// The spec breaks one of its invariants.
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    /// No builtin figure by that name.
    #[error("unknown figure `{0}` (expected fig2 to fig9)")]
    UnknownFigure(String),
    /// Writing an output file failed.
    #[error("cannot write {path}: {source}")]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
}

impl SweepSpec {
    /// Check the spec before running anything.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        if self.values.is_empty() {
            return bad("values must not be empty".into());
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("values must be strictly increasing".into());
        }
        if self.trials == 0 {
            return bad("trials >= 1".into());
        }
        if self.algorithms.is_empty() || self.schemes.is_empty() {
            return bad("algorithms and schemes must not be empty".into());
        }
        for &x in &self.values {
            let ok = match self.variable {
                Variable::AntennaCount => x.fract() == 0.0 && x >= 3.0,
                Variable::MaxPower => x > 0.0 && x.is_finite(),
            };
            if !ok {
                return bad(format!(
                    "{} = {x} is not a valid sweep point",
                    self.variable.label()
                ));
            }
            self.variable.apply(&self.base, x).validate().map_err(|e| {
                HarnessError::InvalidSpec(format!("at {} = {x}: {e}", self.variable.label()))
            })?;
        }
        Ok(())
    }

    /// Master seed.
    pub fn seed(&self) -> u64 {
        self.base.seed
    }
}

/// Result of one algorithm on one trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    /// Trial index.
    pub trial: usize,
    /// Secure EE, `None` when the solver returned an error.
    pub ee_sec: Option<f64>,
    /// Whether the solver met its stopping rule.
    pub converged: bool,
    /// Iterations used.
    pub iters: usize,
    /// Active antennas.
    pub m_active: usize,
    /// Solver error, if any.
    pub error: Option<String>,
}

/// One table row: a (point, algorithm, scheme) triple.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    /// x-axis quantity.
    pub x_variable: &'static str,
    /// Sweep point.
    pub x_value: f64,
    /// Algorithm label.
    pub algorithm: Algorithm,
    /// Precoder.
    pub scheme: Precoder,
    /// Mean secure EE over successful trials, bit/s/Hz/W.
    pub mean_ee_sec_bps_hz_per_w: f64,
    /// Population standard deviation over successful trials.
    pub std_ee_sec: f64,
    /// Converged trials over all trials.
    pub convergence_rate: f64,
    /// Mean iterations over successful trials.
    pub mean_iters: f64,
    /// Mean active antennas over successful trials.
    pub mean_m_active: f64,
}

/// Outcome of a sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    /// Rows in (point, algorithm, scheme) order.
    pub records: Vec<SweepRecord>,
    /// Per-trial outcomes, aligned with `records`.
    pub trials: Vec<Vec<TrialOutcome>>,
}

impl SweepResult {
    /// Row for a point, algorithm and scheme.
    pub fn get(&self, x: f64, algorithm: Algorithm, scheme: Precoder) -> Option<&SweepRecord> {
        self.records
            .iter()
            .find(|r| r.x_value == x && r.algorithm == algorithm && r.scheme == scheme)
    }

    /// Mean secure EE series of one algorithm and scheme, in point order.
    pub fn series(&self, algorithm: Algorithm, scheme: Precoder) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter(|r| r.algorithm == algorithm && r.scheme == scheme)
            .map(|r| (r.x_value, r.mean_ee_sec_bps_hz_per_w))
            .collect()
    }
}

/// Layout of trial `trial` under master seed `seed`.
pub fn trial_layout(
    base: &SystemConfig,
    seed: u64,
    trial: usize,
) -> see_mimo_core::Result<UserLayout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    generate_layout(base, &mut rng)
}

fn run_trial(
    cfg: &SystemConfig,
    trial: usize,
    seed: u64,
    jobs: &[(Algorithm, Precoder)],
) -> Vec<TrialOutcome> {
    let failed = |e: see_mimo_core::Error| TrialOutcome {
        trial,
        ee_sec: None,
        converged: false,
        iters: 0,
        m_active: 0,
        error: Some(e.to_string()),
    };
    let layout = match trial_layout(cfg, seed, trial) {
        Ok(l) => l,
        Err(e) => return jobs.iter().map(|_| failed(e.clone())).collect(),
    };
    let cfg = SystemConfig {
        eve_gain: layout.eve_gain,
        ..cfg.clone()
    };
    jobs.iter()
        .map(|&(alg, scheme)| match alg.solve(&cfg, &layout, scheme) {
            Ok(sol) => TrialOutcome {
                trial,
                ee_sec: Some(sol.report.ee_sec),
                converged: sol.converged,
                iters: sol.iterations(),
                m_active: sol.antennas,
                error: None,
            },
            Err(e) => failed(e),
        })
        .collect()
}

fn aggregate(
    variable: Variable,
    x: f64,
    alg: Algorithm,
    scheme: Precoder,
    out: &[TrialOutcome],
) -> SweepRecord {
    let ok: Vec<&TrialOutcome> = out.iter().filter(|o| o.ee_sec.is_some()).collect();
    let n = ok.len() as f64;
    let mean_of = |f: &dyn Fn(&TrialOutcome) -> f64| {
        if ok.is_empty() {
            0.0
        } else {
            ok.iter().map(|o| f(o)).sum::<f64>() / n
        }
    };
    let mean = mean_of(&|o| o.ee_sec.unwrap());
    let var = mean_of(&|o| (o.ee_sec.unwrap() - mean).powi(2));
    SweepRecord {
        x_variable: variable.label(),
        x_value: x,
        algorithm: alg,
        scheme,
        mean_ee_sec_bps_hz_per_w: mean,
        std_ee_sec: var.sqrt(),
        convergence_rate: out.iter().filter(|o| o.converged).count() as f64 / out.len() as f64,
        mean_iters: mean_of(&|o| o.iters as f64),
        mean_m_active: mean_of(&|o| o.m_active as f64),
    }
}

/// Run one sweep point. Trials run on the rayon pool; results come back in
/// trial order, so the reduction is the same for any thread count.
pub fn run_point(spec: &SweepSpec, x: f64) -> (Vec<SweepRecord>, Vec<Vec<TrialOutcome>>) {
    let cfg = spec.variable.apply(&spec.base, x);
    let jobs: Vec<(Algorithm, Precoder)> = spec
        .algorithms
        .iter()
        .flat_map(|&a| spec.schemes.iter().map(move |&s| (a, s)))
        .collect();
    let per_trial: Vec<Vec<TrialOutcome>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(&cfg, t, spec.seed(), &jobs))
        .collect();
    let mut records = Vec::with_capacity(jobs.len());
    let mut dumps = Vec::with_capacity(jobs.len());
    for (j, &(alg, scheme)) in jobs.iter().enumerate() {
        let column: Vec<TrialOutcome> = per_trial.iter().map(|t| t[j].clone()).collect();
        records.push(aggregate(spec.variable, x, alg, scheme, &column));
        dumps.push(column);
    }
    (records, dumps)
}

/// Run the whole sweep in memory.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, HarnessError> {
    spec.validate()?;
    let mut result = SweepResult::default();
    for &x in &spec.values {
        let (records, trials) = run_point(spec, x);
        result.records.extend(records);
        result.trials.extend(trials);
    }
    Ok(result)
}

const ANTENNA_SWEEP: [f64; 11] = [
    50.0, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0, 225.0, 250.0, 275.0, 300.0,
];
const POWER_SWEEP: [f64; 11] = [0.5, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0, 40.0];

/// Names accepted by [`builtin_figure`].
pub const FIGURES: [&str; 8] = [
    "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9",
];

/// Builtin sweep for a figure name, with default parameters and 1000 trials.
pub fn builtin_figure(name: &str) -> Result<SweepSpec, HarnessError> {
    use Algorithm::*;
    let (variable, algorithms): (Variable, &[Algorithm]) = match name {
        "fig2" => (Variable::AntennaCount, &[Equal, Alg1, Alg2]),
        "fig3" => (Variable::MaxPower, &[Equal, Alg1, Alg2]),
        "fig4" => (Variable::AntennaCount, &[Equal, Alg1, Alg3]),
        "fig5" => (Variable::MaxPower, &[Equal, Alg1, Alg3]),
        "fig6" => (Variable::MaxPower, &[Alg2, Alg3]),
        "fig7" => (Variable::AntennaCount, &[Alg2, Alg3]),
        "fig8" => (Variable::AntennaCount, &[Alg2, Alg3, Alg4]),
        "fig9" => (Variable::MaxPower, &[Equal, Alg1, Alg2, Alg3, Alg4]),
        other => return Err(HarnessError::UnknownFigure(other.to_owned())),
    };
    let values = match variable {
        Variable::AntennaCount => ANTENNA_SWEEP.to_vec(),
        Variable::MaxPower => POWER_SWEEP.to_vec(),
    };
    Ok(SweepSpec {
        variable,
        values,
        algorithms: algorithms.to_vec(),
        schemes: Precoder::ALL.to_vec(),
        trials: default_trials(),
        base: SystemConfig::default(),
    })
}

/// Every builtin sweep by name.
pub fn builtin_figure_specs() -> Vec<(&'static str, SweepSpec)> {
    FIGURES
        .iter()
        .map(|&n| (n, builtin_figure(n).expect("builtin name")))
        .collect()
}

/// Write the table as CSV.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TrialRow<'a> {
    x_value: f64,
    algorithm: Algorithm,
    scheme: Precoder,
    trial: usize,
    ee_sec: Option<f64>,
    converged: bool,
    iters: usize,
    m_active: usize,
    error: Option<&'a str>,
}

/// Files written by [`run_sweep_to_dir`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    /// Sweep table.
    pub csv: PathBuf,
    /// Per-trial dump, when requested.
    pub trials: Option<PathBuf>,
    /// Manifest sidecar.
    pub manifest: PathBuf,
}

/// Everything needed to reproduce a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Tool name.
    pub tool: String,
    /// Tool version.
    pub version: String,
    /// Seconds since the Unix epoch at the end of the run.
    pub timestamp: u64,
    /// Figure name or spec file stem.
    pub name: String,
    /// Master seed.
    pub seed: u64,
    /// Resolved spec, including the full base config.
    pub spec: SweepSpec,
    /// Output files.
    pub outputs: OutputPaths,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_owned(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.to_owned(),
        source: e.into(),
    }
}

/// Run a sweep and write `<name>.csv`, `<name>.manifest.json` and, when
/// `dump_trials` is set, `<name>_trials.csv` into `dir`.
///
/// Tables are written point by point to `<name>.csv.partial`, which is
/// renamed once the sweep completes. An interrupted run leaves the finished
/// points behind.
pub fn run_sweep_to_dir(
    spec: &SweepSpec,
    name: &str,
    dir: &Path,
    dump_trials: bool,
) -> Result<(SweepResult, RunManifest), HarnessError> {
    spec.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join(format!("{name}.csv"));
    let trials_path = dir.join(format!("{name}_trials.csv"));
    let partial = |p: &Path| PathBuf::from(format!("{}.partial", p.display()));

    let table_tmp = partial(&csv_path);
    let file = File::create(&table_tmp).map_err(io_err(&table_tmp))?;
    let mut table = csv::Writer::from_writer(BufWriter::new(file));
    let trials_tmp = partial(&trials_path);
    let mut dump = if dump_trials {
        let file = File::create(&trials_tmp).map_err(io_err(&trials_tmp))?;
        Some(csv::Writer::from_writer(BufWriter::new(file)))
    } else {
        None
    };

    let mut result = SweepResult::default();
    for &x in &spec.values {
        let (records, trials) = run_point(spec, x);
        for r in &records {
            table.serialize(r).map_err(csv_err(&table_tmp))?;
        }
        table.flush().map_err(io_err(&table_tmp))?;
        if let Some(d) = dump.as_mut() {
            for (r, outs) in records.iter().zip(&trials) {
                for o in outs {
                    d.serialize(TrialRow {
                        x_value: x,
                        algorithm: r.algorithm,
                        scheme: r.scheme,
                        trial: o.trial,
                        ee_sec: o.ee_sec,
                        converged: o.converged,
                        iters: o.iters,
                        m_active: o.m_active,
                        error: o.error.as_deref(),
                    })
                    .map_err(csv_err(&trials_tmp))?;
                }
            }
            d.flush().map_err(io_err(&trials_tmp))?;
        }
        result.records.extend(records);
        result.trials.extend(trials);
    }
    drop(table);
    fs::rename(&table_tmp, &csv_path).map_err(io_err(&csv_path))?;
    if let Some(d) = dump {
        drop(d);
        fs::rename(&trials_tmp, &trials_path).map_err(io_err(&trials_path))?;
    }

    let manifest_path = dir.join(format!("{name}.manifest.json"));
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        name: name.to_owned(),
        seed: spec.seed(),
        spec: spec.clone(),
        outputs: OutputPaths {
            csv: csv_path,
            trials: dump_trials.then_some(trials_path),
            manifest: manifest_path.clone(),
        },
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, json + "\n").map_err(io_err(&manifest_path))?;
    Ok((result, manifest))
}
