//! Command-line frontend: config loading, seeded execution, CSV/JSON output.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{
    load_config, validate_fidelity, ConfigError, ConvergenceConfig, DecayCurveConfig,
    EpcHeatmapConfig, GenLatencyConfig, RateSweepConfig, TrajectoryConfig, DQC_THRESHOLD,
    QKD_THRESHOLD,
};
use crate::contour::iso_contour;
use crate::decoherence::{
    convergence_report, fidelity_decay_curve, DecoherenceError, IntegratorConfig,
};
use crate::experiments::{
    distillable_rate_sweep, fidelity_vs_budget_grid, run_trajectory, ExperimentError, GridSpec,
};
use crate::network::{synthetic_lognormal, write_latency_csv, NetworkError};
use crate::purify::{DejmpsVariant, Protocol, TwirlMode};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Decoherence(#[from] DecoherenceError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Entanglement purification simulator with finite classical-latency
/// decoherence.
#[derive(Debug, Parser)]
#[command(name = "epsim", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed recorded in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Idle-storage fidelity decay versus latency, per memory technology.
    DecayCurve(CommonArgs),
    /// Per-round purification trajectories at each latency.
    Trajectory(CommonArgs),
    /// Achievable fidelity over (pair budget E, latency), with iso-fidelity
    /// contours.
    EpcHeatmap(CommonArgs),
    /// Distillable rate R(F_th) versus latency per protocol and threshold.
    RateSweep(CommonArgs),
    /// Integrator substep-count convergence check.
    Convergence(CommonArgs),
    /// Generate a synthetic log-normal latency CSV.
    GenLatency(CommonArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::DecayCurve(args) => cmd_decay_curve(&args),
        Command::Trajectory(args) => cmd_trajectory(&args),
        Command::EpcHeatmap(args) => cmd_epc_heatmap(&args),
        Command::RateSweep(args) => cmd_rate_sweep(&args),
        Command::Convergence(args) => cmd_convergence(&args),
        Command::GenLatency(args) => cmd_gen_latency(&args),
    }
}

/// A flat result table plus its provenance metadata.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
    metadata: Value,
}

fn cell_to_csv(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn write_output(path: &Path, format: OutputFormat, table: &Table) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    match format {
        OutputFormat::Csv => {
            // Comment block carries the full resolved config and seed so the
            // file is self-describing.
            let mut text = format!(
                "# metadata: {}\n{}\n",
                serde_json::to_string(&table.metadata).expect("metadata serializes"),
                table.columns.join(",")
            );
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(cell_to_csv).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            file.write_all(text.as_bytes()).map_err(io_err)
        }
        OutputFormat::Json => {
            let doc = json!({
                "metadata": table.metadata,
                "columns": table.columns,
                "rows": table.rows,
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("document serializes");
            text.push('\n');
            file.write_all(text.as_bytes()).map_err(io_err)
        }
    }
}

fn num(v: f64) -> Value {
    json!(v)
}

/// Derive independent per-series seeds from the user seed (SplitMix64).
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn latency_rng(seed: u64) -> ChaCha8Rng {
    // Stream 0 is reserved for latency-source draws.
    ChaCha8Rng::seed_from_u64(seed)
}

fn cmd_decay_curve(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: DecayCurveConfig = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    validate_fidelity(cfg.f0, "f0")?;
    if cfg.memories.is_empty() {
        return Err(ConfigError::Invalid("memories list is empty".into()).into());
    }
    let latencies_ms = cfg.latency.resolve(&mut latency_rng(seed))?;
    let mut rows = Vec::new();
    for spec in &cfg.memories {
        let mem = spec.resolve()?;
        let secs: Vec<f64> = latencies_ms.iter().map(|&l| l * 1e-3).collect();
        for ((_, f), &lat_ms) in fidelity_decay_curve(&mem, &secs, cfg.f0)?
            .into_iter()
            .zip(&latencies_ms)
        {
            rows.push(vec![json!(spec.label()), num(lat_ms), num(f)]);
        }
    }
    write_output(
        &args.out,
        args.format,
        &Table {
            columns: vec!["series", "latency_ms", "fidelity"],
            rows,
            metadata: json!({
                "command": "decay-curve",
                "config": cfg,
                "seed": seed,
                "thresholds": {"qkd": QKD_THRESHOLD, "dqc": DQC_THRESHOLD},
            }),
        },
    )
}

fn cmd_trajectory(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: TrajectoryConfig = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    validate_fidelity(cfg.f0, "f0")?;
    let mem = cfg.memory.resolve()?;
    let latencies_ms = cfg.latency.resolve(&mut latency_rng(seed))?;
    let integrator = IntegratorConfig::new(cfg.substeps);
    let mut rows = Vec::new();
    for (i, &lat) in latencies_ms.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let traj = run_trajectory(
            cfg.protocol,
            cfg.f0,
            lat,
            &mem,
            cfg.max_rounds,
            &integrator,
            &mut rng,
        )?;
        for rec in &traj.records {
            rows.push(vec![
                num(lat),
                json!(rec.round),
                num(rec.pre_fidelity),
                num(rec.success_prob),
                num(rec.post_fidelity),
            ]);
        }
    }
    write_output(
        &args.out,
        args.format,
        &Table {
            columns: vec![
                "latency_ms",
                "round",
                "pre_fidelity",
                "success_prob",
                "post_fidelity",
            ],
            rows,
            metadata: json!({
                "command": "trajectory",
                "config": cfg,
                "seed": seed,
            }),
        },
    )
}

fn cmd_epc_heatmap(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: EpcHeatmapConfig = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    validate_fidelity(cfg.f0, "f0")?;
    let mem = cfg.memory.resolve()?;
    let latencies_ms = cfg.latency.resolve(&mut latency_rng(seed))?;
    let spec = GridSpec {
        budgets: cfg.budgets.values()?,
        latencies_ms,
        mc_samples: cfg.mc_samples,
        max_rounds: cfg.max_rounds,
    };
    let grid = fidelity_vs_budget_grid(
        cfg.protocol,
        cfg.f0,
        &mem,
        &spec,
        &IntegratorConfig::new(cfg.substeps),
        seed,
    )?;

    let levels = [cfg.f0, QKD_THRESHOLD, DQC_THRESHOLD];
    let contours: Vec<Value> = levels
        .iter()
        .map(|&level| {
            let polylines: Vec<Vec<[f64; 2]>> = iso_contour(&grid, level)
                .into_iter()
                .map(|p| p.points.iter().map(|&(e, t)| [e, t]).collect())
                .collect();
            json!({"level": level, "polylines": polylines})
        })
        .collect();

    let mut rows = Vec::new();
    for (bi, &budget) in grid.xs.iter().enumerate() {
        for (li, &lat) in grid.ys.iter().enumerate() {
            rows.push(vec![num(budget), num(lat), num(grid.values[bi][li])]);
        }
    }
    write_output(
        &args.out,
        args.format,
        &Table {
            columns: vec!["budget_e", "latency_ms", "fidelity"],
            rows,
            metadata: json!({
                "command": "epc-heatmap",
                "config": cfg,
                "seed": seed,
                "contour_levels": levels,
                "contours": contours,
            }),
        },
    )
}

fn default_protocol_pair() -> Vec<Protocol> {
    vec![
        Protocol::Dejmps {
            variant: DejmpsVariant::ConjugateB,
        },
        Protocol::Bbpssw {
            twirl: TwirlMode::Deterministic,
        },
    ]
}

fn cmd_rate_sweep(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: RateSweepConfig = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    validate_fidelity(cfg.f0, "f0")?;
    for &t in &cfg.thresholds {
        validate_fidelity(t, "threshold")?;
    }
    if cfg.thresholds.is_empty() {
        return Err(ConfigError::Invalid("thresholds list is empty".into()).into());
    }
    let protocols = if cfg.protocols.is_empty() {
        default_protocol_pair()
    } else {
        cfg.protocols.clone()
    };
    let mem = cfg.memory.resolve()?;
    let latencies_ms = cfg.latency.resolve(&mut latency_rng(seed))?;
    let integrator = IntegratorConfig::new(cfg.substeps);

    let mut rows = Vec::new();
    let mut series = 0u64;
    for &protocol in &protocols {
        for &f_th in &cfg.thresholds {
            let curve = distillable_rate_sweep(
                protocol,
                cfg.f0,
                f_th,
                &mem,
                &latencies_ms,
                &cfg.link,
                cfg.max_rounds,
                &integrator,
                derive_seed(seed, series),
            )?;
            series += 1;
            for &(lat, rate) in &curve.points {
                rows.push(vec![
                    json!(protocol.label()),
                    num(f_th),
                    num(lat),
                    num(rate),
                ]);
            }
        }
    }
    write_output(
        &args.out,
        args.format,
        &Table {
            columns: vec!["protocol", "f_th", "latency_ms", "rate_pairs_per_s"],
            rows,
            metadata: json!({
                "command": "rate-sweep",
                "config": cfg,
                "seed": seed,
            }),
        },
    )
}

fn cmd_convergence(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: ConvergenceConfig = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    validate_fidelity(cfg.f0, "f0")?;
    if cfg.dt_ms.is_empty() || cfg.nus.is_empty() {
        return Err(ConfigError::Invalid("dt_ms and nus must be non-empty".into()).into());
    }
    let mem = cfg.memory.resolve()?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (i, &dt_ms) in cfg.dt_ms.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let report = convergence_report(
            &mem,
            dt_ms * 1e-3,
            &cfg.nus,
            cfg.rounds,
            cfg.protocol,
            cfg.f0,
            &mut rng,
        )?;
        let reference = report
            .nus
            .iter()
            .enumerate()
            .max_by_key(|(_, &nu)| nu)
            .map(|(idx, _)| idx)
            .expect("nus non-empty");
        for (ni, &nu) in report.nus.iter().enumerate() {
            for (round, &f) in report.fidelities[ni].iter().enumerate() {
                let deviation = (f - report.fidelities[reference][round]).abs();
                rows.push(vec![
                    num(dt_ms),
                    json!(nu),
                    json!(round + 1),
                    num(f),
                    num(deviation),
                ]);
            }
            summaries.push(json!({
                "dt_ms": dt_ms,
                "nu": nu,
                "max_deviation": report.max_deviation[ni],
            }));
        }
    }
    write_output(
        &args.out,
        args.format,
        &Table {
            columns: vec!["dt_ms", "nu", "round", "fidelity", "deviation"],
            rows,
            metadata: json!({
                "command": "convergence",
                "config": cfg,
                "seed": seed,
                "max_deviations": summaries,
            }),
        },
    )
}

fn cmd_gen_latency(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: GenLatencyConfig = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    if cfg.count == 0 {
        return Err(ConfigError::Invalid("count must be at least 1".into()).into());
    }
    if !(cfg.sigma_log > 0.0 && cfg.sigma_log.is_finite()) {
        return Err(ConfigError::Invalid(format!(
            "sigma_log must be positive, got {}",
            cfg.sigma_log
        ))
        .into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = synthetic_lognormal(cfg.mu_log_ms, cfg.sigma_log, cfg.count, &mut rng);
    write_latency_csv(&args.out, &samples)?;
    // The latency CSV format has a fixed header, so provenance goes to a
    // sidecar instead of a comment block.
    let sidecar = args.out.with_extension("meta.json");
    let metadata = json!({
        "command": "gen-latency",
        "config": cfg,
        "seed": seed,
        "output": args.out.display().to_string(),
    });
    let mut text = serde_json::to_string_pretty(&metadata).expect("metadata serializes");
    text.push('\n');
    std::fs::write(&sidecar, text).map_err(|source| CliError::Io {
        path: sidecar.display().to_string(),
        source,
    })
}
