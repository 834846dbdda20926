use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reram_dse::config::ToolkitConfig;
use reram_dse::error::{CliError, Result};
use reram_dse::parallel::default_workers;
use reram_dse::store;
use reram_dse::workspace::{calibrate, describe_warnings, load_anchors, CacheStatus, Workspace};
use reram_dse_core::circuit::CrossbarConfig;
use reram_dse_core::dse::{Constraints, ElmoreCap, SearchGrid};

/// ReRAM crossbar characterization and design-space exploration.
#[derive(Parser, Debug)]
#[command(name = "reram-dse", version, about)]
struct Cli {
    /// Config file (TOML). Built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Workspace directory; overrides the config.
    #[arg(long, global = true, env = "RERAM_DSE_WORKSPACE")]
    workspace: Option<PathBuf>,
    /// Worker threads for characterization and calibration.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Reserved; every stage is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Per-segment progress.
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Errors only.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit g_lrs and r_seg to conductance anchors and write a new config.
    Calibrate {
        /// Anchors file (TOML, [[anchor]] entries).
        #[arg(long)]
        anchors: PathBuf,
        /// Output config path.
        #[arg(long, default_value = "calibrated.toml")]
        out: PathBuf,
    },
    /// Simulate the configured sizes (cached by fingerprint).
    Characterize {
        /// Sizes to run; defaults to the config list.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// ADC resolutions; defaults to the config list.
        #[arg(long, value_delimiter = ',')]
        bits: Option<Vec<u32>>,
    },
    /// Build the surrogate from characterized sizes.
    Surrogate,
    /// Search the design space on the surrogate.
    Explore(ExploreArgs),
    /// Summarize the workspace.
    Report,
}

#[derive(Args, Debug)]
struct ExploreArgs {
    /// Power budget (W).
    #[arg(long)]
    max_power: Option<f64>,
    /// Normalized worst-case RMSE threshold.
    #[arg(long)]
    max_rmse: Option<f64>,
    /// Cap frequency by the wire Elmore delay.
    #[arg(long)]
    elmore_cap: bool,
    /// Allow a search without constraints.
    #[arg(long)]
    unconstrained: bool,
    /// Single frequency (Hz).
    #[arg(long, conflicts_with_all = ["f_min", "f_max", "f_step"])]
    fix_f: Option<f64>,
    /// Lowest frequency (Hz).
    #[arg(long)]
    f_min: Option<f64>,
    /// Highest frequency (Hz).
    #[arg(long)]
    f_max: Option<f64>,
    /// Frequency step (Hz).
    #[arg(long)]
    f_step: Option<f64>,
    /// Single resolution.
    #[arg(long, conflicts_with_all = ["bits_min", "bits_max"])]
    fix_bits: Option<u32>,
    /// Lowest resolution; defaults to the surrogate range.
    #[arg(long)]
    bits_min: Option<u32>,
    /// Highest resolution; defaults to the surrogate range.
    #[arg(long)]
    bits_max: Option<u32>,
    /// Smallest array; defaults to the surrogate range.
    #[arg(long)]
    n_min: Option<usize>,
    /// Largest array; defaults to the surrogate range.
    #[arg(long)]
    n_max: Option<usize>,
    /// Array size step.
    #[arg(long, default_value_t = 1)]
    n_step: usize,
}

const DEFAULT_F_MIN: f64 = 10e6;
const DEFAULT_F_MAX: f64 = 500e6;
const DEFAULT_F_STEP: f64 = 1e6;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        "error"
    } else if cli.verbose {
        "debug"
    } else {
        "info"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ToolkitConfig::load(p)?,
        None => ToolkitConfig::default(),
    };
    let root = cli
        .workspace
        .clone()
        .or_else(|| cfg.paths.workspace.clone())
        .unwrap_or_else(|| PathBuf::from("workspace"));
    let ws = Workspace::new(root);
    let workers = match cli.workers {
        Some(0) => return Err(CliError::Usage("--workers must be >= 1".into())),
        Some(w) => w,
        None => default_workers(),
    };
    if let Some(seed) = cli.seed {
        log::debug!("seed {seed} ignored: the pipeline is deterministic");
    }
    match cli.command {
        Command::Calibrate { anchors, out } => cmd_calibrate(&cfg, &anchors, &out, workers),
        Command::Characterize { sizes, bits } => {
            let sizes = sizes.unwrap_or_else(|| cfg.surrogate.sizes.clone());
            let bits = bits.unwrap_or_else(|| cfg.surrogate.bits_list.clone());
            if sizes.is_empty() || sizes.contains(&0) {
                return Err(CliError::Usage("--sizes must list sizes >= 1".into()));
            }
            for o in ws.characterize(&cfg, &sizes, &bits, workers)? {
                let tag = match o.status {
                    CacheStatus::Cached => "cached",
                    CacheStatus::Computed => "computed",
                };
                println!("N={:<5} {tag:<9} {}", o.n, o.dir.display());
            }
            Ok(())
        }
        Command::Surrogate => {
            let out = ws.surrogate(&cfg)?;
            let m = &out.model;
            println!("surrogate {} -> {}", m.model_fingerprint, ws.surrogate_path().display());
            println!("sizes {:?}, bits {:?}", m.sizes, m.bits);
            for (a, b, d) in &out.collapse.pairs {
                let flag = if *d <= out.collapse_gate { "ok" } else { "EXCEEDS GATE" };
                println!("collapse N={a} vs N={b}: max deviation {d:.4} ({flag})");
            }
            for w in describe_warnings(&m.warnings) {
                println!("warning: {w}");
            }
            Ok(())
        }
        Command::Explore(args) => cmd_explore(&cfg, &ws, &args),
        Command::Report => cmd_report(&cfg, &ws),
    }
}

fn cmd_calibrate(cfg: &ToolkitConfig, anchors: &Path, out: &Path, workers: usize) -> Result<()> {
    let anchors = load_anchors(anchors)?;
    let (updated, outcome) = calibrate(cfg, &anchors, workers)?;
    for ((a, sim), res) in anchors.iter().zip(&outcome.simulated).zip(&outcome.residuals) {
        println!(
            "anchor N={} block={}: target {:.6} S, simulated {:.6} S, residual {:+.3e}",
            a.array_size, a.sub_size, a.sum_g, sim, res
        );
    }
    println!(
        "g_lrs = {:e} S, r_seg = {:e} ohm after {} iterations",
        outcome.params.g_lrs, outcome.params.r_seg, outcome.iterations
    );
    std::fs::write(out, updated.to_toml()).map_err(|e| CliError::io(out, e))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_explore(cfg: &ToolkitConfig, ws: &Workspace, a: &ExploreArgs) -> Result<()> {
    let model = ws.load_surrogate(cfg)?;
    let f = match a.fix_f {
        Some(f) => vec![f],
        None => SearchGrid::steps(
            a.f_min.unwrap_or(DEFAULT_F_MIN),
            a.f_max.unwrap_or(DEFAULT_F_MAX),
            a.f_step.unwrap_or(DEFAULT_F_STEP),
        )?,
    };
    let bits = match a.fix_bits {
        Some(b) => vec![b],
        None => (a.bits_min.unwrap_or(model.bits[0])..=a.bits_max.unwrap_or(*model.bits.last().expect("validated"))).collect(),
    };
    if a.n_step == 0 {
        return Err(CliError::Usage("--n-step must be >= 1".into()));
    }
    let n = (a.n_min.unwrap_or(model.sizes[0])..=a.n_max.unwrap_or(*model.sizes.last().expect("validated")))
        .step_by(a.n_step)
        .collect();
    let grid = SearchGrid { n, f, bits };
    let constraints = Constraints {
        max_power: a.max_power,
        max_rmse: a.max_rmse,
        elmore: a.elmore_cap.then(|| ElmoreCap {
            crossbar: CrossbarConfig { n: 1, ..cfg.crossbar(1) },
            k_settle: cfg.wire.k_settle,
        }),
        unconstrained: a.unconstrained,
    };
    let out = ws.explore(cfg, &grid, &constraints)?;
    let o = &out.report.optimum;
    println!(
        "optimum N={} f={:.3} MHz bits={}",
        o.point.n,
        o.point.f / 1e6,
        o.point.bits
    );
    println!(
        "power {:.4} W (array {:.4} W, ADC {:.4} W), throughput {:.4e} OPs/s, efficiency {:.4} TOPs/s/W",
        o.power.total, o.power.array, o.power.adc, o.throughput, o.efficiency
    );
    if let Some(r) = o.rmse {
        println!("normalized RMSE {r:.4}");
    }
    let binding: Vec<&str> = out.report.binding.iter().map(|b| b.as_str()).collect();
    println!("binding: {}", if binding.is_empty() { "none".to_owned() } else { binding.join(", ") });
    println!("wrote {}", out.dir.display());
    Ok(())
}

fn cmd_report(cfg: &ToolkitConfig, ws: &Workspace) -> Result<()> {
    println!("workspace {}", ws.root().display());
    println!("config fingerprint {}", cfg.fingerprint()?);
    let expected = cfg.setup(1)?.physics_fingerprint();
    let mut dirs: Vec<(usize, PathBuf)> = std::fs::read_dir(ws.root().join("characterize"))
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter_map(|e| {
                    let name = e.file_name().into_string().ok()?;
                    Some((name.strip_prefix('N')?.parse().ok()?, e.path()))
                })
                .collect()
        })
        .unwrap_or_default();
    dirs.sort();
    for (n, dir) in dirs {
        match store::read_characterization(&dir) {
            Ok((meta, r)) => {
                let stale = if meta.physics_fingerprint == expected { "" } else { " (stale)" };
                println!(
                    "N={n:<5} sum_g {:.6} S, analog RMSE_max {:.4e} (normalized), bits {:?}{stale}",
                    r.cumulative_conductance,
                    r.normalized_rmse_max(None).unwrap_or(f64::NAN),
                    meta.bits
                );
            }
            Err(e) if dir.join("error.txt").exists() => println!("N={n:<5} failed: {e}"),
            Err(e) => println!("N={n:<5} unreadable: {e}"),
        }
    }
    match store::read_surrogate(&ws.surrogate_path()) {
        Ok(m) => println!(
            "surrogate {} sizes {:?} bits {:?}, {} warnings",
            m.model_fingerprint,
            m.sizes,
            m.bits,
            m.warnings.len()
        ),
        Err(_) => println!("no surrogate"),
    }
    let mut runs: Vec<PathBuf> = std::fs::read_dir(ws.root().join("explore"))
        .map(|rd| rd.filter_map(|e| e.ok()).map(|e| e.path()).collect())
        .unwrap_or_default();
    runs.sort();
    for run in runs {
        let path = run.join("report.json");
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(r) = serde_json::from_str::<reram_dse::workspace::ExploreReport>(&text) {
                let o = r.optimum;
                println!(
                    "explore {}: N={} f={:.3} MHz bits={} -> {:.4} TOPs/s/W",
                    r.run_id,
                    o.point.n,
                    o.point.f / 1e6,
                    o.point.bits,
                    o.efficiency
                );
            }
        }
    }
    Ok(())
}
