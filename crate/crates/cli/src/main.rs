use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leoem::{
    emit_results, run_trial, sweep_bem_order, sweep_em_iterations, sweep_snr, Method, RunOptions,
    SweepResult, SystemConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "leoem",
    version,
    about = "EM + DLP-BEM channel estimation sweeps for mMIMO LEO uplinks"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Monte Carlo trials per sweep point
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Base seed; trial i uses seed + i
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV files
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Estimators to score (comma separated: pb,pls,em)
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Print the resolved configuration and exit
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// NMSE and SER versus SNR
    SweepSnr {
        /// SNR points in dB
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "-5,0,5,10,15,20"
        )]
        snr_grid: Vec<f64>,
    },
    /// EM NMSE versus number of iterations
    SweepIters {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        iter_grid: Vec<usize>,
        /// One output file per SNR
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "0,10"
        )]
        snr_grid: Vec<f64>,
    },
    /// EM NMSE versus basis order D
    SweepD {
        /// Basis orders; defaults to 3..=n_data
        #[arg(long, value_delimiter = ',')]
        d_grid: Option<Vec<usize>>,
        /// Operating SNR in dB (overrides config snr_db)
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
    },
    /// Run a single trial and print per-method metrics
    Trial {
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
    },
}

fn resolve_config(common: &Common) -> leoem::Result<SystemConfig> {
    let mut cfg = match &common.config {
        Some(path) => SystemConfig::from_file(path)?,
        None => SystemConfig::default(),
    };
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(s) = common.seed {
        cfg.base_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn options(cfg: &SystemConfig, common: &Common, default_methods: &[Method]) -> RunOptions {
    let methods = common
        .methods
        .clone()
        .unwrap_or_else(|| default_methods.to_vec());
    RunOptions {
        workers: common.workers,
        ..RunOptions::from_config(cfg).with_methods(&methods)
    }
}

fn write(result: &SweepResult, dir: &Path, stem: &str) -> leoem::Result<()> {
    fs::create_dir_all(dir)?;
    let (csv, dat) = emit_results(result, dir.join(format!("{stem}.csv")))?;
    println!("wrote {} and {}", csv.display(), dat.display());
    Ok(())
}

fn summarize(result: &SweepResult) {
    for p in &result.points {
        let cols: Vec<String> = p
            .methods
            .iter()
            .map(|m| {
                format!(
                    "{}: nmse={:.4e} ser={:.4}",
                    m.method, m.mean_nmse, m.mean_ser
                )
            })
            .collect();
        println!("{} = {:>6}  {}", result.axis, p.value, cols.join("  "));
    }
}

fn snr_label(snr: f64) -> String {
    format!("{snr}").replace('-', "m").replace('.', "p")
}

fn run(cli: Cli) -> leoem::Result<()> {
    let mut cfg = resolve_config(&cli.common)?;
    match &cli.command {
        Command::SweepD { snr: Some(s), .. } | Command::Trial { snr: Some(s) } => cfg.snr_db = *s,
        _ => {}
    }
    if cli.common.print_config {
        print!("{}", cfg.to_config_string());
        return Ok(());
    }
    let out = &cli.common.out;
    match cli.command {
        Command::SweepSnr { snr_grid } => {
            let r = sweep_snr(&cfg, &snr_grid, &options(&cfg, &cli.common, &Method::ALL))?;
            summarize(&r);
            write(&r, out, "sweep_snr")?;
        }
        Command::SweepIters {
            iter_grid,
            snr_grid,
        } => {
            let opts = options(&cfg, &cli.common, &[Method::Em]);
            for (snr, r) in sweep_em_iterations(&cfg, &iter_grid, &snr_grid, &opts)? {
                println!("snr_db = {snr}");
                summarize(&r);
                write(&r, out, &format!("sweep_iters_snr{}", snr_label(snr)))?;
            }
        }
        Command::SweepD { d_grid, .. } => {
            let grid = d_grid.unwrap_or_else(|| (3.min(cfg.n_data)..=cfg.n_data).collect());
            let r = sweep_bem_order(&cfg, &grid, &options(&cfg, &cli.common, &[Method::Em]))?;
            summarize(&r);
            if let Some(best) = r.argmin_nmse(Method::Em) {
                println!("argmin D = {best}");
            }
            write(&r, out, "sweep_d")?;
        }
        Command::Trial { .. } => {
            let methods = cli
                .common
                .methods
                .clone()
                .unwrap_or_else(|| Method::ALL.to_vec());
            println!("seed = {}, snr_db = {}", cfg.base_seed, cfg.snr_db);
            for m in run_trial(&cfg, cfg.base_seed)? {
                if methods.contains(&m.method) {
                    println!(
                        "{:>4}  nmse = {:.6e}  ser = {:.4}  n_em = {}  D = {}",
                        m.method, m.nmse, m.ser, m.n_em, m.d_order
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
