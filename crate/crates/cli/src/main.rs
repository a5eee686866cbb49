//! `causal-order`: estimate cause-to-effect variable orders from CSV data,
//! query grouped mutual information, and run simulation benchmarks.

mod ingest;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use causal_order::{
    block_mi, generate_chain, run_benchmark, run_order, BenchCell, ChainSpec, Confounder,
    ConfounderPreset, Error as CoreError, Method, NoiseFamily, SearchConfig,
};
use clap::{Args, Parser, Subcommand};

use crate::ingest::ingest_csv;
use crate::report::{MiReport, OrderReport};

#[derive(Debug, Parser)]
#[command(name = "causal-order", version, about = "Causal ordering by minimal estimated confounding")]
struct Cli {
    #[command(flatten)]
    common: CommonOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonOpts {
    /// Neighbor count for the k-NN entropy estimator
    #[arg(long, global = true, default_value_t = 3)]
    k: usize,

    /// Seed for every random choice in the run
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Clamp negative MI estimates to zero (required for best-first search;
    /// with false the search expands the lattice exhaustively)
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set, value_name = "BOOL")]
    clamp_negative: bool,

    /// Node expansion budget for the search
    #[arg(long, global = true, default_value_t = 2_000_000)]
    max_nodes: u64,

    /// Cap on worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

impl CommonOpts {
    fn search_config(&self, method: Method) -> SearchConfig {
        SearchConfig {
            k: self.k,
            clamp_negative: self.clamp_negative,
            max_nodes: self.max_nodes,
            threads: self.threads,
            seed: self.seed,
            method,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the causal order of the columns of a CSV file
    Order {
        /// Input CSV (header row, numeric body)
        #[arg(long)]
        input: PathBuf,
        /// Search method: mmi, greedy, or brute
        #[arg(long, default_value = "mmi")]
        method: String,
    },
    /// Estimate the mutual information between two column blocks
    Mi {
        #[arg(long)]
        input: PathBuf,
        /// Columns of the first block (comma-separated names)
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<String>,
        /// Columns of the second block (comma-separated names)
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
    },
    /// Generate a synthetic causal chain with optional confounders
    Simulate {
        /// Number of variables
        #[arg(long)]
        p: usize,
        /// Number of samples
        #[arg(long)]
        n: usize,
        /// Structural noise family: uniform or laplace
        #[arg(long, default_value = "uniform")]
        noise: String,
        /// Structural noise scale
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
        /// Confounder layout: none, p6, p15, or p30
        #[arg(long, default_value = "none")]
        preset: String,
        /// Extra confounder as i:j:scale (repeatable)
        #[arg(long = "confounder", value_name = "I:J:SCALE")]
        confounders: Vec<String>,
        /// Write the CSV here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the sidecar JSON (spec + true order). Defaults to
        /// the --out path with a .json extension; printed to standard error
        /// when the CSV goes to standard output.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Run a (p, n) grid of simulated trials and score each method
    Bench {
        /// Chain sizes (comma-separated)
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<usize>,
        /// Sample sizes (comma-separated)
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Confounder layout applied to every cell
        #[arg(long, default_value = "none")]
        preset: String,
        /// Trials per cell and method
        #[arg(long, default_value_t = 50)]
        trials: u32,
        /// Methods to score (comma-separated)
        #[arg(long, value_delimiter = ',', default_value = "mmi,greedy")]
        methods: Vec<String>,
        /// Structural noise family
        #[arg(long, default_value = "uniform")]
        noise: String,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    // Exit codes: 0 success, 1 input/config error, 2 node-budget abort.
    // Clap's default of 2 for usage errors would collide with the abort code.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = cli.common.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        // Ignore the error from double initialization (tests call run twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(CoreError::TooManyNodes { limit }) = err.downcast_ref::<CoreError>() {
                // Machine-readable abort marker on stdout, diagnostics on stderr.
                println!(
                    "{}",
                    serde_json::json!({
                        "error": "too_many_nodes",
                        "message": err.to_string(),
                        "max_nodes": limit,
                    })
                );
                eprintln!("error: {err}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {err:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Order { input, method } => cmd_order(&cli.common, &input, &method),
        Command::Mi { input, x, y } => cmd_mi(&cli.common, &input, &x, &y),
        Command::Simulate { p, n, noise, noise_scale, preset, confounders, out, sidecar } => {
            cmd_simulate(&cli.common, p, n, &noise, noise_scale, &preset, &confounders, out, sidecar)
        }
        Command::Bench { p, n, preset, trials, methods, noise, out } => {
            cmd_bench(&cli.common, &p, &n, &preset, trials, &methods, &noise, &out)
        }
    }
}

fn cmd_order(common: &CommonOpts, input: &Path, method: &str) -> anyhow::Result<()> {
    let method: Method = method.parse::<Method>().map_err(|e| anyhow!(e))?;
    let data = ingest_csv(input)?;
    let config = common.search_config(method);
    let start = Instant::now();
    let result = run_order(&data, &config)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    println!("{}", serde_json::to_string(&OrderReport::new(&data, &result, elapsed_ms))?);
    Ok(())
}

fn resolve_columns(data: &causal_order::DataMatrix, names: &[String]) -> anyhow::Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            data.names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| anyhow!("unknown column '{name}'"))
        })
        .collect()
}

fn cmd_mi(common: &CommonOpts, input: &Path, x: &[String], y: &[String]) -> anyhow::Result<()> {
    let data = ingest_csv(input)?;
    let xi = resolve_columns(&data, x)?;
    let yi = resolve_columns(&data, y)?;
    if let Some(shared) = x.iter().find(|name| y.contains(name)) {
        bail!("column '{shared}' appears in both --x and --y (the blocks must be disjoint)");
    }
    let x_cols: Vec<&[f64]> = xi.iter().map(|&i| data.column(i)).collect();
    let y_cols: Vec<&[f64]> = yi.iter().map(|&i| data.column(i)).collect();
    let opts = common.search_config(Method::Mmi).mi_options();
    let estimate = block_mi(&x_cols, &y_cols, &opts)?;
    println!("{}", serde_json::to_string(&MiReport::from(estimate))?);
    Ok(())
}

fn parse_confounder(text: &str) -> anyhow::Result<Confounder> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 && parts.len() != 3 {
        bail!("confounder '{text}' must look like i:j or i:j:scale");
    }
    let first: usize = parts[0].parse().with_context(|| format!("bad confounder index in '{text}'"))?;
    let second: usize = parts[1].parse().with_context(|| format!("bad confounder index in '{text}'"))?;
    let scale: f64 = if parts.len() == 3 {
        parts[2].parse().with_context(|| format!("bad confounder scale in '{text}'"))?
    } else {
        1.0
    };
    Ok(Confounder::new(first, second, scale))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    common: &CommonOpts,
    p: usize,
    n: usize,
    noise: &str,
    noise_scale: f64,
    preset: &str,
    confounders: &[String],
    out: Option<PathBuf>,
    sidecar: Option<PathBuf>,
) -> anyhow::Result<()> {
    let preset: ConfounderPreset = preset.parse::<ConfounderPreset>().map_err(|e| anyhow!(e))?;
    let mut spec = ChainSpec::new(p, n, common.seed).with_preset(preset);
    spec.noise_family = noise.parse::<NoiseFamily>().map_err(|e| anyhow!(e))?;
    spec.noise_scale = noise_scale;
    for text in confounders {
        spec.confounders.push(parse_confounder(text)?);
    }
    let (data, true_order) = generate_chain(&spec)?;

    let mut csv = String::new();
    csv.push_str(&data.names().join(","));
    csv.push('\n');
    for row in 0..data.n() {
        for col in 0..data.p() {
            if col > 0 {
                csv.push(',');
            }
            csv.push_str(&data.column(col)[row].to_string());
        }
        csv.push('\n');
    }

    let sidecar_json = serde_json::json!({
        "spec": {
            "p": spec.p,
            "n": spec.n,
            "noise": spec.noise_family.to_string(),
            "noise_scale": spec.noise_scale,
            "seed": spec.seed,
            "preset": preset.to_string(),
            "confounders": spec.confounders.iter().map(|c| {
                serde_json::json!({"i": c.first, "j": c.second, "scale": c.scale})
            }).collect::<Vec<_>>(),
        },
        "true_order": true_order.iter().map(|&i| data.name(i)).collect::<Vec<_>>(),
    });

    match (&out, &sidecar) {
        (Some(path), _) => {
            let side_path = sidecar.clone().unwrap_or_else(|| path.with_extension("json"));
            if side_path == *path {
                bail!("--out and --sidecar point at the same file");
            }
            std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            std::fs::write(&side_path, format!("{sidecar_json}\n"))
                .with_context(|| format!("writing {}", side_path.display()))?;
        }
        (None, Some(side_path)) => {
            print!("{csv}");
            std::fs::write(side_path, format!("{sidecar_json}\n"))
                .with_context(|| format!("writing {}", side_path.display()))?;
        }
        (None, None) => {
            print!("{csv}");
            eprintln!("{sidecar_json}");
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    common: &CommonOpts,
    ps: &[usize],
    ns: &[usize],
    preset: &str,
    trials: u32,
    methods: &[String],
    noise: &str,
    out: &Path,
) -> anyhow::Result<()> {
    let preset: ConfounderPreset = preset.parse::<ConfounderPreset>().map_err(|e| anyhow!(e))?;
    let noise: NoiseFamily = noise.parse::<NoiseFamily>().map_err(|e| anyhow!(e))?;
    let methods: Vec<Method> = methods
        .iter()
        .map(|m| m.parse::<Method>().map_err(|e| anyhow!(e)))
        .collect::<anyhow::Result<_>>()?;
    let grid: Vec<BenchCell> = ps
        .iter()
        .flat_map(|&p| ns.iter().map(move |&n| BenchCell { p, n, preset }))
        .collect();
    let config = common.search_config(Method::Mmi);
    let records = run_benchmark(&grid, &methods, trials, noise, &config)?;

    let mut file = std::fs::File::create(out).with_context(|| format!("writing {}", out.display()))?;
    report::write_bench_csv(&mut file, &records)?;
    file.flush()?;
    report::write_bench_summary(&mut std::io::stderr().lock(), &records)?;
    Ok(())
}
