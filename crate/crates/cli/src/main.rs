//! `gch` — sampling, kernel export, verification, and benchmarks for the
//! Gaussian gating library.

use clap::{Parser, Subcommand, ValueEnum};
use gch_cli::config::{parse_grid, resolve_seed, RunConfig};
use gch_cli::fieldfile::write_field;
use gch_core::gates::{exact_wick_gate, samplewise_gate};
use gch_core::sampler::{
    build_plan, sample_gff_spectral, sine_transform_2d, sine_transform_2d_naive, Dst2d,
    RandomStream, TransformDirection,
};
use gch_core::verify::{
    negative_control_energy, reports_to_csv, reports_to_json_lines, run_all, run_named,
    suite_passed, CheckConfig, VerificationReport, CHECK_NAMES,
};
use gch_core::{GridSpec, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "gch", version, about = "Gaussian gating noise: sampling, kernels, verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormalizationArg {
    /// Sitewise mean-one Wick normalization exp(γψ − γ²v/2)
    Exact,
    /// Spatial-mean-one normalization exp(γψ) / mean(exp(γψ))
    Samplewise,
}

#[derive(clap::Args, Clone, Debug)]
struct CommonArgs {
    /// Grid shape as HxW, e.g. 4x4
    #[arg(long)]
    grid: Option<String>,
    /// Inverse temperature β (conflicts with --budget-eps)
    #[arg(long, conflicts_with = "budget_eps")]
    beta: Option<f64>,
    /// Total energy budget ε; sets β = n/(2ε)
    #[arg(long)]
    budget_eps: Option<f64>,
    /// Gate strength γ
    #[arg(long)]
    gamma: Option<f64>,
    /// Mass term μ added to the Laplacian
    #[arg(long)]
    mu: Option<f64>,
    /// Master seed (falls back to GCH_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// key = value configuration file; command-line flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw latent fields or gates and write them as binary field files
    Sample {
        #[command(flatten)]
        common: CommonArgs,
        /// Gate normalization; omit to write raw latent fields
        #[arg(long)]
        normalization: Option<NormalizationArg>,
        /// Number of samples to write
        #[arg(long)]
        n: Option<usize>,
        /// Output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the Green matrix, Green metric, variance map, and gate kernel as CSV
    Kernel {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite or individual named checks
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Dropout keep probability q
        #[arg(long)]
        q: Option<f64>,
        /// Monte Carlo sample count per check
        #[arg(long)]
        n: Option<usize>,
        /// Tolerance multiplier k for k·SE bands
        #[arg(long, default_value_t = 4.0)]
        tolerance_k: f64,
        /// Worker threads
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Run only the named checks (repeatable); see `--list`
        #[arg(long = "check")]
        checks: Vec<String>,
        /// List available check names and exit
        #[arg(long)]
        list: bool,
        /// Emit reports as JSON lines instead of human-readable rows
        #[arg(long)]
        json: bool,
        /// Also write a CSV summary to this path
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Self-test: append a check with a deliberately wrong target so the
        /// suite must fail
        #[arg(long, hide = true)]
        inject_failure: bool,
    },
    /// Time the fast sine transform against the naive oracle and the sampler
    Bench {
        /// Comma-separated square grid sizes
        #[arg(long, default_value = "16,32,64,128")]
        sizes: String,
        /// Timed repetitions per size
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample { common, normalization, n, out } => cmd_sample(common, normalization, n, out),
        Command::Kernel { common, out } => cmd_kernel(common, out),
        Command::Verify { common, q, n, tolerance_k, workers, checks, list, json, csv, inject_failure } => {
            return cmd_verify(common, q, n, tolerance_k, workers, checks, list, json, csv, inject_failure);
        }
        Command::Bench { sizes, reps } => cmd_bench(&sizes, reps),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

struct Resolved {
    grid: GridSpec,
    beta: f64,
    gamma: f64,
    seed: u64,
    config: RunConfig,
}

fn resolve_common(common: &CommonArgs) -> Result<Resolved> {
    let config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let (height, width) = match &common.grid {
        Some(text) => parse_grid(text)?,
        None => (config.height.unwrap_or(4), config.width.unwrap_or(4)),
    };
    let mut grid = GridSpec::new(height, width)?;
    if let Some(mu) = common.mu.or(config.mu) {
        grid = grid.with_mass(mu)?;
    }
    let mut beta_cfg = config.clone();
    if common.beta.is_some() || common.budget_eps.is_some() {
        beta_cfg.beta = common.beta;
        beta_cfg.eps = common.budget_eps;
    }
    let beta = beta_cfg.resolve_beta(grid.n())?;
    let gamma = common.gamma.or(config.gamma).unwrap_or(0.3);
    let seed = resolve_seed(common.seed.or(config.seed))?;
    Ok(Resolved { grid, beta, gamma, seed, config })
}

fn cmd_sample(
    common: CommonArgs,
    normalization: Option<NormalizationArg>,
    n: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let r = resolve_common(&common)?;
    let count = n.or(r.config.n).unwrap_or(1);
    let out = out
        .or_else(|| r.config.out.as_ref().map(PathBuf::from))
        .ok_or_else(|| gch_core::Error::InvalidParameter("--out is required".into()))?;
    std::fs::create_dir_all(&out)?;
    let plan = build_plan(&r.grid, r.beta)?;
    let mut rng = RandomStream::new(r.seed, 0).rng();
    for k in 0..count {
        let psi = sample_gff_spectral(&plan, &mut rng);
        let field = match normalization {
            None => psi,
            Some(NormalizationArg::Exact) => {
                exact_wick_gate(&psi, r.gamma, plan.variance_map(), r.beta)?.values().clone()
            }
            Some(NormalizationArg::Samplewise) => {
                samplewise_gate(&psi, r.gamma, r.beta).values().clone()
            }
        };
        write_field(&out.join(format!("sample_{k:05}.gchf")), &field)?;
    }
    println!(
        "wrote {count} {} file(s) to {}",
        if normalization.is_some() { "gate" } else { "latent-field" },
        out.display()
    );
    Ok(())
}

fn write_matrix_csv(path: &Path, rows: usize, cols: usize, get: impl Fn(usize, usize) -> f64) -> Result<()> {
    let mut text = String::new();
    for i in 0..rows {
        for j in 0..cols {
            if j > 0 {
                text.push(',');
            }
            text.push_str(&format!("{}", get(i, j)));
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_kernel(common: CommonArgs, out: Option<PathBuf>) -> Result<()> {
    let r = resolve_common(&common)?;
    let out = out
        .or_else(|| r.config.out.as_ref().map(PathBuf::from))
        .ok_or_else(|| gch_core::Error::InvalidParameter("--out is required".into()))?;
    std::fs::create_dir_all(&out)?;
    let n = r.grid.n();
    let g = r.grid.green_matrix()?;
    let tau = r.gamma * r.gamma / r.beta;
    write_matrix_csv(&out.join("green.csv"), n, n, |i, j| g[(i, j)])?;
    write_matrix_csv(&out.join("green_metric.csv"), n, n, |i, j| {
        gch_core::grid::green_metric_from(&g, i, j)
    })?;
    let v = r.grid.variance_map(r.beta)?;
    write_matrix_csv(&out.join("variance.csv"), r.grid.height(), r.grid.width(), |i, j| {
        v.values()[i * r.grid.width() + j]
    })?;
    write_matrix_csv(&out.join("gate_kernel.csv"), n, n, |i, j| (tau * g[(i, j)]).exp())?;
    println!("wrote green.csv, green_metric.csv, variance.csv, gate_kernel.csv to {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    common: CommonArgs,
    q: Option<f64>,
    n: Option<usize>,
    tolerance_k: f64,
    workers: usize,
    checks: Vec<String>,
    list: bool,
    json: bool,
    csv: Option<PathBuf>,
    inject_failure: bool,
) -> ExitCode {
    if list {
        for name in CHECK_NAMES {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    for name in &checks {
        if !CHECK_NAMES.contains(&name.as_str()) {
            eprintln!("error: unknown check name `{name}`; valid names: {}", CHECK_NAMES.join(", "));
            return ExitCode::from(2);
        }
    }
    let run = || -> Result<Vec<VerificationReport>> {
        let r = resolve_common(&common)?;
        let cfg = CheckConfig::new(
            r.grid.height(),
            r.grid.width(),
            r.beta,
            r.gamma,
            q.or(r.config.q).unwrap_or(0.7),
            n.or(r.config.n).unwrap_or(200_000),
            r.seed,
        )?
        .with_tolerance_k(tolerance_k)?;
        let mut reports = if checks.is_empty() {
            run_all(&cfg, workers)?
        } else {
            checks.iter().map(|name| run_named(&cfg, name)).collect::<Result<Vec<_>>>()?
        };
        if inject_failure {
            let mut bad = negative_control_energy(&cfg)?;
            bad.check = "injected_failure".into();
            bad.negative_control = false;
            reports.push(bad);
        }
        Ok(reports)
    };
    let reports = match run() {
        Ok(reports) => reports,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if json {
        print!("{}", reports_to_json_lines(&reports));
    } else {
        for r in &reports {
            let status = match (r.pass, r.negative_control) {
                (true, false) => "PASS",
                (false, false) => "FAIL",
                (false, true) => "PASS (control failed as required)",
                (true, true) => "FAIL (control unexpectedly passed)",
            };
            println!(
                "{status:<34} {:<22} empirical {:.6e}  target {:.6e}  tol {:.3e}  [{:.0} ms]",
                r.check, r.empirical, r.theoretical, r.tolerance, r.wall_time_ms
            );
        }
    }
    if let Some(path) = csv {
        if let Err(e) = std::fs::write(&path, reports_to_csv(&reports)) {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    if suite_passed(&reports) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn cmd_bench(sizes: &str, reps: usize) -> Result<()> {
    let sizes: Vec<usize> = sizes
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| gch_core::Error::InvalidParameter(format!("bad size `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let reps = reps.max(1);
    println!("size,n,fast_us,naive_us,samples_per_sec");
    for &size in &sizes {
        let grid = GridSpec::new(size, size)?;
        let plan = build_plan(&grid, 1.0)?;
        let dst = Dst2d::new(size, size);
        let mut rng = RandomStream::new(0, 0).rng();
        let data = sample_gff_spectral(&plan, &mut rng).into_values();

        let t0 = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(dst.transform(std::hint::black_box(&data))?);
        }
        let fast_us = t0.elapsed().as_secs_f64() * 1e6 / reps as f64;

        let t0 = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(sine_transform_2d_naive(std::hint::black_box(&data), size, size)?);
        }
        let naive_us = t0.elapsed().as_secs_f64() * 1e6 / reps as f64;

        let t0 = Instant::now();
        let draws = 50.max(reps);
        for _ in 0..draws {
            std::hint::black_box(sample_gff_spectral(&plan, &mut rng));
        }
        let per_sec = draws as f64 / t0.elapsed().as_secs_f64();

        // keep the one-shot helper exercised so both entry points stay honest
        let _ = sine_transform_2d(&data, size, size, TransformDirection::Forward)?;
        println!("{size},{},{fast_us:.2},{naive_us:.2},{per_sec:.1}", grid.n());
    }
    Ok(())
}
