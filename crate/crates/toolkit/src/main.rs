use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mchaos_core::cascades::CascadeSampler;
use mchaos_core::coverings::{chi, CoveringSampler};
use mchaos_core::gaussian::{decomposition_for, GmcConfig, GmcSampler};
use mchaos_core::kernels::{check_sigma_regular, ExpBump, KernelKind, SigmaTolerances};
use mchaos_core::spectral::{
    box_dim_mask, correlation_dim, ensemble_band_statistics, estimate_fourier_dim, fourier_coefficients, BandTrim,
    DimensionEstimate, FourierMode,
};
use mchaos_core::theory::{cascade_bound, covering_bound, d_gamma, d_sigma, lf_bound, MomentProfile};
use mchaos_core::{BAdicGrid, MeasureSampler};
use serde::Serialize;
use serde_json::json;

use mchaos::compare::{any_failed, compare, table};
use mchaos::config::{default_levels, ExperimentConfig, LambdaSpec, WeightLawSpec};
use mchaos::ensemble::{map_samples, resolve_threads};
use mchaos::error::{Result, StageExt, ToolError};
use mchaos::io::{csv_string, read_field, read_json, read_mask, write_field, write_json, write_mask, BandRow};
use mchaos::models::CHI_BANDS;
use mchaos::run::{default_out, execute, RunRecord};

#[derive(Parser)]
#[command(
    name = "mchaos",
    version,
    about = "Finite-level multiplicative chaos: theory, simulation and Fourier dimension"
)]
struct Cli {
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MCHAOS_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form and optimized predictions.
    #[command(subcommand)]
    Theory(Theory),
    /// Regularity and positivity checks.
    #[command(subcommand)]
    Verify(Verify),
    /// Draw an ensemble and write fields (and masks) to `--out`.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Dimension estimates from stored fields or masks.
    #[command(subcommand)]
    Estimate(Estimate),
    /// Run an experiment config end to end.
    Run { config: PathBuf },
    /// Verdicts for a run record; exit code 3 if any estimate fails.
    Compare { record: PathBuf },
}

#[derive(Subcommand)]
enum Theory {
    /// Fourier dimension `D_{gamma,d}` of sub-critical GMC.
    DGamma {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Dimension `D_sigma` of the GBM cascade.
    DSigma {
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 2)]
        b: u32,
    },
    /// `L_F` for a built-in moment profile.
    Lf {
        #[arg(long, value_enum)]
        model: ProfileKind,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        chi: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        alpha0: f64,
        #[arg(long, default_value_t = 2.0)]
        p0: f64,
        #[arg(long, default_value_t = 2)]
        b: u32,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Covering bound `1 - chi` or `1 - (1-a)^2 chi`.
    ChiBound {
        /// `chi(b, Lambda)`; computed from `--lambda` when absent.
        #[arg(long)]
        chi: Option<f64>,
        /// Lambda spec as JSON.
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long, default_value_t = 2)]
        b: u32,
    },
    /// Cascade lower bound for a weight law given as JSON.
    CascadeBound {
        #[arg(long)]
        law: String,
        #[arg(long, default_value_t = 2)]
        b: u32,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        alpha0: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        p0: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProfileKind {
    Gmc,
    Mrc,
    Pmc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelArg {
    ExactLog,
    StarScale,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::ExactLog => KernelKind::ExactLog,
            KernelArg::StarScale => KernelKind::StarScale,
        }
    }
}

#[derive(Args)]
struct BumpArgs {
    /// Left exponent of the star-scale bump.
    #[arg(long)]
    bump_left: Option<f64>,
    /// Right exponent of the star-scale bump.
    #[arg(long)]
    bump_right: Option<f64>,
}

impl BumpArgs {
    fn bump(&self) -> Result<ExpBump> {
        let def = ExpBump::default();
        ExpBump::new(self.bump_left.unwrap_or(def.left), self.bump_right.unwrap_or(def.right)).stage("bump")
    }
}

#[derive(Subcommand)]
enum Verify {
    /// Shrinking support, variance and regularity of a kernel decomposition.
    Kernel {
        #[arg(long, value_enum, default_value_t = KernelArg::ExactLog)]
        kind: KernelArg,
        #[arg(long, default_value_t = 2)]
        b: u32,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha0: f64,
        #[arg(long, default_value_t = 12)]
        j_max: u32,
        #[command(flatten)]
        bump: BumpArgs,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    b: u32,
    #[arg(long)]
    m: u32,
    #[arg(long)]
    grid_level: Option<u32>,
    #[arg(long, default_value_t = 1)]
    samples: u64,
}

#[derive(Subcommand)]
enum Simulate {
    Gmc {
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = KernelArg::ExactLog)]
        kernel: KernelArg,
        #[command(flatten)]
        bump: BumpArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    Cascade {
        /// Weight law as JSON, e.g. `{"kind":"gbm","sigma":0.4}`.
        #[arg(long)]
        law: String,
        #[command(flatten)]
        grid: GridArgs,
    },
    Mrc {
        /// Lambda spec as JSON.
        #[arg(long)]
        lambda: String,
        #[command(flatten)]
        grid: GridArgs,
    },
    Pmc {
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        a: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Subcommand)]
enum Estimate {
    /// Fourier decay exponent from field headers.
    Fourier {
        #[arg(required = true)]
        fields: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::EnsembleMean)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1)]
        trim_low: usize,
        #[arg(long, default_value_t = 1)]
        trim_high: usize,
    },
    /// Correlation dimension, averaged over fields.
    Corrdim {
        #[arg(required = true)]
        fields: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u32>>,
    },
    /// Box dimension of uncovered masks, averaged.
    Boxdim {
        #[arg(required = true)]
        masks: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u32>>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    EnsembleMean,
    PathwiseMax,
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(ToolError::io("<stdout>")(e)),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ToolError::Usage(e.to_string()))?;
    text.push('\n');
    emit(&text)
}

fn parse_json<T: for<'de> serde::Deserialize<'de>>(what: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| ToolError::Usage(format!("{what}: {e}")))
}

fn theory(cmd: Theory) -> Result<()> {
    match cmd {
        Theory::DGamma { gamma, d } => print_json(&json!({
            "gamma": gamma, "d": d, "d_gamma": d_gamma(gamma, d).stage("theory")?
        })),
        Theory::DSigma { sigma, b } => print_json(&json!({
            "sigma": sigma, "b": b, "d_sigma": d_sigma(sigma, b).stage("theory")?
        })),
        Theory::Lf {
            model,
            gamma,
            chi,
            a,
            alpha0,
            p0,
            b,
            d,
        } => {
            let need = |v: Option<f64>, name: &str| v.ok_or_else(|| ToolError::Usage(format!("--{name} is required")));
            let profile = match model {
                ProfileKind::Gmc => MomentProfile::Gmc {
                    gamma: need(gamma, "gamma")?,
                },
                ProfileKind::Mrc => MomentProfile::Mrc { chi: need(chi, "chi")? },
                ProfileKind::Pmc => MomentProfile::Pmc {
                    a: need(a, "a")?,
                    chi: need(chi, "chi")?,
                },
            };
            print_json(&lf_bound(alpha0, p0, &profile, b, d).stage("theory")?)
        }
        Theory::ChiBound { chi: c, lambda, a, b } => {
            let c = match (c, lambda) {
                (Some(c), _) => c,
                (None, Some(text)) => {
                    let spec: LambdaSpec = parse_json("lambda", &text)?;
                    chi(&spec.to_measure(), b, CHI_BANDS).stage("theory")?.value
                }
                (None, None) => return Err(ToolError::Usage("give --chi or --lambda".into())),
            };
            let bound = covering_bound(c, a, b).stage("theory")?;
            print_json(&json!({ "chi": c, "a": a, "b": b, "bound": bound.value, "degenerate": c >= 1.0 }))
        }
        Theory::CascadeBound { law, b, d, alpha0, p0 } => {
            let spec: WeightLawSpec = parse_json("law", &law)?;
            let law = spec.to_law();
            let alpha0 = alpha0.unwrap_or_else(|| law.alpha0());
            print_json(&cascade_bound(&law, b, d, alpha0, p0).stage("theory")?)
        }
    }
}

fn verify(cmd: Verify) -> Result<()> {
    let Verify::Kernel {
        kind,
        b,
        d,
        alpha0,
        j_max,
        bump,
    } = cmd;
    let decomp = decomposition_for(kind.into(), bump.bump()?, b, d).stage("kernel")?;
    let report = check_sigma_regular(decomp.as_ref(), alpha0, j_max, SigmaTolerances::default());
    print_json(&json!({
        "pass": report.passes(),
        "alpha0": report.alpha0,
        "j0": report.j0,
        "j_max": report.j_max,
        "h1": report.h1,
        "h2": report.h2,
        "h2_sharp": report.h2_sharp,
        "h3": report.h3,
        "bounds": report.bounds,
    }))
}

fn grid_of(g: &GridArgs) -> Result<BAdicGrid> {
    BAdicGrid::new(g.d, g.b, g.grid_level.unwrap_or(g.m)).stage("grid")
}

fn simulate(cmd: Simulate, seed: u64, threads: usize, out: &Path) -> Result<()> {
    let (sampler, g): (Box<dyn MeasureSampler>, &GridArgs) = match &cmd {
        Simulate::Gmc {
            gamma,
            kernel,
            bump,
            grid,
        } => (
            Box::new(
                GmcSampler::new(&GmcConfig {
                    gamma: *gamma,
                    d: grid.d,
                    b: grid.b,
                    m: grid.m,
                    grid_level: grid.grid_level.unwrap_or(grid.m),
                    kernel: (*kernel).into(),
                    bump: bump.bump()?,
                })
                .stage("model")?,
            ),
            grid,
        ),
        Simulate::Cascade { law, grid } => {
            let spec: WeightLawSpec = parse_json("law", law)?;
            let s = CascadeSampler::new(spec.to_law(), grid_of(grid)?, grid.m).stage("model")?;
            (Box::new(s), grid)
        }
        Simulate::Mrc { lambda, grid } | Simulate::Pmc { lambda, grid, .. } => {
            let a = match &cmd {
                Simulate::Pmc { a, .. } => Some(*a),
                _ => None,
            };
            let spec: LambdaSpec = parse_json("lambda", lambda)?;
            let s = CoveringSampler::new(spec.to_measure(), a, grid_of(grid)?, grid.m).stage("model")?;
            for w in s.warnings() {
                eprintln!("warning: {w}");
            }
            (Box::new(s), grid)
        }
    };
    std::fs::create_dir_all(out).map_err(ToolError::io(out))?;
    let masses = map_samples(sampler.as_ref(), seed, g.samples, threads, |id, s| {
        write_field(&out.join(format!("field_{id:05}.json")), &s.field)?;
        if let Some(mask) = &s.mask {
            write_mask(&out.join(format!("mask_{id:05}.json")), mask)?;
        }
        Ok(s.field.total_mass())
    })?;
    let mean = masses.iter().sum::<f64>() / masses.len() as f64;
    let summary = json!({ "samples": g.samples, "seed": seed, "mean_mass": mean, "masses": masses });
    write_json(&out.join("summary.json"), &summary)?;
    print_json(&summary)
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    slope: f64,
    stderr: f64,
    bands: (u32, u32),
    method: &'a mchaos_core::spectral::DimensionMethod,
    samples: usize,
}

fn emit_estimate(est: &DimensionEstimate, samples: usize, rows: Option<Vec<BandRow>>, format: Format) -> Result<()> {
    match format {
        Format::Json => print_json(&EstimateSummary {
            slope: est.slope,
            stderr: est.stderr,
            bands: est.range,
            method: &est.method,
            samples,
        }),
        Format::Csv => {
            let text = match rows {
                Some(rows) => csv_string(&rows)?,
                None => {
                    #[derive(Serialize)]
                    struct Point {
                        x: f64,
                        y: f64,
                    }
                    csv_string(&est.points.iter().map(|&(x, y)| Point { x, y }).collect::<Vec<_>>())?
                }
            };
            emit(&text)
        }
    }
}

fn estimate(cmd: Estimate, format: Format) -> Result<()> {
    match cmd {
        Estimate::Fourier {
            fields,
            mode,
            trim_low,
            trim_high,
        } => {
            let mut spectra = Vec::with_capacity(fields.len());
            let mut b = 2;
            for p in &fields {
                let f = read_field(p)?;
                b = f.grid().b();
                spectra.push(fourier_coefficients(&f, f.grid().cells_per_axis() / 2).stage("fourier")?);
            }
            let mode = match mode {
                ModeArg::EnsembleMean => FourierMode::EnsembleMean,
                ModeArg::PathwiseMax => FourierMode::PathwiseMax,
            };
            let trim = BandTrim {
                low: trim_low,
                high: trim_high,
            };
            let est = estimate_fourier_dim(&spectra, b, mode, trim).stage("fourier")?;
            let rows = ensemble_band_statistics(&spectra, b)
                .stage("fourier")?
                .iter()
                .map(BandRow::from)
                .collect();
            emit_estimate(&est, spectra.len(), Some(rows), format)
        }
        Estimate::Corrdim { fields, levels } => {
            let mut each = Vec::new();
            for p in &fields {
                let f = read_field(p)?;
                if f.total_mass() > 0.0 {
                    let l = levels.clone().unwrap_or_else(|| default_levels(f.grid().level()));
                    each.push(correlation_dim(&f, &l).stage("corrdim")?);
                }
            }
            if each.is_empty() {
                return Err(ToolError::Stage {
                    stage: "corrdim",
                    source: mchaos_core::Error::Numeric("every field is a null measure".into()),
                });
            }
            let est = DimensionEstimate::aggregate(&each).stage("corrdim")?;
            emit_estimate(&est, each.len(), None, format)
        }
        Estimate::Boxdim { masks, levels } => {
            let mut each = Vec::new();
            for p in &masks {
                let m = read_mask(p)?;
                let l = levels.clone().unwrap_or_else(|| default_levels(m.grid().level()));
                let e = box_dim_mask(&m, &l).stage("boxdim")?;
                if !e.degenerate {
                    each.push(e);
                }
            }
            if each.is_empty() {
                return Err(ToolError::Stage {
                    stage: "boxdim",
                    source: mchaos_core::Error::Numeric("every mask is empty".into()),
                });
            }
            let est = DimensionEstimate::aggregate(&each).stage("boxdim")?;
            emit_estimate(&est, each.len(), None, format)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = resolve_threads(cli.threads);
    match cli.command {
        Command::Theory(t) => theory(t),
        Command::Verify(v) => verify(v),
        Command::Simulate(s) => {
            let out = cli.out.ok_or_else(|| ToolError::Usage("simulate needs --out".into()))?;
            simulate(s, cli.seed.unwrap_or(0), threads, &out)
        }
        Command::Estimate(e) => estimate(e, cli.format),
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                cfg.ensemble.master_seed = seed;
            }
            let out = cli.out.unwrap_or_else(|| default_out(&cfg, &config));
            let output = execute(&cfg, threads, &out)?;
            for w in &output.record.warnings {
                eprintln!("warning: {w}");
            }
            let rows = compare(&output.record);
            eprint!("{}", table(&rows));
            eprintln!("record written to {}", out.join(mchaos::run::RECORD_FILE).display());
            Ok(())
        }
        Command::Compare { record } => {
            let record: RunRecord = read_json(&record)?;
            let rows = compare(&record);
            match cli.format {
                Format::Json => print_json(&rows)?,
                Format::Csv => emit(&csv_string(&rows.iter().map(CsvVerdict::from).collect::<Vec<_>>())?)?,
            }
            if any_failed(&rows) {
                let failed: Vec<_> = rows
                    .iter()
                    .filter(|r| r.status == mchaos::compare::Status::Fail)
                    .map(|r| r.estimator.as_str())
                    .collect();
                eprint!("{}", table(&rows));
                return Err(ToolError::Comparison(format!("failed: {}", failed.join(", "))));
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct CsvVerdict {
    estimator: String,
    estimate: Option<f64>,
    prediction: Option<f64>,
    gap: Option<f64>,
    tolerance: Option<f64>,
    status: &'static str,
}

impl From<&mchaos::compare::Verdict> for CsvVerdict {
    fn from(v: &mchaos::compare::Verdict) -> Self {
        Self {
            estimator: v.estimator.clone(),
            estimate: v.estimate,
            prediction: v.prediction,
            gap: v.gap,
            tolerance: v.tolerance,
            status: v.status.label(),
        }
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
