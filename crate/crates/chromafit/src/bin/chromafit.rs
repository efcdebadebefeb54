//! Thin command-line front end over [`chromafit::runs`]. Exit codes:
//! 0 success, 1 numerical failure, 2 input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chromafit::runs::{
    CmfSource, ConstraintOptions, DataRun, EvalRun, LutherRun, MetricChoice, MultiStartRun,
    ScenarioMode, SeedSource, SeedsRun,
};

#[derive(Parser)]
#[command(name = "chromafit", version, about = "Design transmittance filters that make cameras more colorimetric")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataInputs {
    /// Camera sensitivities CSV (wavelength_nm,r,g,b).
    #[arg(long)]
    camera: PathBuf,
    /// Color matching functions: `builtin` or a CSV path.
    #[arg(long, default_value = "builtin")]
    cmf: String,
    /// Illuminant table CSV (wavelength_nm + one column per light).
    #[arg(long)]
    illuminants: PathBuf,
    /// Reflectance table CSV (wavelength_nm + one column per surface).
    #[arg(long)]
    reflectances: PathBuf,
}

#[derive(Args)]
struct SeedFlags {
    /// Cosine basis size.
    #[arg(long, default_value_t = 6)]
    basis: usize,
    /// Minimum transmittance.
    #[arg(long, default_value_t = 0.2)]
    fmin: f64,
    /// Maximum transmittance.
    #[arg(long, default_value_t = 1.0)]
    fmax: f64,
    /// Number of seed filters.
    #[arg(long, default_value_t = 500)]
    count: usize,
    /// Angular separation threshold between seeds, degrees.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// RNG seed for reproducible sampling.
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Luther-condition filter for a camera.
    Luther {
        #[arg(long)]
        camera: PathBuf,
        #[arg(long, default_value = "builtin")]
        cmf: String,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the data-driven filter over measured lights and reflectances.
    Data {
        #[command(flatten)]
        inputs: DataInputs,
        /// per-light, fixed-target or single.
        #[arg(long, default_value = "per-light")]
        mode: String,
        /// Target light for fixed-target mode: an illuminant column name or
        /// builtin:D65 / builtin:A.
        #[arg(long)]
        target: Option<String>,
        /// Seed filter: ones, luther, or a filter CSV path.
        #[arg(long, default_value = "ones")]
        seed: String,
        /// Restrict the filter to the first m cosine-basis terms.
        #[arg(long)]
        basis: Option<usize>,
        /// Minimum transmittance (activates the bounded solve).
        #[arg(long)]
        fmin: Option<f64>,
        /// Maximum transmittance (activates the bounded solve).
        #[arg(long)]
        fmax: Option<f64>,
        /// Constrain per-iteration filters nonnegative instead.
        #[arg(long)]
        positive: bool,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a constraint-feasible seed filter set.
    Seeds {
        #[command(flatten)]
        seeds: SeedFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seed-sampled multi-start data-driven optimisation.
    Multistart {
        #[command(flatten)]
        inputs: DataInputs,
        #[arg(long, default_value = "per-light")]
        mode: String,
        #[arg(long)]
        target: Option<String>,
        #[command(flatten)]
        seeds: SeedFlags,
        /// Ranking metric: objective or mean-de.
        #[arg(long, default_value = "mean-de")]
        metric: String,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Delta E error statistics for a camera, optionally behind a filter.
    Eval {
        #[arg(long)]
        camera: PathBuf,
        /// Filter CSV path, or `none` for the bare camera.
        #[arg(long, default_value = "none")]
        filter: String,
        #[arg(long)]
        illuminants: PathBuf,
        #[arg(long)]
        reflectances: PathBuf,
        #[arg(long, default_value = "builtin")]
        cmf: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> chromafit::Result<Vec<PathBuf>> {
    match cli.command {
        Command::Luther {
            camera,
            cmf,
            eps,
            max_iter,
            out,
        } => LutherRun {
            camera,
            cmf: CmfSource::parse(&cmf),
            eps,
            max_iter,
            out,
        }
        .execute(),
        Command::Data {
            inputs,
            mode,
            target,
            seed,
            basis,
            fmin,
            fmax,
            positive,
            eps,
            max_iter,
            out,
        } => DataRun {
            camera: inputs.camera,
            cmf: CmfSource::parse(&inputs.cmf),
            illuminants: inputs.illuminants,
            reflectances: inputs.reflectances,
            mode: ScenarioMode::parse(&mode)?,
            target,
            seed: SeedSource::parse(&seed),
            constraints: ConstraintOptions {
                basis_terms: basis,
                f_min: fmin,
                f_max: fmax,
                positive,
            },
            eps,
            max_iter,
            out,
        }
        .execute(),
        Command::Seeds { seeds, out } => SeedsRun {
            basis_terms: seeds.basis,
            f_min: seeds.fmin,
            f_max: seeds.fmax,
            count: seeds.count,
            theta_deg: seeds.theta,
            rng_seed: seeds.rng_seed,
            out,
        }
        .execute(),
        Command::Multistart {
            inputs,
            mode,
            target,
            seeds,
            metric,
            eps,
            max_iter,
            out,
        } => MultiStartRun {
            camera: inputs.camera,
            cmf: CmfSource::parse(&inputs.cmf),
            illuminants: inputs.illuminants,
            reflectances: inputs.reflectances,
            mode: ScenarioMode::parse(&mode)?,
            target,
            seeds: SeedsRun {
                basis_terms: seeds.basis,
                f_min: seeds.fmin,
                f_max: seeds.fmax,
                count: seeds.count,
                theta_deg: seeds.theta,
                rng_seed: seeds.rng_seed,
                out: out.clone(),
            },
            metric: MetricChoice::parse(&metric)?,
            eps,
            max_iter,
            out,
        }
        .execute(),
        Command::Eval {
            camera,
            filter,
            illuminants,
            reflectances,
            cmf,
            out,
        } => EvalRun {
            camera,
            filter: if filter.eq_ignore_ascii_case("none") {
                None
            } else {
                Some(PathBuf::from(filter))
            },
            illuminants,
            reflectances,
            cmf: CmfSource::parse(&cmf),
            out,
        }
        .execute(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("chromafit: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("chromafit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
