//! Batch front end for the mesh denoising library: synthesize noise, run
//! the two-stage pipeline, and report metrics, all deterministically.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use homd::filter::{filter_normals, FilterConfig, FilterOutcome};
use homd::io::{load_mesh, save_mesh, IoError};
use homd::metrics::{msae, quality, vertex_distance_error};
use homd::noise::add_gaussian_noise;
use homd::ops::Regularizer;
use homd::vertex::{sun_update, update_vertices, UpdateConfig, UpdateOutcome, VertexError};
use homd::{FaceField, Mesh};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

/// Iteration cap for the reference vertex updater (its exact line search
/// needs no other knobs).
const SUN_ITERATIONS: usize = 500;

#[derive(Parser)]
#[command(
    name = "homd",
    version,
    about = "Feature-preserving denoising of triangle meshes",
    long_about = "Feature-preserving denoising of triangle meshes.\n\n\
        The pipeline filters face normals by weighted second-order\n\
        regularization (solved with an augmented Lagrangian method), then\n\
        moves vertices to follow the filtered normals with a folding-free\n\
        update. Inputs and outputs are OBJ or OFF files, picked by extension."
)]
struct Cli {
    /// Worker threads for the solvers; HOMD_THREADS is the fallback.
    /// Results do not depend on the thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Weights {
    On,
    Off,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RegularizerChoice {
    /// Second differences across edges (high order).
    Ho,
    /// Face-based Laplacian (first order), for comparison.
    Lap,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum VertexMethod {
    /// Folding-free orientation-aware update.
    Bfgs,
    /// Classical orthogonality-penalty update, for comparison.
    Sun,
}

#[derive(Subcommand)]
enum Command {
    /// Print mesh statistics: sizes, quality ratios, mean edge length.
    Info {
        /// Mesh file (.obj or .off).
        path: PathBuf,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// Displace vertices with seeded Gaussian noise and report sigma.
    AddNoise {
        /// Clean mesh to corrupt (.obj or .off).
        input: PathBuf,
        /// Where to write the noisy mesh; format follows the extension.
        output: PathBuf,
        /// Noise standard deviation as a fraction of the mean edge length.
        #[arg(long)]
        level: f64,
        /// Seed of the noise stream; equal seeds give equal meshes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Denoise a mesh: filter face normals, then update vertices.
    Denoise {
        /// Noisy mesh (.obj or .off).
        input: PathBuf,
        /// Where to write the denoised mesh; format follows the extension.
        output: PathBuf,
        /// Fidelity weight of the normal filter. No default: tune per mesh.
        /// Larger values keep the result near the input normals; smaller
        /// values smooth harder. For a unit-scale mesh at moderate noise,
        /// try 50 and explore 25-400 (quality is not monotone in alpha, so
        /// sweep both directions).
        #[arg(long)]
        alpha: f64,
        /// Penalty weight of the splitting scheme. Mild effect on the
        /// fixed point, strong effect on convergence speed; 2 is a good
        /// start, 0.5-8 the useful range.
        #[arg(long)]
        rp: f64,
        /// Tether weight of the vertex update.
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
        /// Normal-filter stop threshold on the step norm.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Normal-filter sweep cap.
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        /// Conjugate-gradient iteration cap inside each sweep.
        #[arg(long, default_value_t = 10)]
        cg_max: usize,
        /// Dynamic crease-aware weights in the regularizer.
        #[arg(long, value_enum, default_value_t = Weights::On)]
        weights: Weights,
        /// Roughness measure the filter penalizes.
        #[arg(long, value_enum, default_value_t = RegularizerChoice::Ho)]
        regularizer: RegularizerChoice,
        /// How vertices follow the filtered normals.
        #[arg(long, value_enum, default_value_t = VertexMethod::Bfgs)]
        vertex_method: VertexMethod,
        /// Write per-iteration solver curves: `iter,energy,delta_n` rows
        /// for the filter plus a wall-clock record; the vertex trace goes
        /// to the same path with a `.vertex.csv` suffix.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare a result against a reference mesh.
    Metrics {
        /// Denoised (or otherwise processed) mesh.
        result: PathBuf,
        /// Ground-truth mesh with the same face count.
        clean: PathBuf,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
        /// Trace file from `denoise --trace`; reports its wall clock.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

/// A command failure, carrying the exit code contract:
/// 2 I/O and mesh data, 3 numeric, 4 usage.
enum Failure {
    Data(String),
    Numeric(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Usage(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Data(m) | Failure::Numeric(m) | Failure::Usage(m) => m,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<VertexError> for Failure {
    fn from(e: VertexError) -> Self {
        Failure::Numeric(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let kind = e.kind();
            // clap renders its own message; --help/--version are not errors.
            let _ = e.print();
            return if kind == ErrorKind::DisplayHelp || kind == ErrorKind::DisplayVersion {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Info { path, json } => cmd_info(&path, json),
        Command::AddNoise { input, output, level, seed } => {
            cmd_add_noise(&input, &output, level, seed)
        }
        Command::Denoise {
            input,
            output,
            alpha,
            rp,
            eta,
            eps,
            max_iter,
            cg_max,
            weights,
            regularizer,
            vertex_method,
            trace,
        } => cmd_denoise(DenoiseArgs {
            input,
            output,
            alpha,
            rp,
            eta,
            eps,
            max_iter,
            cg_max,
            weights,
            regularizer,
            vertex_method,
            trace,
        }),
        Command::Metrics { result, clean, json, trace } => {
            cmd_metrics(&result, &clean, json, trace.as_deref())
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), Failure> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("HOMD_THREADS") {
            Ok(value) => Some(value.parse().map_err(|_| {
                Failure::Usage(format!("HOMD_THREADS is not a thread count: `{value}`"))
            })?),
            Err(_) => None,
        },
    };
    let Some(threads) = threads else { return Ok(()) };
    if threads == 0 {
        return Err(Failure::Usage("--threads must be at least 1".to_string()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("could not size the thread pool: {e}")))
}

fn load(path: &Path) -> Result<Mesh, Failure> {
    let (mesh, skipped) =
        load_mesh(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if skipped > 0 {
        eprintln!(
            "warning: skipped {skipped} unrecognized directive{} in {}",
            if skipped == 1 { "" } else { "s" },
            path.display()
        );
    }
    Ok(mesh)
}

#[derive(Serialize)]
struct InfoReport {
    vertices: usize,
    faces: usize,
    edges: usize,
    boundary_edges: usize,
    quality_global: f64,
    quality_local: f64,
    mean_edge_length: f64,
}

fn cmd_info(path: &Path, json: bool) -> Result<(), Failure> {
    let mesh = load(path)?;
    let (quality_global, quality_local) = quality(&mesh);
    let report = InfoReport {
        vertices: mesh.vertex_count(),
        faces: mesh.face_count(),
        edges: mesh.edge_count(),
        boundary_edges: mesh.boundary_edge_count(),
        quality_global,
        quality_local,
        mean_edge_length: mesh.mean_edge_length(),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        println!("vertices        {}", report.vertices);
        println!("faces           {}", report.faces);
        println!("edges           {}", report.edges);
        println!("boundary edges  {}", report.boundary_edges);
        println!("quality global  {:.6}", report.quality_global);
        println!("quality local   {:.6}", report.quality_local);
        println!("mean edge       {:.6}", report.mean_edge_length);
    }
    Ok(())
}

fn cmd_add_noise(input: &Path, output: &Path, level: f64, seed: u64) -> Result<(), Failure> {
    if !level.is_finite() || level < 0.0 {
        return Err(Failure::Usage("--level must be a finite value >= 0".to_string()));
    }
    let mesh = load(input)?;
    let sigma = level * mesh.mean_edge_length();
    let noised = add_gaussian_noise(&mesh, level, seed)
        .map_err(|e| Failure::Data(format!("noise collapsed the mesh: {e}")))?;
    save_mesh(&noised, output).map_err(|e| Failure::Data(format!("{}: {e}", output.display())))?;
    println!(
        "absolute sigma {} (level {} x mean edge {})",
        sigma,
        level,
        mesh.mean_edge_length()
    );
    println!("wrote {}", output.display());
    Ok(())
}

struct DenoiseArgs {
    input: PathBuf,
    output: PathBuf,
    alpha: f64,
    rp: f64,
    eta: f64,
    eps: f64,
    max_iter: usize,
    cg_max: usize,
    weights: Weights,
    regularizer: RegularizerChoice,
    vertex_method: VertexMethod,
    trace: Option<PathBuf>,
}

fn cmd_denoise(args: DenoiseArgs) -> Result<(), Failure> {
    for (name, value, minimum) in [
        ("--alpha", args.alpha, f64::MIN_POSITIVE),
        ("--rp", args.rp, f64::MIN_POSITIVE),
        ("--eta", args.eta, 0.0),
        ("--eps", args.eps, f64::MIN_POSITIVE),
    ] {
        if !value.is_finite() || value < minimum {
            return Err(Failure::Usage(format!(
                "{name} must be a finite value {} (got {value})",
                if minimum > 0.0 { "> 0" } else { ">= 0" }
            )));
        }
    }
    if args.max_iter == 0 {
        return Err(Failure::Usage("--max-iter must be at least 1".to_string()));
    }
    if args.cg_max == 0 {
        return Err(Failure::Usage("--cg-max must be at least 1".to_string()));
    }

    let mesh = load(&args.input)?;
    let normals_in = FaceField::normals(&mesh);
    let config = FilterConfig::new(args.alpha, args.rp)
        .with_eps(args.eps)
        .with_max_outer(args.max_iter)
        .with_cg(args.cg_max, 1e-6)
        .with_dynamic_weights(args.weights == Weights::On)
        .with_regularizer(match args.regularizer {
            RegularizerChoice::Ho => Regularizer::SecondOrder,
            RegularizerChoice::Lap => Regularizer::Laplacian,
        });

    let started = Instant::now();
    let filtered = filter_normals(&mesh, &normals_in, &config)
        .map_err(|e| Failure::Numeric(e.to_string()))?;
    let updated = match args.vertex_method {
        VertexMethod::Bfgs => {
            let vertex_config = UpdateConfig::default().with_eta(args.eta);
            update_vertices(&mesh, &filtered.normals, &vertex_config)?
        }
        VertexMethod::Sun => sun_update(&mesh, &filtered.normals, SUN_ITERATIONS)?,
    };
    let seconds = started.elapsed().as_secs_f64();

    save_mesh(&updated.mesh, &args.output)
        .map_err(|e| Failure::Data(format!("{}: {e}", args.output.display())))?;
    if let Some(trace) = &args.trace {
        write_traces(trace, &filtered, &updated, seconds)?;
    }

    println!(
        "filter: {} sweep{} ({}), energy {} -> {}",
        filtered.iterations,
        if filtered.iterations == 1 { "" } else { "s" },
        if filtered.converged { "converged" } else { "hit the sweep cap" },
        filtered.energy.first().copied().unwrap_or(f64::NAN),
        filtered.energy.last().copied().unwrap_or(f64::NAN),
    );
    println!(
        "vertices: {} step{}, {} foldover{}{}",
        updated.iterations,
        if updated.iterations == 1 { "" } else { "s" },
        updated.foldovers,
        if updated.foldovers == 1 { "" } else { "s" },
        if updated.line_search_failed { " (line search exhausted)" } else { "" },
    );
    println!("wall clock {seconds:.3} s");
    println!("wrote {}", args.output.display());
    Ok(())
}

fn write_traces(
    path: &Path,
    filtered: &FilterOutcome,
    updated: &UpdateOutcome,
    seconds: f64,
) -> Result<(), Failure> {
    let mut text = String::from("iter,energy,delta_n\n");
    for (k, (energy, delta)) in filtered.energy.iter().zip(&filtered.step_norms).enumerate() {
        let _ = writeln!(text, "{},{energy},{delta}", k + 1);
    }
    let _ = writeln!(text, "# wall_clock_seconds,{seconds}");
    std::fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;

    let vertex_path = path.with_extension("vertex.csv");
    let mut text = String::from("iter,energy\n");
    for (k, energy) in updated.energy.iter().enumerate() {
        let _ = writeln!(text, "{k},{energy}");
    }
    std::fs::write(&vertex_path, text)
        .map_err(|e| Failure::Data(format!("{}: {e}", vertex_path.display())))?;
    Ok(())
}

#[derive(Serialize)]
struct MetricsReport {
    msae: f64,
    e_v2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seconds: Option<f64>,
}

fn cmd_metrics(
    result_path: &Path,
    clean_path: &Path,
    json: bool,
    trace: Option<&Path>,
) -> Result<(), Failure> {
    let result = load(result_path)?;
    let clean = load(clean_path)?;
    if result.face_count() != clean.face_count() {
        return Err(Failure::Data(format!(
            "face counts differ ({} vs {}); the angular error needs matching faces",
            result.face_count(),
            clean.face_count()
        )));
    }
    let report = MetricsReport {
        msae: msae(&FaceField::normals(&result), &FaceField::normals(&clean)),
        e_v2: vertex_distance_error(&result, &clean),
        seconds: trace.map(read_wall_clock).transpose()?,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        let method = result_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "result".to_string());
        println!(
            "{:<24} {:>12} {:>12} {:>9}",
            "method", "MSAE(x1e-3)", "Ev2(x1e-3)", "seconds"
        );
        let seconds = report.seconds.map_or("-".to_string(), |s| format!("{s:.3}"));
        println!(
            "{:<24} {:>12.5} {:>12.5} {:>9}",
            method,
            report.msae * 1e3,
            report.e_v2 * 1e3,
            seconds
        );
    }
    Ok(())
}

fn read_wall_clock(path: &Path) -> Result<f64, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# wall_clock_seconds,") {
            return rest.trim().parse().map_err(|_| {
                Failure::Data(format!("malformed wall-clock record in {}", path.display()))
            });
        }
    }
    Err(Failure::Data(format!("no wall-clock record in {}", path.display())))
}
