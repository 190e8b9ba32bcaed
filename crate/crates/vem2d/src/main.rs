//! Command-line driver for convergence studies, p sweeps, pressure maps and
//! mesh utilities.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vem2d::element::{Method, Model, Norm};
use vem2d::mesh::{
    generate_mesh_seeded, mesh_from_json, mesh_to_json, validate_mesh, MeshFamily, DEFAULT_SEED,
};
use vem2d::problems::LoadCase;
use vem2d::study::{
    export_pressure_maps, fit_slope, run_convergence, run_p_sweep, save_convergence_csv, RunConfig,
};

#[derive(Parser)]
#[command(name = "vem2d", version, about = "Polygonal VEM for plane elasticity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study over a refinement ladder and write CSV.
    Convergence(ConvergenceArgs),
    /// Run one convergence series per p value (influence of p).
    PSweep(PSweepArgs),
    /// Export the nearly incompressible pressure-map panels as CSV.
    PressureMaps(PressureMapsArgs),
    /// Generate or validate mesh documents.
    #[command(subcommand)]
    Mesh(MeshCommand),
}

#[derive(Args)]
struct CommonRunArgs {
    /// vem, ucp, dfp or hyp.
    #[arg(long, default_value = "vem")]
    method: Method,
    /// Boundary interpolation order (1 or 2).
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Strain degree p; omit for the suggested value.
    #[arg(long)]
    p: Option<u32>,
    /// Projection norm for ucp: energy (default) or l2.
    #[arg(long)]
    norm: Option<String>,
    /// Stabilization parameter tau.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// QUAD, RHOM, HEXA, WEBM or DODE.
    #[arg(long, default_value = "QUAD")]
    family: MeshFamily,
    /// Load case: a (zero body force) or b.
    #[arg(long = "case", default_value = "a")]
    load_case: LoadCase,
    /// Young's modulus.
    #[arg(long, default_value_t = 2.5)]
    e: f64,
    /// Poisson's ratio.
    #[arg(long, default_value_t = 0.25)]
    nu: f64,
    /// plane-stress or plane-strain.
    #[arg(long, default_value = "plane-stress")]
    model: String,
    /// Seed for the WEBM perturbation.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// Comma-separated refinement ladder.
    #[arg(long, default_value = "4,8,16,32", value_delimiter = ',')]
    refinements: Vec<u32>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PSweepArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    #[arg(long, default_value = "4,8,16", value_delimiter = ',')]
    refinements: Vec<u32>,
    /// Comma-separated list of p values to sweep.
    #[arg(long = "p-list", value_delimiter = ',')]
    p_list: Vec<u32>,
    /// Output prefix; one CSV per p is written as <prefix>_p<p>.csv.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct PressureMapsArgs {
    /// Mesh refinement of the QUAD mesh (the reference setup uses 4).
    #[arg(long, default_value_t = 4)]
    refinement: u32,
    /// Grid resolution per direction.
    #[arg(long, default_value_t = 50)]
    grid: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output directory for vem.csv, ucp_p2.csv, ucp_p3.csv, exact.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate a mesh document.
    Generate {
        #[arg(long)]
        family: MeshFamily,
        #[arg(long)]
        refinement: u32,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a mesh document and report violations.
    Validate {
        file: PathBuf,
    },
}

fn parse_model(s: &str) -> Result<Model, String> {
    match s.to_ascii_lowercase().as_str() {
        "plane-stress" | "stress" => Ok(Model::PlaneStress),
        "plane-strain" | "strain" => Ok(Model::PlaneStrain),
        other => Err(format!("unknown model '{other}'")),
    }
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    match s.to_ascii_lowercase().as_str() {
        "l2" => Ok(Norm::L2),
        "energy" => Ok(Norm::Energy),
        other => Err(format!("unknown norm '{other}'")),
    }
}

fn run_config(common: &CommonRunArgs, refinements: Vec<u32>) -> Result<RunConfig, String> {
    let model = parse_model(&common.model)?;
    let norm = common.norm.as_deref().map(parse_norm).transpose()?;
    Ok(RunConfig {
        method: common.method,
        k: common.k,
        p: common.p,
        norm,
        tau: common.tau,
        family: common.family,
        refinements,
        load_case: common.load_case,
        e: common.e,
        nu: common.nu,
        model,
        seed: common.seed,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

enum AppError {
    Usage(String),
    Run(String),
}

impl From<vem2d::study::StudyError> for AppError {
    fn from(e: vem2d::study::StudyError) -> Self {
        match e {
            vem2d::study::StudyError::InvalidConfig(_) => AppError::Usage(e.to_string()),
            other => AppError::Run(other.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Convergence(args) => {
            let config = run_config(&args.common, args.refinements).map_err(AppError::Usage)?;
            config.validate().map_err(AppError::from)?;
            warn_about_material(&config);
            let records = run_convergence(&config)?;
            save_convergence_csv(&args.out, &config, &records)?;
            for r in &records {
                println!(
                    "{} N={:<3} h={:<22} dofs={:<7} energy_error={}",
                    r.family.tag(),
                    r.refinement,
                    r.h,
                    r.dofs,
                    r.energy_error
                );
            }
            println!("slope(log10 error vs log10 dofs) = {:.4}", fit_slope(&records));
            println!("wrote {}", args.out.display());
            Ok(())
        }
        Command::PSweep(args) => {
            let config = run_config(&args.common, args.refinements).map_err(AppError::Usage)?;
            if args.p_list.is_empty() {
                return Err(AppError::Usage("empty --p-list".into()));
            }
            let series = run_p_sweep(&config, &args.p_list)?;
            for s in &series {
                if s.stabilized {
                    eprintln!(
                        "warning: p = {} is below the self-stabilizing minimum; \
                         run proceeds with stabilization",
                        s.p
                    );
                }
                let mut cfg = config.clone();
                cfg.p = Some(s.p);
                let path = args
                    .out_prefix
                    .with_file_name(format!(
                        "{}_p{}.csv",
                        args.out_prefix.file_name().and_then(|s| s.to_str()).unwrap_or("sweep"),
                        s.p
                    ));
                save_convergence_csv(&path, &cfg, &s.records)?;
                println!(
                    "p={} stabilized={} slope={:.4} -> {}",
                    s.p,
                    s.stabilized,
                    fit_slope(&s.records),
                    path.display()
                );
            }
            Ok(())
        }
        Command::PressureMaps(args) => {
            let written = export_pressure_maps(&args.out_dir, args.refinement, args.grid, args.seed)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Mesh(MeshCommand::Generate { family, refinement, seed, out }) => {
            let mesh = generate_mesh_seeded(family, refinement, seed)
                .map_err(|e| AppError::Run(e.to_string()))?;
            std::fs::write(&out, mesh_to_json(&mesh)).map_err(|e| AppError::Run(e.to_string()))?;
            println!(
                "wrote {} ({} points, {} cells, {} boundary edges)",
                out.display(),
                mesh.points.len(),
                mesh.cells.len(),
                mesh.boundary_edges.len()
            );
            Ok(())
        }
        Command::Mesh(MeshCommand::Validate { file }) => {
            let text = std::fs::read_to_string(&file).map_err(|e| AppError::Run(e.to_string()))?;
            let mesh = mesh_from_json(&text).map_err(|e| AppError::Run(e.to_string()))?;
            let report = validate_mesh(&mesh);
            if report.is_empty() {
                println!("{}: valid", file.display());
                Ok(())
            } else {
                for v in &report {
                    eprintln!("violation: {v}");
                }
                Err(AppError::Run(format!("{} violations", report.len())))
            }
        }
    }
}

fn warn_about_material(config: &RunConfig) {
    if let Ok(material) = config.material() {
        let cond = material.condition_number();
        if cond > 1e4 {
            eprintln!(
                "warning: elasticity matrix condition number {cond:.3e} \
                 (nearly incompressible regime)"
            );
        }
    }
    if config.method == Method::Dfp && config.load_case == LoadCase::B && config.k == 2 {
        eprintln!(
            "warning: dfp with k = 2 ignores the volume load (no internal dofs); \
             hyp is the intended method for load case b"
        );
    }
}
