//! Convergence studies, parameter sweeps and pressure-map exports.
//!
//! Every run is a deterministic function of its configuration; reruns write
//! byte-identical CSV. Convergence CSV columns are
//! `family,N,h,dofs,energy_error` with a `#`-prefixed header line echoing
//! the full configuration; pressure CSV columns are `x,y,p`.

use crate::element::{build_element, ElementMatrices, ElementSpec, Material, Method, Model, Norm};
use crate::mesh::{generate_mesh_seeded, MeshFamily, PolygonalMesh};
use crate::problems::{
    energy_error, exact_pressure_field, load_case_a_with_material, load_case_b, pressure_field,
    ErrorQuadrature, LoadCase, ManufacturedProblem,
};
use crate::solver::{assemble, recover_strain_coefficients, solve};
use crate::mesh::Point2;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshGenError),
    #[error(transparent)]
    Element(#[from] crate::element::ElementError),
    #[error(transparent)]
    Problem(#[from] crate::problems::ProblemError),
    #[error(transparent)]
    Solve(#[from] crate::solver::SolveError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Full configuration of one study run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub method: Method,
    pub k: u32,
    /// None selects p per the suggested-configuration table.
    pub p: Option<u32>,
    pub norm: Option<Norm>,
    pub tau: f64,
    pub family: MeshFamily,
    pub refinements: Vec<u32>,
    pub load_case: LoadCase,
    pub e: f64,
    pub nu: f64,
    pub model: Model,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(method: Method, k: u32, family: MeshFamily, load_case: LoadCase) -> Self {
        Self {
            method,
            k,
            p: None,
            norm: None,
            tau: 0.5,
            family,
            refinements: vec![4, 8, 16, 32],
            load_case,
            e: 2.5,
            nu: 0.25,
            model: Model::PlaneStress,
            seed: crate::mesh::DEFAULT_SEED,
        }
    }

    pub fn material(&self) -> Result<Material, StudyError> {
        Ok(Material::new(self.e, self.nu, self.model)?)
    }

    pub fn problem(&self) -> Result<ManufacturedProblem, StudyError> {
        let material = self.material()?;
        Ok(match self.load_case {
            LoadCase::A => load_case_a_with_material(material)?,
            LoadCase::B => load_case_b(material),
        })
    }

    /// Reject invalid combinations before any solve.
    pub fn validate(&self) -> Result<(), StudyError> {
        if !(1..=2).contains(&self.k) {
            return Err(StudyError::InvalidConfig(format!("k = {} not in {{1, 2}}", self.k)));
        }
        if self.method == Method::Hyp && self.k != 2 {
            return Err(StudyError::InvalidConfig("hyp requires k = 2".into()));
        }
        if self.method == Method::Hyp && self.load_case != LoadCase::B {
            return Err(StudyError::InvalidConfig(
                "hyp targets non-null volume forces; use load case b".into(),
            ));
        }
        if self.refinements.is_empty() {
            return Err(StudyError::InvalidConfig("empty refinement list".into()));
        }
        if self.refinements.contains(&0) {
            return Err(StudyError::InvalidConfig("refinement 0 is not allowed".into()));
        }
        self.material()?;
        self.problem()?;
        self.element_spec().resolve(4).map_err(StudyError::Element)?;
        Ok(())
    }

    pub fn element_spec(&self) -> ElementSpec {
        ElementSpec {
            method: self.method,
            k: self.k,
            p: self.p,
            norm: self.norm,
            tau: self.tau,
        }
    }

    /// One-line echo of the configuration for CSV provenance headers.
    pub fn echo(&self) -> String {
        format!(
            "method={} k={} p={} norm={} tau={} family={} case={} E={} nu={} model={} seed={}",
            self.method.tag(),
            self.k,
            self.p.map_or("auto".to_string(), |p| p.to_string()),
            match self.norm {
                None => "default",
                Some(Norm::L2) => "l2",
                Some(Norm::Energy) => "energy",
            },
            self.tau,
            self.family.tag(),
            self.load_case.tag(),
            self.e,
            self.nu,
            match self.model {
                Model::PlaneStress => "plane-stress",
                Model::PlaneStrain => "plane-strain",
            },
            self.seed
        )
    }
}

/// One row of a convergence series.
#[derive(Clone, Debug)]
pub struct ConvergenceRecord {
    pub family: MeshFamily,
    pub refinement: u32,
    pub h: f64,
    /// Global dofs after static condensation.
    pub dofs: usize,
    pub energy_error: f64,
}

/// Everything produced by one solve; kept for field exports and tests.
pub struct SolvedCase {
    pub mesh: PolygonalMesh,
    pub elements: Vec<ElementMatrices>,
    pub strain_coeffs: Vec<nalgebra::DVector<f64>>,
    pub dofs: usize,
    pub error: f64,
    pub residual: f64,
}

/// Mesh, assemble, solve and measure one refinement of a configuration.
pub fn solve_case(config: &RunConfig, refinement: u32) -> Result<SolvedCase, StudyError> {
    let material = config.material()?;
    let problem = config.problem()?;
    let mesh = generate_mesh_seeded(config.family, refinement, config.seed)?;
    let spec = config.element_spec();
    let body = |p: Point2| {
        let b = problem.body_force(p);
        [b[0], b[1]]
    };
    let mut elements = Vec::with_capacity(mesh.cells.len());
    for c in 0..mesh.cells.len() {
        elements.push(build_element(mesh.cell_points(c), &spec, &material, Some(&body))?);
    }
    let mut system = assemble(&mesh, &elements, true)?;
    system.apply_dirichlet(|p| {
        let v = problem.displacement(p);
        [v[0], v[1]]
    });
    let solution = solve(&system)?;
    let strain_coeffs = recover_strain_coefficients(&elements, &system, &solution);
    let report = energy_error(&mesh, &elements, &strain_coeffs, &problem, ErrorQuadrature::default());
    Ok(SolvedCase {
        mesh,
        elements,
        strain_coeffs,
        dofs: system.dof_map.total,
        error: report.error,
        residual: solution.residual,
    })
}

/// Least-squares slope of log10(error) against log10(dofs).
pub fn fit_slope(records: &[ConvergenceRecord]) -> f64 {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.energy_error > 0.0)
        .map(|r| ((r.dofs as f64).log10(), r.energy_error.log10()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Run the configured refinement ladder.
pub fn run_convergence(config: &RunConfig) -> Result<Vec<ConvergenceRecord>, StudyError> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.refinements.len());
    let mut last_dofs = 0usize;
    for &n in &config.refinements {
        let solved = solve_case(config, n)?;
        debug_assert!(solved.residual <= 1e-10);
        let record = ConvergenceRecord {
            family: config.family,
            refinement: n,
            h: solved.mesh.mesh_size(),
            dofs: solved.dofs,
            energy_error: solved.error,
        };
        assert!(record.dofs > last_dofs, "dofs must increase with refinement");
        last_dofs = record.dofs;
        records.push(record);
    }
    Ok(records)
}

/// Write a convergence series as CSV with a config-echo header.
pub fn write_convergence_csv(
    out: &mut dyn Write,
    config: &RunConfig,
    records: &[ConvergenceRecord],
) -> std::io::Result<()> {
    writeln!(out, "# vem2d convergence {} slope={}", config.echo(), fit_slope(records))?;
    writeln!(out, "family,N,h,dofs,energy_error")?;
    for r in records {
        writeln!(out, "{},{},{},{},{}", r.family.tag(), r.refinement, r.h, r.dofs, r.energy_error)?;
    }
    Ok(())
}

pub fn save_convergence_csv(
    path: &Path,
    config: &RunConfig,
    records: &[ConvergenceRecord],
) -> Result<(), StudyError> {
    let mut buf = Vec::new();
    write_convergence_csv(&mut buf, config, records)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Influence-of-p sweep: one series per p value. Values of p below the
/// self-stabilizing minimum proceed with stabilization and are flagged.
pub struct SweepSeries {
    pub p: u32,
    pub stabilized: bool,
    pub records: Vec<ConvergenceRecord>,
}

pub fn run_p_sweep(config: &RunConfig, p_values: &[u32]) -> Result<Vec<SweepSeries>, StudyError> {
    let mut out = Vec::with_capacity(p_values.len());
    for &p in p_values {
        let mut cfg = config.clone();
        cfg.p = Some(p);
        cfg.validate()?;
        // Probe a representative cell of the coarsest mesh for the
        // stabilization flag recorded in the series metadata.
        let mesh = generate_mesh_seeded(cfg.family, cfg.refinements[0], cfg.seed)?;
        let m = mesh.cells.iter().map(|c| c.len()).max().unwrap_or(4);
        let resolved = cfg.element_spec().resolve(m)?;
        let records = run_convergence(&cfg)?;
        out.push(SweepSeries { p, stabilized: resolved.stab.is_some(), records });
    }
    Ok(out)
}

/// The four pressure-map panels: standard VEM, UCP p = 2, UCP p = 3 and the
/// exact field, on the nearly incompressible load case B setup.
pub fn export_pressure_maps(
    out_dir: &Path,
    refinement: u32,
    grid: usize,
    seed: u64,
) -> Result<Vec<std::path::PathBuf>, StudyError> {
    std::fs::create_dir_all(out_dir)?;
    let base = RunConfig {
        method: Method::Vem,
        k: 1,
        p: None,
        norm: None,
        tau: 0.5,
        family: MeshFamily::Quad,
        refinements: vec![refinement],
        load_case: LoadCase::B,
        e: 2.5,
        nu: 0.49995,
        model: Model::PlaneStrain,
        seed,
    };
    let problem = base.problem()?;
    let mut written = Vec::new();

    let panels: [(&str, Option<(Method, u32)>); 4] = [
        ("vem.csv", Some((Method::Vem, 0))),
        ("ucp_p2.csv", Some((Method::Ucp, 2))),
        ("ucp_p3.csv", Some((Method::Ucp, 3))),
        ("exact.csv", None),
    ];
    for (name, setup) in panels {
        let samples = match setup {
            Some((method, p)) => {
                let mut cfg = base.clone();
                cfg.method = method;
                cfg.p = if method == Method::Ucp { Some(p) } else { None };
                let solved = solve_case(&cfg, refinement)?;
                pressure_field(&solved.mesh, &solved.elements, &solved.strain_coeffs, &problem, grid)
            }
            None => exact_pressure_field(&problem, grid),
        };
        let path = out_dir.join(name);
        let mut buf = Vec::new();
        writeln!(
            &mut buf,
            "# vem2d pressure-map panel={} {} grid={}",
            name.trim_end_matches(".csv"),
            base.echo(),
            grid
        )?;
        writeln!(&mut buf, "x,y,p")?;
        for s in &samples {
            writeln!(&mut buf, "{},{},{}", s.x, s.y, s.pressure)?;
        }
        std::fs::write(&path, buf)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn invalid_configs_rejected_before_solving() {
        let mut cfg = RunConfig::new(Method::Hyp, 2, MeshFamily::Quad, LoadCase::A);
        assert!(matches!(cfg.validate(), Err(StudyError::InvalidConfig(_))));
        cfg.load_case = LoadCase::B;
        assert!(cfg.validate().is_ok());
        cfg.k = 1;
        assert!(cfg.validate().is_err());

        let mut bad_nu = RunConfig::new(Method::Vem, 1, MeshFamily::Quad, LoadCase::A);
        bad_nu.nu = 0.3; // breaks case A equilibrium
        assert!(bad_nu.validate().is_err());
    }

    #[test]
    fn csv_is_deterministic() {
        let mut cfg = RunConfig::new(Method::Vem, 1, MeshFamily::Quad, LoadCase::A);
        cfg.refinements = vec![2, 4];
        let records = run_convergence(&cfg).unwrap();
        let mut a = Vec::new();
        write_convergence_csv(&mut a, &cfg, &records).unwrap();
        let records2 = run_convergence(&cfg).unwrap();
        let mut b = Vec::new();
        write_convergence_csv(&mut b, &cfg, &records2).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# vem2d convergence method=vem"));
        assert!(text.contains("family,N,h,dofs,energy_error"));
    }

    #[test]
    fn slope_fit_recovers_known_exponent() {
        let records: Vec<ConvergenceRecord> = [(100usize, 1.0), (1000, 0.1), (10000, 0.01)]
            .iter()
            .map(|&(dofs, err)| ConvergenceRecord {
                family: MeshFamily::Quad,
                refinement: 1,
                h: 0.1,
                dofs,
                energy_error: err,
            })
            .collect();
        assert_relative_eq!(fit_slope(&records), -1.0, epsilon = 1e-12);
    }
}
