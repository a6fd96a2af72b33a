//! `topoforge <solve|td-point|taylor|td-field> --config <path> [--set k=v ...] [--threads N]`

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Command, RunConfig};
use crate::error::{Error, Result, StageExt};
use crate::fem::quadrature;
use crate::fieldeval::{closed_form_field, precompute_basis, td_field};
use crate::mesh::{triangulate_ball_with, triangulate_domain_with, BallOptions};
use crate::problem::ProblemSpec;
use crate::taylor::{build_family, family_td, normalize_for_plot, run_taylor_test, TaylorResult};
use crate::tdcore::{solve_state, td_at, TDReport};

#[derive(Parser, Debug)]
#[command(name = "topoforge", version, about = "Numerical topological derivatives with Taylor-test verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(clap::Args, Debug, Clone)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set mesh.h_coarse=0.02`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads (overrides `threads` in the config).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Solve state and adjoint; write VTK.
    Solve(CommonArgs),
    /// Topological derivative at z for each configured shape.
    TdPoint(CommonArgs),
    /// Taylor test per shape.
    Taylor(CommonArgs),
    /// Topological derivative at every cell centroid.
    TdField(CommonArgs),
}

impl CliCommand {
    fn split(&self) -> (Command, &CommonArgs) {
        match self {
            CliCommand::Solve(a) => (Command::Solve, a),
            CliCommand::TdPoint(a) => (Command::TdPoint, a),
            CliCommand::Taylor(a) => (Command::Taylor, a),
            CliCommand::TdField(a) => (Command::TdField, a),
        }
    }
}

#[derive(Serialize)]
struct Artifact {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    tool: String,
    version: String,
    command: String,
    config: RunConfig,
    overrides: Vec<String>,
    /// Hash of everything that affects the numbers.
    input_hash: String,
    threads: usize,
    artifacts: Vec<Artifact>,
    timings: Vec<(String, f64)>,
    summary: serde_json::Value,
}

/// Collects artifacts and stage timings of one run.
struct Run {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    timings: Vec<(String, f64)>,
    clock: Instant,
}

impl Run {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Run { dir, artifacts: vec![], timings: vec![], clock: Instant::now() })
    }

    fn lap(&mut self, stage: &str) {
        self.timings.push((stage.to_string(), self.clock.elapsed().as_secs_f64()));
        self.clock = Instant::now();
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.record(name)
    }

    /// Register a file already written into the output directory.
    fn record(&mut self, name: &str) -> Result<()> {
        let path = self.dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(Artifact { path: name.to_string(), sha256: hex::encode(Sha256::digest(&bytes)) });
        Ok(())
    }
}

/// Hash of config, geometry and quadrature rules.
fn input_hash(cfg: &RunConfig, spec: &ProblemSpec) -> Result<String> {
    fn json<T: Serialize>(v: &T) -> Result<String> {
        serde_json::to_string(v).map_err(|e| Error::InvalidInput(e.to_string()))
    }
    let mut h = Sha256::new();
    h.update(json(cfg)?.as_bytes());
    h.update(json(&spec.geometry)?.as_bytes());
    h.update(json(&spec.params)?.as_bytes());
    h.update(format!("{:?}{:?}", quadrature::TRIANGLE, quadrature::EDGE).as_bytes());
    Ok(hex::encode(h.finalize()))
}

fn cmd_solve(cfg: &RunConfig, spec: &ProblemSpec, run: &mut Run) -> Result<serde_json::Value> {
    let mesh = Arc::new(triangulate_domain_with(&spec.geometry, &cfg.domain_mesh(spec)).stage("mesh")?);
    run.lap("mesh");
    let state = solve_state(spec, mesh.clone(), &cfg.state_newton(spec))?;
    run.lap("state+adjoint");
    state.u.write_vtk(&run.dir.join("state.vtk"), "u")?;
    run.record("state.vtk")?;
    state.p.write_vtk(&run.dir.join("adjoint.vtk"), "p")?;
    run.record("adjoint.vtk")?;
    Ok(serde_json::json!({
        "cost": state.cost,
        "vertices": mesh.num_vertices(),
        "newton_iterations": state.newton.iterations,
        "final_residual": state.newton.final_residual,
    }))
}

fn cmd_td_point(cfg: &RunConfig, spec: &ProblemSpec, run: &mut Run) -> Result<serde_json::Value> {
    let shapes = cfg.shapes()?;
    let opts = cfg.td_options(spec);
    let z = cfg.z(spec);
    let mesh = Arc::new(triangulate_domain_with(&spec.geometry, &opts.domain_mesh).stage("mesh")?);
    run.lap("mesh");
    let state = solve_state(spec, mesh, &opts.state_newton)?;
    run.lap("state+adjoint");
    let reports: Vec<TDReport> = shapes
        .par_iter()
        .map(|(name, shape)| {
            let ball = Arc::new(triangulate_ball_with(shape, &opts.ball).stage("ball mesh")?);
            td_at(spec, &state, z, ball, name, &opts.corrector_newton)
        })
        .collect::<Result<_>>()?;
    run.lap("correctors+terms");
    let mut csv = format!("{}\n", TDReport::CSV_HEADER);
    for r in &reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    run.write("td_point.csv", &csv)?;
    Ok(serde_json::json!(reports.iter().map(|r| serde_json::json!({"shape": r.shape, "total": r.total, "R1": r.r1, "R2": r.r2, "dL": r.dl})).collect::<Vec<_>>()))
}

fn cmd_taylor(cfg: &RunConfig, spec: &ProblemSpec, run: &mut Run) -> Result<serde_json::Value> {
    let shapes = cfg.shapes()?;
    let opts = cfg.taylor_options(spec);
    let sweep = cfg.sweep();
    let z = cfg.z(spec);
    let mut results: Vec<TaylorResult> = Vec::new();
    for (name, shape) in &shapes {
        let family = build_family(spec, z, shape, &sweep, &opts)?;
        run.lap(&format!("{name}: meshes"));
        let td = family_td(spec, &family, name, &opts)?;
        run.lap(&format!("{name}: topological derivative"));
        let res = run_taylor_test(spec, &family, name, td.total, &sweep, &opts.state_newton)?;
        run.lap(&format!("{name}: sweep"));
        run.write(&format!("taylor_{name}.csv"), &res.to_csv())?;
        results.push(res);
    }
    let mut summary = String::from("shape,td_total,area,slope,included\n");
    for r in &results {
        let _ = writeln!(summary, "{},{},{},{},{}", r.shape, r.td_total, r.area, r.slope, r.included());
    }
    run.write("taylor_summary.csv", &summary)?;
    run.write("taylor_normalized.dat", &normalize_for_plot(&results)?.to_gnuplot())?;
    Ok(serde_json::json!(results.iter().map(|r| serde_json::json!({"shape": r.shape, "td_total": r.td_total, "slope": r.slope, "included": r.included()})).collect::<Vec<_>>()))
}

fn cmd_td_field(cfg: &RunConfig, spec: &ProblemSpec, run: &mut Run) -> Result<serde_json::Value> {
    let (name, shape) = cfg.shapes()?.swap_remove(0);
    let z = cfg.z(spec);
    let mesh = Arc::new(triangulate_domain_with(&spec.geometry, &cfg.domain_mesh(spec)).stage("mesh")?);
    run.lap("mesh");
    let state = solve_state(spec, mesh, &cfg.state_newton(spec))?;
    run.lap("state+adjoint");
    let ball = Arc::new(triangulate_ball_with(&shape, &BallOptions::new(cfg.mesh.radius, cfg.mesh.h_ball, cfg.mesh.grading)).stage("ball mesh")?);
    let basis = precompute_basis(spec, z, ball, &name).stage("basis")?;
    run.lap("basis");
    let map = td_field(spec, &basis, &state)?;
    run.lap("field");
    // The closed form only exists for the linear scalar example with a disk.
    let reference = if spec.name == "example1" && name == "disk" { Some(closed_form_field(spec, &state, &map)?) } else { None };
    map.write_vtk(&run.dir.join("td_field.vtk"), reference.as_deref())?;
    run.record("td_field.vtk")?;
    run.write("td_field.csv", &map.to_csv())?;
    let max_diff = reference.as_ref().map(|r| map.values.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    Ok(serde_json::json!({
        "cells": map.values.len(),
        "flagged": map.flagged.iter().filter(|f| **f).count(),
        "basis_size": basis.len(),
        "extra_solves": map.solves,
        "max_abs_difference_to_closed_form": max_diff,
    }))
}

fn execute(cli: &Cli) -> Result<PathBuf> {
    let (cmd, args) = cli.command.split();
    let cfg = RunConfig::load(&args.config, &args.set)?;
    cfg.check_command(cmd)?;
    let threads = args.threads.or(cfg.threads);
    if threads == Some(0) {
        return Err(Error::Config { path: "--threads".into(), message: "must be positive".into() });
    }
    if let Some(n) = threads {
        // Fails only if a pool already exists (e.g. repeated in-process runs).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let spec = cfg.spec()?;
    let mut run = Run::new(cfg.resolved_output_dir())?;
    let summary = match cmd {
        Command::Solve => cmd_solve(&cfg, &spec, &mut run)?,
        Command::TdPoint => cmd_td_point(&cfg, &spec, &mut run)?,
        Command::Taylor => cmd_taylor(&cfg, &spec, &mut run)?,
        Command::TdField => cmd_td_field(&cfg, &spec, &mut run)?,
    };
    let manifest = Manifest {
        tool: "topoforge".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        input_hash: input_hash(&cfg, &spec)?,
        config: cfg,
        overrides: args.set.clone(),
        threads: rayon::current_num_threads(),
        artifacts: std::mem::take(&mut run.artifacts),
        timings: std::mem::take(&mut run.timings),
        summary,
    };
    let path = run.dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format { path: path.clone(), message: e.to_string() })?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(run.dir)
}

/// Run the CLI and return the process exit status.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(dir) => {
            eprintln!("artifacts written to {}", display(&dir));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            e.exit_code()
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
