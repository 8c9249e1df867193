#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use sdfreg_core::optimizer::IterationView;
use sdfreg_core::selftest::{self, SelftestOptions};
use sdfreg_core::{
    compute_modes, cotan_laplacian, joint_bounding_box, load_obj, lumped_mass, make_quadrature,
    register_on_quadrature, save_obj, OptimizerConfig, RegError, Similarity, TriMesh,
};

use args::Args;

/// Failure classes mapped to process exit codes.
enum Failure {
    /// Bad input, configuration or IO: exit 1.
    Input(anyhow::Error),
    /// The numerical pipeline itself failed: exit 2.
    Solver(anyhow::Error),
}

impl From<RegError> for Failure {
    fn from(e: RegError) -> Self {
        match e {
            RegError::Assembly(_) | RegError::EigenSolver { .. } => Failure::Solver(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match args::parse_from(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads(args.threads) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    if args.selftest {
        return run_selftest(&args);
    }
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver failure: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads(threads: usize) -> anyhow::Result<()> {
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

fn run_selftest(args: &Args) -> ExitCode {
    let start = Instant::now();
    let results = selftest::run(SelftestOptions {
        corrupt_gradient: args.selftest_corrupt_gradient,
    });
    print!("{}", selftest::format_table(&results));
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    match value {
        Some(p) if !p.as_os_str().is_empty() => Ok(p),
        _ => Err(anyhow!("missing required flag --{flag}")),
    }
}

fn optimizer_config(args: &Args) -> OptimizerConfig<f64> {
    let mut config = OptimizerConfig::<f64> {
        max_modes: args.modes,
        stall_start: args.stall_start,
        stall_end: args.stall_end,
        reg_lambda: args.reg_lambda,
        ..Default::default()
    };
    config.quadrature.resolution = args.grid;
    config.quadrature.pad_fraction = args.pad;
    config.quadrature.target_sign = args.sign;
    config
}

fn snapshot_name(stage: usize, iteration: usize) -> String {
    format!("snapshot_s{stage:03}_i{iteration:06}.obj")
}

fn run(args: &Args) -> Result<(), Failure> {
    let source_path = required(&args.source, "source")?;
    let target_path = required(&args.target, "target")?;
    let output_path = required(&args.output, "output")?;
    if !(args.pad >= 0.0) {
        return Err(anyhow!("--pad must be >= 0, got {}", args.pad).into());
    }
    let config = optimizer_config(args);
    config.validate()?;

    let source = load_obj::<f64>(source_path)?;
    let target = load_obj::<f64>(target_path)?;
    for w in source.quality_warnings() {
        log::warn!("source: {w}");
    }
    for w in target.quality_warnings() {
        log::warn!("target: {w}");
    }

    let similarity = if args.normalize {
        Some(Similarity::unit_diagonal(&source, &target)?)
    } else {
        None
    };
    let to_world = |mesh: TriMesh<f64>| match &similarity {
        Some(s) => s.invert(&mesh),
        None => mesh,
    };
    let (src, tgt) = match &similarity {
        Some(s) => (s.apply(&source), s.apply(&target)),
        None => (source.clone(), target.clone()),
    };

    let start = Instant::now();
    let q = &config.quadrature;
    let quad = make_quadrature(&src, &tgt, q.resolution, q.pad_fraction, q.target_sign)?;
    if let Some(path) = &args.dump_sdf {
        // The volume is written in solver coordinates.
        quad.write_volume(path)?;
    }
    if let Some(path) = &args.dump_modes {
        let modes = compute_modes(&cotan_laplacian(&src)?, &lumped_mass(&src)?, config.max_modes)?;
        modes.save_csv(path)?;
    }

    let snapshot_dir = match &args.snapshot_dir {
        Some(d) => d.clone(),
        None => output_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if args.snapshot_every > 0 && !snapshot_dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&snapshot_dir)
            .with_context(|| format!("creating snapshot directory {}", snapshot_dir.display()))?;
    }
    let mut snapshot_error: Option<anyhow::Error> = None;
    let observer = |view: &IterationView<'_, f64>| {
        if args.snapshot_every == 0 || !view.iteration.is_multiple_of(args.snapshot_every) || snapshot_error.is_some() {
            return;
        }
        let path = snapshot_dir.join(snapshot_name(view.stage, view.iteration));
        let written = TriMesh::unvectorize(view.positions, view.triangles)
            .and_then(|m| save_obj(&to_world(m), &path));
        if let Err(e) = written {
            snapshot_error = Some(e.into());
        }
    };
    let scale = joint_bounding_box(&src, &tgt, 0.0)?.diagonal();
    let result = register_on_quadrature(&src, &quad, scale, &config, observer)?;
    if let Some(e) = snapshot_error {
        return Err(e.context("writing snapshot").into());
    }

    save_obj(&to_world(result.mesh.clone()), output_path)?;
    if let Some(path) = &args.trace {
        result.trace.save_csv(path)?;
    }
    let iterations = result.trace.records.last().map_or(0, |r| r.iteration);
    println!(
        "registered {} vertices: {} modes, {} iterations, energy {:.6e} (sdf {:.6e}), {}, {:.2} s",
        source.vertex_count(),
        result.coords.mode_count(),
        iterations,
        result.energy,
        result.sdf_energy,
        result.trace.termination,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
