//! Command line driver for the disk drift laboratory.
//!
//! Every verb reads one JSON job file and writes into one output
//! directory. The job file names the run parameters under `"run"` and the
//! drift under `"spec"`; the `pipeline` verb alternatively accepts a
//! `"sweep"` block. A run that completes with recorded stage failures
//! still exits 0; only unusable configuration or I/O problems are fatal.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use driftdisk::catalog::DriftSpec;
use driftdisk::mesh::build_disk_mesh;
use driftdisk::pipeline::{
    calibrate_epsilon, run_stages, sink_sweep, PipelineSummary, RunConfig, StagePlan,
};

/// One job: run parameters plus the drift they apply to.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Job {
    #[serde(default)]
    run: RunConfig,
    spec: Option<DriftSpec>,
    sweep: Option<SweepJob>,
}

/// Concentrating-sink sweep over the regularization widths.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepJob {
    kappa: f64,
    eps_regs: Vec<f64>,
}

#[derive(Parser)]
#[command(name = "driftdisk", version, about = "Drift fields on the unit disk: \
gauge factorization, conservation-form solves, and regularity scans")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct JobArgs {
    /// JSON job file; defaults apply for anything absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides run.out_dir from the job file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Build the triangulated disk and write it out.
    Mesh(JobArgs),
    /// Hodge split, smallness verdict, and the gauge factorization.
    Decompose(JobArgs),
    /// Factorize, then run both solver forms over the boundary traces.
    Solve(JobArgs),
    /// Grid surrogate of the divergence mass of the drift.
    Hardy(JobArgs),
    /// Solve over the boundary traces and fit oscillation exponents.
    Holder(JobArgs),
    /// The whole chain, or a sink sweep when the job has a sweep block.
    Pipeline(JobArgs),
    /// Bisect the drift amplitude where the fixed point stops contracting.
    Calibrate(JobArgs),
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let factorize_only = StagePlan {
        factorize: true,
        solve: false,
        fit: false,
        surrogate: false,
    };
    let solves = StagePlan {
        factorize: true,
        solve: true,
        fit: false,
        surrogate: false,
    };
    let fits = StagePlan {
        factorize: false,
        solve: true,
        fit: true,
        surrogate: false,
    };
    let surrogate_only = StagePlan {
        factorize: false,
        solve: false,
        fit: false,
        surrogate: true,
    };
    match cli.verb {
        Verb::Mesh(a) => mesh_verb(&a),
        Verb::Decompose(a) => staged(&a, factorize_only),
        Verb::Solve(a) => staged(&a, solves),
        Verb::Holder(a) => staged(&a, fits),
        Verb::Hardy(a) => staged(&a, surrogate_only),
        Verb::Pipeline(a) => pipeline_verb(&a),
        Verb::Calibrate(a) => calibrate_verb(&a),
    }
}

fn load_job(args: &JobArgs) -> Result<Job> {
    let Some(path) = &args.config else {
        return Ok(Job::default());
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let job: Job = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    job.run.validate()?;
    if let Some(spec) = &job.spec {
        spec.validate()?;
    }
    Ok(job)
}

fn out_dir(args: &JobArgs, job: &Job) -> Result<PathBuf> {
    if let Some(out) = &args.out {
        return Ok(out.clone());
    }
    if let Some(dir) = &job.run.out_dir {
        return Ok(PathBuf::from(dir));
    }
    bail!("no output directory: pass --out or set run.out_dir in the job file");
}

fn need_spec(job: &Job) -> Result<&DriftSpec> {
    job.spec
        .as_ref()
        .ok_or_else(|| anyhow!("this verb needs a \"spec\" entry in the job file"))
}

fn mesh_verb(args: &JobArgs) -> Result<()> {
    let job = load_job(args)?;
    let out = out_dir(args, &job)?;
    let mesh = build_disk_mesh(job.run.mesh_level)?;
    fs::create_dir_all(&out)?;
    let mut buf = Vec::new();
    driftdisk::io::write_mesh(&mut buf, &mesh)?;
    let path = out.join(driftdisk::io::BUNDLE_MESH);
    fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "level {} disk: {} vertices, {} triangles, max edge {:.4}",
        job.run.mesh_level,
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.max_edge_len()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn staged(args: &JobArgs, plan: StagePlan) -> Result<()> {
    let job = load_job(args)?;
    let out = out_dir(args, &job)?;
    let spec = need_spec(&job)?;
    let summary = run_stages(&job.run, spec, &out, plan)?;
    report(&summary, &out);
    Ok(())
}

fn pipeline_verb(args: &JobArgs) -> Result<()> {
    let job = load_job(args)?;
    let out = out_dir(args, &job)?;
    match (&job.spec, &job.sweep) {
        (Some(spec), None) => {
            let summary = run_stages(&job.run, spec, &out, StagePlan::full())?;
            report(&summary, &out);
            Ok(())
        }
        (None, Some(sweep)) => {
            let rep = sink_sweep(&job.run, sweep.kappa, &sweep.eps_regs, &out)?;
            for row in &rep.rows {
                println!(
                    "eps_reg {:<8} hardy_total {:>10.4}  alpha {:>7.4}  fit_r2 {:>7.4}",
                    row.eps_reg, row.hardy_total, row.alpha, row.fit_r2
                );
            }
            println!("wrote {}", out.join("sweep.csv").display());
            Ok(())
        }
        (Some(_), Some(_)) => bail!("job file names both \"spec\" and \"sweep\"; pick one"),
        (None, None) => bail!("pipeline needs a \"spec\" or \"sweep\" entry in the job file"),
    }
}

fn calibrate_verb(args: &JobArgs) -> Result<()> {
    let job = load_job(args)?;
    let out = out_dir(args, &job)?;
    let spec = need_spec(&job)?;
    let rep = calibrate_epsilon(&job.run, spec, Some(&out))?;
    println!(
        "threshold amplitude {:.6} after {} probes",
        rep.threshold,
        rep.probes.len()
    );
    println!("|b|_L2 at threshold = {:.6}", rep.drift_l2);
    println!("divergence surrogate at threshold = {:.6}", rep.hardy_total);
    println!("wrote {}", out.join("calibration.json").display());
    Ok(())
}

fn report(summary: &PipelineSummary, out: &Path) {
    println!("drift |b|_L2 = {:.6}", summary.drift_l2);
    if let Some(r) = summary.hodge_residual {
        println!("hodge residual = {r:.3e}");
    }
    if let Some(s) = &summary.smallness {
        println!(
            "smallness: {} (energy {:.3e}, threshold {:.0e})",
            if s.passed { "pass" } else { "fail" },
            s.energy.dirichlet_energy,
            s.epsilon
        );
    }
    if let Some(f) = &summary.factorization {
        println!(
            "factorization: {} iterations, residual {:.3e}, step-2 residual {:.3e}",
            f.iterations, f.residual_ab, f.residual_step2
        );
    }
    for t in &summary.traces {
        let gap = match t.solver_gap_l2 {
            Some(g) => format!("gap {g:.3e}"),
            None => "gap -".to_owned(),
        };
        let fits: Vec<String> = t
            .fits
            .iter()
            .map(|f| {
                format!(
                    "alpha({:.2},{:.2}) = {:.3}{}",
                    f.center[0],
                    f.center[1],
                    f.alpha,
                    if f.conclusive { "" } else { "?" }
                )
            })
            .collect();
        println!("trace {}: sup {:.3}, {}  {}", t.index, t.trace_sup, gap, fits.join("  "));
    }
    if let Some(d) = &summary.divergence {
        println!("divergence surrogate: total {:.4}, mean {:.3e}", d.total, d.mean);
    }
    for f in &summary.failures {
        println!("stage {} failed: {}", f.stage, f.error);
    }
    println!(
        "{}; wrote {}",
        if summary.all_stages_ok {
            "all stages ok".to_owned()
        } else {
            format!("{} stage failure(s) recorded", summary.failures.len())
        },
        out.join("summary.json").display()
    );
}
