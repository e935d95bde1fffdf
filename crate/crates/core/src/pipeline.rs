//! Experiment driver: configured end-to-end runs, amplitude calibration,
//! and parameter sweeps.
//!
//! A run takes one drift spec through the whole chain: Hodge split,
//! smallness verdict, fixed-point factorization, drift and conservation
//! solves over a family of seeded boundary traces, oscillation fits of
//! the solutions, and the grid surrogate of the divergence mass. Stages
//! downstream of a failed one are skipped where they depend on it; the
//! failure is recorded in the summary and the run still completes.
//! Regimes that violate smallness are the interesting ones, so they must
//! produce reports, not errors.
//!
//! Every artifact is written with deterministic formatting: two runs from
//! the same config and spec produce byte-identical files.

use std::fs::create_dir_all;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::{make_drift, DriftKind, DriftSpec};
use crate::driftsolve::{solve_conservation, solve_drift, DriftProblem};
use crate::error::{Error, Result};
use crate::field::{CellVectorField, ScalarField};
use crate::hardy::{divergence_report, HardyReport, PeriodicGrid};
use crate::hodge::{hodge_decompose, smallness_report, HodgeParts, SmallnessReport};
use crate::holder::{scan, HolderFit};
use crate::io;
use crate::mesh::{build_disk_mesh, TriMesh};
use crate::riviere::{decompose, BoundsReport, RiviereDecomp};
use crate::tol;

/// Run parameters. Every field has a default, so a config file only names
/// what it overrides; the resolved struct is embedded in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh_level: u32,
    /// Threshold for the gauge smallness verdict.
    pub smallness_eps: f64,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iter: usize,
    /// Grid side for the divergence surrogate.
    pub hardy_n: usize,
    pub hardy_half_extent: f64,
    /// Outer radius of the oscillation ladder.
    pub holder_r_max: f64,
    pub holder_n_dyadic: usize,
    pub holder_centers: Vec<[f64; 2]>,
    /// Number of seeded boundary traces the solvers run on.
    pub trace_count: usize,
    pub trace_seed: u64,
    /// Amplitude search interval and bisection depth for calibration.
    pub calibrate_lo: f64,
    pub calibrate_hi: f64,
    pub calibrate_iters: usize,
    /// Default output directory; a driver may override it per run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh_level: 5,
            smallness_eps: tol::SMALLNESS_EPS,
            fixed_point_tol: tol::FIXED_POINT_TOL,
            fixed_point_max_iter: tol::FIXED_POINT_MAX_ITER,
            hardy_n: 256,
            hardy_half_extent: 2.0,
            holder_r_max: 0.9,
            holder_n_dyadic: 5,
            holder_centers: vec![[0.0, 0.0]],
            trace_count: 5,
            trace_seed: 7,
            calibrate_lo: 0.05,
            calibrate_hi: 20.0,
            calibrate_iters: 12,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("smallness_eps", self.smallness_eps),
            ("fixed_point_tol", self.fixed_point_tol),
            ("holder_r_max", self.holder_r_max),
            ("hardy_half_extent", self.hardy_half_extent),
            ("calibrate_lo", self.calibrate_lo),
            ("calibrate_hi", self.calibrate_hi),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.mesh_level == 0 {
            return Err(Error::Config("mesh_level must be at least 1".into()));
        }
        if self.fixed_point_max_iter == 0 {
            return Err(Error::Config("fixed_point_max_iter must be at least 1".into()));
        }
        if self.holder_n_dyadic < 3 {
            return Err(Error::Config(format!(
                "holder_n_dyadic must be at least 3, got {}",
                self.holder_n_dyadic
            )));
        }
        if self.holder_centers.is_empty() {
            return Err(Error::Config("holder_centers must not be empty".into()));
        }
        if self.trace_count == 0 {
            return Err(Error::Config("trace_count must be at least 1".into()));
        }
        if self.calibrate_lo >= self.calibrate_hi {
            return Err(Error::Config(format!(
                "calibration interval is empty: [{}, {}]",
                self.calibrate_lo, self.calibrate_hi
            )));
        }
        if self.calibrate_iters == 0 {
            return Err(Error::Config("calibrate_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Parses a config file, filling defaults for absent fields.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// The boundary-trace family used for solver runs: a short Fourier sum in
/// the boundary angle with coefficients drawn from a seeded generator.
/// Trace `k` of a given seed is the same in every run.
pub fn smooth_trace(mesh: &TriMesh, seed: u64, index: usize) -> Vec<f64> {
    let mut s = seed;
    let mut next = move || {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut coef = [0.0; 7];
    for _ in 0..=index {
        for c in coef.iter_mut() {
            *c = next();
        }
    }
    mesh.vertices
        .iter()
        .map(|&[x, y]| {
            let th = y.atan2(x);
            coef[0]
                + coef[1] * th.cos()
                + coef[2] * th.sin()
                + coef[3] * (2.0 * th).cos()
                + coef[4] * (2.0 * th).sin()
                + coef[5] * (3.0 * th).cos()
                + coef[6] * (3.0 * th).sin()
        })
        .collect()
}

/// A recorded stage failure.
#[derive(Debug, Clone, Serialize)]
pub struct StageFailure {
    pub stage: String,
    pub error: String,
}

/// Fixed-point results worth keeping in a summary.
#[derive(Debug, Clone, Serialize)]
pub struct FactorizationSummary {
    pub iterations: usize,
    pub residual_ab: f64,
    pub residual_step2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_ratio: Option<f64>,
    pub bounds: BoundsReport,
}

/// One boundary trace through both solvers and the oscillation scan.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRun {
    pub index: usize,
    /// Sup of the boundary data, the scale the solver gap is judged by.
    pub trace_sup: f64,
    /// `‖u_cons − u_drift‖_{L²}`, present when both solves succeeded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_gap_l2: Option<f64>,
    pub fits: Vec<HolderFit>,
}

/// Everything one run produces, minus the field files.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub config: RunConfig,
    pub spec: DriftSpec,
    pub drift_l2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hodge_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smallness: Option<SmallnessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factorization: Option<FactorizationSummary>,
    pub traces: Vec<TraceRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<HardyReport>,
    pub failures: Vec<StageFailure>,
    /// True when every stage ran to completion.
    pub all_stages_ok: bool,
}

struct StageLog(Vec<StageFailure>);

impl StageLog {
    fn run<T>(&mut self, stage: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.0.push(StageFailure {
                    stage: stage.to_owned(),
                    error: e.to_string(),
                });
                None
            }
        }
    }
}

/// Stage selection for a run. The Hodge split and smallness verdict always
/// run; the rest are opt-in so a driver can expose narrower commands that
/// still produce the same summary shape.
#[derive(Debug, Clone, Copy)]
pub struct StagePlan {
    pub factorize: bool,
    pub solve: bool,
    pub fit: bool,
    pub surrogate: bool,
}

impl StagePlan {
    pub fn full() -> Self {
        StagePlan {
            factorize: true,
            solve: true,
            fit: true,
            surrogate: true,
        }
    }
}

/// Runs the full chain for one spec and writes all artifacts under `out`.
///
/// Returns an error only for invalid configuration or unusable input;
/// solver and fit failures are recorded in the summary instead.
pub fn run_pipeline(config: &RunConfig, spec: &DriftSpec, out: &Path) -> Result<PipelineSummary> {
    run_stages(config, spec, out, StagePlan::full())
}

/// [`run_pipeline`] restricted to the stages named in `plan`. Artifacts of
/// skipped stages are not written and their summary fields stay empty.
pub fn run_stages(
    config: &RunConfig,
    spec: &DriftSpec,
    out: &Path,
    plan: StagePlan,
) -> Result<PipelineSummary> {
    config.validate()?;
    let grid = PeriodicGrid::new(config.hardy_n, config.hardy_half_extent)?;
    let mesh = Arc::new(build_disk_mesh(config.mesh_level)?);
    let drift = make_drift(spec, &mesh)?;
    create_dir_all(out)?;

    let mut log = StageLog(Vec::new());

    let parts: Option<HodgeParts> = log.run("hodge", hodge_decompose(&drift));
    let smallness = parts
        .as_ref()
        .map(|p| smallness_report(p, config.smallness_eps));

    let factorization: Option<RiviereDecomp> = match &parts {
        Some(p) if plan.factorize => log.run(
            "factorization",
            decompose(&drift, p, config.fixed_point_tol, config.fixed_point_max_iter),
        ),
        _ => None,
    };

    let mut traces = Vec::new();
    let mut first_solution: Option<ScalarField> = None;
    let trace_count = if plan.solve { config.trace_count } else { 0 };
    for index in 0..trace_count {
        let g = smooth_trace(&mesh, config.trace_seed, index);
        let trace_sup = g.iter().fold(0.0_f64, |a, v| a.max(v.abs()));

        let stage = format!("drift_solve[{index}]");
        let u = log.run(&stage, DriftProblem::new(mesh.clone(), drift.clone(), g.clone(), None)
            .and_then(|prob| solve_drift(&prob)));

        let solver_gap_l2 = match (&u, &factorization) {
            (Some(u), Some(d)) => {
                let stage = format!("conservation_solve[{index}]");
                log.run(&stage, solve_conservation(&d.a, &d.b, &g, None))
                    .map(|uc| uc.minus(u).l2_norm())
            }
            _ => None,
        };

        let fits = match &u {
            Some(u) if plan.fit => {
                let stage = format!("oscillation_fit[{index}]");
                log.run(
                    &stage,
                    scan(u, &config.holder_centers, config.holder_r_max, config.holder_n_dyadic),
                )
                .unwrap_or_default()
            }
            _ => Vec::new(),
        };

        if index == 0 {
            first_solution = u.clone();
        }
        traces.push(TraceRun {
            index,
            trace_sup,
            solver_gap_l2,
            fits,
        });
    }

    let divergence = if plan.surrogate {
        log.run("divergence_surrogate", divergence_report(&grid, &drift))
    } else {
        None
    };

    let summary = PipelineSummary {
        config: config.clone(),
        spec: spec.clone(),
        drift_l2: drift.l2_norm(),
        hodge_residual: parts.as_ref().map(|p| p.residual_l2),
        smallness,
        factorization: factorization.as_ref().map(|d| FactorizationSummary {
            iterations: d.iterations,
            residual_ab: d.residual_ab,
            residual_step2: d.residual_step2,
            contraction_ratio: d.contraction_ratio(),
            bounds: d.bounds,
        }),
        traces,
        divergence,
        all_stages_ok: log.0.is_empty(),
        failures: log.0,
    };

    write_artifacts(out, &mesh, &drift, &parts, &factorization, &first_solution, &summary, plan)?;
    Ok(summary)
}

fn save(out: &Path, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    std::fs::write(out.join(name), buf)?;
    Ok(())
}

fn save_json(out: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    save(out, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Config(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    })
}

#[allow(clippy::too_many_arguments)]
fn write_artifacts(
    out: &Path,
    mesh: &Arc<TriMesh>,
    drift: &CellVectorField,
    parts: &Option<HodgeParts>,
    factorization: &Option<RiviereDecomp>,
    first_solution: &Option<ScalarField>,
    summary: &PipelineSummary,
    plan: StagePlan,
) -> Result<()> {
    save(out, io::BUNDLE_MESH, |w| io::write_mesh(w, mesh))?;
    save(out, io::BUNDLE_DRIFT, |w| io::write_cell_field(w, drift))?;

    if let Some(p) = parts {
        save(out, "p.field", |w| io::write_scalar_field(w, &p.p))?;
        save(out, "xi.field", |w| io::write_scalar_field(w, &p.xi))?;
    }
    if let Some(d) = factorization {
        save(out, "a.field", |w| io::write_scalar_field(w, &d.a))?;
        save(out, "bstream.field", |w| io::write_scalar_field(w, &d.b))?;
        save(out, "trace.csv", |w| io::write_trace_csv(w, &d.contraction_trace))?;
    }
    if let Some(u) = first_solution {
        save(out, "u0.field", |w| io::write_scalar_field(w, u))?;
    }
    if let Some(first) = summary.traces.first() {
        let g = smooth_trace(mesh, summary.config.trace_seed, first.index);
        let pairs: Vec<(usize, f64)> = mesh
            .boundary_vertex_mask()
            .iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(|(v, _)| (v, g[v]))
            .collect();
        save(out, io::BUNDLE_TRACE, |w| io::write_boundary_csv(w, &pairs))?;
    }

    if plan.fit {
        let rows: Vec<(f64, &HolderFit)> = summary
            .traces
            .iter()
            .flat_map(|t| t.fits.iter().map(move |f| (t.index as f64, f)))
            .collect();
        save(out, "scan.csv", |w| io::write_scan_csv(w, &rows))?;
    }

    if let Some(rep) = &summary.divergence {
        save(out, "hardy.csv", |w| {
            io::write_hardy_csv(w, &[("div_b".to_owned(), *rep)])
        })?;
    }

    save_json(out, "summary.json", summary)
}

/// One probe of the calibration search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AmplitudeProbe {
    pub amplitude: f64,
    pub contracts: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_ratio: Option<f64>,
}

/// Result of the amplitude bisection: the largest drift strength of the
/// family at which the fixed point still contracts.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub config: RunConfig,
    pub spec: DriftSpec,
    pub threshold: f64,
    /// `‖b‖_{L²}` at the threshold amplitude.
    pub drift_l2: f64,
    /// Divergence surrogate total at the threshold amplitude.
    pub hardy_total: f64,
    pub probes: Vec<AmplitudeProbe>,
}

fn family_member(kind: &DriftKind, amplitude: f64) -> DriftSpec {
    match kind {
        DriftKind::Zero => DriftSpec::new(DriftKind::Zero),
        _ => DriftSpec::normalized(kind.clone(), amplitude),
    }
}

/// Bisects the amplitude of a drift family for the edge of fixed-point
/// contraction. Non-convergence is data here: a stalled or blown-up solve
/// marks its amplitude as non-contracting and the search continues.
pub fn calibrate_epsilon(
    config: &RunConfig,
    spec: &DriftSpec,
    out: Option<&Path>,
) -> Result<CalibrationReport> {
    config.validate()?;
    let mesh = Arc::new(build_disk_mesh(config.mesh_level)?);
    let grid = PeriodicGrid::new(config.hardy_n, config.hardy_half_extent)?;

    let mut probes = Vec::new();
    let mut probe = |amplitude: f64| -> Result<bool> {
        let member = family_member(&spec.kind, amplitude);
        let b = make_drift(&member, &mesh)?;
        let outcome = hodge_decompose(&b).and_then(|parts| {
            decompose(&b, &parts, config.fixed_point_tol, config.fixed_point_max_iter)
        });
        let (contracts, ratio) = match outcome {
            Ok(d) => {
                let ratio = d.contraction_ratio();
                (ratio.map_or(true, |r| r < 1.0), ratio)
            }
            Err(Error::FixedPointStall { .. })
            | Err(Error::SolverStall { .. })
            | Err(Error::Incompatible { .. })
            | Err(Error::NonFinite(_))
            | Err(Error::Domain(_)) => (false, None),
            Err(e) => return Err(e),
        };
        probes.push(AmplitudeProbe {
            amplitude,
            contracts,
            contraction_ratio: ratio,
        });
        Ok(contracts)
    };

    let (lo, hi) = (config.calibrate_lo, config.calibrate_hi);
    let threshold = if !probe(lo)? {
        lo
    } else if probe(hi)? {
        hi
    } else {
        let (mut good, mut bad) = (lo, hi);
        for _ in 0..config.calibrate_iters {
            let mid = 0.5 * (good + bad);
            if probe(mid)? {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };

    let b = make_drift(&family_member(&spec.kind, threshold), &mesh)?;
    let report = CalibrationReport {
        config: config.clone(),
        spec: spec.clone(),
        threshold,
        drift_l2: b.l2_norm(),
        hardy_total: divergence_report(&grid, &b)?.total,
        probes,
    };

    if let Some(dir) = out {
        create_dir_all(dir)?;
        save_json(dir, "calibration.json", &report)?;
        save(dir, "probes.csv", |w| {
            writeln!(w, "amplitude,contracts,ratio")?;
            for p in &report.probes {
                match p.contraction_ratio {
                    Some(r) => writeln!(w, "{:?},{},{:?}", p.amplitude, p.contracts, r)?,
                    None => writeln!(w, "{:?},{},", p.amplitude, p.contracts)?,
                }
            }
            Ok(())
        })?;
    }
    Ok(report)
}

/// One sweep point: the spec parameter, the divergence surrogate, and the
/// mean fitted exponent at the first scan center.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub eps_reg: f64,
    pub hardy_total: f64,
    pub alpha: f64,
    pub fit_r2: f64,
}

/// Sweep report: one pipeline run per regularization, merged in order.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config: RunConfig,
    pub kappa: f64,
    pub rows: Vec<SweepRow>,
}

fn center_alpha(summary: &PipelineSummary) -> (f64, f64) {
    let home = summary.config.holder_centers[0];
    let mut alphas = Vec::new();
    let mut r2_min = f64::INFINITY;
    for t in &summary.traces {
        for f in &t.fits {
            if f.center == home && f.conclusive {
                alphas.push(f.alpha);
                r2_min = r2_min.min(f.fit_r2);
            }
        }
    }
    if alphas.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (alphas.iter().sum::<f64>() / alphas.len() as f64, r2_min)
    }
}

/// Runs the concentrating-sink family over a list of regularization
/// widths. Runs fan out across threads, each into its own subdirectory;
/// the merge is sequential in the given order.
pub fn sink_sweep(
    config: &RunConfig,
    kappa: f64,
    eps_list: &[f64],
    out: &Path,
) -> Result<SweepReport> {
    config.validate()?;
    if eps_list.is_empty() {
        return Err(Error::Config("sweep needs at least one regularization".into()));
    }
    create_dir_all(out)?;

    let summaries: Vec<Result<PipelineSummary>> = std::thread::scope(|scope| {
        let handles: Vec<_> = eps_list
            .iter()
            .map(|&eps_reg| {
                let dir = out.join(format!("eps_{eps_reg}"));
                scope.spawn(move || {
                    let spec = DriftSpec::new(DriftKind::RadialSink { kappa, eps_reg });
                    run_pipeline(config, &spec, &dir)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut rows = Vec::new();
    for (&eps_reg, summary) in eps_list.iter().zip(summaries) {
        let summary = summary?;
        let (alpha, fit_r2) = center_alpha(&summary);
        rows.push(SweepRow {
            eps_reg,
            hardy_total: summary.divergence.map_or(f64::NAN, |d| d.total),
            alpha,
            fit_r2,
        });
    }

    let report = SweepReport {
        config: config.clone(),
        kappa,
        rows,
    };

    save(out, "sweep.csv", |w| {
        writeln!(w, "eps_reg,hardy_total,alpha,fit_r2")?;
        for r in &report.rows {
            writeln!(
                w,
                "{:?},{:?},{:?},{:?}",
                r.eps_reg, r.hardy_total, r.alpha, r.fit_r2
            )?;
        }
        Ok(())
    })?;
    save_json(out, "sweep.json", &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::FieldSpec;
    use crate::tol;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn mixed_family() -> DriftSpec {
        DriftSpec::new(DriftKind::Jacobian {
            h: FieldSpec::Trig { kx: 1.0, ky: 1.0 },
            v: FieldSpec::Xy,
        })
    }

    #[test]
    fn empty_config_resolves_to_the_documented_defaults() {
        let parsed = parse_config("{}").unwrap();
        assert_eq!(parsed, RunConfig::default());
        assert_eq!(parsed.mesh_level, 5);
        assert_eq!(parsed.smallness_eps, tol::SMALLNESS_EPS);
        assert_eq!(parsed.fixed_point_max_iter, tol::FIXED_POINT_MAX_ITER);

        let partial = parse_config(r#"{"mesh_level": 3, "trace_count": 2}"#).unwrap();
        assert_eq!(partial.mesh_level, 3);
        assert_eq!(partial.trace_count, 2);
        assert_eq!(partial.holder_r_max, RunConfig::default().holder_r_max);
    }

    #[test]
    fn malformed_configs_are_config_errors() {
        let bad = [
            r#"{"mesh_level": 0}"#,
            r#"{"smallness_eps": -1.0}"#,
            r#"{"fixed_point_tol": 0.0}"#,
            r#"{"trace_count": 0}"#,
            r#"{"holder_n_dyadic": 2}"#,
            r#"{"holder_centers": []}"#,
            r#"{"calibrate_lo": 2.0, "calibrate_hi": 1.0}"#,
            r#"{"calibrate_iters": 0}"#,
            r#"{"mesh_depth": 4}"#,
            "not json",
        ];
        for text in bad {
            let err = parse_config(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}");
        }
    }

    #[test]
    fn smooth_traces_are_reproducible_and_distinct() {
        let mesh = Arc::new(build_disk_mesh(3).unwrap());
        let a = smooth_trace(&mesh, 7, 2);
        let b = smooth_trace(&mesh, 7, 2);
        assert_eq!(a, b);

        let c = smooth_trace(&mesh, 7, 3);
        assert_ne!(a, c);
        let d = smooth_trace(&mesh, 8, 2);
        assert_ne!(a, d);

        let sup = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(a.iter().all(|v| v.is_finite()));
        assert!(sup < 3.5, "seven half-unit coefficients bound the sum");
    }

    /// The zero drift is an exact fixed point of everything: both solver
    /// forms assemble the same matrix, the factorization converges on its
    /// seed, and every residual is zero to the bit.
    #[test]
    fn zero_drift_runs_clean_end_to_end() {
        let dir = tmp();
        let config = RunConfig {
            trace_count: 2,
            ..RunConfig::default()
        };
        let summary =
            run_pipeline(&config, &DriftSpec::new(DriftKind::Zero), dir.path()).unwrap();

        assert!(summary.all_stages_ok);
        assert_eq!(summary.drift_l2, 0.0);
        assert_eq!(summary.hodge_residual, Some(0.0));
        assert!(summary.smallness.unwrap().passed);

        let f = summary.factorization.as_ref().unwrap();
        assert_eq!(f.iterations, 1);
        assert_eq!(f.residual_ab, 0.0);
        assert_eq!(f.residual_step2, 0.0);
        assert_eq!(f.bounds.atilde_dev_sup, 0.0);

        assert_eq!(summary.traces.len(), 2);
        for t in &summary.traces {
            assert_eq!(t.solver_gap_l2, Some(0.0));
            assert_eq!(t.fits.len(), 1, "origin probe fits");
            let fit = &t.fits[0];
            assert!(fit.conclusive, "harmonic solutions fit cleanly");
            assert!(fit.alpha >= 1.0, "smooth solutions read as Lipschitz");
        }

        let total = summary.divergence.unwrap().total;
        assert!(total.abs() < 1e-12, "divergence surrogate of zero: {total}");
        assert!(dir.path().join("summary.json").is_file());
    }

    /// A small rotated-gradient drift converges in one step because the
    /// pair (1, ξ) is an exact fixed point when the gauge is trivial.
    #[test]
    fn stream_drift_matches_factorization_baselines() {
        let dir = tmp();
        let config = RunConfig {
            trace_count: 2,
            ..RunConfig::default()
        };
        let spec = DriftSpec::normalized(DriftKind::Stream { xi: FieldSpec::Xy }, 0.05);
        let summary = run_pipeline(&config, &spec, dir.path()).unwrap();

        assert!(summary.all_stages_ok);
        assert!((summary.drift_l2 - 0.05).abs() < 1e-15);
        assert!(summary.hodge_residual.unwrap() < 1e-10);
        assert!(summary.smallness.unwrap().passed);

        let f = summary.factorization.as_ref().unwrap();
        assert!(f.iterations <= 2, "took {} iterations", f.iterations);
        assert!(f.residual_ab < 1e-10);
        assert!(f.residual_step2 < 1e-10);

        for t in &summary.traces {
            let gap = t.solver_gap_l2.unwrap();
            assert!(gap < 1e-6 * t.trace_sup, "gap {gap}");
            assert!(t.fits[0].conclusive);
            assert!(t.fits[0].alpha >= 1.0);
        }
    }

    /// An oversized drift stalls the fixed point; the stall lands in the
    /// failure log while the drift solves and fits still run.
    #[test]
    fn failures_are_recorded_and_later_stages_still_run() {
        let dir = tmp();
        let config = RunConfig {
            mesh_level: 4,
            trace_count: 1,
            fixed_point_max_iter: 1,
            hardy_n: 64,
            ..RunConfig::default()
        };
        let spec = DriftSpec {
            normalize: Some(5.0),
            ..mixed_family()
        };
        let summary = run_pipeline(&config, &spec, dir.path()).unwrap();

        assert!(!summary.all_stages_ok);
        assert_eq!(summary.failures.len(), 1);
        assert_eq!(summary.failures[0].stage, "factorization");
        assert!(summary.factorization.is_none());

        assert_eq!(summary.traces.len(), 1);
        assert!(summary.traces[0].solver_gap_l2.is_none());
        assert!(summary.divergence.is_some());
        assert!(summary.smallness.is_some());

        assert!(dir.path().join("summary.json").is_file());
        assert!(dir.path().join("u0.field").is_file());
        assert!(!dir.path().join("a.field").exists());
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tmp();
        let config = RunConfig {
            mesh_level: 4,
            trace_count: 2,
            hardy_n: 64,
            ..RunConfig::default()
        };
        let spec = DriftSpec::normalized(DriftKind::Stream { xi: FieldSpec::Xy }, 0.05);
        run_pipeline(&config, &spec, &dir.path().join("one")).unwrap();
        run_pipeline(&config, &spec, &dir.path().join("two")).unwrap();

        for name in [
            "summary.json",
            "scan.csv",
            "trace.csv",
            "hardy.csv",
            "b.field",
            "u0.field",
            "g.csv",
        ] {
            let a = std::fs::read(dir.path().join("one").join(name)).unwrap();
            let b = std::fs::read(dir.path().join("two").join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn pipeline_directory_loads_back_as_a_problem_bundle() {
        let dir = tmp();
        let config = RunConfig {
            mesh_level: 3,
            trace_count: 1,
            hardy_n: 64,
            ..RunConfig::default()
        };
        let spec = DriftSpec::new(DriftKind::RadialSource { kappa: 0.1 });
        run_pipeline(&config, &spec, dir.path()).unwrap();

        let bundle = io::load_bundle(dir.path()).unwrap();
        assert_eq!(bundle.mesh.n_vertices(), 217);
        assert!(bundle.source.is_none());

        let g = smooth_trace(&bundle.mesh, config.trace_seed, 0);
        for (v, on) in bundle.mesh.boundary_vertex_mask().iter().enumerate() {
            if *on {
                assert_eq!(bundle.trace[v], g[v]);
            } else {
                assert_eq!(bundle.trace[v], 0.0);
            }
        }
    }

    /// The trivial families never stop contracting: the zero field is
    /// fixed outright, and a pure rotated gradient keeps the gauge at one,
    /// which makes the fixed point exact at any amplitude. Both searches
    /// must run to the upper bound.
    #[test]
    fn calibration_of_degenerate_families_hits_the_upper_bound() {
        let config = RunConfig {
            mesh_level: 3,
            calibrate_iters: 4,
            hardy_n: 64,
            ..RunConfig::default()
        };

        let zero = calibrate_epsilon(&config, &DriftSpec::new(DriftKind::Zero), None).unwrap();
        assert_eq!(zero.threshold, config.calibrate_hi);
        assert_eq!(zero.drift_l2, 0.0);
        assert_eq!(zero.probes.len(), 2);
        assert!(zero.probes.iter().all(|p| p.contracts));

        let stream = calibrate_epsilon(
            &config,
            &DriftSpec::new(DriftKind::Stream { xi: FieldSpec::Xy }),
            None,
        )
        .unwrap();
        assert_eq!(stream.threshold, config.calibrate_hi);
        assert!((stream.drift_l2 - config.calibrate_hi).abs() < 1e-12);
    }

    /// A drift with both Hodge parts couples the fixed point to itself,
    /// so contraction fails past a finite amplitude. The edge is interior
    /// to the search window and stable under one refinement.
    #[test]
    fn calibration_finds_a_finite_edge_for_mixed_drifts() {
        let out = tmp();
        let config = RunConfig {
            mesh_level: 3,
            calibrate_iters: 10,
            hardy_n: 64,
            ..RunConfig::default()
        };
        let report = calibrate_epsilon(&config, &mixed_family(), Some(out.path())).unwrap();

        assert!(report.threshold > 3.0 && report.threshold < 8.0, "{}", report.threshold);
        assert!((report.drift_l2 - report.threshold).abs() < 1e-9);
        assert!(report.hardy_total > 1.0);
        assert_eq!(report.probes.len(), 2 + config.calibrate_iters);
        assert!(out.path().join("calibration.json").is_file());
        assert!(out.path().join("probes.csv").is_file());

        let again = calibrate_epsilon(&config, &mixed_family(), None).unwrap();
        assert_eq!(report.threshold, again.threshold, "bisection is deterministic");

        let finer = calibrate_epsilon(
            &RunConfig {
                mesh_level: 4,
                ..config.clone()
            },
            &mixed_family(),
            None,
        )
        .unwrap();
        let rel = (finer.threshold - report.threshold).abs() / report.threshold;
        assert!(rel < 0.1, "levels 3 and 4 disagree by {rel}");
    }

    /// Concentrating the outward radial family raises the divergence
    /// surrogate and erodes the fitted exponent at the origin.
    #[test]
    fn sink_sweep_rows_are_monotone_both_ways() {
        let dir = tmp();
        let config = RunConfig {
            trace_count: 3,
            ..RunConfig::default()
        };
        let report = sink_sweep(&config, 2.0, &[0.4, 0.1, 0.025], dir.path()).unwrap();

        assert_eq!(report.rows.len(), 3);
        for pair in report.rows.windows(2) {
            assert!(pair[1].hardy_total > pair[0].hardy_total);
            assert!(pair[1].alpha < pair[0].alpha);
        }
        for (row, (hardy, alpha)) in report.rows.iter().zip([
            (39.13, 1.01),
            (63.77, 0.79),
            (84.50, 0.74),
        ]) {
            assert!((row.hardy_total - hardy).abs() < 0.05 * hardy, "{row:?}");
            assert!((row.alpha - alpha).abs() < 0.05, "{row:?}");
            assert!(row.fit_r2 >= tol::FIT_R2_MIN, "{row:?}");
        }

        let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("eps_reg,hardy_total,alpha,fit_r2\n"));
        assert!(dir.path().join("eps_0.4").join("summary.json").is_file());
        assert!(dir.path().join("eps_0.025").join("summary.json").is_file());
    }
}
