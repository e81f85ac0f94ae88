//! Task dispatch.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anisoheat::estimates::{self, mollified_sign_field, CubeFamily};
use anisoheat::grid::{lp_norm, GridFunction, TorusGrid};
use anisoheat::kernels::{kernel_bound_report, kernel_with_operator_powers, levy_integral_check, BoundGrid, KernelQuery};
use anisoheat::multiplier::{mikhlin_marcinkiewicz_diagnostic, DerivativeForm, MultiplierInputs};
use anisoheat::solver::{residual, solve_elliptic, solve_parabolic};
use anisoheat::stochastic::{char_function_check, laplace_check, sample_additive, sample_iasbm, sample_subordinator, CharTarget};
use anisoheat::EstimateReport;
use serde_json::json;

use crate::config::{Forcing, Process, RunConfig, Suite, Task, Validated, VerifyConfig};
use crate::output::{report_render, sha256_hex, Axis, OutDir, RunManifest};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

fn runtime(context: &str) -> impl Fn(anisoheat::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

struct Stages(BTreeMap<String, f64>, Instant);

impl Stages {
    fn new() -> Self {
        Self(BTreeMap::new(), Instant::now())
    }

    fn mark(&mut self, name: &str) {
        self.0.insert(name.to_string(), self.1.elapsed().as_secs_f64());
        self.1 = Instant::now();
    }
}

/// Runs one configuration into `out_dir` and writes the manifest.
pub fn run(config: &RunConfig, out_dir: &Path, workers: usize) -> Result<RunManifest, CliError> {
    let mut stages = Stages::new();
    let v = config.validate()?;
    stages.mark("validate");
    let mut out = OutDir::create(out_dir)?;
    let pass = match &config.task {
        Task::Kernel { block, t_values, r_values, k, m, nu, bound } => {
            kernel(&v, &mut out, *block, t_values, r_values, (*k, *m, *nu), bound)?
        }
        Task::Solve { forcing, lambda } => solve(&v, &mut out, forcing, *lambda)?,
        Task::Simulate { process, n_paths, block, probes } => {
            simulate(&v, &mut out, *process, *n_paths, *block, probes, config.seed)?
        }
        Task::Verify(cfg) => {
            let suite = cfg.suite.ok_or_else(|| CliError::Config("verify needs a suite (--suite or task.suite)".into()))?;
            verify(&v, &mut out, suite, cfg, config.seed)?
        }
        Task::Multiplier { delta1, delta2, unsquared_derivative } => multiplier(&mut out, *delta1, *delta2, *unsquared_derivative)?,
    };
    stages.mark(config.task.name());
    let canonical = serde_json::to_vec(config).map_err(|e| CliError::Runtime(e.to_string()))?;
    let manifest = RunManifest {
        task: config.task.name().into(),
        config_sha256: sha256_hex(&canonical),
        toolkit_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: config.seed,
        workers,
        timings: stages.0,
        files: RunManifest::inventory(&out)?,
        pass,
    };
    out.json(MANIFEST, &manifest)?;
    Ok(manifest)
}

fn kernel(
    v: &Validated,
    out: &mut OutDir,
    block: usize,
    t_values: &[f64],
    r_values: &[f64],
    (k, m, nu): (u32, u32, f64),
    bound: &crate::config::BoundConfig,
) -> Result<bool, CliError> {
    let phi = &v.aniso.phis[block];
    let dim = v.aniso.dims[block];
    let mut rows = Vec::new();
    for &t in t_values {
        for &r in r_values {
            let q = KernelQuery::heat(phi, dim, t, r).with_powers(k, m, nu);
            let val = kernel_with_operator_powers(&q).map_err(runtime("kernel"))?;
            rows.push(vec![format!("{t:e}"), format!("{r:e}"), format!("{:e}", val.value), format!("{:e}", val.abs_error_estimate)]);
        }
    }
    out.csv("kernel_grid.csv", &["t", "r", "value", "err_est"], &rows)?;
    let grid = BoundGrid {
        t_lo: bound.t_lo,
        t_hi: bound.t_hi,
        r_lo: bound.r_lo,
        r_hi: bound.r_hi,
        n_t: bound.n_t,
        n_r: bound.n_r,
    };
    let report = kernel_bound_report(phi, dim, k, m, nu, grid).map_err(runtime("kernel bound"))?;
    out.json(
        "bound_report.json",
        &json!({
            "sup_ratio": report.sup,
            "refinement_delta": report.refinement_delta,
            "pass": report.pass,
            "report": report,
        }),
    )?;
    Ok(report.pass)
}

fn grid_axes(g: &TorusGrid, with_time: bool) -> Vec<Axis> {
    let mut axes = Vec::new();
    if let (true, Some(t)) = (with_time, &g.time) {
        axes.push(Axis { name: "t".into(), extent: (0.0, t.horizon), count: t.steps + 1 });
    }
    for (i, b) in g.blocks.iter().enumerate() {
        for j in 0..b.dim {
            let name = if b.dim == 1 { format!("x{}", i + 1) } else { format!("x{}_{}", i + 1, j + 1) };
            // Periodic axis: the upper end point is excluded.
            axes.push(Axis { name, extent: (0.0, b.length), count: b.n });
        }
    }
    axes
}

fn forcing_function(forcing: &Forcing, grid: &TorusGrid) -> Result<GridFunction, CliError> {
    match forcing {
        Forcing::Constant { value } => {
            let c = *value;
            Ok(GridFunction::from_real_fn(grid.clone(), move |_, _| c))
        }
        other => other
            .field(grid.axis_lengths().len())
            .expect("non-constant forcing has a field")
            .sample(grid)
            .map_err(runtime("forcing")),
    }
}

fn solve(v: &Validated, out: &mut OutDir, forcing: &Forcing, lambda: Option<f64>) -> Result<bool, CliError> {
    let grid = v.grid.as_ref().expect("validated");
    let report_value;
    let (u, pass) = match lambda {
        Some(lambda) => {
            let space = TorusGrid::new(grid.blocks.clone(), None).map_err(runtime("grid"))?;
            let f = forcing_function(forcing, &space)?;
            let u = solve_elliptic(&f, &v.aniso, &v.coeffs, lambda).map_err(runtime("elliptic solve"))?;
            let mut r = EstimateReport::new("elliptic_bound").with_threshold(1.0 + 1e-3);
            for p in [2.0, 4.0] {
                let (nu, nf) = (lp_norm(&u.values, space.cell_volume(), p), lp_norm(&f.values, space.cell_volume(), p));
                r.push(format!("p={p}"), if nf == 0.0 { 0.0 } else { lambda * nu / nf });
            }
            let r = r.finish();
            let pass = r.pass;
            report_value = json!({
                "kind": "elliptic",
                "lambda": lambda,
                "norms": {
                    "f_l2": lp_norm(&f.values, space.cell_volume(), 2.0),
                    "u_l2": lp_norm(&u.values, space.cell_volume(), 2.0),
                    "u_linf": u.max_abs(),
                },
                "max_imag": u.max_imag(),
                "report": r,
            });
            (u, pass)
        }
        None => {
            let f = forcing_function(forcing, grid)?;
            let u = solve_parabolic(&f, &v.aniso, &v.coeffs).map_err(runtime("parabolic solve"))?;
            let res = if grid.time.as_ref().is_some_and(|t| t.steps >= 2) {
                residual(&u, &f, &v.aniso, &v.coeffs).map_err(runtime("residual"))?
            } else {
                0.0
            };
            let last = grid.time_len() - 1;
            let fin: Vec<f64> = u.slice(last).iter().map(|z| z.re).collect();
            let mut r = EstimateReport::new("residual");
            r.push("relative_residual", res);
            report_value = json!({
                "kind": "parabolic",
                "norms": {
                    "f_l2": estimates::mixed_norm(&f, 2.0, 2.0).map_err(runtime("norm"))?,
                    "u_l2": estimates::mixed_norm(&u, 2.0, 2.0).map_err(runtime("norm"))?,
                    "u_linf": u.max_abs(),
                    "u_final_l2": u.slice_lp_norm(last, 2.0),
                    "u_final_min": fin.iter().cloned().fold(f64::INFINITY, f64::min),
                    "u_final_max": fin.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                },
                "residual": res,
                "max_imag": u.max_imag(),
                "report": r.finish(),
            });
            (u, true)
        }
    };
    let values: Vec<f64> = u.values.iter().map(|z| z.re).collect();
    out.grid("u.grid", &values, grid_axes(&u.grid, true), "u (real part)")?;
    out.json("solve_report.json", &report_value)?;
    Ok(pass)
}

fn simulate(
    v: &Validated,
    out: &mut OutDir,
    process: Process,
    n_paths: usize,
    block: usize,
    probes: &[crate::config::Probe],
    seed: u64,
) -> Result<bool, CliError> {
    let time = v.grid.as_ref().and_then(|g| g.time.as_ref()).expect("validated");
    let tg = time.samples();
    let (ens, report) = match process {
        Process::Subordinator => {
            let phi = &v.aniso.phis[block];
            let ens = sample_subordinator(phi, &tg, n_paths, seed).map_err(runtime("subordinator"))?;
            let p: Vec<(f64, f64)> = probes.iter().map(|p| (p.xi[0], p.t)).collect();
            let r = if p.is_empty() { None } else { Some(laplace_check(&ens, phi, &p).map_err(runtime("laplace check"))?) };
            (ens, r)
        }
        Process::Iasbm | Process::Additive => {
            let ens = if process == Process::Iasbm {
                sample_iasbm(&v.aniso, &tg, n_paths, seed)
            } else {
                sample_additive(&v.coeffs, &v.aniso, &tg, n_paths, seed)
            }
            .map_err(runtime("path sampling"))?;
            let target = if process == Process::Iasbm {
                CharTarget::Iasbm(&v.aniso)
            } else {
                CharTarget::Additive { coeffs: &v.coeffs, aniso: &v.aniso }
            };
            let p: Vec<(Vec<f64>, f64)> = probes.iter().map(|p| (p.xi.clone(), p.t)).collect();
            let r = if p.is_empty() { None } else { Some(char_function_check(&ens, &target, &p).map_err(runtime("characteristic function"))?) };
            (ens, r)
        }
    };
    let axes = vec![
        Axis { name: "path".into(), extent: (0.0, n_paths as f64), count: n_paths },
        Axis { name: "t".into(), extent: (0.0, time.horizon), count: tg.len() },
        Axis { name: "coordinate".into(), extent: (0.0, ens.dim as f64), count: ens.dim },
    ];
    out.grid("paths.grid", &ens.values, axes, "process value")?;
    let pass = report.as_ref().is_none_or(|r| r.pass);
    out.json(
        "charfn_report.json",
        &json!({
            "max_deviation": report.as_ref().map(|r| r.sup),
            "threshold": report.as_ref().and_then(|r| r.threshold),
            "pass": pass,
            "n_paths": n_paths,
            "seed": seed,
            "stream_scheme": ens.stream_scheme,
            "report": report,
        }),
    )?;
    Ok(pass)
}

fn verify(v: &Validated, out: &mut OutDir, suite: Suite, cfg: &VerifyConfig, seed: u64) -> Result<bool, CliError> {
    let ens = &cfg.ensemble;
    let axes = v.aniso.total_dim();
    let members = |g: &TorusGrid| -> anisoheat::Result<Vec<GridFunction>> {
        (0..ens.size as u64)
            .map(|j| estimates::BandLimitedField::random(axes, ens.n_modes, ens.max_wave, ens.max_time_mode, seed.wrapping_add(j)).sample(g))
            .collect()
    };
    let grid = v.grid.as_ref();
    let reports: Vec<EstimateReport> = match suite {
        Suite::L2 => {
            let g = grid.expect("validated");
            vec![estimates::l2_check(&members(g).map_err(runtime("ensemble"))?, &v.aniso).map_err(runtime("l2"))?]
        }
        Suite::Lqlp => estimates::lqlp_reports(&members, grid.expect("validated"), &v.aniso, &cfg.pairs).map_err(runtime("lqlp"))?,
        Suite::Bmo => {
            let g = grid.expect("validated");
            let c = &cfg.cubes;
            let centers = CubeFamily::random_centers(g, c.centers, c.t_lo, c.t_hi, seed).map_err(runtime("cube centers"))?;
            let cubes = CubeFamily::log_spaced(&v.aniso, c.b_lo, c.b_hi, c.count, centers).map_err(runtime("cube family"))?;
            let fs: Vec<GridFunction> = (0..c.members as u64).map(|j| mollified_sign_field(g, seed.wrapping_add(j))).collect();
            vec![estimates::bmo_check(&fs, &v.aniso, &cubes).map_err(runtime("bmo"))?]
        }
        Suite::Kernel => {
            let b = &cfg.bound;
            let bg = BoundGrid { t_lo: b.t_lo, t_hi: b.t_hi, r_lo: b.r_lo, r_hi: b.r_hi, n_t: b.n_t, n_r: b.n_r };
            let mut all = Vec::new();
            for (i, phi) in v.aniso.phis.iter().enumerate() {
                for &(k, m) in &cfg.powers {
                    let mut r = kernel_bound_report(phi, v.aniso.dims[i], k, m, cfg.nu, bg).map_err(runtime("kernel bound"))?;
                    r.name = format!("block{}_{}", i + 1, r.name);
                    all.push(r);
                }
            }
            all
        }
        Suite::Levy => {
            let mut all = Vec::new();
            for (i, phi) in v.aniso.phis.iter().enumerate() {
                for &nu in &cfg.levy_nu {
                    let mut r = levy_integral_check(phi, nu, &cfg.lambdas).map_err(runtime("levy integral"))?;
                    r.name = format!("block{}_{}", i + 1, r.name);
                    all.push(r);
                }
            }
            all
        }
    };
    let pass = reports.iter().all(|r| r.pass);
    out.json(&format!("{}_report.json", suite.name()), &json!({ "suite": suite.name(), "pass": pass, "reports": reports }))?;
    let (_, all) = report_render(&out.dir)?;
    out.files.push("summary.csv".into());
    out.files.push("summary.txt".into());
    Ok(pass && all)
}

fn multiplier(out: &mut OutDir, delta1: f64, delta2: f64, unsquared: bool) -> Result<bool, CliError> {
    let form = if unsquared { DerivativeForm::Unsquared } else { DerivativeForm::Exact };
    let d = mikhlin_marcinkiewicz_diagnostic(&MultiplierInputs::new(delta1, delta2).with_form(form)).map_err(runtime("multiplier"))?;
    let rows: Vec<Vec<String>> = d.r_grid.iter().zip(&d.annulus).map(|(r, q)| vec![format!("{r:e}"), format!("{q:e}")]).collect();
    out.csv("mikhlin.csv", &["R", "quantity"], &rows)?;
    let dyadic: Vec<Vec<String>> = d.dyadic.iter().enumerate().map(|(j, q)| vec![j.to_string(), format!("{q:e}")]).collect();
    out.csv("dyadic.csv", &["j", "quantity"], &dyadic)?;
    out.json(
        "slope.json",
        &json!({
            "slope": d.annulus_fit.slope,
            "residual": d.annulus_fit.residual,
            "threshold": d.threshold,
            "diverges": d.diverges,
            "dyadic_slope": d.dyadic_fit.slope,
            "dyadic_threshold": d.dyadic_threshold,
            "dyadic_diverges": d.dyadic_diverges,
            "divergence_required": d.divergence_required,
            "low_confidence": d.low_confidence,
            "form": d.form,
            "pass": d.pass(),
        }),
    )?;
    Ok(d.pass())
}
