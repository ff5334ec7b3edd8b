//! Experiment orchestration for the latgas library: configuration, pipelines,
//! artifacts and reports.

pub mod config;
pub mod report;

pub use config::{ExperimentConfig, Pipeline};
pub use report::{emit_report, Check, Format, RunReport, Section};

use latgas::dual::{single_site_collision_spectrum, structural_suite, Geometry, Hierarchy, ResolventOptions};
use latgas::equilibrium::{sample_configuration, sigma_observable, ChemicalPotential};
use latgas::greenkubo::{
    correlation_series_with, diffusivity_curve, displacement_diffusivity, geometric_times, laplace_estimate, static_variance, SeriesOptions,
};
use latgas::kmc::{SimState, Simulator};
use latgas::spectral::{bound_profile, dispersion_fixed_point, geometric_lambdas, Law};
use latgas::Torus;
use serde_json::json;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

#[derive(Debug)]
pub enum HarnessError {
    /// The config violates a precondition; nothing was run.
    Config(String),
    /// A library error, tagged with the pipeline that raised it.
    Module { section: String, source: latgas::Error },
    Io(String),
}

impl std::fmt::Display for HarnessError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HarnessError::Config(m) => write!(f, "invalid config: {m}"),
            HarnessError::Module { section, source } => write!(f, "[{section}] {source}"),
            HarnessError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl std::error::Error for HarnessError {}

fn tag(section: &str) -> impl Fn(latgas::Error) -> HarnessError + '_ {
    move |source| HarnessError::Module { section: section.into(), source }
}

/// Writes `bytes` next to the target and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

struct Out<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Out<'_> {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), HarnessError> {
        let p = self.dir.join(name);
        write_atomic(&p, bytes)?;
        self.written.push(p.display().to_string());
        Ok(())
    }
    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<(), HarnessError> {
        let mut s = serde_json::to_string_pretty(v).expect("json");
        s.push('\n');
        self.put(name, s.as_bytes())
    }
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

struct SectionOut {
    result: serde_json::Value,
    checks: Vec<(String, bool, String)>,
}

/// Runs the configured pipelines in order. Artifacts of finished sections stay on disk
/// when a later one fails.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let mut report = RunReport::new(config.clone());
    for &p in &config.pipelines {
        let name = p.name();
        let start = Instant::now();
        let mut out = Out { dir: &config.out_dir, written: Vec::new() };
        let sec = match p {
            Pipeline::Simulate => simulate(config, &mut out),
            Pipeline::Greenkubo => greenkubo(config, &mut out),
            Pipeline::DualCheck => dual_check(config, &mut out),
            Pipeline::Resolvent => resolvent(config, &mut out),
            Pipeline::Bound => bound(config, &mut out),
            Pipeline::DispersionKappa => dispersion(config, &mut out),
        }?;
        report.timings.insert(name.into(), start.elapsed().as_secs_f64());
        for (n, passed, detail) in sec.checks {
            report.checks.push(Check { section: name.into(), name: n, passed, detail });
        }
        report.sections.push(Section { name: name.into(), result: sec.result, artifacts: out.written });
    }
    Ok(report)
}

fn simulate(c: &ExperimentConfig, out: &mut Out) -> Result<SectionOut, HarnessError> {
    let t = tag("simulate");
    let model = c.model()?;
    let torus = Torus::new(c.side).map_err(&t)?;
    let config = sample_configuration(&model, &ChemicalPotential([0.0; 3]), torus, c.seed);
    let start = model.conserved_quantities(&config);
    let mut sim = Simulator::new(&model, SimState::new(config, c.seed, 0));
    let mut rows = Vec::new();
    let mut conserved = true;
    for &time in &geometric_times(c.horizon) {
        sim.evolve(time, &[], |_, _| {});
        let (mass, p) = model.conserved_quantities(sim.config());
        conserved &= (mass, p) == start;
        let cur = sim.integrated_current();
        rows.push(vec![num(time), sim.state.events.to_string(), mass.to_string(), p[0].to_string(), p[1].to_string(), cur[0][0].to_string(), cur[1][0].to_string()]);
    }
    out.put("simulate.csv", csv(&["t", "events", "mass", "px", "py", "mass_current_x", "mass_current_y"], rows).as_bytes())?;
    let result = json!({
        "side": c.side,
        "horizon": c.horizon,
        "events": sim.state.events,
        "events_per_site_time": sim.state.events as f64 / (torus.sites() as f64 * c.horizon),
        "mass": start.0,
        "momentum": start.1,
    });
    Ok(SectionOut { result, checks: vec![("conservation".into(), conserved, format!("mass {} momentum {:?}", start.0, start.1))] })
}

fn greenkubo(c: &ExperimentConfig, out: &mut Out) -> Result<SectionOut, HarnessError> {
    let t = tag("greenkubo");
    let model = c.model()?;
    let spec = c.spec()?;
    let times = geometric_times(c.horizon);
    let opts = SeriesOptions { origins: c.origins, spacing: c.origin_spacing };
    let series = correlation_series_with(&model, &spec, c.side, &times, c.replicas, c.seed, &opts).map_err(&t)?;
    let exact = static_variance(&model, &spec).map_err(&t)?;
    let mut checks = Vec::new();
    let (c0, se0) = (series.values[0], series.stderr[0]);
    checks.push(("c0".into(), (c0 - exact).abs() <= c.nsigma * se0, format!("C(0) = {c0:.5} +- {se0:.5}, exact {exact:.5}")));
    let n = series.densities.len() as f64;
    let rho = series.densities.iter().sum::<f64>() / n;
    let var = series.densities.iter().map(|d| (d - rho).powi(2)).sum::<f64>() / (n - 1.0);
    let se_rho = (var / n).sqrt();
    let want = model.nv() as f64 / 2.0;
    checks.push(("density".into(), (rho - want).abs() <= c.nsigma * se_rho, format!("{rho:.5} +- {se_rho:.5} per site, expected {want}")));

    // D needs a scalar susceptibility; otherwise only C and its Laplace transform are reported
    let (dcurve, dnote) = match diffusivity_curve(&series, &model) {
        Ok(d) => (Some(d), None),
        Err(latgas::Error::Unsupported(m)) => (None, Some(m)),
        Err(e) => return Err(t(e)),
    };
    let disp = if dcurve.is_some() { Some(displacement_diffusivity(&series, &model).map_err(&t)?) } else { None };
    if let Some(d) = &dcurve {
        let lo = c.diffusivity_from.min(c.horizon);
        checks.push((
            "diffusivity_nondecreasing".into(),
            d.is_nondecreasing(lo, c.horizon, c.nsigma),
            format!("D on [{lo}, {}]: {:.4} -> {:.4}", c.horizon, d.values.iter().zip(&times).find(|(_, &s)| s >= lo).map(|(v, _)| *v).unwrap_or(f64::NAN), d.values.last().unwrap()),
        ));
    }
    let rows = (0..times.len()).map(|k| {
        let mut r = vec![num(times[k]), num(series.values[k]), num(series.stderr[k])];
        for d in [&dcurve, &disp] {
            match d {
                Some(d) => r.extend([num(d.values[k]), num(d.stderr[k])]),
                None => r.extend([String::new(), String::new()]),
            }
        }
        r
    });
    out.put("greenkubo.csv", csv(&["t", "C", "C_stderr", "D", "D_stderr", "D_displacement", "D_displacement_stderr"], rows).as_bytes())?;

    let mut lams = c.laplace_lambdas.clone();
    lams.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let laplace: Vec<_> = lams.iter().map(|&l| laplace_estimate(&series, l)).collect::<Result<_, _>>().map_err(&t)?;
    let positive = laplace.iter().all(|e| e.value > 0.0);
    let decreasing = laplace.windows(2).all(|w| w[1].value < w[0].value);
    let mut detail = String::new();
    for e in &laplace {
        let _ = write!(detail, "{}: {:.4}+-{:.4} ", e.lambda, e.value, e.stderr);
    }
    checks.push(("laplace_positive_decreasing".into(), positive && decreasing, detail.trim_end().to_string()));
    out.json("laplace.json", &serde_json::to_value(&laplace).unwrap())?;
    let result = json!({
        "side": c.side,
        "replicas": c.replicas,
        "origins": c.origins,
        "origin_spacing": c.origin_spacing,
        "c0": c0,
        "c0_stderr": se0,
        "c0_exact": exact,
        "density": rho,
        "density_stderr": se_rho,
        "kappa": dcurve.as_ref().map(|d| d.kappa),
        "diffusivity_note": dnote,
        "laplace": laplace,
    });
    Ok(SectionOut { result, checks })
}

fn dual_check(c: &ExperimentConfig, out: &mut Out) -> Result<SectionOut, HarnessError> {
    let t = tag("dual-check");
    let model = c.model()?;
    let ids = structural_suite(&model, c.check_side, c.check_cases, c.seed).map_err(&t)?;
    let (spec, quads) = single_site_collision_spectrum(&model);
    let mut checks: Vec<(String, bool, String)> =
        ids.iter().map(|i| (i.name.clone(), i.passed, format!("{} cases, max defect {:e}", i.cases, i.max_defect))).collect();
    let worst = quads.iter().map(|q| q.psi_residual.max(q.rank_one_residual).max(q.degree2_residual).max(q.degree4_residual)).fold(0.0, f64::max);
    checks.push(("collision_eigenvalue".into(), quads.iter().all(|q| q.passes()), format!("{} quadruples, worst residual {worst:e}", quads.len())));
    checks.push(("collision_matrix".into(), spec.is_consistent(), format!("eigenvalues {:?}", spec.eigenvalues.iter().map(|e| (e * 1e12).round() / 1e12).collect::<Vec<_>>())));
    checks.push(("kernel_dimension".into(), spec.kernel_dim == 3, format!("dim ker Q = {}", spec.kernel_dim)));
    let result = json!({
        "identities": ids,
        "quadruples": quads,
        "q_eigenvalues": spec.eigenvalues,
        "kernel_dim": spec.kernel_dim,
        "conserved_residual": spec.conserved_residual,
        "stencil_residual": spec.stencil_residual,
    });
    out.json("dual_check.json", &result)?;
    Ok(SectionOut { result, checks })
}

fn resolvent(c: &ExperimentConfig, out: &mut Out) -> Result<SectionOut, HarnessError> {
    let t = tag("resolvent");
    let model = c.model()?;
    let spec = c.spec()?;
    let geo = Geometry::new(Torus::new(c.resolvent_side).map_err(&t)?, model.nv());
    let sigma = latgas::dual::resolvent::sigma_classes(&sigma_observable(&spec, &model).map_err(&t)?, &model, geo);
    let opts = ResolventOptions { tol: c.solver_tol, max_iter: c.solver_max_iter, strategy: c.strategy };
    let mut results = Vec::new();
    for n in 2..=c.n_max {
        let h = Hierarchy::build(&model, geo, n, c.hardcore, c.collision).map_err(&t)?;
        for &l in &c.resolvent_lambdas {
            results.push(h.value(&sigma, l, &opts).map_err(&t)?);
        }
    }
    let rows = results.iter().map(|r| vec![num(r.lambda), r.n.to_string(), num(r.value), r.iterations.to_string(), num(r.residual)]);
    out.put("resolvent.csv", csv(&["lambda", "n", "value", "iterations", "residual"], rows).as_bytes())?;
    let mut checks = Vec::new();
    for &l in &c.resolvent_lambdas {
        let v = |n: usize| results.iter().find(|r| r.n == n && r.lambda == l).map(|r| r.value);
        let slack = |lo: f64, hi: f64| hi - lo >= -1e-9 * hi.abs();
        let (ok, detail) = match (v(2), v(3), v(4)) {
            (Some(a), Some(b), Some(d)) => (slack(b, d) && slack(d, a), format!("n=3 {b:.10} <= n=4 {d:.10} <= n=2 {a:.10}")),
            (Some(a), Some(b), None) => (slack(b, a), format!("n=3 {b:.10} <= n=2 {a:.10}")),
            _ => continue,
        };
        checks.push((format!("interleaving[lambda={l}]"), ok, detail));
    }
    Ok(SectionOut { result: json!({ "side": c.resolvent_side, "results": results }), checks })
}

fn bound(c: &ExperimentConfig, out: &mut Out) -> Result<SectionOut, HarnessError> {
    let t = tag("bound");
    let model = c.model()?;
    let spec = c.spec()?;
    let lams = geometric_lambdas(c.bound_lambda_hi, c.bound_lambda_lo, c.bound_per_decade);
    let prof = bound_profile(&model, &spec, &lams, c.c1, c.epsilon, c.law).map_err(&t)?;
    let x = |l: f64| match c.law {
        Law::LogLog => (-l.ln()).ln(),
        Law::Log => -l.ln(),
    };
    let rows = prof.lambdas.iter().zip(&prof.values).map(|(&l, &b)| {
        let fitted = prof.fit.a + prof.fit.b * x(l);
        vec![num(l), num(b), num((b - fitted) / b)]
    });
    out.put("bound.csv", csv(&["lambda", "B", "fit_residual"], rows).as_bytes())?;
    let control = bound_profile(&model, &spec, &lams, 0.0, c.epsilon, Law::Log).map_err(&t)?;
    let checks = vec![
        (
            "scaling_law".into(),
            prof.fit.residual < 0.05 && prof.fit.b > 0.0,
            format!("{:?} fit a = {:.5}, b = {:.5}, residual {:.4}", c.law, prof.fit.a, prof.fit.b, prof.fit.residual),
        ),
        ("control_log_law".into(), control.fit.residual < 0.05 && control.fit.b > 0.0, format!("C1 = 0: log fit b = {:.5}, residual {:.2e}", control.fit.b, control.fit.residual)),
    ];
    let result = json!({ "profile": prof, "control": control.fit });
    out.json("bound.json", &result)?;
    Ok(SectionOut { result, checks })
}

fn dispersion(c: &ExperimentConfig, out: &mut Out) -> Result<SectionOut, HarnessError> {
    let t = tag("dispersion-kappa");
    let us = c.kappa_grid();
    let r = dispersion_fixed_point(c.kappa_iterations, &us, c.kappa0, c.epsilon).map_err(&t)?;
    let result = serde_json::to_value(&r).unwrap();
    out.json("kappa.json", &result)?;
    let checks = vec![("fixed_point".into(), (r.kappa - 0.5).abs() <= 0.05, format!("kappa = {:.4} (Cesaro mean {:.4}) on u in [{:e}, {:e}]", r.kappa, r.cesaro_mean, r.u_min, r.u_max))];
    Ok(SectionOut { result, checks })
}
