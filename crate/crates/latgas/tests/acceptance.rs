//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the criterion lines are always printed.
//! A name filter that matches neither "acceptance" nor "criterion" skips the run.

use latgas::dual::resolvent::sigma_classes;
use latgas::dual::{single_site_collision_spectrum, structural_suite, Collision, Geometry, Hierarchy, ResolventOptions};
use latgas::equilibrium::{sigma_observable, ObservableSpec};
use latgas::greenkubo::{correlation_series, correlation_series_with, diffusivity_curve, geometric_times, laplace_estimate, static_variance, SeriesOptions};
use latgas::spectral::{bound_profile, degree2_resolvent_fourier, dispersion_fixed_point, fit_law, geometric_lambdas, Law, MomentumGrid};
use latgas::dual::truncated_resolvent;
use latgas::{Preset, Result, Torus, VelocityModel};
use std::time::Instant;

const PRESETS: [Preset; 2] = [Preset::Axes, Preset::Cube];

fn model(p: Preset) -> VelocityModel {
    VelocityModel::preset(p, 1.0).unwrap()
}

fn spec() -> ObservableSpec {
    ObservableSpec::default()
}

type Outcome = Result<(bool, String)>;

fn structural() -> Outcome {
    let mut failed = Vec::new();
    let mut n = 0;
    for p in PRESETS {
        for c in structural_suite(&model(p), 4, 20, 11)? {
            n += 1;
            if !c.passed {
                failed.push(format!("{}/{} defect {:e}", p.name(), c.name, c.max_defect));
            }
        }
    }
    Ok((failed.is_empty(), if failed.is_empty() { format!("{n} exact identities, 20 cases each, 4x4 tori") } else { failed.join("; ") }))
}

fn collision() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for p in PRESETS {
        let (spec, diags) = single_site_collision_spectrum(&model(p));
        let q_ok = diags.iter().all(|d| d.passes());
        ok &= q_ok && spec.is_consistent() && spec.kernel_dim == 3;
        detail.push(format!("{}: {} quadruples {}, kernel dim {}", p.name(), diags.len(), if q_ok { "ok" } else { "FAIL" }, spec.kernel_dim));
    }
    Ok((ok, detail.join("; ")))
}

fn interleaving() -> Outcome {
    let m = model(Preset::Axes);
    let geo = Geometry::new(Torus::new(6)?, m.nv());
    let sig = sigma_classes(&sigma_observable(&spec(), &m)?, &m, geo);
    let h: Vec<Hierarchy> = (2..=4).map(|n| Hierarchy::build(&m, geo, n, true, Collision::Lc1)).collect::<Result<_>>()?;
    let mut ok = true;
    let mut detail = Vec::new();
    for lambda in [1.0, 0.1] {
        let v: Vec<f64> = h.iter().map(|h| h.value(&sig, lambda, &ResolventOptions::default()).map(|r| r.value)).collect::<Result<_>>()?;
        let (t2, t3, t4) = (v[0], v[1], v[2]);
        ok &= t3 <= t4 + 1e-9 * t4 && t4 <= t2 + 1e-9 * t2;
        detail.push(format!("lambda={lambda}: {t3:.10} <= {t4:.10} <= {t2:.10}"));
    }
    Ok((ok, detail.join("; ")))
}

fn cross_oracle() -> Outcome {
    let grid = MomentumGrid::torus(6)?;
    let mut worst: f64 = 0.0;
    for p in PRESETS {
        let m = model(p);
        let geo = Geometry::new(Torus::new(6)?, m.nv());
        let sig = sigma_classes(&sigma_observable(&spec(), &m)?, &m, geo);
        for lambda in [1.0, 0.1, 0.01] {
            let lat = truncated_resolvent(&m, &sig, lambda, 2, false, Collision::Qn, &ResolventOptions::default())?.value;
            let four = degree2_resolvent_fourier(&m, &spec(), lambda, &grid)?;
            worst = worst.max((lat - four).abs());
        }
    }
    Ok((worst < 1e-8, format!("max |lattice - fourier| = {worst:.2e} over both presets, lambda in {{1, 0.1, 0.01}}")))
}

fn scaling() -> Outcome {
    let m = model(Preset::Axes);
    let lambdas = geometric_lambdas(1e-6, 1e-30, 2);
    let b = bound_profile(&m, &spec(), &lambdas, 1.0, 1.0, Law::LogLog)?;
    let control = bound_profile(&m, &spec(), &lambdas, 0.0, 1.0, Law::Log)?;
    let control_loglog = fit_law(&lambdas, &control.values, Law::LogLog)?;
    let ok = b.fit.residual < 0.05 && b.fit.b > 0.0 && control.fit.residual < 0.05 && control.fit.residual < control_loglog.residual;
    Ok((
        ok,
        format!(
            "loglog fit b = {:.4}, residual {:.3}; C1=0 log fit residual {:.1e} (loglog {:.3})",
            b.fit.b, b.fit.residual, control.fit.residual, control_loglog.residual
        ),
    ))
}

fn dispersion() -> Outcome {
    let us: Vec<f64> = (0..25).map(|i| 10f64.powf(-12.0 + 8.0 * i as f64 / 24.0)).collect();
    let r = dispersion_fixed_point(30, &us, 0.0, 1.0)?;
    Ok(((r.kappa - 0.5).abs() <= 0.05, format!("kappa = {:.4} (Cesaro mean {:.4}) after 30 iterations from 0", r.kappa, r.cesaro_mean)))
}

fn monte_carlo() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    // axes: chi(0) is not scalar, so only the static checks apply
    let axes = model(Preset::Axes);
    let s = correlation_series(&axes, &spec(), 32, &[0.0], 256, 17)?;
    let exact = static_variance(&axes, &spec())?;
    let c0 = (s.values[0] - exact).abs() < 4.0 * s.stderr[0];
    ok &= c0;
    detail.push(format!("axes C(0) = {:.4} ± {:.4} vs {exact}", s.values[0], s.stderr[0]));
    let cube = model(Preset::Cube);
    let opts = SeriesOptions { origins: 51, spacing: 2.0 };
    let s = correlation_series_with(&cube, &spec(), 32, &geometric_times(100.0), 256, 19, &opts)?;
    let exact = static_variance(&cube, &spec())?;
    let c0 = (s.values[0] - exact).abs() < 4.0 * s.stderr[0];
    let n = s.densities.len() as f64;
    let rho = s.densities.iter().sum::<f64>() / n;
    let rho_se = (s.densities.iter().map(|d| (d - rho).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let half = cube.nv() as f64 / 2.0;
    let dens = (rho - half).abs() < 4.0 * rho_se;
    let d = diffusivity_curve(&s, &cube)?;
    let mono = d.is_nondecreasing(1.0, 100.0, 4.0);
    let lap: Vec<f64> = [0.05, 0.1, 0.2, 0.5].iter().map(|&l| laplace_estimate(&s, l).map(|e| e.value)).collect::<Result<_>>()?;
    let lap_ok = lap.iter().all(|&v| v > 0.0) && lap.windows(2).all(|w| w[1] < w[0]);
    ok &= c0 && dens && mono && lap_ok;
    detail.push(format!("cube C(0) = {:.4} ± {:.4} vs {exact}", s.values[0], s.stderr[0]));
    detail.push(format!("density {rho:.4} ± {rho_se:.4} vs {half}"));
    detail.push(format!("D nondecreasing on [1, 100]: {mono}"));
    detail.push(format!("laplace at 0.05, 0.1, 0.2, 0.5 = {}", lap.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")));
    Ok((ok, detail.join("; ")))
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str()) || "criterion".contains(f.as_str())) {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("exact structural suite", structural),
        ("collision spectrum", collision),
        ("hierarchy interleaving", interleaving),
        ("lattice / fourier cross-oracle", cross_oracle),
        ("log log scaling of the bound", scaling),
        ("dispersion fixed point", dispersion),
        ("monte carlo consistency", monte_carlo),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!("criterion {}: {} {} ({:.1}s) {}", i + 1, if passed { "pass" } else { "FAIL" }, name, start.elapsed().as_secs_f64(), detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
