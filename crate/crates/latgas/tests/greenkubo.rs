use latgas::equilibrium::{sample_configuration, sigma_observable, ChemicalPotential, ObservableSpec};
use latgas::greenkubo::*;
use latgas::{Error, Preset, Torus, VelocityModel};

fn model(p: Preset) -> VelocityModel {
    VelocityModel::preset(p, 1.0).unwrap()
}

fn spec() -> ObservableSpec {
    ObservableSpec::default()
}

#[test]
fn field_sum_moments_at_equilibrium() {
    let m = model(Preset::Axes);
    let s = sigma_observable(&spec(), &m).unwrap();
    let t = Torus::new(16).unwrap();
    let n = 4000;
    let xs: Vec<f64> = (0..n).map(|k| field_sum(&sample_configuration(&m, &ChemicalPotential([0.0; 3]), t, k), &s)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let m2 = sq.iter().sum::<f64>() / n as f64;
    let sd = |v: &[f64], mu: f64| (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
    assert!(mean.abs() < 4.0 * sd(&xs, mean), "{mean}");
    assert!((m2 - 0.125).abs() < 4.0 * sd(&sq, m2), "{m2}");
}

#[test]
fn static_variance_reference() {
    assert!((static_variance(&model(Preset::Axes), &spec()).unwrap() - 0.125).abs() < 1e-15);
    assert!((static_variance(&model(Preset::Cube), &spec()).unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn equal_time_point_matches_static_variance() {
    let m = model(Preset::Axes);
    let s = correlation_series(&m, &spec(), 32, &[0.0], 256, 1).unwrap();
    assert!((s.values[0] - 0.125).abs() < 4.0 * s.stderr[0], "{} ± {}", s.values[0], s.stderr[0]);
    assert!(s.stderr[0] > 0.0);
}

#[test]
fn series_preconditions() {
    let m = model(Preset::Axes);
    assert!(matches!(correlation_series(&m, &spec(), 8, &[0.0, 1.0], 1, 1), Err(Error::NoVariance(_))));
    assert!(matches!(correlation_series(&m, &spec(), 8, &[0.5, 1.0], 4, 1), Err(Error::Domain(_))));
    assert!(matches!(correlation_series(&m, &spec(), 8, &[0.0, 1.0, 1.0], 4, 1), Err(Error::Domain(_))));
}

#[test]
fn constant_correlations_give_closed_form_diffusivity() {
    let m = model(Preset::Cube);
    let times = geometric_times(50.0);
    let d = diffusivity_curve(&series_from_values(times.clone(), vec![0.0; times.len()], spec(), 1.0), &m).unwrap();
    assert_eq!(d.constant, 1.0);
    assert!(d.values.iter().all(|&v| v == 1.0));
    let c = 0.3;
    let d = diffusivity_curve(&series_from_values(times.clone(), vec![c; times.len()], spec(), 1.0), &m).unwrap();
    for (&t, &v) in times.iter().zip(&d.values) {
        assert!((v - (1.0 + c * t / 2.0)).abs() < 1e-12, "t={t}: {v}");
    }
}

#[test]
fn diffusivity_needs_scalar_susceptibility() {
    let times = vec![0.0, 1.0];
    let s = series_from_values(times, vec![0.0; 2], spec(), 1.0);
    assert!(matches!(diffusivity_curve(&s, &model(Preset::Axes)), Err(Error::Unsupported(_))));
    assert_eq!(kappa(&model(Preset::Cube)).unwrap(), 1.0);
}

fn exp_series() -> CorrelationSeries {
    let times: Vec<f64> = (0..=6000).map(|k| k as f64 * 0.01).collect();
    let values = times.iter().map(|t| (-t).exp()).collect();
    series_from_values(times, values, spec(), 1.0)
}

#[test]
fn laplace_of_exponential() {
    let s = exp_series();
    let mut last = f64::INFINITY;
    for lambda in [0.1, 0.2, 0.5, 1.0, 3.0] {
        let e = laplace_estimate(&s, lambda).unwrap();
        assert!((e.value - 1.0 / (1.0 + lambda)).abs() < 1e-3, "lambda={lambda}: {}", e.value);
        assert!(!e.tail_uncontrolled);
        assert!(e.value < last);
        last = e.value;
    }
}

#[test]
fn laplace_edge_cases() {
    let times = geometric_times(20.0);
    let zero = series_from_values(times.clone(), vec![0.0; times.len()], spec(), 1.0);
    assert_eq!(laplace_estimate(&zero, 0.5).unwrap().value, 0.0);
    let e = laplace_estimate(&zero, 0.1).unwrap();
    assert!(e.tail_uncontrolled);
    assert!(matches!(laplace_estimate(&zero, 0.0), Err(Error::Domain(_))));
    // decreasing for a nonnegative, slowly decaying series
    let slow = series_from_values(times.clone(), times.iter().map(|t| 1.0 / (1.0 + t)).collect(), spec(), 1.0);
    let v: Vec<f64> = [0.05, 0.1, 0.2, 0.5, 1.0].iter().map(|&l| laplace_estimate(&slow, l).unwrap().value).collect();
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
}

#[test]
fn doubling_replicas_halves_variance() {
    let m = model(Preset::Cube);
    let times = [0.0, 0.5, 1.0];
    let a = correlation_series(&m, &spec(), 6, &times, 2000, 3).unwrap();
    let b = correlation_series(&m, &spec(), 6, &times, 4000, 4).unwrap();
    for k in 0..times.len() {
        let ratio = (a.stderr[k] / b.stderr[k]).powi(2);
        assert!((ratio - 2.0).abs() < 0.4, "t={}: stderr^2 ratio {ratio}", times[k]);
    }
}

#[test]
fn correlations_decay() {
    let m = model(Preset::Cube);
    let s = correlation_series_with(&m, &spec(), 16, &[0.0, 1.0, 20.0], 64, 5, &SeriesOptions { origins: 5, spacing: 2.0 }).unwrap();
    assert!(s.values[2] < s.values[0] / 4.0, "{:?}", s.values);
}

#[test]
fn displacement_and_double_integral_agree() {
    let m = model(Preset::Cube);
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.125).collect();
    let s = correlation_series(&m, &spec(), 8, &times, 400, 6).unwrap();
    let direct = diffusivity_curve(&s, &m).unwrap();
    let disp = displacement_diffusivity(&s, &m).unwrap();
    for k in [8, 20, 40] {
        let gap = (direct.values[k] - disp.values[k]).abs();
        let se = (direct.stderr[k].powi(2) + disp.stderr[k].powi(2)).sqrt();
        assert!(gap < 4.0 * se, "t={}: {} vs {} (se {se})", times[k], direct.values[k], disp.values[k]);
    }
    // short times are dominated by the constant
    assert!((direct.values[1] - 1.0).abs() < 0.1);
}

#[test]
fn ballistic_term_reference() {
    // every flux is a sum of theta_v (1 - theta_v) terms, stationary at theta_v = 1/2
    for p in [Preset::Axes, Preset::Cube] {
        for sp in [spec(), ObservableSpec::new([0.3, -1.0], [0.5, 1.0, 2.0]).unwrap()] {
            let v = ballistic_term(&model(p), &sp).unwrap();
            assert!(v.abs() < 1e-12, "{p:?}: {v}");
        }
    }
}
