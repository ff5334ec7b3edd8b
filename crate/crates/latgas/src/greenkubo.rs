//! Current autocorrelations from equilibrium ensembles, the diffusivity curve and
//! its Laplace transform.

use crate::equilibrium::{flux_gradient, mean_state, sample_with, sigma_observable, susceptibility, ChemicalPotential, ObservableSpec, SigmaObservable};
use crate::dual::resolvent::sigma_classes;
use crate::dual::sets::Geometry;
use crate::error::{Error, Result};
use crate::kmc::{stream, SimState, Simulator};
use crate::model::{Configuration, Torus, VelocityModel};
use crate::quad::e1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// sum_x sigma(tau_x eta) / sqrt(L^2).
pub fn field_sum(config: &Configuration, sigma: &SigmaObservable) -> f64 {
    let t = config.torus();
    let s: f64 = (0..t.sites()).map(|x| sigma.eval_at(config, x)).sum();
    s / t.side() as f64
}

/// t = 0 followed by 2^{k/4} for t in [2^{-4}, horizon], and the horizon itself.
pub fn geometric_times(horizon: f64) -> Vec<f64> {
    let mut t = vec![0.0];
    let mut k = -16i32;
    loop {
        let x = 2f64.powf(k as f64 / 4.0);
        if x >= horizon * (1.0 - 1e-12) {
            break;
        }
        t.push(x);
        k += 1;
    }
    t.push(horizon);
    t
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicas: usize,
    pub spec: ObservableSpec,
    pub side: usize,
    pub gamma: f64,
    pub origins: usize,
    pub origin_spacing: f64,
    /// Per-replica covariance estimates, averaged over time origins.
    pub products: Vec<Vec<f64>>,
    /// Per-replica mean over origins of the integrated current increment Q(s + t) - Q(s).
    pub currents: Vec<Vec<f64>>,
    /// Same for the squared increment.
    pub currents_sq: Vec<Vec<f64>>,
    /// Per-replica particle density per site = mass / L^2.
    pub densities: Vec<f64>,
}

/// Time origins s_m = m * spacing, m < origins. One origin is the plain ensemble covariance
/// between times 0 and t; more origins average over the stationary trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub origins: usize,
    pub spacing: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions { origins: 1, spacing: 1.0 }
    }
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let m = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

struct Replica {
    /// fields[m][k] = X(s_m + t_k)
    fields: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    density: f64,
}

fn run_replica(model: &VelocityModel, sigma: &SigmaObservable, torus: Torus, times: &[f64], opts: &SeriesOptions, seed: u64, r: u64) -> Replica {
    let mut rng = stream(seed, r, 0);
    let config = sample_with(model, &ChemicalPotential([0.0; 3]), torus, &mut rng);
    let density = model.conserved_quantities(&config).0 as f64 / torus.sites() as f64;
    let mut sim = Simulator::new(model, SimState::new(config, seed, r));
    let spec = sigma.spec;
    let mut plan: Vec<(f64, usize, usize)> = Vec::with_capacity(opts.origins * times.len());
    for m in 0..opts.origins {
        for (k, &t) in times.iter().enumerate() {
            plan.push((m as f64 * opts.spacing + t, m, k));
        }
    }
    plan.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut fields = vec![vec![0.0; times.len()]; opts.origins];
    let mut q = vec![vec![0.0; times.len()]; opts.origins];
    // the integrated current is read off the simulator, so advance point by point
    for (t, m, k) in plan {
        sim.evolve(t, &[], |_, _| {});
        fields[m][k] = field_sum(sim.config(), sigma);
        let cur = sim.integrated_current();
        let mut acc = 0.0;
        for j in 0..2 {
            for a in 0..3 {
                acc += spec.theta[j] * spec.r[a] * cur[j][a] as f64;
            }
        }
        q[m][k] = acc;
    }
    Replica { fields, q, density }
}

/// Ensemble estimate of <<sigma, e^{tL} sigma>> on the L x L torus from lambda = 0 starts.
pub fn correlation_series(model: &VelocityModel, spec: &ObservableSpec, side: usize, times: &[f64], replicas: usize, seed: u64) -> Result<CorrelationSeries> {
    correlation_series_with(model, spec, side, times, replicas, seed, &SeriesOptions::default())
}

pub fn correlation_series_with(
    model: &VelocityModel,
    spec: &ObservableSpec,
    side: usize,
    times: &[f64],
    replicas: usize,
    seed: u64,
    opts: &SeriesOptions,
) -> Result<CorrelationSeries> {
    if replicas < 2 {
        return Err(Error::NoVariance(format!("need at least 2 replicas, got {replicas}")));
    }
    if times.first() != Some(&0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("time grid must start at 0 and increase strictly".into()));
    }
    if opts.origins == 0 || !(opts.spacing > 0.0) {
        return Err(Error::Domain("need at least one time origin and a positive spacing".into()));
    }
    let torus = Torus::new(side)?;
    let sigma = sigma_observable(spec, model)?;
    let reps: Vec<Replica> = (0..replicas as u64).into_par_iter().map(|r| run_replica(model, &sigma, torus, times, opts, seed, r)).collect();
    let nt = times.len();
    let m = opts.origins;
    let total = (replicas * m) as f64;
    let means: Vec<f64> = (0..nt).map(|k| reps.iter().flat_map(|r| r.fields.iter().map(move |f| f[k])).sum::<f64>() / total).collect();
    // n/(n-1) makes the centered product mean an unbiased covariance
    let bessel = total / (total - 1.0);
    let products: Vec<Vec<f64>> = reps
        .iter()
        .map(|r| {
            (0..nt)
                .map(|k| bessel * r.fields.iter().map(|f| (f[0] - means[0]) * (f[k] - means[k])).sum::<f64>() / m as f64)
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(nt);
    let mut stderr = Vec::with_capacity(nt);
    for k in 0..nt {
        let (mu, se) = mean_se(products.iter().map(|p| p[k]));
        values.push(mu);
        stderr.push(se);
    }
    let currents = reps.iter().map(|r| (0..nt).map(|k| r.q.iter().map(|q| q[k] - q[0]).sum::<f64>() / m as f64).collect()).collect();
    let currents_sq = reps.iter().map(|r| (0..nt).map(|k| r.q.iter().map(|q| (q[k] - q[0]).powi(2)).sum::<f64>() / m as f64).collect()).collect();
    Ok(CorrelationSeries {
        times: times.to_vec(),
        values,
        stderr,
        replicas,
        spec: *spec,
        side,
        gamma: model.gamma(),
        origins: m,
        origin_spacing: opts.spacing,
        currents,
        currents_sq,
        densities: reps.iter().map(|r| r.density).collect(),
        products,
    })
}

/// <<sigma, sigma>> at lambda = 0, by translation-class enumeration on a 6 x 6 torus
/// (large enough that no translate of the support wraps onto itself).
pub fn static_variance(model: &VelocityModel, spec: &ObservableSpec) -> Result<f64> {
    let sigma = sigma_observable(spec, model)?;
    let geo = Geometry::new(Torus::new(6)?, model.nv());
    let c = sigma_classes(&sigma, model, geo);
    Ok(c.dual_inner_product(&c))
}

/// kappa with chi(0) = kappa * I.
pub fn kappa(model: &VelocityModel) -> Result<f64> {
    let chi = susceptibility(model, &ChemicalPotential([0.0; 3]));
    let k = chi[(0, 0)];
    for a in 0..3 {
        for b in 0..3 {
            let want = if a == b { k } else { 0.0 };
            if (chi[(a, b)] - want).abs() > 1e-12 {
                return Err(Error::Unsupported(format!("susceptibility at lambda = 0 is not a multiple of the identity: {chi}")));
            }
        }
    }
    Ok(k)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiffusivityCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// gamma |theta|^2 |r|^2
    pub constant: f64,
    pub kappa: f64,
    #[serde(skip)]
    pub per_replica: Vec<Vec<f64>>,
}

impl DiffusivityCurve {
    /// D(t_{k+1}) - D(t_k) >= -nsigma * stderr(difference) for consecutive grid points in [lo, hi].
    pub fn is_nondecreasing(&self, lo: f64, hi: f64, nsigma: f64) -> bool {
        let idx: Vec<usize> = (0..self.times.len()).filter(|&k| self.times[k] >= lo && self.times[k] <= hi).collect();
        idx.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            if self.per_replica.is_empty() {
                return self.values[b] >= self.values[a];
            }
            let (m, se) = mean_se(self.per_replica.iter().map(|r| r[b] - r[a]));
            m >= -nsigma * se
        })
    }
}

/// (1/(t kappa)) int_0^t ds int_0^s C, trapezoidal in both integrals.
fn double_integral(times: &[f64], c: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for k in 1..n {
        let dt = times[k] - times[k - 1];
        g[k] = g[k - 1] + 0.5 * dt * (c[k] + c[k - 1]);
        h[k] = h[k - 1] + 0.5 * dt * (g[k] + g[k - 1]);
    }
    h
}

fn curve_from(times: &[f64], c: &[f64], constant: f64, kappa: f64) -> Vec<f64> {
    let h = double_integral(times, c);
    times.iter().zip(&h).map(|(&t, &hk)| if t > 0.0 { constant + hk / (t * kappa) } else { constant }).collect()
}

pub fn diffusivity_curve(series: &CorrelationSeries, model: &VelocityModel) -> Result<DiffusivityCurve> {
    let kappa = kappa(model)?;
    let constant = model.gamma() * series.spec.theta_norm2() * series.spec.r_norm2();
    let per_replica: Vec<Vec<f64>> = series.products.iter().map(|p| curve_from(&series.times, p, constant, kappa)).collect();
    let values = curve_from(&series.times, &series.values, constant, kappa);
    let stderr = (0..series.times.len())
        .map(|k| if per_replica.len() >= 2 { mean_se(per_replica.iter().map(|r| r[k])).1 } else { 0.0 })
        .collect();
    Ok(DiffusivityCurve { times: series.times.clone(), values, stderr, constant, kappa, per_replica })
}

/// V_{theta,r} = |sum_{a,j} r_a theta_j grad pi_{a,j}|^2 at the lambda = 0 state.
pub fn ballistic_term(model: &VelocityModel, spec: &ObservableSpec) -> Result<f64> {
    let state = mean_state(model, &ChemicalPotential([0.0; 3]));
    let g = flux_gradient(model, &state)?;
    let mut v = 0.0;
    for b in 0..3 {
        let mut s = 0.0;
        for a in 0..3 {
            for j in 0..2 {
                s += spec.r[a] * spec.theta[j] * g[a][j][b];
            }
        }
        v += s * s;
    }
    Ok(v)
}

/// Displacement form: D(t) = (Var Q(t) / L^2 - t^2 V) / (2 t kappa), Q the integrated current.
pub fn displacement_diffusivity(series: &CorrelationSeries, model: &VelocityModel) -> Result<DiffusivityCurve> {
    let kappa = kappa(model)?;
    let v = ballistic_term(model, &series.spec)?;
    let l2 = (series.side * series.side) as f64;
    let nt = series.times.len();
    let total = (series.replicas * series.origins) as f64;
    let mut values = vec![f64::NAN; nt];
    let mut stderr = vec![0.0; nt];
    for k in 1..nt {
        let t = series.times[k];
        let (m1, _) = mean_se(series.currents.iter().map(|q| q[k]));
        let (m2, se2) = mean_se(series.currents_sq.iter().map(|q| q[k]));
        let var = (m2 - m1 * m1) * total / (total - 1.0);
        values[k] = (var / l2 - t * t * v) / (2.0 * t * kappa);
        stderr[k] = se2 / l2 / (2.0 * t * kappa);
    }
    let constant = model.gamma() * series.spec.theta_norm2() * series.spec.r_norm2();
    Ok(DiffusivityCurve { times: series.times.clone(), values, stderr, constant, kappa, per_replica: Vec::new() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub lambda: f64,
    pub value: f64,
    pub stderr: f64,
    /// Contribution of the a/t tail beyond the last time.
    pub tail: f64,
    pub tail_uncontrolled: bool,
    pub tail_model: String,
}

/// int_a^b e^{-lambda t} (linear interpolant of c) dt, exactly.
fn segment(lambda: f64, a: f64, b: f64, ca: f64, cb: f64) -> f64 {
    let h = b - a;
    let x = lambda * h;
    let ea = (-lambda * a).exp();
    if x < 1e-6 {
        // series in x
        let i0 = h * (1.0 - x / 2.0 + x * x / 6.0);
        let i1 = h * (0.5 - x / 3.0 + x * x / 8.0);
        return ea * (ca * i0 + (cb - ca) * i1);
    }
    let em = (-x).exp_m1();
    // int_0^h e^{-lambda s} ds and int_0^h (s/h) e^{-lambda s} ds
    let i0 = -em / lambda;
    let i1 = (-em - x * (-x).exp()) / (lambda * x);
    ea * (ca * i0 + (cb - ca) * i1)
}

fn laplace_of(times: &[f64], c: &[f64], lambda: f64) -> (f64, f64) {
    let mut s = 0.0;
    for k in 1..times.len() {
        s += segment(lambda, times[k - 1], times[k], c[k - 1], c[k]);
    }
    let t_max = *times.last().unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for (&t, &ck) in times.iter().zip(c) {
        if t >= t_max / 10.0 && t > 0.0 {
            num += ck / t;
            den += 1.0 / (t * t);
        }
    }
    let a = if den > 0.0 { num / den } else { 0.0 };
    let tail = a * e1(lambda * t_max);
    (s + tail, tail)
}

/// int_0^inf e^{-lambda t} C(t) dt with an a/t tail beyond the last time.
pub fn laplace_estimate(series: &CorrelationSeries, lambda: f64) -> Result<LaplaceEstimate> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let (value, tail) = laplace_of(&series.times, &series.values, lambda);
    let stderr = if series.products.len() >= 2 {
        mean_se(series.products.iter().map(|p| laplace_of(&series.times, p, lambda).0)).1
    } else {
        0.0
    };
    let t_max = *series.times.last().unwrap();
    Ok(LaplaceEstimate {
        lambda,
        value,
        stderr,
        tail,
        tail_uncontrolled: lambda * t_max < 5.0,
        tail_model: "heuristic a/t tail fitted on [T/10, T]".into(),
    })
}

/// Builds a series from a known correlation function (no replicas), for deterministic tests.
pub fn series_from_values(times: Vec<f64>, values: Vec<f64>, spec: ObservableSpec, gamma: f64) -> CorrelationSeries {
    let n = times.len();
    CorrelationSeries {
        times,
        values,
        stderr: vec![f64::MIN_POSITIVE; n],
        replicas: 1,
        spec,
        side: 0,
        gamma,
        origins: 1,
        origin_spacing: 1.0,
        products: Vec::new(),
        currents: Vec::new(),
        currents_sq: Vec::new(),
        densities: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_exact_for_linear() {
        // int_0^2 e^{-t/2} (1 + t) dt
        let v = segment(0.5, 0.0, 2.0, 1.0, 3.0);
        let exact = 2.0 * (1.0 - (-1.0f64).exp()) + (4.0 - 8.0 * (-1.0f64).exp());
        assert!((v - exact).abs() < 1e-13, "{v} {exact}");
    }

    #[test]
    fn static_variance_reference() {
        let axes = VelocityModel::preset(crate::Preset::Axes, 1.0).unwrap();
        assert!((static_variance(&axes, &ObservableSpec::default()).unwrap() - 0.125).abs() < 1e-14);
    }

    #[test]
    fn times_are_geometric() {
        let t = geometric_times(100.0);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[1], 1.0 / 16.0);
        assert_eq!(*t.last().unwrap(), 100.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }
}
