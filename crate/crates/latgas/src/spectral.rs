//! Momentum-space integrals: dispersion, the degree-2 symbol, the degree-3 lower
//! bound and the dispersion exponent iteration.

use crate::dual::collision::CollisionSpectrum;
use crate::equilibrium::{sigma_observable, ObservableSpec};
use crate::error::{Error, Result};
use crate::model::VelocityModel;
use crate::quad::{adaptive, composite};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};

/// W(p) = sum_k (1 - cos p_k).
pub fn dispersion(p: [f64; 2]) -> f64 {
    (1.0 - p[0].cos()) + (1.0 - p[1].cos())
}

/// Periodic trapezoidal grid over [-pi, pi)^2.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumGrid {
    pub n: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl MomentumGrid {
    pub fn periodic(n: usize) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::Domain(format!("momentum grid size must be even and positive, got {n}")));
        }
        let h = 2.0 * PI / n as f64;
        let mut points = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                points.push([-PI + h * i as f64, -PI + h * j as f64]);
            }
        }
        Ok(MomentumGrid { n, weights: vec![h * h; n * n], points })
    }

    /// The dual momenta 2 pi k / L of an L x L torus.
    pub fn torus(side: usize) -> Result<Self> {
        Self::periodic(side)
    }
}

/// Diagonal of sigma-hat(p) over velocities: sum_j c_j(v) 2 cos p_j.
pub fn sigma_fourier(spec: &ObservableSpec, model: &VelocityModel, p: [f64; 2]) -> Result<Vec<f64>> {
    let s = sigma_observable(spec, model)?;
    Ok(sigma_fourier_from_coef(&s.coef, p))
}

fn sigma_fourier_from_coef(coef: &[Vec<f64>; 2], p: [f64; 2]) -> Vec<f64> {
    let nv = coef[0].len();
    (0..nv).map(|v| coef[0][v] * 2.0 * p[0].cos() + coef[1][v] * 2.0 * p[1].cos()).collect()
}

/// sigma-hat in the eigenbasis of the pair operator: S_ab = sum_v O_va O_vb s_v.
fn rotate(o: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    let nv = s.len();
    DMatrix::from_fn(nv, nv, |a, b| (0..nv).map(|v| o[(v, a)] * o[(v, b)] * s[v]).sum())
}

/// Norm of the kernel-projected sigma-hat(0); positive exactly when the spec is nondegenerate.
pub fn projected_sigma_norm(spec: &ObservableSpec, model: &VelocityModel) -> Result<f64> {
    let cs = CollisionSpectrum::from_model(model);
    let s = sigma_fourier(spec, model, [0.0, 0.0])?;
    let rot = rotate(&cs.diagonalizer, &s);
    let ker: Vec<usize> = (0..s.len()).filter(|&k| cs.eigenvalues[k].abs() <= 1e-10).collect();
    let mut t = 0.0;
    for &a in &ker {
        for &b in &ker {
            t += rot[(a, b)] * rot[(a, b)];
        }
    }
    Ok(t.sqrt())
}

/// Normalization of the pair inner product: 1/(2! 4^2), against (2 pi)^2 of momentum volume.
const PAIR_NORM: f64 = 1.0 / 32.0;

/// Lower-bound constant c(spec) = |pi-bar sigma-hat(0)|^2 / (32 (2 pi)^2).
pub fn c_spec(spec: &ObservableSpec, model: &VelocityModel) -> Result<f64> {
    let n = projected_sigma_norm(spec, model)?;
    Ok(PAIR_NORM * n * n / (4.0 * PI * PI))
}

/// sum_p w_p <sigma-hat, [(lambda + 4 gamma W) - Q2]^{-1} sigma-hat> / (32 (2 pi)^2).
pub fn degree2_resolvent_fourier(model: &VelocityModel, spec: &ObservableSpec, lambda: f64, grid: &MomentumGrid) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let s = sigma_observable(spec, model)?;
    let cs = CollisionSpectrum::from_model(model);
    let g4 = 4.0 * model.gamma();
    let nv = model.nv();
    let terms: Vec<f64> = grid
        .points
        .par_iter()
        .zip(&grid.weights)
        .map(|(&p, &w)| {
            let sh = sigma_fourier_from_coef(&s.coef, p);
            let rot = rotate(&cs.diagonalizer, &sh);
            let d = lambda + g4 * dispersion(p);
            let mut t = 0.0;
            for a in 0..nv {
                for b in 0..nv {
                    let den = d - cs.eigenvalues[a] - cs.eigenvalues[b];
                    t += rot[(a, b)] * rot[(a, b)] / den;
                }
            }
            w * t
        })
        .collect();
    Ok(PAIR_NORM * terms.iter().sum::<f64>() / (4.0 * PI * PI))
}

/// Smallest eigenvalue of (lambda + 4 gamma W(p)) - Q2 over the grid.
pub fn symbol_min_eigenvalue(model: &VelocityModel, lambda: f64, grid: &MomentumGrid) -> f64 {
    let cs = CollisionSpectrum::from_model(model);
    let qmax = cs.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    grid.points.iter().map(|&p| lambda + 4.0 * model.gamma() * dispersion(p) - 2.0 * qmax).fold(f64::INFINITY, f64::min)
}

const INNER_R: f64 = 0.1;

/// Outer region: square [-eps, eps]^2 minus the disc of radius r0, exact W, by octant symmetry.
fn outer_square(f: &(impl Fn(f64) -> f64 + Sync), r0: f64, eps: f64) -> f64 {
    let phis = 24;
    let per = |phi: f64| {
        let rmax = eps / phi.cos();
        if rmax <= r0 {
            return 0.0;
        }
        composite(&|r: f64| r * f(dispersion([r * phi.cos(), r * phi.sin()])), r0, rmax, 24)
    };
    8.0 * composite(&per, 0.0, FRAC_PI_4, phis)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundValue {
    pub lambda: f64,
    /// c(spec) times the radial-path integral.
    pub value: f64,
    pub integral: f64,
    /// Full 2D integral with exact W (only for lambda >= 1e-4).
    pub planar: Option<f64>,
}

/// int_{[-eps,eps]^2} dp / (lambda + 2W + C1 W |log(lambda + W)|), via the disc substitution.
fn bound_integral_radial(lambda: f64, c1: f64, eps: f64) -> f64 {
    let r0 = INNER_R.min(eps);
    let w0 = 0.5 * r0 * r0;
    let ll = lambda.ln();
    // t = log(lambda + w), s = t - log(lambda)
    let smax = (w0 / lambda).ln_1p();
    let g = |s: f64| {
        let t = ll + s;
        let a = -(-s).exp_m1();
        1.0 / ((-s).exp() + (2.0 + c1 * t.abs()) * a)
    };
    let mut inner = 0.0;
    // resolve the transition near s ~ 1 and the slow decay separately
    let cut = smax.min(8.0);
    inner += adaptive(&g, 0.0, cut, 1e-12);
    if smax > cut {
        inner += adaptive(&g, cut, smax, 1e-12);
    }
    let f = |w: f64| 1.0 / (lambda + 2.0 * w + c1 * w * (lambda + w).ln().abs());
    2.0 * PI * inner + outer_square(&f, r0, eps)
}

fn bound_integral_planar(lambda: f64, c1: f64, eps: f64) -> f64 {
    let f = |w: f64| 1.0 / (lambda + 2.0 * w + c1 * w * (lambda + w).ln().abs());
    let rmin = 1e-4 * lambda.sqrt();
    let per = |phi: f64| {
        let lr = (eps / phi.cos()).ln();
        composite(&|u: f64| {
            let r = u.exp();
            r * r * f(dispersion([r * phi.cos(), r * phi.sin()]))
        }, rmin.ln(), lr, 64)
    };
    8.0 * composite(&per, 0.0, FRAC_PI_4, 24) + PI * rmin * rmin / lambda
}

pub fn degree3_lower_bound(model: &VelocityModel, spec: &ObservableSpec, lambda: f64, c1: f64, eps: f64) -> Result<BoundValue> {
    check_lambda(lambda)?;
    if !(c1 >= 0.0 && c1.is_finite()) {
        return Err(Error::Domain(format!("C1 must be nonnegative, got {c1}")));
    }
    if !(eps > 0.0 && eps <= PI) {
        return Err(Error::Domain(format!("epsilon must lie in (0, pi], got {eps}")));
    }
    let c = c_spec(spec, model)?;
    let integral = bound_integral_radial(lambda, c1, eps);
    let planar = if lambda >= 1e-4 {
        let p = bound_integral_planar(lambda, c1, eps);
        let rel = (p - integral).abs() / p;
        if rel > 0.05 {
            return Err(Error::Accuracy(format!("radial and planar quadratures differ by {:.3}% at lambda = {lambda:e}", 100.0 * rel)));
        }
        Some(c * p)
    } else {
        None
    };
    Ok(BoundValue { lambda, value: c * integral, integral, planar })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Law {
    /// a + b log log(1/lambda)
    LogLog,
    /// a + b log(1/lambda)
    Log,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LawFit {
    pub law: Law,
    pub a: f64,
    pub b: f64,
    /// rms(residual) / rms(B - mean B).
    pub residual: f64,
}

pub fn fit_law(lambdas: &[f64], values: &[f64], law: Law) -> Result<LawFit> {
    if lambdas.len() < 3 || lambdas.len() != values.len() {
        return Err(Error::Domain("law fit needs at least three matched points".into()));
    }
    let xs: Vec<f64> = lambdas
        .iter()
        .map(|&l| match law {
            Law::LogLog => (-l.ln()).ln(),
            Law::Log => -l.ln(),
        })
        .collect();
    let (a, b) = linear_fit(&xs, values);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let res: f64 = xs.iter().zip(values).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let var: f64 = values.iter().map(|y| (y - mean).powi(2)).sum();
    let residual = if var > 0.0 { (res / var).sqrt() } else { 0.0 };
    Ok(LawFit { law, a, b, residual })
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundProfile {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub planar: Vec<Option<f64>>,
    pub c1: f64,
    pub epsilon: f64,
    pub c_spec: f64,
    pub fit: LawFit,
}

/// Geometric grid from `hi` down to `lo` with `per_decade` points per decade.
pub fn geometric_lambdas(hi: f64, lo: f64, per_decade: usize) -> Vec<f64> {
    let (lh, ll) = (hi.log10(), lo.log10());
    let n = ((lh - ll) * per_decade as f64).round() as usize;
    (0..=n).map(|i| 10f64.powf(lh - (lh - ll) * i as f64 / n.max(1) as f64)).collect()
}

pub fn bound_profile(model: &VelocityModel, spec: &ObservableSpec, lambdas: &[f64], c1: f64, eps: f64, law: Law) -> Result<BoundProfile> {
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("lambda grid must be strictly decreasing".into()));
    }
    let vals: Vec<BoundValue> = lambdas.par_iter().map(|&l| degree3_lower_bound(model, spec, l, c1, eps)).collect::<Result<_>>()?;
    let values: Vec<f64> = vals.iter().map(|v| v.value).collect();
    let fit = fit_law(lambdas, &values, law)?;
    Ok(BoundProfile {
        lambdas: lambdas.to_vec(),
        planar: vals.iter().map(|v| v.planar).collect(),
        values,
        c1,
        epsilon: eps,
        c_spec: c_spec(spec, model)?,
        fit,
    })
}

/// I(u) = int_{[-eps,eps]^2} dp / ((u + W)(1 + |log(u + W)|^kappa)).
pub fn dispersion_integral(u: f64, kappa: f64, eps: f64) -> f64 {
    let r0 = INNER_R.min(eps);
    let w0 = 0.5 * r0 * r0;
    let (t0, t1) = (u.ln(), (u + w0).ln());
    let g = |t: f64| 1.0 / (1.0 + t.abs().powf(kappa));
    let mut inner = 0.0;
    // geometric panels in |t| keep the cost flat in log u
    let mut hi = t1;
    while hi > t0 {
        let lo = (hi - (hi.abs().max(1.0))).max(t0);
        inner += adaptive(&g, lo, hi, 1e-13);
        hi = lo;
    }
    let f = |w: f64| {
        let x = u + w;
        1.0 / (x * (1.0 + x.ln().abs().powf(kappa)))
    };
    2.0 * PI * inner + outer_square(&f, r0, eps)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentFit {
    /// I(u) ~ A |log u|^s + B
    pub s: f64,
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

/// Least squares in (A, B) for fixed s, golden section in s over [-0.5, 1.5].
pub fn fit_exponent(us: &[f64], values: &[f64]) -> ExponentFit {
    let lu: Vec<f64> = us.iter().map(|u| u.ln().abs()).collect();
    let eval = |s: f64| {
        let xs: Vec<f64> = lu.iter().map(|l| l.powf(s)).collect();
        let (b, a) = linear_fit(&xs, values);
        let sse: f64 = xs.iter().zip(values).map(|(x, y)| (y - b - a * x).powi(2)).sum();
        (sse, a, b)
    };
    let (mut lo, mut hi) = (-0.5f64, 1.5f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (eval(x1).0, eval(x2).0);
    for _ in 0..100 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = eval(x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = eval(x2).0;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let (sse, a, b) = eval(s);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var: f64 = values.iter().map(|y| (y - mean).powi(2)).sum();
    ExponentFit { s, a, b, residual: if var > 0.0 { (sse / var).sqrt() } else { 0.0 } }
}

/// Fitted exponent map kappa -> s(kappa) on a u-grid.
pub fn exponent_map(kappa: f64, us: &[f64], eps: f64) -> ExponentFit {
    let vals: Vec<f64> = us.par_iter().map(|&u| dispersion_integral(u, kappa, eps)).collect();
    fit_exponent(us, &vals)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DispersionResult {
    /// Mean of the last two iterates.
    pub kappa: f64,
    /// Mean of all iterates after the starting value.
    pub cesaro_mean: f64,
    pub trace: Vec<f64>,
    pub residuals: Vec<f64>,
    pub u_min: f64,
    pub u_max: f64,
}

fn check_grid(us: &[f64]) -> Result<(f64, f64)> {
    if us.len() < 4 {
        return Err(Error::Domain("u-grid needs at least four points".into()));
    }
    let lo = us.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = us.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) || hi > 1e-2 {
        return Err(Error::Domain(format!("u-grid must lie in (0, 1e-2], got [{lo:e}, {hi:e}]")));
    }
    if (hi / lo).log10() < 8.0 - 1e-9 {
        return Err(Error::Domain(format!("u-grid spans only {:.2} decades (need 8)", (hi / lo).log10())));
    }
    Ok((lo, hi))
}

/// Iterates kappa_{n+1} = s(kappa_n) from kappa0 and averages the iterates.
pub fn dispersion_fixed_point(max_iter: usize, us: &[f64], kappa0: f64, eps: f64) -> Result<DispersionResult> {
    let (u_min, u_max) = check_grid(us)?;
    if max_iter < 2 {
        return Err(Error::Domain("need at least two iterations".into()));
    }
    let mut trace = vec![kappa0];
    let mut residuals = Vec::new();
    let mut k = kappa0;
    for _ in 0..max_iter {
        let fit = exponent_map(k, us, eps);
        residuals.push(fit.residual);
        trace.push(fit.s);
        if fit.residual > 0.1 {
            return Err(Error::UnreliableExponent { msg: format!("fit residual {:.3} at kappa = {k}", fit.residual), trace });
        }
        k = fit.s;
    }
    let m = trace.len();
    let kappa = 0.5 * (trace[m - 1] + trace[m - 2]);
    let cesaro_mean = trace[1..].iter().sum::<f64>() / (m - 1) as f64;
    Ok(DispersionResult { kappa, cesaro_mean, trace, residuals, u_min, u_max })
}
