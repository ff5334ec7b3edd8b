//! Product measures, susceptibility, flux expectations and microscopic currents.

use crate::error::{Error, Result};
use crate::local::{slot, LocalFunction};
use crate::model::{dot, Configuration, Torus, VelocityModel, DIRS};
use crate::scalar::Scalar;
use nalgebra::{Matrix3, Matrix3x2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChemicalPotential(pub [f64; 3]);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydroState {
    pub rho: f64,
    pub u: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub theta: [f64; 2],
    pub r: [f64; 3],
}

impl ObservableSpec {
    pub fn new(theta: [f64; 2], r: [f64; 3]) -> Result<Self> {
        let s = ObservableSpec { theta, r };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.iter().chain(self.r.iter()).any(|x| !x.is_finite()) {
            return Err(Error::DegenerateSpec("non-finite entries".into()));
        }
        if self.theta.iter().all(|&x| x == 0.0) {
            return Err(Error::DegenerateSpec("theta = 0".into()));
        }
        if self.r.iter().all(|&x| x == 0.0) {
            return Err(Error::DegenerateSpec("r = 0".into()));
        }
        Ok(())
    }

    pub fn theta_norm2(&self) -> f64 {
        self.theta.iter().map(|x| x * x).sum()
    }
    pub fn r_norm2(&self) -> f64 {
        self.r.iter().map(|x| x * x).sum()
    }
}

impl Default for ObservableSpec {
    fn default() -> Self {
        ObservableSpec { theta: [1.0, 0.0], r: [1.0, 0.0, 0.0] }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn exponent(lambda: &ChemicalPotential, v: [i32; 2]) -> f64 {
    lambda.0[0] + lambda.0[1] * v[0] as f64 + lambda.0[2] * v[1] as f64
}

pub fn theta_v(lambda: &ChemicalPotential, v: [i32; 2]) -> f64 {
    logistic(exponent(lambda, v))
}

pub fn sample_configuration(model: &VelocityModel, lambda: &ChemicalPotential, torus: Torus, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(model, lambda, torus, &mut rng)
}

pub fn sample_with(model: &VelocityModel, lambda: &ChemicalPotential, torus: Torus, rng: &mut impl Rng) -> Configuration {
    let th: Vec<f64> = model.velocities().iter().map(|&v| theta_v(lambda, v)).collect();
    let mut c = Configuration::empty(torus, model.nv());
    for site in 0..torus.sites() {
        for (vel, &p) in th.iter().enumerate() {
            if rng.gen::<f64>() < p {
                c.set(site, vel, true);
            }
        }
    }
    c
}

fn field(model: &VelocityModel, a: usize, vel: usize) -> f64 {
    model.conserved_field(a, vel) as f64
}

/// (rho, u) as a function of lambda.
pub fn mean_state(model: &VelocityModel, lambda: &ChemicalPotential) -> HydroState {
    let mut m = [0.0; 3];
    for (k, &v) in model.velocities().iter().enumerate() {
        let t = theta_v(lambda, v);
        for (a, ma) in m.iter_mut().enumerate() {
            *ma += field(model, a, k) * t;
        }
    }
    HydroState { rho: m[0], u: [m[1], m[2]] }
}

pub fn susceptibility(model: &VelocityModel, lambda: &ChemicalPotential) -> Matrix3<f64> {
    let mut chi = Matrix3::zeros();
    for (k, &v) in model.velocities().iter().enumerate() {
        let t = theta_v(lambda, v);
        let w = t * (1.0 - t);
        for a in 0..3 {
            for b in 0..3 {
                chi[(a, b)] += field(model, a, k) * field(model, b, k) * w;
            }
        }
    }
    chi
}

pub fn chemical_potential_from_state(model: &VelocityModel, state: &HydroState) -> Result<ChemicalPotential> {
    let nv = model.nv() as f64;
    let target = Vector3::new(state.rho, state.u[0], state.u[1]);
    if !target.iter().all(|x| x.is_finite()) || !(state.rho > 0.0 && state.rho < nv) {
        return Err(Error::Domain(format!("state {state:?} outside the admissible set (need 0 < rho < {nv})")));
    }
    let resid = |l: &Vector3<f64>| {
        let s = mean_state(model, &ChemicalPotential([l[0], l[1], l[2]]));
        Vector3::new(s.rho, s.u[0], s.u[1]) - target
    };
    let mut lam = Vector3::zeros();
    let mut r = resid(&lam);
    for _ in 0..100 {
        if r.norm() < 1e-10 {
            return Ok(ChemicalPotential([lam[0], lam[1], lam[2]]));
        }
        let chi = susceptibility(model, &ChemicalPotential([lam[0], lam[1], lam[2]]));
        let step = chi
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::Domain("singular susceptibility during Newton inversion".into()))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = lam - step * t;
            let rc = resid(&cand);
            if rc.norm() < r.norm() {
                lam = cand;
                r = rc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if r.norm() < 1e-10 {
        return Ok(ChemicalPotential([lam[0], lam[1], lam[2]]));
    }
    Err(Error::Domain(format!(
        "Newton inversion did not converge for {state:?} (residual {:e}); state likely outside the admissible set",
        r.norm()
    )))
}

/// pi_{a,j} = sum_v I_a(v) (e_j.v) theta_v (theta_v - 1) at a constant profile.
pub fn flux_expectation(model: &VelocityModel, state: &HydroState) -> Result<Matrix3x2<f64>> {
    let lambda = chemical_potential_from_state(model, state)?;
    Ok(flux_at(model, &lambda))
}

pub fn flux_at(model: &VelocityModel, lambda: &ChemicalPotential) -> Matrix3x2<f64> {
    let mut pi = Matrix3x2::zeros();
    for (k, &v) in model.velocities().iter().enumerate() {
        let t = theta_v(lambda, v);
        for a in 0..3 {
            for j in 0..2 {
                pi[(a, j)] += field(model, a, k) * v[j] as f64 * t * (t - 1.0);
            }
        }
    }
    pi
}

/// d pi_{a,j} / d lambda_b.
pub fn flux_lambda_jacobian(model: &VelocityModel, lambda: &ChemicalPotential) -> [[[f64; 3]; 2]; 3] {
    let mut out = [[[0.0; 3]; 2]; 3];
    for (k, &v) in model.velocities().iter().enumerate() {
        let t = theta_v(lambda, v);
        let dt = t * (1.0 - t);
        for a in 0..3 {
            for j in 0..2 {
                for b in 0..3 {
                    out[a][j][b] += field(model, a, k) * v[j] as f64 * (2.0 * t - 1.0) * dt * field(model, b, k);
                }
            }
        }
    }
    out
}

/// d pi_{a,j} / d (rho, u)_b = (d pi / d lambda) chi^{-1}.
pub fn flux_gradient(model: &VelocityModel, state: &HydroState) -> Result<[[[f64; 3]; 2]; 3]> {
    let lambda = chemical_potential_from_state(model, state)?;
    let jl = flux_lambda_jacobian(model, &lambda);
    let chi_inv = susceptibility(model, &lambda)
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular susceptibility".into()))?;
    let mut out = [[[0.0; 3]; 2]; 3];
    for a in 0..3 {
        for j in 0..2 {
            for b in 0..3 {
                out[a][j][b] = (0..3).map(|e| jl[a][j][e] * chi_inv[(e, b)]).sum();
            }
        }
    }
    Ok(out)
}

/// Orthogonalized current together with its decomposition.
#[derive(Clone, Debug)]
pub struct Current<T> {
    pub a: usize,
    pub j: usize,
    /// Instantaneous current omega^a_j as a local function on {0, e_j} x V.
    pub omega: LocalFunction<T>,
    /// c^{a,b}_j.
    pub c: [T; 3],
    /// sigma^a_j = omega - E[omega] - sum_b c_b (I_b(eta_0) - E I_b).
    pub sigma: LocalFunction<T>,
    /// The quadratic closed form gamma{I_a(eta_{e_j}) - I_a(eta_0)} + sum_v (e_a.v)(e_j.v) xi xi.
    pub closed_form: LocalFunction<T>,
}

fn weight_a(model: &VelocityModel, a: usize, j: usize, vel: usize) -> i32 {
    let v = model.velocity(vel);
    let ej = DIRS[2 * j];
    if a == 0 {
        dot(ej, v)
    } else {
        dot(DIRS[2 * (a - 1)], v) * dot(ej, v)
    }
}

/// The conserved field I_b(eta_x) as a local function.
pub fn conserved_local<T: Scalar>(model: &VelocityModel, site: usize, b: usize) -> LocalFunction<T> {
    let nv = model.nv();
    let vars: Vec<u32> = (0..nv).map(|v| slot(site, v, nv)).collect();
    LocalFunction::from_fn(vars, |g| {
        let mut s = 0i64;
        for v in 0..nv {
            if g(slot(site, v, nv)) {
                s += model.conserved_field(b, v) as i64;
            }
        }
        T::from_int(s)
    })
}

/// `j` is 0-based (0 = e1, 1 = e2); `a` in 0..3. Requires the lambda = 0 reference measure.
pub fn orthogonalized_current<T: Scalar>(model: &VelocityModel, torus: &Torus, a: usize, j: usize) -> Current<T> {
    assert!(a < 3 && j < 2);
    let nv = model.nv();
    let o = torus.site(0, 0);
    let e = torus.neighbor(o, 2 * j);
    let mut vars: Vec<u32> = (0..nv).flat_map(|v| [slot(o, v, nv), slot(e, v, nv)]).collect();
    vars.sort_unstable();
    let gamma = T::from_f64(model.gamma());
    let half = T::from_f64(0.5);
    let omega = LocalFunction::from_fn(vars.clone(), |g| {
        let mut grad = 0i64;
        let mut quad = T::zero();
        for v in 0..nv {
            let (n0, n1) = (g(slot(o, v, nv)), g(slot(e, v, nv)));
            grad += model.conserved_field(a, v) as i64 * (n1 as i64 - n0 as i64);
            let b = T::from_int((n1 && n0) as i64) - half.clone() * T::from_int(n1 as i64 + n0 as i64);
            quad = quad + T::from_int(weight_a(model, a, j, v) as i64) * b;
        }
        gamma.clone() * T::from_int(grad) + quad
    });
    // c_b = sum_e <<omega, I_e>> (chi^{-1})_{e,b}; at lambda = 0 chi is diagonal
    let chi = susceptibility(model, &ChemicalPotential([0.0; 3]));
    let mut pair = Vec::new();
    for b in 0..3 {
        let ib = conserved_local::<T>(model, o, b);
        pair.push(ib.torus_pairing(&omega, torus, nv));
    }
    let mut c = [T::zero(), T::zero(), T::zero()];
    for b in 0..3 {
        assert!(
            (0..3).all(|e| e == b || chi[(e, b)] == 0.0),
            "susceptibility at lambda = 0 must be diagonal"
        );
        c[b] = pair[b].clone() / T::from_f64(chi[(b, b)]);
    }
    let mut sigma = omega.sub(&LocalFunction::constant(omega.mean()));
    for (b, cb) in c.iter().enumerate() {
        let ib = conserved_local::<T>(model, o, b);
        let centered = ib.sub(&LocalFunction::constant(ib.mean()));
        sigma = sigma.sub(&centered.scale(cb));
    }
    let closed_form = LocalFunction::from_fn(vars, |g| {
        let mut grad = 0i64;
        let mut quad = T::zero();
        for v in 0..nv {
            let (n0, n1) = (g(slot(o, v, nv)), g(slot(e, v, nv)));
            grad += model.conserved_field(a, v) as i64 * (n1 as i64 - n0 as i64);
            let x0 = T::from_int(n0 as i64) - half.clone();
            let x1 = T::from_int(n1 as i64) - half.clone();
            quad = quad + T::from_int(weight_a(model, a, j, v) as i64) * x1 * x0;
        }
        gamma.clone() * T::from_int(grad) + quad
    });
    Current { a, j, omega, c, sigma: sigma.extend(closed_form.vars()), closed_form }
}

/// sigma_{theta,r} with gradient pieces dropped: sum_j sum_v c_j(v) xi(e_j,v) xi(0,v).
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaObservable {
    pub spec: ObservableSpec,
    /// coef[j][vel] = c_j(v) = theta_j { r_0 (e_j.v) + sum_a r_a (e_a.v)(e_j.v) }.
    pub coef: [Vec<f64>; 2],
}

pub fn sigma_observable(spec: &ObservableSpec, model: &VelocityModel) -> Result<SigmaObservable> {
    spec.validate()?;
    let nv = model.nv();
    let mut coef = [vec![0.0; nv], vec![0.0; nv]];
    for (j, cj) in coef.iter_mut().enumerate() {
        for (vel, c) in cj.iter_mut().enumerate() {
            let mut s = 0.0;
            for a in 0..3 {
                s += spec.r[a] * weight_a(model, a, j, vel) as f64;
            }
            *c = spec.theta[j] * s;
        }
    }
    if coef.iter().flatten().all(|&x| x == 0.0) {
        return Err(Error::DegenerateSpec(format!("sigma vanishes identically for {spec:?}")));
    }
    Ok(SigmaObservable { spec: *spec, coef })
}

impl SigmaObservable {
    /// Terms ((j, vel), coefficient) with nonzero coefficient.
    pub fn terms(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for j in 0..2 {
            for (vel, &c) in self.coef[j].iter().enumerate() {
                if c != 0.0 {
                    out.push((j, vel, c));
                }
            }
        }
        out
    }

    pub fn local<T: Scalar>(&self, model: &VelocityModel, torus: &Torus) -> LocalFunction<T> {
        let nv = model.nv();
        let o = torus.site(0, 0);
        let terms = self.terms();
        let mut vars = Vec::new();
        for &(j, v, _) in &terms {
            vars.push(slot(o, v, nv));
            vars.push(slot(torus.neighbor(o, 2 * j), v, nv));
        }
        let half = T::from_f64(0.5);
        LocalFunction::from_fn(vars, |g| {
            let mut s = T::zero();
            for &(j, v, c) in &terms {
                let x0 = T::from_int(g(slot(o, v, nv)) as i64) - half.clone();
                let x1 = T::from_int(g(slot(torus.neighbor(o, 2 * j), v, nv)) as i64) - half.clone();
                s = s + T::from_f64(c) * x0 * x1;
            }
            s
        })
    }

    /// sigma(tau_x eta) evaluated directly.
    #[inline]
    pub fn eval_at(&self, config: &Configuration, site: usize) -> f64 {
        let t = config.torus();
        let mut s = 0.0;
        for j in 0..2 {
            let n = t.neighbor(site, 2 * j);
            for (vel, &c) in self.coef[j].iter().enumerate() {
                if c != 0.0 {
                    let x0 = if config.get(site, vel) { 0.5 } else { -0.5 };
                    let x1 = if config.get(n, vel) { 0.5 } else { -0.5 };
                    s += c * x0 * x1;
                }
            }
        }
        s
    }
}
