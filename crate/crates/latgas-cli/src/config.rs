use crate::HarnessError;
use latgas::dual::{Collision, Strategy};
use latgas::equilibrium::ObservableSpec;
use latgas::spectral::Law;
use latgas::{Preset, Torus, VelocityModel};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Simulate,
    Greenkubo,
    DualCheck,
    Resolvent,
    Bound,
    DispersionKappa,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Simulate => "simulate",
            Pipeline::Greenkubo => "greenkubo",
            Pipeline::DualCheck => "dual-check",
            Pipeline::Resolvent => "resolvent",
            Pipeline::Bound => "bound",
            Pipeline::DispersionKappa => "dispersion-kappa",
        }
    }
}

/// Every knob of a run. Missing keys take the defaults below, and the full
/// resolved table is echoed into the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipelines: Vec<Pipeline>,
    pub preset: Preset,
    pub gamma: f64,
    pub theta: [f64; 2],
    pub r: [f64; 3],
    pub seed: u64,

    /// Torus side for simulate and greenkubo.
    pub side: usize,
    pub replicas: usize,
    pub horizon: f64,
    pub origins: usize,
    pub origin_spacing: f64,
    pub laplace_lambdas: Vec<f64>,
    /// Monotonicity of D is checked on [diffusivity_from, horizon].
    pub diffusivity_from: f64,
    pub nsigma: f64,

    pub check_side: usize,
    pub check_cases: usize,

    pub resolvent_side: usize,
    pub resolvent_lambdas: Vec<f64>,
    pub n_max: usize,
    pub hardcore: bool,
    pub collision: Collision,
    pub strategy: Strategy,
    pub solver_tol: f64,
    pub solver_max_iter: usize,

    pub bound_lambda_hi: f64,
    pub bound_lambda_lo: f64,
    pub bound_per_decade: usize,
    pub c1: f64,
    pub epsilon: f64,
    pub law: Law,

    pub kappa_umin: f64,
    pub kappa_umax: f64,
    pub kappa_points: usize,
    pub kappa_iterations: usize,
    pub kappa0: f64,

    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pipelines: Vec::new(),
            preset: Preset::Axes,
            gamma: 1.0,
            theta: [1.0, 0.0],
            r: [1.0, 0.0, 0.0],
            seed: 1,
            side: 32,
            replicas: 256,
            horizon: 100.0,
            origins: 1,
            origin_spacing: 1.0,
            laplace_lambdas: vec![0.05, 0.1, 0.2, 0.5],
            diffusivity_from: 1.0,
            nsigma: 4.0,
            check_side: 4,
            check_cases: 20,
            resolvent_side: 6,
            resolvent_lambdas: vec![1.0, 0.1],
            n_max: 4,
            hardcore: true,
            collision: Collision::Lc1,
            strategy: Strategy::Monolithic,
            solver_tol: 1e-11,
            solver_max_iter: 10_000,
            bound_lambda_hi: 1e-6,
            bound_lambda_lo: 1e-30,
            bound_per_decade: 2,
            c1: 1.0,
            epsilon: 1.0,
            law: Law::LogLog,
            kappa_umin: 1e-12,
            kappa_umax: 1e-4,
            kappa_points: 25,
            kappa_iterations: 30,
            kappa0: 0.0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn positive(name: &str, xs: &[f64]) -> Result<(), HarnessError> {
    match xs.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        Some(x) => Err(invalid(format!("{name}: every entry must be positive and finite, got {x}"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| invalid(format!("config parse: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn spec(&self) -> Result<ObservableSpec, HarnessError> {
        ObservableSpec::new(self.theta, self.r).map_err(|e| invalid(format!("theta/r: {e}")))
    }

    pub fn model(&self) -> Result<VelocityModel, HarnessError> {
        VelocityModel::preset(self.preset, self.gamma).map_err(|e| invalid(format!("gamma: {e}")))
    }

    /// Checks the preconditions of every requested pipeline before anything runs.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.model()?;
        self.spec()?;
        let has = |p: Pipeline| self.pipelines.contains(&p);
        if has(Pipeline::Simulate) || has(Pipeline::Greenkubo) {
            Torus::new(self.side).map_err(|e| invalid(format!("side: {e}")))?;
            positive("horizon", &[self.horizon])?;
        }
        if has(Pipeline::Greenkubo) {
            if self.replicas < 2 {
                return Err(invalid(format!("replicas: need at least 2 for an error bar, got {}", self.replicas)));
            }
            if self.origins == 0 {
                return Err(invalid("origins: need at least one time origin"));
            }
            positive("origin_spacing", &[self.origin_spacing])?;
            positive("laplace_lambdas", &self.laplace_lambdas)?;
            positive("nsigma", &[self.nsigma])?;
        }
        if has(Pipeline::DualCheck) {
            Torus::new(self.check_side).map_err(|e| invalid(format!("check_side: {e}")))?;
            if self.check_cases == 0 {
                return Err(invalid("check_cases: need at least one random case"));
            }
        }
        if has(Pipeline::Resolvent) {
            Torus::new(self.resolvent_side).map_err(|e| invalid(format!("resolvent_side: {e}")))?;
            positive("resolvent_lambdas", &self.resolvent_lambdas)?;
            if !(2..=4).contains(&self.n_max) {
                return Err(invalid(format!("n_max: must lie in 2..=4, got {}", self.n_max)));
            }
            if self.hardcore && self.collision == Collision::Qn {
                return Err(invalid("collision: Qn is only defined with hardcore = false"));
            }
            positive("solver_tol", &[self.solver_tol])?;
        }
        if has(Pipeline::Bound) {
            if !(self.bound_lambda_hi < 1.0 && self.bound_lambda_lo > 0.0 && self.bound_lambda_lo < self.bound_lambda_hi) {
                return Err(invalid(format!("bound lambdas: need 0 < lo < hi < 1, got [{:e}, {:e}]", self.bound_lambda_lo, self.bound_lambda_hi)));
            }
            if self.bound_per_decade == 0 {
                return Err(invalid("bound_per_decade: must be positive"));
            }
            if !(self.c1 >= 0.0) {
                return Err(invalid(format!("c1: must be nonnegative, got {}", self.c1)));
            }
        }
        if has(Pipeline::Bound) || has(Pipeline::DispersionKappa) {
            if !(self.epsilon > 0.0 && self.epsilon <= std::f64::consts::PI) {
                return Err(invalid(format!("epsilon: must lie in (0, pi], got {}", self.epsilon)));
            }
        }
        if has(Pipeline::DispersionKappa) {
            if !(self.kappa_umin > 0.0 && self.kappa_umax <= 1e-2 && self.kappa_umin < self.kappa_umax) {
                return Err(invalid(format!("kappa u-grid: need 0 < umin < umax <= 1e-2, got [{:e}, {:e}]", self.kappa_umin, self.kappa_umax)));
            }
            if (self.kappa_umax / self.kappa_umin).log10() < 8.0 - 1e-9 {
                return Err(invalid("kappa u-grid: must span at least 8 decades"));
            }
            if self.kappa_points < 4 || self.kappa_iterations < 2 {
                return Err(invalid("kappa: need at least 4 grid points and 2 iterations"));
            }
        }
        Ok(())
    }

    /// Log-uniform grid from umin to umax.
    pub fn kappa_grid(&self) -> Vec<f64> {
        let (a, b) = (self.kappa_umin.ln(), self.kappa_umax.ln());
        let n = self.kappa_points;
        (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
    }
}
