use clap::{Args, Parser, Subcommand};
use latgas_cli::{emit_report, run_experiment, write_atomic, ExperimentConfig, Format, HarnessError, Pipeline, RunReport};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "latgas", version, about = "Velocity lattice gas experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat TOML config; missing keys take their defaults.
    #[arg(long, alias = "spec")]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set replicas=64 (value parsed as TOML).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Report format on stdout.
    #[arg(long, default_value = "text")]
    format: Format,
    /// Copy the pipeline's main artifact to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Single trajectory from the lambda = 0 product measure.
    Simulate(Common),
    /// Current autocorrelation, diffusivity and Laplace estimates over replicas.
    Greenkubo(Common),
    /// Exact identities of the dual representation and the collision spectrum.
    DualCheck(Common),
    /// Truncated hierarchy values for n = 2..n_max.
    Resolvent(Common),
    /// Momentum-space lower bound and its scaling fit.
    Bound {
        #[command(flatten)]
        common: Common,
        /// hi:lo:geometric[:points_per_decade]
        #[arg(long)]
        lambdas: Option<String>,
        #[arg(long = "C1")]
        c1: Option<f64>,
    },
    /// Fixed point of the fitted dispersion exponent map.
    DispersionKappa {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        umin: Option<f64>,
        #[arg(long)]
        umax: Option<f64>,
    },
    /// Run every pipeline listed in the config, or re-render a saved report.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "config")]
        from: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut table: toml::Table = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
            text.parse().map_err(|e| HarnessError::Config(format!("config parse: {e}")))?
        }
        None => toml::Table::new(),
    };
    for o in &common.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| HarnessError::Config(format!("override {o:?} is not KEY=VALUE")))?;
        let parsed: toml::Table = format!("v = {v}").parse().unwrap_or_else(|_| {
            let mut t = toml::Table::new();
            t.insert("v".into(), toml::Value::String(v.into()));
            t
        });
        table.insert(k.trim().into(), parsed["v"].clone());
    }
    let mut config: ExperimentConfig = table.try_into().map_err(|e| HarnessError::Config(format!("config: {e}")))?;
    if let Some(d) = &common.out_dir {
        config.out_dir = d.clone();
    }
    Ok(config)
}

fn parse_lambdas(s: &str, config: &mut ExperimentConfig) -> Result<(), HarnessError> {
    let bad = || HarnessError::Config(format!("--lambdas {s:?}: expected hi:lo:geometric[:per_decade]"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 || parts[2] != "geometric" {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    config.bound_lambda_hi = a.max(b);
    config.bound_lambda_lo = a.min(b);
    if let Some(p) = parts.get(3) {
        config.bound_per_decade = p.parse().map_err(|_| bad())?;
    }
    Ok(())
}

fn finish(report: &RunReport, common: &Common, main_artifact: Option<&str>) -> Result<ExitCode, HarnessError> {
    let json = emit_report(report, Format::Json);
    write_atomic(&report.config.out_dir.join("report.json"), json.as_bytes())?;
    if let (Some(dst), Some(name)) = (&common.out, main_artifact) {
        let src = report.config.out_dir.join(name);
        let bytes = std::fs::read(&src).map_err(|e| HarnessError::Io(format!("{}: {e}", src.display())))?;
        write_atomic(dst, &bytes)?;
    }
    print!("{}", emit_report(report, common.format));
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn single(common: &Common, pipeline: Pipeline, artifact: &str, adjust: impl FnOnce(&mut ExperimentConfig) -> Result<(), HarnessError>) -> Result<ExitCode, HarnessError> {
    let mut config = load(common)?;
    config.pipelines = vec![pipeline];
    adjust(&mut config)?;
    let report = run_experiment(&config)?;
    finish(&report, common, Some(artifact))
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Simulate(c) => single(&c, Pipeline::Simulate, "simulate.csv", |_| Ok(())),
        Command::Greenkubo(c) => single(&c, Pipeline::Greenkubo, "greenkubo.csv", |_| Ok(())),
        Command::DualCheck(c) => single(&c, Pipeline::DualCheck, "dual_check.json", |_| Ok(())),
        Command::Resolvent(c) => single(&c, Pipeline::Resolvent, "resolvent.csv", |_| Ok(())),
        Command::Bound { common, lambdas, c1 } => single(&common, Pipeline::Bound, "bound.csv", |cfg| {
            if let Some(l) = &lambdas {
                parse_lambdas(l, cfg)?;
            }
            if let Some(c1) = c1 {
                cfg.c1 = c1;
            }
            Ok(())
        }),
        Command::DispersionKappa { common, umin, umax } => single(&common, Pipeline::DispersionKappa, "kappa.json", |cfg| {
            if let Some(u) = umin {
                cfg.kappa_umin = u;
            }
            if let Some(u) = umax {
                cfg.kappa_umax = u;
            }
            Ok(())
        }),
        Command::Report { common, from } => match from {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
                let report = RunReport::from_json(&text).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
                print!("{}", emit_report(&report, common.format));
                Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
            }
            None => {
                let config = load(&common)?;
                let report = run_experiment(&config)?;
                finish(&report, &common, None)
            }
        },
    }
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("LATGAS_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("LATGAS_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
