//! The `mcmclab` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mcmclab_core::diffusion::{rwm_speed, DiffusionSpec};
use mcmclab_core::kernels::{Algorithm, ChainSpec, Start};
use mcmclab_core::kr::{kr_distance, resample_to, EmpiricalMeasure1D, TransportMethod};
use mcmclab_core::rng::{domain, stream};
use mcmclab_core::target::{moment_conditions, registry, ProductTarget, TargetModel1D};
use serde_json::{json, Map, Value};

use crate::config::{self, Command, RawConfig, RunConfig, TargetChoice};
use crate::error::{Error, Result};
use crate::expr::DensitySpec;
use crate::io::{fmt_f64, read_column, OutDir};
use crate::lab;

#[derive(Debug, Parser)]
#[command(name = "mcmclab", version, about = "Convergence experiments for Metropolis chains on product targets")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Record first-coordinate traces of an ensemble of chains.
    Sample(Opts),
    /// KR distance between two one-column sample files.
    Distance(Opts),
    /// Terminal values of the limiting diffusion at time t.
    Diffusion(Opts),
    /// Distance-to-stationarity curve and convergence time for one dim.
    Converge(Opts),
    /// Convergence time across dims and its power-law slope.
    Scaling(Opts),
    /// Acceptance rate and jump distance across proposal scales.
    Sweep(Opts),
    /// Distance between the sped-up chain and the diffusion limit.
    #[command(name = "limit-check")]
    LimitCheck(Opts),
}

macro_rules! opts {
    ($($field:ident $(env = $env:literal)?: $help:literal),* $(,)?) => {
        /// Every option can also be given in a config file as `key = value`
        /// (dashes become underscores); flags take precedence.
        #[derive(Debug, Args)]
        struct Opts {
            /// `key = value` file, or a manifest.json from an earlier run.
            #[arg(long)]
            config: Option<PathBuf>,
            $(
                #[doc = $help]
                #[arg(long $(, env = $env)?)]
                $field: Option<String>,
            )*
        }

        impl Opts {
            fn flags(&self) -> RawConfig {
                let mut m = RawConfig::new();
                $(
                    if let Some(v) = &self.$field {
                        m.insert(stringify!($field).to_string(), v.clone());
                    }
                )*
                m
            }
        }
    };
}

opts! {
    algo: "rwm or mala (default rwm).",
    target: "Registered component: std_normal, scaled_normal, logistic, bimodal.",
    target_spec: "Density spec file (name, log_density, support).",
    dim: "Dimension d.",
    dims: "Comma-separated dimensions.",
    ell: "Proposal scale; shorthand for --ell-rule fixed:L.",
    ell_rule: "fixed:L, calibrate:A or auto.",
    budget: "small, medium or paper (default small).",
    starts: "Override the number of starts.",
    replicas: "Override replicas per start.",
    reference: "Override the reference pool size.",
    iters: "Override iterations for sample and sweep.",
    paths: "Override diffusion paths.",
    epsilon: "Convergence threshold (default 0.2).",
    t_grid: "Comma-separated diffusion times.",
    t: "Diffusion time for diffusion and limit-check.",
    dt: "Euler-Maruyama step.",
    speed: "Diffusion speed.",
    u0: "Initial first coordinate for diffusion and limit-check.",
    ell_grid: "Comma-separated scales for sweep.",
    seed: "Master seed (default 1).",
    threads env = "MCMCLAB_THREADS": "Worker threads (does not change results).",
    out_dir: "Output directory (default out).",
    out: "File name of the main output, inside the output directory.",
    a: "First sample file for distance.",
    b: "Second sample file for distance.",
    thin: "Record every n-th iteration in sample.",
}

impl Cmd {
    fn split(&self) -> (Command, &Opts) {
        match self {
            Cmd::Sample(o) => (Command::Sample, o),
            Cmd::Distance(o) => (Command::Distance, o),
            Cmd::Diffusion(o) => (Command::Diffusion, o),
            Cmd::Converge(o) => (Command::Converge, o),
            Cmd::Scaling(o) => (Command::Scaling, o),
            Cmd::Sweep(o) => (Command::Sweep, o),
            Cmd::LimitCheck(o) => (Command::LimitCheck, o),
        }
    }
}

/// Default RWM sweep scales for a unit-Fisher component.
pub const RWM_ELL_GRID: [f64; 12] = [0.1, 0.5, 1.0, 1.5, 2.0, 2.25, 2.5, 2.75, 3.0, 3.5, 4.0, 5.0];
/// Default MALA sweep scales for a unit-Fisher component, dense where the
/// acceptance rate falls fastest.
pub const MALA_ELL_GRID: [f64; 12] = [0.5, 1.0, 1.25, 1.4, 1.5, 1.55, 1.6, 1.65, 1.7, 1.8, 2.0, 2.5];

/// Samples above this size use the monotone route instead of the
/// assignment solver, whose cost grows cubically.
pub const ASSIGNMENT_MAX: usize = 2048;

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (command, opts) = cli.command.split();
    match prepare(command, opts).and_then(execute) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mcmclab {command}: {e}");
            e.exit_code()
        }
    }
}

fn prepare(command: Command, opts: &Opts) -> Result<RunConfig> {
    let file = match &opts.config {
        Some(p) => config::read_config_file(p)?,
        None => RawConfig::new(),
    };
    config::resolve(command, &file, &opts.flags())
}

/// Runs a resolved configuration, writing its outputs and `manifest.json`.
pub fn execute(cfg: RunConfig) -> Result<()> {
    let pool = match cfg.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let mut out = OutDir::create(&cfg.out_dir)?;
    let started = Instant::now();
    let mut report = Report::default();
    let result = match &pool {
        Some(p) => p.install(|| dispatch(&cfg, &mut out, &mut report)),
        None => dispatch(&cfg, &mut out, &mut report),
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_manifest(&cfg, &mut out, &report, started, result.as_ref().err())?;
    result
}

#[derive(Debug, Default)]
struct Report {
    summary: Map<String, Value>,
    warnings: Vec<String>,
}

impl Report {
    fn set(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }
}

fn write_manifest(cfg: &RunConfig, out: &mut OutDir, report: &Report, started: Instant, err: Option<&Error>) -> Result<()> {
    let mut outputs: Vec<String> = out.written().to_vec();
    outputs.push("manifest.json".into());
    let manifest = json!({
        "command": cfg.command.as_str(),
        "config": cfg.echo(),
        "seed": {
            "value": cfg.seed,
            "file": cfg.seed_sources.file,
            "flag": cfg.seed_sources.flag,
        },
        "versions": {
            "mcmclab": env!("CARGO_PKG_VERSION"),
            "mcmclab_core": mcmclab_core::VERSION,
        },
        "threads": cfg.threads.unwrap_or_else(rayon::current_num_threads),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "summary": report.summary,
        "warnings": report.warnings,
        "outputs": outputs,
        "exit_code": err.map_or(0, Error::exit_code),
        "error": err.map(|e| e.to_string()),
    });
    out.write_json("manifest.json", &manifest)?;
    Ok(())
}

fn dispatch(cfg: &RunConfig, out: &mut OutDir, report: &mut Report) -> Result<()> {
    if let Some(name) = &cfg.out {
        out.path(name)?;
    }
    match cfg.command {
        Command::Sample => sample(cfg, out, report),
        Command::Distance => distance(cfg, out, report),
        Command::Diffusion => diffusion(cfg, out, report),
        Command::Converge => converge(cfg, out, report),
        Command::Scaling => scaling(cfg, out, report),
        Command::Sweep => sweep(cfg, out, report),
        Command::LimitCheck => limit_check(cfg, out, report),
    }
}

/// Builds the component density and warns when the moment conditions the
/// diffusion limit relies on cannot be confirmed.
fn component(cfg: &RunConfig, report: &mut Report) -> Result<TargetModel1D> {
    let model = match &cfg.target {
        TargetChoice::Registry(name) => registry(name)?,
        TargetChoice::SpecFile(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            DensitySpec::parse(&text)?.build()?
        }
    };
    match moment_conditions(&model) {
        Ok(m) if m.finite() => {}
        Ok(_) => report.warnings.push(format!(
            "{}: E[((log h)')^8] or E[((log h)'')^4] is not finite; limit results may not apply",
            model.name()
        )),
        Err(e) => report.warnings.push(format!("{}: moment conditions not verified ({e})", model.name())),
    }
    report.set("target", Value::String(model.name().to_string()));
    report.set("fisher_i", json!(model.fisher_i()));
    Ok(model)
}

fn chain_spec(cfg: &RunConfig, model: &TargetModel1D, d: usize, seed: u64, report: &mut Report) -> Result<ChainSpec> {
    let target = ProductTarget::new(model.clone(), d)?;
    let (ell, acc) = lab::resolve_ell(cfg.ell_rule, cfg.algo, &target, seed)?;
    report.set("ell", json!(ell));
    if let Some(a) = acc {
        report.set("calibrated_acceptance", json!(a));
    }
    Ok(ChainSpec::new(cfg.algo, target, ell, seed, Start::FromPi)?)
}

fn name<'a>(cfg: &'a RunConfig, default: &'a str) -> &'a str {
    cfg.out.as_deref().unwrap_or(default)
}

fn sample(cfg: &RunConfig, out: &mut OutDir, report: &mut Report) -> Result<()> {
    let model = component(cfg, report)?;
    let d = cfg.dim.expect("checked by config");
    let spec = chain_spec(cfg, &model, d, cfg.seed, report)?;
    let run = lab::sample_ensemble(&spec, cfg.budget.starts, cfg.budget.replicas, cfg.budget.iters, cfg.thin)?;
    out.write_csv(
        name(cfg, "samples.csv"),
        &["start_idx", "replica_idx", "iteration", "coord1"],
        run.rows
            .iter()
            .map(|&(k, r, it, x)| [k.to_string(), r.to_string(), it.to_string(), fmt_f64(x)]),
    )?;
    report.set("acceptance_rate", json!(run.acceptance_rate));
    println!(
        "sampled {} chains x {} iterations; acceptance {}",
        cfg.budget.starts * cfg.budget.replicas,
        cfg.budget.iters,
        run.acceptance_rate.map_or("n/a".into(), |a| format!("{a:.4}"))
    );
    Ok(())
}

fn load(path: &Path) -> Result<EmpiricalMeasure1D> {
    Ok(EmpiricalMeasure1D::new(read_column(path)?)?)
}

fn distance(cfg: &RunConfig, out: &mut OutDir, report: &mut Report) -> Result<()> {
    let a = load(cfg.a.as_deref().expect("checked by config"))?;
    let b = load(cfg.b.as_deref().expect("checked by config"))?;
    let (a, b) = if a.len() == b.len() {
        (a, b)
    } else {
        let n = a.len().min(b.len());
        report.warnings.push(format!(
            "sample sizes differ ({} vs {}); the larger one was resampled to {n}",
            a.len(),
            b.len()
        ));
        let mut rng = stream(cfg.seed, &[domain::RESAMPLE]);
        if a.len() > n {
            (resample_to(&a, n, &mut rng)?, b)
        } else {
            let b = resample_to(&b, n, &mut rng)?;
            (a, b)
        }
    };
    let n = a.len();
    let (value, method) = if n <= ASSIGNMENT_MAX {
        let r = kr_distance(&a, &b)?;
        (r.distance, r.method.as_str())
    } else {
        (lab::kr(&a, &b)?, TransportMethod::MonotonePartialMatching.as_str())
    };
    let floor = lab::pooled_noise_floor(&a, &b, cfg.seed)?;
    let doc = json!({
        "distance": value,
        "method": method,
        "n": n,
        "noise_floor": floor.level(),
    });
    out.write_json(name(cfg, "distance.json"), &doc)?;
    report.set("distance", json!(value));
    report.set("noise_floor", json!(floor.level()));
    println!("kr distance {value:.6} (n = {n}, noise floor {:.6})", floor.level());
    Ok(())
}

fn diffusion(cfg: &RunConfig, out: &mut OutDir, report: &mut Report) -> Result<()> {
    let model = component(cfg, report)?;
    let speed = match (cfg.speed, cfg.algo) {
        (Some(s), _) => s,
        (None, Algorithm::Rwm) => {
            // the speed does not depend on d; any d >= 2 resolves the scale
            let target = ProductTarget::new(model.clone(), 2)?;
            let (ell, _) = lab::resolve_ell(cfg.ell_rule, cfg.algo, &target, cfg.seed)?;
            report.set("ell", json!(ell));
            rwm_speed(ell, model.fisher_i())
        }
        (None, Algorithm::Mala) => return Err(Error::usage("diffusion for mala needs --speed")),
    };
    let spec = match cfg.dt {
        Some(dt) => DiffusionSpec::with_dt(model, speed, dt, cfg.t)?,
        None => DiffusionSpec::new(model, speed, cfg.t)?,
    };
    let values = lab::diffusion_sample(&spec, cfg.u0, cfg.budget.paths, cfg.seed)?;
    out.write_csv(
        name(cfg, "diffusion.csv"),
        &["path", "value"],
        values.iter().enumerate().map(|(p, v)| [p.to_string(), fmt_f64(*v)]),
    )?;
    report.set("speed", json!(speed));
    report.set("dt", json!(spec.dt));
    report.set("steps", json!(spec.steps()));
    println!("simulated {} paths to t = {} (speed {speed:.6})", values.len(), cfg.t);
    Ok(())
}

fn curve_rows(curve: &lab::DistanceCurve) -> impl Iterator<Item = [String; 4]> + '_ {
    (0..curve.times.len()).map(|j| {
        [
            fmt_f64(curve.times[j]),
            curve.iterations[j].to_string(),
            fmt_f64(curve.dist_hat[j]),
            fmt_f64(curve.band[j]),
        ]
    })
}

const CURVE_HEADER: [&str; 4] = ["t", "iteration", "dist", "band"];

fn floor_warning(report: &mut Report, d: usize, level: f64, epsilon: f64) {
    if level > epsilon / 4.0 {
        report.warnings.push(format!(
            "d={d}: noise floor {level:.4} exceeds epsilon/4 = {:.4}; raise the budget",
            epsilon / 4.0
        ));
    }
}

fn converge(cfg: &RunConfig, out: &mut OutDir, report: &mut Report) -> Result<()> {
    let model = component(cfg, report)?;
    let d = cfg.dim.expect("checked by config");
    let spec = chain_spec(cfg, &model, d, cfg.seed, report)?;
    let curve = lab::distance_curve(&spec, &cfg.t_grid, &cfg.budget)?;
    out.write_csv(name(cfg, "curve.csv"), &CURVE_HEADER, curve_rows(&curve))?;
    floor_warning(report, d, curve.noise_floor.level(), cfg.epsilon);
    let bumps = lab::monotonicity_violations(&curve);
    if !bumps.is_empty() {
        report.warnings.push(format!("curve rises beyond its bands after grid points {bumps:?}"));
    }
    let t_eps = lab::convergence_time(&curve, cfg.epsilon);
    report.set("noise_floor", json!(curve.noise_floor.level()));
    report.set("acceptance_rate", json!(curve.acceptance_rate));
    report.set("t_eps", json!(t_eps));
    match t_eps {
        Some(t) => {
            println!("d = {d}: T_eps = {t:.1} iterations (epsilon {})", cfg.epsilon);
            Ok(())
        }
        None => Err(Error::Unbounded {
            dim: d,
            epsilon: cfg.epsilon,
            last: curve.dist_hat.last().copied().unwrap_or(f64::NAN),
            noise_floor: curve.noise_floor.level(),
        }),
    }
}

fn scaling(cfg: &RunConfig, out: &mut OutDir, report: &mut Report) -> Result<()> {
    let model = component(cfg, report)?;
    let fit = lab::scaling_fit(
        cfg.algo,
        &model,
        &cfg.dims,
        cfg.ell_rule,
        cfg.epsilon,
        &cfg.budget,
        &cfg.t_grid,
        cfg.seed,
    )?;
    for p in &fit.points {
        out.write_csv(&format!("curve_d{}.csv", p.dim), &CURVE_HEADER, curve_rows(&p.curve))?;
    }
    out.write_csv(
        name(cfg, "scaling.csv"),
        &["d", "ell", "t_eps", "noise_floor"],
        fit.points.iter().map(|p| {
            [
                p.dim.to_string(),
                fmt_f64(p.ell),
                fmt_f64(p.t_eps),
                fmt_f64(p.curve.noise_floor.level()),
            ]
        }),
    )?;
    let doc = json!({
        "algorithm": fit.algorithm.as_str(),
        "slope": fit.slope,
        "intercept": fit.intercept,
        "ci": [fit.slope_ci.0, fit.slope_ci.1],
        "ci_replicates": fit.ci_replicates,
        "epsilon": fit.epsilon,
        "dims": fit.points.iter().map(|p| p.dim).collect::<Vec<_>>(),
        "t_eps": fit.points.iter().map(|p| p.t_eps).collect::<Vec<_>>(),
    });
    out.write_json("fit.json", &doc)?;
    report.warnings.extend(fit.warnings.iter().cloned());
    report.set("slope", json!(fit.slope));
    report.set("slope_ci", json!([fit.slope_ci.0, fit.slope_ci.1]));
    println!(
        "slope {:.3} (95% CI {:.3} to {:.3})",
        fit.slope, fit.slope_ci.0, fit.slope_ci.1
    );
    Ok(())
}

fn sweep(cfg: &RunConfig, out: &mut OutDir, report: &mut Report) -> Result<()> {
    let model = component(cfg, report)?;
    let d = cfg.dim.expect("checked by config");
    let grid = match &cfg.ell_grid {
        Some(g) => g.clone(),
        None => {
            let base: &[f64] = match cfg.algo {
                Algorithm::Rwm => &RWM_ELL_GRID,
                Algorithm::Mala => &MALA_ELL_GRID,
            };
            let scale = 1.0 / model.fisher_i().sqrt();
            base.iter().map(|l| l * scale).collect()
        }
    };
    let target = ProductTarget::new(model, d)?;
    let spec = ChainSpec::new(cfg.algo, target, grid[0], cfg.seed, Start::FromPi)?;
    let sweep = lab::acceptance_sweep(&spec, &grid, cfg.budget.iters)?;
    out.write_csv(
        name(cfg, "sweep.csv"),
        &["ell", "acceptance", "esjd", "proxy"],
        sweep
            .rows
            .iter()
            .map(|r| [fmt_f64(r.ell), fmt_f64(r.acceptance), fmt_f64(r.esjd), fmt_f64(r.proxy)]),
    )?;
    report.warnings.extend(sweep.warnings.iter().cloned());
    let best = sweep.rows[sweep.argmax];
    report.set("argmax_ell", json!(best.ell));
    report.set("argmax_acceptance", json!(best.acceptance));
    println!("best proxy at ell = {} (acceptance {:.3})", best.ell, best.acceptance);
    Ok(())
}

fn limit_check(cfg: &RunConfig, out: &mut OutDir, report: &mut Report) -> Result<()> {
    let model = component(cfg, report)?;
    let d_max = *cfg.dims.iter().max().expect("checked by config");
    let target = ProductTarget::new(model.clone(), d_max)?;
    let (ell, _) = lab::resolve_ell(cfg.ell_rule, cfg.algo, &target, cfg.seed)?;
    let check = lab::weak_limit_comparison(
        cfg.algo,
        &model,
        &cfg.dims,
        ell,
        cfg.t,
        cfg.u0,
        cfg.speed,
        cfg.budget.paths,
        cfg.seed,
    )?;
    out.write_csv(
        name(cfg, "limit.csv"),
        &["d", "kr", "band"],
        check
            .rows
            .iter()
            .map(|r| [r.dim.to_string(), fmt_f64(r.kr), fmt_f64(r.band)]),
    )?;
    report.set("ell", json!(ell));
    report.set("speed", json!(check.speed));
    report.set("noise_floor", json!(check.noise_floor.level()));
    for r in &check.rows {
        println!("d = {}: kr {:.4} ± {:.4}", r.dim, r.kr, r.band);
    }
    Ok(())
}
