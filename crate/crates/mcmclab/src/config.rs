//! Run configuration: `key = value` files merged with command-line flags.
//!
//! Values are kept as strings until both sources are merged (flags win),
//! then converted; a conversion error names the offending token. The
//! resolved configuration can be echoed back as a string map that parses to
//! the same configuration, which is what the run manifest stores.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mcmclab_core::kernels::Algorithm;

use crate::error::{Error, Result};
use crate::lab::{Budget, EllRule, DEFAULT_EPSILON, DEFAULT_T_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sample,
    Distance,
    Diffusion,
    Converge,
    Scaling,
    Sweep,
    LimitCheck,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Distance => "distance",
            Command::Diffusion => "diffusion",
            Command::Converge => "converge",
            Command::Scaling => "scaling",
            Command::Sweep => "sweep",
            Command::LimitCheck => "limit-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Every key a config file or flag may set.
pub const KEYS: &[&str] = &[
    "algo",
    "target",
    "target_spec",
    "dim",
    "dims",
    "ell",
    "ell_rule",
    "budget",
    "starts",
    "replicas",
    "reference",
    "iters",
    "paths",
    "epsilon",
    "t_grid",
    "t",
    "dt",
    "speed",
    "u0",
    "ell_grid",
    "seed",
    "threads",
    "out_dir",
    "out",
    "a",
    "b",
    "thin",
];

pub type RawConfig = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub enum TargetChoice {
    Registry(String),
    /// Path to a density spec file.
    SpecFile(PathBuf),
}

/// Where the effective seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SeedSources {
    pub file: Option<u64>,
    pub flag: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub algo: Algorithm,
    pub target: TargetChoice,
    pub dim: Option<usize>,
    pub dims: Vec<usize>,
    pub ell_rule: EllRule,
    pub budget_name: String,
    pub budget: Budget,
    pub epsilon: f64,
    pub t_grid: Vec<f64>,
    pub t: f64,
    pub dt: Option<f64>,
    pub speed: Option<f64>,
    pub u0: f64,
    pub ell_grid: Option<Vec<f64>>,
    pub seed: u64,
    pub seed_sources: SeedSources,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub out: Option<String>,
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub thin: u64,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_U0: f64 = 2.0;

/// Reads a config file: `key = value` lines (`#` comments), or a run
/// manifest, whose `config` object is used.
pub fn read_config_file(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::usage(format!("{}: {e}", path.display())))?;
        let obj = v
            .get("config")
            .unwrap_or(&v)
            .as_object()
            .ok_or_else(|| Error::usage(format!("{}: expected a JSON object", path.display())))?;
        let mut raw = RawConfig::new();
        for (k, val) in obj {
            let s = match val {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            raw.insert(k.clone(), s);
        }
        check_keys(&raw)?;
        return Ok(raw);
    }
    parse_key_values(&text)
}

pub fn parse_key_values(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("config line {}: expected key = value, got {line:?}", lineno + 1)))?;
        let v = v.trim().trim_matches('"');
        raw.insert(k.trim().to_string(), v.to_string());
    }
    check_keys(&raw)?;
    Ok(raw)
}

fn check_keys(raw: &RawConfig) -> Result<()> {
    for k in raw.keys() {
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::usage(format!("unknown config key {k:?}")));
        }
    }
    Ok(())
}

fn num<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::usage(format!("{key}: malformed value {:?}", s.trim())))
}

fn list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',').map(|tok| num(key, tok)).collect()
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::usage(format!("{key} must be positive, got {v}")))
    }
}

/// Merges `file` and `flags` (flags win) and converts to a [`RunConfig`].
pub fn resolve(command: Command, file: &RawConfig, flags: &RawConfig) -> Result<RunConfig> {
    check_keys(file)?;
    check_keys(flags)?;
    let mut m = file.clone();
    for (k, v) in flags {
        m.insert(k.clone(), v.clone());
    }
    let get = |k: &str| m.get(k).map(String::as_str);

    let seed_sources = SeedSources {
        file: file.get("seed").map(|s| num("seed", s)).transpose()?,
        flag: flags.get("seed").map(|s| num("seed", s)).transpose()?,
    };
    let seed = seed_sources.flag.or(seed_sources.file).unwrap_or(DEFAULT_SEED);

    let algo = match get("algo") {
        Some(s) => s.parse::<Algorithm>().map_err(|_| Error::usage(format!("algo: expected rwm or mala, got {s:?}")))?,
        None => Algorithm::Rwm,
    };
    let target = match (get("target"), get("target_spec")) {
        (Some(_), Some(_)) => return Err(Error::usage("set either target or target_spec, not both")),
        (_, Some(p)) => TargetChoice::SpecFile(PathBuf::from(p)),
        (Some(n), None) => TargetChoice::Registry(n.to_string()),
        (None, None) => TargetChoice::Registry("std_normal".to_string()),
    };

    let dim = get("dim").map(|s| num::<usize>("dim", s)).transpose()?;
    if let Some(d) = dim {
        if d < 2 {
            return Err(Error::usage(format!("dim must be at least 2, got {d}")));
        }
    }
    let dims = get("dims").map(|s| list::<usize>("dims", s)).transpose()?.unwrap_or_default();
    if let Some(&d) = dims.iter().find(|&&d| d < 2) {
        return Err(Error::usage(format!("dims must be at least 2, got {d}")));
    }

    let ell_rule = match (get("ell"), get("ell_rule")) {
        (Some(_), Some(_)) => return Err(Error::usage("set either ell or ell_rule, not both")),
        (Some(l), None) => EllRule::Fixed(positive("ell", num("ell", l)?)?),
        (None, Some(r)) => EllRule::parse(r)?,
        (None, None) => EllRule::Auto,
    };

    let budget_name = get("budget").unwrap_or("small").to_string();
    let mut budget = Budget::preset(&budget_name)?;
    if let Some(s) = get("starts") {
        budget.starts = num("starts", s)?;
    }
    if let Some(s) = get("replicas") {
        budget.replicas = num("replicas", s)?;
    }
    if let Some(s) = get("reference") {
        budget.reference = num("reference", s)?;
    }
    if let Some(s) = get("iters") {
        budget.iters = num("iters", s)?;
    }
    if let Some(s) = get("paths") {
        budget.paths = num("paths", s)?;
    }
    if budget.starts == 0 || budget.replicas == 0 || budget.reference == 0 || budget.paths == 0 {
        return Err(Error::usage("budgets (starts, replicas, reference, paths) must be at least 1"));
    }

    let epsilon = get("epsilon").map(|s| num("epsilon", s)).transpose()?.unwrap_or(DEFAULT_EPSILON);
    let t_grid = get("t_grid").map(|s| list("t_grid", s)).transpose()?.unwrap_or_else(|| DEFAULT_T_GRID.to_vec());
    let t: f64 = get("t").map(|s| num("t", s)).transpose()?.unwrap_or(1.0);
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::usage(format!("t must be finite and non-negative, got {t}")));
    }
    let dt = get("dt").map(|s| num("dt", s).and_then(|v| positive("dt", v))).transpose()?;
    let speed = get("speed").map(|s| num("speed", s).and_then(|v| positive("speed", v))).transpose()?;
    let u0 = get("u0").map(|s| num("u0", s)).transpose()?.unwrap_or(DEFAULT_U0);
    let ell_grid = get("ell_grid").map(|s| list("ell_grid", s)).transpose()?;
    if let Some(g) = &ell_grid {
        for &l in g {
            positive("ell_grid", l)?;
        }
    }
    let threads = get("threads").map(|s| num::<usize>("threads", s)).transpose()?;
    if threads == Some(0) {
        return Err(Error::usage("threads must be at least 1"));
    }
    // about a hundred records per chain unless told otherwise
    let thin = get("thin")
        .map(|s| num::<u64>("thin", s))
        .transpose()?
        .unwrap_or((budget.iters / 100).max(1))
        .max(1);

    let cfg = RunConfig {
        command,
        algo,
        target,
        dim,
        dims,
        ell_rule,
        budget_name,
        budget,
        epsilon,
        t_grid,
        t,
        dt,
        speed,
        u0,
        ell_grid,
        seed,
        seed_sources,
        threads,
        out_dir: PathBuf::from(get("out_dir").unwrap_or("out")),
        out: get("out").map(str::to_string),
        a: get("a").map(PathBuf::from),
        b: get("b").map(PathBuf::from),
        thin,
    };
    cfg.check_required()?;
    Ok(cfg)
}

impl RunConfig {
    fn check_required(&self) -> Result<()> {
        let missing = |flag: &str| Err(Error::usage(format!("{} requires --{flag}", self.command)));
        match self.command {
            Command::Sample | Command::Converge | Command::Sweep if self.dim.is_none() => missing("dim"),
            Command::Scaling | Command::LimitCheck if self.dims.is_empty() => missing("dims"),
            Command::Distance if self.a.is_none() => missing("a"),
            Command::Distance if self.b.is_none() => missing("b"),
            _ => Ok(()),
        }
    }

    /// The configuration as a string map that [`resolve`] maps back to an
    /// identical configuration (apart from seed provenance).
    pub fn echo(&self) -> RawConfig {
        let mut m = RawConfig::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        put("algo", self.algo.as_str().to_string());
        match &self.target {
            TargetChoice::Registry(n) => put("target", n.clone()),
            TargetChoice::SpecFile(p) => put("target_spec", p.display().to_string()),
        }
        if let Some(d) = self.dim {
            put("dim", d.to_string());
        }
        if !self.dims.is_empty() {
            put("dims", self.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","));
        }
        put("ell_rule", self.ell_rule.to_string());
        put("budget", self.budget_name.clone());
        put("starts", self.budget.starts.to_string());
        put("replicas", self.budget.replicas.to_string());
        put("reference", self.budget.reference.to_string());
        put("iters", self.budget.iters.to_string());
        put("paths", self.budget.paths.to_string());
        put("epsilon", self.epsilon.to_string());
        put("t_grid", join(&self.t_grid));
        put("t", self.t.to_string());
        if let Some(dt) = self.dt {
            put("dt", dt.to_string());
        }
        if let Some(s) = self.speed {
            put("speed", s.to_string());
        }
        put("u0", self.u0.to_string());
        if let Some(g) = &self.ell_grid {
            put("ell_grid", join(g));
        }
        put("seed", self.seed.to_string());
        put("out_dir", self.out_dir.display().to_string());
        if let Some(o) = &self.out {
            put("out", o.clone());
        }
        if let Some(a) = &self.a {
            put("a", a.display().to_string());
        }
        if let Some(b) = &self.b {
            put("b", b.display().to_string());
        }
        put("thin", self.thin.to_string());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> RawConfig {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn scaling_dims() {
        let c = resolve(
            Command::Scaling,
            &RawConfig::new(),
            &flags(&[("algo", "rwm"), ("dims", "8,16,32"), ("seed", "7")]),
        )
        .unwrap();
        assert_eq!(c.dims, vec![8, 16, 32]);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn bad_token_is_named() {
        let e = resolve(Command::Scaling, &RawConfig::new(), &flags(&[("dims", "8,banana")])).unwrap_err();
        assert!(e.to_string().contains("banana"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn flag_seed_wins() {
        let file = parse_key_values("seed = 3\ndim = 8\n").unwrap();
        let c = resolve(Command::Converge, &file, &flags(&[("seed", "9")])).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.seed_sources, SeedSources { file: Some(3), flag: Some(9) });
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_key_values("colour = red").is_err());
        assert!(resolve(Command::Sample, &RawConfig::new(), &flags(&[("colour", "red")])).is_err());
    }

    #[test]
    fn required_flags() {
        let e = resolve(Command::Converge, &RawConfig::new(), &RawConfig::new()).unwrap_err();
        assert!(e.to_string().contains("--dim"));
        assert!(resolve(Command::Distance, &RawConfig::new(), &flags(&[("a", "x.csv")])).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = resolve(
            Command::Converge,
            &RawConfig::new(),
            &flags(&[("dim", "8"), ("ell", "2.38"), ("budget", "medium"), ("replicas", "300"), ("t_grid", "0.1,0.3")]),
        )
        .unwrap();
        let again = resolve(Command::Converge, &c.echo(), &RawConfig::new()).unwrap();
        assert_eq!(RunConfig { seed_sources: c.seed_sources, ..again }, c.clone());
        assert_eq!(c.budget.replicas, 300);
        assert_eq!(c.budget.starts, Budget::MEDIUM.starts);
    }

    #[test]
    fn conflicting_scale_keys() {
        assert!(resolve(Command::Converge, &RawConfig::new(), &flags(&[("dim", "8"), ("ell", "1"), ("ell_rule", "auto")])).is_err());
        assert!(resolve(Command::Converge, &RawConfig::new(), &flags(&[("dim", "8"), ("ell_rule", "bogus")])).is_err());
    }
}
