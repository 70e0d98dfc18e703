//! Scenario configuration: a flat `key = value` file plus command-line
//! overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::io::read_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Application {
    Localize,
    PageRank,
    Opinions,
    Affine,
}

impl FromStr for Application {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "localize" | "localization" => Ok(Application::Localize),
            "pagerank" => Ok(Application::PageRank),
            "opinions" => Ok(Application::Opinions),
            "affine" | "generic-affine" => Ok(Application::Affine),
            other => Err(HarnessError::Validation(format!("unknown application `{other}`"))),
        }
    }
}

impl fmt::Display for Application {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Application::Localize => "localize",
            Application::PageRank => "pagerank",
            Application::Opinions => "opinions",
            Application::Affine => "affine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sync,
    Gossip,
    Both,
}

impl Mode {
    pub fn runs_sync(self) -> bool {
        matches!(self, Mode::Sync | Mode::Both)
    }

    pub fn runs_gossip(self) -> bool {
        matches!(self, Mode::Gossip | Mode::Both)
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sync" => Ok(Mode::Sync),
            "gossip" => Ok(Mode::Gossip),
            "both" => Ok(Mode::Both),
            other => Err(HarnessError::Validation(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sync => "sync",
            Mode::Gossip => "gossip",
            Mode::Both => "both",
        })
    }
}

/// Every key accepted in a config file or as an override.
pub const KEYS: &[&str] = &[
    "application",
    "mode",
    "graph",
    "network",
    "prejudice",
    "matrix",
    "offset",
    "measurements",
    "positions",
    "x0",
    "gamma",
    "tau",
    "m",
    "sigma",
    "steps",
    "seed",
    "thin",
    "replications",
    "dump_every",
    "samples",
    "out",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub application: Application,
    pub mode: Mode,
    /// Edge-list path, or a generator: `complete:N`, `path:N`, `cycle:N`,
    /// `random:N:EXTRA:SEED`.
    pub graph: Option<String>,
    /// Influence matrix CSV path, or `example3`, or `random:N:K:SEED`.
    pub network: Option<String>,
    pub prejudice: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub offset: Option<PathBuf>,
    pub measurements: Option<PathBuf>,
    pub positions: Option<PathBuf>,
    pub x0: Option<PathBuf>,
    pub gamma: f64,
    /// Gradient step; defaults to `1 / (2 d_max)`.
    pub tau: Option<f64>,
    pub m: f64,
    pub sigma: f64,
    pub steps: u64,
    pub seed: u64,
    pub thin: u64,
    pub replications: u64,
    /// PageRank only: dump the raw vector every `dump_every` steps.
    pub dump_every: u64,
    /// Monte Carlo draws for `verify-expectation`.
    pub samples: u64,
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(application: Application) -> Self {
        ScenarioConfig {
            application,
            mode: match application {
                Application::Affine => Mode::Sync,
                _ => Mode::Gossip,
            },
            graph: None,
            network: None,
            prejudice: None,
            matrix: None,
            offset: None,
            measurements: None,
            positions: None,
            x0: None,
            gamma: 0.5,
            tau: None,
            m: 0.15,
            sigma: 0.1,
            steps: 10_000,
            seed: 0,
            thin: 0,
            replications: 1,
            dump_every: 0,
            samples: 0,
            out: None,
        }
    }

    /// Builds a config from key-value pairs; `application` is required.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(key) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(HarnessError::Config(format!("unknown key `{key}`")));
        }
        let app = map
            .get("application")
            .ok_or_else(|| HarnessError::Config("missing `application`".into()))?;
        let mut cfg = ScenarioConfig::new(app.parse()?);
        if let Some(mode) = map.get("mode") {
            cfg.mode = mode.parse()?;
        }
        for (key, value) in map {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (if any), then applies `overrides` on top.
    pub fn load(path: Option<&Path>, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let mut map = match path {
            Some(p) => parse_config_text(&read_text(p)?, &p.display().to_string())?,
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(&map)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad value for `{key}`: `{value}`")))
        }
        let text = || Some(value.to_string());
        let path = || Some(PathBuf::from(value));
        match key {
            "application" => self.application = value.parse()?,
            "mode" => self.mode = value.parse()?,
            "graph" => self.graph = text(),
            "network" => self.network = text(),
            "prejudice" => self.prejudice = path(),
            "matrix" => self.matrix = path(),
            "offset" => self.offset = path(),
            "measurements" => self.measurements = path(),
            "positions" => self.positions = path(),
            "x0" => self.x0 = path(),
            "gamma" => self.gamma = num(key, value)?,
            "tau" => self.tau = Some(num(key, value)?),
            "m" => self.m = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "thin" => self.thin = num(key, value)?,
            "replications" => self.replications = num(key, value)?,
            "dump_every" => self.dump_every = num(key, value)?,
            "samples" => self.samples = num(key, value)?,
            "out" => self.out = path(),
            other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(HarnessError::Validation(format!("{name} = {v} must lie in (0, 1)")))
            }
        };
        open_unit("gamma", self.gamma)?;
        open_unit("m", self.m)?;
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(HarnessError::Validation(format!("tau = {tau} must be positive")));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(HarnessError::Validation(format!(
                "sigma = {} must be nonnegative",
                self.sigma
            )));
        }
        if self.steps == 0 {
            return Err(HarnessError::Validation("steps must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(HarnessError::Validation("replications must be at least 1".into()));
        }
        if self.application == Application::Affine {
            if self.mode.runs_gossip() {
                return Err(HarnessError::Validation(
                    "the affine application has no gossip mode".into(),
                ));
            }
            if self.matrix.is_none() || self.offset.is_none() {
                return Err(HarnessError::Validation(
                    "the affine application needs `matrix` and `offset`".into(),
                ));
            }
        }
        for p in [
            &self.prejudice,
            &self.matrix,
            &self.offset,
            &self.measurements,
            &self.positions,
            &self.x0,
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(HarnessError::Validation(format!(
                    "file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    /// All effective settings except the output directory, one `key=value`
    /// per line in key order.
    pub fn canonical(&self) -> String {
        let opt = |o: &Option<String>| o.clone().unwrap_or_default();
        let path = |o: &Option<PathBuf>| o.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut pairs: BTreeMap<&str, String> = BTreeMap::new();
        pairs.insert("application", self.application.to_string());
        pairs.insert("mode", self.mode.to_string());
        pairs.insert("graph", opt(&self.graph));
        pairs.insert("network", opt(&self.network));
        pairs.insert("prejudice", path(&self.prejudice));
        pairs.insert("matrix", path(&self.matrix));
        pairs.insert("offset", path(&self.offset));
        pairs.insert("measurements", path(&self.measurements));
        pairs.insert("positions", path(&self.positions));
        pairs.insert("x0", path(&self.x0));
        pairs.insert("gamma", self.gamma.to_string());
        pairs.insert("tau", self.tau.map(|t| t.to_string()).unwrap_or_default());
        pairs.insert("m", self.m.to_string());
        pairs.insert("sigma", self.sigma.to_string());
        pairs.insert("steps", self.steps.to_string());
        pairs.insert("seed", self.seed.to_string());
        pairs.insert("thin", self.thin.to_string());
        pairs.insert("replications", self.replications.to_string());
        pairs.insert("dump_every", self.dump_every.to_string());
        pairs.insert("samples", self.samples.to_string());
        pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of [`ScenarioConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// `key = value` lines; `#` comments and blank lines are skipped.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(HarnessError::Parse {
                path: origin.to_string(),
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}
