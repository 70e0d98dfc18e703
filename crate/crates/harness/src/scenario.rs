//! Turns a [`ScenarioConfig`] into runs, logs and a summary record.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gossip_core::affine::{self, AffineSystem};
use gossip_core::engine::{replicate, should_log, RunOptions};
use gossip_core::localization::{self, MeasurementSet, OrientedGraph};
use gossip_core::numerics::spectral_radius_estimate;
use gossip_core::opinions::{self, build_network, InfluenceNetwork};
use gossip_core::pagerank::{self, WebGraph};
use gossip_core::{DenseMatrix, Vector};

use crate::config::{Application, ScenarioConfig};
use crate::error::{Context, HarnessError, Result};
use crate::io::{format_float, load_graph, load_matrix, load_vector, GraphKind, LoadedGraph};
use crate::output::{Cell, LogRow, Metadata, TrajectoryLog};

/// Everything a scenario needs, loaded and validated.
#[derive(Debug, Clone)]
pub enum Inputs {
    Localize {
        graph: OrientedGraph,
        meas: MeasurementSet,
        /// Gradient step of the synchronous run.
        tau: f64,
    },
    PageRank {
        graph: WebGraph,
        x0: Vector,
    },
    Opinions {
        net: InfluenceNetwork,
    },
    Affine {
        sys: AffineSystem,
        x0: Vector,
    },
}

/// Resolves a graph setting: `complete:N`, `path:N` and `cycle:N` build
/// the named graph, `random:N:EXTRA:SEED` a random strongly connected link
/// graph; anything else is read as an edge-list file.
pub fn resolve_graph(spec: &str, kind: GraphKind) -> Result<LoadedGraph> {
    let parts: Vec<&str> = spec.split(':').collect();
    let generator = matches!(parts[0], "complete" | "path" | "cycle" | "random") && parts.len() > 1;
    if !generator {
        return load_graph(Path::new(spec), kind);
    }
    let bad = || HarnessError::Config(format!("bad graph spec `{spec}`"));
    let nums = parts[1..]
        .iter()
        .map(|p| p.parse::<u64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let invalid = |e: gossip_core::Error| HarnessError::Validation(format!("{}: {e}", e.class_name()));
    let n = nums[0] as usize;
    match (parts[0], kind, nums.len()) {
        ("complete", GraphKind::Oriented, 1) => OrientedGraph::complete(n).map(LoadedGraph::Oriented),
        ("path", GraphKind::Oriented, 1) => OrientedGraph::path(n).map(LoadedGraph::Oriented),
        ("cycle", GraphKind::Oriented, 1) => {
            let mut edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
            if n > 2 {
                edges.push((0, n - 1));
            }
            OrientedGraph::new(n, edges).map(LoadedGraph::Oriented)
        }
        ("cycle", GraphKind::Directed, 1) => WebGraph::cycle(n).map(LoadedGraph::Directed),
        ("random", GraphKind::Directed, 3) => {
            WebGraph::random_strongly_connected(n, nums[1] as usize, nums[2]).map(LoadedGraph::Directed)
        }
        _ => return Err(bad()),
    }
    .map_err(invalid)
}

fn oriented(spec: &str) -> Result<OrientedGraph> {
    match resolve_graph(spec, GraphKind::Oriented)? {
        LoadedGraph::Oriented(g) => Ok(g),
        LoadedGraph::Directed(_) => unreachable!("oriented graph requested"),
    }
}

fn directed(spec: &str) -> Result<WebGraph> {
    match resolve_graph(spec, GraphKind::Directed)? {
        LoadedGraph::Directed(g) => Ok(g),
        LoadedGraph::Oriented(_) => unreachable!("directed graph requested"),
    }
}

/// The three-agent network used in the examples.
pub fn example_network() -> InfluenceNetwork {
    let w = DenseMatrix::from_rows(&[
        [0.5, 0.5, 0.0],
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [0.0, 0.5, 0.5],
    ])
    .expect("square literal");
    build_network(w, Vector::from([1.0, 0.0, -1.0])).expect("valid literal network")
}

fn check_len(what: &str, v: &Vector, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(HarnessError::Validation(format!(
            "{what} has {} entries, expected {n}",
            v.len()
        )));
    }
    Ok(())
}

pub fn load_inputs(cfg: &ScenarioConfig) -> Result<Inputs> {
    match cfg.application {
        Application::Localize => {
            let graph = oriented(cfg.graph.as_deref().unwrap_or("complete:10"))?;
            let n = graph.node_count();
            let meas = match &cfg.measurements {
                Some(p) => {
                    let b = load_vector(p)?;
                    check_len("measurements", &b, graph.edge_count())?;
                    MeasurementSet::new(&graph, b).context(|| "measurements".into())?
                }
                None => {
                    let s = match &cfg.positions {
                        Some(p) => load_vector(p)?,
                        None => (0..n).map(|i| i as f64).collect(),
                    };
                    check_len("positions", &s, n)?;
                    localization::synth_measurements(&graph, &s, cfg.sigma, cfg.seed)
                        .context(|| "synthetic measurements".into())?
                }
            };
            let d_max = graph.max_degree().max(1) as f64;
            let tau = cfg.tau.unwrap_or(0.5 / d_max);
            Ok(Inputs::Localize { graph, meas, tau })
        }
        Application::PageRank => {
            let graph = directed(cfg.graph.as_deref().unwrap_or("cycle:3"))?;
            let n = graph.node_count();
            let x0 = match &cfg.x0 {
                Some(p) => load_vector(p)?,
                None => Vector::filled(n, 1.0 / n as f64),
            };
            check_len("x0", &x0, n)?;
            Ok(Inputs::PageRank { graph, x0 })
        }
        Application::Opinions => {
            let spec = cfg.network.as_deref().unwrap_or("example3");
            let net = if spec == "example3" {
                example_network()
            } else if let Some(rest) = spec.strip_prefix("random:") {
                let nums = rest
                    .split(':')
                    .map(|p| p.parse::<u64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .ok()
                    .filter(|v| v.len() == 3)
                    .ok_or_else(|| HarnessError::Config(format!("bad network spec `{spec}`")))?;
                InfluenceNetwork::random(nums[0] as usize, nums[1] as usize, nums[2])
                    .context(|| "random influence network".into())?
            } else {
                let w = load_matrix(Path::new(spec))?;
                let v = match &cfg.prejudice {
                    Some(p) => load_vector(p)?,
                    None => {
                        return Err(HarnessError::Validation(
                            "an influence matrix file needs a `prejudice` file".into(),
                        ))
                    }
                };
                check_len("prejudice", &v, w.rows())?;
                build_network(w, v)
                    .map_err(|e| HarnessError::Validation(format!("{}: {e}", e.class_name())))?
            };
            Ok(Inputs::Opinions { net })
        }
        Application::Affine => {
            let (Some(mp), Some(up)) = (&cfg.matrix, &cfg.offset) else {
                return Err(HarnessError::Validation(
                    "the affine application needs `matrix` and `offset`".into(),
                ));
            };
            let p = load_matrix(mp)?;
            let u = load_vector(up)?;
            check_len("offset", &u, p.rows())?;
            let x0 = match &cfg.x0 {
                Some(path) => load_vector(path)?,
                None => Vector::zeros(p.rows()),
            };
            check_len("x0", &x0, p.rows())?;
            let sys = AffineSystem::new(p, u).context(|| "affine system".into())?;
            Ok(Inputs::Affine { sys, x0 })
        }
    }
}

/// Summary entries contributed by one run, prefixed with its log name.
type Extras = Vec<(String, String)>;

struct RunResult {
    logs: Vec<TrajectoryLog>,
    extras: Extras,
}

fn floats(v: &[f64]) -> Vec<Vec<Cell>> {
    v.iter().map(|&x| vec![Cell::Float(x)]).collect()
}

/// Synchronous run from `x0`, logging `x` and, when an oracle exists, its
/// sup-norm distance to it.
fn sync_log(
    name: &str,
    sys: &AffineSystem,
    x0: &Vector,
    oracle: Option<&Vector>,
    steps: u64,
    thin: u64,
) -> Result<TrajectoryLog> {
    let metric: &[&str] = if oracle.is_some() { &["error_x"] } else { &[] };
    let mut log = TrajectoryLog::new(name, &["x"], metric).with_error_field("error_x");
    let row = |k: u64, x: &Vector| LogRow {
        step: k,
        nodes: floats(x),
        metrics: oracle.map(|o| vec![x.max_abs_diff(o)]).unwrap_or_default(),
    };
    let mut x = x0.clone();
    log.push(row(0, &x))?;
    for k in 1..=steps {
        x = sys.step(&x);
        if should_log(k, steps, thin) {
            log.push(row(k, &x))?;
        }
    }
    Ok(log)
}

fn run_sync(cfg: &ScenarioConfig, inputs: &Inputs) -> Result<RunResult> {
    let name = format!("{}_sync_rep0", cfg.application);
    let mut extras = Extras::new();
    let log = match inputs {
        Inputs::Localize { graph, meas, tau } => {
            let limit = 1.0 / graph.max_degree().max(1) as f64;
            if *tau >= limit {
                return Err(gossip_core::Error::TauTooLarge { tau: *tau, limit })
                    .context(|| "localize sync".into());
            }
            let oracle = localization::ls_oracle(graph, meas).context(|| "least-squares oracle".into())?;
            let sys = localization::gradient_system(graph, meas, *tau).context(|| "gradient system".into())?;
            extras.push(("tau".into(), format_float(*tau)));
            sync_log(&name, &sys, &Vector::zeros(graph.node_count()), Some(&oracle), cfg.steps, cfg.thin)?
        }
        Inputs::PageRank { graph, x0 } => {
            let ctx = || "pagerank sync".to_string();
            let pi = pagerank::pagerank_exact(graph, cfg.m).context(ctx)?;
            let sys = pagerank::pagerank_system(graph, cfg.m).context(ctx)?;
            let mut log = TrajectoryLog::new(&name, &[], &["l1_error_vs_pi", "min_entry", "sum_entries"])
                .with_error_field("l1_error_vs_pi");
            let row = |k: u64, x: &Vector| LogRow {
                step: k,
                nodes: Vec::new(),
                metrics: vec![x.sub(&pi).norm_1(), x.min(), x.sum()],
            };
            let mut x = x0.clone();
            log.push(row(0, &x))?;
            for k in 1..=cfg.steps {
                x = sys.step(&x);
                if should_log(k, cfg.steps, cfg.thin) {
                    log.push(row(k, &x))?;
                }
            }
            log
        }
        Inputs::Opinions { net } => {
            let ctx = || "opinions sync".to_string();
            let oracle = opinions::fj_fixed_point(net).context(ctx)?;
            let sys = opinions::fj_system(net).context(ctx)?;
            sync_log(&name, &sys, net.prejudice(), Some(&oracle), cfg.steps, cfg.thin)?
        }
        Inputs::Affine { sys, x0 } => {
            let verdict = spectral_radius_estimate(sys.matrix()).context(|| "stability certificate".into())?;
            extras.push(("stability".into(), format!("{verdict:?}")));
            let oracle = affine::fixed_point(sys, false).ok();
            sync_log(&name, sys, x0, oracle.as_ref(), cfg.steps, cfg.thin)?
        }
    };
    Ok(RunResult { logs: vec![log], extras })
}

fn run_gossip(cfg: &ScenarioConfig, inputs: &Inputs, rep: u64) -> Result<RunResult> {
    let name = format!("{}_gossip_rep{rep}", cfg.application);
    let opts = RunOptions { thin: cfg.thin, record_events: false, replication: rep };
    let ctx = || name.clone();
    let mut extras = Extras::new();
    let mut logs = Vec::new();
    match inputs {
        Inputs::Localize { graph, meas, .. } => {
            let run = localization::run_gossip_localization(graph, meas, cfg.gamma, cfg.steps, cfg.seed, opts)
                .context(ctx)?;
            let mut log = TrajectoryLog::new(&name, &["x", "kappa", "x_tilde"], &["error_x", "error_x_tilde"])
                .with_error_field("error_x_tilde");
            for s in &run.log {
                let nodes = (0..graph.node_count())
                    .map(|i| vec![Cell::Float(s.x[i]), Cell::Int(s.kappa[i]), Cell::Float(s.x_tilde[i])])
                    .collect();
                log.push(LogRow { step: s.step, nodes, metrics: vec![s.error_x, s.error_x_tilde] })?;
            }
            logs.push(log);
        }
        Inputs::PageRank { graph, x0 } => {
            let dump = (cfg.dump_every > 0).then_some(cfg.dump_every);
            let run = pagerank::run_gossip_pagerank(graph, cfg.m, cfg.steps, cfg.seed, x0, opts, dump)
                .context(ctx)?;
            let mut log = TrajectoryLog::new(&name, &[], &["l1_error_vs_pi", "min_entry", "sum_entries"])
                .with_error_field("l1_error_vs_pi");
            for s in &run.log {
                log.push(LogRow {
                    step: s.step,
                    nodes: Vec::new(),
                    metrics: vec![s.l1_error_vs_pi, s.min_entry, s.sum_entries],
                })?;
            }
            logs.push(log);
            if !run.dumps.is_empty() {
                let mut dumps = TrajectoryLog::new(format!("{name}_dump"), &["x"], &[]);
                for (step, x) in &run.dumps {
                    dumps.push(LogRow { step: *step, nodes: floats(x), metrics: Vec::new() })?;
                }
                logs.push(dumps);
            }
            extras.push(("max_sum_drift".into(), format_float(run.max_sum_drift)));
            extras.push(("min_entry_seen".into(), format_float(run.min_entry_seen)));
        }
        Inputs::Opinions { net } => {
            let run = opinions::run_gossip_opinions(net, cfg.steps, cfg.seed, opts).context(ctx)?;
            let mut log = TrajectoryLog::new(&name, &["x", "x_bar"], &["error_x_bar"])
                .with_error_field("error_x_bar");
            for s in &run.log {
                let nodes = (0..net.dim())
                    .map(|i| vec![Cell::Float(s.x[i]), Cell::Float(s.x_bar[i])])
                    .collect();
                log.push(LogRow { step: s.step, nodes, metrics: vec![s.error_x_bar] })?;
            }
            logs.push(log);
            extras.push(("bounded".into(), run.bounded.to_string()));
        }
        Inputs::Affine { .. } => {
            return Err(HarnessError::Validation(
                "the affine application has no gossip mode".into(),
            ))
        }
    }
    Ok(RunResult { logs, extras })
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub logs: Vec<TrajectoryLog>,
    pub summary: BTreeMap<String, String>,
}

impl ScenarioOutput {
    pub fn log(&self, name: &str) -> Option<&TrajectoryLog> {
        self.logs.iter().find(|l| l.name == name)
    }

    /// `key=value` lines in key order.
    pub fn summary_text(&self) -> String {
        self.summary.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Writes every log plus `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut written = Vec::new();
        for log in &self.logs {
            written.extend(log.write(dir)?);
        }
        let path = dir.join("summary.txt");
        fs::write(&path, self.summary_text()).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

/// Runs the configured application in the configured mode(s). Gossip
/// replications run in parallel and are reported in replication order.
/// Outputs are written when `cfg.out` is set.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let hash = cfg.hash();
    let timed = |rep: u64, run: &dyn Fn() -> Result<RunResult>| {
        let started = Instant::now();
        run().map(|mut r| {
            let wall = started.elapsed().as_secs_f64();
            for log in &mut r.logs {
                log.meta = Metadata {
                    seed: cfg.seed,
                    replication: rep,
                    config_hash: hash.clone(),
                    wall_time_secs: wall,
                };
            }
            r
        })
    };
    let mut results = Vec::new();
    if cfg.mode.runs_sync() {
        results.push(timed(0, &|| run_sync(cfg, &inputs))?);
    }
    if cfg.mode.runs_gossip() {
        let reps = replicate(cfg.replications as usize, |rep| {
            timed(rep as u64, &|| run_gossip(cfg, &inputs, rep as u64))
        });
        for r in reps {
            results.push(r?);
        }
    }

    let mut summary = BTreeMap::new();
    summary.insert("application".to_string(), cfg.application.to_string());
    summary.insert("mode".to_string(), cfg.mode.to_string());
    summary.insert("seed".to_string(), cfg.seed.to_string());
    summary.insert("steps".to_string(), cfg.steps.to_string());
    summary.insert("replications".to_string(), cfg.replications.to_string());
    summary.insert("config_hash".to_string(), hash.clone());
    let mut logs = Vec::new();
    for r in results {
        let head = r.logs[0].name.clone();
        for (k, v) in r.extras {
            summary.insert(format!("{head}.{k}"), v);
        }
        for log in &r.logs {
            if let Some(e) = log.final_error() {
                summary.insert(format!("{}.final_error", log.name), format_float(e));
            }
            summary.insert(
                format!("{}.wall_time_secs", log.name),
                format!("{:.6}", log.meta.wall_time_secs),
            );
        }
        logs.extend(r.logs);
    }
    let out = ScenarioOutput { logs, summary };
    if let Some(dir) = &cfg.out {
        out.write(dir)?;
    }
    Ok(out)
}
