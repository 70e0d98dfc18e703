//! Relative localization from noisy pairwise differences.
//!
//! Each edge `(i, j)` of an oriented graph carries a measurement
//! `b_ij = s_i - s_j + η_ij`. The least-squares estimate is the minimum-norm
//! solution of `L x = Aᵀ b` (zero mean). It is reached by gradient descent or,
//! asynchronously, by pairwise gossip with per-node time-averaging driven by
//! local update counters.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::affine::{self, AffineSystem, SyncTrajectory};
use crate::engine::{self, should_log, Kernel, KernelDistribution, RunOptions, SimRng};
use crate::error::{Error, Result};
use crate::numerics::{laplacian_pseudo_solve, DenseMatrix, Vector};

/// A graph whose edges `(i, j)` all satisfy `i < j`.
#[derive(Debug, Clone)]
pub struct OrientedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
    weakly_connected: bool,
}

impl OrientedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGraph(format!("need at least 3 nodes, got {n}")));
        }
        let mut index = HashMap::with_capacity(edges.len());
        for (e, &(i, j)) in edges.iter().enumerate() {
            if i >= j {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) must satisfy i < j"
                )));
            }
            if j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) refers to a node outside 0..{n}"
                )));
            }
            if index.insert((i, j), e).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
        }
        let mut undirected = vec![Vec::new(); n];
        for &(i, j) in &edges {
            undirected[i].push(j);
            undirected[j].push(i);
        }
        let weakly_connected = crate::reach::strongly_connected(&undirected);
        Ok(OrientedGraph {
            n,
            edges,
            index,
            weakly_connected,
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::new(n, edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|j| (j - 1, j)).collect())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.index.get(&(i, j)).copied()
    }

    pub fn is_weakly_connected(&self) -> bool {
        self.weakly_connected
    }

    /// Number of edges incident to each node, ignoring orientation.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }
}

/// One measurement per edge, in edge order.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub b: Vector,
    pub truth: Option<Vector>,
    pub sigma: f64,
}

impl MeasurementSet {
    pub fn new(g: &OrientedGraph, b: Vector) -> Result<Self> {
        if b.len() != g.edge_count() {
            return Err(Error::dims("measurements", g.edge_count(), b.len()));
        }
        if !b.is_finite() {
            return Err(Error::NonFinite("measurements"));
        }
        Ok(MeasurementSet {
            b,
            truth: None,
            sigma: 0.0,
        })
    }
}

/// The `|E| × n` incidence matrix: `+1` at the tail, `-1` at the head.
pub fn incidence_matrix(g: &OrientedGraph) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(g.edge_count(), g.n);
    for (e, &(i, j)) in g.edges.iter().enumerate() {
        a[(e, i)] = 1.0;
        a[(e, j)] = -1.0;
    }
    a
}

/// `L = AᵀA`, built directly from the edge list.
pub fn laplacian(g: &OrientedGraph) -> DenseMatrix {
    let mut l = DenseMatrix::zeros(g.n, g.n);
    for &(i, j) in &g.edges {
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
    }
    l
}

/// `Aᵀ b`.
pub fn incidence_transpose_times(g: &OrientedGraph, b: &[f64]) -> Vector {
    let mut out = Vector::zeros(g.n);
    for (&(i, j), &be) in g.edges.iter().zip(b) {
        out[i] += be;
        out[j] -= be;
    }
    out
}

/// `b = A s + η` with i.i.d. Gaussian noise of standard deviation `sigma`.
pub fn synth_measurements(
    g: &OrientedGraph,
    s: &[f64],
    sigma: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            value: sigma,
            reason: "must be finite and nonnegative",
        });
    }
    if s.len() != g.n {
        return Err(Error::dims("true positions", g.n, s.len()));
    }
    let mut rng = engine::stream(seed, "noise", 0);
    let b = g
        .edges
        .iter()
        .map(|&(i, j)| {
            let z: f64 = rng.sample(StandardNormal);
            s[i] - s[j] + sigma * z
        })
        .collect();
    Ok(MeasurementSet {
        b,
        truth: Some(Vector::from(s)),
        sigma,
    })
}

/// The zero-mean minimum-norm least-squares estimate `L† Aᵀ b`.
pub fn ls_oracle(g: &OrientedGraph, meas: &MeasurementSet) -> Result<Vector> {
    if meas.b.len() != g.edge_count() {
        return Err(Error::dims("measurements", g.edge_count(), meas.b.len()));
    }
    laplacian_pseudo_solve(&laplacian(g), &incidence_transpose_times(g, &meas.b))
}

/// `Ω = I - 11ᵀ/n`.
pub fn centering(n: usize) -> DenseMatrix {
    let inv = 1.0 / n as f64;
    DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv })
}

/// The gradient iteration as an affine system: `P = (I - τL)Ω`, `u = τAᵀb`.
pub fn gradient_system(g: &OrientedGraph, meas: &MeasurementSet, tau: f64) -> Result<AffineSystem> {
    if meas.b.len() != g.edge_count() {
        return Err(Error::dims("measurements", g.edge_count(), meas.b.len()));
    }
    let n = g.n;
    let p = DenseMatrix::identity(n)
        .sub(&laplacian(g).scale(tau))
        .matmul(&centering(n));
    let u = incidence_transpose_times(g, &meas.b).scale(tau);
    AffineSystem::new(p, u)
}

/// Gradient descent from `x(0) = 0`. Step sizes `τ ≥ 1/d_max` are refused
/// unless `allow_large_tau` is set.
pub fn grad_descent(
    g: &OrientedGraph,
    meas: &MeasurementSet,
    tau: f64,
    steps: usize,
    allow_large_tau: bool,
) -> Result<SyncTrajectory> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tau",
            value: tau,
            reason: "must be positive",
        });
    }
    let limit = 1.0 / g.max_degree().max(1) as f64;
    if tau >= limit && !allow_large_tau {
        return Err(Error::TauTooLarge { tau, limit });
    }
    let sys = gradient_system(g, meas, tau)?;
    affine::iterate_sync(&sys, &Vector::zeros(g.n), steps)
}

/// Per-node gossip state `(x_i, κ_i, x̃_i)`.
#[derive(Debug, Clone)]
pub struct LocalizationGossip {
    x: Vector,
    kappa: Vec<u64>,
    x_tilde: Vector,
    gamma: f64,
}

impl LocalizationGossip {
    /// All-zero initial state.
    pub fn new(n: usize, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(LocalizationGossip {
            x: Vector::zeros(n),
            kappa: vec![0; n],
            x_tilde: Vector::zeros(n),
            gamma,
        })
    }

    pub fn step(&mut self, g: &OrientedGraph, edge: (usize, usize), b_ij: f64) -> Result<()> {
        if g.edge_index(edge.0, edge.1).is_none() {
            return Err(Error::EdgeNotInGraph(edge.0, edge.1));
        }
        if g.n != self.x.len() {
            return Err(Error::dims("gossip state", g.n, self.x.len()));
        }
        self.update_pair(edge.0, edge.1, b_ij);
        Ok(())
    }

    #[inline]
    fn update_pair(&mut self, i: usize, j: usize, b: f64) {
        let g = self.gamma;
        let (xi, xj) = (self.x[i], self.x[j]);
        let new_i = (1.0 - g) * xi + g * xj + g * b;
        let new_j = (1.0 - g) * xj + g * xi - g * b;
        self.x[i] = new_i;
        self.x[j] = new_j;
        for (node, value) in [(i, new_i), (j, new_j)] {
            let old = self.kappa[node];
            let new = old + 1;
            self.kappa[node] = new;
            self.x_tilde[node] = (old as f64 * self.x_tilde[node] + value) / new as f64;
        }
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn kappa(&self) -> &[u64] {
        &self.kappa
    }

    /// Time-averaged estimates; zero for nodes that never updated.
    pub fn x_tilde(&self) -> &Vector {
        &self.x_tilde
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must lie in (0, 1)",
        })
    }
}

/// The explicit per-edge kernels `P_e = (I - γ d dᵀ)Ω`, `u_e = γ b_e d` with
/// `d = e_i - e_j`, each with probability `1/|E|`.
pub fn kernel_distribution(
    g: &OrientedGraph,
    meas: &MeasurementSet,
    gamma: f64,
) -> Result<KernelDistribution> {
    check_gamma(gamma)?;
    if meas.b.len() != g.edge_count() {
        return Err(Error::dims("measurements", g.edge_count(), meas.b.len()));
    }
    let n = g.n;
    let omega = centering(n);
    let kernels = g
        .edges
        .iter()
        .zip(meas.b.iter())
        .map(|(&(i, j), &b)| {
            let mut d = Vector::zeros(n);
            d[i] = 1.0;
            d[j] = -1.0;
            let q = DenseMatrix::identity(n).sub(&DenseMatrix::outer(&d, &d).scale(gamma));
            Kernel::new(q.matmul(&omega), d.scale(gamma * b))
        })
        .collect::<Result<Vec<_>>>()?;
    KernelDistribution::uniform(kernels)
}

/// The synchronous system the gossip averages to, with `α = 1` and
/// `τ = γ/|E|`.
pub fn expected_system(g: &OrientedGraph, meas: &MeasurementSet, gamma: f64) -> Result<AffineSystem> {
    gradient_system(g, meas, gamma / g.edge_count() as f64)
}

#[derive(Debug, Clone)]
pub struct LocalizationSample {
    pub step: u64,
    pub x: Vector,
    pub kappa: Vec<u64>,
    pub x_tilde: Vector,
    /// `‖x - x̂‖∞`
    pub error_x: f64,
    /// `‖x̃ - x̂‖∞`
    pub error_x_tilde: f64,
}

/// A pair update: after global step `step`, nodes `i` and `j` hold `x_i`, `x_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateEvent {
    pub step: u64,
    pub i: usize,
    pub j: usize,
    pub x_i: f64,
    pub x_j: f64,
}

#[derive(Debug, Clone)]
pub struct LocalizationRun {
    pub state: LocalizationGossip,
    pub oracle: Vector,
    pub log: Vec<LocalizationSample>,
    pub events: Vec<UpdateEvent>,
}

impl LocalizationRun {
    pub fn x_tilde(&self) -> &Vector {
        self.state.x_tilde()
    }
}

/// Gossip with i.i.d. uniform edge selection.
pub fn run_gossip_localization(
    g: &OrientedGraph,
    meas: &MeasurementSet,
    gamma: f64,
    steps: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<LocalizationRun> {
    let edges = g.edge_count();
    run_gossip_localization_with(g, meas, gamma, steps, seed, opts, |rng| {
        rng.random_range(0..edges)
    })
}

/// Gossip with a caller-supplied edge sampler returning edge indices.
pub fn run_gossip_localization_with(
    g: &OrientedGraph,
    meas: &MeasurementSet,
    gamma: f64,
    steps: u64,
    seed: u64,
    opts: RunOptions,
    mut sample_edge: impl FnMut(&mut SimRng) -> usize,
) -> Result<LocalizationRun> {
    let oracle = ls_oracle(g, meas)?;
    let mut state = LocalizationGossip::new(g.n, gamma)?;
    let mut rng = engine::stream(seed, "edges", opts.replication);
    let mut log = Vec::new();
    let mut events = Vec::new();
    let record = |k: u64, state: &LocalizationGossip, log: &mut Vec<LocalizationSample>| {
        log.push(LocalizationSample {
            step: k,
            x: state.x.clone(),
            kappa: state.kappa.clone(),
            x_tilde: state.x_tilde.clone(),
            error_x: state.x.max_abs_diff(&oracle),
            error_x_tilde: state.x_tilde.max_abs_diff(&oracle),
        })
    };
    record(0, &state, &mut log);
    for k in 1..=steps {
        let e = sample_edge(&mut rng);
        let (i, j) = *g
            .edges
            .get(e)
            .ok_or(Error::InvalidParameter {
                name: "sampled edge index",
                value: e as f64,
                reason: "out of range",
            })?;
        state.update_pair(i, j, meas.b[e]);
        if opts.record_events {
            events.push(UpdateEvent {
                step: k,
                i,
                j,
                x_i: state.x[i],
                x_j: state.x[j],
            });
        }
        if k != 0 && should_log(k, steps, opts.thin) {
            record(k, &state, &mut log);
        }
    }
    Ok(LocalizationRun {
        state,
        oracle,
        log,
        events,
    })
}
