//! PageRank: the damped power iteration and its edge-gossip counterpart.
//!
//! With the column-stochastic link matrix `A` and damping `m`, PageRank is
//! the fixed point of `x ↦ (1-m) A x + (m/n) 1`. The gossip version activates
//! one link `(i, j)` per step, moving a `1/n_i` share of `x_i` to `x_j` and
//! leaking a fraction `r` of every entry towards uniform. Its running average
//! converges to PageRank when `r = m / (m - |E| m + |E|)`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::affine::{self, AffineSystem, SyncTrajectory};
use crate::engine::{self, should_log, CesaroAverager, Kernel, KernelDistribution, RunOptions};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, NumericPolicy, Vector};

/// Directed link graph: `(i, j)` means page `i` links to page `j`.
#[derive(Debug, Clone)]
pub struct WebGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    out_degree: Vec<usize>,
    index: HashMap<(usize, usize), usize>,
}

impl WebGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGraph(format!("need at least 3 nodes, got {n}")));
        }
        let mut out_degree = vec![0; n];
        let mut index = HashMap::with_capacity(edges.len());
        for (e, &(i, j)) in edges.iter().enumerate() {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) refers to a node outside 0..{n}"
                )));
            }
            if index.insert((i, j), e).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
            out_degree[i] += 1;
        }
        if let Some(dangling) = out_degree.iter().position(|&d| d == 0) {
            return Err(Error::DanglingNode(dangling));
        }
        Ok(WebGraph {
            n,
            edges,
            out_degree,
            index,
        })
    }

    /// The directed cycle `0 → 1 → … → n-1 → 0`.
    pub fn cycle(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect())
    }

    /// A random strongly connected graph: a Hamiltonian cycle through a random
    /// permutation, plus up to `max_extra` random out-links per node.
    pub fn random_strongly_connected(n: usize, max_extra: usize, seed: u64) -> Result<Self> {
        let mut rng = engine::stream(seed, "web-graph", 0);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut edges: Vec<(usize, usize)> =
            (0..n).map(|k| (order[k], order[(k + 1) % n])).collect();
        let mut present: std::collections::HashSet<(usize, usize)> = edges.iter().copied().collect();
        for i in 0..n {
            let extra = rng.random_range(0..=max_extra.min(n.saturating_sub(2)));
            let mut added = 0;
            while added < extra {
                let j = rng.random_range(0..n);
                if j != i && present.insert((i, j)) {
                    edges.push((i, j));
                    added += 1;
                }
            }
        }
        Self::new(n, edges)
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

    pub fn out_degree(&self) -> &[usize] {
        &self.out_degree
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.index.contains_key(&(i, j))
    }

    pub fn is_strongly_connected(&self) -> bool {
        let mut succ = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            succ[i].push(j);
        }
        crate::reach::strongly_connected(&succ)
    }
}

/// Column-stochastic link matrix: `A[j][i] = 1/n_i` for every link `i → j`.
pub fn link_matrix(g: &WebGraph) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(g.n, g.n);
    for &(i, j) in &g.edges {
        a[(j, i)] += 1.0 / g.out_degree[i] as f64;
    }
    a
}

fn check_damping(m: f64) -> Result<()> {
    if m > 0.0 && m < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "m",
            value: m,
            reason: "must lie in (0, 1)",
        })
    }
}

/// `P = (1-m) A`, `u = (m/n) 1`.
pub fn pagerank_system(g: &WebGraph, m: f64) -> Result<AffineSystem> {
    check_damping(m)?;
    let p = link_matrix(g).scale(1.0 - m);
    AffineSystem::new(p, Vector::filled(g.n, m / g.n as f64))
}

/// `M = (1-m) A + (m/n) 11ᵀ`.
pub fn google_matrix(g: &WebGraph, m: f64) -> Result<DenseMatrix> {
    check_damping(m)?;
    let n = g.n;
    let teleport = m / n as f64;
    Ok(link_matrix(g).scale(1.0 - m).add(&DenseMatrix::from_fn(n, n, |_, _| teleport)))
}

/// PageRank from the linear system `(I - (1-m)A) π = (m/n) 1`.
pub fn pagerank_exact(g: &WebGraph, m: f64) -> Result<Vector> {
    affine::fixed_point(&pagerank_system(g, m)?, false)
}

pub fn check_stochastic(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::dims("stochastic vector", n, x.len()));
    }
    let tol = NumericPolicy::default().stochastic_tol;
    if let Some(v) = x.iter().find(|v| !v.is_finite() || **v < -tol) {
        return Err(Error::NotStochastic(format!("entry {v} is negative")));
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::NotStochastic(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// The damped power method from a stochastic `x0`.
pub fn power_method(g: &WebGraph, m: f64, steps: usize, x0: &[f64]) -> Result<SyncTrajectory> {
    check_stochastic(x0, g.n)?;
    affine::iterate_sync(&pagerank_system(g, m)?, x0, steps)
}

/// The gossip step parameter `r` and the matching laziness `α`, `r = α m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParameters {
    pub r: f64,
    pub alpha: f64,
}

pub fn r_from_m(m: f64, edge_count: usize) -> Result<StepParameters> {
    check_damping(m)?;
    if edge_count == 0 {
        return Err(Error::InvalidParameter {
            name: "edge_count",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let e = edge_count as f64;
    let denom = m - e * m + e;
    Ok(StepParameters {
        r: m / denom,
        alpha: 1.0 / denom,
    })
}

/// Gossip state: raw vector, running average and global step counter.
#[derive(Debug, Clone)]
pub struct PageRankGossip {
    x: Vector,
    average: CesaroAverager,
    k: u64,
    m: f64,
    r: f64,
}

impl PageRankGossip {
    /// Starts from the stochastic vector `x0`; the average includes `x0`.
    pub fn new(g: &WebGraph, m: f64, x0: &[f64]) -> Result<Self> {
        check_stochastic(x0, g.n)?;
        let StepParameters { r, .. } = r_from_m(m, g.edge_count())?;
        Self::with_r(x0, m, r)
    }

    /// Starts with an explicit `r ∈ (0, 1)`.
    pub fn with_r(x0: &[f64], m: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                value: r,
                reason: "must lie in (0, 1)",
            });
        }
        let mut average = CesaroAverager::new(x0.len());
        average.update(x0);
        Ok(PageRankGossip {
            x: Vector::from(x0),
            average,
            k: 0,
            m,
            r,
        })
    }

    pub fn step(&mut self, g: &WebGraph, edge: (usize, usize)) -> Result<()> {
        if !g.contains(edge.0, edge.1) {
            return Err(Error::EdgeNotInGraph(edge.0, edge.1));
        }
        if g.n != self.x.len() {
            return Err(Error::dims("gossip state", g.n, self.x.len()));
        }
        self.update(edge.0, edge.1, g.out_degree[edge.0]);
        Ok(())
    }

    /// Applies the link `i → j`; returns `1ᵀx` after the update.
    #[inline]
    fn update(&mut self, i: usize, j: usize, out_degree_i: usize) -> f64 {
        let moved = self.x[i] / out_degree_i as f64;
        self.x[i] -= moved;
        self.x[j] += moved;
        let keep = 1.0 - self.r;
        let leak = self.r / self.x.len() as f64;
        let mut sum = 0.0;
        for v in self.x.iter_mut() {
            *v = keep * *v + leak;
            sum += *v;
        }
        self.k += 1;
        self.average.update(&self.x);
        sum
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    /// Running mean of `x(0), …, x(k)`.
    pub fn x_bar(&self) -> &Vector {
        self.average.mean()
    }

    pub fn steps(&self) -> u64 {
        self.k
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn m(&self) -> f64 {
        self.m
    }
}

/// The explicit per-link kernels `P_e = (1-r) A_e`, `u_e = (r/n) 1` with
/// `A_e = I + (e_j - e_i) e_iᵀ / n_i`, each with probability `1/|E|`.
pub fn kernel_distribution(g: &WebGraph, m: f64) -> Result<KernelDistribution> {
    let StepParameters { r, .. } = r_from_m(m, g.edge_count())?;
    let n = g.n;
    let kernels = g
        .edges
        .iter()
        .map(|&(i, j)| {
            let mut a = DenseMatrix::identity(n);
            let share = 1.0 / g.out_degree[i] as f64;
            a[(j, i)] += share;
            a[(i, i)] -= share;
            Kernel::new(a.scale(1.0 - r), Vector::filled(n, r / n as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    KernelDistribution::uniform(kernels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankSample {
    pub step: u64,
    /// `‖x̄ - π‖₁`
    pub l1_error_vs_pi: f64,
    /// Smallest entry of the raw vector `x`.
    pub min_entry: f64,
    /// `1ᵀx`
    pub sum_entries: f64,
}

#[derive(Debug, Clone)]
pub struct PageRankRun {
    pub state: PageRankGossip,
    pub pi: Vector,
    pub log: Vec<PageRankSample>,
    /// `max_k |1ᵀx(k) - 1|` over every step.
    pub max_sum_drift: f64,
    /// `min_k min_i x_i(k)` over every step.
    pub min_entry_seen: f64,
    /// Full raw vectors every `dump_every` steps, when requested.
    pub dumps: Vec<(u64, Vector)>,
}

impl PageRankRun {
    pub fn x_bar(&self) -> &Vector {
        self.state.x_bar()
    }
}

/// Edge gossip with i.i.d. uniform link selection. `dump_every` optionally
/// stores the raw vector periodically.
pub fn run_gossip_pagerank(
    g: &WebGraph,
    m: f64,
    steps: u64,
    seed: u64,
    x0: &[f64],
    opts: RunOptions,
    dump_every: Option<u64>,
) -> Result<PageRankRun> {
    let pi = pagerank_exact(g, m)?;
    let mut state = PageRankGossip::new(g, m, x0)?;
    let mut rng = engine::stream(seed, "edges", opts.replication);
    let sample = |state: &PageRankGossip, sum: f64| PageRankSample {
        step: state.k,
        l1_error_vs_pi: state.x_bar().sub(&pi).norm_1(),
        min_entry: state.x.min(),
        sum_entries: sum,
    };
    let x0_sum: f64 = x0.iter().sum();
    let mut log = vec![sample(&state, x0_sum)];
    let mut dumps = Vec::new();
    if dump_every.is_some() {
        dumps.push((0, state.x.clone()));
    }
    let mut max_sum_drift = (x0_sum - 1.0).abs();
    let mut min_entry_seen = state.x.min();
    let edge_count = g.edge_count();
    for k in 1..=steps {
        let (i, j) = g.edges[rng.random_range(0..edge_count)];
        let sum = state.update(i, j, g.out_degree[i]);
        max_sum_drift = max_sum_drift.max((sum - 1.0).abs());
        min_entry_seen = min_entry_seen.min(state.x[i]);
        if should_log(k, steps, opts.thin) {
            min_entry_seen = min_entry_seen.min(state.x.min());
            log.push(sample(&state, sum));
        }
        if let Some(d) = dump_every {
            if d > 0 && k % d == 0 {
                dumps.push((k, state.x.clone()));
            }
        }
    }
    Ok(PageRankRun {
        state,
        pi,
        log,
        max_sum_drift,
        min_entry_seen,
        dumps,
    })
}
