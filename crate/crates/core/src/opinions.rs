//! Friedkin–Johnsen opinion dynamics and their pairwise-meeting version.
//!
//! Synchronously, `x(k+1) = ΛW x(k) + (I - Λ) v` with `Λ = I - diag(W)`. In
//! the gossip version a uniformly sampled edge `(i, j)` lets agent `i` move to
//! `h_i((1-Γ_ij) x_i + Γ_ij x_j) + (1-h_i) v_i`; the coefficients `h`, `Γ` are
//! chosen so that the expected update is the lazy synchronous one.

use rand::Rng;

use crate::affine::{self, AffineSystem};
use crate::engine::{self, should_log, CesaroAverager, Kernel, KernelDistribution, RunOptions};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, NumericPolicy, Vector};
use crate::reach;

/// Weights below this count as "not stubborn" in the reachability check.
pub const STUBBORN_THRESHOLD: f64 = 1e-15;

/// Influence matrix `W`, prejudices `v`, and the derived `Λ` and edge set.
///
/// The edge set is the support of `W` plus a self-loop at every node.
#[derive(Debug, Clone)]
pub struct InfluenceNetwork {
    w: DenseMatrix,
    v: Vector,
    lambda: Vector,
    edges: Vec<(usize, usize)>,
    successors: Vec<Vec<usize>>,
}

pub fn build_network(w: DenseMatrix, v: Vector) -> Result<InfluenceNetwork> {
    let n = w.require_square()?;
    if v.len() != n {
        return Err(Error::dims("prejudice vector", n, v.len()));
    }
    if !v.is_finite() {
        return Err(Error::NonFinite("prejudice vector"));
    }
    let tol = NumericPolicy::default().stochastic_tol;
    let mut edges = Vec::new();
    let mut successors = vec![Vec::new(); n];
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let value = w[(i, j)];
            if value < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j, value });
            }
            sum += value;
            if i == j || value > 0.0 {
                edges.push((i, j));
                successors[i].push(j);
            }
        }
        if (sum - 1.0).abs() > tol {
            return Err(Error::NotRowStochastic { row: i, sum });
        }
    }
    let lambda = (0..n).map(|i| 1.0 - w[(i, i)]).collect();
    Ok(InfluenceNetwork {
        w,
        v,
        lambda,
        edges,
        successors,
    })
}

impl InfluenceNetwork {
    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn prejudice(&self) -> &Vector {
        &self.v
    }

    /// Diagonal of `Λ`.
    pub fn lambda(&self) -> &Vector {
        &self.lambda
    }

    pub fn lambda_matrix(&self) -> DenseMatrix {
        DenseMatrix::diagonal(&self.lambda)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Out-degree `d_i`, self-loop included.
    pub fn degree(&self, i: usize) -> usize {
        self.successors[i].len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.dim() && self.successors[i].binary_search(&j).is_ok()
    }

    /// Random network with every `W_ii > 0`: each agent keeps a random self
    /// weight and spreads the rest over 1 to `max_neighbors` random others.
    /// Prejudices are uniform on `[-1, 1]`.
    pub fn random(n: usize, max_neighbors: usize, seed: u64) -> Result<Self> {
        if n < 2 || max_neighbors == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                reason: "need at least 2 agents and 1 neighbour each",
            });
        }
        let mut rng = engine::stream(seed, "influence-network", 0);
        let mut w = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let k = rng.random_range(1..=max_neighbors.min(n - 1));
            let mut chosen = Vec::with_capacity(k);
            while chosen.len() < k {
                let j = rng.random_range(0..n);
                if j != i && !chosen.contains(&j) {
                    chosen.push(j);
                }
            }
            let self_weight: f64 = rng.random_range(0.1..0.9);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            for (&j, r) in chosen.iter().zip(&raw) {
                w[(i, j)] = (1.0 - self_weight) * r / total;
            }
            // Put the rounding residue on the diagonal so the row sums to 1.
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
            w[(i, i)] = 1.0 - off;
        }
        let v = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        build_network(w, v)
    }
}

/// True iff every node reaches, in the graph of `W`, a node with `W_ii > 0`.
pub fn stubborn_reachability_check(net: &InfluenceNetwork) -> bool {
    let stubborn: Vec<bool> = (0..net.dim())
        .map(|i| net.w[(i, i)] > STUBBORN_THRESHOLD)
        .collect();
    reach::can_reach_targets(&net.successors, &stubborn)
        .into_iter()
        .all(|r| r)
}

/// `P = ΛW`, `u = (I - Λ) v`, adapted to the network graph.
pub fn fj_system(net: &InfluenceNetwork) -> Result<AffineSystem> {
    let p = net.lambda_matrix().matmul(&net.w);
    let u = (0..net.dim())
        .map(|i| (1.0 - net.lambda[i]) * net.v[i])
        .collect();
    AffineSystem::new(p, u)?.with_adjacency(net.successors.clone())
}

/// `x' = (I - ΛW)^{-1} (I - Λ) v`.
pub fn fj_fixed_point(net: &InfluenceNetwork) -> Result<Vector> {
    if !stubborn_reachability_check(net) {
        return Err(Error::AssumptionViolated(
            "some agent has no path to a stubborn agent".into(),
        ));
    }
    affine::fixed_point(&fj_system(net)?, true)
}

pub fn fj_sync_step(net: &InfluenceNetwork, x: &[f64]) -> Result<Vector> {
    if x.len() != net.dim() {
        return Err(Error::dims("opinion state", net.dim(), x.len()));
    }
    let wx = net.w.mul_vec(x);
    Ok((0..net.dim())
        .map(|i| net.lambda[i] * wx[i] + (1.0 - net.lambda[i]) * net.v[i])
        .collect())
}

/// Per-agent weights `h` and meeting weights `Γ`.
#[derive(Debug, Clone)]
pub struct GossipCoefficients {
    pub h: Vector,
    pub gamma: DenseMatrix,
}

pub fn gossip_coefficients(net: &InfluenceNetwork) -> Result<GossipCoefficients> {
    let n = net.dim();
    let mut h = Vector::zeros(n);
    let mut gamma = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let d = net.degree(i);
        if d == 1 {
            gamma[(i, i)] = 1.0;
            continue;
        }
        let d = d as f64;
        let lambda = net.lambda[i];
        let w_ii = net.w[(i, i)];
        h[i] = 1.0 - (1.0 - lambda) / d;
        for &j in &net.successors[i] {
            gamma[(i, j)] = if i == j {
                // Same value as (d(1-h) + h - (1 - λW_ii)) / h, in a form
                // that cannot go negative through cancellation.
                w_ii * (2.0 - 1.0 / d - w_ii) / h[i]
            } else {
                lambda * net.w[(i, j)] / h[i]
            };
        }
    }
    let tol = NumericPolicy::default().stochastic_tol;
    for i in 0..n {
        if !(0.0..=1.0).contains(&h[i]) {
            return Err(Error::InvariantViolation(format!("h[{i}] = {} outside [0, 1]", h[i])));
        }
        let row = gamma.row(i);
        if let Some(j) = row.iter().position(|&g| g < 0.0 || !g.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "Γ[{i}][{j}] = {}",
                row[j]
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvariantViolation(format!("Γ row {i} sums to {sum}")));
        }
    }
    Ok(GossipCoefficients { h, gamma })
}

/// Beliefs, their running mean and the step counter. Starts at `x(0) = v`.
#[derive(Debug, Clone)]
pub struct OpinionGossip {
    x: Vector,
    average: CesaroAverager,
    k: u64,
}

impl OpinionGossip {
    pub fn new(net: &InfluenceNetwork) -> Self {
        let mut average = CesaroAverager::new(net.dim());
        average.update(&net.v);
        OpinionGossip {
            x: net.v.clone(),
            average,
            k: 0,
        }
    }

    /// Agent `i` meets `j` (possibly `j = i`).
    pub fn step(
        &mut self,
        net: &InfluenceNetwork,
        coeffs: &GossipCoefficients,
        edge: (usize, usize),
    ) -> Result<()> {
        if !net.contains(edge.0, edge.1) {
            return Err(Error::EdgeNotInGraph(edge.0, edge.1));
        }
        self.update(net, coeffs, edge.0, edge.1);
        Ok(())
    }

    #[inline]
    fn update(&mut self, net: &InfluenceNetwork, coeffs: &GossipCoefficients, i: usize, j: usize) {
        let h = coeffs.h[i];
        let g = coeffs.gamma[(i, j)];
        self.x[i] = h * ((1.0 - g) * self.x[i] + g * self.x[j]) + (1.0 - h) * net.v[i];
        self.k += 1;
        self.average.update(&self.x);
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
}

/// `P^{ij} = (I - e_i e_iᵀ(I-H))(I + Γ_ij (e_i e_jᵀ - e_i e_iᵀ))`,
/// `u^{ij} = e_i e_iᵀ (I-H) v`, uniform over the edges.
pub fn kernel_distribution(
    net: &InfluenceNetwork,
    coeffs: &GossipCoefficients,
) -> Result<KernelDistribution> {
    let n = net.dim();
    let one_minus_h: Vec<f64> = coeffs.h.iter().map(|h| 1.0 - h).collect();
    let kernels = net
        .edges
        .iter()
        .map(|&(i, j)| {
            let mut anchor = DenseMatrix::identity(n);
            anchor[(i, i)] -= one_minus_h[i];
            let g = coeffs.gamma[(i, j)];
            let mut mix = DenseMatrix::identity(n);
            mix[(i, j)] += g;
            mix[(i, i)] -= g;
            let mut u = Vector::zeros(n);
            u[i] = one_minus_h[i] * net.v[i];
            Kernel::new(anchor.matmul(&mix), u)
        })
        .collect::<Result<Vec<_>>>()?;
    KernelDistribution::uniform(kernels)
}

#[derive(Debug, Clone)]
pub struct OpinionSample {
    pub step: u64,
    pub x: Vector,
    pub x_bar: Vector,
    /// `‖x̄ - x'‖∞`
    pub error_x_bar: f64,
}

#[derive(Debug, Clone)]
pub struct OpinionRun {
    pub state: OpinionGossip,
    pub oracle: Vector,
    pub log: Vec<OpinionSample>,
    /// Every belief stayed within `[min v, max v]` at every step.
    pub bounded: bool,
}

impl OpinionRun {
    pub fn x_bar(&self) -> &Vector {
        self.state.x_bar()
    }
}

pub fn run_gossip_opinions(
    net: &InfluenceNetwork,
    steps: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<OpinionRun> {
    let oracle = fj_fixed_point(net)?;
    let coeffs = gossip_coefficients(net)?;
    let mut state = OpinionGossip::new(net);
    let mut rng = engine::stream(seed, "edges", opts.replication);
    let sample = |state: &OpinionGossip| OpinionSample {
        step: state.k,
        x: state.x.clone(),
        x_bar: state.x_bar().clone(),
        error_x_bar: state.x_bar().max_abs_diff(&oracle),
    };
    let (lo, hi) = (net.v.min(), net.v.max());
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    let mut bounded = true;
    let mut log = vec![sample(&state)];
    let edge_count = net.edge_count();
    for k in 1..=steps {
        let (i, j) = net.edges[rng.random_range(0..edge_count)];
        state.update(net, &coeffs, i, j);
        let xi = state.x[i];
        bounded &= xi >= lo - slack && xi <= hi + slack;
        if should_log(k, steps, opts.thin) {
            log.push(sample(&state));
        }
    }
    Ok(OpinionRun {
        state,
        oracle,
        log,
        bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::verify_expectation;

    fn three_node() -> InfluenceNetwork {
        let w = DenseMatrix::from_rows(&[
            [0.5, 0.5, 0.0],
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [0.0, 0.5, 0.5],
        ])
        .unwrap();
        build_network(w, Vector::from([1.0, 0.0, -1.0])).unwrap()
    }

    #[test]
    fn build_network_examples() {
        let net = build_network(DenseMatrix::identity(3), Vector::from([1.0, 2.0, 3.0])).unwrap();
        assert_eq!(net.lambda().as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(net.edge_count(), 3);

        let net = three_node();
        let expected = [0.5, 2.0 / 3.0, 0.5];
        assert!(net.lambda().max_abs_diff(&Vector::from(expected)) < 1e-15);
        assert_eq!(net.edge_count(), 7);
        assert_eq!((net.degree(0), net.degree(1), net.degree(2)), (2, 3, 2));

        let short = DenseMatrix::from_rows(&[[0.9, 0.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            build_network(short, Vector::zeros(2)),
            Err(Error::NotRowStochastic { row: 0, .. })
        ));
        let negative = DenseMatrix::from_rows(&[[1.2, -0.2], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            build_network(negative, Vector::zeros(2)),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn zero_diagonal_still_has_structural_self_loop() {
        let cycle = DenseMatrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
            .unwrap();
        let net = build_network(cycle, Vector::zeros(3)).unwrap();
        assert!(net.contains(1, 1));
        assert_eq!(net.degree(1), 2);
    }

    #[test]
    fn reachability_examples() {
        assert!(stubborn_reachability_check(&three_node()));
        let cycle = DenseMatrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
            .unwrap();
        let net = build_network(cycle, Vector::from([1.0, 2.0, 3.0])).unwrap();
        assert!(!stubborn_reachability_check(&net));
        assert!(matches!(fj_fixed_point(&net), Err(Error::AssumptionViolated(_))));
        assert!(matches!(
            run_gossip_opinions(&net, 10, 0, RunOptions::default()),
            Err(Error::AssumptionViolated(_))
        ));

        // Only the centre is stubborn; leaves point at the centre.
        let star = DenseMatrix::from_rows(&[
            [0.4, 0.2, 0.2, 0.2],
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(stubborn_reachability_check(&build_network(star, Vector::zeros(4)).unwrap()));
    }

    #[test]
    fn fixed_point_examples() {
        let w = three_node().w().clone();
        let net = build_network(w, Vector::filled(3, 0.7)).unwrap();
        assert!(fj_fixed_point(&net).unwrap().max_abs_diff(&Vector::filled(3, 0.7)) < 1e-14);

        let v = Vector::from([1.0, -2.0, 0.5]);
        let net = build_network(DenseMatrix::identity(3), v.clone()).unwrap();
        assert_eq!(fj_fixed_point(&net).unwrap(), v);

        let net = three_node();
        let exact = fj_fixed_point(&net).unwrap();
        let mut x = net.prejudice().clone();
        for _ in 0..10_000 {
            x = fj_sync_step(&net, &x).unwrap();
        }
        assert!(x.max_abs_diff(&exact) < 1e-12);
        assert!(fj_sync_step(&net, &exact).unwrap().max_abs_diff(&exact) < 1e-14);
    }

    #[test]
    fn sync_step_by_hand() {
        let net = three_node();
        // ΛWv = diag(1/2, 2/3, 1/2) (1/2, 0, -1/2) = (1/4, 0, -1/4);
        // (I-Λ)v = (1/2, 0, -1/2).
        let x = fj_sync_step(&net, &[1.0, 0.0, -1.0]).unwrap();
        assert!(x.max_abs_diff(&Vector::from([0.75, 0.0, -0.75])) < 1e-15);

        let sys = fj_system(&net).unwrap();
        assert!(sys.step(&[1.0, 0.0, -1.0]).max_abs_diff(&x) < 1e-15);

        let stubborn = build_network(DenseMatrix::identity(3), Vector::from([4.0, 5.0, 6.0])).unwrap();
        assert_eq!(fj_sync_step(&stubborn, &[0.0, 0.0, 0.0]).unwrap().as_slice(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn coefficient_examples() {
        let net = three_node();
        let c = gossip_coefficients(&net).unwrap();
        assert!((c.h[0] - 0.75).abs() < 1e-15);
        assert!((c.gamma[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.gamma[(0, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.gamma[(0, 2)], 0.0);

        // The closed form agrees with the unsimplified expression.
        for i in 0..3 {
            let d = net.degree(i) as f64;
            let (h, l, w) = (c.h[i], net.lambda()[i], net.w()[(i, i)]);
            let expanded = (d * (1.0 - h) + h - (1.0 - l * w)) / h;
            assert!((expanded - c.gamma[(i, i)]).abs() < 1e-14);
        }

        let isolated = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])
            .unwrap();
        let net = build_network(isolated, Vector::zeros(3)).unwrap();
        let c = gossip_coefficients(&net).unwrap();
        assert_eq!(c.h[0], 0.0);
        assert_eq!(c.gamma.row(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn gossip_step_examples() {
        // h_1 = 0.75, Γ_12 = 1/3, x = (0, 1, ·), v_1 = 1.
        let w = DenseMatrix::from_rows(&[[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]).unwrap();
        let net = build_network(w, Vector::from([1.0, 0.0, 0.0])).unwrap();
        let c = gossip_coefficients(&net).unwrap();
        let mut s = OpinionGossip::new(&net);
        s.x = Vector::from([0.0, 1.0, 0.3]);
        s.step(&net, &c, (0, 1)).unwrap();
        assert!((s.x()[0] - 0.5).abs() < 1e-15);
        assert_eq!(&s.x()[1..], &[1.0, 0.3]);
        assert!(matches!(s.step(&net, &c, (0, 2)), Err(Error::EdgeNotInGraph(0, 2))));

        let isolated = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])
            .unwrap();
        let net = build_network(isolated, Vector::from([2.0, 0.0, 0.0])).unwrap();
        let c = gossip_coefficients(&net).unwrap();
        let mut s = OpinionGossip::new(&net);
        s.x[0] = -7.0;
        s.step(&net, &c, (0, 0)).unwrap();
        assert_eq!(s.x()[0], 2.0);
    }

    #[test]
    fn zero_gamma_anchors_to_prejudice() {
        // W_01 = 0 forces Γ_01 = 0 even with a structural edge; use a
        // self-loop on an agent with W_ii = 0 instead.
        let w = DenseMatrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]).unwrap();
        let net = build_network(w, Vector::from([1.0, 0.0, 0.0])).unwrap();
        let c = gossip_coefficients(&net).unwrap();
        assert_eq!(c.gamma[(0, 0)], 0.0);
        let mut s = OpinionGossip::new(&net);
        s.x = Vector::from([0.4, 0.9, 0.0]);
        s.step(&net, &c, (0, 0)).unwrap();
        let h = c.h[0];
        assert!((s.x()[0] - (h * 0.4 + (1.0 - h) * 1.0)).abs() < 1e-15);
    }

    #[test]
    fn structured_step_matches_dense_kernel() {
        let net = InfluenceNetwork::random(6, 3, 11).unwrap();
        let c = gossip_coefficients(&net).unwrap();
        let dist = kernel_distribution(&net, &c).unwrap();
        let mut s = OpinionGossip::new(&net);
        let mut dense = net.prejudice().clone();
        for e in [0, 5, 3, 3, 1, 7, 2, 9, 4] {
            let e = e % net.edge_count();
            s.step(&net, &c, net.edges()[e]).unwrap();
            dense = dist.kernels()[e].apply(&dense);
            assert!(dense.max_abs_diff(s.x()) < 1e-15);
        }
    }

    #[test]
    fn exact_kernel_expectation() {
        for net in [three_node(), InfluenceNetwork::random(8, 4, 2).unwrap()] {
            let c = gossip_coefficients(&net).unwrap();
            let dist = kernel_distribution(&net, &c).unwrap();
            let e = net.edge_count() as f64;
            let n = net.dim();
            let (p, u) = dist.expectation();
            let lw = net.lambda_matrix().matmul(net.w());
            let target = DenseMatrix::identity(n).scale(1.0 - 1.0 / e).add(&lw.scale(1.0 / e));
            assert!(p.max_abs_diff(&target) < 1e-13);
            let sys = fj_system(&net).unwrap();
            assert!(u.max_abs_diff(&sys.offset().scale(1.0 / e)) < 1e-13);
            assert!(verify_expectation(&dist, sys.matrix(), sys.offset(), 1.0 / e).unwrap().passed);
        }
    }

    #[test]
    fn trivial_runs() {
        let w = three_node().w().clone();
        let net = build_network(w, Vector::filled(3, -0.25)).unwrap();
        let run = run_gossip_opinions(&net, 1000, 1, RunOptions::default()).unwrap();
        assert!(run.state.x().iter().all(|&x| x == -0.25));
        assert!(run.x_bar().max_abs_diff(&Vector::filled(3, -0.25)) < 1e-15);

        let v = Vector::from([1.0, 0.0, -1.0]);
        let net = build_network(DenseMatrix::identity(3), v.clone()).unwrap();
        let run = run_gossip_opinions(&net, 1000, 1, RunOptions::default()).unwrap();
        assert_eq!(run.state.x(), &v);
        assert!(run.x_bar().max_abs_diff(&v) < 1e-15);
    }

    #[test]
    fn three_node_time_average_converges() {
        let net = three_node();
        let run = run_gossip_opinions(
            &net,
            1_000_000,
            3,
            RunOptions {
                thin: 100_000,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert!(run.bounded);
        assert_eq!(run.log.len(), 11);
        assert!(run.x_bar().max_abs_diff(&run.oracle) <= 1e-2);
        assert_eq!(run.log.last().unwrap().error_x_bar, run.x_bar().max_abs_diff(&run.oracle));
    }
}
