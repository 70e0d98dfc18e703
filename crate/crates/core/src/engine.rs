//! Randomized affine dynamics `x(k+1) = P(k) x(k) + u(k)` driven by i.i.d.
//! draws from a finite kernel family, together with the time-averaging
//! machinery that recovers the synchronous limit.
//!
//! The pieces compose freely:
//!
//! * [`KernelDistribution`] holds the explicit kernels `(P_θ, u_θ)` and their
//!   probabilities. [`verify_expectation`] checks exactly that the mean kernel
//!   is the lazy version `((1-α)I + αP, αu)` of a synchronous system.
//! * [`ForwardProcess`] samples the dynamics, [`BackwardProcess`] composes the
//!   same kernels in reversed order.
//! * [`CesaroAverager`] and [`WeightedAverager`] accumulate time-averages,
//!   the latter over a random subsequence selected by 0/1 weights.
//!
//! Randomness comes from ChaCha8 streams keyed by `(seed, name, index)`; the
//! same key always yields the same draws.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Vector};

pub type SimRng = ChaCha8Rng;

/// Deterministic generator for the named stream `name` of replication `index`.
pub fn stream(seed: u64, name: &str, index: u64) -> SimRng {
    // FNV-1a over the stream label.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes().chain(index.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}

/// Runs `f(0..count)` on the rayon pool and returns results in index order.
pub fn replicate<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Common run options for the gossip drivers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Log every `thin` steps (plus step 0 and the last step). `0` logs only
    /// the endpoints.
    pub thin: u64,
    /// Keep a record of every pair update.
    pub record_events: bool,
    /// Selects an independent random stream for the same seed.
    pub replication: u64,
}

/// Whether step `step` of `steps` is kept under thinning interval `thin`.
pub fn should_log(step: u64, steps: u64, thin: u64) -> bool {
    step == 0 || step == steps || (thin > 0 && step.is_multiple_of(thin))
}

/// One affine map `x ↦ P x + u`.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub matrix: DenseMatrix,
    pub offset: Vector,
}

impl Kernel {
    pub fn new(matrix: DenseMatrix, offset: Vector) -> Result<Self> {
        let n = matrix.require_square()?;
        if offset.len() != n {
            return Err(Error::dims("kernel offset", n, offset.len()));
        }
        Ok(Kernel { matrix, offset })
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vector {
        let mut next = self.matrix.mul_vec(x);
        next.axpy(1.0, &self.offset);
        next
    }
}

/// A finite family of kernels with sampling probabilities.
#[derive(Debug, Clone)]
pub struct KernelDistribution {
    kernels: Vec<Kernel>,
    probs: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl KernelDistribution {
    pub fn new(kernels: Vec<Kernel>, probs: Vec<f64>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::InvalidProbabilities("no kernels".into()));
        }
        if probs.len() != kernels.len() {
            return Err(Error::dims("kernel probabilities", kernels.len(), probs.len()));
        }
        let n = kernels[0].dim();
        if let Some(k) = kernels.iter().find(|k| k.dim() != n) {
            return Err(Error::dims("kernel dimension", n, k.dim()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidProbabilities(
                "entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProbabilities(format!("sum is {total}")));
        }
        let sampler = WeightedIndex::new(&probs)
            .map_err(|e| Error::InvalidProbabilities(e.to_string()))?;
        Ok(KernelDistribution {
            kernels,
            probs,
            sampler,
        })
    }

    pub fn uniform(kernels: Vec<Kernel>) -> Result<Self> {
        let p = 1.0 / kernels.len().max(1) as f64;
        let probs = vec![p; kernels.len()];
        Self::new(kernels, probs)
    }

    pub fn dim(&self) -> usize {
        self.kernels[0].dim()
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample_index(&self, rng: &mut SimRng) -> usize {
        self.sampler.sample(rng)
    }

    /// Exact `(E[P(k)], E[u(k)])`.
    pub fn expectation(&self) -> (DenseMatrix, Vector) {
        let n = self.dim();
        let mut p = DenseMatrix::zeros(n, n);
        let mut u = Vector::zeros(n);
        for (kernel, &prob) in self.kernels.iter().zip(&self.probs) {
            if prob == 0.0 {
                continue;
            }
            p = p.add(&kernel.matrix.scale(prob));
            u.axpy(prob, &kernel.offset);
        }
        (p, u)
    }
}

/// Deviation of the exact mean kernel from `((1-α)I + αP, αu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationReport {
    pub alpha: f64,
    pub matrix_deviation: f64,
    pub offset_deviation: f64,
    pub passed: bool,
}

pub const EXPECTATION_TOLERANCE: f64 = 1e-12;

pub fn verify_expectation(
    dist: &KernelDistribution,
    p: &DenseMatrix,
    u: &[f64],
    alpha: f64,
) -> Result<ExpectationReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must lie in (0, 1]",
        });
    }
    let n = dist.dim();
    let pn = p.require_square()?;
    if pn != n {
        return Err(Error::dims("verify_expectation matrix", n, pn));
    }
    if u.len() != n {
        return Err(Error::dims("verify_expectation offset", n, u.len()));
    }
    let (mean_p, mean_u) = dist.expectation();
    let target_p = DenseMatrix::identity(n).scale(1.0 - alpha).add(&p.scale(alpha));
    let matrix_deviation = mean_p.max_abs_diff(&target_p);
    let offset_deviation = mean_u
        .iter()
        .zip(u)
        .fold(0.0_f64, |acc, (m, t)| acc.max((m - alpha * t).abs()));
    Ok(ExpectationReport {
        alpha,
        matrix_deviation,
        offset_deviation,
        passed: matrix_deviation <= EXPECTATION_TOLERANCE
            && offset_deviation <= EXPECTATION_TOLERANCE,
    })
}

/// A sample path of the randomized dynamics.
pub struct ForwardProcess<'a> {
    dist: &'a KernelDistribution,
    x: Vector,
    k: u64,
    rng: SimRng,
    last: Option<usize>,
}

impl<'a> ForwardProcess<'a> {
    pub fn new(dist: &'a KernelDistribution, x0: Vector, rng: SimRng) -> Result<Self> {
        if x0.len() != dist.dim() {
            return Err(Error::dims("initial state", dist.dim(), x0.len()));
        }
        Ok(ForwardProcess {
            dist,
            x: x0,
            k: 0,
            rng,
            last: None,
        })
    }

    /// Draws `θ(k)` and applies its kernel.
    pub fn sample_step(&mut self) -> &Vector {
        let theta = self.dist.sample_index(&mut self.rng);
        self.apply(theta)
    }

    /// Applies kernel `theta` without drawing.
    pub fn apply(&mut self, theta: usize) -> &Vector {
        self.x = self.dist.kernels[theta].apply(&self.x);
        self.k += 1;
        self.last = Some(theta);
        &self.x
    }

    pub fn state(&self) -> &Vector {
        &self.x
    }

    pub fn steps(&self) -> u64 {
        self.k
    }

    pub fn last_kernel(&self) -> Option<usize> {
        self.last
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }
}

/// Running arithmetic mean, updated incrementally.
#[derive(Debug, Clone)]
pub struct CesaroAverager {
    mean: Vector,
    count: u64,
}

impl CesaroAverager {
    pub fn new(n: usize) -> Self {
        CesaroAverager {
            mean: Vector::zeros(n),
            count: 0,
        }
    }

    pub fn update(&mut self, x: &[f64]) -> &Vector {
        assert_eq!(x.len(), self.mean.len(), "CesaroAverager: dimension mismatch");
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for (m, xi) in self.mean.iter_mut().zip(x) {
            *m += (xi - *m) * w;
        }
        &self.mean
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// Average over the samples whose weight is 1.
#[derive(Debug, Clone)]
pub struct WeightedAverager {
    weighted_sum: Vector,
    weight: u64,
}

impl WeightedAverager {
    pub fn new(n: usize) -> Self {
        WeightedAverager {
            weighted_sum: Vector::zeros(n),
            weight: 0,
        }
    }

    /// Accumulates `x` when `selected`; returns the current average, or
    /// `None` while no sample has been selected.
    pub fn update(&mut self, selected: bool, x: &[f64]) -> Option<Vector> {
        if selected {
            self.weighted_sum.axpy(1.0, &Vector::from(x));
            self.weight += 1;
        }
        self.average()
    }

    pub fn average(&self) -> Option<Vector> {
        (self.weight > 0).then(|| self.weighted_sum.scale(1.0 / self.weight as f64))
    }

    pub fn weighted_sum(&self) -> &Vector {
        &self.weighted_sum
    }

    pub fn weight(&self) -> u64 {
        self.weight
    }
}

/// Kernels composed in reversed order: after `k` steps
/// `product = P(0)…P(k-1)` and `sum = Σ_ℓ P(0)…P(ℓ-1) u(ℓ)`.
#[derive(Debug, Clone)]
pub struct BackwardProcess {
    product: DenseMatrix,
    sum: Vector,
    steps: u64,
}

impl BackwardProcess {
    pub fn new(n: usize) -> Self {
        BackwardProcess {
            product: DenseMatrix::identity(n),
            sum: Vector::zeros(n),
            steps: 0,
        }
    }

    /// Folds in the next kernel and returns the backward iterate from `x0`.
    pub fn step(&mut self, p_k: &DenseMatrix, u_k: &[f64], x0: &[f64]) -> Result<Vector> {
        let n = self.sum.len();
        if p_k.rows() != n || p_k.cols() != n {
            return Err(Error::dims("backward kernel", n, p_k.rows()));
        }
        if u_k.len() != n || x0.len() != n {
            return Err(Error::dims("backward offset", n, u_k.len().min(x0.len())));
        }
        let pushed = self.product.mul_vec(u_k);
        self.sum.axpy(1.0, &pushed);
        self.product = self.product.matmul(p_k);
        self.steps += 1;
        Ok(self.current(x0))
    }

    pub fn current(&self, x0: &[f64]) -> Vector {
        let mut x = self.product.mul_vec(x0);
        x.axpy(1.0, &self.sum);
        x
    }

    pub fn product(&self) -> &DenseMatrix {
        &self.product
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

fn mean_and_se(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Estimate {
            mean,
            std_error: 0.0,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        mean,
        std_error: (var / n).sqrt(),
    }
}

/// Estimates `(1/h) E[log ‖P(1)…P(h)‖₁]`. A negative value is evidence that
/// the backward process converges.
pub fn lyapunov_diagnostic(
    dist: &KernelDistribution,
    horizon: usize,
    replications: usize,
    seed: u64,
) -> Result<Estimate> {
    if horizon == 0 || replications == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon/replications",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let n = dist.dim();
    let samples: Result<Vec<f64>> = replicate(replications, |rep| {
        let mut rng = stream(seed, "lyapunov", rep as u64);
        let mut product = DenseMatrix::identity(n);
        let mut log_scale = 0.0;
        for _ in 0..horizon {
            let theta = dist.sample_index(&mut rng);
            product = product.matmul(&dist.kernels[theta].matrix);
            let norm = product.norm_1();
            if norm == 0.0 {
                return Err(Error::DegenerateProduct);
            }
            // rescale to keep the product representable
            if !(1e-100..=1e100).contains(&norm) {
                product = product.scale(1.0 / norm);
                log_scale += norm.ln();
            }
        }
        Ok((log_scale + product.norm_1().ln()) / horizon as f64)
    })
    .into_iter()
    .collect();
    Ok(mean_and_se(&samples?))
}

/// Output of [`run_ergodic`].
#[derive(Debug, Clone)]
pub struct ErgodicRun {
    /// `(1/steps) Σ_{ℓ<steps} x(ℓ)`.
    pub mean: Vector,
    pub final_state: Vector,
    /// `(ℓ, x(ℓ), running mean)` every `thin` steps.
    pub samples: Vec<(u64, Vector, Vector)>,
}

pub fn run_ergodic(
    dist: &KernelDistribution,
    x0: &[f64],
    steps: u64,
    seed: u64,
    thin: Option<u64>,
) -> Result<ErgodicRun> {
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "steps",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let mut process = ForwardProcess::new(dist, Vector::from(x0), stream(seed, "kernels", 0))?;
    let mut avg = CesaroAverager::new(dist.dim());
    let mut samples = Vec::new();
    for ell in 0..steps {
        avg.update(process.state());
        if let Some(t) = thin {
            if t > 0 && ell % t == 0 {
                samples.push((ell, process.state().clone(), avg.mean().clone()));
            }
        }
        if ell + 1 < steps {
            process.sample_step();
        }
    }
    Ok(ErgodicRun {
        mean: avg.mean().clone(),
        final_state: process.state().clone(),
        samples,
    })
}

/// Per-coordinate sample moments of the forward and backward iterates at a
/// fixed time, from independent replications.
#[derive(Debug, Clone)]
pub struct MomentComparison {
    pub forward_mean: Vector,
    pub backward_mean: Vector,
    pub forward_var: Vector,
    pub backward_var: Vector,
    /// Largest `|Δmean| / SE` over coordinates.
    pub max_mean_z: f64,
    /// Largest `|Δvar| / SE` over coordinates.
    pub max_var_z: f64,
}

struct Moments {
    mean: Vec<f64>,
    var: Vec<f64>,
    se_mean: Vec<f64>,
    se_var: Vec<f64>,
}

fn moments(samples: &[Vector]) -> Moments {
    let n = samples[0].len();
    let count = samples.len() as f64;
    let mut out = Moments {
        mean: vec![0.0; n],
        var: vec![0.0; n],
        se_mean: vec![0.0; n],
        se_var: vec![0.0; n],
    };
    for c in 0..n {
        let mean = samples.iter().map(|s| s[c]).sum::<f64>() / count;
        let m2 = samples.iter().map(|s| (s[c] - mean).powi(2)).sum::<f64>() / count;
        let m4 = samples.iter().map(|s| (s[c] - mean).powi(4)).sum::<f64>() / count;
        let var = m2 * count / (count - 1.0);
        out.mean[c] = mean;
        out.var[c] = var;
        out.se_mean[c] = (var / count).sqrt();
        out.se_var[c] = ((m4 - m2 * m2).max(0.0) / count).sqrt();
    }
    out
}

fn z_score(a: f64, b: f64, se_a: f64, se_b: f64) -> f64 {
    let diff = (a - b).abs();
    let se = (se_a * se_a + se_b * se_b).sqrt();
    if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        diff / se
    }
}

/// Compares the distributions of `x(k)` and of the backward iterate at time
/// `k` over `replications` independent paths for each.
pub fn forward_backward_moments(
    dist: &KernelDistribution,
    x0: &[f64],
    k: usize,
    replications: usize,
    seed: u64,
) -> Result<MomentComparison> {
    if replications < 2 {
        return Err(Error::InvalidParameter {
            name: "replications",
            value: replications as f64,
            reason: "need at least 2",
        });
    }
    if x0.len() != dist.dim() {
        return Err(Error::dims("initial state", dist.dim(), x0.len()));
    }
    let n = dist.dim();
    let forward: Vec<Vector> = replicate(replications, |rep| {
        let mut rng = stream(seed, "forward", rep as u64);
        let mut x = Vector::from(x0);
        for _ in 0..k {
            x = dist.kernels[dist.sample_index(&mut rng)].apply(&x);
        }
        x
    });
    let backward: Vec<Vector> = replicate(replications, |rep| {
        let mut rng = stream(seed, "backward", rep as u64);
        let mut proc = BackwardProcess::new(n);
        for _ in 0..k {
            let kernel = &dist.kernels[dist.sample_index(&mut rng)];
            proc.step(&kernel.matrix, &kernel.offset, x0)
                .expect("dimensions checked above");
        }
        proc.current(x0)
    });
    let f = moments(&forward);
    let b = moments(&backward);
    let max_mean_z = (0..n)
        .map(|c| z_score(f.mean[c], b.mean[c], f.se_mean[c], b.se_mean[c]))
        .fold(0.0, f64::max);
    let max_var_z = (0..n)
        .map(|c| z_score(f.var[c], b.var[c], f.se_var[c], b.se_var[c]))
        .fold(0.0, f64::max);
    Ok(MomentComparison {
        forward_mean: f.mean.into(),
        backward_mean: b.mean.into(),
        forward_var: f.var.into(),
        backward_var: b.var.into(),
        max_mean_z,
        max_var_z,
    })
}

/// Geometric envelope `value(k) ≤ constant · rate^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFit {
    pub rate: f64,
    pub constant: f64,
}

/// Fits the slope of `ln value` against `k` by least squares, then raises the
/// constant until every point lies under the envelope. Points with
/// nonpositive values are skipped; `None` if fewer than two remain.
pub fn fit_geometric_envelope(points: &[(f64, f64)]) -> Option<GeometricFit> {
    let logged: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, v)| *v > 0.0 && v.is_finite())
        .map(|&(k, v)| (k, v.ln()))
        .collect();
    if logged.len() < 2 {
        return None;
    }
    let n = logged.len() as f64;
    let mk = logged.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = logged.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logged.iter().map(|p| (p.0 - mk).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logged.iter().map(|p| (p.0 - mk) * (p.1 - mv)).sum();
    let slope = sxy / sxx;
    let log_c = logged
        .iter()
        .map(|(k, lv)| lv - slope * k)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(GeometricFit {
        rate: slope.exp(),
        constant: log_c.exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(p: DenseMatrix, u: Vec<f64>) -> Kernel {
        Kernel::new(p, u.into()).unwrap()
    }

    #[test]
    fn single_zero_kernel_maps_to_offset() {
        let dist = KernelDistribution::uniform(vec![kernel(DenseMatrix::zeros(2, 2), vec![1.0, 1.0])])
            .unwrap();
        let mut proc = ForwardProcess::new(&dist, Vector::from([5.0, -3.0]), stream(1, "t", 0)).unwrap();
        assert_eq!(proc.sample_step().as_slice(), &[1.0, 1.0]);
        assert_eq!(proc.steps(), 1);
        assert_eq!(proc.last_kernel(), Some(0));
    }

    #[test]
    fn sign_kernels_stay_on_support() {
        let id = DenseMatrix::identity(1);
        let dist = KernelDistribution::uniform(vec![
            kernel(id.clone(), vec![0.0]),
            kernel(id.scale(-1.0), vec![0.0]),
        ])
        .unwrap();
        let mut seen = [false; 2];
        for rep in 0..64 {
            let mut proc = ForwardProcess::new(&dist, Vector::from([1.0]), stream(9, "t", rep)).unwrap();
            let x = proc.sample_step()[0];
            assert!(x == 1.0 || x == -1.0);
            seen[(x < 0.0) as usize] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        use rand::Rng;
        let draw = |seed, name, index| {
            let mut rng = stream(seed, name, index);
            (0..4).map(|_| rng.random::<u64>()).collect::<Vec<_>>()
        };
        assert_eq!(draw(3, "edges", 0), draw(3, "edges", 0));
        assert_ne!(draw(3, "edges", 0), draw(3, "edges", 1));
        assert_ne!(draw(3, "edges", 0), draw(3, "noise", 0));
        assert_ne!(draw(3, "edges", 0), draw(4, "edges", 0));
    }

    #[test]
    fn distribution_validation() {
        let k = kernel(DenseMatrix::identity(2), vec![0.0, 0.0]);
        assert!(KernelDistribution::new(vec![k.clone()], vec![0.9]).is_err());
        assert!(KernelDistribution::new(vec![k.clone(), k.clone()], vec![1.5, -0.5]).is_err());
        assert!(KernelDistribution::new(vec![k.clone()], vec![0.5, 0.5]).is_err());
        let other = kernel(DenseMatrix::identity(3), vec![0.0; 3]);
        assert!(KernelDistribution::uniform(vec![k, other]).is_err());
        assert!(KernelDistribution::uniform(vec![]).is_err());
    }

    #[test]
    fn verify_single_kernel_alpha_one() {
        let p = DenseMatrix::from_rows(&[[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let u = vec![1.0, 2.0];
        let dist = KernelDistribution::uniform(vec![kernel(p.clone(), u.clone())]).unwrap();
        let report = verify_expectation(&dist, &p, &u, 1.0).unwrap();
        assert!(report.passed);
        assert_eq!(report.matrix_deviation, 0.0);
        assert_eq!(report.offset_deviation, 0.0);
        assert!(verify_expectation(&dist, &p, &u, 0.0).is_err());
        assert!(verify_expectation(&dist, &p, &u, 1.5).is_err());
        assert!(verify_expectation(&dist, &DenseMatrix::identity(3), &[0.0; 3], 1.0).is_err());
    }

    #[test]
    fn verify_detects_wrong_alpha() {
        let p = DenseMatrix::identity(2).scale(0.5);
        let dist = KernelDistribution::uniform(vec![kernel(p.clone(), vec![1.0, 1.0])]).unwrap();
        let report = verify_expectation(&dist, &p, &[1.0, 1.0], 0.5).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn cesaro_examples() {
        let mut avg = CesaroAverager::new(1);
        for _ in 0..7 {
            avg.update(&[2.5]);
        }
        assert_eq!(avg.mean()[0], 2.5);

        let mut avg = CesaroAverager::new(1);
        for x in [1.0, -1.0, 1.0, -1.0] {
            avg.update(&[x]);
        }
        assert_eq!(avg.mean()[0], 0.0);

        let mut avg = CesaroAverager::new(1);
        for x in [1.0, 2.0, 3.0] {
            avg.update(&[x]);
        }
        assert_eq!(avg.mean()[0], 2.0);
        assert_eq!(avg.count(), 3);
    }

    #[test]
    fn weighted_examples() {
        let mut avg = WeightedAverager::new(1);
        let mut last = None;
        for x in [1.0, 2.0, 3.0] {
            last = avg.update(true, &[x]);
        }
        assert_eq!(last.unwrap()[0], 2.0);

        let mut avg = WeightedAverager::new(1);
        assert!(avg.update(false, &[1.0]).is_none());
        assert!(avg.update(false, &[2.0]).is_none());
        assert!(avg.average().is_none());

        let mut avg = WeightedAverager::new(1);
        avg.update(true, &[10.0]);
        avg.update(false, &[99.0]);
        let r = avg.update(true, &[20.0]).unwrap();
        assert_eq!(r[0], 15.0);
        assert_eq!(avg.weighted_sum()[0], 30.0);
        assert_eq!(avg.weight(), 2);
    }

    #[test]
    fn backward_single_zero_kernel() {
        let mut b = BackwardProcess::new(2);
        let x = b
            .step(&DenseMatrix::zeros(2, 2), &[3.0, 4.0], &[100.0, -7.0])
            .unwrap();
        assert_eq!(x.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn backward_equals_forward_for_constant_kernel() {
        let p = DenseMatrix::from_rows(&[[0.5, 0.2], [-0.1, 0.3]]).unwrap();
        let u = [1.0, -2.0];
        let k = Kernel::new(p.clone(), u.into()).unwrap();
        let x0 = [0.7, 0.1];
        let mut fwd = Vector::from(x0);
        let mut b = BackwardProcess::new(2);
        for _ in 0..10 {
            fwd = k.apply(&fwd);
            let back = b.step(&p, &u, &x0).unwrap();
            assert!(back.max_abs_diff(&fwd) < 1e-14);
        }
    }

    #[test]
    fn backward_two_kernels_symbolic_expansion() {
        let p1 = DenseMatrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        let p2 = DenseMatrix::from_rows(&[[0.0, 1.0], [3.0, 0.0]]).unwrap();
        let u1 = Vector::from([1.0, 0.0]);
        let u2 = Vector::from([0.0, 5.0]);
        let x0 = Vector::from([2.0, -1.0]);

        // backward = P1 P2 x0 + u1 + P1 u2
        let expected_back = p1
            .matmul(&p2)
            .mul_vec(&x0)
            .add(&u1)
            .add(&p1.mul_vec(&u2));
        // forward = P2 P1 x0 + P2 u1 + u2
        let expected_fwd = p2
            .matmul(&p1)
            .mul_vec(&x0)
            .add(&p2.mul_vec(&u1))
            .add(&u2);

        let mut b = BackwardProcess::new(2);
        b.step(&p1, &u1, &x0).unwrap();
        let back = b.step(&p2, &u2, &x0).unwrap();
        assert_eq!(back, expected_back);
        // hand-evaluated: P1P2 = [[6,1],[3,0]], P1P2 x0 = (11, 6), P1 u2 = (10, 5)
        assert_eq!(back.as_slice(), &[22.0, 11.0]);

        let k1 = Kernel::new(p1, u1).unwrap();
        let k2 = Kernel::new(p2, u2).unwrap();
        let fwd = k2.apply(&k1.apply(&x0));
        assert_eq!(fwd, expected_fwd);
        // P2P1 = [[0,1],[3,6]], P2P1 x0 = (-1, 0), P2 u1 = (0, 3)
        assert_eq!(fwd.as_slice(), &[-1.0, 8.0]);
    }

    #[test]
    fn lyapunov_single_kernels() {
        let half = KernelDistribution::uniform(vec![kernel(DenseMatrix::identity(2).scale(0.5), vec![0.0; 2])])
            .unwrap();
        for horizon in [1, 7, 500] {
            let est = lyapunov_diagnostic(&half, horizon, 3, 1).unwrap();
            assert!((est.mean - 0.5_f64.ln()).abs() < 1e-12, "{est:?}");
        }
        let id = KernelDistribution::uniform(vec![kernel(DenseMatrix::identity(2), vec![0.0; 2])]).unwrap();
        assert_eq!(lyapunov_diagnostic(&id, 50, 2, 1).unwrap().mean, 0.0);
        let zero = KernelDistribution::uniform(vec![kernel(DenseMatrix::zeros(2, 2), vec![0.0; 2])]).unwrap();
        assert_eq!(lyapunov_diagnostic(&zero, 5, 2, 1), Err(Error::DegenerateProduct));
        assert!(lyapunov_diagnostic(&id, 0, 2, 1).is_err());
    }

    #[test]
    fn run_ergodic_deterministic_kernel() {
        let dist = KernelDistribution::uniform(vec![kernel(DenseMatrix::identity(3).scale(0.5), vec![1.0; 3])])
            .unwrap();
        let run = run_ergodic(&dist, &[0.0; 3], 10_000, 1, Some(1000)).unwrap();
        assert!(run.mean.max_abs_diff(&Vector::filled(3, 2.0)) < 1e-2);
        assert_eq!(run.samples.len(), 10);
        assert_eq!(run.samples[0].0, 0);
        assert!(run_ergodic(&dist, &[0.0; 3], 0, 1, None).is_err());
    }

    #[test]
    fn geometric_fit_recovers_rate() {
        let pts: Vec<(f64, f64)> = (0..50).map(|k| (k as f64, 3.0 * 0.8_f64.powi(k))).collect();
        let fit = fit_geometric_envelope(&pts).unwrap();
        assert!((fit.rate - 0.8).abs() < 1e-12);
        assert!((fit.constant - 3.0).abs() < 1e-9);
        assert!(fit_geometric_envelope(&[(0.0, 1.0)]).is_none());
        assert!(fit_geometric_envelope(&[(0.0, 0.0), (1.0, 0.0)]).is_none());
    }

    #[test]
    fn replicate_preserves_order() {
        let v = replicate(100, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }
}
