//! The `verify-expectation` command: the mean of the sampled kernel against
//! the lazy version of the synchronous system, exactly and by sampling.

use std::fmt::Write as _;

use gossip_core::engine::{stream, verify_expectation, ExpectationReport, KernelDistribution};
use gossip_core::{localization, opinions, pagerank, DenseMatrix, Vector};

use crate::config::{Application, ScenarioConfig};
use crate::error::{Context, HarnessError, Result};
use crate::io::format_float;
use crate::scenario::{load_inputs, Inputs};

/// Entrywise comparison of a sample mean with the lazy system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloReport {
    pub samples: u64,
    pub max_deviation: f64,
    /// Largest standard error over all entries.
    pub max_std_error: f64,
    /// Largest `|deviation| / standard error` over entries that vary.
    pub max_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub application: Application,
    pub kernels: usize,
    pub exact: ExpectationReport,
    pub monte_carlo: Option<MonteCarloReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.exact.passed
    }

    /// `key=value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "application={}", self.application);
        let _ = writeln!(out, "kernels={}", self.kernels);
        let _ = writeln!(out, "alpha={}", format_float(self.exact.alpha));
        let _ = writeln!(out, "exact.matrix_deviation={}", format_float(self.exact.matrix_deviation));
        let _ = writeln!(out, "exact.offset_deviation={}", format_float(self.exact.offset_deviation));
        let _ = writeln!(out, "exact.passed={}", self.exact.passed);
        if let Some(mc) = &self.monte_carlo {
            let _ = writeln!(out, "monte_carlo.samples={}", mc.samples);
            let _ = writeln!(out, "monte_carlo.max_deviation={}", format_float(mc.max_deviation));
            let _ = writeln!(out, "monte_carlo.max_std_error={}", format_float(mc.max_std_error));
            let _ = writeln!(out, "monte_carlo.max_z={}", format_float(mc.max_z));
        }
        out
    }
}

/// The kernel family, the synchronous system and the laziness `α` of the
/// configured application.
pub fn expectation_setup(cfg: &ScenarioConfig) -> Result<(KernelDistribution, DenseMatrix, Vector, f64)> {
    let ctx = || format!("{} expectation", cfg.application);
    match load_inputs(cfg)? {
        Inputs::Localize { graph, meas, .. } => {
            let dist = localization::kernel_distribution(&graph, &meas, cfg.gamma).context(ctx)?;
            let sys = localization::expected_system(&graph, &meas, cfg.gamma).context(ctx)?;
            Ok((dist, sys.matrix().clone(), sys.offset().clone(), 1.0))
        }
        Inputs::PageRank { graph, .. } => {
            let dist = pagerank::kernel_distribution(&graph, cfg.m).context(ctx)?;
            let sys = pagerank::pagerank_system(&graph, cfg.m).context(ctx)?;
            let alpha = pagerank::r_from_m(cfg.m, graph.edge_count()).context(ctx)?.alpha;
            Ok((dist, sys.matrix().clone(), sys.offset().clone(), alpha))
        }
        Inputs::Opinions { net } => {
            let coeffs = opinions::gossip_coefficients(&net).context(ctx)?;
            let dist = opinions::kernel_distribution(&net, &coeffs).context(ctx)?;
            let sys = opinions::fj_system(&net).context(ctx)?;
            let alpha = 1.0 / net.edge_count() as f64;
            Ok((dist, sys.matrix().clone(), sys.offset().clone(), alpha))
        }
        Inputs::Affine { .. } => Err(HarnessError::Validation(
            "the affine application has no kernel family to verify".into(),
        )),
    }
}

/// Draws `samples` kernels from stream `"verify"` and compares the sample
/// mean of `(P(k), u(k))` with `((1-α)I + αP, αu)`.
pub fn monte_carlo(
    dist: &KernelDistribution,
    p: &DenseMatrix,
    u: &[f64],
    alpha: f64,
    samples: u64,
    seed: u64,
) -> MonteCarloReport {
    let mut rng = stream(seed, "verify", 0);
    let mut counts = vec![0u64; dist.len()];
    for _ in 0..samples {
        counts[dist.sample_index(&mut rng)] += 1;
    }
    let n = dist.dim();
    let total = samples as f64;
    let mut report = MonteCarloReport { samples, max_deviation: 0.0, max_std_error: 0.0, max_z: 0.0 };
    let mut entry = |value: &dyn Fn(usize) -> f64, target: f64| {
        let (mut m1, mut m2) = (0.0, 0.0);
        for (k, &c) in counts.iter().enumerate() {
            if c > 0 {
                let v = value(k);
                let w = c as f64 / total;
                m1 += w * v;
                m2 += w * v * v;
            }
        }
        let var = if samples > 1 { (m2 - m1 * m1).max(0.0) * total / (total - 1.0) } else { 0.0 };
        let se = (var / total).sqrt();
        let dev = (m1 - target).abs();
        report.max_deviation = report.max_deviation.max(dev);
        report.max_std_error = report.max_std_error.max(se);
        if se > 0.0 {
            report.max_z = report.max_z.max(dev / se);
        }
    };
    let kernels = dist.kernels();
    for i in 0..n {
        for j in 0..n {
            let target = alpha * p[(i, j)] + if i == j { 1.0 - alpha } else { 0.0 };
            entry(&|k| kernels[k].matrix[(i, j)], target);
        }
        entry(&|k| kernels[k].offset[i], alpha * u[i]);
    }
    report
}

pub fn verify_expectation_cmd(cfg: &ScenarioConfig) -> Result<VerifyReport> {
    let (dist, p, u, alpha) = expectation_setup(cfg)?;
    let exact = verify_expectation(&dist, &p, &u, alpha).context(|| "exact expectation".into())?;
    let monte_carlo = (cfg.samples > 0).then(|| monte_carlo(&dist, &p, &u, alpha, cfg.samples, cfg.seed));
    Ok(VerifyReport { application: cfg.application, kernels: dist.len(), exact, monte_carlo })
}
