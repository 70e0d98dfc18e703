//! Synchronous affine dynamics `x(k+1) = P x(k) + u`, their fixed point and
//! the substochastic stability criterion.

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, NumericPolicy, StabilityVerdict, Vector};
use crate::reach;

/// The pair `(P, u)`, optionally with the graph `P` is adapted to.
#[derive(Debug, Clone)]
pub struct AffineSystem {
    p: DenseMatrix,
    u: Vector,
    adjacency: Option<Vec<Vec<usize>>>,
}

impl AffineSystem {
    pub fn new(p: DenseMatrix, u: Vector) -> Result<Self> {
        let n = p.require_square()?;
        if u.len() != n {
            return Err(Error::dims("affine offset", n, u.len()));
        }
        if !u.is_finite() {
            return Err(Error::NonFinite("affine offset"));
        }
        Ok(AffineSystem {
            p,
            u,
            adjacency: None,
        })
    }

    /// Attaches successor lists; every nonzero `P_ij` must be an edge `(i, j)`.
    pub fn with_adjacency(mut self, successors: Vec<Vec<usize>>) -> Result<Self> {
        let n = self.dim();
        if successors.len() != n {
            return Err(Error::dims("adjacency", n, successors.len()));
        }
        for (i, succ) in successors.iter().enumerate() {
            for j in 0..n {
                if self.p[(i, j)] != 0.0 && !succ.contains(&j) {
                    return Err(Error::InvalidGraph(format!(
                        "P[{i}][{j}] is nonzero but ({i}, {j}) is not an edge"
                    )));
                }
            }
        }
        self.adjacency = Some(successors);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn offset(&self) -> &Vector {
        &self.u
    }

    pub fn adjacency(&self) -> Option<&[Vec<usize>]> {
        self.adjacency.as_deref()
    }

    /// One synchronous step.
    pub fn step(&self, x: &[f64]) -> Vector {
        let mut next = self.p.mul_vec(x);
        next.axpy(1.0, &self.u);
        next
    }

    /// The lazy system `((1-α)I + αP, αu)` followed in expectation by a
    /// randomized process satisfying the ergodicity hypothesis.
    pub fn lazy(&self, alpha: f64) -> AffineSystem {
        let n = self.dim();
        AffineSystem {
            p: DenseMatrix::identity(n).scale(1.0 - alpha).add(&self.p.scale(alpha)),
            u: self.u.scale(alpha),
            adjacency: None,
        }
    }
}

/// States of a synchronous run, `states[0]` being the initial condition.
#[derive(Debug, Clone)]
pub struct SyncTrajectory {
    pub states: Vec<Vector>,
    /// The last increment was below `1e-12 (1 + ‖x‖∞)`.
    pub converged: bool,
    pub iterations: usize,
}

impl SyncTrajectory {
    pub fn last(&self) -> &Vector {
        self.states.last().expect("trajectory holds at least x(0)")
    }
}

pub fn iterate_sync(sys: &AffineSystem, x0: &[f64], steps: usize) -> Result<SyncTrajectory> {
    if x0.len() != sys.dim() {
        return Err(Error::dims("initial state", sys.dim(), x0.len()));
    }
    let mut states = Vec::with_capacity(steps + 1);
    states.push(Vector::from(x0));
    let mut converged = false;
    for _ in 0..steps {
        let prev = states.last().unwrap();
        let next = sys.step(prev);
        converged = next.max_abs_diff(prev) <= 1e-12 * (1.0 + next.norm_inf());
        states.push(next);
    }
    Ok(SyncTrajectory {
        states,
        converged,
        iterations: steps,
    })
}

/// `x* = (I - P)^{-1} u`.
///
/// Refuses systems that the stability certificate does not prove stable,
/// unless `force` is set.
pub fn fixed_point(sys: &AffineSystem, force: bool) -> Result<Vector> {
    fixed_point_with(sys, force, &NumericPolicy::default())
}

pub fn fixed_point_with(sys: &AffineSystem, force: bool, policy: &NumericPolicy) -> Result<Vector> {
    if !force {
        match policy.spectral_radius_estimate(&sys.p)? {
            StabilityVerdict::Stable { .. } => {}
            verdict => return Err(Error::NotSchurStable(format!("{verdict:?}"))),
        }
    }
    let n = sys.dim();
    let i_minus_p = DenseMatrix::identity(n).sub(&sys.p);
    policy.linear_solve(&i_minus_p, &sys.u)
}

/// Which sums make a matrix substochastic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Rows,
    Columns,
}

/// Sufficient condition for Schur stability of a substochastic matrix: every
/// node has a path, in the graph of `Q`, to a deficiency node.
pub fn substochastic_schur_check(q: &DenseMatrix, orientation: Orientation) -> Result<bool> {
    substochastic_schur_check_with(q, orientation, &NumericPolicy::default())
}

pub fn substochastic_schur_check_with(
    q: &DenseMatrix,
    orientation: Orientation,
    policy: &NumericPolicy,
) -> Result<bool> {
    let n = q.require_square()?;
    let q = match orientation {
        Orientation::Rows => q.clone(),
        Orientation::Columns => q.transpose(),
    };
    let tol = policy.deficiency_tol;
    let mut deficient = vec![false; n];
    let mut successors = vec![Vec::new(); n];
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let value = q[(i, j)];
            if value < 0.0 {
                let (row, col) = match orientation {
                    Orientation::Rows => (i, j),
                    Orientation::Columns => (j, i),
                };
                return Err(Error::NegativeEntry { row, col, value });
            }
            if value > 0.0 {
                successors[i].push(j);
            }
            sum += value;
        }
        if sum > 1.0 + tol {
            return Err(Error::NotSubstochastic(format!(
                "{orientation:?} sum {i} is {sum}"
            )));
        }
        deficient[i] = sum < 1.0 - tol;
    }
    Ok(reach::can_reach_targets(&successors, &deficient)
        .into_iter()
        .all(|r| r))
}
