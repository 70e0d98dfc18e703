//! Randomized affine dynamics over networks.
//!
//! Three network algorithms share one structure: a synchronous affine
//! iteration `x(k+1) = P x(k) + u` converging to `x* = (I - P)^{-1} u`, and a
//! randomized pairwise ("gossip") counterpart whose expected kernel is a lazy
//! version of `(P, u)`. The randomized state keeps oscillating, but its
//! time-average converges to `x*`.
//!
//! * [`localization`]: least-squares relative localization from noisy
//!   pairwise differences.
//! * [`pagerank`]: PageRank by power iteration and by edge gossip.
//! * [`opinions`]: Friedkin–Johnsen opinion dynamics with stubborn agents.
//!
//! [`affine`] holds the synchronous reference dynamics and [`engine`] the
//! generic randomized machinery (kernel sampling, Cesàro and subsequence
//! averaging, backward process, Lyapunov diagnostic).

pub mod affine;
pub mod engine;
pub mod error;
pub mod localization;
pub mod numerics;
pub mod opinions;
pub mod pagerank;
pub mod reach;

pub use error::{Error, Result};
pub use numerics::{DenseMatrix, NumericPolicy, StabilityVerdict, Vector};
