//! Statistics of `n`-fold repeated measurements on identically prepared
//! quantum states, viewed as a classical communication channel.
//!
//! A pure state measured in a fixed orthonormal basis with `N` outcomes is
//! fully described by its outcome-probability vector `p` (for `N = 2`, a
//! point `p = cos^2(alpha)` on the non-negative quarter circle). Measuring
//! `n` identical copies turns each state into a binomial (`N = 2`) or
//! multinomial draw of outcome counts, and the map `p -> counts` is a noisy
//! channel whose information-carrying capacity grows like `(N-1)/2 * ln n`.
//! This crate computes everything around that channel:
//!
//! - [`prob_kernel`]: exact log-domain binomial/multinomial kernels, their
//!   Gaussian approximations, sampling, and distribution distances.
//! - [`geometry`]: angle and Cartesian parameterizations of the state space,
//!   spherical domains and their areas, and uniform state ensembles.
//! - [`information`]: exact output marginals, mutual information, and
//!   per-state information for discrete ensembles, plus the closed-form
//!   asymptotic marginal used to sanity-check them.
//! - [`capacity`]: Blahut-Arimoto capacity iteration with a certified
//!   duality gap and verification of the optimality (KKT) conditions.
//! - [`asymptotics`]: closed forms for the information supremum and the
//!   asymptotic count `W` of pairwise distinguishable states.
//! - [`simulator`]: Monte Carlo discrimination experiments decoding sampled
//!   counts by maximum likelihood against equally spaced codebooks.
//!
//! The `nshot` binary exposes the same functionality as `asymptotics`,
//! `capacity`, `simulate`, and `approx-check` subcommands; the `examples/`
//! directory is the guided tour.
//!
//! # Example
//!
//! How many states on the full quarter circle can `n = 100` measurements
//! tell apart, and how close does a discrete ensemble get to the predicted
//! information supremum?
//!
//! ```
//! use nshot::asymptotics;
//! use nshot::capacity::{blahut_arimoto, SolverConfig};
//! use nshot::geometry::{uniform_angle_grid, AngleInterval};
//! use nshot::information::MeasurementChannel;
//!
//! let interval = AngleInterval::new(0.0, std::f64::consts::FRAC_PI_2)?;
//! let predicted = asymptotics::i_sup_qubit(100, &interval);
//! assert!((asymptotics::w_qubit(100, &interval) - 7.6026).abs() < 1e-3);
//!
//! let grid = uniform_angle_grid(&interval, 32);
//! let channel = MeasurementChannel::new(2, 100)?;
//! let result = blahut_arimoto(&grid, &channel, &SolverConfig::default())?;
//! assert!(result.converged);
//! // The discrete capacity overshoots the asymptotic prediction slightly
//! // at finite n; they agree to ~0.1 nats already at n = 100.
//! assert!((result.capacity - predicted).abs() < 0.15);
//! # Ok::<(), nshot::Error>(())
//! ```
//!
//! # Conventions
//!
//! - All information quantities are in nats; conversion to bits happens only
//!   in human-readable CLI tables.
//! - `0 * ln 0` is 0 and `p^0` is 1 everywhere, including `p = 0` edges.
//! - All probability-mass computations run in the log domain and
//!   exponentiate at the boundary, so `n` up to 10^6 is routine.
//! - Randomized routines take explicit seeds and derive independent
//!   per-trial streams, so results are reproducible bit-for-bit regardless
//!   of thread count.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod asymptotics;
pub mod capacity;
pub mod cli;
mod error;
pub mod geometry;
pub mod information;
pub mod prob_kernel;
pub mod simulator;

pub use error::{Error, Result};
pub use geometry::{AngleInterval, DiscreteEnsemble, SphericalDomain};
pub use prob_kernel::{OutcomeCounts, StatePoint};
