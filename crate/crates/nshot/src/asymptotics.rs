//! Closed-form asymptotics: the large-`n` information supremum of the
//! repeated-measurement channel and the derived count `W` of pairwise
//! distinguishable states, for the quarter circle (`N = 2`) and for domains
//! on the orthant of `S^{N-1}`.
//!
//! The two-outcome forms are
//! `I_sup = 1/2 ln(2n / pi e) + ln |alpha_1 - alpha_2|` and
//! `W = exp(I_sup) = |alpha_1 - alpha_2| sqrt(2n / pi e)`; in dimension `N`
//! with domain area `Omega` they generalize to
//! `I_sup = ln Omega + (N-1)/2 ln(2n / pi e)` and
//! `W = Omega (2n / pi e)^{(N-1)/2}`. These are leading-order asymptotics,
//! valid when `n` is large compared to `N`; see
//! [`small_n_warning`] for the reporting convention.
//!
//! `W` is returned as a real (an asymptotic density of states), not an
//! integer; callers who need a codebook size floor it.

use crate::error::{Error, Result};
use crate::geometry::{orthant_area, AngleInterval};
use crate::prob_kernel::ln_gamma;
use serde::Serialize;
use std::f64::consts::{E, PI};

/// `n < 50 N` triggers a "leading-order asymptotics not yet valid" warning
/// in reports. The theory requires only `n >> N`; the factor 50 is this
/// crate's concrete, testable convention.
pub const SMALL_N_FACTOR: u64 = 50;

/// Whether `(dim, n)` is outside the comfortable asymptotic regime.
pub fn small_n_warning(dim: usize, n: u64) -> bool {
    n < SMALL_N_FACTOR * dim as u64
}

/// Asymptotic information supremum for states on an angle interval,
/// `1/2 ln(2n / pi e) + ln |alpha_1 - alpha_2|`, in nats.
///
/// May be negative for tiny `n` times interval width; returned as-is.
pub fn i_sup_qubit(n: u64, interval: &AngleInterval) -> f64 {
    0.5 * (2.0 * n as f64 / (PI * E)).ln() + interval.width().ln()
}

/// Asymptotic count of distinguishable states on an angle interval,
/// `|alpha_1 - alpha_2| sqrt(2n / pi e) = exp(i_sup_qubit)`.
///
/// # Example
///
/// ```
/// let full = nshot::AngleInterval::full();
/// assert!((nshot::asymptotics::w_qubit(100, &full) - 7.6026).abs() < 1e-3);
/// ```
pub fn w_qubit(n: u64, interval: &AngleInterval) -> f64 {
    interval.width() * (2.0 * n as f64 / (PI * E)).sqrt()
}

/// Maximum of [`w_qubit`] over intervals, attained on the full quarter
/// circle: `sqrt(pi n / 2 e)`.
pub fn w_max_qubit(n: u64) -> f64 {
    (PI * n as f64 / (2.0 * E)).sqrt()
}

/// Asymptotic information supremum for a domain of area `omega` on the
/// orthant of `S^{N-1}`: `ln Omega + (N-1)/2 ln(2n / pi e)`, in nats.
///
/// Reduces to [`i_sup_qubit`] at `dim = 2` with `omega` the interval
/// length. Requires `dim >= 2` and `omega > 0`; violations yield NaN
/// rather than a panic, mirroring the totality of the other closed forms.
pub fn i_sup_ndim(dim: usize, n: u64, omega: f64) -> f64 {
    omega.ln() + (dim as f64 - 1.0) / 2.0 * (2.0 * n as f64 / (PI * E)).ln()
}

/// Asymptotic count of distinguishable states in a domain of area `omega`:
/// `Omega (2n / pi e)^{(N-1)/2}`.
pub fn w_ndim(dim: usize, n: u64, omega: f64) -> f64 {
    omega * (2.0 * n as f64 / (PI * E)).powf((dim as f64 - 1.0) / 2.0)
}

/// Area of the full non-negative orthant of `S^{N-1}`,
/// `pi^{N/2} / (2^{N-1} Gamma(N/2))` - the largest possible domain area.
pub fn omega_max(dim: usize) -> f64 {
    orthant_area(dim)
}

/// Maximum of [`w_ndim`] over domains, attained on the full orthant:
/// `(sqrt(pi) / Gamma(N/2)) (n / 2e)^{(N-1)/2}`.
///
/// Algebraically identical to `w_ndim(dim, n, omega_max(dim))`; both sides
/// are evaluated independently and agree to floating round-off.
pub fn w_max_ndim(dim: usize, n: u64) -> f64 {
    let nf = dim as f64;
    (0.5 * PI.ln() - ln_gamma(nf / 2.0) + (nf - 1.0) / 2.0 * (n as f64 / (2.0 * E)).ln()).exp()
}

/// Geometry half of an asymptotic query: an angle interval for `N = 2`, or
/// a domain area for any `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GeometrySpec {
    /// Quarter-circle interval (two-outcome case only).
    Interval(AngleInterval),
    /// Domain area in steradians on the orthant of `S^{N-1}`.
    Omega(f64),
}

/// A validated `(N, n, geometry)` triple for asymptotic evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticInputs {
    dim: usize,
    n: u64,
    geometry: GeometrySpec,
}

impl AsymptoticInputs {
    /// Validates the triple: intervals require `dim == 2`; areas must lie
    /// in `(0, omega_max(dim)]`.
    pub fn new(dim: usize, n: u64, geometry: GeometrySpec) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument {
                name: "dim",
                reason: format!("dimension must be at least 2, got {dim}"),
            });
        }
        if n == 0 {
            return Err(Error::InvalidArgument {
                name: "n",
                reason: "number of copies must be positive".into(),
            });
        }
        match geometry {
            GeometrySpec::Interval(_) if dim != 2 => Err(Error::InvalidArgument {
                name: "geometry",
                reason: format!("angle intervals describe 2-outcome states, not dim = {dim}"),
            }),
            GeometrySpec::Omega(omega) if !(omega > 0.0 && omega <= omega_max(dim) + 1e-12) => {
                Err(Error::InvalidArgument {
                    name: "omega",
                    reason: format!(
                        "area {omega} outside (0, omega_max = {}]",
                        omega_max(dim)
                    ),
                })
            }
            _ => Ok(Self { dim, n, geometry }),
        }
    }

    /// Dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Copy count `n`.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// The geometry half of the query.
    pub fn geometry(&self) -> GeometrySpec {
        self.geometry
    }

    /// Effective domain size: interval width or area.
    pub fn omega(&self) -> f64 {
        match self.geometry {
            GeometrySpec::Interval(iv) => iv.width(),
            GeometrySpec::Omega(omega) => omega,
        }
    }

    /// Information supremum in nats for this query.
    pub fn i_sup(&self) -> f64 {
        match self.geometry {
            GeometrySpec::Interval(iv) => i_sup_qubit(self.n, &iv),
            GeometrySpec::Omega(omega) => i_sup_ndim(self.dim, self.n, omega),
        }
    }

    /// Distinguishable-state count `W = exp(I_sup)` for this query.
    pub fn w(&self) -> f64 {
        match self.geometry {
            GeometrySpec::Interval(iv) => w_qubit(self.n, &iv),
            GeometrySpec::Omega(omega) => w_ndim(self.dim, self.n, omega),
        }
    }

    /// Whether the leading-order asymptotics carry a small-`n` warning.
    pub fn small_n_warning(&self) -> bool {
        small_n_warning(self.dim, self.n)
    }
}

// --- tests -----------------------------------------------------------------
