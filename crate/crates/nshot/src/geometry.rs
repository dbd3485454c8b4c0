//! State-space geometry: angle and Cartesian parameterizations, spherical
//! domains and their areas, and the uniform ensembles that turn continuous
//! input densities into discrete grids.
//!
//! For `N = 2` a state is a point on the non-negative quarter circle,
//! `p = (cos^2 alpha, sin^2 alpha)` with `alpha` in `[0, pi/2]`. For general
//! `N` the states live on the non-negative orthant of the unit sphere
//! `S^{N-1}`, with `p_i = x_i^2`. Domains are either the full orthant or
//! axis-aligned boxes in hyperspherical angle coordinates; their surface
//! areas factor into one-dimensional `sin^m` integrals, which keeps the
//! quadrature simple and sharp.

use crate::error::{Error, Result};
use crate::prob_kernel::{ln_gamma, StatePoint, PROB_SUM_TOL};
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};

/// Two states whose coordinates all differ by at most this much count as
/// duplicates; duplicate grid points break capacity-solver support
/// bookkeeping, so ensembles reject them at construction.
pub(crate) const DUPLICATE_TOL: f64 = 1e-12;

// --- qubit angle parameterization ------------------------------------------

/// A closed interval of quarter-circle angles, `0 <= lo < hi <= pi/2`.
///
/// Zero-length intervals are rejected: the asymptotic state count would
/// vanish only in the limit, and every consumer here needs positive width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleInterval {
    alpha_lo: f64,
    alpha_hi: f64,
}

impl AngleInterval {
    /// Validates `0 <= lo < hi <= pi/2`.
    pub fn new(alpha_lo: f64, alpha_hi: f64) -> Result<Self> {
        if !(alpha_lo >= 0.0 && alpha_lo < alpha_hi && alpha_hi <= FRAC_PI_2) {
            return Err(Error::InvalidInterval(format!(
                "need 0 <= lo < hi <= pi/2, got [{alpha_lo}, {alpha_hi}]"
            )));
        }
        Ok(Self { alpha_lo, alpha_hi })
    }

    /// The full quarter circle `[0, pi/2]`.
    pub fn full() -> Self {
        Self {
            alpha_lo: 0.0,
            alpha_hi: FRAC_PI_2,
        }
    }

    /// Lower endpoint in radians.
    pub fn lo(&self) -> f64 {
        self.alpha_lo
    }

    /// Upper endpoint in radians.
    pub fn hi(&self) -> f64 {
        self.alpha_hi
    }

    /// Interval length `|alpha_hi - alpha_lo|`.
    pub fn width(&self) -> f64 {
        self.alpha_hi - self.alpha_lo
    }

    /// First-outcome probability bounds `(p_min, p_max)` spanned by the
    /// interval. The map `alpha -> cos^2 alpha` is decreasing, so the upper
    /// angle gives the lower probability.
    pub fn prob_bounds(&self) -> (f64, f64) {
        let p_min = self.alpha_hi.cos().powi(2);
        let p_max = self.alpha_lo.cos().powi(2);
        (p_min, p_max)
    }

    /// Whether `alpha` lies inside the interval (closed).
    pub fn contains(&self, alpha: f64) -> bool {
        (self.alpha_lo..=self.alpha_hi).contains(&alpha)
    }
}

/// Maps a quarter-circle angle to its two-outcome state
/// `(cos^2 alpha, sin^2 alpha)`.
///
/// # Example
///
/// ```
/// let s = nshot::geometry::angle_to_state(std::f64::consts::FRAC_PI_4)?;
/// assert!((s.probs()[0] - 0.5).abs() < 1e-12);
/// # Ok::<(), nshot::Error>(())
/// ```
pub fn angle_to_state(alpha: f64) -> Result<StatePoint> {
    if !(0.0..=FRAC_PI_2).contains(&alpha) {
        return Err(Error::InvalidInterval(format!(
            "angle {alpha} outside [0, pi/2]"
        )));
    }
    StatePoint::new(vec![alpha.cos().powi(2), alpha.sin().powi(2)])
}

/// Maps a non-negative unit vector `x` on `S^{N-1}` to the state
/// `p_i = x_i^2`, renormalized so the probabilities sum to one exactly.
pub fn cartesian_to_state(x: &[f64]) -> Result<StatePoint> {
    if x.len() < 2 {
        return Err(Error::InvalidState(format!(
            "need at least 2 coordinates, got {}",
            x.len()
        )));
    }
    if let Some(bad) = x.iter().find(|&&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidState(format!(
            "coordinate {bad} must be finite and non-negative"
        )));
    }
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    if (norm2 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "squared norm {norm2} differs from 1 by more than 1e-9"
        )));
    }
    StatePoint::new(x.iter().map(|v| v * v / norm2).collect())
}

/// Cartesian coordinates on `S^{N-1}` from `N-1` hyperspherical angles in
/// `[0, pi/2]`:
/// `x_1 = cos t_1`, `x_2 = sin t_1 cos t_2`, ...,
/// `x_N = sin t_1 ... sin t_{N-1}`.
pub fn angles_to_cartesian(angles: &[f64]) -> Vec<f64> {
    debug_assert!(angles.iter().all(|t| (0.0..=FRAC_PI_2).contains(t)));
    let mut coords = Vec::with_capacity(angles.len() + 1);
    let mut sin_prod = 1.0;
    for &t in angles {
        coords.push(sin_prod * t.cos());
        sin_prod *= t.sin();
    }
    coords.push(sin_prod);
    coords
}

// --- spherical domains ------------------------------------------------------

/// A domain of states on the non-negative orthant of `S^{N-1}`: either the
/// whole orthant or an axis-aligned box in hyperspherical angle
/// coordinates.
///
/// The surface-area element in these coordinates is
/// `prod_{j=1}^{N-1} sin^{N-1-j}(t_j)`, so box areas factor into
/// one-dimensional integrals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SphericalDomain {
    /// The full non-negative orthant of `S^{N-1}`.
    FullOrthant {
        /// Ambient dimension `N >= 2`.
        dim: usize,
    },
    /// An axis-aligned box `[lo_j, hi_j]` in the `N-1` hyperspherical
    /// angles, each range inside `[0, pi/2]`.
    AngularBox {
        /// Per-angle ranges; the ambient dimension is `ranges.len() + 1`.
        ranges: Vec<(f64, f64)>,
    },
}

impl SphericalDomain {
    /// The full non-negative orthant of `S^{N-1}`.
    pub fn full_orthant(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDomain(format!(
                "dimension must be at least 2, got {dim}"
            )));
        }
        Ok(Self::FullOrthant { dim })
    }

    /// An axis-aligned hyperspherical box; each range must satisfy
    /// `0 <= lo < hi <= pi/2`.
    pub fn angular_box(ranges: Vec<(f64, f64)>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::InvalidDomain(
                "angular box needs at least one angle range".into(),
            ));
        }
        for &(lo, hi) in &ranges {
            if !(lo >= 0.0 && lo < hi && hi <= FRAC_PI_2) {
                return Err(Error::InvalidDomain(format!(
                    "angle range [{lo}, {hi}] must satisfy 0 <= lo < hi <= pi/2"
                )));
            }
        }
        Ok(Self::AngularBox { ranges })
    }

    /// Ambient dimension `N`.
    pub fn dim(&self) -> usize {
        match self {
            Self::FullOrthant { dim } => *dim,
            Self::AngularBox { ranges } => ranges.len() + 1,
        }
    }

    /// Per-angle coordinate ranges of the domain.
    pub fn angle_ranges(&self) -> Vec<(f64, f64)> {
        match self {
            Self::FullOrthant { dim } => vec![(0.0, FRAC_PI_2); dim - 1],
            Self::AngularBox { ranges } => ranges.clone(),
        }
    }

    /// Surface area of the domain; see [`domain_area`].
    pub fn area(&self) -> f64 {
        match self {
            Self::FullOrthant { dim } => orthant_area(*dim),
            Self::AngularBox { ranges } => {
                let n = ranges.len() + 1;
                ranges
                    .iter()
                    .enumerate()
                    .map(|(j, &(lo, hi))| sin_power_integral((n - 2 - j) as u32, lo, hi))
                    .product()
            }
        }
    }
}

/// Surface area of a domain in steradians.
///
/// The full orthant has the closed form `pi^{N/2} / (2^{N-1} Gamma(N/2))`;
/// angular boxes are integrated by composite Simpson quadrature on each
/// separable `sin^m` factor, with relative error well below 1e-6.
///
/// # Example
///
/// ```
/// use nshot::SphericalDomain;
/// // The octant of the 2-sphere: 4 pi / 8 = pi / 2.
/// let octant = SphericalDomain::full_orthant(3)?;
/// assert!((nshot::geometry::domain_area(&octant) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
/// # Ok::<(), nshot::Error>(())
/// ```
pub fn domain_area(domain: &SphericalDomain) -> f64 {
    domain.area()
}

/// Closed-form orthant area `pi^{N/2} / (2^{N-1} Gamma(N/2))`.
pub(crate) fn orthant_area(dim: usize) -> f64 {
    let nf = dim as f64;
    (nf / 2.0 * PI.ln() - (nf - 1.0) * 2f64.ln() - ln_gamma(nf / 2.0)).exp()
}

/// `int sin^m(t) dt` over `[lo, hi]` by composite Simpson's rule.
fn sin_power_integral(m: u32, lo: f64, hi: f64) -> f64 {
    if m == 0 {
        return hi - lo;
    }
    // 1024 panels keep the Simpson error around h^4 ~ 1e-12 relative for
    // every exponent that can arise from a realistic dimension.
    const PANELS: usize = 1024;
    let h = (hi - lo) / PANELS as f64;
    let f = |t: f64| t.sin().powi(m as i32);
    let mut sum = f(lo) + f(hi);
    for i in 1..PANELS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + i as f64 * h);
    }
    sum * h / 3.0
}

// --- discrete ensembles -----------------------------------------------------

/// A finite weighted set of states standing in for a continuous input
/// distribution.
///
/// Weights are non-negative and sum to one within 1e-12; states are
/// pairwise distinct (no two states agree in every coordinate within
/// 1e-12).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteEnsemble {
    states: Vec<StatePoint>,
    weights: Vec<f64>,
}

impl DiscreteEnsemble {
    /// Validates and wraps states with their weights.
    pub fn new(states: Vec<StatePoint>, weights: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidEnsemble("ensemble is empty".into()));
        }
        if states.len() != weights.len() {
            return Err(Error::InvalidEnsemble(format!(
                "{} states but {} weights",
                states.len(),
                weights.len()
            )));
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(Error::InvalidEnsemble(
                "states do not share a common dimension".into(),
            ));
        }
        if let Some(bad) = weights.iter().find(|&&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidEnsemble(format!(
                "weight {bad} must be finite and non-negative"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidEnsemble(format!(
                "weights sum to {sum}, must be 1 within {PROB_SUM_TOL:e}"
            )));
        }
        check_no_duplicates(&states)?;
        Ok(Self { states, weights })
    }

    /// The member states.
    pub fn states(&self) -> &[StatePoint] {
        &self.states
    }

    /// The member weights, aligned with [`Self::states`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of member states.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    /// Whether the ensemble has no states (never true after construction).
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Common dimension `N` of the member states.
    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }
}

/// Rejects ensembles with two states equal in every coordinate within
/// [`DUPLICATE_TOL`]. Sorting by first coordinate limits the comparison to
/// runs of near-equal leading coordinates.
fn check_no_duplicates(states: &[StatePoint]) -> Result<()> {
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by(|&a, &b| {
        states[a].probs()[0]
            .partial_cmp(&states[b].probs()[0])
            .expect("state probabilities are finite")
    });
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            let a = states[order[i]].probs();
            let b = states[order[j]].probs();
            if b[0] - a[0] > DUPLICATE_TOL {
                break;
            }
            if a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DUPLICATE_TOL) {
                return Err(Error::InvalidEnsemble(format!(
                    "states {} and {} coincide within {DUPLICATE_TOL:e}",
                    order[i], order[j]
                )));
            }
        }
    }
    Ok(())
}

/// Midpoint discretization of the uniform angle density on an interval:
/// `m` states at `alpha_lo + (j + 1/2) (alpha_hi - alpha_lo) / m`, each
/// with weight `1/m`.
///
/// Midpoints (rather than endpoints) avoid the degenerate quarter-circle
/// endpoints `p` in `{0, 1}` and halve the quadrature error order.
/// Panics if `m == 0`.
///
/// # Example
///
/// ```
/// use nshot::geometry::{uniform_angle_grid, AngleInterval};
/// let grid = uniform_angle_grid(&AngleInterval::full(), 2);
/// // midpoints pi/8 and 3 pi/8, weights 1/2 each
/// assert_eq!(grid.weights(), &[0.5, 0.5]);
/// ```
pub fn uniform_angle_grid(interval: &AngleInterval, m: usize) -> DiscreteEnsemble {
    assert!(m >= 1, "uniform_angle_grid requires m >= 1");
    let step = interval.width() / m as f64;
    let states: Vec<StatePoint> = (0..m)
        .map(|j| {
            let alpha = interval.lo() + (j as f64 + 0.5) * step;
            angle_to_state(alpha).expect("midpoints lie inside [0, pi/2]")
        })
        .collect();
    let weights = vec![1.0 / m as f64; m];
    DiscreteEnsemble::new(states, weights)
        .expect("midpoint grid angles are strictly increasing and distinct")
}

/// Grid angles of [`uniform_angle_grid`] without building the states.
pub fn uniform_angle_grid_angles(interval: &AngleInterval, m: usize) -> Vec<f64> {
    assert!(m >= 1, "uniform_angle_grid_angles requires m >= 1");
    let step = interval.width() / m as f64;
    (0..m)
        .map(|j| interval.lo() + (j as f64 + 0.5) * step)
        .collect()
}

/// Midpoint discretization of the uniform surface measure on a spherical
/// domain: an `m_per_axis`-point midpoint grid on each hyperspherical angle
/// (so `m_per_axis^(N-1)` states), each weighted by the local surface-area
/// element `prod sin^{N-1-j}(t_j)` and normalized to total weight one.
///
/// The weights approximate the uniform *surface* measure, not the uniform
/// angle measure; for `N = 2` the two coincide and the result reduces
/// exactly to [`uniform_angle_grid`]. States are enumerated in row-major
/// order (last angle fastest). Panics if `m_per_axis == 0`.
pub fn uniform_domain_grid(domain: &SphericalDomain, m_per_axis: usize) -> DiscreteEnsemble {
    assert!(m_per_axis >= 1, "uniform_domain_grid requires m_per_axis >= 1");
    let dim = domain.dim();
    let ranges = domain.angle_ranges();
    if dim == 2 {
        let (lo, hi) = ranges[0];
        let interval = AngleInterval::new(lo, hi).expect("validated at construction");
        return uniform_angle_grid(&interval, m_per_axis);
    }

    // Per-axis midpoints and their sin^m density factors.
    let axes: Vec<(Vec<f64>, Vec<f64>)> = ranges
        .iter()
        .enumerate()
        .map(|(j, &(lo, hi))| {
            let step = (hi - lo) / m_per_axis as f64;
            let mids: Vec<f64> = (0..m_per_axis)
                .map(|i| lo + (i as f64 + 0.5) * step)
                .collect();
            let exponent = (dim - 2 - j) as i32;
            let dens: Vec<f64> = mids.iter().map(|t| t.sin().powi(exponent)).collect();
            (mids, dens)
        })
        .collect();

    let count = m_per_axis.pow((dim - 1) as u32);
    let mut states = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut angles = vec![0.0; dim - 1];
    for flat in 0..count {
        let mut rest = flat;
        let mut density = 1.0;
        for axis in (0..dim - 1).rev() {
            let i = rest % m_per_axis;
            rest /= m_per_axis;
            angles[axis] = axes[axis].0[i];
            density *= axes[axis].1[i];
        }
        let x = angles_to_cartesian(&angles);
        states.push(cartesian_to_state(&x).expect("hyperspherical coordinates are unit vectors"));
        weights.push(density);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    DiscreteEnsemble::new(states, weights).expect("distinct midpoint angles give distinct states")
}

// --- tests -----------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn angle_interval_validation() {
        assert!(AngleInterval::new(0.0, FRAC_PI_2).is_ok());
        assert!(AngleInterval::new(0.2, 0.2).is_err()); // zero length
        assert!(AngleInterval::new(-0.1, 0.5).is_err());
        assert!(AngleInterval::new(0.5, 1.6).is_err()); // above pi/2
        assert!(AngleInterval::new(0.5, 0.3).is_err());
    }

    #[test]
    fn prob_bounds_are_ordered() {
        let iv = AngleInterval::new(0.2, 0.6).unwrap();
        let (p_min, p_max) = iv.prob_bounds();
        assert!(p_min < p_max);
        assert_relative_eq!(p_min, 0.6f64.cos().powi(2), max_relative = 1e-15);
        assert_relative_eq!(p_max, 0.2f64.cos().powi(2), max_relative = 1e-15);
        // the full quarter circle spans all probabilities
        let (lo, hi) = AngleInterval::full().prob_bounds();
        assert!(lo < 1e-30 && (hi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn angle_to_state_examples() {
        assert_eq!(angle_to_state(0.0).unwrap().probs(), &[1.0, 0.0]);
        let s = angle_to_state(FRAC_PI_4).unwrap();
        assert_relative_eq!(s.probs()[0], 0.5, max_relative = 1e-12);
        let s = angle_to_state(FRAC_PI_3).unwrap();
        assert_relative_eq!(s.probs()[0], 0.25, max_relative = 1e-12); // cos^2 60deg
        assert_relative_eq!(s.probs()[1], 0.75, max_relative = 1e-12);
        assert!(angle_to_state(-0.1).is_err());
        assert!(angle_to_state(1.6).is_err());
    }

    #[test]
    fn cartesian_to_state_examples() {
        let s = cartesian_to_state(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.probs(), &[1.0, 0.0, 0.0]);
        let r = 0.5f64.sqrt();
        let s = cartesian_to_state(&[r, r, 0.0]).unwrap();
        assert_relative_eq!(s.probs()[0], 0.5, max_relative = 1e-12);
        let s = cartesian_to_state(&[0.6, 0.8]).unwrap();
        assert_relative_eq!(s.probs()[0], 0.36, max_relative = 1e-12);
        assert_relative_eq!(s.probs()[1], 0.64, max_relative = 1e-12);
        assert!(cartesian_to_state(&[0.5, 0.5]).is_err()); // not unit
        assert!(cartesian_to_state(&[-0.6, 0.8]).is_err()); // negative
    }

    #[test]
    fn uniform_angle_grid_examples() {
        let full = AngleInterval::full();
        let g1 = uniform_angle_grid(&full, 1);
        assert_eq!(g1.len(), 1);
        assert_relative_eq!(g1.states()[0].probs()[0], 0.5, max_relative = 1e-12); // pi/4

        let g2 = uniform_angle_grid(&full, 2);
        assert_relative_eq!(
            g2.states()[0].probs()[0],
            (PI / 8.0).cos().powi(2),
            max_relative = 1e-15
        );

        let iv = AngleInterval::new(0.2, 0.6).unwrap();
        let angles = uniform_angle_grid_angles(&iv, 4);
        for (got, want) in angles.iter().zip([0.25, 0.35, 0.45, 0.55]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        // weights exactly 1/m
        let g = uniform_angle_grid(&iv, 4);
        assert!(g.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn orthant_areas() {
        assert_relative_eq!(orthant_area(2), FRAC_PI_2, max_relative = 1e-13);
        assert_relative_eq!(orthant_area(3), FRAC_PI_2, max_relative = 1e-13);
        // N=4: pi^2/8 = 1.2337...
        assert_relative_eq!(orthant_area(4), PI * PI / 8.0, max_relative = 1e-13);
    }

    #[test]
    fn box_area_matches_closed_form() {
        // Full-orthant boxes must agree with the closed form: the Simpson
        // quadrature is checked against Gamma-function sin^m integrals.
        for dim in 2..=6 {
            let ranges = vec![(0.0, FRAC_PI_2); dim - 1];
            let boxed = SphericalDomain::angular_box(ranges).unwrap();
            assert_relative_eq!(boxed.area(), orthant_area(dim), max_relative = 1e-9);
        }
        // Half-range octant slice: integral of sin t over [0, pi/4] times
        // the full azimuthal quarter turn.
        let slice = SphericalDomain::angular_box(vec![(0.0, FRAC_PI_4), (0.0, FRAC_PI_2)]).unwrap();
        let want = (1.0 - FRAC_PI_4.cos()) * FRAC_PI_2;
        assert_relative_eq!(slice.area(), want, max_relative = 1e-9);
    }

    #[test]
    fn sin_power_integral_vs_gamma_closed_form() {
        // int_0^{pi/2} sin^m = sqrt(pi)/2 * Gamma((m+1)/2) / Gamma(m/2 + 1)
        for m in 0..=12u32 {
            let closed = (PI.sqrt() / 2.0)
                * (ln_gamma((m as f64 + 1.0) / 2.0) - ln_gamma(m as f64 / 2.0 + 1.0)).exp();
            assert_relative_eq!(
                sin_power_integral(m, 0.0, FRAC_PI_2),
                closed,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn discrete_ensemble_validation() {
        let s = |p: f64| StatePoint::binary(p).unwrap();
        assert!(DiscreteEnsemble::new(vec![], vec![]).is_err());
        assert!(DiscreteEnsemble::new(vec![s(0.2)], vec![0.5, 0.5]).is_err());
        assert!(DiscreteEnsemble::new(vec![s(0.2), s(0.8)], vec![0.6, 0.6]).is_err());
        assert!(DiscreteEnsemble::new(vec![s(0.2), s(0.8)], vec![-0.1, 1.1]).is_err());
        assert!(DiscreteEnsemble::new(vec![s(0.2), s(0.8)], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn discrete_ensemble_rejects_duplicates() {
        let s = |p: f64| StatePoint::binary(p).unwrap();
        // exact duplicate
        let err = DiscreteEnsemble::new(vec![s(0.3), s(0.3)], vec![0.5, 0.5]);
        assert!(matches!(err, Err(Error::InvalidEnsemble(_))));
        // duplicate within 1e-12 per coordinate
        let near = StatePoint::new(vec![0.3 + 1e-13, 0.7 - 1e-13]).unwrap();
        assert!(DiscreteEnsemble::new(vec![s(0.3), near], vec![0.5, 0.5]).is_err());
        // clearly distinct states pass
        let apart = StatePoint::new(vec![0.3 + 1e-9, 0.7 - 1e-9]).unwrap();
        assert!(DiscreteEnsemble::new(vec![s(0.3), apart], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn domain_grid_reduces_to_angle_grid_in_2d() {
        let domain = SphericalDomain::full_orthant(2).unwrap();
        let a = uniform_domain_grid(&domain, 16);
        let b = uniform_angle_grid(&AngleInterval::full(), 16);
        assert_eq!(a, b);
    }

    #[test]
    fn domain_grid_weights_follow_surface_element() {
        // N=3: density proportional to sin(theta_1), independent of the
        // azimuthal angle.
        let domain = SphericalDomain::full_orthant(3).unwrap();
        let m = 8;
        let grid = uniform_domain_grid(&domain, m);
        assert_eq!(grid.len(), m * m);
        let angles = uniform_angle_grid_angles(&AngleInterval::full(), m);
        // Row-major enumeration: row i uses polar midpoint angles[i].
        for i in 0..m {
            for j in 0..m {
                let w = grid.weights()[i * m + j];
                let expect = angles[i].sin();
                let base = grid.weights()[0] / angles[0].sin();
                assert_relative_eq!(w, base * expect, max_relative = 1e-12);
            }
        }
        let total: f64 = grid.weights().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn domain_grid_quadrature_estimates_area() {
        // Midpoint quadrature of the raw surface element over the full
        // octant should reproduce Omega = pi/2 within 1%.
        let domain = SphericalDomain::full_orthant(3).unwrap();
        let m = 32;
        let angles = uniform_angle_grid_angles(&AngleInterval::full(), m);
        let cell = (FRAC_PI_2 / m as f64).powi(2);
        let mut estimate = 0.0;
        for t in &angles {
            estimate += t.sin() * m as f64 * cell;
        }
        assert_relative_eq!(estimate, FRAC_PI_2, max_relative = 0.01);
        // and the normalized grid built from the same element sums to one
        let grid = uniform_domain_grid(&domain, m);
        let total: f64 = grid.weights().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn domain_grid_total_weight_envelope() {
        // Larger-dimension spot checks of the weight normalization.
        for (dim, m) in [(2, 64), (3, 64), (4, 16), (5, 8)] {
            let domain = SphericalDomain::full_orthant(dim).unwrap();
            let grid = uniform_domain_grid(&domain, m);
            let total: f64 = grid.weights().iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }
}
