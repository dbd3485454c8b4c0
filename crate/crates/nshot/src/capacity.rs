//! Channel capacity of the repeated-measurement channel over a discrete
//! state grid, by alternating maximization (Blahut-Arimoto), plus
//! verification of the optimality conditions and a sweep driver for
//! capacity-versus-prediction tables.
//!
//! The solver certifies its answer: every iteration yields a lower bound
//! (the mutual information of the current weights) and an upper bound
//! (the best single-state divergence against the current marginal), and
//! the run stops when their gap is below tolerance. All reductions use
//! fixed block sizes and fixed orders, so results are bit-identical for
//! any worker-thread count.

use crate::asymptotics::{i_sup_ndim, i_sup_qubit};
use crate::error::{Error, Result};
use crate::geometry::{
    uniform_angle_grid, uniform_domain_grid, AngleInterval, DiscreteEnsemble, SphericalDomain,
};
use crate::information::{
    individual_information_given, output_marginal, MeasurementChannel,
};
use rayon::prelude::*;
use serde::Serialize;

/// The working set (grid rows over the outcome lattice) may not exceed
/// this many probabilities (~1 GB of doubles).
pub const ROW_GUARD: u64 = 125_000_000;

/// Weights at or below this threshold count as off-support when checking
/// the optimality conditions. Alternating maximization drives
/// non-support weights to zero only asymptotically, so exact zero is the
/// wrong test.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-9;

/// Grid points per task in the parallel update loops; fixed so rounding
/// order is independent of the worker count.
const GRID_BLOCK: usize = 32;

/// Row entries with log-probability below this are materialized as exact
/// zero. Anything smaller (< 1e-300) rounds to zero anyway once
/// multiplied by a weight, but inconsistently - a subnormal surviving in
/// the row while vanishing from the marginal would masquerade as an
/// absolute-continuity violation. The discarded mass is < 1e-297 per
/// row, far below any tolerance.
const ROW_LN_FLOOR: f64 = -690.0;

/// Update step used in place of an infinite divergence. An infinite
/// `D_j` means the current marginal has no mass somewhere state `j`
/// does; pushing a large-but-finite step of weight there restores
/// coverage on the next iteration without poisoning the log-domain
/// update the way `+inf` would.
const INF_STEP: f64 = 1e4;

// --- configuration and result types ----------------------------------------

/// Stopping rule and support bookkeeping for [`blahut_arimoto`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Stop when the certified duality gap drops to this many nats.
    pub tolerance: f64,
    /// Hard iteration cap; hitting it yields a result with
    /// `converged == false`, not an error.
    pub max_iterations: u64,
    /// Weight below which a grid point is reported as off-support.
    pub support_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 100_000,
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
        }
    }
}

impl SolverConfig {
    /// Checks the configuration invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidArgument {
                name: "tolerance",
                reason: format!("must be a positive finite gap, got {}", self.tolerance),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument {
                name: "max_iterations",
                reason: "must be at least 1".into(),
            });
        }
        if !(0.0..=1e-3).contains(&self.support_threshold) {
            return Err(Error::InvalidArgument {
                name: "support_threshold",
                reason: format!("must lie in [0, 1e-3], got {}", self.support_threshold),
            });
        }
        Ok(())
    }
}

/// Output of a capacity solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityResult {
    /// Certified lower bound on the grid capacity, in nats; within
    /// `tolerance` of the true value when `converged`.
    pub capacity: f64,
    /// Final input distribution, aligned with the grid, summing to 1.
    pub optimal_weights: Vec<f64>,
    /// Evaluations performed (the converging evaluation included).
    pub iterations: u64,
    /// `max_j I(K; p_j) - capacity` at the final weights: the achieved
    /// duality gap.
    pub kkt_gap: f64,
    /// `max - min` of `I(K; p_j)` over supported grid points at the
    /// final weights.
    pub support_flatness: f64,
    /// Whether the gap reached tolerance within the iteration budget.
    pub converged: bool,
}

// --- solver -----------------------------------------------------------------

/// Capacity of the channel restricted to inputs on `grid`, by
/// Blahut-Arimoto iteration starting from the grid's own weights.
///
/// Zero-weight grid points stay at zero under the multiplicative update,
/// so they are effectively excluded; pass positive weights (for example
/// the uniform grids from the geometry module) to optimize over every
/// point.
///
/// Non-convergence is a reported outcome (`converged == false` with the
/// achieved gap in `kkt_gap`), not an error.
///
/// # Example
///
/// ```
/// use nshot::capacity::{blahut_arimoto, SolverConfig};
/// use nshot::geometry::{uniform_angle_grid, AngleInterval};
/// use nshot::information::MeasurementChannel;
/// let grid = uniform_angle_grid(&AngleInterval::full(), 16);
/// let channel = MeasurementChannel::new(2, 10)?;
/// let result = blahut_arimoto(&grid, &channel, &SolverConfig::default())?;
/// assert!(result.converged && result.capacity > 0.0);
/// # Ok::<(), nshot::Error>(())
/// ```
pub fn blahut_arimoto(
    grid: &DiscreteEnsemble,
    channel: &MeasurementChannel,
    config: &SolverConfig,
) -> Result<CapacityResult> {
    config.validate()?;
    if grid.dim() != channel.dim() {
        return Err(Error::DimensionMismatch(format!(
            "grid states have {} outcomes, channel has {}",
            grid.dim(),
            channel.dim()
        )));
    }
    let m = grid.len();
    let k_len = channel.outcome_count() as usize;
    let working = m as u128 * k_len as u128;
    if working > ROW_GUARD as u128 {
        return Err(Error::OutcomeSpaceTooLarge {
            size: working,
            limit: ROW_GUARD,
        });
    }

    // Conditional rows P(k | p_j), flat row-major, with per-row
    // negentropies sum_k p ln p precomputed.
    let mut rows = vec![0.0f64; m * k_len];
    rows.par_chunks_mut(k_len)
        .zip(grid.states().par_iter())
        .for_each(|(row, state)| {
            let log_row = channel.log_row(state).expect("dimension already checked");
            for (slot, &l) in row.iter_mut().zip(&log_row) {
                *slot = if l > ROW_LN_FLOOR { l.exp() } else { 0.0 };
            }
        });
    let negentropy: Vec<f64> = rows
        .par_chunks(k_len)
        .map(|row| {
            let mut h = 0.0;
            for &p in row {
                if p > 0.0 {
                    h += p * p.ln();
                }
            }
            h
        })
        .collect();

    // Log-domain weights guard against underflow over long runs; the
    // materialized linear weights are renormalized each iteration.
    let mut log_w: Vec<f64> = grid
        .weights()
        .iter()
        .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
        .collect();
    let mut w = grid.weights().to_vec();
    // Points that start at weight zero stay there under the
    // multiplicative update; they take no part in the optimization or
    // its certificate.
    let alive: Vec<bool> = w.iter().map(|&wj| wj > 0.0).collect();

    let blocks = m.div_ceil(GRID_BLOCK);
    let mut q_partials = vec![vec![0.0f64; k_len]; blocks];
    let mut q = vec![0.0f64; k_len];
    let mut ln_q = vec![0.0f64; k_len];
    let mut d = vec![0.0f64; m];

    let mut prev_lower = f64::NEG_INFINITY;
    let mut result = None;
    for it in 1..=config.max_iterations {
        // marginal q = sum_j w_j row_j, reduced in fixed block order
        q_partials
            .par_iter_mut()
            .enumerate()
            .for_each(|(b, partial)| {
                partial.iter_mut().for_each(|x| *x = 0.0);
                let j_end = ((b + 1) * GRID_BLOCK).min(m);
                for j in b * GRID_BLOCK..j_end {
                    let wj = w[j];
                    if wj == 0.0 {
                        continue;
                    }
                    let row = &rows[j * k_len..(j + 1) * k_len];
                    for (slot, &r) in partial.iter_mut().zip(row) {
                        *slot += wj * r;
                    }
                }
            });
        q.iter_mut().for_each(|x| *x = 0.0);
        for partial in &q_partials {
            for (slot, &p) in q.iter_mut().zip(partial) {
                *slot += p;
            }
        }
        // Sentinel 0 where q vanishes: every positively weighted row is
        // zero there too, so the product term below is an exact 0 rather
        // than 0 * (-inf). Rows with mass on such columns can only be
        // zero-weight points, whose divergence is irrelevant to both
        // bounds... except through the upper bound, so patch those to
        // +inf explicitly afterwards.
        ln_q.par_iter_mut().zip(q.par_iter()).for_each(|(l, &qk)| {
            *l = if qk > 0.0 { qk.ln() } else { 0.0 };
        });
        let zero_cols: Vec<usize> = q
            .iter()
            .enumerate()
            .filter_map(|(k, &qk)| (qk == 0.0).then_some(k))
            .collect();

        // per-state divergences D_j = KL(row_j || q)
        d.par_chunks_mut(GRID_BLOCK)
            .enumerate()
            .for_each(|(b, chunk)| {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    let j = b * GRID_BLOCK + i;
                    let row = &rows[j * k_len..(j + 1) * k_len];
                    let mut dot = 0.0;
                    for (&r, &l) in row.iter().zip(&ln_q) {
                        dot += r * l;
                    }
                    let mut dj = negentropy[j] - dot;
                    for &zc in &zero_cols {
                        if row[zc] > 0.0 {
                            dj = f64::INFINITY;
                            break;
                        }
                    }
                    *slot = dj;
                }
            });

        // certificate: I(K;P) <= capacity(grid) <= max_j D_j
        let mut lower = 0.0;
        let mut upper = f64::NEG_INFINITY;
        for (j, (&wj, &dj)) in w.iter().zip(&d).enumerate() {
            if wj > 0.0 {
                lower += wj * dj;
            }
            if alive[j] && dj > upper {
                upper = dj;
            }
        }
        // classic alternating-maximization monotonicity
        debug_assert!(
            lower >= prev_lower - 1e-12,
            "lower bound dipped: {prev_lower} -> {lower} at iteration {it}"
        );
        prev_lower = lower;

        let gap = upper - lower;
        if gap <= config.tolerance || it == config.max_iterations {
            let flatness = support_flatness(&w, &d, config.support_threshold);
            result = Some(CapacityResult {
                capacity: lower,
                optimal_weights: Vec::new(), // filled below
                iterations: it,
                kkt_gap: gap,
                support_flatness: flatness,
                converged: gap <= config.tolerance,
            });
            break;
        }

        // multiplicative update w'_j ~ w_j exp(D_j), in log domain
        for (j, (lw, &dj)) in log_w.iter_mut().zip(&d).enumerate() {
            if alive[j] {
                *lw += if dj.is_finite() { dj } else { INF_STEP };
            }
        }
        let ln_z = log_sum_exp(&log_w);
        let mut sum = 0.0;
        for (wj, lw) in w.iter_mut().zip(log_w.iter_mut()) {
            *lw -= ln_z;
            *wj = lw.exp();
            sum += *wj;
        }
        for wj in w.iter_mut() {
            *wj /= sum;
        }
    }

    let mut result = result.expect("loop always records a result");
    // exact-sum renormalization so downstream ensembles revalidate
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|wj| *wj /= total);
    result.optimal_weights = w;
    Ok(result)
}

fn support_flatness(w: &[f64], d: &[f64], threshold: f64) -> f64 {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (&wj, &dj) in w.iter().zip(d) {
        if wj > threshold {
            min = min.min(dj);
            max = max.max(dj);
        }
    }
    if min.is_finite() {
        max - min
    } else {
        0.0
    }
}

/// Log of a sum of exponentials, max-shifted, in slice order.
fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

// --- optimality verification ------------------------------------------------

/// Outcome of checking the capacity optimality conditions for a given
/// input distribution: supported states must achieve the capacity
/// estimate, everything else must not exceed it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    /// `I(K;P)` of the weighted grid - the capacity estimate the
    /// conditions are checked against.
    pub capacity_estimate: f64,
    /// `I(K; p_j)` for each grid point, in grid order.
    pub grid_information: Vec<f64>,
    /// `I(K; p)` for each probe state, in probe order; may contain
    /// `+inf` where a probe escapes the marginal's support.
    pub probe_information: Vec<f64>,
    /// `max - min` of `I(K; p_j)` over supported grid points.
    pub support_flatness: f64,
    /// Largest excess `I(K; p) - capacity_estimate` over all grid and
    /// probe states.
    pub kkt_gap: f64,
    /// Supported grid indices with `|I(K; p_j) - capacity| > tol`.
    pub support_violations: Vec<usize>,
    /// Off-support grid indices with `I(K; p_j) > capacity + tol`.
    pub off_support_violations: Vec<usize>,
    /// Probe indices with `I(K; p) > capacity + tol`.
    pub probe_violations: Vec<usize>,
    /// True iff all three violation lists are empty.
    pub pass: bool,
}

/// Checks the optimality conditions for `weights` on `grid` through
/// `channel`, probing additionally at the states of `probe`.
///
/// A distribution is capacity-achieving iff every supported state's
/// individual information equals the mutual information and no other
/// state exceeds it; `tol` is the slack for both comparisons. Support
/// means weight above [`DEFAULT_SUPPORT_THRESHOLD`]. An infinite probe
/// information (marginal missing mass the probe has) is a probe
/// violation, not an error.
pub fn kkt_verify(
    weights: &[f64],
    grid: &DiscreteEnsemble,
    channel: &MeasurementChannel,
    probe: &DiscreteEnsemble,
    tol: f64,
) -> Result<KktReport> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidArgument {
            name: "tol",
            reason: format!("must be a positive finite slack, got {tol}"),
        });
    }
    if weights.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} grid points",
            weights.len(),
            grid.len()
        )));
    }
    if probe.dim() != grid.dim() {
        return Err(Error::DimensionMismatch(format!(
            "probe states have {} outcomes, grid has {}",
            probe.dim(),
            grid.dim()
        )));
    }
    let weighted = DiscreteEnsemble::new(grid.states().to_vec(), weights.to_vec())?;
    let marginal = output_marginal(&weighted, channel)?;
    let info_of = |states: &[crate::prob_kernel::StatePoint]| -> Result<Vec<f64>> {
        states
            .iter()
            .map(|s| individual_information_given(s, &marginal))
            .collect()
    };
    let grid_information = info_of(grid.states())?;
    let probe_information = info_of(probe.states())?;

    // I(K;P) = sum_j w_j I(K;p_j): the definitional decomposition, so the
    // estimate is exactly consistent with the per-point values.
    let capacity_estimate: f64 = weights
        .iter()
        .zip(&grid_information)
        .filter(|(&wj, _)| wj > 0.0)
        .map(|(&wj, &ij)| wj * ij)
        .sum();

    let mut support_violations = Vec::new();
    let mut off_support_violations = Vec::new();
    let mut min_sup = f64::INFINITY;
    let mut max_sup = f64::NEG_INFINITY;
    let mut kkt_gap = f64::NEG_INFINITY;
    for (j, (&wj, &ij)) in weights.iter().zip(&grid_information).enumerate() {
        kkt_gap = kkt_gap.max(ij - capacity_estimate);
        if wj > DEFAULT_SUPPORT_THRESHOLD {
            min_sup = min_sup.min(ij);
            max_sup = max_sup.max(ij);
            if (ij - capacity_estimate).abs() > tol {
                support_violations.push(j);
            }
        } else if ij > capacity_estimate + tol {
            off_support_violations.push(j);
        }
    }
    let mut probe_violations = Vec::new();
    for (j, &ij) in probe_information.iter().enumerate() {
        kkt_gap = kkt_gap.max(ij - capacity_estimate);
        if ij > capacity_estimate + tol {
            probe_violations.push(j);
        }
    }
    let pass = support_violations.is_empty()
        && off_support_violations.is_empty()
        && probe_violations.is_empty();
    Ok(KktReport {
        capacity_estimate,
        grid_information,
        probe_information,
        support_flatness: if min_sup.is_finite() {
            max_sup - min_sup
        } else {
            0.0
        },
        kkt_gap,
        support_violations,
        off_support_violations,
        probe_violations,
        pass,
    })
}

// --- capacity sweep ---------------------------------------------------------

/// One state-space geometry for [`capacity_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub enum SweepDomain {
    /// Qubit angle interval, discretized with `grid_size` points total.
    Interval(AngleInterval),
    /// Higher-dimensional domain, discretized with `grid_size` points
    /// per angular axis.
    Domain(SphericalDomain),
}

impl SweepDomain {
    fn descriptor(&self) -> String {
        match self {
            SweepDomain::Interval(iv) => format!("interval[{:.4},{:.4}]", iv.lo(), iv.hi()),
            SweepDomain::Domain(SphericalDomain::FullOrthant { dim }) => {
                format!("orthant(N={dim})")
            }
            SweepDomain::Domain(d @ SphericalDomain::AngularBox { .. }) => {
                let ranges: Vec<String> = d
                    .angle_ranges()
                    .iter()
                    .map(|(lo, hi)| format!("[{lo:.4},{hi:.4}]"))
                    .collect();
                format!("box(N={}; {})", d.dim(), ranges.join("x"))
            }
        }
    }

    fn grid(&self, grid_size: usize) -> DiscreteEnsemble {
        match self {
            SweepDomain::Interval(iv) => uniform_angle_grid(iv, grid_size),
            SweepDomain::Domain(d) => uniform_domain_grid(d, grid_size),
        }
    }

    fn predicted(&self, n: u64) -> f64 {
        match self {
            SweepDomain::Interval(iv) => i_sup_qubit(n, iv),
            SweepDomain::Domain(d) => i_sup_ndim(d.dim(), n, d.area()),
        }
    }
}

/// One row of a capacity sweep. A row that could not be computed keeps
/// its `error` and leaves the numeric fields empty; a row whose solve
/// merely failed to converge reports the certified lower bound alongside
/// the error note.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Human-readable geometry label.
    pub descriptor: String,
    /// Copies per channel use.
    pub n: u64,
    /// Solved grid capacity, nats.
    pub capacity: Option<f64>,
    /// `exp(capacity)`: the effective distinguishable-state count.
    pub w_effective: Option<f64>,
    /// Closed-form asymptotic prediction for this geometry, nats.
    pub predicted: Option<f64>,
    /// `capacity - predicted`.
    pub gap: Option<f64>,
    /// Failure note, if any.
    pub error: Option<String>,
}

/// Solves the capacity for every `(domain, n)` pair (domain-major order)
/// and tabulates against the asymptotic predictions. Failures are
/// recorded per row and the sweep continues.
pub fn capacity_sweep(
    domains: &[SweepDomain],
    n_values: &[u64],
    grid_size: usize,
    config: &SolverConfig,
) -> Vec<SweepRow> {
    let mut table = Vec::with_capacity(domains.len() * n_values.len());
    for domain in domains {
        let grid = domain.grid(grid_size);
        for &n in n_values {
            let mut row = SweepRow {
                descriptor: domain.descriptor(),
                n,
                capacity: None,
                w_effective: None,
                predicted: None,
                gap: None,
                error: None,
            };
            match MeasurementChannel::new(grid.dim(), n)
                .and_then(|channel| blahut_arimoto(&grid, &channel, config))
            {
                Ok(result) => {
                    let predicted = domain.predicted(n);
                    row.capacity = Some(result.capacity);
                    row.w_effective = Some(result.capacity.exp());
                    row.predicted = Some(predicted);
                    row.gap = Some(result.capacity - predicted);
                    if !result.converged {
                        row.error = Some(format!(
                            "not converged after {} iterations (gap {:.3e})",
                            result.iterations, result.kkt_gap
                        ));
                    }
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            table.push(row);
        }
    }
    table
}

// --- tests -----------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob_kernel::StatePoint;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn noiseless_bit() -> DiscreteEnsemble {
        DiscreteEnsemble::new(
            vec![
                StatePoint::new(vec![1.0, 0.0]).unwrap(),
                StatePoint::new(vec![0.0, 1.0]).unwrap(),
            ],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for bad in [
            SolverConfig {
                tolerance: 0.0,
                ..Default::default()
            },
            SolverConfig {
                tolerance: -1.0,
                ..Default::default()
            },
            SolverConfig {
                max_iterations: 0,
                ..Default::default()
            },
            SolverConfig {
                support_threshold: 2e-3,
                ..Default::default()
            },
            SolverConfig {
                support_threshold: -1e-12,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn noiseless_binary_channel() {
        let ch = MeasurementChannel::new(2, 1).unwrap();
        let result =
            blahut_arimoto(&noiseless_bit(), &ch, &SolverConfig::default()).unwrap();
        assert!(result.converged);
        assert_relative_eq!(result.capacity, 2f64.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(result.optimal_weights[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(result.optimal_weights[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn noiseless_ternary_channel() {
        let grid = DiscreteEnsemble::new(
            vec![
                StatePoint::new(vec![1.0, 0.0, 0.0]).unwrap(),
                StatePoint::new(vec![0.0, 1.0, 0.0]).unwrap(),
                StatePoint::new(vec![0.0, 0.0, 1.0]).unwrap(),
            ],
            vec![1.0 / 3.0; 3],
        )
        .unwrap();
        let ch = MeasurementChannel::new(3, 1).unwrap();
        let result = blahut_arimoto(&grid, &ch, &SolverConfig::default()).unwrap();
        assert!(result.converged);
        assert_relative_eq!(result.capacity, 3f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn single_input_has_zero_capacity() {
        let grid = DiscreteEnsemble::new(
            vec![StatePoint::binary(0.5).unwrap()],
            vec![1.0],
        )
        .unwrap();
        let ch = MeasurementChannel::new(2, 8).unwrap();
        let result = blahut_arimoto(&grid, &ch, &SolverConfig::default()).unwrap();
        assert!(result.converged);
        assert_eq!(result.capacity, 0.0);
        assert_eq!(result.iterations, 1);
    }

    #[test]
    fn capacity_frozen_small_instances() {
        // 16-point uniform grid on the quarter circle, n = 100, and its
        // even-index 8-point subgrid. Reference values from an
        // independent solver run at the same tolerance.
        let ch = MeasurementChannel::new(2, 100).unwrap();
        let full = uniform_angle_grid(&AngleInterval::full(), 16);
        let config = SolverConfig::default();
        let full_result = blahut_arimoto(&full, &ch, &config).unwrap();
        assert!(full_result.converged);
        assert_abs_diff_eq!(full_result.capacity, 2.09157612, epsilon = 1e-4);

        let sub_states: Vec<StatePoint> = full
            .states()
            .iter()
            .step_by(2)
            .cloned()
            .collect();
        let sub = DiscreteEnsemble::new(sub_states, vec![1.0 / 8.0; 8]).unwrap();
        let sub_result = blahut_arimoto(&sub, &ch, &config).unwrap();
        assert_abs_diff_eq!(sub_result.capacity, 1.96881066, epsilon = 1e-4);
        // sub-grid capacity never beats the full grid
        assert!(sub_result.capacity <= full_result.capacity + config.tolerance);
    }

    #[test]
    fn capacity_invariant_under_grid_permutation() {
        let ch = MeasurementChannel::new(2, 60).unwrap();
        let grid = uniform_angle_grid(&AngleInterval::new(0.2, 1.3).unwrap(), 12);
        let config = SolverConfig::default();
        let base = blahut_arimoto(&grid, &ch, &config).unwrap();
        // deterministic shuffle: reverse + swap pairs
        let mut states: Vec<StatePoint> = grid.states().to_vec();
        states.reverse();
        states.swap(1, 7);
        states.swap(3, 9);
        let permuted =
            DiscreteEnsemble::new(states, grid.weights().to_vec()).unwrap();
        let shuffled = blahut_arimoto(&permuted, &ch, &config).unwrap();
        assert!(
            (base.capacity - shuffled.capacity).abs() <= 2.0 * config.tolerance,
            "{} vs {}",
            base.capacity,
            shuffled.capacity
        );
    }

    #[test]
    fn optimal_weights_symmetric_on_full_interval() {
        let ch = MeasurementChannel::new(2, 100).unwrap();
        let grid = uniform_angle_grid(&AngleInterval::full(), 64);
        let config = SolverConfig {
            max_iterations: 2_000_000,
            ..Default::default()
        };
        let result = blahut_arimoto(&grid, &ch, &config).unwrap();
        assert!(result.converged);
        let w = &result.optimal_weights;
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        for j in 0..w.len() / 2 {
            assert_abs_diff_eq!(w[j], w[w.len() - 1 - j], epsilon = 1e-6);
        }
    }

    #[test]
    fn grid_doubling_contracts() {
        // Successive grid doublings converge geometrically (ratio well
        // under 0.7), and every capacity respects the ln(grid size)
        // ceiling.
        let ch = MeasurementChannel::new(2, 100).unwrap();
        let config = SolverConfig {
            max_iterations: 2_000_000,
            ..Default::default()
        };
        let caps: Vec<f64> = [16usize, 32, 64, 128]
            .iter()
            .map(|&m| {
                let grid = uniform_angle_grid(&AngleInterval::full(), m);
                let r = blahut_arimoto(&grid, &ch, &config).unwrap();
                assert!(r.converged);
                assert!(r.capacity <= (m as f64).ln());
                r.capacity
            })
            .collect();
        let diffs: Vec<f64> = caps.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for pair in diffs.windows(2) {
            assert!(
                pair[1] <= 0.7 * pair[0],
                "doubling differences not contracting: {diffs:?}"
            );
        }
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let ch = MeasurementChannel::new(2, 200).unwrap();
        let grid = uniform_angle_grid(&AngleInterval::full(), 32);
        let config = SolverConfig {
            max_iterations: 5,
            ..Default::default()
        };
        let result = blahut_arimoto(&grid, &ch, &config).unwrap();
        assert!(!result.converged);
        assert_eq!(result.iterations, 5);
        assert!(result.kkt_gap > config.tolerance);
        // the certified lower bound is still a valid capacity statement
        assert!(result.capacity > 0.0 && result.capacity <= (32f64).ln());
    }

    #[test]
    fn working_set_guard() {
        // 2000 grid points x 100001 outcomes = 2e8 > guard
        let ch = MeasurementChannel::new(2, 100_000).unwrap();
        let grid = uniform_angle_grid(&AngleInterval::full(), 2000);
        let err = blahut_arimoto(&grid, &ch, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::OutcomeSpaceTooLarge { .. }));
    }

    #[test]
    fn kkt_passes_on_solver_output() {
        let ch = MeasurementChannel::new(2, 1).unwrap();
        let grid = noiseless_bit();
        let result = blahut_arimoto(&grid, &ch, &SolverConfig::default()).unwrap();
        let probe = DiscreteEnsemble::new(
            vec![
                StatePoint::binary(0.0).unwrap(),
                StatePoint::binary(0.5).unwrap(),
                StatePoint::binary(1.0).unwrap(),
            ],
            vec![1.0 / 3.0; 3],
        )
        .unwrap();
        let report =
            kkt_verify(&result.optimal_weights, &grid, &ch, &probe, 1e-6).unwrap();
        assert!(report.pass, "{report:?}");
        assert_relative_eq!(report.capacity_estimate, 2f64.ln(), epsilon = 1e-9);
        // the even-mixture probe is strictly suboptimal
        assert_abs_diff_eq!(report.probe_information[1], 0.0, epsilon = 1e-12);
        assert!(report.probe_information[1] < 2f64.ln());
    }

    #[test]
    fn kkt_flags_skewed_weights() {
        let ch = MeasurementChannel::new(2, 1000).unwrap();
        let grid = uniform_angle_grid(&AngleInterval::full(), 64);
        let m = grid.len();
        let raw: Vec<f64> = (0..m).map(|j| (j + 1) as f64).collect();
        let total: f64 = raw.iter().sum();
        let skewed: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let probe = DiscreteEnsemble::new(
            vec![StatePoint::binary(0.5).unwrap()],
            vec![1.0],
        )
        .unwrap();
        let report = kkt_verify(&skewed, &grid, &ch, &probe, 0.05).unwrap();
        assert!(!report.pass);
        assert!(report.support_flatness > 0.05, "{}", report.support_flatness);
        assert!(!report.support_violations.is_empty());
    }

    #[test]
    fn kkt_infinity_probe_is_a_violation() {
        // Grid misses the second basis state entirely; probing there
        // yields infinite information, which must flag, not crash.
        let grid = DiscreteEnsemble::new(
            vec![StatePoint::new(vec![1.0, 0.0]).unwrap()],
            vec![1.0],
        )
        .unwrap();
        let ch = MeasurementChannel::new(2, 1).unwrap();
        let probe = DiscreteEnsemble::new(
            vec![StatePoint::new(vec![0.0, 1.0]).unwrap()],
            vec![1.0],
        )
        .unwrap();
        let report = kkt_verify(&[1.0], &grid, &ch, &probe, 0.05).unwrap();
        assert!(!report.pass);
        assert_eq!(report.probe_violations, vec![0]);
        assert!(report.probe_information[0].is_infinite());
    }

    #[test]
    fn sweep_gap_shrinks_with_n() {
        let config = SolverConfig {
            tolerance: 1e-4,
            ..Default::default()
        };
        let rows = capacity_sweep(
            &[SweepDomain::Interval(AngleInterval::full())],
            &[10, 100, 1000],
            64,
            &config,
        );
        assert_eq!(rows.len(), 3);
        let gaps: Vec<f64> = rows
            .iter()
            .map(|r| r.gap.expect("row solved").abs())
            .collect();
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
        for row in &rows {
            assert!(row.error.is_none());
            assert_relative_eq!(
                row.w_effective.unwrap(),
                row.capacity.unwrap().exp(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn sweep_position_independence() {
        let config = SolverConfig {
            tolerance: 1e-4,
            ..Default::default()
        };
        let rows = capacity_sweep(
            &[
                SweepDomain::Interval(AngleInterval::new(0.1, 0.5).unwrap()),
                SweepDomain::Interval(AngleInterval::new(1.0, 1.4).unwrap()),
            ],
            &[1000],
            64,
            &config,
        );
        let c0 = rows[0].capacity.unwrap();
        let c1 = rows[1].capacity.unwrap();
        assert!((c0 - c1).abs() < 0.02, "{c0} vs {c1}");
    }

    #[test]
    fn sweep_records_row_failures_and_continues() {
        let rows = capacity_sweep(
            &[SweepDomain::Interval(AngleInterval::full())],
            &[20_000_000, 10],
            8,
            &SolverConfig::default(),
        );
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_some() && rows[0].capacity.is_none());
        assert!(rows[1].error.is_none() && rows[1].capacity.is_some());
    }

    #[test]
    fn sweep_empty_inputs() {
        assert!(capacity_sweep(
            &[SweepDomain::Interval(AngleInterval::full())],
            &[],
            16,
            &SolverConfig::default()
        )
        .is_empty());
    }
}
