//! Exact information quantities of the repeated-measurement channel for
//! discrete input ensembles: output marginals, mutual information,
//! per-state (individual) information, and the closed-form asymptotic
//! marginal used to cross-check them.
//!
//! The channel for `(N, n)` maps a state `p` to the multinomial count
//! vector over the outcome lattice (all compositions of `n` into `N`
//! parts). Exactness is taken seriously: computations enumerate the full
//! lattice or refuse via a memory guard - nothing silently truncates or
//! samples. Lattice loops are partitioned into fixed-size blocks that are
//! processed in parallel and combined in index order, so every result is
//! bit-identical regardless of thread count.

use crate::error::{Error, Result};
use crate::geometry::{AngleInterval, DiscreteEnsemble};
use crate::prob_kernel::{ln_multinomial_core, StatePoint};
use rayon::prelude::*;

/// Exact computations refuse outcome lattices larger than this.
pub const OUTCOME_GUARD: u64 = 10_000_000;

/// Lattice block size for parallel loops; fixed so that block boundaries,
/// and therefore rounding order, do not depend on the worker count.
pub(crate) const OUTCOME_BLOCK: usize = 4096;

// --- measurement channel and outcome lattice --------------------------------

/// The `n`-copy measurement channel: `N` basis outcomes observed `n`
/// times, with conditional law `multinomial(n, p)`.
///
/// Construction computes the outcome-lattice size `C(n+N-1, N-1)` and
/// fails if it exceeds [`OUTCOME_GUARD`], the bound for keeping exact
/// distributions addressable in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasurementChannel {
    dim: usize,
    n: u64,
    outcome_count: u64,
}

impl MeasurementChannel {
    /// Validates `(dim, n)` and the outcome-lattice guard.
    pub fn new(dim: usize, n: u64) -> Result<Self> {
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
        let size = compositions_count_capped(n, dim as u64, OUTCOME_GUARD as u128);
        if size > OUTCOME_GUARD as u128 {
            return Err(Error::OutcomeSpaceTooLarge {
                size,
                limit: OUTCOME_GUARD,
            });
        }
        Ok(Self {
            dim,
            n,
            outcome_count: size as u64,
        })
    }

    /// Number of basis outcomes `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Copies measured per use of the channel.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Size of the outcome lattice, `C(n+N-1, N-1)`.
    pub fn outcome_count(&self) -> u64 {
        self.outcome_count
    }

    /// The count vector at `rank` in the lattice enumeration order
    /// (lexicographically ascending count vectors).
    pub fn outcome_at(&self, rank: u64) -> Vec<u64> {
        assert!(rank < self.outcome_count, "rank {rank} out of range");
        self.cursor_at(rank).comp
    }

    /// Cursor positioned on the composition at `rank`.
    pub(crate) fn cursor_at(&self, rank: u64) -> OutcomeCursor {
        debug_assert!(rank < self.outcome_count);
        let mut comp = vec![0u64; self.dim];
        if self.dim == 2 {
            comp[0] = rank;
            comp[1] = self.n - rank;
        } else {
            let mut r = rank as u128;
            let mut remaining = self.n;
            for i in 0..self.dim - 1 {
                let parts_left = (self.dim - 1 - i) as u64;
                let mut a = 0u64;
                loop {
                    let below = compositions_count_capped(remaining - a, parts_left, u128::MAX);
                    if r < below {
                        break;
                    }
                    r -= below;
                    a += 1;
                }
                comp[i] = a;
                remaining -= a;
            }
            comp[self.dim - 1] = remaining;
        }
        OutcomeCursor { comp }
    }

    /// Log conditional pmf of every lattice outcome given `state`, in
    /// enumeration order.
    pub fn log_row(&self, state: &StatePoint) -> Result<Vec<f64>> {
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "state has {} outcomes, channel has {}",
                state.dim(),
                self.dim
            )));
        }
        let len = self.outcome_count as usize;
        let mut row = vec![0.0; len];
        row.par_chunks_mut(OUTCOME_BLOCK)
            .enumerate()
            .for_each(|(b, chunk)| {
                let mut cursor = self.cursor_at((b * OUTCOME_BLOCK) as u64);
                for slot in chunk {
                    *slot = ln_multinomial_core(cursor.counts(), state.probs());
                    cursor.advance();
                }
            });
        Ok(row)
    }
}

/// Number of compositions of `n` into `parts` non-negative parts,
/// `C(n+parts-1, parts-1)`, computed exactly and clamped to `cap + 1`
/// as soon as it exceeds `cap` (binomial prefixes are monotone in the
/// multiplicative loop, so the early exit is sound).
fn compositions_count_capped(n: u64, parts: u64, cap: u128) -> u128 {
    debug_assert!(parts >= 1);
    let k = parts - 1;
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c * (n as u128 + i as u128) / i as u128;
        if c > cap {
            return cap + 1;
        }
    }
    c
}

/// Walks the outcome lattice in enumeration order.
pub(crate) struct OutcomeCursor {
    comp: Vec<u64>,
}

impl OutcomeCursor {
    /// The current count vector.
    pub(crate) fn counts(&self) -> &[u64] {
        &self.comp
    }

    /// Moves to the lexicographic successor; no-op at the final
    /// composition.
    pub(crate) fn advance(&mut self) {
        let dim = self.comp.len();
        // Rightmost position with mass strictly to its right gets one more
        // count; the remainder re-packs into the last coordinate.
        let mut suffix = self.comp[dim - 1];
        for i in (0..dim - 1).rev() {
            if suffix > 0 {
                self.comp[i] += 1;
                for c in &mut self.comp[i + 1..dim - 1] {
                    *c = 0;
                }
                self.comp[dim - 1] = suffix - 1;
                return;
            }
            suffix += self.comp[i];
        }
    }
}

// --- output distributions ---------------------------------------------------

/// The marginal distribution of outcome counts induced by an ensemble
/// through a channel, stored over the full outcome lattice in enumeration
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDistribution {
    channel: MeasurementChannel,
    probs: Vec<f64>,
}

impl OutputDistribution {
    /// The channel this distribution lives on.
    pub fn channel(&self) -> &MeasurementChannel {
        &self.channel
    }

    /// Probabilities in lattice enumeration order.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of the two-outcome count vector `(k, n-k)`.
    ///
    /// Panics unless the channel has `N = 2` and `k <= n`.
    pub fn prob_of_k(&self, k: u64) -> f64 {
        assert_eq!(self.channel.dim(), 2, "prob_of_k is the N = 2 accessor");
        self.probs[k as usize]
    }
}

/// Marginal output distribution `P_K(k) = sum_j w_j P(k | p_j)` of an
/// ensemble through the channel, over the full outcome lattice.
///
/// # Example
///
/// ```
/// use nshot::geometry::{uniform_angle_grid, AngleInterval};
/// use nshot::information::{output_marginal, MeasurementChannel};
/// let grid = uniform_angle_grid(&AngleInterval::full(), 8);
/// let channel = MeasurementChannel::new(2, 20)?;
/// let marginal = output_marginal(&grid, &channel)?;
/// let total: f64 = marginal.probs().iter().sum();
/// assert!((total - 1.0).abs() < 1e-10);
/// # Ok::<(), nshot::Error>(())
/// ```
pub fn output_marginal(
    ensemble: &DiscreteEnsemble,
    channel: &MeasurementChannel,
) -> Result<OutputDistribution> {
    check_dims(ensemble, channel)?;
    let len = channel.outcome_count() as usize;
    let mut probs = vec![0.0; len];
    probs
        .par_chunks_mut(OUTCOME_BLOCK)
        .enumerate()
        .for_each(|(b, chunk)| {
            let mut cursor = channel.cursor_at((b * OUTCOME_BLOCK) as u64);
            for slot in chunk {
                let mut acc = 0.0;
                for (state, &w) in ensemble.states().iter().zip(ensemble.weights()) {
                    acc += w * ln_multinomial_core(cursor.counts(), state.probs()).exp();
                }
                *slot = acc;
                cursor.advance();
            }
        });
    Ok(OutputDistribution {
        channel: *channel,
        probs,
    })
}

/// Mutual information `I(K; P)` of an ensemble through the channel, in
/// nats:
/// `I = sum_j w_j sum_k P(k|p_j) ln(P(k|p_j) / P_K(k))`, with the
/// `0 ln(0/q) = 0` convention.
///
/// Negative floating-point residue (possible only within rounding of
/// zero) is clamped to 0.
pub fn mutual_information(
    ensemble: &DiscreteEnsemble,
    channel: &MeasurementChannel,
) -> Result<f64> {
    let marginal = output_marginal(ensemble, channel)?;
    let len = marginal.probs.len();
    let blocks = len.div_ceil(OUTCOME_BLOCK);
    let partials: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * OUTCOME_BLOCK;
            let end = (start + OUTCOME_BLOCK).min(len);
            let mut cursor = channel.cursor_at(start as u64);
            let mut partial = 0.0;
            for idx in start..end {
                let q = marginal.probs[idx];
                // Zero marginal mass implies zero conditional mass for
                // every positively weighted state; the sentinel 0 keeps
                // the zero-weight rows from polluting the sum.
                let ln_q = if q > 0.0 { q.ln() } else { 0.0 };
                for (state, &w) in ensemble.states().iter().zip(ensemble.weights()) {
                    if w == 0.0 {
                        continue;
                    }
                    let log_p = ln_multinomial_core(cursor.counts(), state.probs());
                    let p = log_p.exp();
                    if p > 0.0 {
                        partial += w * p * (log_p - ln_q);
                    }
                }
                cursor.advance();
            }
            partial
        })
        .collect();
    Ok(partials.iter().sum::<f64>().max(0.0))
}

/// Individual information `I(K; p)` of a single state against an
/// ensemble's output marginal:
/// `sum_k P(k|p) ln(P(k|p) / P_K(k))`.
///
/// The state need not belong to the ensemble. If some outcome has
/// `P(k|p) > 0` but `P_K(k) = 0` the divergence is infinite and the
/// result is `+inf` - an explicit signal, not an error, because
/// optimality probes legitimately hit it.
pub fn individual_information(
    state: &StatePoint,
    ensemble: &DiscreteEnsemble,
    channel: &MeasurementChannel,
) -> Result<f64> {
    let marginal = output_marginal(ensemble, channel)?;
    individual_information_given(state, &marginal)
}

/// [`individual_information`] against a precomputed marginal; the fast
/// path when many states are probed against one ensemble.
pub fn individual_information_given(
    state: &StatePoint,
    marginal: &OutputDistribution,
) -> Result<f64> {
    let channel = marginal.channel();
    if state.dim() != channel.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} outcomes, channel has {}",
            state.dim(),
            channel.dim()
        )));
    }
    let len = marginal.probs.len();
    let blocks = len.div_ceil(OUTCOME_BLOCK);
    let partials: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * OUTCOME_BLOCK;
            let end = (start + OUTCOME_BLOCK).min(len);
            let mut cursor = channel.cursor_at(start as u64);
            let mut partial = 0.0;
            for idx in start..end {
                let log_p = ln_multinomial_core(cursor.counts(), state.probs());
                let p = log_p.exp();
                if p > 0.0 {
                    // ln of a zero marginal is -inf, driving the sum to
                    // +inf: the absolute-continuity violation signal.
                    partial += p * (log_p - marginal.probs[idx].ln());
                }
                cursor.advance();
            }
            partial
        })
        .collect();
    let total: f64 = partials.iter().sum();
    Ok(if total.is_nan() { f64::INFINITY } else { total.max(0.0) })
}

fn check_dims(ensemble: &DiscreteEnsemble, channel: &MeasurementChannel) -> Result<()> {
    if ensemble.dim() != channel.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ensemble states have {} outcomes, channel has {}",
            ensemble.dim(),
            channel.dim()
        )));
    }
    Ok(())
}

// --- asymptotic marginal ----------------------------------------------------

/// Value of the closed-form asymptotic marginal at one lattice point,
/// with its band bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticMarginal {
    /// The density value `1 / (2 |alpha_1 - alpha_2| sqrt(k (n - k)))`,
    /// or 0 outside the band / at degenerate endpoints.
    pub value: f64,
    /// Whether `k` lies in the band `[n p_1, n p_2]` spanned by the
    /// interval.
    pub in_band: bool,
    /// `k` in `{0, n}` lies in the band but the formula degenerates
    /// there; the value is reported as 0 with this flag raised.
    pub endpoint_degenerate: bool,
}

/// Asymptotic (large-`n`) output marginal of the uniform-angle ensemble on
/// an interval, evaluated at count `k`:
/// `P_K(k) ~ 1 / (2 |alpha_1 - alpha_2| sqrt(k (n - k)))` for
/// `n p_1 <= k <= n p_2`, and 0 outside that band.
///
/// # Example
///
/// ```
/// use nshot::geometry::AngleInterval;
/// use nshot::information::asymptotic_marginal;
/// // Full quarter circle at the center: 1 / (pi 50) = 6.3662e-3.
/// let v = asymptotic_marginal(50, 100, &AngleInterval::full())?;
/// assert!(v.in_band && (v.value - 6.3662e-3).abs() < 1e-7);
/// # Ok::<(), nshot::Error>(())
/// ```
pub fn asymptotic_marginal(
    k: u64,
    n: u64,
    interval: &AngleInterval,
) -> Result<AsymptoticMarginal> {
    if n == 0 {
        return Err(Error::InvalidArgument {
            name: "n",
            reason: "number of copies must be positive".into(),
        });
    }
    if k > n {
        return Err(Error::InvalidArgument {
            name: "k",
            reason: format!("count k = {k} outside [0, {n}]"),
        });
    }
    let (p1, p2) = interval.prob_bounds();
    let kf = k as f64;
    let nf = n as f64;
    // cos(pi/2) is not exactly zero in floats, so band edges carry a
    // relative slack; otherwise k = 0 would fall outside the
    // full-interval band by ~4e-31.
    let slack = 1e-9 * nf;
    let in_band = kf >= nf * p1 - slack && kf <= nf * p2 + slack;
    if !in_band {
        return Ok(AsymptoticMarginal {
            value: 0.0,
            in_band: false,
            endpoint_degenerate: false,
        });
    }
    if k == 0 || k == n {
        return Ok(AsymptoticMarginal {
            value: 0.0,
            in_band: true,
            endpoint_degenerate: true,
        });
    }
    Ok(AsymptoticMarginal {
        value: (2.0 * interval.width() * (kf * (nf - kf)).sqrt()).recip(),
        in_band: true,
        endpoint_degenerate: false,
    })
}

// --- tests -----------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::uniform_angle_grid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn two_point_ensemble() -> DiscreteEnsemble {
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
    fn channel_guard() {
        assert!(MeasurementChannel::new(2, 1_000_000).is_ok()); // 1e6 + 1 outcomes
        assert!(MeasurementChannel::new(2, 10_000_000).is_err()); // 1e7 + 1
        assert!(MeasurementChannel::new(3, 4470).is_ok()); // C(4472,2) = 9,997,156
        assert!(MeasurementChannel::new(3, 4472).is_err()); // C(4474,2) = 10,006,101
        assert!(MeasurementChannel::new(1, 5).is_err());
        assert!(MeasurementChannel::new(2, 0).is_err());
        let ch = MeasurementChannel::new(4, 10).unwrap();
        assert_eq!(ch.outcome_count(), 286); // C(13,3)
    }

    #[test]
    fn lattice_enumeration_order_and_unrank() {
        let ch = MeasurementChannel::new(3, 2).unwrap();
        let want: [&[u64]; 6] = [
            &[0, 0, 2],
            &[0, 1, 1],
            &[0, 2, 0],
            &[1, 0, 1],
            &[1, 1, 0],
            &[2, 0, 0],
        ];
        // unranking matches direct enumeration at every rank
        for (rank, w) in want.iter().enumerate() {
            assert_eq!(ch.outcome_at(rank as u64), *w);
        }
        // cursor advance matches unranking across a larger lattice
        let ch = MeasurementChannel::new(4, 6).unwrap();
        let mut cursor = ch.cursor_at(0);
        for rank in 0..ch.outcome_count() {
            assert_eq!(cursor.counts(), ch.outcome_at(rank).as_slice(), "rank {rank}");
            cursor.advance();
        }
    }

    #[test]
    fn two_outcome_rank_is_first_count() {
        let ch = MeasurementChannel::new(2, 9).unwrap();
        for k in 0..=9u64 {
            assert_eq!(ch.outcome_at(k), vec![k, 9 - k]);
        }
    }

    #[test]
    fn marginal_of_single_state_is_its_row() {
        let state = StatePoint::binary(0.3).unwrap();
        let ensemble =
            DiscreteEnsemble::new(vec![state.clone()], vec![1.0]).unwrap();
        let ch = MeasurementChannel::new(2, 12).unwrap();
        let marginal = output_marginal(&ensemble, &ch).unwrap();
        let row: Vec<f64> = ch
            .log_row(&state)
            .unwrap()
            .iter()
            .map(|l| l.exp())
            .collect();
        assert_eq!(marginal.probs(), row.as_slice());
    }

    #[test]
    fn marginal_of_deterministic_pair() {
        let ch = MeasurementChannel::new(2, 3).unwrap();
        let marginal = output_marginal(&two_point_ensemble(), &ch).unwrap();
        // P(3,0) = P(0,3) = 1/2, everything else 0
        assert_eq!(marginal.prob_of_k(3), 0.5);
        assert_eq!(marginal.prob_of_k(0), 0.5);
        assert_eq!(marginal.prob_of_k(1), 0.0);
        assert_eq!(marginal.prob_of_k(2), 0.0);
    }

    #[test]
    fn marginal_matches_asymptotic_center_at_n_100() {
        // 64-point uniform grid, n = 100: P_K(50) is within 5% of
        // 1/(50 pi) = 6.366e-3.
        let grid = uniform_angle_grid(&AngleInterval::full(), 64);
        let ch = MeasurementChannel::new(2, 100).unwrap();
        let marginal = output_marginal(&grid, &ch).unwrap();
        let predicted = 1.0 / (50.0 * PI);
        let got = marginal.prob_of_k(50);
        assert!(
            ((got - predicted) / predicted).abs() < 0.05,
            "got {got}, predicted {predicted}"
        );
    }

    #[test]
    fn marginal_normalizes() {
        let grid = uniform_angle_grid(&AngleInterval::new(0.1, 1.2).unwrap(), 33);
        for n in [1u64, 7, 100, 1000] {
            let ch = MeasurementChannel::new(2, n).unwrap();
            let marginal = output_marginal(&grid, &ch).unwrap();
            let total: f64 = marginal.probs().iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
        let state3 = StatePoint::new(vec![0.2, 0.3, 0.5]).unwrap();
        let e3 = DiscreteEnsemble::new(vec![state3], vec![1.0]).unwrap();
        let ch = MeasurementChannel::new(3, 25).unwrap();
        let total: f64 = output_marginal(&e3, &ch).unwrap().probs().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn mutual_information_trivial_cases() {
        let ch1 = MeasurementChannel::new(2, 1).unwrap();
        // noiseless bit
        assert_relative_eq!(
            mutual_information(&two_point_ensemble(), &ch1).unwrap(),
            2f64.ln(),
            max_relative = 1e-12
        );
        // single state carries nothing, exactly
        let single = DiscreteEnsemble::new(
            vec![StatePoint::binary(0.5).unwrap()],
            vec![1.0],
        )
        .unwrap();
        let ch = MeasurementChannel::new(2, 16).unwrap();
        assert_eq!(mutual_information(&single, &ch).unwrap(), 0.0);
    }

    #[test]
    fn mutual_information_bounds() {
        let grid = uniform_angle_grid(&AngleInterval::full(), 12);
        let ch = MeasurementChannel::new(2, 30).unwrap();
        let i = mutual_information(&grid, &ch).unwrap();
        assert!(i >= 0.0);
        assert!(i <= (grid.len() as f64).ln() + 1e-12);
        assert!(i <= (ch.outcome_count() as f64).ln() + 1e-12);
    }

    #[test]
    fn mutual_information_decomposes_into_individual_terms() {
        let grid = uniform_angle_grid(&AngleInterval::new(0.2, 1.3).unwrap(), 8);
        let ch = MeasurementChannel::new(2, 50).unwrap();
        let i = mutual_information(&grid, &ch).unwrap();
        let marginal = output_marginal(&grid, &ch).unwrap();
        let sum: f64 = grid
            .states()
            .iter()
            .zip(grid.weights())
            .map(|(s, &w)| w * individual_information_given(s, &marginal).unwrap())
            .sum();
        assert_abs_diff_eq!(i, sum, epsilon = 1e-10);
    }

    #[test]
    fn mutual_information_nondecreasing_in_n() {
        let grid = uniform_angle_grid(&AngleInterval::new(0.15, 1.25).unwrap(), 5);
        let mut last = -1.0;
        for n in [1u64, 2, 4, 8, 16] {
            let ch = MeasurementChannel::new(2, n).unwrap();
            let i = mutual_information(&grid, &ch).unwrap();
            assert!(i >= last - 1e-12, "n={n}: {i} < {last}");
            last = i;
        }
    }

    /// Direct-summation oracle with no log-domain machinery: factorials by
    /// integer product, powers by powi.
    fn direct_mutual_information(ensemble: &DiscreteEnsemble, n: u64) -> f64 {
        let binom = |n: u64, k: u64| -> f64 {
            let mut c = 1.0;
            for i in 1..=k {
                c = c * (n - k + i) as f64 / i as f64;
            }
            c
        };
        let pmf = |k: u64, p: f64| -> f64 {
            binom(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
        };
        let mut info = 0.0;
        for k in 0..=n {
            let q: f64 = ensemble
                .states()
                .iter()
                .zip(ensemble.weights())
                .map(|(s, &w)| w * pmf(k, s.probs()[0]))
                .sum();
            for (s, &w) in ensemble.states().iter().zip(ensemble.weights()) {
                let p = pmf(k, s.probs()[0]);
                if p > 0.0 && w > 0.0 {
                    info += w * p * (p / q).ln();
                }
            }
        }
        info
    }

    #[test]
    fn mutual_information_matches_direct_oracle() {
        // 100 randomized small ensembles, fixed seed.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..100 {
            let m = rng.random_range(1..=8usize);
            let n = rng.random_range(1..=12u64);
            let mut ps: Vec<f64>;
            loop {
                ps = (0..m).map(|_| rng.random_range(0.0..=1.0)).collect();
                let mut sorted = ps.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if sorted.windows(2).all(|w| w[1] - w[0] > 1e-9) {
                    break;
                }
            }
            let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let states: Vec<StatePoint> =
                ps.iter().map(|&p| StatePoint::binary(p).unwrap()).collect();
            let ensemble = DiscreteEnsemble::new(states, weights).unwrap();
            let ch = MeasurementChannel::new(2, n).unwrap();
            let got = mutual_information(&ensemble, &ch).unwrap();
            let want = direct_mutual_information(&ensemble, n);
            assert!(
                (got - want).abs() < 1e-9,
                "case {case} (m={m}, n={n}): {got} vs {want}"
            );
        }
    }

    #[test]
    fn individual_information_examples() {
        // the lone ensemble member sees exactly the marginal
        let state = StatePoint::binary(0.37).unwrap();
        let single = DiscreteEnsemble::new(vec![state.clone()], vec![1.0]).unwrap();
        let ch = MeasurementChannel::new(2, 40).unwrap();
        assert_eq!(
            individual_information(&state, &single, &ch).unwrap(),
            0.0
        );
        // noiseless bit, evaluated at one of the codewords
        let ch1 = MeasurementChannel::new(2, 1).unwrap();
        let at = StatePoint::new(vec![1.0, 0.0]).unwrap();
        assert_relative_eq!(
            individual_information(&at, &two_point_ensemble(), &ch1).unwrap(),
            2f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn individual_information_infinity_signal() {
        // Ensemble concentrated on (1,0): the marginal gives zero mass to
        // the all-second-outcome count, so a state with mass there
        // diverges.
        let ensemble = DiscreteEnsemble::new(
            vec![StatePoint::new(vec![1.0, 0.0]).unwrap()],
            vec![1.0],
        )
        .unwrap();
        let ch = MeasurementChannel::new(2, 1).unwrap();
        let probe = StatePoint::new(vec![0.0, 1.0]).unwrap();
        let v = individual_information(&probe, &ensemble, &ch).unwrap();
        assert!(v.is_infinite() && v > 0.0);
    }

    #[test]
    fn individual_information_flat_on_uniform_grid() {
        // Small version of the flatness property: on the 64-point uniform
        // grid at n = 1000, interior states see the same information.
        let grid = uniform_angle_grid(&AngleInterval::full(), 64);
        let ch = MeasurementChannel::new(2, 1000).unwrap();
        let marginal = output_marginal(&grid, &ch).unwrap();
        let at = |alpha: f64| {
            individual_information_given(
                &crate::geometry::angle_to_state(alpha).unwrap(),
                &marginal,
            )
            .unwrap()
        };
        let a = at(PI / 8.0);
        let b = at(3.0 * PI / 8.0);
        assert_relative_eq!(a, b, max_relative = 0.02);
        let formula = 0.5 * (2000.0 / (PI * std::f64::consts::E)).ln() + FRAC_PI_2.ln();
        assert_relative_eq!(a, formula, max_relative = 0.02);
    }

    #[test]
    fn interval_position_independence() {
        // Equal-length windows far apart in angle carry the same
        // information through the channel.
        let m = 256;
        let n = 10_000;
        let ch = MeasurementChannel::new(2, n).unwrap();
        let low = uniform_angle_grid(&AngleInterval::new(0.1, 0.5).unwrap(), m);
        let high = uniform_angle_grid(&AngleInterval::new(1.0, 1.4).unwrap(), m);
        let i_low = mutual_information(&low, &ch).unwrap();
        let i_high = mutual_information(&high, &ch).unwrap();
        assert!(
            (i_low - i_high).abs() <= 0.02,
            "I[0.1,0.5] = {i_low}, I[1.0,1.4] = {i_high}"
        );
    }

    #[test]
    fn asymptotic_marginal_examples() {
        let full = AngleInterval::full();
        let center = asymptotic_marginal(50, 100, &full).unwrap();
        assert!(center.in_band && !center.endpoint_degenerate);
        assert_relative_eq!(center.value, (PI * 50.0).recip(), max_relative = 1e-12);

        // interval with probability range [0.2, 0.5]
        let iv = AngleInterval::new(
            0.5f64.sqrt().acos(), // alpha(p = 0.5)
            0.2f64.sqrt().acos(), // alpha(p = 0.2)
        )
        .unwrap();
        let (p1, p2) = iv.prob_bounds();
        assert_abs_diff_eq!(p1, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p2, 0.5, epsilon = 1e-12);
        // k = 90 of 100 lies above the band
        let out = asymptotic_marginal(90, 100, &iv).unwrap();
        assert_eq!((out.value, out.in_band), (0.0, false));
        // k = 30 is inside; direct evaluation 1/(2 |da| sqrt(2100)),
        // |da| = alpha(0.2) - alpha(0.5) = 0.321751
        let inside = asymptotic_marginal(30, 100, &iv).unwrap();
        let want = (2.0 * iv.width() * 2100f64.sqrt()).recip();
        assert_relative_eq!(inside.value, want, max_relative = 1e-12);
        assert_abs_diff_eq!(inside.value, 0.033911, epsilon = 1e-6);
        assert_abs_diff_eq!(iv.width(), 0.3217505, epsilon = 1e-7);
    }

    #[test]
    fn asymptotic_marginal_endpoint_degeneracy() {
        let full = AngleInterval::full();
        let v = asymptotic_marginal(0, 100, &full).unwrap();
        assert!(v.in_band && v.endpoint_degenerate);
        assert_eq!(v.value, 0.0);
        let v = asymptotic_marginal(100, 100, &full).unwrap();
        assert!(v.in_band && v.endpoint_degenerate);
        assert_eq!(v.value, 0.0);
        assert!(asymptotic_marginal(101, 100, &full).is_err());
    }
}
