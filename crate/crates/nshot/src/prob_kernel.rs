//! Exact and approximate probability kernels for the repeated-measurement
//! channel.
//!
//! Measuring `n` identical copies of a state with outcome probabilities
//! `p = (p_1, ..., p_N)` produces a count vector `k` with the multinomial
//! law `n!/(k_1!...k_N!) * p_1^k_1 ... p_N^k_N` (binomial for `N = 2`).
//! Everything here is computed in the log domain through [`log_gamma`], so
//! copy counts up to 10^6 are routine, and exponentiation happens only at
//! the boundary. The module also provides the Gaussian density that
//! approximates the multinomial near its peak, exact multinomial sampling,
//! and total-variation distances between finite distributions.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::Serialize;
use std::f64::consts::{E, PI, TAU};

/// Tolerance for "sums to one" validation of probability vectors.
pub(crate) const PROB_SUM_TOL: f64 = 1e-12;

// --- log-gamma -------------------------------------------------------------

/// ln(pi)
const LN_PI: f64 = 1.144_729_885_849_400_2;
/// ln(2 * sqrt(e / pi))
const LN_2_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;

/// Lanczos shift parameter `g` for the 11-term approximation below.
const LANCZOS_G: f64 = 10.900511;

/// Lanczos series coefficients for `g = 10.900511`; this pairing gives a
/// relative error below 1e-13 across the positive reals, comfortably inside
/// the 1e-12 contract of [`log_gamma`].
const LANCZOS_DK: [f64; 11] = [
    2.485_740_891_387_535_6e-5,
    1.051_423_785_817_219_7,
    -3.456_870_972_220_162_4,
    4.512_277_094_668_948,
    -2.982_852_253_235_766_4,
    1.056_397_115_771_267_1,
    -1.954_287_731_916_458_7e-1,
    1.709_705_434_044_412_2e-2,
    -5.719_261_174_043_057_8e-4,
    4.633_994_733_599_056e-6,
    -2.719_949_084_886_077e-9,
];

/// Log-gamma for strictly positive arguments, `ln Gamma(x)`.
///
/// Relative error is at most 1e-12 for `x` in `[0.5, 1e6]` (in practice
/// ~1e-14). Arguments at or below zero are a domain error.
///
/// # Example
///
/// ```
/// // ln Gamma(1/2) = ln sqrt(pi)
/// let v = nshot::prob_kernel::log_gamma(0.5)?;
/// assert!((v - 0.5723649429).abs() < 1e-9);
/// # Ok::<(), nshot::Error>(())
/// ```
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidArgument {
            name: "x",
            reason: format!("log_gamma requires x > 0, got {x}"),
        });
    }
    Ok(ln_gamma(x))
}

/// Unchecked Lanczos evaluation; callers guarantee `x > 0`.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // Reflection ln Gamma(x) = ln(pi / sin(pi x)) - ln Gamma(1 - x),
        // with the right-hand log-gamma expanded in the same Lanczos form.
        let s = LANCZOS_DK
            .iter()
            .enumerate()
            .skip(1)
            .fold(LANCZOS_DK[0], |s, (i, &d)| s + d / (i as f64 - x));
        LN_PI
            - (PI * x).sin().ln()
            - s.ln()
            - LN_2_SQRT_E_OVER_PI
            - (0.5 - x) * ((0.5 - x + LANCZOS_G) / E).ln()
    } else {
        let s = LANCZOS_DK
            .iter()
            .enumerate()
            .skip(1)
            .fold(LANCZOS_DK[0], |s, (i, &d)| s + d / (x + i as f64 - 1.0));
        LN_2_SQRT_E_OVER_PI + s.ln() + (x - 0.5) * ((x - 0.5 + LANCZOS_G) / E).ln()
    }
}

// --- domain types ----------------------------------------------------------

/// A pure state reduced to its measurement-outcome probability vector.
///
/// Entries are non-negative and sum to one within 1e-12; the dimension `N`
/// is the number of basis outcomes and is at least two. For `N = 2` the
/// state is a point `p = cos^2(alpha)` on the non-negative quarter circle
/// (see [`crate::geometry::angle_to_state`]).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StatePoint {
    probs: Vec<f64>,
}

impl StatePoint {
    /// Validates and wraps a probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidState(format!(
                "need at least 2 outcome probabilities, got {}",
                probs.len()
            )));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidState(format!(
                    "probability {i} is {p}, must be finite and non-negative"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidState(format!(
                "probabilities sum to {sum}, must be 1 within {PROB_SUM_TOL:e}"
            )));
        }
        Ok(Self { probs })
    }

    /// Two-outcome state `(p, 1 - p)`.
    pub fn binary(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidState(format!(
                "binary state requires p in [0, 1], got {p}"
            )));
        }
        Ok(Self {
            probs: vec![p, 1.0 - p],
        })
    }

    /// The outcome probabilities.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of basis outcomes `N`.
    pub fn dim(&self) -> usize {
        self.probs.len()
    }
}

/// Outcome counts of an `n`-copy measurement: how many of the `n` draws
/// landed in each of the `N` basis outcomes.
///
/// The counts sum to `n >= 1` and the dimension is at least two.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OutcomeCounts {
    counts: Vec<u64>,
    n: u64,
}

impl OutcomeCounts {
    /// Validates and wraps a count vector; `n` is derived as the sum.
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidCounts(format!(
                "need at least 2 outcome counts, got {}",
                counts.len()
            )));
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidCounts(
                "counts sum to 0; at least one measurement is required".into(),
            ));
        }
        Ok(Self { counts, n })
    }

    /// Two-outcome counts `(k, n - k)`.
    pub fn binary(k: u64, n: u64) -> Result<Self> {
        if k > n {
            return Err(Error::InvalidCounts(format!("k = {k} exceeds n = {n}")));
        }
        Self::new(vec![k, n - k])
    }

    /// The per-outcome counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total number of measured copies `n`.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of basis outcomes `N`.
    pub fn dim(&self) -> usize {
        self.counts.len()
    }
}

// --- exact pmfs ------------------------------------------------------------

/// Log multinomial pmf over raw slices; the single place the formula is
/// written, so the binomial wrapper is bit-identical to the two-outcome
/// multinomial by construction.
///
/// Conventions: `0 * ln 0 = 0` (zero counts contribute nothing, whatever
/// their probability); a positive count on a zero-probability outcome gives
/// `-inf`, i.e. exact probability zero after exponentiation.
pub(crate) fn ln_multinomial_core(counts: &[u64], probs: &[f64]) -> f64 {
    debug_assert_eq!(counts.len(), probs.len());
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    // Combinatorial and probability terms accumulate separately, so for
    // a swap-symmetric count vector (k, k) the two mirrored states
    // (p, 1-p) and (1-p, p) give bit-identical values: the first sum is
    // the same sequence of operations and the second is a two-term
    // addition, which commutes exactly. Likelihood ties between mirrored
    // codewords are therefore real ties, not rounding accidents.
    let mut comb = ln_gamma((n + 1) as f64);
    let mut mass = 0.0;
    for (&k, &p) in counts.iter().zip(probs) {
        if k > 0 {
            comb -= ln_gamma((k + 1) as f64);
            mass += (k as f64) * p.ln();
        }
    }
    comb + mass
}

/// Log binomial pmf via the shared multinomial core.
pub(crate) fn ln_binomial_core(n: u64, k: u64, p: f64) -> f64 {
    ln_multinomial_core(&[k, n - k], &[p, 1.0 - p])
}

/// Natural log of the binomial pmf `C(n,k) p^k (1-p)^(n-k)`.
///
/// Requires `n >= 1`, `0 <= k <= n`, and `p` in `[0, 1]`. Degenerate edges
/// are exact: `-inf` when `p = 0, k > 0` or `p = 1, k < n`, and exactly `0`
/// (pmf 1) at the deterministic corners.
pub fn log_binomial_pmf(n: u64, k: u64, p: f64) -> Result<f64> {
    check_binomial_args(n, k, p)?;
    Ok(ln_binomial_core(n, k, p))
}

/// Binomial pmf `C(n,k) p^k (1-p)^(n-k)`, computed in the log domain.
///
/// # Example
///
/// ```
/// let v = nshot::prob_kernel::binomial_pmf(2, 1, 0.5)?;
/// assert!((v - 0.5).abs() < 1e-12);
/// # Ok::<(), nshot::Error>(())
/// ```
pub fn binomial_pmf(n: u64, k: u64, p: f64) -> Result<f64> {
    Ok(log_binomial_pmf(n, k, p)?.exp())
}

fn check_binomial_args(n: u64, k: u64, p: f64) -> Result<()> {
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
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument {
            name: "p",
            reason: format!("probability {p} outside [0, 1]"),
        });
    }
    Ok(())
}

/// Natural log of the multinomial pmf `n!/(prod k_i!) * prod p_i^k_i`.
pub fn log_multinomial_pmf(counts: &OutcomeCounts, state: &StatePoint) -> Result<f64> {
    if counts.dim() != state.dim() {
        return Err(Error::DimensionMismatch(format!(
            "counts have {} outcomes, state has {}",
            counts.dim(),
            state.dim()
        )));
    }
    Ok(ln_multinomial_core(counts.counts(), state.probs()))
}

/// Multinomial pmf `n!/(prod k_i!) * prod p_i^k_i`, computed in the log
/// domain with the `0 * ln 0 = 0` convention.
///
/// # Example
///
/// ```
/// use nshot::{OutcomeCounts, StatePoint};
/// let counts = OutcomeCounts::new(vec![2, 1, 1])?;
/// let state = StatePoint::new(vec![0.5, 0.25, 0.25])?;
/// let v = nshot::prob_kernel::multinomial_pmf(&counts, &state)?;
/// assert!((v - 0.1875).abs() < 1e-12); // 12 * 0.25 * 0.25 * 0.25
/// # Ok::<(), nshot::Error>(())
/// ```
pub fn multinomial_pmf(counts: &OutcomeCounts, state: &StatePoint) -> Result<f64> {
    Ok(log_multinomial_pmf(counts, state)?.exp())
}

// --- Gaussian approximations -----------------------------------------------

/// Gaussian density approximating the binomial pmf near its peak:
/// `(2 pi n p (1-p))^{-1/2} exp(-(k - n p)^2 / (2 n p (1-p)))`.
///
/// This is a density substitute for a pmf, not a normalized pmf; see
/// [`binomial_gaussian_tv`] for the lattice-normalized comparison. The
/// variance degenerates at `p = 0` and `p = 1`, which are domain errors.
pub fn gaussian_binomial_approx(n: u64, k: u64, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument {
            name: "n",
            reason: "number of copies must be positive".into(),
        });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument {
            name: "p",
            reason: format!("Gaussian approximation degenerates at p = {p}; need 0 < p < 1"),
        });
    }
    let nf = n as f64;
    let var = nf * p * (1.0 - p);
    let dev = k as f64 - p * nf;
    Ok((TAU * var).sqrt().recip() * (-dev * dev / (2.0 * var)).exp())
}

/// Reduced `(N-1)`-dimensional Gaussian density approximating the
/// multinomial pmf, with the last count eliminated through the constraint
/// `sum k_i = n`.
///
/// In the symmetric form this is
/// `(2 pi n)^{-(N-1)/2} (prod p_i)^{-1/2} exp(-1/(2n) sum (k_i - n p_i)^2 / p_i)`,
/// where the exponent runs over all `N` components (the covariance of the
/// first `N-1` counts has determinant `n^{N-1} prod p_i`, and its inverse
/// quadratic form collapses to the symmetric sum). For `N = 2` it agrees
/// with [`gaussian_binomial_approx`]. All `p_i` must be strictly positive.
pub fn gaussian_multinomial_approx(counts: &OutcomeCounts, state: &StatePoint) -> Result<f64> {
    if counts.dim() != state.dim() {
        return Err(Error::DimensionMismatch(format!(
            "counts have {} outcomes, state has {}",
            counts.dim(),
            state.dim()
        )));
    }
    if state.probs().iter().any(|&p| p <= 0.0) {
        return Err(Error::InvalidArgument {
            name: "state",
            reason: "Gaussian approximation degenerates when any p_i = 0".into(),
        });
    }
    let n = counts.n() as f64;
    let mut log_pref = -((state.dim() - 1) as f64) / 2.0 * (TAU * n).ln();
    let mut quad = 0.0;
    for (&k, &p) in counts.counts().iter().zip(state.probs()) {
        log_pref -= 0.5 * p.ln();
        let dev = k as f64 - n * p;
        quad += dev * dev / p;
    }
    Ok((log_pref - quad / (2.0 * n)).exp())
}

// --- sampling --------------------------------------------------------------

/// Samples outcome counts for `n` measurements of `state`, deterministically
/// from `seed`.
///
/// Equivalent to [`sample_counts_with`] on a fresh ChaCha8 stream seeded
/// with `seed`. Panics if `n == 0` (the [`OutcomeCounts`] invariant).
pub fn sample_counts(state: &StatePoint, n: u64, seed: u64) -> OutcomeCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_counts_with(state, n, &mut rng)
}

/// Samples outcome counts using the caller's RNG.
///
/// The multinomial is drawn as a chain of conditional binomials: outcome
/// `i` receives `Binomial(remaining, p_i / (p_i + ... + p_N))` of the
/// still-unassigned draws. This is exact, O(N) per sample, and the
/// degenerate conditionals (probability 0 or 1) short-circuit without
/// consuming randomness, so deterministic states produce deterministic
/// counts for any seed.
pub fn sample_counts_with<R: Rng + ?Sized>(state: &StatePoint, n: u64, rng: &mut R) -> OutcomeCounts {
    assert!(n > 0, "sample_counts requires n >= 1");
    let probs = state.probs();
    let dim = probs.len();
    let mut counts = vec![0u64; dim];
    let mut remaining = n;
    for i in 0..dim - 1 {
        if remaining == 0 {
            break;
        }
        let tail: f64 = probs[i..].iter().sum();
        if tail <= 0.0 {
            break;
        }
        let cond = (probs[i] / tail).clamp(0.0, 1.0);
        counts[i] = if cond >= 1.0 {
            remaining
        } else if cond <= 0.0 {
            0
        } else {
            rand_distr::Binomial::new(remaining, cond)
                .expect("conditional probability is in [0, 1]")
                .sample(rng)
        };
        remaining -= counts[i];
    }
    counts[dim - 1] = remaining;
    OutcomeCounts {
        n,
        counts,
    }
}

// --- distribution distances ------------------------------------------------

/// Total variation distance `1/2 sum |a_i - b_i|` between two finite
/// distributions over the same outcome set (same length, same order).
pub fn total_variation(pmf_a: &[f64], pmf_b: &[f64]) -> Result<f64> {
    if pmf_a.len() != pmf_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "total variation over {} vs {} outcomes",
            pmf_a.len(),
            pmf_b.len()
        )));
    }
    Ok(0.5
        * pmf_a
            .iter()
            .zip(pmf_b)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Total variation between the exact binomial pmf for `(n, p)` and the
/// Gaussian approximation normalized over the integer lattice `0..=n`.
///
/// The Gaussian is a density, so a fair pmf-to-pmf comparison divides it by
/// its lattice sum first; that normalization lives here and nowhere else.
pub fn binomial_gaussian_tv(n: u64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument {
            name: "p",
            reason: format!("Gaussian approximation degenerates at p = {p}; need 0 < p < 1"),
        });
    }
    check_binomial_args(n, 0, p)?;
    let exact: Vec<f64> = (0..=n).map(|k| ln_binomial_core(n, k, p).exp()).collect();
    let mut gauss: Vec<f64> = (0..=n)
        .map(|k| {
            let nf = n as f64;
            let var = nf * p * (1.0 - p);
            let dev = k as f64 - p * nf;
            (TAU * var).sqrt().recip() * (-dev * dev / (2.0 * var)).exp()
        })
        .collect();
    let sum: f64 = gauss.iter().sum();
    for g in &mut gauss {
        *g /= sum;
    }
    total_variation(&exact, &gauss)
}

// --- tests -----------------------------------------------------------------
