//! Monte Carlo distinguishability experiments: pick a codebook of
//! equally spaced states, transmit each by `n` repeated measurements,
//! decode by maximum likelihood, and measure how often the decoder is
//! wrong.
//!
//! The interesting control is the load factor - codebook size over the
//! asymptotic distinguishable-state count for the same geometry. Well
//! under load 1 the error rate collapses toward zero; well over it no
//! decoder can keep the codewords apart. Experiments are exactly
//! reproducible: every trial owns an RNG stream derived from (seed,
//! trial index), so reports are bit-identical for any thread count.

use crate::asymptotics::{w_ndim, w_qubit};
use crate::error::{Error, Result};
use crate::geometry::{
    uniform_angle_grid_angles, uniform_domain_grid, angle_to_state, AngleInterval,
    SphericalDomain,
};
use crate::prob_kernel::{ln_multinomial_core, sample_counts_with, OutcomeCounts, StatePoint};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

/// 97.5% standard-normal quantile, for 95% Wilson intervals.
const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Finest per-axis resolution used when carving higher-dimensional
/// domains into equal-weight cells.
const MAX_CELL_AXIS: usize = 256;

// --- codebook ---------------------------------------------------------------

/// The geometry a codebook was spaced over.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CodebookGeometry {
    /// Qubit angle interval.
    Interval(AngleInterval),
    /// Higher-dimensional spherical domain.
    Domain(SphericalDomain),
}

/// A finite set of codeword states spread evenly over a declared
/// geometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Codebook {
    geometry: CodebookGeometry,
    states: Vec<StatePoint>,
}

impl Codebook {
    /// `M` codewords at equal angular spacing over an interval: angles
    /// `lo + (j + 1/2) width / M`.
    pub fn equal_angles(interval: &AngleInterval, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument {
                name: "m",
                reason: "codebook needs at least one codeword".into(),
            });
        }
        let states = uniform_angle_grid_angles(interval, m)
            .into_iter()
            .map(|a| angle_to_state(a).expect("grid angles are valid"))
            .collect();
        Ok(Self {
            geometry: CodebookGeometry::Interval(*interval),
            states,
        })
    }

    /// `M` codewords over a higher-dimensional domain, one per
    /// equal-weight cell: a fine area-weighted grid is walked in its
    /// deterministic order and the state at each cell's weight midpoint
    /// becomes a codeword.
    ///
    /// Fails if `M` exceeds the number of distinct representable cells.
    pub fn equal_area(domain: &SphericalDomain, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument {
                name: "m",
                reason: "codebook needs at least one codeword".into(),
            });
        }
        if domain.dim() == 2 {
            // a 1-D domain is an interval; keep the two paths identical
            let (lo, hi) = domain.angle_ranges()[0];
            return Self::equal_angles(&AngleInterval::new(lo, hi)?, m);
        }
        // resolution: comfortably more cells than codewords, capped
        let axes = domain.dim() - 1;
        let mut per_axis = 8usize;
        while per_axis.pow(axes as u32) < 64 * m && per_axis < MAX_CELL_AXIS {
            per_axis *= 2;
        }
        let fine = uniform_domain_grid(domain, per_axis);
        let mut states = Vec::with_capacity(m);
        let mut cum = 0.0;
        let mut next = 0usize; // next quantile midpoint to capture
        for (state, &w) in fine.states().iter().zip(fine.weights()) {
            cum += w;
            while next < m && cum >= (next as f64 + 0.5) / m as f64 {
                states.push(state.clone());
                next += 1;
            }
        }
        while next < m {
            // guard against cumulative round-off at the far end
            states.push(fine.states().last().expect("grid nonempty").clone());
            next += 1;
        }
        for pair in states.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::InvalidArgument {
                    name: "m",
                    reason: format!(
                        "{m} codewords exceed the distinct equal-weight cells of the domain"
                    ),
                });
            }
        }
        Ok(Self {
            geometry: CodebookGeometry::Domain(domain.clone()),
            states,
        })
    }

    /// Codewords at caller-chosen angles inside an interval, in the
    /// given order. For irregular spacings (tests, decoder studies);
    /// the uniform constructors are the normal path.
    pub fn from_angles(interval: &AngleInterval, angles: &[f64]) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidArgument {
                name: "angles",
                reason: "codebook needs at least one codeword".into(),
            });
        }
        for (i, &a) in angles.iter().enumerate() {
            if !interval.contains(a) {
                return Err(Error::InvalidInterval(format!(
                    "codeword angle {a} (index {i}) outside [{}, {}]",
                    interval.lo(),
                    interval.hi()
                )));
            }
        }
        let states: Vec<StatePoint> = angles
            .iter()
            .map(|&a| angle_to_state(a))
            .collect::<Result<_>>()?;
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                if states[i] == states[j] {
                    return Err(Error::InvalidArgument {
                        name: "angles",
                        reason: format!("codewords {i} and {j} coincide"),
                    });
                }
            }
        }
        Ok(Self {
            geometry: CodebookGeometry::Interval(*interval),
            states,
        })
    }

    /// The declared geometry.
    pub fn geometry(&self) -> &CodebookGeometry {
        &self.geometry
    }

    /// Codeword states in index order.
    pub fn states(&self) -> &[StatePoint] {
        &self.states
    }

    /// Number of codewords.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    /// True iff the codebook is empty (constructors forbid this).
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Outcome dimension of the codewords.
    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Asymptotic distinguishable-state count of the declared geometry
    /// at `n` copies.
    pub fn w_predicted(&self, n: u64) -> f64 {
        match &self.geometry {
            CodebookGeometry::Interval(iv) => w_qubit(n, iv),
            CodebookGeometry::Domain(d) => w_ndim(d.dim(), n, d.area()),
        }
    }
}

// --- decoding ---------------------------------------------------------------

/// Maximum-likelihood decoder: the codeword index whose conditional law
/// makes `counts` most probable, ties broken toward the lowest index.
///
/// Panics if the counts dimension differs from the codebook's.
pub fn ml_decode(counts: &OutcomeCounts, codebook: &Codebook) -> usize {
    assert_eq!(
        counts.dim(),
        codebook.dim(),
        "counts have {} outcomes, codebook {}",
        counts.dim(),
        codebook.dim()
    );
    let mut best = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    for (j, state) in codebook.states().iter().enumerate() {
        let ll = ln_multinomial_core(counts.counts(), state.probs());
        // strict comparison keeps the lowest index on ties
        if ll > best_ll {
            best_ll = ll;
            best = j;
        }
    }
    best
}

// --- experiment -------------------------------------------------------------

/// One identification experiment: uniform codeword draws, `n`-copy
/// measurements, ML decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    codebook: Codebook,
    n: u64,
    trials: u64,
    seed: u64,
}

impl SimulationConfig {
    /// Validates and bundles the experiment parameters. The prior over
    /// codewords is uniform (matching the optimal input distribution,
    /// under which ML is also the MAP decoder).
    pub fn new(codebook: Codebook, n: u64, trials: u64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument {
                name: "n",
                reason: "copies per trial must be positive".into(),
            });
        }
        if trials == 0 {
            return Err(Error::InvalidArgument {
                name: "trials",
                reason: "need at least one trial".into(),
            });
        }
        Ok(Self {
            codebook,
            n,
            trials,
            seed,
        })
    }

    /// The codebook under test.
    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    /// Copies per trial.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of independent trials.
    pub fn trials(&self) -> u64 {
        self.trials
    }

    /// Base RNG seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Aggregated outcome of [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    /// Copies per trial.
    pub n: u64,
    /// Codebook size.
    pub codebook_size: usize,
    /// Trials run.
    pub trials: u64,
    /// Trials decoded incorrectly.
    pub errors: u64,
    /// `errors / trials`, exactly.
    pub error_rate: f64,
    /// 95% Wilson score interval for the error rate.
    pub wilson_ci_95: (f64, f64),
    /// Times each codeword was drawn as the true input.
    pub per_codeword_trials: Vec<u64>,
    /// Wrong decodes per true codeword.
    pub per_codeword_errors: Vec<u64>,
    /// `per_codeword_errors / per_codeword_trials` (0 when undrawn).
    pub per_codeword_error_rates: Vec<f64>,
    /// Most common wrong decode per true codeword, if it was ever
    /// misdecoded; count ties resolve to the lowest decoded index.
    pub confusion_top: Vec<Option<usize>>,
    /// Asymptotic distinguishable-state count for the codebook geometry.
    pub w_predicted: f64,
    /// `codebook_size / w_predicted`.
    pub load_factor: f64,
}

/// Runs the experiment: per trial, draw a codeword uniformly, sample its
/// `n`-copy counts, decode, and record. Trial `t` uses RNG stream `t` of
/// the seeded generator, so the report is bit-identical for any thread
/// count and any trial-scheduling order.
///
/// # Example
///
/// ```
/// use nshot::geometry::AngleInterval;
/// use nshot::simulator::{run_experiment, Codebook, SimulationConfig};
/// let book = Codebook::equal_angles(&AngleInterval::full(), 4)?;
/// let config = SimulationConfig::new(book, 200, 500, 7)?;
/// let report = run_experiment(&config);
/// assert!(report.error_rate < 0.05); // 4 codewords vs W(200) = 10.8
/// # Ok::<(), nshot::Error>(())
/// ```
pub fn run_experiment(config: &SimulationConfig) -> SimulationReport {
    let book = &config.codebook;
    let m = book.len();
    let outcomes: Vec<(usize, usize)> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(trial);
            let truth = rng.random_range(0..m);
            let counts = sample_counts_with(&book.states[truth], config.n, &mut rng);
            (truth, ml_decode(&counts, book))
        })
        .collect();

    let mut errors = 0u64;
    let mut per_trials = vec![0u64; m];
    let mut per_errors = vec![0u64; m];
    let mut wrong_decodes: Vec<HashMap<usize, u64>> = vec![HashMap::new(); m];
    for &(truth, decoded) in &outcomes {
        per_trials[truth] += 1;
        if decoded != truth {
            errors += 1;
            per_errors[truth] += 1;
            *wrong_decodes[truth].entry(decoded).or_insert(0) += 1;
        }
    }
    let confusion_top = wrong_decodes
        .iter()
        .map(|counts| {
            let mut entries: Vec<(usize, u64)> =
                counts.iter().map(|(&j, &c)| (j, c)).collect();
            entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            entries.first().map(|&(j, _)| j)
        })
        .collect();
    let w_predicted = book.w_predicted(config.n);
    SimulationReport {
        n: config.n,
        codebook_size: m,
        trials: config.trials,
        errors,
        error_rate: errors as f64 / config.trials as f64,
        wilson_ci_95: wilson_interval(errors, config.trials),
        per_codeword_trials: per_trials.clone(),
        per_codeword_errors: per_errors.clone(),
        per_codeword_error_rates: per_errors
            .iter()
            .zip(&per_trials)
            .map(|(&e, &t)| if t == 0 { 0.0 } else { e as f64 / t as f64 })
            .collect(),
        confusion_top,
        w_predicted,
        load_factor: m as f64 / w_predicted,
    }
}

/// 95% Wilson score interval for `successes` out of `trials`. Behaves
/// sensibly at the boundary rates (never escapes `[0, 1]`, never
/// collapses to a point at 0 or 1) and always contains the raw
/// proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0, "interval needs at least one trial");
    assert!(successes <= trials);
    let nf = trials as f64;
    let p = successes as f64 / nf;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // at the boundary counts the exact bounds are 0 and 1; computing
    // them leaves ~1e-17 of rounding residue, so pin them
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

// --- load sweep -------------------------------------------------------------

/// One completed row of [`error_vs_load_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadSweepRow {
    /// Copies per trial.
    pub n: u64,
    /// Requested load factor.
    pub load: f64,
    /// Codebook size `floor(load * W(n))`.
    pub m: usize,
    /// Observed error rate.
    pub error_rate: f64,
    /// 95% Wilson interval for the error rate.
    pub ci: (f64, f64),
}

/// A `(n, load)` pair that produced no row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRow {
    /// Copies per trial.
    pub n: u64,
    /// Requested load factor.
    pub load: f64,
    /// Why the row was skipped.
    pub reason: String,
}

/// Result of a load sweep: completed rows plus the skipped pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadSweepReport {
    /// Rows in (n-major, load-minor) order.
    pub rows: Vec<LoadSweepRow>,
    /// Pairs whose codebook size floored below 1.
    pub skipped: Vec<SkippedRow>,
}

/// Error rate as a function of codebook load `M = floor(load * W(n))`,
/// over the cross product of `n_values` and `load_factors` (n-major
/// order). Pairs with `M < 1` are skipped and recorded. Each row derives
/// its own seed from `(seed, row index)` - the index counts skipped
/// pairs too, so adding a load does not reshuffle later rows.
pub fn error_vs_load_sweep(
    interval: &AngleInterval,
    n_values: &[u64],
    load_factors: &[f64],
    trials: u64,
    seed: u64,
) -> Result<LoadSweepReport> {
    if n_values.is_empty() || load_factors.is_empty() {
        return Err(Error::InvalidArgument {
            name: "n_values",
            reason: "sweep needs at least one n and one load factor".into(),
        });
    }
    for &load in load_factors {
        if !load.is_finite() || load < 0.0 {
            return Err(Error::InvalidArgument {
                name: "load_factors",
                reason: format!("load factors must be finite and non-negative, got {load}"),
            });
        }
    }
    let mut report = LoadSweepReport {
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    let mut row_index = 0u64;
    for &n in n_values {
        let w = w_qubit(n, interval);
        for &load in load_factors {
            let row_seed = mix_seed(seed, row_index);
            row_index += 1;
            let m = (load * w).floor();
            if m < 1.0 {
                report.skipped.push(SkippedRow {
                    n,
                    load,
                    reason: format!("codebook size floor({load} * {w:.3}) < 1"),
                });
                continue;
            }
            let book = Codebook::equal_angles(interval, m as usize)?;
            let config = SimulationConfig::new(book, n, trials, row_seed)?;
            let run = run_experiment(&config);
            report.rows.push(LoadSweepRow {
                n,
                load,
                m: m as usize,
                error_rate: run.error_rate,
                ci: run.wilson_ci_95,
            });
        }
    }
    Ok(report)
}

/// Counter-based per-row seed derivation (splitmix64 finalizer).
fn mix_seed(seed: u64, row: u64) -> u64 {
    let mut z = seed ^ row.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E593_86D1_931E);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// --- tests -----------------------------------------------------------------
