//! Exercises the strategy-coding construction end to end: matrix codebooks
//! sampled from a solved input law, state-driven row selection through the
//! noisy channel, and a Monte Carlo estimate of the information rate.
//!
//! A codeword is an `M × n` matrix: column `j` is one extended symbol
//! `t = (t_1..t_M)` drawn i.i.d. from the input law, and when state `s` is
//! observed in slot `j` the transmitter sends row `s` of column `j`. Row
//! `i` always obeys `|t_i| ≤ a_i`, so the causal amplitude constraint holds
//! for every state realization by construction.
//!
//! There is no decoder here: decoding arguments need exponentially many
//! codewords, while the rate itself is checkable directly —
//! [`empirical_mi`] averages `ln(f(y|t)/f(y;F))` over simulated `(t, y)`
//! pairs and converges to the quadrature mutual information, standard
//! error and all.
//!
//! All randomness is counter-based: one seed plus a stream index per
//! codeword or sample chunk, so concurrent workers draw reproducible,
//! disjoint streams and identical seeds reproduce results bit for bit.
//!
//! # Example
//!
//! ```
//! use ehcap_core::channel::{DiscreteDistribution, ExtendedPoint, StateAlphabet};
//! use ehcap_core::strategy_sim::{sample_codebook, transmit, CodebookSpec};
//!
//! let alphabet = StateAlphabet::new(vec![0.0, 1.5], vec![0.5, 0.5]).unwrap();
//! let f = DiscreteDistribution::new(
//!     vec![ExtendedPoint::new(vec![0.0, -1.5]), ExtendedPoint::new(vec![0.0, 1.5])],
//!     vec![0.5, 0.5],
//!     &alphabet,
//! )
//! .unwrap();
//! let spec = CodebookSpec::new(8, 4, f, alphabet, 42).unwrap();
//! let codebook = sample_codebook(&spec);
//! assert_eq!(codebook.len(), 4);
//!
//! // Off state in every slot: the transmitter stays silent.
//! let trace = transmit(&codebook[0], &vec![0; 8], 7).unwrap();
//! assert!(trace.sent.iter().all(|x| *x == 0.0));
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{DiscreteDistribution, ExtendedChannel, StateAlphabet};
use crate::error::{Error, Result};
use crate::{lit, tol_scaled, Scalar};

/// Fixed number of independent sample streams for [`empirical_mi`]; the
/// estimate is reduced over chunks in index order, so it is identical for
/// any worker schedule.
const MI_CHUNKS: usize = 256;

/// Smallest sample count [`empirical_mi`] accepts.
const MI_MIN_SAMPLES: usize = 100_000;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Everything needed to sample a codebook: block length, codebook size, the
/// input law with its alphabet, and the seed.
#[derive(Debug, Clone)]
pub struct CodebookSpec<T> {
    block_length: usize,
    num_codewords: usize,
    distribution: DiscreteDistribution<T>,
    alphabet: StateAlphabet<T>,
    seed: u64,
}

impl<T: Scalar> CodebookSpec<T> {
    /// Validates the spec: positive sizes, matching dimensions, and every
    /// support point inside the alphabet's box.
    pub fn new(
        block_length: usize,
        num_codewords: usize,
        distribution: DiscreteDistribution<T>,
        alphabet: StateAlphabet<T>,
        seed: u64,
    ) -> Result<Self> {
        if block_length == 0 || num_codewords == 0 {
            return Err(Error::Domain(format!(
                "block length and codebook size must be positive, got {block_length}/{num_codewords}"
            )));
        }
        let slack = tol_scaled::<T>(1e-9, 16.0) * (T::one() + alphabet.max_amplitude());
        for p in distribution.points() {
            if !alphabet.contains(p.coords(), slack) {
                return Err(Error::Infeasible(format!(
                    "support point {:?} outside the codebook alphabet's box",
                    p.coords()
                )));
            }
        }
        Ok(Self { block_length, num_codewords, distribution, alphabet, seed })
    }

    /// Block length `n` (columns per codeword).
    pub fn block_length(&self) -> usize {
        self.block_length
    }

    /// Number of codewords to sample.
    pub fn num_codewords(&self) -> usize {
        self.num_codewords
    }

    /// The input law columns are drawn from.
    pub fn distribution(&self) -> &DiscreteDistribution<T> {
        &self.distribution
    }

    /// The state alphabet the codebook is built for.
    pub fn alphabet(&self) -> &StateAlphabet<T> {
        &self.alphabet
    }

    /// Base seed; codeword `c` draws from stream `c`.
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// One matrix codeword: row `i` is the symbol sequence used when state `i`
/// is observed. Carries the per-state amplitude bounds so a transmission
/// can be validated without further context.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword<T> {
    num_states: usize,
    block_length: usize,
    /// Row-major `num_states × block_length`.
    data: Vec<T>,
    amplitudes: Vec<T>,
}

impl<T: Scalar> Codeword<T> {
    /// Builds a codeword from rows (one per state) and the per-state
    /// amplitude bounds. Shape is validated here; entry feasibility is
    /// checked by [`transmit`], so that corrupted entries can be detected
    /// at the point of use.
    pub fn new(rows: Vec<Vec<T>>, amplitudes: Vec<T>) -> Result<Self> {
        if rows.is_empty() || rows.len() != amplitudes.len() {
            return Err(Error::Domain(format!(
                "codeword needs one row per state, got {} rows for {} amplitudes",
                rows.len(),
                amplitudes.len()
            )));
        }
        let n = rows[0].len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("codeword rows must be nonempty and equal-length".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * n);
        for row in &rows {
            data.extend_from_slice(row);
        }
        Ok(Self { num_states: rows.len(), block_length: n, data, amplitudes })
    }

    /// Number of states (rows).
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Block length `n` (columns).
    pub fn block_length(&self) -> usize {
        self.block_length
    }

    /// Row `i`: the symbols sent in slots where state `i` occurs.
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.block_length..(i + 1) * self.block_length]
    }

    /// Column `j` as owned coordinates — the extended symbol of slot `j`.
    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.num_states).map(|i| self.data[i * self.block_length + j]).collect()
    }
}

/// Record of one transmission: the state sequence, what was sent, and what
/// the receiver saw.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionTrace<T> {
    /// Observed state index per slot.
    pub states: Vec<usize>,
    /// Channel inputs `x_j = codeword[state_j][j]`.
    pub sent: Vec<T>,
    /// Channel outputs `y_j = x_j + N(0, 1)`.
    pub received: Vec<T>,
}

/// A Monte Carlo information estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate<T> {
    /// Sample mean of `ln(f(y|t)/f(y;F))`, in nats.
    pub mean: T,
    /// Standard error of the mean.
    pub std_error: T,
    /// Number of samples averaged.
    pub num_samples: usize,
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Inverse-CDF draw over `cumulative` (a nondecreasing vector ending at
/// ~1.0): the first index whose cumulative weight exceeds `u`.
fn draw_index(cumulative: &[f64], u: f64) -> usize {
    for (idx, c) in cumulative.iter().enumerate() {
        if u < *c {
            return idx;
        }
    }
    cumulative.len() - 1
}

fn cumulative_f64<T: Scalar>(weights: &[T]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w.to_f64().unwrap_or(0.0);
            acc
        })
        .collect()
}

/// Samples the codebook: `num_codewords` matrices whose columns are i.i.d.
/// draws from the spec's input law. Codeword `c` uses stream `c` of the
/// seeded generator, so the codebook is reproducible and any subset of
/// codewords can be regenerated independently.
pub fn sample_codebook<T: Scalar>(spec: &CodebookSpec<T>) -> Vec<Codeword<T>> {
    let n = spec.block_length;
    let m = spec.alphabet.num_states();
    let cumulative = cumulative_f64(spec.distribution.weights());
    let points = spec.distribution.points();
    let amplitudes = spec.alphabet.amplitudes().to_vec();

    (0..spec.num_codewords)
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(c as u64);
            let mut data = vec![T::zero(); m * n];
            for j in 0..n {
                let u: f64 = rng.random();
                let pt = points[draw_index(&cumulative, u)].coords();
                for (i, &t) in pt.iter().enumerate() {
                    data[i * n + j] = t;
                }
            }
            Codeword {
                num_states: m,
                block_length: n,
                data,
                amplitudes: amplitudes.clone(),
            }
        })
        .collect()
}

/// Sends one codeword through the channel: slot `j` transmits the row
/// selected by `state_seq[j]` and receives it plus unit Gaussian noise
/// drawn from `noise_seed`.
///
/// # Errors
///
/// `Domain` when the state sequence length or an index is out of range;
/// `Infeasible` when any codeword entry violates its row's amplitude bound
/// — that signals a corrupted codeword, not a recoverable condition.
pub fn transmit<T: Scalar>(
    codeword: &Codeword<T>,
    state_seq: &[usize],
    noise_seed: u64,
) -> Result<TransmissionTrace<T>>
where
    StandardNormal: Distribution<T>,
{
    if state_seq.len() != codeword.block_length {
        return Err(Error::Domain(format!(
            "state sequence length {} does not match block length {}",
            state_seq.len(),
            codeword.block_length
        )));
    }
    if let Some(&s) = state_seq.iter().find(|s| **s >= codeword.num_states) {
        return Err(Error::Domain(format!(
            "state index {s} out of range for {} states",
            codeword.num_states
        )));
    }
    for (i, &a) in codeword.amplitudes.iter().enumerate() {
        let slack = tol_scaled::<T>(1e-9, 16.0) * (T::one() + a);
        if codeword.row(i).iter().any(|t| !t.is_finite() || t.abs() > a + slack) {
            return Err(Error::Infeasible(format!(
                "codeword row {i} exceeds its amplitude bound {a}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut sent = Vec::with_capacity(codeword.block_length);
    let mut received = Vec::with_capacity(codeword.block_length);
    for (j, &s) in state_seq.iter().enumerate() {
        let x = codeword.data[s * codeword.block_length + j];
        let noise: T = rng.sample(StandardNormal);
        sent.push(x);
        received.push(x + noise);
    }
    Ok(TransmissionTrace { states: state_seq.to_vec(), sent, received })
}

// ---------------------------------------------------------------------------
// Empirical mutual information
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of the mutual information of `f` over `ch`: draws
/// `(t, s, y)` triples — a support point, a state, and an output — and
/// averages `ln(f(y|t) / f(y;F))`.
///
/// Sampling is split into a fixed number of seed-derived streams reduced in
/// index order, so the estimate is bit-for-bit reproducible for a given
/// seed regardless of scheduling.
///
/// # Errors
///
/// `Domain` for fewer than `1e5` samples (the standard error would be too
/// loose to certify anything); `Infeasible` when `f` does not fit `ch`.
pub fn empirical_mi<T: Scalar>(
    ch: &ExtendedChannel<T>,
    f: &DiscreteDistribution<T>,
    num_samples: usize,
    seed: u64,
) -> Result<MiEstimate<T>>
where
    StandardNormal: Distribution<T>,
{
    if num_samples < MI_MIN_SAMPLES {
        return Err(Error::Domain(format!(
            "empirical MI needs at least {MI_MIN_SAMPLES} samples, got {num_samples}"
        )));
    }
    let alphabet = ch.alphabet();
    let slack = tol_scaled::<T>(1e-9, 16.0) * (T::one() + alphabet.max_amplitude());
    for p in f.points() {
        if !alphabet.contains(p.coords(), slack) {
            return Err(Error::Infeasible(format!(
                "support point {:?} outside this channel's box",
                p.coords()
            )));
        }
    }

    let point_cdf = cumulative_f64(f.weights());
    let state_cdf = cumulative_f64(alphabet.probs());
    let log_weights: Vec<T> = f.weights().iter().map(|w| w.ln()).collect();
    let points = f.points();

    let base = num_samples / MI_CHUNKS;
    let extra = num_samples % MI_CHUNKS;
    let mut sum = T::zero();
    let mut sum_sq = T::zero();
    // One stream per chunk, reduced in chunk order: deterministic for any
    // worker schedule.
    let mut scratch = vec![T::zero(); f.support_size()];
    for chunk in 0..MI_CHUNKS {
        let chunk_len = base + usize::from(chunk < extra);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk as u64);
        let mut c_sum = T::zero();
        let mut c_sum_sq = T::zero();
        for _ in 0..chunk_len {
            let t = points[draw_index(&point_cdf, rng.random())].coords();
            let s = draw_index(&state_cdf, rng.random());
            let noise: T = rng.sample(StandardNormal);
            let y = t[s] + noise;

            let log_cond = ch.log_conditional_density(t, y);
            for (sc, (pt, lw)) in scratch.iter_mut().zip(points.iter().zip(&log_weights)) {
                *sc = *lw + ch.log_conditional_density(pt.coords(), y);
            }
            let log_out = crate::numerics::logsumexp(&scratch);
            let z = log_cond - log_out;
            c_sum = c_sum + z;
            c_sum_sq = c_sum_sq + z * z;
        }
        sum = sum + c_sum;
        sum_sq = sum_sq + c_sum_sq;
    }

    let nf = lit::<T>(num_samples as f64);
    let mean = sum / nf;
    let var = (sum_sq - nf * mean * mean) / (nf - T::one());
    let std_error = (var.max(T::zero()) / nf).sqrt();
    Ok(MiEstimate { mean, std_error, num_samples })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ExtendedChannel, ExtendedPoint};
    use crate::numerics::QuadratureSpec;

    fn onoff_setup(p_on: f64, amp: f64) -> (StateAlphabet<f64>, DiscreteDistribution<f64>) {
        let alphabet = StateAlphabet::new(vec![0.0, amp], vec![1.0 - p_on, p_on]).unwrap();
        let f = DiscreteDistribution::new(
            vec![ExtendedPoint::new(vec![0.0, -amp]), ExtendedPoint::new(vec![0.0, amp])],
            vec![0.5, 0.5],
            &alphabet,
        )
        .unwrap();
        (alphabet, f)
    }

    #[test]
    fn single_point_laws_give_constant_codebooks() {
        let alphabet = StateAlphabet::new(vec![1.0], vec![1.0]).unwrap();
        let f = DiscreteDistribution::new(
            vec![ExtendedPoint::new(vec![0.25])],
            vec![1.0],
            &alphabet,
        )
        .unwrap();
        let spec = CodebookSpec::new(64, 3, f, alphabet, 11).unwrap();
        for cw in sample_codebook(&spec) {
            assert!(cw.row(0).iter().all(|t| *t == 0.25), "all columns identical");
        }
    }

    #[test]
    fn column_frequencies_match_the_law() {
        let n = 10_000usize;
        let (alphabet, f) = onoff_setup(0.5, 1.5);
        let spec = CodebookSpec::new(n, 1, f, alphabet, 2024).unwrap();
        let cw = &sample_codebook(&spec)[0];
        let plus = cw.row(1).iter().filter(|t| **t > 0.0).count() as f64 / n as f64;
        // Binomial 4-sigma band: 4 * 0.5 / sqrt(n) = 0.02.
        assert!((plus - 0.5).abs() < 0.02, "frequency of +sqrt(E) column {plus}");
    }

    #[test]
    fn transmit_selects_rows_and_pins_the_off_state() {
        let (alphabet, f) = onoff_setup(0.5, 1.5);
        let spec = CodebookSpec::new(128, 1, f, alphabet, 5).unwrap();
        let cw = &sample_codebook(&spec)[0];

        let all_on = transmit(cw, &vec![1usize; 128], 9).unwrap();
        assert_eq!(all_on.sent, cw.row(1).to_vec(), "all-on states send row 1");
        let all_off = transmit(cw, &vec![0usize; 128], 9).unwrap();
        assert!(all_off.sent.iter().all(|x| *x == 0.0), "off state pins the input to 0");
        assert_eq!(all_on.states.len(), 128);
        assert_eq!(all_on.received.len(), 128);

        // Identical seeds reproduce the trace bit for bit.
        let again = transmit(cw, &vec![1usize; 128], 9).unwrap();
        assert_eq!(again, all_on);
    }

    #[test]
    fn transmit_rejects_bad_sequences_and_corrupt_entries() {
        let (alphabet, f) = onoff_setup(0.5, 1.5);
        let spec = CodebookSpec::new(4, 1, f, alphabet, 5).unwrap();
        let cw = &sample_codebook(&spec)[0];
        assert!(matches!(transmit(cw, &[1, 1], 0), Err(Error::Domain(_))), "wrong length");
        assert!(matches!(transmit(cw, &[0, 1, 2, 0], 0), Err(Error::Domain(_))), "bad index");

        let corrupt = Codeword::new(vec![vec![0.0, 0.6], vec![1.0, -1.0]], vec![0.0, 1.5]).unwrap();
        let err = transmit(&corrupt, &[0, 1], 0).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "row 0 exceeds its zero bound");
    }

    #[test]
    fn state_fractions_follow_the_arrival_probability() {
        let n = 10_000usize;
        let (alphabet, f) = onoff_setup(0.5, 1.5);
        let state_cdf = cumulative_f64(alphabet.probs());
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let states: Vec<usize> = (0..n).map(|_| draw_index(&state_cdf, rng.random())).collect();

        let spec = CodebookSpec::new(n, 1, f, alphabet, 6).unwrap();
        let cw = &sample_codebook(&spec)[0];
        let trace = transmit(cw, &states, 13).unwrap();
        let zeros = trace.sent.iter().filter(|x| **x == 0.0).count() as f64 / n as f64;
        assert!((zeros - 0.5).abs() < 0.02, "zero-sent fraction {zeros}");
    }

    #[test]
    fn empirical_mi_is_zero_for_single_point_laws_and_deterministic() {
        let alphabet = StateAlphabet::<f64>::new(vec![1.5], vec![1.0]).unwrap();
        let rule = QuadratureSpec::default().rule(1.5).unwrap();
        let ch = ExtendedChannel::new(alphabet, rule).unwrap();
        let f = DiscreteDistribution::new(
            vec![ExtendedPoint::new(vec![0.7])],
            vec![1.0],
            ch.alphabet(),
        )
        .unwrap();
        let est = empirical_mi(&ch, &f, 100_000, 1).unwrap();
        assert!(est.mean.abs() < 1e-12, "single-point law carries nothing, got {}", est.mean);
        assert!(est.std_error < 1e-12);

        let again = empirical_mi(&ch, &f, 100_000, 1).unwrap();
        assert_eq!(est, again, "same seed, same bits");

        assert!(empirical_mi(&ch, &f, 50_000, 1).is_err(), "too few samples");
    }

    #[test]
    fn empirical_mi_tracks_the_quadrature_value() {
        let alphabet = StateAlphabet::<f64>::new(vec![1.5], vec![1.0]).unwrap();
        let rule = QuadratureSpec::default().rule(1.5).unwrap();
        let ch = ExtendedChannel::new(alphabet, rule).unwrap();
        let f = DiscreteDistribution::new(
            vec![ExtendedPoint::new(vec![-1.5]), ExtendedPoint::new(vec![1.5])],
            vec![0.5, 0.5],
            ch.alphabet(),
        )
        .unwrap();
        let est = empirical_mi(&ch, &f, 400_000, 3).unwrap();
        let quad = ch.mutual_information(&f);
        let dev = (est.mean - quad).abs();
        assert!(
            dev < 4.0 * est.std_error && est.std_error < 2e-3,
            "estimate {} vs quadrature {} (se {})",
            est.mean,
            quad,
            est.std_error
        );
    }
}
