//! The on-off energy model: a transmitter that, in each symbol slot, either
//! has a full energy quantum (probability `p_on`, amplitude budget `√E`) or
//! none (amplitude budget 0), with causal knowledge of which.
//!
//! This two-state instance of the general amplitude-state channel is where
//! the structure is sharpest, so it gets a dedicated surface:
//!
//! - [`onoff_capacity`] — the causal-knowledge capacity, solved over
//!   reflection-symmetric laws (the optimum is symmetric; an
//!   [unsymmetrized][`onoff_capacity_unsymmetrized`] variant runs the
//!   general solver for cross-checking).
//! - [`baselines`] — reference curves: state knowledge at both ends
//!   (`p_on · C_static(√E)`), no state knowledge (zero — the transmitter
//!   must respect the off-state bound always), and the average-power
//!   benchmark `½ ln(1 + p_on E)`.
//! - [`g_function`] / [`u_threshold`] — the scalar optimality probe for the
//!   symmetric two-point law and the on-amplitude where that law stops
//!   being optimal, i.e. where the support first grows past two points.
//!
//! # Example
//!
//! ```
//! use ehcap_core::onoff::onoff_capacity;
//!
//! let sol = onoff_capacity::<f64>(0.5, 2.25, 1e-6).unwrap();
//! assert!(sol.converged);
//! assert_eq!(sol.distribution.support_size(), 2);
//! assert!((sol.capacity - 0.153515576491).abs() < 1e-6);
//! ```

use crate::channel::{DiscreteDistribution, ExtendedChannel, ExtendedPoint, StateAlphabet};
use crate::error::{Error, Result};
use crate::numerics::QuadratureSpec;
use crate::solver::{
    smith_capacity, solve_capacity, solve_capacity_symmetric, CapacitySolution, SolveOptions,
};
use crate::{lit, Scalar};

/// Optimality slack for the two-point predicate behind [`u_threshold`].
const THRESHOLD_SLACK: f64 = 1e-7;
/// Probe-grid size for the predicate (points across `[−x, x]`).
const THRESHOLD_GRID: usize = 514;
/// Initial threshold bracket, in on-amplitude units.
const THRESHOLD_BRACKET: (f64, f64) = (1.0, 3.0);

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

/// An on-off instance: energy quantum `E` (amplitude budget `√E` when on)
/// available with probability `p_on` per slot.
#[derive(Debug, Clone, Copy)]
pub struct OnOffProblem<T> {
    p_on: T,
    energy: T,
}

impl<T: Scalar> OnOffProblem<T> {
    /// Validates `p_on ∈ (0, 1]` and `E ≥ 0` finite.
    pub fn new(p_on: T, energy: T) -> Result<Self> {
        if !p_on.is_finite() || !(p_on > T::zero()) || p_on > T::one() {
            return Err(Error::Domain(format!("p_on must lie in (0, 1], got {p_on}")));
        }
        if !energy.is_finite() || energy < T::zero() {
            return Err(Error::Domain(format!("energy must be finite and >= 0, got {energy}")));
        }
        Ok(Self { p_on, energy })
    }

    /// On-state probability.
    pub fn p_on(&self) -> T {
        self.p_on
    }

    /// Energy quantum `E`.
    pub fn energy(&self) -> T {
        self.energy
    }

    /// On-state amplitude budget `√E`.
    pub fn amplitude(&self) -> T {
        self.energy.sqrt()
    }

    /// The two-state alphabet `(0, √E)` with probabilities
    /// `(1−p_on, p_on)`. At `p_on = 1` the off state has probability zero
    /// and is dropped, reducing to the single-state static constraint.
    pub fn alphabet(&self) -> Result<StateAlphabet<T>> {
        alphabet_for_amplitude(self.p_on, self.amplitude())
    }

    /// Index of the on-state axis in [`Self::alphabet`]'s ordering.
    pub fn free_axis(&self) -> usize {
        usize::from(self.p_on < T::one())
    }

    /// The extended channel for this instance under `quad`.
    pub fn channel(&self, quad: &QuadratureSpec) -> Result<ExtendedChannel<T>> {
        let alphabet = self.alphabet()?;
        let rule = quad.rule::<T>(self.amplitude().to_f64().unwrap_or(f64::NAN))?;
        ExtendedChannel::new(alphabet, rule)
    }
}

fn alphabet_for_amplitude<T: Scalar>(p_on: T, amp: T) -> Result<StateAlphabet<T>> {
    if p_on == T::one() {
        StateAlphabet::new(vec![amp], vec![T::one()])
    } else {
        StateAlphabet::new(vec![T::zero(), amp], vec![T::one() - p_on, p_on])
    }
}

/// Reference values bracketing the causal capacity.
#[derive(Debug, Clone, Copy)]
pub struct BaselineSet<T> {
    /// State knowledge at transmitter *and* receiver:
    /// `p_on · C_static(√E)` (code only over on-slots).
    pub c_si_both: T,
    /// No state knowledge at the transmitter: the off-state bound must hold
    /// in every slot, forcing silence.
    pub c_no_si: T,
    /// Average-power benchmark `½ ln(1 + p_on E)` — an upper reference, not
    /// achievable under the amplitude constraint.
    pub c_battery: T,
}

// ---------------------------------------------------------------------------
// Capacity
// ---------------------------------------------------------------------------

/// Causal-knowledge capacity of the on-off instance, in nats.
///
/// Solves over reflection-symmetric laws on the on-axis — the optimum is
/// symmetric, and the constrained parameterization keeps it exactly so.
pub fn onoff_capacity<T: Scalar>(p_on: T, energy: T, tol: T) -> Result<CapacitySolution<T>> {
    let problem = OnOffProblem::new(p_on, energy)?;
    let opts = SolveOptions { tol, ..SolveOptions::default() };
    onoff_capacity_with(&problem, &QuadratureSpec::default(), &opts)
}

/// [`onoff_capacity`] with explicit quadrature and solver settings.
pub fn onoff_capacity_with<T: Scalar>(
    problem: &OnOffProblem<T>,
    quad: &QuadratureSpec,
    opts: &SolveOptions<T>,
) -> Result<CapacitySolution<T>> {
    let ch = problem.channel(quad)?;
    if problem.energy == T::zero() {
        // Degenerate box: the general solver returns the trivial law.
        return solve_capacity(&ch, opts);
    }
    solve_capacity_symmetric(&ch, problem.free_axis(), opts)
}

/// The same solve without the symmetry constraint: the general
/// escalation-from-corners path. Useful as a cross-check that the symmetric
/// restriction loses nothing.
pub fn onoff_capacity_unsymmetrized<T: Scalar>(
    problem: &OnOffProblem<T>,
    quad: &QuadratureSpec,
    opts: &SolveOptions<T>,
) -> Result<CapacitySolution<T>> {
    let ch = problem.channel(quad)?;
    solve_capacity(&ch, opts)
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Computes [`BaselineSet`] for the instance, solving the static capacity
/// at amplitude `√E` internally with tolerance `tol`.
pub fn baselines<T: Scalar>(problem: &OnOffProblem<T>, tol: T) -> Result<BaselineSet<T>> {
    let static_capacity = smith_capacity(problem.amplitude(), tol)?.capacity;
    Ok(baselines_with(problem, static_capacity))
}

/// [`BaselineSet`] from a precomputed static capacity `C_static(√E)` — pure
/// arithmetic, for sweeps that reuse one static solve across many rows.
pub fn baselines_with<T: Scalar>(problem: &OnOffProblem<T>, static_capacity: T) -> BaselineSet<T> {
    let half = lit::<T>(0.5);
    BaselineSet {
        c_si_both: problem.p_on * static_capacity,
        c_no_si: T::zero(),
        c_battery: half * (T::one() + problem.p_on * problem.energy).ln(),
    }
}

/// Capacity with state knowledge at both transmitter and receiver for an
/// arbitrary state alphabet: code separately within each state,
/// `C = Σ_i p_i C_static(a_i)`.
pub fn general_si_both<T: Scalar>(alphabet: &StateAlphabet<T>, tol: T) -> Result<T> {
    let mut acc = T::zero();
    for (&a, &p) in alphabet.amplitudes().iter().zip(alphabet.probs()) {
        let c = if a == T::zero() { T::zero() } else { smith_capacity(a, tol)?.capacity };
        acc = acc + p * c;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Two-point optimality probe and the U-curve
// ---------------------------------------------------------------------------

/// The two-point optimality probe `g(t_2, x)`: the information density
/// `i((0, t_2); F_x)` on the on-off channel with on-amplitude exactly `x`,
/// under the symmetric two-point law `F_x = ½δ_{(0,−x)} + ½δ_{(0,x)}`.
///
/// `F_x` is optimal iff `g(t_2, x) ≤ g(x, x)` for all `|t_2| ≤ x`; by
/// support stationarity `g(x, x)` equals the value `I(F_x)`.
///
/// # Errors
///
/// `Domain` when `p_on ∉ (0, 1]`, `x ≤ 0`, or `|t_2| > x`.
pub fn g_function<T: Scalar>(p_on: T, x: T, t2: T) -> Result<T> {
    if !p_on.is_finite() || !(p_on > T::zero()) || p_on > T::one() {
        return Err(Error::Domain(format!("p_on must lie in (0, 1], got {p_on}")));
    }
    if !x.is_finite() || !(x > T::zero()) {
        return Err(Error::Domain(format!("on-amplitude must be positive, got {x}")));
    }
    if !t2.is_finite() || t2.abs() > x {
        return Err(Error::Domain(format!("probe must satisfy |t2| <= x, got t2 = {t2}, x = {x}")));
    }
    let probe = BinaryProbe::new(p_on, x, &QuadratureSpec::default())?;
    Ok(probe.channel.info_density_against(&probe.log_fy, &probe.embed(t2)))
}

/// Shared state for many `g(·, x)` evaluations at one `x`: the channel, the
/// two-point law's output density, and its value.
struct BinaryProbe<T> {
    channel: ExtendedChannel<T>,
    log_fy: Vec<T>,
    value: T,
    on_axis: usize,
    dim: usize,
}

impl<T: Scalar> BinaryProbe<T> {
    fn new(p_on: T, x: T, quad: &QuadratureSpec) -> Result<Self> {
        let alphabet = alphabet_for_amplitude(p_on, x)?;
        let on_axis = usize::from(p_on < T::one());
        let dim = alphabet.num_states();
        let rule = quad.rule::<T>(x.to_f64().unwrap_or(f64::NAN))?;
        let channel = ExtendedChannel::new(alphabet, rule)?;
        let mk = |q: T| {
            let mut coords = vec![T::zero(); dim];
            coords[on_axis] = q;
            ExtendedPoint::new(coords)
        };
        let half = lit::<T>(0.5);
        let law = DiscreteDistribution::new(vec![mk(-x), mk(x)], vec![half, half], channel.alphabet())?;
        let table = crate::channel::DensityTable::build(&channel, law.points());
        let log_fy = table.log_output_density(law.weights());
        let value = table.mutual_information(law.weights(), &log_fy);
        Ok(Self { channel, log_fy, value, on_axis, dim })
    }

    fn embed(&self, q: T) -> Vec<T> {
        let mut coords = vec![T::zero(); self.dim];
        coords[self.on_axis] = q;
        coords
    }

    /// `max_{t2 grid} g(t2, x) − g(x, x)` over the fixed probe grid.
    fn worst_excess(&self) -> T {
        let x = self.channel.alphabet().amplitudes()[self.on_axis];
        let mut worst = T::neg_infinity();
        for q in symmetric_linspace(x, THRESHOLD_GRID) {
            let g = self.channel.info_density_against(&self.log_fy, &self.embed(q));
            worst = worst.max(g);
        }
        worst - self.value
    }
}

/// `n` evenly spaced values across `[−x, x]`, endpoints included, exactly
/// mirror-symmetric.
fn symmetric_linspace<T: Scalar>(x: T, n: usize) -> Vec<T> {
    let xf = x.to_f64().unwrap_or(0.0);
    let mut out = vec![T::zero(); n];
    for i in 0..n / 2 {
        let v = lit::<T>(xf * (2.0 * i as f64 / (n as f64 - 1.0) - 1.0));
        out[i] = v;
        out[n - 1 - i] = -v;
    }
    if n % 2 == 1 {
        out[n / 2] = T::zero();
    }
    out
}

/// The on-amplitude at which the symmetric two-point law stops being
/// optimal for on-probability `p_on` — the boundary where the causal
/// support first grows past two points. Decreasing in `p_on`.
///
/// Bisects the probe predicate to an amplitude resolution of `1e-6`.
pub fn u_threshold<T: Scalar>(p_on: T) -> Result<T> {
    u_threshold_with(p_on, &QuadratureSpec::default(), lit(1e-6))
}

/// [`u_threshold`] with explicit quadrature and bisection resolution.
///
/// # Errors
///
/// `Domain` for invalid `p_on` or a non-positive resolution;
/// `NonConvergence` when the threshold escapes the (widened) search range —
/// the message records the bracket that failed.
pub fn u_threshold_with<T: Scalar>(
    p_on: T,
    quad: &QuadratureSpec,
    bisect_tol: T,
) -> Result<T> {
    if !p_on.is_finite() || !(p_on > T::zero()) || p_on > T::one() {
        return Err(Error::Domain(format!("p_on must lie in (0, 1], got {p_on}")));
    }
    if !(bisect_tol > T::zero()) || !bisect_tol.is_finite() {
        return Err(Error::Domain(format!("bisection resolution must be positive, got {bisect_tol}")));
    }
    let slack = lit::<T>(THRESHOLD_SLACK);
    let excess = |x: T| -> Result<T> { Ok(BinaryProbe::new(p_on, x, quad)?.worst_excess()) };

    // Bracket [lo, hi] with the predicate holding at lo and failing at hi,
    // widening a bounded number of times before giving up.
    let mut lo = lit::<T>(THRESHOLD_BRACKET.0);
    let mut hi = lit::<T>(THRESHOLD_BRACKET.1);
    let mut widenings = 0;
    while excess(lo)? > slack {
        lo = lo * lit(0.5);
        widenings += 1;
        if widenings > 6 {
            return Err(Error::NonConvergence(format!(
                "two-point law already suboptimal at on-amplitude {lo}; threshold below search range"
            )));
        }
    }
    widenings = 0;
    while excess(hi)? <= slack {
        hi = hi + lit(2.0);
        widenings += 1;
        if widenings > 6 {
            return Err(Error::NonConvergence(format!(
                "two-point law still optimal at on-amplitude {hi}; threshold above search range"
            )));
        }
    }

    while hi - lo > bisect_tol {
        let mid = lit::<T>(0.5) * (lo + hi);
        if excess(mid)? <= slack {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lit::<T>(0.5) * (lo + hi))
}

// ---------------------------------------------------------------------------
