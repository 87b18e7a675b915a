//! Capacity solver: finds the discrete input law maximizing mutual
//! information over the amplitude box, together with an optimality
//! certificate.
//!
//! The optimum of `I_F` over distributions on the box `∏ [−a_i, a_i]` is
//! characterized by the stationarity conditions
//!
//! ```text
//! i(t;F*) ≤ C   for every t in the box,
//! i(t;F*) = C   on the support of F*,
//! ```
//!
//! and is attained by a finite support. The solver exploits that structure
//! directly, in the style of Smith's amplitude-constrained construction:
//!
//! 1. **Fixed cardinality** ([`optimize_fixed_cardinality`]): for a given
//!    support size, alternate a weight fixed-point iteration (the classical
//!    alternating-maximization update, globally convergent because `I` is
//!    concave in the weights) with projected-gradient ascent on the support
//!    positions (Armijo backtracking, box projection).
//! 2. **Certificate** ([`kkt_check`]): scan the stationarity condition on a
//!    dense box lattice plus the support itself.
//! 3. **Escalation** ([`solve_capacity`]): start from the two-point corner
//!    law `±(a_1..a_M)`, and while the certificate fails, add a support
//!    point at the worst violation with a small seed weight and re-solve.
//!    The weight iteration re-optimizes globally, so each escalation can
//!    only raise the value.
//!
//! [`ba_oracle`] is an intentionally simple cross-check: plain
//! alternating-maximization weights on a fixed dense lattice, no position
//! optimization. It converges from below to within its lattice resolution
//! and shares no logic with the main solver beyond density evaluation.
//!
//! # Example
//!
//! ```
//! use ehcap_core::solver::smith_capacity;
//!
//! // Static amplitude constraint |x| <= 1: antipodal signaling is optimal.
//! let sol = smith_capacity::<f64>(1.0, 1e-6).unwrap();
//! assert!(sol.converged);
//! assert_eq!(sol.distribution.support_size(), 2);
//! assert!((sol.capacity - 0.336830820347).abs() < 1e-6);
//! ```

use crate::channel::{DensityTable, DiscreteDistribution, ExtendedChannel, ExtendedPoint};
use crate::error::{Error, Result};
use crate::numerics::gaussian_pdf;
use crate::{lit, tol_scaled, Scalar};

// ---------------------------------------------------------------------------
// Tunables (fixed by design; exposed knobs live in SolveOptions)
// ---------------------------------------------------------------------------

/// Weight-iteration stop: upper−lower information gap.
const INNER_GAP_TOL: f64 = 1e-11;
/// Weight-iteration hard cap; on hit the best iterate is used as-is.
const INNER_ITER_CAP: usize = 200_000;
/// Projected-gradient outer iteration cap per fixed-cardinality solve.
const OUTER_ITER_CAP: usize = 400;
/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
/// Initial, growth, shrink, max and min step sizes for the position ascent.
const STEP_INIT: f64 = 0.25;
const STEP_GROW: f64 = 1.5;
const STEP_SHRINK: f64 = 0.5;
const STEP_MAX: f64 = 4.0;
const STEP_MIN: f64 = 1e-16;
/// Support weights below this are dropped when a solve finishes.
const WEIGHT_FLOOR: f64 = 1e-9;
/// Seed weights tried (largest first) for an escalation point.
const SEED_WEIGHT_LADDER: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];
/// Largest lattice (points × nodes) ba_oracle will materialize.
const ORACLE_TABLE_CAP: usize = 40_000_000;

// ---------------------------------------------------------------------------
// Public types
// ---------------------------------------------------------------------------

/// Knobs for [`solve_capacity`].
#[derive(Debug, Clone)]
pub struct SolveOptions<T> {
    /// Capacity tolerance: the solve is converged when the stationarity
    /// scan shows violations no larger than this.
    pub tol: T,
    /// Hard cap on the support size; reaching it with a failing certificate
    /// yields `converged = false`.
    pub k_max: usize,
    /// Stationarity-scan lattice density, in probe points per unit length
    /// per axis.
    pub kkt_grid_density: usize,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self { tol: lit(1e-6), k_max: 8, kkt_grid_density: 64 }
    }
}

/// Result of a fixed-cardinality solve.
#[derive(Debug, Clone)]
pub struct FixedKResult<T> {
    /// The optimized input law. Its support can be smaller than the
    /// initial cardinality: coalesced points are merged and weights under
    /// the floor are dropped.
    pub distribution: DiscreteDistribution<T>,
    /// Mutual information of `distribution`, in nats.
    pub mi: T,
    /// True when the projected gradient met the stationarity tolerance
    /// (rather than the iteration cap or a vanishing line-search step).
    pub stationary: bool,
    /// Information value after each outer iteration — nondecreasing up to
    /// the inner gap tolerance.
    pub trace: Vec<T>,
}

/// Outcome of a stationarity scan over the box.
#[derive(Debug, Clone)]
pub struct KktReport<T> {
    /// `I_F` of the scanned distribution, in nats.
    pub capacity: T,
    /// `max_t i(t;F) − I_F` over lattice and support probes (signed; a
    /// negative value means every probe sat strictly below `I_F`).
    pub max_violation: T,
    /// First probe attaining the maximum.
    pub violation_argmax: ExtendedPoint<T>,
    /// `max_k |i(t_k;F) − I_F|` over the support — near zero at an optimum.
    pub support_slack: T,
    /// Human-readable description of the probe lattice.
    pub grid_spec: String,
}

/// Result of the full capacity solve.
#[derive(Debug, Clone)]
pub struct CapacitySolution<T> {
    /// The capacity-achieving input law found.
    pub distribution: DiscreteDistribution<T>,
    /// Its mutual information (the capacity when `converged`), in nats.
    pub capacity: T,
    /// Certificate for `distribution`.
    pub kkt: KktReport<T>,
    /// `(support size, value)` after each escalation round.
    pub cardinality_trace: Vec<(usize, T)>,
    /// True when the certificate passed within tolerance; false when the
    /// cardinality cap or a stalled escalation stopped the search first.
    pub converged: bool,
}

/// Result of the lattice cross-check.
#[derive(Debug, Clone)]
pub struct BaOracleResult<T> {
    /// Lattice law after the final iteration, pruned of negligible weights.
    pub distribution: DiscreteDistribution<T>,
    /// Certified achievable value (a lower bound on capacity up to
    /// quadrature error), in nats.
    pub mi: T,
    /// Upper−lower optimality gap *on the lattice* at exit.
    pub upper_gap: T,
    /// Iterations performed.
    pub iterations: usize,
    /// True when the relative-change stop fired before the iteration cap.
    pub converged: bool,
}

// ---------------------------------------------------------------------------
// Inner weight iteration
// ---------------------------------------------------------------------------

struct WeightOutcome<T> {
    weights: Vec<T>,
    lower: T,
    log_fy: Vec<T>,
}

/// Classical alternating-maximization fixed point for the support weights:
/// `w_k ∝ w_k · exp(i(t_k;F_w))`, stopped on the upper−lower gap. `I` is
/// concave in the weights, so this converges to the global optimum for the
/// given support.
fn optimize_weights<T: Scalar>(table: &DensityTable<T>, init: &[T]) -> WeightOutcome<T> {
    let gap_tol = tol_scaled::<T>(INNER_GAP_TOL, 512.0);
    let mut w = init.to_vec();
    normalize(&mut w);
    let mut iterations = 0;
    loop {
        let log_fy = table.log_output_density(&w);
        let info = table.info_densities(&log_fy);
        let lower: T = info.iter().zip(&w).map(|(i, w)| *i * *w).sum();
        let upper = info.iter().copied().fold(T::neg_infinity(), T::max);
        if upper - lower <= gap_tol || iterations >= INNER_ITER_CAP {
            return WeightOutcome { weights: w, lower, log_fy };
        }
        for (wk, ik) in w.iter_mut().zip(&info) {
            *wk = *wk * (*ik - upper).exp();
        }
        normalize(&mut w);
        iterations += 1;
    }
}

fn normalize<T: Scalar>(w: &mut [T]) {
    let sum: T = w.iter().copied().sum();
    for v in w.iter_mut() {
        *v = *v / sum;
    }
}

// ---------------------------------------------------------------------------
// Position gradient
// ---------------------------------------------------------------------------

/// `∂I/∂t_k^{(i)} = w_k p_i ∫ (y−t_k^{(i)}) φ(y−t_k^{(i)})
///                  [ln f(y|t_k) − ln f(y;F)] dy`,
/// with the weights held fixed. Pinned axes (`a_i = 0`) get zero.
fn position_gradient<T: Scalar>(
    ch: &ExtendedChannel<T>,
    table: &DensityTable<T>,
    points: &[ExtendedPoint<T>],
    weights: &[T],
    log_fy: &[T],
) -> Vec<Vec<T>> {
    let probs = ch.alphabet().probs();
    let amps = ch.alphabet().amplitudes();
    let nodes = ch.rule().nodes();
    let qw = ch.rule().weights();
    points
        .iter()
        .enumerate()
        .map(|(k, pt)| {
            let lrow = table.log_cond_row(k);
            pt.coords()
                .iter()
                .enumerate()
                .map(|(i, &t_ki)| {
                    if amps[i] == T::zero() {
                        return T::zero();
                    }
                    let mut acc = T::zero();
                    for (((&y, &w), &l), &lfy) in
                        nodes.iter().zip(qw).zip(lrow).zip(log_fy)
                    {
                        acc = acc + w * (y - t_ki) * gaussian_pdf(y, t_ki) * (l - lfy);
                    }
                    weights[k] * probs[i] * acc
                })
                .collect()
        })
        .collect()
}

/// Projects raw coordinates onto the box.
fn clamp_to_box<T: Scalar>(coords: &mut [T], amps: &[T]) {
    for (c, a) in coords.iter_mut().zip(amps) {
        *c = (*c).max(-*a).min(*a);
    }
}

/// `I_F` at the given raw support with fixed weights — the line-search
/// objective.
fn value_with_fixed_weights<T: Scalar>(
    ch: &ExtendedChannel<T>,
    points: &[ExtendedPoint<T>],
    weights: &[T],
) -> T {
    let table = DensityTable::build(ch, points);
    let log_fy = table.log_output_density(weights);
    table.mutual_information(weights, &log_fy)
}

// ---------------------------------------------------------------------------
// Fixed-cardinality solve
// ---------------------------------------------------------------------------

/// Optimizes weights and positions for a support of fixed size, starting
/// from `init`.
///
/// `tol` is the stationarity tolerance on the projected-gradient norm (in
/// position space). The weight iteration runs to its own much tighter gap
/// at every outer step, so the returned value is the exact optimum over
/// weights for the returned positions.
///
/// The returned support can be smaller than `init`'s if points coalesce
/// within the merge tolerance or a weight collapses below the floor.
///
/// # Errors
///
/// `Domain` for a non-positive tolerance, `Infeasible` when `init` does not
/// fit `ch`'s amplitude box.
pub fn optimize_fixed_cardinality<T: Scalar>(
    ch: &ExtendedChannel<T>,
    init: &DiscreteDistribution<T>,
    tol: T,
) -> Result<FixedKResult<T>> {
    if !(tol > T::zero()) || !tol.is_finite() {
        return Err(Error::Domain(format!("stationarity tolerance must be positive, got {tol}")));
    }
    check_feasible(ch, init)?;
    let (points, weights, mi, stationary, trace) =
        ascend_positions(ch, init.points().to_vec(), init.weights().to_vec(), tol)?;
    finish_fixed_k(ch, points, weights, mi, stationary, trace)
}

/// Shared outer loop: alternate the weight fixed point with one projected
/// Armijo ascent step on the positions. Returns raw (unpruned) support.
#[allow(clippy::type_complexity)]
fn ascend_positions<T: Scalar>(
    ch: &ExtendedChannel<T>,
    mut points: Vec<ExtendedPoint<T>>,
    mut weights: Vec<T>,
    pg_tol: T,
) -> Result<(Vec<ExtendedPoint<T>>, Vec<T>, T, bool, Vec<T>)> {
    let amps = ch.alphabet().amplitudes().to_vec();
    let mut trace: Vec<T> = Vec::new();
    let mut step = lit::<T>(STEP_INIT);
    let mut stationary = false;
    let mut mi = T::zero();

    for _outer in 0..OUTER_ITER_CAP {
        let table = DensityTable::build(ch, &points);
        let wo = optimize_weights(&table, &weights);
        weights = wo.weights;
        mi = wo.lower;
        trace.push(mi);

        let grad = position_gradient(ch, &table, &points, &weights, &wo.log_fy);

        // Stationarity: the projected step of unit length must be tiny.
        let mut pg_norm = T::zero();
        for (pt, g) in points.iter().zip(&grad) {
            let mut moved: Vec<T> = pt.coords().iter().zip(g).map(|(c, gi)| *c + *gi).collect();
            clamp_to_box(&mut moved, &amps);
            for (m, c) in moved.iter().zip(pt.coords()) {
                pg_norm = pg_norm.max((*m - *c).abs());
            }
        }
        if pg_norm <= pg_tol {
            stationary = true;
            break;
        }

        // Armijo backtracking on the fixed-weight objective.
        let mut accepted = false;
        while step >= lit(STEP_MIN) {
            let mut cand: Vec<ExtendedPoint<T>> = Vec::with_capacity(points.len());
            let mut descent = T::zero();
            for (pt, g) in points.iter().zip(&grad) {
                let mut coords: Vec<T> =
                    pt.coords().iter().zip(g).map(|(c, gi)| *c + step * *gi).collect();
                clamp_to_box(&mut coords, &amps);
                for ((nc, oc), gi) in coords.iter().zip(pt.coords()).zip(g) {
                    descent = descent + (*nc - *oc) * *gi;
                }
                cand.push(ExtendedPoint::new(coords));
            }
            let cand_mi = value_with_fixed_weights(ch, &cand, &weights);
            if cand_mi >= mi + lit::<T>(ARMIJO_C) * descent && descent > T::zero() {
                points = cand;
                step = (step * lit(STEP_GROW)).min(lit(STEP_MAX));
                accepted = true;
                break;
            }
            step = step * lit(STEP_SHRINK);
        }
        if !accepted {
            // The line search collapsed: numerically stationary.
            stationary = pg_norm <= tol_scaled::<T>(1e-6, 4096.0);
            break;
        }
    }

    // A step may have been accepted on the last pass without a closing
    // weight solve; refresh so the reported value matches the support.
    let table = DensityTable::build(ch, &points);
    let wo = optimize_weights(&table, &weights);
    if wo.lower > mi {
        mi = wo.lower;
        trace.push(mi);
    }
    weights = wo.weights;
    Ok((points, weights, mi, stationary, trace))
}

/// Prune floor-weight points, rebuild the distribution (merging coalesced
/// points), and recompute the value for exactly what is returned.
fn finish_fixed_k<T: Scalar>(
    ch: &ExtendedChannel<T>,
    points: Vec<ExtendedPoint<T>>,
    weights: Vec<T>,
    _raw_mi: T,
    stationary: bool,
    trace: Vec<T>,
) -> Result<FixedKResult<T>> {
    let floor = lit::<T>(WEIGHT_FLOOR);
    let mut kept_points = Vec::with_capacity(points.len());
    let mut kept_weights: Vec<T> = Vec::with_capacity(weights.len());
    for (p, w) in points.into_iter().zip(weights) {
        if w >= floor {
            kept_points.push(p);
            kept_weights.push(w);
        }
    }
    normalize(&mut kept_weights);
    let distribution = DiscreteDistribution::new(kept_points, kept_weights, ch.alphabet())?;
    let mi = ch.mutual_information(&distribution);
    Ok(FixedKResult { distribution, mi, stationary, trace })
}

fn check_feasible<T: Scalar>(ch: &ExtendedChannel<T>, f: &DiscreteDistribution<T>) -> Result<()> {
    let alphabet = ch.alphabet();
    let slack = tol_scaled::<T>(1e-9, 16.0) * (T::one() + alphabet.max_amplitude());
    for p in f.points() {
        if !alphabet.contains(p.coords(), slack) {
            return Err(Error::Infeasible(format!(
                "support point {:?} does not fit this channel's amplitude box",
                p.coords()
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Stationarity certificate
// ---------------------------------------------------------------------------

/// Evenly spaced probe grid on `[−a, a]` with roughly `density` points per
/// unit, endpoints included, exactly mirror-symmetric. A pinned axis
/// (`a = 0`) probes only `{0}`.
fn axis_grid<T: Scalar>(a: T, density: usize) -> Vec<T> {
    if a == T::zero() {
        return vec![T::zero()];
    }
    let af = a.to_f64().unwrap_or(0.0);
    let n = (((2.0 * af * density as f64).round() as usize) + 1).max(3);
    let mut grid = vec![T::zero(); n];
    for i in 0..n.div_ceil(2) {
        let v = lit::<T>(af * (2.0 * i as f64 / (n as f64 - 1.0) - 1.0));
        grid[i] = v;
        grid[n - 1 - i] = -v;
    }
    if n % 2 == 1 {
        grid[n / 2] = T::zero();
    }
    grid
}

/// Scans the stationarity condition `i(t;F) ≤ I_F` over a dense product
/// lattice on the box plus the support of `f`, reporting the worst
/// violation and its location. `grid_density` is in probes per unit per
/// axis (pinned axes contribute the single point `0`).
///
/// The scan cost is the lattice size times one density evaluation, so it is
/// exponential in the number of *free* axes; the intended regimes (one free
/// axis, or a handful of states with small boxes) stay cheap.
///
/// # Errors
///
/// `Domain` for a zero grid density or mismatched dimensions, `Infeasible`
/// when `f` does not fit `ch`'s box.
pub fn kkt_check<T: Scalar>(
    ch: &ExtendedChannel<T>,
    f: &DiscreteDistribution<T>,
    grid_density: usize,
) -> Result<KktReport<T>> {
    if grid_density == 0 {
        return Err(Error::Domain("stationarity grid density must be at least 1".into()));
    }
    check_feasible(ch, f)?;

    let table = DensityTable::build(ch, f.points());
    let log_fy = table.log_output_density(f.weights());
    let capacity = table.mutual_information(f.weights(), &log_fy);

    let grids: Vec<Vec<T>> =
        ch.alphabet().amplitudes().iter().map(|a| axis_grid(*a, grid_density)).collect();
    let counts: Vec<usize> = grids.iter().map(Vec::len).collect();

    let mut max_violation = T::neg_infinity();
    let mut argmax = ExtendedPoint::new(vec![T::zero(); grids.len()]);
    let mut coords = vec![T::zero(); grids.len()];
    let mut index = vec![0usize; grids.len()];
    // Odometer over the product lattice, first maximum kept on ties.
    'lattice: loop {
        for (c, (g, i)) in coords.iter_mut().zip(grids.iter().zip(&index)) {
            *c = g[*i];
        }
        let v = ch.info_density_against(&log_fy, &coords) - capacity;
        if v > max_violation {
            max_violation = v;
            argmax = ExtendedPoint::new(coords.clone());
        }
        let mut axis = grids.len();
        loop {
            if axis == 0 {
                break 'lattice;
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < counts[axis] {
                break;
            }
            index[axis] = 0;
        }
    }

    let mut support_slack = T::zero();
    let support_info = table.info_densities(&log_fy);
    for (pt, info) in f.points().iter().zip(&support_info) {
        let dev = *info - capacity;
        support_slack = support_slack.max(dev.abs());
        if dev > max_violation {
            max_violation = dev;
            argmax = pt.clone();
        }
    }

    let grid_spec = format!(
        "product lattice {} ({} probes/unit/axis) plus {} support points",
        counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x"),
        grid_density,
        f.support_size()
    );
    Ok(KktReport { capacity, max_violation, violation_argmax: argmax, support_slack, grid_spec })
}

// ---------------------------------------------------------------------------
// Full solve: cardinality escalation
// ---------------------------------------------------------------------------

/// Solves for capacity by cardinality escalation from the two-point corner
/// law, certifying optimality with [`kkt_check`] at every stage.
///
/// Returns a solution with `converged = false` (rather than an error) when
/// the cardinality cap is reached or an escalation stalls with the
/// certificate still failing — the partial result and its certificate are
/// preserved for diagnosis.
pub fn solve_capacity<T: Scalar>(
    ch: &ExtendedChannel<T>,
    opts: &SolveOptions<T>,
) -> Result<CapacitySolution<T>> {
    validate_opts(opts)?;
    let corners = corner_init(ch)?;
    let pg_tol = pg_tol_for(opts.tol);
    let mut fixk = optimize_fixed_cardinality(ch, &corners, pg_tol)?;
    let mut trace: Vec<(usize, T)> = Vec::new();

    loop {
        let kkt = kkt_check(ch, &fixk.distribution, opts.kkt_grid_density)?;
        trace.push((fixk.distribution.support_size(), fixk.mi));
        if kkt.max_violation <= opts.tol && kkt.support_slack <= opts.tol {
            return Ok(CapacitySolution {
                distribution: fixk.distribution,
                capacity: fixk.mi,
                kkt,
                cardinality_trace: trace,
                converged: true,
            });
        }
        if fixk.distribution.support_size() >= opts.k_max {
            return Ok(CapacitySolution {
                distribution: fixk.distribution,
                capacity: fixk.mi,
                kkt,
                cardinality_trace: trace,
                converged: false,
            });
        }

        let mut escalated = None;
        for eps in SEED_WEIGHT_LADDER {
            let seeded = seed_point(
                &fixk.distribution,
                kkt.violation_argmax.clone(),
                lit::<T>(eps),
                ch,
            )?;
            if seeded.support_size() <= fixk.distribution.support_size() {
                break; // merged into an existing point: nothing to add
            }
            let next = optimize_fixed_cardinality(ch, &seeded, pg_tol)?;
            if next.mi >= fixk.mi - opts.tol * lit(1e-3) {
                escalated = Some(next);
                break;
            }
        }
        match escalated {
            Some(next) => fixk = next,
            None => {
                return Ok(CapacitySolution {
                    distribution: fixk.distribution,
                    capacity: fixk.mi,
                    kkt,
                    cardinality_trace: trace,
                    converged: false,
                });
            }
        }
    }
}

/// Two-point corner law `±(a_1..a_M)` with equal weights. A fully pinned
/// (all-zero) box collapses to the single origin point.
fn corner_init<T: Scalar>(ch: &ExtendedChannel<T>) -> Result<DiscreteDistribution<T>> {
    let amps = ch.alphabet().amplitudes().to_vec();
    let hi = ExtendedPoint::new(amps.clone());
    let lo = hi.negated();
    let half = lit::<T>(0.5);
    DiscreteDistribution::new(vec![hi, lo], vec![half, half], ch.alphabet())
}

fn seed_point<T: Scalar>(
    f: &DiscreteDistribution<T>,
    point: ExtendedPoint<T>,
    eps: T,
    ch: &ExtendedChannel<T>,
) -> Result<DiscreteDistribution<T>> {
    let scale = T::one() - eps;
    let mut points: Vec<ExtendedPoint<T>> = f.points().to_vec();
    let mut weights: Vec<T> = f.weights().iter().map(|w| *w * scale).collect();
    points.push(point);
    weights.push(eps);
    DiscreteDistribution::new(points, weights, ch.alphabet())
}

fn validate_opts<T: Scalar>(opts: &SolveOptions<T>) -> Result<()> {
    if !(opts.tol > T::zero()) || !opts.tol.is_finite() {
        return Err(Error::Domain(format!("capacity tolerance must be positive, got {}", opts.tol)));
    }
    if opts.k_max == 0 {
        return Err(Error::Domain("cardinality cap must be at least 1".into()));
    }
    if opts.kkt_grid_density == 0 {
        return Err(Error::Domain("stationarity grid density must be at least 1".into()));
    }
    Ok(())
}

fn pg_tol_for<T: Scalar>(tol: T) -> T {
    (tol * lit(1e-2)).min(tol_scaled(1e-8, 1024.0))
}

/// Capacity of the static amplitude constraint `|x| ≤ a` (single-state
/// alphabet) with default quadrature and solver settings.
pub fn smith_capacity<T: Scalar>(a: T, tol: T) -> Result<CapacitySolution<T>> {
    let alphabet = crate::channel::StateAlphabet::new(vec![a], vec![T::one()])?;
    let rule = crate::numerics::QuadratureSpec::default().rule::<T>(a.to_f64().unwrap_or(f64::NAN))?;
    let ch = ExtendedChannel::new(alphabet, rule)?;
    let opts = SolveOptions { tol, ..SolveOptions::default() };
    solve_capacity(&ch, &opts)
}

// ---------------------------------------------------------------------------
// Symmetric solve (single free axis)
// ---------------------------------------------------------------------------

/// Symmetric support on a single free axis: reflected pairs `±q_j` with a
/// shared per-side weight `v_j`, plus an optional origin atom.
#[derive(Debug, Clone)]
struct SymmetricSupport<T> {
    free_axis: usize,
    /// Pair positions, each > 0.
    qs: Vec<T>,
    /// Per-side pair weights (each pair carries `2 v_j`).
    vs: Vec<T>,
    /// Origin weight, when an origin atom is present.
    origin: Option<T>,
}

impl<T: Scalar> SymmetricSupport<T> {
    fn expand(&self, dim: usize) -> (Vec<ExtendedPoint<T>>, Vec<T>) {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut push = |q: T, w: T| {
            let mut coords = vec![T::zero(); dim];
            coords[self.free_axis] = q;
            points.push(ExtendedPoint::new(coords));
            weights.push(w);
        };
        if let Some(v0) = self.origin {
            push(T::zero(), v0);
        }
        for (&q, &v) in self.qs.iter().zip(&self.vs) {
            push(q, v);
            push(-q, v);
        }
        (points, weights)
    }

    /// Averages an expanded weight vector back onto the symmetric
    /// parameters (value can only improve: `I` is concave and invariant
    /// under reflection).
    fn fold_weights(&mut self, expanded: &[T]) {
        let mut idx = 0;
        if self.origin.is_some() {
            self.origin = Some(expanded[0]);
            idx = 1;
        }
        let half = lit::<T>(0.5);
        for v in self.vs.iter_mut() {
            *v = (expanded[idx] + expanded[idx + 1]) * half;
            idx += 2;
        }
    }

    fn support_size(&self) -> usize {
        self.qs.len() * 2 + usize::from(self.origin.is_some())
    }
}

/// Fixed-cardinality solve constrained to the symmetric parameterization.
fn optimize_fixed_symmetric<T: Scalar>(
    ch: &ExtendedChannel<T>,
    mut sym: SymmetricSupport<T>,
    pg_tol: T,
) -> Result<(SymmetricSupport<T>, T, bool, Vec<T>)> {
    let dim = ch.alphabet().num_states();
    let a = ch.alphabet().amplitudes()[sym.free_axis];
    let mut trace: Vec<T> = Vec::new();
    let mut step = lit::<T>(STEP_INIT);
    let mut stationary = false;
    let mut mi = T::zero();
    let mut warm: Option<Vec<T>> = None;

    for _outer in 0..OUTER_ITER_CAP {
        let (points, expanded) = sym.expand(dim);
        let table = DensityTable::build(ch, &points);
        let wo = optimize_weights(&table, warm.as_deref().unwrap_or(&expanded));
        sym.fold_weights(&wo.weights);
        let (points, weights) = sym.expand(dim);
        warm = Some(weights.clone());
        let log_fy = table.log_output_density(&weights);
        mi = table.mutual_information(&weights, &log_fy);
        trace.push(mi);

        let grad = position_gradient(ch, &table, &points, &weights, &log_fy);
        let pair_base = usize::from(sym.origin.is_some());
        let q_grad: Vec<T> = (0..sym.qs.len())
            .map(|j| {
                let gp = grad[pair_base + 2 * j][sym.free_axis];
                let gm = grad[pair_base + 2 * j + 1][sym.free_axis];
                gp - gm
            })
            .collect();

        let mut pg_norm = T::zero();
        for (&q, &g) in sym.qs.iter().zip(&q_grad) {
            let moved = (q + g).max(T::zero()).min(a);
            pg_norm = pg_norm.max((moved - q).abs());
        }
        if pg_norm <= pg_tol {
            stationary = true;
            break;
        }

        let mut accepted = false;
        while step >= lit(STEP_MIN) {
            let mut cand = sym.clone();
            let mut descent = T::zero();
            for ((cq, &q), &g) in cand.qs.iter_mut().zip(&sym.qs).zip(&q_grad) {
                *cq = (q + step * g).max(T::zero()).min(a);
                // Each pair weight multiplies both sides, so the symmetric
                // directional derivative carries the fold already.
                descent = descent + (*cq - q) * g;
            }
            let (cpoints, cweights) = cand.expand(dim);
            let cand_mi = value_with_fixed_weights(ch, &cpoints, &cweights);
            if cand_mi >= mi + lit::<T>(ARMIJO_C) * descent && descent > T::zero() {
                sym = cand;
                step = (step * lit(STEP_GROW)).min(lit(STEP_MAX));
                accepted = true;
                break;
            }
            step = step * lit(STEP_SHRINK);
        }
        if !accepted {
            stationary = pg_norm <= tol_scaled::<T>(1e-6, 4096.0);
            break;
        }
    }

    // Closing weight refresh on the final positions.
    let (points, expanded) = sym.expand(dim);
    let table = DensityTable::build(ch, &points);
    let wo = optimize_weights(&table, warm.as_deref().unwrap_or(&expanded));
    sym.fold_weights(&wo.weights);
    let (_, weights) = sym.expand(dim);
    let log_fy = table.log_output_density(&weights);
    let refreshed = table.mutual_information(&weights, &log_fy);
    if refreshed > mi {
        mi = refreshed;
        trace.push(mi);
    }
    Ok((sym, mi, stationary, trace))
}

/// Prunes a symmetric support in place: drops floor-weight atoms and pairs
/// whose positions collapsed onto the origin, then renormalizes.
fn prune_symmetric<T: Scalar>(sym: &mut SymmetricSupport<T>) {
    let floor = lit::<T>(WEIGHT_FLOOR);
    let snap = tol_scaled::<T>(crate::channel::MERGE_TOLERANCE, 16.0);
    let mut origin_extra = T::zero();
    let mut qs = Vec::new();
    let mut vs = Vec::new();
    for (&q, &v) in sym.qs.iter().zip(&sym.vs) {
        if v + v < floor {
            continue;
        }
        if q <= snap {
            origin_extra = origin_extra + v + v;
        } else {
            qs.push(q);
            vs.push(v);
        }
    }
    let mut origin = sym.origin.unwrap_or(T::zero()) + origin_extra;
    if origin < floor {
        origin = T::zero();
    }
    let total: T = vs.iter().map(|v| *v + *v).sum::<T>() + origin;
    for v in vs.iter_mut() {
        *v = *v / total;
    }
    sym.qs = qs;
    sym.vs = vs;
    sym.origin = if origin > T::zero() { Some(origin / total) } else { None };
}

/// Capacity solve restricted to reflection-symmetric laws on a single free
/// axis. Requires every other axis of `ch` to be pinned (`a_i = 0`).
///
/// Escalation respects the symmetry: a violation at the origin adds the
/// origin atom (+1 point), a violation elsewhere adds the reflected pair
/// (+2 points).
pub(crate) fn solve_capacity_symmetric<T: Scalar>(
    ch: &ExtendedChannel<T>,
    free_axis: usize,
    opts: &SolveOptions<T>,
) -> Result<CapacitySolution<T>> {
    validate_opts(opts)?;
    let amps = ch.alphabet().amplitudes();
    if free_axis >= amps.len() || amps[free_axis] == T::zero() {
        return Err(Error::Domain(format!("axis {free_axis} is not a free axis")));
    }
    if amps.iter().enumerate().any(|(i, a)| i != free_axis && *a != T::zero()) {
        return Err(Error::Domain(
            "symmetric solve requires a single free axis; use the general solver".into(),
        ));
    }
    let a = amps[free_axis];
    let dim = amps.len();
    let pg_tol = pg_tol_for(opts.tol);

    let init = SymmetricSupport {
        free_axis,
        qs: vec![a],
        vs: vec![lit(0.5)],
        origin: None,
    };
    let (mut sym, _, _, _) = optimize_fixed_symmetric(ch, init, pg_tol)?;
    prune_symmetric(&mut sym);
    let mut trace: Vec<(usize, T)> = Vec::new();
    let origin_snap = lit::<T>(0.75 / opts.kkt_grid_density as f64);

    loop {
        let (points, weights) = sym.expand(dim);
        let distribution = DiscreteDistribution::new(points, weights, ch.alphabet())?;
        let capacity = ch.mutual_information(&distribution);
        let kkt = kkt_check(ch, &distribution, opts.kkt_grid_density)?;
        trace.push((distribution.support_size(), capacity));
        if kkt.max_violation <= opts.tol && kkt.support_slack <= opts.tol {
            return Ok(CapacitySolution {
                distribution,
                capacity,
                kkt,
                cardinality_trace: trace,
                converged: true,
            });
        }

        let q_star = kkt.violation_argmax.coords()[free_axis].abs();
        let add_origin = q_star <= origin_snap && sym.origin.is_none();
        let needed = if add_origin { 1 } else { 2 };
        if sym.support_size() + needed > opts.k_max || (!add_origin && q_star <= origin_snap) {
            return Ok(CapacitySolution {
                distribution,
                capacity,
                kkt,
                cardinality_trace: trace,
                converged: false,
            });
        }

        let mut escalated = None;
        for eps in SEED_WEIGHT_LADDER {
            let eps = lit::<T>(eps);
            let scale = T::one() - eps;
            let mut seeded = sym.clone();
            for v in seeded.vs.iter_mut() {
                *v = *v * scale;
            }
            if let Some(v0) = seeded.origin.as_mut() {
                *v0 = *v0 * scale;
            }
            if add_origin {
                seeded.origin = Some(eps);
            } else {
                seeded.qs.push(q_star);
                seeded.vs.push(eps * lit(0.5));
            }
            let (next_sym, next_mi, _, _) = optimize_fixed_symmetric(ch, seeded, pg_tol)?;
            if next_mi >= capacity - opts.tol * lit(1e-3) {
                escalated = Some(next_sym);
                break;
            }
        }
        match escalated {
            Some(next_sym) => {
                sym = next_sym;
                prune_symmetric(&mut sym);
            }
            None => {
                return Ok(CapacitySolution {
                    distribution,
                    capacity,
                    kkt,
                    cardinality_trace: trace,
                    converged: false,
                });
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Lattice cross-check
// ---------------------------------------------------------------------------

/// Plain alternating-maximization weights on a fixed dense product lattice:
/// no position optimization, no escalation. Converges from below; useful as
/// an independent lower-bound cross-check on [`solve_capacity`].
///
/// `grid_density` is lattice points per unit per axis (at least 16);
/// `max_iters` caps the weight iterations. The stop rule is a relative
/// change below `1e-10` between consecutive values.
///
/// # Errors
///
/// `Domain` when the density is under 16 or the lattice would not fit in
/// memory.
pub fn ba_oracle<T: Scalar>(
    ch: &ExtendedChannel<T>,
    grid_density: usize,
    max_iters: usize,
) -> Result<BaOracleResult<T>> {
    if grid_density < 16 {
        return Err(Error::Domain(format!(
            "oracle lattice density must be at least 16 points/unit, got {grid_density}"
        )));
    }
    let grids: Vec<Vec<T>> =
        ch.alphabet().amplitudes().iter().map(|a| axis_grid(*a, grid_density)).collect();
    let lattice_len: usize = grids.iter().map(Vec::len).product();
    if lattice_len.saturating_mul(ch.rule().len()) > ORACLE_TABLE_CAP {
        return Err(Error::Domain(format!(
            "oracle lattice of {lattice_len} points is too large for this channel"
        )));
    }
    let mut points = Vec::with_capacity(lattice_len);
    let mut index = vec![0usize; grids.len()];
    'lattice: loop {
        let coords: Vec<T> = grids.iter().zip(&index).map(|(g, i)| g[*i]).collect();
        points.push(ExtendedPoint::new(coords));
        let mut axis = grids.len();
        loop {
            if axis == 0 {
                break 'lattice;
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < grids[axis].len() {
                break;
            }
            index[axis] = 0;
        }
    }

    let table = DensityTable::build(ch, &points);
    let uniform = T::one() / lit(lattice_len as f64);
    let mut w = vec![uniform; lattice_len];
    let rel_tol = tol_scaled::<T>(1e-10, 256.0);
    let tiny = T::min_positive_value();

    let evaluate = |w: &[T]| -> (T, T, Vec<T>) {
        let fy = table.linear_output_density(w);
        let log_fy: Vec<T> = fy.iter().map(|v| v.max(tiny).ln()).collect();
        let info = table.info_densities(&log_fy);
        let lower: T = info.iter().zip(w).map(|(i, w)| *i * *w).sum();
        let upper = info.iter().copied().fold(T::neg_infinity(), T::max);
        (lower, upper, info)
    };

    let mut prev = T::neg_infinity();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let (lower, upper, info) = evaluate(&w);
        if (lower - prev).abs() <= rel_tol * T::one().max(lower.abs()) {
            converged = true;
            break;
        }
        prev = lower;
        for (wk, ik) in w.iter_mut().zip(&info) {
            *wk = *wk * (*ik - upper).exp();
        }
        normalize(&mut w);
        iterations += 1;
    }
    let (lower, upper, _) = evaluate(&w);

    let floor = lit::<T>(WEIGHT_FLOOR);
    let mut kept_points = Vec::new();
    let mut kept_weights: Vec<T> = Vec::new();
    for (p, &wk) in points.iter().zip(&w) {
        if wk >= floor {
            kept_points.push(p.clone());
            kept_weights.push(wk);
        }
    }
    normalize(&mut kept_weights);
    let distribution = DiscreteDistribution::new(kept_points, kept_weights, ch.alphabet())?;

    Ok(BaOracleResult {
        distribution,
        mi: lower,
        upper_gap: upper - lower,
        iterations,
        converged,
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::StateAlphabet;
    use crate::numerics::QuadratureSpec;

    fn static_channel(a: f64) -> ExtendedChannel<f64> {
        let alphabet = StateAlphabet::new(vec![a], vec![1.0]).unwrap();
        let rule = QuadratureSpec::default().rule(a).unwrap();
        ExtendedChannel::new(alphabet, rule).unwrap()
    }

    fn binary_law(ch: &ExtendedChannel<f64>, a: f64) -> DiscreteDistribution<f64> {
        DiscreteDistribution::new(
            vec![ExtendedPoint::new(vec![-a]), ExtendedPoint::new(vec![a])],
            vec![0.5, 0.5],
            ch.alphabet(),
        )
        .unwrap()
    }

    #[test]
    fn fixed_cardinality_recovers_antipodal_signaling() {
        let ch = static_channel(1.0);
        let init = DiscreteDistribution::new(
            vec![ExtendedPoint::new(vec![-0.5]), ExtendedPoint::new(vec![0.5])],
            vec![0.5, 0.5],
            ch.alphabet(),
        )
        .unwrap();
        let res = optimize_fixed_cardinality(&ch, &init, 1e-8).unwrap();
        assert!(res.stationary, "should reach stationarity from the interior init");
        assert!((res.mi - 0.336830820347).abs() < 1e-8, "mi {}", res.mi);
        for pt in res.distribution.points() {
            assert!((pt.coords()[0].abs() - 1.0).abs() < 1e-6, "points migrate to the corners");
        }
        for pair in res.trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-10, "ascent must be monotone: {pair:?}");
        }
    }

    #[test]
    fn kkt_certifies_binary_at_moderate_amplitude_and_rejects_it_beyond() {
        let ch = static_channel(1.5);
        let report = kkt_check(&ch, &binary_law(&ch, 1.5), 64).unwrap();
        assert!((report.capacity - 0.526777306521).abs() < 1e-9, "capacity {}", report.capacity);
        assert!(report.max_violation <= 1e-7, "violation {}", report.max_violation);
        assert!(report.support_slack <= 1e-9, "slack {}", report.support_slack);

        let ch = static_channel(2.0);
        let report = kkt_check(&ch, &binary_law(&ch, 2.0), 64).unwrap();
        assert!(
            report.max_violation > 1e-4,
            "binary law must fail the certificate at amplitude 2, got {}",
            report.max_violation
        );
        assert!(
            report.violation_argmax.coords()[0].abs() < 0.5,
            "worst violation sits near the origin, got {:?}",
            report.violation_argmax.coords()
        );
    }

    #[test]
    fn solve_capacity_matches_known_static_optima() {
        let sol = solve_capacity(&static_channel(1.0), &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.distribution.support_size(), 2);
        assert!((sol.capacity - 0.336830820347).abs() < 1e-7, "capacity {}", sol.capacity);

        let sol = solve_capacity(&static_channel(2.0), &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.distribution.support_size(), 3, "a third mass point appears");
        assert!((sol.capacity - 0.652868811780).abs() < 1e-7, "capacity {}", sol.capacity);
        let mut origin_weight = None;
        for (pt, w) in sol.distribution.points().iter().zip(sol.distribution.weights()) {
            if pt.coords()[0].abs() < 1e-4 {
                origin_weight = Some(*w);
            }
        }
        let w0 = origin_weight.expect("origin point present");
        assert!((w0 - 0.137877).abs() < 1e-4, "origin weight {w0}");

        let sizes: Vec<usize> = sol.cardinality_trace.iter().map(|(k, _)| *k).collect();
        assert_eq!(sizes, vec![2, 3]);
        assert!(sol.cardinality_trace[1].1 >= sol.cardinality_trace[0].1 - 1e-10);
    }

    #[test]
    fn solve_capacity_respects_the_cardinality_cap() {
        let opts = SolveOptions { k_max: 2, ..SolveOptions::default() };
        let sol = solve_capacity(&static_channel(2.0), &opts).unwrap();
        assert!(!sol.converged, "two points cannot satisfy the certificate at amplitude 2");
        assert_eq!(sol.distribution.support_size(), 2);
        assert!(sol.kkt.max_violation > 1e-4);
    }

    #[test]
    fn degenerate_box_yields_zero_capacity() {
        let alphabet = StateAlphabet::<f64>::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        let rule = QuadratureSpec::default().rule(0.0).unwrap();
        let ch = ExtendedChannel::new(alphabet, rule).unwrap();
        let sol = solve_capacity(&ch, &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.distribution.support_size(), 1);
        assert!(sol.capacity.abs() < 1e-12);
    }

    #[test]
    fn symmetric_solver_agrees_with_the_general_path() {
        let ch = static_channel(2.0);
        let sym = solve_capacity_symmetric(&ch, 0, &SolveOptions::default()).unwrap();
        assert!(sym.converged);
        assert!((sym.capacity - 0.652868811780).abs() < 1e-7, "capacity {}", sym.capacity);
        assert_eq!(sym.distribution.support_size(), 3);
        // Exact reflection symmetry of the returned law.
        let neg = sym.distribution.negated();
        for pt in sym.distribution.points() {
            let closest = neg
                .points()
                .iter()
                .map(|q| pt.max_norm_distance(q))
                .fold(f64::INFINITY, f64::min);
            assert!(closest < 1e-12, "support not symmetric at {:?}", pt.coords());
        }
    }

    #[test]
    fn oracle_lower_bounds_the_solver() {
        let ch = static_channel(1.0);
        let oracle = ba_oracle(&ch, 16, 3000).unwrap();
        let sol = solve_capacity(&ch, &SolveOptions::default()).unwrap();
        assert!(oracle.mi <= sol.capacity + 1e-9, "oracle {} vs solve {}", oracle.mi, sol.capacity);
        assert!(
            sol.capacity - oracle.mi < 2e-3,
            "lattice value should be close: oracle {} vs solve {}",
            oracle.mi,
            sol.capacity
        );
        assert!(oracle.upper_gap >= -1e-12);
        assert!(ba_oracle(&ch, 8, 100).is_err(), "densities under 16 are rejected");
    }

    #[test]
    fn smith_capacity_convenience_matches_the_direct_solve() {
        let sol = smith_capacity::<f64>(1.5, 1e-6).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.distribution.support_size(), 2);
        assert!((sol.capacity - 0.526777306521).abs() < 1e-7, "capacity {}", sol.capacity);
    }
}
