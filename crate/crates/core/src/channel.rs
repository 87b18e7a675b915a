//! The state alphabet, the extended (per-state vector input) channel, and
//! the information functionals on it.
//!
//! A state process takes values in `{1..M}` with probabilities `p_i`, and
//! state `i` imposes the amplitude bound `|x| ≤ a_i` on the transmitted
//! symbol. Coding with causal state knowledge works over the extended input
//! `t = (t_1..t_M)` — "send `t_i` when the state is `i`" — which sees the
//! memoryless mixture channel
//!
//! ```text
//! f(y|t) = Σ_i p_i φ(y − t_i),         φ = unit-variance Gaussian density.
//! ```
//!
//! Candidate input laws are finite-support distributions `F` over the box
//! `∏ [−a_i, a_i]`. The functionals here — output density `f(y;F)`, the
//! mutual-information density `i(t;F)`, and `I_F = Σ_k w_k i(t_k;F)` — are
//! everything the capacity solver needs.
//!
//! # Example
//!
//! ```
//! use ehcap_core::channel::{DiscreteDistribution, ExtendedChannel, ExtendedPoint, StateAlphabet};
//! use ehcap_core::numerics::build_rule;
//!
//! // On-off constraint: amplitude 0 half the time, 1.5 the other half.
//! let alphabet: StateAlphabet<f64> = StateAlphabet::new(vec![0.0, 1.5], vec![0.5, 0.5]).unwrap();
//! let rule = build_rule(1.5, 10.0, 32).unwrap();
//! let ch = ExtendedChannel::new(alphabet, rule).unwrap();
//!
//! let f = DiscreteDistribution::new(
//!     vec![ExtendedPoint::new(vec![0.0, -1.5]), ExtendedPoint::new(vec![0.0, 1.5])],
//!     vec![0.5, 0.5],
//!     ch.alphabet(),
//! )
//! .unwrap();
//! let mi = ch.mutual_information(&f);
//! assert!((mi - 0.153515576491).abs() < 1e-9);
//! ```

use crate::error::{Error, Result};
use crate::numerics::{gaussian_pdf, log_gaussian_pdf, logsumexp, QuadratureRule};
use crate::{lit, tol_scaled, Scalar};

/// Max-norm distance under which two support points are considered the same
/// point and merged (weights summed) at construction.
pub const MERGE_TOLERANCE: f64 = 1e-7;

// ---------------------------------------------------------------------------
// StateAlphabet
// ---------------------------------------------------------------------------

/// The amplitude-constraint process: amplitudes `a_1..a_M` with state
/// probabilities `p_1..p_M`.
#[derive(Debug, Clone)]
pub struct StateAlphabet<T> {
    amplitudes: Vec<T>,
    probs: Vec<T>,
}

impl<T: Scalar> StateAlphabet<T> {
    /// Validates and builds an alphabet: `M ≥ 1`, all `a_i ≥ 0` finite, all
    /// `p_i` in `(0, 1]`, and `Σ p_i = 1` to rounding accuracy.
    pub fn new(amplitudes: Vec<T>, probs: Vec<T>) -> Result<Self> {
        if amplitudes.is_empty() || amplitudes.len() != probs.len() {
            return Err(Error::Domain(format!(
                "alphabet needs matching nonempty amplitudes/probs, got {}/{}",
                amplitudes.len(),
                probs.len()
            )));
        }
        for &a in &amplitudes {
            if !a.is_finite() || a < T::zero() {
                return Err(Error::Domain(format!("amplitudes must be finite and >= 0, got {a}")));
            }
        }
        for &p in &probs {
            if !p.is_finite() || !(p > T::zero()) || p > T::one() {
                return Err(Error::Domain(format!("state probabilities must lie in (0, 1], got {p}")));
            }
        }
        let sum: T = probs.iter().copied().sum();
        let tol = tol_scaled::<T>(1e-12, 64.0);
        if (sum - T::one()).abs() > tol {
            return Err(Error::Domain(format!("state probabilities must sum to 1, got {sum}")));
        }
        Ok(Self { amplitudes, probs })
    }

    /// Number of states `M`.
    pub fn num_states(&self) -> usize {
        self.amplitudes.len()
    }

    /// Per-state amplitude bounds `a_1..a_M`.
    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    /// Per-state probabilities `p_1..p_M`.
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// Largest amplitude bound, i.e. the half-width of the widest box axis.
    pub fn max_amplitude(&self) -> T {
        self.amplitudes.iter().copied().fold(T::zero(), T::max)
    }

    /// True when every state forbids signaling (`a_i = 0` for all `i`).
    pub fn is_degenerate(&self) -> bool {
        self.amplitudes.iter().all(|a| *a == T::zero())
    }

    /// True when `coords` lies in the box `∏ [−a_i, a_i]`, with `slack`
    /// absorbing rounding from upstream arithmetic.
    pub fn contains(&self, coords: &[T], slack: T) -> bool {
        coords.len() == self.num_states()
            && coords
                .iter()
                .zip(&self.amplitudes)
                .all(|(t, a)| t.is_finite() && t.abs() <= *a + slack)
    }
}

// ---------------------------------------------------------------------------
// ExtendedPoint
// ---------------------------------------------------------------------------

/// One extended input `t = (t_1..t_M)`: the symbol sent in each state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPoint<T> {
    coords: Vec<T>,
}

impl<T: Scalar> ExtendedPoint<T> {
    /// Wraps a coordinate vector. Box membership is checked wherever an
    /// alphabet is in scope (distribution construction, functional calls).
    pub fn new(coords: Vec<T>) -> Self {
        Self { coords }
    }

    /// The per-state symbols.
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    /// Number of coordinates (states).
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Max-norm distance to another point of the same dimension.
    pub fn max_norm_distance(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    /// The reflected point `−t`.
    pub fn negated(&self) -> Self {
        Self { coords: self.coords.iter().map(|c| -*c).collect() }
    }
}

// ---------------------------------------------------------------------------
// DiscreteDistribution
// ---------------------------------------------------------------------------

/// A finite-support candidate input law `F`: support points in the box with
/// probability weights.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution<T> {
    points: Vec<ExtendedPoint<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> DiscreteDistribution<T> {
    /// Validates and builds a distribution over `alphabet`'s box.
    ///
    /// Points closer than [`MERGE_TOLERANCE`] in max-norm are merged into
    /// their weighted centroid with summed weights, so the stored support is
    /// pairwise distinct. Coordinates are clamped onto the box after passing
    /// a small-slack membership check, which absorbs one-ulp excursions from
    /// upstream arithmetic without admitting genuinely infeasible points.
    pub fn new(
        points: Vec<ExtendedPoint<T>>,
        weights: Vec<T>,
        alphabet: &StateAlphabet<T>,
    ) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Domain(format!(
                "distribution needs matching nonempty points/weights, got {}/{}",
                points.len(),
                weights.len()
            )));
        }
        let box_slack = tol_scaled::<T>(1e-9, 16.0) * (T::one() + alphabet.max_amplitude());
        for p in &points {
            if p.dim() != alphabet.num_states() {
                return Err(Error::Domain(format!(
                    "point dimension {} does not match the {}-state alphabet",
                    p.dim(),
                    alphabet.num_states()
                )));
            }
            if !alphabet.contains(p.coords(), box_slack) {
                return Err(Error::Infeasible(format!(
                    "support point {:?} outside the amplitude box",
                    p.coords()
                )));
            }
        }
        for &w in &weights {
            if !w.is_finite() || !(w > T::zero()) || w > T::one() {
                return Err(Error::Domain(format!("weights must lie in (0, 1], got {w}")));
            }
        }
        let sum: T = weights.iter().copied().sum();
        if (sum - T::one()).abs() > tol_scaled::<T>(1e-12, 64.0) {
            return Err(Error::Domain(format!("weights must sum to 1, got {sum}")));
        }

        // Clamp onto the box, then merge near-duplicates (repeating until
        // stable: centroids can shift by a fraction of the tolerance).
        let clamped: Vec<ExtendedPoint<T>> = points
            .iter()
            .map(|p| {
                ExtendedPoint::new(
                    p.coords()
                        .iter()
                        .zip(alphabet.amplitudes())
                        .map(|(t, a)| (*t).max(-*a).min(*a))
                        .collect(),
                )
            })
            .collect();
        let (points, weights) = merge_close_points(clamped, weights);
        Ok(Self { points, weights })
    }

    /// Support points.
    pub fn points(&self) -> &[ExtendedPoint<T>] {
        &self.points
    }

    /// Probability weights, matching [`Self::points`] by index.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Number of support points.
    pub fn support_size(&self) -> usize {
        self.points.len()
    }

    /// The distribution reflected through the origin: every point negated,
    /// weights unchanged (always valid — the box is symmetric).
    pub fn negated(&self) -> Self {
        Self {
            points: self.points.iter().map(ExtendedPoint::negated).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Greedy cluster-merge of points closer than [`MERGE_TOLERANCE`] max-norm:
/// each cluster is replaced by its weighted centroid with summed weight.
/// Repeats until no pair is within tolerance (centroids move slightly).
fn merge_close_points<T: Scalar>(
    mut points: Vec<ExtendedPoint<T>>,
    mut weights: Vec<T>,
) -> (Vec<ExtendedPoint<T>>, Vec<T>) {
    let tol = tol_scaled::<T>(MERGE_TOLERANCE, 16.0);
    loop {
        let mut merged_points: Vec<ExtendedPoint<T>> = Vec::with_capacity(points.len());
        let mut merged_weights: Vec<T> = Vec::new();
        let mut any = false;
        'outer: for (p, w) in points.iter().zip(&weights) {
            for (q, wq) in merged_points.iter_mut().zip(merged_weights.iter_mut()) {
                if p.max_norm_distance(q) <= tol {
                    // Weighted centroid keeps the merged support unbiased.
                    let total = *wq + *w;
                    let coords = q
                        .coords()
                        .iter()
                        .zip(p.coords())
                        .map(|(a, b)| (*a * *wq + *b * *w) / total)
                        .collect();
                    *q = ExtendedPoint::new(coords);
                    *wq = total;
                    any = true;
                    continue 'outer;
                }
            }
            merged_points.push(p.clone());
            merged_weights.push(*w);
        }
        points = merged_points;
        weights = merged_weights;
        if !any {
            return (points, weights);
        }
    }
}

// ---------------------------------------------------------------------------
// ExtendedChannel
// ---------------------------------------------------------------------------

/// The extended channel: a state alphabet plus the output-variable
/// quadrature rule used to evaluate its integrals.
#[derive(Debug, Clone)]
pub struct ExtendedChannel<T> {
    alphabet: StateAlphabet<T>,
    rule: QuadratureRule<T>,
}

impl<T: Scalar> ExtendedChannel<T> {
    /// Pairs an alphabet with a quadrature rule. The rule must cover
    /// `[−(max aᵢ + 10), max aᵢ + 10]` so that truncation error stays far
    /// below solver tolerances.
    pub fn new(alphabet: StateAlphabet<T>, rule: QuadratureRule<T>) -> Result<Self> {
        let need = alphabet.max_amplitude() + lit(10.0);
        let slack = tol_scaled::<T>(1e-9, 16.0) * (T::one() + need);
        let (lo, hi) = rule.domain();
        if lo > -need + slack || hi < need - slack {
            return Err(Error::Domain(format!(
                "quadrature rule on [{lo}, {hi}] does not cover the required [-{need}, {need}]"
            )));
        }
        Ok(Self { alphabet, rule })
    }

    /// The state alphabet.
    pub fn alphabet(&self) -> &StateAlphabet<T> {
        &self.alphabet
    }

    /// The output-variable quadrature rule.
    pub fn rule(&self) -> &QuadratureRule<T> {
        &self.rule
    }

    /// Conditional output density `f(y|t) = Σ_i p_i φ(y − t_i)`.
    pub fn conditional_density(&self, t: &ExtendedPoint<T>, y: T) -> T {
        self.alphabet
            .probs()
            .iter()
            .zip(t.coords())
            .map(|(p, ti)| *p * gaussian_pdf(y, *ti))
            .sum()
    }

    /// `ln f(y|t)` via a max-shifted mixture sum, accurate even where every
    /// component underflows linearly.
    pub(crate) fn log_conditional_density(&self, coords: &[T], y: T) -> T {
        debug_assert_eq!(coords.len(), self.alphabet.num_states());
        let mut m = T::neg_infinity();
        let probs = self.alphabet.probs();
        // Two passes keep this allocation-free for arbitrary M.
        for (p, ti) in probs.iter().zip(coords) {
            let v = p.ln() + log_gaussian_pdf(y, *ti);
            if v > m {
                m = v;
            }
        }
        let mut acc = T::zero();
        for (p, ti) in probs.iter().zip(coords) {
            acc = acc + (p.ln() + log_gaussian_pdf(y, *ti) - m).exp();
        }
        m + acc.ln()
    }

    /// Output density under `F`: `f(y;F) = Σ_k w_k f(y|t_k)`.
    pub fn output_density(&self, f: &DiscreteDistribution<T>, y: T) -> T {
        f.points()
            .iter()
            .zip(f.weights())
            .map(|(t, w)| *w * self.conditional_density(t, y))
            .sum()
    }

    /// Mutual-information density
    /// `i(t;F) = ∫ f(y|t) ln( f(y|t) / f(y;F) ) dy`, in nats.
    ///
    /// This is the single-point path: it streams over quadrature nodes
    /// without building the support-wide density table, so it doubles as an
    /// independent cross-check of [`Self::mutual_information`].
    ///
    /// # Errors
    ///
    /// `t` outside the box is infeasible; a non-finite integrand (impossible
    /// for valid inputs) is guarded as an internal domain error.
    pub fn info_density(&self, f: &DiscreteDistribution<T>, t: &ExtendedPoint<T>) -> Result<T> {
        let slack = tol_scaled::<T>(1e-9, 16.0) * (T::one() + self.alphabet.max_amplitude());
        if !self.alphabet.contains(t.coords(), slack) {
            return Err(Error::Infeasible(format!(
                "info_density probe {:?} outside the amplitude box",
                t.coords()
            )));
        }
        let mut acc = T::zero();
        let mut scratch: Vec<T> = vec![T::zero(); f.support_size()];
        for (&y, &qw) in self.rule.nodes().iter().zip(self.rule.weights()) {
            let lt = self.log_conditional_density(t.coords(), y);
            for (s, (pt, w)) in scratch.iter_mut().zip(f.points().iter().zip(f.weights())) {
                *s = w.ln() + self.log_conditional_density(pt.coords(), y);
            }
            let lfy = logsumexp(&scratch);
            acc = acc + qw * lt.exp() * (lt - lfy);
        }
        if !acc.is_finite() {
            return Err(Error::Domain(format!(
                "info_density integrand degenerated to {acc} (internal guard)"
            )));
        }
        Ok(acc)
    }

    /// Mutual information `I_F = Σ_k w_k i(t_k;F)`, in nats.
    ///
    /// Evaluated through the shared density table (one pass over the
    /// support), which is the same formula as summing [`Self::info_density`]
    /// over the support but a genuinely distinct code path.
    pub fn mutual_information(&self, f: &DiscreteDistribution<T>) -> T {
        let table = DensityTable::build(self, f.points());
        let lfy = table.log_output_density(f.weights());
        table.mutual_information(f.weights(), &lfy)
    }

    /// `i(t;F)` for an arbitrary probe `t` against a precomputed
    /// `ln f(y;F)` node vector — the workhorse of optimality scans, where
    /// one output density serves thousands of probes.
    pub(crate) fn info_density_against(&self, log_fy: &[T], coords: &[T]) -> T {
        debug_assert_eq!(log_fy.len(), self.rule.len());
        let mut acc = T::zero();
        for ((&y, &qw), &lfy) in self.rule.nodes().iter().zip(self.rule.weights()).zip(log_fy) {
            let lt = self.log_conditional_density(coords, y);
            acc = acc + qw * lt.exp() * (lt - lfy);
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// DensityTable: the shared cache behind every batch evaluation
// ---------------------------------------------------------------------------

/// Per-(support point, quadrature node) conditional densities, precomputed
/// once per support set. Weight iterations (the inner capacity loop), the
/// mutual information, and per-point densities all reduce to cheap linear
/// passes over this table.
#[derive(Debug)]
pub(crate) struct DensityTable<T> {
    num_points: usize,
    num_nodes: usize,
    /// Quadrature weights, copied so reductions need no channel in scope.
    quad_weights: Vec<T>,
    /// `ln f(y_j | t_k)`, row-major `(k, j)`.
    log_cond: Vec<T>,
    /// `f(y_j | t_k)`, row-major `(k, j)`.
    cond: Vec<T>,
    /// Per point: `∫ f(y|t_k) ln f(y|t_k) dy` (negative conditional entropy).
    neg_cond_entropy: Vec<T>,
}

impl<T: Scalar> DensityTable<T> {
    pub fn build(ch: &ExtendedChannel<T>, points: &[ExtendedPoint<T>]) -> Self {
        let nodes = ch.rule().nodes();
        let qw = ch.rule().weights();
        let (k, n) = (points.len(), nodes.len());
        let mut log_cond = Vec::with_capacity(k * n);
        let mut cond = Vec::with_capacity(k * n);
        let mut neg_cond_entropy = Vec::with_capacity(k);
        for pt in points {
            let mut h = T::zero();
            for (&y, &w) in nodes.iter().zip(qw) {
                let l = ch.log_conditional_density(pt.coords(), y);
                let f = l.exp();
                log_cond.push(l);
                cond.push(f);
                h = h + w * f * l;
            }
            neg_cond_entropy.push(h);
        }
        Self {
            num_points: k,
            num_nodes: n,
            quad_weights: qw.to_vec(),
            log_cond,
            cond,
            neg_cond_entropy,
        }
    }

    /// `ln f(y_j | t_k)` for all nodes `j`, for position gradients.
    pub fn log_cond_row(&self, k: usize) -> &[T] {
        &self.log_cond[k * self.num_nodes..(k + 1) * self.num_nodes]
    }

    /// `f(y_j;F) = Σ_k w_k f(y_j|t_k)` in the linear domain — one
    /// multiply-add sweep per support point, the fast path for lattice
    /// weight iterations where the support is large but tails are mild.
    pub fn linear_output_density(&self, weights: &[T]) -> Vec<T> {
        debug_assert_eq!(weights.len(), self.num_points);
        let mut out = vec![T::zero(); self.num_nodes];
        for (k, &w) in weights.iter().enumerate() {
            let row = &self.cond[k * self.num_nodes..(k + 1) * self.num_nodes];
            for (o, &f) in out.iter_mut().zip(row) {
                *o = *o + w * f;
            }
        }
        out
    }

    /// `ln f(y_j;F)` at every quadrature node for the given weights.
    pub fn log_output_density(&self, weights: &[T]) -> Vec<T> {
        debug_assert_eq!(weights.len(), self.num_points);
        // Max-shift across the support per node. The support is small, so a
        // per-node two-pass over k stays cache-friendly on the row-major
        // table via strided access.
        let mut out = vec![T::zero(); self.num_nodes];
        for (j, o) in out.iter_mut().enumerate() {
            let mut m = T::neg_infinity();
            for k in 0..self.num_points {
                let v = weights[k].ln() + self.log_cond[k * self.num_nodes + j];
                if v > m {
                    m = v;
                }
            }
            let mut acc = T::zero();
            for k in 0..self.num_points {
                let v = weights[k].ln() + self.log_cond[k * self.num_nodes + j];
                acc = acc + (v - m).exp();
            }
            *o = m + acc.ln();
        }
        out
    }

    /// `i(t_k;F)` for every support point, given `ln f(y;F)` — a single
    /// fused pass per point: `ent_k − Σ_j qw_j f_kj lfy_j`.
    pub fn info_densities(&self, log_fy: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_points];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.cond[k * self.num_nodes..(k + 1) * self.num_nodes];
            let mut cross = T::zero();
            for ((&f, &w), &lfy) in row.iter().zip(&self.quad_weights).zip(log_fy) {
                cross = cross + w * f * lfy;
            }
            *o = self.neg_cond_entropy[k] - cross;
        }
        out
    }

    /// `I_F = Σ_k w_k i(t_k;F)`.
    pub fn mutual_information(&self, weights: &[T], log_fy: &[T]) -> T {
        // Shares the per-point path so MI and the per-point densities are
        // consistent to rounding.
        self.info_densities(log_fy)
            .iter()
            .zip(weights)
            .map(|(i, w)| *i * *w)
            .sum()
    }
}

// ---------------------------------------------------------------------------
