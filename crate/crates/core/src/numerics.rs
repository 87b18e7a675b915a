//! Deterministic numerical kernels shared by every other module: the
//! unit-variance Gaussian density, composite Gauss–Legendre quadrature over
//! the channel-output variable, and log/entropy helpers.
//!
//! Output-variable integrals `∫ f(y) dy` over the real line are realized by
//! a fixed rule on a truncated interval `[−(a_max + tail), a_max + tail]`:
//! beyond `a_max + 10σ` the Gaussian tail mass is below 1e-22, far under any
//! solver tolerance used here. The rule is composite — unit-width panels,
//! each carrying a `points_per_unit`-point Gauss–Legendre sub-rule — so its
//! accuracy can be studied by plain refinement.
//!
//! # Example
//!
//! ```
//! use ehcap_core::numerics::{build_rule, gaussian_pdf};
//!
//! let rule = build_rule::<f64>(3.0, 10.0, 32).unwrap();
//! let mass = rule.integrate(|y| gaussian_pdf(y, 0.0)).unwrap();
//! assert!((mass - 1.0).abs() < 1e-10);
//! ```

use crate::error::{Error, Result};
use crate::{lit, Scalar};

/// Default truncation distance beyond the largest amplitude, in noise
/// standard deviations.
pub const DEFAULT_TAIL: f64 = 10.0;

/// Default quadrature density (Gauss–Legendre points per unit-width panel).
pub const DEFAULT_POINTS_PER_UNIT: usize = 32;

// ---------------------------------------------------------------------------
// Gaussian density and log helpers
// ---------------------------------------------------------------------------

/// Unit-variance Gaussian density `(1/√(2π)) e^{−(y−mean)²/2}`.
pub fn gaussian_pdf<T: Scalar>(y: T, mean: T) -> T {
    log_gaussian_pdf(y, mean).exp()
}

/// Natural log of [`gaussian_pdf`]: `−(y−mean)²/2 − ln(2π)/2`.
pub fn log_gaussian_pdf<T: Scalar>(y: T, mean: T) -> T {
    let d = y - mean;
    let half = lit::<T>(0.5);
    -half * d * d - half * lit(core::f64::consts::TAU.ln())
}

/// `log(Σ exp(v_i))` with the usual max shift, so that mixtures of widely
/// separated exponents keep full relative accuracy.
///
/// Returns `-inf` for an empty slice.
pub fn logsumexp<T: Scalar>(values: &[T]) -> T {
    let mut m = T::neg_infinity();
    for &v in values {
        if v > m {
            m = v;
        }
    }
    if !m.is_finite() {
        return m;
    }
    let mut acc = T::zero();
    for &v in values {
        acc = acc + (v - m).exp();
    }
    m + acc.ln()
}

/// `v·ln(v)` with the continuous extension `0` at `v = 0`.
///
/// # Errors
///
/// Negative or non-finite `v` is a domain error.
pub fn xlogx<T: Scalar>(v: T) -> Result<T> {
    if !v.is_finite() || v < T::zero() {
        return Err(Error::Domain(format!("xlogx requires finite v >= 0, got {v}")));
    }
    if v == T::zero() {
        return Ok(T::zero());
    }
    Ok(v * v.ln())
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// A fixed quadrature rule: strictly increasing nodes with positive weights
/// on a closed interval.
#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
    domain: (T, T),
}

impl<T: Scalar> QuadratureRule<T> {
    /// Builds a rule from raw nodes and weights, validating the invariants:
    /// nodes strictly increasing and inside `domain`, weights all positive.
    pub fn new(nodes: Vec<T>, weights: Vec<T>, domain: (T, T)) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Domain(format!(
                "rule needs matching nonempty nodes/weights, got {}/{}",
                nodes.len(),
                weights.len()
            )));
        }
        if !(domain.0 < domain.1) {
            return Err(Error::Domain(format!(
                "rule domain must be a nonempty interval, got [{}, {}]",
                domain.0, domain.1
            )));
        }
        for pair in nodes.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::Domain(format!(
                    "rule nodes must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if nodes[0] < domain.0 || *nodes.last().expect("nonempty") > domain.1 {
            return Err(Error::Domain("rule nodes outside the stated domain".into()));
        }
        if weights.iter().any(|w| !(*w > T::zero())) {
            return Err(Error::Domain("rule weights must all be positive".into()));
        }
        Ok(Self { nodes, weights, domain })
    }

    /// Quadrature nodes, strictly increasing.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Quadrature weights, matching [`Self::nodes`] by index.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// The closed integration interval `[y_lo, y_hi]`.
    pub fn domain(&self) -> (T, T) {
        self.domain
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the rule has no nodes (never, for validated rules).
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ_k weight_k · f(node_k)`.
    ///
    /// # Errors
    ///
    /// A non-finite `f(node_k)` is reported as a domain error rather than
    /// silently contaminating the sum.
    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> Result<T> {
        let mut acc = T::zero();
        for (&y, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(y);
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "integrand returned non-finite value {v} at y = {y}"
                )));
            }
            acc = acc + w * v;
        }
        Ok(acc)
    }
}

/// Builds the composite Gauss–Legendre rule on
/// `[−(a_max + tail), a_max + tail]`: one `points_per_unit`-point panel per
/// unit of interval width (the last panel absorbs any fractional remainder,
/// with panel widths equalized). Deterministic for fixed inputs, and exactly
/// symmetric about 0 by construction.
///
/// # Errors
///
/// Rejects `a_max < 0` or non-finite inputs, `tail < 6` (truncation error
/// would exceed the solver tolerance budget), and `points_per_unit < 16`.
pub fn build_rule<T: Scalar>(a_max: f64, tail: f64, points_per_unit: usize) -> Result<QuadratureRule<T>> {
    if !a_max.is_finite() || a_max < 0.0 {
        return Err(Error::Domain(format!("a_max must be finite and >= 0, got {a_max}")));
    }
    if !tail.is_finite() || tail < 6.0 {
        return Err(Error::Domain(format!("tail must be >= 6 noise deviations, got {tail}")));
    }
    if points_per_unit < 16 {
        return Err(Error::Domain(format!(
            "points_per_unit must be >= 16, got {points_per_unit}"
        )));
    }

    let half_width = a_max + tail;
    let panels = (2.0 * half_width).ceil() as usize;
    let (base_nodes, base_weights) = legendre_nodes::<T>(points_per_unit);

    // Panel edges, forced to exact mirror symmetry about 0 so that odd
    // integrands cancel to rounding level.
    let width = 2.0 * half_width / panels as f64;
    let mut edges = vec![T::zero(); panels + 1];
    for k in 0..=panels {
        let e = -half_width + k as f64 * width;
        let mirrored = half_width - (panels - k) as f64 * width;
        edges[k] = lit::<T>(0.5 * (e + mirrored));
    }
    edges[0] = lit(-half_width);
    edges[panels] = lit(half_width);
    if panels % 2 == 0 {
        edges[panels / 2] = T::zero();
    }

    let half = lit::<T>(0.5);
    let mut nodes = Vec::with_capacity(panels * points_per_unit);
    let mut weights = Vec::with_capacity(panels * points_per_unit);
    for k in 0..panels {
        let center = half * (edges[k] + edges[k + 1]);
        let scale = half * (edges[k + 1] - edges[k]);
        for (&x, &w) in base_nodes.iter().zip(&base_weights) {
            nodes.push(center + scale * x);
            weights.push(scale * w);
        }
    }

    QuadratureRule::new(nodes, weights, (lit(-half_width), lit(half_width)))
}

/// The two knobs of [`build_rule`], bundled so callers that construct their
/// own channels (solvers, the command line) can carry one value around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Truncation distance beyond the largest amplitude, in noise standard
    /// deviations.
    pub tail: f64,
    /// Gauss–Legendre points per unit-width panel.
    pub points_per_unit: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { tail: DEFAULT_TAIL, points_per_unit: DEFAULT_POINTS_PER_UNIT }
    }
}

impl QuadratureSpec {
    /// Builds the rule for a box of half-width `a_max`. See [`build_rule`].
    pub fn rule<T: Scalar>(&self, a_max: f64) -> Result<QuadratureRule<T>> {
        build_rule(a_max, self.tail, self.points_per_unit)
    }

    /// One-line description for reports and metadata.
    pub fn describe(&self) -> String {
        format!(
            "composite Gauss-Legendre, {} points/unit panel, tail {} sigma",
            self.points_per_unit, self.tail
        )
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration on the
/// Legendre polynomial with the classic Chebyshev-angle starting guesses.
/// The node set is exactly symmetric: the positive half is computed and
/// mirrored (with a hard zero at the center for odd counts).
fn legendre_nodes<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let newton_tol = T::epsilon() * lit(4.0);

    // Roots come out in decreasing order for i = 1..=n with this guess; we
    // only solve the positive half and mirror.
    for i in 1..=n.div_ceil(2) {
        let guess = ((i as f64 - 0.25) / (n as f64 + 0.5) * core::f64::consts::PI).cos();
        let mut x = lit::<T>(guess);
        for _ in 0..120 {
            let (p, dp) = legendre_and_deriv(n, x);
            let step = p / dp;
            x = x - step;
            if step.abs() <= newton_tol {
                break;
            }
        }
        if n % 2 == 1 && i == n.div_ceil(2) {
            x = T::zero();
        }
        let (_, dp) = legendre_and_deriv(n, x);
        let w = lit::<T>(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[n - i] = x;
        weights[n - i] = w;
        nodes[i - 1] = -x;
        weights[i - 1] = w;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and derivative `P'_n(x)` by the three-term
/// recurrence; `|x| < 1` is required for the derivative formula.
fn legendre_and_deriv<T: Scalar>(n: usize, x: T) -> (T, T) {
    debug_assert!(n >= 1);
    let mut p_prev = T::one();
    let mut p = x;
    for k in 1..n {
        let kf = lit::<T>(k as f64);
        let next = ((lit::<T>(2.0) * kf + T::one()) * x * p - kf * p_prev) / (kf + T::one());
        p_prev = p;
        p = next;
    }
    let dp = lit::<T>(n as f64) * (x * p - p_prev) / (x * x - T::one());
    (p, dp)
}

// ---------------------------------------------------------------------------
