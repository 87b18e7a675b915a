//! Property tests for the capacity solver: monotone ascent, escalation
//! monotonicity, the optimality certificate at converged solutions, output
//! symmetry, capacity monotone in the box, lattice-oracle agreement, and
//! stability under quadrature refinement.

use ehcap_core::channel::{DiscreteDistribution, ExtendedChannel, ExtendedPoint, StateAlphabet};
use ehcap_core::numerics::QuadratureSpec;
use ehcap_core::solver::{
    ba_oracle, kkt_check, optimize_fixed_cardinality, smith_capacity, solve_capacity,
    SolveOptions,
};

fn static_channel(a: f64, quad: QuadratureSpec) -> ExtendedChannel<f64> {
    let alphabet = StateAlphabet::new(vec![a], vec![1.0]).unwrap();
    ExtendedChannel::new(alphabet, quad.rule(a).unwrap()).unwrap()
}

fn onoff_channel(p_on: f64, amp: f64) -> ExtendedChannel<f64> {
    let alphabet = StateAlphabet::new(vec![0.0, amp], vec![1.0 - p_on, p_on]).unwrap();
    let rule = QuadratureSpec::default().rule(amp).unwrap();
    ExtendedChannel::new(alphabet, rule).unwrap()
}

// ---------------------------------------------------------------------------
// Ascent and escalation
// ---------------------------------------------------------------------------

/// The fixed-cardinality optimizer never decreases the objective across
/// outer iterations (each accepted step passes a sufficient-increase test).
#[test]
fn fixed_cardinality_iterations_ascend() {
    let ch = static_channel(1.8, QuadratureSpec::default());
    let init = DiscreteDistribution::new(
        vec![ExtendedPoint::new(vec![-0.4]), ExtendedPoint::new(vec![0.9])],
        vec![0.7, 0.3],
        ch.alphabet(),
    )
    .unwrap();
    let res = optimize_fixed_cardinality(&ch, &init, 1e-6).unwrap();
    assert!(res.trace.len() >= 2, "expected at least one outer step");
    for pair in res.trace.windows(2) {
        assert!(pair[1] >= pair[0] - 1e-12, "descent step: {} -> {}", pair[0], pair[1]);
    }
    let init_mi = ch.mutual_information(&init);
    assert!(res.mi >= init_mi - 1e-12, "optimizer lost ground: {init_mi} -> {}", res.mi);
}

/// Capacity values along the escalation trace are nondecreasing in the
/// support size.
#[test]
fn escalation_trace_is_monotone() {
    let sol = solve_capacity(&static_channel(2.6, QuadratureSpec::default()), &SolveOptions::default())
        .unwrap();
    assert!(sol.converged);
    assert!(sol.cardinality_trace.len() >= 2, "amplitude 2.6 needs escalation");
    for pair in sol.cardinality_trace.windows(2) {
        assert!(
            pair[1].1 >= pair[0].1 - 1e-12,
            "escalation decreased MI: {:?} -> {:?}",
            pair[0],
            pair[1]
        );
    }
}

// ---------------------------------------------------------------------------
// Certificate and symmetry of converged solutions
// ---------------------------------------------------------------------------

/// Converged solutions satisfy both certificate conditions, and
/// symmetrizing the returned law changes MI by less than 1e-9 (an optimum
/// of a symmetric problem may always be taken symmetric).
#[test]
fn converged_solutions_certify_and_symmetrize() {
    for a in [0.8, 1.5, 2.2] {
        let ch = static_channel(a, QuadratureSpec::default());
        let opts = SolveOptions::default();
        let sol = solve_capacity(&ch, &opts).unwrap();
        assert!(sol.converged, "amplitude {a} should converge");
        assert!(
            sol.kkt.max_violation <= opts.tol,
            "violation {} at amplitude {a}",
            sol.kkt.max_violation
        );
        assert!(
            sol.kkt.support_slack <= opts.tol,
            "support slack {} at amplitude {a}",
            sol.kkt.support_slack
        );

        // Symmetrize: average the law with its negation.
        let negated = sol.distribution.negated();
        let mut points = sol.distribution.points().to_vec();
        let mut weights: Vec<f64> = sol.distribution.weights().iter().map(|w| 0.5 * w).collect();
        for (p, w) in negated.points().iter().zip(negated.weights()) {
            points.push(p.clone());
            weights.push(0.5 * w);
        }
        let symmetrized = DiscreteDistribution::new(points, weights, ch.alphabet()).unwrap();
        let mi_sym = ch.mutual_information(&symmetrized);
        assert!(
            (mi_sym - sol.capacity).abs() < 1e-9,
            "symmetrization moved MI at amplitude {a}: {} vs {}",
            mi_sym,
            sol.capacity
        );
    }
}

/// The certificate check rejects a law that is feasible but not optimal.
#[test]
fn kkt_check_flags_suboptimal_laws() {
    let ch = static_channel(2.5, QuadratureSpec::default());
    let binary = DiscreteDistribution::new(
        vec![ExtendedPoint::new(vec![-2.5]), ExtendedPoint::new(vec![2.5])],
        vec![0.5, 0.5],
        ch.alphabet(),
    )
    .unwrap();
    let report = kkt_check(&ch, &binary, 64).unwrap();
    assert!(
        report.max_violation > 1e-3,
        "binary at amplitude 2.5 must fail loudly, got {}",
        report.max_violation
    );
    assert!(
        report.violation_argmax.coords()[0].abs() < 1.5,
        "worst violation should be an interior probe, got {:?}",
        report.violation_argmax.coords()
    );
}

// ---------------------------------------------------------------------------
// Monotonicity and refinement stability
// ---------------------------------------------------------------------------

/// Capacity is nondecreasing as the box grows, pairwise over a sweep.
#[test]
fn capacity_is_monotone_in_the_amplitude() {
    let mut last = 0.0f64;
    for a in [0.5, 1.0, 1.5, 2.0, 2.5] {
        let sol = smith_capacity::<f64>(a, 1e-6).unwrap();
        assert!(sol.converged, "amplitude {a}");
        assert!(
            sol.capacity >= last - 1e-9,
            "capacity decreased at amplitude {a}: {last} -> {}",
            sol.capacity
        );
        last = sol.capacity;
    }
}

/// Refining the quadrature from the default 32 points/unit to 128 moves the
/// computed capacity by less than 1e-9: the default rule is converged.
#[test]
fn quadrature_refinement_is_stable() {
    let coarse = solve_capacity(
        &static_channel(1.0, QuadratureSpec::default()),
        &SolveOptions::default(),
    )
    .unwrap();
    let fine = solve_capacity(
        &static_channel(1.0, QuadratureSpec { tail: 12.0, points_per_unit: 128 }),
        &SolveOptions::default(),
    )
    .unwrap();
    assert!(coarse.converged && fine.converged);
    assert!(
        (coarse.capacity - fine.capacity).abs() < 1e-9,
        "refinement moved capacity: {} vs {}",
        coarse.capacity,
        fine.capacity
    );
}

// ---------------------------------------------------------------------------
// Lattice-oracle agreement
// ---------------------------------------------------------------------------

/// The dense-lattice alternating-maximization value is a lower bound within
/// 2e-3 of the solver's capacity at the contract density of 64 points/unit.
/// One static and one two-state channel here; the full panel runs in the
/// acceptance suite.
#[test]
fn oracle_agreement_at_contract_density() {
    let cases: Vec<(&str, ExtendedChannel<f64>)> = vec![
        ("static a=1.5", static_channel(1.5, QuadratureSpec::default())),
        ("on-off p=0.5 E=2.25", onoff_channel(0.5, 1.5)),
    ];
    for (name, ch) in cases {
        let sol = solve_capacity(&ch, &SolveOptions::default()).unwrap();
        assert!(sol.converged, "{name}");
        let oracle = ba_oracle(&ch, 64, 10_000).unwrap();
        assert!(
            sol.capacity >= oracle.mi - 1e-9,
            "{name}: oracle exceeded the solve ({} vs {})",
            oracle.mi,
            sol.capacity
        );
        assert!(
            sol.capacity - oracle.mi <= 2e-3,
            "{name}: oracle gap too wide ({} vs {})",
            oracle.mi,
            sol.capacity
        );
    }
}
