//! The five subcommands: single-instance capacity reports, the
//! binary-optimality threshold curve, capacity sweeps, and the built-in
//! cross-check suite.

use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::time::Instant;

use clap::ValueEnum;
use rayon::prelude::*;
use serde_json::{json, Value};

use ehcap_core::channel::{ExtendedChannel, StateAlphabet};
use ehcap_core::onoff::{baselines_with, onoff_capacity_with, u_threshold_with, OnOffProblem};
use ehcap_core::solver::{ba_oracle, solve_capacity, CapacitySolution};
use ehcap_core::strategy_sim::empirical_mi;

use crate::output::{cell, csv_document, emit, json_document, meta_with};
use crate::settings::{Format, Settings};
use crate::Failure;

/// Slack for the emitted-row ordering re-check.
const CHAIN_SLACK: f64 = 1e-6;
/// Slack for the threshold curve's nonincreasing re-check.
const UCURVE_SLACK: f64 = 1e-3;
/// Iteration cap for the lattice cross-check runs.
const ORACLE_ITERS: usize = 10_000;
/// Lattice density (points per unit per axis) for the cross-check runs.
const ORACLE_DENSITY: usize = 64;

// ---------------------------------------------------------------------------
// Shared solve plumbing
// ---------------------------------------------------------------------------

fn static_channel(amplitude: f64, settings: &Settings) -> Result<ExtendedChannel<f64>, Failure> {
    let alphabet = StateAlphabet::new(vec![amplitude], vec![1.0])?;
    let rule = settings.quad().rule::<f64>(amplitude)?;
    Ok(ExtendedChannel::new(alphabet, rule)?)
}

fn require_converged(
    sol: CapacitySolution<f64>,
    what: &str,
) -> Result<CapacitySolution<f64>, Failure> {
    if sol.converged {
        Ok(sol)
    } else {
        Err(Failure::NonConvergence(format!(
            "{what} stopped at support size {} with max violation {:.3e}; \
             raise --kmax or loosen --tol",
            sol.distribution.support_size(),
            sol.kkt.max_violation
        )))
    }
}

fn solve_static(amplitude: f64, settings: &Settings) -> Result<CapacitySolution<f64>, Failure> {
    let ch = static_channel(amplitude, settings)?;
    let sol = solve_capacity(&ch, &settings.solve_options())?;
    require_converged(sol, &format!("static solve at amplitude {amplitude}"))
}

fn reject_csv(settings: &Settings, cmd: &str) -> Result<(), Failure> {
    if settings.format == Some(Format::Csv) {
        return Err(Failure::Usage(format!(
            "{cmd} emits a single solution, not a table; --format csv applies to ucurve and sweep"
        )));
    }
    Ok(())
}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}

/// A capacity line for the human report: nats always, bits on request.
fn nats_line(label: &str, value: f64, bits: bool) -> String {
    if bits {
        format!("{label:<11} {value:.9} nats ({:.9} bits)", value / LN_2)
    } else {
        format!("{label:<11} {value:.9} nats")
    }
}

/// Certificate and escalation lines shared by the solution reports.
fn certificate_lines(report: &mut String, sol: &CapacitySolution<f64>) {
    let _ = writeln!(
        report,
        "certificate: max violation {:.3e}, support slack {:.3e}",
        sol.kkt.max_violation, sol.kkt.support_slack
    );
    let _ = writeln!(report, "  scan: {}", sol.kkt.grid_spec);
    let trace = sol
        .cardinality_trace
        .iter()
        .map(|(k, v)| format!("K={k}: {v:.9}"))
        .collect::<Vec<_>>()
        .join(" -> ");
    let _ = writeln!(report, "escalation: {trace}");
}

/// The `solution` block of the machine-readable documents.
fn solution_json(sol: &CapacitySolution<f64>) -> Value {
    let points: Vec<Vec<f64>> =
        sol.distribution.points().iter().map(|p| p.coords().to_vec()).collect();
    let trace: Vec<Value> =
        sol.cardinality_trace.iter().map(|(k, v)| json!([k, v])).collect();
    json!({
        "capacity_nats": sol.capacity,
        "cardinality_trace": trace,
        "converged": sol.converged,
        "max_violation": sol.kkt.max_violation,
        "points": points,
        "support_slack": sol.kkt.support_slack,
        "weights": sol.distribution.weights().to_vec(),
    })
}

/// Emits a single-solution command's output: the JSON document to `--out`
/// when given (alongside the stdout report), or to stdout alone under
/// `--format json`; the human report otherwise.
fn emit_solution(settings: &Settings, report: &str, doc: &Value) -> Result<(), Failure> {
    match (settings.format, &settings.out) {
        (Some(Format::Json), None) => {
            print!("{}", json_document(doc));
            Ok(())
        }
        (_, Some(path)) => {
            std::fs::write(path, json_document(doc))
                .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
            print!("{report}");
            Ok(())
        }
        _ => {
            print!("{report}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// smith
// ---------------------------------------------------------------------------

pub fn cmd_smith(amplitude: f64, settings: &Settings) -> Result<(), Failure> {
    reject_csv(settings, "smith")?;
    if !amplitude.is_finite() || amplitude < 0.0 {
        return Err(Failure::Usage(format!(
            "amplitude must be finite and >= 0, got {amplitude}"
        )));
    }

    let start = Instant::now();
    let sol = solve_static(amplitude, settings)?;
    let wall_ms = start.elapsed().as_millis() as u64;

    let mut report = String::new();
    let _ = writeln!(report, "static amplitude constraint |x| <= {amplitude}");
    let _ = writeln!(report, "{}", nats_line("capacity:", sol.capacity, settings.bits));
    let support = sol.distribution.support_size();
    let _ = writeln!(report, "support ({support} point{}):", plural(support));
    for (point, weight) in sol.distribution.points().iter().zip(sol.distribution.weights()) {
        let _ = writeln!(report, "  t = {:+.9}   weight {weight:.9}", point.coords()[0]);
    }
    certificate_lines(&mut report, &sol);

    let doc = json!({
        "meta": meta_with(
            settings,
            wall_ms,
            &[("amplitude", json!(amplitude)), ("command", json!("smith"))],
        ),
        "solution": solution_json(&sol),
    });
    emit_solution(settings, &report, &doc)
}

// ---------------------------------------------------------------------------
// onoff
// ---------------------------------------------------------------------------

pub fn cmd_onoff(pon: f64, energy: f64, settings: &Settings) -> Result<(), Failure> {
    reject_csv(settings, "onoff")?;
    let problem = OnOffProblem::new(pon, energy)?;

    let start = Instant::now();
    let sol = onoff_capacity_with(&problem, &settings.quad(), &settings.solve_options())?;
    let sol = require_converged(sol, &format!("on-off solve at p_on {pon}, energy {energy}"))?;
    let static_cap = if energy == 0.0 {
        0.0
    } else {
        solve_static(problem.amplitude(), settings)?.capacity
    };
    let baselines = baselines_with(&problem, static_cap);
    let wall_ms = start.elapsed().as_millis() as u64;

    let axis = problem.free_axis();
    let mut report = String::new();
    let _ = writeln!(
        report,
        "on-off arrivals: p_on = {pon}, energy = {energy} (on amplitude {})",
        problem.amplitude()
    );
    let _ = writeln!(report, "{}", nats_line("c_causal:", sol.capacity, settings.bits));
    let _ = writeln!(report, "{}", nats_line("c_si_both:", baselines.c_si_both, settings.bits));
    let _ = writeln!(report, "{}", nats_line("c_no_si:", baselines.c_no_si, settings.bits));
    let _ = writeln!(report, "{}", nats_line("c_battery:", baselines.c_battery, settings.bits));
    let support = sol.distribution.support_size();
    let _ = writeln!(report, "on-state law ({support} point{}):", plural(support));
    for (point, weight) in sol.distribution.points().iter().zip(sol.distribution.weights()) {
        let _ = writeln!(report, "  t2 = {:+.9}   weight {weight:.9}", point.coords()[axis]);
    }
    certificate_lines(&mut report, &sol);

    let mut solution = solution_json(&sol);
    let on_points: Vec<f64> =
        sol.distribution.points().iter().map(|p| p.coords()[axis]).collect();
    solution
        .as_object_mut()
        .expect("solution is an object")
        .insert("on_points".to_string(), json!(on_points));
    let doc = json!({
        "baselines": {
            "c_battery_nats": baselines.c_battery,
            "c_no_si_nats": baselines.c_no_si,
            "c_si_both_nats": baselines.c_si_both,
        },
        "meta": meta_with(
            settings,
            wall_ms,
            &[("command", json!("onoff")), ("energy", json!(energy)), ("pon", json!(pon))],
        ),
        "solution": solution,
    });
    emit_solution(settings, &report, &doc)
}

// ---------------------------------------------------------------------------
// ucurve
// ---------------------------------------------------------------------------

/// Parses the `--grid` list, defaulting to 0.1, 0.2, ..., 1.0; values must
/// lie in (0, 1] and be distinct. The parsed grid is sorted ascending.
fn parse_grid(grid: Option<&str>) -> Result<Vec<f64>, Failure> {
    let mut ps: Vec<f64> = match grid {
        None => (1..=10).map(|i| f64::from(i) / 10.0).collect(),
        Some(text) => text
            .split(',')
            .map(|field| {
                let field = field.trim();
                field
                    .parse::<f64>()
                    .map_err(|e| Failure::Usage(format!("grid value {field:?}: {e}")))
            })
            .collect::<Result<Vec<f64>, Failure>>()?,
    };
    if ps.is_empty() {
        return Err(Failure::Usage("grid must not be empty".to_string()));
    }
    for &p in &ps {
        if !p.is_finite() || !(p > 0.0) || p > 1.0 {
            return Err(Failure::Usage(format!("grid values must lie in (0, 1], got {p}")));
        }
    }
    ps.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    if ps.windows(2).any(|w| w[0] == w[1]) {
        return Err(Failure::Usage("grid values must be distinct".to_string()));
    }
    Ok(ps)
}

pub fn cmd_ucurve(grid: Option<&str>, settings: &Settings) -> Result<(), Failure> {
    let ps = parse_grid(grid)?;
    let quad = settings.quad();

    let start = Instant::now();
    let us: Vec<f64> = ps
        .par_iter()
        .map(|&p| u_threshold_with(p, &quad, settings.tol))
        .collect::<ehcap_core::Result<Vec<f64>>>()?;
    let wall_ms = start.elapsed().as_millis() as u64;

    for window in us.windows(2) {
        if window[1] > window[0] + UCURVE_SLACK {
            return Err(Failure::Check(format!(
                "threshold curve is not nonincreasing: {} -> {}",
                window[0], window[1]
            )));
        }
    }

    let rows: Vec<Vec<String>> =
        ps.iter().zip(&us).map(|(&p, &u)| vec![cell(p), cell(u)]).collect();
    let csv = csv_document("p_on,u_threshold", &rows);
    let json_rows: Vec<Value> = ps
        .iter()
        .zip(&us)
        .map(|(&p, &u)| json!({"p_on": p, "u_threshold": u}))
        .collect();
    let doc = json!({
        "meta": meta_with(
            settings,
            wall_ms,
            &[("axis_name", json!("p_on")), ("command", json!("ucurve"))],
        ),
        "rows": json_rows,
    });

    let text = match settings.format.unwrap_or(Format::Csv) {
        Format::Csv => csv,
        Format::Json => json_document(&doc),
    };
    emit(settings, &text)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// The parameter a sweep varies.
#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    /// Vary the arrival probability at fixed energy.
    Pon,
    /// Vary the energy at fixed arrival probability.
    Energy,
}

/// One emitted sweep row.
struct Row {
    axis: f64,
    c_causal: f64,
    c_si_both: f64,
    c_battery: f64,
    support: usize,
}

/// Uniform grid from `lo` to `hi` inclusive; the last point is exactly `hi`.
fn sweep_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| {
            if i == steps - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

/// Re-checks `0 ≤ c_causal ≤ c_si_both ≤ c_battery` on every row.
fn check_chain(rows: &[Row]) -> Result<(), Failure> {
    for row in rows {
        let ordered = row.c_causal >= -CHAIN_SLACK
            && row.c_causal <= row.c_si_both + CHAIN_SLACK
            && row.c_si_both <= row.c_battery + CHAIN_SLACK;
        if !ordered {
            return Err(Failure::Check(format!(
                "ordering chain violated at axis {}: c_causal {}, c_si_both {}, c_battery {}",
                row.axis, row.c_causal, row.c_si_both, row.c_battery
            )));
        }
    }
    Ok(())
}

pub fn cmd_sweep(
    axis: SweepAxis,
    fixed: f64,
    range: (f64, f64, usize),
    settings: &Settings,
) -> Result<(), Failure> {
    let (lo, hi, steps) = range;
    if steps < 2 {
        return Err(Failure::Usage(format!("steps must be at least 2, got {steps}")));
    }
    if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
        return Err(Failure::Usage(format!("need lo < hi, got lo {lo}, hi {hi}")));
    }
    match axis {
        SweepAxis::Pon => {
            if !(lo > 0.0) || hi > 1.0 {
                return Err(Failure::Usage(format!(
                    "p_on grid must lie in (0, 1], got [{lo}, {hi}]"
                )));
            }
            if !fixed.is_finite() || fixed < 0.0 {
                return Err(Failure::Usage(format!(
                    "fixed energy must be finite and >= 0, got {fixed}"
                )));
            }
        }
        SweepAxis::Energy => {
            if lo < 0.0 {
                return Err(Failure::Usage(format!("energy grid must be >= 0, got lo {lo}")));
            }
            if !fixed.is_finite() || !(fixed > 0.0) || fixed > 1.0 {
                return Err(Failure::Usage(format!(
                    "fixed p_on must lie in (0, 1], got {fixed}"
                )));
            }
        }
    }

    let grid = sweep_grid(lo, hi, steps);
    let quad = settings.quad();
    let opts = settings.solve_options();

    let start = Instant::now();
    // On the p_on axis the static capacity is shared by every row; solve it
    // once and reuse it in the baselines.
    let shared_static = match axis {
        SweepAxis::Pon => {
            if fixed == 0.0 {
                Some(0.0)
            } else {
                Some(solve_static(fixed.sqrt(), settings)?.capacity)
            }
        }
        SweepAxis::Energy => None,
    };
    let rows: Vec<Row> = grid
        .par_iter()
        .map(|&value| -> Result<Row, Failure> {
            let problem = match axis {
                SweepAxis::Pon => OnOffProblem::new(value, fixed)?,
                SweepAxis::Energy => OnOffProblem::new(fixed, value)?,
            };
            let sol = onoff_capacity_with(&problem, &quad, &opts)?;
            let sol = require_converged(sol, &format!("sweep row at axis value {value}"))?;
            let static_cap = match shared_static {
                Some(c) => c,
                None => {
                    if value == 0.0 {
                        0.0
                    } else {
                        solve_static(problem.amplitude(), settings)?.capacity
                    }
                }
            };
            let baselines = baselines_with(&problem, static_cap);
            Ok(Row {
                axis: value,
                c_causal: sol.capacity,
                c_si_both: baselines.c_si_both,
                c_battery: baselines.c_battery,
                support: sol.distribution.support_size(),
            })
        })
        .collect::<Result<Vec<Row>, Failure>>()?;
    let wall_ms = start.elapsed().as_millis() as u64;

    check_chain(&rows)?;

    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                cell(r.axis),
                cell(r.c_causal),
                cell(r.c_si_both),
                cell(r.c_battery),
                r.support.to_string(),
            ]
        })
        .collect();
    let csv = csv_document(
        "axis,c_causal_nats,c_si_both_nats,c_battery_nats,support_size",
        &csv_rows,
    );
    let axis_name = match axis {
        SweepAxis::Pon => "p_on",
        SweepAxis::Energy => "energy",
    };
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "axis": r.axis,
                "c_battery_nats": r.c_battery,
                "c_causal_nats": r.c_causal,
                "c_si_both_nats": r.c_si_both,
                "support_size": r.support,
            })
        })
        .collect();
    let doc = json!({
        "meta": meta_with(
            settings,
            wall_ms,
            &[
                ("axis_name", json!(axis_name)),
                ("command", json!("sweep")),
                ("fixed", json!(fixed)),
            ],
        ),
        "rows": json_rows,
    });

    let text = match settings.format.unwrap_or(Format::Csv) {
        Format::Csv => csv,
        Format::Json => json_document(&doc),
    };
    emit(settings, &text)
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn check_line(name: &str, pass: bool, detail: &str) -> (bool, String) {
    let status = if pass { "PASS" } else { "FAIL" };
    (pass, format!("check {name:<17} {status}  {detail}"))
}

pub fn cmd_validate(oracle_tol: f64, settings: &Settings) -> Result<(), Failure> {
    if settings.format.is_some() {
        return Err(Failure::Usage(
            "validate emits a fixed plain-text report; --format does not apply".to_string(),
        ));
    }
    if !oracle_tol.is_finite() || oracle_tol <= 0.0 {
        return Err(Failure::Usage(format!(
            "oracle-tol must be finite and positive, got {oracle_tol}"
        )));
    }
    let quad = settings.quad();
    let opts = settings.solve_options();
    let mut checks: Vec<(bool, String)> = Vec::new();

    // Static instance against the dense-lattice cross-check. The lattice
    // value is a lower bound, so the gap must be small and nonnegative (up
    // to numerical slack).
    let static_ch = static_channel(1.5, settings)?;
    let static_sol = solve_capacity(&static_ch, &opts)?;
    let static_oracle = ba_oracle(&static_ch, ORACLE_DENSITY, ORACLE_ITERS)?;
    let gap = static_sol.capacity - static_oracle.mi;
    checks.push(check_line(
        "static-oracle",
        static_sol.converged && gap >= -1e-9 && gap <= oracle_tol,
        &format!(
            "solve {:.9}  lattice {:.9}  gap {:+.3e} (max {:.1e})",
            static_sol.capacity, static_oracle.mi, gap, oracle_tol
        ),
    ));

    // The two-state instance against the same cross-check.
    let problem = OnOffProblem::new(0.5, 2.25)?;
    let onoff_ch = problem.channel(&quad)?;
    let onoff_sol = onoff_capacity_with(&problem, &quad, &opts)?;
    let onoff_oracle = ba_oracle(&onoff_ch, ORACLE_DENSITY, ORACLE_ITERS)?;
    let gap = onoff_sol.capacity - onoff_oracle.mi;
    checks.push(check_line(
        "onoff-oracle",
        onoff_sol.converged && gap >= -1e-9 && gap <= oracle_tol,
        &format!(
            "solve {:.9}  lattice {:.9}  gap {:+.3e} (max {:.1e})",
            onoff_sol.capacity, onoff_oracle.mi, gap, oracle_tol
        ),
    ));

    // p_on = 1 must reduce to the static constraint at the same amplitude.
    let reduced = onoff_capacity_with(&OnOffProblem::new(1.0, 2.25)?, &quad, &opts)?;
    let diff = (reduced.capacity - static_sol.capacity).abs();
    checks.push(check_line(
        "static-reduction",
        reduced.converged && diff <= 1e-6,
        &format!(
            "onoff(1, 2.25) {:.9}  static(1.5) {:.9}  |diff| {:.3e} (max 1.0e-06)",
            reduced.capacity, static_sol.capacity, diff
        ),
    ));

    // Monte Carlo estimate against the quadrature value.
    let est = empirical_mi(&onoff_ch, &onoff_sol.distribution, 1_000_000, settings.seed)?;
    let z = (est.mean - onoff_sol.capacity) / est.std_error;
    checks.push(check_line(
        "empirical-mi",
        z.abs() <= 4.0,
        &format!(
            "mean {:.6}  se {:.2e}  target {:.6}  |z| {:.2} (max 4.00)",
            est.mean,
            est.std_error,
            onoff_sol.capacity,
            z.abs()
        ),
    ));

    // Same seed, same estimate, bit for bit.
    let first = empirical_mi(&onoff_ch, &onoff_sol.distribution, 200_000, settings.seed)?;
    let second = empirical_mi(&onoff_ch, &onoff_sol.distribution, 200_000, settings.seed)?;
    checks.push(check_line(
        "determinism",
        first == second,
        &format!("repeat mean {:.9}  bitwise equal: {}", first.mean, first == second),
    ));

    let passed = checks.iter().filter(|(pass, _)| *pass).count();
    let mut report = String::new();
    for (_, line) in &checks {
        let _ = writeln!(report, "{line}");
    }
    let _ = writeln!(report, "validate: {passed}/{} checks passed", checks.len());
    emit(settings, &report)?;

    if passed == checks.len() {
        Ok(())
    } else {
        Err(Failure::Check(format!("{} of {} checks failed", checks.len() - passed, checks.len())))
    }
}

// ---------------------------------------------------------------------------
