use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use graphflow_core::analysis::{
    fit_decay, read_diagnostics_csv, scaling_covariance, verify_algebra, verify_trace_evolution,
    write_diagnostics_csv, ScalingReport,
};
use graphflow_core::flow::{run_observed, RunParams};
use graphflow_core::geometry::gauss_residual_field;
use graphflow_core::{
    DecayClaim, DecayFit, DiagnosticsRecord, Error, FlowState, Gauge, InvariantReport, MapField,
};
use serde::Serialize;

use crate::{exit, Failure, RunConfig};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

/// Random states drawn by the algebra suite.
pub const ALGEBRA_STATES: usize = 10_000;
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Length of each of the two probe steps of the trace-evolution suite.
pub const TRACE_PROBE_DT: f64 = 1e-3;
/// Required residual reduction per mesh doubling in the trace-evolution suite.
pub const TRACE_MIN_RATIO: f64 = 3.0;
/// Second order with 20% slack.
pub const GAUSS_MIN_RATIO: f64 = 3.2;
/// Residuals below this are treated as exact.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;
pub const SCALING_TAUS: [f64; 3] = [0.5, 2.0, 4.0];
pub const SCALING_STEPS: u64 = 10;
pub const SCALING_TOL: f64 = 1e-10;

/// Outcome of a completed run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub n: usize,
    pub records: Vec<DiagnosticsRecord>,
    /// Initial `min tr(s)`.
    pub eps0: f64,
    /// Worst invariant values over all emitted states.
    pub invariants: InvariantReport,
    pub steps: u64,
    pub csv_path: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

fn snapshot_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("snapshot_{step:08}.txt"))
}

fn write_snapshot(
    dir: &Path,
    state: &FlowState,
    echo: &[String],
) -> graphflow_core::Result<PathBuf> {
    let path = snapshot_path(dir, state.step);
    state
        .field
        .write_snapshot_annotated(state.t, echo, File::create(&path)?)?;
    Ok(path)
}

/// Runs the flow described by `config`, writing `diagnostics.csv` and
/// snapshots into its output directory. Invariants are checked at every
/// emitted state. On failure the diagnostics gathered so far are still
/// written.
pub fn cmd_run(config: &RunConfig, out: &mut dyn Write) -> Result<RunSummary, Failure> {
    config.validate()?;
    let field = config.initial_field()?;
    let initial = DiagnosticsRecord::measure(&field, 0.0)?;
    let eps0 = initial.min_tr_s;
    if config.area_decreasing && !(eps0 > 0.0) {
        return Err(Failure::new(
            exit::INVARIANT,
            format!("invariant violated at t = 0: initial data is not area-decreasing, min tr(s) = {eps0}"),
        ));
    }
    let dir = config.output_dir.as_path();
    std::fs::create_dir_all(dir)?;
    let echo = config.echo();
    // the u >= eps0/2 check only applies once some point has tr(s) >= eps0 > 0
    let eps_check = if eps0 > 0.0 { eps0 } else { f64::INFINITY };

    let mut snapshots = Vec::new();
    let mut worst: Option<InvariantReport> = None;
    let mut emitted = 0u64;
    let params = RunParams {
        t_end: config.t_end,
        cadence: config.cadence,
        cfl: config.cfl,
    };
    let result = run_observed(FlowState::new(field), &params, |state, rec| {
        let report = InvariantReport::measure(&state.field, eps_check)?;
        match worst.as_mut() {
            Some(w) => w.merge(&report),
            None => worst = Some(report),
        }
        let mut problems = report.violations();
        if config.area_decreasing && !(rec.min_tr_s > 0.0) {
            problems.push(format!(
                "area-decreasing lost: min tr(s) = {}",
                rec.min_tr_s
            ));
        }
        if !problems.is_empty() {
            return Err(Error::InvariantViolation {
                t: state.t,
                what: problems.join("; "),
            });
        }
        if emitted == 0
            || (config.snapshot_every > 0 && emitted.is_multiple_of(config.snapshot_every))
        {
            snapshots.push(write_snapshot(dir, state, &echo)?);
        }
        emitted += 1;
        Ok(())
    });

    let csv_path = dir.join(DIAGNOSTICS_FILE);
    let write_csv = |records: &[DiagnosticsRecord]| -> Result<(), Failure> {
        write_diagnostics_csv(records, &echo, File::create(&csv_path)?)?;
        Ok(())
    };
    match result {
        Ok(output) => {
            write_csv(&output.records)?;
            let last = snapshot_path(dir, output.state.step);
            if !snapshots.contains(&last) {
                snapshots.push(write_snapshot(dir, &output.state, &echo)?);
            }
            let invariants = worst.expect("at least one state is emitted");
            let min_tr = output
                .records
                .iter()
                .map(|r| r.min_tr_s)
                .fold(f64::INFINITY, f64::min);
            writeln!(
                out,
                "completed t = {} in {} steps, {} records, min tr(s) = {min_tr:.6e} (initial {eps0:.6e}), diagnostics in {}",
                output.state.t,
                output.state.step,
                output.records.len(),
                csv_path.display()
            )?;
            Ok(RunSummary {
                n: config.n,
                records: output.records,
                eps0,
                invariants,
                steps: output.state.step,
                csv_path,
                snapshots,
            })
        }
        Err(abort) => {
            write_csv(&abort.records)?;
            write_snapshot(dir, &abort.last_state, &echo)?;
            let mut failure = Failure::from(abort.error);
            failure.message = format!(
                "{}; {} diagnostics records written to {}",
                failure.message,
                abort.records.len(),
                csv_path.display()
            );
            Err(failure)
        }
    }
}

/// Verification suites available from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Algebra,
    TraceEvolution,
    Gauss,
    Scaling,
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Suite::Algebra => "algebra",
            Suite::TraceEvolution => "trace-evolution",
            Suite::Gauss => "gauss",
            Suite::Scaling => "scaling",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub lines: Vec<String>,
    /// Reproduction data for the worst case.
    pub worst_input: String,
}

/// Each consecutive pair either sits below the roundoff floor or shrinks
/// by at least `min_ratio`.
fn converges(residuals: &[f64], min_ratio: f64) -> bool {
    residuals
        .windows(2)
        .all(|w| (w[0] <= ROUNDOFF_FLOOR && w[1] <= ROUNDOFF_FLOOR) || w[1] * min_ratio <= w[0])
}

fn ratios(residuals: &[f64]) -> String {
    residuals
        .windows(2)
        .map(|w| format!("{:.2}", w[0] / w[1]))
        .collect::<Vec<_>>()
        .join(", ")
}

fn echo_inline(config: &RunConfig) -> String {
    config.echo().join("; ")
}

pub fn run_suite(config: &RunConfig, suite: Suite) -> Result<SuiteReport, Failure> {
    match suite {
        Suite::Algebra => {
            let rep = verify_algebra(config.seed, ALGEBRA_STATES)?;
            let passed = rep.max_relative <= ALGEBRA_TOL;
            Ok(SuiteReport {
                suite,
                passed,
                lines: vec![format!(
                    "algebra: {} random area-decreasing states (seed {}), max relative |lemma - corollary| = {:.3e}, tolerance {ALGEBRA_TOL:e}",
                    rep.count, config.seed, rep.max_relative
                )],
                worst_input: serde_json::to_string(&rep.worst).expect("state serializes"),
            })
        }
        Suite::TraceEvolution => {
            if config.n < 32 {
                return Err(Failure::malformed(
                    "trace-evolution suite needs n >= 32 (it also uses n/2 and n/4)",
                ));
            }
            let sizes = [config.n / 4, config.n / 2, config.n];
            let mut corrected = Vec::new();
            let mut uncorrected = Vec::new();
            let mut lines = Vec::new();
            for &n in &sizes {
                let state = FlowState::new(config.initial_field_at(n)?);
                let c = verify_trace_evolution(&state, TRACE_PROBE_DT, Gauge::Corrected)?.max;
                let u = verify_trace_evolution(&state, TRACE_PROBE_DT, Gauge::Uncorrected)?.max;
                lines.push(format!(
                    "trace-evolution n = {n}: max residual gauge-corrected {c:.3e}, uncorrected {u:.3e}"
                ));
                corrected.push(c);
                uncorrected.push(u);
            }
            let corrected_ok = converges(&corrected, TRACE_MIN_RATIO);
            let control_static = uncorrected.iter().all(|&u| u <= ROUNDOFF_FLOOR);
            let control_ok = control_static
                || !uncorrected
                    .windows(2)
                    .any(|w| w[1] * TRACE_MIN_RATIO <= w[0]);
            lines.push(format!(
                "trace-evolution: corrected ratios per doubling [{}] (need >= {TRACE_MIN_RATIO}), uncorrected [{}] (need < {TRACE_MIN_RATIO}){}",
                ratios(&corrected),
                ratios(&uncorrected),
                if control_static { ", negative control vacuous: no tangential motion" } else { "" }
            ));
            Ok(SuiteReport {
                suite,
                passed: corrected_ok && control_ok,
                lines,
                worst_input: format!(
                    "sizes {sizes:?}, probe dt {TRACE_PROBE_DT}; {}",
                    echo_inline(config)
                ),
            })
        }
        Suite::Gauss => {
            let sizes = [config.n / 2, config.n, 2 * config.n];
            let mut residuals = Vec::new();
            let mut lines = Vec::new();
            for &n in &sizes {
                let field = config.initial_field_at(n)?;
                let r = gauss_residual_field(&field)?
                    .into_iter()
                    .fold(0.0, f64::max);
                lines.push(format!(
                    "gauss n = {n}: max |K det g - (<N11,N22> - |N12|^2)| = {r:.3e}"
                ));
                residuals.push(r);
            }
            lines.push(format!(
                "gauss: ratios per doubling [{}] (need >= {GAUSS_MIN_RATIO}, or all below {ROUNDOFF_FLOOR:e})",
                ratios(&residuals)
            ));
            Ok(SuiteReport {
                suite,
                passed: converges(&residuals, GAUSS_MIN_RATIO),
                lines,
                worst_input: format!("sizes {sizes:?}; {}", echo_inline(config)),
            })
        }
        Suite::Scaling => {
            let field = config.initial_field()?;
            let mut lines = Vec::new();
            let mut passed = true;
            for tau in SCALING_TAUS {
                let rep = scaling_covariance(&field, tau, SCALING_STEPS, config.cfl)?;
                passed &= rep.worst() <= SCALING_TOL;
                lines.push(scaling_line(&rep));
            }
            Ok(SuiteReport {
                suite,
                passed,
                lines,
                worst_input: echo_inline(config),
            })
        }
    }
}

fn scaling_line(rep: &ScalingReport) -> String {
    let per_order: Vec<String> = rep
        .max_relative
        .iter()
        .enumerate()
        .map(|(k, v)| format!("k={k}: {v:.2e}"))
        .collect();
    format!(
        "scaling tau = {}: D^k f~(y, r) vs tau^(1-k) (D^k f)(x, t) over {} steps, max relative deviation {}; |r - tau^2 t| {:.2e}; tolerance {SCALING_TOL:e}",
        rep.tau,
        rep.steps,
        per_order.join(", "),
        rep.time_mismatch
    )
}

fn report_suite(report: &SuiteReport, out: &mut dyn Write) -> Result<(), Failure> {
    for line in &report.lines {
        writeln!(out, "{line}")?;
    }
    writeln!(
        out,
        "{}: {}",
        report.suite,
        if report.passed { "PASS" } else { "FAIL" }
    )?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::check_failed(format!(
            "{} suite failed; worst input: {}",
            report.suite, report.worst_input
        )))
    }
}

pub fn cmd_verify(
    config: &RunConfig,
    suite: Suite,
    out: &mut dyn Write,
) -> Result<SuiteReport, Failure> {
    let report = run_suite(config, suite)?;
    report_suite(&report, out)?;
    Ok(report)
}

/// Scaling covariance for a single `tau`.
pub fn cmd_rescale_check(
    config: &RunConfig,
    tau: f64,
    out: &mut dyn Write,
) -> Result<ScalingReport, Failure> {
    let field: MapField = config.initial_field()?;
    let rep = scaling_covariance(&field, tau, SCALING_STEPS, config.cfl)?;
    let report = SuiteReport {
        suite: Suite::Scaling,
        passed: rep.worst() <= SCALING_TOL,
        lines: vec![scaling_line(&rep)],
        worst_input: format!("tau = {tau}; {}", echo_inline(config)),
    };
    report_suite(&report, out)?;
    Ok(rep)
}

#[derive(Serialize)]
struct FitOutput<'a> {
    #[serde(flatten)]
    fit: &'a DecayFit,
    pass: bool,
}

/// Fits `claim` on a diagnostics CSV and prints the fit as one JSON object.
pub fn cmd_fit(csv: &Path, claim: DecayClaim, out: &mut dyn Write) -> Result<DecayFit, Failure> {
    let file = File::open(csv)
        .map_err(|e| Failure::malformed(format!("cannot read {}: {e}", csv.display())))?;
    let records = read_diagnostics_csv(BufReader::new(file))?;
    let fit = fit_decay(&records, claim)?;
    let pass = fit.meets_acceptance();
    writeln!(
        out,
        "{}",
        serde_json::to_string(&FitOutput { fit: &fit, pass }).expect("fit serializes")
    )?;
    if pass {
        Ok(fit)
    } else {
        Err(Failure::check_failed(format!(
            "claim {claim:?} not met: slope {:.4}, scaled slope {:.4}, max scaled {:.4e} vs {:.4e} at window start",
            fit.slope, fit.scaled_slope, fit.max_scaled, fit.scaled_at_start
        )))
    }
}
