//! Desk-scale acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Takes a few minutes on one core.

use std::io::Write;
use std::path::{Path, PathBuf};

use graphflow_cli::{cmd_run, run_suite, RunConfig, RunSummary, Suite};
use graphflow_core::analysis::fit_decay;
use graphflow_core::flow::{
    shrinker_residual, step_rk, step_with_dt, sup_norm, translator_residual,
};
use graphflow_core::{
    DecayClaim, FlowState, Grid, InvariantReport, MapField, Perturbation, TranslatorSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS0_MIN: f64 = 0.3;
const TRACE_SLACK: f64 = 1e-3;
/// Second order with 20% slack.
const DEFICIT_MIN_RATIO: f64 = 3.2;
const DEFICIT_FLOOR: f64 = 1e-12;
const HEIGHT_STEP_TOL: f64 = 1e-10;
const HEIGHT_FINAL_FRACTION: f64 = 0.05;
const BERNSTEIN_TOL: f64 = 1e-12;
const BERNSTEIN_FAMILY: u64 = 100;
const BERNSTEIN_SEED: u64 = 20;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn report(o: &Outcome) {
    println!(
        "{} {} {}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.title,
        o.detail
    );
    let _ = std::io::stdout().flush();
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str, out: &Path) -> RunConfig {
    let mut c = RunConfig::load(&configs().join(name)).expect("acceptance config");
    c.output_dir = out.join(name.trim_end_matches(".toml"));
    c
}

fn run_at(config: &RunConfig, n: usize) -> RunSummary {
    let mut c = config.clone();
    c.n = n;
    c.output_dir = config.output_dir.join(format!("n{n}"));
    cmd_run(&c, &mut std::io::sink()).unwrap_or_else(|f| panic!("run at n = {n} failed: {f}"))
}

fn min_trace(s: &RunSummary) -> f64 {
    s.records
        .iter()
        .map(|r| r.min_tr_s)
        .fold(f64::INFINITY, f64::min)
}

fn deficit(s: &RunSummary) -> f64 {
    (s.eps0 - min_trace(s)).max(0.0)
}

fn a1(coarse: &RunSummary, fine: &RunSummary) -> Outcome {
    let eps0 = fine.eps0;
    let min_tr = min_trace(fine);
    let (d_coarse, d_fine) = (deficit(coarse), deficit(fine));
    let refines = (d_coarse <= DEFICIT_FLOOR && d_fine <= DEFICIT_FLOOR)
        || d_fine * DEFICIT_MIN_RATIO <= d_coarse;
    Outcome {
        id: "A1",
        title: "area-decreasing preservation",
        pass: eps0 >= EPS0_MIN && min_tr >= eps0 - TRACE_SLACK && refines,
        detail: format!(
            "eps0 = {eps0:.6} (need >= {EPS0_MIN}), min trS over run = {min_tr:.6} (need >= eps0 - {TRACE_SLACK:e}); \
             deficit eps0 - min trS at n={} {d_coarse:.2e}, n={} {d_fine:.2e} (need ratio >= {DEFICIT_MIN_RATIO} or both <= {DEFICIT_FLOOR:e})",
            coarse.n, fine.n
        ),
    }
}

fn a2(fine: &RunSummary) -> Outcome {
    let fit = fit_decay(&fine.records, DecayClaim::H2).expect("H2 fit");
    Outcome {
        id: "A2",
        title: "mean curvature decay",
        pass: fit.meets_acceptance(),
        detail: format!(
            "window [{}, {}], slope of sup|H|^2 = {:.3} (need <= -0.8), max t sup|H|^2 = {:.3e} vs {:.3e} at window start (need <= 2x)",
            fit.window.0, fit.window.1, fit.slope, fit.max_scaled, fit.scaled_at_start
        ),
    }
}

fn a3(fine: &RunSummary) -> Outcome {
    let d2 = fit_decay(&fine.records, DecayClaim::D2).expect("D2 fit");
    let d3 = fit_decay(&fine.records, DecayClaim::D3).expect("D3 fit");
    Outcome {
        id: "A3",
        title: "derivative decay",
        pass: d2.meets_acceptance() && d3.meets_acceptance(),
        detail: format!(
            "slope of t sup|D2f|^2 = {:.3}, of t^2 sup|D3f|^2 = {:.3} (need <= 0.1)",
            d2.scaled_slope, d3.scaled_slope
        ),
    }
}

/// Steps the height run directly so that every step is observed.
fn a4(config: &RunConfig) -> (Outcome, InvariantReport) {
    let field = config.initial_field().unwrap();
    let eps0 = graphflow_core::DiagnosticsRecord::measure(&field, 0.0)
        .unwrap()
        .min_tr_s;
    let eps_check = if eps0 > 0.0 { eps0 } else { f64::INFINITY };
    let h0 = field.height();
    let mut invariants = InvariantReport::measure(&field, eps_check).unwrap();
    let mut state = FlowState::new(field);
    let dt = config.cfl * state.field.grid().h().powi(2);
    let mut prev = h0;
    let mut worst_rise = f64::NEG_INFINITY;
    let mut worst_step = 0;
    while state.t < config.t_end {
        let remaining = config.t_end - state.t;
        state = if remaining <= dt * (1.0 + 1e-9) {
            let mut s = step_with_dt(&state, remaining).unwrap();
            s.t = config.t_end;
            s
        } else {
            step_rk(&state, config.cfl).unwrap()
        };
        let h = state.field.height();
        if h - prev > worst_rise {
            worst_rise = h - prev;
            worst_step = state.step;
        }
        prev = h;
        if state.step.is_multiple_of(config.cadence) || state.t == config.t_end {
            invariants.merge(&InvariantReport::measure(&state.field, eps_check).unwrap());
        }
    }
    let outcome = Outcome {
        id: "A4",
        title: "height estimate",
        pass: worst_rise <= HEIGHT_STEP_TOL && prev <= HEIGHT_FINAL_FRACTION * h0,
        detail: format!(
            "{} steps, largest per-step change of sup|f| = {worst_rise:.2e} at step {worst_step} (need <= {HEIGHT_STEP_TOL:e}); \
             sup|f| {h0:.4} -> {prev:.3e} = {:.2e} of initial (need <= {HEIGHT_FINAL_FRACTION})",
            state.step,
            prev / h0
        ),
    };
    (outcome, invariants)
}

fn a5(config: &RunConfig) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (tag, suite) in [
        ("a", Suite::Algebra),
        ("b", Suite::Gauss),
        ("c", Suite::Scaling),
        ("d", Suite::TraceEvolution),
    ] {
        let rep = run_suite(config, suite).unwrap_or_else(|f| panic!("suite {suite} errored: {f}"));
        pass &= rep.passed;
        for line in &rep.lines {
            println!("     ({tag}) {line}");
        }
        parts.push(format!(
            "({tag}) {suite} {}",
            if rep.passed { "pass" } else { "FAIL" }
        ));
    }
    Outcome {
        id: "A5",
        title: "identity suites",
        pass,
        detail: parts.join(", "),
    }
}

fn random_linear(rng: &mut ChaCha8Rng) -> [[f64; 2]; 2] {
    [
        [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
    ]
}

fn a6() -> Outcome {
    let grid = Grid::new(32, 2.0 * std::f64::consts::PI).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(BERNSTEIN_SEED);
    let mut shrinker_misclassified = 0;
    let mut translator_misclassified = 0;
    let mut largest_linear: f64 = 0.0;
    let mut smallest_perturbed = f64::INFINITY;
    for k in 0..BERNSTEIN_FAMILY {
        let m = random_linear(&mut rng);
        let linear = k % 2 == 0;
        let field: MapField = if linear {
            MapField::linear_map(grid, m)
        } else {
            let amplitude = rng.gen_range(0.05..0.3);
            Perturbation::RandomSmooth {
                amplitude,
                modes: 2,
            }
            .field(grid, m, k)
        };
        let r = sup_norm(&shrinker_residual(&field).unwrap());
        if (r <= BERNSTEIN_TOL) != linear {
            shrinker_misclassified += 1;
        }
        if linear {
            largest_linear = largest_linear.max(r);
            let d1 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let d2 = [
                m[0][0] * d1[0] + m[0][1] * d1[1],
                m[1][0] * d1[0] + m[1][1] * d1[1],
            ];
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let off = [d2[0] + 0.5 * angle.cos(), d2[1] + 0.5 * angle.sin()];
            let on = sup_norm(
                &translator_residual(
                    &field,
                    &TranslatorSpec {
                        xi: [d1[0], d1[1], d2[0], d2[1]],
                    },
                )
                .unwrap(),
            );
            let off = sup_norm(
                &translator_residual(
                    &field,
                    &TranslatorSpec {
                        xi: [d1[0], d1[1], off[0], off[1]],
                    },
                )
                .unwrap(),
            );
            if on > BERNSTEIN_TOL || off <= BERNSTEIN_TOL {
                translator_misclassified += 1;
            }
        } else {
            smallest_perturbed = smallest_perturbed.min(r);
        }
    }
    Outcome {
        id: "A6",
        title: "Bernstein desk checks",
        pass: shrinker_misclassified == 0 && translator_misclassified == 0,
        detail: format!(
            "{BERNSTEIN_FAMILY} maps (seed {BERNSTEIN_SEED}): shrinker residual <= {largest_linear:.1e} on linear maps, \
             >= {smallest_perturbed:.1e} on perturbed ones, {shrinker_misclassified} misclassified; \
             translator {translator_misclassified} misclassified (tolerance {BERNSTEIN_TOL:e})"
        ),
    }
}

fn a7(reports: &[InvariantReport]) -> Outcome {
    let mut worst = reports[0];
    for r in &reports[1..] {
        worst.merge(r);
    }
    let violations = worst.violations();
    Outcome {
        id: "A7",
        title: "structural invariants",
        pass: violations.is_empty(),
        detail: format!(
            "over every emitted state: max |u^2 det g - 1| = {:.1e}, max |H|^2 - 2|A|^2 = {:.1e}, max eps0/2 - u = {:.1e}, \
             max (1+lambda^2) trS/2 - 1 = {:.1e}{}",
            worst.jacobian,
            worst.mean_curvature_excess,
            worst.jacobian_shortfall,
            worst.singular_value_excess,
            if violations.is_empty() { String::new() } else { format!("; {}", violations.join("; ")) }
        ),
    }
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let a1_config = load("a1.toml", scratch.path());
    let a4_config = load("a4.toml", scratch.path());
    println!("acceptance: outputs under {}", scratch.path().display());

    let mut outcomes = Vec::new();
    let coarse = run_at(&a1_config, a1_config.n / 2);
    let fine = run_at(&a1_config, a1_config.n);
    for o in [a1(&coarse, &fine), a2(&fine), a3(&fine)] {
        report(&o);
        outcomes.push(o);
    }
    let (o4, height_invariants) = a4(&a4_config);
    report(&o4);
    outcomes.push(o4);
    for o in [a5(&a1_config), a6()] {
        report(&o);
        outcomes.push(o);
    }
    let o7 = a7(&[coarse.invariants, fine.invariants, height_invariants]);
    report(&o7);
    outcomes.push(o7);

    let failed: Vec<_> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", outcomes.len());
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        std::process::exit(1);
    }
}
