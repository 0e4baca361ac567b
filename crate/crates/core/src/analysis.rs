//! Diagnostics, decay fits and checks of the `tr(s)` evolution identities.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{fmt_f64, MapField};
use crate::flow::{graph_velocity, step_with_dt, FlowState};
use crate::geometry::{FrameCoefficients, GeomPoint};
use crate::linalg::{det, frobenius2, Vec2, ZERO};

/// Per-time scalar reductions of the evolving map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub min_tr_s: f64,
    pub sup_h2: f64,
    pub sup_a2: f64,
    /// Squared sup norms of `D^k f` for `k = 1, 2, 3`.
    pub sup_dkf2: [f64; 3],
    /// `sup |p|`; equals `sup |f|` when the linear part vanishes.
    pub height: f64,
    pub height_is_perturbation: bool,
    pub min_u: f64,
}

pub const DIAGNOSTICS_HEADER: [&str; 9] = [
    "t", "min_trS", "sup_H2", "sup_A2", "sup_D1f2", "sup_D2f2", "sup_D3f2", "height", "min_u",
];

impl DiagnosticsRecord {
    pub fn measure(field: &MapField, t: f64) -> Result<Self> {
        field.validate()?;
        let n = field.grid().n();
        let mut rec = Self {
            t,
            min_tr_s: f64::INFINITY,
            sup_h2: 0.0,
            sup_a2: 0.0,
            sup_dkf2: [0.0; 3],
            height: field.height(),
            height_is_perturbation: *field.linear() != ZERO,
            min_u: f64::INFINITY,
        };
        for i in 0..n {
            for j in 0..n {
                let jet = field.sample_jet(i, j)?;
                let geom = GeomPoint::from_jet(&jet)?;
                rec.min_tr_s = rec.min_tr_s.min(geom.tr_s);
                rec.min_u = rec.min_u.min(geom.u);
                rec.sup_h2 = rec.sup_h2.max(geom.norm_h2);
                rec.sup_a2 = rec.sup_a2.max(geom.norm_a2);
                let d = &jet.d2f;
                let d2 = (0..2)
                    .map(|k| d[0][0][k].powi(2) + 2.0 * d[0][1][k].powi(2) + d[1][1][k].powi(2))
                    .sum();
                rec.sup_dkf2[0] = rec.sup_dkf2[0].max(frobenius2(&jet.df));
                rec.sup_dkf2[1] = rec.sup_dkf2[1].max(d2);
                rec.sup_dkf2[2] = rec.sup_dkf2[2].max(field.derivative_norm2(3, i, j)?);
            }
        }
        Ok(rec)
    }

    fn row(&self) -> [f64; 9] {
        [
            self.t,
            self.min_tr_s,
            self.sup_h2,
            self.sup_a2,
            self.sup_dkf2[0],
            self.sup_dkf2[1],
            self.sup_dkf2[2],
            self.height,
            self.min_u,
        ]
    }
}

/// Writes diagnostics as CSV. Each entry of `preamble` becomes a `# ` comment
/// line ahead of the column header.
pub fn write_diagnostics_csv<W: Write>(
    records: &[DiagnosticsRecord],
    preamble: &[String],
    out: W,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    if records.iter().any(|r| r.height_is_perturbation) {
        writeln!(out, "# height=perturbation")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DIAGNOSTICS_HEADER)?;
    for r in records {
        w.write_record(r.row().iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a diagnostics CSV written by [`write_diagnostics_csv`].
pub fn read_diagnostics_csv<R: Read>(input: R) -> Result<Vec<DiagnosticsRecord>> {
    let bad = |detail: String| Error::Malformed {
        what: "diagnostics CSV",
        detail,
    };
    let mut text = String::new();
    std::io::BufReader::new(input).read_to_string(&mut text)?;
    let perturbation_height = text.lines().any(|l| l.trim() == "# height=perturbation");
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(DIAGNOSTICS_HEADER.iter().copied()) {
        return Err(bad(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result.map_err(|e| bad(e.to_string()))?;
        let mut v = [0.0; 9];
        for (k, cell) in rec.iter().enumerate() {
            v[k] = cell.parse::<f64>().map_err(|_| {
                bad(format!(
                    "row {}: bad value {cell:?} in column {}",
                    row + 1,
                    DIAGNOSTICS_HEADER[k]
                ))
            })?;
        }
        records.push(DiagnosticsRecord {
            t: v[0],
            min_tr_s: v[1],
            sup_h2: v[2],
            sup_a2: v[3],
            sup_dkf2: [v[4], v[5], v[6]],
            height: v[7],
            height_is_perturbation: perturbation_height,
            min_u: v[8],
        });
    }
    if records.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(records)
}

/// Worst pointwise violations of the structural invariants of a graph state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantReport {
    /// `max |u² det g̃ - 1|`.
    pub jacobian: f64,
    /// `max (|H|² - 2|A|²)`, negative when the bound holds everywhere.
    pub mean_curvature_excess: f64,
    /// `max (ε₀/2 - u)` over points with `tr(s) >= ε₀`.
    pub jacobian_shortfall: f64,
    /// `max ((1 + λ_i²) tr(s)/2 - 1)` over points with `tr(s) > 0`.
    pub singular_value_excess: f64,
    pub min_u: f64,
    pub min_tr_s: f64,
}

impl InvariantReport {
    pub const JACOBIAN_TOL: f64 = 1e-12;
    pub const CURVATURE_TOL: f64 = 1e-10;
    pub const SINGULAR_VALUE_TOL: f64 = 1e-12;

    pub fn measure(field: &MapField, eps0: f64) -> Result<Self> {
        let n = field.grid().n();
        let mut rep = Self {
            jacobian: 0.0,
            mean_curvature_excess: f64::NEG_INFINITY,
            jacobian_shortfall: f64::NEG_INFINITY,
            singular_value_excess: f64::NEG_INFINITY,
            min_u: f64::INFINITY,
            min_tr_s: f64::INFINITY,
        };
        for i in 0..n {
            for j in 0..n {
                let geom = GeomPoint::from_jet(&field.sample_jet(i, j)?)?;
                rep.jacobian = rep
                    .jacobian
                    .max((geom.u * geom.u * det(&geom.g) - 1.0).abs());
                rep.mean_curvature_excess = rep
                    .mean_curvature_excess
                    .max(geom.norm_h2 - 2.0 * geom.norm_a2);
                if geom.tr_s >= eps0 {
                    rep.jacobian_shortfall = rep.jacobian_shortfall.max(0.5 * eps0 - geom.u);
                }
                if geom.tr_s > 0.0 {
                    for l in geom.sv.lambda {
                        rep.singular_value_excess = rep
                            .singular_value_excess
                            .max((1.0 + l * l) * geom.tr_s / 2.0 - 1.0);
                    }
                }
                rep.min_u = rep.min_u.min(geom.u);
                rep.min_tr_s = rep.min_tr_s.min(geom.tr_s);
            }
        }
        Ok(rep)
    }

    /// Combines the worst cases of two reports.
    pub fn merge(&mut self, other: &Self) {
        self.jacobian = self.jacobian.max(other.jacobian);
        self.mean_curvature_excess = self.mean_curvature_excess.max(other.mean_curvature_excess);
        self.jacobian_shortfall = self.jacobian_shortfall.max(other.jacobian_shortfall);
        self.singular_value_excess = self.singular_value_excess.max(other.singular_value_excess);
        self.min_u = self.min_u.min(other.min_u);
        self.min_tr_s = self.min_tr_s.min(other.min_tr_s);
    }

    /// Descriptions of every violated invariant; empty when all hold.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.min_u > 0.0) {
            out.push(format!("graph property lost: min u = {}", self.min_u));
        }
        if !(self.jacobian <= Self::JACOBIAN_TOL) {
            out.push(format!("u^2 det g = 1 violated by {}", self.jacobian));
        }
        if !(self.mean_curvature_excess <= Self::CURVATURE_TOL) {
            out.push(format!(
                "|H|^2 <= 2|A|^2 violated by {}",
                self.mean_curvature_excess
            ));
        }
        if !(self.jacobian_shortfall <= 0.0) && self.jacobian_shortfall.is_finite() {
            out.push(format!(
                "u >= eps0/2 violated by {}",
                self.jacobian_shortfall
            ));
        }
        if !(self.singular_value_excess <= Self::SINGULAR_VALUE_TOL)
            && self.singular_value_excess.is_finite()
        {
            out.push(format!(
                "1 + lambda^2 <= 2/tr(s) violated by relative {}",
                self.singular_value_excess
            ));
        }
        out
    }
}

/// Singular values and adapted-frame second fundamental form at a point:
/// the inputs of the trace identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgebraicState {
    pub lambda: [f64; 2],
    /// `a[m][i][j] = A^m_{ij}`, symmetric in `i, j`.
    pub a: [[[f64; 2]; 2]; 2],
}

impl AlgebraicState {
    pub fn from_geom(geom: &GeomPoint) -> Self {
        Self {
            lambda: geom.sv.lambda,
            a: geom.a,
        }
    }

    pub fn norm_a2(&self) -> f64 {
        self.a.iter().flatten().flatten().map(|v| v * v).sum()
    }

    pub fn trace_s(&self) -> f64 {
        FrameCoefficients::from_lambda(self.lambda).trace()
    }

    /// Random state with `λ_1 <= λ_2` in `[0, 3]`, `λ_1 λ_2 < 1` and
    /// symmetric components uniform in `[-1, 1]`.
    pub fn random_area_decreasing<R: Rng>(rng: &mut R) -> Self {
        let lambda = loop {
            let (x, y): (f64, f64) = (rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
            if x * y < 1.0 {
                break [x.min(y), x.max(y)];
            }
        };
        let mut a = [[[0.0; 2]; 2]; 2];
        for m in 0..2 {
            a[m][0][0] = rng.gen_range(-1.0..1.0);
            a[m][1][1] = rng.gen_range(-1.0..1.0);
            let mixed = rng.gen_range(-1.0..1.0);
            a[m][0][1] = mixed;
            a[m][1][0] = mixed;
        }
        Self { lambda, a }
    }
}

/// Components of `∇ tr(s)` in the frame `e_i`:
/// `-4 Σ_k A^k_{ik} λ_k/(1+λ_k²)`.
pub fn grad_trace_from_a(st: &AlgebraicState) -> Vec2 {
    let rho = FrameCoefficients::from_lambda(st.lambda).rho;
    std::array::from_fn(|i| -2.0 * (0..2).map(|k| st.a[k][i][k] * rho[k]).sum::<f64>())
}

/// `2 Σ_{k,l,m} (A^m_{kl})² (σ_m + σ_k)`.
pub fn trace_rhs_corollary(st: &AlgebraicState) -> f64 {
    let sigma = FrameCoefficients::from_lambda(st.lambda).sigma;
    let mut acc = 0.0;
    for m in 0..2 {
        for k in 0..2 {
            for l in 0..2 {
                acc += st.a[m][k][l].powi(2) * (sigma[m] + sigma[k]);
            }
        }
    }
    2.0 * acc
}

/// The three summands of [`trace_rhs_lemma`]:
/// `2|A|² tr(s)`, `-|∇tr(s)|²/(2 tr(s))` and `(2/tr(s)) Σ_k (ρ_2 A^1_{1k} + ρ_1 A^2_{2k})²`.
pub fn trace_rhs_lemma_terms(st: &AlgebraicState) -> Result<[f64; 3]> {
    let coeff = FrameCoefficients::from_lambda(st.lambda);
    let tr = coeff.trace();
    if !(tr > 0.0) {
        return Err(Error::OutsideAreaDecreasing(tr));
    }
    let grad = grad_trace_from_a(st);
    let rho = coeff.rho;
    let cross: f64 = (0..2)
        .map(|k| (rho[1] * st.a[0][0][k] + rho[0] * st.a[1][1][k]).powi(2))
        .sum();
    Ok([
        2.0 * st.norm_a2() * tr,
        -0.5 * (grad[0] * grad[0] + grad[1] * grad[1]) / tr,
        2.0 * cross / tr,
    ])
}

/// Right-hand side of `(∂_t - Δ) tr(s)` in the form valid for `tr(s) > 0`.
pub fn trace_rhs_lemma(st: &AlgebraicState) -> Result<f64> {
    Ok(trace_rhs_lemma_terms(st)?.iter().sum())
}

/// Worst disagreement between the two forms of the trace identity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlgebraReport {
    pub count: usize,
    /// `|lemma - corollary|` relative to the sum of the magnitudes of the
    /// lemma's summands.
    pub max_relative: f64,
    pub worst: AlgebraicState,
}

/// Compares both forms of the trace identity on `count` seeded random
/// area-decreasing states.
pub fn verify_algebra(seed: u64, count: usize) -> Result<AlgebraReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AlgebraReport {
        count,
        max_relative: 0.0,
        worst: AlgebraicState {
            lambda: [0.0; 2],
            a: [[[0.0; 2]; 2]; 2],
        },
    };
    for _ in 0..count {
        let st = AlgebraicState::random_area_decreasing(&mut rng);
        let terms = trace_rhs_lemma_terms(&st)?;
        let lemma: f64 = terms.iter().sum();
        let scale: f64 = terms
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        let rel = (lemma - trace_rhs_corollary(&st)).abs() / scale;
        if rel >= report.max_relative {
            report.max_relative = rel;
            report.worst = st;
        }
    }
    Ok(report)
}

/// Whether the trace-evolution check accounts for the tangential part of
/// the graphical velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// Adds `V^i ∂_i tr(s)`, converting the flow-parametrized identity to
    /// graph coordinates.
    Corrected,
    /// Omits the advection term. The residual does not vanish.
    Uncorrected,
}

#[derive(Debug, Clone)]
pub struct TraceEvolutionResidual {
    /// Pointwise residual at the middle probe time, row-major.
    pub residual: Vec<f64>,
    pub max: f64,
    /// Time at which the residual is evaluated.
    pub t: f64,
}

/// Checks `∂_t tr(s) = Δ_g tr(s) + RHS + V^i ∂_i tr(s)` pointwise.
///
/// Takes two probe steps of length `dt_probe` from `state` (subdivided to
/// stay below the stability limit), differences `tr(s)` centrally in time
/// and evaluates every spatial term at the middle state.
pub fn verify_trace_evolution(
    state: &FlowState,
    dt_probe: f64,
    gauge: Gauge,
) -> Result<TraceEvolutionResidual> {
    if !(dt_probe > 0.0 && dt_probe.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt_probe = {dt_probe} must be positive"
        )));
    }
    let h = state.field.grid().h();
    let substeps = (dt_probe / (0.2 * h * h)).ceil().max(1.0) as usize;
    let advance = |s: &FlowState| -> Result<FlowState> {
        let mut s = s.clone();
        for _ in 0..substeps {
            s = step_with_dt(&s, dt_probe / substeps as f64)?;
        }
        Ok(s)
    };
    let mid = advance(state)?;
    let end = advance(&mid)?;
    let dt = (end.t - state.t) / 2.0;

    let before = trace_field(&state.field)?;
    let after = trace_field(&end.field)?;

    let field = &mid.field;
    let grid = *field.grid();
    let n = grid.n();
    let mut tr = Vec::with_capacity(grid.len());
    let mut geoms = Vec::with_capacity(grid.len());
    let mut velocity = Vec::with_capacity(grid.len());
    for i in 0..n {
        for j in 0..n {
            let jet = field.sample_jet(i, j)?;
            let geom = GeomPoint::from_jet(&jet)?;
            tr.push(geom.tr_s);
            velocity.push(graph_velocity(&jet));
            geoms.push((geom, jet.df));
        }
    }

    // flux q^i = sqrt(det g) g^{ij} ∂_j tr(s), and V^j ∂_j tr(s)
    let mut flux = [
        Vec::with_capacity(grid.len()),
        Vec::with_capacity(grid.len()),
    ];
    let mut advection = Vec::with_capacity(grid.len());
    for i in 0..n {
        for j in 0..n {
            let idx = grid.index(i, j);
            let (geom, df) = &geoms[idx];
            let grad = [
                grid.partial_scalar(&tr, 1, 0, i, j),
                grid.partial_scalar(&tr, 0, 1, i, j),
            ];
            let root = det(&geom.g).sqrt();
            for d in 0..2 {
                flux[d].push(root * (geom.g_inv[d][0] * grad[0] + geom.g_inv[d][1] * grad[1]));
            }
            let vel = velocity[idx];
            let tangential: Vec2 = std::array::from_fn(|q| vel[0] * df[0][q] + vel[1] * df[1][q]);
            let v: Vec2 = std::array::from_fn(|d| {
                geom.g_inv[d][0] * tangential[0] + geom.g_inv[d][1] * tangential[1]
            });
            advection.push(v[0] * grad[0] + v[1] * grad[1]);
        }
    }

    let mut residual = Vec::with_capacity(grid.len());
    for i in 0..n {
        for j in 0..n {
            let idx = grid.index(i, j);
            let (geom, _) = &geoms[idx];
            let div = grid.partial_scalar(&flux[0], 1, 0, i, j)
                + grid.partial_scalar(&flux[1], 0, 1, i, j);
            let laplacian = div / det(&geom.g).sqrt();
            let source = trace_rhs_lemma(&AlgebraicState::from_geom(geom))?;
            let dt_tr = (after[idx] - before[idx]) / (2.0 * dt);
            let mut r = dt_tr - laplacian - source;
            if gauge == Gauge::Corrected {
                r -= advection[idx];
            }
            residual.push(r.abs());
        }
    }
    let max = residual.iter().copied().fold(0.0, f64::max);
    Ok(TraceEvolutionResidual {
        residual,
        max,
        t: mid.t,
    })
}

/// `tr(s)` at every grid point, row-major.
pub fn trace_field(field: &MapField) -> Result<Vec<f64>> {
    let n = field.grid().n();
    let mut out = Vec::with_capacity(field.grid().len());
    for i in 0..n {
        for j in 0..n {
            out.push(crate::geometry::trace_s(&field.sample_jet(i, j)?.df)?);
        }
    }
    Ok(out)
}

/// Worst deviation from parabolic covariance along a pair of runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingReport {
    pub tau: f64,
    pub steps: u64,
    /// `sup |D^k f̃(y, r) - τ^{1-k} D^k f(x, t)| / max(1, sup |τ^{1-k} D^k f(x, t)|)`
    /// for `k = 0..=4`, sups over the grid, worst over the steps.
    pub max_relative: [f64; 5],
    /// `max |r - τ² t| / max(1, τ² t)`.
    pub time_mismatch: f64,
}

impl ScalingReport {
    pub fn worst(&self) -> f64 {
        self.max_relative
            .iter()
            .copied()
            .fold(self.time_mismatch, f64::max)
    }
}

/// Rescales `field` about grid point `(0, 0)` by `tau`, evolves the original
/// and the rescaled map side by side for `steps` steps at the same `cfl`
/// and compares `D^k f̃(y, r)` with `τ^{1-k} D^k f(x, t)`.
pub fn scaling_covariance(
    field: &MapField,
    tau: f64,
    steps: u64,
    cfl: f64,
) -> Result<ScalingReport> {
    let spec = crate::flow::RescaleSpec::at_grid_point(field, tau, 0, 0, 0.0);
    let (scaled, r0) = crate::flow::rescale(field, 0.0, &spec)?;
    let mut orig = FlowState::new(field.clone());
    let mut resc = FlowState::at_time(scaled, r0);
    let mut report = ScalingReport {
        tau,
        steps,
        max_relative: [0.0; 5],
        time_mismatch: 0.0,
    };
    for step in 0..=steps {
        if step > 0 {
            orig = crate::flow::step_rk(&orig, cfl)?;
            resc = crate::flow::step_rk(&resc, cfl)?;
        }
        let target_t = tau * tau * orig.t;
        report.time_mismatch = report
            .time_mismatch
            .max((resc.t - target_t).abs() / target_t.max(1.0));
        compare_scaled(&orig.field, &resc.field, &spec, &mut report.max_relative)?;
    }
    Ok(report)
}

fn compare_scaled(
    f: &MapField,
    g: &MapField,
    spec: &crate::flow::RescaleSpec,
    worst: &mut [f64; 5],
) -> Result<()> {
    let n = f.grid().n();
    let tau = spec.tau;
    let m = f.linear();
    let mut diff = [0.0f64; 5];
    let mut size = [0.0f64; 5];
    let mut record = |k: usize, got: f64, want: f64| {
        diff[k] = diff[k].max((got - want).abs());
        size[k] = size[k].max(want.abs());
    };
    for i in 0..n {
        for j in 0..n {
            // the rescaled grid is anchored at (0, 0), so indices coincide
            let fv = f.value(i, j);
            let gv = g.value(i, j);
            for c in 0..2 {
                record(0, gv[c], tau * (fv[c] - spec.f0[c]));
            }
            for k in 1..=4 {
                let scale = tau.powi(1 - k as i32);
                for a in 0..=k {
                    let (fd, gd) = (f.partial(a, k - a, i, j), g.partial(a, k - a, i, j));
                    for c in 0..2 {
                        let linear = if k == 1 { m[c][1 - a] } else { 0.0 };
                        record(k, gd[c] + linear, scale * (fd[c] + linear));
                    }
                }
            }
        }
    }
    for k in 0..5 {
        worst[k] = worst[k].max(diff[k] / size[k].max(1.0));
    }
    Ok(())
}

/// Decay claims that can be fitted from a diagnostics series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayClaim {
    /// `t |H|² <= C`.
    H2,
    /// `t sup |D²f|² <= C`.
    D2,
    /// `t² sup |D³f|² <= C`.
    D3,
}

impl DecayClaim {
    /// Power of `t` in the scaled quantity.
    pub fn power(self) -> i32 {
        match self {
            DecayClaim::H2 | DecayClaim::D2 => 1,
            DecayClaim::D3 => 2,
        }
    }

    pub fn quantity(self, rec: &DiagnosticsRecord) -> f64 {
        match self {
            DecayClaim::H2 => rec.sup_h2,
            DecayClaim::D2 => rec.sup_dkf2[1],
            DecayClaim::D3 => rec.sup_dkf2[2],
        }
    }
}

impl std::str::FromStr for DecayClaim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H2" => Ok(DecayClaim::H2),
            "D2" => Ok(DecayClaim::D2),
            "D3" => Ok(DecayClaim::D3),
            other => Err(Error::InvalidArgument(format!(
                "unknown claim {other:?}, expected H2, D2 or D3"
            ))),
        }
    }
}

/// Least-squares power law fitted over the last decade of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub claim: DecayClaim,
    /// Slope of `log q` against `log t`.
    pub slope: f64,
    pub intercept: f64,
    /// Slope of the scaled quantity `t^power q`, i.e. `slope + power`.
    pub scaled_slope: f64,
    pub window: (f64, f64),
    /// Maximum of `t^power q` over the window.
    pub max_scaled: f64,
    /// `t^power q` at the first record of the window.
    pub scaled_at_start: f64,
    pub points: usize,
}

impl DecayFit {
    /// Slope bound for `sup |H|²`.
    pub const H2_MAX_SLOPE: f64 = -0.8;
    /// Allowed growth of `t |H|²` over the window relative to its start.
    pub const H2_MAX_GROWTH: f64 = 2.0;
    /// Trend bound for the scaled derivative norms.
    pub const SCALED_MAX_SLOPE: f64 = 0.1;

    pub fn meets_acceptance(&self) -> bool {
        match self.claim {
            DecayClaim::H2 => {
                self.slope <= Self::H2_MAX_SLOPE
                    && self.max_scaled <= Self::H2_MAX_GROWTH * self.scaled_at_start
            }
            DecayClaim::D2 | DecayClaim::D3 => self.scaled_slope <= Self::SCALED_MAX_SLOPE,
        }
    }
}

/// Fits `log q = slope log t + intercept` over `[t_end/10, t_end]`.
pub fn fit_decay(series: &[DiagnosticsRecord], claim: DecayClaim) -> Result<DecayFit> {
    let last = series
        .last()
        .ok_or_else(|| Error::InsufficientHorizon("empty series".into()))?;
    let t_hi = last.t;
    let t_lo = t_hi / 10.0;
    if !(t_hi > 0.0) || series[0].t > t_lo {
        return Err(Error::InsufficientHorizon(format!(
            "series covers [{}, {}], fit window needs data from t_end/10 = {}",
            series[0].t, t_hi, t_lo
        )));
    }
    let window: Vec<(f64, f64)> = series
        .iter()
        .filter(|r| r.t >= t_lo && r.t > 0.0)
        .map(|r| (r.t, claim.quantity(r)))
        .collect();
    let logs: Vec<(f64, f64)> = window
        .iter()
        .filter(|(_, q)| *q > 0.0)
        .map(|(t, q)| (t.ln(), q.ln()))
        .collect();
    if logs.len() < 2 {
        return Err(Error::InsufficientHorizon(format!(
            "{} positive samples in [{t_lo}, {t_hi}], need at least 2",
            logs.len()
        )));
    }
    let count = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientHorizon(
            "all samples at the same time".into(),
        ));
    }
    let slope = sxy / sxx;
    let power = claim.power();
    let scaled = |(t, q): &(f64, f64)| t.powi(power) * q;
    Ok(DecayFit {
        claim,
        slope,
        intercept: mean_y - slope * mean_x,
        scaled_slope: slope + power as f64,
        window: (t_lo, t_hi),
        max_scaled: window.iter().map(scaled).fold(0.0, f64::max),
        scaled_at_start: scaled(&window[0]),
        points: logs.len(),
    })
}
