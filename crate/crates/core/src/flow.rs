//! Explicit integration of the non-parametric mean curvature flow
//! `∂_t f = g̃^{ij} ∂²_{ij} f`, parabolic rescaling and soliton residuals.

use crate::analysis::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::fields::{Grid, JetPoint, MapField};
use crate::linalg::{mat_vec, Vec2, Vec4};

/// Default CFL number; `dt = cfl * h²`.
pub const DEFAULT_CFL: f64 = 0.2;

/// `g̃^{ij} ∂²_{ij} f` for one jet, with `g̃ = I + DfᵀDf`.
#[inline]
pub fn graph_velocity(jet: &JetPoint) -> Vec2 {
    let df = &jet.df;
    let g11 = 1.0 + df[0][0] * df[0][0] + df[1][0] * df[1][0];
    let g12 = df[0][0] * df[0][1] + df[1][0] * df[1][1];
    let g22 = 1.0 + df[0][1] * df[0][1] + df[1][1] * df[1][1];
    let inv_det = 1.0 / (g11 * g22 - g12 * g12);
    let (i11, i12, i22) = (g22 * inv_det, -g12 * inv_det, g11 * inv_det);
    let d = &jet.d2f;
    [
        i11 * d[0][0][0] + 2.0 * i12 * d[0][1][0] + i22 * d[1][1][0],
        i11 * d[0][0][1] + 2.0 * i12 * d[0][1][1] + i22 * d[1][1][1],
    ]
}

/// Right-hand side of the flow at every grid point, row-major.
///
/// Second derivatives of `M x` vanish, so this is also the time derivative
/// of the perturbation alone.
pub fn rhs(field: &MapField) -> Result<Vec<Vec2>> {
    let n = field.grid().n();
    let mut out = Vec::with_capacity(field.grid().len());
    for i in 0..n {
        for j in 0..n {
            let v = graph_velocity(&field.jet_unchecked(i, j));
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(field.corrupt_near(i, j));
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Integrator state: the map `f_t` and its time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub field: MapField,
    pub t: f64,
    pub step: u64,
    pub dt_last: f64,
}

impl FlowState {
    pub fn new(field: MapField) -> Self {
        Self {
            field,
            t: 0.0,
            step: 0,
            dt_last: 0.0,
        }
    }

    pub fn at_time(field: MapField, t: f64) -> Self {
        Self {
            field,
            t,
            step: 0,
            dt_last: 0.0,
        }
    }
}

fn axpy(base: &[Vec2], scale: f64, dir: &[Vec2]) -> Vec<Vec2> {
    base.iter()
        .zip(dir)
        .map(|(b, d)| [b[0] + scale * d[0], b[1] + scale * d[1]])
        .collect()
}

/// One classical RK4 step of size `cfl * h²`.
pub fn step_rk(state: &FlowState, cfl: f64) -> Result<FlowState> {
    if !(cfl > 0.0 && cfl <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "cfl = {cfl} must lie in (0, 0.5]"
        )));
    }
    let h = state.field.grid().h();
    step_with_dt(state, cfl * h * h)
}

/// One classical RK4 step of the given size.
pub fn step_with_dt(state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} must be positive"
        )));
    }
    state.field.validate()?;
    let next_step = state.step + 1;
    let blow_up = |_| Error::BlowUp {
        step: next_step,
        t: state.t,
    };

    let grid = *state.field.grid();
    let linear = *state.field.linear();
    let stage = |p: Vec<Vec2>| MapField::new(grid, linear, p).and_then(|f| rhs(&f));

    let p0 = state.field.perturbation();
    let k1 = rhs(&state.field).map_err(blow_up)?;
    let k2 = stage(axpy(p0, 0.5 * dt, &k1)).map_err(blow_up)?;
    let k3 = stage(axpy(p0, 0.5 * dt, &k2)).map_err(blow_up)?;
    let k4 = stage(axpy(p0, dt, &k3)).map_err(blow_up)?;

    let w = dt / 6.0;
    let mut next = Vec::with_capacity(p0.len());
    for idx in 0..p0.len() {
        let mut v = p0[idx];
        for k in 0..2 {
            v[k] += w * (k1[idx][k] + 2.0 * k2[idx][k] + 2.0 * k3[idx][k] + k4[idx][k]);
        }
        if !(v[0].is_finite() && v[1].is_finite()) {
            return Err(Error::BlowUp {
                step: next_step,
                t: state.t + dt,
            });
        }
        next.push(v);
    }
    Ok(FlowState {
        field: MapField::new(grid, linear, next)?,
        t: state.t + dt,
        step: next_step,
        dt_last: dt,
    })
}

/// Parameters of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams {
    pub t_end: f64,
    /// Diagnostics are emitted every `cadence` steps, plus at the start and end.
    pub cadence: u64,
    pub cfl: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: FlowState,
    pub records: Vec<DiagnosticsRecord>,
}

/// A run that stopped early. Carries the diagnostics gathered so far and
/// the last state that was successfully reached.
#[derive(Debug)]
pub struct RunAbort {
    pub error: Error,
    pub records: Vec<DiagnosticsRecord>,
    pub last_state: Box<FlowState>,
}

impl std::fmt::Display for RunAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (after {} diagnostics records)",
            self.error,
            self.records.len()
        )
    }
}

impl std::error::Error for RunAbort {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Advances `state` to `params.t_end`, emitting diagnostics.
pub fn run(state: FlowState, params: &RunParams) -> std::result::Result<RunOutput, RunAbort> {
    run_observed(state, params, |_, _| Ok(()))
}

/// Like [`run`], calling `observer` on every emitted state. An observer
/// error aborts the run.
pub fn run_observed(
    state: FlowState,
    params: &RunParams,
    mut observer: impl FnMut(&FlowState, &DiagnosticsRecord) -> Result<()>,
) -> std::result::Result<RunOutput, RunAbort> {
    let mut records = Vec::new();
    let abort = |error, records, last_state| {
        Err(RunAbort {
            error,
            records,
            last_state: Box::new(last_state),
        })
    };

    if !(params.t_end > state.t) {
        let e = Error::InvalidArgument(format!(
            "t_end = {} must exceed t = {}",
            params.t_end, state.t
        ));
        return abort(e, records, state);
    }
    if params.cadence == 0 {
        return abort(
            Error::InvalidArgument("cadence must be at least 1".into()),
            records,
            state,
        );
    }
    if !(params.cfl > 0.0 && params.cfl <= 0.5) {
        let e = Error::InvalidArgument(format!("cfl = {} must lie in (0, 0.5]", params.cfl));
        return abort(e, records, state);
    }

    let mut emit = |s: &FlowState, records: &mut Vec<DiagnosticsRecord>| -> Result<()> {
        let rec = DiagnosticsRecord::measure(&s.field, s.t)?;
        observer(s, &rec)?;
        records.push(rec);
        Ok(())
    };

    if let Err(e) = emit(&state, &mut records) {
        return abort(e, records, state);
    }
    let h = state.field.grid().h();
    let dt = params.cfl * h * h;
    let mut current = state;
    loop {
        let remaining = params.t_end - current.t;
        // land exactly on t_end; absorb a sliver into the final step
        let last = remaining <= dt * (1.0 + 1e-9);
        let step_dt = if last { remaining } else { dt };
        let mut next = match step_with_dt(&current, step_dt) {
            Ok(s) => s,
            Err(e) => return abort(e, records, current),
        };
        if last {
            next.t = params.t_end;
        }
        if last || next.step % params.cadence == 0 {
            if let Err(e) = emit(&next, &mut records) {
                return abort(e, records, next);
            }
        }
        current = next;
        if last {
            break;
        }
    }
    Ok(RunOutput {
        state: current,
        records,
    })
}

/// Parabolic scaling `y = τ(x - x₀)`, `r = τ²(t - t₀)`, `f̃ = τ(f - f₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleSpec {
    pub tau: f64,
    /// Base point; must be a grid point.
    pub x0: Vec2,
    pub t0: f64,
    /// Value subtracted from `f`, usually `f(x₀, t₀)`.
    pub f0: Vec2,
}

impl RescaleSpec {
    /// Scaling at grid point `(i, j)` with `f₀ = f(x₀)`.
    pub fn at_grid_point(field: &MapField, tau: f64, i: usize, j: usize, t0: f64) -> Self {
        Self {
            tau,
            x0: field.grid().position(i, j),
            t0,
            f0: field.value(i, j),
        }
    }
}

/// Realizes the parabolically scaled map on a grid with spacing `τh` and
/// period `τL`. Grid point `(a, b)` of the result corresponds to
/// `(i₀ + a, j₀ + b)` of the input. Returns the field and the scaled time.
pub fn rescale(field: &MapField, t: f64, spec: &RescaleSpec) -> Result<(MapField, f64)> {
    if !(spec.tau > 0.0 && spec.tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau = {} must be positive",
            spec.tau
        )));
    }
    let grid = field.grid();
    let h = grid.h();
    let mut base = [0usize; 2];
    for d in 0..2 {
        let k = (spec.x0[d] / h).round();
        if (spec.x0[d] - k * h).abs() > 1e-9 * h.max(spec.x0[d].abs()) {
            return Err(Error::InvalidArgument(format!(
                "x0 = {:?} is not a grid point",
                spec.x0
            )));
        }
        base[d] = grid.wrap_any(k as isize);
    }
    let tau = spec.tau;
    let n = grid.n();
    let m = *field.linear();
    let mx0 = mat_vec(&m, &spec.x0);
    let shift = [mx0[0] - spec.f0[0], mx0[1] - spec.f0[1]];
    let scaled_grid = Grid::new(n, tau * grid.period())?;
    let mut p = Vec::with_capacity(grid.len());
    for a in 0..n {
        for b in 0..n {
            let v = field.perturbation()[grid.index((base[0] + a) % n, (base[1] + b) % n)];
            p.push([tau * (v[0] + shift[0]), tau * (v[1] + shift[1])]);
        }
    }
    Ok((MapField::new(scaled_grid, m, p)?, tau * tau * (t - spec.t0)))
}

/// Residual of the self-shrinker equation,
/// `g̃^{ij}∂²_{ij} f + f/2 - <Df, x>/2`, with `x` the coordinate in the
/// cell centered at the origin.
pub fn shrinker_residual(field: &MapField) -> Result<Vec<Vec2>> {
    let grid = field.grid();
    let n = grid.n();
    let m = field.linear();
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..n {
        for j in 0..n {
            let jet = field.sample_jet(i, j)?;
            let x = grid.centered_position(i, j);
            let p = field.perturbation()[grid.index(i, j)];
            let mx = mat_vec(m, &x);
            let dfx = mat_vec(&jet.df, &x);
            let v = graph_velocity(&jet);
            out.push([
                v[0] + 0.5 * (mx[0] + p[0]) - 0.5 * dfx[0],
                v[1] + 0.5 * (mx[1] + p[1]) - 0.5 * dfx[1],
            ]);
        }
    }
    Ok(out)
}

/// Velocity `ξ ∈ R^2 x R^2` of a translating solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslatorSpec {
    pub xi: Vec4,
}

impl TranslatorSpec {
    /// `dπ₁(ξ)`.
    pub fn domain_part(&self) -> Vec2 {
        [self.xi[0], self.xi[1]]
    }

    /// `dπ₂(ξ)`.
    pub fn target_part(&self) -> Vec2 {
        [self.xi[2], self.xi[3]]
    }
}

/// Residual of the translator equation,
/// `g̃^{ij}∂²_{ij} f - dπ₂(ξ) + <Df, dπ₁(ξ)>`.
pub fn translator_residual(field: &MapField, spec: &TranslatorSpec) -> Result<Vec<Vec2>> {
    if !spec.xi.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument(
            "translation velocity must be finite".into(),
        ));
    }
    let grid = field.grid();
    let n = grid.n();
    let (d1, d2) = (spec.domain_part(), spec.target_part());
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..n {
        for j in 0..n {
            let jet = field.sample_jet(i, j)?;
            let v = graph_velocity(&jet);
            let adv = mat_vec(&jet.df, &d1);
            out.push([v[0] - d2[0] + adv[0], v[1] - d2[1] + adv[1]]);
        }
    }
    Ok(out)
}

/// Largest Euclidean norm in a vector field.
pub fn sup_norm(values: &[Vec2]) -> f64 {
    values.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
}
