//! Periodic grid storage and fourth-order finite differences.
//!
//! A [`MapField`] represents `f(x) = M x + p(x mod L)` on the torus
//! `[0, L)^2` sampled at `n x n` points. Grid index `(i, j)` sits at
//! `x = (i h, j h)`; `i` runs along the first axis. Values are stored
//! row-major, `p[i * n + j]`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::{frobenius2, mat_vec, norm2, Mat2, Vec2, ZERO};

/// Fourth-order central stencils for derivative orders 0..=4, as
/// `(offset, weight)` pairs before division by `h^order`.
const STENCILS: [&[(isize, f64)]; 5] = [
    &[(0, 1.0)],
    &[
        (-2, 1.0 / 12.0),
        (-1, -8.0 / 12.0),
        (1, 8.0 / 12.0),
        (2, -1.0 / 12.0),
    ],
    &[
        (-2, -1.0 / 12.0),
        (-1, 16.0 / 12.0),
        (0, -30.0 / 12.0),
        (1, 16.0 / 12.0),
        (2, -1.0 / 12.0),
    ],
    &[
        (-3, 1.0 / 8.0),
        (-2, -1.0),
        (-1, 13.0 / 8.0),
        (1, -13.0 / 8.0),
        (2, 1.0),
        (3, -1.0 / 8.0),
    ],
    &[
        (-3, -1.0 / 6.0),
        (-2, 2.0),
        (-1, -6.5),
        (0, 28.0 / 3.0),
        (1, -6.5),
        (2, 2.0),
        (3, -1.0 / 6.0),
    ],
];

/// Highest derivative order the stencils support.
pub const MAX_ORDER: usize = 4;

/// Uniform periodic grid with `n` points per axis and period `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    period: f64,
    h: f64,
}

impl Grid {
    pub fn new(n: usize, period: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidGrid(format!(
                "n = {n}, need at least 8 points per axis"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "period {period} must be positive and finite"
            )));
        }
        Ok(Self {
            n,
            period,
            h: period / n as f64,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn period(&self) -> f64 {
        self.period
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Wraps `i + offset` into `0..n`. Offsets are small compared to `n`.
    #[inline]
    pub fn wrap(&self, i: usize, offset: isize) -> usize {
        let k = i as isize + offset;
        let n = self.n as isize;
        if k < 0 {
            (k + n) as usize
        } else if k >= n {
            (k - n) as usize
        } else {
            k as usize
        }
    }

    /// Wraps an arbitrary signed index into `0..n`.
    #[inline]
    pub fn wrap_any(&self, k: isize) -> usize {
        k.rem_euclid(self.n as isize) as usize
    }

    /// Position of grid point `(i, j)` in `[0, L)^2`.
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Vec2 {
        [i as f64 * self.h, j as f64 * self.h]
    }

    /// Position of grid point `(i, j)` in the cell `[-L/2, L/2)^2` centered at the origin.
    #[inline]
    pub fn centered_position(&self, i: usize, j: usize) -> Vec2 {
        let c = |k: usize| {
            if 2 * k < self.n {
                k as f64 * self.h
            } else {
                (k as f64 - self.n as f64) * self.h
            }
        };
        [c(i), c(j)]
    }

    /// Fourth-order approximation of `∂_1^a ∂_2^b` applied to a scalar grid
    /// function at `(i, j)`.
    pub fn partial_scalar(&self, values: &[f64], a: usize, b: usize, i: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        stencil_sum(self, a, b, i, j, |idx, w| acc += w * values[idx]);
        acc / self.h.powi((a + b) as i32)
    }
}

/// Visits the tensor-product stencil for `∂_1^a ∂_2^b` at `(i, j)`, calling
/// `visit(flat_index, weight)` for each point. Weights are not divided by `h`.
#[inline]
fn stencil_sum(
    grid: &Grid,
    a: usize,
    b: usize,
    i: usize,
    j: usize,
    mut visit: impl FnMut(usize, f64),
) {
    for &(oa, wa) in STENCILS[a] {
        let row = grid.wrap(i, oa) * grid.n;
        for &(ob, wb) in STENCILS[b] {
            visit(row + grid.wrap(j, ob), wa * wb);
        }
    }
}

/// First and second derivatives of the map at one grid point.
///
/// `df[k][i] = ∂_i f^k` and `d2f[i][j][k] = ∂²_{ij} f^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetPoint {
    pub df: Mat2,
    pub d2f: [[Vec2; 2]; 2],
}

impl JetPoint {
    /// Builds a jet, symmetrizing the mixed second derivatives.
    pub fn new(df: Mat2, mut d2f: [[Vec2; 2]; 2]) -> Self {
        for k in 0..2 {
            let mixed = 0.5 * (d2f[0][1][k] + d2f[1][0][k]);
            d2f[0][1][k] = mixed;
            d2f[1][0][k] = mixed;
        }
        Self { df, d2f }
    }

    /// Jet of the linear map `x -> m x`.
    pub fn linear(m: Mat2) -> Self {
        Self {
            df: m,
            d2f: [[[0.0; 2]; 2]; 2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.df.iter().flatten().all(|v| v.is_finite())
            && self.d2f.iter().flatten().flatten().all(|v| v.is_finite())
    }
}

/// Sup norm of a derivative tensor, see [`MapField::sup_norm_derivative`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupNorm {
    pub value: f64,
    /// Set for order 0 when the linear part is nonzero: `value` is then the
    /// height of the perturbation only, since `M x` is unbounded.
    pub perturbation_only: bool,
}

/// The evolving map `f(x) = M x + p(x mod L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapField {
    grid: Grid,
    linear: Mat2,
    p: Vec<Vec2>,
}

impl MapField {
    pub fn new(grid: Grid, linear: Mat2, p: Vec<Vec2>) -> Result<Self> {
        if p.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "perturbation has {} values, grid needs {}",
                p.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, linear, p })
    }

    /// The linear map `x -> M x` with zero perturbation.
    pub fn linear_map(grid: Grid, linear: Mat2) -> Self {
        Self {
            grid,
            linear,
            p: vec![[0.0; 2]; grid.len()],
        }
    }

    /// Samples `p` from a function of the grid position in `[0, L)^2`.
    pub fn from_fn(grid: Grid, linear: Mat2, mut p: impl FnMut(Vec2) -> Vec2) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                values.push(p(grid.position(i, j)));
            }
        }
        Self {
            grid,
            linear,
            p: values,
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn linear(&self) -> &Mat2 {
        &self.linear
    }

    #[inline]
    pub fn perturbation(&self) -> &[Vec2] {
        &self.p
    }

    #[inline]
    pub fn perturbation_mut(&mut self) -> &mut [Vec2] {
        &mut self.p
    }

    pub fn into_parts(self) -> (Grid, Mat2, Vec<Vec2>) {
        (self.grid, self.linear, self.p)
    }

    /// Checks that every perturbation value is finite.
    pub fn validate(&self) -> Result<()> {
        match self
            .p
            .iter()
            .position(|v| !(v[0].is_finite() && v[1].is_finite()))
        {
            None => Ok(()),
            Some(idx) => {
                let n = self.grid.n();
                Err(Error::CorruptField {
                    i: idx / n,
                    j: idx % n,
                })
            }
        }
    }

    /// `f` at grid point `(i, j)`, with `x` taken in `[0, L)^2`.
    pub fn value(&self, i: usize, j: usize) -> Vec2 {
        let mx = mat_vec(&self.linear, &self.grid.position(i, j));
        let p = self.p[self.grid.index(i, j)];
        [mx[0] + p[0], mx[1] + p[1]]
    }

    /// Fourth-order approximation of `∂_1^a ∂_2^b p` at `(i, j)`.
    pub fn partial(&self, a: usize, b: usize, i: usize, j: usize) -> Vec2 {
        let mut acc = [0.0; 2];
        stencil_sum(&self.grid, a, b, i, j, |idx, w| {
            let v = self.p[idx];
            acc[0] += w * v[0];
            acc[1] += w * v[1];
        });
        let scale = self.grid.h.powi((a + b) as i32);
        [acc[0] / scale, acc[1] / scale]
    }

    /// First and second derivatives of `f` at `(i, j)`; indices wrap.
    pub fn sample_jet(&self, i: usize, j: usize) -> Result<JetPoint> {
        let n = self.grid.n();
        let (i, j) = (i % n, j % n);
        let jet = self.jet_unchecked(i, j);
        if jet.is_finite() {
            Ok(jet)
        } else {
            Err(self.corrupt_near(i, j))
        }
    }

    /// Jet without the finiteness check. Used on hot paths that check the
    /// result themselves.
    #[inline]
    pub(crate) fn jet_unchecked(&self, i: usize, j: usize) -> JetPoint {
        let g = &self.grid;
        let n = g.n;
        let p = &self.p;
        let inv_h = 1.0 / g.h;
        let inv_h2 = inv_h * inv_h;

        let rows = [
            g.wrap(i, -2) * n,
            g.wrap(i, -1) * n,
            i * n,
            g.wrap(i, 1) * n,
            g.wrap(i, 2) * n,
        ];
        let cols = [g.wrap(j, -2), g.wrap(j, -1), j, g.wrap(j, 1), g.wrap(j, 2)];
        let c = rows[2] + cols[2];

        let mut df = self.linear;
        let mut d2f = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            let x = |r: usize| p[rows[r] + cols[2]][k];
            let y = |s: usize| p[rows[2] + cols[s]][k];
            let d1x = (x(0) - 8.0 * x(1) + 8.0 * x(3) - x(4)) / 12.0;
            let d1y = (y(0) - 8.0 * y(1) + 8.0 * y(3) - y(4)) / 12.0;
            let center = p[c][k];
            let d2x = (-x(0) + 16.0 * x(1) - 30.0 * center + 16.0 * x(3) - x(4)) / 12.0;
            let d2y = (-y(0) + 16.0 * y(1) - 30.0 * center + 16.0 * y(3) - y(4)) / 12.0;

            // tensor product of the first-derivative stencil with itself
            const W: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
            let mut mixed = 0.0;
            for r in [0usize, 1, 3, 4] {
                let base = rows[r];
                let inner = W[0] * p[base + cols[0]][k]
                    + W[1] * p[base + cols[1]][k]
                    + W[3] * p[base + cols[3]][k]
                    + W[4] * p[base + cols[4]][k];
                mixed += W[r] * inner;
            }

            df[k][0] += d1x * inv_h;
            df[k][1] += d1y * inv_h;
            d2f[0][0][k] = d2x * inv_h2;
            d2f[1][1][k] = d2y * inv_h2;
            d2f[0][1][k] = mixed * inv_h2;
            d2f[1][0][k] = mixed * inv_h2;
        }
        JetPoint { df, d2f }
    }

    /// Locates a non-finite value inside the stencil footprint of `(i, j)`.
    pub(crate) fn corrupt_near(&self, i: usize, j: usize) -> Error {
        let g = &self.grid;
        for oi in -3..=3 {
            for oj in -3..=3 {
                let (a, b) = (g.wrap(i, oi), g.wrap(j, oj));
                let v = self.p[g.index(a, b)];
                if !(v[0].is_finite() && v[1].is_finite()) {
                    return Error::CorruptField { i: a, j: b };
                }
            }
        }
        Error::CorruptField { i, j }
    }

    /// Squared Frobenius norm of the `k`-th derivative tensor of `f` at
    /// `(i, j)`, summing over all ordered index tuples.
    pub fn derivative_norm2(&self, k: usize, i: usize, j: usize) -> Result<f64> {
        if k > MAX_ORDER {
            return Err(Error::UnsupportedOrder(k));
        }
        if k == 0 {
            return Ok(norm2(&self.p[self.grid.index(i, j)]));
        }
        let mut total = 0.0;
        for a in 0..=k {
            let mut d = self.partial(a, k - a, i, j);
            if k == 1 {
                let col = if a == 1 { 0 } else { 1 };
                d[0] += self.linear[0][col];
                d[1] += self.linear[1][col];
            }
            total += binomial(k, a) as f64 * norm2(&d);
        }
        Ok(total)
    }

    /// Maximum over the grid of the Frobenius norm of `D^k f`.
    ///
    /// For `k = 0` this is the height `max |p|`; it is flagged as
    /// perturbation-only when `M != 0`, and equals `max |f|` otherwise.
    pub fn sup_norm_derivative(&self, k: usize) -> Result<SupNorm> {
        if k > MAX_ORDER {
            return Err(Error::UnsupportedOrder(k));
        }
        self.validate()?;
        let n = self.grid.n();
        let mut sup2: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                sup2 = sup2.max(self.derivative_norm2(k, i, j)?);
            }
        }
        Ok(SupNorm {
            value: sup2.sqrt(),
            perturbation_only: k == 0 && self.linear != ZERO,
        })
    }

    /// Height of the perturbation, `max |p|`.
    pub fn height(&self) -> f64 {
        self.p.iter().map(norm2).fold(0.0, f64::max).sqrt()
    }

    /// Writes the field as a snapshot CSV.
    ///
    /// The header line is `# graphflow-snapshot v1, n=.., L=.., M=m11,m12,m21,m22, t=..`
    /// followed by `i,j,p1,p2` rows in row-major order with 17 significant digits.
    pub fn write_snapshot<W: Write>(&self, t: f64, out: W) -> Result<()> {
        self.write_snapshot_annotated(t, &[], out)
    }

    /// Like [`MapField::write_snapshot`], adding each entry of `comments` as
    /// a `# ` line below the header.
    pub fn write_snapshot_annotated<W: Write>(
        &self,
        t: f64,
        comments: &[String],
        out: W,
    ) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let m = &self.linear;
        writeln!(
            out,
            "# graphflow-snapshot v1, n={}, L={}, M={},{},{},{}, t={}",
            self.grid.n(),
            fmt_f64(self.grid.period()),
            fmt_f64(m[0][0]),
            fmt_f64(m[0][1]),
            fmt_f64(m[1][0]),
            fmt_f64(m[1][1]),
            fmt_f64(t)
        )?;
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        let n = self.grid.n();
        for i in 0..n {
            for j in 0..n {
                let v = self.p[self.grid.index(i, j)];
                writeln!(out, "{i},{j},{},{}", fmt_f64(v[0]), fmt_f64(v[1]))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a snapshot written by [`MapField::write_snapshot`]. Returns the
    /// field and its time.
    pub fn read_snapshot<R: BufRead>(input: R) -> Result<(Self, f64)> {
        let bad = |detail: String| Error::Malformed {
            what: "snapshot",
            detail,
        };
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))??;
        let (n, period, linear, t) = parse_snapshot_header(&header).map_err(bad)?;
        let grid = Grid::new(n, period)?;
        let mut p = vec![[f64::NAN; 2]; grid.len()];
        let mut seen = vec![false; grid.len()];
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(bad(format!("row {}: expected 4 columns", lineno + 2)));
            }
            let parse_idx = |s: &str| {
                s.parse::<usize>()
                    .ok()
                    .filter(|&v| v < n)
                    .ok_or_else(|| bad(format!("row {}: bad index {s:?}", lineno + 2)))
            };
            let parse_val = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("row {}: bad value {s:?}", lineno + 2)))
            };
            let idx = grid.index(parse_idx(parts[0])?, parse_idx(parts[1])?);
            p[idx] = [parse_val(parts[2])?, parse_val(parts[3])?];
            seen[idx] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(bad(format!(
                "missing row for grid point ({}, {})",
                missing / n,
                missing % n
            )));
        }
        Ok((Self { grid, linear, p }, t))
    }
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_snapshot_header(line: &str) -> std::result::Result<(usize, f64, Mat2, f64), String> {
    let rest = line
        .strip_prefix("# graphflow-snapshot v1,")
        .ok_or_else(|| format!("unrecognized header {line:?}"))?;
    let (mut n, mut period, mut linear, mut t) = (None, None, None, None);
    for item in rest.split(", ") {
        let (key, value) = item
            .trim()
            .split_once('=')
            .ok_or_else(|| format!("bad header item {item:?}"))?;
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| format!("bad number {s:?} for {key}"))
        };
        match key {
            "n" => {
                n = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| format!("bad n {value:?}"))?,
                )
            }
            "L" => period = Some(num(value)?),
            "t" => t = Some(num(value)?),
            "M" => {
                let m: Vec<f64> = value
                    .split(',')
                    .map(num)
                    .collect::<std::result::Result<_, _>>()?;
                if m.len() != 4 {
                    return Err(format!("M needs 4 entries, got {}", m.len()));
                }
                linear = Some([[m[0], m[1]], [m[2], m[3]]]);
            }
            other => return Err(format!("unknown header key {other:?}")),
        }
    }
    Ok((
        n.ok_or("missing n")?,
        period.ok_or("missing L")?,
        linear.ok_or("missing M")?,
        t.ok_or("missing t")?,
    ))
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Frobenius norm of the linear part, `|M|_F`.
pub fn linear_norm(m: &Mat2) -> f64 {
    frobenius2(m).sqrt()
}
