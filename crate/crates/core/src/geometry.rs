//! Pointwise differential geometry of the graph `Γ(f) ⊂ R^2 x R^2`.
//!
//! Ambient vectors are ordered `(x1, x2, y1, y2)`: domain factor first,
//! target factor second. The tangent vectors of the graph at a point are
//! `T_i = (e_i, ∂_i f)`.

use crate::error::{Error, Result};
use crate::fields::{JetPoint, MapField};
use crate::linalg::{det, dot4, gram, inverse, mat_vec, Mat2, Vec2, Vec4, IDENTITY};

/// Tolerance below which a singular value counts as zero, and `DfᵀDf`
/// counts as a multiple of the identity.
pub const TIE_TOLERANCE: f64 = 1e-14;

/// Agreement required between the two routes to `tr(s)`, relative to
/// `1 + |DfᵀDf|_F`.
pub const TRACE_TOLERANCE: f64 = 1e-12;

/// Singular value decomposition of a 2x2 differential.
///
/// `alpha[k]` and `beta[k]` are the columns `α_k`, `β_k` of the domain and
/// target frames, with `Df α_k = λ_k β_k` and `λ_1 <= λ_2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularData {
    pub lambda: [f64; 2],
    pub alpha: [Vec2; 2],
    pub beta: [Vec2; 2],
}

impl SingularData {
    /// `β diag(λ) αᵀ`.
    pub fn reconstruct(&self) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for k in 0..2 {
            for r in 0..2 {
                for c in 0..2 {
                    out[r][c] += self.lambda[k] * self.beta[k][r] * self.alpha[k][c];
                }
            }
        }
        out
    }
}

/// Closed-form SVD through the eigendecomposition of `DfᵀDf`.
///
/// Tie rules: when `DfᵀDf` is within [`TIE_TOLERANCE`] of a multiple of the
/// identity, `α = I`. Otherwise `α_1` is the analytic eigenvector of the
/// smaller eigenvalue with its first nonzero component positive, and `α_2`
/// is `α_1` rotated by +90°. `β_2 = Df α_2 / λ_2`; `β_1` is the unit vector
/// orthogonal to `β_2` whose orientation matches `sign(det Df)`, or the
/// positively oriented one when `λ_1` vanishes. `β = I` when `Df = 0`.
pub fn svd2(df: &Mat2) -> SingularData {
    let c = gram(df);
    let (a, b, d) = (c[0][0], c[0][1], c[1][1]);
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff.hypot(b);
    let mu2 = mean + disc;
    let det_df = det(df);
    let mu1 = if mu2 > 0.0 {
        (det_df * det_df / mu2).min(mu2)
    } else {
        0.0
    };
    let lambda = [mu1.max(0.0).sqrt(), mu2.max(0.0).sqrt()];

    let alpha1 = if half_diff.abs() <= TIE_TOLERANCE && b.abs() <= TIE_TOLERANCE {
        [1.0, 0.0]
    } else {
        // (C - μ1 I) v = 0, using whichever row gives the larger vector
        let v = if half_diff >= 0.0 {
            [b, -half_diff - disc]
        } else {
            [half_diff - disc, b]
        };
        let len = v[0].hypot(v[1]);
        let v = [v[0] / len, v[1] / len];
        if v[0] > 0.0 || (v[0] == 0.0 && v[1] > 0.0) {
            v
        } else {
            [-v[0], -v[1]]
        }
    };
    let alpha2 = [-alpha1[1], alpha1[0]];

    let beta = if lambda[1] <= TIE_TOLERANCE {
        [[1.0, 0.0], [0.0, 1.0]]
    } else {
        let w = mat_vec(df, &alpha2);
        let len = w[0].hypot(w[1]);
        let beta2 = [w[0] / len, w[1] / len];
        // det α = +1, so det β must carry the sign of det Df
        let orientation = if lambda[0] > TIE_TOLERANCE && det_df < 0.0 {
            -1.0
        } else {
            1.0
        };
        let beta1 = [orientation * beta2[1], -orientation * beta2[0]];
        [beta1, beta2]
    };

    SingularData {
        lambda,
        alpha: [alpha1, alpha2],
        beta,
    }
}

/// Induced metric `g̃ = I + DfᵀDf`, its inverse and the graph Jacobian `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InducedMetric {
    pub g: Mat2,
    pub g_inv: Mat2,
    pub u: f64,
}

pub fn induced_metric(df: &Mat2) -> InducedMetric {
    let c = gram(df);
    let g = [[1.0 + c[0][0], c[0][1]], [c[1][0], 1.0 + c[1][1]]];
    let g_inv = inverse(&g);
    InducedMetric {
        g,
        g_inv,
        u: 1.0 / det(&g).sqrt(),
    }
}

/// `σ_k = (1-λ_k²)/(1+λ_k²)` and `ρ_k = 2λ_k/(1+λ_k²)`: the components of
/// `s` in the adapted frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameCoefficients {
    pub sigma: [f64; 2],
    pub rho: [f64; 2],
}

impl FrameCoefficients {
    pub fn from_lambda(lambda: [f64; 2]) -> Self {
        let f = |l: f64| {
            let q = 1.0 + l * l;
            ((1.0 - l * l) / q, 2.0 * l / q)
        };
        let (s1, r1) = f(lambda[0]);
        let (s2, r2) = f(lambda[1]);
        Self {
            sigma: [s1, s2],
            rho: [r1, r2],
        }
    }

    pub fn trace(&self) -> f64 {
        self.sigma[0] + self.sigma[1]
    }
}

/// `tr(s)` from the singular values, `2(1 - λ1²λ2²)/((1+λ1²)(1+λ2²))`.
pub fn trace_s_formula(lambda: [f64; 2]) -> f64 {
    let (a, b) = (lambda[0] * lambda[0], lambda[1] * lambda[1]);
    2.0 * (1.0 - a * b) / ((1.0 + a) * (1.0 + b))
}

/// `tr_g̃(s)` with `s = I - DfᵀDf`, computed by contraction and
/// cross-checked against the singular value formula.
pub fn trace_s(df: &Mat2) -> Result<f64> {
    let sv = svd2(df);
    trace_s_checked(df, &induced_metric(df).g_inv, sv.lambda)
}

fn trace_s_checked(df: &Mat2, g_inv: &Mat2, lambda: [f64; 2]) -> Result<f64> {
    let c = gram(df);
    let mut contraction = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let s = if i == j { 1.0 - c[i][j] } else { -c[i][j] };
            contraction += g_inv[i][j] * s;
        }
    }
    let formula = trace_s_formula(lambda);
    let scale = 1.0 + crate::linalg::frobenius2(&c).sqrt();
    if (contraction - formula).abs() > TRACE_TOLERANCE * scale {
        return Err(Error::GeometryInconsistency {
            contraction,
            formula,
        });
    }
    Ok(contraction)
}

/// Ambient tangent vectors `T_i = (e_i, ∂_i f)`.
pub fn tangents(df: &Mat2) -> [Vec4; 2] {
    [
        [1.0, 0.0, df[0][0], df[1][0]],
        [0.0, 1.0, df[0][1], df[1][1]],
    ]
}

/// Orthonormal normal frame `ξ_m = (-λ_m α_m, β_m)/sqrt(1+λ_m²)`.
pub fn normal_frame(sv: &SingularData) -> [Vec4; 2] {
    let mut out = [[0.0; 4]; 2];
    for m in 0..2 {
        let l = sv.lambda[m];
        let q = (1.0 + l * l).sqrt();
        out[m] = [
            -l * sv.alpha[m][0] / q,
            -l * sv.alpha[m][1] / q,
            sv.beta[m][0] / q,
            sv.beta[m][1] / q,
        ];
    }
    out
}

/// Normal parts of `∂²_{ij} F = (0, ∂²_{ij} f)` in ambient coordinates:
/// the second fundamental form in the coordinate frame.
pub fn coordinate_second_fundamental_form(jet: &JetPoint, g_inv: &Mat2) -> [[Vec4; 2]; 2] {
    let t = tangents(&jet.df);
    let mut out = [[[0.0; 4]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let d = jet.d2f[a][b];
            let v = [0.0, 0.0, d[0], d[1]];
            let c = [dot4(&t[0], &v), dot4(&t[1], &v)];
            let coef = mat_vec(g_inv, &c);
            let mut n = v;
            for q in 0..2 {
                for r in 0..4 {
                    n[r] -= coef[q] * t[q][r];
                }
            }
            out[a][b] = n;
        }
    }
    out
}

/// Second fundamental form and mean curvature at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondFundamentalForm {
    /// `a[m][i][j] = A^m_{ij} = <A(e_i, e_j), ξ_m>` in the adapted frames.
    pub a: [[[f64; 2]; 2]; 2],
    /// Mean curvature vector in ambient coordinates.
    pub h: Vec4,
    pub norm_a2: f64,
    pub norm_h2: f64,
}

pub fn second_fundamental_form(jet: &JetPoint) -> SecondFundamentalForm {
    let sv = svd2(&jet.df);
    let metric = induced_metric(&jet.df);
    second_fundamental_form_with(jet, &sv, &metric.g_inv)
}

fn second_fundamental_form_with(
    jet: &JetPoint,
    sv: &SingularData,
    g_inv: &Mat2,
) -> SecondFundamentalForm {
    let normal = coordinate_second_fundamental_form(jet, g_inv);
    let mut h = [0.0; 4];
    for a in 0..2 {
        for b in 0..2 {
            for r in 0..4 {
                h[r] += g_inv[a][b] * normal[a][b][r];
            }
        }
    }

    let xi = normal_frame(sv);
    let e: [Vec2; 2] = std::array::from_fn(|i| {
        let q = (1.0 + sv.lambda[i] * sv.lambda[i]).sqrt();
        [sv.alpha[i][0] / q, sv.alpha[i][1] / q]
    });
    // components of the coordinate-frame form along each ξ_m
    let along: [[[f64; 2]; 2]; 2] = std::array::from_fn(|m| {
        std::array::from_fn(|a| std::array::from_fn(|b| dot4(&normal[a][b], &xi[m])))
    });

    let mut a_frame = [[[0.0; 2]; 2]; 2];
    let mut norm_a2 = 0.0;
    for m in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        v += e[i][a] * e[j][b] * along[m][a][b];
                    }
                }
                a_frame[m][i][j] = v;
                norm_a2 += v * v;
            }
        }
    }
    // exact symmetry in the two lower indices
    for m in 0..2 {
        let mixed = 0.5 * (a_frame[m][0][1] + a_frame[m][1][0]);
        a_frame[m][0][1] = mixed;
        a_frame[m][1][0] = mixed;
    }

    SecondFundamentalForm {
        a: a_frame,
        h,
        norm_a2,
        norm_h2: dot4(&h, &h),
    }
}

/// Everything the diagnostics need at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomPoint {
    pub sv: SingularData,
    pub g: Mat2,
    pub g_inv: Mat2,
    pub u: f64,
    pub tr_s: f64,
    pub a: [[[f64; 2]; 2]; 2],
    pub h: Vec4,
    pub norm_h2: f64,
    pub norm_a2: f64,
}

impl GeomPoint {
    pub fn from_jet(jet: &JetPoint) -> Result<Self> {
        let sv = svd2(&jet.df);
        let metric = induced_metric(&jet.df);
        let tr_s = trace_s_checked(&jet.df, &metric.g_inv, sv.lambda)?;
        let sff = second_fundamental_form_with(jet, &sv, &metric.g_inv);
        Ok(Self {
            sv,
            g: metric.g,
            g_inv: metric.g_inv,
            u: metric.u,
            tr_s,
            a: sff.a,
            h: sff.h,
            norm_h2: sff.norm_h2,
            norm_a2: sff.norm_a2,
        })
    }

    pub fn frame_coefficients(&self) -> FrameCoefficients {
        FrameCoefficients::from_lambda(self.sv.lambda)
    }
}

/// Gaussian curvature from the metric coefficients and their first and
/// second derivatives (Brioschi formula). `u` is the first coordinate,
/// `v` the second.
#[derive(Debug, Clone, Copy, Default)]
struct MetricJet {
    e: f64,
    f: f64,
    g: f64,
    e_u: f64,
    e_v: f64,
    f_u: f64,
    f_v: f64,
    g_u: f64,
    g_v: f64,
    e_vv: f64,
    f_uv: f64,
    g_uu: f64,
}

impl MetricJet {
    /// Second-order central differences of the metric on a 3x3 patch
    /// `patch[di + 1][dj + 1] = g̃` at `(i + di, j + dj)`.
    fn from_patch(patch: &[[Mat2; 3]; 3], h: f64) -> Self {
        let comp = |r: usize, c: usize, di: usize, dj: usize| patch[di][dj][r][c];
        let du = |r, c| (comp(r, c, 2, 1) - comp(r, c, 0, 1)) / (2.0 * h);
        let dv = |r, c| (comp(r, c, 1, 2) - comp(r, c, 1, 0)) / (2.0 * h);
        let duu = |r, c| (comp(r, c, 2, 1) - 2.0 * comp(r, c, 1, 1) + comp(r, c, 0, 1)) / (h * h);
        let dvv = |r, c| (comp(r, c, 1, 2) - 2.0 * comp(r, c, 1, 1) + comp(r, c, 1, 0)) / (h * h);
        let duv = |r, c| {
            (comp(r, c, 2, 2) - comp(r, c, 2, 0) - comp(r, c, 0, 2) + comp(r, c, 0, 0))
                / (4.0 * h * h)
        };
        Self {
            e: comp(0, 0, 1, 1),
            f: comp(0, 1, 1, 1),
            g: comp(1, 1, 1, 1),
            e_u: du(0, 0),
            e_v: dv(0, 0),
            f_u: du(0, 1),
            f_v: dv(0, 1),
            g_u: du(1, 1),
            g_v: dv(1, 1),
            e_vv: dvv(0, 0),
            f_uv: duv(0, 1),
            g_uu: duu(1, 1),
        }
    }

    fn gauss_curvature(&self) -> f64 {
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let s = self;
        let first = det3([
            [
                -0.5 * s.e_vv + s.f_uv - 0.5 * s.g_uu,
                0.5 * s.e_u,
                s.f_u - 0.5 * s.e_v,
            ],
            [s.f_v - 0.5 * s.g_u, s.e, s.f],
            [0.5 * s.g_v, s.f, s.g],
        ]);
        let second = det3([
            [0.0, 0.5 * s.e_v, 0.5 * s.g_u],
            [0.5 * s.e_v, s.e, s.f],
            [0.5 * s.g_u, s.f, s.g],
        ]);
        let area2 = s.e * s.g - s.f * s.f;
        (first - second) / (area2 * area2)
    }
}

fn metric_patch(field: &MapField, i: usize, j: usize) -> Result<[[Mat2; 3]; 3]> {
    let grid = field.grid();
    let mut patch = [[IDENTITY; 3]; 3];
    for di in 0..3 {
        for dj in 0..3 {
            let (a, b) = (grid.wrap(i, di as isize - 1), grid.wrap(j, dj as isize - 1));
            patch[di][dj] = induced_metric(&field.sample_jet(a, b)?.df).g;
        }
    }
    Ok(patch)
}

/// Intrinsic Gauss curvature of `(R^2, g̃)` at `(i, j)` from second-order
/// finite differences of the metric.
pub fn gauss_curvature_intrinsic(field: &MapField, i: usize, j: usize) -> Result<f64> {
    let patch = metric_patch(field, i, j)?;
    Ok(MetricJet::from_patch(&patch, field.grid().h()).gauss_curvature())
}

/// Extrinsic side of the Gauss equation in the coordinate frame,
/// `<A_11, A_22> - <A_12, A_12>`.
pub fn gauss_extrinsic(jet: &JetPoint) -> f64 {
    let metric = induced_metric(&jet.df);
    let n = coordinate_second_fundamental_form(jet, &metric.g_inv);
    dot4(&n[0][0], &n[1][1]) - dot4(&n[0][1], &n[0][1])
}

/// `|K det g̃ - (<A_11, A_22> - <A_12, A_12>)|` at `(i, j)`.
pub fn gauss_residual(field: &MapField, i: usize, j: usize) -> Result<f64> {
    let patch = metric_patch(field, i, j)?;
    let k = MetricJet::from_patch(&patch, field.grid().h()).gauss_curvature();
    let jet = field.sample_jet(i, j)?;
    Ok((k * det(&patch[1][1]) - gauss_extrinsic(&jet)).abs())
}

/// Gauss residual at every grid point, row-major. Shares the metric
/// evaluations between neighbouring points.
pub fn gauss_residual_field(field: &MapField) -> Result<Vec<f64>> {
    let grid = field.grid();
    let n = grid.n();
    let mut metrics = Vec::with_capacity(grid.len());
    let mut extrinsic = Vec::with_capacity(grid.len());
    for i in 0..n {
        for j in 0..n {
            let jet = field.sample_jet(i, j)?;
            metrics.push(induced_metric(&jet.df).g);
            extrinsic.push(gauss_extrinsic(&jet));
        }
    }
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..n {
        for j in 0..n {
            let patch: [[Mat2; 3]; 3] = std::array::from_fn(|di| {
                std::array::from_fn(|dj| {
                    metrics
                        [grid.index(grid.wrap(i, di as isize - 1), grid.wrap(j, dj as isize - 1))]
                })
            });
            let k = MetricJet::from_patch(&patch, grid.h()).gauss_curvature();
            out.push((k * det(&patch[1][1]) - extrinsic[grid.index(i, j)]).abs());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use crate::linalg::{frobenius2, mat_mul, rotation, transpose};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn orthonormal(v: &[Vec2; 2]) -> bool {
        close(v[0][0].hypot(v[0][1]), 1.0, 1e-12)
            && close(v[1][0].hypot(v[1][1]), 1.0, 1e-12)
            && (v[0][0] * v[1][0] + v[0][1] * v[1][1]).abs() < 1e-12
    }

    #[test]
    fn svd_of_zero_uses_canonical_frames() {
        let sv = svd2(&[[0.0; 2]; 2]);
        assert_eq!(sv.lambda, [0.0, 0.0]);
        assert_eq!(sv.alpha, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(sv.beta, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn svd_of_diagonal() {
        let sv = svd2(&[[0.8, 0.0], [0.0, 0.5]]);
        assert!(close(sv.lambda[0], 0.5, 1e-15) && close(sv.lambda[1], 0.8, 1e-15));
        assert_eq!(sv.alpha[0], [0.0, 1.0]);
        assert_eq!(sv.beta[0], [0.0, 1.0]);
    }

    #[test]
    fn svd_of_scaled_rotation_is_a_tie() {
        let r = 0.7;
        let m = rotation(0.9);
        let df = [[r * m[0][0], r * m[0][1]], [r * m[1][0], r * m[1][1]]];
        let sv = svd2(&df);
        assert!(close(sv.lambda[0], 0.7, 1e-14) && close(sv.lambda[1], 0.7, 1e-14));
        assert_eq!(sv.alpha, [[1.0, 0.0], [0.0, 1.0]]);
        let back = sv.reconstruct();
        for r in 0..2 {
            for c in 0..2 {
                assert!(close(back[r][c], df[r][c], 1e-14));
            }
        }
    }

    #[test]
    fn svd_of_rank_one_map() {
        let df = [[1.0, 2.0], [2.0, 4.0]];
        let sv = svd2(&df);
        assert!(sv.lambda[0] < 1e-14);
        assert!(orthonormal(&sv.beta));
        let b = sv.beta;
        assert!(b[0][0] * b[1][1] - b[0][1] * b[1][0] > 0.0);
    }

    #[test]
    fn metric_examples() {
        let flat = induced_metric(&[[0.0; 2]; 2]);
        assert_eq!(flat.g, IDENTITY);
        assert_eq!(flat.u, 1.0);
        let m = induced_metric(&[[1.0, 0.0], [0.0, 0.5]]);
        assert!(close(det(&m.g), 2.5, 1e-15));
        assert!(close(m.u, 1.0 / 2.5f64.sqrt(), 1e-15));
        assert!(close(
            induced_metric(&[[0.8, 0.0], [0.0, 0.5]]).u,
            0.698_430_295_769_578,
            1e-12
        ));
    }

    #[test]
    fn trace_examples() {
        assert_eq!(trace_s(&[[0.0; 2]; 2]).unwrap(), 2.0);
        assert!(trace_s(&IDENTITY).unwrap().abs() < 1e-15);
        let v = trace_s(&[[0.8, 0.0], [0.0, 0.5]]).unwrap();
        assert!(close(v, 2.0 * 0.84 / (1.64 * 1.25), 1e-15));
        assert!(close(v, 0.819_512_195_121_951_3, 1e-12));
    }

    #[test]
    fn trace_disagreement_is_an_error() {
        let df = [[0.8, 0.1], [0.0, 0.5]];
        let g_inv = induced_metric(&df).g_inv;
        let err = trace_s_checked(&df, &g_inv, [0.1, 0.2]).unwrap_err();
        assert!(err.to_string().contains("geometry inconsistency"));
    }

    #[test]
    fn affine_graph_is_totally_geodesic() {
        let sff = second_fundamental_form(&JetPoint::linear([[0.3, -1.0], [0.2, 0.7]]));
        assert_eq!(sff.norm_a2, 0.0);
        assert_eq!(sff.h, [0.0; 4]);
    }

    #[test]
    fn mean_curvature_of_flat_point_with_curvature() {
        let mut d2f = [[[0.0; 2]; 2]; 2];
        d2f[0][0] = [2.0, 0.0];
        let sff = second_fundamental_form(&JetPoint::new([[0.0; 2]; 2], d2f));
        assert_eq!(sff.h, [0.0, 0.0, 2.0, 0.0]);
        assert_eq!(sff.norm_h2, 4.0);
    }

    #[test]
    fn frame_identities_for_s() {
        let df = [[0.9, -0.3], [0.4, 0.6]];
        let sv = svd2(&df);
        let coeff = FrameCoefficients::from_lambda(sv.lambda);
        // s on R^2 x R^2 has signature (+, +, -, -)
        let s = |a: &Vec4, b: &Vec4| a[0] * b[0] + a[1] * b[1] - a[2] * b[2] - a[3] * b[3];
        let xi = normal_frame(&sv);
        let et: [Vec4; 2] = std::array::from_fn(|k| {
            let l = sv.lambda[k];
            let q = (1.0 + l * l).sqrt();
            [
                sv.alpha[k][0] / q,
                sv.alpha[k][1] / q,
                l * sv.beta[k][0] / q,
                l * sv.beta[k][1] / q,
            ]
        });
        for i in 0..2 {
            for j in 0..2 {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!(close(s(&et[i], &et[j]), coeff.sigma[i] * d, 1e-12));
                assert!(close(s(&xi[i], &xi[j]), -coeff.sigma[i] * d, 1e-12));
                assert!(close(s(&et[i], &xi[j]), -coeff.rho[i] * d, 1e-12));
            }
        }
        for k in 0..2 {
            assert!(close(
                coeff.sigma[k].powi(2) + coeff.rho[k].powi(2),
                1.0,
                1e-12
            ));
        }
    }

    #[test]
    fn gauss_equation_on_linear_field_vanishes() {
        let grid = Grid::new(16, 2.0 * PI).unwrap();
        let field = MapField::linear_map(grid, [[0.8, 0.2], [0.1, 0.5]]);
        assert!(gauss_curvature_intrinsic(&field, 3, 4).unwrap().abs() < 1e-12);
        assert!(gauss_residual(&field, 3, 4).unwrap() < 1e-12);
    }

    fn product_sine(n: usize, eps: f64) -> MapField {
        let grid = Grid::new(n, 2.0 * PI).unwrap();
        MapField::from_fn(grid, [[0.0; 2]; 2], |x| {
            [eps * x[0].sin() * x[1].sin(), 0.0]
        })
    }

    #[test]
    fn intrinsic_curvature_matches_extrinsic_side() {
        let field = product_sine(64, 0.2);
        let (i, j) = (5, 9);
        let k = gauss_curvature_intrinsic(&field, i, j).unwrap();
        let jet = field.sample_jet(i, j).unwrap();
        let ext = gauss_extrinsic(&jet) / det(&induced_metric(&jet.df).g);
        assert!(close(k, ext, 1e-3), "{k} vs {ext}");
        assert!(k.abs() > 1e-3);
    }

    #[test]
    fn gauss_residual_converges_at_second_order() {
        let max = |n: usize| {
            gauss_residual_field(&product_sine(n, 0.3))
                .unwrap()
                .into_iter()
                .fold(0.0, f64::max)
        };
        let ratio = max(64) / max(128);
        assert!(ratio > 3.2 && ratio < 4.8, "ratio {ratio}");
        let field = product_sine(32, 0.3);
        let swept = gauss_residual_field(&field).unwrap();
        assert!(close(
            swept[field.grid().index(4, 7)],
            gauss_residual(&field, 4, 7).unwrap(),
            1e-14
        ));
    }

    fn df_strategy() -> impl Strategy<Value = Mat2> {
        prop::array::uniform2(prop::array::uniform2(-2.0f64..2.0))
    }

    proptest! {
        #[test]
        fn svd_reconstructs(df in df_strategy()) {
            let sv = svd2(&df);
            prop_assert!(sv.lambda[0] >= 0.0 && sv.lambda[0] <= sv.lambda[1]);
            let back = sv.reconstruct();
            let diff = [[back[0][0] - df[0][0], back[0][1] - df[0][1]], [back[1][0] - df[1][0], back[1][1] - df[1][1]]];
            prop_assert!(frobenius2(&diff).sqrt() < 1e-12);
            prop_assert!(orthonormal(&sv.alpha) && orthonormal(&sv.beta));
            for k in 0..2 {
                let w = mat_vec(&df, &sv.alpha[k]);
                prop_assert!((w[0] - sv.lambda[k] * sv.beta[k][0]).abs() < 1e-12);
                prop_assert!((w[1] - sv.lambda[k] * sv.beta[k][1]).abs() < 1e-12);
            }
        }

        #[test]
        fn jacobian_and_trace_identities(df in df_strategy()) {
            let m = induced_metric(&df);
            prop_assert!((m.u * m.u * det(&m.g) - 1.0).abs() < 1e-12);
            let g_g_inv = mat_mul(&m.g, &m.g_inv);
            prop_assert!((g_g_inv[0][0] - 1.0).abs() < 1e-12 && g_g_inv[0][1].abs() < 1e-12);
            let tr = trace_s(&df).unwrap();
            let sv = svd2(&df);
            prop_assert!(m.u >= 0.5 * tr - 1e-15);
            if tr > 0.0 {
                for k in 0..2 {
                    prop_assert!(1.0 + sv.lambda[k].powi(2) <= 2.0 / tr * (1.0 + 1e-12));
                }
            }
            // the metric is invariant under transposition of the frame
            prop_assert!(transpose(&m.g) == m.g);
        }

        #[test]
        fn mean_curvature_is_normal_and_bounded(
            df in df_strategy(),
            d2 in prop::array::uniform3(prop::array::uniform2(-3.0f64..3.0)),
        ) {
            let jet = JetPoint::new(df, [[d2[0], d2[1]], [d2[1], d2[2]]]);
            let g = GeomPoint::from_jet(&jet).unwrap();
            let t = tangents(&df);
            let hn = g.norm_h2.sqrt();
            prop_assert!(dot4(&g.h, &t[0]).abs() < 1e-10 * (1.0 + hn));
            prop_assert!(dot4(&g.h, &t[1]).abs() < 1e-10 * (1.0 + hn));
            prop_assert!(g.norm_h2 <= 2.0 * g.norm_a2 + 1e-12);
            // |A|^2 in the coordinate frame agrees with the adapted frame
            let n = coordinate_second_fundamental_form(&jet, &g.g_inv);
            let mut coord = 0.0;
            for a in 0..2 { for b in 0..2 { for c in 0..2 { for d in 0..2 {
                coord += g.g_inv[a][c] * g.g_inv[b][d] * dot4(&n[a][b], &n[c][d]);
            }}}}
            prop_assert!((coord - g.norm_a2).abs() < 1e-10 * (1.0 + coord));
            // H = sum_m (A^m_11 + A^m_22) ξ_m
            let xi = normal_frame(&g.sv);
            for r in 0..4 {
                let h = (g.a[0][0][0] + g.a[0][1][1]) * xi[0][r] + (g.a[1][0][0] + g.a[1][1][1]) * xi[1][r];
                prop_assert!((h - g.h[r]).abs() < 1e-10 * (1.0 + hn));
            }
        }
    }
}
