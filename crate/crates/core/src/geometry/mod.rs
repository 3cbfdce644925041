//! Metric charts of the ambient manifold: metric evaluation, Christoffel
//! symbols, the Riemann tensor, sectional and intermediate Ricci curvature,
//! and the unit-ball volume constants entering the Sobolev constants.
//!
//! Curvature sign convention: the lowered tensor stored in a
//! [`CurvaturePacket`] satisfies `sec(X, Y) = Rm(X, Y, Y, X) / |X∧Y|²` and is
//! positive on the round sphere. A regression test pins this against the
//! stereographic sphere chart.

mod charts;

pub use charts::{
    euclidean_chart, polar_plane_chart, sphere_flat_product_chart, stereographic_sphere_chart,
    warp_growth, warped_profile_chart,
};

use crate::sampling;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point {point:?} outside chart region of `{label}`")]
    PointOutsideRegion { label: String, point: Vec<f64> },
    #[error("point {point:?} within {margin} of chart boundary; finite differencing needs interior room")]
    PointTooNearBoundary { point: Vec<f64>, margin: f64 },
    #[error("metric not symmetric/positive definite at {point:?} (min eigenvalue {min_eig})")]
    NonSpdMetric { point: Vec<f64>, min_eig: f64 },
    #[error("tangent plane degenerate: |X∧Y| = {wedge}")]
    DegeneratePlane { wedge: f64 },
    #[error("frame not orthonormal within 1e-8 (max deviation {deviation})")]
    NonOrthonormalInput { deviation: f64 },
    #[error("k = {k} outside 1..={max} for this chart")]
    BadK { k: usize, max: usize },
    #[error("ball volume undefined for dimension {0}")]
    BadDimension(usize),
}

/// Axis-aligned evaluation region in chart coordinates.
#[derive(Debug, Clone)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(
            lo.iter().zip(&hi).all(|(a, b)| a < b),
            "region must be nonempty"
        );
        Region { lo, hi }
    }

    /// Cube `[-half, half]^dim`.
    pub fn cube(dim: usize, half: f64) -> Self {
        Region::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    /// True when `x` keeps at least `margin` distance from every face.
    pub fn contains_with_margin(&self, x: &[f64], margin: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&a, &b))| v >= a + margin && v <= b - margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// First and second metric derivatives supplied in closed form.
    Analytic,
    /// Central finite differences of the metric evaluation.
    FiniteDifference,
}

pub type MetricFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
pub type MetricGradFn = dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync;
pub type MetricHessFn = dyn Fn(&[f64]) -> Vec<Vec<DMatrix<f64>>> + Send + Sync;
pub type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Coordinate chart of the ambient manifold with metric evaluation and an
/// optional closed-form derivative supply.
#[derive(Clone)]
pub struct MetricChart {
    pub label: String,
    pub dim: usize,
    pub region: Region,
    pub mode: DerivativeMode,
    eval: Arc<MetricFn>,
    grad: Option<Arc<MetricGradFn>>,
    hess: Option<Arc<MetricHessFn>>,
    /// Exact ambient distance from the chart's distinguished base point,
    /// when the chart geometry makes it available in closed form.
    base_distance: Option<Arc<ScalarFn>>,
}

impl std::fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricChart")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("mode", &self.mode)
            .finish()
    }
}

impl MetricChart {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        region: Region,
        mode: DerivativeMode,
        eval: Arc<MetricFn>,
        grad: Option<Arc<MetricGradFn>>,
        hess: Option<Arc<MetricHessFn>>,
        base_distance: Option<Arc<ScalarFn>>,
    ) -> Self {
        assert_eq!(region.dim(), dim);
        if mode == DerivativeMode::Analytic {
            assert!(
                grad.is_some() && hess.is_some(),
                "analytic mode requires grad and hess closures"
            );
        }
        MetricChart {
            label: label.into(),
            dim,
            region,
            mode,
            eval,
            grad,
            hess,
            base_distance,
        }
    }

    /// Drops the analytic derivative closures so the chart exercises the
    /// finite-difference path; used by the derivative cross-checks.
    pub fn with_finite_differences(&self) -> Self {
        let mut chart = self.clone();
        chart.mode = DerivativeMode::FiniteDifference;
        chart.grad = None;
        chart.hess = None;
        chart.label = format!("{}(fd)", self.label);
        chart
    }

    /// Central-difference step `1e-4 · (1 + |x|)`.
    pub fn fd_step(&self, x: &[f64]) -> f64 {
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        1.0e-4 * (1.0 + norm)
    }

    /// Symmetry tolerance for the Riemann identities in this mode.
    pub fn symmetry_tolerance(&self) -> f64 {
        match self.mode {
            DerivativeMode::Analytic => 1.0e-10,
            DerivativeMode::FiniteDifference => 1.0e-6,
        }
    }

    pub fn base_distance(&self, x: &[f64]) -> Option<f64> {
        self.base_distance.as_ref().map(|d| d(x))
    }

    pub fn has_base_distance(&self) -> bool {
        self.base_distance.is_some()
    }

    /// Raw metric evaluation, symmetrized, without validity checks. Hot
    /// paths use this after `metric_at` has validated the ray start.
    pub fn metric_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        let g = (self.eval)(x);
        let gt = g.transpose();
        (g + gt) * 0.5
    }

    /// Validated metric evaluation: region membership, symmetry to 1e-12
    /// relative, positive definiteness.
    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        if !self.region.contains(x) {
            return Err(GeometryError::PointOutsideRegion {
                label: self.label.clone(),
                point: x.to_vec(),
            });
        }
        let g = (self.eval)(x);
        let scale = g.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        let asym = (&g - g.transpose()).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if asym > 1.0e-12 * scale {
            return Err(GeometryError::NonSpdMetric {
                point: x.to_vec(),
                min_eig: f64::NAN,
            });
        }
        let g = (&g + g.transpose()) * 0.5;
        let min_eig = g
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v));
        if min_eig <= 0.0 {
            return Err(GeometryError::NonSpdMetric {
                point: x.to_vec(),
                min_eig,
            });
        }
        Ok(g)
    }

    /// Metric with first coordinate derivatives only (geodesic and frame
    /// integration never needs the second derivatives).
    pub fn metric_with_grad(&self, x: &[f64]) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let g = self.metric_unchecked(x);
        match (&self.grad, self.mode) {
            (Some(grad), DerivativeMode::Analytic) => (g, grad(x)),
            _ => {
                let n = self.dim;
                let h = self.fd_step(x);
                let mut xp = x.to_vec();
                let mut dg = Vec::with_capacity(n);
                for k in 0..n {
                    xp[k] = x[k] + h;
                    let gp = self.metric_unchecked(&xp);
                    xp[k] = x[k] - h;
                    let gm = self.metric_unchecked(&xp);
                    xp[k] = x[k];
                    dg.push((gp - gm) / (2.0 * h));
                }
                (g, dg)
            }
        }
    }

    /// Metric with first and second coordinate derivatives, analytic when
    /// supplied, otherwise by central differences with step [`Self::fd_step`].
    pub fn metric_jets(&self, x: &[f64]) -> (DMatrix<f64>, Vec<DMatrix<f64>>, Vec<Vec<DMatrix<f64>>>) {
        let g = self.metric_unchecked(x);
        match (&self.grad, &self.hess, self.mode) {
            (Some(grad), Some(hess), DerivativeMode::Analytic) => (g, grad(x), hess(x)),
            _ => {
                let n = self.dim;
                let h = self.fd_step(x);
                let mut xp = x.to_vec();
                let mut dg = Vec::with_capacity(n);
                for k in 0..n {
                    xp[k] = x[k] + h;
                    let gp = self.metric_unchecked(&xp);
                    xp[k] = x[k] - h;
                    let gm = self.metric_unchecked(&xp);
                    xp[k] = x[k];
                    dg.push((gp - gm) / (2.0 * h));
                }
                let mut d2g = vec![vec![DMatrix::zeros(n, n); n]; n];
                for k in 0..n {
                    xp[k] = x[k] + h;
                    let gp = self.metric_unchecked(&xp);
                    xp[k] = x[k] - h;
                    let gm = self.metric_unchecked(&xp);
                    xp[k] = x[k];
                    d2g[k][k] = (gp + gm - &g * 2.0) / (h * h);
                }
                for k in 0..n {
                    for l in (k + 1)..n {
                        xp[k] = x[k] + h;
                        xp[l] = x[l] + h;
                        let gpp = self.metric_unchecked(&xp);
                        xp[l] = x[l] - h;
                        let gpm = self.metric_unchecked(&xp);
                        xp[k] = x[k] - h;
                        let gmm = self.metric_unchecked(&xp);
                        xp[l] = x[l] + h;
                        let gmp = self.metric_unchecked(&xp);
                        xp[k] = x[k];
                        xp[l] = x[l];
                        let mixed = (gpp - gpm - gmp + gmm) / (4.0 * h * h);
                        d2g[k][l] = mixed.clone();
                        d2g[l][k] = mixed;
                    }
                }
                (g, dg, d2g)
            }
        }
    }
}

/// Christoffel symbols and the lowered Riemann tensor at a point.
#[derive(Debug, Clone)]
pub struct CurvaturePacket {
    pub point: Vec<f64>,
    pub dim: usize,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    /// `Γ^k_{ij}` flattened as `k·n² + i·n + j`.
    pub christoffel: Vec<f64>,
    /// `R_{ijkl} = ⟨R(∂_i, ∂_j)∂_k, ∂_l⟩` flattened as `((i·n + j)·n + k)·n + l`.
    pub riemann_lowered: Vec<f64>,
}

impl CurvaturePacket {
    #[inline]
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        self.christoffel[(k * self.dim + i) * self.dim + j]
    }

    #[inline]
    pub fn rm(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.riemann_lowered[((i * self.dim + j) * self.dim + k) * self.dim + l]
    }

    /// Quadrilinear curvature form `Rm(X, Y, Z, W)`.
    pub fn rm_form(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if y[j] == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        acc += x[i] * y[j] * z[k] * w[l] * self.rm(i, j, k, l);
                    }
                }
            }
        }
        acc
    }

    /// The symmetric operator `V_{il} = Σ_{jk} R_{ijkl} u^j u^k`, so that the
    /// tidal matrix along a geodesic with velocity `u` is `S_AB = E_Aᵀ V E_B`.
    pub fn jacobi_operator(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim;
        let mut v = DMatrix::zeros(n, n);
        for i in 0..n {
            for l in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    if u[j] == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        acc += u[j] * u[k] * self.rm(i, j, k, l);
                    }
                }
                v[(i, l)] = acc;
            }
        }
        v
    }

    /// Max violation of the algebraic symmetries
    /// `R_{ijkl} = -R_{jikl} = -R_{ijlk} = R_{klij}` relative to the tensor scale.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim;
        let scale = self
            .riemann_lowered
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.rm(i, j, k, l);
                        worst = worst.max((r + self.rm(j, i, k, l)).abs());
                        worst = worst.max((r + self.rm(i, j, l, k)).abs());
                        worst = worst.max((r - self.rm(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst / scale
    }

    /// Max violation of the first Bianchi identity, relative to tensor scale.
    pub fn bianchi_defect(&self) -> f64 {
        let n = self.dim;
        let scale = self
            .riemann_lowered
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let cyc = self.rm(i, j, k, l) + self.rm(i, k, l, j) + self.rm(i, l, j, k);
                        worst = worst.max(cyc.abs());
                    }
                }
            }
        }
        worst / scale
    }

    fn gram(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let gx = &self.metric * x;
        let gy = &self.metric * y;
        x.dot(&gx) * y.dot(&gy) - x.dot(&gy) * x.dot(&gy)
    }

    /// Sectional curvature of `span{X, Y}`.
    pub fn sectional(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64, GeometryError> {
        let gram = self.gram(x, y);
        if gram.sqrt() < 1.0e-10 {
            return Err(GeometryError::DegeneratePlane { wedge: gram.max(0.0).sqrt() });
        }
        Ok(self.rm_form(x, y, y, x) / gram)
    }

    /// Ricci quadratic form `Ric(X, X)` by metric contraction.
    pub fn ricci_form(&self, x: &DVector<f64>) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for j in 0..n {
            for l in 0..n {
                let mut rjxxl = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        rjxxl += x[a] * x[b] * self.rm(j, a, b, l);
                    }
                }
                acc += self.metric_inv[(j, l)] * rjxxl;
            }
        }
        acc
    }
}

/// Assembles Christoffel symbols and the lowered Riemann tensor at `x`.
///
/// In finite-difference mode the point must keep a `2·δ_g` margin from the
/// region boundary so the second-difference stencils stay inside.
pub fn curvature_packet(chart: &MetricChart, x: &[f64]) -> Result<CurvaturePacket, GeometryError> {
    if !chart.region.contains(x) {
        return Err(GeometryError::PointOutsideRegion {
            label: chart.label.clone(),
            point: x.to_vec(),
        });
    }
    if chart.mode == DerivativeMode::FiniteDifference {
        let margin = 2.0 * chart.fd_step(x);
        if !chart.region.contains_with_margin(x, margin) {
            return Err(GeometryError::PointTooNearBoundary {
                point: x.to_vec(),
                margin,
            });
        }
    }
    Ok(curvature_packet_unchecked(chart, x))
}

/// Christoffel symbols alone (flattened `k·n² + i·n + j`), together with the
/// metric; the cheap kernel behind geodesic and parallel-transport steps.
pub fn christoffels_unchecked(chart: &MetricChart, x: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let n = chart.dim;
    let (g, dg) = chart.metric_with_grad(x);
    let ginv = g
        .clone()
        .try_inverse()
        .expect("metric must be invertible inside the chart region");
    let mut gamma = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += ginv[(k, m)] * (dg[i][(m, j)] + dg[j][(m, i)] - dg[m][(i, j)]);
                }
                gamma[(k * n + i) * n + j] = 0.5 * acc;
            }
        }
    }
    (g, gamma)
}

/// Curvature assembly without the precondition checks; integrators call this
/// at high rate after validating the ray start.
pub fn curvature_packet_unchecked(chart: &MetricChart, x: &[f64]) -> CurvaturePacket {
    let n = chart.dim;
    let (g, dg, d2g) = chart.metric_jets(x);
    let ginv = g
        .clone()
        .try_inverse()
        .expect("metric must be invertible inside the chart region");

    // Γ^k_{ij} = ½ g^{km} (∂_i g_{mj} + ∂_j g_{mi} - ∂_m g_{ij})
    let mut gamma = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += ginv[(k, m)] * (dg[i][(m, j)] + dg[j][(m, i)] - dg[m][(i, j)]);
                }
                gamma[(k * n + i) * n + j] = 0.5 * acc;
            }
        }
    }

    // ∂_p g^{km} = -(g⁻¹ ∂_p g g⁻¹)^{km}
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|p| -(&ginv * &dg[p] * &ginv)).collect();

    // ∂_p Γ^k_{ij}
    let mut dgamma = vec![0.0; n * n * n * n];
    for p in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += dginv[p][(k, m)] * (dg[i][(m, j)] + dg[j][(m, i)] - dg[m][(i, j)]);
                        acc += ginv[(k, m)]
                            * (d2g[p][i][(m, j)] + d2g[p][j][(m, i)] - d2g[p][m][(i, j)]);
                    }
                    dgamma[((p * n + k) * n + i) * n + j] = 0.5 * acc;
                }
            }
        }
    }
    let dgam = |p: usize, k: usize, i: usize, j: usize| dgamma[((p * n + k) * n + i) * n + j];
    let gam = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];

    // R(∂_i, ∂_j)∂_k = (∂_i Γ^l_{jk} - ∂_j Γ^l_{ik} + Γ^l_{im}Γ^m_{jk} - Γ^l_{jm}Γ^m_{ik}) ∂_l
    let mut riemann = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut up = dgam(i, l, j, k) - dgam(j, l, i, k);
                    for m in 0..n {
                        up += gam(l, i, m) * gam(m, j, k) - gam(l, j, m) * gam(m, i, k);
                    }
                    riemann[((i * n + j) * n + k) * n + l] = up;
                }
            }
        }
    }
    // lower the last index
    let mut lowered = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += g[(l, m)] * riemann[((i * n + j) * n + k) * n + m];
                    }
                    lowered[((i * n + j) * n + k) * n + l] = acc;
                }
            }
        }
    }

    CurvaturePacket {
        point: x.to_vec(),
        dim: n,
        metric: g,
        metric_inv: ginv,
        christoffel: gamma,
        riemann_lowered: lowered,
    }
}

/// Sectional curvature `K(X, Y)` at `x`.
pub fn sectional(
    chart: &MetricChart,
    x: &[f64],
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64, GeometryError> {
    let packet = curvature_packet(chart, x)?;
    packet.sectional(u, v)
}

/// Intermediate Ricci curvature `Ric_k(X, V) = (1/k) Σ_i sec(X, e_i)` for a
/// unit vector `X` and a g-orthonormal k-frame `V` orthogonal to `X`.
///
/// Inputs within `1e-8` of orthonormal are re-orthonormalized by
/// Gram-Schmidt; anything worse is rejected.
pub fn ric_k(
    chart: &MetricChart,
    x: &[f64],
    unit: &DVector<f64>,
    frame: &[DVector<f64>],
) -> Result<f64, GeometryError> {
    let k = frame.len();
    if k == 0 || k > chart.dim - 1 {
        return Err(GeometryError::BadK {
            k,
            max: chart.dim - 1,
        });
    }
    let packet = curvature_packet(chart, x)?;
    let g = &packet.metric;

    let mut all = Vec::with_capacity(k + 1);
    all.push(unit.clone());
    all.extend_from_slice(frame);
    let mut deviation = 0.0_f64;
    for (i, a) in all.iter().enumerate() {
        for (j, b) in all.iter().enumerate().skip(i) {
            let d = a.dot(&(g * b));
            let want = if i == j { 1.0 } else { 0.0 };
            deviation = deviation.max((d - want).abs());
        }
    }
    if deviation > 1.0e-8 {
        return Err(GeometryError::NonOrthonormalInput { deviation });
    }
    let ortho = sampling::gram_schmidt(g, &all)
        .ok_or(GeometryError::NonOrthonormalInput { deviation: 1.0 })?;
    let unit = &ortho[0];

    let mut acc = 0.0;
    for e in &ortho[1..] {
        // e and unit are g-orthonormal, so the Gram determinant is 1
        acc += packet.rm_form(unit, e, e, unit);
    }
    Ok(acc / k as f64)
}

/// Deterministic sampled minimum of `Ric_k` over chart points and random
/// orthonormal frames. A nonnegative return is evidence, not proof, of the
/// curvature hypothesis.
pub fn min_ric_k_sample(
    chart: &MetricChart,
    k: usize,
    n_points: usize,
    n_frames: usize,
    seed: u64,
) -> Result<f64, GeometryError> {
    assert!(n_points >= 1 && n_frames >= 1);
    if k == 0 || k > chart.dim - 1 {
        return Err(GeometryError::BadK {
            k,
            max: chart.dim - 1,
        });
    }
    let mut rng = sampling::rng_from_seed(seed);
    let margin = match chart.mode {
        DerivativeMode::FiniteDifference => 3.0 * chart.fd_step(&chart.region.hi),
        DerivativeMode::Analytic => 0.0,
    };
    let lo: Vec<f64> = chart.region.lo.iter().map(|v| v + margin).collect();
    let hi: Vec<f64> = chart.region.hi.iter().map(|v| v - margin).collect();
    let mut min = f64::INFINITY;
    for _ in 0..n_points {
        let x = sampling::uniform_in_box(&mut rng, &lo, &hi);
        let packet = curvature_packet(chart, &x)?;
        for _ in 0..n_frames {
            let frame = sampling::random_frame(&mut rng, &packet.metric, k + 1);
            let mut acc = 0.0;
            for e in &frame[1..] {
                acc += packet.rm_form(&frame[0], e, e, &frame[0]);
            }
            min = min.min(acc / k as f64);
        }
    }
    Ok(min)
}

/// Volume of the d-dimensional Euclidean unit ball, by the exact recursion
/// `V_d = 2π V_{d-2} / d` with `V_1 = 2`, `V_2 = π`.
pub fn unit_ball_volume(d: usize) -> Result<f64, GeometryError> {
    if d == 0 {
        return Err(GeometryError::BadDimension(d));
    }
    let mut v = if d % 2 == 1 { 2.0 } else { std::f64::consts::PI };
    let mut k = if d % 2 == 1 { 1 } else { 2 };
    while k < d {
        k += 2;
        v *= 2.0 * std::f64::consts::PI / k as f64;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_volumes_low_dimensions() {
        assert_relative_eq!(unit_ball_volume(1).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(unit_ball_volume(2).unwrap(), std::f64::consts::PI, epsilon = 1e-15);
        assert_relative_eq!(
            unit_ball_volume(3).unwrap(),
            4.0 * std::f64::consts::PI / 3.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            unit_ball_volume(4).unwrap(),
            std::f64::consts::PI.powi(2) / 2.0,
            epsilon = 1e-14
        );
        assert!(unit_ball_volume(0).is_err());
    }

    #[test]
    fn corollary_constant_identity() {
        // ((n+2)·V_{n+2} / (2·V_2))^{1/n} = V_n^{1/n}
        for n in 1..=10 {
            let lhs = ((n as f64 + 2.0) * unit_ball_volume(n + 2).unwrap()
                / (2.0 * unit_ball_volume(2).unwrap()))
            .powf(1.0 / n as f64);
            let rhs = unit_ball_volume(n).unwrap().powf(1.0 / n as f64);
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn euclidean_identity_metric() {
        let chart = euclidean_chart(4, 5.0, None);
        let g = chart.metric_at(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g, DMatrix::identity(4, 4));
        let packet = curvature_packet(&chart, &[0.3, -0.2, 1.0, 0.5]).unwrap();
        assert!(packet.christoffel.iter().all(|v| v.abs() < 1e-14));
        assert!(packet.riemann_lowered.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn region_rejection() {
        let chart = euclidean_chart(2, 1.0, None);
        assert!(matches!(
            chart.metric_at(&[2.0, 0.0]),
            Err(GeometryError::PointOutsideRegion { .. })
        ));
    }

    #[test]
    fn polar_chart_values() {
        let chart = polar_plane_chart(0.3, 6.0);
        let g = chart.metric_at(&[2.0, 0.0]).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g[(1, 1)], 4.0, epsilon = 1e-14);
        let packet = curvature_packet(&chart, &[2.0, 0.0]).unwrap();
        // Γ^r_{θθ} = -r, Γ^θ_{rθ} = 1/r
        assert_relative_eq!(packet.gamma(0, 1, 1), -2.0, epsilon = 1e-12);
        assert_relative_eq!(packet.gamma(1, 0, 1), 0.5, epsilon = 1e-12);
        assert!(packet.riemann_lowered.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn stereographic_sphere_metric_and_curvature() {
        let chart = stereographic_sphere_chart(2, 1.0, 3.0);
        let g = chart.metric_at(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(g[(0, 0)], 4.0, epsilon = 1e-14);
        assert_relative_eq!(g[(1, 1)], 4.0, epsilon = 1e-14);
        // sign convention regression: round sphere has sectional +1
        let packet = curvature_packet(&chart, &[0.4, -0.1]).unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        assert_relative_eq!(packet.sectional(&e1, &e2).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn sphere_radius_scaling() {
        let radius = 1.7;
        let chart = stereographic_sphere_chart(4, radius, 2.0);
        let packet = curvature_packet(&chart, &[0.2, 0.1, -0.3, 0.05]).unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let e3 = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        assert_relative_eq!(
            packet.sectional(&e1, &e3).unwrap(),
            1.0 / (radius * radius),
            epsilon = 1e-8
        );
    }

    #[test]
    fn product_chart_mixed_plane_is_flat() {
        let chart = sphere_flat_product_chart(1.0, 2, 2.5);
        let x = [0.2, -0.3, 0.7, 0.4];
        let packet = curvature_packet(&chart, &x).unwrap();
        let sphere_dir = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let flat_dir = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let k = packet.sectional(&sphere_dir, &flat_dir).unwrap();
        assert!(k.abs() < 1e-9, "mixed plane curvature {k}");
        let sphere_dir2 = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        assert_relative_eq!(packet.sectional(&sphere_dir, &sphere_dir2).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn degenerate_plane_rejected() {
        let chart = euclidean_chart(3, 2.0, None);
        let x = [0.0, 0.0, 0.0];
        let u = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let v = DVector::from_vec(vec![2.0, 1e-13, 0.0]);
        assert!(matches!(
            sectional(&chart, &x, &u, &v),
            Err(GeometryError::DegeneratePlane { .. })
        ));
    }

    #[test]
    fn ric_k_euclidean_zero_and_bad_inputs() {
        let chart = euclidean_chart(4, 2.0, None);
        let x = [0.1, 0.2, -0.4, 0.0];
        let unit = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let frame = vec![
            DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]),
        ];
        assert_relative_eq!(ric_k(&chart, &x, &unit, &frame).unwrap(), 0.0, epsilon = 1e-12);

        let skewed = vec![DVector::from_vec(vec![0.5, 1.0, 0.0, 0.0])];
        assert!(matches!(
            ric_k(&chart, &x, &unit, &skewed),
            Err(GeometryError::NonOrthonormalInput { .. })
        ));
        assert!(matches!(
            ric_k(&chart, &x, &unit, &vec![]),
            Err(GeometryError::BadK { .. })
        ));
    }

    #[test]
    fn ric_k_constant_curvature_sphere() {
        let radius = 2.0;
        let chart = stereographic_sphere_chart(4, radius, 2.0);
        let x = [0.3, -0.2, 0.1, 0.4];
        let packet = curvature_packet(&chart, &x).unwrap();
        let mut rng = sampling::rng_from_seed(11);
        let frame = sampling::random_frame(&mut rng, &packet.metric, 4);
        let value = ric_k(&chart, &x, &frame[0], &frame[1..]).unwrap();
        assert_relative_eq!(value, 1.0 / (radius * radius), epsilon = 1e-6);
    }

    #[test]
    fn min_ric_k_samples() {
        let chart = euclidean_chart(4, 2.0, None);
        let min = min_ric_k_sample(&chart, 1, 10, 4, 7).unwrap();
        assert!(min.abs() < 1e-8);

        let sphere = stereographic_sphere_chart(4, 1.0, 2.0);
        let min = min_ric_k_sample(&sphere, 3, 10, 4, 7).unwrap();
        assert_relative_eq!(min, 1.0, epsilon = 1e-5);
    }

    #[test]
    fn min_ric_k_deterministic() {
        let sphere = stereographic_sphere_chart(3, 1.0, 2.0);
        let a = min_ric_k_sample(&sphere, 2, 6, 3, 42).unwrap();
        let b = min_ric_k_sample(&sphere, 2, 6, 3, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fd_mode_matches_analytic_on_sphere() {
        let chart = stereographic_sphere_chart(3, 1.3, 2.0);
        let fd = chart.with_finite_differences();
        let x = [0.3, 0.1, -0.2];
        let pa = curvature_packet(&chart, &x).unwrap();
        let pf = curvature_packet(&fd, &x).unwrap();
        for (a, b) in pa.riemann_lowered.iter().zip(&pf.riemann_lowered) {
            assert!((a - b).abs() < 1e-6, "analytic {a} vs fd {b}");
        }
        assert!(pf.symmetry_defect() < fd.symmetry_tolerance());
        assert!(pf.bianchi_defect() < fd.symmetry_tolerance());
    }

    #[test]
    fn fd_margin_enforced() {
        let chart = euclidean_chart(2, 1.0, None).with_finite_differences();
        let near_edge = [1.0 - 1e-6, 0.0];
        assert!(matches!(
            curvature_packet(&chart, &near_edge),
            Err(GeometryError::PointTooNearBoundary { .. })
        ));
    }

    #[test]
    fn ricci_contraction_consistency() {
        // ric_{N-1}(X, X^⊥)·(N-1) equals the metric Ricci contraction
        let chart = stereographic_sphere_chart(3, 1.0, 2.0);
        let x = [0.2, -0.4, 0.1];
        let packet = curvature_packet(&chart, &x).unwrap();
        let mut rng = sampling::rng_from_seed(5);
        let frame = sampling::random_frame(&mut rng, &packet.metric, 3);
        let rk = ric_k(&chart, &x, &frame[0], &frame[1..]).unwrap();
        let ricci = packet.ricci_form(&frame[0]);
        assert_relative_eq!(rk * 2.0, ricci, epsilon = 1e-6);
    }
}
