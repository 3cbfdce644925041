//! Registered chart constructors: Euclidean space, the flat plane in polar
//! coordinates, stereographic spheres, sphere × flat products, and the
//! rotationally symmetric model `dr² + h(r)² dω²` built from a decay profile
//! (with `h'' = λ h`, `h(0) = 0`, `h'(0) = 1`) expressed in Cartesian-like
//! coordinates that stay regular through the center.

use super::{DerivativeMode, MetricChart, Region};
use crate::profile::AsymptoticProfile;
use nalgebra::DMatrix;
use std::sync::Arc;

/// Flat `ℝ^dim` on the cube `[-half, half]^dim`; `base` is the reference
/// point for ambient distances (defaults to the origin).
pub fn euclidean_chart(dim: usize, half: f64, base: Option<Vec<f64>>) -> MetricChart {
    let base = base.unwrap_or_else(|| vec![0.0; dim]);
    assert_eq!(base.len(), dim);
    let zero_grad: Vec<DMatrix<f64>> = vec![DMatrix::zeros(dim, dim); dim];
    let zero_hess: Vec<Vec<DMatrix<f64>>> = vec![vec![DMatrix::zeros(dim, dim); dim]; dim];
    MetricChart::new(
        format!("euclidean({dim})"),
        dim,
        Region::cube(dim, half),
        DerivativeMode::Analytic,
        Arc::new(move |_: &[f64]| DMatrix::identity(dim, dim)),
        Some(Arc::new(move |_: &[f64]| zero_grad.clone())),
        Some(Arc::new(move |_: &[f64]| zero_hess.clone())),
        Some(Arc::new(move |x: &[f64]| {
            x.iter()
                .zip(&base)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })),
    )
}

/// The flat plane in polar coordinates `(r, θ)`, `g = dr² + r² dθ²`, on
/// `r ∈ [r_min, r_max]`, `θ ∈ [-π, π]`.
pub fn polar_plane_chart(r_min: f64, r_max: f64) -> MetricChart {
    assert!(r_min > 0.0 && r_max > r_min);
    MetricChart::new(
        "polar2",
        2,
        Region::new(
            vec![r_min, -std::f64::consts::PI],
            vec![r_max, std::f64::consts::PI],
        ),
        DerivativeMode::Analytic,
        Arc::new(|x: &[f64]| DMatrix::from_diagonal(&nalgebra::dvector![1.0, x[0] * x[0]])),
        Some(Arc::new(|x: &[f64]| {
            vec![
                DMatrix::from_diagonal(&nalgebra::dvector![0.0, 2.0 * x[0]]),
                DMatrix::zeros(2, 2),
            ]
        })),
        Some(Arc::new(|_: &[f64]| {
            let mut d2 = vec![vec![DMatrix::zeros(2, 2); 2]; 2];
            d2[0][0] = DMatrix::from_diagonal(&nalgebra::dvector![0.0, 2.0]);
            d2
        })),
        None,
    )
}

/// Round sphere `S^dim(radius)` in stereographic coordinates,
/// `g = ψ(x) δ` with `ψ = 4R⁴ / (R² + |x|²)²`, on `[-half, half]^dim`.
pub fn stereographic_sphere_chart(dim: usize, radius: f64, half: f64) -> MetricChart {
    assert!(radius > 0.0);
    let r2 = radius * radius;
    let psi = move |x: &[f64]| {
        let rho: f64 = x.iter().map(|v| v * v).sum();
        4.0 * r2 * r2 / ((r2 + rho) * (r2 + rho))
    };
    MetricChart::new(
        format!("sphere{dim}(r={radius})"),
        dim,
        Region::cube(dim, half),
        DerivativeMode::Analytic,
        Arc::new(move |x: &[f64]| DMatrix::identity(dim, dim) * psi(x)),
        Some(Arc::new(move |x: &[f64]| {
            let rho: f64 = x.iter().map(|v| v * v).sum();
            let denom = r2 + rho;
            (0..dim)
                .map(|k| {
                    let dpsi = -16.0 * r2 * r2 * x[k] / denom.powi(3);
                    DMatrix::identity(dim, dim) * dpsi
                })
                .collect()
        })),
        Some(Arc::new(move |x: &[f64]| {
            let rho: f64 = x.iter().map(|v| v * v).sum();
            let denom = r2 + rho;
            let mut d2 = vec![vec![DMatrix::zeros(dim, dim); dim]; dim];
            for k in 0..dim {
                for l in 0..dim {
                    let kron = if k == l { 1.0 } else { 0.0 };
                    let d2psi = -16.0 * r2 * r2 * kron / denom.powi(3)
                        + 96.0 * r2 * r2 * x[k] * x[l] / denom.powi(4);
                    d2[k][l] = DMatrix::identity(dim, dim) * d2psi;
                }
            }
            d2
        })),
        Some(Arc::new(move |x: &[f64]| {
            let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            2.0 * radius * (norm / radius).atan()
        })),
    )
}

/// Product `S²(radius) × ℝ^flat_dim`: stereographic sphere block plus an
/// identity flat block.
pub fn sphere_flat_product_chart(radius: f64, flat_dim: usize, half: f64) -> MetricChart {
    let dim = 2 + flat_dim;
    let r2 = radius * radius;
    MetricChart::new(
        format!("sphere2xflat{flat_dim}(r={radius})"),
        dim,
        Region::cube(dim, half),
        DerivativeMode::Analytic,
        Arc::new(move |x: &[f64]| {
            let rho = x[0] * x[0] + x[1] * x[1];
            let psi = 4.0 * r2 * r2 / ((r2 + rho) * (r2 + rho));
            let mut g = DMatrix::identity(dim, dim);
            g[(0, 0)] = psi;
            g[(1, 1)] = psi;
            g
        }),
        Some(Arc::new(move |x: &[f64]| {
            let rho = x[0] * x[0] + x[1] * x[1];
            let denom = r2 + rho;
            (0..dim)
                .map(|k| {
                    let mut dg = DMatrix::zeros(dim, dim);
                    if k < 2 {
                        let dpsi = -16.0 * r2 * r2 * x[k] / denom.powi(3);
                        dg[(0, 0)] = dpsi;
                        dg[(1, 1)] = dpsi;
                    }
                    dg
                })
                .collect()
        })),
        Some(Arc::new(move |x: &[f64]| {
            let rho = x[0] * x[0] + x[1] * x[1];
            let denom = r2 + rho;
            let mut d2 = vec![vec![DMatrix::zeros(dim, dim); dim]; dim];
            for k in 0..2 {
                for l in 0..2 {
                    let kron = if k == l { 1.0 } else { 0.0 };
                    let d2psi = -16.0 * r2 * r2 * kron / denom.powi(3)
                        + 96.0 * r2 * r2 * x[k] * x[l] / denom.powi(4);
                    d2[k][l][(0, 0)] = d2psi;
                    d2[k][l][(1, 1)] = d2psi;
                }
            }
            d2
        })),
        None,
    )
}

/// Precomputed radial data for the warped model chart. Stores `w = h - r`
/// (which vanishes to third order at the center, so no cancellation when
/// forming `h/r`) on a dense grid, plus the series coefficients used below
/// the switch radius.
struct WarpTable {
    step: f64,
    w: Vec<f64>,
    wp: Vec<f64>,
    profile: AsymptoticProfile,
    /// Coefficients of `2q + q²= Σ c_k r^{k+2}` where `q = w/r`.
    c: [f64; 5],
    r_switch: f64,
}

/// Scalar warp data at radius `r`: the metric is
/// `g_ij = A(r) δ_ij + C(r) x_i x_j` with `A = (h/r)²`, `C = (1 - A)/r²`.
struct WarpJet {
    a: f64,
    c: f64,
    /// `A'/r`
    t1: f64,
    /// `C'/r`
    t2: f64,
    /// `(A''·r - A')/r³`
    u1r: f64,
    /// `(C''·r - C')/r³`
    u2r: f64,
}

impl WarpTable {
    fn build(profile: &AsymptoticProfile, r_max: f64) -> Self {
        let l = profile.taylor_at_zero();
        let a3 = l[0] / 6.0;
        let a4 = l[1] / 12.0;
        let a5 = (l[2] + l[0] * l[0] / 6.0) / 20.0;
        let a6 = (l[3] + l[0] * l[1] / 4.0) / 30.0;
        let a7 = (l[4] + l[2] * l[0] / 6.0 + l[1] * l[1] / 12.0
            + l[0] * (l[2] + l[0] * l[0] / 6.0) / 20.0)
            / 42.0;
        let (b2, b3, b4, b5, b6) = (a3, a4, a5, a6, a7);
        let c = [
            2.0 * b2,
            2.0 * b3,
            2.0 * b4 + b2 * b2,
            2.0 * b5 + 2.0 * b2 * b3,
            2.0 * b6 + 2.0 * b2 * b4 + b3 * b3,
        ];

        // w'' = λ(r)(r + w), w(0) = w'(0) = 0, classical RK4
        let step = 1.0e-4;
        let n = (r_max / step).ceil() as usize + 2;
        let mut w = Vec::with_capacity(n + 1);
        let mut wp = Vec::with_capacity(n + 1);
        w.push(0.0);
        wp.push(0.0);
        let f = |r: f64, w: f64| profile.eval(r) * (r + w);
        let (mut y, mut yp) = (0.0_f64, 0.0_f64);
        for i in 0..n {
            let r = i as f64 * step;
            let k1 = (yp, f(r, y));
            let k2 = (yp + 0.5 * step * k1.1, f(r + 0.5 * step, y + 0.5 * step * k1.0));
            let k3 = (yp + 0.5 * step * k2.1, f(r + 0.5 * step, y + 0.5 * step * k2.0));
            let k4 = (yp + step * k3.1, f(r + step, y + step * k3.0));
            y += step / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            yp += step / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            w.push(y);
            wp.push(yp);
        }
        WarpTable {
            step,
            w,
            wp,
            profile: profile.clone(),
            c,
            r_switch: 0.05,
        }
    }

    /// Hermite interpolation of `(w, w')`; node accelerations come from the
    /// ODE itself.
    fn interp(&self, r: f64) -> (f64, f64) {
        let idx = ((r / self.step) as usize).min(self.w.len() - 2);
        let r0 = idx as f64 * self.step;
        let t = (r - r0) / self.step;
        let (w0, w1) = (self.w[idx], self.w[idx + 1]);
        let (p0, p1) = (self.wp[idx], self.wp[idx + 1]);
        let a0 = self.profile.eval(r0) * (r0 + w0);
        let a1 = self.profile.eval(r0 + self.step) * (r0 + self.step + w1);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let w = h00 * w0 + h10 * self.step * p0 + h01 * w1 + h11 * self.step * p1;
        let wp = h00 * p0 + h10 * self.step * a0 + h01 * p1 + h11 * self.step * a1;
        (w, wp)
    }

    fn jet(&self, r: f64) -> WarpJet {
        if r < self.r_switch {
            let c = &self.c;
            let r_safe = r.max(1.0e-10);
            WarpJet {
                a: 1.0 + r * r * (c[0] + r * (c[1] + r * (c[2] + r * (c[3] + r * c[4])))),
                c: -(c[0] + r * (c[1] + r * (c[2] + r * (c[3] + r * c[4])))),
                t1: 2.0 * c[0]
                    + r * (3.0 * c[1] + r * (4.0 * c[2] + r * (5.0 * c[3] + r * 6.0 * c[4]))),
                t2: -(c[1] / r_safe + 2.0 * c[2] + r * (3.0 * c[3] + r * 4.0 * c[4])),
                u1r: 3.0 * c[1] / r_safe + 8.0 * c[2] + r * (15.0 * c[3] + r * 24.0 * c[4]),
                u2r: c[1] / (r_safe * r_safe * r_safe)
                    - 3.0 * c[3] / r_safe
                    - 8.0 * c[4],
            }
        } else {
            let (w, wp) = self.interp(r);
            let wpp = self.profile.eval(r) * (r + w);
            let q = w / r;
            let qp = (wp - q) / r;
            let qpp = (wpp - 2.0 * qp) / r;
            let a = (1.0 + q) * (1.0 + q);
            let ap = 2.0 * (1.0 + q) * qp;
            let app = 2.0 * qp * qp + 2.0 * (1.0 + q) * qpp;
            let c = -(w / (r * r * r)) * (2.0 + q);
            let cp = -ap / (r * r) - 2.0 * c / r;
            let cpp = -app / (r * r) + 2.0 * ap / (r * r * r) - 2.0 * cp / r + 2.0 * c / (r * r);
            WarpJet {
                a,
                c,
                t1: ap / r,
                t2: cp / r,
                u1r: (app * r - ap) / (r * r * r),
                u2r: (cpp * r - cp) / (r * r * r),
            }
        }
    }

    /// `(h, h')` at radius r, for curvature oracles.
    fn growth(&self, r: f64) -> (f64, f64) {
        let (w, wp) = self.interp(r);
        (r + w, 1.0 + wp)
    }
}

/// Rotationally symmetric model `dr² + h(r)² dω²` with `h'' = λ h` in
/// center-regular coordinates on `[-half, half]^dim`.
///
/// The radial sectional curvature is exactly `-λ(r)`; the spherical one is
/// `(1 - h'²)/h²`. Ambient distance from the center is the coordinate
/// radius.
pub fn warped_profile_chart(profile: &AsymptoticProfile, dim: usize, half: f64) -> MetricChart {
    assert!(dim >= 2);
    let r_max = half * (dim as f64).sqrt() * 1.05 + 1.0;
    let table = Arc::new(WarpTable::build(profile, r_max));

    let t_eval = table.clone();
    let t_grad = table.clone();
    let t_hess = table.clone();
    MetricChart::new(
        format!("warped{dim}"),
        dim,
        Region::cube(dim, half),
        DerivativeMode::Analytic,
        Arc::new(move |x: &[f64]| {
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let jet = t_eval.jet(r);
            let mut g = DMatrix::identity(x.len(), x.len()) * jet.a;
            for i in 0..x.len() {
                for j in 0..x.len() {
                    g[(i, j)] += jet.c * x[i] * x[j];
                }
            }
            g
        }),
        Some(Arc::new(move |x: &[f64]| {
            let n = x.len();
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r < 1.0e-10 {
                return vec![DMatrix::zeros(n, n); n];
            }
            let jet = t_grad.jet(r);
            (0..n)
                .map(|k| {
                    let mut dg = DMatrix::zeros(n, n);
                    for i in 0..n {
                        dg[(i, i)] += jet.t1 * x[k];
                        for j in 0..n {
                            dg[(i, j)] += jet.t2 * x[k] * x[i] * x[j];
                        }
                        dg[(k, i)] += jet.c * x[i];
                        dg[(i, k)] += jet.c * x[i];
                    }
                    dg
                })
                .collect()
        })),
        Some(Arc::new(move |x: &[f64]| {
            let n = x.len();
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let jet = t_hess.jet(r);
            let mut d2 = vec![vec![DMatrix::zeros(n, n); n]; n];
            if r < 1.0e-10 {
                // exact center limit: g ≈ (1 + c₀ r²) δ - c₀ x xᵀ
                for k in 0..n {
                    for l in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                let mut v = 0.0;
                                if k == l && i == j {
                                    v += jet.t1;
                                }
                                if i == k && j == l {
                                    v += jet.c;
                                }
                                if j == k && i == l {
                                    v += jet.c;
                                }
                                d2[k][l][(i, j)] = v;
                            }
                        }
                    }
                }
                return d2;
            }
            for k in 0..n {
                for l in 0..n {
                    let m = &mut d2[k][l];
                    for i in 0..n {
                        for j in 0..n {
                            let mut v = jet.u2r * x[l] * x[k] * x[i] * x[j];
                            if i == j {
                                v += jet.u1r * x[l] * x[k];
                                if k == l {
                                    v += jet.t1;
                                }
                            }
                            if k == l {
                                v += jet.t2 * x[i] * x[j];
                            }
                            if i == l {
                                v += jet.t2 * x[k] * x[j];
                            }
                            if j == l {
                                v += jet.t2 * x[k] * x[i];
                            }
                            if i == k {
                                v += jet.t2 * x[l] * x[j];
                            }
                            if j == k {
                                v += jet.t2 * x[l] * x[i];
                            }
                            if i == k && j == l {
                                v += jet.c;
                            }
                            if j == k && i == l {
                                v += jet.c;
                            }
                            m[(i, j)] = v;
                        }
                    }
                }
            }
            d2
        })),
        Some(Arc::new(move |x: &[f64]| {
            x.iter().map(|v| v * v).sum::<f64>().sqrt()
        })),
    )
}

/// `(h, h')` of the model chart profile at radius `r`; curvature oracle
/// helper for tests (spherical sectional is `(1 - h'²)/h²`).
pub fn warp_growth(profile: &AsymptoticProfile, r: f64) -> (f64, f64) {
    let table = WarpTable::build(profile, r + 1.0);
    table.growth(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature_packet, sectional};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn warped_zero_profile_is_flat() {
        let chart = warped_profile_chart(&AsymptoticProfile::zero(), 3, 4.0);
        let g = chart.metric_at(&[0.7, -0.3, 1.1]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(g[(i, j)], want, epsilon = 1e-12);
            }
        }
        let packet = curvature_packet(&chart, &[0.7, -0.3, 1.1]).unwrap();
        assert!(packet.riemann_lowered.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn warped_radial_curvature_matches_profile() {
        // radial planes have sectional exactly -λ(r)
        let profile = AsymptoticProfile::power(0.4, 3.0).unwrap();
        let chart = warped_profile_chart(&profile, 3, 4.0);
        for &r in &[0.3, 0.8, 1.7, 3.0] {
            let x = [r, 0.0, 0.0];
            let radial = DVector::from_vec(vec![1.0, 0.0, 0.0]);
            let transverse = DVector::from_vec(vec![0.0, 1.0, 0.0]);
            let k = sectional(&chart, &x, &radial, &transverse).unwrap();
            assert_relative_eq!(k, -profile.eval(r), epsilon = 3e-5, max_relative = 3e-5);
        }
    }

    #[test]
    fn warped_spherical_curvature_matches_growth_oracle() {
        let profile = AsymptoticProfile::exponential(0.5).unwrap();
        let chart = warped_profile_chart(&profile, 3, 4.0);
        for &r in &[0.5, 1.2, 2.5] {
            let x = [0.0, 0.0, r];
            let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
            let e2 = DVector::from_vec(vec![0.0, 1.0, 0.0]);
            let k = sectional(&chart, &x, &e1, &e2).unwrap();
            let (h, hp) = warp_growth(&profile, r);
            assert_relative_eq!(k, (1.0 - hp * hp) / (h * h), epsilon = 3e-5, max_relative = 3e-5);
        }
    }

    #[test]
    fn warped_jets_consistent_with_finite_differences() {
        let profile = AsymptoticProfile::power(0.6, 3.0).unwrap();
        let chart = warped_profile_chart(&profile, 3, 4.0);
        let fd = chart.with_finite_differences();
        for x in [[0.4, -0.2, 0.6], [0.02, 0.01, -0.015], [1.5, 0.0, 0.2]] {
            let (_, dga, d2ga) = chart.metric_jets(&x);
            let (_, dgf, d2gf) = fd.metric_jets(&x);
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        assert!(
                            (dga[k][(i, j)] - dgf[k][(i, j)]).abs() < 2e-6,
                            "grad mismatch at {x:?}"
                        );
                        for l in 0..3 {
                            assert!(
                                (d2ga[k][l][(i, j)] - d2gf[k][l][(i, j)]).abs() < 5e-4,
                                "hess mismatch at {x:?}: {} vs {}",
                                d2ga[k][l][(i, j)],
                                d2gf[k][l][(i, j)]
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn warped_symmetry_identities_tight() {
        let profile = AsymptoticProfile::power(0.5, 3.0).unwrap();
        let chart = warped_profile_chart(&profile, 4, 4.0);
        for x in [[0.3, 0.1, -0.4, 0.6], [0.01, 0.02, 0.0, -0.01], [2.0, 1.0, 0.5, -1.0]] {
            let packet = curvature_packet(&chart, &x).unwrap();
            assert!(
                packet.symmetry_defect() < chart.symmetry_tolerance(),
                "defect {} at {:?}",
                packet.symmetry_defect(),
                x
            );
            assert!(packet.bianchi_defect() < chart.symmetry_tolerance());
        }
    }

    #[test]
    fn warped_min_sectional_bounded_by_profile_origin_value() {
        // every sectional of the model is ≥ -λ(0)
        let profile = AsymptoticProfile::power(0.3, 3.0).unwrap();
        let chart = warped_profile_chart(&profile, 3, 3.0);
        let min = crate::geometry::min_ric_k_sample(&chart, 1, 40, 6, 17).unwrap();
        assert!(
            min >= -profile.eval(0.0) - 1.0e-4,
            "min sectional {min} vs -λ(0) = {}",
            -profile.eval(0.0)
        );
    }
}
