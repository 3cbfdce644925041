//! Geodesic integration, parallel frames, and the transport rays
//! `t ↦ exp_x̄(t·(D^Σu + ȳ))` that carry the Jacobi-matrix system.

mod avr;
mod jacobi;

pub use avr::{avr_estimate, AvrEstimate, AvrMode};
pub use jacobi::{
    det_bound_check, evolve_jacobi, partial_traces_s, riccati_trace_residual, DetBoundMode,
    DetBoundReport, JacobiSystem, RiccatiResidualReport,
};

use crate::geometry::{christoffels_unchecked, GeometryError, MetricChart};
use crate::sampling;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative Richardson tolerance for geodesic integration.
pub const TAU_GEO: f64 = 1.0e-7;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("geodesic left the chart region at t = {exit_time}")]
    LeftChartRegion { exit_time: f64 },
    #[error("geodesic integrator unconverged (Richardson estimate {estimate})")]
    Unconverged { estimate: f64 },
    #[error("initial frame not orthonormal (max deviation {deviation})")]
    FrameNotOrthonormal { deviation: f64 },
    #[error("ray velocity vanishes; no transport direction")]
    DegenerateVelocity,
    #[error("first conjugate point at t = {t}, before the requested horizon {horizon}")]
    ConjugateBeforeHorizon { t: f64, horizon: f64 },
    #[error("Jacobi matrix singular at t = {t}; Riccati data unavailable there")]
    SingularJacobiMatrix { t: f64 },
    #[error("tidal trace bound violated: residual {residual} exceeds {tol}")]
    TraceInequalityViolated { residual: f64, tol: f64 },
    #[error("determinant bound violated: min relative slack {min_slack}")]
    BoundViolated { min_slack: f64 },
    #[error("ball of radius {r} does not fit inside the chart region")]
    RadiusExceedsChart { r: f64 },
    #[error("volume estimation needs at least 100 directions, got {0}")]
    TooFewDirections(usize),
    #[error("geodesic shooting failed to converge after {iterations} iterations")]
    ShootingFailed { iterations: usize },
}

/// Samples of a geodesic `(γ(t), γ'(t))` on a uniform grid.
#[derive(Debug, Clone)]
pub struct GeodesicTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    pub accelerations: Vec<DVector<f64>>,
    pub step: f64,
    /// Set when the trajectory stopped early at the region boundary.
    pub exit_time: Option<f64>,
    /// Max deviation of `|γ'|_g` from its initial value.
    pub speed_drift: f64,
    /// Richardson estimate of the relative position error.
    pub richardson_error: f64,
}

impl GeodesicTrajectory {
    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Cubic Hermite interpolation of position and velocity.
    pub fn state_at(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let k = ((t / self.step) as usize).min(self.times.len() - 2);
        let s = (t - self.times[k]) / self.step;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let x = &self.positions[k] * h00
            + &self.velocities[k] * (h10 * self.step)
            + &self.positions[k + 1] * h01
            + &self.velocities[k + 1] * (h11 * self.step);
        let v = &self.velocities[k] * h00
            + &self.accelerations[k] * (h10 * self.step)
            + &self.velocities[k + 1] * h01
            + &self.accelerations[k + 1] * (h11 * self.step);
        (x, v)
    }
}

fn geodesic_acceleration(gamma: &[f64], n: usize, v: &DVector<f64>) -> DVector<f64> {
    let mut acc = DVector::zeros(n);
    for k in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += gamma[(k * n + i) * n + j] * v[i] * v[j];
            }
        }
        acc[k] = -s;
    }
    acc
}

/// RK4 integration of the geodesic equation `ẍ^k + Γ^k_{ij} ẋ^i ẋ^j = 0`.
///
/// Stops early (with `exit_time` set) when the path leaves the chart region;
/// the Richardson estimate compares against a half-step rerun.
pub fn exp_map(
    chart: &MetricChart,
    x0: &[f64],
    v0: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<GeodesicTrajectory, TransportError> {
    let n = chart.dim;
    chart.metric_at(x0)?;
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;

    let run = |h: f64, count: usize| -> (Vec<DVector<f64>>, Vec<DVector<f64>>, Option<f64>) {
        let mut x = DVector::from_column_slice(x0);
        let mut v = v0.clone();
        let mut xs = vec![x.clone()];
        let mut vs = vec![v.clone()];
        let mut exit = None;
        for i in 0..count {
            let accel = |x: &DVector<f64>, v: &DVector<f64>| -> DVector<f64> {
                let (_, gamma) = christoffels_unchecked(chart, x.as_slice());
                geodesic_acceleration(&gamma, n, v)
            };
            let k1 = (v.clone(), accel(&x, &v));
            let x2 = &x + &k1.0 * (0.5 * h);
            let v2 = &v + &k1.1 * (0.5 * h);
            let k2 = (v2.clone(), accel(&x2, &v2));
            let x3 = &x + &k2.0 * (0.5 * h);
            let v3 = &v + &k2.1 * (0.5 * h);
            let k3 = (v3.clone(), accel(&x3, &v3));
            let x4 = &x + &k3.0 * h;
            let v4 = &v + &k3.1 * h;
            let k4 = (v4.clone(), accel(&x4, &v4));
            x += (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * (h / 6.0);
            v += (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * (h / 6.0);
            if !chart.region.contains(x.as_slice()) {
                exit = Some((i + 1) as f64 * h);
                break;
            }
            xs.push(x.clone());
            vs.push(v.clone());
        }
        (xs, vs, exit)
    };

    let (cx, _, coarse_exit) = run(dt, steps);
    let (fx, fv, fine_exit) = run(0.5 * dt, 2 * steps);
    let exit_time = fine_exit.or(coarse_exit);

    let kept = cx.len().min(fx.len() / 2 + 1);
    let scale = fx
        .iter()
        .flat_map(|p| p.iter())
        .fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut diff = 0.0_f64;
    let mut positions = Vec::with_capacity(kept);
    let mut velocities = Vec::with_capacity(kept);
    let mut accelerations = Vec::with_capacity(kept);
    let g0 = chart.metric_unchecked(x0);
    let speed0 = v0.dot(&(&g0 * v0)).sqrt();
    let mut drift = 0.0_f64;
    for k in 0..kept {
        let x = fx[2 * k].clone();
        let v = fv[2 * k].clone();
        diff = diff.max((&cx[k] - &x).amax());
        let (g, gamma) = christoffels_unchecked(chart, x.as_slice());
        accelerations.push(geodesic_acceleration(&gamma, n, &v));
        let speed = v.dot(&(&g * &v)).sqrt();
        drift = drift.max((speed - speed0).abs());
        positions.push(x);
        velocities.push(v);
    }
    let richardson = diff / (15.0 * scale);
    if richardson > TAU_GEO {
        return Err(TransportError::Unconverged {
            estimate: richardson,
        });
    }
    Ok(GeodesicTrajectory {
        times: (0..kept).map(|k| k as f64 * dt).collect(),
        positions,
        velocities,
        accelerations,
        step: dt,
        exit_time,
        speed_drift: drift,
        richardson_error: richardson,
    })
}

/// Like [`exp_map`] but treats an early region exit as an error.
pub fn exp_map_strict(
    chart: &MetricChart,
    x0: &[f64],
    v0: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<GeodesicTrajectory, TransportError> {
    let geo = exp_map(chart, x0, v0, t_end, dt)?;
    if let Some(exit_time) = geo.exit_time {
        return Err(TransportError::LeftChartRegion { exit_time });
    }
    Ok(geo)
}

/// Parallel-transported frames along a geodesic; column `A` of each matrix
/// is `E_A(t)`.
#[derive(Debug, Clone)]
pub struct FrameTrajectory {
    pub times: Vec<f64>,
    pub frames: Vec<DMatrix<f64>>,
    pub derivs: Vec<DMatrix<f64>>,
    /// Max deviation of `⟨E_A, E_B⟩_g` from `δ_AB` over all samples.
    pub orthonormality_drift: f64,
}

/// Solves `Ė^k = -Γ^k_{ij} γ̇^i E^j` along the stored geodesic, for the
/// initial frame given by the columns of `frame0`.
pub fn parallel_frame(
    chart: &MetricChart,
    geo: &GeodesicTrajectory,
    frame0: &[DVector<f64>],
) -> Result<FrameTrajectory, TransportError> {
    let n = chart.dim;
    let g0 = chart.metric_unchecked(geo.positions[0].as_slice());
    let deviation = frame_deviation(&g0, frame0);
    if deviation > 1.0e-8 {
        return Err(TransportError::FrameNotOrthonormal { deviation });
    }
    let cols = frame0.len();
    let mut e = DMatrix::zeros(n, cols);
    for (a, v) in frame0.iter().enumerate() {
        e.set_column(a, v);
    }

    let transport_rate = |x: &DVector<f64>, v: &DVector<f64>, e: &DMatrix<f64>| -> DMatrix<f64> {
        let (_, gamma) = christoffels_unchecked(chart, x.as_slice());
        let mut de = DMatrix::zeros(n, cols);
        for a in 0..cols {
            for k in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += gamma[(k * n + i) * n + j] * v[i] * e[(j, a)];
                    }
                }
                de[(k, a)] = -s;
            }
        }
        de
    };

    let h = geo.step;
    let mut frames = vec![e.clone()];
    let mut derivs = vec![transport_rate(&geo.positions[0], &geo.velocities[0], &e)];
    let mut drift = deviation;
    for k in 0..geo.times.len() - 1 {
        let t = geo.times[k];
        let (xm, vm) = geo.state_at(t + 0.5 * h);
        let k1 = transport_rate(&geo.positions[k], &geo.velocities[k], &e);
        let k2 = transport_rate(&xm, &vm, &(&e + &k1 * (0.5 * h)));
        let k3 = transport_rate(&xm, &vm, &(&e + &k2 * (0.5 * h)));
        let k4 = transport_rate(
            &geo.positions[k + 1],
            &geo.velocities[k + 1],
            &(&e + &k3 * h),
        );
        e += (k1 + k2 * 2.0 + k3 * 2.0 + &k4) * (h / 6.0);
        let g = chart.metric_unchecked(geo.positions[k + 1].as_slice());
        let gram = e.transpose() * &g * &e;
        for i in 0..cols {
            for j in 0..cols {
                let want = if i == j { 1.0 } else { 0.0 };
                drift = drift.max((gram[(i, j)] - want).abs());
            }
        }
        derivs.push(transport_rate(&geo.positions[k + 1], &geo.velocities[k + 1], &e));
        frames.push(e.clone());
    }
    Ok(FrameTrajectory {
        times: geo.times.clone(),
        frames,
        derivs,
        orthonormality_drift: drift,
    })
}

fn frame_deviation(g: &DMatrix<f64>, frame: &[DVector<f64>]) -> f64 {
    let mut deviation = 0.0_f64;
    for (i, a) in frame.iter().enumerate() {
        for (j, b) in frame.iter().enumerate().skip(i) {
            let d = a.dot(&(g * b));
            let want = if i == j { 1.0 } else { 0.0 };
            deviation = deviation.max((d - want).abs());
        }
    }
    deviation
}

/// G-orthonormalizes `seeds` greedily, skipping numerically dependent ones,
/// until `count` vectors are collected.
pub fn greedy_orthonormalize(
    g: &DMatrix<f64>,
    seeds: &[DVector<f64>],
    count: usize,
) -> Option<Vec<DVector<f64>>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(count);
    for seed in seeds {
        if basis.len() == count {
            break;
        }
        let mut v = seed.clone();
        for b in &basis {
            let c = b.dot(&(g * &v));
            v -= b * c;
        }
        let norm2 = v.dot(&(g * &v));
        if norm2 > 1.0e-20 {
            basis.push(v / norm2.sqrt());
        }
    }
    (basis.len() == count).then_some(basis)
}

/// One transport ray `γ̄(t) = exp_x̄(t (D^Σu + ȳ))` with its adapted parallel
/// frame: the first `tangent_dim` frame vectors start tangent to Σ (the
/// first parallel to `D^Σu` when it is nonzero), the remaining start normal
/// (the first of them parallel to `ȳ`).
#[derive(Debug, Clone)]
pub struct TransportRay {
    pub base_point: DVector<f64>,
    pub tangent_part: DVector<f64>,
    pub normal_part: DVector<f64>,
    pub tangent_dim: usize,
    /// `a = √(|D^Σu|² + |ȳ|²)`.
    pub speed: f64,
    /// `cos s = |D^Σu| / a`.
    pub cos_angle: f64,
    pub sin_angle: f64,
    pub geodesic: GeodesicTrajectory,
    pub frame: FrameTrajectory,
}

impl TransportRay {
    /// Integrates the ray and its parallel frame.
    ///
    /// `tangent_basis` must span `T_x̄Σ` (any basis, ambient components);
    /// the adapted orthonormal frame is constructed here.
    pub fn shoot(
        chart: &MetricChart,
        base: &[f64],
        tangent_part: &DVector<f64>,
        normal_part: &DVector<f64>,
        tangent_basis: &[DVector<f64>],
        horizon: f64,
        dt: f64,
    ) -> Result<TransportRay, TransportError> {
        let n_amb = chart.dim;
        let g = chart.metric_at(base)?;
        let tangent_dim = tangent_basis.len();
        let du_norm = tangent_part.dot(&(&g * tangent_part)).sqrt();
        let y_norm = normal_part.dot(&(&g * normal_part)).sqrt();
        let speed = (du_norm * du_norm + y_norm * y_norm).sqrt();
        if speed < 1.0e-12 {
            return Err(TransportError::DegenerateVelocity);
        }

        // tangent block: D^Σu first (when present), then the basis
        let mut tangent_seeds: Vec<DVector<f64>> = Vec::new();
        if du_norm > 1.0e-12 {
            tangent_seeds.push(tangent_part.clone());
        }
        tangent_seeds.extend_from_slice(tangent_basis);
        let tangent_frame = greedy_orthonormalize(&g, &tangent_seeds, tangent_dim)
            .ok_or(TransportError::FrameNotOrthonormal { deviation: 1.0 })?;

        // normal block: ȳ first (when present), then coordinate axes
        let mut normal_seeds: Vec<DVector<f64>> = Vec::new();
        if y_norm > 1.0e-12 {
            normal_seeds.push(normal_part.clone());
        }
        for axis in 0..n_amb {
            let mut v = DVector::zeros(n_amb);
            v[axis] = 1.0;
            normal_seeds.push(v);
        }
        let mut all = tangent_frame.clone();
        let full = {
            let mut collected = all.clone();
            for seed in &normal_seeds {
                if collected.len() == n_amb {
                    break;
                }
                let mut v = seed.clone();
                for b in &collected {
                    let c = b.dot(&(&g * &v));
                    v -= b * c;
                }
                let norm2 = v.dot(&(&g * &v));
                if norm2 > 1.0e-20 {
                    collected.push(v / norm2.sqrt());
                }
            }
            collected
        };
        if full.len() != n_amb {
            return Err(TransportError::FrameNotOrthonormal { deviation: 1.0 });
        }
        all = full;

        let velocity = tangent_part + normal_part;
        let geodesic = exp_map_strict(chart, base, &velocity, horizon, dt)?;
        let frame = parallel_frame(chart, &geodesic, &all)?;
        Ok(TransportRay {
            base_point: DVector::from_column_slice(base),
            tangent_part: tangent_part.clone(),
            normal_part: normal_part.clone(),
            tangent_dim,
            speed,
            cos_angle: du_norm / speed,
            sin_angle: y_norm / speed,
            geodesic,
            frame,
        })
    }

    pub fn normal_dim(&self) -> usize {
        self.base_point.len() - self.tangent_dim
    }
}

/// Newton shooting for the geodesic from `from` reaching `to` at time
/// `t_total`; returns the initial velocity. Used by the holonomy oracle.
pub fn shoot_geodesic_to(
    chart: &MetricChart,
    from: &[f64],
    to: &[f64],
    t_total: f64,
    dt: f64,
) -> Result<DVector<f64>, TransportError> {
    let n = chart.dim;
    let mut v: DVector<f64> =
        (DVector::from_column_slice(to) - DVector::from_column_slice(from)) / t_total;
    let target = DVector::from_column_slice(to);
    let endpoint = |v: &DVector<f64>| -> Result<DVector<f64>, TransportError> {
        let geo = exp_map_strict(chart, from, v, t_total, dt)?;
        Ok(geo.positions.last().unwrap().clone())
    };
    for _ in 0..30 {
        let end = endpoint(&v)?;
        let residual = &end - &target;
        if residual.amax() < 1.0e-10 {
            return Ok(v);
        }
        // finite-difference Jacobian of the endpoint w.r.t. v
        let eps = 1.0e-6;
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut vp = v.clone();
            vp[k] += eps;
            let ep = endpoint(&vp)?;
            jac.set_column(k, &((&ep - &end) / eps));
        }
        let delta = jac
            .lu()
            .solve(&residual)
            .ok_or(TransportError::ShootingFailed { iterations: 30 })?;
        v -= delta;
    }
    Err(TransportError::ShootingFailed { iterations: 30 })
}

/// Uniformly random g-unit vector at `x` (deterministic in the RNG state).
pub fn random_unit_vector(
    rng: &mut rand_chacha::ChaCha8Rng,
    g: &DMatrix<f64>,
) -> DVector<f64> {
    let n = g.nrows();
    loop {
        let v = sampling::gaussian_vector(rng, n);
        let norm2 = v.dot(&(g * &v));
        if norm2 > 1.0e-12 {
            return v / norm2.sqrt();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{euclidean_chart, polar_plane_chart, stereographic_sphere_chart};
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_geodesics_are_lines() {
        let chart = euclidean_chart(4, 10.0, None);
        let x0 = [0.1, -0.2, 0.3, 0.0];
        let v = DVector::from_vec(vec![0.5, 0.25, -0.1, 0.4]);
        let geo = exp_map_strict(&chart, &x0, &v, 5.0, 0.01).unwrap();
        for (t, p) in geo.times.iter().zip(&geo.positions) {
            for i in 0..4 {
                assert!((p[i] - (x0[i] + t * v[i])).abs() < 1e-12);
            }
        }
        assert!(geo.speed_drift < 1e-12);
    }

    #[test]
    fn sphere_geodesic_matches_great_circle() {
        // from the chart origin the radial coordinate is tan(t/2) for unit
        // speed (radius 1)
        let chart = stereographic_sphere_chart(2, 1.0, 8.0);
        let v = DVector::from_vec(vec![0.5, 0.0]); // |v|_g = 2·0.5 = 1
        let geo = exp_map_strict(&chart, &[0.0, 0.0], &v, 2.4, 0.005).unwrap();
        for (t, p) in geo.times.iter().zip(&geo.positions) {
            let radius = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!(
                (radius - (t / 2.0).tan()).abs() < 1e-6,
                "t={t}: {radius} vs {}",
                (t / 2.0).tan()
            );
        }
        assert!(geo.speed_drift < 1e-8);
    }

    #[test]
    fn sphere_geodesic_exits_chart() {
        let chart = stereographic_sphere_chart(2, 1.0, 4.0);
        let v = DVector::from_vec(vec![0.5, 0.0]);
        let geo = exp_map(&chart, &[0.0, 0.0], &v, 3.1, 0.005).unwrap();
        assert!(geo.exit_time.is_some(), "tan(t/2) exceeds the region before t = 3.1");
        assert!(matches!(
            exp_map_strict(&chart, &[0.0, 0.0], &v, 3.1, 0.005),
            Err(TransportError::LeftChartRegion { .. })
        ));
    }

    #[test]
    fn polar_chart_lines_match_cartesian() {
        let chart = polar_plane_chart(0.3, 12.0);
        // start at (r,θ) = (2, 0), velocity with dr/dt = 0.3, dθ/dt = 0.2
        let x0 = [2.0, 0.0];
        let v = DVector::from_vec(vec![0.3, 0.2]);
        let geo = exp_map_strict(&chart, &x0, &v, 4.0, 0.002).unwrap();
        // Cartesian straight line with the pushed-forward velocity
        let (cx, cy) = (2.0, 0.0);
        let (vx, vy) = (0.3, 2.0 * 0.2); // dx = dr·cosθ - r sinθ dθ, etc. at θ=0
        for (t, p) in geo.times.iter().zip(&geo.positions) {
            let (x, y) = (cx + vx * t, cy + vy * t);
            let r = (x * x + y * y).sqrt();
            let th = y.atan2(x);
            assert!((p[0] - r).abs() < 1e-7, "r at t={t}");
            assert!((p[1] - th).abs() < 1e-7, "θ at t={t}");
        }
    }

    #[test]
    fn parallel_transport_constant_in_flat_space() {
        let chart = euclidean_chart(3, 10.0, None);
        let v = DVector::from_vec(vec![1.0, 0.0, 0.5]);
        let geo = exp_map_strict(&chart, &[0.0, 0.0, 0.0], &v, 3.0, 0.01).unwrap();
        let frame0 = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
        ];
        let frames = parallel_frame(&chart, &geo, &frame0).unwrap();
        let last = frames.frames.last().unwrap();
        for a in 0..3 {
            for i in 0..3 {
                let want = if a == i { 1.0 } else { 0.0 };
                assert!((last[(i, a)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn polar_transport_matches_cartesian_constancy() {
        let chart = polar_plane_chart(0.3, 12.0);
        let x0 = [2.0, 0.3];
        let v = DVector::from_vec(vec![0.5, -0.05]);
        let geo = exp_map_strict(&chart, &x0, &v, 3.0, 0.002).unwrap();
        // transport the unit radial vector at the start
        let e_r = DVector::from_vec(vec![1.0, 0.0]);
        let e_t = DVector::from_vec(vec![0.0, 1.0 / x0[0]]);
        let frames = parallel_frame(&chart, &geo, &[e_r, e_t]).unwrap();
        assert!(frames.orthonormality_drift < 1e-8);
        // in Cartesian components the transported vector must stay constant
        let to_cartesian = |p: &DVector<f64>, w: &DVector<f64>| -> (f64, f64) {
            let (r, th) = (p[0], p[1]);
            (
                w[0] * th.cos() - r * th.sin() * w[1],
                w[0] * th.sin() + r * th.cos() * w[1],
            )
        };
        let first = to_cartesian(&geo.positions[0], &frames.frames[0].column(0).into_owned());
        for (p, e) in geo.positions.iter().zip(&frames.frames) {
            let cur = to_cartesian(p, &e.column(0).into_owned());
            assert!((cur.0 - first.0).abs() < 1e-7);
            assert!((cur.1 - first.1).abs() < 1e-7);
        }
    }

    #[test]
    fn sphere_holonomy_matches_triangle_area() {
        // Gauss-Bonnet oracle: transporting around a geodesic triangle turns
        // a vector by the enclosed area (unit sphere).
        let chart = stereographic_sphere_chart(2, 1.0, 8.0);
        let s = 0.4;
        let a = [0.0, 0.0];
        let geo_ab = exp_map_strict(&chart, &a, &DVector::from_vec(vec![0.5, 0.0]), s, 0.002).unwrap();
        let geo_ac = exp_map_strict(&chart, &a, &DVector::from_vec(vec![0.0, 0.5]), s, 0.002).unwrap();
        let b = geo_ab.positions.last().unwrap().clone();
        let c = geo_ac.positions.last().unwrap().clone();

        let g_at = |p: &DVector<f64>| chart.metric_unchecked(p.as_slice());

        // leg A→B with a transported vector
        let e0 = DVector::from_vec(vec![0.5, 0.0]); // unit at origin (g = 4δ)
        let fr_ab = parallel_frame(&chart, &geo_ab, &[e0.clone()]).unwrap();
        let w_b = fr_ab.frames.last().unwrap().column(0).into_owned();

        // leg B→C by shooting
        let v_bc = shoot_geodesic_to(&chart, b.as_slice(), c.as_slice(), s, 0.002).unwrap();
        let geo_bc = exp_map_strict(&chart, b.as_slice(), &v_bc, s, 0.002).unwrap();
        let gb = g_at(&b);
        let w_b_unit = &w_b / w_b.dot(&(&gb * &w_b)).sqrt();
        let fr_bc = parallel_frame(&chart, &geo_bc, &[w_b_unit]).unwrap();
        let w_c = fr_bc.frames.last().unwrap().column(0).into_owned();

        // leg C→A by transporting along the reversed A→C geodesic
        let v_ca = shoot_geodesic_to(&chart, c.as_slice(), &a, s, 0.002).unwrap();
        let geo_ca = exp_map_strict(&chart, c.as_slice(), &v_ca, s, 0.002).unwrap();
        let gc = g_at(&c);
        let w_c_unit = &w_c / w_c.dot(&(&gc * &w_c)).sqrt();
        let fr_ca = parallel_frame(&chart, &geo_ca, &[w_c_unit]).unwrap();
        let w_back = fr_ca.frames.last().unwrap().column(0).into_owned();

        // rotation angle of w_back against e0, measured with g(0) = 4δ
        let ga = g_at(&DVector::from_vec(vec![0.0, 0.0]));
        let e0n = &e0 / e0.dot(&(&ga * &e0)).sqrt();
        let wn = &w_back / w_back.dot(&(&ga * &w_back)).sqrt();
        let cos = e0n.dot(&(&ga * &wn)).clamp(-1.0, 1.0);
        let angle = cos.acos();

        // spherical triangle area from the spherical law of cosines: two
        // orthogonal legs of length s from A
        let cos_bc = (s.cos() * s.cos()).clamp(-1.0, 1.0);
        let bc = cos_bc.acos();
        let corner = |adj1: f64, adj2: f64, opp: f64| {
            ((opp.cos() - adj1.cos() * adj2.cos()) / (adj1.sin() * adj2.sin()))
                .clamp(-1.0, 1.0)
                .acos()
        };
        let angle_b = corner(s, bc, s);
        let angle_c = corner(s, bc, s);
        let area = std::f64::consts::FRAC_PI_2 + angle_b + angle_c - std::f64::consts::PI;

        assert!(
            (angle - area).abs() < 0.02 * area,
            "holonomy {angle} vs area {area}"
        );
    }

    #[test]
    fn transport_ray_construction() {
        let chart = euclidean_chart(4, 10.0, None);
        let tangent_basis = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]),
        ];
        let du = DVector::from_vec(vec![0.3, 0.1, 0.0, 0.0]);
        let y = DVector::from_vec(vec![0.0, 0.0, 0.5, 0.2]);
        let ray = TransportRay::shoot(&chart, &[0.0; 4], &du, &y, &tangent_basis, 4.0, 0.01).unwrap();
        let du_norm = (0.3_f64 * 0.3 + 0.1 * 0.1).sqrt();
        let y_norm = (0.5_f64 * 0.5 + 0.2 * 0.2).sqrt();
        assert_relative_eq!(ray.speed, (du_norm * du_norm + y_norm * y_norm).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(ray.cos_angle, du_norm / ray.speed, epsilon = 1e-12);
        // first frame vector parallel to du, (n+1)-st parallel to y
        let e1 = ray.frame.frames[0].column(0).into_owned();
        assert_relative_eq!(e1[0] * du[1], e1[1] * du[0], epsilon = 1e-12);
        let e3 = ray.frame.frames[0].column(2).into_owned();
        assert_relative_eq!(e3[2] * y[3], e3[3] * y[2], epsilon = 1e-12);
        assert!(ray.frame.orthonormality_drift < 1e-8);
    }

    #[test]
    fn degenerate_ray_rejected() {
        let chart = euclidean_chart(3, 5.0, None);
        let zero = DVector::zeros(3);
        let basis = vec![DVector::from_vec(vec![1.0, 0.0, 0.0])];
        assert!(matches!(
            TransportRay::shoot(&chart, &[0.0; 3], &zero, &zero, &basis, 1.0, 0.01),
            Err(TransportError::DegenerateVelocity)
        ));
    }
}
