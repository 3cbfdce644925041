//! The Jacobi matrix system along a transport ray: `P'' = -P S` with the
//! block initial data coming from the Hessian of the Neumann potential and
//! the second fundamental form, the Riccati matrix `Q = P⁻¹P'`, partial
//! trace inequalities, and the transport-Jacobian determinant bounds.

use super::{TransportError, TransportRay};
use crate::geometry::{curvature_packet_unchecked, MetricChart};
use nalgebra::{DMatrix, DVector};

/// Tolerance for the centered-difference Riccati trace residuals.
pub const TAU_RICCATI: f64 = 1.0e-4;
/// Relative tolerance of the determinant bound slack.
pub const TAU_DET: f64 = 1.0e-5;

/// Trajectories of `P`, `P'`, `S`, and `Q` along one ray.
#[derive(Debug, Clone)]
pub struct JacobiSystem {
    pub times: Vec<f64>,
    pub step: f64,
    pub tangent_dim: usize,
    pub normal_dim: usize,
    pub p: Vec<DMatrix<f64>>,
    pub p_prime: Vec<DMatrix<f64>>,
    pub s: Vec<DMatrix<f64>>,
    /// `Q = P⁻¹ P'`, available on `t ∈ [10·Δt, conjugate - Δt)` only
    /// (the normal block carries a `1/t` singularity at zero).
    pub q: Vec<Option<DMatrix<f64>>>,
    pub det_p: Vec<f64>,
    /// First zero of `det P`, refined by bisection; `None` when no sign
    /// change happens before the horizon.
    pub conjugate_time: Option<f64>,
    /// Hessian of the potential in the tangent frame (`n×n`).
    pub hessian: DMatrix<f64>,
    /// `⟨II(e_i, e_j), e_β⟩` for each normal frame index β.
    pub second_form: Vec<DMatrix<f64>>,
    /// `Δ_Σu - ⟨H, ȳ⟩` evaluated from the initial data above.
    pub mean_curvature_pairing: f64,
    pub speed: f64,
    pub cos_angle: f64,
    pub sin_angle: f64,
}

struct JacobiState {
    x: DVector<f64>,
    v: DVector<f64>,
    e: DMatrix<f64>,
    p: DMatrix<f64>,
    pp: DMatrix<f64>,
}

impl JacobiState {
    fn combine(base: &JacobiState, parts: &[(&JacobiState, f64)]) -> JacobiState {
        let mut out = JacobiState {
            x: base.x.clone(),
            v: base.v.clone(),
            e: base.e.clone(),
            p: base.p.clone(),
            pp: base.pp.clone(),
        };
        for (s, c) in parts {
            out.x += &s.x * *c;
            out.v += &s.v * *c;
            out.e += &s.e * *c;
            out.p += &s.p * *c;
            out.pp += &s.pp * *c;
        }
        out
    }
}

/// Integrates the full Jacobi system along `ray`, re-running the joint
/// geodesic/frame/matrix ODE so every block sees the same RK4 substeps.
///
/// `hessian` holds `(D²_Σu)(e_i, e_j)` in the ray's tangent frame;
/// `second_form[β]` holds `⟨II(e_i, e_j), e_{n+β}⟩` in the same frames.
pub fn evolve_jacobi(
    chart: &MetricChart,
    ray: &TransportRay,
    hessian: &DMatrix<f64>,
    second_form: &[DMatrix<f64>],
) -> Result<JacobiSystem, TransportError> {
    let n_amb = chart.dim;
    let n = ray.tangent_dim;
    let m = n_amb - n;
    assert_eq!(hessian.nrows(), n);
    assert_eq!(second_form.len(), m);

    let du_norm = ray.speed * ray.cos_angle;
    let y_norm = ray.speed * ray.sin_angle;

    let mut p0 = DMatrix::zeros(n_amb, n_amb);
    for i in 0..n {
        p0[(i, i)] = 1.0;
    }
    let mut pp0 = DMatrix::zeros(n_amb, n_amb);
    for i in 0..n {
        for j in 0..n {
            let ii_y = if m > 0 { second_form[0][(i, j)] } else { 0.0 };
            pp0[(i, j)] = hessian[(i, j)] - y_norm * ii_y;
        }
        for b in 0..m {
            // ⟨II(e_i, D^Σu), e_β⟩ with D^Σu = |D^Σu|·e₁
            pp0[(i, n + b)] = du_norm * second_form[b][(i, 0)];
        }
    }
    for a in 0..m {
        pp0[(n + a, n + a)] = 1.0;
    }

    let pairing = {
        let trace_h: f64 = (0..n).map(|i| hessian[(i, i)]).sum();
        let trace_ii: f64 = if m > 0 {
            (0..n).map(|i| second_form[0][(i, i)]).sum()
        } else {
            0.0
        };
        trace_h - y_norm * trace_ii
    };

    let rate = |state: &JacobiState| -> JacobiState {
        let packet = curvature_packet_unchecked(chart, state.x.as_slice());
        let nn = n_amb;
        let mut acc = DVector::zeros(nn);
        for k in 0..nn {
            let mut sum = 0.0;
            for i in 0..nn {
                for j in 0..nn {
                    sum += packet.gamma(k, i, j) * state.v[i] * state.v[j];
                }
            }
            acc[k] = -sum;
        }
        let mut de = DMatrix::zeros(nn, nn);
        for a in 0..nn {
            for k in 0..nn {
                let mut sum = 0.0;
                for i in 0..nn {
                    for j in 0..nn {
                        sum += packet.gamma(k, i, j) * state.v[i] * state.e[(j, a)];
                    }
                }
                de[(k, a)] = -sum;
            }
        }
        let tidal = packet.jacobi_operator(&state.v);
        let s = state.e.transpose() * &tidal * &state.e;
        JacobiState {
            x: state.v.clone(),
            v: acc,
            e: de,
            p: state.pp.clone(),
            pp: -(&state.p * &s),
        }
    };

    let tidal_at = |state: &JacobiState| -> DMatrix<f64> {
        let packet = curvature_packet_unchecked(chart, state.x.as_slice());
        let op = packet.jacobi_operator(&state.v);
        state.e.transpose() * op * &state.e
    };

    let steps = ray.geodesic.times.len() - 1;
    let h = ray.geodesic.step;
    let mut state = JacobiState {
        x: ray.geodesic.positions[0].clone(),
        v: ray.geodesic.velocities[0].clone(),
        e: ray.frame.frames[0].clone(),
        p: p0.clone(),
        pp: pp0.clone(),
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut p_traj = Vec::with_capacity(steps + 1);
    let mut pp_traj = Vec::with_capacity(steps + 1);
    let mut s_traj = Vec::with_capacity(steps + 1);
    let mut det_traj = Vec::with_capacity(steps + 1);
    times.push(0.0);
    p_traj.push(state.p.clone());
    pp_traj.push(state.pp.clone());
    s_traj.push(tidal_at(&state));
    det_traj.push(state.p.clone().lu().determinant());

    for k in 0..steps {
        let k1 = rate(&state);
        let s2 = JacobiState::combine(&state, &[(&k1, 0.5 * h)]);
        let k2 = rate(&s2);
        let s3 = JacobiState::combine(&state, &[(&k2, 0.5 * h)]);
        let k3 = rate(&s3);
        let s4 = JacobiState::combine(&state, &[(&k3, h)]);
        let k4 = rate(&s4);
        state = JacobiState::combine(
            &state,
            &[
                (&k1, h / 6.0),
                (&k2, h / 3.0),
                (&k3, h / 3.0),
                (&k4, h / 6.0),
            ],
        );
        times.push((k + 1) as f64 * h);
        p_traj.push(state.p.clone());
        pp_traj.push(state.pp.clone());
        s_traj.push(tidal_at(&state));
        det_traj.push(state.p.clone().lu().determinant());
    }

    // first sign change of det P after the degenerate start, bisected on the
    // Hermite interpolant of (P, P')
    let mut conjugate_time = None;
    for k in 1..det_traj.len() {
        if det_traj[k] <= 0.0 && times[k] > 10.0 * h {
            let p_at = |t: f64| -> f64 {
                let idx = ((t / h) as usize).min(times.len() - 2);
                let s = (t - times[idx]) / h;
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                let p = &p_traj[idx] * h00
                    + &pp_traj[idx] * (h10 * h)
                    + &p_traj[idx + 1] * h01
                    + &pp_traj[idx + 1] * (h11 * h);
                p.lu().determinant()
            };
            let (mut lo, mut hi) = (times[k - 1], times[k]);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if p_at(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1.0e-8 {
                    break;
                }
            }
            conjugate_time = Some(0.5 * (lo + hi));
            break;
        }
    }

    // Q = P⁻¹P' on (10Δt, conjugate − Δt)
    let q_hi = conjugate_time.unwrap_or(f64::INFINITY) - h;
    let q_traj: Vec<Option<DMatrix<f64>>> = (0..times.len())
        .map(|k| {
            let t = times[k];
            if t < 10.0 * h * (1.0 - 1.0e-12) || t > q_hi {
                return None;
            }
            p_traj[k].clone().lu().solve(&pp_traj[k])
        })
        .collect();

    Ok(JacobiSystem {
        times,
        step: h,
        tangent_dim: n,
        normal_dim: m,
        p: p_traj,
        p_prime: pp_traj,
        s: s_traj,
        q: q_traj,
        det_p: det_traj,
        conjugate_time,
        hessian: hessian.clone(),
        second_form: second_form.to_vec(),
        mean_curvature_pairing: pairing,
        speed: ray.speed,
        cos_angle: ray.cos_angle,
        sin_angle: ray.sin_angle,
    })
}

impl JacobiSystem {
    /// Max per-entry residual of `P'' + P S = 0`, with `P''` recovered by
    /// a fourth-order five-point stencil on the stored `P'` samples;
    /// normalized by `‖S‖ + 1`.
    pub fn jacobi_residual(&self) -> f64 {
        let h = self.step;
        let mut worst = 0.0_f64;
        for k in 2..self.times.len().saturating_sub(2) {
            let num = (-&self.p_prime[k + 2] + &self.p_prime[k + 1] * 8.0
                - &self.p_prime[k - 1] * 8.0
                + &self.p_prime[k - 2])
                / (12.0 * h);
            let resid = &num + &self.p[k] * &self.s[k];
            let scale = self.s[k].amax() + 1.0;
            worst = worst.max(resid.amax() / scale);
        }
        worst
    }

    /// Max asymmetry of `P' Pᵀ` over the pre-conjugate samples.
    pub fn pp_t_symmetry_defect(&self) -> f64 {
        let end = self.conjugate_time.unwrap_or(f64::INFINITY);
        let mut worst = 0.0_f64;
        for k in 0..self.times.len() {
            if self.times[k] >= end {
                break;
            }
            let m = &self.p_prime[k] * self.p[k].transpose();
            worst = worst.max((&m - m.transpose()).amax() / (m.amax() + 1.0));
        }
        worst
    }

    /// Max asymmetry of `Q` over its valid window.
    pub fn q_symmetry_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for q in self.q.iter().flatten() {
            worst = worst.max((q - q.transpose()).amax() / (q.amax() + 1.0));
        }
        worst
    }

    /// Indices with Riccati data.
    pub fn q_window(&self) -> Vec<usize> {
        (0..self.times.len()).filter(|&k| self.q[k].is_some()).collect()
    }

    fn trace_block(m: &DMatrix<f64>, lo: usize, hi: usize) -> f64 {
        (lo..hi).map(|i| m[(i, i)]).sum()
    }
}

/// Partial traces of the tidal matrix with the splitting-angle data used by
/// the trace-positivity argument.
#[derive(Debug, Clone)]
pub struct PartialTraces {
    pub times: Vec<f64>,
    pub tangent: Vec<f64>,
    pub normal: Vec<f64>,
    pub cos2: f64,
    pub sin2: f64,
}

pub fn partial_traces_s(system: &JacobiSystem) -> PartialTraces {
    let n = system.tangent_dim;
    let total = n + system.normal_dim;
    PartialTraces {
        times: system.times.clone(),
        tangent: system
            .s
            .iter()
            .map(|s| JacobiSystem::trace_block(s, 0, n))
            .collect(),
        normal: system
            .s
            .iter()
            .map(|s| JacobiSystem::trace_block(s, n, total))
            .collect(),
        cos2: system.cos_angle * system.cos_angle,
        sin2: system.sin_angle * system.sin_angle,
    }
}

/// Residuals of the scalar Riccati comparisons
/// `d/dt tr Q_block + (tr Q_block)²/dim + tr S_block ≤ 0`
/// (Cauchy-Schwarz direction), by five-point differencing of the traces.
#[derive(Debug, Clone)]
pub struct RiccatiResidualReport {
    pub times: Vec<f64>,
    pub tangent_residual: Vec<f64>,
    pub normal_residual: Vec<f64>,
    pub max_tangent: f64,
    pub max_normal: f64,
}

pub fn riccati_trace_residual(
    system: &JacobiSystem,
) -> Result<RiccatiResidualReport, TransportError> {
    let n = system.tangent_dim;
    let m = system.normal_dim;
    let total = n + m;
    let h = system.step;
    let window = system.q_window();
    let mut times = Vec::new();
    let mut tangent_residual = Vec::new();
    let mut normal_residual = Vec::new();
    let mut max_t = f64::NEG_INFINITY;
    let mut max_n = f64::NEG_INFINITY;
    for &k in &window {
        // need two neighbors on each side inside the window; also keep away
        // from the 1/t pole, where differencing the normal trace is hopeless
        // (the stencil error grows like h⁴/t⁶)
        if k < 2 || k + 2 >= system.times.len() || system.times[k] < 40.0 * h {
            continue;
        }
        let ok = [k - 2, k - 1, k + 1, k + 2]
            .iter()
            .all(|&j| system.q[j].is_some());
        if !ok {
            continue;
        }
        let tr = |j: usize, lo: usize, hi: usize| {
            JacobiSystem::trace_block(system.q[j].as_ref().unwrap(), lo, hi)
        };
        let dtr = |lo: usize, hi: usize| {
            (-tr(k + 2, lo, hi) + 8.0 * tr(k + 1, lo, hi) - 8.0 * tr(k - 1, lo, hi)
                + tr(k - 2, lo, hi))
                / (12.0 * h)
        };
        let tq_t = tr(k, 0, n);
        let tq_n = tr(k, n, total);
        let s = &system.s[k];
        let res_t = dtr(0, n) + tq_t * tq_t / n as f64 + JacobiSystem::trace_block(s, 0, n);
        let res_n =
            dtr(n, total) + tq_n * tq_n / m as f64 + JacobiSystem::trace_block(s, n, total);
        times.push(system.times[k]);
        tangent_residual.push(res_t);
        normal_residual.push(res_n);
        max_t = max_t.max(res_t);
        max_n = max_n.max(res_n);
    }
    let report = RiccatiResidualReport {
        times,
        tangent_residual,
        normal_residual,
        max_tangent: max_t,
        max_normal: max_n,
    };
    let worst = report.max_tangent.max(report.max_normal);
    if worst > TAU_RICCATI {
        return Err(TransportError::TraceInequalityViolated {
            residual: worst,
            tol: TAU_RICCATI,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy)]
pub enum DetBoundMode {
    /// `det P(t) ≤ (1 + t·κ/n)^n · t^m` with `κ = Δ_Σu - ⟨H, ȳ⟩`.
    Nonnegative,
    /// `det P(t) ≤ (2b₁ + 1/t + κ/n)^n · t^{n+m} · e^{(n+m-1)(2r₀b₁+b₀)}`.
    Asymptotic { b0: f64, b1: f64, r0: f64 },
}

/// Determinant-bound slacks along one ray. `slack` uses the pairing-based
/// bound (tight in the flat isotropic case); `density_slack` uses the
/// density form `t^m (1 + t f^{1/(n-1)})^n`, which additionally assumes the
/// pointwise Neumann estimate.
#[derive(Debug, Clone)]
pub struct DetBoundReport {
    pub times: Vec<f64>,
    pub det: Vec<f64>,
    pub bound: Vec<f64>,
    pub slack: Vec<f64>,
    pub density_bound: Vec<f64>,
    pub density_slack: Vec<f64>,
    pub min_slack: f64,
    pub min_density_slack: f64,
    /// `|D^Σu|² + |ȳ|² ≤ 1`, the hypothesis of the pointwise estimate.
    pub speed_admissible: bool,
}

pub fn det_bound_check(
    system: &JacobiSystem,
    f_at_base: f64,
    mode: DetBoundMode,
) -> Result<DetBoundReport, TransportError> {
    let n = system.tangent_dim as f64;
    let m = system.normal_dim as f64;
    let kappa = system.mean_curvature_pairing;
    let end = system.conjugate_time.unwrap_or(f64::INFINITY);
    let exp_factor = match mode {
        DetBoundMode::Nonnegative => 1.0,
        DetBoundMode::Asymptotic { b0, b1, r0 } => ((n + m - 1.0) * (2.0 * r0 * b1 + b0)).exp(),
    };
    let f_pow = f_at_base.powf(1.0 / (n - 1.0));

    let mut times = Vec::new();
    let mut det = Vec::new();
    let mut bound_v = Vec::new();
    let mut slack_v = Vec::new();
    let mut density_bound_v = Vec::new();
    let mut density_slack_v = Vec::new();
    let mut min_slack = f64::INFINITY;
    let mut min_density = f64::INFINITY;
    for k in 1..system.times.len() {
        let t = system.times[k];
        if t >= end {
            break;
        }
        let bound = match mode {
            DetBoundMode::Nonnegative => {
                let base = 1.0 + t * kappa / n;
                if base <= 0.0 {
                    break;
                }
                base.powf(n) * t.powf(m)
            }
            DetBoundMode::Asymptotic { b1, .. } => {
                let base = 2.0 * b1 + 1.0 / t + kappa / n;
                if base <= 0.0 {
                    break;
                }
                base.powf(n) * t.powf(n + m) * exp_factor
            }
        };
        let density_bound = t.powf(m) * (1.0 + t * f_pow).powf(n) * exp_factor;
        let d = system.det_p[k];
        let s = (bound - d) / bound;
        let sd = (density_bound - d) / density_bound;
        min_slack = min_slack.min(s);
        min_density = min_density.min(sd);
        times.push(t);
        det.push(d);
        bound_v.push(bound);
        slack_v.push(s);
        density_bound_v.push(density_bound);
        density_slack_v.push(sd);
    }
    let report = DetBoundReport {
        times,
        det,
        bound: bound_v,
        slack: slack_v,
        density_bound: density_bound_v,
        density_slack: density_slack_v,
        min_slack,
        min_density_slack: min_density,
        speed_admissible: system.speed <= 1.0 + 1.0e-12,
    };
    if report.min_slack < -TAU_DET {
        return Err(TransportError::BoundViolated {
            min_slack: report.min_slack,
        });
    }
    Ok(report)
}
