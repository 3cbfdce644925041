//! Fixed-step RK4 trajectories with Richardson error estimates, the model
//! growth function `h` (`h'' = λ(t) h`, `h(0) = 0`, `h'(0) = 1`), and the
//! scalar comparison estimates used along transport rays:
//!
//! * `ψ(t) ≤ t · exp(∫ τ·coeff(τ) dτ)` for solutions of `ψ'' = coeff·ψ`
//!   with `ψ(0) = 0`, `ψ'(0) = 1`,
//! * `ψ₂/ψ₁ ≤ ∫ coeff + 1/t`,
//! * `∫ λ∘γ ≤ 2 b₁` and `∫ τ·λ∘γ ≤ 2 r₀ b₁ + b₀`,
//! * the log-derivative comparison `φ'/φ ≤ ψ'/ψ`.

use crate::geometry::unit_ball_volume;
use crate::profile::AsymptoticProfile;
use thiserror::Error;

/// Relative tolerance demanded of the Richardson global-error estimate.
pub const TAU_ODE: f64 = 1.0e-8;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("integrator unconverged: Richardson estimate {estimate} exceeds {tol}")]
    Unconverged { estimate: f64, tol: f64 },
    #[error("comparison envelope violated: min relative slack {min_slack}")]
    EnvelopeViolated { min_slack: f64 },
    #[error("trajectory not positive on (0, T]; first failure at t = {t}")]
    NonPositiveTrajectory { t: f64 },
    #[error("trajectory grid ends at {end}, below requested radius {r}")]
    GridTooShort { r: f64, end: f64 },
}

/// Uniform-grid solution samples of a scalar second-order ODE.
#[derive(Debug, Clone)]
pub struct OdeTrajectory {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    pub step: f64,
    /// Estimated relative global error (coarse/fine Richardson comparison).
    pub richardson_error: f64,
}

impl OdeTrajectory {
    pub fn end_time(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Linear interpolation of the value samples.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = ((t / self.step) as usize).min(self.grid.len() - 2);
        let s = (t - self.grid[k]) / self.step;
        self.values[k] * (1.0 - s) + self.values[k + 1] * s
    }

    /// Builds a trajectory from log-derivative samples: `y(t₀) = initial`,
    /// `y'/y = ld`, integrated by the trapezoid rule on the given grid.
    pub fn from_log_derivative(grid: Vec<f64>, ld: &[f64], initial: f64) -> Self {
        assert_eq!(grid.len(), ld.len());
        assert!(grid.len() >= 2);
        let step = grid[1] - grid[0];
        let mut values = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        values.push(initial);
        for k in 1..grid.len() {
            acc += 0.5 * (ld[k - 1] + ld[k]) * (grid[k] - grid[k - 1]);
            values.push(initial * acc.exp());
        }
        let derivs = values.iter().zip(ld).map(|(v, d)| v * d).collect();
        OdeTrajectory {
            grid,
            values,
            derivs,
            step,
            richardson_error: 0.0,
        }
    }
}

/// RK4 integration of `y'' = coeff(t)·y` with fixed step; returns the
/// half-step solution downsampled to the requested grid, with the
/// coarse/fine discrepancy recorded as `richardson_error` (relative).
pub fn integrate_second_order(
    coeff: &dyn Fn(f64) -> f64,
    ic: (f64, f64),
    t_end: f64,
    dt: f64,
) -> OdeTrajectory {
    integrate_second_order_with_breaks(coeff, ic, t_end, dt, &[])
}

/// Like [`integrate_second_order`], but any step containing one of the
/// `breaks` is split there, so coefficients with isolated kinks (the
/// triangle-inequality surrogate `λ(|d₀ - t|)`) keep fourth-order accuracy.
pub fn integrate_second_order_with_breaks(
    coeff: &dyn Fn(f64) -> f64,
    ic: (f64, f64),
    t_end: f64,
    dt: f64,
    breaks: &[f64],
) -> OdeTrajectory {
    assert!(t_end > 0.0 && dt > 0.0);
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;

    let rk4_segment = |t0: f64, h: f64, y: &mut f64, yp: &mut f64| {
        let f = |t: f64, y: f64| coeff(t) * y;
        let k1 = (*yp, f(t0, *y));
        let k2 = (*yp + 0.5 * h * k1.1, f(t0 + 0.5 * h, *y + 0.5 * h * k1.0));
        let k3 = (*yp + 0.5 * h * k2.1, f(t0 + 0.5 * h, *y + 0.5 * h * k2.0));
        let k4 = (*yp + h * k3.1, f(t0 + h, *y + h * k3.0));
        *y += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        *yp += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    };

    let run = |n: usize, h: f64| -> (Vec<f64>, Vec<f64>) {
        let mut y = ic.0;
        let mut yp = ic.1;
        let mut values = Vec::with_capacity(n + 1);
        let mut derivs = Vec::with_capacity(n + 1);
        values.push(y);
        derivs.push(yp);
        for i in 0..n {
            let t = i as f64 * h;
            let t_next = (i + 1) as f64 * h;
            let mut cursor = t;
            for &b in breaks {
                if b > cursor + 1.0e-14 && b < t_next - 1.0e-14 {
                    rk4_segment(cursor, b - cursor, &mut y, &mut yp);
                    cursor = b;
                }
            }
            rk4_segment(cursor, t_next - cursor, &mut y, &mut yp);
            values.push(y);
            derivs.push(yp);
        }
        (values, derivs)
    };

    let (coarse, _) = run(steps, dt);
    let (fine_v, fine_d) = run(2 * steps, 0.5 * dt);
    let scale = fine_v.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut diff = 0.0_f64;
    let mut values = Vec::with_capacity(steps + 1);
    let mut derivs = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        values.push(fine_v[2 * k]);
        derivs.push(fine_d[2 * k]);
        diff = diff.max((coarse[k] - fine_v[2 * k]).abs());
    }
    OdeTrajectory {
        grid: (0..=steps).map(|k| k as f64 * dt).collect(),
        values,
        derivs,
        step: dt,
        richardson_error: diff / (15.0 * scale),
    }
}

/// `y'' = coeff(t)·y` with convergence enforcement at [`TAU_ODE`].
pub fn solve_linear_second_order(
    coeff: &dyn Fn(f64) -> f64,
    ic: (f64, f64),
    t_end: f64,
    dt: f64,
) -> Result<OdeTrajectory, OdeError> {
    let traj = integrate_second_order(coeff, ic, t_end, dt);
    if traj.richardson_error > TAU_ODE {
        return Err(OdeError::Unconverged {
            estimate: traj.richardson_error,
            tol: TAU_ODE,
        });
    }
    Ok(traj)
}

/// The model growth function of a decay profile: `h'' = λ(t) h`,
/// `h(0) = 0`, `h'(0) = 1`. Satisfies `h(t) ≥ t` and `h'(t) ≥ 1`.
pub fn solve_h(
    profile: &AsymptoticProfile,
    t_end: f64,
    dt: f64,
) -> Result<OdeTrajectory, OdeError> {
    solve_linear_second_order(&|t| profile.eval(t), (0.0, 1.0), t_end, dt)
}

/// Cumulative Simpson integral of `f` on the trajectory grid (midpoint
/// evaluations included), returned at every grid point.
fn cumulative_simpson(f: &dyn Fn(f64) -> f64, grid: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    out.push(0.0);
    for k in 1..grid.len() {
        let (a, b) = (grid[k - 1], grid[k]);
        acc += (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
        out.push(acc);
    }
    out
}

/// Per-sample slacks of the comparison envelopes along one transport ray.
#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    pub grid: Vec<f64>,
    /// `t·exp(∫ τ·coeff) - ψ₁(t)`, relative.
    pub growth_slack: Vec<f64>,
    /// `∫ coeff + 1/t - ψ₂/ψ₁`, from the first positive grid point on.
    pub ratio_slack: Option<Vec<f64>>,
    /// `2 b₁ - ∫ λ∘γ`.
    pub lambda_slack: Vec<f64>,
    /// `2 r₀ b₁ + b₀ - ∫ τ·λ∘γ`.
    pub weighted_lambda_slack: Vec<f64>,
    pub min_slack: f64,
}

/// Checks the comparison envelopes for a unit-slope solution `ψ₁` of
/// `ψ'' = coeff·ψ` (and optionally its unit-value companion `ψ₂`), where
/// `coeff(t) = factor · λ(d(o, γ(t)))` and `lambda_ray` samples the bare
/// profile along the ray.
pub fn envelope_check(
    psi1: &OdeTrajectory,
    psi2: Option<&OdeTrajectory>,
    coeff: &dyn Fn(f64) -> f64,
    lambda_ray: &dyn Fn(f64) -> f64,
    b0: f64,
    b1: f64,
    r0: f64,
) -> Result<EnvelopeReport, OdeError> {
    let grid = &psi1.grid;
    let int_tau_coeff = cumulative_simpson(&|t| t * coeff(t), grid);
    let int_coeff = cumulative_simpson(coeff, grid);
    let int_lambda = cumulative_simpson(lambda_ray, grid);
    let int_tau_lambda = cumulative_simpson(&|t| t * lambda_ray(t), grid);

    let mut min_slack = f64::INFINITY;
    let mut growth_slack = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let bound = grid[k] * int_tau_coeff[k].exp();
        let slack = (bound - psi1.values[k]) / bound.abs().max(1.0);
        growth_slack.push(slack);
        min_slack = min_slack.min(slack);
    }

    let ratio_slack = psi2.map(|p2| {
        let mut out = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            if grid[k] < psi1.step * 0.5 {
                // removable 1/t singularity; start at the first grid point
                out.push(f64::INFINITY);
                continue;
            }
            let bound = int_coeff[k] + 1.0 / grid[k];
            let slack = (bound - p2.values[k] / psi1.values[k]) / bound.abs().max(1.0);
            out.push(slack);
            min_slack = min_slack.min(slack);
        }
        out
    });

    let mut lambda_slack = Vec::with_capacity(grid.len());
    let mut weighted_lambda_slack = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let s1 = (2.0 * b1 - int_lambda[k]) / (2.0 * b1).max(1.0);
        let s2 = (2.0 * r0 * b1 + b0 - int_tau_lambda[k]) / (2.0 * r0 * b1 + b0).max(1.0);
        lambda_slack.push(s1);
        weighted_lambda_slack.push(s2);
        min_slack = min_slack.min(s1).min(s2);
    }

    let report = EnvelopeReport {
        grid: grid.clone(),
        growth_slack,
        ratio_slack,
        lambda_slack,
        weighted_lambda_slack,
        min_slack,
    };
    if report.min_slack < -TAU_ODE {
        return Err(OdeError::EnvelopeViolated {
            min_slack: report.min_slack,
        });
    }
    Ok(report)
}

/// Per-sample slack `ψ'/ψ - φ'/φ` on `(0, T]`; both trajectories must be
/// positive there.
pub fn log_derivative_comparison(
    phi: &OdeTrajectory,
    psi: &OdeTrajectory,
) -> Result<Vec<f64>, OdeError> {
    assert_eq!(phi.grid.len(), psi.grid.len());
    let mut out = Vec::with_capacity(phi.grid.len().saturating_sub(1));
    for k in 1..phi.grid.len() {
        if phi.values[k] <= 0.0 || psi.values[k] <= 0.0 {
            return Err(OdeError::NonPositiveTrajectory { t: phi.grid[k] });
        }
        out.push(psi.derivs[k] / psi.values[k] - phi.derivs[k] / phi.values[k]);
    }
    Ok(out)
}

/// The h-model ball-volume normalizer `N · |B^N| · ∫₀^r h(t)^{N-1} dt`
/// by trapezoid quadrature on the trajectory grid.
pub fn theta_h_normalizer(h: &OdeTrajectory, dim: usize, r: f64) -> Result<f64, OdeError> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let end = h.end_time();
    if r > end + 1.0e-12 {
        return Err(OdeError::GridTooShort { r, end });
    }
    let p = (dim - 1) as i32;
    let mut acc = 0.0;
    let mut k = 1;
    while k < h.grid.len() && h.grid[k] <= r {
        acc += 0.5 * (h.values[k - 1].powi(p) + h.values[k].powi(p)) * (h.grid[k] - h.grid[k - 1]);
        k += 1;
    }
    if k < h.grid.len() && h.grid[k - 1] < r {
        let hv = h.value_at(r);
        acc += 0.5 * (h.values[k - 1].powi(p) + hv.powi(p)) * (r - h.grid[k - 1]);
    }
    let ball = unit_ball_volume(dim).expect("dim >= 1");
    Ok(dim as f64 * ball * acc)
}
