//! Asymptotic decay profiles `λ: [0,∞) → [0,∞)` from a closed-form registry
//! (zero, power decay `λ₀(1+s)^{-p}` with `p > 2`, exponential `λ₀ e^{-s}`),
//! together with the moment integrals
//! `b0 = ∫ s λ(s) ds` and `b1 = ∫ λ(s) ds`.
//!
//! Only closed-form profiles are admitted: monotonicity and the tail
//! integrals beyond the quadrature window have to be certifiable.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("b0/b1 diverge for power decay with p = {p} (requires p > 2)")]
    DivergentIntegral { p: f64 },
    #[error("profile amplitude must be nonnegative, got {0}")]
    NegativeLambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    Zero,
    Power { lambda0: f64, p: f64 },
    Exp { lambda0: f64 },
}

/// A decay profile with its quadrature window and tolerance.
#[derive(Debug, Clone)]
pub struct AsymptoticProfile {
    pub kind: ProfileKind,
    /// Quadrature truncation radius; the remainder is added in closed form.
    pub s_max: f64,
    /// Relative tolerance of the adaptive quadrature.
    pub quad_tol: f64,
}

impl AsymptoticProfile {
    pub fn zero() -> Self {
        AsymptoticProfile {
            kind: ProfileKind::Zero,
            s_max: 1.0,
            quad_tol: 1.0e-8,
        }
    }

    pub fn power(lambda0: f64, p: f64) -> Result<Self, ProfileError> {
        if lambda0 < 0.0 {
            return Err(ProfileError::NegativeLambda(lambda0));
        }
        if p <= 2.0 {
            return Err(ProfileError::DivergentIntegral { p });
        }
        Ok(AsymptoticProfile {
            kind: if lambda0 == 0.0 {
                ProfileKind::Zero
            } else {
                ProfileKind::Power { lambda0, p }
            },
            s_max: 50.0,
            quad_tol: 1.0e-8,
        })
    }

    pub fn exponential(lambda0: f64) -> Result<Self, ProfileError> {
        if lambda0 < 0.0 {
            return Err(ProfileError::NegativeLambda(lambda0));
        }
        Ok(AsymptoticProfile {
            kind: if lambda0 == 0.0 {
                ProfileKind::Zero
            } else {
                ProfileKind::Exp { lambda0 }
            },
            s_max: 40.0,
            quad_tol: 1.0e-8,
        })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ProfileKind::Zero)
    }

    pub fn eval(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match self.kind {
            ProfileKind::Zero => 0.0,
            ProfileKind::Power { lambda0, p } => lambda0 * (1.0 + s).powf(-p),
            ProfileKind::Exp { lambda0 } => lambda0 * (-s).exp(),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match self.kind {
            ProfileKind::Zero => 0.0,
            ProfileKind::Power { lambda0, p } => -lambda0 * p * (1.0 + s).powf(-p - 1.0),
            ProfileKind::Exp { lambda0 } => -lambda0 * (-s).exp(),
        }
    }

    /// Taylor coefficients `λ(s) = Σ_k l_k s^k` at `s = 0`, `k = 0..=4`; the
    /// warped model chart uses them to expand its metric near the center.
    pub fn taylor_at_zero(&self) -> [f64; 5] {
        match self.kind {
            ProfileKind::Zero => [0.0; 5],
            ProfileKind::Power { lambda0, p } => {
                let mut l = [0.0; 5];
                let mut c = lambda0;
                l[0] = c;
                for (k, slot) in l.iter_mut().enumerate().skip(1) {
                    c *= -(p + (k as f64 - 1.0)) / k as f64;
                    *slot = c;
                }
                l
            }
            ProfileKind::Exp { lambda0 } => {
                let mut l = [0.0; 5];
                let mut c = lambda0;
                l[0] = c;
                for (k, slot) in l.iter_mut().enumerate().skip(1) {
                    c *= -1.0 / k as f64;
                    *slot = c;
                }
                l
            }
        }
    }

    /// `(b0, b1)` by adaptive Simpson quadrature on `[0, s_max]` plus the
    /// closed-form tails.
    pub fn compute_b0_b1(&self) -> Result<(f64, f64), ProfileError> {
        match self.kind {
            ProfileKind::Zero => Ok((0.0, 0.0)),
            _ => {
                let b1_head = adaptive_simpson(&|s| self.eval(s), 0.0, self.s_max, self.quad_tol);
                let b0_head =
                    adaptive_simpson(&|s| s * self.eval(s), 0.0, self.s_max, self.quad_tol);
                let (b0_tail, b1_tail) = self.tail_integrals(self.s_max);
                Ok((b0_head + b0_tail, b1_head + b1_tail))
            }
        }
    }

    /// Closed-form `(∫_S^∞ sλ, ∫_S^∞ λ)`.
    fn tail_integrals(&self, s: f64) -> (f64, f64) {
        match self.kind {
            ProfileKind::Zero => (0.0, 0.0),
            ProfileKind::Power { lambda0, p } => {
                let u = 1.0 + s;
                let b1 = lambda0 * u.powf(1.0 - p) / (p - 1.0);
                let b0 = lambda0 * (u.powf(2.0 - p) / (p - 2.0) - u.powf(1.0 - p) / (p - 1.0));
                (b0, b1)
            }
            ProfileKind::Exp { lambda0 } => {
                let e = (-s).exp();
                (lambda0 * (1.0 + s) * e, lambda0 * e)
            }
        }
    }
}

/// Adaptive Simpson quadrature with absolute-over-relative tolerance mix.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    let tol = rel_tol * whole.abs().max(1.0e-3);
    recurse(f, a, fa, b, fb, fm, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_profile_moments() {
        let (b0, b1) = AsymptoticProfile::zero().compute_b0_b1().unwrap();
        assert_eq!((b0, b1), (0.0, 0.0));
    }

    #[test]
    fn cubic_power_profile_moments() {
        // ∫ s (1+s)^{-3} = ∫ (1+s)^{-3} = 1/2, scaled by λ₀
        for lambda0 in [1.0, 0.4] {
            let profile = AsymptoticProfile::power(lambda0, 3.0).unwrap();
            let (b0, b1) = profile.compute_b0_b1().unwrap();
            assert_relative_eq!(b0, lambda0 / 2.0, epsilon = 1e-8);
            assert_relative_eq!(b1, lambda0 / 2.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn exponential_profile_moments() {
        let profile = AsymptoticProfile::exponential(1.0).unwrap();
        let (b0, b1) = profile.compute_b0_b1().unwrap();
        assert_relative_eq!(b0, 1.0, epsilon = 1e-8);
        assert_relative_eq!(b1, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn divergent_power_rejected() {
        assert!(matches!(
            AsymptoticProfile::power(1.0, 2.0),
            Err(ProfileError::DivergentIntegral { .. })
        ));
        assert!(matches!(
            AsymptoticProfile::power(-0.5, 3.0),
            Err(ProfileError::NegativeLambda(_))
        ));
    }

    #[test]
    fn profiles_nonincreasing() {
        let profiles = [
            AsymptoticProfile::power(0.7, 2.5).unwrap(),
            AsymptoticProfile::exponential(0.3).unwrap(),
            AsymptoticProfile::zero(),
        ];
        for p in &profiles {
            let mut prev = p.eval(0.0);
            for i in 1..400 {
                let s = i as f64 * 0.05;
                let v = p.eval(s);
                assert!(v <= prev + 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn moments_match_brute_force_trapezoid() {
        // brute-force oracle: fine-grid trapezoid, step 1e-4, window 1e3,
        // with the closed-form remainder beyond the window (the slow power
        // tails carry ~1e-3 of b0 past any finite grid)
        let brute = |f: &dyn Fn(f64) -> f64| -> f64 {
            let step = 1.0e-4;
            let n = 10_000_000_usize;
            let mut acc = 0.5 * (f(0.0) + f(n as f64 * step));
            for i in 1..n {
                acc += f(i as f64 * step);
            }
            acc * step
        };
        let cases = [
            AsymptoticProfile::power(1.0, 3.0).unwrap(),
            AsymptoticProfile::power(0.25, 4.0).unwrap(),
            AsymptoticProfile::exponential(0.8).unwrap(),
        ];
        for profile in &cases {
            let (b0, b1) = profile.compute_b0_b1().unwrap();
            let (b0_tail, b1_tail) = profile.tail_integrals(1.0e3);
            let b1_oracle = brute(&|s| profile.eval(s)) + b1_tail;
            let b0_oracle = brute(&|s| s * profile.eval(s)) + b0_tail;
            assert_relative_eq!(b1, b1_oracle, epsilon = 1e-6, max_relative = 1e-6);
            assert_relative_eq!(b0, b0_oracle, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn taylor_coefficients_match_finite_differences() {
        let profile = AsymptoticProfile::power(0.9, 3.5).unwrap();
        let l = profile.taylor_at_zero();
        let h = 1e-3_f64;
        // compare the quartic Taylor sum against the direct evaluation
        for s in [0.0_f64, h, 2.0 * h, 4.0 * h] {
            let series: f64 = (0..5).map(|k| l[k] * s.powi(k as i32)).sum();
            assert_relative_eq!(series, profile.eval(s), epsilon = 1e-10);
        }
    }
}
