//! Both sides of the Sobolev inequality and the isoperimetric corollaries,
//! evaluated by mesh quadrature, with component breakdowns.

use super::neumann::integrals;
use super::{ImmersedSubmanifold, MeshScalarField, SubmanifoldError};
use crate::geometry::unit_ball_volume;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionalMode {
    Theorem1,
    Theorem2 { b0: f64, b1: f64, r0: f64 },
}

/// `∫ √(|D^Σf|² + f²|H|²) + 2n b₁ ∫ f + ∮ f` with its components.
#[derive(Debug, Clone, Copy)]
pub struct LhsBreakdown {
    pub gradient_term: f64,
    pub b1_term: f64,
    pub boundary_term: f64,
    pub total: f64,
}

pub fn functional_lhs(
    sigma: &ImmersedSubmanifold,
    f: &MeshScalarField,
    mode: FunctionalMode,
) -> LhsBreakdown {
    let n = sigma.tangent_dim() as f64;
    let q = n / (n - 1.0);
    let raw = integrals(sigma, f, q);
    let b1 = match mode {
        FunctionalMode::Theorem1 => 0.0,
        FunctionalMode::Theorem2 { b1, .. } => b1,
    };
    let b1_term = 2.0 * n * b1 * raw.f_term;
    LhsBreakdown {
        gradient_term: raw.grad_term,
        b1_term,
        boundary_term: raw.boundary_term,
        total: raw.grad_term + b1_term + raw.boundary_term,
    }
}

/// The dimensional constant `((n+m)|B^{n+m}| / (m|B^m|))^{1/n}`.
pub fn dimension_constant(n: usize, m: usize) -> f64 {
    let bnm = unit_ball_volume(n + m).expect("n+m >= 1");
    let bm = unit_ball_volume(m).expect("m >= 1");
    (((n + m) as f64 * bnm) / (m as f64 * bm)).powf(1.0 / n as f64)
}

/// `n·C(n,m)·θ^{1/n}·A(b₀,b₁,r₀)·(∫ f^{n/(n-1)})^{(n-1)/n}` with factors.
#[derive(Debug, Clone, Copy)]
pub struct RhsBreakdown {
    pub dimension_constant: f64,
    pub theta_factor: f64,
    pub asymptotic_factor: f64,
    pub density_integral: f64,
    pub total: f64,
}

fn asymptotic_factor(n: f64, m: f64, mode: FunctionalMode) -> f64 {
    match mode {
        FunctionalMode::Theorem1 => 1.0,
        FunctionalMode::Theorem2 { b0, b1, r0 } => {
            ((1.0 + b0) / (2.0 * r0 * b1 + b0).exp()).powf((n + m - 1.0) / n)
        }
    }
}

pub fn functional_rhs(
    sigma: &ImmersedSubmanifold,
    f: &MeshScalarField,
    theta: f64,
    mode: FunctionalMode,
) -> Result<RhsBreakdown, SubmanifoldError> {
    let n = sigma.tangent_dim();
    let m = sigma.codim();
    if m < 2 {
        return Err(SubmanifoldError::BadCodimension { m });
    }
    let nf = n as f64;
    let q = nf / (nf - 1.0);
    let raw = integrals(sigma, f, q);
    let constant = dimension_constant(n, m);
    let theta_factor = theta.powf(1.0 / nf);
    let asym = asymptotic_factor(nf, m as f64, mode);
    let total = nf * constant * theta_factor * asym * raw.pow_term.powf((nf - 1.0) / nf);
    Ok(RhsBreakdown {
        dimension_constant: constant,
        theta_factor,
        asymptotic_factor: asym,
        density_integral: raw.pow_term,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IsoperimetricMode {
    /// `|∂Σ| ≥ n·C(n,m)·θ^{1/n}·|Σ|^{(n-1)/n}`.
    NonnegativeCurvature,
    /// `|∂Σ| ≥ n|Σ|^{(n-1)/n}·[C(n,m)·θ_h^{1/n}·A - 2b₁|Σ|^{1/n}]`.
    Asymptotic { b0: f64, b1: f64, r0: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct IsoperimetricRhs {
    pub area: f64,
    pub boundary_length: f64,
    pub rhs: f64,
    /// Set when the asymptotic bracket is nonpositive; the bound holds
    /// trivially and certifies nothing.
    pub vacuous: bool,
}

pub fn isoperimetric_rhs(
    sigma: &ImmersedSubmanifold,
    theta: f64,
    mode: IsoperimetricMode,
) -> Result<IsoperimetricRhs, SubmanifoldError> {
    let n = sigma.tangent_dim();
    let m = sigma.codim();
    if m < 2 {
        return Err(SubmanifoldError::BadCodimension { m });
    }
    let nf = n as f64;
    let area = sigma.total_area();
    let boundary = sigma.boundary_length();
    let constant = dimension_constant(n, m);
    let (rhs, vacuous) = match mode {
        IsoperimetricMode::NonnegativeCurvature => (
            nf * constant * theta.powf(1.0 / nf) * area.powf((nf - 1.0) / nf),
            false,
        ),
        IsoperimetricMode::Asymptotic { b0, b1, r0 } => {
            let asym = asymptotic_factor(
                nf,
                m as f64,
                FunctionalMode::Theorem2 { b0, b1, r0 },
            );
            let bracket =
                constant * theta.powf(1.0 / nf) * asym - 2.0 * b1 * area.powf(1.0 / nf);
            (nf * area.powf((nf - 1.0) / nf) * bracket, bracket <= 0.0)
        }
    };
    Ok(IsoperimetricRhs {
        area,
        boundary_length: boundary,
        rhs,
        vacuous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euclidean_chart;
    use crate::submanifold::{build_immersion, ImmersionSpec};
    use approx::assert_relative_eq;

    fn disk(refinement: usize) -> ImmersedSubmanifold {
        let chart = euclidean_chart(4, 3.0, None);
        build_immersion(&chart, &ImmersionSpec::FlatDisk { radius: 1.0 }, refinement).unwrap()
    }

    #[test]
    fn m2_dimension_constant_reduces_to_ball_volume() {
        // C(n, 2) = |B^n|^{1/n}
        for n in 1..=6 {
            let lhs = dimension_constant(n, 2);
            let rhs = unit_ball_volume(n).unwrap().powf(1.0 / n as f64);
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        }
        // explicit n = m = 2 value: √π
        assert_relative_eq!(
            dimension_constant(2, 2),
            std::f64::consts::PI.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn flat_disk_equality_case() {
        let sigma = disk(4);
        let f = MeshScalarField::constant(&sigma.mesh, 1.0);
        let lhs = functional_lhs(&sigma, &f, FunctionalMode::Theorem1);
        assert_relative_eq!(lhs.gradient_term, 0.0, epsilon = 1e-12);
        assert_relative_eq!(lhs.total, 2.0 * std::f64::consts::PI, max_relative = 5e-3);
        let rhs = functional_rhs(&sigma, &f, 1.0, FunctionalMode::Theorem1).unwrap();
        assert_relative_eq!(rhs.total, 2.0 * std::f64::consts::PI, max_relative = 5e-3);
        // ratio within half a percent of the sharp value
        assert!((lhs.total / rhs.total - 1.0).abs() < 5e-3);
    }

    #[test]
    fn hemisphere_lhs_value() {
        let chart = euclidean_chart(4, 3.0, None);
        let spec = ImmersionSpec::SphericalCap {
            polar_angle: std::f64::consts::FRAC_PI_2,
        };
        let sigma = build_immersion(&chart, &spec, 4).unwrap();
        let f = MeshScalarField::constant(&sigma.mesh, 1.0);
        let lhs = functional_lhs(&sigma, &f, FunctionalMode::Theorem1);
        // ∫|H| + |∂Σ| = 2·2π + 2π = 6π
        assert_relative_eq!(lhs.total, 6.0 * std::f64::consts::PI, max_relative = 1e-2);
        let rhs = functional_rhs(&sigma, &f, 1.0, FunctionalMode::Theorem1).unwrap();
        // 2·√π·√(2π) = 2π√2
        assert_relative_eq!(
            rhs.total,
            2.0 * std::f64::consts::PI * 2.0_f64.sqrt(),
            max_relative = 1e-2
        );
    }

    #[test]
    fn theorem2_with_zero_profile_reduces() {
        let sigma = disk(3);
        let f = MeshScalarField::from_fn(&sigma.mesh, |p| 1.0 + 0.2 * p[0]);
        let zero = FunctionalMode::Theorem2 {
            b0: 0.0,
            b1: 0.0,
            r0: 3.7,
        };
        let l1 = functional_lhs(&sigma, &f, FunctionalMode::Theorem1);
        let l2 = functional_lhs(&sigma, &f, zero);
        assert_eq!(l1.total, l2.total);
        let r1 = functional_rhs(&sigma, &f, 0.9, FunctionalMode::Theorem1).unwrap();
        let r2 = functional_rhs(&sigma, &f, 0.9, zero).unwrap();
        assert_eq!(r1.total, r2.total);
    }

    #[test]
    fn homogeneity_in_the_density() {
        let sigma = disk(3);
        let f = MeshScalarField::from_fn(&sigma.mesh, |p| 1.0 + 0.5 * p[1] * p[1]);
        let c = 3.7;
        let fc = f.scaled(c);
        let mode = FunctionalMode::Theorem2 {
            b0: 0.3,
            b1: 0.2,
            r0: 1.0,
        };
        let l = functional_lhs(&sigma, &f, mode);
        let lc = functional_lhs(&sigma, &fc, mode);
        assert_relative_eq!(lc.total, c * l.total, max_relative = 1e-12);
        let r = functional_rhs(&sigma, &f, 0.8, mode).unwrap();
        let rc = functional_rhs(&sigma, &fc, 0.8, mode).unwrap();
        assert_relative_eq!(rc.total, c * r.total, max_relative = 1e-12);
    }

    #[test]
    fn low_codimension_rejected() {
        let chart = euclidean_chart(3, 3.0, None);
        let sigma = build_immersion(&chart, &ImmersionSpec::FlatDisk { radius: 1.0 }, 2).unwrap();
        let f = MeshScalarField::constant(&sigma.mesh, 1.0);
        assert!(matches!(
            functional_rhs(&sigma, &f, 1.0, FunctionalMode::Theorem1),
            Err(SubmanifoldError::BadCodimension { m: 1 })
        ));
    }

    #[test]
    fn annulus_isoperimetric_values() {
        let chart = euclidean_chart(4, 3.0, None);
        let spec = ImmersionSpec::FlatAnnulus {
            inner: 0.5,
            outer: 1.0,
        };
        let sigma = build_immersion(&chart, &spec, 4).unwrap();
        let iso = isoperimetric_rhs(&sigma, 1.0, IsoperimetricMode::NonnegativeCurvature).unwrap();
        // |∂Σ| = 3π, RHS = 2√π·(3π/4)^{1/2} = π√3
        assert_relative_eq!(iso.boundary_length, 3.0 * std::f64::consts::PI, max_relative = 5e-3);
        assert_relative_eq!(
            iso.rhs,
            std::f64::consts::PI * 3.0_f64.sqrt(),
            max_relative = 5e-3
        );
        assert!(!iso.vacuous);
        let ratio = iso.boundary_length / iso.rhs;
        assert!((ratio - 1.732).abs() < 0.03 * 1.732);
    }

    #[test]
    fn vacuous_asymptotic_bracket_flagged() {
        let sigma = disk(2);
        let iso = isoperimetric_rhs(
            &sigma,
            1.0,
            IsoperimetricMode::Asymptotic {
                b0: 0.0,
                b1: 10.0,
                r0: 1.0,
            },
        )
        .unwrap();
        assert!(iso.vacuous);
        assert!(iso.rhs <= 0.0);
    }
}
